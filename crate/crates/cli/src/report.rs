//! Report envelope shared by every subcommand, rendered either as JSON or as
//! flat `key: value` text carrying the same numbers.

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub summary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub config: Value,
    pub result: Value,
}

impl Report {
    pub fn new(command: &'static str, summary: String, config: Value, result: Value) -> Self {
        Report {
            tool: "smlsafe",
            version: smlsafe::VERSION,
            command,
            summary,
            seed: None,
            confidence: None,
            config,
            result,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => {
                let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Text => {
                let mut out = format!("smlsafe {} {}\n{}\n\n", self.version, self.command, self.summary);
                for (k, v) in flatten(&self.to_value()) {
                    if k == "summary" || k == "tool" || k == "command" || k == "version" {
                        continue;
                    }
                    out.push_str(&format!("{k}: {v}\n"));
                }
                out
            }
        }
    }
}

/// Human-friendly number for summary lines.
pub fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e7) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Leaves of a JSON value as `(dotted.path, rendered scalar)`; array items
/// are indexed as `path[i]`. Scalars keep their JSON spelling.
pub fn flatten(v: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

fn walk(path: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => walk_map(path, m, out),
        Value::Array(items) => {
            if items.is_empty() {
                out.push((path.to_string(), "[]".into()));
            }
            for (i, item) in items.iter().enumerate() {
                walk(&format!("{path}[{i}]"), item, out);
            }
        }
        Value::String(s) => out.push((path.to_string(), s.clone())),
        other => out.push((path.to_string(), other.to_string())),
    }
}

fn walk_map(path: &str, m: &Map<String, Value>, out: &mut Vec<(String, String)>) {
    if m.is_empty() && !path.is_empty() {
        out.push((path.to_string(), "{}".into()));
    }
    for (k, v) in m {
        let p = if path.is_empty() {
            k.clone()
        } else {
            format!("{path}.{k}")
        };
        walk(&p, v, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn summary_numbers() {
        assert_eq!(num(2.5e-8), "2.5e-8");
        assert_eq!(num(0.95), "0.95");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(8760.0), "8760");
    }

    #[test]
    fn flatten_paths() {
        let v = json!({"a": {"b": 1.5e-8, "c": [true, "x"]}, "d": null, "e": []});
        let f = flatten(&v);
        assert_eq!(
            f,
            vec![
                ("a.b".to_string(), "1.5e-8".to_string()),
                ("a.c[0]".into(), "true".into()),
                ("a.c[1]".into(), "x".into()),
                ("d".into(), "null".into()),
                ("e".into(), "[]".into()),
            ]
        );
    }
}
