//! Numerical building blocks: tail-stable normal probabilities, exact
//! binomial (Clopper-Pearson) and Poisson confidence bounds.
//!
//! Probabilities close to one are always carried together with their
//! complement, computed directly rather than as `1 - p`, because the
//! acceptance tails of interest go down to 1e-9.

use libm::erfc;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_lr;

/// A probability together with its directly computed complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub p: f64,
    pub q: f64,
}

impl Split {
    pub fn from_q(q: f64) -> Self {
        Split { p: 1.0 - q, q }
    }

    pub fn from_p(p: f64) -> Self {
        Split { p, q: 1.0 - p }
    }
}

/// Upper tail of the standard normal, `1 - Phi(x)`, accurate deep in the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

/// Mass of the standard normal on `[lo, hi]` and outside it.
pub fn normal_interval(lo: f64, hi: f64) -> Split {
    if hi <= lo {
        return Split { p: 0.0, q: 1.0 };
    }
    if lo >= 0.0 {
        let p = normal_sf(lo) - normal_sf(hi);
        Split {
            p,
            q: normal_cdf(lo) + normal_sf(hi),
        }
    } else if hi <= 0.0 {
        let p = normal_sf(-hi) - normal_sf(-lo);
        Split {
            p,
            q: normal_cdf(lo) + normal_sf(hi),
        }
    } else {
        let q = normal_sf(-lo) + normal_sf(hi);
        Split { p: 1.0 - q, q }
    }
}

/// Bisection for a nondecreasing `f` on `[lo, hi]`; returns the point where
/// `f` crosses `target`. Runs until the bracket stops shrinking.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quantile of the Beta(a, b) distribution.
pub fn beta_quantile(prob: f64, a: f64, b: f64) -> f64 {
    if prob <= 0.0 {
        return 0.0;
    }
    if prob >= 1.0 {
        return 1.0;
    }
    bisect(0.0, 1.0, prob, |x| beta_reg(a, b, x))
}

/// One-sided exact (Clopper-Pearson) lower confidence bound on a binomial
/// proportion with `successes` out of `trials`.
///
/// Returned as a [`Split`]: `p` is the lower bound on the success
/// probability, `q` the matching upper bound on the failure probability.
pub fn clopper_pearson_lower(successes: u64, trials: u64, confidence: f64) -> Split {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let failures = trials - successes;
    if successes == 0 {
        return Split { p: 0.0, q: 1.0 };
    }
    if failures == 0 {
        // alpha^(1/n) and its complement
        let l = alpha.ln() / trials as f64;
        return Split {
            p: l.exp(),
            q: -l.exp_m1(),
        };
    }
    // upper bound on the failure proportion: Beta(f + 1, n - f) quantile at `confidence`
    let q = beta_quantile(confidence, (failures + 1) as f64, (trials - failures) as f64);
    Split::from_q(q)
}

/// One-sided exact upper confidence bound on a Poisson mean given an
/// observed count: the `confidence` quantile of Gamma(count + 1, 1),
/// equivalently `chi2(confidence; 2(count + 1)) / 2`.
pub fn poisson_upper_mean(count: u64, confidence: f64) -> f64 {
    if count == 0 {
        return -(-confidence).ln_1p();
    }
    let shape = (count + 1) as f64;
    let mut hi = shape + 10.0 * shape.sqrt() + 10.0;
    while gamma_lr(shape, hi) < confidence {
        hi *= 2.0;
    }
    bisect(0.0, hi, confidence, |x| gamma_lr(shape, x))
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_quantile(prob: f64, dof: f64) -> f64 {
    let shape = dof / 2.0;
    let mut hi = dof + 10.0 * dof.sqrt() + 10.0;
    while gamma_lr(shape, hi) < prob {
        hi *= 2.0;
    }
    2.0 * bisect(0.0, hi, prob, |x| gamma_lr(shape, x))
}

/// Binomial standard error of a proportion estimate.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let one = normal_interval(-1.0, 1.0);
        assert!((one.p - 0.682_689_492_137_085_9).abs() < 1e-13);
        assert!((one.p + one.q - 1.0).abs() < 1e-15);
        // deep tail keeps relative precision
        let t = normal_sf(6.0);
        assert!((t / 9.865_876_450_376_98e-10 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn interval_orientation() {
        let a = normal_interval(1.0, 2.0);
        let b = normal_interval(-2.0, -1.0);
        assert!((a.p - b.p).abs() < 1e-16);
        assert_eq!(normal_interval(1.0, 1.0).p, 0.0);
    }

    #[test]
    fn cp_all_successes_closed_form() {
        for n in [10u64, 100, 1000] {
            let s = clopper_pearson_lower(n, n, 0.95);
            assert!((s.p - 0.05f64.powf(1.0 / n as f64)).abs() < 1e-15);
        }
        assert_eq!(clopper_pearson_lower(0, 5, 0.95).p, 0.0);
    }

    #[test]
    fn cp_beta_route_matches_closed_form_limit() {
        // k = n - 1 via the beta route against the direct beta relation
        let s = clopper_pearson_lower(9, 10, 0.95);
        let via_beta = beta_quantile(0.05, 9.0, 2.0);
        assert!((s.p - via_beta).abs() < 1e-12);
    }

    #[test]
    fn poisson_zero_count() {
        let u = poisson_upper_mean(0, 0.95);
        assert!((u - 2.995_732_273_553_991).abs() < 1e-12);
        assert!((chi_square_quantile(0.95, 2.0) / 2.0 - u).abs() < 1e-9);
        assert!(poisson_upper_mean(1, 0.95) > u);
    }
}
