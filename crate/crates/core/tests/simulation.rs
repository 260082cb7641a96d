use smlsafe::monitor::{IndependenceModel, MonitorPolicy};
use smlsafe::quant_eval::{normal_in_range_probability, NormalModel, SafeRange, TargetSpec};
use smlsafe::redundancy::{VoterConfig, WrongOutputMode};
use smlsafe::simulator::{run, run_with, sweep, Architecture, ErrorModel, RunOptions, Scenario, TruthSignal};
use smlsafe::stats::binomial_se;
use smlsafe::{PerformanceClass, SafeStateCommand};
use smlsafe_oracle as oracle;

fn base(seed: u64, demands: f64) -> Scenario {
    Scenario {
        seed,
        duration_hours: demands / 1000.0,
        demand_rate: 1000.0,
        confidence: 0.95,
        truth: TruthSignal::Constant { value: 5.0 },
        error_model: ErrorModel::perfect(),
        architecture: Architecture::Bare {},
        safe_range: SafeRange::new(1.0).unwrap(),
        target: TargetSpec::class(PerformanceClass::B),
    }
}

fn triple(seed: u64, p: f64, mode: WrongOutputMode) -> Scenario {
    let channel = ErrorModel {
        gross_error_prob: p,
        gross_error_magnitude: 100.0,
        ..ErrorModel::perfect()
    };
    Scenario {
        architecture: Architecture::Redundant {
            channels: vec![channel; 3],
            voter: VoterConfig::majority(3, 0.1).unwrap().with_mode(mode),
        },
        ..base(seed, 1e6)
    }
}

#[test]
fn redundant_monte_carlo_matches_enumeration() {
    for p in [1e-1, 1e-2, 1e-3] {
        let exact = oracle::enumerate_identical(3, p, 0.0, 2, true).0;
        let e = run(&triple(7, p, WrongOutputMode::Concordant)).unwrap();
        let se = binomial_se(exact, e.demands);
        assert!(
            (e.dangerous_fraction() - exact).abs() <= 3.0 * se,
            "p={p}: {} vs {exact}",
            e.dangerous_fraction()
        );
        assert!((e.enumeration.unwrap().concordant.dangerous - exact).abs() < 1e-15);
        let d = run(&triple(7, p, WrongOutputMode::Dissenting)).unwrap();
        assert_eq!(d.dangerous_events, 0);
    }
}

#[test]
fn bare_gaussian_matches_normal_model() {
    let mut s = base(3, 1e6);
    s.error_model.gaussian_std = 1.0;
    let e = run(&s).unwrap();
    let p = normal_in_range_probability(&NormalModel::new(5.0, 1.0).unwrap(), &s.safe_range, 5.0).p;
    assert!((e.p_in_range - p).abs() <= 3.0 * binomial_se(p, e.demands));
}

#[test]
fn reports_identical_across_thread_counts() {
    let s = triple(99, 1e-2, WrongOutputMode::Concordant);
    let one = run_with(&s, &RunOptions { threads: Some(1) }, None).unwrap();
    let eight = run_with(&s, &RunOptions { threads: Some(8) }, None).unwrap();
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&eight).unwrap()
    );
    assert_eq!(one, run(&s).unwrap());
}

#[test]
fn monitored_run_respects_escape_probability() {
    let mut s = base(5, 1e6);
    s.error_model = ErrorModel {
        gross_error_prob: 0.01,
        gross_error_magnitude: 10.0,
        ..ErrorModel::perfect()
    };
    s.architecture = Architecture::Monitored {
        policy: MonitorPolicy::range(3.0, 7.0),
        independence: IndependenceModel::new(0.1, 0.0).unwrap(),
        on_violation: SafeStateCommand::substitute(5.0).unwrap(),
    };
    let e = run(&s).unwrap();
    let want = 0.01 * 0.1;
    assert!((e.dangerous_fraction() - want).abs() <= 3.0 * binomial_se(want, e.demands));
    assert_eq!(e.correct_events + e.dangerous_events + e.safe_state_events, e.demands);
}

#[test]
fn sigma_sweep_is_nested() {
    let mut s = base(21, 1e5);
    s.error_model.gaussian_std = 0.5;
    let out = sweep(&s, "half_width", &[0.25, 0.5, 1.0, 2.0]).unwrap();
    for w in out.windows(2) {
        assert!(w[1].1.dangerous_events <= w[0].1.dangerous_events);
    }
}
