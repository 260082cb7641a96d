use proptest::prelude::*;

use smlsafe::compare::{default_profiles, rank, Criterion, Weights};
use smlsafe::monitor::{residual_dangerous_rate, IndependenceModel, MonitorPolicy, MonitorState};
use smlsafe::process::{coverage, Assessment, EvidenceRecord, RatingLevel, XaiTechnique};
use smlsafe::proven_in_use::{qualify, ChangeEvent, ChangeKind, PiuError, QualifyParams, UsageEntry, UsageLedger};
use smlsafe::quant_eval::{
    empirical_in_range_probability, evaluate, normal_in_range_probability, AcceptanceTarget, EmpiricalSample, Evidence,
    NormalModel, SafeRange,
};
use smlsafe::redundancy::{enumerate_outcomes, vote, ChannelOutput, ChannelSpec, VoterConfig, WrongOutputMode};
use smlsafe::simulator::run;
use smlsafe::simulator::{Architecture, ErrorModel, Scenario, TruthSignal};
use smlsafe::{DemandProfile, Emission, PerformanceClass, SafeStateCommand};
use smlsafe_oracle as oracle;

fn class_strategy() -> impl Strategy<Value = PerformanceClass> {
    prop::sample::select(PerformanceClass::ALL.to_vec())
}

proptest! {
    #[test]
    fn class_thresholds_increase(i in 0usize..5) {
        let (a, b) = (PerformanceClass::ALL[i], PerformanceClass::ALL[i + 1]);
        prop_assert!(a.threshold() < b.threshold());
        prop_assert!(a.tail() > b.tail());
    }

    #[test]
    fn class_tails_round_trip_through_json(c in class_strategy()) {
        let text = serde_json::to_string(&(c.tail(), c.threshold())).unwrap();
        let (tail, th): (f64, f64) = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(tail, c.tail());
        prop_assert_eq!(th, c.threshold());
    }

    #[test]
    fn normal_probability_monotone(
        mean in -5.0f64..5.0,
        std in 0.01f64..10.0,
        h1 in 0.0f64..20.0,
        h2 in 0.0f64..20.0,
        s2 in 0.01f64..10.0,
    ) {
        let m = NormalModel::new(mean, std).unwrap();
        let (lo, hi) = (h1.min(h2), h1.max(h2));
        let p_lo = normal_in_range_probability(&m, &SafeRange::new(lo).unwrap(), 0.0).p;
        let p_hi = normal_in_range_probability(&m, &SafeRange::new(hi).unwrap(), 0.0).p;
        prop_assert!(p_lo <= p_hi);
        // centred: wider spread never helps
        let (a, b) = (std.min(s2), std.max(s2));
        let r = SafeRange::new(h1).unwrap();
        let pa = normal_in_range_probability(&NormalModel::new(mean, a).unwrap(), &r, mean).p;
        let pb = normal_in_range_probability(&NormalModel::new(mean, b).unwrap(), &r, mean).p;
        prop_assert!(pb <= pa);
    }

    #[test]
    fn empirical_lower_bound_below_point(n in 1u64..3000, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
        let k = (n as f64 * frac).round() as u64;
        let samples: Vec<EmpiricalSample> =
            (0..n).map(|i| EmpiricalSample::new(if i < k { 0.0 } else { 5.0 }, 0.0)).collect();
        let e = empirical_in_range_probability(&samples, &SafeRange::new(1.0).unwrap(), conf).unwrap();
        prop_assert_eq!(e.in_range, k);
        prop_assert!(e.p_lower_bound <= e.p_point);
        prop_assert!(e.q_upper_bound >= 1.0 - e.p_point - 1e-15);
    }

    #[test]
    fn verdict_invariant_under_rescaling(
        errs in prop::collection::vec(-3.0f64..3.0, 1..200),
        truths in prop::collection::vec(-100.0f64..100.0, 200),
        half in 0.1f64..3.0,
        scale in 1e-3f64..1e3,
        class in class_strategy(),
    ) {
        // keep errors clear of the band edge so rounding cannot move a sample across it
        prop_assume!(errs.iter().all(|e| (e.abs() / half - 1.0).abs() > 1e-6));
        let base: Vec<EmpiricalSample> =
            errs.iter().zip(&truths).map(|(e, t)| EmpiricalSample::new(t + e, *t)).collect();
        let scaled: Vec<EmpiricalSample> =
            base.iter().map(|s| EmpiricalSample::new(s.output * scale, s.truth * scale)).collect();
        let a = evaluate(Evidence::Samples { samples: &base, confidence: 0.95 }, &SafeRange::new(half).unwrap(), AcceptanceTarget::Class(class)).unwrap();
        let b = evaluate(Evidence::Samples { samples: &scaled, confidence: 0.95 }, &SafeRange::new(half * scale).unwrap(), AcceptanceTarget::Class(class)).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.in_range, b.in_range);
        let m = NormalModel::new(truths[0] + errs[0], half).unwrap();
        let ms = NormalModel::new(m.mean * scale, half * scale).unwrap();
        let r = SafeRange::new(half * 2.0).unwrap();
        let rs = SafeRange::new(half * 2.0 * scale).unwrap();
        let a = evaluate(Evidence::Normal { model: m, truth: truths[0] }, &r, AcceptanceTarget::Class(class)).unwrap();
        let b = evaluate(Evidence::Normal { model: ms, truth: truths[0] * scale }, &rs, AcceptanceTarget::Class(class)).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn residual_rate_monotone(
        p in 0.0f64..=1.0, dp in 0.0f64..=1.0,
        miss in 0.0f64..=1.0, dm in 0.0f64..=1.0,
        beta in 0.0f64..=1.0, db in 0.0f64..=1.0,
        d in 1e-3f64..1e6, dd in 0.0f64..1e6,
    ) {
        let base = residual_dangerous_rate(p, &IndependenceModel::new(miss, beta).unwrap(), &DemandProfile::new(1e-8, d).unwrap()).unwrap();
        let up = |p: f64, m: f64, b: f64, d: f64| {
            residual_dangerous_rate(p, &IndependenceModel::new(m, b).unwrap(), &DemandProfile::new(1e-8, d).unwrap()).unwrap()
        };
        prop_assert!(up((p + dp).min(1.0), miss, beta, d) >= base);
        prop_assert!(up(p, (miss + dm).min(1.0), beta, d) >= base);
        prop_assert!(up(p, miss, (beta + db).min(1.0), d) >= base);
        prop_assert!(up(p, miss, beta, d + dd) >= base);
        prop_assert_eq!(up(p, miss, 0.0, d), d * p * miss);
        prop_assert_eq!(up(p, miss, 1.0, d), d * p);
        prop_assert_eq!(up(p, 0.0, beta, d), d * p * beta);
    }

    #[test]
    fn stop_latches(
        values in prop::collection::vec(-50.0f64..150.0, 1..400),
        rate in prop::option::of(1.0f64..80.0),
    ) {
        let policy = MonitorPolicy { max_rate_of_change: rate, ..MonitorPolicy::range(0.0, 100.0) };
        let mut m = MonitorState::new(policy, SafeStateCommand::Stop).unwrap();
        let out = m.supervise(values.iter().copied()).unwrap();
        let first = out.iter().position(|e| matches!(e, Emission::Safe(_)));
        if let Some(i) = first {
            prop_assert!(out[i..].iter().all(|e| *e == Emission::Safe(SafeStateCommand::Stop)));
        }
        for (e, v) in out.iter().zip(&values).take(first.unwrap_or(out.len())) {
            prop_assert_eq!(*e, Emission::Forward(*v));
        }
    }

    #[test]
    fn static_range_is_interval_membership(min in -100.0f64..100.0, w in 1e-6f64..100.0, v in -300.0f64..300.0) {
        let max = min + w;
        let mut m = MonitorState::new(MonitorPolicy::range(min, max), SafeStateCommand::Stop).unwrap();
        prop_assert_eq!(m.check(v, None).unwrap().is_pass(), min <= v && v <= max);
        // no hidden state: the same call again gives the same answer
        prop_assert_eq!(m.check(v, None).unwrap().is_pass(), min <= v && v <= max);
    }

    #[test]
    fn enumeration_partition_and_monotonicity(
        ps in prop::collection::vec((0.0f64..0.5, 0.0f64..0.4), 3..6),
        bump in 0.0f64..0.1,
        idx in 0usize..6,
        k_off in 0usize..3,
    ) {
        let n = ps.len();
        let k = (n / 2 + 1 + k_off).min(n);
        let chans: Vec<ChannelSpec> = ps.iter().enumerate().map(|(i, (w, s))| ChannelSpec::new(format!("c{i}"), *w, *s)).collect();
        let con = enumerate_outcomes(&chans, k, WrongOutputMode::Concordant).unwrap();
        let dis = enumerate_outcomes(&chans, k, WrongOutputMode::Dissenting).unwrap();
        prop_assert!((con.total() - 1.0).abs() < 1e-12);
        prop_assert!((dis.total() - 1.0).abs() < 1e-12);
        prop_assert!(dis.dangerous <= con.dangerous);
        let mut raised = chans.clone();
        let i = idx % n;
        raised[i].p_undetected_wrong = (raised[i].p_undetected_wrong + bump).min(1.0 - raised[i].p_detected_fault);
        for mode in [WrongOutputMode::Concordant, WrongOutputMode::Dissenting] {
            let a = enumerate_outcomes(&chans, k, mode).unwrap().dangerous;
            let b = enumerate_outcomes(&raised, k, mode).unwrap().dangerous;
            prop_assert!(b >= a - 1e-15, "{:?}: {} -> {}", mode, a, b);
        }
    }

    #[test]
    fn single_channel_enumeration(pw in 0.0f64..0.6, ps in 0.0f64..0.4) {
        let c = [ChannelSpec::new("only", pw, ps)];
        prop_assert_eq!(enumerate_outcomes(&c, 1, WrongOutputMode::Concordant).unwrap().dangerous, pw);
    }

    #[test]
    fn vote_is_permutation_invariant(
        raw in prop::collection::vec(prop::option::of(prop::sample::select(vec![0.0, 0.05, 0.1, 1.0, 1.02, 3.0, -2.0])), 3..8),
        tol in prop::sample::select(vec![0.0, 0.03, 0.06, 0.5]),
        seed in any::<u64>(),
    ) {
        let n = raw.len();
        let outs: Vec<ChannelOutput> = raw.iter().map(|v| v.map_or(ChannelOutput::Silent, ChannelOutput::Value)).collect();
        let cfg = VoterConfig::majority(n, tol).unwrap();
        let base = vote(&outs, &cfg).unwrap();
        let mut shuffled = outs.clone();
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(vote(&shuffled, &cfg).unwrap(), base);
    }

    #[test]
    fn coverage_never_drops(a in 1u32..32, b in 0u32..32) {
        let pick = |m: u32| -> Vec<XaiTechnique> {
            XaiTechnique::ALL.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, t)| *t).collect()
        };
        let small = coverage(&pick(a)).unwrap();
        let big = coverage(&pick(a | b)).unwrap();
        for (act, cap) in &small {
            prop_assert!(big[act] >= *cap);
        }
    }

    #[test]
    fn compliance_ignores_audit_trail(levels in prop::collection::vec(0usize..4, 9), rerates in prop::collection::vec((0usize..9, 0usize..4), 0..10)) {
        let lv = [RatingLevel::N, RatingLevel::P, RatingLevel::L, RatingLevel::F];
        let id = |i: usize| format!("SWE.2.BP{}", i + 1);
        let ev = |i: usize| EvidenceRecord {
            practice_id: id(i),
            description: "design review minutes".into(),
            artifact_uri: "file:///evidence".into(),
            recorded_by: "assessor".into(),
            timestamp: "2024-01-01T00:00:00Z".into(),
        };
        let mut history = Assessment::new();
        for (i, l) in &rerates {
            history.rate(&id(*i), vec![ev(*i)], lv[*l], "earlier").unwrap();
        }
        let mut fresh = Assessment::new();
        for (i, l) in levels.iter().enumerate() {
            history.rate(&id(i), vec![ev(i)], lv[*l], "final").unwrap();
            fresh.rate(&id(i), vec![ev(i)], lv[*l], "final").unwrap();
        }
        let (a, b) = (history.report().unwrap(), fresh.report().unwrap());
        prop_assert_eq!(a.compliant, b.compliant);
        prop_assert_eq!(a.noncompliant, b.noncompliant);
        prop_assert_eq!(a.compliant, levels.iter().all(|l| *l >= 2));
    }

    #[test]
    fn lambda_upper_monotone(h in 1.0f64..1e6, dh in 1.0f64..1e6, f in 0u64..20) {
        let at = |hours: f64, failures: u64| {
            let mut l = UsageLedger::new("sw", "hw");
            l.append(UsageEntry { timestamp: 1, period_hours: hours, demands: 1000, dangerous_failures: failures, software_identity: "sw".into(), hardware_identity: "hw".into() }).unwrap();
            qualify(&l, &QualifyParams::new(1e-7)).unwrap().lambda_upper
        };
        prop_assert!(at(h + dh, f) < at(h, f));
        prop_assert!(at(h, f + 1) > at(h, f));
        let c = at(h, 0) * h;
        prop_assert!((c / oracle::poisson_upper_mean(0, 0.95) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn changes_never_grow_the_window(hours in prop::collection::vec(1.0f64..5000.0, 1..8), cut in 0usize..8) {
        let mut l = UsageLedger::new("sw", "hw");
        let entry = |ts: i64, h: f64| UsageEntry { timestamp: ts, period_hours: h, demands: 10, dangerous_failures: 0, software_identity: "sw".into(), hardware_identity: "hw".into() };
        for (i, h) in hours.iter().enumerate() {
            if i == cut {
                l.record_change(ChangeEvent { timestamp: i as i64 * 10 + 5, kind: ChangeKind::Retraining, note: String::new(), software_identity: None, hardware_identity: None }).unwrap();
                let after = qualify(&l, &QualifyParams::new(1.0));
                prop_assert!(matches!(after, Err(PiuError::EmptyEligibleWindow)));
            }
            l.append(entry(i as i64 * 10 + 10, *h)).unwrap();
        }
        let snapshot = l.clone();
        let q = qualify(&l, &QualifyParams::new(1.0)).unwrap();
        prop_assert_eq!(&l, &snapshot);
        let total: f64 = hours.iter().sum();
        if cut < hours.len() {
            let tail: f64 = hours[cut..].iter().sum();
            prop_assert!((q.eligible_hours - tail).abs() < 1e-9);
            prop_assert!(q.eligible_hours <= total);
        } else {
            prop_assert!((q.eligible_hours - total).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_ignores_weight_scale(ws in prop::collection::vec(0.0f64..5.0, 4), k in 1e-3f64..1e3) {
        let w: Weights = Criterion::ALL.iter().zip(&ws).map(|(c, v)| (*c, *v)).collect();
        let scaled: Weights = w.iter().map(|(c, v)| (*c, v * k)).collect();
        let ids = |r: smlsafe::compare::Ranking| r.entries.into_iter().map(|e| e.tsc_id).collect::<Vec<_>>();
        let a = rank(&default_profiles(), Some(&w)).unwrap();
        let b = rank(&default_profiles(), Some(&scaled)).unwrap();
        prop_assert_eq!(&a.tie_groups, &b.tie_groups);
        prop_assert_eq!(ids(a.clone()), ids(b));
        for e in &a.entries {
            let p = default_profiles().into_iter().find(|p| p.tsc_id == e.tsc_id).unwrap();
            let scores: Vec<u8> = Criterion::ALL.iter().map(|c| p.scores[c]).collect();
            prop_assert!((e.total - oracle::weighted_total(&scores, &ws)).abs() < 1e-12);
        }
    }
}

fn scenario(seed: u64, gross: f64, std: f64, arch: Architecture) -> Scenario {
    Scenario {
        seed,
        duration_hours: 20.0,
        demand_rate: 1000.0,
        confidence: 0.95,
        truth: TruthSignal::Sine {
            amplitude: 5.0,
            period_demands: 700.0,
            offset: 20.0,
        },
        error_model: ErrorModel {
            gaussian_std: std,
            bias: 0.0,
            gross_error_prob: gross,
            gross_error_magnitude: 10.0,
            detected_fault_prob: 0.0,
        },
        architecture: arch,
        safe_range: SafeRange::new(1.0).unwrap(),
        target: smlsafe::quant_eval::TargetSpec::class(PerformanceClass::A),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulator_orderings(seed in any::<u64>(), gross in 0.0f64..0.05, std in 0.0f64..0.8) {
        let bare = run(&scenario(seed, gross, std, Architecture::Bare {})).unwrap();
        prop_assert_eq!(bare.correct_events + bare.dangerous_events + bare.safe_state_events, bare.demands);
        prop_assert_eq!(bare.safe_state_events, 0);
        // plausibility bound equal to the band catches every out-of-range value
        let perfect = Architecture::Monitored {
            policy: MonitorPolicy { plausibility: Some(1.0), ..Default::default() },
            independence: IndependenceModel::new(0.0, 0.0).unwrap(),
            on_violation: SafeStateCommand::substitute(20.0).unwrap(),
        };
        let mon = run(&scenario(seed, gross, std, perfect)).unwrap();
        prop_assert!(mon.dangerous_events <= bare.dangerous_events);
        prop_assert_eq!(mon.correct_events + mon.dangerous_events + mon.safe_state_events, mon.demands);

        let channel = ErrorModel { gaussian_std: std, bias: 0.0, gross_error_prob: gross, gross_error_magnitude: 10.0, detected_fault_prob: 0.01 };
        let red = |mode| Architecture::Redundant {
            channels: vec![channel; 3],
            voter: VoterConfig::majority(3, 0.5).unwrap().with_mode(mode),
        };
        let con = run(&scenario(seed, gross, std, red(WrongOutputMode::Concordant))).unwrap();
        let dis = run(&scenario(seed, gross, std, red(WrongOutputMode::Dissenting))).unwrap();
        prop_assert!(dis.dangerous_events <= con.dangerous_events);
        prop_assert_eq!(con.correct_events + con.dangerous_events + con.safe_state_events, con.demands);
    }
}
