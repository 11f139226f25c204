//! Acceptance gate: one test per criterion, each printing a pass line.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

use pac_core::abs_check::{check_cause_abs, discover_abs, AbsCheckOutcome, AbstractPacQuery};
use pac_core::abstraction::{abstract_model, enumerate_subgraphs, refine_split, AbsMode, AbstractId};
use pac_core::bench::{self, GenSpec};
use pac_core::concrete::{check_cause, discover, PacQuery};
use pac_core::fixtures::{fig2_effect, fig2_model, fig2_predicates, fig7a_model};
use pac_core::mdp::min_max_eventually;
use pac_core::reach::prob_eventually;
use pac_core::refine::{self, select_split_state, RefineConfig};
use pac_core::{parse_rat, Predicate, Rat};
use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

fn rat(text: &str) -> Rat {
    parse_rat(text).unwrap()
}

#[test]
fn criterion_1_concrete_golden_run() {
    let start = Instant::now();
    let m = fig2_model();
    let q = PacQuery::new(&m, fig2_effect());
    let r = discover(&q).unwrap().expect("cause exists");
    assert_eq!(r.cause, BTreeSet::from([1]));
    assert_eq!(r.p_aw.as_rat(), &rat("69/200"));
    assert_eq!(r.p_cw.as_rat(), &rat("3/20"));
    assert!(start.elapsed().as_secs() < 1);
    println!("criterion 1 (concrete golden run, 69/200 vs 3/20): pass");
}

#[test]
fn criterion_2_abstraction_golden_run() {
    let start = Instant::now();
    let m = fig2_model();
    let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
    let q = AbstractPacQuery::new(&a, fig2_effect());
    let index_of = |a: &pac_core::abstraction::Abstraction, id: AbstractId| {
        a.states.iter().position(|s| s.id == id).unwrap()
    };

    let s1 = index_of(&a, AbstractId::grouped(1));
    let s11 = index_of(&a, AbstractId::grouped(11));
    let refuted_with = |out: AbsCheckOutcome, lhs: &str, rhs: &str| match out {
        AbsCheckOutcome::Refuted { reasons } => {
            assert!(reasons.iter().any(|r| r.contains(lhs) && r.contains(rhs)), "{reasons:?}");
        }
        AbsCheckOutcome::Confirmed(_) => panic!("expected refutation"),
    };
    refuted_with(check_cause_abs(&q, &BTreeSet::from([s1])).unwrap(), "1/10", "3/20");
    refuted_with(check_cause_abs(&q, &BTreeSet::from([s11])).unwrap(), "3/20", "9/20");

    let concrete_effect = m.satisfying_set(&fig2_effect()).unwrap();
    let (abs_effect, _) = a.image(&concrete_effect);
    let target = select_split_state(&a, &abs_effect).unwrap();
    assert_eq!(a.states[target].id, AbstractId::grouped(1));
    let iv = min_max_eventually(&a.mdp, &abs_effect);
    assert_eq!(iv.lo[target].as_rat(), &rat("1/5"));
    assert_eq!(iv.hi[target].as_rat(), &rat("9/10"));

    let b = refine_split(&a, target, &rat("3/5"), &concrete_effect).unwrap();
    let q2 = AbstractPacQuery::new(&b, fig2_effect());
    let r = discover_abs(&q2).unwrap().expect("refined cause");
    assert_eq!(b.states[*r.cause.iter().next().unwrap()].id, AbstractId::singleton(1, 1));
    assert_eq!(r.p_min_aw, rat("69/200"));
    assert_eq!(r.p_max_cw, rat("3/20"));
    assert!(start.elapsed().as_secs() < 1);
    println!("criterion 2 (abstraction golden run, split of s_1): pass");
}

#[test]
fn criterion_3_refinement_soundness() {
    let effect = Predicate::parse("fail").unwrap();
    let cfg = RefineConfig::default();
    let mut processed = 0usize;
    let mut causes = 0usize;
    for seed in 0..600u64 {
        if processed >= 220 {
            break;
        }
        let spec = GenSpec {
            seed,
            depth: 3,
            kmin: 1 + (seed % 2) as usize,
            kmax: 3,
            ..GenSpec::default()
        };
        let m = bench::generate(&spec).unwrap();
        assert!(m.len() <= 40);
        if m.satisfying_set(&effect).unwrap().is_empty() {
            continue;
        }
        processed += 1;
        let preds = bench::default_predicates(&m, &spec.effect_rule);
        let (report, _) = refine::run(&m, &preds, &effect, &[], &cfg).unwrap();
        if let Some(r) = report {
            causes += 1;
            let q = PacQuery::new(&m, effect.clone());
            let out = check_cause(&q, &r.cause).unwrap();
            let confirmed = out.confirmed().expect("refinement cause must re-confirm");
            assert_eq!(confirmed.p_aw, r.p_aw, "seed {seed}");
            assert_eq!(confirmed.p_cw, r.p_cw, "seed {seed}");
        }
    }
    assert!(processed >= 200, "only {processed} models had effect states");
    println!(
        "criterion 3 (soundness on {processed} models, {causes} causes re-confirmed): pass"
    );
}

#[test]
fn criterion_4_oracle_equivalence() {
    let effect = Predicate::parse("fail").unwrap();
    let mut total = 0usize;
    for seed in 0..250u64 {
        for (depth, kmax) in [(2usize, 3usize), (3, 2)] {
            total += 1;
            let spec = GenSpec { seed, depth, kmin: 1, kmax, ..GenSpec::default() };
            let m = bench::generate(&spec).unwrap();
            assert!(m.len() <= 15);
            let q = PacQuery::new(&m, effect.clone());
            if m.satisfying_set(&effect).unwrap().is_empty() {
                continue;
            }
            let analytic = discover(&q).unwrap();
            let oracle = bench::oracle_discover(&q, 100_000).unwrap();
            match (analytic, oracle) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(a.cause, b.cause, "seed {seed}");
                    assert_eq!(a.p_aw.as_rat(), &b.p_aw, "seed {seed}");
                    assert_eq!(a.p_cw.as_rat(), &b.p_cw, "seed {seed}");
                }
                (a, b) => panic!("seed {seed}: verdicts differ ({a:?} vs {b:?})"),
            }
        }
    }
    assert_eq!(total, 500);
    println!("criterion 4 (oracle equivalence on {total} models): pass");
}

#[test]
fn criterion_5_subgraph_decomposition() {
    let m = fig7a_model();
    let w = vec![Predicate::parse("w").unwrap()];
    let names = vec!["w".to_string()];
    let subgraphs = enumerate_subgraphs(&m, &w, 100_000).unwrap();
    let mut sigs: Vec<String> = subgraphs.iter().map(|g| g.signature_text(&names)).collect();
    sigs.sort();
    assert_eq!(sigs, vec!["(w)", "(w,!w)", "(w,!w,w)", "(w,!w,w,!w)"]);
    println!("criterion 5 (four stutter subgraphs): pass");
}

#[test]
fn criterion_6_abstraction_sandwich() {
    let effect = Predicate::parse("fail").unwrap();
    let mut checked_models = 0usize;
    for seed in 0..200u64 {
        let spec = GenSpec { seed, depth: 3, kmin: 1, kmax: 3, ..GenSpec::default() };
        let m = bench::generate(&spec).unwrap();
        let concrete_effect = m.satisfying_set(&effect).unwrap();
        // The predicate set separates the effect, so the partition never
        // mixes effect and non-effect states.
        let preds = bench::default_predicates(&m, &spec.effect_rule);
        let a = abstract_model(&m, &preds, AbsMode::Plain).unwrap();
        let (abs_effect, warnings) = a.image(&concrete_effect);
        assert!(warnings.is_empty(), "seed {seed}: {warnings:?}");
        let iv = min_max_eventually(&a.mdp, &abs_effect);
        let reach = prob_eventually(&m, &concrete_effect);
        for s in 0..m.len() {
            let i = a.map[s];
            if i == usize::MAX {
                continue;
            }
            let v = reach.at(s).as_rat();
            assert!(iv.lo[i].as_rat() <= v, "seed {seed} state {s} below Pmin");
            assert!(v <= iv.hi[i].as_rat(), "seed {seed} state {s} above Pmax");
        }
        checked_models += 1;
    }
    assert_eq!(checked_models, 200);
    println!("criterion 6 (sandwich property on {checked_models} models): pass");
}

#[test]
fn criterion_7_performance_harness() {
    let effect = Predicate::parse("fail").unwrap();
    let cfg = RefineConfig {
        alpha: rat("99/100"),
        max_rounds: 3,
        fallback_concrete: true,
        ..RefineConfig::default()
    };
    let mut report = bench::BenchReport::default();
    for seed in 1..=3u64 {
        let spec = GenSpec {
            seed,
            depth: 11,
            kmin: 2,
            kmax: 2,
            budget: 10_000,
            wmax: 4,
            effect_rule: Predicate::parse("pos < 2").unwrap(),
            ..GenSpec::default()
        };
        let m = bench::generate(&spec).unwrap();
        assert!(m.len() >= 2000, "seed {seed}: only {} states", m.len());
        assert!(!m.satisfying_set(&effect).unwrap().is_empty(), "seed {seed}");
        let preds = bench::default_predicates(&m, &spec.effect_rule);
        let label = format!("seed{seed}");
        let row = bench::compare(&m, &effect, &preds, &label, &cfg).unwrap();
        assert!(row.agreement, "seed {seed}: existence verdicts differ");
        report.rows.push(row);
    }
    let rendered = report.render();
    assert!(rendered.contains("improvement"));
    println!(
        "criterion 7 (both pipelines complete on 3 models of 4095 states, 100% agreement): pass"
    );
}

#[test]
fn criterion_8_byte_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("fig2.dtmc");
    std::fs::write(&model, pac_core::fixtures::FIG2_TEXT).unwrap();
    let model = model.to_str().unwrap();
    let effect = "pos < 0.6 && halt";
    let preds = "vel >= 0.03; pos >= 0.6; pos >= 0.4; pos >= 0.3";
    let invocations: Vec<Vec<&str>> = vec![
        vec!["discover", "--model", model, "--effect", effect],
        vec!["refine", "--model", model, "--effect", effect, "--preds", preds],
        vec!["abs-discover", "--model", model, "--effect", effect, "--preds", preds],
        vec!["export-smt", "--model", model, "--effect", effect],
        vec!["gen", "--spec", "budget=200,depth=3", "--seed", "11"],
        vec!["validate", "--model", model],
    ];
    for args in &invocations {
        let mut digests = BTreeSet::new();
        for _ in 0..3 {
            let out = Command::new(env!("CARGO_BIN_EXE_pac")).args(args).output().unwrap();
            use std::hash::{DefaultHasher, Hash, Hasher};
            let mut h = DefaultHasher::new();
            out.stdout.hash(&mut h);
            digests.insert(h.finish());
        }
        assert_eq!(digests.len(), 1, "{args:?} produced differing stdout");
    }
    println!("criterion 8 (stdout hash stable across 3 runs x {} commands): pass", invocations.len());
}
