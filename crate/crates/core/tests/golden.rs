//! End-to-end golden runs on the built-in example models.

use pac_core::abs_check::{check_cause_abs, discover_abs, AbsCheckOutcome, AbstractPacQuery};
use pac_core::abstraction::{abstract_model, enumerate_subgraphs, refine_split, AbsMode, AbstractId};
use pac_core::concrete::{check_cause, discover, export_smt, PacQuery};
use pac_core::fixtures::{fig2_effect, fig2_model, fig2_predicates, fig7a_model};
use pac_core::mdp::min_max_eventually;
use pac_core::refine::{self, select_split_state, RefineConfig};
use pac_core::{parse_rat, Predicate, Rat};
use std::collections::BTreeSet;

fn rat(text: &str) -> Rat {
    parse_rat(text).unwrap()
}

fn index_of(a: &pac_core::abstraction::Abstraction, id: AbstractId) -> usize {
    a.states.iter().position(|s| s.id == id).unwrap()
}

#[test]
fn concrete_discovery_finds_s1() {
    let m = fig2_model();
    let q = PacQuery::new(&m, fig2_effect());
    let r = discover(&q).unwrap().expect("cause");
    assert_eq!(r.cause, BTreeSet::from([1]));
    assert_eq!(r.p_aw.as_rat(), &rat("69/200"));
    assert_eq!(r.p_cw.as_rat(), &rat("3/20"));
}

#[test]
fn concrete_check_refutes_s2() {
    let m = fig2_model();
    let q = PacQuery::new(&m, fig2_effect());
    let out = check_cause(&q, &BTreeSet::from([2])).unwrap();
    assert!(out.confirmed().is_none());
}

#[test]
fn initial_partition_matches_figure() {
    let m = fig2_model();
    let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
    let groups: Vec<(u128, Vec<usize>)> = a
        .states
        .iter()
        .map(|s| (s.id.bits, s.members.iter().copied().collect()))
        .collect();
    assert_eq!(
        groups,
        vec![
            (0, vec![0]),
            (1, vec![1, 3, 4]),
            (3, vec![7, 9]),
            (7, vec![6, 8]),
            (11, vec![2, 5]),
            (15, vec![10]),
        ]
    );
}

#[test]
fn abstract_pass_refutes_both_candidates() {
    let m = fig2_model();
    let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
    let q = AbstractPacQuery::new(&a, fig2_effect());
    let s1 = index_of(&a, AbstractId::grouped(1));
    let s11 = index_of(&a, AbstractId::grouped(11));

    match check_cause_abs(&q, &BTreeSet::from([s1])).unwrap() {
        AbsCheckOutcome::Refuted { reasons } => {
            assert!(reasons.iter().any(|r| r.contains("1/10") && r.contains("3/20")), "{reasons:?}");
        }
        AbsCheckOutcome::Confirmed(_) => panic!("expected refutation"),
    }
    match check_cause_abs(&q, &BTreeSet::from([s11])).unwrap() {
        AbsCheckOutcome::Refuted { reasons } => {
            assert!(reasons.iter().any(|r| r.contains("3/20") && r.contains("9/20")), "{reasons:?}");
        }
        AbsCheckOutcome::Confirmed(_) => panic!("expected refutation"),
    }
    assert!(discover_abs(&q).unwrap().is_none());
}

#[test]
fn split_selection_and_refined_confirmation() {
    let m = fig2_model();
    let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
    let effect = {
        let concrete = m.satisfying_set(&fig2_effect()).unwrap();
        a.image(&concrete).0
    };
    let target = select_split_state(&a, &effect).unwrap();
    assert_eq!(a.states[target].id, AbstractId::grouped(1));
    let iv = min_max_eventually(&a.mdp, &effect);
    assert_eq!(iv.lo[target].as_rat(), &rat("1/5"));
    assert_eq!(iv.hi[target].as_rat(), &rat("9/10"));

    let b = refine_split(&a, target, &rat("3/5"), &m.satisfying_set(&fig2_effect()).unwrap()).unwrap();
    let q = AbstractPacQuery::new(&b, fig2_effect());
    let r = discover_abs(&q).unwrap().expect("refined cause");
    assert_eq!(b.states[*r.cause.iter().next().unwrap()].id, AbstractId::singleton(1, 1));
    assert_eq!(r.p_min_aw, rat("69/200"));
    assert_eq!(r.p_max_cw, rat("3/20"));
}

#[test]
fn refinement_loop_confirms_in_round_two() {
    let m = fig2_model();
    let cfg = RefineConfig::default();
    let (report, trace) =
        refine::run(&m, &fig2_predicates(), &fig2_effect(), &[], &cfg).unwrap();
    let r = report.expect("cause");
    assert_eq!(r.cause, BTreeSet::from([1]));
    assert_eq!(r.p_aw.as_rat(), &rat("69/200"));
    assert_eq!(r.p_cw.as_rat(), &rat("3/20"));
    assert_eq!(trace.rounds.len(), 2);
    assert!(trace.rounds[0].split.as_ref().unwrap().0.contains('1'));
}

#[test]
fn subgraph_decomposition_matches_caption() {
    let m = fig7a_model();
    let w = vec![Predicate::parse("w").unwrap()];
    let subgraphs = enumerate_subgraphs(&m, &w, 100_000).unwrap();
    let names = vec!["w".to_string()];
    let mut sigs: Vec<String> = subgraphs.iter().map(|g| g.signature_text(&names)).collect();
    sigs.sort();
    assert_eq!(sigs, vec!["(w)", "(w,!w)", "(w,!w,w)", "(w,!w,w,!w)"]);
    assert_eq!(subgraphs.iter().map(|g| g.path_count).sum::<usize>(), 10);
}

#[test]
fn smt_export_is_stable() {
    let m = fig2_model();
    let q = PacQuery::new(&m, fig2_effect());
    let a = export_smt(&q).unwrap();
    let b = export_smt(&q).unwrap();
    assert_eq!(a.text, b.text);
    assert!(a.text.starts_with("; probabilistic actual cause instance"));
    assert!(a.text.contains("(check-sat)"));
}
