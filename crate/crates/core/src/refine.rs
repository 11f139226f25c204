//! The abstraction-refinement driver: discover on the abstract MDP, split
//! the widest-interval state when nothing is found, repeat. Every abstract
//! hit is re-verified on the concrete chain before it is reported.

use crate::abs_check::{
    check_cause_abs, eligible_abstract, AbsCheckError, AbsCheckOutcome, AbstractPacQuery,
    WStrategy,
};
use crate::abstraction::{abstract_model, refine_split, AbsError, AbsMode, Abstraction};
use crate::concrete::{
    check_cause, CandidatePolicy, CauseReport, CheckOutcome, Mode, PacError, PacQuery,
    RootPolicy,
};
use crate::mdp::min_max_eventually;
use crate::model::Dtmc;
use crate::predicate::Predicate;
use crate::rational::{format_rat, Rat};
use num_traits::Zero;
use std::collections::BTreeSet;
use std::time::Instant;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RefineError {
    #[error(transparent)]
    Abstraction(#[from] AbsError),
    #[error(transparent)]
    AbsCheck(#[from] AbsCheckError),
    #[error(transparent)]
    Concrete(#[from] PacError),
    #[error("all abstract states are singletons; the partition is finest")]
    AllSingleton,
    #[error("alpha must lie in (0, 1]")]
    BadAlpha,
}

/// One refinement round as recorded in the trace.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    /// Abstract state count at the start of the round.
    pub states: usize,
    /// Split performed at the end of the round: name and reach interval of
    /// the selected state.
    pub split: Option<(String, Rat, Rat)>,
    pub outcome: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Default)]
pub struct RefinementTrace {
    pub rounds: Vec<RoundRecord>,
}

impl RefinementTrace {
    /// Line-delimited records; rationals exact, milliseconds wall time.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for r in &self.rounds {
            let (name, lo, hi) = match &r.split {
                Some((n, lo, hi)) => (n.clone(), format_rat(lo), format_rat(hi)),
                None => ("-".into(), "-".into(), "-".into()),
            };
            out.push_str(&format!(
                "round={} states={} split={} lo={} hi={} outcome={} millis={}\n",
                r.round, r.states, name, lo, hi, r.outcome, r.millis
            ));
        }
        out
    }
}

/// The non-singleton abstract state with the widest reach interval; ties
/// go to the lower abstract id.
pub fn select_split_state(
    a: &Abstraction,
    effect_abs: &BTreeSet<usize>,
) -> Result<usize, RefineError> {
    let iv = min_max_eventually(&a.mdp, effect_abs);
    let mut best: Option<(usize, Rat)> = None;
    for (i, st) in a.states.iter().enumerate() {
        if st.members.len() < 2 {
            continue;
        }
        let width = iv.width(i);
        match &best {
            Some((_, w)) if *w >= width => {}
            _ => best = Some((i, width)),
        }
    }
    best.map(|(i, _)| i).ok_or(RefineError::AllSingleton)
}

#[derive(Debug, Clone)]
pub struct RefineConfig {
    /// Preserved fraction of a split state, in (0, 1].
    pub alpha: Rat,
    pub max_rounds: usize,
    pub strategy: WStrategy,
    /// Run the concrete search when the loop exhausts without a cause.
    pub fallback_concrete: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            alpha: Rat::new(3.into(), 5.into()),
            max_rounds: 64,
            strategy: WStrategy::Subgraphs { path_cap: 100_000 },
            fallback_concrete: false,
        }
    }
}

/// Runs the full loop. The returned report, if any, always passed the
/// concrete check; the trace covers every round that started.
pub fn run(
    m: &Dtmc,
    predicates: &[Predicate],
    effect: &Predicate,
    contingencies: &[Predicate],
    cfg: &RefineConfig,
) -> Result<(Option<CauseReport>, RefinementTrace), RefineError> {
    if cfg.alpha.is_zero() || cfg.alpha > Rat::from_integer(1.into()) || cfg.alpha < Rat::zero() {
        return Err(RefineError::BadAlpha);
    }
    let mode = if contingencies.is_empty() {
        AbsMode::Plain
    } else {
        match cfg.strategy {
            WStrategy::WPreserving => AbsMode::WPreserving(contingencies.to_vec()),
            WStrategy::Subgraphs { .. } => AbsMode::Plain,
        }
    };
    let concrete_effect = m.satisfying_set(effect).map_err(PacError::from)?;
    let concrete_query = PacQuery {
        model: m,
        effect: effect.clone(),
        contingencies: contingencies.to_vec(),
        roots: RootPolicy::InitialOnly,
        candidates: CandidatePolicy::SingleState,
    };

    let mut trace = RefinementTrace::default();
    let mut a = abstract_model(m, predicates, mode)?;
    for round in 1..=cfg.max_rounds {
        let start = Instant::now();
        let q = AbstractPacQuery {
            abstraction: &a,
            effect: effect.clone(),
            contingencies: contingencies.to_vec(),
            strategy: cfg.strategy.clone(),
            roots: None,
        };
        let (effect_abs, _) = q.effect_set()?;
        let roots = q.root_set()?;

        let mut found: Option<CauseReport> = None;
        let mut skipped: Vec<String> = Vec::new();
        for i in eligible_abstract(&a, &effect_abs, &roots) {
            let cand = BTreeSet::from([i]);
            let AbsCheckOutcome::Confirmed(_) = check_cause_abs(&q, &cand)? else {
                continue;
            };
            // Mandatory concrete post-verification; an abstract hit that
            // fails it is skipped, not reported.
            let concrete_cause = a.concretize(&cand);
            match check_cause(&concrete_query, &concrete_cause)? {
                CheckOutcome::Confirmed(mut report) => {
                    report.mode = Mode::Abstract { round };
                    found = Some(report);
                    break;
                }
                CheckOutcome::Refuted { .. } => {
                    skipped.push(a.states[i].id.to_string());
                }
            }
        }

        let states_before = a.states.len();
        if let Some(report) = found {
            let mut outcome = format!("cause={}", report.mode);
            if !skipped.is_empty() {
                outcome.push_str(&format!(" skipped={}", skipped.join("+")));
            }
            trace.rounds.push(RoundRecord {
                round,
                states: states_before,
                split: None,
                outcome,
                millis: start.elapsed().as_millis(),
            });
            return Ok((Some(report), trace));
        }

        let mut outcome = String::from("none");
        if !skipped.is_empty() {
            outcome.push_str(&format!(" skipped={}", skipped.join("+")));
        }
        match select_split_state(&a, &effect_abs) {
            Ok(target) => {
                let iv = min_max_eventually(&a.mdp, &effect_abs);
                let split = Some((
                    a.states[target].id.to_string(),
                    iv.lo[target].as_rat().clone(),
                    iv.hi[target].as_rat().clone(),
                ));
                trace.rounds.push(RoundRecord {
                    round,
                    states: states_before,
                    split,
                    outcome,
                    millis: start.elapsed().as_millis(),
                });
                a = refine_split(&a, target, &cfg.alpha, &concrete_effect)?;
            }
            Err(RefineError::AllSingleton) => {
                trace.rounds.push(RoundRecord {
                    round,
                    states: states_before,
                    split: None,
                    outcome: format!("{outcome} finest"),
                    millis: start.elapsed().as_millis(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    if cfg.fallback_concrete {
        let report = crate::concrete::discover(&concrete_query)?;
        return Ok((report, trace));
    }
    Ok((None, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::AbstractId;
    use crate::fixtures::{fig2_effect, fig2_model, fig2_predicates};
    use crate::parse_rat;

    #[test]
    fn fig3a_selects_s1() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let (eff, _) = q.effect_set().unwrap();
        let target = select_split_state(&a, &eff).unwrap();
        assert_eq!(a.states[target].id, AbstractId::grouped(1));
        let iv = min_max_eventually(&a.mdp, &eff);
        assert_eq!(iv.lo[target].as_rat(), &parse_rat("1/5").unwrap());
        assert_eq!(iv.hi[target].as_rat(), &parse_rat("9/10").unwrap());
    }

    #[test]
    fn finest_partition_select_errors() {
        let m = fig2_model();
        let preds: Vec<Predicate> = m
            .states
            .iter()
            .map(|s| Predicate::Cmp {
                var: "pos".into(),
                op: crate::predicate::CmpOp::Ge,
                value: s.values[0].clone(),
            })
            .collect();
        let a = abstract_model(&m, &preds, AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let (eff, _) = q.effect_set().unwrap();
        assert!(matches!(select_split_state(&a, &eff), Err(RefineError::AllSingleton)));
    }

    #[test]
    fn two_round_run_matches_examples() {
        let m = fig2_model();
        let cfg = RefineConfig::default();
        let (report, trace) =
            run(&m, &fig2_predicates(), &fig2_effect(), &[], &cfg).unwrap();
        let report = report.expect("cause found");
        assert_eq!(report.cause, std::collections::BTreeSet::from([1]));
        assert_eq!(report.p_aw.as_rat(), &parse_rat("69/200").unwrap());
        assert_eq!(report.p_cw.as_rat(), &parse_rat("3/20").unwrap());
        assert!(matches!(report.mode, Mode::Abstract { round: 2 }));
        assert_eq!(trace.rounds.len(), 2);
        assert_eq!(trace.rounds[0].outcome, "none");
        assert_eq!(trace.rounds[0].states, 6);
        let (name, lo, hi) = trace.rounds[0].split.as_ref().unwrap();
        assert_eq!(name, "ŝ_1");
        assert_eq!(lo, &parse_rat("1/5").unwrap());
        assert_eq!(hi, &parse_rat("9/10").unwrap());
        assert_eq!(trace.rounds[1].states, 8);
        assert!(trace.rounds[1].outcome.starts_with("cause="));
    }

    #[test]
    fn max_rounds_one_reports_none_with_trace() {
        let m = fig2_model();
        let cfg = RefineConfig { max_rounds: 1, ..RefineConfig::default() };
        let (report, trace) =
            run(&m, &fig2_predicates(), &fig2_effect(), &[], &cfg).unwrap();
        assert!(report.is_none());
        assert_eq!(trace.rounds.len(), 1);
        assert!(trace.rounds[0].outcome.starts_with("none"));
    }

    #[test]
    fn finest_initial_partition_behaves_concretely() {
        let m = fig2_model();
        let preds: Vec<Predicate> = m
            .states
            .iter()
            .map(|s| Predicate::Cmp {
                var: "pos".into(),
                op: crate::predicate::CmpOp::Ge,
                value: s.values[0].clone(),
            })
            .collect();
        let cfg = RefineConfig::default();
        let (report, trace) = run(&m, &preds, &fig2_effect(), &[], &cfg).unwrap();
        let report = report.expect("cause found");
        assert_eq!(report.cause, std::collections::BTreeSet::from([1]));
        assert!(matches!(report.mode, Mode::Abstract { round: 1 }));
        assert_eq!(trace.rounds.len(), 1);
    }

    #[test]
    fn fallback_concrete_on_exhaustion() {
        // One tautological predicate cannot separate anything; the initial
        // partition has a single state, which is also the root, so the
        // abstract search finds nothing and splitting works toward the
        // finest partition.
        let m = fig2_model();
        let cfg = RefineConfig { fallback_concrete: true, ..RefineConfig::default() };
        let (report, _) = run(&m, &[Predicate::True], &fig2_effect(), &[], &cfg).unwrap();
        let report = report.expect("fallback or refinement finds the cause");
        assert_eq!(report.cause, std::collections::BTreeSet::from([1]));
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let m = fig2_model();
        let cfg = RefineConfig { alpha: Rat::zero(), ..RefineConfig::default() };
        assert!(matches!(
            run(&m, &fig2_predicates(), &fig2_effect(), &[], &cfg),
            Err(RefineError::BadAlpha)
        ));
    }

    #[test]
    fn trace_serialization_is_deterministic_shape() {
        let m = fig2_model();
        let cfg = RefineConfig::default();
        let (_, trace) = run(&m, &fig2_predicates(), &fig2_effect(), &[], &cfg).unwrap();
        let text = trace.serialize();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("round=1 states=6 split=ŝ_1 lo=1/5 hi=9/10 outcome=none millis="));
    }
}
