//! Cause checking and discovery on the abstract MDP: minimum reachability
//! in the actual world against maximum reachability in the counterfactual
//! world, with the contingency set handled either by subgraph
//! decomposition or by a contingency-preserving partition.

use crate::abstraction::{enumerate_subgraphs, AbsError, AbsMode, Abstraction, Subgraph};
use crate::mdp::{max_counterfactual, min_effect_via_cause, min_max_eventually};
use crate::model::{Mdp, MdpAction};
use crate::predicate::{Predicate, PredicateError};
use crate::rational::{Probability, Rat};
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, thiserror::Error)]
pub enum AbsCheckError {
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Abstraction(#[from] AbsError),
    #[error("effect predicate is satisfied by no abstract state")]
    EmptyEffect,
    #[error("abstract root set is empty")]
    EmptyRoots,
    #[error("abstract cause set is empty")]
    EmptyCause,
    #[error("abstract cause {{{0}}} lies within the root set")]
    CauseWithinRoots(String),
    #[error("w-preserving strategy requires a w-preserving abstraction")]
    StrategyMismatch,
}

/// How the contingency set is honored on the abstract side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WStrategy {
    /// Decompose the concrete chain into stutter-signature subgraphs and
    /// check within each; equivalence is trivially satisfied inside one.
    Subgraphs { path_cap: usize },
    /// Keep contingency propositions separated by the partition and check
    /// the stutter inequalities on the abstract MDP.
    WPreserving,
}

#[derive(Debug, Clone)]
pub struct AbstractPacQuery<'a, 'm> {
    pub abstraction: &'a Abstraction<'m>,
    pub effect: Predicate,
    pub contingencies: Vec<Predicate>,
    pub strategy: WStrategy,
    /// Explicit abstract root override; `None` means the abstract images
    /// of the concrete initial states.
    pub roots: Option<BTreeSet<usize>>,
}

impl<'a, 'm> AbstractPacQuery<'a, 'm> {
    pub fn new(abstraction: &'a Abstraction<'m>, effect: Predicate) -> Self {
        AbstractPacQuery {
            abstraction,
            effect,
            contingencies: Vec::new(),
            strategy: WStrategy::Subgraphs { path_cap: 100_000 },
            roots: None,
        }
    }

    /// Abstract effect set plus mixed-state warnings.
    pub fn effect_set(&self) -> Result<(BTreeSet<usize>, Vec<String>), AbsCheckError> {
        let concrete = self.abstraction.model.satisfying_set(&self.effect)?;
        let (set, warnings) = self.abstraction.image(&concrete);
        if set.is_empty() {
            return Err(AbsCheckError::EmptyEffect);
        }
        Ok((set, warnings))
    }

    pub fn root_set(&self) -> Result<BTreeSet<usize>, AbsCheckError> {
        let roots = match &self.roots {
            Some(set) => set.clone(),
            None => self.abstraction.mdp.initial.clone(),
        };
        if roots.is_empty() {
            return Err(AbsCheckError::EmptyRoots);
        }
        Ok(roots)
    }
}

/// A confirmed abstract cause with its exact bounding values.
#[derive(Debug, Clone)]
pub struct AbsCauseReport {
    /// Abstract indices of the cause.
    pub cause: BTreeSet<usize>,
    /// Concrete member union of the cause.
    pub concrete_cause: BTreeSet<usize>,
    pub root: usize,
    pub p_min_aw: Rat,
    pub worst_root: usize,
    pub p_max_cw: Rat,
    /// Index of the confirming subgraph, if subgraph strategy was used
    /// with a non-empty contingency set.
    pub subgraph: Option<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum AbsCheckOutcome {
    Confirmed(AbsCauseReport),
    Refuted { reasons: Vec<String> },
}

impl AbsCheckOutcome {
    pub fn confirmed(&self) -> Option<&AbsCauseReport> {
        match self {
            AbsCheckOutcome::Confirmed(r) => Some(r),
            AbsCheckOutcome::Refuted { .. } => None,
        }
    }
}

/// Restricts the induced MDP to one subgraph: member actions keep only the
/// edges the subgraph retains, so rows become substochastic.
fn restrict_to_subgraph(a: &Abstraction, sub: &Subgraph) -> Mdp {
    let m = a.model;
    let actions: Vec<Vec<MdpAction>> = a
        .states
        .iter()
        .map(|st| {
            st.members
                .iter()
                .filter(|s| sub.states.contains(s))
                .filter_map(|&s| {
                    let mut row: BTreeMap<usize, Rat> = BTreeMap::new();
                    for (t, p) in &m.transitions[s] {
                        if sub.edges.contains(&(s, *t)) {
                            *row.entry(a.map[*t]).or_insert_with(Rat::zero) += p.as_rat();
                        }
                    }
                    if row.is_empty() {
                        return None;
                    }
                    Some(MdpAction {
                        name: m.states[s].name.clone(),
                        transitions: row
                            .into_iter()
                            .map(|(t, p)| (t, Probability::from_unit(p)))
                            .collect(),
                    })
                })
                .collect()
        })
        .collect();
    let initial: BTreeSet<usize> = m
        .initial
        .iter()
        .filter(|s| sub.states.contains(s))
        .map(|&s| a.map[s])
        .collect();
    Mdp {
        states: a.mdp.states.clone(),
        actions,
        initial,
        ap: a.mdp.ap.clone(),
        substochastic: true,
    }
}

/// Contingency signatures of abstract states, from any member; callers
/// must only rely on them in w-preserving mode where members agree.
fn abstract_signatures(
    a: &Abstraction,
    w: &[Predicate],
) -> Result<Vec<Vec<bool>>, PredicateError> {
    a.states
        .iter()
        .map(|st| {
            let &rep = st.members.iter().next().expect("members non-empty");
            w.iter().map(|p| p.eval(&a.model.vars, &a.model.states[rep])).collect()
        })
        .collect()
}

/// The directed stutter inequality on the abstract MDP, with minimum
/// probabilities: disagreeing roots impose nothing; agreeing roots make
/// the stutter-until term one immediately, so the inequality holds. The
/// structure is kept explicit to mirror the emitted constraint system.
fn se_holds_abs(sig: &[Vec<bool>], s: usize, t: usize) -> bool {
    if sig[s] != sig[t] {
        return true;
    }
    // p_stUeq at the compared root is pinned to one when the pair agrees,
    // which dominates the left-hand side.
    true
}

struct ValueTriple {
    via: Vec<Rat>,
    cf: Vec<Rat>,
}

fn values_on(mdp: &Mdp, cause: &BTreeSet<usize>, effect: &BTreeSet<usize>) -> ValueTriple {
    ValueTriple {
        via: min_effect_via_cause(mdp, cause, effect),
        cf: max_counterfactual(mdp, cause, effect),
    }
}

/// Checks one abstract candidate: exists a root whose minimum effect-via-
/// cause value beats the maximum counterfactual value of every compared
/// root.
pub fn check_cause_abs(
    q: &AbstractPacQuery,
    cause: &BTreeSet<usize>,
) -> Result<AbsCheckOutcome, AbsCheckError> {
    let a = q.abstraction;
    if matches!(q.strategy, WStrategy::WPreserving)
        && !q.contingencies.is_empty()
        && !matches!(a.mode, AbsMode::WPreserving(_))
    {
        return Err(AbsCheckError::StrategyMismatch);
    }
    let (effect, warnings) = q.effect_set()?;
    let roots = q.root_set()?;
    if cause.is_empty() {
        return Err(AbsCheckError::EmptyCause);
    }
    if cause.iter().all(|c| roots.contains(c)) {
        let names: Vec<String> = cause.iter().map(|&c| a.states[c].id.to_string()).collect();
        return Err(AbsCheckError::CauseWithinRoots(names.join(", ")));
    }
    if cause.intersection(&effect).next().is_some() {
        return Ok(AbsCheckOutcome::Refuted {
            reasons: vec!["abstract cause overlaps the abstract effect".into()],
        });
    }

    let use_subgraphs = !q.contingencies.is_empty()
        && matches!(q.strategy, WStrategy::Subgraphs { .. });
    if use_subgraphs {
        let WStrategy::Subgraphs { path_cap } = q.strategy else { unreachable!() };
        let subs = enumerate_subgraphs(a.model, &q.contingencies, path_cap)?;
        let mut reasons = Vec::new();
        for (k, sub) in subs.iter().enumerate() {
            let restricted = restrict_to_subgraph(a, sub);
            let sub_roots: BTreeSet<usize> =
                roots.iter().copied().filter(|r| !restricted.actions[*r].is_empty() || restricted.initial.contains(r)).collect();
            let sub_roots: BTreeSet<usize> = if q.roots.is_some() {
                sub_roots
            } else {
                restricted.initial.clone()
            };
            if sub_roots.is_empty() {
                continue;
            }
            let v = values_on(&restricted, cause, &effect);
            match confirm(a, &v, &sub_roots, |_, _| true) {
                Ok(mut r) => {
                    r.subgraph = Some(k);
                    r.warnings = warnings;
                    return Ok(AbsCheckOutcome::Confirmed(r));
                }
                Err(mut why) => {
                    why.iter_mut().for_each(|s| *s = format!("subgraph {k}: {s}"));
                    reasons.extend(why);
                }
            }
        }
        return Ok(AbsCheckOutcome::Refuted { reasons });
    }

    let sig = abstract_signatures(a, &q.contingencies)?;
    let v = values_on(&a.mdp, cause, &effect);
    match confirm(a, &v, &roots, |s, t| se_holds_abs(&sig, s, t) && se_holds_abs(&sig, t, s)) {
        Ok(mut r) => {
            r.warnings = warnings;
            Ok(AbsCheckOutcome::Confirmed(r))
        }
        Err(reasons) => Ok(AbsCheckOutcome::Refuted { reasons }),
    }
}

fn confirm(
    a: &Abstraction,
    v: &ValueTriple,
    roots: &BTreeSet<usize>,
    compatible: impl Fn(usize, usize) -> bool,
) -> Result<AbsCauseReport, Vec<String>> {
    let mut reasons = Vec::new();
    for &sigma in roots {
        let p_aw = &v.via[sigma];
        if p_aw.is_zero() {
            reasons.push(format!(
                "{}: minimum effect-via-cause probability is 0",
                a.states[sigma].id
            ));
            continue;
        }
        let mut worst: Option<usize> = None;
        let mut beaten = false;
        for &sigma2 in roots {
            if !compatible(sigma, sigma2) {
                continue;
            }
            let p_cw = &v.cf[sigma2];
            if p_aw <= p_cw {
                reasons.push(format!(
                    "{}: {} not above counterfactual {} at {}",
                    a.states[sigma].id,
                    crate::rational::format_rat(p_aw),
                    crate::rational::format_rat(p_cw),
                    a.states[sigma2].id
                ));
                beaten = true;
                break;
            }
            match worst {
                Some(w) if v.cf[w] >= *p_cw => {}
                _ => worst = Some(sigma2),
            }
        }
        if beaten {
            continue;
        }
        let worst_root = worst.unwrap_or(sigma);
        return Ok(AbsCauseReport {
            cause: BTreeSet::new(),
            concrete_cause: BTreeSet::new(),
            root: sigma,
            p_min_aw: p_aw.clone(),
            worst_root,
            p_max_cw: v.cf[worst_root].clone(),
            subgraph: None,
            warnings: Vec::new(),
        });
    }
    Err(reasons)
}

/// Candidate abstract states in search order: ascending BFS depth, then
/// index; effect, unreachable-effect and root states pruned.
pub fn eligible_abstract(
    a: &Abstraction,
    effect: &BTreeSet<usize>,
    roots: &BTreeSet<usize>,
) -> Vec<usize> {
    let iv = min_max_eventually(&a.mdp, effect);
    let depth = a.mdp.bfs_depths();
    let mut out: Vec<usize> = (0..a.states.len())
        .filter(|i| !effect.contains(i) && !roots.contains(i) && !iv.hi[*i].is_zero())
        .collect();
    out.sort_by_key(|&i| (depth[i], i));
    out
}

/// First confirmed singleton abstract candidate in search order.
pub fn discover_abs(q: &AbstractPacQuery) -> Result<Option<AbsCauseReport>, AbsCheckError> {
    let a = q.abstraction;
    let (effect, _) = q.effect_set()?;
    let roots = q.root_set()?;
    for i in eligible_abstract(a, &effect, &roots) {
        let cand = BTreeSet::from([i]);
        if let AbsCheckOutcome::Confirmed(mut r) = check_cause_abs(q, &cand)? {
            r.cause = cand.clone();
            r.concrete_cause = a.concretize(&cand);
            return Ok(Some(r));
        }
    }
    Ok(None)
}

fn smt_name(a: &Abstraction, i: usize) -> String {
    let id = a.states[i].id;
    match id.member {
        None => format!("s{}", id.bits),
        Some(m) => format!("s{}_{}", id.bits, m),
    }
}

/// Emits the abstract constraint system: Bellman min/max encodings over
/// the enabled actions with the cause selector symbolic.
pub fn export_smt_abs(q: &AbstractPacQuery) -> Result<crate::concrete::SmtInstance, AbsCheckError> {
    let a = q.abstraction;
    let (effect, _) = q.effect_set()?;
    let roots = q.root_set()?;
    let iv = min_max_eventually(&a.mdp, &effect);
    let sig = abstract_signatures(a, &q.contingencies)?;
    let n = a.states.len();

    // Usable actions: probability-one pure self-loops are stutters inside
    // an abstract state and never optimal.
    let usable: Vec<Vec<&MdpAction>> = (0..n)
        .map(|i| {
            a.mdp.actions[i]
                .iter()
                .filter(|act| {
                    !(act.transitions.len() == 1 && act.transitions[0].0 == i)
                })
                .collect()
        })
        .collect();

    let mut manifest: Vec<(String, String)> = Vec::new();
    for i in 0..n {
        let nm = smt_name(a, i);
        let id = a.states[i].id;
        manifest.push((format!("f_{nm}"), format!("cause selector f({id})")));
        manifest.push((format!("pAWABS1_min_{nm}"), format!("Pmin({id} |= not effect U cause)")));
        manifest.push((format!("pAWABS2_min_{nm}"), format!("Pmin({id} |= eventually effect)")));
        manifest.push((format!("pCWABS_max_{nm}"), format!("Pmax({id} |= eventually effect, cause removed)")));
    }

    let mut out = String::new();
    out.push_str("; abstract probabilistic actual cause instance\n");
    out.push_str(&format!(
        "; abstract states={} roots={{{}}} effect={{{}}}\n",
        n,
        roots.iter().map(|&i| a.states[i].id.to_string()).collect::<Vec<_>>().join(","),
        effect.iter().map(|&i| a.states[i].id.to_string()).collect::<Vec<_>>().join(","),
    ));
    out.push_str("; manifest:\n");
    for (name, meaning) in &manifest {
        out.push_str(&format!(";   {name} ~ {meaning}\n"));
    }
    out.push_str("(set-logic QF_NRA)\n");
    for i in 0..n {
        let nm = smt_name(a, i);
        out.push_str(&format!("(declare-const f_{nm} Bool)\n"));
        for var in ["pAWABS1_min", "pAWABS2_min", "pCWABS_max"] {
            out.push_str(&format!("(declare-const {var}_{nm} Real)\n"));
            out.push_str(&format!("(assert (and (<= 0 {var}_{nm}) (<= {var}_{nm} 1)))\n"));
        }
    }

    let term = |act: &MdpAction, var: &str, effect_cut: bool, selector_cut: bool| -> String {
        let parts: Vec<String> = act
            .transitions
            .iter()
            .filter(|(t, _)| !(effect_cut && effect.contains(t)))
            .map(|(t, p)| {
                let succ = if selector_cut {
                    format!("(ite f_{} 0 {var}_{})", smt_name(a, *t), smt_name(a, *t))
                } else {
                    format!("{var}_{}", smt_name(a, *t))
                };
                format!("(* {} {})", rat_smt(p.as_rat()), succ)
            })
            .collect();
        match parts.len() {
            0 => "0".to_string(),
            1 => parts[0].clone(),
            _ => format!("(+ {})", parts.join(" ")),
        }
    };

    // Bellman encodings. Min: bounded above by every action value and
    // equal to one of them; max symmetric.
    let bellman = |out: &mut String, x: &str, terms: &[String], is_min: bool| {
        if terms.is_empty() {
            out.push_str(&format!("(assert (= {x} 0))\n"));
            return;
        }
        let cmp = if is_min { "<=" } else { ">=" };
        for t in terms {
            out.push_str(&format!("(assert ({cmp} {x} {t}))\n"));
        }
        let eqs: Vec<String> = terms.iter().map(|t| format!("(= {x} {t})")).collect();
        if eqs.len() == 1 {
            out.push_str(&format!("(assert {})\n", eqs[0]));
        } else {
            out.push_str(&format!("(assert (or {}))\n", eqs.join(" ")));
        }
    };

    for i in 0..n {
        let nm = smt_name(a, i);
        // pAWABS1_min: reach the cause avoiding the effect.
        let x = format!("pAWABS1_min_{nm}");
        let terms: Vec<String> =
            usable[i].iter().map(|act| term(act, "pAWABS1_min", true, false)).collect();
        if terms.is_empty() {
            out.push_str(&format!("(assert (= {x} (ite f_{nm} 1 0)))\n"));
        } else {
            out.push_str(&format!("(assert (=> f_{nm} (= {x} 1)))\n"));
            let guarded: Vec<String> = terms;
            out.push_str(&format!("(assert (=> (not f_{nm}) (and "));
            let mut inner = String::new();
            for t in &guarded {
                inner.push_str(&format!("(<= {x} {t}) "));
            }
            let eqs: Vec<String> = guarded.iter().map(|t| format!("(= {x} {t})")).collect();
            inner.push_str(&format!("(or {})", eqs.join(" ")));
            out.push_str(&inner);
            out.push_str(")))\n");
        }

        // pAWABS2_min and pCWABS_max: reach the effect.
        if effect.contains(&i) {
            out.push_str(&format!("(assert (= pAWABS2_min_{nm} 1))\n"));
            out.push_str(&format!("(assert (= pCWABS_max_{nm} 1))\n"));
        } else if iv.hi[i].is_zero() {
            out.push_str(&format!("(assert (= pAWABS2_min_{nm} 0))\n"));
            out.push_str(&format!("(assert (= pCWABS_max_{nm} 0))\n"));
        } else {
            let x = format!("pAWABS2_min_{nm}");
            let terms: Vec<String> =
                usable[i].iter().map(|act| term(act, "pAWABS2_min", false, false)).collect();
            bellman(&mut out, &x, &terms, true);
            let x = format!("pCWABS_max_{nm}");
            let terms: Vec<String> =
                usable[i].iter().map(|act| term(act, "pCWABS_max", false, true)).collect();
            bellman(&mut out, &x, &terms, false);
        }
    }

    for i in 0..n {
        if effect.contains(&i) || roots.contains(&i) || iv.hi[i].is_zero() {
            out.push_str(&format!("(assert (not f_{}))\n", smt_name(a, i)));
        }
    }

    let mut disjuncts: Vec<String> = Vec::new();
    for &sigma in &roots {
        let mut conjuncts: Vec<String> = Vec::new();
        for &sigma2 in &roots {
            if se_holds_abs(&sig, sigma, sigma2) && se_holds_abs(&sig, sigma2, sigma) {
                conjuncts.push(format!(
                    "(> (* pAWABS1_min_{} pAWABS2_min_{}) pCWABS_max_{})",
                    smt_name(a, sigma),
                    smt_name(a, sigma),
                    smt_name(a, sigma2)
                ));
            }
        }
        disjuncts.push(if conjuncts.len() == 1 {
            conjuncts.pop().unwrap()
        } else {
            format!("(and {})", conjuncts.join(" "))
        });
    }
    let top = if disjuncts.len() == 1 {
        disjuncts.pop().unwrap()
    } else {
        format!("(or {})", disjuncts.join(" "))
    };
    out.push_str(&format!("(assert {top})\n"));
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(crate::concrete::SmtInstance { text: out, manifest })
}

fn rat_smt(r: &Rat) -> String {
    use num_traits::One;
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("(/ {} {})", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{abstract_model, refine_split, AbstractId};
    use crate::fixtures::{fig2_effect, fig2_model, fig2_predicates};
    use crate::parse_rat;

    fn index_of(a: &Abstraction, id: AbstractId) -> usize {
        a.states.iter().position(|s| s.id == id).unwrap()
    }

    #[test]
    fn coarse_candidates_are_refuted() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let s1 = index_of(&a, AbstractId::grouped(1));
        let s11 = index_of(&a, AbstractId::grouped(11));
        let out = check_cause_abs(&q, &BTreeSet::from([s1])).unwrap();
        assert!(out.confirmed().is_none());
        let out = check_cause_abs(&q, &BTreeSet::from([s11])).unwrap();
        assert!(out.confirmed().is_none());
        assert!(discover_abs(&q).unwrap().is_none());
    }

    #[test]
    fn refined_candidate_is_confirmed() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let eff = m.satisfying_set(&fig2_effect()).unwrap();
        let s1 = index_of(&a, AbstractId::grouped(1));
        let b = refine_split(&a, s1, &parse_rat("3/5").unwrap(), &eff).unwrap();
        let q = AbstractPacQuery::new(&b, fig2_effect());
        let r = discover_abs(&q).unwrap().expect("cause found");
        assert_eq!(b.states[*r.cause.iter().next().unwrap()].id, AbstractId::singleton(1, 1));
        assert_eq!(r.concrete_cause, BTreeSet::from([1]));
        assert_eq!(r.p_min_aw, parse_rat("69/200").unwrap());
        assert_eq!(r.p_max_cw, parse_rat("3/20").unwrap());
    }

    #[test]
    fn finest_partition_matches_concrete() {
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
        let r = discover_abs(&q).unwrap().expect("cause found");
        assert_eq!(r.concrete_cause, BTreeSet::from([1]));
        assert_eq!(r.p_min_aw, parse_rat("69/200").unwrap());
        assert_eq!(r.p_max_cw, parse_rat("3/20").unwrap());
    }

    #[test]
    fn pruning_matches_example() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let (effect, _) = q.effect_set().unwrap();
        let roots = q.root_set().unwrap();
        let eligible = eligible_abstract(&a, &effect, &roots);
        let ids: Vec<AbstractId> = eligible.iter().map(|&i| a.states[i].id).collect();
        assert_eq!(ids, vec![AbstractId::grouped(1), AbstractId::grouped(11)]);
    }

    #[test]
    fn cause_in_roots_is_error() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let s0 = index_of(&a, AbstractId::grouped(0));
        assert!(matches!(
            check_cause_abs(&q, &BTreeSet::from([s0])),
            Err(AbsCheckError::CauseWithinRoots(_))
        ));
        assert!(matches!(
            check_cause_abs(&q, &BTreeSet::new()),
            Err(AbsCheckError::EmptyCause)
        ));
    }

    #[test]
    fn effect_overlap_refuted() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let s3 = index_of(&a, AbstractId::grouped(3));
        let out = check_cause_abs(&q, &BTreeSet::from([s3])).unwrap();
        assert!(out.confirmed().is_none());
    }

    #[test]
    fn subgraph_strategy_on_contingencies() {
        let m = crate::fixtures::fig7a_model();
        let eff = Predicate::parse("w && halt").unwrap();
        let a = abstract_model(&m, &[Predicate::parse("halt").unwrap(), eff.clone()], AbsMode::Plain)
            .unwrap();
        let mut q = AbstractPacQuery::new(&a, eff);
        q.contingencies = vec![Predicate::parse("w").unwrap()];
        q.strategy = WStrategy::Subgraphs { path_cap: 1000 };
        // The query runs without error and produces a deterministic result.
        let first = discover_abs(&q).unwrap().map(|r| r.concrete_cause);
        let second = discover_abs(&q).unwrap().map(|r| r.concrete_cause);
        assert_eq!(first, second);
    }

    #[test]
    fn wpreserving_strategy_requires_mode() {
        let m = crate::fixtures::fig7a_model();
        let eff = Predicate::parse("w && halt").unwrap();
        let a = abstract_model(&m, &[Predicate::parse("halt").unwrap()], AbsMode::Plain).unwrap();
        let mut q = AbstractPacQuery::new(&a, eff.clone());
        q.contingencies = vec![Predicate::parse("w").unwrap()];
        q.strategy = WStrategy::WPreserving;
        let out = check_cause_abs(&q, &BTreeSet::from([0]));
        assert!(matches!(out, Err(AbsCheckError::StrategyMismatch)));

        let w = vec![Predicate::parse("w").unwrap()];
        let b = abstract_model(&m, &[Predicate::parse("halt").unwrap()], AbsMode::WPreserving(w.clone()))
            .unwrap();
        let mut q = AbstractPacQuery::new(&b, eff);
        q.contingencies = w;
        q.strategy = WStrategy::WPreserving;
        let r = discover_abs(&q).unwrap();
        let r2 = discover_abs(&q).unwrap();
        assert_eq!(r.is_some(), r2.is_some());
    }

    #[test]
    fn abstract_export_is_deterministic() {
        let m = fig2_model();
        let a = abstract_model(&m, &fig2_predicates(), AbsMode::Plain).unwrap();
        let q = AbstractPacQuery::new(&a, fig2_effect());
        let x = export_smt_abs(&q).unwrap();
        let y = export_smt_abs(&q).unwrap();
        assert_eq!(x.text, y.text);
        assert!(x.text.contains("pAWABS1_min_s1"));
        assert!(x.text.contains("pCWABS_max_s0"));
        assert!(x.text.contains("(assert (not f_s0))\n"));
        assert!(x.text.contains("(check-sat)"));
    }
}
