//! Cause discovery on the concrete chain: candidate checking, candidate
//! enumeration and the SMT-LIB export of the full constraint system with
//! the cause selector left symbolic.

use crate::model::Dtmc;
use crate::predicate::{CmpOp, Predicate, PredicateError};
use crate::rational::{format_rat, Probability, Rat};
use crate::reach::{
    prob_counterfactual, prob_effect_via_cause, prob_eventually, stutter_system,
};
use num_traits::{One, Signed};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

/// Which states act as roots of the actual and counterfactual trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RootPolicy {
    /// Default: the model's initial states. Any other state as a
    /// counterfactual root would make the comparison vacuous or trivially
    /// false (effect states have counterfactual value 1).
    InitialOnly,
    Explicit(BTreeSet<usize>),
    AllStates,
}

/// Which candidate cause sets the search enumerates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidatePolicy {
    /// Default: singleton state sets; every worked example has one.
    SingleState,
    /// All non-empty subsets of the eligible states up to the given size,
    /// sizes ascending, lexicographic within one size.
    SubsetsUpTo(usize),
    /// Satisfying sets of the given predicates, minus pruned states.
    Templates(Vec<Predicate>),
}

/// A discovery query: effect, contingency propositions and search policy.
#[derive(Debug, Clone)]
pub struct PacQuery<'m> {
    pub model: &'m Dtmc,
    pub effect: Predicate,
    pub contingencies: Vec<Predicate>,
    pub roots: RootPolicy,
    pub candidates: CandidatePolicy,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum PacError {
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("effect predicate is satisfied by no state")]
    EmptyEffect,
    #[error("root set is empty")]
    EmptyRoots,
    #[error("cause set is empty")]
    EmptyCause,
    #[error("cause {{{0}}} lies within the root set; roots belong to every computation tree")]
    CauseWithinRoots(String),
    #[error("cannot parse solver output: {0}")]
    SolverOutput(String),
    #[error("solver model failed re-verification: {0}")]
    VerificationMismatch(String),
}

/// How a confirmed cause was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Concrete,
    Abstract { round: usize },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Concrete => write!(f, "concrete"),
            Mode::Abstract { round } => write!(f, "abstract(round {round})"),
        }
    }
}

/// A confirmed probabilistic actual cause.
#[derive(Debug, Clone)]
pub struct CauseReport {
    pub cause: BTreeSet<usize>,
    pub cause_predicate: Predicate,
    /// Witness root of the actual world.
    pub root: usize,
    pub p_aw: Probability,
    /// The counterfactual root with the largest compared value.
    pub worst_root: usize,
    pub p_cw: Probability,
    pub mode: Mode,
}

/// Why one root failed to witness the cause.
#[derive(Debug, Clone)]
pub enum RootFailure {
    /// p_AW at this root is zero.
    NoPositiveScenario { root: usize },
    /// Some stutter-compatible counterfactual root beats the actual world.
    CounterfactualWins { root: usize, against: usize, p_aw: Probability, p_cw: Probability },
}

impl fmt::Display for RootFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootFailure::NoPositiveScenario { root } => {
                write!(f, "root {root}: effect never reached via the cause")
            }
            RootFailure::CounterfactualWins { root, against, p_aw, p_cw } => {
                write!(f, "root {root}: counterfactual root {against} wins, {p_aw} <= {p_cw}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum CheckOutcome {
    Confirmed(CauseReport),
    Refuted { failures: Vec<RootFailure>, diagnostic: Option<String> },
}

impl CheckOutcome {
    pub fn confirmed(&self) -> Option<&CauseReport> {
        match self {
            CheckOutcome::Confirmed(r) => Some(r),
            CheckOutcome::Refuted { .. } => None,
        }
    }
}

/// The emitted SMT-LIB instance plus its name manifest.
#[derive(Debug, Clone)]
pub struct SmtInstance {
    pub text: String,
    /// Pairs of (declared name, meaning).
    pub manifest: Vec<(String, String)>,
}

impl<'m> PacQuery<'m> {
    pub fn new(model: &'m Dtmc, effect: Predicate) -> Self {
        PacQuery {
            model,
            effect,
            contingencies: Vec::new(),
            roots: RootPolicy::InitialOnly,
            candidates: CandidatePolicy::SingleState,
        }
    }

    pub fn effect_set(&self) -> Result<BTreeSet<usize>, PacError> {
        let set = self.model.satisfying_set(&self.effect)?;
        if set.is_empty() {
            return Err(PacError::EmptyEffect);
        }
        Ok(set)
    }

    pub fn root_set(&self) -> Result<BTreeSet<usize>, PacError> {
        let roots = match &self.roots {
            RootPolicy::InitialOnly => self.model.initial.clone(),
            RootPolicy::Explicit(set) => set.clone(),
            RootPolicy::AllStates => (0..self.model.len()).collect(),
        };
        if roots.is_empty() {
            return Err(PacError::EmptyRoots);
        }
        Ok(roots)
    }
}

/// Precomputed per-query data shared across candidate checks.
struct CheckCtx<'m> {
    model: &'m Dtmc,
    effect: BTreeSet<usize>,
    roots: BTreeSet<usize>,
    /// se_holds per ordered root pair, indexed by position in `roots`.
    se: Vec<Vec<bool>>,
}

impl<'m> CheckCtx<'m> {
    fn build(q: &PacQuery<'m>) -> Result<Self, PacError> {
        let effect = q.effect_set()?;
        let roots = q.root_set()?;
        let stutter = stutter_system(q.model, &q.contingencies)?;
        let root_list: Vec<usize> = roots.iter().copied().collect();
        let se = root_list
            .iter()
            .map(|&s| root_list.iter().map(|&t| stutter.se_holds(q.model, s, t)).collect())
            .collect();
        Ok(CheckCtx { model: q.model, effect, roots, se })
    }

    fn check(&self, cause: &BTreeSet<usize>, mode: Mode) -> Result<CheckOutcome, PacError> {
        if cause.is_empty() {
            return Err(PacError::EmptyCause);
        }
        if cause.iter().all(|c| self.roots.contains(c)) {
            let names: Vec<&str> =
                cause.iter().map(|&c| self.model.states[c].name.as_str()).collect();
            return Err(PacError::CauseWithinRoots(names.join(", ")));
        }
        let overlap: Vec<usize> = cause.intersection(&self.effect).copied().collect();
        if !overlap.is_empty() {
            let names: Vec<&str> =
                overlap.iter().map(|&s| self.model.states[s].name.as_str()).collect();
            return Ok(CheckOutcome::Refuted {
                failures: Vec::new(),
                diagnostic: Some(format!(
                    "cause must precede the effect, but overlaps it on {{{}}}",
                    names.join(", ")
                )),
            });
        }

        let (aw, _) = prob_effect_via_cause(self.model, cause, &self.effect);
        let cw = prob_counterfactual(self.model, cause, &self.effect);
        let root_list: Vec<usize> = self.roots.iter().copied().collect();
        let mut failures = Vec::new();
        for (i, &sigma) in root_list.iter().enumerate() {
            let p_aw = aw.at(sigma);
            if p_aw.is_zero() {
                failures.push(RootFailure::NoPositiveScenario { root: sigma });
                continue;
            }
            let mut worst: Option<usize> = None;
            let mut beaten: Option<usize> = None;
            for (j, &sigma2) in root_list.iter().enumerate() {
                if !self.se[i][j] {
                    continue;
                }
                let p_cw = cw.at(sigma2);
                if p_aw.as_rat() <= p_cw.as_rat() {
                    beaten = Some(sigma2);
                    break;
                }
                match worst {
                    Some(w) if cw.at(w).as_rat() >= p_cw.as_rat() => {}
                    _ => worst = Some(sigma2),
                }
            }
            if let Some(against) = beaten {
                failures.push(RootFailure::CounterfactualWins {
                    root: sigma,
                    against,
                    p_aw: p_aw.clone(),
                    p_cw: cw.at(against).clone(),
                });
                continue;
            }
            let worst_root = worst.unwrap_or(sigma);
            return Ok(CheckOutcome::Confirmed(CauseReport {
                cause: cause.clone(),
                cause_predicate: cause_predicate(self.model, cause),
                root: sigma,
                p_aw: p_aw.clone(),
                worst_root,
                p_cw: cw.at(worst_root).clone(),
                mode,
            }));
        }
        Ok(CheckOutcome::Refuted { failures, diagnostic: None })
    }
}

/// PC1/PC2 check of one explicit candidate cause set.
pub fn check_cause(q: &PacQuery, cause: &BTreeSet<usize>) -> Result<CheckOutcome, PacError> {
    CheckCtx::build(q)?.check(cause, Mode::Concrete)
}

/// A predicate form of a cause set: the conjunction of variable constraints
/// shared by all members, or a disjunction of per-state valuations when the
/// members share nothing.
pub fn cause_predicate(m: &Dtmc, cause: &BTreeSet<usize>) -> Predicate {
    let state_eq = |s: usize| -> Predicate {
        let conj: Vec<Predicate> = m
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| Predicate::Cmp {
                var: v.clone(),
                op: CmpOp::Eq,
                value: m.states[s].values[i].clone(),
            })
            .collect();
        match conj.len() {
            0 => Predicate::True,
            1 => conj.into_iter().next().unwrap(),
            _ => Predicate::And(conj),
        }
    };
    let members: Vec<usize> = cause.iter().copied().collect();
    if members.len() == 1 {
        return state_eq(members[0]);
    }
    let shared: Vec<Predicate> = m
        .vars
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let first = &m.states[members[0]].values[*i];
            members.iter().all(|&s| &m.states[s].values[*i] == first)
        })
        .map(|(i, v)| Predicate::Cmp {
            var: v.clone(),
            op: CmpOp::Eq,
            value: m.states[members[0]].values[i].clone(),
        })
        .collect();
    match shared.len() {
        0 => Predicate::Or(members.into_iter().map(state_eq).collect()),
        1 => shared.into_iter().next().unwrap(),
        _ => Predicate::And(shared),
    }
}

/// Candidate state order: ascending BFS depth from the roots, then id.
/// Effect states, zero-reach states and roots are pruned.
pub fn eligible_states(
    m: &Dtmc,
    effect: &BTreeSet<usize>,
    roots: &BTreeSet<usize>,
) -> Vec<usize> {
    let reach = prob_eventually(m, effect);
    let depth = depths_from(m, roots);
    let mut out: Vec<usize> = (0..m.len())
        .filter(|s| !effect.contains(s) && !roots.contains(s) && !reach.at(*s).is_zero())
        .collect();
    out.sort_by_key(|&s| (depth[s], s));
    out
}

fn depths_from(m: &Dtmc, roots: &BTreeSet<usize>) -> Vec<usize> {
    let mut depth = vec![usize::MAX; m.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &r in roots {
        depth[r] = 0;
        queue.push_back(r);
    }
    while let Some(s) = queue.pop_front() {
        for (t, _) in &m.transitions[s] {
            if depth[*t] == usize::MAX {
                depth[*t] = depth[s] + 1;
                queue.push_back(*t);
            }
        }
    }
    depth
}

/// Materializes the candidate cause sets of a query in search order.
pub fn candidate_sets(q: &PacQuery) -> Result<Vec<BTreeSet<usize>>, PacError> {
    let effect = q.effect_set()?;
    let roots = q.root_set()?;
    let eligible = eligible_states(q.model, &effect, &roots);
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    match &q.candidates {
        CandidatePolicy::SingleState => {
            out.extend(eligible.iter().map(|&s| BTreeSet::from([s])));
        }
        CandidatePolicy::SubsetsUpTo(k) => {
            for size in 1..=(*k).min(eligible.len()) {
                subsets_of(&eligible, size, &mut out);
            }
        }
        CandidatePolicy::Templates(preds) => {
            let keep: BTreeSet<usize> = eligible.iter().copied().collect();
            for p in preds {
                let set: BTreeSet<usize> = q
                    .model
                    .satisfying_set(p)?
                    .intersection(&keep)
                    .copied()
                    .collect();
                if !set.is_empty() && !out.contains(&set) {
                    out.push(set);
                }
            }
        }
    }
    Ok(out)
}

fn subsets_of(items: &[usize], size: usize, out: &mut Vec<BTreeSet<usize>>) {
    let mut stack: Vec<usize> = Vec::with_capacity(size);
    fn rec(items: &[usize], size: usize, start: usize, stack: &mut Vec<usize>, out: &mut Vec<BTreeSet<usize>>) {
        if stack.len() == size {
            out.push(stack.iter().copied().collect());
            return;
        }
        for i in start..items.len() {
            stack.push(items[i]);
            rec(items, size, i + 1, stack, out);
            stack.pop();
        }
    }
    rec(items, size, 0, &mut stack, out);
}

/// Searches the candidate space in order and returns the first confirmed
/// cause, or `None`.
pub fn discover(q: &PacQuery) -> Result<Option<CauseReport>, PacError> {
    discover_with_jobs(q, 1)
}

/// Like `discover`, checking up to `jobs` candidates concurrently. The
/// answer is the first confirmed candidate in the sequential order, so the
/// result never depends on `jobs`.
pub fn discover_with_jobs(q: &PacQuery, jobs: usize) -> Result<Option<CauseReport>, PacError> {
    let ctx = CheckCtx::build(q)?;
    let candidates = candidate_sets(q)?;
    let jobs = jobs.max(1);
    if jobs == 1 {
        for c in &candidates {
            if let CheckOutcome::Confirmed(r) = ctx.check(c, Mode::Concrete)? {
                return Ok(Some(r));
            }
        }
        return Ok(None);
    }
    for chunk in candidates.chunks(jobs) {
        let results: Vec<Result<CheckOutcome, PacError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|c| scope.spawn(|| ctx.check(c, Mode::Concrete)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("checker panicked")).collect()
        });
        for r in results {
            if let CheckOutcome::Confirmed(report) = r? {
                return Ok(Some(report));
            }
        }
    }
    Ok(None)
}

fn smt_rat(r: &Rat) -> String {
    debug_assert!(!r.is_negative());
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("(/ {} {})", r.numer(), r.denom())
    }
}

/// Emits the complete constraint system with the cause selector symbolic:
/// satisfiability is equivalent to the existence of a cause, and the model
/// of `f` names it.
pub fn export_smt(q: &PacQuery) -> Result<SmtInstance, PacError> {
    let m = q.model;
    let effect = q.effect_set()?;
    let roots = q.root_set()?;
    let stutter = stutter_system(m, &q.contingencies)?;
    let reach = prob_eventually(m, &effect);
    let root_list: Vec<usize> = roots.iter().copied().collect();

    let mut manifest: Vec<(String, String)> = Vec::new();
    for s in 0..m.len() {
        let name = &m.states[s].name;
        manifest.push((format!("f_{name}"), format!("cause selector f({name})")));
        manifest.push((format!("pAW1_{name}"), format!("P({name} |= not effect U cause)")));
        manifest.push((format!("pAW2_{name}"), format!("P({name} |= eventually effect)")));
        manifest.push((format!("pCW_{name}"), format!("P({name} |= eventually effect, cause removed)")));
    }

    let mut out = String::new();
    out.push_str("; probabilistic actual cause instance\n");
    out.push_str(&format!(
        "; states={} roots={} effect={{{}}}\n",
        m.len(),
        root_list.iter().map(|&s| m.states[s].name.as_str()).collect::<Vec<_>>().join(","),
        effect.iter().map(|&s| m.states[s].name.as_str()).collect::<Vec<_>>().join(","),
    ));
    out.push_str("; manifest:\n");
    for (name, meaning) in &manifest {
        out.push_str(&format!(";   {name} ~ {meaning}\n"));
    }
    out.push_str("; stutter constants (contingency set fixed):\n");
    for &s in &root_list {
        out.push_str(&format!(
            ";   pST_{} = {}\n",
            m.states[s].name,
            format_rat(stutter.st(s))
        ));
    }
    out.push_str("(set-logic QF_NRA)\n");

    for s in 0..m.len() {
        let name = &m.states[s].name;
        out.push_str(&format!("(declare-const f_{name} Bool)\n"));
        for var in ["pAW1", "pAW2", "pCW"] {
            out.push_str(&format!("(declare-const {var}_{name} Real)\n"));
            out.push_str(&format!(
                "(assert (and (<= 0 {var}_{name}) (<= {var}_{name} 1)))\n"
            ));
        }
    }

    // pAW1: reach the cause avoiding the effect.
    for s in 0..m.len() {
        let name = &m.states[s].name;
        let body = if m.states[s].is_absorbing() {
            "0".to_string()
        } else {
            let terms: Vec<String> = m.transitions[s]
                .iter()
                .filter(|(t, _)| !effect.contains(t))
                .map(|(t, p)| format!("(* {} pAW1_{})", smt_rat(p.as_rat()), m.states[*t].name))
                .collect();
            sum_terms(&terms)
        };
        out.push_str(&format!("(assert (= pAW1_{name} (ite f_{name} 1 {body})))\n"));
    }

    // pAW2 and pCW: reach the effect, the latter with cause states cut.
    for s in 0..m.len() {
        let name = &m.states[s].name;
        if effect.contains(&s) {
            out.push_str(&format!("(assert (= pAW2_{name} 1))\n"));
            out.push_str(&format!("(assert (= pCW_{name} 1))\n"));
        } else if reach.at(s).is_zero() {
            out.push_str(&format!("(assert (= pAW2_{name} 0))\n"));
            out.push_str(&format!("(assert (= pCW_{name} 0))\n"));
        } else {
            let aw2: Vec<String> = m.transitions[s]
                .iter()
                .map(|(t, p)| format!("(* {} pAW2_{})", smt_rat(p.as_rat()), m.states[*t].name))
                .collect();
            out.push_str(&format!("(assert (= pAW2_{name} {}))\n", sum_terms(&aw2)));
            let cw: Vec<String> = m.transitions[s]
                .iter()
                .map(|(t, p)| {
                    format!(
                        "(* {} (ite f_{} 0 pCW_{}))",
                        smt_rat(p.as_rat()),
                        m.states[*t].name,
                        m.states[*t].name
                    )
                })
                .collect();
            out.push_str(&format!("(assert (= pCW_{name} {}))\n", sum_terms(&cw)));
        }
    }

    // Pruning: the selector is false on effect states, roots and states
    // that cannot reach the effect.
    for s in 0..m.len() {
        if effect.contains(&s) || roots.contains(&s) || reach.at(s).is_zero() {
            out.push_str(&format!("(assert (not f_{}))\n", m.states[s].name));
        }
    }

    // Top level: exists a root whose actual world beats the counterfactual
    // value of every stutter-compatible root. Incompatible pairs impose no
    // comparison; they are noted as comments.
    let mut disjuncts: Vec<String> = Vec::new();
    for &sigma in &root_list {
        let mut conjuncts: Vec<String> = Vec::new();
        for &sigma2 in &root_list {
            if stutter.se_holds(m, sigma, sigma2) {
                conjuncts.push(format!(
                    "(> (* pAW1_{} pAW2_{}) pCW_{})",
                    m.states[sigma].name, m.states[sigma].name, m.states[sigma2].name
                ));
            } else {
                out.push_str(&format!(
                    "; pair ({}, {}) fails the stutter conditions; no comparison\n",
                    m.states[sigma].name, m.states[sigma2].name
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
    Ok(SmtInstance { text: out, manifest })
}

fn sum_terms(terms: &[String]) -> String {
    match terms.len() {
        0 => "0".to_string(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

/// Reads the selector valuation out of a solver response and re-verifies
/// the cause internally. `unsat` maps to `None`.
pub fn decode_smt_model(q: &PacQuery, output: &str) -> Result<Option<CauseReport>, PacError> {
    let trimmed = output.trim();
    if trimmed.is_empty() {
        return Err(PacError::SolverOutput("empty solver output".into()));
    }
    if trimmed.starts_with("unsat") {
        return Ok(None);
    }
    if !trimmed.starts_with("sat") {
        return Err(PacError::SolverOutput(format!(
            "expected `sat` or `unsat`, found `{}`",
            trimmed.lines().next().unwrap_or("")
        )));
    }
    let mut cause: BTreeSet<usize> = BTreeSet::new();
    // Scan define-fun entries of the Boolean selectors; everything else in
    // the model (the reals) is ignored because we recompute exactly.
    let tokens: Vec<&str> = trimmed
        .split(|c: char| c.is_whitespace() || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .collect();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "define-fun" && i + 3 < tokens.len() {
            let name = tokens[i + 1];
            if let Some(state_name) = name.strip_prefix("f_") {
                let value = tokens[i + 3];
                match value {
                    "true" | "false" => {
                        let s = q
                            .model
                            .state_by_name(state_name)
                            .ok_or_else(|| {
                                PacError::SolverOutput(format!("unknown selector {name}"))
                            })?
                            .id;
                        if value == "true" {
                            cause.insert(s);
                        }
                    }
                    other => {
                        return Err(PacError::SolverOutput(format!(
                            "selector {name} bound to non-Boolean `{other}`"
                        )))
                    }
                }
            }
        }
        i += 1;
    }
    if cause.is_empty() {
        return Err(PacError::SolverOutput(
            "sat response contains no selector set to true".into(),
        ));
    }
    let effect = q.effect_set()?;
    if let Some(&bad) = cause.intersection(&effect).next() {
        return Err(PacError::VerificationMismatch(format!(
            "selector true on effect state {}",
            q.model.states[bad].name
        )));
    }
    match check_cause(q, &cause)? {
        CheckOutcome::Confirmed(r) => Ok(Some(r)),
        CheckOutcome::Refuted { .. } => {
            let names: Vec<&str> =
                cause.iter().map(|&s| q.model.states[s].name.as_str()).collect();
            Err(PacError::VerificationMismatch(format!(
                "solver proposed {{{}}} but the check refutes it",
                names.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fig2_effect, fig2_model};
    use crate::parse_rat;

    fn fig2_query(m: &Dtmc) -> PacQuery<'_> {
        PacQuery::new(m, fig2_effect())
    }

    #[test]
    fn s1_is_confirmed_cause() {
        let m = fig2_model();
        let q = fig2_query(&m);
        let outcome = check_cause(&q, &BTreeSet::from([1])).unwrap();
        let r = outcome.confirmed().expect("confirmed");
        assert_eq!(r.p_aw.as_rat(), &parse_rat("69/200").unwrap());
        assert_eq!(r.p_cw.as_rat(), &parse_rat("3/20").unwrap());
        assert_eq!(r.root, 0);
        assert_eq!(r.worst_root, 0);
    }

    #[test]
    fn s2_is_refuted() {
        let m = fig2_model();
        let q = fig2_query(&m);
        let outcome = check_cause(&q, &BTreeSet::from([2])).unwrap();
        match outcome {
            CheckOutcome::Refuted { failures, .. } => {
                assert_eq!(failures.len(), 1);
                match &failures[0] {
                    RootFailure::CounterfactualWins { p_aw, p_cw, .. } => {
                        assert_eq!(p_aw.as_rat(), &parse_rat("3/20").unwrap());
                        assert_eq!(p_cw.as_rat(), &parse_rat("69/200").unwrap());
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
            CheckOutcome::Confirmed(_) => panic!("s2 must be refuted"),
        }
    }

    #[test]
    fn effect_overlap_is_diagnosed() {
        let m = fig2_model();
        let q = fig2_query(&m);
        let outcome = check_cause(&q, &BTreeSet::from([7, 9])).unwrap();
        match outcome {
            CheckOutcome::Refuted { diagnostic: Some(d), .. } => {
                assert!(d.contains("precede"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn root_cause_is_an_error() {
        let m = fig2_model();
        let q = fig2_query(&m);
        assert!(matches!(
            check_cause(&q, &BTreeSet::from([0])),
            Err(PacError::CauseWithinRoots(_))
        ));
        assert!(matches!(check_cause(&q, &BTreeSet::new()), Err(PacError::EmptyCause)));
    }

    #[test]
    fn discover_finds_s1_first() {
        let m = fig2_model();
        let q = fig2_query(&m);
        let r = discover(&q).unwrap().expect("cause exists");
        assert_eq!(r.cause, BTreeSet::from([1]));
        let shown = format!("{}", r.cause_predicate);
        assert_eq!(shown, "pos = 3/10 && vel = 1/100 && act = 1");
    }

    #[test]
    fn discover_is_job_invariant() {
        let m = fig2_model();
        let q = fig2_query(&m);
        let a = discover_with_jobs(&q, 1).unwrap().unwrap();
        let b = discover_with_jobs(&q, 4).unwrap().unwrap();
        assert_eq!(a.cause, b.cause);
        assert_eq!(a.p_aw, b.p_aw);
    }

    #[test]
    fn three_state_chain() {
        let text = "vars x\nstate a 0 labels:\nstate b 1 labels:\nstate c 2 labels: halt fail\n\
                    trans a b 1\ntrans b c 1\ntrans c c 1\ninit a\n";
        let m = Dtmc::parse(text).unwrap();
        let q = PacQuery::new(&m, Predicate::parse("fail").unwrap());
        let r = discover(&q).unwrap().expect("cause exists");
        assert_eq!(r.cause, BTreeSet::from([1]));
        assert!(r.p_aw.is_one());
        assert!(r.p_cw.is_zero());
    }

    #[test]
    fn unreachable_effect_yields_none() {
        let text = "vars x\nstate a 0 labels:\nstate b 1 labels: halt\nstate c 2 labels: halt fail\n\
                    trans a b 1\ntrans b b 1\ntrans c c 1\ninit a\n";
        let m = Dtmc::parse(text).unwrap();
        let q = PacQuery::new(&m, Predicate::parse("fail").unwrap());
        assert!(discover(&q).unwrap().is_none());
    }

    #[test]
    fn subset_policy_orders_by_size() {
        let m = fig2_model();
        let mut q = fig2_query(&m);
        q.candidates = CandidatePolicy::SubsetsUpTo(2);
        let sets = candidate_sets(&q).unwrap();
        let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
        let first_pair = sizes.iter().position(|&k| k == 2).unwrap();
        assert!(sizes[..first_pair].iter().all(|&k| k == 1));
        assert!(sizes[first_pair..].iter().all(|&k| k == 2));
    }

    #[test]
    fn export_is_deterministic_and_decodable() {
        let m = fig2_model();
        let q = fig2_query(&m);
        let a = export_smt(&q).unwrap();
        let b = export_smt(&q).unwrap();
        assert_eq!(a.text, b.text);
        assert!(a.text.contains("(set-logic QF_NRA)"));
        assert!(a.text.contains("(assert (not f_s0))"));
        assert!(a.text.contains("(check-sat)"));

        // A model as a solver would print it for the known cause {s1}.
        let mut fake = String::from("sat\n(model\n");
        for s in 0..m.len() {
            fake.push_str(&format!(
                "  (define-fun f_{} () Bool {})\n",
                m.states[s].name,
                s == 1
            ));
        }
        fake.push_str(")\n");
        let r = decode_smt_model(&q, &fake).unwrap().expect("cause");
        assert_eq!(r.cause, BTreeSet::from([1]));
    }

    #[test]
    fn decode_rejects_bad_models() {
        let m = fig2_model();
        let q = fig2_query(&m);
        assert!(decode_smt_model(&q, "unsat\n").unwrap().is_none());
        // Effect state selected.
        let bad = "sat\n(model (define-fun f_s7 () Bool true))\n";
        assert!(matches!(
            decode_smt_model(&q, bad),
            Err(PacError::VerificationMismatch(_))
        ));
        // Refutable cause selected.
        let bad = "sat\n(model (define-fun f_s2 () Bool true))\n";
        assert!(matches!(
            decode_smt_model(&q, bad),
            Err(PacError::VerificationMismatch(_))
        ));
        assert!(decode_smt_model(&q, "garbage").is_err());
    }
}
