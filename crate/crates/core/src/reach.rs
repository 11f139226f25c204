//! Exact reachability algebra on concrete chains: the probability
//! quantities of the actual-world, counterfactual-world and
//! stutter-equivalence subformulas, computed by backward dynamic
//! programming over the topological order. No linear solving is needed;
//! every recursion is a pure sum of products.

use crate::model::Dtmc;
use crate::predicate::{Predicate, PredicateError};
use crate::rational::{Probability, Rat};
use num_traits::{One, Zero};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Eventually,
    AvoidUntil,
    EffectViaCause,
    Counterfactual,
}

/// Per-state probability vector for one reachability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachProfile {
    pub kind: QueryKind,
    pub values: Vec<Probability>,
}

impl ReachProfile {
    pub fn at(&self, s: usize) -> &Probability {
        &self.values[s]
    }
}

/// P_s(eventually E) for every state, one backward pass.
pub fn prob_eventually(m: &Dtmc, effect: &BTreeSet<usize>) -> ReachProfile {
    let n = m.len();
    let mut v = vec![Rat::zero(); n];
    for &s in m.topo_order().iter().rev() {
        if effect.contains(&s) {
            v[s] = Rat::one();
        } else if m.states[s].is_absorbing() {
            v[s] = Rat::zero();
        } else {
            let mut sum = Rat::zero();
            for (t, p) in &m.transitions[s] {
                sum += p.as_rat() * &v[*t];
            }
            v[s] = sum;
        }
    }
    ReachProfile { kind: QueryKind::Eventually, values: wrap(v) }
}

/// P_s(not Avoid until B): boundary 1 on B, 0 on Avoid \ B.
pub fn prob_avoid_until(m: &Dtmc, avoid: &BTreeSet<usize>, b: &BTreeSet<usize>) -> ReachProfile {
    let n = m.len();
    let mut v = vec![Rat::zero(); n];
    for &s in m.topo_order().iter().rev() {
        if b.contains(&s) {
            v[s] = Rat::one();
        } else if avoid.contains(&s) || m.states[s].is_absorbing() {
            v[s] = Rat::zero();
        } else {
            let mut sum = Rat::zero();
            for (t, p) in &m.transitions[s] {
                sum += p.as_rat() * &v[*t];
            }
            v[s] = sum;
        }
    }
    ReachProfile { kind: QueryKind::AvoidUntil, values: wrap(v) }
}

/// Probability of reaching the effect after passing through the cause:
/// the path-compositional reading of the actual-world subformula.
///
/// On cause states the value is `P(eventually E)`; effect states outside
/// the cause contribute nothing, and the recursion sums only over
/// non-effect successors. Returns a diagnostic when `C` and `E` overlap;
/// overlapping states use the cause branch.
pub fn prob_effect_via_cause(
    m: &Dtmc,
    cause: &BTreeSet<usize>,
    effect: &BTreeSet<usize>,
) -> (ReachProfile, Option<String>) {
    let overlap: Vec<usize> = cause.intersection(effect).copied().collect();
    let diagnostic = if overlap.is_empty() {
        None
    } else {
        let names: Vec<&str> = overlap.iter().map(|&s| m.states[s].name.as_str()).collect();
        Some(format!("cause overlaps effect on {{{}}}", names.join(", ")))
    };
    let reach_effect = prob_eventually(m, effect);
    let n = m.len();
    let mut v = vec![Rat::zero(); n];
    for &s in m.topo_order().iter().rev() {
        if cause.contains(&s) {
            v[s] = reach_effect.values[s].as_rat().clone();
        } else if effect.contains(&s) || m.states[s].is_absorbing() {
            v[s] = Rat::zero();
        } else {
            let mut sum = Rat::zero();
            for (t, p) in &m.transitions[s] {
                if !effect.contains(t) {
                    sum += p.as_rat() * &v[*t];
                }
            }
            v[s] = sum;
        }
    }
    (ReachProfile { kind: QueryKind::EffectViaCause, values: wrap(v) }, diagnostic)
}

/// Probability of reaching the effect without passing through the cause
/// (counterfactual world); effect states count even when in the cause.
pub fn prob_counterfactual(
    m: &Dtmc,
    cause: &BTreeSet<usize>,
    effect: &BTreeSet<usize>,
) -> ReachProfile {
    let n = m.len();
    let mut v = vec![Rat::zero(); n];
    for &s in m.topo_order().iter().rev() {
        if effect.contains(&s) {
            v[s] = Rat::one();
        } else if m.states[s].is_absorbing() {
            v[s] = Rat::zero();
        } else {
            let mut sum = Rat::zero();
            for (t, p) in &m.transitions[s] {
                if !cause.contains(t) {
                    sum += p.as_rat() * &v[*t];
                }
            }
            v[s] = sum;
        }
    }
    ReachProfile { kind: QueryKind::Counterfactual, values: wrap(v) }
}

fn wrap(values: Vec<Rat>) -> Vec<Probability> {
    values.into_iter().map(Probability::from_unit).collect()
}

/// The stutter-equivalence constraint system for a contingency set `W`.
///
/// Holds the per-state `W`-signatures and the stuttering-step vector; the
/// pair-indexed families are computed on demand, since the equivalence
/// check only ever touches root pairs.
#[derive(Debug, Clone)]
pub struct StutterSystem {
    /// Truth vector of the `W` members per state.
    signatures: Vec<Vec<bool>>,
    /// p_ST: probability that the next step agrees with the current state.
    st: Vec<Rat>,
}

pub fn stutter_system(m: &Dtmc, w: &[Predicate]) -> Result<StutterSystem, PredicateError> {
    let mut signatures = Vec::with_capacity(m.len());
    for s in &m.states {
        let mut sig = Vec::with_capacity(w.len());
        for p in w {
            sig.push(p.eval(&m.vars, s)?);
        }
        signatures.push(sig);
    }
    let mut st = vec![Rat::zero(); m.len()];
    for (s, row) in m.transitions.iter().enumerate() {
        let mut sum = Rat::zero();
        for (t, p) in row {
            if signatures[s] == signatures[*t] {
                sum += p.as_rat();
            }
        }
        st[s] = sum;
    }
    Ok(StutterSystem { signatures, st })
}

impl StutterSystem {
    /// p_EqW: 1 iff the two states agree on every member of `W`.
    pub fn eq(&self, s: usize, t: usize) -> bool {
        self.signatures[s] == self.signatures[t]
    }

    /// p_ST for one state.
    pub fn st(&self, s: usize) -> &Rat {
        &self.st[s]
    }

    /// p_NEqW: probability that the two next states agree on `W`.
    pub fn neq(&self, m: &Dtmc, s: usize, t: usize) -> Rat {
        let mut sum = Rat::zero();
        for (s2, p) in &m.transitions[s] {
            for (t2, q) in &m.transitions[t] {
                if self.eq(*s2, *t2) {
                    sum += p.as_rat() * q.as_rat();
                }
            }
        }
        sum
    }

    /// p_stUeq with a fixed comparison partner: the probability mass of
    /// stuttering from `state` until agreement with `partner` is restored.
    /// Computed for all states in one backward pass.
    pub fn stutter_until_eq(&self, m: &Dtmc, partner: usize) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); m.len()];
        for &s in m.topo_order().iter().rev() {
            if self.eq(partner, s) {
                v[s] = Rat::one();
            } else if m.states[s].is_absorbing() || self.st[s].is_zero() {
                v[s] = Rat::zero();
            } else {
                let mut sum = Rat::zero();
                for (t, p) in &m.transitions[s] {
                    sum += p.as_rat() * &v[*t];
                }
                v[s] = &self.st[s] * sum;
            }
        }
        v
    }

    /// Both directed stutter-equivalence inequalities for a root pair.
    pub fn se_holds(&self, m: &Dtmc, s: usize, t: usize) -> bool {
        self.directed_holds(m, s, t) && self.directed_holds(m, t, s)
    }

    fn directed_holds(&self, m: &Dtmc, s: usize, t: usize) -> bool {
        if !self.eq(s, t) {
            return true; // left-hand side is 0
        }
        let lhs = Rat::one();
        let stu = self.stutter_until_eq(m, s);
        let rhs = self.neq(m, s, t) + &self.st[s] + &stu[t];
        lhs <= rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fig2_model, fig7a_model};
    use crate::parse_rat;
    use crate::predicate::Predicate;

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn eventually_on_fig2() {
        let m = fig2_model();
        let e = set(&[7, 9]);
        let v = prob_eventually(&m, &e);
        assert_eq!(v.at(1).as_rat(), &parse_rat("69/100").unwrap());
        assert_eq!(v.at(7).as_rat(), &parse_rat("1").unwrap());
        assert_eq!(v.at(10).as_rat(), &parse_rat("0").unwrap());
    }

    #[test]
    fn avoid_until_on_fig2() {
        let m = fig2_model();
        let v = prob_avoid_until(&m, &set(&[7, 9]), &set(&[1]));
        assert_eq!(v.at(0).as_rat(), &parse_rat("1/2").unwrap());
        // B = full state set -> 1 everywhere.
        let all: BTreeSet<usize> = (0..m.len()).collect();
        let v = prob_avoid_until(&m, &set(&[]), &all);
        assert!(v.values.iter().all(|p| p.is_one()));
        // B unreachable while avoiding its complement -> 0.
        let v = prob_avoid_until(&m, &set(&[1, 2]), &set(&[7]));
        assert!(v.at(0).is_zero());
    }

    #[test]
    fn effect_via_cause_on_fig2() {
        let m = fig2_model();
        let e = set(&[7, 9]);
        let (v, diag) = prob_effect_via_cause(&m, &set(&[1]), &e);
        assert!(diag.is_none());
        assert_eq!(v.at(0).as_rat(), &parse_rat("69/200").unwrap());
        let (v, _) = prob_effect_via_cause(&m, &set(&[2]), &e);
        assert_eq!(v.at(0).as_rat(), &parse_rat("3/20").unwrap());
        // C = E collapses to the boundary.
        let (v, diag) = prob_effect_via_cause(&m, &e, &e);
        assert!(diag.is_some());
        assert!(v.at(7).is_one() && v.at(9).is_one());
    }

    #[test]
    fn counterfactual_on_fig2() {
        let m = fig2_model();
        let e = set(&[7, 9]);
        let v = prob_counterfactual(&m, &set(&[1]), &e);
        assert_eq!(v.at(0).as_rat(), &parse_rat("3/20").unwrap());
        // Empty cause equals plain reachability.
        let v0 = prob_counterfactual(&m, &set(&[]), &e);
        let ve = prob_eventually(&m, &e);
        assert_eq!(v0.values, ve.values);
        assert!(v.at(7).is_one());
    }

    #[test]
    fn empty_contingency_is_trivial() {
        let m = fig2_model();
        let sys = stutter_system(&m, &[]).unwrap();
        for s in 0..m.len() {
            for t in 0..m.len() {
                assert!(sys.eq(s, t));
                assert!(sys.se_holds(&m, s, t));
            }
        }
    }

    #[test]
    fn fig7a_signatures() {
        let m = fig7a_model();
        let w = vec![Predicate::parse("w").unwrap()];
        let sys = stutter_system(&m, &w).unwrap();
        assert!(sys.eq(2, 4));
        assert!(!sys.eq(1, 2));
        assert!(sys.eq(0, 0));
        assert!(sys.se_holds(&m, 0, 0));
    }

    #[test]
    fn self_comparison_holds_for_any_w() {
        let m = fig2_model();
        let w = Predicate::parse_list("pos >= 0.4; halt").unwrap();
        let sys = stutter_system(&m, &w).unwrap();
        for s in 0..m.len() {
            assert!(sys.eq(s, s));
        }
        for &r in &[0usize] {
            assert!(sys.se_holds(&m, r, r));
        }
    }
}
