//! Exact minimum/maximum absorption values on (abstract) MDPs.
//!
//! Values are computed by policy iteration with exact rational policy
//! evaluation: each policy induces a linear system that is solved by
//! Gaussian elimination after removing the states that never leave the
//! interior under that policy (their value is zero). Actions whose entire
//! probability mass self-loops encode stuttering inside an abstract state
//! and are never selected; the concrete chain is acyclic, so such
//! schedulers are spurious.

use crate::model::Mdp;
use crate::rational::{Probability, Rat};
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Min,
    Max,
}

/// Per-state `[pmin, pmax]` for reaching an effect set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalProfile {
    pub lo: Vec<Probability>,
    pub hi: Vec<Probability>,
}

impl IntervalProfile {
    pub fn width(&self, s: usize) -> Rat {
        self.hi[s].as_rat() - self.lo[s].as_rat()
    }
}

/// Exact `[Pmin, Pmax](s |= eventually E)` over memoryless schedulers.
pub fn min_max_eventually(m: &Mdp, effect: &BTreeSet<usize>) -> IntervalProfile {
    let fixed: BTreeMap<usize, Rat> = effect.iter().map(|&e| (e, Rat::one())).collect();
    let none = BTreeSet::new();
    let lo = optimal_values(m, &fixed, &none, Objective::Min);
    let hi = optimal_values(m, &fixed, &none, Objective::Max);
    IntervalProfile {
        lo: lo.into_iter().map(Probability::from_unit).collect(),
        hi: hi.into_iter().map(Probability::from_unit).collect(),
    }
}

/// Abstract analogue of the actual-world value: minimum probability of
/// reaching the effect after passing through the cause. Cause states take
/// the boundary value `Pmin(eventually E)`; the recursion sums over
/// non-effect successors with min over enabled actions.
pub fn min_effect_via_cause(m: &Mdp, cause: &BTreeSet<usize>, effect: &BTreeSet<usize>) -> Vec<Rat> {
    let reach_fixed: BTreeMap<usize, Rat> = effect.iter().map(|&e| (e, Rat::one())).collect();
    let none = BTreeSet::new();
    let pmin_effect = optimal_values(m, &reach_fixed, &none, Objective::Min);

    let mut fixed: BTreeMap<usize, Rat> = BTreeMap::new();
    for &c in cause {
        fixed.insert(c, pmin_effect[c].clone());
    }
    for &e in effect {
        fixed.entry(e).or_insert_with(Rat::zero);
    }
    optimal_values(m, &fixed, effect, Objective::Min)
}

/// Abstract counterfactual value: maximum probability of reaching the
/// effect while the recursion never passes through the cause.
pub fn max_counterfactual(m: &Mdp, cause: &BTreeSet<usize>, effect: &BTreeSet<usize>) -> Vec<Rat> {
    let fixed: BTreeMap<usize, Rat> = effect.iter().map(|&e| (e, Rat::one())).collect();
    optimal_values(m, &fixed, cause, Objective::Max)
}

/// Optimal absorption values: states in `fixed` keep their given value;
/// every other state takes min/max over its usable actions of the sum of
/// transition probabilities times successor values, with successors in
/// `excluded` contributing zero.
pub fn optimal_values(
    m: &Mdp,
    fixed: &BTreeMap<usize, Rat>,
    excluded: &BTreeSet<usize>,
    objective: Objective,
) -> Vec<Rat> {
    let n = m.len();
    // Usable actions per state: drop probability-one pure self-loops.
    let usable: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            m.actions[s]
                .iter()
                .enumerate()
                .filter(|(_, a)| {
                    let mut self_mass = Rat::zero();
                    let mut total = Rat::zero();
                    for (t, p) in &a.transitions {
                        total += p.as_rat();
                        if *t == s {
                            self_mass += p.as_rat();
                        }
                    }
                    !(self_mass == total && total.is_one())
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let interior: Vec<usize> = (0..n).filter(|s| !fixed.contains_key(s)).collect();
    let mut policy: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in &interior {
        if let Some(&first) = usable[s].first() {
            policy.insert(s, first);
        }
    }

    let mut values = evaluate_policy(m, fixed, excluded, &policy);
    loop {
        let mut changed = false;
        for &s in &interior {
            let Some(current) = policy.get(&s).copied() else { continue };
            let mut best_action = current;
            let mut best = action_value(m, s, current, excluded, &values);
            for &a in &usable[s] {
                if a == current {
                    continue;
                }
                let q = action_value(m, s, a, excluded, &values);
                let better = match objective {
                    Objective::Min => q < best,
                    Objective::Max => q > best,
                };
                if better {
                    best = q;
                    best_action = a;
                }
            }
            let improves = match objective {
                Objective::Min => best < values[s],
                Objective::Max => best > values[s],
            };
            if improves && best_action != current {
                policy.insert(s, best_action);
                changed = true;
            }
        }
        if !changed {
            return values;
        }
        values = evaluate_policy(m, fixed, excluded, &policy);
    }
}

fn action_value(
    m: &Mdp,
    s: usize,
    action: usize,
    excluded: &BTreeSet<usize>,
    values: &[Rat],
) -> Rat {
    let mut sum = Rat::zero();
    for (t, p) in &m.actions[s][action].transitions {
        if !excluded.contains(t) {
            sum += p.as_rat() * &values[*t];
        }
    }
    sum
}

/// Exact absorption value of one memoryless policy: the least fixed point
/// of its affine operator. Interior states that never leave the interior
/// under the policy get value zero.
fn evaluate_policy(
    m: &Mdp,
    fixed: &BTreeMap<usize, Rat>,
    excluded: &BTreeSet<usize>,
    policy: &BTreeMap<usize, usize>,
) -> Vec<Rat> {
    let n = m.len();
    let mut values = vec![Rat::zero(); n];
    for (&s, v) in fixed {
        values[s] = v.clone();
    }

    // Row data for every interior state with a usable action.
    let mut rows: BTreeMap<usize, (Vec<(usize, Rat)>, Rat, bool)> = BTreeMap::new();
    for (&s, &a) in policy {
        let mut coeffs: BTreeMap<usize, Rat> = BTreeMap::new();
        let mut offset = Rat::zero();
        let mut interior_mass = Rat::zero();
        for (t, p) in &m.actions[s][a].transitions {
            if excluded.contains(t) {
                continue;
            }
            if let Some(v) = fixed.get(t) {
                offset += p.as_rat() * v;
            } else if policy.contains_key(t) {
                interior_mass += p.as_rat();
                *coeffs.entry(*t).or_insert_with(Rat::zero) += p.as_rat();
            }
            // Interior states without usable actions have value zero.
        }
        let exits = interior_mass < Rat::one();
        rows.insert(s, (coeffs.into_iter().collect(), offset, exits));
    }

    // States that can reach an exiting row stay in the linear system; the
    // rest never get absorbed and take value zero.
    let mut reverse: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut live: BTreeSet<usize> = BTreeSet::new();
    for (&s, (coeffs, _, exits)) in &rows {
        for (t, _) in coeffs {
            reverse.entry(*t).or_default().push(s);
        }
        if *exits {
            live.insert(s);
            queue.push_back(s);
        }
    }
    while let Some(t) = queue.pop_front() {
        if let Some(preds) = reverse.get(&t) {
            for &s in preds {
                if live.insert(s) {
                    queue.push_back(s);
                }
            }
        }
    }

    let index: BTreeMap<usize, usize> = live.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let k = index.len();
    if k == 0 {
        return values;
    }
    // (I - W) x = b over the live states.
    let mut matrix = vec![vec![Rat::zero(); k]; k];
    let mut rhs = vec![Rat::zero(); k];
    for (&s, (coeffs, offset, _)) in &rows {
        let Some(&i) = index.get(&s) else { continue };
        matrix[i][i] = Rat::one();
        for (t, p) in coeffs {
            if let Some(&j) = index.get(t) {
                matrix[i][j] -= p;
            }
        }
        rhs[i] = offset.clone();
    }
    let solution = solve_linear(matrix, rhs);
    for (&s, &i) in &index {
        values[s] = solution[i].clone();
    }
    values
}

/// Gaussian elimination over exact rationals; the policy-evaluation matrix
/// is nonsingular by construction.
fn solve_linear(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Vec<Rat> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !a[r][col].is_zero())
            .expect("singular policy-evaluation system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].clone();
        for c in col..k {
            a[col][c] = &a[col][c] / &inv;
        }
        b[col] = &b[col] / &inv;
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..k {
                    let delta = &factor * &a[col][c];
                    a[r][c] -= delta;
                }
                let delta = &factor * &b[col];
                b[r] -= delta;
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig2_model;
    use crate::parse_rat;
    use crate::reach::prob_eventually;

    #[test]
    fn single_action_mdp_matches_dtmc() {
        let m = fig2_model();
        let effect: BTreeSet<usize> = [7usize, 9].into_iter().collect();
        let profile = prob_eventually(&m, &effect);
        let iv = min_max_eventually(&m.as_mdp(), &effect);
        for s in 0..m.len() {
            assert_eq!(iv.lo[s], profile.values[s]);
            assert_eq!(iv.hi[s], profile.values[s]);
        }
    }

    #[test]
    fn effect_states_are_unit_interval() {
        let m = fig2_model().as_mdp();
        let effect: BTreeSet<usize> = [7usize, 9].into_iter().collect();
        let iv = min_max_eventually(&m, &effect);
        assert!(iv.lo[7].is_one() && iv.hi[7].is_one());
        assert!(iv.lo[10].is_zero() && iv.hi[10].is_zero());
    }

    #[test]
    fn partial_self_loop_is_renormalized() {
        // One interior state with action mass 1/2 on itself and 1/2 to the
        // target: absorption value 1 via the geometric series.
        use crate::model::{Mdp, MdpAction, MdpState};
        use crate::rational::Probability;
        let states = vec![
            MdpState { name: "a".into(), labels: Default::default() },
            MdpState { name: "b".into(), labels: Default::default() },
        ];
        let actions = vec![
            vec![MdpAction {
                name: "stay-or-go".into(),
                transitions: vec![
                    (0, Probability::from_unit(parse_rat("1/2").unwrap())),
                    (1, Probability::from_unit(parse_rat("1/2").unwrap())),
                ],
            }],
            vec![MdpAction {
                name: "halt".into(),
                transitions: vec![(1, Probability::one())],
            }],
        ];
        let m = Mdp {
            states,
            actions,
            initial: [0usize].into_iter().collect(),
            ap: Default::default(),
            substochastic: false,
        };
        let effect: BTreeSet<usize> = [1usize].into_iter().collect();
        let iv = min_max_eventually(&m, &effect);
        assert!(iv.lo[0].is_one());
        assert!(iv.hi[0].is_one());
    }
}
