//! Predicate abstraction of a concrete chain into an abstract MDP, the
//! contingency-preserving variant, stutter-signature subgraph enumeration
//! and the splitting step used by the refinement loop.

use crate::model::{Dtmc, Mdp, MdpAction, MdpState};
use crate::predicate::{Predicate, PredicateError};
use crate::rational::{format_rat, Probability, Rat};
use crate::reach::prob_eventually;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, thiserror::Error)]
pub enum AbsError {
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("at most 96 partition predicates are supported, got {0}")]
    TooManyPredicates(usize),
    #[error("abstract state {0} is a singleton and cannot be split")]
    SingletonTarget(String),
    #[error("path enumeration exceeded the budget of {0} paths")]
    PathBudget(usize),
}

/// Identity of an abstract state: the predicate bit pattern, plus the
/// concrete member id for singletons extracted during refinement. Ordering
/// is bits first, grouped state before its extracted singletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AbstractId {
    pub bits: u128,
    pub member: Option<usize>,
}

impl AbstractId {
    pub fn grouped(bits: u128) -> Self {
        AbstractId { bits, member: None }
    }

    pub fn singleton(bits: u128, member: usize) -> Self {
        AbstractId { bits, member: Some(member) }
    }
}

impl fmt::Display for AbstractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.member {
            None => write!(f, "ŝ_{}", self.bits),
            Some(i) => write!(f, "ŝ_{},{}", self.bits, i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractState {
    pub id: AbstractId,
    /// Concrete member state ids; non-empty.
    pub members: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbsMode {
    Plain,
    /// Never merges states that disagree on a contingency proposition; the
    /// propositions join the partition key as least significant bits.
    WPreserving(Vec<Predicate>),
}

/// A predicate abstraction: partition, induced MDP and back-maps.
#[derive(Debug, Clone)]
pub struct Abstraction<'m> {
    pub model: &'m Dtmc,
    pub predicates: Vec<Predicate>,
    pub mode: AbsMode,
    /// Sorted by id.
    pub states: Vec<AbstractState>,
    pub mdp: Mdp,
    /// Concrete state id to abstract index; `usize::MAX` for states
    /// unreachable from the initial set (not part of the partition).
    pub map: Vec<usize>,
}

/// Builds the abstraction of all states reachable from the initial set.
pub fn abstract_model<'m>(
    m: &'m Dtmc,
    predicates: &[Predicate],
    mode: AbsMode,
) -> Result<Abstraction<'m>, AbsError> {
    let extra = match &mode {
        AbsMode::Plain => &[][..],
        AbsMode::WPreserving(w) => w.as_slice(),
    };
    if predicates.len() + extra.len() > 96 {
        return Err(AbsError::TooManyPredicates(predicates.len() + extra.len()));
    }
    let reachable = reachable_states(m);
    let mut groups: BTreeMap<AbstractId, BTreeSet<usize>> = BTreeMap::new();
    for &s in &reachable {
        let mut bits: u128 = 0;
        for p in predicates.iter().chain(extra.iter()) {
            bits = (bits << 1) | u128::from(p.eval(&m.vars, &m.states[s])?);
        }
        groups.entry(AbstractId::grouped(bits)).or_default().insert(s);
    }
    let partition: Vec<AbstractState> = groups
        .into_iter()
        .map(|(id, members)| AbstractState { id, members })
        .collect();
    Ok(build(m, predicates.to_vec(), mode, partition))
}

fn reachable_states(m: &Dtmc) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = m.initial.clone();
    let mut stack: Vec<usize> = m.initial.iter().copied().collect();
    while let Some(s) = stack.pop() {
        for (t, _) in &m.transitions[s] {
            if seen.insert(*t) {
                stack.push(*t);
            }
        }
    }
    seen
}

/// Assembles an abstraction from an explicit partition (already sorted by
/// construction of the callers).
fn build<'m>(
    m: &'m Dtmc,
    predicates: Vec<Predicate>,
    mode: AbsMode,
    states: Vec<AbstractState>,
) -> Abstraction<'m> {
    let mut map = vec![usize::MAX; m.len()];
    for (i, a) in states.iter().enumerate() {
        for &s in &a.members {
            map[s] = i;
        }
    }
    let mdp_states: Vec<MdpState> = states
        .iter()
        .map(|a| MdpState {
            name: a.id.to_string(),
            labels: a
                .members
                .iter()
                .flat_map(|&s| m.states[s].labels.iter().cloned())
                .collect(),
        })
        .collect();
    let actions: Vec<Vec<MdpAction>> = states
        .iter()
        .map(|a| {
            a.members
                .iter()
                .map(|&s| {
                    let mut row: BTreeMap<usize, Rat> = BTreeMap::new();
                    for (t, p) in &m.transitions[s] {
                        *row.entry(map[*t]).or_insert_with(Rat::zero) += p.as_rat();
                    }
                    MdpAction {
                        name: m.states[s].name.clone(),
                        transitions: row
                            .into_iter()
                            .map(|(t, p)| (t, Probability::from_unit(p)))
                            .collect(),
                    }
                })
                .collect()
        })
        .collect();
    let initial: BTreeSet<usize> = m.initial.iter().map(|&s| map[s]).collect();
    let mut ap: BTreeSet<String> = BTreeSet::new();
    for s in &mdp_states {
        ap.extend(s.labels.iter().cloned());
    }
    let mdp = Mdp { states: mdp_states, actions, initial, ap, substochastic: false };
    debug_assert!(mdp.validate().is_ok());
    Abstraction { model: m, predicates, mode, states, mdp, map }
}

impl<'m> Abstraction<'m> {
    /// Abstract image of a concrete state set; `warn` collects the mixed
    /// abstract states whose members only partially hit the set.
    pub fn image(&self, concrete: &BTreeSet<usize>) -> (BTreeSet<usize>, Vec<String>) {
        let mut out = BTreeSet::new();
        let mut warnings = Vec::new();
        for (i, a) in self.states.iter().enumerate() {
            let hit = a.members.intersection(concrete).count();
            if hit > 0 {
                out.insert(i);
                if hit < a.members.len() {
                    warnings.push(format!(
                        "abstract state {} mixes effect and non-effect members",
                        a.id
                    ));
                }
            }
        }
        (out, warnings)
    }

    /// Union of the concrete members of the given abstract indices.
    pub fn concretize(&self, abstract_set: &BTreeSet<usize>) -> BTreeSet<usize> {
        abstract_set
            .iter()
            .flat_map(|&i| self.states[i].members.iter().copied())
            .collect()
    }

    /// The sidecar mapping text: one `ŝ_<v>: s_i s_j …` line per state.
    pub fn abs_map(&self) -> String {
        let mut out = String::new();
        for a in &self.states {
            let names: Vec<&str> =
                a.members.iter().map(|&s| self.model.states[s].name.as_str()).collect();
            out.push_str(&format!("{}: {}\n", a.id, names.join(" ")));
        }
        out
    }

    /// Deterministic textual form of the induced MDP.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.mdp.states.iter().enumerate() {
            out.push_str(&format!("state {}", s.name));
            out.push_str(" labels:");
            for l in &s.labels {
                out.push(' ');
                out.push_str(l);
            }
            out.push('\n');
            for a in &self.mdp.actions[i] {
                for (t, p) in &a.transitions {
                    out.push_str(&format!(
                        "trans {} {} {} {}\n",
                        s.name,
                        a.name,
                        self.mdp.states[*t].name,
                        format_rat(p.as_rat())
                    ));
                }
            }
        }
        for i in &self.mdp.initial {
            out.push_str(&format!("init {}\n", self.mdp.states[*i].name));
        }
        out
    }
}

/// Splits one abstract state (§ refinement): extracts the members whose
/// concrete reach-the-effect probability deviates most from the member
/// mean as singleton abstract states; `alpha` in (0,1] is the preserved
/// fraction, small alpha extracts more. A remainder of at most one state
/// forces a total split.
pub fn refine_split<'m>(
    a: &Abstraction<'m>,
    target: usize,
    alpha: &Rat,
    effect: &BTreeSet<usize>,
) -> Result<Abstraction<'m>, AbsError> {
    let t = &a.states[target];
    if t.members.len() < 2 {
        return Err(AbsError::SingletonTarget(t.id.to_string()));
    }
    let m = t.members.len();
    let k_rat = (Rat::one() - alpha) * Rat::from_integer(m.into());
    let k: usize = k_rat.ceil().to_integer().try_into().unwrap_or(0);
    let k = k.clamp(1, m);
    let total = m - k <= 1;

    let reach = prob_eventually(a.model, effect);
    let members: Vec<usize> = t.members.iter().copied().collect();
    let extracted: Vec<usize> = if total {
        members.clone()
    } else {
        let mean: Rat = members
            .iter()
            .map(|&s| reach.at(s).as_rat().clone())
            .sum::<Rat>()
            / Rat::from_integer(m.into());
        let mut ranked: Vec<(Rat, usize)> = members
            .iter()
            .map(|&s| ((reach.at(s).as_rat() - &mean).abs(), s))
            .collect();
        ranked.sort_by(|(da, sa), (db, sb)| db.cmp(da).then(sa.cmp(sb)));
        let mut chosen: Vec<usize> = ranked.into_iter().take(k).map(|(_, s)| s).collect();
        chosen.sort_unstable();
        chosen
    };

    let mut states: Vec<AbstractState> = Vec::with_capacity(a.states.len() + extracted.len());
    for (i, old) in a.states.iter().enumerate() {
        if i != target {
            states.push(old.clone());
            continue;
        }
        let rest: BTreeSet<usize> =
            old.members.iter().copied().filter(|s| !extracted.contains(s)).collect();
        if !rest.is_empty() {
            states.push(AbstractState { id: old.id, members: rest });
        }
        for &s in &extracted {
            states.push(AbstractState {
                id: AbstractId::singleton(old.id.bits, s),
                members: BTreeSet::from([s]),
            });
        }
    }
    states.sort_by_key(|s| s.id);
    Ok(build(a.model, a.predicates.clone(), a.mode.clone(), states))
}

/// One stutter-signature class of paths: the states and edges its paths
/// traverse, with original (hence possibly substochastic) probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    /// Stutter-collapsed sequence of contingency valuations along any path
    /// of the class.
    pub signature: Vec<Vec<bool>>,
    pub states: BTreeSet<usize>,
    pub edges: BTreeSet<(usize, usize)>,
    pub path_count: usize,
}

impl Subgraph {
    /// Human-readable signature like `(w,!w,w)` given the proposition
    /// names of the contingency set.
    pub fn signature_text(&self, w_names: &[String]) -> String {
        let step = |vals: &Vec<bool>| -> String {
            w_names
                .iter()
                .zip(vals)
                .map(|(n, &v)| if v { n.clone() } else { format!("!{n}") })
                .collect::<Vec<_>>()
                .join("&")
        };
        format!("({})", self.signature.iter().map(step).collect::<Vec<_>>().join(","))
    }

    /// Sub-model text in the transition-line format; rows of partially
    /// retained branching states do not sum to one by design.
    pub fn serialize(&self, m: &Dtmc) -> String {
        let mut out = String::new();
        for &s in &self.states {
            out.push_str(&format!("state {}\n", m.states[s].name));
        }
        for &(s, t) in &self.edges {
            let p = m.transitions[s]
                .iter()
                .find(|(u, _)| *u == t)
                .map(|(_, p)| p)
                .expect("edge comes from the model");
            out.push_str(&format!(
                "trans {} {} {}\n",
                m.states[s].name,
                m.states[t].name,
                format_rat(p.as_rat())
            ));
        }
        out
    }
}

/// Groups all root-to-absorption paths by their stutter-collapsed
/// contingency signature. `cap` bounds the number of enumerated paths.
pub fn enumerate_subgraphs(
    m: &Dtmc,
    w: &[Predicate],
    cap: usize,
) -> Result<Vec<Subgraph>, AbsError> {
    let mut signatures: Vec<Vec<bool>> = Vec::with_capacity(m.len());
    for s in &m.states {
        let sig = w.iter().map(|p| p.eval(&m.vars, s)).collect::<Result<Vec<bool>, _>>()?;
        signatures.push(sig);
    }

    let mut groups: BTreeMap<Vec<Vec<bool>>, Subgraph> = BTreeMap::new();
    let mut count = 0usize;
    let mut path: Vec<usize> = Vec::new();

    fn dfs(
        m: &Dtmc,
        signatures: &[Vec<bool>],
        s: usize,
        path: &mut Vec<usize>,
        groups: &mut BTreeMap<Vec<Vec<bool>>, Subgraph>,
        count: &mut usize,
        cap: usize,
    ) -> Result<(), AbsError> {
        path.push(s);
        if m.states[s].is_absorbing() {
            *count += 1;
            if *count > cap {
                return Err(AbsError::PathBudget(cap));
            }
            let mut sig: Vec<Vec<bool>> = Vec::new();
            for &u in path.iter() {
                if sig.last() != Some(&signatures[u]) {
                    sig.push(signatures[u].clone());
                }
            }
            let entry = groups.entry(sig.clone()).or_insert_with(|| Subgraph {
                signature: sig,
                states: BTreeSet::new(),
                edges: BTreeSet::new(),
                path_count: 0,
            });
            entry.path_count += 1;
            entry.states.extend(path.iter().copied());
            for pair in path.windows(2) {
                entry.edges.insert((pair[0], pair[1]));
            }
        } else {
            for (t, _) in &m.transitions[s] {
                dfs(m, signatures, *t, path, groups, count, cap)?;
            }
        }
        path.pop();
        Ok(())
    }

    for &r in &m.initial {
        dfs(m, &signatures, r, &mut path, &mut groups, &mut count, cap)?;
    }
    Ok(groups.into_values().collect())
}
