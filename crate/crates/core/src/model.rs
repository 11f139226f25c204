//! Concrete DTMCs, abstract MDPs, ingestion and structural validation.
//!
//! Models are finite, acyclic modulo absorbing self-loops, and carry exact
//! rational transition probabilities. All types are immutable after
//! validation and safe to share read-only across workers.

use crate::rational::{format_rat, parse_rat, Probability, Rat, RatError};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

pub const HALT_LABEL: &str = "halt";

/// One state of a concrete DTMC: dense id, exact valuation, labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub id: usize,
    pub name: String,
    /// Aligned with the model's `vars` declaration.
    pub values: Vec<Rat>,
    pub labels: BTreeSet<String>,
}

impl State {
    pub fn is_absorbing(&self) -> bool {
        self.labels.contains(HALT_LABEL)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    BadRational {
        line: usize,
        #[source]
        source: RatError,
    },
    #[error("validation error ({invariant}) at state {state}: {msg}")]
    Validation { invariant: &'static str, state: String, msg: String },
    #[error("model has no states")]
    Empty,
    #[error("model has no initial states")]
    NoInitial,
    #[error("json error: {0}")]
    Json(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Syntax { line, msg: msg.into() }
}

fn violated(invariant: &'static str, state: &str, msg: impl Into<String>) -> ModelError {
    ModelError::Validation { invariant, state: state.to_string(), msg: msg.into() }
}

/// A validated, acyclic (modulo absorbing self-loops) labeled Markov chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dtmc {
    pub vars: Vec<String>,
    pub states: Vec<State>,
    /// Sparse rows, target-sorted; includes absorbing self-loops.
    pub transitions: Vec<Vec<(usize, Probability)>>,
    pub initial: BTreeSet<usize>,
    pub ap: BTreeSet<String>,
    /// Topological order over non-self-loop edges.
    topo: Vec<usize>,
    /// BFS depth from the initial states.
    depth: Vec<usize>,
}

impl Dtmc {
    /// Builds and validates a model from raw parts. `initial` empty means
    /// "infer": states with in-degree zero over non-self-loop edges.
    pub fn new(
        vars: Vec<String>,
        states: Vec<State>,
        transitions: Vec<Vec<(usize, Probability)>>,
        initial: BTreeSet<usize>,
    ) -> Result<Dtmc, ModelError> {
        if states.is_empty() {
            return Err(ModelError::Empty);
        }
        assert_eq!(states.len(), transitions.len());
        for (i, s) in states.iter().enumerate() {
            assert_eq!(s.id, i, "state ids must be dense and in order");
            if s.values.len() != vars.len() {
                return Err(violated(
                    "uniform-valuation",
                    &s.name,
                    format!("expected {} variable values, found {}", vars.len(), s.values.len()),
                ));
            }
        }
        let mut transitions = transitions;
        for row in &mut transitions {
            row.sort_by_key(|(t, _)| *t);
        }

        // Row stochasticity, exact.
        for (i, row) in transitions.iter().enumerate() {
            let mut sum = Rat::zero();
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            for (t, p) in row {
                if *t >= states.len() {
                    return Err(violated("edge-target", &states[i].name, "target out of range"));
                }
                if !seen.insert(*t) {
                    return Err(violated(
                        "duplicate-edge",
                        &states[i].name,
                        format!("duplicate transition to {}", states[*t].name),
                    ));
                }
                if p.is_zero() {
                    return Err(violated(
                        "positive-probability",
                        &states[i].name,
                        format!("zero-probability transition to {}", states[*t].name),
                    ));
                }
                sum += p.as_rat();
            }
            if !sum.is_one() {
                return Err(violated(
                    "row-stochastic",
                    &states[i].name,
                    format!("outgoing probabilities sum to {}", format_rat(&sum)),
                ));
            }
        }

        // Absorbing <=> sole self-loop <=> halt label.
        for (i, row) in transitions.iter().enumerate() {
            let has_self = row.iter().any(|(t, _)| *t == i);
            let s = &states[i];
            if has_self {
                if row.len() != 1 {
                    return Err(violated(
                        "absorbing-self-loop",
                        &s.name,
                        "self-loop must be the only outgoing edge",
                    ));
                }
                if !s.labels.contains(HALT_LABEL) {
                    return Err(violated(
                        "halt-label",
                        &s.name,
                        "absorbing state must carry the halt label",
                    ));
                }
            } else if s.labels.contains(HALT_LABEL) {
                return Err(violated(
                    "halt-label",
                    &s.name,
                    "halt label on a non-absorbing state",
                ));
            }
        }

        // DAG check over non-self-loop edges (Kahn, min-id first).
        let n = states.len();
        let mut indeg = vec![0usize; n];
        for (i, row) in transitions.iter().enumerate() {
            for (t, _) in row {
                if *t != i {
                    indeg[*t] += 1;
                }
            }
        }
        let mut ready: BTreeSet<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            topo.push(next);
            for (t, _) in &transitions[next] {
                if *t != next {
                    indeg[*t] -= 1;
                    if indeg[*t] == 0 {
                        ready.insert(*t);
                    }
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap();
            return Err(violated(
                "acyclic",
                &states[stuck].name,
                "cycle through this state (only absorbing self-loops are allowed)",
            ));
        }

        let initial = if initial.is_empty() {
            let mut indeg0 = vec![0usize; n];
            for (i, row) in transitions.iter().enumerate() {
                for (t, _) in row {
                    if *t != i {
                        indeg0[*t] += 1;
                    }
                }
            }
            (0..n).filter(|&i| indeg0[i] == 0).collect()
        } else {
            initial
        };
        if initial.is_empty() {
            return Err(ModelError::NoInitial);
        }

        let mut ap: BTreeSet<String> = BTreeSet::new();
        for s in &states {
            ap.extend(s.labels.iter().cloned());
        }

        let depth = bfs_depth(n, &transitions, &initial);
        Ok(Dtmc { vars, states, transitions, initial, ap, topo, depth })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Topological order over non-self-loop edges (roots first).
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// BFS depth from the initial states; `usize::MAX` if unreachable.
    pub fn bfs_depth(&self, s: usize) -> usize {
        self.depth[s]
    }

    pub fn state_by_name(&self, name: &str) -> Option<&State> {
        self.states.iter().find(|s| s.name == name)
    }

    /// States satisfying a predicate.
    pub fn satisfying_set(
        &self,
        pred: &crate::predicate::Predicate,
    ) -> Result<BTreeSet<usize>, crate::predicate::PredicateError> {
        let mut out = BTreeSet::new();
        for s in &self.states {
            if pred.eval(&self.vars, s)? {
                out.insert(s.id);
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Dtmc, ModelError> {
        if text.trim_start().starts_with('{') {
            let file: ModelFile =
                serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
            file.build()
        } else {
            parse_text(text)
        }
    }

    /// Canonical line-oriented serialization; `parse(serialize(m)) == m`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("vars");
        for v in &self.vars {
            out.push(' ');
            out.push_str(v);
        }
        out.push('\n');
        for s in &self.states {
            out.push_str("state ");
            out.push_str(&s.name);
            for v in &s.values {
                out.push(' ');
                out.push_str(&format_rat(v));
            }
            out.push_str(" labels:");
            for l in &s.labels {
                out.push(' ');
                out.push_str(l);
            }
            out.push('\n');
        }
        for (i, row) in self.transitions.iter().enumerate() {
            for (t, p) in row {
                out.push_str(&format!(
                    "trans {} {} {}\n",
                    self.states[i].name,
                    self.states[*t].name,
                    format_rat(p.as_rat())
                ));
            }
        }
        for i in &self.initial {
            out.push_str(&format!("init {}\n", self.states[*i].name));
        }
        out
    }

    /// Canonical JSON mirror (keys sorted, rationals in lowest terms).
    pub fn serialize_json(&self) -> String {
        let file = ModelFile {
            init: self.initial.iter().map(|i| self.states[*i].name.clone()).collect(),
            states: self
                .states
                .iter()
                .map(|s| StateEntry {
                    id: s.name.clone(),
                    labels: s.labels.iter().cloned().collect(),
                    vals: s.values.iter().map(format_rat).collect(),
                })
                .collect(),
            trans: self
                .transitions
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter().map(move |(t, p)| {
                        (
                            self.states[i].name.clone(),
                            self.states[*t].name.clone(),
                            format_rat(p.as_rat()),
                        )
                    })
                })
                .collect(),
            vars: self.vars.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    /// Lifts the chain into an MDP with a single enabled action per state.
    pub fn as_mdp(&self) -> Mdp {
        let states = self
            .states
            .iter()
            .map(|s| MdpState { name: s.name.clone(), labels: s.labels.clone() })
            .collect();
        let actions = self
            .transitions
            .iter()
            .enumerate()
            .map(|(i, row)| {
                vec![MdpAction { name: self.states[i].name.clone(), transitions: row.clone() }]
            })
            .collect();
        Mdp {
            states,
            actions,
            initial: self.initial.clone(),
            ap: self.ap.clone(),
            substochastic: false,
        }
    }
}

fn bfs_depth(
    n: usize,
    transitions: &[Vec<(usize, Probability)>],
    initial: &BTreeSet<usize>,
) -> Vec<usize> {
    let mut depth = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &i in initial {
        depth[i] = 0;
        queue.push_back(i);
    }
    while let Some(s) = queue.pop_front() {
        for (t, _) in &transitions[s] {
            if depth[*t] == usize::MAX {
                depth[*t] = depth[s] + 1;
                queue.push_back(*t);
            }
        }
    }
    depth
}

/// A state of an MDP; abstract states carry no single valuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpState {
    pub name: String,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpAction {
    pub name: String,
    pub transitions: Vec<(usize, Probability)>,
}

/// A Markov decision process; for abstractions the actions are the concrete
/// member states of each abstract state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdp {
    pub states: Vec<MdpState>,
    /// Per-state non-empty action lists.
    pub actions: Vec<Vec<MdpAction>>,
    pub initial: BTreeSet<usize>,
    pub ap: BTreeSet<String>,
    /// Subgraph-induced models keep original probabilities, so rows may sum
    /// to less than one; missing mass is carried as zero continuation.
    pub substochastic: bool,
}

impl Mdp {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, acts) in self.actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(violated("enabled-actions", &self.states[i].name, "no enabled action"));
            }
            for a in acts {
                let mut sum = Rat::zero();
                for (t, p) in &a.transitions {
                    if *t >= self.states.len() {
                        return Err(violated("edge-target", &self.states[i].name, "target out of range"));
                    }
                    sum += p.as_rat();
                }
                let ok = if self.substochastic { sum <= Rat::one() } else { sum.is_one() };
                if !ok {
                    return Err(violated(
                        "action-stochastic",
                        &self.states[i].name,
                        format!("action {} has outgoing probability {}", a.name, format_rat(&sum)),
                    ));
                }
            }
        }
        if self.initial.is_empty() {
            return Err(ModelError::NoInitial);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// BFS depth from the initial states over all actions.
    pub fn bfs_depths(&self) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.states.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &i in &self.initial {
            depth[i] = 0;
            queue.push_back(i);
        }
        while let Some(s) = queue.pop_front() {
            for a in &self.actions[s] {
                for (t, _) in &a.transitions {
                    if depth[*t] == usize::MAX {
                        depth[*t] = depth[s] + 1;
                        queue.push_back(*t);
                    }
                }
            }
        }
        depth
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateEntry {
    id: String,
    labels: Vec<String>,
    vals: Vec<String>,
}

/// JSON mirror of the line-oriented model format; field order is the sorted
/// key order of the canonical serializer.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    init: Vec<String>,
    states: Vec<StateEntry>,
    trans: Vec<(String, String, String)>,
    vars: Vec<String>,
}

impl ModelFile {
    fn build(self) -> Result<Dtmc, ModelError> {
        let mut names: HashMap<String, usize> = HashMap::new();
        let mut states = Vec::new();
        for (idx, entry) in self.states.iter().enumerate() {
            if names.insert(entry.id.clone(), idx).is_some() {
                return Err(ModelError::Json(format!("duplicate state id {}", entry.id)));
            }
            let values = entry
                .vals
                .iter()
                .map(|v| parse_rat(v))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ModelError::Json(e.to_string()))?;
            states.push(State {
                id: idx,
                name: entry.id.clone(),
                values,
                labels: entry.labels.iter().cloned().collect(),
            });
        }
        let mut transitions = vec![Vec::new(); states.len()];
        for (src, dst, p) in &self.trans {
            let &s = names.get(src).ok_or_else(|| ModelError::Json(format!("unknown state {src}")))?;
            let &t = names.get(dst).ok_or_else(|| ModelError::Json(format!("unknown state {dst}")))?;
            let r = parse_rat(p).map_err(|e| ModelError::Json(e.to_string()))?;
            let p = Probability::new(r).map_err(|e| ModelError::Json(e.to_string()))?;
            transitions[s].push((t, p));
        }
        let mut initial = BTreeSet::new();
        for name in &self.init {
            let &i = names.get(name).ok_or_else(|| ModelError::Json(format!("unknown state {name}")))?;
            initial.insert(i);
        }
        Dtmc::new(self.vars, states, transitions, initial)
    }
}

fn parse_text(text: &str) -> Result<Dtmc, ModelError> {
    let mut vars: Option<Vec<String>> = None;
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut states: Vec<State> = Vec::new();
    let mut edges: Vec<(usize, usize, Probability, usize)> = Vec::new();
    let mut initial: BTreeSet<usize> = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().unwrap();
        match keyword {
            "vars" => {
                if vars.is_some() {
                    return Err(syntax(line, "duplicate vars declaration"));
                }
                let list: Vec<String> = tokens.map(str::to_string).collect();
                vars = Some(list);
            }
            "state" => {
                let vars = vars
                    .as_ref()
                    .ok_or_else(|| syntax(line, "state before vars declaration"))?;
                let name = tokens
                    .next()
                    .ok_or_else(|| syntax(line, "missing state id"))?
                    .to_string();
                if names.contains_key(&name) {
                    return Err(syntax(line, format!("duplicate state id {name}")));
                }
                let mut values = Vec::with_capacity(vars.len());
                for _ in 0..vars.len() {
                    let tok = tokens.next().ok_or_else(|| {
                        syntax(line, format!("expected {} variable values", vars.len()))
                    })?;
                    let r = parse_rat(tok)
                        .map_err(|source| ModelError::BadRational { line, source })?;
                    values.push(r);
                }
                let mut labels = BTreeSet::new();
                match tokens.next() {
                    Some("labels:") => {
                        labels.extend(tokens.map(str::to_string));
                    }
                    Some(other) => {
                        return Err(syntax(line, format!("expected `labels:`, found `{other}`")))
                    }
                    None => return Err(syntax(line, "expected `labels:`")),
                }
                let id = states.len();
                names.insert(name.clone(), id);
                states.push(State { id, name, values, labels });
            }
            "trans" => {
                let src = tokens.next().ok_or_else(|| syntax(line, "missing source state"))?;
                let dst = tokens.next().ok_or_else(|| syntax(line, "missing target state"))?;
                let ptok = tokens.next().ok_or_else(|| syntax(line, "missing probability"))?;
                let &s = names
                    .get(src)
                    .ok_or_else(|| syntax(line, format!("unknown state {src}")))?;
                let &t = names
                    .get(dst)
                    .ok_or_else(|| syntax(line, format!("unknown state {dst}")))?;
                let r = parse_rat(ptok).map_err(|source| ModelError::BadRational { line, source })?;
                let p = Probability::new(r)
                    .map_err(|source| ModelError::BadRational { line, source })?;
                if tokens.next().is_some() {
                    return Err(syntax(line, "trailing tokens after transition"));
                }
                edges.push((s, t, p, line));
            }
            "init" => {
                let name = tokens.next().ok_or_else(|| syntax(line, "missing state id"))?;
                let &i = names
                    .get(name)
                    .ok_or_else(|| syntax(line, format!("unknown state {name}")))?;
                initial.insert(i);
            }
            other => return Err(syntax(line, format!("unknown keyword `{other}`"))),
        }
    }

    let vars = vars.ok_or_else(|| syntax(1, "missing vars declaration"))?;
    let mut transitions = vec![Vec::new(); states.len()];
    for (s, t, p, _) in edges {
        transitions[s].push((t, p));
    }
    Dtmc::new(vars, states, transitions, initial)
}

impl fmt::Display for Dtmc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}
