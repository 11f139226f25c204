//! Seeded random model generation, a brute-force path-enumeration oracle
//! for cross-checking the analytic pipeline, and the concrete-versus-
//! refinement timing harness.

use crate::concrete::{self, CandidatePolicy, PacError, PacQuery, RootPolicy};
use crate::model::{Dtmc, ModelError, State};
use crate::predicate::{CmpOp, Predicate, PredicateError};
use crate::rational::{Probability, Rat};
use crate::refine::{self, RefineConfig, RefineError};
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::Instant;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GenError {
    #[error("bad generator spec: {0}")]
    BadSpec(String),
    #[error("state budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

/// Parameters of the layered random chain generator. Successor valuations
/// follow a small kinematic update (pos += vel; vel += act/20 + noise) so
/// the generated chains resemble the running example without a controller.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub seed: u64,
    /// Hard cap on the number of states.
    pub budget: usize,
    /// Expansion depth; leaves at this depth become absorbing.
    pub depth: usize,
    pub kmin: usize,
    pub kmax: usize,
    /// Noise amplitude added to the velocity each step.
    pub noise: Rat,
    /// Branch weights are sampled from 1..=wmax before normalization.
    /// Small values keep exact denominators smooth on deep models.
    pub wmax: u64,
    /// Absorbing states satisfying this predicate get the `fail` label.
    pub effect_rule: Predicate,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 0,
            budget: 10_000,
            depth: 6,
            kmin: 1,
            kmax: 3,
            noise: Rat::new(1.into(), 50.into()),
            wmax: 1000,
            effect_rule: Predicate::Cmp {
                var: "pos".into(),
                op: CmpOp::Lt,
                value: Rat::new(1.into(), 8.into()),
            },
        }
    }
}

impl GenSpec {
    /// Parses `key=value` pairs separated by commas or newlines, e.g.
    /// `seed=7,budget=500,depth=5,kmin=1,kmax=3,noise=1/50,effect=pos < 1/8`.
    pub fn parse(text: &str) -> Result<GenSpec, GenError> {
        let mut spec = GenSpec::default();
        let pairs = text.split(|c| c == ',' || c == '\n');
        for pair in pairs.map(str::trim).filter(|p| !p.is_empty() && !p.starts_with('#')) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| GenError::BadSpec(format!("expected key=value, got `{pair}`")))?;
            let value = value.trim();
            let bad = |e: &dyn std::fmt::Display| GenError::BadSpec(format!("{key}: {e}"));
            match key.trim() {
                "seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
                "budget" => spec.budget = value.parse().map_err(|e| bad(&e))?,
                "depth" => spec.depth = value.parse().map_err(|e| bad(&e))?,
                "kmin" => spec.kmin = value.parse().map_err(|e| bad(&e))?,
                "kmax" => spec.kmax = value.parse().map_err(|e| bad(&e))?,
                "noise" => spec.noise = crate::rational::parse_rat(value).map_err(|e| bad(&e))?,
                "wmax" => spec.wmax = value.parse().map_err(|e| bad(&e))?,
                "effect" => spec.effect_rule = Predicate::parse(value)?,
                other => return Err(GenError::BadSpec(format!("unknown key `{other}`"))),
            }
        }
        if spec.kmin < 1 || spec.kmax < spec.kmin {
            return Err(GenError::BadSpec("need 1 <= kmin <= kmax".into()));
        }
        if spec.budget == 0 {
            return Err(GenError::BadSpec("budget must be positive".into()));
        }
        if spec.wmax == 0 {
            return Err(GenError::BadSpec("wmax must be positive".into()));
        }
        Ok(spec)
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    lo + rng.next_u64() % (hi - lo + 1)
}

/// Deterministic layered chain for one spec.
pub fn generate(spec: &GenSpec) -> Result<Dtmc, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vars = vec!["pos".to_string(), "vel".to_string(), "act".to_string()];
    let mut states: Vec<State> = Vec::new();
    let mut transitions: Vec<Vec<(usize, Probability)>> = Vec::new();
    let accel = Rat::new(1.into(), 20.into());

    let push_state = |states: &mut Vec<State>,
                          transitions: &mut Vec<Vec<(usize, Probability)>>,
                          values: Vec<Rat>|
     -> Result<usize, GenError> {
        if states.len() >= spec.budget {
            return Err(GenError::BudgetExceeded(spec.budget));
        }
        let id = states.len();
        states.push(State {
            id,
            name: format!("s{id}"),
            values,
            labels: BTreeSet::new(),
        });
        transitions.push(Vec::new());
        Ok(id)
    };

    let root = push_state(
        &mut states,
        &mut transitions,
        vec![Rat::zero(), Rat::zero(), Rat::one()],
    )?;
    let mut frontier = vec![root];
    for _ in 0..spec.depth {
        let mut next = Vec::new();
        for s in frontier {
            let k = uniform(&mut rng, spec.kmin as u64, spec.kmax as u64) as usize;
            let weights: Vec<u64> = (0..k).map(|_| uniform(&mut rng, 1, spec.wmax)).collect();
            let total: u64 = weights.iter().sum();
            let pos = states[s].values[0].clone();
            let vel = states[s].values[1].clone();
            let act = states[s].values[2].clone();
            for w in weights {
                let r = uniform(&mut rng, 0, 200) as i64 - 100;
                let noise = &spec.noise * Rat::new(r.into(), 100.into());
                let new_act = Rat::from_integer((rng.next_u64() % 2).into());
                let child = push_state(
                    &mut states,
                    &mut transitions,
                    vec![&pos + &vel, &vel + &act * &accel + noise, new_act],
                )?;
                let p = Probability::from_unit(Rat::new(w.into(), total.into()));
                transitions[s].push((child, p));
                next.push(child);
            }
        }
        frontier = next;
    }
    for &leaf in &frontier {
        states[leaf].labels.insert("halt".into());
        transitions[leaf].push((leaf, Probability::one()));
    }
    // Effect labeling on absorbing states.
    for s in states.iter_mut() {
        if s.labels.contains("halt") && spec.effect_rule.eval(&vars, s)? {
            s.labels.insert("fail".into());
        }
    }
    let initial = BTreeSet::from([root]);
    Ok(Dtmc::new(vars, states, transitions, initial)?)
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("oracle path budget of {0} exceeded")]
    PathBudget(usize),
    #[error(transparent)]
    Pac(#[from] PacError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

/// Outcome of the brute-force search: the first singleton candidate in
/// search order that passes both conditions, with its path-mass values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub cause: BTreeSet<usize>,
    pub root: usize,
    pub p_aw: Rat,
    pub p_cw: Rat,
}

/// All root-to-absorption paths with their exact probabilities.
fn all_paths(m: &Dtmc, from: usize, cap: usize) -> Result<Vec<(Vec<usize>, Rat)>, OracleError> {
    let mut out = Vec::new();
    let mut path = vec![from];
    fn dfs(
        m: &Dtmc,
        path: &mut Vec<usize>,
        mass: Rat,
        out: &mut Vec<(Vec<usize>, Rat)>,
        cap: usize,
    ) -> Result<(), OracleError> {
        let s = *path.last().unwrap();
        if m.states[s].is_absorbing() {
            if out.len() >= cap {
                return Err(OracleError::PathBudget(cap));
            }
            out.push((path.clone(), mass));
            return Ok(());
        }
        for (t, p) in &m.transitions[s] {
            path.push(*t);
            dfs(m, path, &mass * p.as_rat(), out, cap)?;
            path.pop();
        }
        Ok(())
    }
    dfs(m, &mut path, Rat::one(), &mut out, cap)?;
    Ok(out)
}

/// Path mass of "hit the cause before the effect, then reach the effect".
fn path_aw(paths: &[(Vec<usize>, Rat)], cause: &BTreeSet<usize>, effect: &BTreeSet<usize>) -> Rat {
    let mut sum = Rat::zero();
    'paths: for (path, mass) in paths {
        for (i, s) in path.iter().enumerate() {
            if effect.contains(s) {
                continue 'paths;
            }
            if cause.contains(s) {
                if path[i..].iter().any(|t| effect.contains(t)) {
                    sum += mass;
                }
                continue 'paths;
            }
        }
    }
    sum
}

/// Path mass of "reach the effect without ever stepping into the cause".
fn path_cw(paths: &[(Vec<usize>, Rat)], cause: &BTreeSet<usize>, effect: &BTreeSet<usize>) -> Rat {
    let mut sum = Rat::zero();
    'paths: for (path, mass) in paths {
        for (i, s) in path.iter().enumerate() {
            if i > 0 && cause.contains(s) {
                continue 'paths;
            }
            if effect.contains(s) {
                sum += mass;
                continue 'paths;
            }
        }
    }
    sum
}

/// Stutter quantities recomputed from scratch: signature agreement, the
/// one-step stutter mass, and the path-product unrolling of the
/// stutter-until recursion with a fixed comparison partner.
struct OracleStutter {
    sig: Vec<Vec<bool>>,
    st: Vec<Rat>,
}

impl OracleStutter {
    fn build(m: &Dtmc, w: &[Predicate]) -> Result<Self, PredicateError> {
        let sig: Vec<Vec<bool>> = m
            .states
            .iter()
            .map(|s| w.iter().map(|p| p.eval(&m.vars, s)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        let st = (0..m.len())
            .map(|s| {
                m.transitions[s]
                    .iter()
                    .filter(|(t, _)| sig[s] == sig[*t])
                    .map(|(_, p)| p.as_rat().clone())
                    .sum()
            })
            .collect();
        Ok(OracleStutter { sig, st })
    }

    fn stutter_until(&self, m: &Dtmc, partner: usize, s: usize) -> Rat {
        if self.sig[partner] == self.sig[s] {
            return Rat::one();
        }
        if m.states[s].is_absorbing() || self.st[s].is_zero() {
            return Rat::zero();
        }
        let mut sum = Rat::zero();
        for (t, p) in &m.transitions[s] {
            sum += p.as_rat() * self.stutter_until(m, partner, *t);
        }
        &self.st[s] * sum
    }

    fn se_holds(&self, m: &Dtmc, s: usize, t: usize) -> bool {
        self.directed(m, s, t) && self.directed(m, t, s)
    }

    fn directed(&self, m: &Dtmc, s: usize, t: usize) -> bool {
        if self.sig[s] != self.sig[t] {
            return true;
        }
        let mut neq = Rat::zero();
        for (s2, p) in &m.transitions[s] {
            for (t2, q) in &m.transitions[t] {
                if self.sig[*s2] == self.sig[*t2] {
                    neq += p.as_rat() * q.as_rat();
                }
            }
        }
        Rat::one() <= neq + &self.st[s] + self.stutter_until(m, s, t)
    }
}

/// Brute-force discovery by full path enumeration; singleton candidates in
/// the same order as the analytic search. `cap` bounds enumerated paths.
pub fn oracle_discover(q: &PacQuery, cap: usize) -> Result<Option<OracleReport>, OracleError> {
    let m = q.model;
    let effect = q.effect_set()?;
    let roots = q.root_set()?;
    let stutter = OracleStutter::build(m, &q.contingencies)?;

    let root_paths: Vec<(usize, Vec<(Vec<usize>, Rat)>)> = roots
        .iter()
        .map(|&r| Ok((r, all_paths(m, r, cap)?)))
        .collect::<Result<_, OracleError>>()?;

    // Eligibility from path data alone: a state qualifies if some path
    // visits it strictly before reaching the effect and later reaches it.
    let mut eligible: BTreeSet<usize> = BTreeSet::new();
    for (_, paths) in &root_paths {
        for (path, _) in paths {
            let cut = path.iter().position(|s| effect.contains(s));
            if let Some(cut) = cut {
                eligible.extend(path[..cut].iter().copied());
            }
        }
    }
    eligible.retain(|s| !roots.contains(s) && !effect.contains(s));
    let mut order: Vec<usize> = eligible.into_iter().collect();
    order.sort_by_key(|&s| (m.bfs_depth(s), s));

    for s in order {
        let cause = BTreeSet::from([s]);
        for (sigma, paths) in &root_paths {
            let p_aw = path_aw(paths, &cause, &effect);
            if p_aw.is_zero() {
                continue;
            }
            let mut ok = true;
            let mut worst = Rat::zero();
            for (sigma2, paths2) in &root_paths {
                if !stutter.se_holds(m, *sigma, *sigma2) {
                    continue;
                }
                let p_cw = path_cw(paths2, &cause, &effect);
                if p_aw <= p_cw {
                    ok = false;
                    break;
                }
                if p_cw > worst {
                    worst = p_cw;
                }
            }
            if ok {
                return Ok(Some(OracleReport {
                    cause,
                    root: *sigma,
                    p_aw,
                    p_cw: worst,
                }));
            }
        }
    }
    Ok(None)
}

/// One row of the comparison table.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub label: String,
    pub size: usize,
    pub concrete_ms: u128,
    pub refine_ms: u128,
    /// 100 * (1 - refine/concrete); negative when refinement is slower.
    pub improvement_pct: f64,
    /// Same cause-existence verdict; the sets themselves may differ.
    pub agreement: bool,
    pub concrete_cause: Option<BTreeSet<usize>>,
    pub refine_cause: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>8} {:>14} {:>12} {:>13} {:>6}\n",
            "case", "states", "concrete(ms)", "refine(ms)", "improvement", "agree"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:>8} {:>14} {:>12} {:>12.1}% {:>6}\n",
                r.label,
                r.size,
                r.concrete_ms,
                r.refine_ms,
                r.improvement_pct,
                if r.agreement { "yes" } else { "NO" }
            ));
        }
        out
    }
}

/// Default partition predicates for a generated model: the effect rule,
/// the halt label, and a position threshold at the median.
pub fn default_predicates(m: &Dtmc, effect: &Predicate) -> Vec<Predicate> {
    let mut positions: Vec<Rat> = m.states.iter().map(|s| s.values[0].clone()).collect();
    positions.sort();
    let median = positions[positions.len() / 2].clone();
    vec![
        effect.clone(),
        Predicate::Label("halt".into()),
        Predicate::Cmp { var: "pos".into(), op: CmpOp::Ge, value: median },
    ]
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Pac(#[from] PacError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// Times concrete discovery against the refinement loop on one model and
/// checks that both reach the same cause-existence verdict. The caller
/// picks the refinement budget; on large models a high alpha and a low
/// round cap keep the abstract side tractable.
pub fn compare(
    m: &Dtmc,
    effect: &Predicate,
    predicates: &[Predicate],
    label: &str,
    cfg: &RefineConfig,
) -> Result<BenchRow, BenchError> {
    let q = PacQuery {
        model: m,
        effect: effect.clone(),
        contingencies: Vec::new(),
        roots: RootPolicy::InitialOnly,
        candidates: CandidatePolicy::SingleState,
    };
    let t0 = Instant::now();
    let concrete = concrete::discover(&q)?;
    let concrete_ms = t0.elapsed().as_millis();

    let t1 = Instant::now();
    let (refined, _) = refine::run(m, predicates, effect, &[], cfg)?;
    let refine_ms = t1.elapsed().as_millis();

    let concrete_cause = concrete.map(|r| r.cause);
    let refine_cause = refined.map(|r| r.cause);
    let agreement = concrete_cause.is_some() == refine_cause.is_some();
    let improvement_pct = if concrete_ms > 0 {
        100.0 * (1.0 - refine_ms as f64 / concrete_ms as f64)
    } else {
        0.0
    };
    Ok(BenchRow {
        label: label.to_string(),
        size: m.len(),
        concrete_ms,
        refine_ms,
        improvement_pct,
        agreement,
        concrete_cause,
        refine_cause,
    })
}
