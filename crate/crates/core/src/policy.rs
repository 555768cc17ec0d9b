//! Constraint-selection policies run against a planner oracle: BOX (UCB with
//! sequential conditioning), STATIC, RAND, the discrete DOO adaptation, and
//! the unconstrained raw planner.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experience::ConstraintSet;
use crate::gaussian::GaussianBelief;
use crate::rng::{derive_seed, rng_from, Rng};

/// Exploration constant used in the illustrative runs (95% interval).
pub const DEFAULT_ZETA: f64 = 1.96;

/// `ζ = sqrt(2 log(1/δ))`, the exploration constant the regret bound is stated for.
pub fn zeta_for_delta(delta: f64) -> f64 {
    (2.0 * (1.0 / delta).ln()).sqrt()
}

/// UCB values closer than this (relative to max(1, |best|)) count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub score: f64,
    pub feasible: bool,
    /// Waypoints of the plan in configuration space.
    pub plan: Vec<[f64; 2]>,
    pub cost_units: f64,
    /// Constraint actually used; the raw planner reports what it sampled.
    pub constraint: Option<Vec<f64>>,
}

pub trait PlannerOracle {
    type Instance: ?Sized;

    /// Plans `instance` under constraint `constraint` of the oracle's set.
    fn evaluate(&self, instance: &Self::Instance, constraint: usize) -> Result<PlanResult>;

    /// One unconstrained planning attempt; `seed` drives any sampling.
    fn unconstrained_solve(&self, instance: &Self::Instance, seed: u64) -> Result<PlanResult>;
}

/// Oracle whose "instance" is a row of true scores. Entries above `sentinel`
/// are feasible; every evaluation costs one unit.
#[derive(Debug, Clone, Copy)]
pub struct TableOracle {
    pub sentinel: f64,
}

impl PlannerOracle for TableOracle {
    type Instance = [f64];

    fn evaluate(&self, instance: &[f64], constraint: usize) -> Result<PlanResult> {
        let score = *instance.get(constraint).ok_or(Error::OutOfRange {
            index: constraint,
            len: instance.len(),
        })?;
        Ok(PlanResult {
            score,
            feasible: score > self.sentinel,
            plan: Vec::new(),
            cost_units: 1.0,
            constraint: None,
        })
    }

    fn unconstrained_solve(&self, _: &[f64], _: u64) -> Result<PlanResult> {
        Err(Error::Oracle(
            "a score table has no unconstrained planner".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    /// 1-based step.
    pub t: usize,
    /// Constraint index; `None` for raw-planner attempts.
    pub constraint: Option<usize>,
    pub score: f64,
    pub feasible: bool,
    /// Value the policy maximized when choosing (UCB, mean or DOO bound).
    pub ucb: Option<f64>,
    pub cost_units: f64,
    pub cum_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub choices: Vec<Choice>,
    /// Step `t*` of the best score (earliest on ties).
    pub best_step: Option<usize>,
    pub best_score: Option<f64>,
    pub cumulative_cost: f64,
    /// Simulated cost of belief updates (entries touched).
    pub update_cost: f64,
    /// Conditioning pivots, one per BOX step.
    pub pivots: Vec<f64>,
}

impl EpisodeTrace {
    fn record(&mut self, constraint: Option<usize>, result: &PlanResult, ucb: Option<f64>) {
        let t = self.choices.len() + 1;
        self.cumulative_cost += result.cost_units;
        self.choices.push(Choice {
            t,
            constraint,
            score: result.score,
            feasible: result.feasible,
            ucb: ucb.filter(|v| v.is_finite()),
            cost_units: result.cost_units,
            cum_cost: self.cumulative_cost,
        });
        if self.best_score.is_none_or(|b| result.score > b) {
            self.best_score = Some(result.score);
            self.best_step = Some(t);
        }
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn solved(&self) -> bool {
        self.choices.iter().any(|c| c.feasible)
    }

    pub fn first_feasible(&self) -> Option<&Choice> {
        self.choices.iter().find(|c| c.feasible)
    }

    /// Best score among the first `budget` evaluations.
    pub fn best_within(&self, budget: usize) -> Option<f64> {
        self.choices
            .iter()
            .take(budget)
            .map(|c| c.score)
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
    }

    pub fn constraint_indices(&self) -> Vec<usize> {
        self.choices.iter().filter_map(|c| c.constraint).collect()
    }

    /// One JSON object per step: `{t, constraint_id, score, ucb, cum_cost}`.
    pub fn to_jsonl(&self, constraint_ids: &[String]) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            t: usize,
            constraint_id: Option<&'a str>,
            score: f64,
            ucb: Option<f64>,
            cum_cost: f64,
        }
        let mut out = String::new();
        for c in &self.choices {
            let line = Line {
                t: c.t,
                constraint_id: c
                    .constraint
                    .and_then(|i| constraint_ids.get(i))
                    .map(String::as_str),
                score: c.score,
                ucb: c.ucb,
                cum_cost: c.cum_cost,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn check_budget(k: usize, m: usize) -> Result<()> {
    if k > m {
        Err(Error::BudgetTooLarge { k, m })
    } else {
        Ok(())
    }
}

/// Argmax over `(index, value)` pairs, breaking ties uniformly with `rng`.
pub(crate) fn argmax_random_tie(values: &[(usize, f64)], rng: &mut Rng) -> Option<(usize, f64)> {
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    let tied: Vec<(usize, f64)> = values
        .iter()
        .copied()
        .filter(|v| v.1 == best || (best.is_finite() && best - v.1 <= tol))
        .collect();
    match tied.len() {
        0 => None,
        1 => Some(tied[0]),
        n => Some(tied[rng.random_range(0..n)]),
    }
}

/// BOX: pick the untried constraint with the highest UCB, evaluate it,
/// condition the belief on the observed score, repeat `k` times.
pub fn run_box<O: PlannerOracle + ?Sized>(
    instance: &O::Instance,
    oracle: &O,
    prior: &GaussianBelief,
    k: usize,
    zeta: f64,
    seed: u64,
) -> Result<EpisodeTrace> {
    check_budget(k, prior.dim())?;
    if !prior.evaluated().is_empty() {
        return Err(Error::InvalidParam(
            "BOX needs an unconditioned prior".into(),
        ));
    }
    if !(zeta >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "zeta must be nonnegative, got {zeta}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut belief = prior.clone();
    let mut trace = EpisodeTrace::default();
    for _ in 0..k {
        let ucb = belief.ucb(zeta);
        let (index, value) =
            argmax_random_tie(&ucb, &mut rng).expect("k <= m leaves an untried constraint");
        let result = oracle.evaluate(instance, index)?;
        trace.record(Some(index), &result, Some(value));
        belief = belief.condition(index, result.score)?;
        trace.update_cost += belief.update_cost();
    }
    trace.pivots = belief.pivots().to_vec();
    Ok(trace)
}

/// The order STATIC evaluates constraints in: descending mean, ascending index on ties.
pub fn static_order(prior: &GaussianBelief) -> Vec<usize> {
    let mean = prior.mean();
    let mut order: Vec<usize> = (0..prior.dim()).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    order
}

pub fn run_static<O: PlannerOracle + ?Sized>(
    instance: &O::Instance,
    oracle: &O,
    prior: &GaussianBelief,
    k: usize,
) -> Result<EpisodeTrace> {
    check_budget(k, prior.dim())?;
    let mut trace = EpisodeTrace::default();
    for &i in static_order(prior).iter().take(k) {
        let result = oracle.evaluate(instance, i)?;
        trace.record(Some(i), &result, Some(prior.mean()[i]));
    }
    Ok(trace)
}

/// The `k` distinct indices RAND evaluates, in order.
pub fn rand_order(m: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from(seed);
    let mut idx: Vec<usize> = (0..m).collect();
    let (picked, _) = idx.partial_shuffle(&mut rng, k);
    picked.to_vec()
}

pub fn run_rand<O: PlannerOracle + ?Sized>(
    instance: &O::Instance,
    oracle: &O,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    check_budget(k, m)?;
    let mut trace = EpisodeTrace::default();
    for i in rand_order(m, k, seed) {
        let result = oracle.evaluate(instance, i)?;
        trace.record(Some(i), &result, None);
    }
    Ok(trace)
}

pub type Semimetric = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Lipschitz constant and semi-metric for the DOO bound
/// `J(θi) ≤ J(θj) + λ·l(θi, θj)`.
#[derive(Clone)]
pub struct DooParams {
    pub lipschitz: f64,
    pub semimetric: Semimetric,
}

impl DooParams {
    pub fn euclidean(lipschitz: f64) -> Self {
        DooParams {
            lipschitz,
            semimetric: Arc::new(|a, b| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }),
        }
    }
}

impl Default for DooParams {
    fn default() -> Self {
        Self::euclidean(1.0)
    }
}

impl fmt::Debug for DooParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DooParams")
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

/// Tightest DOO upper bound for every constraint given the evaluated
/// `(index, score)` pairs; `+∞` everywhere when nothing is evaluated.
pub fn doo_bounds(
    evaluated: &[(usize, f64)],
    constraints: &ConstraintSet,
    params: &DooParams,
) -> Vec<f64> {
    (0..constraints.len())
        .map(|i| {
            evaluated
                .iter()
                .map(|&(j, score)| {
                    score
                        + params.lipschitz
                            * (params.semimetric)(constraints.params(i), constraints.params(j))
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn run_doo<O: PlannerOracle + ?Sized>(
    instance: &O::Instance,
    oracle: &O,
    constraints: &ConstraintSet,
    params: &DooParams,
    k: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    let m = constraints.len();
    check_budget(k, m)?;
    if !(params.lipschitz >= 0.0) {
        return Err(Error::InvalidParam(
            "Lipschitz constant must be nonnegative".into(),
        ));
    }
    let mut rng = rng_from(seed);
    let mut evaluated: Vec<(usize, f64)> = Vec::with_capacity(k);
    let mut tried = vec![false; m];
    let mut trace = EpisodeTrace::default();
    for _ in 0..k {
        let bounds = doo_bounds(&evaluated, constraints, params);
        let candidates: Vec<(usize, f64)> = (0..m)
            .filter(|&i| !tried[i])
            .map(|i| (i, bounds[i]))
            .collect();
        let (index, bound) =
            argmax_random_tie(&candidates, &mut rng).expect("untried constraint left");
        let result = oracle.evaluate(instance, index)?;
        trace.record(Some(index), &result, Some(bound));
        tried[index] = true;
        evaluated.push((index, result.score));
    }
    Ok(trace)
}

/// Calls the unconstrained planner until it returns a feasible plan or the
/// budget is spent.
pub fn run_raw<O: PlannerOracle + ?Sized>(
    instance: &O::Instance,
    oracle: &O,
    budget: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    let mut trace = EpisodeTrace::default();
    for attempt in 0..budget {
        let result = oracle.unconstrained_solve(instance, derive_seed(seed, attempt as u64))?;
        let feasible = result.feasible;
        trace.record(None, &result, None);
        if feasible {
            break;
        }
    }
    Ok(trace)
}
