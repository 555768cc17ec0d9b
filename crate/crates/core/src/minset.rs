//! Minimal constraint sets: success probability, entropy, information gain
//! and the greedy cover construction with an exhaustive oracle.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experience::ExperienceBundle;
use crate::gaussian::{regularize, GaussianBelief, DEFAULT_PSD_TOLERANCE};
use crate::linalg;

/// Largest constraint count accepted by [`brute_force_oms`].
pub const BRUTE_FORCE_MAX_M: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmsParams {
    pub lambda_tradeoff: f64,
}

impl Default for OmsParams {
    fn default() -> Self {
        OmsParams {
            lambda_tradeoff: 0.1,
        }
    }
}

impl OmsParams {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_tradeoff.is_finite() || self.lambda_tradeoff < 0.0 {
            return Err(Error::InvalidParam(format!(
                "lambda_tradeoff must be finite and nonnegative, got {}",
                self.lambda_tradeoff
            )));
        }
        Ok(())
    }
}

/// `1 − ∏_{θ∈L} (1 − p_θ)`.
pub fn success_prob(p: &[f64], l: &[usize]) -> Result<f64> {
    let mut miss = 1.0;
    for &i in l {
        let pi = *p.get(i).ok_or(Error::OutOfRange {
            index: i,
            len: p.len(),
        })?;
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::InvalidParam(format!(
                "probability {pi} outside [0, 1]"
            )));
        }
        miss *= 1.0 - pi;
    }
    Ok(1.0 - miss)
}

/// Differential entropy `(|L|/2)(1 + log 2π) + ½ log det Σ_L` of a Gaussian
/// with covariance `cov_l`, after the jitter ladder.
pub fn entropy(cov_l: &DMatrix<f64>) -> Result<f64> {
    let (reg, _) = regularize(cov_l, DEFAULT_PSD_TOLERANCE)?;
    let log_det = linalg::log_det_spd(&reg)
        .ok_or_else(|| Error::InvalidParam("covariance is not positive definite".into()))?;
    let k = reg.nrows() as f64;
    Ok(0.5 * k * (1.0 + (2.0 * PI).ln()) + 0.5 * log_det)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gain {
    pub value: f64,
    /// The variance of θ was at or below the jitter; `value` is 0.
    pub degenerate: bool,
}

/// `log det Σ_{L'} − log det Σ_{L'|θ}` with `L' = L \ {θ}`: how much observing
/// θ shrinks the remaining set's uncertainty. Indices refer to rows of `cov`.
pub fn gain(cov: &DMatrix<f64>, l: &[usize], theta: usize) -> Result<Gain> {
    let pos = l
        .iter()
        .position(|&i| i == theta)
        .ok_or_else(|| Error::InvalidParam(format!("constraint {theta} is not in the set")))?;
    if let Some(&bad) = l.iter().find(|&&i| i >= cov.nrows()) {
        return Err(Error::OutOfRange {
            index: bad,
            len: cov.nrows(),
        });
    }
    let raw_var = cov[(theta, theta)];
    let (sigma_l, jitter) = regularize(&linalg::principal(cov, l), DEFAULT_PSD_TOLERANCE)?;
    if raw_var <= jitter || raw_var <= 0.0 {
        warn!("gain of constraint {theta}: variance {raw_var:e} is below jitter {jitter:e}");
        return Ok(Gain {
            value: 0.0,
            degenerate: true,
        });
    }
    let rest: Vec<usize> = (0..l.len()).filter(|&i| i != pos).collect();
    let pivot = sigma_l[(pos, pos)];
    let prior = linalg::principal(&sigma_l, &rest);
    let cross = linalg::submatrix(&sigma_l, &rest, &[pos]);
    let posterior = &prior - &cross * cross.transpose() / pivot;
    let before = linalg::log_det_spd(&prior);
    let after = linalg::log_det_spd(&posterior);
    match (before, after) {
        (Some(b), Some(a)) => Ok(Gain {
            value: b - a,
            degenerate: false,
        }),
        _ => Err(Error::InvalidParam(
            "conditioned covariance lost definiteness".into(),
        )),
    }
}

/// `Σ_{θ∈L} p_θ + λ Σ_{θ∈L} g(Σ_L, θ)`.
pub fn objective(p: &[f64], cov: &DMatrix<f64>, l: &[usize], lambda: f64) -> Result<f64> {
    let (total_gain, _) = total_gain(cov, l)?;
    let sum_p: f64 = l.iter().map(|&i| p[i]).sum();
    Ok(sum_p + lambda * total_gain)
}

fn total_gain(cov: &DMatrix<f64>, l: &[usize]) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut degenerate = 0;
    for &theta in l {
        let g = gain(cov, l, theta)?;
        total += g.value;
        degenerate += g.degenerate as usize;
    }
    Ok((total, degenerate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalSet {
    /// Constraint indices in the order they were added.
    pub indices: Vec<usize>,
    pub constraint_ids: Vec<String>,
    pub covered: BTreeSet<usize>,
    /// Training instances that no constraint covers.
    pub uncoverable: Vec<usize>,
    pub success_prob: f64,
    pub total_gain: f64,
    pub degenerate_gains: usize,
}

#[derive(Serialize)]
struct MinimalSetJson<'a> {
    indices: &'a [usize],
    constraint_ids: &'a [String],
    covered_count: usize,
    n_coverable: usize,
    success_prob: f64,
    total_gain: f64,
}

impl MinimalSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let n_coverable = self.covered.len();
        Ok(serde_json::to_string_pretty(&MinimalSetJson {
            indices: &self.indices,
            constraint_ids: &self.constraint_ids,
            covered_count: self.covered.len(),
            n_coverable,
            success_prob: self.success_prob,
            total_gain: self.total_gain,
        })?)
    }
}

fn covered_by(feasibility: &[Vec<bool>], l: &[usize]) -> BTreeSet<usize> {
    (0..feasibility.len())
        .filter(|&i| l.iter().any(|&j| feasibility[i][j]))
        .collect()
}

fn coverable(feasibility: &[Vec<bool>]) -> BTreeSet<usize> {
    (0..feasibility.len())
        .filter(|&i| feasibility[i].iter().any(|&f| f))
        .collect()
}

fn check_inputs(
    bundle: &ExperienceBundle,
    prior: &GaussianBelief,
    params: &OmsParams,
) -> Result<()> {
    params.validate()?;
    if prior.dim() != bundle.m() {
        return Err(Error::Shape(format!(
            "prior has {} constraints, bundle has {}",
            prior.dim(),
            bundle.m()
        )));
    }
    Ok(())
}

fn finish(
    bundle: &ExperienceBundle,
    prior: &GaussianBelief,
    indices: Vec<usize>,
) -> Result<MinimalSet> {
    let feasibility = bundle.feasibility();
    let covered = covered_by(feasibility, &indices);
    let uncoverable = (0..bundle.n()).filter(|i| !covered.contains(i)).collect();
    let p = bundle.feasibility_rates();
    let (total_gain, degenerate_gains) = total_gain(prior.covariance(), &indices)?;
    Ok(MinimalSet {
        constraint_ids: indices
            .iter()
            .map(|&i| bundle.constraints().ids()[i].clone())
            .collect(),
        success_prob: success_prob(&p, &indices)?,
        indices,
        covered,
        uncoverable,
        total_gain,
        degenerate_gains,
    })
}

/// Greedy minimal set. Seeds with the highest-mean constraint, then adds, among
/// the constraints covering the most still-uncovered instances, those of
/// maximal mean, the one of maximal gain. Ties go to the lowest index.
/// Instances no constraint covers are left out of the coverage target.
pub fn construct_oms(
    bundle: &ExperienceBundle,
    prior: &GaussianBelief,
    params: &OmsParams,
) -> Result<MinimalSet> {
    check_inputs(bundle, prior, params)?;
    let feasibility = bundle.feasibility();
    let target = coverable(feasibility);
    if target.is_empty() {
        return Err(Error::NothingFeasible);
    }
    let mean = prior.mean();
    let cov = prior.covariance();
    let m = bundle.m();

    let first = argmax_first(0..m, |i| mean[i]).expect("m > 0");
    let mut l = vec![first];
    let mut covered = covered_by(feasibility, &l);
    while !target.is_subset(&covered) {
        let uncovered: Vec<usize> = target.difference(&covered).copied().collect();
        let new_cover = |j: usize| uncovered.iter().filter(|&&i| feasibility[i][j]).count();
        let free: Vec<usize> = (0..m).filter(|j| !l.contains(j)).collect();
        let best_cover = free.iter().map(|&j| new_cover(j)).max().unwrap_or(0);
        debug_assert!(best_cover > 0);
        let by_cover: Vec<usize> = free
            .into_iter()
            .filter(|&j| new_cover(j) == best_cover)
            .collect();
        let best_mean = by_cover
            .iter()
            .map(|&j| mean[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let candidates: Vec<usize> = by_cover
            .into_iter()
            .filter(|&j| mean[j] == best_mean)
            .collect();

        let next = if candidates.len() == 1 {
            candidates[0]
        } else {
            let mut gains = Vec::with_capacity(candidates.len());
            for &j in &candidates {
                let mut with = l.clone();
                with.push(j);
                gains.push((j, gain(cov, &with, j)?.value));
            }
            argmax_first(gains.iter().copied(), |(_, g)| g)
                .expect("nonempty")
                .0
        };
        l.push(next);
        covered = covered_by(feasibility, &l);
    }
    finish(bundle, prior, l)
}

fn argmax_first<T: Copy>(items: impl IntoIterator<Item = T>, key: impl Fn(T) -> f64) -> Option<T> {
    let mut best: Option<(T, f64)> = None;
    for item in items {
        let v = key(item);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((item, v));
        }
    }
    best.map(|(t, _)| t)
}

/// Exhaustive minimal set: the covering subsets of smallest size, and among
/// those the one maximizing [`objective`]. Indices come out ascending.
pub fn brute_force_oms(
    bundle: &ExperienceBundle,
    prior: &GaussianBelief,
    params: &OmsParams,
) -> Result<MinimalSet> {
    check_inputs(bundle, prior, params)?;
    let m = bundle.m();
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::InvalidParam(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_M} constraints, got {m}"
        )));
    }
    let feasibility = bundle.feasibility();
    let target = coverable(feasibility);
    if target.is_empty() {
        return Err(Error::NothingFeasible);
    }
    let p = bundle.feasibility_rates();
    let masks: Vec<u32> = (0..m)
        .map(|j| {
            (0..bundle.n())
                .filter(|&i| feasibility[i][j])
                .fold(0u32, |acc, i| acc | (1 << (i % 32)))
        })
        .collect();
    let wide = bundle.n() > 32;

    for size in 1..=m {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for subset in (0u32..(1 << m)).filter(|s| s.count_ones() as usize == size) {
            let l: Vec<usize> = (0..m).filter(|&j| subset & (1 << j) != 0).collect();
            let covers = if wide {
                target.is_subset(&covered_by(feasibility, &l))
            } else {
                let union = l.iter().fold(0u32, |acc, &j| acc | masks[j]);
                target.iter().all(|&i| union & (1 << i) != 0)
            };
            if !covers {
                continue;
            }
            let c = objective(&p, prior.covariance(), &l, params.lambda_tradeoff)?;
            if best.as_ref().is_none_or(|(_, b)| c > *b) {
                best = Some((l, c));
            }
        }
        if let Some((l, _)) = best {
            return finish(bundle, prior, l);
        }
    }
    unreachable!("the full set covers every coverable instance")
}
