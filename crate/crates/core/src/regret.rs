//! Regret of BOX, the maximum information gain ρ_k, the high-probability
//! regret bound and a Monte-Carlo check of its coverage.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg;
use crate::policy::{run_box, zeta_for_delta, EpisodeTrace, TableOracle};
use crate::rng::{derive_seed, rng_from, Rng};

/// Largest constraint count for which ρ_k is computed by enumeration.
pub const EXACT_RHO_MAX_M: usize = 20;

/// Fewest trials [`monte_carlo_validate`] accepts.
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretParams {
    pub delta: f64,
    /// Augmentation noise scale σ.
    pub sigma: f64,
    /// Strict upper bound on every prior variance.
    pub c_bound: f64,
    pub k: usize,
}

impl RegretParams {
    /// σ² = 0.99 × the smallest eigenvalue of `cov`, c = 1.01 × its largest
    /// diagonal entry.
    pub fn for_covariance(cov: &DMatrix<f64>, delta: f64, k: usize) -> Result<Self> {
        let min_eig = linalg::min_eigenvalue(cov);
        if !(min_eig > 0.0) {
            return Err(Error::InvalidParam(format!(
                "covariance needs a positive smallest eigenvalue, got {min_eig:e}"
            )));
        }
        let params = RegretParams {
            delta,
            sigma: (0.99 * min_eig).sqrt(),
            c_bound: 1.01 * linalg::max_diagonal(cov),
            k,
        };
        params.check(cov)?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParam(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.c_bound >= self.sigma * self.sigma && self.c_bound.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "c = {} must be at least sigma^2 = {}",
                self.c_bound,
                self.sigma * self.sigma
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParam("budget k must be positive".into()));
        }
        Ok(())
    }

    /// Checks the parameters against a prior covariance: `Σ − σ²I` must
    /// factorize and every variance must lie below c.
    pub fn check(&self, cov: &DMatrix<f64>) -> Result<()> {
        self.validate()?;
        let m = cov.nrows();
        if self.k > m {
            return Err(Error::BudgetTooLarge { k: self.k, m });
        }
        let max_diag = linalg::max_diagonal(cov);
        if !(self.c_bound > max_diag) {
            return Err(Error::InvalidParam(format!(
                "c = {} must exceed the largest variance {max_diag}",
                self.c_bound
            )));
        }
        let slack = 1e-12 * max_diag.max(1.0);
        let latent = cov - DMatrix::identity(m, m) * (self.sigma * self.sigma - slack);
        if linalg::cholesky_lower(&latent, 0.0).is_none() {
            return Err(Error::InvalidParam(format!(
                "covariance minus sigma^2 I is not positive semidefinite (sigma = {})",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn zeta(&self) -> f64 {
        zeta_for_delta(self.delta)
    }
}

/// `max_i true_scores[i] − max` of the true scores of the evaluated constraints.
pub fn regret(true_scores: &[f64], trace: &EpisodeTrace) -> Result<f64> {
    let best = true_scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut found = f64::NEG_INFINITY;
    for i in trace.constraint_indices() {
        let s = *true_scores.get(i).ok_or(Error::OutOfRange {
            index: i,
            len: true_scores.len(),
        })?;
        found = found.max(s);
    }
    if trace.is_empty() {
        return Err(Error::InvalidParam("regret of an empty trace".into()));
    }
    Ok(best - found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    Exact,
    Greedy,
}

fn half_log_det_scaled(cov: &DMatrix<f64>, subset: &[usize], sigma2: f64) -> Result<f64> {
    let sub = linalg::principal(cov, subset) / sigma2;
    linalg::log_det_spd(&sub)
        .map(|v| 0.5 * v)
        .ok_or_else(|| Error::InvalidParam("submatrix is not positive definite".into()))
}

/// `max_{|A|=k} ½ log det(σ⁻² Σ_A)`, by enumeration or by the greedy that adds
/// the constraint with the largest conditional variance.
pub fn rho_k(cov: &DMatrix<f64>, sigma: f64, k: usize, mode: RhoMode) -> Result<f64> {
    let m = cov.nrows();
    if k > m {
        return Err(Error::BudgetTooLarge { k, m });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let sigma2 = sigma * sigma;
    match mode {
        RhoMode::Exact => {
            if m > EXACT_RHO_MAX_M {
                return Err(Error::InvalidParam(format!(
                    "exact rho_k enumerates subsets and is limited to {EXACT_RHO_MAX_M} constraints, got {m}"
                )));
            }
            let mut best = if k == 0 { 0.0 } else { f64::NEG_INFINITY };
            for subset in (0u32..(1 << m)).filter(|s| s.count_ones() as usize == k && k > 0) {
                let a: Vec<usize> = (0..m).filter(|&j| subset & (1 << j) != 0).collect();
                best = best.max(half_log_det_scaled(cov, &a, sigma2)?);
            }
            Ok(best)
        }
        RhoMode::Greedy => {
            let mut belief = GaussianBelief::new(DVector::zeros(m), cov.clone())?;
            let mut total = 0.0;
            for _ in 0..k {
                let next = belief
                    .untried()
                    .max_by(|&a, &b| {
                        belief
                            .variance(a)
                            .total_cmp(&belief.variance(b))
                            .then(b.cmp(&a))
                    })
                    .expect("k <= m");
                total += 0.5 * (belief.variance(next) / sigma2).ln();
                belief = belief.condition(next, 0.0)?;
            }
            Ok(total)
        }
    }
}

/// `2 sqrt(2 log(1/δ) (2(c − σ²) ρ / (k log(c/σ²)) + σ²))`. At `c = σ²` the
/// inner term takes its limit σ².
pub fn regret_bound(params: &RegretParams, rho: f64) -> Result<f64> {
    params.validate()?;
    let sigma2 = params.sigma * params.sigma;
    let c = params.c_bound;
    let log_ratio = (c / sigma2).ln();
    let inner = if log_ratio > 0.0 {
        2.0 * (c - sigma2) * rho / (params.k as f64 * log_ratio) + sigma2
    } else {
        sigma2
    };
    Ok(2.0 * (2.0 * (1.0 / params.delta).ln() * inner).sqrt())
}

/// `½ Σ_t log(pivot_t / σ²)` over the conditioning pivots of a trace.
pub fn mutual_info_sequential(pivots: &[f64], sigma: f64) -> f64 {
    let sigma2 = sigma * sigma;
    0.5 * pivots.iter().map(|p| (p / sigma2).ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    /// Latent draw from `N(μ, Σ − σ²I)`.
    pub f: DVector<f64>,
    /// Observed scores, `f` plus `N(0, σ²I)` noise.
    pub j: DVector<f64>,
}

/// Two-stage generative model whose marginal over `J` is `N(μ, Σ)`.
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    mean: DVector<f64>,
    latent_root: DMatrix<f64>,
    sigma: f64,
}

impl AugmentedModel {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, sigma: f64) -> Result<Self> {
        let m = mean.len();
        if cov.nrows() != m {
            return Err(Error::Shape(format!(
                "mean has {m} entries, covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let latent = cov - DMatrix::identity(m, m) * (sigma * sigma);
        let min_eig = linalg::min_eigenvalue(&latent);
        if min_eig < -1e-9 * linalg::max_diagonal(cov).max(1.0) {
            return Err(Error::InvalidParam(format!(
                "covariance minus sigma^2 I has eigenvalue {min_eig:e}"
            )));
        }
        Ok(AugmentedModel {
            mean: mean.clone(),
            latent_root: linalg::psd_sqrt(&latent),
            sigma,
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> AugmentedSample {
        let m = self.mean.len();
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = &self.mean + &self.latent_root * z;
        let noise = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * self.sigma);
        let j = &f + noise;
        AugmentedSample { f, j }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub delta: f64,
    pub sigma: f64,
    pub c: f64,
    pub k: usize,
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub mean_regret: f64,
    pub mean_bound: f64,
    pub rho_mode: RhoMode,
}

impl ValidationReport {
    /// `δ + 3 sqrt(δ(1−δ)/trials)`.
    pub fn tolerance(&self) -> f64 {
        self.delta + 3.0 * (self.delta * (1.0 - self.delta) / self.trials as f64).sqrt()
    }
}

/// Samples scores from the augmented model, runs BOX with `ζ = sqrt(2 log(1/δ))`
/// on each sample and counts how often the regret exceeds the bound.
pub fn monte_carlo_validate(
    prior: &GaussianBelief,
    params: &RegretParams,
    trials: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParam(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let cov = prior.covariance();
    params.check(cov)?;
    let m = prior.dim();
    let rho_mode = if m <= EXACT_RHO_MAX_M {
        RhoMode::Exact
    } else {
        RhoMode::Greedy
    };
    let rho = rho_k(cov, params.sigma, params.k, rho_mode)?;
    let bound = regret_bound(params, rho)?;
    let model = AugmentedModel::new(prior.mean(), cov, params.sigma)?;
    let oracle = TableOracle {
        sentinel: f64::NEG_INFINITY,
    };
    let zeta = params.zeta();

    let regrets: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, t);
            let sample = model.sample(&mut rng_from(derive_seed(trial_seed, 0)));
            let scores = sample.j.as_slice();
            let trace = run_box(
                scores,
                &oracle,
                prior,
                params.k,
                zeta,
                derive_seed(trial_seed, 1),
            )?;
            regret(scores, &trace)
        })
        .collect::<Result<_>>()?;

    let violations = regrets.iter().filter(|&&r| r > bound).count();
    Ok(ValidationReport {
        delta: params.delta,
        sigma: params.sigma,
        c: params.c_bound,
        k: params.k,
        trials,
        violations,
        violation_rate: violations as f64 / trials as f64,
        mean_regret: regrets.iter().sum::<f64>() / trials as f64,
        mean_bound: bound,
        rho_mode,
    })
}

/// Fraction of `samples` draws of `N(μ, σ²)` with `|x − μ| ≤ ζ₀σ`,
/// `ζ₀ = sqrt(2 log(1/δ₀))`. Should be at least `1 − δ₀`.
pub fn gaussian_tail_frequency(mu: f64, sigma: f64, delta0: f64, samples: usize, seed: u64) -> f64 {
    let zeta0 = zeta_for_delta(delta0);
    let mut rng = rng_from(seed);
    let inside = (0..samples)
        .filter(|_| {
            let x = mu + sigma * rng.sample::<f64, _>(StandardNormal);
            (x - mu).abs() <= zeta0 * sigma
        })
        .count();
    inside as f64 / samples as f64
}

/// `x ≤ c log(1 + a x / c) / log(1 + a)` for `0 ≤ x ≤ c`, `a > 0`, up to
/// rounding at the endpoints.
pub fn bernoulli_corollary_check(x: f64, a: f64, c: f64) -> Result<bool> {
    if !(a > 0.0 && c > 0.0 && (0.0..=c).contains(&x)) {
        return Err(Error::InvalidParam(format!(
            "need 0 <= x <= c and a > 0, got x={x}, a={a}, c={c}"
        )));
    }
    let rhs = c * (a * x / c).ln_1p() / a.ln_1p();
    Ok(x <= rhs + 1e-12 * c)
}

/// `ΘΘᵀ + σ²I` with `Θ` an m×d matrix of standard normals.
pub fn low_rank_covariance(m: usize, d: usize, sigma: f64, rng: &mut Rng) -> DMatrix<f64> {
    let theta = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    &theta * theta.transpose() + DMatrix::identity(m, m) * (sigma * sigma)
}
