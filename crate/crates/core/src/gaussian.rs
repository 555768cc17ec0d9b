//! Gaussian belief over constraint scores: prior estimation from a score
//! matrix, rank-one sequential conditioning and UCB.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::score_matrix::ScoreMatrix;

/// Relative pivot floor used when deciding whether a covariance factorizes.
pub const DEFAULT_PSD_TOLERANCE: f64 = 1e-13;

/// Symmetry tolerance accepted on input covariances.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

const LADDER_START: f64 = 1e-10;
const LADDER_STEP: f64 = 10.0;
const LADDER_LIMIT: f64 = 1e-2;

/// Adds the smallest rung of the diagonal jitter ladder that lets the matrix
/// factorize with every Cholesky pivot above `tolerance × max diagonal`.
///
/// The ladder starts at `1e-10 · trace / m` and grows ×10 per rung; it fails
/// once the jitter would exceed `1e-2 · max diagonal`. A zero matrix uses unit
/// scale for both ends of the ladder.
pub fn regularize(covariance: &DMatrix<f64>, tolerance: f64) -> Result<(DMatrix<f64>, f64)> {
    let m = covariance.nrows();
    if covariance.ncols() != m {
        return Err(Error::Shape(format!(
            "covariance is {}x{}",
            m,
            covariance.ncols()
        )));
    }
    if let Some((i, j)) = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .find(|&(i, j)| !covariance[(i, j)].is_finite())
    {
        return Err(Error::NonFinite {
            row: i,
            col: j,
            value: covariance[(i, j)],
        });
    }
    let max_diag = linalg::max_diagonal(covariance);
    let scale = if max_diag > 0.0 { max_diag } else { 1.0 };
    let asym = linalg::max_asymmetry(covariance);
    if asym > SYMMETRY_TOLERANCE * scale.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut sym = covariance.clone();
    linalg::symmetrize(&mut sym);
    if m == 0 {
        return Ok((sym, 0.0));
    }

    let min_pivot = tolerance * scale;
    if linalg::cholesky_lower(&sym, min_pivot).is_some() {
        return Ok((sym, 0.0));
    }

    let trace = sym.trace();
    let mut jitter = if trace > 0.0 {
        LADDER_START * trace / m as f64
    } else {
        LADDER_START * scale
    };
    let limit = LADDER_LIMIT * scale;
    while jitter <= limit {
        let mut candidate = sym.clone();
        for i in 0..m {
            candidate[(i, i)] += jitter;
        }
        if linalg::cholesky_lower(&candidate, min_pivot).is_some() {
            return Ok((candidate, jitter));
        }
        jitter *= LADDER_STEP;
    }
    Err(Error::Regularization { limit })
}

/// Posterior over the scores of one problem instance.
///
/// Values are immutable: [`GaussianBelief::condition`] returns a new belief.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    evaluated: Vec<(usize, f64)>,
    is_evaluated: Vec<bool>,
    /// Variance of each conditioned index just before it was conditioned on.
    pivots: Vec<f64>,
    jitter: f64,
}

impl GaussianBelief {
    /// Prior from an explicit mean and covariance. The covariance is
    /// regularized with the jitter ladder.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if mean.len() != covariance.nrows() {
            return Err(Error::Shape(format!(
                "mean has {} entries, covariance is {}x{}",
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if let Some(i) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i,
                col: 0,
                value: mean[i],
            });
        }
        let (covariance, jitter) = regularize(&covariance, DEFAULT_PSD_TOLERANCE)?;
        let m = mean.len();
        Ok(GaussianBelief {
            mean,
            covariance,
            evaluated: Vec::new(),
            is_evaluated: vec![false; m],
            pivots: Vec::new(),
            jitter,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn evaluated(&self) -> &[(usize, f64)] {
        &self.evaluated
    }

    pub fn is_evaluated(&self, index: usize) -> bool {
        self.is_evaluated.get(index).copied().unwrap_or(false)
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn variance(&self, index: usize) -> f64 {
        self.covariance[(index, index)]
    }

    pub fn untried(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&i| !self.is_evaluated[i])
    }

    /// Conditions on `observed` at `index`, given everything already observed.
    pub fn condition(&self, index: usize, observed: f64) -> Result<GaussianBelief> {
        let m = self.dim();
        if index >= m {
            return Err(Error::OutOfRange { index, len: m });
        }
        if self.is_evaluated[index] {
            return Err(Error::AlreadyEvaluated(index));
        }
        if !observed.is_finite() {
            return Err(Error::NonFinite {
                row: index,
                col: 0,
                value: observed,
            });
        }
        let pivot = self.covariance[(index, index)];
        if !(pivot > 0.5 * self.jitter) || pivot <= 0.0 {
            return Err(Error::DegeneratePivot {
                index,
                pivot,
                jitter: self.jitter,
            });
        }

        let column: DVector<f64> = self.covariance.column(index).into_owned();
        let residual = observed - self.mean[index];
        let mut mean = &self.mean + &column * (residual / pivot);
        let mut covariance = &self.covariance - &column * column.transpose() / pivot;

        mean[index] = observed;
        covariance.row_mut(index).fill(0.0);
        covariance.column_mut(index).fill(0.0);
        linalg::symmetrize(&mut covariance);

        let mut evaluated = self.evaluated.clone();
        evaluated.push((index, observed));
        let mut is_evaluated = self.is_evaluated.clone();
        is_evaluated[index] = true;
        let mut pivots = self.pivots.clone();
        pivots.push(pivot);

        Ok(GaussianBelief {
            mean,
            covariance,
            evaluated,
            is_evaluated,
            pivots,
            jitter: self.jitter,
        })
    }

    /// `mean[i] + zeta · sqrt(max(var[i], 0))` for every untried `i`, in index order.
    pub fn ucb(&self, zeta: f64) -> Vec<(usize, f64)> {
        self.untried()
            .map(|i| {
                (
                    i,
                    self.mean[i] + zeta * self.covariance[(i, i)].max(0.0).sqrt(),
                )
            })
            .collect()
    }

    /// Marginal prior over a subset of constraints, re-indexed `0..indices.len()`.
    pub fn marginal(&self, indices: &[usize]) -> Result<GaussianBelief> {
        if !self.evaluated.is_empty() {
            return Err(Error::InvalidParam(
                "marginal of a conditioned belief".into(),
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::OutOfRange {
                index: bad,
                len: self.dim(),
            });
        }
        Ok(GaussianBelief {
            mean: linalg::subvector(&self.mean, indices),
            covariance: linalg::principal(&self.covariance, indices),
            evaluated: Vec::new(),
            is_evaluated: vec![false; indices.len()],
            pivots: Vec::new(),
            jitter: self.jitter,
        })
    }

    /// Simulated cost of one conditioning step: the update touches every
    /// entry of the m×m covariance.
    pub fn update_cost(&self) -> f64 {
        (self.dim() * self.dim()) as f64
    }
}

/// Column means and unbiased sample covariance (divisor n−1) of the score
/// matrix, regularized so that it factorizes.
pub fn estimate_prior(scores: &ScoreMatrix) -> Result<GaussianBelief> {
    let d = scores.values();
    let n = d.nrows();
    if n < 2 {
        return Err(Error::TooFewInstances {
            rows: n,
            cols: d.ncols(),
        });
    }
    let mean: DVector<f64> = d.row_mean().transpose();
    let mut centered = d.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let covariance = centered.transpose() * &centered / (n as f64 - 1.0);
    GaussianBelief::new(mean, covariance)
}
