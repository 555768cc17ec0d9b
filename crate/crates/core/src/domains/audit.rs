//! Empirical correlation structure of a score matrix.

use serde::Serialize;

use crate::experience::ExperienceBundle;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationAudit {
    /// Mean |corr| over all off-diagonal pairs with nonzero variance.
    pub mean_abs_correlation: f64,
    /// Mean |corr| over direction pairs pointing to the same side
    /// (positive dot product of the first two constraint parameters).
    pub same_side: Option<f64>,
    /// Mean |corr| over direction pairs pointing to opposite sides.
    pub opposite_side: Option<f64>,
    pub pairs: usize,
}

/// Pearson correlation matrix of the score columns; `None` entries mark
/// columns with zero variance.
pub fn correlation_matrix(bundle: &ExperienceBundle) -> Vec<Vec<Option<f64>>> {
    let d = bundle.scores().values();
    let (n, m) = (d.nrows(), d.ncols());
    let means: Vec<f64> = (0..m).map(|j| d.column(j).mean()).collect();
    let mut cov = nalgebra::DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let s: f64 = (0..n)
                .map(|i| (d[(i, a)] - means[a]) * (d[(i, b)] - means[b]))
                .sum();
            cov[(a, b)] = s / (n - 1) as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    let v = cov[(a, a)] * cov[(b, b)];
                    (v > 0.0).then(|| cov[(a, b)] / v.sqrt())
                })
                .collect()
        })
        .collect()
}

/// Summarizes column correlations. Side grouping applies when the
/// constraints carry a direction in their first two parameters, as in the
/// grid domain.
pub fn correlation_audit(bundle: &ExperienceBundle) -> CorrelationAudit {
    let corr = correlation_matrix(bundle);
    let m = bundle.m();
    let directional = bundle.meta.domain == "grid" && bundle.constraints().dim() >= 2;
    let (mut all, mut same, mut opposite) = (Vec::new(), Vec::new(), Vec::new());
    for a in 0..m {
        for b in a + 1..m {
            let Some(c) = corr[a][b] else { continue };
            all.push(c.abs());
            if directional {
                let (pa, pb) = (
                    bundle.constraints().params(a),
                    bundle.constraints().params(b),
                );
                let dot = pa[0] * pb[0] + pa[1] * pb[1];
                if dot > 0.0 {
                    same.push(c.abs());
                } else if dot < 0.0 {
                    opposite.push(c.abs());
                }
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    CorrelationAudit {
        mean_abs_correlation: mean(&all).unwrap_or(0.0),
        same_side: if directional { mean(&same) } else { None },
        opposite_side: if directional { mean(&opposite) } else { None },
        pairs: all.len(),
    }
}
