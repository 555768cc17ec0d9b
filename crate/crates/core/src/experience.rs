//! Training experience: constraint extraction, the score matrix with its
//! infeasibility sentinel, leave-one-out splits and on-disk bundles.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::score_matrix::ScoreMatrix;

/// Ordered constraints, each an id plus a parameter vector in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    ids: Vec<String>,
    params: Vec<Vec<f64>>,
    dim: usize,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = constraints.first().map_or(0, |c| c.1.len());
        let mut seen = HashSet::new();
        for (i, (id, p)) in constraints.iter().enumerate() {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id.clone()));
            }
            if p.len() != dim {
                return Err(Error::Shape(format!(
                    "constraint `{id}` has {} parameters, expected {dim}",
                    p.len()
                )));
            }
            if let Some(j) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: p[j],
                });
            }
        }
        let (ids, params) = constraints.into_iter().unzip();
        Ok(ConstraintSet { ids, params, dim })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn params(&self, index: usize) -> &[f64] {
        &self.params[index]
    }

    pub fn select(&self, indices: &[usize]) -> ConstraintSet {
        ConstraintSet {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            params: indices.iter().map(|&i| self.params[i].clone()).collect(),
            dim: self.dim,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|k| format!("p{k}")));
        w.write_record(&header)?;
        for (id, p) in self.ids.iter().zip(&self.params) {
            let mut rec = vec![id.clone()];
            rec.extend(p.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let id = rec
                .get(0)
                .ok_or_else(|| Error::Parse("empty constraint row".into()))?
                .to_string();
            let p = rec
                .iter()
                .skip(1)
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad parameter `{c}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            out.push((id, p));
        }
        Self::new(out)
    }
}

/// Score of a plan: minus the Euclidean length of its waypoint path when
/// feasible, `sentinel` otherwise.
pub fn score_plan(waypoints: &[[f64; 2]], feasible: bool, sentinel: f64) -> f64 {
    if !feasible {
        return sentinel;
    }
    -waypoints
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum::<f64>()
}

/// Failure score `min − |mean|` over the feasible entries. For positive
/// means this is `min − mean`; taking the magnitude keeps it strictly below
/// every feasible score when scores are negative path lengths. A zero mean
/// drops one unit below the minimum.
pub fn sentinel_from_feasible<'a>(feasible_scores: impl Iterator<Item = &'a f64>) -> Result<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for &v in feasible_scores {
        n += 1;
        sum += v;
        min = min.min(v);
    }
    if n == 0 {
        return Err(Error::NothingFeasible);
    }
    let mean = sum / n as f64;
    Ok(if mean != 0.0 {
        min - mean.abs()
    } else {
        min - 1.0
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub domain: String,
    pub seed: u64,
    /// Domain configuration used for generation, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// Score matrix, constraint set and infeasibility sentinel of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceBundle {
    scores: ScoreMatrix,
    constraints: ConstraintSet,
    sentinel: f64,
    feasibility: Vec<Vec<bool>>,
    pub meta: BundleMeta,
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    sentinel: f64,
    d: usize,
    n: usize,
    m: usize,
    domain: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

/// Row removed by a leave-one-out split, with its scores as they were in the
/// full bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    pub index: usize,
    pub instance_id: String,
    pub scores: Vec<f64>,
    pub feasible: Vec<bool>,
}

impl ExperienceBundle {
    /// Builds a bundle from a feasibility pattern and the scores of feasible
    /// entries; infeasible cells are overwritten with the sentinel computed
    /// from the feasible ones.
    pub fn from_feasibility(
        scores: &ScoreMatrix,
        feasibility: Vec<Vec<bool>>,
        constraints: ConstraintSet,
        meta: BundleMeta,
    ) -> Result<Self> {
        let (n, m) = (scores.n_instances(), scores.n_constraints());
        if feasibility.len() != n || feasibility.iter().any(|r| r.len() != m) {
            return Err(Error::Shape(
                "feasibility does not match the score matrix".into(),
            ));
        }
        if constraints.len() != m {
            return Err(Error::Shape(format!(
                "{} constraints for {m} columns",
                constraints.len()
            )));
        }
        let feasible_scores: Vec<f64> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| feasibility[i][j])
            .map(|(i, j)| scores.get(i, j))
            .collect();
        let sentinel = sentinel_from_feasible(feasible_scores.iter())?;
        let scores = scores.map_values(|i, j, v| if feasibility[i][j] { v } else { sentinel });
        Ok(ExperienceBundle {
            scores,
            constraints,
            sentinel,
            feasibility,
            meta,
        })
    }

    /// Treats entries strictly above `sentinel` as feasible.
    pub fn from_scores(
        scores: ScoreMatrix,
        sentinel: f64,
        constraints: ConstraintSet,
        meta: BundleMeta,
    ) -> Result<Self> {
        let feasibility = (0..scores.n_instances())
            .map(|i| {
                (0..scores.n_constraints())
                    .map(|j| scores.get(i, j) > sentinel)
                    .collect()
            })
            .collect();
        Self::from_feasibility(&scores, feasibility, constraints, meta)
    }

    pub fn scores(&self) -> &ScoreMatrix {
        &self.scores
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    pub fn feasibility(&self) -> &[Vec<bool>] {
        &self.feasibility
    }

    pub fn n(&self) -> usize {
        self.scores.n_instances()
    }

    pub fn m(&self) -> usize {
        self.scores.n_constraints()
    }

    /// Fraction of instances each constraint is feasible for.
    pub fn feasibility_rates(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.m())
            .map(|j| self.feasibility.iter().filter(|r| r[j]).count() as f64 / n)
            .collect()
    }

    /// Checks the sentinel and feasibility invariants against a fresh
    /// recomputation.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.feasibility.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                let v = self.scores.get(i, j);
                if f != (v > self.sentinel) {
                    return Err(Error::InvalidParam(format!(
                        "entry ({i},{j}) = {v} disagrees with sentinel {}",
                        self.sentinel
                    )));
                }
            }
        }
        let recomputed = sentinel_from_feasible(
            self.feasibility
                .iter()
                .enumerate()
                .flat_map(|(i, r)| {
                    r.iter()
                        .enumerate()
                        .filter(|x| *x.1)
                        .map(move |(j, _)| (i, j))
                })
                .map(|(i, j)| &self.scores.values()[(i, j)]),
        )?;
        if (recomputed - self.sentinel).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "stored sentinel {} but recomputed {recomputed}",
                self.sentinel
            )));
        }
        Ok(())
    }

    /// Removes row `index`; the training part gets its own sentinel.
    pub fn loocv_split(&self, index: usize) -> Result<(ExperienceBundle, HeldOut)> {
        let n = self.n();
        if n < 3 {
            return Err(Error::TooFewInstances {
                rows: n,
                cols: self.m(),
            });
        }
        if index >= n {
            return Err(Error::OutOfRange { index, len: n });
        }
        let keep: Vec<usize> = (0..n).filter(|&i| i != index).collect();
        let train = self.select_rows(&keep)?;
        let held = HeldOut {
            index,
            instance_id: self.scores.instance_ids()[index].clone(),
            scores: self.scores.row(index),
            feasible: self.feasibility[index].clone(),
        };
        Ok((train, held))
    }

    /// Puts a held-out row back at its original position.
    pub fn reinsert(&self, held: &HeldOut) -> Result<ExperienceBundle> {
        let n = self.n() + 1;
        if held.index >= n || held.scores.len() != self.m() {
            return Err(Error::Shape("held-out row does not fit".into()));
        }
        let mut rows = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        let mut feas = Vec::with_capacity(n);
        let mut src = 0;
        for i in 0..n {
            if i == held.index {
                rows.push(held.scores.clone());
                ids.push(held.instance_id.clone());
                feas.push(held.feasible.clone());
            } else {
                rows.push(self.scores.row(src));
                ids.push(self.scores.instance_ids()[src].clone());
                feas.push(self.feasibility[src].clone());
                src += 1;
            }
        }
        let values = nalgebra::DMatrix::from_fn(n, self.m(), |i, j| rows[i][j]);
        let scores = ScoreMatrix::new(values, ids, self.scores.constraint_ids().to_vec())?;
        Self::from_feasibility(&scores, feas, self.constraints.clone(), self.meta.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<ExperienceBundle> {
        let scores = self.scores.select_rows(rows)?;
        let feas = rows.iter().map(|&r| self.feasibility[r].clone()).collect();
        Self::from_feasibility(&scores, feas, self.constraints.clone(), self.meta.clone())
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<ExperienceBundle> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.m()) {
            return Err(Error::OutOfRange {
                index: bad,
                len: self.m(),
            });
        }
        let scores = self.scores.select_columns(cols)?;
        let feas = self
            .feasibility
            .iter()
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect();
        Self::from_feasibility(
            &scores,
            feas,
            self.constraints.select(cols),
            self.meta.clone(),
        )
    }

    /// Keeps `target` uniformly chosen columns (in their original order).
    pub fn subsample_constraints(&self, target: usize, seed: u64) -> Result<ExperienceBundle> {
        let m = self.m();
        if target > m || target == 0 {
            return Err(Error::InvalidParam(format!(
                "cannot keep {target} of {m} constraints"
            )));
        }
        if target == m {
            return Ok(self.clone());
        }
        let mut rng = rng_from(seed);
        let mut cols = rand::seq::index::sample(&mut rng, m, target).into_vec();
        cols.sort_unstable();
        self.select_columns(&cols)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut buf = Vec::new();
        self.scores.write_csv(&mut buf)?;
        write_file(&dir.join("scores.csv"), &buf)?;
        buf.clear();
        self.constraints.write_csv(&mut buf)?;
        write_file(&dir.join("constraints.csv"), &buf)?;
        let meta = MetaFile {
            sentinel: self.sentinel,
            d: self.constraints.dim(),
            n: self.n(),
            m: self.m(),
            domain: self.meta.domain.clone(),
            seed: self.meta.seed,
            config: self.meta.config.clone(),
        };
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        write_file(&dir.join("meta.json"), text.as_bytes())
    }

    pub fn read_dir(dir: &Path) -> Result<ExperienceBundle> {
        let scores = ScoreMatrix::read_csv(read_file(&dir.join("scores.csv"))?.as_slice())?;
        let constraints =
            ConstraintSet::read_csv(read_file(&dir.join("constraints.csv"))?.as_slice())?;
        let meta: MetaFile = serde_json::from_slice(&read_file(&dir.join("meta.json"))?)?;
        if meta.n != scores.n_instances()
            || meta.m != scores.n_constraints()
            || meta.d != constraints.dim()
        {
            return Err(Error::Shape(
                "meta.json disagrees with the csv files".into(),
            ));
        }
        let bundle = Self::from_scores(
            scores,
            meta.sentinel,
            constraints,
            BundleMeta {
                domain: meta.domain,
                seed: meta.seed,
                config: meta.config,
            },
        )?;
        if bundle.sentinel.to_bits() != meta.sentinel.to_bits() {
            return Err(Error::InvalidParam(format!(
                "stored sentinel {} does not match recomputed {}",
                meta.sentinel, bundle.sentinel
            )));
        }
        Ok(bundle)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Training data for a domain: sampled instances plus the bundle built from
/// constraints extracted out of their unconstrained solutions.
#[derive(Debug, Clone)]
pub struct TrainingData<I> {
    pub bundle: ExperienceBundle,
    pub instances: Vec<I>,
}

/// The `n` instances [`generate_training_data`] draws for `seed`, in row order.
pub fn sample_instances<D: Domain>(domain: &D, n: usize, seed: u64) -> Vec<D::Instance> {
    let instance_seeds = derive_seed(seed, 0);
    (0..n as u64)
        .into_par_iter()
        .map(|i| domain.sample_instance(derive_seed(instance_seeds, i)))
        .collect()
}

/// Samples `n` instances, extracts constraints from unconstrained solutions
/// (deduplicated by exact parameter equality), then scores every
/// (instance, constraint) pair.
///
/// Instances whose unconstrained planner never succeeds are kept; they just
/// contribute no constraint.
pub fn generate_training_data<D: Domain>(
    domain: &D,
    n: usize,
    solutions_per_instance: usize,
    seed: u64,
) -> Result<TrainingData<D::Instance>> {
    if n < 2 {
        return Err(Error::TooFewInstances { rows: n, cols: 0 });
    }
    if solutions_per_instance == 0 {
        return Err(Error::InvalidParam(
            "solutions_per_instance must be positive".into(),
        ));
    }
    let solve_seeds = derive_seed(seed, 1);
    let instances = sample_instances(domain, n, seed);

    let budget = domain.raw_budget();
    let extracted: Vec<Vec<Vec<f64>>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let inst_seed = derive_seed(solve_seeds, i as u64);
            let mut found = Vec::new();
            for s in 0..solutions_per_instance {
                for attempt in 0..budget {
                    let (plan, c) = domain
                        .plan_raw(inst, derive_seed(inst_seed, (s * budget + attempt) as u64));
                    if plan.feasible {
                        if let Some(c) = c {
                            found.push(c);
                        }
                        break;
                    }
                }
            }
            found
        })
        .collect();

    let mut params: Vec<Vec<f64>> = Vec::new();
    for c in extracted.into_iter().flatten() {
        if !params.contains(&c) {
            params.push(c);
        }
    }
    if params.is_empty() {
        return Err(Error::NothingFeasible);
    }
    let constraints = ConstraintSet::new(
        params
            .iter()
            .enumerate()
            .map(|(j, p)| (domain.constraint_id(j, p), p.clone()))
            .collect(),
    )?;

    let m = constraints.len();
    let cells: Vec<(bool, f64)> = (0..n * m)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / m, cell % m);
            let plan = domain.plan(&instances[i], constraints.params(j));
            (
                plan.feasible,
                score_plan(&plan.waypoints, plan.feasible, 0.0),
            )
        })
        .collect();
    let feasibility: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..m).map(|j| cells[i * m + j].0).collect())
        .collect();
    let values = nalgebra::DMatrix::from_fn(n, m, |i, j| cells[i * m + j].1);
    let scores = ScoreMatrix::new(
        values,
        (0..n).map(|i| format!("w{i:04}")).collect(),
        constraints.ids().to_vec(),
    )?;
    let bundle = ExperienceBundle::from_feasibility(
        &scores,
        feasibility,
        constraints,
        BundleMeta {
            domain: domain.name().to_string(),
            seed,
            config: None,
        },
    )?;
    Ok(TrainingData { bundle, instances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> BundleMeta {
        BundleMeta {
            domain: "test".into(),
            seed: 0,
            config: None,
        }
    }

    fn small_bundle(rows: &[Vec<Option<f64>>]) -> ExperienceBundle {
        let n = rows.len();
        let m = rows[0].len();
        let s = ScoreMatrix::from_rows(
            &rows
                .iter()
                .map(|r| r.iter().map(|v| v.unwrap_or(0.0)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let feas = rows
            .iter()
            .map(|r| r.iter().map(Option::is_some).collect())
            .collect();
        let cs = ConstraintSet::new((0..m).map(|j| (format!("c{j}"), vec![j as f64])).collect())
            .unwrap();
        let b = ExperienceBundle::from_feasibility(&s, feas, cs, meta()).unwrap();
        assert_eq!(b.n(), n);
        b
    }

    #[test]
    fn score_plan_cases() {
        assert_eq!(score_plan(&[[1.0, 2.0]], true, -9.0), 0.0);
        assert_eq!(score_plan(&[[0.0, 0.0], [3.0, 4.0]], true, -9.0), -5.0);
        assert_eq!(score_plan(&[[0.0, 0.0], [3.0, 4.0]], false, -9.0), -9.0);
    }

    #[test]
    fn sentinel_by_hand() {
        // min −4, mean −2: −4 − 2
        assert_eq!(
            sentinel_from_feasible([0.0, -2.0, -4.0].iter()).unwrap(),
            -6.0
        );
        // positive mean: min − mean
        assert_eq!(
            sentinel_from_feasible([1.0, 2.0, 6.0].iter()).unwrap(),
            -2.0
        );
        assert_eq!(sentinel_from_feasible([3.0, 3.0].iter()).unwrap(), 0.0);
        assert_eq!(sentinel_from_feasible([0.0, 0.0].iter()).unwrap(), -1.0);
        assert!(sentinel_from_feasible([].iter()).is_err());
    }

    #[test]
    fn bundle_rewrites_infeasible_cells() {
        let b = small_bundle(&[vec![Some(0.0), None], vec![Some(-4.0), Some(-2.0)]]);
        assert_eq!(b.sentinel(), -6.0);
        assert_eq!(b.scores().get(0, 1), -6.0);
        b.validate().unwrap();
    }

    #[test]
    fn loocv_split_rows_and_sentinel() {
        let b = small_bundle(&[
            vec![Some(-1.0), None],
            vec![Some(-9.0), Some(-3.0)],
            vec![None, Some(-2.0)],
        ]);
        let (train, held) = b.loocv_split(1).unwrap();
        assert_eq!(
            train.scores().instance_ids(),
            &["i0".to_string(), "i2".to_string()]
        );
        assert_eq!(held.index, 1);
        // the held-out row had the global minimum, so the sentinel moves
        assert_ne!(train.sentinel(), b.sentinel());
        train.validate().unwrap();
        assert_eq!(train.constraints(), b.constraints());
        assert!(b.loocv_split(3).is_err());
        let tiny = small_bundle(&[vec![Some(1.0)], vec![Some(2.0)]]);
        assert!(tiny.loocv_split(0).is_err());
    }

    #[test]
    fn subsample_contract() {
        let b = small_bundle(&[
            vec![Some(-1.0), None, Some(-2.0), Some(-0.5)],
            vec![Some(-3.0), Some(-2.0), None, Some(-1.5)],
        ]);
        assert_eq!(b.subsample_constraints(4, 1).unwrap(), b);
        let one = b.subsample_constraints(1, 5).unwrap();
        assert_eq!(one.m(), 1);
        one.validate().unwrap();
        assert_eq!(
            b.subsample_constraints(2, 9).unwrap(),
            b.subsample_constraints(2, 9).unwrap()
        );
        assert!(b.subsample_constraints(5, 0).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let b = small_bundle(&[
            vec![Some(-0.1), None, Some(-2.0 / 3.0)],
            vec![Some(-3.3), Some(-1e-7), None],
            vec![None, Some(-12.25), Some(-0.3)],
        ]);
        let dir = tempfile::tempdir().unwrap();
        b.write_dir(dir.path()).unwrap();
        let back = ExperienceBundle::read_dir(dir.path()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.sentinel().to_bits(), b.sentinel().to_bits());
    }

    #[test]
    fn constraint_set_rejects_bad_input() {
        assert!(
            ConstraintSet::new(vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]).is_err()
        );
        assert!(
            ConstraintSet::new(vec![("a".into(), vec![1.0]), ("b".into(), vec![2.0, 1.0])])
                .is_err()
        );
        assert!(ConstraintSet::new(vec![("a".into(), vec![f64::NAN])]).is_err());
    }

    proptest! {
        #[test]
        fn loocv_reinsert_round_trip(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = rng_from(seed);
            let rows: Vec<Vec<Option<f64>>> = (0..5)
                .map(|_| (0..3).map(|_| rng.random_bool(0.6).then(|| -rng.random_range(0.0..10.0))).collect())
                .collect();
            prop_assume!(rows.iter().flatten().filter(|v| v.is_some()).count() >= 5);
            let b = small_bundle(&rows);
            for i in 0..b.n() {
                if let Ok((train, held)) = b.loocv_split(i) {
                    let back = train.reinsert(&held).unwrap();
                    prop_assert_eq!(&back, &b);
                }
            }
        }

        #[test]
        fn feasible_iff_above_sentinel(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = rng_from(seed);
            let rows: Vec<Vec<Option<f64>>> = (0..4)
                .map(|_| (0..4).map(|_| rng.random_bool(0.5).then(|| rng.random_range(-10.0..10.0))).collect())
                .collect();
            prop_assume!(rows.iter().flatten().any(|v| v.is_some()));
            let b = small_bundle(&rows);
            prop_assert!(b.validate().is_ok());
        }
    }
}
