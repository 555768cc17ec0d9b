//! Experiment harness behind the `scorebox` binary: configuration, data
//! generation, leave-one-out policy comparison, minimal-set comparison,
//! regret validation and the illustration scenario.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{
    correlation_audit, Domain, DomainOracle, GridDomain, GridParams, NavDomain, NavParams,
};
use crate::error::{Error, Result};
use crate::experience::{generate_training_data, sample_instances, ExperienceBundle};
use crate::gaussian::{estimate_prior, GaussianBelief};
use crate::golden::{golden_report, GoldenReport};
use crate::minset::{construct_oms, MinimalSet, OmsParams};
use crate::policy::{
    run_box, run_doo, run_rand, run_raw, run_static, DooParams, EpisodeTrace, PlanResult,
    PlannerOracle, TableOracle, DEFAULT_ZETA,
};
use crate::regret::{
    low_rank_covariance, monte_carlo_validate, RegretParams, ValidationReport, MIN_TRIALS,
};
use crate::rng::{derive_seed, rng_from};

const SUBSAMPLE_STREAM: u64 = 2;
const LOOCV_STREAM: u64 = 3;
const REGRET_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Box,
    Static,
    Rand,
    Doo,
    Raw,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Box,
        PolicyKind::Static,
        PolicyKind::Rand,
        PolicyKind::Doo,
        PolicyKind::Raw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Box => "box",
            PolicyKind::Static => "static",
            PolicyKind::Rand => "rand",
            PolicyKind::Doo => "doo",
            PolicyKind::Raw => "raw",
        }
    }

    /// BOX and STATIC read the Gaussian prior estimated from training rows.
    pub fn needs_prior(self) -> bool {
        matches!(self, PolicyKind::Box | PolicyKind::Static)
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown policy `{s}` (expected box, static, rand, doo or raw)"
                ))
            })
    }
}

/// Parses a comma-separated policy list such as `box,static,rand`.
pub fn parse_policies(list: &str) -> Result<Vec<PolicyKind>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(PolicyKind::from_str)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    #[default]
    Grid,
    Nav,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub n: usize,
    pub solutions_per_instance: usize,
    /// Keep this many constraints, chosen at random, after extraction.
    pub subsample: Option<usize>,
    pub grid: GridParams,
    pub nav: NavParams,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            kind: DomainKind::Grid,
            n: 50,
            solutions_per_instance: 1,
            subsample: None,
            grid: GridParams::default(),
            nav: NavParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoocvConfig {
    /// Hold out the first `folds` instances; all of them when unset.
    pub folds: Option<usize>,
    /// Evaluation budget; the number of constraints when unset.
    pub k: Option<usize>,
    pub policies: Vec<PolicyKind>,
    pub zeta: f64,
    /// RAND episodes averaged per fold.
    pub rand_repeats: usize,
    pub doo_lipschitz: f64,
}

impl Default for LoocvConfig {
    fn default() -> Self {
        LoocvConfig {
            folds: None,
            k: None,
            policies: PolicyKind::ALL.to_vec(),
            zeta: DEFAULT_ZETA,
            rand_repeats: 20,
            doo_lipschitz: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinsetConfig {
    pub lambda_tradeoff: f64,
}

impl Default for MinsetConfig {
    fn default() -> Self {
        MinsetConfig {
            lambda_tradeoff: OmsParams::default().lambda_tradeoff,
        }
    }
}

/// Prior `N(0, ΘΘᵀ + σ²I)` with `Θ` an m×d standard normal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticPrior {
    pub m: usize,
    pub d: usize,
    pub sigma: f64,
}

impl Default for SyntheticPrior {
    fn default() -> Self {
        SyntheticPrior {
            m: 12,
            d: 2,
            sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretConfig {
    pub delta: f64,
    pub trials: usize,
    pub k: usize,
    /// Validate on a synthetic prior instead of the bundle's.
    pub synthetic: Option<SyntheticPrior>,
}

impl Default for RegretConfig {
    fn default() -> Self {
        RegretConfig {
            delta: 0.05,
            trials: 2000,
            k: 6,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Existing bundle directory to use instead of generating data.
    pub bundle: Option<PathBuf>,
    pub domain: DomainConfig,
    pub loocv: LoocvConfig,
    pub minset: MinsetConfig,
    pub regret: RegretConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            out: PathBuf::from("out"),
            bundle: None,
            domain: DomainConfig::default(),
            loocv: LoocvConfig::default(),
            minset: MinsetConfig::default(),
            regret: RegretConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub policies: Option<Vec<PolicyKind>>,
    pub k: Option<usize>,
    pub zeta: Option<f64>,
    pub trials: Option<usize>,
}

impl BenchConfig {
    /// TOML or JSON, chosen by extension; other extensions try TOML, then JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_str(&text)?),
            Some("toml") => Ok(toml::from_str(&text)?),
            _ => toml::from_str(&text).or_else(|_| Ok(serde_json::from_str(&text)?)),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(p) = &o.policies {
            self.loocv.policies = p.clone();
        }
        if let Some(k) = o.k {
            self.loocv.k = Some(k);
            self.regret.k = k;
        }
        if let Some(z) = o.zeta {
            self.loocv.zeta = z;
        }
        if let Some(t) = o.trials {
            self.regret.trials = t;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        let d = &self.domain;
        if d.n < 2 {
            return bad(format!("domain.n must be at least 2, got {}", d.n));
        }
        if d.solutions_per_instance == 0 {
            return bad("domain.solutions_per_instance must be positive".into());
        }
        if d.subsample == Some(0) {
            return bad("domain.subsample must be positive".into());
        }
        let l = &self.loocv;
        if l.policies.is_empty() {
            return bad("loocv.policies is empty".into());
        }
        if l.folds == Some(0) || l.k == Some(0) {
            return bad("loocv.folds and loocv.k must be positive".into());
        }
        if !(l.zeta >= 0.0 && l.zeta.is_finite()) {
            return bad(format!(
                "loocv.zeta must be finite and nonnegative, got {}",
                l.zeta
            ));
        }
        if l.rand_repeats == 0 {
            return bad("loocv.rand_repeats must be positive".into());
        }
        if !(l.doo_lipschitz >= 0.0 && l.doo_lipschitz.is_finite()) {
            return bad(format!(
                "loocv.doo_lipschitz must be finite and nonnegative, got {}",
                l.doo_lipschitz
            ));
        }
        self.oms_params().validate()?;
        let r = &self.regret;
        if !(r.delta > 0.0 && r.delta < 1.0) {
            return bad(format!("regret.delta must lie in (0, 1), got {}", r.delta));
        }
        if r.trials < MIN_TRIALS {
            return bad(format!(
                "regret.trials must be at least {MIN_TRIALS}, got {}",
                r.trials
            ));
        }
        if r.k == 0 {
            return bad("regret.k must be positive".into());
        }
        if let Some(s) = &r.synthetic {
            if r.k > s.m || s.d == 0 || !(s.sigma > 0.0 && s.sigma.is_finite()) {
                return bad(format!(
                    "regret.synthetic needs m >= k, d >= 1 and sigma > 0, got {s:?} with k = {}",
                    r.k
                ));
            }
        }
        Ok(())
    }

    pub fn oms_params(&self) -> OmsParams {
        OmsParams {
            lambda_tradeoff: self.minset.lambda_tradeoff,
        }
    }
}

/// Half-width `1.96 · sd / sqrt(n)` of the normal 95% interval on a mean,
/// with the sample standard deviation. Zero for fewer than two values.
pub fn ci95(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = mean(values);
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and 95% half-width of the paired differences `b − a`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    (mean(&d), ci95(&d))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// A bundle plus, when they can be rebuilt, the instances of its rows.
pub struct Prepared<I> {
    pub bundle: ExperienceBundle,
    pub instances: Option<Vec<I>>,
}

/// Reads the domain configuration stored in a bundle written by [`cmd_gen`].
pub fn bundle_domain_config(bundle: &ExperienceBundle) -> Option<DomainConfig> {
    bundle
        .meta
        .config
        .as_ref()
        .and_then(|v| serde_json::from_value(v.clone()).ok())
}

fn prepare<D: Domain>(domain: &D, cfg: &BenchConfig) -> Result<Prepared<D::Instance>> {
    if let Some(dir) = &cfg.bundle {
        let bundle = ExperienceBundle::read_dir(dir)?;
        let instances = if bundle_domain_config(&bundle).is_some()
            && bundle.meta.domain == domain.name()
        {
            Some(sample_instances(domain, bundle.n(), bundle.meta.seed))
        } else {
            warn!("bundle {} carries no domain configuration; planner costs and the raw policy are unavailable", dir.display());
            None
        };
        return Ok(Prepared { bundle, instances });
    }
    let d = &cfg.domain;
    let data = generate_training_data(domain, d.n, d.solutions_per_instance, cfg.seed)?;
    let mut bundle = data.bundle;
    if let Some(target) = d.subsample {
        if target < bundle.m() {
            bundle =
                bundle.subsample_constraints(target, derive_seed(cfg.seed, SUBSAMPLE_STREAM))?;
        } else if target > bundle.m() {
            warn!(
                "asked to keep {target} constraints but only {} were extracted",
                bundle.m()
            );
        }
    }
    bundle.meta.config = Some(serde_json::to_value(d)?);
    Ok(Prepared {
        bundle,
        instances: Some(data.instances),
    })
}

/// Replaces the domain block with the one stored in `cfg.bundle`, if any.
pub fn resolve_bundle_domain(cfg: &mut BenchConfig) -> Result<()> {
    if let Some(dir) = &cfg.bundle {
        let bundle = ExperienceBundle::read_dir(dir)?;
        if let Some(d) = bundle_domain_config(&bundle) {
            cfg.domain = d;
        }
    }
    Ok(())
}

macro_rules! with_domain {
    ($cfg:expr, |$d:ident| $body:expr) => {
        match $cfg.domain.kind {
            DomainKind::Grid => {
                let $d = GridDomain::new($cfg.domain.grid.clone())?;
                $body
            }
            DomainKind::Nav => {
                let $d = NavDomain::new($cfg.domain.nav.clone())?;
                $body
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenReport {
    pub domain: String,
    pub n: usize,
    pub m: usize,
    pub sentinel: f64,
    pub mean_abs_correlation: f64,
    pub same_side_correlation: Option<f64>,
    pub opposite_side_correlation: Option<f64>,
    pub path: PathBuf,
}

/// Generates training data and writes the bundle to `<out>/bundle`.
pub fn cmd_gen(cfg: &BenchConfig) -> Result<GenReport> {
    cfg.validate()?;
    let bundle = with_domain!(cfg, |d| prepare(
        &d,
        &BenchConfig {
            bundle: None,
            ..cfg.clone()
        }
    )?
    .bundle);
    let path = cfg.out.join("bundle");
    bundle.write_dir(&path)?;
    let audit = correlation_audit(&bundle);
    Ok(GenReport {
        domain: bundle.meta.domain.clone(),
        n: bundle.n(),
        m: bundle.m(),
        sentinel: bundle.sentinel(),
        mean_abs_correlation: audit.mean_abs_correlation,
        same_side_correlation: audit.same_side,
        opposite_side_correlation: audit.opposite_side,
        path,
    })
}

/// Per-fold summary of one policy's episodes (averaged when RAND repeats).
#[derive(Debug, Clone, PartialEq)]
pub struct FoldStats {
    /// Evaluations up to and including the first feasible one; `k + 1` if none.
    pub evals_to_first: f64,
    /// Cumulative cost at the first feasible evaluation, or the whole
    /// episode's cost if none.
    pub cost_to_first: f64,
    pub solved: f64,
    /// Best score after each budget `1..=k`.
    pub curve: Vec<f64>,
    pub update_cost: f64,
}

fn fold_stats(traces: &[EpisodeTrace], k: usize) -> FoldStats {
    let r = traces.len() as f64;
    let mut s = FoldStats {
        evals_to_first: 0.0,
        cost_to_first: 0.0,
        solved: 0.0,
        curve: vec![0.0; k],
        update_cost: 0.0,
    };
    for t in traces {
        match t.first_feasible() {
            Some(c) => {
                s.evals_to_first += c.t as f64;
                s.cost_to_first += c.cum_cost;
                s.solved += 1.0;
            }
            None => {
                s.evals_to_first += (k + 1) as f64;
                s.cost_to_first += t.cumulative_cost;
            }
        }
        for (b, v) in s.curve.iter_mut().enumerate() {
            *v += t.best_within(b + 1).unwrap_or(f64::NAN);
        }
        s.update_cost += t.update_cost;
    }
    s.evals_to_first /= r;
    s.cost_to_first /= r;
    s.solved /= r;
    s.curve.iter_mut().for_each(|v| *v /= r);
    s.update_cost /= r;
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRuns {
    pub policy: PolicyKind,
    /// One entry per fold, in fold order.
    pub folds: Vec<FoldStats>,
}

impl PolicyRuns {
    pub fn evals_to_first(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.evals_to_first).collect()
    }

    pub fn cost_to_first(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.cost_to_first).collect()
    }

    pub fn success_rate(&self) -> f64 {
        mean(&self.folds.iter().map(|f| f.solved).collect::<Vec<_>>())
    }

    pub fn curve_at(&self, budget: usize) -> Vec<f64> {
        self.folds.iter().map(|f| f.curve[budget - 1]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvOutcome {
    pub domain: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub fold_indices: Vec<usize>,
    pub runs: Vec<PolicyRuns>,
    pub skipped: Vec<PolicyKind>,
    /// Best score over all constraints of each held-out row.
    pub optimal: Vec<f64>,
}

impl LoocvOutcome {
    pub fn policy(&self, p: PolicyKind) -> Option<&PolicyRuns> {
        self.runs.iter().find(|r| r.policy == p)
    }
}

/// Training part of a fold, the held-out row as the trained system sees it,
/// and the sentinel used to score infeasible plans.
struct Fold {
    index: usize,
    train: Option<ExperienceBundle>,
    prior: Option<GaussianBelief>,
    truth: Vec<f64>,
    sentinel: f64,
}

fn make_fold(bundle: &ExperienceBundle, index: usize) -> Result<Fold> {
    if bundle.n() < 3 {
        return Ok(Fold {
            index,
            train: None,
            prior: None,
            truth: bundle.scores().row(index),
            sentinel: bundle.sentinel(),
        });
    }
    let (train, held) = bundle.loocv_split(index)?;
    let sentinel = train.sentinel();
    let truth = held
        .scores
        .iter()
        .zip(&held.feasible)
        .map(|(&s, &f)| if f { s } else { sentinel })
        .collect();
    Ok(Fold {
        index,
        prior: Some(estimate_prior(train.scores())?),
        train: Some(train),
        truth,
        sentinel,
    })
}

fn run_policy<O: PlannerOracle + ?Sized>(
    policy: PolicyKind,
    instance: &O::Instance,
    oracle: &O,
    fold: &Fold,
    bundle: &ExperienceBundle,
    cfg: &LoocvConfig,
    k: usize,
    seed: u64,
) -> Result<Vec<EpisodeTrace>> {
    let m = bundle.m();
    let prior = || {
        fold.prior
            .as_ref()
            .ok_or_else(|| Error::InvalidParam("policy needs a prior".into()))
    };
    Ok(match policy {
        PolicyKind::Box => vec![run_box(instance, oracle, prior()?, k, cfg.zeta, seed)?],
        PolicyKind::Static => vec![run_static(instance, oracle, prior()?, k)?],
        PolicyKind::Rand => (0..cfg.rand_repeats as u64)
            .map(|r| run_rand(instance, oracle, m, k, derive_seed(seed, r)))
            .collect::<Result<_>>()?,
        PolicyKind::Doo => {
            let params = DooParams::euclidean(cfg.doo_lipschitz);
            vec![run_doo(
                instance,
                oracle,
                bundle.constraints(),
                &params,
                k,
                seed,
            )?]
        }
        PolicyKind::Raw => vec![run_raw(instance, oracle, k, seed)?],
    })
}

fn loocv_on<D: Domain>(
    domain: &D,
    cfg: &BenchConfig,
    prepared: &Prepared<D::Instance>,
) -> Result<LoocvOutcome> {
    let bundle = &prepared.bundle;
    let (n, m) = (bundle.n(), bundle.m());
    let k = cfg.loocv.k.unwrap_or(m);
    if k > m {
        return Err(Error::BudgetTooLarge { k, m });
    }
    let folds = cfg.loocv.folds.unwrap_or(n).min(n);
    let mut policies = Vec::new();
    let mut skipped = Vec::new();
    for &p in &cfg.loocv.policies {
        if policies.contains(&p) || skipped.contains(&p) {
            continue;
        }
        if p.needs_prior() && n < 3 {
            warn!(
                "skipping {p}: a prior needs at least 2 training instances, have {}",
                n - 1
            );
            skipped.push(p);
        } else if p == PolicyKind::Raw && prepared.instances.is_none() {
            warn!("skipping raw: instances are unavailable");
            skipped.push(p);
        } else {
            policies.push(p);
        }
    }

    let master = derive_seed(cfg.seed, LOOCV_STREAM);
    let per_fold: Vec<(f64, Vec<FoldStats>)> = (0..folds)
        .into_par_iter()
        .map(|i| {
            let fold = make_fold(bundle, i)?;
            let fold_seed = derive_seed(master, i as u64);
            let optimal = fold.truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let stats = policies
                .iter()
                .map(|&p| {
                    let seed = derive_seed(fold_seed, p.stream());
                    let traces = match &prepared.instances {
                        Some(instances) => {
                            let oracle = DomainOracle {
                                domain,
                                constraints: bundle.constraints(),
                                sentinel: fold.sentinel,
                            };
                            run_policy(
                                p,
                                &instances[fold.index],
                                &oracle,
                                &fold,
                                bundle,
                                &cfg.loocv,
                                k,
                                seed,
                            )?
                        }
                        None => {
                            let oracle = TableOracle {
                                sentinel: fold.sentinel,
                            };
                            run_policy(
                                p,
                                fold.truth.as_slice(),
                                &oracle,
                                &fold,
                                bundle,
                                &cfg.loocv,
                                k,
                                seed,
                            )?
                        }
                    };
                    Ok(fold_stats(&traces, k))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((optimal, stats))
        })
        .collect::<Result<_>>()?;

    let runs = policies
        .iter()
        .enumerate()
        .map(|(j, &policy)| PolicyRuns {
            policy,
            folds: per_fold.iter().map(|(_, s)| s[j].clone()).collect(),
        })
        .collect();
    Ok(LoocvOutcome {
        domain: bundle.meta.domain.clone(),
        n,
        m,
        k,
        fold_indices: (0..folds).collect(),
        runs,
        skipped,
        optimal: per_fold.iter().map(|(o, _)| *o).collect(),
    })
}

/// Runs the leave-one-out comparison in memory without writing anything.
pub fn loocv(cfg: &BenchConfig) -> Result<LoocvOutcome> {
    cfg.validate()?;
    with_domain!(cfg, |d| {
        let prepared = prepare(&d, cfg)?;
        loocv_on(&d, cfg, &prepared)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub mean_evals_to_first_feasible: f64,
    pub ci95_evals: f64,
    pub mean_cost_to_first_feasible: f64,
    pub ci95_cost: f64,
    pub success_rate: f64,
    pub mean_final_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedGap {
    pub faster: String,
    pub slower: String,
    /// Mean of slower − faster evaluations to first feasible.
    pub mean_difference: f64,
    pub ci95: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvSummary {
    pub domain: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub folds: usize,
    pub policies: Vec<PolicySummary>,
    pub skipped: Vec<String>,
    pub optimal_mean: f64,
    pub gaps: Vec<PairedGap>,
}

pub fn paired_gap(
    outcome: &LoocvOutcome,
    faster: PolicyKind,
    slower: PolicyKind,
) -> Option<PairedGap> {
    let a = outcome.policy(faster)?.evals_to_first();
    let b = outcome.policy(slower)?.evals_to_first();
    let (mean_difference, ci95) = paired_difference(&a, &b);
    Some(PairedGap {
        faster: faster.name().into(),
        slower: slower.name().into(),
        mean_difference,
        ci95,
        significant: mean_difference - ci95 > 0.0,
    })
}

pub fn summarize(outcome: &LoocvOutcome, seed: u64) -> LoocvSummary {
    let policies = outcome
        .runs
        .iter()
        .map(|r| {
            let evals = r.evals_to_first();
            let cost = r.cost_to_first();
            PolicySummary {
                policy: r.policy.name().into(),
                mean_evals_to_first_feasible: mean(&evals),
                ci95_evals: ci95(&evals),
                mean_cost_to_first_feasible: mean(&cost),
                ci95_cost: ci95(&cost),
                success_rate: r.success_rate(),
                mean_final_best: mean(&r.curve_at(outcome.k)),
            }
        })
        .collect();
    let pairs = [
        (PolicyKind::Box, PolicyKind::Static),
        (PolicyKind::Static, PolicyKind::Rand),
        (PolicyKind::Box, PolicyKind::Rand),
        (PolicyKind::Box, PolicyKind::Doo),
    ];
    LoocvSummary {
        domain: outcome.domain.clone(),
        seed,
        n: outcome.n,
        m: outcome.m,
        k: outcome.k,
        folds: outcome.fold_indices.len(),
        policies,
        skipped: outcome
            .skipped
            .iter()
            .map(|p| p.name().to_string())
            .collect(),
        optimal_mean: mean(&outcome.optimal),
        gaps: pairs
            .iter()
            .filter_map(|&(a, b)| paired_gap(outcome, a, b))
            .collect(),
    }
}

/// `policy,budget,mean_score,ci95`, policies in run order followed by `optimal`.
pub fn curves_csv(outcome: &LoocvOutcome) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "budget", "mean_score", "ci95"])?;
    for r in &outcome.runs {
        for b in 1..=outcome.k {
            let v = r.curve_at(b);
            w.write_record([
                r.policy.name().to_string(),
                b.to_string(),
                mean(&v).to_string(),
                ci95(&v).to_string(),
            ])?;
        }
    }
    for b in 1..=outcome.k {
        w.write_record([
            "optimal".to_string(),
            b.to_string(),
            mean(&outcome.optimal).to_string(),
            ci95(&outcome.optimal).to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// `policy,mean_cost,ci95,success_rate`.
pub fn firstfeasible_csv(outcome: &LoocvOutcome) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "mean_cost", "ci95", "success_rate"])?;
    for r in &outcome.runs {
        let cost = r.cost_to_first();
        w.write_record([
            r.policy.name().to_string(),
            mean(&cost).to_string(),
            ci95(&cost).to_string(),
            r.success_rate().to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// Leave-one-out comparison; writes `curves.csv`, `firstfeasible.csv` and
/// `summary.json` under `cfg.out`.
pub fn cmd_loocv(cfg: &BenchConfig) -> Result<(LoocvOutcome, LoocvSummary)> {
    let outcome = loocv(cfg)?;
    let summary = summarize(&outcome, cfg.seed);
    write_file(&cfg.out.join("curves.csv"), &curves_csv(&outcome)?)?;
    write_file(
        &cfg.out.join("firstfeasible.csv"),
        &firstfeasible_csv(&outcome)?,
    )?;
    write_json(&cfg.out.join("summary.json"), &summary)?;
    info!("wrote loocv outputs to {}", cfg.out.display());
    Ok((outcome, summary))
}

/// Oracle over a subset of another oracle's constraints.
pub struct SubsetOracle<'a, O: ?Sized> {
    pub inner: &'a O,
    pub indices: &'a [usize],
}

impl<O: PlannerOracle + ?Sized> PlannerOracle for SubsetOracle<'_, O> {
    type Instance = O::Instance;

    fn evaluate(&self, instance: &O::Instance, constraint: usize) -> Result<PlanResult> {
        let &j = self.indices.get(constraint).ok_or(Error::OutOfRange {
            index: constraint,
            len: self.indices.len(),
        })?;
        self.inner.evaluate(instance, j)
    }

    fn unconstrained_solve(&self, instance: &O::Instance, seed: u64) -> Result<PlanResult> {
        self.inner.unconstrained_solve(instance, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinsetReport {
    pub m: usize,
    pub set_size: usize,
    pub set_fraction: f64,
    pub constraint_ids: Vec<String>,
    /// Covered instances over all instances of the full bundle.
    pub coverage: f64,
    pub n_uncoverable: usize,
    pub success_prob: f64,
    pub total_gain: f64,
    pub folds: usize,
    pub fold_set_size_mean: f64,
    pub fold_set_size_max: usize,
    pub success_rate_subset: f64,
    pub success_rate_full: f64,
    pub mean_evals_subset: f64,
    pub mean_evals_full: f64,
    pub mean_cost_subset: f64,
    pub mean_cost_full: f64,
    /// Total belief-update cost with BOX on the minimal sets over the full set.
    pub update_cost_ratio: f64,
    /// `(max fold |L| / m)²`.
    pub update_cost_bound: f64,
}

struct MinsetFold {
    set_size: usize,
    subset: FoldStats,
    full: FoldStats,
}

fn minset_fold<O: PlannerOracle + ?Sized>(
    instance: &O::Instance,
    oracle: &O,
    prior: &GaussianBelief,
    set: &MinimalSet,
    zeta: f64,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<(FoldStats, FoldStats)> {
    let sub_prior = prior.marginal(&set.indices)?;
    let sub_oracle = SubsetOracle {
        inner: oracle,
        indices: &set.indices,
    };
    let on_set = run_box(
        instance,
        &sub_oracle,
        &sub_prior,
        set.len(),
        zeta,
        derive_seed(seed, 0),
    )?;
    let on_all = run_box(instance, oracle, prior, k, zeta, derive_seed(seed, 1))?;
    let mut subset = fold_stats(&[on_set], set.len());
    // both sides count a miss as m + 1 evaluations
    if subset.solved == 0.0 {
        subset.evals_to_first = (m + 1) as f64;
    }
    let mut full = fold_stats(&[on_all], k);
    if full.solved == 0.0 {
        full.evals_to_first = (m + 1) as f64;
    }
    Ok((subset, full))
}

fn minset_on<D: Domain>(
    domain: &D,
    cfg: &BenchConfig,
    prepared: &Prepared<D::Instance>,
) -> Result<(MinimalSet, MinsetReport)> {
    let bundle = &prepared.bundle;
    let (n, m) = (bundle.n(), bundle.m());
    if n < 3 {
        return Err(Error::TooFewInstances { rows: n, cols: m });
    }
    let k = cfg.loocv.k.unwrap_or(m);
    if k > m {
        return Err(Error::BudgetTooLarge { k, m });
    }
    let params = cfg.oms_params();
    let full_prior = estimate_prior(bundle.scores())?;
    let set = construct_oms(bundle, &full_prior, &params)?;
    let folds = cfg.loocv.folds.unwrap_or(n).min(n);
    let master = derive_seed(cfg.seed, LOOCV_STREAM);
    let zeta = cfg.loocv.zeta;

    let per_fold: Vec<MinsetFold> = (0..folds)
        .into_par_iter()
        .map(|i| {
            let fold = make_fold(bundle, i)?;
            let (Some(train), Some(prior)) = (&fold.train, &fold.prior) else {
                unreachable!("n >= 3 gives every fold a training part")
            };
            let fold_set = construct_oms(train, prior, &params)?;
            let seed = derive_seed(master, i as u64);
            let (subset, full) = match &prepared.instances {
                Some(instances) => {
                    let oracle = DomainOracle {
                        domain,
                        constraints: bundle.constraints(),
                        sentinel: fold.sentinel,
                    };
                    minset_fold(&instances[i], &oracle, prior, &fold_set, zeta, k, m, seed)?
                }
                None => {
                    let oracle = TableOracle {
                        sentinel: fold.sentinel,
                    };
                    minset_fold(
                        fold.truth.as_slice(),
                        &oracle,
                        prior,
                        &fold_set,
                        zeta,
                        k,
                        m,
                        seed,
                    )?
                }
            };
            Ok(MinsetFold {
                set_size: fold_set.len(),
                subset,
                full,
            })
        })
        .collect::<Result<_>>()?;

    let pick = |f: &dyn Fn(&MinsetFold) -> f64| per_fold.iter().map(f).collect::<Vec<f64>>();
    let max_size = per_fold.iter().map(|f| f.set_size).max().unwrap_or(0);
    let cost_subset: f64 = per_fold.iter().map(|f| f.subset.update_cost).sum();
    let cost_full: f64 = per_fold.iter().map(|f| f.full.update_cost).sum();
    let report = MinsetReport {
        m,
        set_size: set.len(),
        set_fraction: set.len() as f64 / m as f64,
        constraint_ids: set.constraint_ids.clone(),
        coverage: set.covered.len() as f64 / n as f64,
        n_uncoverable: set.uncoverable.len(),
        success_prob: set.success_prob,
        total_gain: set.total_gain,
        folds,
        fold_set_size_mean: mean(&pick(&|f| f.set_size as f64)),
        fold_set_size_max: max_size,
        success_rate_subset: mean(&pick(&|f| f.subset.solved)),
        success_rate_full: mean(&pick(&|f| f.full.solved)),
        mean_evals_subset: mean(&pick(&|f| f.subset.evals_to_first)),
        mean_evals_full: mean(&pick(&|f| f.full.evals_to_first)),
        mean_cost_subset: mean(&pick(&|f| f.subset.cost_to_first)),
        mean_cost_full: mean(&pick(&|f| f.full.cost_to_first)),
        update_cost_ratio: if cost_full > 0.0 {
            cost_subset / cost_full
        } else {
            0.0
        },
        update_cost_bound: (max_size as f64 / m as f64).powi(2),
    };
    Ok((set, report))
}

/// Minimal set on the whole bundle plus a leave-one-out comparison of BOX on
/// each fold's minimal set against BOX on every constraint. Writes
/// `minset.json` and `minset_report.json`.
pub fn cmd_minset(cfg: &BenchConfig) -> Result<(MinimalSet, MinsetReport)> {
    cfg.validate()?;
    let (set, report) = with_domain!(cfg, |d| {
        let prepared = prepare(&d, cfg)?;
        minset_on(&d, cfg, &prepared)?
    });
    let mut json = set.to_json()?;
    json.push('\n');
    write_file(&cfg.out.join("minset.json"), json.as_bytes())?;
    write_json(&cfg.out.join("minset_report.json"), &report)?;
    Ok((set, report))
}

/// Monte-Carlo check of the regret bound on the synthetic prior, or on the
/// prior estimated from the bundle. Writes `regret.json`.
pub fn cmd_regret(cfg: &BenchConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let r = &cfg.regret;
    let prior = match &r.synthetic {
        Some(s) => {
            let mut rng = rng_from(derive_seed(cfg.seed, REGRET_STREAM));
            let cov = low_rank_covariance(s.m, s.d, s.sigma, &mut rng);
            GaussianBelief::new(DVector::zeros(s.m), cov)?
        }
        None => {
            let bundle = with_domain!(cfg, |d| prepare(&d, cfg)?.bundle);
            estimate_prior(bundle.scores())?
        }
    };
    let params = RegretParams::for_covariance(prior.covariance(), r.delta, r.k)?;
    let report = monte_carlo_validate(
        &prior,
        &params,
        r.trials,
        derive_seed(cfg.seed, REGRET_STREAM + 1),
    )?;
    write_json(&cfg.out.join("regret.json"), &report)?;
    Ok(report)
}

/// Illustration scenario and its negative control. Writes `golden.json`.
pub fn cmd_golden(zeta: f64, out: Option<&Path>) -> Result<GoldenReport> {
    let report = golden_report(zeta)?;
    if let Some(dir) = out {
        write_json(&dir.join("golden.json"), &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_grid(n: usize, seed: u64, out: &Path) -> BenchConfig {
        BenchConfig {
            seed,
            out: out.to_path_buf(),
            domain: DomainConfig {
                n,
                ..DomainConfig::default()
            },
            loocv: LoocvConfig {
                folds: Some(8),
                rand_repeats: 3,
                ..LoocvConfig::default()
            },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn ci95_fixture() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        // sample sd = sqrt(32/7)
        let expect = 1.96 * (32.0f64 / 7.0).sqrt() / 8f64.sqrt();
        assert_relative_eq!(ci95(&v), expect, epsilon = 1e-15);
        assert_eq!(ci95(&[3.0]), 0.0);
        assert_eq!(ci95(&[1.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            parse_policies("box, STATIC,rand").unwrap(),
            vec![PolicyKind::Box, PolicyKind::Static, PolicyKind::Rand]
        );
        assert!(parse_policies("box,ucb").is_err());
    }

    #[test]
    fn toml_and_json_configs_agree() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        let json_path = dir.path().join("c.json");
        fs::write(
            &toml_path,
            "seed = 9\n[domain]\nkind = \"nav\"\nn = 12\n[domain.nav]\nn_obstacles = 3\n[loocv]\npolicies = [\"box\", \"rand\"]\nrand_repeats = 4\n",
        )
        .unwrap();
        fs::write(
            &json_path,
            r#"{"seed": 9, "domain": {"kind": "nav", "n": 12, "nav": {"n_obstacles": 3}}, "loocv": {"policies": ["box", "rand"], "rand_repeats": 4}}"#,
        )
        .unwrap();
        let a = BenchConfig::load(&toml_path).unwrap();
        let b = BenchConfig::load(&json_path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.domain.kind, DomainKind::Nav);
        assert_eq!(a.domain.nav.n_obstacles, 3);
        assert_eq!(a.loocv.zeta, DEFAULT_ZETA);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "seed = 1\n[loocv]\nzetta = 2.0\n").unwrap();
        assert!(BenchConfig::load(&p).is_err());
        let mut cfg = BenchConfig::default();
        cfg.regret.trials = 10;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.loocv.zeta = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.minset.lambda_tradeoff = f64::NAN;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = BenchConfig::default();
        cfg.apply(&Overrides {
            seed: Some(5),
            k: Some(3),
            zeta: Some(0.5),
            trials: Some(300),
            policies: Some(vec![PolicyKind::Static]),
            out: Some(PathBuf::from("elsewhere")),
        });
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.loocv.k, Some(3));
        assert_eq!(cfg.regret.k, 3);
        assert_eq!(cfg.loocv.zeta, 0.5);
        assert_eq!(cfg.regret.trials, 300);
        assert_eq!(cfg.loocv.policies, vec![PolicyKind::Static]);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
    }

    #[test]
    fn loocv_outputs_and_invariants() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_grid(30, 2, dir.path());
        let (outcome, summary) = cmd_loocv(&cfg).unwrap();
        assert_eq!(outcome.runs.len(), 5);
        assert_eq!(summary.folds, 8);
        let curves = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
        assert!(curves.starts_with("policy,budget,mean_score,ci95\n"));
        assert_eq!(curves.lines().count(), 1 + 6 * outcome.k);
        let ff = fs::read_to_string(dir.path().join("firstfeasible.csv")).unwrap();
        assert!(ff.starts_with("policy,mean_cost,ci95,success_rate\n"));
        for r in &outcome.runs {
            for b in 1..=outcome.k {
                let v = r.curve_at(b);
                if b > 1 {
                    let prev = r.curve_at(b - 1);
                    assert!(v.iter().zip(&prev).all(|(x, y)| x >= y));
                }
                if r.policy != PolicyKind::Raw {
                    assert!(v.iter().zip(&outcome.optimal).all(|(x, o)| x <= o));
                }
            }
        }
        // exhaustive budget: every constraint policy ends at the optimum
        for p in [
            PolicyKind::Box,
            PolicyKind::Static,
            PolicyKind::Rand,
            PolicyKind::Doo,
        ] {
            assert_eq!(
                outcome.policy(p).unwrap().curve_at(outcome.m),
                outcome.optimal
            );
        }
    }

    #[test]
    fn loocv_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        cmd_loocv(&small_grid(20, 4, a.path())).unwrap();
        cmd_loocv(&small_grid(20, 4, b.path())).unwrap();
        for f in ["curves.csv", "firstfeasible.csv", "summary.json"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn all_feasible_table_solves_at_step_one() {
        // a bundle without domain configuration runs on the table oracle
        let dir = tempfile::tempdir().unwrap();
        let scores = crate::score_matrix::ScoreMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 1.0, 3.5],
            vec![1.5, 2.5, 1.0],
            vec![3.0, 3.0, 3.0],
        ])
        .unwrap();
        let constraints = crate::experience::ConstraintSet::new(
            (0..3).map(|j| (format!("c{j}"), vec![j as f64])).collect(),
        )
        .unwrap();
        let bundle =
            ExperienceBundle::from_scores(scores, 0.0, constraints, Default::default()).unwrap();
        bundle.write_dir(&dir.path().join("b")).unwrap();
        let cfg = BenchConfig {
            bundle: Some(dir.path().join("b")),
            out: dir.path().join("out"),
            ..BenchConfig::default()
        };
        let outcome = loocv(&cfg).unwrap();
        assert_eq!(outcome.skipped, vec![PolicyKind::Raw]);
        for r in &outcome.runs {
            assert!(r.evals_to_first().iter().all(|&e| e == 1.0));
            assert_eq!(r.success_rate(), 1.0);
        }
    }

    #[test]
    fn two_instances_skip_prior_policies() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_grid(2, 4, dir.path());
        cfg.loocv.policies = vec![PolicyKind::Box, PolicyKind::Rand];
        let outcome = loocv(&cfg).unwrap();
        assert_eq!(outcome.skipped, vec![PolicyKind::Box]);
        assert_eq!(outcome.runs.len(), 1);
    }

    #[test]
    fn gen_round_trips_through_bundle_dir() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_grid(15, 3, dir.path());
        let report = cmd_gen(&cfg).unwrap();
        assert_eq!(report.n, 15);
        let again = tempfile::tempdir().unwrap();
        let report2 = cmd_gen(&BenchConfig {
            out: again.path().to_path_buf(),
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(report.m, report2.m);
        for f in ["scores.csv", "constraints.csv", "meta.json"] {
            assert_eq!(
                fs::read(report.path.join(f)).unwrap(),
                fs::read(report2.path.join(f)).unwrap()
            );
        }
        // a saved bundle reproduces the in-memory comparison
        let direct = loocv(&cfg).unwrap();
        let mut from_disk = BenchConfig {
            bundle: Some(report.path.clone()),
            ..cfg.clone()
        };
        resolve_bundle_domain(&mut from_disk).unwrap();
        assert_eq!(loocv(&from_disk).unwrap(), direct);
    }

    #[test]
    fn nav_subsample_keeps_requested_columns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = BenchConfig {
            out: dir.path().to_path_buf(),
            domain: DomainConfig {
                kind: DomainKind::Nav,
                n: 40,
                solutions_per_instance: 6,
                subsample: Some(200),
                ..DomainConfig::default()
            },
            ..BenchConfig::default()
        };
        let report = cmd_gen(&cfg).unwrap();
        assert_eq!(report.m, 200);
    }

    #[test]
    fn minset_report_on_grid() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_grid(30, 5, dir.path());
        let (set, report) = cmd_minset(&cfg).unwrap();
        assert_eq!(report.set_size, set.len());
        assert!(report.update_cost_ratio <= report.update_cost_bound + 1e-12);
        assert!(dir.path().join("minset.json").exists());
        assert!(dir.path().join("minset_report.json").exists());
    }

    #[test]
    fn regret_on_synthetic_prior() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = BenchConfig {
            out: dir.path().to_path_buf(),
            ..BenchConfig::default()
        };
        cfg.regret.synthetic = Some(SyntheticPrior::default());
        cfg.regret.trials = 200;
        let report = cmd_regret(&cfg).unwrap();
        assert_eq!(report.trials, 200);
        assert!(report.violation_rate <= report.tolerance());
        assert!(dir.path().join("regret.json").exists());
    }
}
