//! The four-direction grasp illustration: a 4×4 binary score matrix over
//! {top, left, bottom, right} with column sums {2, 2, 1, 2}, top perfectly
//! correlated with right, anti-correlated with bottom and uncorrelated with
//! left. Used as a golden scenario for UCB evolution under conditioning.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;
use crate::gaussian::{estimate_prior, GaussianBelief};
use crate::policy::{run_box, TableOracle};
use crate::score_matrix::ScoreMatrix;

pub const TOP: usize = 0;
pub const LEFT: usize = 1;
pub const BOTTOM: usize = 2;
pub const RIGHT: usize = 3;

/// Binary scores: 1 feasible, 0 infeasible.
pub const SENTINEL: f64 = 0.0;

const DIRECTIONS: [&str; 4] = ["top", "left", "bottom", "right"];

fn matrix(rows: [[f64; 4]; 4]) -> ScoreMatrix {
    let values = DMatrix::from_fn(4, 4, |i, j| rows[i][j]);
    ScoreMatrix::new(
        values,
        (1..=4).map(|i| format!("w{i}")).collect(),
        DIRECTIONS.iter().map(|s| s.to_string()).collect(),
    )
    .expect("static matrix is valid")
}

pub fn illustration_scores() -> ScoreMatrix {
    matrix([
        [1.0, 0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
}

/// Negative control: right becomes anti-correlated and bottom positively
/// correlated with top; means are unchanged.
pub fn flipped_scores() -> ScoreMatrix {
    matrix([
        [1.0, 0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

/// First test instance: only the bottom approach works.
pub fn instance_one_scores() -> [f64; 4] {
    [0.0, 0.0, 1.0, 0.0]
}

/// Second test instance: only the left approach works.
pub fn instance_two_scores() -> [f64; 4] {
    [0.0, 1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn ucb_of(b: &GaussianBelief, zeta: f64, i: usize) -> f64 {
    b.mean()[i] + zeta * b.variance(i).max(0.0).sqrt()
}

/// Runs the five qualitative UCB-evolution checks on `scores`.
pub fn run_scenario(
    scores: &ScoreMatrix,
    zeta: f64,
    tie_break_seeds: u64,
) -> Result<Vec<GoldenCheck>> {
    let prior = estimate_prior(scores)?;
    let u = |b: &GaussianBelief, i| ucb_of(b, zeta, i);
    let tol = 1e-12;
    let mut checks = Vec::new();

    let (t, l, b, r) = (
        u(&prior, TOP),
        u(&prior, LEFT),
        u(&prior, BOTTOM),
        u(&prior, RIGHT),
    );
    checks.push(GoldenCheck {
        name: "initial_three_way_tie",
        passed: (t - l).abs() <= tol && (t - r).abs() <= tol && t > b,
        detail: format!("ucb top={t:.6} left={l:.6} right={r:.6} bottom={b:.6}"),
    });

    let after_left = prior.condition(LEFT, 0.0)?;
    let (t2, r2) = (u(&after_left, TOP), u(&after_left, RIGHT));
    checks.push(GoldenCheck {
        name: "uncorrelated_unchanged",
        passed: (t2 - t).abs() <= tol && (r2 - r).abs() <= tol,
        detail: format!("after left=0: top {t:.6}->{t2:.6}, right {r:.6}->{r2:.6}"),
    });

    let after_top = prior.condition(TOP, 0.0)?;
    let b3 = u(&after_top, BOTTOM);
    checks.push(GoldenCheck {
        name: "negative_correlate_rises",
        passed: b3 > b + tol,
        detail: format!("after top=0: bottom {b:.6}->{b3:.6}"),
    });
    let r3 = u(&after_top, RIGHT);
    checks.push(GoldenCheck {
        name: "positive_correlate_falls",
        passed: r3 < r - tol,
        detail: format!("after top=0: right {r:.6}->{r3:.6}"),
    });

    let oracle = TableOracle { sentinel: SENTINEL };
    let truth = instance_two_scores();
    let mut worst = 0;
    for seed in 0..tie_break_seeds {
        let trace = run_box(&truth[..], &oracle, &prior, 4, zeta, seed)?;
        let step = trace.first_feasible().map_or(usize::MAX, |c| c.t);
        worst = worst.max(step);
    }
    checks.push(GoldenCheck {
        name: "instance_two_within_two",
        passed: worst <= 2,
        detail: format!(
            "latest first-feasible step over {tie_break_seeds} tie-break seeds: {worst}"
        ),
    });
    Ok(checks)
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenReport {
    pub scenario: Vec<GoldenCheck>,
    pub negative_control: Vec<GoldenCheck>,
    pub passed: bool,
}

fn rise_fall(checks: &[GoldenCheck]) -> (bool, bool) {
    let find = |name| {
        checks
            .iter()
            .find(|c| c.name == name)
            .is_some_and(|c| c.passed)
    };
    (
        find("negative_correlate_rises"),
        find("positive_correlate_falls"),
    )
}

/// Scenario must pass every check. The flipped control must break the
/// rise/fall pair at `zeta`, and fail each of the two separately at zero
/// exploration, where the UCB is the posterior mean.
pub fn golden_report(zeta: f64) -> Result<GoldenReport> {
    let scenario = run_scenario(&illustration_scores(), zeta, 100)?;
    let negative_control = run_scenario(&flipped_scores(), zeta, 100)?;
    let (rise, fall) = rise_fall(&negative_control);
    let (rise0, fall0) = rise_fall(&run_scenario(&flipped_scores(), 0.0, 1)?);
    let control_fails = !(rise && fall) && !rise0 && !fall0;
    let passed = scenario.iter().all(|c| c.passed) && control_fails;
    Ok(GoldenReport {
        scenario,
        negative_control,
        passed,
    })
}
