//! Continuous 2-D navigation to a pick pose. The workspace is the unit square
//! with axis-aligned rectangular obstacles. A constraint is a pre-grasp pose
//! `[x, y, psi]` that must lie within reach of the target and face it within
//! an angular tolerance. Paths are shortest paths on a visibility graph.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Domain, Plan};
use crate::error::{Error, Result};
use crate::rng::rng_from;

const CORNER_OFFSET: f64 = 1e-6;
const INTERIOR_SHRINK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            min: [x0.min(x1), y0.min(y1)],
            max: [x0.max(x1), y0.max(y1)],
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.min[0] && p[0] < self.max[0] && p[1] > self.min[1] && p[1] < self.max[1]
    }

    /// Whether the segment `a -> b` passes through the open interior.
    pub fn blocks(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let lo = [self.min[0] + INTERIOR_SHRINK, self.min[1] + INTERIOR_SHRINK];
        let hi = [self.max[0] - INTERIOR_SHRINK, self.max[1] - INTERIOR_SHRINK];
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..2 {
            let d = b[k] - a[k];
            if d.abs() < 1e-15 {
                if a[k] <= lo[k] || a[k] >= hi[k] {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((lo[k] - a[k]) / d, (hi[k] - a[k]) / d);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return false;
                }
            }
        }
        t0 < t1
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        let e = CORNER_OFFSET;
        [
            [self.min[0] - e, self.min[1] - e],
            [self.max[0] + e, self.min[1] - e],
            [self.max[0] + e, self.max[1] + e],
            [self.min[0] - e, self.max[1] + e],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavParams {
    pub n_obstacles: usize,
    pub min_size: f64,
    pub max_size: f64,
    /// Largest distance from the pre-grasp pose to the target.
    pub reach: f64,
    /// Largest angle between the pose heading and the bearing to the target.
    pub angle_tolerance: f64,
    pub start: [f64; 2],
    /// Rejection-sampling attempts per unconstrained solve.
    pub raw_budget: usize,
}

impl Default for NavParams {
    fn default() -> Self {
        NavParams {
            n_obstacles: 8,
            min_size: 0.05,
            max_size: 0.2,
            reach: 0.15,
            angle_tolerance: PI / 4.0,
            start: [0.05, 0.05],
            raw_budget: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavInstance {
    pub obstacles: Vec<Rect>,
    pub target: [f64; 2],
    pub start: [f64; 2],
    pub seed: u64,
}

fn in_unit_square(p: [f64; 2]) -> bool {
    (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Smallest absolute difference between two angles.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

impl NavInstance {
    pub fn is_free(&self, p: [f64; 2]) -> bool {
        in_unit_square(p) && !self.obstacles.iter().any(|r| r.contains(p))
    }

    /// Whether the segment avoids every obstacle interior.
    pub fn segment_free(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        !self.obstacles.iter().any(|r| r.blocks(a, b))
    }

    /// Shortest collision-free path from the start to `goal` on the
    /// visibility graph of slightly inflated obstacle corners. Returns the
    /// waypoints and the number of segment checks.
    pub fn shortest_path(&self, goal: [f64; 2]) -> (Option<Vec<[f64; 2]>>, usize) {
        if !self.is_free(self.start) || !self.is_free(goal) {
            return (None, 0);
        }
        let mut nodes = vec![self.start, goal];
        nodes.extend(
            self.obstacles
                .iter()
                .flat_map(|r| r.corners())
                .filter(|&c| self.is_free(c)),
        );
        let v = nodes.len();
        let mut checks = 0;
        let mut visible = vec![vec![None::<bool>; v]; v];
        let mut edge = |i: usize, j: usize, checks: &mut usize| -> bool {
            let (a, b) = (i.min(j), i.max(j));
            *visible[a][b].get_or_insert_with(|| {
                *checks += 1;
                self.segment_free(nodes[a], nodes[b])
            })
        };

        let mut best = vec![f64::INFINITY; v];
        let mut prev = vec![usize::MAX; v];
        let mut done = vec![false; v];
        best[0] = 0.0;
        loop {
            let Some(u) = (0..v)
                .filter(|&i| !done[i] && best[i].is_finite())
                .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            else {
                return (None, checks);
            };
            if u == 1 {
                break;
            }
            done[u] = true;
            for w in 0..v {
                if done[w] || w == u {
                    continue;
                }
                let alt = best[u] + dist(nodes[u], nodes[w]);
                if alt < best[w] && edge(u, w, &mut checks) {
                    best[w] = alt;
                    prev[w] = u;
                }
            }
        }
        let mut path = vec![nodes[1]];
        let mut cur = 1;
        while cur != 0 {
            cur = prev[cur];
            path.push(nodes[cur]);
        }
        path.reverse();
        (Some(path), checks)
    }
}

#[derive(Debug, Clone)]
pub struct NavDomain {
    pub params: NavParams,
}

impl NavDomain {
    pub fn new(params: NavParams) -> Result<Self> {
        if !(params.min_size > 0.0 && params.min_size <= params.max_size && params.max_size < 1.0) {
            return Err(Error::InvalidParam(
                "obstacle sizes must satisfy 0 < min_size <= max_size < 1".into(),
            ));
        }
        if !(params.reach > 0.0 && params.angle_tolerance > 0.0) {
            return Err(Error::InvalidParam(
                "reach and angle_tolerance must be positive".into(),
            ));
        }
        if !in_unit_square(params.start) {
            return Err(Error::InvalidParam(
                "start must lie in the unit square".into(),
            ));
        }
        Ok(NavDomain { params })
    }

    pub fn sample_nav_instance(&self, seed: u64) -> NavInstance {
        let p = &self.params;
        let mut rng = rng_from(seed);
        let mut obstacles = Vec::with_capacity(p.n_obstacles);
        while obstacles.len() < p.n_obstacles {
            let (w, h) = (
                rng.random_range(p.min_size..=p.max_size),
                rng.random_range(p.min_size..=p.max_size),
            );
            let (x, y) = (
                rng.random_range(0.0..1.0 - w),
                rng.random_range(0.0..1.0 - h),
            );
            let r = Rect::new(x, y, x + w, y + h);
            // keep a margin around the start so it is never boxed in
            if dist(r.clamp(p.start), p.start) > 0.02 {
                obstacles.push(r);
            }
        }
        let mut inst = NavInstance {
            obstacles,
            target: [0.5, 0.5],
            start: p.start,
            seed,
        };
        loop {
            let t = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            if inst.is_free(t) {
                inst.target = t;
                break;
            }
        }
        inst
    }

    /// Checks the pose constraint and plans to its position.
    pub fn nav_plan(&self, instance: &NavInstance, constraint: &[f64]) -> Plan {
        let (pos, psi) = ([constraint[0], constraint[1]], constraint[2]);
        let t = instance.target;
        let bearing = (t[1] - pos[1]).atan2(t[0] - pos[0]);
        let pose_ok = dist(pos, t) <= self.params.reach
            && angle_diff(psi, bearing) <= self.params.angle_tolerance
            && instance.is_free(pos);
        if !pose_ok {
            return Plan {
                feasible: false,
                waypoints: Vec::new(),
                cost_units: 1.0,
            };
        }
        let (path, checks) = instance.shortest_path(pos);
        let cost_units = 1.0 + checks as f64 / 1000.0;
        match path {
            Some(waypoints) => Plan {
                feasible: true,
                waypoints,
                cost_units,
            },
            None => Plan {
                feasible: false,
                waypoints: Vec::new(),
                cost_units,
            },
        }
    }
}

impl Rect {
    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.min[0], self.max[0]),
            p[1].clamp(self.min[1], self.max[1]),
        ]
    }
}

impl Domain for NavDomain {
    type Instance = NavInstance;

    fn name(&self) -> &'static str {
        "nav"
    }

    fn sample_instance(&self, seed: u64) -> NavInstance {
        self.sample_nav_instance(seed)
    }

    fn plan(&self, instance: &NavInstance, constraint: &[f64]) -> Plan {
        self.nav_plan(instance, constraint)
    }

    fn plan_raw(&self, instance: &NavInstance, seed: u64) -> (Plan, Option<Vec<f64>>) {
        let mut rng = rng_from(seed);
        let r = self.params.reach;
        for _ in 0..self.params.raw_budget {
            let (dx, dy) = (rng.random_range(-r..=r), rng.random_range(-r..=r));
            if dx.hypot(dy) > r {
                continue;
            }
            let pos = [instance.target[0] + dx, instance.target[1] + dy];
            if !instance.is_free(pos) {
                continue;
            }
            let psi = rng.random_range(-PI..PI);
            let c = vec![pos[0], pos[1], psi];
            return (self.nav_plan(instance, &c), Some(c));
        }
        (
            Plan {
                feasible: false,
                waypoints: Vec::new(),
                cost_units: 1.0,
            },
            None,
        )
    }

    fn constraint_id(&self, index: usize, _params: &[f64]) -> String {
        format!("pose{index:03}")
    }

    fn raw_budget(&self) -> usize {
        self.params.raw_budget
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experience::score_plan;

    fn path_len(p: &[[f64; 2]]) -> f64 {
        p.windows(2).map(|w| dist(w[0], w[1])).sum()
    }

    fn wall_with_gap() -> NavInstance {
        NavInstance {
            obstacles: vec![
                Rect::new(0.45, -0.1, 0.55, 0.4),
                Rect::new(0.45, 0.6, 0.55, 1.1),
            ],
            target: [0.85, 0.15],
            start: [0.1, 0.1],
            seed: 0,
        }
    }

    /// Dijkstra over a `res`-spaced lattice with the 32 knight-and-beyond
    /// neighbour offsets, using the same segment test.
    fn lattice_shortest(inst: &NavInstance, goal: [f64; 2], res: usize) -> f64 {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let n = res + 1;
        let h = 1.0 / res as f64;
        let at = |i: usize| [(i % n) as f64 * h, (i / n) as f64 * h];
        let key = |p: [f64; 2]| ((p[1] / h).round() as usize) * n + (p[0] / h).round() as usize;
        let mut offsets = Vec::new();
        for dx in -3i64..=3 {
            for dy in -3i64..=3 {
                let g = num_gcd(dx.unsigned_abs(), dy.unsigned_abs());
                if (dx, dy) != (0, 0) && g == 1 && dx.abs().max(dy.abs()) <= 3 {
                    offsets.push((dx, dy));
                }
            }
        }
        assert_eq!(offsets.len(), 32);
        let (s, g) = (key(inst.start), key(goal));
        let mut best = vec![f64::INFINITY; n * n];
        let mut heap = BinaryHeap::new();
        best[s] = 0.0;
        heap.push(Reverse((0u64, s)));
        while let Some(Reverse((_, u))) = heap.pop() {
            if u == g {
                return best[g];
            }
            let (ux, uy) = ((u % n) as i64, (u / n) as i64);
            for &(dx, dy) in &offsets {
                let (vx, vy) = (ux + dx, uy + dy);
                if vx < 0 || vy < 0 || vx >= n as i64 || vy >= n as i64 {
                    continue;
                }
                let v = vy as usize * n + vx as usize;
                let alt = best[u] + h * ((dx * dx + dy * dy) as f64).sqrt();
                if alt < best[v] - 1e-15 && inst.is_free(at(v)) && inst.segment_free(at(u), at(v)) {
                    best[v] = alt;
                    heap.push(Reverse(((alt * 1e12) as u64, v)));
                }
            }
        }
        f64::INFINITY
    }

    fn num_gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            num_gcd(b, a % b)
        }
    }

    #[test]
    fn wall_gap_path_matches_lattice_oracle() {
        let d = NavDomain::new(NavParams::default()).unwrap();
        let inst = wall_with_gap();
        let plan = d.nav_plan(&inst, &[0.8, 0.15, 0.0]);
        assert!(plan.feasible);
        let len = path_len(&plan.waypoints);
        let oracle = lattice_shortest(&inst, [0.8, 0.15], 200);
        assert!(len <= oracle + 1e-5, "{len} vs {oracle}");
        assert!((oracle - len) / len <= 0.02, "{len} vs {oracle}");
        // passes through the gap
        assert!(plan.waypoints.iter().any(|p| (p[1] - 0.4).abs() < 1e-3));
        assert!((score_plan(&plan.waypoints, true, -10.0) + len).abs() < 1e-12);
    }

    #[test]
    fn straight_line_when_clear() {
        let d = NavDomain::new(NavParams::default()).unwrap();
        let inst = NavInstance {
            obstacles: vec![],
            target: [0.5, 0.5],
            start: [0.1, 0.1],
            seed: 0,
        };
        let plan = d.nav_plan(&inst, &[0.4, 0.5, 0.0]);
        assert!(plan.feasible);
        assert_eq!(plan.waypoints.len(), 2);
        assert!((path_len(&plan.waypoints) - dist([0.1, 0.1], [0.4, 0.5])).abs() < 1e-12);
    }

    #[test]
    fn pose_checks() {
        let d = NavDomain::new(NavParams::default()).unwrap();
        let inst = NavInstance {
            obstacles: vec![],
            target: [0.5, 0.5],
            start: [0.1, 0.1],
            seed: 0,
        };
        // out of reach
        assert!(!d.nav_plan(&inst, &[0.3, 0.5, 0.0]).feasible);
        // facing away
        assert!(!d.nav_plan(&inst, &[0.4, 0.5, PI]).feasible);
        // within tolerance, heading wrapped
        assert!(d.nav_plan(&inst, &[0.4, 0.5, 2.0 * PI + 0.7]).feasible);
        assert!(!d.nav_plan(&inst, &[0.4, 0.5, 0.8]).feasible);
        // inside an obstacle
        let blocked = NavInstance {
            obstacles: vec![Rect::new(0.35, 0.45, 0.45, 0.55)],
            ..inst
        };
        assert!(!d.nav_plan(&blocked, &[0.4, 0.5, 0.0]).feasible);
    }

    #[test]
    fn enclosed_goal_is_unreachable() {
        let inst = NavInstance {
            obstacles: vec![
                Rect::new(0.3, 0.3, 0.7, 0.35),
                Rect::new(0.3, 0.65, 0.7, 0.7),
                Rect::new(0.3, 0.3, 0.35, 0.7),
                Rect::new(0.65, 0.3, 0.7, 0.7),
            ],
            target: [0.5, 0.5],
            start: [0.1, 0.1],
            seed: 0,
        };
        assert!(inst.shortest_path([0.45, 0.5]).0.is_none());
        assert!(inst.shortest_path([0.9, 0.9]).0.is_some());
    }

    #[test]
    fn segment_blocking() {
        let r = Rect::new(0.4, 0.4, 0.6, 0.6);
        assert!(r.blocks([0.0, 0.5], [1.0, 0.5]));
        assert!(!r.blocks([0.0, 0.4], [1.0, 0.4]));
        assert!(!r.blocks([0.0, 0.0], [0.3, 0.9]));
        assert!(r.blocks([0.5, 0.5], [0.5, 0.51]));
        assert!(!r.blocks([0.39, 0.39], [0.61, 0.39]));
    }

    #[test]
    fn sampled_instances_are_valid() {
        let d = NavDomain::new(NavParams::default()).unwrap();
        for seed in 0..50 {
            let inst = d.sample_nav_instance(seed);
            assert_eq!(inst.obstacles.len(), 8);
            assert!(inst.is_free(inst.target));
            assert!(inst.is_free(inst.start));
            assert_eq!(inst, d.sample_nav_instance(seed));
        }
    }

    #[test]
    fn raw_solution_replans_as_constraint() {
        let d = NavDomain::new(NavParams::default()).unwrap();
        let mut feasible = 0;
        for seed in 0..200 {
            let inst = d.sample_nav_instance(seed / 4);
            let (plan, c) = d.plan_raw(&inst, seed);
            if plan.feasible {
                feasible += 1;
                let again = d.nav_plan(&inst, &c.unwrap());
                assert_eq!(again, plan);
            }
        }
        assert!(feasible > 0);
    }

    #[test]
    fn angle_wrap() {
        assert!((angle_diff(PI - 0.1, -PI + 0.1) - 0.2).abs() < 1e-12);
        assert!(angle_diff(0.3, 0.3).abs() < 1e-15);
    }
}
