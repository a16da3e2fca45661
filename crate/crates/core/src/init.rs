//! Initial trajectories: a TSP tour through the terminals, flown at full
//! speed with the spare slots spent hovering over terminals, or, when the
//! horizon is too short for the full tour, a tour through waypoints pulled
//! toward the path inside a disk of radius `r` around each terminal.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nalgebra::DMatrix;

use crate::barrier::{self, BarrierOptions, ConvexConstraints};
use crate::error::{Error, Result};
use crate::geometry::{path_length, project_onto_segment, Point2};
use crate::model::Scenario;

const TSP_RESTARTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TspTour {
    /// Terminal indices in visiting order.
    pub order: Vec<usize>,
    pub length_m: f64,
    /// Slots needed to fly the tour at full speed, endpoints included.
    pub flight_time_slots: usize,
    /// `q_ini`, the terminals in visiting order, `q_ini`.
    pub waypoints: Vec<Point2>,
}

/// Slots needed to cover `length` with steps of at most `step`: one slot
/// per step plus the starting slot, and never fewer than the two endpoint
/// slots.
pub fn slots_for_length(length: f64, step: f64) -> usize {
    let moves = (length / step - 1e-9).ceil().max(0.0) as usize;
    (moves + 1).max(2)
}

pub fn solve_tsp(scenario: &Scenario, seed: u64) -> TspTour {
    let q0 = scenario.params.initial_position_m;
    let mut nodes = vec![q0];
    nodes.extend(scenario.gts.iter().map(|g| g.position_m));
    let m = scenario.num_gts();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..TSP_RESTARTS {
        let mut tour = if restart == 0 {
            nearest_neighbor(&nodes)
        } else {
            let mut perm: Vec<usize> = (1..=m).collect();
            perm.shuffle(&mut rng);
            let mut t = vec![0];
            t.extend(perm);
            t
        };
        two_opt(&nodes, &mut tour);
        let len = tour_length(&nodes, &tour);
        if best.as_ref().is_none_or(|(b, _)| len < *b - 1e-9) {
            best = Some((len, tour));
        }
    }
    let (length_m, tour) = best.expect("at least one restart");
    let order: Vec<usize> = tour[1..].iter().map(|&i| i - 1).collect();
    let mut waypoints = vec![q0];
    waypoints.extend(order.iter().map(|&i| scenario.gts[i].position_m));
    waypoints.push(q0);
    TspTour {
        flight_time_slots: slots_for_length(length_m, scenario.params.max_step_m()),
        order,
        length_m,
        waypoints,
    }
}

fn tour_length(nodes: &[Point2], tour: &[usize]) -> f64 {
    let n = tour.len();
    (0..n).map(|i| nodes[tour[i]].dist(nodes[tour[(i + 1) % n]])).sum()
}

fn nearest_neighbor(nodes: &[Point2]) -> Vec<usize> {
    let mut tour = vec![0];
    let mut left: Vec<usize> = (1..nodes.len()).collect();
    while !left.is_empty() {
        let cur = nodes[*tour.last().unwrap()];
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| cur.dist(nodes[*a.1]).total_cmp(&cur.dist(nodes[*b.1])))
            .unwrap();
        tour.push(left.remove(pos));
    }
    tour
}

/// 2-opt on a closed tour with node 0 fixed in front.
fn two_opt(nodes: &[Point2], tour: &mut [usize]) {
    let n = tour.len();
    if n < 4 {
        return;
    }
    let d = |a: usize, b: usize| nodes[a].dist(nodes[b]);
    loop {
        let mut improved = false;
        for i in 1..n - 1 {
            for j in i + 1..n {
                let (a, b) = (tour[i - 1], tour[i]);
                let (c, e) = (tour[j], tour[(j + 1) % n]);
                if d(a, c) + d(b, e) < d(a, b) + d(c, e) - 1e-10 {
                    tour[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Pull each terminal waypoint of `tour` to the point of its radius-`r`
/// disk that shortens the closed path most.
///
/// Coordinate descent alone can stall where consecutive waypoints merge, so
/// it polishes the solution of a smoothed barrier formulation
/// `min Σ t_i  s.t.  sqrt(‖w_i - w_{i-1}‖² + ε²) <= t_i, ‖w_i - c_i‖ <= r`.
pub fn shrink_waypoints(tour: &TspTour, r: f64) -> Vec<Point2> {
    let centers = &tour.waypoints;
    let n = centers.len();
    if r <= 0.0 || n <= 2 {
        return centers.clone();
    }
    let mut w = shrink_barrier(centers, r);
    if path_length(&w) > path_length(centers) {
        w = centers.clone();
    }
    let mut len = path_length(&w);
    for _ in 0..1000 {
        for i in 1..n - 1 {
            w[i] = best_in_disk(w[i - 1], w[i + 1], centers[i], r);
        }
        let next = path_length(&w);
        let done = len - next < 1e-6;
        len = next;
        if done {
            break;
        }
    }
    w
}

struct ShrinkProblem<'a> {
    centers: &'a [Point2],
    r: f64,
    eps: f64,
}

impl ShrinkProblem<'_> {
    fn inner(&self) -> usize {
        self.centers.len() - 2
    }

    fn point(&self, x: &[f64], i: usize) -> Point2 {
        if i == 0 || i == self.centers.len() - 1 {
            self.centers[i]
        } else {
            Point2::new(x[2 * (i - 1)], x[2 * (i - 1) + 1])
        }
    }

    fn edge(&self, x: &[f64], i: usize) -> (Point2, f64) {
        let d = self.point(x, i + 1) - self.point(x, i);
        (d, (d.norm_sq() + self.eps * self.eps).sqrt())
    }
}

impl ConvexConstraints for ShrinkProblem<'_> {
    fn dim(&self) -> usize {
        2 * self.inner() + self.centers.len() - 1
    }

    fn num_constraints(&self) -> usize {
        self.inner() + self.centers.len() - 1
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> bool {
        let m = self.inner();
        for i in 0..m {
            out[i] = self.point(x, i + 1).dist_sq(self.centers[i + 1]) / (self.r * self.r) - 1.0;
        }
        for e in 0..self.centers.len() - 1 {
            out[m + e] = self.edge(x, e).1 - x[2 * m + e];
        }
        true
    }

    fn derivatives(&self, x: &[f64], w: &[f64], v: &[f64], gw: &mut [f64], gv: &mut [f64], h: &mut DMatrix<f64>) {
        let m = self.inner();
        let r2 = self.r * self.r;
        for i in 0..m {
            let g = (self.point(x, i + 1) - self.centers[i + 1]) * (2.0 / r2);
            let g = [g.x, g.y];
            for a in 0..2 {
                gw[2 * i + a] += w[i] * g[a];
                gv[2 * i + a] += v[i] * g[a];
                h[(2 * i + a, 2 * i + a)] += w[i] * 2.0 / r2;
                for b in 0..2 {
                    h[(2 * i + a, 2 * i + b)] += v[i] * g[a] * g[b];
                }
            }
        }
        for e in 0..self.centers.len() - 1 {
            let (d, phi) = self.edge(x, e);
            let dd = [d.x / phi, d.y / phi];
            let (wi, vi) = (w[m + e], v[m + e]);
            let t = 2 * m + e;
            // Gradient entries: +dd on point e+1, -dd on point e, -1 on t.
            let mut idx: Vec<(usize, f64, usize)> = Vec::with_capacity(5);
            if e < m {
                idx.push((2 * e, 1.0, 0));
                idx.push((2 * e + 1, 1.0, 1));
            }
            if e >= 1 {
                idx.push((2 * (e - 1), -1.0, 0));
                idx.push((2 * (e - 1) + 1, -1.0, 1));
            }
            for &(j, s, a) in &idx {
                gw[j] += wi * s * dd[a];
                gv[j] += vi * s * dd[a];
                for &(l, s2, b) in &idx {
                    let hess_dd = (if a == b { 1.0 } else { 0.0 } - dd[a] * dd[b]) / phi;
                    h[(j, l)] += wi * s * s2 * hess_dd + vi * s * s2 * dd[a] * dd[b];
                }
                h[(j, t)] -= vi * s * dd[a];
                h[(t, j)] -= vi * s * dd[a];
            }
            gw[t] -= wi;
            gv[t] -= vi;
            h[(t, t)] += vi;
        }
    }
}

fn shrink_barrier(centers: &[Point2], r: f64) -> Vec<Point2> {
    let prob = ShrinkProblem { centers, r, eps: 1e-7 * r.max(1.0) };
    let m = prob.inner();
    let mut x0 = Vec::with_capacity(prob.dim());
    for c in &centers[1..=m] {
        x0.push(c.x);
        x0.push(c.y);
    }
    for e in 0..centers.len() - 1 {
        x0.push(prob.edge(&x0, e).1 + 1.0);
    }
    let mut obj = vec![0.0; prob.dim()];
    obj[2 * m..].iter_mut().for_each(|c| *c = 1.0);
    let opts = BarrierOptions {
        mu0: r.max(1.0),
        gap_tol: 1e-7 * r.max(1.0),
        ..BarrierOptions::default()
    };
    let res = barrier::minimize(&prob, &obj, &x0, &opts);
    (0..centers.len()).map(|i| prob.point(&res.x, i)).collect()
}

/// Point of the disk `‖p - c‖ <= r` minimizing `‖p - a‖ + ‖p - b‖`.
fn best_in_disk(a: Point2, b: Point2, c: Point2, r: f64) -> Point2 {
    let on_seg = project_onto_segment(c, a, b);
    let gap = on_seg.dist(c);
    if gap <= r {
        return on_seg;
    }
    // Nearest disk point to the segment; optimal when a, b, c are collinear.
    let toward = c + (on_seg - c) * (r / gap);
    let ab = b - a;
    let ac = c - a;
    if (ab.x * ac.y - ab.y * ac.x).abs() <= 1e-12 * (ab.norm_sq() + ac.norm_sq()) {
        return toward;
    }
    let f = |t: f64| {
        let p = c + Point2::new(t.cos(), t.sin()) * r;
        p.dist(a) + p.dist(b)
    };
    let samples = 360;
    let step = std::f64::consts::TAU / samples as f64;
    let (mut best_t, mut best_f) = (0.0, f(0.0));
    for i in 1..samples {
        let t = i as f64 * step;
        let v = f(t);
        if v < best_f {
            best_t = t;
            best_f = v;
        }
    }
    let (mut lo, mut hi) = (best_t - step, best_t + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    let refined = c + Point2::new(t.cos(), t.sin()) * r;
    let fallback = c + Point2::new(best_t.cos(), best_t.sin()) * r;
    if refined.dist(a) + refined.dist(b) <= best_f {
        refined
    } else {
        fallback
    }
}

/// Points along the polyline `path` at arc lengths `0, s, 2s, …`, with the
/// final point pinned to the path's end. Also returns, for each interior
/// vertex, the index of the last sample at or before it.
fn sample_path(path: &[Point2], spacing: f64, count: usize) -> (Vec<Point2>, Vec<usize>) {
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    let at = |s: f64| -> Point2 {
        let s = s.clamp(0.0, total);
        let seg = cum.partition_point(|&c| c <= s).clamp(1, path.len() - 1) - 1;
        let len = cum[seg + 1] - cum[seg];
        if len <= 0.0 {
            path[seg]
        } else {
            path[seg].lerp(path[seg + 1], ((s - cum[seg]) / len).clamp(0.0, 1.0))
        }
    };
    let mut pts: Vec<Point2> = (0..count).map(|j| at(j as f64 * spacing)).collect();
    if let (Some(first), Some(last)) = (pts.first_mut(), path.first()) {
        *first = *last;
    }
    if let (Some(last), Some(end)) = (pts.last_mut(), path.last()) {
        *last = *end;
    }
    let before = (1..path.len() - 1)
        .map(|v| {
            let j = if spacing > 0.0 {
                ((cum[v] / spacing) + 1e-9).floor() as usize
            } else {
                0
            };
            j.min(count.saturating_sub(2))
        })
        .collect();
    (pts, before)
}

/// Fly `tour` at full speed, hovering `hover[v]` slots over the `v`-th
/// visited terminal. The result has `T^F + Σ hover` slots.
pub fn tour_with_hover(tour: &TspTour, step: f64, hover: &[usize]) -> Vec<Point2> {
    tour_with_hover_marked(tour, step, hover).0
}

/// As [`tour_with_hover`], also marking each hover slot with its visit
/// index.
pub fn tour_with_hover_marked(tour: &TspTour, step: f64, hover: &[usize]) -> (Vec<Point2>, Vec<Option<usize>>) {
    let tf = tour.flight_time_slots;
    let m = hover.len();
    let (grid, before) = sample_path(&tour.waypoints, step, tf);
    let total = tf + hover.iter().sum::<usize>();
    let mut out = Vec::with_capacity(total);
    let mut marks = Vec::with_capacity(total);
    let mut v = 0;
    for (j, &p) in grid.iter().enumerate() {
        out.push(p);
        marks.push(None);
        while v < m && before[v] == j {
            out.extend(std::iter::repeat_n(tour.waypoints[v + 1], hover[v]));
            marks.extend(std::iter::repeat_n(Some(v), hover[v]));
            v += 1;
        }
    }
    (out, marks)
}

/// Initial per-slot trajectory for horizon `t`.
pub fn initial_trajectory(scenario: &Scenario, t: usize, seed: u64) -> Result<Vec<Point2>> {
    let tour = solve_tsp(scenario, seed);
    initial_trajectory_from_tour(scenario, &tour, t)
}

pub fn initial_trajectory_from_tour(scenario: &Scenario, tour: &TspTour, t: usize) -> Result<Vec<Point2>> {
    if t < 2 {
        return Err(Error::HorizonTooShort {
            horizon: t,
            reason: "the mission needs at least its two endpoint slots".into(),
        });
    }
    let d = scenario.params.max_step_m();
    let m = scenario.num_gts();
    if t >= tour.flight_time_slots {
        let spare = t - tour.flight_time_slots;
        let hover: Vec<usize> = (0..m).map(|i| spare / m + usize::from(i < spare % m)).collect();
        return Ok(tour_with_hover(tour, d, &hover));
    }
    let fits = |r: f64| slots_for_length(path_length(&shrink_waypoints(tour, r)), d) <= t;
    let q0 = scenario.params.initial_position_m;
    let r_max = tour.waypoints.iter().map(|w| w.dist(q0)).fold(0.0, f64::max);
    let path = if fits(r_max) {
        let (mut lo, mut hi) = (0.0, r_max);
        while hi - lo > 1e-6 * r_max.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        shrink_waypoints(tour, hi)
    } else {
        vec![q0; 2]
    };
    let len = path_length(&path);
    let (pts, _) = sample_path(&path, len / (t - 1) as f64, t);
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EhParams, GroundTerminal, SystemParams};

    fn scenario(gts: &[(f64, f64)]) -> Scenario {
        Scenario::new(
            SystemParams::reference(),
            EhParams::reference(),
            gts.iter()
                .map(|&(x, y)| GroundTerminal {
                    position_m: Point2::new(x, y),
                    demand_bits: 1000.0,
                })
                .collect(),
        )
        .unwrap()
    }

    fn check_feasible(sc: &Scenario, pts: &[Point2], t: usize) {
        assert_eq!(pts.len(), t);
        assert_eq!(pts[0], sc.params.initial_position_m);
        assert_eq!(pts[t - 1], sc.params.initial_position_m);
        for w in pts.windows(2) {
            assert!(w[0].dist(w[1]) <= sc.params.max_step_m() + 1e-9, "step {}", w[0].dist(w[1]));
        }
    }

    #[test]
    fn single_terminal_tour() {
        let sc = scenario(&[(70.0, 0.0)]);
        let tour = solve_tsp(&sc, 1);
        assert!((tour.length_m - 140.0).abs() < 1e-12);
        assert_eq!(tour.flight_time_slots, 5);
        assert_eq!(tour.order, vec![0]);
    }

    #[test]
    fn square_tour_is_perimeter() {
        let sc = scenario(&[(50.0, 50.0), (-50.0, -50.0), (50.0, -50.0), (-50.0, 50.0)]);
        let tour = solve_tsp(&sc, 3);
        // Brute force over all orders.
        let pts: Vec<Point2> = sc.gts.iter().map(|g| g.position_m).collect();
        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3];
        permute(&mut perm, 0, &mut |p| {
            let mut path = vec![Point2::ORIGIN];
            path.extend(p.iter().map(|&i| pts[i]));
            path.push(Point2::ORIGIN);
            best = best.min(path_length(&path));
        });
        assert!((tour.length_m - best).abs() < 1e-9);
        assert_eq!(solve_tsp(&sc, 3), tour);
    }

    fn permute(a: &mut [usize; 4], k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == a.len() {
            f(a);
            return;
        }
        for i in k..a.len() {
            a.swap(k, i);
            permute(a, k + 1, f);
            a.swap(k, i);
        }
    }

    #[test]
    fn exact_flight_time_has_no_hover() {
        let sc = scenario(&[(60.0, 20.0), (-30.0, 80.0), (10.0, -90.0)]);
        let tour = solve_tsp(&sc, 0);
        let t = tour.flight_time_slots;
        let pts = initial_trajectory(&sc, t, 0).unwrap();
        check_feasible(&sc, &pts, t);
        for w in pts.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn hover_slots_are_spread_evenly() {
        let sc = scenario(&[(60.0, 20.0), (-30.0, 80.0), (10.0, -90.0)]);
        let tour = solve_tsp(&sc, 0);
        for extra in [3usize, 7, 20] {
            let t = tour.flight_time_slots + extra;
            let pts = initial_trajectory(&sc, t, 0).unwrap();
            check_feasible(&sc, &pts, t);
            let counts: Vec<usize> = tour.waypoints[1..=3]
                .iter()
                .map(|w| pts.iter().filter(|p| *p == w).count())
                .collect();
            let hover: Vec<usize> = counts.iter().map(|&c| c.saturating_sub(0)).collect();
            let lo = *hover.iter().min().unwrap();
            let hi = *hover.iter().max().unwrap();
            assert!(hi - lo <= 1, "{hover:?}");
            assert!(hover.iter().sum::<usize>() >= extra);
            if extra == 3 {
                assert!(counts.iter().all(|&c| c >= 1));
            }
            // Remainder goes to the earliest-visited terminals.
            assert!(hover.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn one_terminal_shrink_is_on_segment() {
        let sc = scenario(&[(100.0, 0.0)]);
        let tour = solve_tsp(&sc, 0);
        let w = shrink_waypoints(&tour, 30.0);
        assert!((w[1].x - 70.0).abs() < 1e-6 && w[1].y.abs() < 1e-9, "{w:?}");
        assert_eq!(shrink_waypoints(&tour, 0.0), tour.waypoints);
    }

    #[test]
    fn collinear_short_horizon() {
        let sc = scenario(&[(100.0, 0.0), (200.0, 0.0)]);
        let tour = solve_tsp(&sc, 0);
        assert_eq!(tour.flight_time_slots, 13);
        let t = 9;
        let pts = initial_trajectory(&sc, t, 0).unwrap();
        check_feasible(&sc, &pts, t);
        assert!(pts.iter().all(|p| p.y.abs() < 1e-9));
        // The far waypoint is pulled back toward the start by r.
        let reach = pts.iter().map(|p| p.x).fold(0.0, f64::max);
        assert!(reach < 200.0 && reach >= 200.0 - 60.0 - 1e-3, "{reach}");
    }

    #[test]
    fn flight_time_non_increasing_in_radius() {
        let sc = scenario(&[(60.0, 20.0), (-30.0, 80.0), (10.0, -90.0), (120.0, -40.0)]);
        let tour = solve_tsp(&sc, 4);
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let len = path_length(&shrink_waypoints(&tour, i as f64 * 2.5));
            assert!(len <= prev + 1e-6, "r={} {len} > {prev}", i as f64 * 2.5);
            prev = len;
        }
    }

    #[test]
    fn minimum_horizon() {
        let sc = scenario(&[(60.0, 20.0)]);
        assert!(initial_trajectory(&sc, 1, 0).is_err());
        let pts = initial_trajectory(&sc, 2, 0).unwrap();
        assert_eq!(pts, vec![Point2::ORIGIN; 2]);
        let pts = initial_trajectory(&sc, 3, 0).unwrap();
        check_feasible(&sc, &pts, 3);
    }
}
