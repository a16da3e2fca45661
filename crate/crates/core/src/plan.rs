//! Trajectories, schedules and complete mission plans.
//!
//! The optimizer works on run-length encoded trajectories: block `k` holds
//! `weights[k]` consecutive slots that share one hover point and one
//! per-slot schedule row. With every weight equal to one this is the plain
//! slot-by-slot representation; long hover runs are compressed only when a
//! horizon would otherwise exceed the solver's block budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<Point2>,
    weights: Vec<usize>,
}

impl Trajectory {
    /// One block per slot.
    pub fn from_slots(points: Vec<Point2>) -> Self {
        let weights = vec![1; points.len()];
        Trajectory { points, weights }
    }

    pub fn from_blocks(points: Vec<Point2>, weights: Vec<usize>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} block points but {} block weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.contains(&0) {
            return Err(Error::Trajectory("block weights must be >= 1".into()));
        }
        Ok(Trajectory { points, weights })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn num_blocks(&self) -> usize {
        self.points.len()
    }

    /// Number of slots `T`.
    pub fn horizon(&self) -> usize {
        self.weights.iter().sum()
    }

    pub fn is_per_slot(&self) -> bool {
        self.weights.iter().all(|&w| w == 1)
    }

    pub fn expand(&self) -> Vec<Point2> {
        let mut out = Vec::with_capacity(self.horizon());
        for (&p, &w) in self.points.iter().zip(&self.weights) {
            out.extend(std::iter::repeat_n(p, w));
        }
        out
    }

    pub fn with_points(&self, points: Vec<Point2>) -> Result<Self> {
        Trajectory::from_blocks(points, self.weights.clone())
    }

    /// Run-length encode a per-slot trajectory into at most `max_blocks`
    /// blocks where possible. Distinct consecutive points are never merged,
    /// and the first and last slots always stay singleton blocks so the
    /// endpoint constraint remains a per-slot constraint. Each hover run is
    /// split into near-equal sub-blocks, with the block budget shared in
    /// proportion to run length.
    pub fn compress(points: &[Point2], max_blocks: usize) -> Trajectory {
        let t = points.len();
        if t <= max_blocks || t <= 2 {
            return Trajectory::from_slots(points.to_vec());
        }
        // Runs over the interior slots 1..t-1.
        let mut runs: Vec<(Point2, usize)> = Vec::new();
        for &p in &points[1..t - 1] {
            match runs.last_mut() {
                Some((q, n)) if *q == p => *n += 1,
                _ => runs.push((p, 1)),
            }
        }
        let singles = runs.iter().filter(|r| r.1 == 1).count();
        let long_total: usize = runs.iter().filter(|r| r.1 > 1).map(|r| r.1).sum();
        let long_runs = runs.len() - singles;
        let budget = max_blocks.saturating_sub(2 + singles).max(long_runs);

        let mut out_p = vec![points[0]];
        let mut out_w = vec![1];
        for (p, n) in runs {
            let pieces = if n == 1 {
                1
            } else {
                let share = (budget as f64 * n as f64 / long_total as f64).floor() as usize;
                share.clamp(1, n)
            };
            let base = n / pieces;
            let extra = n % pieces;
            for i in 0..pieces {
                out_p.push(p);
                out_w.push(base + usize::from(i < extra));
            }
        }
        out_p.push(points[t - 1]);
        out_w.push(1);
        Trajectory {
            points: out_p,
            weights: out_w,
        }
    }
}

/// Row-major matrix of per-slot time fractions: column 0 is the WPT share
/// `α0`, column `m` (1-based) is terminal `m`'s upload share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    num_gts: usize,
    data: Vec<f64>,
}

impl Schedule {
    pub fn zeros(rows: usize, num_gts: usize) -> Self {
        Schedule {
            num_gts,
            data: vec![0.0; rows * (num_gts + 1)],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_gts = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        let mut data = Vec::with_capacity(rows.len() * (num_gts + 1));
        for r in rows {
            if r.len() != num_gts + 1 {
                return Err(Error::Dimension("ragged schedule rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Schedule { num_gts, data })
    }

    pub fn num_rows(&self) -> usize {
        self.data.len() / (self.num_gts + 1)
    }

    pub fn num_gts(&self) -> usize {
        self.num_gts
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.num_gts + 1;
        &self.data[k * w..(k + 1) * w]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        let w = self.num_gts + 1;
        &mut self.data[k * w..(k + 1) * w]
    }

    /// `α0` of row `k`.
    pub fn wpt(&self, k: usize) -> f64 {
        self.row(k)[0]
    }

    /// Upload share of zero-based terminal `m` in row `k`.
    pub fn upload(&self, k: usize, m: usize) -> f64 {
        self.row(k)[m + 1]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.num_gts + 1)
    }

    /// Repeat block rows according to `weights`.
    pub fn expand(&self, weights: &[usize]) -> Schedule {
        let mut data = Vec::with_capacity(weights.iter().sum::<usize>() * (self.num_gts + 1));
        for (row, &w) in self.rows().zip(weights) {
            for _ in 0..w {
                data.extend_from_slice(row);
            }
        }
        Schedule {
            num_gts: self.num_gts,
            data,
        }
    }
}

/// A complete per-slot mission: `T` hover points and the `T × (M+1)`
/// schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub trajectory: Vec<Point2>,
    pub schedule: Schedule,
}

impl Plan {
    pub fn new(trajectory: Vec<Point2>, schedule: Schedule) -> Result<Self> {
        if trajectory.len() != schedule.num_rows() {
            return Err(Error::Dimension(format!(
                "trajectory has {} slots, schedule has {} rows",
                trajectory.len(),
                schedule.num_rows()
            )));
        }
        Ok(Plan {
            trajectory,
            schedule,
        })
    }

    pub fn from_blocks(traj: &Trajectory, schedule: &Schedule) -> Result<Self> {
        if traj.num_blocks() != schedule.num_rows() {
            return Err(Error::Dimension(format!(
                "{} trajectory blocks, {} schedule rows",
                traj.num_blocks(),
                schedule.num_rows()
            )));
        }
        Plan::new(traj.expand(), schedule.expand(traj.weights()))
    }

    pub fn horizon(&self) -> usize {
        self.trajectory.len()
    }
}
