//! Log-barrier interior-point method with damped Newton steps for
//! problems `min c·x  s.t.  g_i(x) <= 0` with smooth convex `g_i`.
//!
//! Infeasible starts go through a phase-I problem `min s  s.t.
//! g_i(x) <= s` that stops as soon as `s < 0`.

use nalgebra::{DMatrix, DVector};

/// Smooth convex inequality constraints `g_i(x) <= 0`.
pub trait ConvexConstraints {
    fn dim(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// Fill `out` with `g(x)`. Returns `false` if `x` lies outside the
    /// domain where the constraints may be evaluated.
    fn eval(&self, x: &[f64], out: &mut [f64]) -> bool;

    /// Accumulate `gw += Σ w_i ∇g_i`, `gv += Σ v_i ∇g_i` and
    /// `hess += Σ w_i ∇²g_i + Σ v_i ∇g_i ∇g_iᵀ`. All three arrive zeroed.
    fn derivatives(&self, x: &[f64], w: &[f64], v: &[f64], gw: &mut [f64], gv: &mut [f64], hess: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Initial barrier weight `μ` (the objective is multiplied by `1/μ`).
    pub mu0: f64,
    pub mu_factor: f64,
    /// Stop once the duality-gap bound `p μ` drops below this.
    pub gap_tol: f64,
    pub max_newton_per_stage: usize,
    pub max_total_newton: usize,
    /// Starts with some `g_i(x) >= -interior_margin` go through phase I,
    /// which then stops once every `g_i < -interior_margin`; a barrier
    /// started on the boundary barely moves.
    pub interior_margin: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            mu0: 1.0,
            mu_factor: 10.0,
            gap_tol: 1e-7,
            max_newton_per_stage: 60,
            max_total_newton: 600,
            interior_margin: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierStatus {
    Converged,
    /// Phase I could not find a strictly feasible point.
    NoInterior,
    /// Iteration budget ran out; the returned point is strictly feasible.
    IterationLimit,
    /// The start point could not be evaluated.
    BadStart,
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub x: Vec<f64>,
    pub status: BarrierStatus,
    pub newton_steps: usize,
    /// Largest constraint value at `x`.
    pub max_violation: f64,
}

/// Minimize `objective · x` over the strict interior, starting from `x0`.
pub fn minimize<P: ConvexConstraints>(
    problem: &P,
    objective: &[f64],
    x0: &[f64],
    opts: &BarrierOptions,
) -> BarrierResult {
    let p = problem.num_constraints();
    let mut c = vec![0.0; p];
    if !problem.eval(x0, &mut c) || c.iter().any(|v| !v.is_finite()) {
        return BarrierResult {
            x: x0.to_vec(),
            status: BarrierStatus::BadStart,
            newton_steps: 0,
            max_violation: f64::INFINITY,
        };
    }
    let worst = max_of(&c);
    let mut steps = 0;
    let mut x = x0.to_vec();
    if worst >= -opts.interior_margin {
        let phase1 = PhaseOne { inner: problem };
        let mut xs = x0.to_vec();
        xs.push(worst + 1.0);
        // A small share of the true objective keeps directions that only
        // loosen constraints (e.g. an epigraph variable) bounded.
        let mut obj: Vec<f64> = objective.iter().map(|c| PHASE1_OBJECTIVE_WEIGHT * c).collect();
        obj.push(1.0);
        let n = x0.len();
        let r = run(&phase1, &obj, xs, opts, |z| z[n] < -opts.interior_margin);
        steps += r.newton_steps;
        if r.x[n] >= 0.0 {
            let mut tmp = vec![0.0; p];
            problem.eval(&r.x[..n], &mut tmp);
            return BarrierResult {
                x: r.x[..n].to_vec(),
                status: BarrierStatus::NoInterior,
                newton_steps: steps,
                max_violation: max_of(&tmp),
            };
        }
        x = r.x[..n].to_vec();
    }
    let mut r = run(problem, objective, x, opts, |_| false);
    r.newton_steps += steps;
    r
}

const PHASE1_OBJECTIVE_WEIGHT: f64 = 1e-6;

fn max_of(c: &[f64]) -> f64 {
    c.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

struct PhaseOne<'a, P> {
    inner: &'a P,
}

impl<P: ConvexConstraints> ConvexConstraints for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> bool {
        let n = self.inner.dim();
        if !self.inner.eval(&x[..n], out) {
            return false;
        }
        for v in out.iter_mut() {
            *v -= x[n];
        }
        true
    }

    fn derivatives(&self, x: &[f64], w: &[f64], v: &[f64], gw: &mut [f64], gv: &mut [f64], hess: &mut DMatrix<f64>) {
        let n = self.inner.dim();
        let mut h = DMatrix::zeros(n, n);
        self.inner.derivatives(&x[..n], w, v, &mut gw[..n], &mut gv[..n], &mut h);
        hess.view_mut((0, 0), (n, n)).copy_from(&h);
        let sw: f64 = w.iter().sum();
        let sv: f64 = v.iter().sum();
        gw[n] = -sw;
        gv[n] = -sv;
        for i in 0..n {
            hess[(i, n)] = -gv[i];
            hess[(n, i)] = -gv[i];
        }
        hess[(n, n)] = sv;
    }
}

/// Barrier stages from a strictly feasible `x`.
fn run<P: ConvexConstraints>(
    problem: &P,
    objective: &[f64],
    mut x: Vec<f64>,
    opts: &BarrierOptions,
    stop: impl Fn(&[f64]) -> bool,
) -> BarrierResult {
    let n = problem.dim();
    let p = problem.num_constraints();
    let mut c = vec![0.0; p];
    let mut w = vec![0.0; p];
    let mut v = vec![0.0; p];
    let mut gw = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let mut hess = DMatrix::zeros(n, n);
    let mut trial = vec![0.0; n];
    let mut ct = vec![0.0; p];
    let mut mu = opts.mu0;
    let mut steps = 0;
    let mut status = BarrierStatus::IterationLimit;

    let merit = |x: &[f64], c: &[f64], t: f64| -> f64 {
        let lin: f64 = objective.iter().zip(x).map(|(a, b)| a * b).sum();
        t * lin - c.iter().map(|ci| (-ci).ln()).sum::<f64>()
    };

    problem.eval(&x, &mut c);
    'stages: loop {
        let t = 1.0 / mu;
        for _ in 0..opts.max_newton_per_stage {
            if steps >= opts.max_total_newton {
                break 'stages;
            }
            if stop(&x) {
                status = BarrierStatus::Converged;
                break 'stages;
            }
            for i in 0..p {
                w[i] = -1.0 / c[i];
                v[i] = w[i] * w[i];
            }
            gw.iter_mut().for_each(|g| *g = 0.0);
            gv.iter_mut().for_each(|g| *g = 0.0);
            hess.fill(0.0);
            problem.derivatives(&x, &w, &v, &mut gw, &mut gv, &mut hess);
            let grad = DVector::from_iterator(n, (0..n).map(|i| t * objective[i] + gw[i]));
            let Some(dx) = newton_direction(&hess, &grad) else {
                break;
            };
            let slope = grad.dot(&dx);
            steps += 1;
            if -slope / 2.0 <= 1e-10 || !slope.is_finite() || slope >= 0.0 {
                break;
            }
            let f0 = merit(&x, &c, t);
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..n {
                    trial[i] = x[i] + step * dx[i];
                }
                if problem.eval(&trial, &mut ct) && ct.iter().all(|&g| g < 0.0) {
                    let f1 = merit(&trial, &ct, t);
                    if f1 <= f0 + 0.25 * step * slope {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                log::trace!("line search stalled at mu={mu:e}, slope={slope:e}");
                break;
            }
            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut c, &mut ct);
        }
        log::trace!("barrier stage mu={mu:e} steps={steps} max g={:e}", max_of(&c));
        if stop(&x) {
            status = BarrierStatus::Converged;
            break;
        }
        if p as f64 * mu <= opts.gap_tol {
            status = BarrierStatus::Converged;
            break;
        }
        mu /= opts.mu_factor;
    }
    BarrierResult {
        max_violation: max_of(&c),
        x,
        status,
        newton_steps: steps,
    }
}

/// Solve `H d = -g` after symmetric diagonal equilibration, regularizing
/// until the Cholesky factorization succeeds.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = hess[(i, i)].abs();
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = hess.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let rhs = DVector::from_iterator(n, (0..n).map(|i| -grad[i] * scale[i]));
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        if reg > 0.0 {
            for i in 0..n {
                m[(i, i)] += reg;
            }
        }
        if let Some(ch) = m.cholesky() {
            let y = ch.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(DVector::from_iterator(n, (0..n).map(|i| y[i] * scale[i])));
            }
        }
        reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
    }
    None
}
