//! Full problem: diffusion outside the object with prescribed boundary flux,
//! truncated to an annulus with a homogeneous Dirichlet outer edge.

mod banded;
pub mod export;
mod grid;
mod radial;

use serde::{Deserialize, Serialize};

pub use banded::{BandLu, BandMatrix};
pub use grid::{ExteriorGrid, GridSpec, Metric, DEFAULT_OUTER_FACTOR};
pub use radial::{solve_radial_oracle, RadialTrajectory};

use crate::error::{Error, Result};
use crate::green::HeatKernelParams;
use crate::pointsource::{GaussianMixture, TimeSignal};

/// Spatial factor `g` of a separable flux `φ = g(x)·f(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluxProfile {
    Constant(f64),
    /// Values at the equispaced angle nodes; the node count must match its consumer.
    Nodal(Vec<f64>),
}

/// Separable boundary flux `φ(x, t) = g(x)·f(t)`; positive values push mass into the exterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFlux {
    pub profile: FluxProfile,
    pub signal: TimeSignal,
}

impl BoundaryFlux {
    pub fn new(profile: FluxProfile, signal: TimeSignal) -> Self {
        Self { profile, signal }
    }

    /// Constant-in-space, constant-in-time flux density.
    pub fn constant(value: f64) -> Self {
        Self::new(FluxProfile::Constant(value), TimeSignal::constant(1.0))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.signal.is_zero()
            || match &self.profile {
                FluxProfile::Constant(v) => *v == 0.0,
                FluxProfile::Nodal(v) => v.iter().all(|x| *x == 0.0),
            }
    }

    /// `g` at `n` equispaced angle nodes.
    pub fn profile_values(&self, n: usize) -> Result<Vec<f64>> {
        match &self.profile {
            FluxProfile::Constant(v) => Ok(vec![*v; n]),
            FluxProfile::Nodal(v) if v.len() == n => Ok(v.clone()),
            FluxProfile::Nodal(v) => Err(Error::Precondition(format!(
                "flux profile has {} values but {n} boundary nodes are in use",
                v.len()
            ))),
        }
    }

    /// `φ(·, t)` at `n` equispaced angle nodes.
    pub fn at_nodes(&self, n: usize, t: f64) -> Result<Vec<f64>> {
        let f = self.signal.eval(t);
        Ok(self.profile_values(n)?.into_iter().map(|g| g * f).collect())
    }
}

/// Time-stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    pub horizon: f64,
    pub n_steps: usize,
    /// A stamp is recorded every `stamp_every` steps (and at t = 0).
    pub stamp_every: usize,
    /// Replace the first two Crank–Nicolson steps by four backward-Euler half steps.
    #[serde(default = "yes")]
    pub rannacher: bool,
}

fn yes() -> bool {
    true
}

impl SolveOptions {
    pub fn new(horizon: f64, n_steps: usize, stamp_every: usize) -> Self {
        Self {
            horizon,
            n_steps,
            stamp_every,
            rannacher: true,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn stamps(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps / self.stamp_every)
            .map(|k| (k * self.stamp_every) as f64 * dt)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.n_steps == 0 || self.stamp_every == 0 {
            return Err(Error::Precondition("horizon, n_steps and stamp_every must be positive".into()));
        }
        if self.n_steps % self.stamp_every != 0 {
            return Err(Error::Precondition(format!(
                "n_steps {} is not a multiple of stamp_every {}",
                self.n_steps, self.stamp_every
            )));
        }
        Ok(())
    }
}

/// Grid solution sampled at output stamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTrajectory {
    pub n_r: usize,
    pub n_theta: usize,
    pub times: Vec<f64>,
    /// Full grid fields, outer row included, in grid storage order.
    pub fields: Vec<Vec<f64>>,
    /// Values on the inner boundary row.
    pub gamma_trace: Vec<Vec<f64>>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub mass: Vec<f64>,
}

impl FieldTrajectory {
    /// Trajectory from sampled grid fields; norms are computed on `grid`.
    pub fn from_fields(grid: &ExteriorGrid, times: Vec<f64>, fields: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != fields.len() || fields.iter().any(|f| f.len() != grid.n_nodes()) {
            return Err(Error::Precondition("field count or size does not match the grid".into()));
        }
        let mut traj = Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            times: Vec::new(),
            fields: Vec::new(),
            gamma_trace: Vec::new(),
            l2: Vec::new(),
            h1: Vec::new(),
            mass: Vec::new(),
        };
        for (t, f) in times.into_iter().zip(fields) {
            traj.push(grid, t, f);
        }
        Ok(traj)
    }

    fn push(&mut self, grid: &ExteriorGrid, t: f64, field: Vec<f64>) {
        let (l2, h1) = field_h1_l2_norms(&field, grid);
        self.times.push(t);
        self.gamma_trace.push(field[..grid.n_theta()].to_vec());
        self.mass.push(field_mass(&field, grid));
        self.l2.push(l2);
        self.h1.push(h1);
        self.fields.push(field);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Semi-discrete operator `du/dt = d·(L u + b·f(t))` on the unknown rows `i < n_r − 1`.
struct Operator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    forcing: Vec<f64>,
}

impl Operator {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                acc += self.vals[p] * u[self.cols[p]];
            }
            *o = acc;
        }
    }
}

/// Conservative nine-point discretisation of `J·Δu = ∂_s(A u_s + B u_θ) + ∂_θ(B u_s + C u_θ)`
/// with `A = J g^{ss}`, `B = J g^{sθ}`, `C = J g^{θθ}`, a ghost row for the flux condition
/// and a Dirichlet outer row.
fn assemble(grid: &ExteriorGrid, profile: &[f64], d: f64) -> Operator {
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let (ds, dt) = (grid.ds(), grid.dtheta());
    let n = (nr - 1) * nt;
    let wrap = |j: isize| ((j + nt as isize) % nt as isize) as usize;
    // Ghost: u_{-1,k} = u_{1,k} + γ_k (u_{0,k+1} − u_{0,k−1}) + h_k g_k f(t).
    let ghost: Vec<(f64, f64)> = (0..nt)
        .map(|k| {
            let m = grid.metric(0, k);
            (ds * (m.gst / m.gss) / dt, 2.0 * ds / (d * m.gss.sqrt()))
        })
        .collect();
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut forcing = vec![0.0; n];
    let mut terms: Vec<(isize, usize, f64)> = Vec::with_capacity(16);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(16);
    for i in 0..nr - 1 {
        let s = grid.s(i);
        for j in 0..nt {
            terms.clear();
            let ii = i as isize;
            let jm = wrap(j as isize - 1);
            let jp = wrap(j as isize + 1);
            let mp = grid.metric_at(s + 0.5 * ds, j);
            let mm = grid.metric_at(s - 0.5 * ds, j);
            let th = grid.theta(j);
            let cp = grid.metric_theta(s, th + 0.5 * dt);
            let cm = grid.metric_theta(s, th - 0.5 * dt);
            let a_plus = mp.jac * mp.gss / (ds * ds);
            let a_minus = mm.jac * mm.gss / (ds * ds);
            let c_plus = cp.jac * cp.gtt / (dt * dt);
            let c_minus = cm.jac * cm.gtt / (dt * dt);
            terms.push((ii + 1, j, a_plus));
            terms.push((ii - 1, j, a_minus));
            terms.push((ii, jp, c_plus));
            terms.push((ii, jm, c_minus));
            terms.push((ii, j, -(a_plus + a_minus + c_plus + c_minus)));
            let k = 1.0 / (4.0 * ds * dt);
            let b = |s: f64, jj: usize| {
                let m = grid.metric_at(s, jj);
                m.jac * m.gst * k
            };
            let (b_ip, b_im, b_jp, b_jm) = (b(s + ds, j), b(s - ds, j), b(s, jp), b(s, jm));
            if b_ip != 0.0 || b_im != 0.0 || b_jp != 0.0 || b_jm != 0.0 {
                terms.push((ii + 1, jp, b_ip + b_jp));
                terms.push((ii + 1, jm, -b_ip - b_jm));
                terms.push((ii - 1, jp, -b_im - b_jp));
                terms.push((ii - 1, jm, b_im + b_jm));
            }
            let inv_j = 1.0 / grid.metric(i, j).jac;
            let row_index = i * nt + j;
            row.clear();
            for &(ti, tj, c) in &terms {
                let c = c * inv_j;
                if ti == nr as isize - 1 {
                    continue;
                }
                if ti == -1 {
                    let (gamma, h) = ghost[tj];
                    row.push((nt + tj, c));
                    row.push((wrap(tj as isize + 1), c * gamma));
                    row.push((wrap(tj as isize - 1), -c * gamma));
                    forcing[row_index] += c * h * profile[tj];
                } else {
                    row.push((ti as usize * nt + tj, c));
                }
            }
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(col, v) in &row {
                if col == last {
                    *vals.last_mut().expect("entry") += v;
                } else {
                    cols.push(col);
                    vals.push(v);
                    last = col;
                }
            }
            row_ptr.push(cols.len());
        }
    }
    Operator {
        n,
        row_ptr,
        cols,
        vals,
        forcing,
    }
}

/// Interleaves angles `0, n−1, 1, n−2, …` so periodic neighbours stay close.
fn fold_positions(nt: usize) -> Vec<usize> {
    (0..nt)
        .map(|j| if 2 * j < nt { 2 * j } else { 2 * (nt - 1 - j) + 1 })
        .collect()
}

/// `I − α L` in folded band form, factored.
fn factor_system(op: &Operator, nt: usize, alpha: f64) -> Result<(BandLu, Vec<usize>)> {
    let pos = fold_positions(nt);
    let perm: Vec<usize> = (0..op.n).map(|k| (k / nt) * nt + pos[k % nt]).collect();
    let mut bw = 0usize;
    for k in 0..op.n {
        for p in op.row_ptr[k]..op.row_ptr[k + 1] {
            bw = bw.max(perm[k].abs_diff(perm[op.cols[p]]));
        }
    }
    let mut m = BandMatrix::zeros(op.n, bw, bw);
    for k in 0..op.n {
        m.add(perm[k], perm[k], 1.0);
        for p in op.row_ptr[k]..op.row_ptr[k + 1] {
            m.add(perm[k], perm[op.cols[p]], -alpha * op.vals[p]);
        }
    }
    let lu = m.factor().map_err(|reason| Error::Solver { step: 0, reason })?;
    Ok((lu, perm))
}

/// Crank–Nicolson solution of the full problem on `grid`.
///
/// The initial field is the mixture restricted to the grid; the outer row is
/// held at zero. Stamps are taken every `opts.stamp_every` steps.
pub fn solve_full(
    grid: &ExteriorGrid,
    u0: &GaussianMixture,
    flux: &BoundaryFlux,
    opts: &SolveOptions,
    params: HeatKernelParams,
) -> Result<FieldTrajectory> {
    opts.validate()?;
    let d = params.d();
    let diam = grid.curve().diameter();
    if opts.dt() > 0.1 * diam * diam / d {
        return Err(Error::Precondition(format!(
            "time step {} exceeds 0.1 × diameter²/d = {}",
            opts.dt(),
            0.1 * diam * diam / d
        )));
    }
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let profile = flux.profile_values(nt)?;
    let op = assemble(grid, &profile, d);
    let dt = opts.dt();
    let alpha = 0.5 * dt * d;
    let (lu, perm) = factor_system(&op, nt, alpha)?;

    let points = grid.points();
    let mut u: Vec<f64> = points.iter().map(|x| u0.eval(*x, 0.0, params)).collect();
    for v in &mut u[(nr - 1) * nt..] {
        *v = 0.0;
    }
    let mut traj = FieldTrajectory {
        n_r: nr,
        n_theta: nt,
        times: Vec::new(),
        fields: Vec::new(),
        gamma_trace: Vec::new(),
        l2: Vec::new(),
        h1: Vec::new(),
        mass: Vec::new(),
    };
    traj.push(grid, 0.0, u.clone());

    let n = op.n;
    let mut lu_buf = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let solve = |rhs: &mut Vec<f64>, step: usize| -> Result<()> {
        let mut b = vec![0.0; n];
        for k in 0..n {
            b[perm[k]] = rhs[k];
        }
        lu.solve(&mut b);
        for k in 0..n {
            rhs[k] = b[perm[k]];
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                step,
                reason: "non-finite solution".into(),
            });
        }
        Ok(())
    };
    let f = |t: f64| flux.signal.eval(t);
    let startup = if opts.rannacher { 2.min(opts.n_steps) } else { 0 };
    for step in 0..opts.n_steps {
        let t0 = dt * step as f64;
        let t1 = dt * (step + 1) as f64;
        if step < startup {
            for half in 1..=2 {
                let th = t0 + 0.5 * dt * half as f64;
                for k in 0..n {
                    rhs[k] = u[k] + alpha * f(th) * op.forcing[k];
                }
                solve(&mut rhs, step)?;
                u[..n].copy_from_slice(&rhs);
            }
        } else {
            op.apply(&u, &mut lu_buf);
            let (f0, f1) = (f(t0), f(t1));
            for k in 0..n {
                rhs[k] = u[k] + alpha * lu_buf[k] + alpha * (f0 + f1) * op.forcing[k];
            }
            solve(&mut rhs, step)?;
            u[..n].copy_from_slice(&rhs);
        }
        if (step + 1) % opts.stamp_every == 0 {
            traj.push(grid, t1, u.clone());
        }
    }
    Ok(traj)
}

/// `∂_s u` on every node: centred inside, one-sided second order on both edges.
fn d_s(field: &[f64], grid: &ExteriorGrid, i: usize, j: usize) -> f64 {
    let (nr, ds) = (grid.n_r(), grid.ds());
    let at = |i: usize| field[grid.index(i, j)];
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * ds)
    } else if i == nr - 1 {
        (3.0 * at(nr - 1) - 4.0 * at(nr - 2) + at(nr - 3)) / (2.0 * ds)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * ds)
    }
}

fn d_theta(field: &[f64], grid: &ExteriorGrid, i: usize, j: usize) -> f64 {
    let nt = grid.n_theta();
    let (jp, jm) = ((j + 1) % nt, (j + nt - 1) % nt);
    (field[grid.index(i, jp)] - field[grid.index(i, jm)]) / (2.0 * grid.dtheta())
}

/// `|∇u|²` at every node.
pub fn gradient_sq(field: &[f64], grid: &ExteriorGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n_nodes());
    for i in 0..grid.n_r() {
        for j in 0..grid.n_theta() {
            let m = grid.metric(i, j);
            let (us, ut) = (d_s(field, grid, i, j), d_theta(field, grid, i, j));
            out.push(m.gss * us * us + 2.0 * m.gst * us * ut + m.gtt * ut * ut);
        }
    }
    out
}

/// `∫_Ω u²` by the grid trapezoid rule.
pub fn l2_sq(field: &[f64], grid: &ExteriorGrid) -> f64 {
    grid.weights().iter().zip(field).map(|(w, u)| w * u * u).sum()
}

/// `∫_Ω |∇u|²`.
pub fn grad_l2_sq(field: &[f64], grid: &ExteriorGrid) -> f64 {
    grid.weights().iter().zip(gradient_sq(field, grid)).map(|(w, g)| w * g).sum()
}

/// `(‖u‖_{L²(Ω)}, ‖u‖_{H¹(Ω)})`.
pub fn field_h1_l2_norms(field: &[f64], grid: &ExteriorGrid) -> (f64, f64) {
    let l2 = l2_sq(field, grid);
    let g2 = grad_l2_sq(field, grid);
    (l2.sqrt(), (l2 + g2).sqrt())
}

/// `∫_Ω u`.
pub fn field_mass(field: &[f64], grid: &ExteriorGrid) -> f64 {
    grid.weights().iter().zip(field).map(|(w, u)| w * u).sum()
}

/// `‖v‖_{L²(Γ)}` for values on the inner row.
pub fn boundary_l2(values: &[f64], grid: &ExteriorGrid) -> f64 {
    grid.boundary_weights()
        .iter()
        .zip(values)
        .map(|(w, v)| w * v * v)
        .sum::<f64>()
        .sqrt()
}

/// Outflow `−d ∮ u_r R_∞ dθ` through the outer circle.
pub fn outer_outflow(field: &[f64], grid: &ExteriorGrid, params: HeatKernelParams) -> f64 {
    let nr = grid.n_r();
    let sum: f64 = (0..grid.n_theta())
        .map(|j| {
            let l = grid.r_inf() - grid.rho(j);
            d_s(field, grid, nr - 1, j) / l
        })
        .sum();
    -params.d() * sum * grid.r_inf() * grid.dtheta()
}

/// `|dm/dt − ∫_Γ φ + outflow|` per stamp, with second-order differences in time.
pub fn mass_balance_residual(
    traj: &FieldTrajectory,
    flux: &BoundaryFlux,
    grid: &ExteriorGrid,
    params: HeatKernelParams,
) -> Result<Vec<f64>> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::Precondition("mass balance needs at least three stamps".into()));
    }
    let g = flux.profile_values(grid.n_theta())?;
    let g_total: f64 = g.iter().zip(grid.boundary_weights()).map(|(a, w)| a * w).sum();
    let t = &traj.times;
    let m = &traj.mass;
    (0..n)
        .map(|k| {
            let dm = if k == 0 {
                let h = t[1] - t[0];
                (-3.0 * m[0] + 4.0 * m[1] - m[2]) / (2.0 * h)
            } else if k == n - 1 {
                let h = t[n - 1] - t[n - 2];
                (3.0 * m[n - 1] - 4.0 * m[n - 2] + m[n - 3]) / (2.0 * h)
            } else {
                (m[k + 1] - m[k - 1]) / (t[k + 1] - t[k - 1])
            };
            let influx = g_total * flux.signal.eval(t[k]);
            let out = outer_outflow(&traj.fields[k], grid, params);
            Ok((dm - influx + out).abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;

    fn p1() -> HeatKernelParams {
        HeatKernelParams::new(1.0).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let grid = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 6.0, 11, 16).unwrap();
        let tr = solve_full(&grid, &GaussianMixture::empty(), &BoundaryFlux::zero(), &SolveOptions::new(0.4, 4, 2), p1())
            .unwrap();
        assert_eq!(tr.times.len(), 3);
        assert!(tr.fields.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_field_norms() {
        let grid = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 12.0, 41, 32).unwrap();
        let field = vec![2.0; grid.n_nodes()];
        let (l2, h1) = field_h1_l2_norms(&field, &grid);
        let area = std::f64::consts::PI * 143.0;
        assert!((l2 - 2.0 * area.sqrt()).abs() < 1e-8 * l2);
        assert!((h1 - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn fold_keeps_neighbours_close() {
        let pos = fold_positions(9);
        for j in 0..9 {
            assert!(pos[j].abs_diff(pos[(j + 1) % 9]) <= 2);
        }
        let mut sorted = pos.clone();
        sorted.sort();
        assert_eq!(sorted, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn profile_length_is_checked() {
        let f = BoundaryFlux::new(FluxProfile::Nodal(vec![1.0; 5]), TimeSignal::constant(1.0));
        assert!(f.profile_values(8).is_err());
        assert_eq!(f.at_nodes(5, 3.0).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn oversized_step_rejected() {
        let grid = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 6.0, 11, 16).unwrap();
        let r = solve_full(&grid, &GaussianMixture::empty(), &BoundaryFlux::zero(), &SolveOptions::new(4.0, 2, 1), p1());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
