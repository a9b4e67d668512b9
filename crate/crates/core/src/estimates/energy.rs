use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{boundary_l2, grad_l2_sq, l2_sq, BoundaryFlux, ExteriorGrid, FieldTrajectory};
use crate::geometry::discretize;
use crate::pointsource::PointModel;

/// `û(·, t)` at every grid node.
///
/// The source part depends on `|x|` only and is evaluated once per distinct grid radius.
pub fn uhat_on_grid(model: &PointModel, grid: &ExteriorGrid, t: f64) -> Result<Vec<f64>> {
    let points = grid.points();
    let r2: Vec<f64> = (0..grid.n_r())
        .flat_map(|i| (0..grid.n_theta()).map(move |j| (i, j)))
        .map(|(i, j)| grid.radius(i, j).powi(2))
        .collect();
    let mut conv: HashMap<u64, f64> = HashMap::new();
    if !model.phibar.is_zero() && t > 0.0 {
        let mut keys: Vec<u64> = r2.iter().map(|v| v.to_bits()).collect();
        keys.sort_unstable();
        keys.dedup();
        for k in &keys {
            if f64::from_bits(*k) < model.r_min * model.r_min {
                return Err(Error::Domain("grid node inside the source exclusion radius".into()));
            }
        }
        let vals: Vec<f64> = keys
            .par_iter()
            .map(|k| model.convolution(f64::from_bits(*k), t).value.value)
            .collect();
        conv = keys.into_iter().zip(vals).collect();
    }
    Ok(points
        .iter()
        .zip(&r2)
        .map(|(x, r2)| model.u0.eval(*x, t, model.params) + conv.get(&r2.to_bits()).copied().unwrap_or(0.0))
        .collect())
}

/// Norms of `w = u − û` at one stamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// `‖w‖²_{L²(Ω)}`.
    pub l2_sq: f64,
    /// `‖∇w‖²_{L²(Ω)}`.
    pub grad_sq: f64,
    /// `‖w‖²_{L²(Γ)}`.
    pub gamma_sq: f64,
    /// `∫_Γ w (φ − d∇û·n)`.
    pub boundary_term: f64,
}

impl Snapshot {
    pub fn h1_sq(&self) -> f64 {
        self.l2_sq + self.grad_sq
    }

    /// Norms of a field `w` given on `grid` (no flux term).
    pub fn from_field(time: f64, w: &[f64], grid: &ExteriorGrid) -> Self {
        let gamma = boundary_l2(&w[..grid.n_theta()], grid);
        Self {
            time,
            l2_sq: l2_sq(w, grid),
            grad_sq: grad_l2_sq(w, grid),
            gamma_sq: gamma * gamma,
            boundary_term: 0.0,
        }
    }
}

/// Snapshots of `w = u − û` at every stamp of `traj`.
pub fn error_snapshots(
    traj: &FieldTrajectory,
    model: &PointModel,
    flux: &BoundaryFlux,
    grid: &ExteriorGrid,
) -> Result<Vec<Snapshot>> {
    if traj.n_r != grid.n_r() || traj.n_theta != grid.n_theta() {
        return Err(Error::Precondition("trajectory and grid shapes differ".into()));
    }
    let nt = grid.n_theta();
    let disc = discretize(grid.curve(), nt)?;
    let bw = grid.boundary_weights();
    traj.times
        .iter()
        .zip(&traj.fields)
        .map(|(&t, u)| {
            let uh = uhat_on_grid(model, grid, t)?;
            let w: Vec<f64> = u.iter().zip(&uh).map(|(a, b)| a - b).collect();
            let mut s = Snapshot::from_field(t, &w, grid);
            let phi = flux.at_nodes(nt, t)?;
            let model_flux = model.flux_on_curve(&disc, t)?;
            s.boundary_term = (0..nt).map(|j| bw[j] * w[j] * (phi[j] - model_flux[j])).sum();
            Ok(s)
        })
        .collect()
}

/// Terms of `½ d/dt‖w‖² + d‖∇w‖² = ∫_Γ w(φ − d∇û·n)` at one interior stamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub time: f64,
    pub rate: f64,
    pub dissipation: f64,
    pub boundary: f64,
    pub residual: f64,
    /// Largest magnitude among the three terms.
    pub scale: f64,
}

/// Energy terms at interior stamps, with centred differences in time.
pub fn energy_terms(snaps: &[Snapshot], d: f64) -> Vec<EnergyTerms> {
    (1..snaps.len().saturating_sub(1))
        .map(|k| {
            let (a, b) = (&snaps[k - 1], &snaps[k + 1]);
            let rate = 0.5 * (b.l2_sq - a.l2_sq) / (b.time - a.time);
            let s = &snaps[k];
            let dissipation = d * s.grad_sq;
            let boundary = s.boundary_term;
            EnergyTerms {
                time: s.time,
                rate,
                dissipation,
                boundary,
                residual: (rate + dissipation - boundary).abs(),
                scale: rate.abs().max(dissipation).max(boundary.abs()),
            }
        })
        .collect()
}

pub fn energy_identity_residual(
    traj: &FieldTrajectory,
    model: &PointModel,
    flux: &BoundaryFlux,
    grid: &ExteriorGrid,
) -> Result<Vec<EnergyTerms>> {
    let snaps = error_snapshots(traj, model, flux, grid)?;
    Ok(energy_terms(&snaps, model.params.d()))
}

/// `max_k ‖w_k‖_{L²(Γ)} / ‖w_k‖_{H¹(Ω)}` over nonzero snapshots.
pub fn trace_constant(snaps: &[Snapshot]) -> Result<f64> {
    let best = snaps
        .iter()
        .filter(|s| s.h1_sq() > 0.0)
        .map(|s| (s.gamma_sq / s.h1_sq()).sqrt())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    best.ok_or_else(|| Error::Precondition("trace constant undefined: every snapshot is zero".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;
    use crate::green::HeatKernelParams;
    use crate::pointsource::{GaussianMixture, TimeSignal};
    use std::f64::consts::PI;

    #[test]
    fn constant_field_trace_ratio() {
        let grid = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 12.0, 41, 32).unwrap();
        let s = Snapshot::from_field(0.0, &vec![3.0; grid.n_nodes()], &grid);
        let c = trace_constant(&[s]).unwrap();
        let want = (2.0 * PI / (PI * 143.0)).sqrt();
        assert!((c - want).abs() < 1e-9 * want);
        let s2 = Snapshot::from_field(0.0, &vec![-7.0; grid.n_nodes()], &grid);
        assert!((trace_constant(&[s2]).unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn zero_snapshots_are_flagged() {
        let grid = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 12.0, 11, 16).unwrap();
        let s = Snapshot::from_field(0.0, &vec![0.0; grid.n_nodes()], &grid);
        assert!(trace_constant(&[s]).is_err());
    }

    #[test]
    fn grid_sampling_matches_pointwise() {
        let grid = ExteriorGrid::new(BoundaryCurve::ellipse(1.5, 1.0).unwrap(), 8.0, 9, 16).unwrap();
        let model = PointModel::new(
            GaussianMixture::single(0.5, [0.2, 0.1], 0.3).unwrap(),
            TimeSignal::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap(),
            HeatKernelParams::new(0.7).unwrap(),
        );
        let v = uhat_on_grid(&model, &grid, 0.8).unwrap();
        for (k, x) in grid.points().iter().enumerate().step_by(7) {
            let want = model.eval_uhat(*x, 0.8).unwrap();
            assert!((v[k] - want).abs() < 1e-12 * want.abs() + 1e-18);
        }
    }
}
