use serde::{Deserialize, Serialize};

use super::energy::{energy_terms, error_snapshots, trace_constant, EnergyTerms};
use super::theorem::{verify_main_theorem, TheoremInputs, TheoremReport};
use super::{c_gamma, c_star, c_star_upper_bound, BoundTerms};
use crate::error::Result;
use crate::exterior::{BoundaryFlux, ExteriorGrid, FieldTrajectory};
use crate::geometry::discretize;
use crate::pointsource::PointModel;

/// Version of the serialized [`BoundReport`] layout.
pub const REPORT_SCHEMA: u32 = 1;

/// Everything measured when a full trajectory is compared with the point model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub times: Vec<f64>,
    pub c_star: Vec<f64>,
    pub c_star_bound: Vec<f64>,
    pub bound_terms: Vec<BoundTerms>,
    pub c_gamma: f64,
    pub p: f64,
    pub trace_constant: f64,
    pub l2_err_sq: Vec<f64>,
    pub h1_err_sq: Vec<f64>,
    pub theorem: TheoremReport,
    pub energy: Vec<EnergyTerms>,
    pub c_star_monotone: bool,
    pub bound_dominates: bool,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.c_star_monotone && self.bound_dominates && self.theorem.pass
    }

    /// Largest `residual / scale` of the energy identity.
    pub fn max_energy_ratio(&self) -> f64 {
        self.energy
            .iter()
            .filter(|e| e.scale > 0.0)
            .map(|e| e.residual / e.scale)
            .fold(0.0, f64::max)
    }
}

/// Builds the full report at the stamps of `traj`.
pub fn bound_report(
    traj: &FieldTrajectory,
    grid: &ExteriorGrid,
    flux: &BoundaryFlux,
    model: &PointModel,
    p: f64,
    epsilon_grid: &[f64],
    slack: f64,
) -> Result<BoundReport> {
    let disc = discretize(grid.curve(), grid.n_theta())?;
    let snaps = error_snapshots(traj, model, flux, grid)?;
    let c = trace_constant(&snaps)?;
    let star = c_star(&disc, flux, model, &traj.times)?;
    let terms = c_star_upper_bound(&disc, flux, model, p, &traj.times)?;
    let bound: Vec<f64> = terms.iter().map(|b| b.total).collect();
    let inputs = TheoremInputs {
        times: traj.times.clone(),
        l2_sq: snaps.iter().map(|s| s.l2_sq).collect(),
        h1_sq: snaps.iter().map(|s| s.h1_sq()).collect(),
        c_star: star.values.clone(),
        trace_constant: c,
        d: model.params.d(),
    };
    let theorem = verify_main_theorem(&inputs, epsilon_grid, slack)?;
    Ok(BoundReport {
        schema_version: REPORT_SCHEMA,
        c_star_monotone: star.values.windows(2).all(|w| w[1] >= w[0]),
        bound_dominates: star.values.iter().zip(&bound).all(|(a, b)| a <= b),
        times: traj.times.clone(),
        c_star: star.values,
        c_star_bound: bound,
        bound_terms: terms,
        c_gamma: c_gamma(&disc)?,
        p,
        trace_constant: c,
        l2_err_sq: inputs.l2_sq,
        h1_err_sq: inputs.h1_sq,
        theorem,
        energy: energy_terms(&snaps, model.params.d()),
    })
}
