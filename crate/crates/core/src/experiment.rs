//! One comparison experiment: geometry, data, discretization and bound settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{bound_report, BoundReport, DEFAULT_P};
use crate::exterior::{solve_full, BoundaryFlux, ExteriorGrid, FieldTrajectory, SolveOptions, DEFAULT_OUTER_FACTOR};
use crate::geometry::{discretize, min_radius, BoundaryCurve, CurveDiscretization};
use crate::green::HeatKernelParams;
use crate::pointsource::{GaussianMixture, PointModel, TimeSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub n_r: usize,
    pub n_theta: usize,
    /// Outer radius; `DEFAULT_OUTER_FACTOR × max radius` when absent.
    #[serde(default)]
    pub r_inf: Option<f64>,
    pub n_steps: usize,
    pub stamp_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_eps")]
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_p() -> f64 {
    DEFAULT_P
}

fn default_eps() -> Vec<f64> {
    vec![0.5, 1.0, 1.5]
}

fn default_slack() -> f64 {
    0.05
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            p: default_p(),
            epsilon_grid: default_eps(),
            slack: default_slack(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub curve: BoundaryCurve,
    pub d: f64,
    pub horizon: f64,
    pub grid: GridParams,
    #[serde(default)]
    pub u0: GaussianMixture,
    pub flux: BoundaryFlux,
    #[serde(default = "TimeSignal::zero")]
    pub phibar: TimeSignal,
    #[serde(default)]
    pub bounds: BoundParams,
}

impl Experiment {
    /// Unit circle, `d = 1`, `φ ≡ 1/(2π)`, `φ̄ ≡ 1`, `T = 4`, stamps every 0.1.
    pub fn reference() -> Self {
        Self {
            curve: BoundaryCurve::circle(1.0).expect("unit circle"),
            d: 1.0,
            horizon: 4.0,
            grid: GridParams {
                n_r: 201,
                n_theta: 32,
                r_inf: None,
                n_steps: 400,
                stamp_every: 10,
            },
            u0: GaussianMixture::empty(),
            flux: BoundaryFlux::constant(1.0 / (2.0 * std::f64::consts::PI)),
            phibar: TimeSignal::constant(1.0),
            bounds: BoundParams::default(),
        }
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if let Err(e) = self.curve.validate() {
            bad.push(format!("curve: {e}"));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            bad.push(format!("d: must be positive, got {}", self.d));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            bad.push(format!("horizon: must be positive, got {}", self.horizon));
        }
        let g = &self.grid;
        if g.n_r < 3 {
            bad.push("grid.n_r: must be at least 3".into());
        }
        if g.n_theta < 8 {
            bad.push("grid.n_theta: must be at least 8".into());
        }
        if g.n_steps == 0 || g.stamp_every == 0 {
            bad.push("grid.n_steps and grid.stamp_every: must be positive".into());
        }
        if let Some(r) = g.r_inf {
            if !(r > 0.0 && r.is_finite()) {
                bad.push(format!("grid.r_inf: must be positive, got {r}"));
            }
        }
        let b = &self.bounds;
        if !(b.p > 2.0 && b.p.is_finite()) {
            bad.push(format!("bounds.p: must satisfy 2 < p < ∞, got {}", b.p));
        }
        if b.epsilon_grid.is_empty() {
            bad.push("bounds.epsilon_grid: must not be empty".into());
        }
        for e in &b.epsilon_grid {
            if !(*e > 0.0 && *e < 2.0 * self.d) {
                bad.push(format!("bounds.epsilon_grid: {e} lies outside (0, {})", 2.0 * self.d));
            }
        }
        if !(b.slack >= 0.0) {
            bad.push(format!("bounds.slack: must be nonnegative, got {}", b.slack));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Constraint(bad))
        }
    }

    pub fn params(&self) -> Result<HeatKernelParams> {
        HeatKernelParams::new(self.d)
    }

    pub fn build_grid(&self) -> Result<ExteriorGrid> {
        let r_inf = self.grid.r_inf.unwrap_or(DEFAULT_OUTER_FACTOR * self.curve.max_radius());
        ExteriorGrid::new(self.curve.clone(), r_inf, self.grid.n_r, self.grid.n_theta)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions::new(self.horizon, self.grid.n_steps, self.grid.stamp_every)
    }

    pub fn discretization(&self) -> Result<CurveDiscretization> {
        discretize(&self.curve, self.grid.n_theta)
    }

    /// Point model with the exclusion radius set to `10⁻³ × min radius`.
    pub fn point_model(&self) -> Result<PointModel> {
        Ok(PointModel::new(self.u0.clone(), self.phibar.clone(), self.params()?).with_r_min(1e-3 * min_radius(&self.curve)?))
    }

    pub fn simulate(&self) -> Result<(ExteriorGrid, FieldTrajectory)> {
        self.validate()?;
        let grid = self.build_grid()?;
        let traj = solve_full(&grid, &self.u0, &self.flux, &self.solve_options(), self.params()?)?;
        Ok((grid, traj))
    }

    /// Report for an already computed trajectory.
    pub fn compare_with(&self, grid: &ExteriorGrid, traj: &FieldTrajectory) -> Result<BoundReport> {
        self.validate()?;
        let b = &self.bounds;
        bound_report(traj, grid, &self.flux, &self.point_model()?, b.p, &b.epsilon_grid, b.slack)
    }

    pub fn compare(&self) -> Result<(ExteriorGrid, FieldTrajectory, BoundReport)> {
        let (grid, traj) = self.simulate()?;
        let report = self.compare_with(&grid, &traj)?;
        Ok((grid, traj, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        Experiment::reference().validate().unwrap();
    }

    #[test]
    fn violations_are_collected() {
        let mut e = Experiment::reference();
        e.d = -1.0;
        e.bounds.p = 2.0;
        e.grid.n_theta = 4;
        match e.validate() {
            Err(Error::Constraint(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let e = Experiment::reference();
        let back: Experiment = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
}
