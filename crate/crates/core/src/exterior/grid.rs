use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::Point;

/// Default outer radius as a multiple of the curve's largest radius.
pub const DEFAULT_OUTER_FACTOR: f64 = 12.0;

/// Boundary-fitted annular grid `x(s, θ) = (ρ(θ) + s·(R_∞ − ρ(θ)))·(cos θ, sin θ)`.
///
/// Nodes are `s_i = i/(n_r − 1)`, `θ_j = 2πj/n_θ`; fields are stored with `j`
/// fastest, index `i·n_θ + j`. Row `i = n_r − 1` is the outer boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct ExteriorGrid {
    curve: BoundaryCurve,
    r_inf: f64,
    n_r: usize,
    n_theta: usize,
    rho: Vec<f64>,
    rho_p: Vec<f64>,
}

/// Serialised form of [`ExteriorGrid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub curve: BoundaryCurve,
    pub r_inf: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl TryFrom<GridSpec> for ExteriorGrid {
    type Error = crate::Error;
    fn try_from(g: GridSpec) -> Result<Self> {
        ExteriorGrid::new(g.curve, g.r_inf, g.n_r, g.n_theta)
    }
}

impl From<ExteriorGrid> for GridSpec {
    fn from(g: ExteriorGrid) -> Self {
        GridSpec {
            curve: g.curve,
            r_inf: g.r_inf,
            n_r: g.n_r,
            n_theta: g.n_theta,
        }
    }
}

/// Inverse metric `(g^{ss}, g^{sθ}, g^{θθ})` and Jacobian at one point.
#[derive(Debug, Clone, Copy)]
pub struct Metric {
    pub gss: f64,
    pub gst: f64,
    pub gtt: f64,
    pub jac: f64,
}

impl ExteriorGrid {
    pub fn new(curve: BoundaryCurve, r_inf: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        curve.validate()?;
        let rmax = curve.max_radius();
        if !(r_inf >= 4.0 * rmax) {
            return Err(Error::Geometry(format!(
                "outer radius {r_inf} must be at least 4 × the curve's max radius {rmax}"
            )));
        }
        if n_r < 3 || n_theta < 8 {
            return Err(Error::Precondition(format!(
                "grid needs n_r ≥ 3 and n_theta ≥ 8, got {n_r} × {n_theta}"
            )));
        }
        let h = 2.0 * PI / n_theta as f64;
        let rho = (0..n_theta).map(|j| curve.radius(h * j as f64)).collect();
        let rho_p = (0..n_theta).map(|j| curve.radius_derivative(h * j as f64)).collect();
        let grid = Self {
            curve,
            r_inf,
            n_r,
            n_theta,
            rho,
            rho_p,
        };
        for i in 0..n_r {
            for j in 0..n_theta {
                let m = grid.metric_at(grid.s(i), j);
                if !(m.jac > 0.0 && m.jac.is_finite()) {
                    return Err(Error::Geometry(format!("non-positive Jacobian at node ({i}, {j})")));
                }
            }
        }
        Ok(grid)
    }

    /// Grid with `R_∞ = 12 × max radius`.
    pub fn with_default_radius(curve: BoundaryCurve, n_r: usize, n_theta: usize) -> Result<Self> {
        let r_inf = DEFAULT_OUTER_FACTOR * curve.max_radius();
        Self::new(curve, r_inf, n_r, n_theta)
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_nodes(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn ds(&self) -> f64 {
        1.0 / (self.n_r - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Curve radius at angle node `j`.
    pub fn rho(&self, j: usize) -> f64 {
        self.rho[j]
    }

    pub fn radius(&self, i: usize, j: usize) -> f64 {
        let rho = self.rho[j];
        rho + self.s(i) * (self.r_inf - rho)
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        let r = self.radius(i, j);
        let (sn, cs) = self.theta(j).sin_cos();
        [r * cs, r * sn]
    }

    /// Metric at arbitrary `s` (possibly outside [0, 1]) on angle node `j`.
    pub fn metric_at(&self, s: f64, j: usize) -> Metric {
        metric_from(self.rho[j], self.rho_p[j], self.r_inf, s)
    }

    /// Metric at arbitrary `(s, θ)`, evaluating the curve directly.
    pub fn metric_theta(&self, s: f64, theta: f64) -> Metric {
        metric_from(self.curve.radius(theta), self.curve.radius_derivative(theta), self.r_inf, s)
    }

    pub fn metric(&self, i: usize, j: usize) -> Metric {
        self.metric_at(self.s(i), j)
    }

    /// Trapezoid quadrature weights `J·Δs·Δθ`, halved on both boundary rows.
    pub fn weights(&self) -> Vec<f64> {
        let (ds, dt) = (self.ds(), self.dtheta());
        let mut w = Vec::with_capacity(self.n_nodes());
        for i in 0..self.n_r {
            let edge = if i == 0 || i == self.n_r - 1 { 0.5 } else { 1.0 };
            for j in 0..self.n_theta {
                w.push(edge * self.metric(i, j).jac * ds * dt);
            }
        }
        w
    }

    /// Arclength weights of the inner boundary row, `|x_θ|·Δθ`.
    pub fn boundary_weights(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|j| self.rho[j].hypot(self.rho_p[j]) * self.dtheta())
            .collect()
    }

    /// Unit normals on the inner row, pointing into the object.
    pub fn boundary_normals(&self) -> Vec<[f64; 2]> {
        (0..self.n_theta).map(|j| self.curve.inward_normal(self.theta(j))).collect()
    }

    /// Discrete area `Σ weights`.
    pub fn area(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Node coordinates in storage order.
    pub fn points(&self) -> Vec<Point> {
        let mut p = Vec::with_capacity(self.n_nodes());
        for i in 0..self.n_r {
            for j in 0..self.n_theta {
                p.push(self.point(i, j));
            }
        }
        p
    }
}

fn metric_from(rho: f64, rho_p: f64, r_inf: f64, s: f64) -> Metric {
    let l = r_inf - rho;
    let r = rho + s * l;
    let rt = rho_p * (1.0 - s);
    Metric {
        gss: (rt * rt + r * r) / (l * l * r * r),
        gst: -rt / (l * r * r),
        gtt: 1.0 / (r * r),
        jac: l * r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_outer_radius() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        assert!(matches!(ExteriorGrid::new(c.clone(), 3.0, 10, 16), Err(Error::Geometry(_))));
        assert!(ExteriorGrid::new(c, 4.0, 10, 16).is_ok());
    }

    #[test]
    fn circle_area_is_exact() {
        let g = ExteriorGrid::new(BoundaryCurve::circle(1.0).unwrap(), 12.0, 21, 32).unwrap();
        assert!((g.area() - PI * 143.0).abs() < 1e-10 * PI * 143.0);
        let lb: f64 = g.boundary_weights().iter().sum();
        assert!((lb - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn metric_inverts_covariant_metric() {
        let c = BoundaryCurve::star(1.0, vec![0.0, 0.0, 0.2], vec![0.1]).unwrap();
        let g = ExteriorGrid::new(c, 6.0, 11, 16).unwrap();
        for j in 0..16 {
            let s = 0.37;
            let m = g.metric_at(s, j);
            let rho = g.rho(j);
            let l = 6.0 - rho;
            let r = rho + s * l;
            let rt = g.rho_p[j] * (1.0 - s);
            let (a, b, d) = (l * l, l * rt, rt * rt + r * r);
            let inv = [[m.gss, m.gst], [m.gst, m.gtt]];
            let cov = [[a, b], [b, d]];
            for p in 0..2 {
                for q in 0..2 {
                    let v: f64 = (0..2).map(|k| inv[p][k] * cov[k][q]).sum();
                    assert!((v - if p == q { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
            assert!((m.jac - (a * d - b * b).sqrt()).abs() < 1e-12 * m.jac);
        }
    }
}
