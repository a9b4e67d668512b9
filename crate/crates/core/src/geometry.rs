//! Star-shaped boundary curves `r = ρ(θ)` around the origin and their quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::golden_section_max;
use crate::Point;

/// Closed C² curve enclosing the origin, described by its polar radius function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCurve {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `ρ(θ) = mean + Σ_k cos[k-1]·cos(kθ) + sin[k-1]·sin(kθ)`.
    Star {
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

const SAMPLES: usize = 4096;

impl BoundaryCurve {
    pub fn circle(radius: f64) -> Result<Self> {
        let c = BoundaryCurve::Circle { radius };
        c.validate()?;
        Ok(c)
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        let c = BoundaryCurve::Ellipse { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn star(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        let c = BoundaryCurve::Star { mean, cos, sin };
        c.validate()?;
        Ok(c)
    }

    /// Checks finiteness and `ρ > 0` everywhere.
    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            BoundaryCurve::Circle { radius } => radius.is_finite(),
            BoundaryCurve::Ellipse { a, b } => a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0,
            BoundaryCurve::Star { mean, cos, sin } => {
                mean.is_finite() && cos.iter().chain(sin).all(|c| c.is_finite())
            }
        };
        if !finite {
            return Err(Error::Geometry(format!("curve parameters must be finite and positive: {self:?}")));
        }
        let rmin = self.sampled_min_radius();
        if rmin <= 0.0 {
            return Err(Error::Geometry(format!(
                "radius function must stay positive (origin strictly inside), minimum {rmin:.6e}"
            )));
        }
        Ok(())
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, BoundaryCurve::Circle { .. })
    }

    /// Polar radius `ρ(θ)`.
    pub fn radius(&self, theta: f64) -> f64 {
        match self {
            BoundaryCurve::Circle { radius } => *radius,
            BoundaryCurve::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                a * b / (b * b * c * c + a * a * s * s).sqrt()
            }
            BoundaryCurve::Star { mean, cos, sin } => {
                let mut r = *mean;
                for (k, ck) in cos.iter().enumerate() {
                    r += ck * ((k + 1) as f64 * theta).cos();
                }
                for (k, sk) in sin.iter().enumerate() {
                    r += sk * ((k + 1) as f64 * theta).sin();
                }
                r
            }
        }
    }

    /// `dρ/dθ`.
    pub fn radius_derivative(&self, theta: f64) -> f64 {
        match self {
            BoundaryCurve::Circle { .. } => 0.0,
            BoundaryCurve::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                let den = b * b * c * c + a * a * s * s;
                -a * b * (a * a - b * b) * s * c / (den * den.sqrt())
            }
            BoundaryCurve::Star { cos, sin, .. } => {
                let mut r = 0.0;
                for (k, ck) in cos.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    r -= kf * ck * (kf * theta).sin();
                }
                for (k, sk) in sin.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    r += kf * sk * (kf * theta).cos();
                }
                r
            }
        }
    }

    pub fn point(&self, theta: f64) -> Point {
        let r = self.radius(theta);
        let (s, c) = theta.sin_cos();
        [r * c, r * s]
    }

    /// Derivative of the parameterisation `θ ↦ ρ(θ)(cos θ, sin θ)`.
    pub fn tangent(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        let dr = self.radius_derivative(theta);
        let (s, c) = theta.sin_cos();
        [dr * c - r * s, dr * s + r * c]
    }

    /// Unit normal pointing into the object (toward the origin side).
    pub fn inward_normal(&self, theta: f64) -> [f64; 2] {
        let t = self.tangent(theta);
        let len = t[0].hypot(t[1]);
        [-t[1] / len, t[0] / len]
    }

    fn sampled_min_radius(&self) -> f64 {
        (0..SAMPLES)
            .map(|j| self.radius(2.0 * PI * j as f64 / SAMPLES as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest polar radius of the curve.
    pub fn max_radius(&self) -> f64 {
        let h = 2.0 * PI / SAMPLES as f64;
        let (j, _) = (0..SAMPLES)
            .map(|j| (j, self.radius(h * j as f64)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let centre = h * j as f64;
        golden_section_max(|t| self.radius(t), centre - h, centre + h, 1e-14).1
    }

    /// Diameter: the largest distance between two points of the curve.
    pub fn diameter(&self) -> f64 {
        if let BoundaryCurve::Circle { radius } = self {
            return 2.0 * radius;
        }
        let n = 720;
        let h = 2.0 * PI / n as f64;
        let pts: Vec<Point> = (0..n).map(|j| self.point(h * j as f64)).collect();
        let mut best = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
                if dist > best.0 {
                    best = (dist, h * i as f64, h * j as f64);
                }
            }
        }
        // Alternating 1D refinement of both endpoints.
        let (mut dist, mut t1, mut t2) = best;
        let dist_fn = |a: f64, b: f64| {
            let p = self.point(a);
            let q = self.point(b);
            (p[0] - q[0]).hypot(p[1] - q[1])
        };
        let mut width = h;
        for _ in 0..40 {
            t1 = golden_section_max(|a| dist_fn(a, t2), t1 - width, t1 + width, 1e-15).0;
            let (t, v) = golden_section_max(|b| dist_fn(t1, b), t2 - width, t2 + width, 1e-15);
            t2 = t;
            if (v - dist).abs() <= 1e-15 * v {
                dist = v;
                break;
            }
            dist = v;
            width *= 0.5;
        }
        dist
    }
}

/// Nodes, inward normals and arclength weights of a discretised curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDiscretization {
    pub thetas: Vec<f64>,
    pub nodes: Vec<Point>,
    pub normals: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl CurveDiscretization {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫_Γ f dσ` from nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Equispaced-in-θ nodes with periodic trapezoid weights `|x'(θ)|·2π/n`.
pub fn discretize(curve: &BoundaryCurve, n_nodes: usize) -> Result<CurveDiscretization> {
    if n_nodes < 8 {
        return Err(Error::Precondition(format!("curve discretisation needs at least 8 nodes, got {n_nodes}")));
    }
    curve.validate()?;
    let h = 2.0 * PI / n_nodes as f64;
    let mut disc = CurveDiscretization {
        thetas: Vec::with_capacity(n_nodes),
        nodes: Vec::with_capacity(n_nodes),
        normals: Vec::with_capacity(n_nodes),
        weights: Vec::with_capacity(n_nodes),
    };
    for j in 0..n_nodes {
        let theta = h * j as f64;
        let t = curve.tangent(theta);
        disc.thetas.push(theta);
        disc.nodes.push(curve.point(theta));
        disc.normals.push(curve.inward_normal(theta));
        disc.weights.push(t[0].hypot(t[1]) * h);
    }
    Ok(disc)
}

/// Arclength, refined by node doubling until the relative change is below 1e-13.
pub fn curve_length(curve: &BoundaryCurve) -> f64 {
    if let BoundaryCurve::Circle { radius } = curve {
        return 2.0 * PI * radius;
    }
    let speed = |theta: f64| {
        let t = curve.tangent(theta);
        t[0].hypot(t[1])
    };
    let mut n = 128usize;
    let mut prev = crate::quadrature::periodic_trapezoid(n, speed);
    while n < (1 << 20) {
        n *= 2;
        let next = crate::quadrature::periodic_trapezoid(n, speed);
        if (next - prev).abs() <= 1e-13 * next {
            return next;
        }
        prev = next;
    }
    prev
}

/// Distance from the origin to the curve, refined locally around the best node.
pub fn min_radius(curve: &BoundaryCurve) -> Result<f64> {
    let h = 2.0 * PI / SAMPLES as f64;
    let (j, _) = (0..SAMPLES)
        .map(|j| (j, curve.radius(h * j as f64)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let centre = h * j as f64;
    let (_, neg) = golden_section_max(|t| -curve.radius(t), centre - h, centre + h, 1e-14);
    let r = -neg;
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::Geometry(format!("origin is not strictly inside the curve (min radius {r:.3e})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> BoundaryCurve {
        BoundaryCurve::star(1.0, vec![0.0, 0.0, 0.2], vec![]).unwrap()
    }

    #[test]
    fn rejects_curves_not_enclosing_origin() {
        assert!(BoundaryCurve::circle(0.0).is_err());
        assert!(BoundaryCurve::circle(-1.0).is_err());
        assert!(BoundaryCurve::ellipse(1.0, 0.0).is_err());
        assert!(BoundaryCurve::star(0.5, vec![0.6], vec![]).is_err());
        assert!(discretize(&BoundaryCurve::Circle { radius: 1.0 }, 7).is_err());
    }

    #[test]
    fn circle_discretisation() {
        let disc = discretize(&BoundaryCurve::circle(1.0).unwrap(), 64).unwrap();
        assert!((disc.length() - 2.0 * PI).abs() < 1e-12);
        let disc = discretize(&BoundaryCurve::circle(2.0).unwrap(), 64).unwrap();
        for (x, n) in disc.nodes.iter().zip(&disc.normals) {
            assert!((n[0] + x[0] / 2.0).abs() < 1e-12);
            assert!((n[1] + x[1] / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normals_are_unit_and_point_inward() {
        for curve in [BoundaryCurve::ellipse(2.0, 1.0).unwrap(), star()] {
            let disc = discretize(&curve, 97).unwrap();
            for (x, n) in disc.nodes.iter().zip(&disc.normals) {
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
                let r = x[0].hypot(x[1]);
                assert!(n[0] * x[0] / r + n[1] * x[1] / r < 0.0);
            }
        }
    }

    #[test]
    fn ellipse_perimeter() {
        // Complete elliptic integral: 4a E(e), e² = 1 − b²/a², computed independently
        // by Gauss–Legendre quadrature of sqrt(1 − e² sin² t) on [0, π/2].
        let (a, b) = (2.0f64, 1.0f64);
        let e2 = 1.0 - b * b / (a * a);
        let rule = crate::quadrature::GaussLegendre::new(40);
        let ek = crate::quadrature::composite(&rule, 0.0, PI / 2.0, 8, |t| (1.0 - e2 * t.sin().powi(2)).sqrt());
        let oracle = 4.0 * a * ek;
        assert!((oracle - 9.688_448_220_5).abs() < 1e-9);
        let disc = discretize(&BoundaryCurve::ellipse(a, b).unwrap(), 256).unwrap();
        assert!((disc.length() - oracle).abs() < 1e-9 * oracle);
        assert!((curve_length(&BoundaryCurve::ellipse(a, b).unwrap()) - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn lengths_and_min_radii() {
        assert!((curve_length(&BoundaryCurve::circle(1.0).unwrap()) - 2.0 * PI).abs() < 1e-15);
        assert!((curve_length(&BoundaryCurve::circle(0.5).unwrap()) - PI).abs() < 1e-15);
        assert!((min_radius(&BoundaryCurve::circle(1.0).unwrap()).unwrap() - 1.0).abs() < 1e-15);
        assert!((min_radius(&BoundaryCurve::ellipse(2.0, 1.0).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        assert!((min_radius(&star()).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn star_length_is_self_convergent() {
        let s = star();
        let reference = curve_length(&s);
        for n in [128, 256, 512] {
            let disc = discretize(&s, n).unwrap();
            assert!((disc.length() - reference).abs() < 1e-10 * reference, "n={n}");
        }
    }

    #[test]
    fn refinement_stability_of_smooth_integrand() {
        let curve = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        let integral = |n| {
            let disc = discretize(&curve, n).unwrap();
            let vals: Vec<f64> = disc.nodes.iter().map(|x| (x[0] * 0.3).cos() + x[1] * x[1]).collect();
            disc.integrate(&vals)
        };
        let (a, b) = (integral(128), integral(256));
        assert!((a - b).abs() < 1e-10 * b.abs());
    }

    #[test]
    fn diameters() {
        assert_eq!(BoundaryCurve::circle(1.0).unwrap().diameter(), 2.0);
        assert!((BoundaryCurve::ellipse(2.0, 1.0).unwrap().diameter() - 4.0).abs() < 1e-12);
        assert!((BoundaryCurve::ellipse(2.0, 1.0).unwrap().max_radius() - 2.0).abs() < 1e-12);
    }
}
