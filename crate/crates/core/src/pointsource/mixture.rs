use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::green::{clamped_exp, HeatKernelParams};
use crate::quadrature::{adaptive_panels, periodic_trapezoid, PanelTolerance};
use crate::Point;

/// One heat-kernel bump `w·G_s(x − c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub center: Point,
    pub shape: f64,
    /// Centre lies inside the object; weight is adjustable by the matching search.
    #[serde(default)]
    pub interior: bool,
}

/// Finite sum of heat-kernel bumps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MixtureComponent>", into = "Vec<MixtureComponent>")]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

impl TryFrom<Vec<MixtureComponent>> for GaussianMixture {
    type Error = crate::Error;
    fn try_from(v: Vec<MixtureComponent>) -> Result<Self> {
        GaussianMixture::new(v)
    }
}

impl From<GaussianMixture> for Vec<MixtureComponent> {
    fn from(m: GaussianMixture) -> Self {
        m.components
    }
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        for (k, c) in components.iter().enumerate() {
            if !(c.shape > 0.0 && c.shape.is_finite()) {
                return Err(domain(format!("mixture component {k}: shape must be positive and finite")));
            }
            if !c.weight.is_finite() || !c.center[0].is_finite() || !c.center[1].is_finite() {
                return Err(domain(format!("mixture component {k}: non-finite weight or centre")));
            }
        }
        Ok(Self { components })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(weight: f64, center: Point, shape: f64) -> Result<Self> {
        Self::new(vec![MixtureComponent {
            weight,
            center,
            shape,
            interior: false,
        }])
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Heat evolution by `t`: every shape shifts by `t`.
    pub fn evolved(&self, t: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| MixtureComponent { shape: c.shape + t, ..*c })
                .collect(),
        }
    }

    /// Components flagged as interior, in order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.components.len()).filter(|&k| self.components[k].interior).collect()
    }

    /// Copy with the interior weights replaced, in `interior_indices` order.
    pub fn with_interior_weights(&self, weights: &[f64]) -> Result<Self> {
        let idx = self.interior_indices();
        if idx.len() != weights.len() {
            return Err(domain("interior weight count mismatch"));
        }
        let mut out = self.clone();
        for (k, w) in idx.into_iter().zip(weights) {
            out.components[k].weight = *w;
        }
        Ok(out)
    }

    /// Copy keeping only the non-interior components.
    pub fn exterior_part(&self) -> Self {
        Self {
            components: self.components.iter().filter(|c| !c.interior).copied().collect(),
        }
    }

    /// `Σ w G_{s+t}(x − c)`.
    pub fn eval(&self, x: Point, t: f64, params: HeatKernelParams) -> f64 {
        let d = params.d();
        self.components
            .iter()
            .map(|c| {
                let tau = c.shape + t;
                let (dx, dy) = (x[0] - c.center[0], x[1] - c.center[1]);
                c.weight * clamped_exp(-(dx * dx + dy * dy) / (4.0 * d * tau)) / (4.0 * std::f64::consts::PI * d * tau)
            })
            .sum()
    }

    pub fn grad(&self, x: Point, t: f64, params: HeatKernelParams) -> [f64; 2] {
        let d = params.d();
        let mut g = [0.0; 2];
        for c in &self.components {
            let tau = c.shape + t;
            let (dx, dy) = (x[0] - c.center[0], x[1] - c.center[1]);
            let k = -c.weight * clamped_exp(-(dx * dx + dy * dy) / (4.0 * d * tau))
                / (8.0 * std::f64::consts::PI * d * d * tau * tau);
            g[0] += k * dx;
            g[1] += k * dy;
        }
        g
    }

    /// `‖∇(Σ w G_s(· − c))‖_{Lᵖ(ℝ²)}` for `2 < p < ∞`.
    ///
    /// A Gaussian partition of unity splits the integrand into one piece per
    /// component; each piece is integrated in polar coordinates about its
    /// centre, adaptively in radius and by the periodic trapezoid in angle.
    pub fn grad_lp_norm(&self, p: f64, params: HeatKernelParams) -> Result<f64> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(domain("gradient norm needs 2 < p < ∞"));
        }
        if self.components.is_empty() {
            return Ok(0.0);
        }
        let d = params.d();
        let sig: Vec<f64> = self.components.iter().map(|c| (2.0 * d * c.shape).sqrt()).collect();
        let log_weight = |k: usize, x: Point| {
            let c = self.components[k].center;
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            -r2 / (8.0 * sig[k] * sig[k])
        };
        let partition = |k: usize, x: Point| {
            let logs: Vec<f64> = (0..self.components.len()).map(|j| log_weight(j, x)).collect();
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            (logs[k] - m).exp() / s
        };
        let integrand = |x: Point| {
            let g = self.grad(x, 0.0, params);
            (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p)
        };
        let tol = PanelTolerance {
            rel: 1e-12,
            ..PanelTolerance::default()
        };
        let mut total = 0.0;
        for (k, comp) in self.components.iter().enumerate() {
            let c = comp.center;
            let reach = self
                .components
                .iter()
                .zip(&sig)
                .map(|(o, s)| ((o.center[0] - c[0]).powi(2) + (o.center[1] - c[1]).powi(2)).sqrt() + 14.0 * s)
                .fold(0.0, f64::max);
            let initial = ((reach / sig[k]).ceil() as usize).clamp(4, 512);
            let ring = |theta: f64| {
                let (sn, cs) = theta.sin_cos();
                adaptive_panels(
                    |r| {
                        let x = [c[0] + r * cs, c[1] + r * sn];
                        integrand(x) * partition(k, x) * r
                    },
                    0.0,
                    reach,
                    initial,
                    tol,
                )
                .value
            };
            let mut n = 32;
            let mut prev = periodic_trapezoid(n, ring);
            loop {
                n *= 2;
                let next = periodic_trapezoid(n, ring);
                let done = (next - prev).abs() <= 1e-12 * next.abs() || n >= 2048;
                prev = next;
                if done {
                    break;
                }
            }
            total += prev;
        }
        Ok(total.powf(1.0 / p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GaussianMixture::single(1.0, [0.0, 0.0], 0.0).is_err());
        assert!(GaussianMixture::single(1.0, [0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn evolution_shifts_shapes() {
        let p = HeatKernelParams::new(1.0).unwrap();
        let m = GaussianMixture::single(2.0, [0.5, 0.0], 0.3).unwrap();
        let x = [1.0, 1.0];
        assert_eq!(m.eval(x, 0.7, p), m.evolved(0.7).eval(x, 0.0, p));
        assert_eq!(m.total_mass(), 2.0);
    }

    #[test]
    fn interior_weights_round_trip() {
        let m = GaussianMixture::new(vec![
            MixtureComponent {
                weight: 1.0,
                center: [5.0, 0.0],
                shape: 1.0,
                interior: false,
            },
            MixtureComponent {
                weight: 0.0,
                center: [0.0, 0.0],
                shape: 0.05,
                interior: true,
            },
        ])
        .unwrap();
        assert_eq!(m.interior_indices(), vec![1]);
        let m2 = m.with_interior_weights(&[3.0]).unwrap();
        assert_eq!(m2.components()[1].weight, 3.0);
        assert_eq!(m2.exterior_part().len(), 1);
        assert!(m.with_interior_weights(&[]).is_err());
    }

    #[test]
    fn json_form_is_a_list() {
        let m: GaussianMixture =
            serde_json::from_str(r#"[{"weight":1.0,"center":[0.0,0.0],"shape":0.5}]"#).unwrap();
        assert_eq!(m.len(), 1);
        assert!(serde_json::from_str::<GaussianMixture>(r#"[{"weight":1.0,"center":[0.0,0.0],"shape":0.0}]"#).is_err());
    }
}
