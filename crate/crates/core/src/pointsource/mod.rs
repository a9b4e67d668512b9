//! Reduced model: whole-plane diffusion driven by a point source at the origin.
//!
//! `û(x, t) = Σ w_k G_{s_k+t}(x − c_k) + ∫₀ᵗ G_{t−s}(x) φ̄(s) ds`.

mod mixture;
mod signal;

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

pub use mixture::{GaussianMixture, MixtureComponent};
pub use signal::{Segment, TimeSignal};

use crate::error::{domain, Result};
use crate::geometry::CurveDiscretization;
use crate::green::HeatKernelParams;
use crate::quadrature::{adaptive_panels, Estimate, PanelTolerance};
use crate::Point;

/// Default source-exclusion radius.
pub const DEFAULT_R_MIN: f64 = 1e-3;

/// Integrand cut-off in `v`: `e^{−45}` is below double resolution relative to the peak.
const V_CUTOFF: f64 = 45.0;

/// Point-source model with its evaluation settings.
#[derive(Debug, Clone)]
pub struct PointModel {
    pub u0: GaussianMixture,
    pub phibar: TimeSignal,
    pub params: HeatKernelParams,
    /// Evaluations closer than this to the origin are rejected when `φ̄ ≢ 0`.
    pub r_min: f64,
    pub tol: PanelTolerance,
}

/// Value and radial kernels of the time convolution at one `(|x|, t)`.
#[derive(Debug, Clone, Copy)]
pub struct Convolution {
    /// `∫₀ᵗ G_{t−s}(x) φ̄(s) ds`.
    pub value: Estimate,
    /// `∫ e^{−v} φ̄ dv`; the gradient is `−x/(2πd|x|²)` times this.
    pub grad_scalar: Estimate,
}

impl PointModel {
    pub fn new(u0: GaussianMixture, phibar: TimeSignal, params: HeatKernelParams) -> Self {
        Self {
            u0,
            phibar,
            params,
            r_min: DEFAULT_R_MIN,
            tol: PanelTolerance::default(),
        }
    }

    pub fn with_r_min(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }

    pub fn with_tolerance(mut self, tol: PanelTolerance) -> Self {
        self.tol = tol;
        self
    }

    fn check(&self, x: Point, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain("point model needs t ≥ 0"));
        }
        let r2 = x[0] * x[0] + x[1] * x[1];
        if !self.phibar.is_zero() && r2 < self.r_min * self.r_min {
            return Err(domain(format!(
                "evaluation at |x| = {} inside the source exclusion radius {}",
                r2.sqrt(),
                self.r_min
            )));
        }
        Ok(r2)
    }

    /// Time-convolution integrals at squared radius `r2`.
    pub fn convolution(&self, r2: f64, t: f64) -> Convolution {
        convolution(r2, t, &self.phibar, self.params.d(), self.tol)
    }

    pub fn eval_uhat(&self, x: Point, t: f64) -> Result<f64> {
        Ok(self.eval_uhat_estimate(x, t)?.value)
    }

    /// Value with the quadrature error estimate of the convolution part.
    pub fn eval_uhat_estimate(&self, x: Point, t: f64) -> Result<Estimate> {
        let r2 = self.check(x, t)?;
        let mix = self.u0.eval(x, t, self.params);
        if self.phibar.is_zero() || t == 0.0 {
            return Ok(Estimate {
                value: mix,
                error: 0.0,
                panels: 0,
            });
        }
        let c = value_part(r2, t, &self.phibar, self.params.d(), self.tol);
        Ok(Estimate {
            value: mix + c.value,
            ..c
        })
    }

    pub fn grad_uhat(&self, x: Point, t: f64) -> Result<[f64; 2]> {
        let r2 = self.check(x, t)?;
        let mut g = self.u0.grad(x, t, self.params);
        if !self.phibar.is_zero() && t > 0.0 {
            let s = grad_part(r2, t, &self.phibar, self.params.d(), self.tol).value;
            let k = -s / (2.0 * PI * self.params.d() * r2);
            g[0] += k * x[0];
            g[1] += k * x[1];
        }
        Ok(g)
    }

    /// `d ∇û · n` at each node; positive values flow into the exterior.
    pub fn flux_on_curve(&self, disc: &CurveDiscretization, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(domain("flux needs t ≥ 0"));
        }
        let d = self.params.d();
        for x in &disc.nodes {
            self.check(*x, t)?;
        }
        // The convolution depends on |x| only; nodes sharing a radius share the integral.
        let mut radial: HashMap<u64, f64> = HashMap::new();
        if !self.phibar.is_zero() && t > 0.0 {
            let keys: Vec<u64> = {
                let mut k: Vec<u64> = disc.nodes.iter().map(|x| (x[0] * x[0] + x[1] * x[1]).to_bits()).collect();
                k.sort_unstable();
                k.dedup();
                k
            };
            let vals: Vec<f64> = keys
                .par_iter()
                .map(|&b| grad_part(f64::from_bits(b), t, &self.phibar, d, self.tol).value)
                .collect();
            radial = keys.into_iter().zip(vals).collect();
        }
        Ok(disc
            .nodes
            .par_iter()
            .zip(disc.normals.par_iter())
            .map(|(x, n)| {
                let mut g = self.u0.grad(*x, t, self.params);
                let r2 = x[0] * x[0] + x[1] * x[1];
                if let Some(s) = radial.get(&r2.to_bits()) {
                    let k = -s / (2.0 * PI * d * r2);
                    g[0] += k * x[0];
                    g[1] += k * x[1];
                }
                d * (g[0] * n[0] + g[1] * n[1])
            })
            .collect())
    }

    /// `Σ w_k + ∫₀ᵗ φ̄`.
    pub fn total_mass(&self, t: f64) -> f64 {
        total_mass(t, &self.u0, &self.phibar)
    }
}

pub fn eval_uhat(x: Point, t: f64, u0: &GaussianMixture, phibar: &TimeSignal, params: HeatKernelParams) -> Result<f64> {
    PointModel::new(u0.clone(), phibar.clone(), params).eval_uhat(x, t)
}

pub fn grad_uhat(
    x: Point,
    t: f64,
    u0: &GaussianMixture,
    phibar: &TimeSignal,
    params: HeatKernelParams,
) -> Result<[f64; 2]> {
    PointModel::new(u0.clone(), phibar.clone(), params).grad_uhat(x, t)
}

pub fn flux_on_curve(
    disc: &CurveDiscretization,
    t: f64,
    u0: &GaussianMixture,
    phibar: &TimeSignal,
    params: HeatKernelParams,
) -> Result<Vec<f64>> {
    PointModel::new(u0.clone(), phibar.clone(), params).flux_on_curve(disc, t)
}

pub fn total_mass(t: f64, u0: &GaussianMixture, phibar: &TimeSignal) -> f64 {
    u0.total_mass() + phibar.integral(t.max(0.0))
}

pub fn grad_lp_norm_u0(u0: &GaussianMixture, p: f64, params: HeatKernelParams) -> Result<f64> {
    u0.grad_lp_norm(p, params)
}

pub fn convolution(r2: f64, t: f64, phibar: &TimeSignal, d: f64, tol: PanelTolerance) -> Convolution {
    Convolution {
        value: value_part(r2, t, phibar, d, tol),
        grad_scalar: grad_part(r2, t, phibar, d, tol),
    }
}

/// `(1/4πd) ∫ e^{−v}/v φ̄(t − r²/4dv) dv` over `v ≥ r²/4dt`, integrated in `w = ln v`.
fn value_part(r2: f64, t: f64, phibar: &TimeSignal, d: f64, tol: PanelTolerance) -> Estimate {
    let est = segment_sum(r2, t, phibar, d, tol, |w| (-w.exp()).exp());
    Estimate {
        value: est.value / (4.0 * PI * d),
        error: est.error / (4.0 * PI * d),
        panels: est.panels,
    }
}

/// `∫ e^{−v} φ̄(t − r²/4dv) dv` over `v ≥ r²/4dt`, integrated in `w = ln v`.
fn grad_part(r2: f64, t: f64, phibar: &TimeSignal, d: f64, tol: PanelTolerance) -> Estimate {
    segment_sum(r2, t, phibar, d, tol, |w| (w - w.exp()).exp())
}

fn segment_sum<K: Fn(f64) -> f64>(
    r2: f64,
    t: f64,
    phibar: &TimeSignal,
    d: f64,
    tol: PanelTolerance,
    kernel: K,
) -> Estimate {
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
        panels: 0,
    };
    if t <= 0.0 {
        return total;
    }
    let a = r2 / (4.0 * d);
    let v_of = |s: f64| if s >= t { f64::INFINITY } else { a / (t - s) };
    let v0 = v_of(0.0);
    let v_top = v0 + V_CUTOFF;
    for seg in phibar.segments(t) {
        if seg.v_start == 0.0 && seg.v_end == 0.0 {
            continue;
        }
        let v_lo = v_of(seg.start);
        if v_lo > v_top {
            continue;
        }
        let v_hi = v_of(seg.end).min(v_top);
        if !(v_hi > v_lo) {
            continue;
        }
        let (w_lo, w_hi) = (v_lo.ln(), v_hi.ln());
        let initial = ((w_hi - w_lo).ceil() as usize).max(2);
        let est = adaptive_panels(
            |w| {
                let s = t - a / w.exp();
                kernel(w) * seg.at(s)
            },
            w_lo,
            w_hi,
            initial,
            tol,
        );
        total.value += est.value;
        total.error += est.error;
        total.panels += est.panels;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> HeatKernelParams {
        HeatKernelParams::new(1.0).unwrap()
    }

    /// `E₁` by its convergent power series, fine for small arguments.
    fn e1_series(x: f64) -> f64 {
        let gamma = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            sum -= term / k as f64;
        }
        -gamma - x.ln() + sum
    }

    #[test]
    fn semigroup_example() {
        let u0 = GaussianMixture::single(1.0, [0.0, 0.0], 0.5).unwrap();
        let v = eval_uhat([1.0, 0.0], 0.5, &u0, &TimeSignal::zero(), p1()).unwrap();
        assert!((v - (-0.25f64).exp() / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn empty_model_is_zero() {
        let v = eval_uhat([0.0, 0.0], 3.0, &GaussianMixture::empty(), &TimeSignal::zero(), p1()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn constant_source_value_is_exponential_integral() {
        let v = eval_uhat([1.0, 0.0], 1.0, &GaussianMixture::empty(), &TimeSignal::constant(1.0), p1()).unwrap();
        let want = e1_series(0.25) / (4.0 * PI);
        assert!((v - want).abs() < 1e-12 * want, "{v} vs {want}");
        assert!((v - 0.083_101_4).abs() < 1e-7);
    }

    #[test]
    fn constant_source_flux_closed_form() {
        let disc = crate::geometry::discretize(&crate::geometry::BoundaryCurve::circle(1.0).unwrap(), 32).unwrap();
        let f = flux_on_curve(&disc, 1.0, &GaussianMixture::empty(), &TimeSignal::constant(1.0), p1()).unwrap();
        let want = (-0.25f64).exp() / (2.0 * PI);
        for v in f {
            assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        }
    }

    #[test]
    fn source_exclusion() {
        let m = PointModel::new(GaussianMixture::empty(), TimeSignal::constant(1.0), p1());
        assert!(m.eval_uhat([1e-4, 0.0], 1.0).is_err());
        assert!(m.eval_uhat([1.0, 0.0], -1.0).is_err());
        let m0 = PointModel::new(GaussianMixture::empty(), TimeSignal::zero(), p1());
        assert!(m0.eval_uhat([0.0, 0.0], 1.0).is_ok());
    }

    #[test]
    fn knots_beyond_horizon_are_ignored() {
        let ramp = TimeSignal::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 5.0]).unwrap();
        let short = TimeSignal::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let a = eval_uhat([1.0, 0.5], 1.0, &GaussianMixture::empty(), &ramp, p1()).unwrap();
        let b = eval_uhat([1.0, 0.5], 1.0, &GaussianMixture::empty(), &short, p1()).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn influx_sign_for_central_bump() {
        let disc = crate::geometry::discretize(&crate::geometry::BoundaryCurve::circle(1.0).unwrap(), 16).unwrap();
        let u0 = GaussianMixture::single(1.0, [0.0, 0.0], 0.2).unwrap();
        let f = flux_on_curve(&disc, 0.3, &u0, &TimeSignal::zero(), p1()).unwrap();
        assert!(f.iter().all(|v| *v > 0.0));
        assert!(f.iter().all(|v| (v - f[0]).abs() < 1e-15 * f[0].abs().max(1.0)));
    }

    #[test]
    fn mass() {
        assert_eq!(total_mass(2.0, &GaussianMixture::empty(), &TimeSignal::constant(1.0)), 2.0);
        let u0 = GaussianMixture::single(1.0, [0.0, 0.0], 0.2).unwrap();
        assert_eq!(total_mass(5.0, &u0, &TimeSignal::zero()), 1.0);
    }
}
