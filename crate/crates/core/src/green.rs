//! The planar heat kernel `G_t(x) = (4πdt)^{-1} exp(-|x|²/4dt)` and its closed-form bounds.
//!
//! Derivatives carry their true signs: the gradient points toward the origin and
//! the Hessian at the origin is negative definite. All exponentials are clamped
//! so that arguments below [`EXP_FLOOR`] evaluate to exactly zero.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::bracketed_max;
use crate::Point;

/// Exponent below which kernel values are returned as exact zero.
pub const EXP_FLOOR: f64 = -745.0;

/// `exp(arg)` with underflow flushed to zero for `arg < EXP_FLOOR`.
#[inline]
pub fn clamped_exp(arg: f64) -> f64 {
    if arg < EXP_FLOOR {
        0.0
    } else {
        arg.exp()
    }
}

/// Diffusion coefficient of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelParams {
    d: f64,
}

impl HeatKernelParams {
    pub fn new(d: f64) -> Result<Self> {
        if d.is_finite() && d > 0.0 {
            Ok(Self { d })
        } else {
            Err(domain(format!("diffusion coefficient must be positive and finite, got {d}")))
        }
    }

    #[inline]
    pub fn d(&self) -> f64 {
        self.d
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("kernel time must be positive, got {t}")))
    }
}

#[inline]
fn norm2(x: Point) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

/// `G_t(x)`. Unchecked: callers guarantee `t > 0`.
#[inline]
pub(crate) fn kernel_unchecked(r2: f64, t: f64, d: f64) -> f64 {
    clamped_exp(-r2 / (4.0 * d * t)) / (4.0 * PI * d * t)
}

pub fn eval_kernel(x: Point, t: f64, params: HeatKernelParams) -> Result<f64> {
    check_time(t)?;
    Ok(kernel_unchecked(norm2(x), t, params.d))
}

/// `∇G_t(x) = -x/(8πd²t²) exp(-|x|²/4dt)`.
pub fn grad_kernel(x: Point, t: f64, params: HeatKernelParams) -> Result<[f64; 2]> {
    check_time(t)?;
    let d = params.d;
    let scale = -clamped_exp(-norm2(x) / (4.0 * d * t)) / (8.0 * PI * d * d * t * t);
    Ok([scale * x[0], scale * x[1]])
}

/// Hessian `D²G_t(x) = (8πd²t²)^{-1} exp(-|x|²/4dt) [x_i x_j/(2dt) − δ_ij]`.
pub fn hessian_kernel(x: Point, t: f64, params: HeatKernelParams) -> Result<[[f64; 2]; 2]> {
    check_time(t)?;
    let d = params.d;
    let pre = clamped_exp(-norm2(x) / (4.0 * d * t)) / (8.0 * PI * d * d * t * t);
    let q = 1.0 / (2.0 * d * t);
    let h00 = pre * (x[0] * x[0] * q - 1.0);
    let h11 = pre * (x[1] * x[1] * q - 1.0);
    let h01 = pre * x[0] * x[1] * q;
    Ok([[h00, h01], [h01, h11]])
}

/// `sup_{τ>0} ‖∇G_τ(x)‖`, which is `8e^{-2}/(π|x|³)` and zero at the origin.
///
/// The maximiser `τ* = |x|²/8d` makes the value independent of `d`.
pub fn sup_grad_norm(x: Point, _params: HeatKernelParams) -> f64 {
    let r2 = norm2(x);
    if r2 == 0.0 {
        return 0.0;
    }
    8.0 * (-2f64).exp() / (PI * r2 * r2.sqrt())
}

/// Time at which `‖∇G_τ(x)‖` peaks: `|x|²/8d`.
pub fn argmax_time(x: Point, params: HeatKernelParams) -> Result<f64> {
    let r2 = norm2(x);
    if r2 == 0.0 {
        return Err(domain("the gradient supremum is not attained at the origin"));
    }
    Ok(r2 / (8.0 * params.d))
}

/// Exact `L^p(ℝ²)` norm of `G_t`: `p^{-1/p} (4πdt)^{1/p-1}`, or the peak value for `p = ∞`.
pub fn lp_norm(t: f64, p: f64, params: HeatKernelParams) -> Result<f64> {
    check_time(t)?;
    if p.is_nan() || p < 1.0 {
        return Err(domain(format!("L^p exponent must satisfy p >= 1, got {p}")));
    }
    let base = 4.0 * PI * params.d * t;
    if p.is_infinite() {
        return Ok(1.0 / base);
    }
    Ok(p.powf(-1.0 / p) * base.powf(1.0 / p - 1.0))
}

/// The constant `c` with `‖G_t‖_{L^p} = c t^{1/p - 1}`.
pub fn lp_constant(p: f64, params: HeatKernelParams) -> Result<f64> {
    lp_norm(1.0, p, params)
}

/// Dimensionless envelope constants: `|∇G_t(x)|² ≤ κ₁/|x|⁶` and `‖D²G_t(x)‖²_F ≤ κ₂/|x|⁸`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub kappa1: f64,
    pub kappa2: f64,
    /// Maximiser `u` of the κ₂ profile.
    pub kappa2_argmax: f64,
}

/// `u⁴ e^{-u} (2 − 2u + u²) / 4π²`.
pub fn hessian_envelope_profile(u: f64) -> f64 {
    u.powi(4) * (-u).exp() * (2.0 - 2.0 * u + u * u) / (4.0 * PI * PI)
}

pub fn envelope_constants() -> EnvelopeConstants {
    static CACHE: OnceLock<EnvelopeConstants> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let kappa1 = 64.0 * (-4f64).exp() / (PI * PI);
        let (argmax, kappa2) = bracketed_max(hessian_envelope_profile, 1e-12, 50.0, 5000, 1e-12);
        EnvelopeConstants {
            kappa1,
            kappa2,
            kappa2_argmax: argmax,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: f64) -> HeatKernelParams {
        HeatKernelParams::new(d).unwrap()
    }

    #[test]
    fn rejects_nonpositive_diffusion_and_time() {
        assert!(HeatKernelParams::new(0.0).is_err());
        assert!(HeatKernelParams::new(-1.0).is_err());
        assert!(HeatKernelParams::new(f64::NAN).is_err());
        assert!(eval_kernel([1.0, 0.0], 0.0, p(1.0)).is_err());
        assert!(grad_kernel([1.0, 0.0], -1.0, p(1.0)).is_err());
        assert!(hessian_kernel([1.0, 0.0], 0.0, p(1.0)).is_err());
        assert!(lp_norm(0.0, 2.0, p(1.0)).is_err());
        assert!(lp_norm(1.0, 0.5, p(1.0)).is_err());
    }

    #[test]
    fn kernel_values() {
        let g = eval_kernel([0.0, 0.0], 1.0, p(1.0)).unwrap();
        assert!((g - 0.079_577_471_545_947_67).abs() < 1e-15);
        let g = eval_kernel([2.0, 0.0], 1.0, p(1.0)).unwrap();
        assert!((g - (-1f64).exp() / (4.0 * PI)).abs() < 1e-15);
        assert!((g - 0.029_274_7).abs() < 1e-6);
    }

    #[test]
    fn underflow_is_exact_zero() {
        assert_eq!(eval_kernel([100.0, 0.0], 1e-3, p(1.0)).unwrap(), 0.0);
        assert_eq!(grad_kernel([100.0, 0.0], 1e-3, p(1.0)).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn gradient_points_to_origin_with_expected_norm() {
        assert_eq!(grad_kernel([0.0, 0.0], 0.7, p(2.0)).unwrap(), [0.0, 0.0]);
        let g = grad_kernel([1.0, 0.0], 0.125, p(1.0)).unwrap();
        assert!(g[0] < 0.0 && g[1] == 0.0);
        let expected = 8.0 / PI * (-2f64).exp();
        assert!((g[0].abs() - expected).abs() < 1e-14);
        assert!((expected - 0.344_628_5).abs() < 1e-7);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, t, par) = ([1.0, 0.5], 0.3, p(2.0));
        let g = grad_kernel(x, t, par).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (eval_kernel(xp, t, par).unwrap() - eval_kernel(xm, t, par).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs(), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn hessian_trace_is_heat_operator() {
        let (x, t, par) = ([1.0, 0.0], 0.5, p(1.0));
        let h = hessian_kernel(x, t, par).unwrap();
        let dt = 1e-5;
        let dgdt = (eval_kernel(x, t + dt, par).unwrap() - eval_kernel(x, t - dt, par).unwrap()) / (2.0 * dt);
        let trace = h[0][0] + h[1][1];
        assert!((trace - dgdt / par.d()).abs() <= 1e-5 * trace.abs());
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn hessian_at_origin_is_negative_multiple_of_identity() {
        let (t, d) = (0.4, 1.5);
        let h = hessian_kernel([0.0, 0.0], t, p(d)).unwrap();
        let expected = -1.0 / (8.0 * PI * d * d * t * t);
        assert!((h[0][0] - expected).abs() < 1e-15);
        assert!((h[1][1] - expected).abs() < 1e-15);
        assert_eq!(h[0][1], 0.0);
    }

    #[test]
    fn sup_gradient_values_and_argmax() {
        assert_eq!(sup_grad_norm([0.0, 0.0], p(1.0)), 0.0);
        let s1 = sup_grad_norm([1.0, 0.0], p(1.0));
        assert!((s1 - 0.344_628_5).abs() < 1e-7);
        let s2 = sup_grad_norm([0.0, 2.0], p(1.0));
        assert!((s2 - s1 / 8.0).abs() < 1e-15);
        assert!((s2 - 0.043_078_6).abs() < 1e-7);
        assert!(argmax_time([0.0, 0.0], p(1.0)).is_err());
        assert_eq!(argmax_time([1.0, 0.0], p(1.0)).unwrap(), 0.125);
        assert_eq!(argmax_time([2.0, 0.0], p(1.0)).unwrap(), 0.5);
        assert_eq!(argmax_time([1.0, 0.0], p(0.5)).unwrap(), 0.25);
    }

    #[test]
    fn lp_norm_closed_form_values() {
        for d in [0.3, 1.0, 4.0] {
            for t in [0.1, 1.0, 7.0] {
                assert!((lp_norm(t, 1.0, p(d)).unwrap() - 1.0).abs() < 1e-14);
            }
        }
        assert!((lp_norm(1.0, 2.0, p(1.0)).unwrap() - 1.0 / (8.0 * PI).sqrt()).abs() < 1e-15);
        assert!((lp_norm(1.0, 2.0, p(1.0)).unwrap() - 0.199_471_1).abs() < 1e-7);
        assert!((lp_norm(2.0, f64::INFINITY, p(1.0)).unwrap() - 1.0 / (8.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn envelope_constants_match_closed_forms() {
        let env = envelope_constants();
        assert!((env.kappa1 - 0.118_768_8).abs() < 1e-7);
        // Stationary points of the κ₂ profile solve u³ − 8u² + 12u − 8 = 0.
        let u = env.kappa2_argmax;
        let mut root = 6.0;
        for _ in 0..50 {
            root -= (root * root * root - 8.0 * root * root + 12.0 * root - 8.0) / (3.0 * root * root - 16.0 * root + 12.0);
        }
        assert!((u - root).abs() < 1e-6, "{u} vs {root}");
        assert!((env.kappa2 - hessian_envelope_profile(u)).abs() < 1e-15);
    }
}
