//! Flux mismatch `c*(t)`, its a-priori upper bound and the checks built on them.

mod energy;
mod report;
mod theorem;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use energy::{energy_identity_residual, energy_terms, error_snapshots, trace_constant, uhat_on_grid, EnergyTerms, Snapshot};
pub use report::{bound_report, BoundReport, REPORT_SCHEMA};
pub use theorem::{optimal_epsilon_h1, optimal_epsilon_l2, verify_main_theorem, TheoremInputs, TheoremReport};

use crate::error::{Error, Result};
use crate::exterior::BoundaryFlux;
use crate::geometry::CurveDiscretization;
use crate::green::{lp_constant, sup_grad_norm, HeatKernelParams};
use crate::pointsource::{PointModel, TimeSignal};
use crate::quadrature::GaussLegendre;

/// Largest panel width of the composite rule in time.
pub const TIME_PANEL: f64 = 0.1;
/// Gauss–Legendre points per time panel.
pub const TIME_ORDER: usize = 10;
/// Halvings of the first panel towards `t = 0`.
pub const GRADED_LEVELS: usize = 12;

/// Default Lebesgue exponent in the upper bound.
pub const DEFAULT_P: f64 = 4.0;

/// `C_Γ = ∫_Γ sup_τ ‖∇G_τ(x)‖² dσ`.
pub fn c_gamma(disc: &CurveDiscretization) -> Result<f64> {
    let params = HeatKernelParams::new(1.0)?;
    let mut sum = 0.0;
    for (x, w) in disc.nodes.iter().zip(&disc.weights) {
        if x[0] == 0.0 && x[1] == 0.0 {
            return Err(Error::Geometry("a curve node sits at the origin".into()));
        }
        sum += w * sup_grad_norm(*x, params).powi(2);
    }
    Ok(sum)
}

/// Cumulative series sampled at stamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Nodes and weights of the composite time rule on `[0, t_end]`.
///
/// Panels never straddle a breakpoint; each is at most [`TIME_PANEL`] wide and
/// the first one is graded geometrically towards zero.
/// Every node carries the index of the first stamp at or after it.
pub fn time_rule(breakpoints: &[f64], stamps: &[f64]) -> Vec<(f64, f64, usize)> {
    let t_end = stamps.iter().cloned().fold(0.0, f64::max);
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .chain(stamps)
        .cloned()
        .filter(|t| *t > 0.0 && *t < t_end)
        .collect();
    cuts.push(0.0);
    cuts.push(t_end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * t_end.max(1.0));
    let rule = GaussLegendre::new(TIME_ORDER);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / TIME_PANEL).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let stamp = stamps.partition_point(|s| *s < b - 1e-14 * t_end.max(1.0));
        for p in 0..panels {
            let lo = a + h * p as f64;
            if lo == 0.0 {
                // Geometric grading towards t = 0, where fluxes switch on like e^{-c/t}.
                let mut edges: Vec<f64> = (0..GRADED_LEVELS).map(|k| h * 0.5f64.powi(k as i32)).collect();
                edges.push(0.0);
                edges.reverse();
                for e in edges.windows(2) {
                    for (x, wt) in rule.mapped(e[0], e[1]) {
                        out.push((x, wt, stamp));
                    }
                }
                continue;
            }
            for (x, wt) in rule.mapped(lo, lo + h) {
                out.push((x, wt, stamp));
            }
        }
    }
    out
}

/// `∫₀^{t_k} f` at every stamp, from a rule built by [`time_rule`].
pub fn cumulate(rule: &[(f64, f64, usize)], values: &[f64], n_stamps: usize) -> Vec<f64> {
    let mut per = vec![0.0; n_stamps];
    for ((_, w, k), v) in rule.iter().zip(values) {
        if *k < n_stamps {
            per[*k] += w * v;
        }
    }
    let mut acc = 0.0;
    per.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn check_stamps(stamps: &[f64]) -> Result<()> {
    if stamps.is_empty() || stamps.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || stamps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("stamps must be finite, nonnegative and sorted".into()));
    }
    Ok(())
}

fn breakpoints(flux: &BoundaryFlux, model: &PointModel) -> Vec<f64> {
    flux.signal
        .knots()
        .iter()
        .chain(model.phibar.knots())
        .cloned()
        .collect()
}

/// `c*(t) = ∫₀ᵗ ‖φ(τ) − d∇û(τ)·n‖²_{L²(Γ)} dτ` at every stamp.
pub fn c_star(disc: &CurveDiscretization, flux: &BoundaryFlux, model: &PointModel, stamps: &[f64]) -> Result<Series> {
    check_stamps(stamps)?;
    let g = flux.profile_values(disc.n_nodes())?;
    let rule = time_rule(&breakpoints(flux, model), stamps);
    let vals: Vec<f64> = rule
        .par_iter()
        .map(|(tau, _, _)| {
            let model_flux = model.flux_on_curve(disc, *tau)?;
            let f = flux.signal.eval(*tau);
            Ok(disc
                .weights
                .iter()
                .zip(&g)
                .zip(&model_flux)
                .map(|((w, gj), fj)| w * (gj * f - fj).powi(2))
                .sum())
        })
        .collect::<Result<_>>()?;
    Ok(Series {
        times: stamps.to_vec(),
        values: cumulate(&rule, &vals, stamps.len()),
    })
}

/// `∫₀ᵗ ‖φ‖²_{L²(Γ)}` in closed form.
pub fn flux_energy(disc: &CurveDiscretization, flux: &BoundaryFlux, t: f64) -> Result<f64> {
    let g = flux.profile_values(disc.n_nodes())?;
    let g2: f64 = disc.weights.iter().zip(&g).map(|(w, v)| w * v * v).sum();
    Ok(g2 * flux.signal.l2_norm_sq(t))
}

/// `∫₀ᵗ ‖φ̄‖²_{L¹(0,τ)} dτ` against `½t²‖φ̄‖²_{L²(0,T)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Integral {
    pub value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Exact piecewise-polynomial evaluation; `horizon` is the `T` of the `L²(0,T)` norm.
pub fn phibar_l1_integral(phibar: &TimeSignal, t: f64, horizon: f64) -> Result<L1Integral> {
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::Precondition(format!("need 0 ≤ t ≤ T, got t = {t}, T = {horizon}")));
    }
    let value = l1_sq_integral(phibar, t);
    let bound = 0.5 * t * t * phibar.l2_norm_sq(horizon);
    Ok(L1Integral {
        value,
        bound,
        satisfied: value <= bound,
    })
}

/// `∫₀ᵗ A(τ)² dτ` with `A(τ) = ∫₀^τ |φ̄|`, piecewise quadratic.
fn l1_sq_integral(phibar: &TimeSignal, t: f64) -> f64 {
    // Three Gauss points integrate the quartic A² exactly.
    let rule = GaussLegendre::new(3);
    let mut acc_a = 0.0;
    let mut total = 0.0;
    for seg in phibar.abs_segments(t) {
        let h = seg.end - seg.start;
        let (p, q) = (seg.v_start, seg.v_end);
        let a0 = acc_a;
        total += rule.integrate(seg.start, seg.end, |tau| {
            let x = tau - seg.start;
            let a = a0 + p * x + (q - p) * x * x / (2.0 * h);
            a * a
        });
        acc_a += 0.5 * (p + q) * h;
    }
    total
}

/// The three terms of the upper bound for `c*` and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub time: f64,
    /// `2∫‖φ‖²`.
    pub flux_term: f64,
    /// `2·(2q c² d² |Γ|/(2−q)) t^{2/q−1} ‖∇û₀‖²_{Lᵖ}`.
    pub initial_term: f64,
    /// `2·2d² C_Γ ∫‖φ̄‖²_{L¹(0,τ)} dτ`.
    pub source_term: f64,
    pub total: f64,
}

/// Upper bound for `c*` at every stamp.
///
/// `c = q^{−1/q}(4πd)^{1/q−1}` is the exact constant of `‖G_t‖_{L^q} = c t^{1/q−1}`.
pub fn c_star_upper_bound(
    disc: &CurveDiscretization,
    flux: &BoundaryFlux,
    model: &PointModel,
    p: f64,
    stamps: &[f64],
) -> Result<Vec<BoundTerms>> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::Domain(format!("the bound needs 2 < p < ∞, got {p}")));
    }
    check_stamps(stamps)?;
    let d = model.params.d();
    let q = p / (p - 1.0);
    let c = lp_constant(q, model.params)?;
    let grad_norm = model.u0.grad_lp_norm(p, model.params)?;
    let length = disc.length();
    let cg = c_gamma(disc)?;
    let horizon = stamps.last().cloned().unwrap_or(0.0);
    stamps
        .iter()
        .map(|&t| {
            let flux_term = 2.0 * flux_energy(disc, flux, t)?;
            let initial_term = if grad_norm == 0.0 || t == 0.0 {
                0.0
            } else {
                2.0 * (2.0 * q * c * c * d * d * length / (2.0 - q)) * t.powf(2.0 / q - 1.0) * grad_norm * grad_norm
            };
            let source_term = 2.0 * 2.0 * d * d * cg * phibar_l1_integral(&model.phibar, t, horizon)?.value;
            Ok(BoundTerms {
                time: t,
                flux_term,
                initial_term,
                source_term,
                total: flux_term + initial_term + source_term,
            })
        })
        .collect()
}

/// Both sides of `∫₀ᵗ ‖d∇û·n‖² ≤ d² C_Γ ∫₀ᵗ ‖φ̄‖²_{L¹(0,τ)} dτ` for a pure source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxBoundReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub holds: bool,
}

impl FluxBoundReport {
    /// Smallest `rhs − lhs` over stamps.
    pub fn min_slack(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .map(|(l, r)| r - l)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn source_flux_bound(disc: &CurveDiscretization, model: &PointModel, stamps: &[f64]) -> Result<FluxBoundReport> {
    if !model.u0.is_empty() {
        return Err(Error::Precondition("the pure-source flux bound needs an empty initial mixture".into()));
    }
    let lhs = c_star(disc, &BoundaryFlux::zero(), model, stamps)?.values;
    let d = model.params.d();
    let cg = c_gamma(disc)?;
    let horizon = stamps.last().cloned().unwrap_or(0.0);
    let rhs = stamps
        .iter()
        .map(|&t| Ok(d * d * cg * phibar_l1_integral(&model.phibar, t, horizon)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let holds = lhs.iter().zip(&rhs).all(|(l, r)| l <= r);
    Ok(FluxBoundReport {
        times: stamps.to_vec(),
        lhs,
        rhs,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, BoundaryCurve};
    use crate::pointsource::GaussianMixture;
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize) -> CurveDiscretization {
        discretize(&BoundaryCurve::circle(r).unwrap(), n).unwrap()
    }

    #[test]
    fn c_gamma_circle_closed_form() {
        let want = 128.0 * (-4f64).exp() / PI;
        let v = c_gamma(&circle(1.0, 64)).unwrap();
        assert!((v - want).abs() < 1e-12 * want);
        assert!((v - 0.746_246_3).abs() < 1e-7);
        let v2 = c_gamma(&circle(2.0, 64)).unwrap();
        assert!((v2 - want / 32.0).abs() < 1e-12 * want);
    }

    #[test]
    fn constant_flux_without_model() {
        let model = PointModel::new(GaussianMixture::empty(), TimeSignal::zero(), HeatKernelParams::new(1.0).unwrap());
        let g = 0.7;
        let s = c_star(&circle(1.0, 32), &BoundaryFlux::constant(g), &model, &[0.5, 1.0, 2.5]).unwrap();
        for (t, v) in s.times.iter().zip(&s.values) {
            assert!((v - 2.0 * PI * g * g * t).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_integral_closed_forms() {
        let r = phibar_l1_integral(&TimeSignal::constant(1.0), 2.0, 2.0).unwrap();
        assert!((r.value - 8.0 / 3.0).abs() < 1e-14);
        assert!((r.bound - 4.0).abs() < 1e-14);
        assert!(r.satisfied);
        let z = phibar_l1_integral(&TimeSignal::zero(), 1.0, 1.0).unwrap();
        assert_eq!((z.value, z.bound, z.satisfied), (0.0, 0.0, true));
        assert!(phibar_l1_integral(&TimeSignal::zero(), 2.0, 1.0).is_err());
    }

    #[test]
    fn time_rule_respects_breakpoints_and_stamps() {
        let rule = time_rule(&[0.0, 0.33], &[0.25, 1.0]);
        let total: f64 = rule.iter().map(|r| r.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for (x, _, k) in &rule {
            assert_eq!(*k, usize::from(*x > 0.25));
        }
        let v = cumulate(&rule, &vec![1.0; rule.len()], 2);
        assert!((v[0] - 0.25).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bound_rejects_small_p() {
        let model = PointModel::new(GaussianMixture::empty(), TimeSignal::zero(), HeatKernelParams::new(1.0).unwrap());
        assert!(c_star_upper_bound(&circle(1.0, 16), &BoundaryFlux::zero(), &model, 2.0, &[1.0]).is_err());
    }

    #[test]
    fn source_bound_requires_empty_mixture() {
        let model = PointModel::new(
            GaussianMixture::single(1.0, [0.0, 0.0], 0.1).unwrap(),
            TimeSignal::zero(),
            HeatKernelParams::new(1.0).unwrap(),
        );
        assert!(matches!(source_flux_bound(&circle(1.0, 16), &model, &[1.0]), Err(Error::Precondition(_))));
    }
}
