//! Searching for a source signal `φ̄` and interior initial mass `v₀` that make `c*(T)` small.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{c_star, cumulate, time_rule};
use crate::exterior::BoundaryFlux;
use crate::geometry::{discretize, min_radius, BoundaryCurve, CurveDiscretization};
use crate::green::HeatKernelParams;
use crate::pointsource::{GaussianMixture, MixtureComponent, PointModel, TimeSignal};
use crate::quadrature::{composite, gl16, periodic_trapezoid};
use crate::Point;

/// Nelder–Mead coefficients: reflection, expansion, contraction, shrink.
pub const NM_COEFFS: [f64; 4] = [1.0, 2.0, 0.5, 0.5];

/// Fixed centre and shape of one adjustable interior bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorBump {
    pub center: Point,
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingProblem {
    pub curve: BoundaryCurve,
    pub d: f64,
    pub flux: BoundaryFlux,
    pub horizon: f64,
    /// Number of equispaced knots of `φ̄` on `[0, T]`.
    pub phibar_knots: usize,
    #[serde(default)]
    pub v0: Vec<InteriorBump>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "yes")]
    pub nonneg_phibar: bool,
    /// Part of `û₀` that is not searched over.
    #[serde(default)]
    pub fixed_u0: GaussianMixture,
    #[serde(default = "default_gamma_nodes")]
    pub gamma_nodes: usize,
}

fn yes() -> bool {
    true
}

fn default_gamma_nodes() -> usize {
    64
}

/// `(diameter of Γ)² / d`.
pub fn transition_timescale(curve: &BoundaryCurve, params: HeatKernelParams) -> f64 {
    curve.diameter().powi(2) / params.d()
}

impl MatchingProblem {
    /// Unit circle, `d = 1`, `φ ≡ 1/(2π)`, `T = 4`, 8 knots and one central bump of shape 0.05.
    pub fn reference() -> Self {
        Self {
            curve: BoundaryCurve::circle(1.0).expect("unit circle"),
            d: 1.0,
            flux: BoundaryFlux::constant(1.0 / (2.0 * std::f64::consts::PI)),
            horizon: 4.0,
            phibar_knots: 8,
            v0: vec![InteriorBump {
                center: [0.0, 0.0],
                shape: 0.05,
            }],
            lambda: 0.0,
            nonneg_phibar: true,
            fixed_u0: GaussianMixture::empty(),
            gamma_nodes: 64,
        }
    }

    pub fn params(&self) -> Result<HeatKernelParams> {
        HeatKernelParams::new(self.d)
    }

    pub fn dim(&self) -> usize {
        self.phibar_knots + self.v0.len()
    }

    pub fn knots(&self) -> Vec<f64> {
        let n = self.phibar_knots;
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|k| self.horizon * k as f64 / (n - 1) as f64).collect()
    }

    pub fn discretization(&self) -> Result<CurveDiscretization> {
        discretize(&self.curve, self.gamma_nodes)
    }

    /// Collects every violated constraint on the problem itself.
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
        if self.phibar_knots == 0 {
            bad.push("phibar_knots: must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bad.push(format!("lambda: must be nonnegative, got {}", self.lambda));
        }
        if self.gamma_nodes < 8 {
            bad.push("gamma_nodes: must be at least 8".into());
        }
        if self.fixed_u0.components().iter().any(|c| c.interior) {
            bad.push("fixed_u0: interior components belong in v0".into());
        }
        if bad.is_empty() {
            for (k, b) in self.v0.iter().enumerate() {
                if let Some(msg) = self.leakage_violation(b) {
                    bad.push(format!("v0[{k}]: {msg}"));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Constraint(bad))
        }
    }

    /// `|c| + 3√(2ds) ≤ 0.95 ×` distance from the origin to Γ along the ray through `c`.
    fn leakage_violation(&self, b: &InteriorBump) -> Option<String> {
        if !(b.shape > 0.0 && b.shape.is_finite()) {
            return Some("shape must be positive".into());
        }
        let r = b.center[0].hypot(b.center[1]);
        let reach = if r == 0.0 {
            min_radius(&self.curve).ok()?
        } else {
            self.curve.radius(b.center[1].atan2(b.center[0]))
        };
        let spread = r + 3.0 * (2.0 * self.d * b.shape).sqrt();
        (spread > 0.95 * reach).then(|| format!("|c| + 3√(2ds) = {spread:.6} exceeds 0.95 × {reach:.6}"))
    }

    /// Fraction of each bump's mass lying outside Γ at `t = 0`.
    pub fn leakage_fractions(&self) -> Result<Vec<f64>> {
        let params = self.params()?;
        Ok(self
            .v0
            .iter()
            .map(|b| {
                let bump = GaussianMixture::single(1.0, b.center, b.shape).expect("validated shape");
                let inside = periodic_trapezoid(512, |theta| {
                    let (c, s) = (theta.cos(), theta.sin());
                    composite(gl16(), 0.0, self.curve.radius(theta), 8, |r| r * bump.eval([r * c, r * s], 0.0, params))
                });
                (1.0 - inside).max(0.0)
            })
            .collect())
    }

    fn signal(&self, values: &[f64]) -> Result<TimeSignal> {
        TimeSignal::new(self.knots(), values.to_vec())
    }

    /// `û₀` for the given bump weights.
    pub fn initial_mixture(&self, weights: &[f64]) -> Result<GaussianMixture> {
        let mut comps = self.fixed_u0.components().to_vec();
        comps.extend(self.v0.iter().zip(weights).map(|(b, w)| MixtureComponent {
            weight: *w,
            center: b.center,
            shape: b.shape,
            interior: true,
        }));
        GaussianMixture::new(comps)
    }

    /// Point model for a parameter vector `[φ̄ knot values…, bump weights…]`.
    pub fn point_model(&self, theta: &[f64]) -> Result<PointModel> {
        let (phi, w) = theta.split_at(self.phibar_knots);
        Ok(PointModel::new(self.initial_mixture(w)?, self.signal(phi)?, self.params()?)
            .with_r_min(1e-3 * min_radius(&self.curve)?))
    }

    /// Clamps `φ̄` at zero when required and bump weights at zero.
    pub fn project(&self, theta: &mut [f64]) {
        let n = self.phibar_knots;
        for (k, v) in theta.iter_mut().enumerate() {
            if (k < n && self.nonneg_phibar) || k >= n {
                *v = v.max(0.0);
            }
        }
    }

    fn violations(&self, theta: &[f64]) -> Vec<String> {
        let n = self.phibar_knots;
        let mut bad = Vec::new();
        if theta.len() != self.dim() {
            bad.push(format!("expected {} parameters, got {}", self.dim(), theta.len()));
            return bad;
        }
        for (k, v) in theta.iter().enumerate() {
            if !v.is_finite() {
                bad.push(format!("parameter {k} is not finite"));
            } else if k < n && self.nonneg_phibar && *v < 0.0 {
                bad.push(format!("phibar knot {k} is negative ({v})"));
            } else if k >= n && *v < 0.0 {
                bad.push(format!("v0 weight {} is negative ({v})", k - n));
            }
        }
        bad
    }
}

/// `φ̄(t) = ∫_Γ φ(·, t) dσ` at the knots, zero bump weights.
pub fn naive_baseline(problem: &MatchingProblem) -> Result<Vec<f64>> {
    let disc = problem.discretization()?;
    let g = problem.flux.profile_values(disc.n_nodes())?;
    let total = disc.integrate(&g);
    let mut theta: Vec<f64> = problem.knots().iter().map(|t| total * problem.flux.signal.eval(*t)).collect();
    theta.extend(std::iter::repeat(0.0).take(problem.v0.len()));
    Ok(theta)
}

/// `c*(T) + λ‖φ̄‖²` evaluated directly through the mismatch functional.
pub fn objective(problem: &MatchingProblem, theta: &[f64]) -> Result<f64> {
    problem.validate()?;
    let bad = problem.violations(theta);
    if !bad.is_empty() {
        return Err(Error::Constraint(bad));
    }
    let model = problem.point_model(theta)?;
    let cs = c_star(&problem.discretization()?, &problem.flux, &model, &[problem.horizon])?;
    Ok(cs.values[0] + problem.lambda * model.phibar.l2_norm_sq(problem.horizon))
}

/// The objective as an exact quadratic form in the parameters.
///
/// The model flux is linear in `(φ̄, v₀)`, so `c*(T) = c₀ − 2bᵀθ + θᵀAθ` on the same time rule.
#[derive(Debug, Clone)]
pub struct Objective {
    problem: MatchingProblem,
    c0: f64,
    b: Vec<f64>,
    a: Vec<Vec<f64>>,
}

impl Objective {
    pub fn new(problem: &MatchingProblem) -> Result<Self> {
        problem.validate()?;
        let params = problem.params()?;
        let disc = problem.discretization()?;
        let n_gamma = disc.n_nodes();
        let g = problem.flux.profile_values(n_gamma)?;
        let knots = problem.knots();
        let dim = problem.dim();
        let r_min = 1e-3 * min_radius(&problem.curve)?;
        let mut basis = Vec::with_capacity(dim);
        for j in 0..problem.phibar_knots {
            basis.push(PointModel::new(GaussianMixture::empty(), TimeSignal::hat(&knots, j)?, params).with_r_min(r_min));
        }
        for b in &problem.v0 {
            basis.push(PointModel::new(GaussianMixture::single(1.0, b.center, b.shape)?, TimeSignal::zero(), params));
        }
        let fixed = PointModel::new(problem.fixed_u0.clone(), TimeSignal::zero(), params);
        let breaks: Vec<f64> = knots.iter().chain(problem.flux.signal.knots()).cloned().collect();
        let rule = time_rule(&breaks, &[problem.horizon]);
        // Per rule node: (c₀, b, A) contributions.
        let parts: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> = rule
            .par_iter()
            .map(|(tau, _, _)| {
                let f = problem.flux.signal.eval(*tau);
                let offset = fixed.flux_on_curve(&disc, *tau)?;
                let target: Vec<f64> = (0..n_gamma).map(|j| g[j] * f - offset[j]).collect();
                let fl: Vec<Vec<f64>> = basis.iter().map(|m| m.flux_on_curve(&disc, *tau)).collect::<Result<_>>()?;
                let dot = |x: &[f64], y: &[f64]| -> f64 { (0..n_gamma).map(|j| disc.weights[j] * x[j] * y[j]).sum() };
                let c0 = dot(&target, &target);
                let b: Vec<f64> = fl.iter().map(|fk| dot(&target, fk)).collect();
                let a: Vec<Vec<f64>> = fl.iter().map(|fk| fl.iter().map(|fl| dot(fk, fl)).collect()).collect();
                Ok((c0, b, a))
            })
            .collect::<Result<_>>()?;
        let acc = |f: &dyn Fn(&(f64, Vec<f64>, Vec<Vec<f64>>)) -> f64| -> f64 {
            let vals: Vec<f64> = parts.iter().map(f).collect();
            cumulate(&rule, &vals, 1)[0]
        };
        let c0 = acc(&|p| p.0);
        let b = (0..dim).map(|k| acc(&|p| p.1[k])).collect();
        let a = (0..dim).map(|k| (0..dim).map(|l| acc(&|p| p.2[k][l])).collect()).collect();
        Ok(Self {
            problem: problem.clone(),
            c0,
            b,
            a,
        })
    }

    pub fn problem(&self) -> &MatchingProblem {
        &self.problem
    }

    /// `c*(T)` part only, clamped at zero against cancellation.
    pub fn c_star(&self, theta: &[f64]) -> f64 {
        let n = theta.len();
        let mut q = self.c0;
        for k in 0..n {
            q -= 2.0 * self.b[k] * theta[k];
            for l in 0..n {
                q += theta[k] * self.a[k][l] * theta[l];
            }
        }
        q.max(0.0)
    }

    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        let bad = self.problem.violations(theta);
        if !bad.is_empty() {
            return Err(Error::Constraint(bad));
        }
        let reg = if self.problem.lambda > 0.0 {
            self.problem.lambda * self.problem.signal(&theta[..self.problem.phibar_knots])?.l2_norm_sq(self.problem.horizon)
        } else {
            0.0
        };
        Ok(self.c_star(theta) + reg)
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub params: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub seed: u64,
    pub budget: usize,
    pub iterates: Vec<Iterate>,
    /// Best objective after each evaluation.
    pub best_so_far: Vec<f64>,
    pub best: Vec<f64>,
    pub best_objective: f64,
    pub baseline: Vec<f64>,
    pub baseline_objective: f64,
    pub converged: bool,
    pub transition_timescale: f64,
    pub leakage: Vec<f64>,
}

impl OptimizationTrace {
    pub fn reduction(&self) -> f64 {
        if self.baseline_objective > 0.0 {
            self.best_objective / self.baseline_objective
        } else {
            0.0
        }
    }
}

struct Recorder<'a> {
    objective: &'a Objective,
    trace: OptimizationTrace,
}

impl Recorder<'_> {
    fn exhausted(&self) -> bool {
        self.trace.iterates.len() >= self.trace.budget
    }

    fn eval(&mut self, mut x: Vec<f64>) -> Result<(Vec<f64>, f64)> {
        self.objective.problem.project(&mut x);
        let f = self.objective.eval(&x)?;
        if f < self.trace.best_objective {
            self.trace.best = x.clone();
            self.trace.best_objective = f;
        }
        self.trace.best_so_far.push(self.trace.best_objective);
        self.trace.iterates.push(Iterate {
            params: x.clone(),
            objective: f,
        });
        Ok((x, f))
    }
}

fn affine(c: &[f64], x: &[f64], s: f64) -> Vec<f64> {
    c.iter().zip(x).map(|(ci, xi)| ci + s * (xi - ci)).collect()
}

/// Nelder–Mead from the naive baseline, projected onto the feasible set.
///
/// The seed only jitters the initial simplex steps.
pub fn optimize(problem: &MatchingProblem, budget: usize, seed: u64) -> Result<OptimizationTrace> {
    let objective = Objective::new(problem)?;
    optimize_with(&objective, budget, seed)
}

pub fn optimize_with(objective: &Objective, budget: usize, seed: u64) -> Result<OptimizationTrace> {
    let problem = &objective.problem;
    let n = problem.dim();
    if budget < n + 2 {
        return Err(Error::Precondition(format!("budget {budget} is below dimension + 2 = {}", n + 2)));
    }
    let [alpha, gamma, rho, sigma] = NM_COEFFS;
    let baseline = naive_baseline(problem)?;
    let mut rec = Recorder {
        objective,
        trace: OptimizationTrace {
            seed,
            budget,
            iterates: Vec::new(),
            best_so_far: Vec::new(),
            best: baseline.clone(),
            best_objective: f64::INFINITY,
            baseline: baseline.clone(),
            baseline_objective: 0.0,
            converged: false,
            transition_timescale: transition_timescale(&problem.curve, problem.params()?),
            leakage: problem.leakage_fractions()?,
        },
    };
    let (x0, f0) = rec.eval(baseline)?;
    rec.trace.baseline_objective = f0;
    if f0 == 0.0 {
        rec.trace.converged = true;
        return Ok(rec.trace);
    }
    let scale = x0[..problem.phibar_knots].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let weight_scale = scale * rec.trace.transition_timescale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut simplex = vec![(x0.clone(), f0)];
    for k in 0..n {
        let base = if k < problem.phibar_knots { scale } else { weight_scale };
        let step = 0.1 * x0[k].abs().max(base) * (1.0 + rng.gen_range(-0.1..0.1));
        let mut x = x0.clone();
        x[k] += step;
        simplex.push(rec.eval(x)?);
    }
    while !rec.exhausted() {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (f_best, f_worst) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if f_worst - f_best <= 1e-14 * f_best.abs() || size <= 1e-12 * scale {
            rec.trace.converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for k in 0..n {
                centroid[k] += x[k] / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let (xr, fr) = rec.eval(affine(&centroid, &worst, -alpha))?;
        if fr < f_best {
            if rec.exhausted() {
                simplex[n] = (xr, fr);
                break;
            }
            let (xe, fe) = rec.eval(affine(&centroid, &xr, gamma))?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if rec.exhausted() {
            break;
        }
        let (xc, fc) = if fr < f_worst {
            rec.eval(affine(&centroid, &xr, rho))?
        } else {
            rec.eval(affine(&centroid, &worst, rho))?
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for k in 1..=n {
            if rec.exhausted() {
                break;
            }
            simplex[k] = rec.eval(affine(&best, &simplex[k].0, sigma))?;
        }
    }
    Ok(rec.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small() -> MatchingProblem {
        MatchingProblem {
            phibar_knots: 4,
            gamma_nodes: 16,
            horizon: 2.0,
            ..MatchingProblem::reference()
        }
    }

    #[test]
    fn timescales() {
        let p1 = HeatKernelParams::new(1.0).unwrap();
        let p2 = HeatKernelParams::new(2.0).unwrap();
        let c = BoundaryCurve::circle(1.0).unwrap();
        assert!((transition_timescale(&c, p1) - 4.0).abs() < 1e-12);
        assert!((transition_timescale(&c, p2) - 2.0).abs() < 1e-12);
        let e = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        assert!((transition_timescale(&e, p1) - 16.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_is_total_influx() {
        let th = naive_baseline(&MatchingProblem::reference()).unwrap();
        assert_eq!(th.len(), 9);
        for v in &th[..8] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(th[8], 0.0);
        let zero = MatchingProblem {
            flux: BoundaryFlux::zero(),
            ..MatchingProblem::reference()
        };
        assert!(naive_baseline(&zero).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn central_bump_leakage() {
        let f = MatchingProblem::reference().leakage_fractions().unwrap();
        let want = (-1.0f64 / (4.0 * 0.05)).exp();
        assert!((f[0] - want).abs() < 1e-9, "{} vs {want}", f[0]);
    }

    #[test]
    fn leakage_rule_is_enforced() {
        let mut p = MatchingProblem::reference();
        p.v0[0].shape = 0.06;
        assert!(matches!(p.validate(), Err(Error::Constraint(_))));
        p.v0[0] = InteriorBump {
            center: [0.5, 0.0],
            shape: 0.02,
        };
        assert!(matches!(p.validate(), Err(Error::Constraint(_))));
    }

    #[test]
    fn infeasible_parameters_listed() {
        let p = small();
        match objective(&p, &[-1.0, 1.0, 1.0, 1.0, -2.0]) {
            Err(Error::Constraint(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadratic_form_matches_direct_evaluation() {
        let p = small();
        let q = Objective::new(&p).unwrap();
        for theta in [vec![1.0, 1.0, 1.0, 1.0, 0.0], vec![2.0, 0.5, 0.0, 1.5, 0.3]] {
            let a = q.eval(&theta).unwrap();
            let b = objective(&p, &theta).unwrap();
            assert!((a - b).abs() < 1e-10 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn baseline_objective_closed_form() {
        let p = small();
        let th = naive_baseline(&p).unwrap();
        let want = composite(gl16(), 0.0, 2.0, 64, |t| (1.0 - (-1.0 / (4.0 * t)).exp()).powi(2)) / (2.0 * PI);
        let got = objective(&p, &th).unwrap();
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn zero_problem_stops_at_once() {
        let p = MatchingProblem {
            flux: BoundaryFlux::zero(),
            ..small()
        };
        let tr = optimize(&p, 50, 1).unwrap();
        assert_eq!(tr.iterates.len(), 1);
        assert_eq!(tr.best_objective, 0.0);
        assert!(tr.converged);
    }

    #[test]
    fn budget_too_small() {
        assert!(matches!(optimize(&small(), 6, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn search_improves_and_is_deterministic() {
        let p = small();
        let a = optimize(&p, 120, 7).unwrap();
        let b = optimize(&p, 120, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.best_objective <= a.baseline_objective);
        assert!(a.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.iterates.len() <= 120);
    }
}
