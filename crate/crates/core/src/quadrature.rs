//! One-dimensional quadrature and scalar search helpers shared by every module.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 16-point rule used by the panel integrators.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Tolerances for [`adaptive_panels`].
#[derive(Debug, Clone, Copy)]
pub struct PanelTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Default for PanelTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-300,
            max_panels: 4096,
        }
    }
}

/// Adaptive 16-point Gauss–Legendre panels on `[a, b]`.
///
/// The interval is first cut into `initial` panels. A panel is accepted when its
/// one-panel estimate and the sum over its two halves agree within the
/// tolerance share of that panel; otherwise the halves are refined. The
/// tolerance is relative to a coarse estimate of `∫|f|`.
pub fn adaptive_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    initial: usize,
    tol: PanelTolerance,
) -> Estimate {
    if b <= a {
        return Estimate {
            value: 0.0,
            error: 0.0,
            panels: 0,
        };
    }
    let rule = gl16();
    let initial = initial.max(1);
    let h = (b - a) / initial as f64;
    let mut pending: Vec<(f64, f64, f64)> = Vec::with_capacity(initial * 2);
    let mut scale = 0.0;
    for k in 0..initial {
        let lo = a + h * k as f64;
        let hi = if k + 1 == initial { b } else { lo + h };
        let mut abs_sum = 0.0;
        let mut sum = 0.0;
        for (x, w) in rule.mapped(lo, hi) {
            let v = f(x);
            sum += w * v;
            abs_sum += w * v.abs();
        }
        scale += abs_sum;
        pending.push((lo, hi, sum));
    }
    let budget = (tol.rel * scale).max(tol.abs);
    let total_width = b - a;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0usize;
    // Depth-first keeps the summation order deterministic.
    pending.reverse();
    while let Some((lo, hi, whole)) = pending.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let diff = (left + right - whole).abs();
        let share = budget * (hi - lo) / total_width;
        panels += 1;
        if diff <= share || panels + pending.len() >= tol.max_panels || hi - lo < 1e-14 * total_width {
            value += left + right;
            error += diff;
        } else {
            pending.push((mid, hi, right));
            pending.push((lo, mid, left));
        }
    }
    Estimate {
        value,
        error,
        panels,
    }
}

/// Composite Gauss–Legendre rule with `panels` equal panels of an `order`-point rule.
pub fn composite<F: FnMut(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + h * k as f64;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// Golden-section search for the maximiser of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs() + d.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Grid scan followed by golden-section refinement around the best grid cell.
pub fn bracketed_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, grid: usize, tol: f64) -> (f64, f64) {
    let h = (b - a) / grid as f64;
    let mut best = (a, f(a));
    for k in 1..=grid {
        let x = a + h * k as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let lo = (best.0 - h).max(a);
    let hi = (best.0 + h).min(b);
    golden_section_max(f, lo, hi, tol)
}

/// Periodic trapezoid sum `Σ f(θ_j) · 2π/n` with `θ_j = 2πj/n`.
pub fn periodic_trapezoid<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> f64 {
    let h = 2.0 * PI / n as f64;
    (0..n).map(|j| f(h * j as f64)).sum::<f64>() * h
}
