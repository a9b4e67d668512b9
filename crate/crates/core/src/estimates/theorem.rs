use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::golden_section_max;

/// Per-stamp data of one comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremInputs {
    pub times: Vec<f64>,
    /// `‖u − û‖²_{L²(Ω)}`.
    pub l2_sq: Vec<f64>,
    /// `‖u − û‖²_{H¹(Ω)}`.
    pub h1_sq: Vec<f64>,
    pub c_star: Vec<f64>,
    pub trace_constant: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub epsilon_grid: Vec<f64>,
    /// `[ε][stamp]` ratios `‖w‖² / ((c̄²/ε) c* e^{εt})`.
    pub l2_margins: Vec<Vec<f64>>,
    /// `[ε][stamp]` ratios `∫‖w‖²_{H¹} / ((2dc̄²/(ε²(2d−ε))) c* e^{εt})`.
    pub h1_margins: Vec<Vec<f64>>,
    /// `∫₀ᵗ ‖w‖²_{H¹}` by the trapezoid rule over stamps.
    pub h1_integral: Vec<f64>,
    pub best_epsilon_l2: Vec<f64>,
    pub best_epsilon_h1: Vec<f64>,
    pub slack: f64,
    pub max_margin: f64,
    pub pass: bool,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

/// `ε` minimising `e^{εt}/ε` on `(0, 2d)`.
pub fn optimal_epsilon_l2(t: f64, d: f64) -> f64 {
    let hi = 2.0 * d * (1.0 - 1e-9);
    if t <= 0.0 {
        return hi;
    }
    (1.0 / t).min(hi)
}

/// `ε` minimising `e^{εt}/(ε²(2d − ε))` on `(0, 2d)`.
pub fn optimal_epsilon_h1(t: f64, d: f64) -> f64 {
    let two_d = 2.0 * d;
    let (x, _) = golden_section_max(
        |e| -(e * t - 2.0 * e.ln() - (two_d - e).ln()),
        two_d * 1e-9,
        two_d * (1.0 - 1e-9),
        1e-12,
    );
    x
}

/// Checks both error estimates for every `ε` and stamp; passes when every margin is at most `1 + slack`.
pub fn verify_main_theorem(inputs: &TheoremInputs, epsilon_grid: &[f64], slack: f64) -> Result<TheoremReport> {
    let d = inputs.d;
    if epsilon_grid.iter().any(|e| !(*e > 0.0 && *e < 2.0 * d)) {
        return Err(Error::Domain(format!("every ε must lie in (0, {})", 2.0 * d)));
    }
    let n = inputs.times.len();
    if inputs.l2_sq.len() != n || inputs.h1_sq.len() != n || inputs.c_star.len() != n {
        return Err(Error::Precondition("theorem inputs have mismatched lengths".into()));
    }
    let mut h1_integral = vec![0.0; n];
    for k in 1..n {
        h1_integral[k] = h1_integral[k - 1]
            + 0.5 * (inputs.times[k] - inputs.times[k - 1]) * (inputs.h1_sq[k] + inputs.h1_sq[k - 1]);
    }
    let cbar2 = inputs.trace_constant * inputs.trace_constant;
    let mut l2_margins = Vec::new();
    let mut h1_margins = Vec::new();
    for &eps in epsilon_grid {
        let c1 = cbar2 / eps;
        let c2 = 2.0 * d * cbar2 / (eps * eps * (2.0 * d - eps));
        l2_margins.push(
            (0..n)
                .map(|k| ratio(inputs.l2_sq[k], c1 * inputs.c_star[k] * (eps * inputs.times[k]).exp()))
                .collect::<Vec<_>>(),
        );
        h1_margins.push(
            (0..n)
                .map(|k| ratio(h1_integral[k], c2 * inputs.c_star[k] * (eps * inputs.times[k]).exp()))
                .collect::<Vec<_>>(),
        );
    }
    let max_margin = l2_margins
        .iter()
        .chain(&h1_margins)
        .flatten()
        .cloned()
        .fold(0.0, f64::max);
    Ok(TheoremReport {
        epsilon_grid: epsilon_grid.to_vec(),
        best_epsilon_l2: inputs.times.iter().map(|t| optimal_epsilon_l2(*t, d)).collect(),
        best_epsilon_h1: inputs.times.iter().map(|t| optimal_epsilon_h1(*t, d)).collect(),
        l2_margins,
        h1_margins,
        h1_integral,
        slack,
        pass: max_margin <= 1.0 + slack,
        max_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(l2: f64) -> TheoremInputs {
        TheoremInputs {
            times: vec![0.0, 1.0, 2.0],
            l2_sq: vec![0.0, l2, l2],
            h1_sq: vec![0.0, 2.0 * l2, 2.0 * l2],
            c_star: vec![0.0, 1.0, 2.0],
            trace_constant: 0.5,
            d: 1.0,
        }
    }

    #[test]
    fn identical_models_have_zero_margins() {
        let r = verify_main_theorem(&inputs(0.0), &[0.5, 1.0, 1.5], 0.05).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_margin, 0.0);
    }

    #[test]
    fn epsilon_outside_range_rejected() {
        assert!(verify_main_theorem(&inputs(0.0), &[2.0], 0.05).is_err());
        assert!(verify_main_theorem(&inputs(0.0), &[0.0], 0.05).is_err());
    }

    #[test]
    fn h1_margin_vanishes_near_upper_end() {
        let a = verify_main_theorem(&inputs(0.1), &[1.9], 0.05).unwrap();
        let b = verify_main_theorem(&inputs(0.1), &[1.999_999], 0.05).unwrap();
        assert!(b.h1_margins[0][2] < a.h1_margins[0][2] * 1e-4);
    }

    #[test]
    fn optimal_epsilons() {
        assert!((optimal_epsilon_l2(2.0, 1.0) - 0.5).abs() < 1e-15);
        let e = optimal_epsilon_h1(1.0, 1.0);
        // Stationarity: t − 2/ε + 1/(2d − ε) = 0.
        assert!((1.0 - 2.0 / e + 1.0 / (2.0 - e)).abs() < 1e-6);
    }
}
