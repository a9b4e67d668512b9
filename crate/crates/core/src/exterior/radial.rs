use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SolveOptions;
use crate::error::{Error, Result};
use crate::green::HeatKernelParams;
use crate::pointsource::TimeSignal;

/// Radially symmetric solution on `[R, R_∞]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTrajectory {
    pub r: Vec<f64>,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

impl RadialTrajectory {
    /// `‖u‖_{L²}` of stamp `k` on the annulus.
    pub fn l2(&self, k: usize) -> f64 {
        trapezoid_2pi_r(&self.r, |i| self.fields[k][i].powi(2)).sqrt()
    }

    /// Linear interpolation of stamp `k` at radius `r`.
    pub fn interpolate(&self, k: usize, r: f64) -> f64 {
        let n = self.r.len();
        let h = self.r[1] - self.r[0];
        let x = ((r - self.r[0]) / h).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let w = x - i as f64;
        self.fields[k][i] * (1.0 - w) + self.fields[k][i + 1] * w
    }
}

fn trapezoid_2pi_r<F: Fn(usize) -> f64>(r: &[f64], f: F) -> f64 {
    let n = r.len();
    let h = r[1] - r[0];
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            w * h * 2.0 * PI * r[i] * f(i)
        })
        .sum()
}

/// Crank–Nicolson for `u_t = d(u_rr + u_r/r)` with `∂u/∂r = −φ/d` at `R` and `u = 0` at `R_∞`.
///
/// Uses centred non-conservative differences, independent of the 2D stencil.
pub fn solve_radial_oracle(
    r_in: f64,
    r_inf: f64,
    u0: &dyn Fn(f64) -> f64,
    flux_amplitude: &TimeSignal,
    opts: &SolveOptions,
    n_r: usize,
    params: HeatKernelParams,
) -> Result<RadialTrajectory> {
    opts.validate()?;
    if !(r_in > 0.0 && r_inf > r_in) || n_r < 3 {
        return Err(Error::Precondition("radial oracle needs 0 < R < R_∞ and n_r ≥ 3".into()));
    }
    let d = params.d();
    let h = (r_inf - r_in) / (n_r - 1) as f64;
    let r: Vec<f64> = (0..n_r).map(|i| r_in + h * i as f64).collect();
    let n = n_r - 1;
    // Row i: lower, diag, upper of L.
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut forcing = vec![0.0; n];
    for i in 0..n {
        let a = 1.0 / (h * h) - 1.0 / (2.0 * r[i] * h);
        let c = 1.0 / (h * h) + 1.0 / (2.0 * r[i] * h);
        di[i] = -2.0 / (h * h);
        if i == 0 {
            // Ghost u_{−1} = u_1 + 2hφ/d.
            up[0] = c + a;
            forcing[0] = a * 2.0 * h / d;
        } else {
            lo[i] = a;
            if i + 1 < n {
                up[i] = c;
            }
        }
    }
    let dt = opts.dt();
    let alpha = 0.5 * dt * d;
    let (m_lo, m_di, m_up): (Vec<f64>, Vec<f64>, Vec<f64>) = (
        lo.iter().map(|v| -alpha * v).collect(),
        di.iter().map(|v| 1.0 - alpha * v).collect(),
        up.iter().map(|v| -alpha * v).collect(),
    );
    let thomas = |rhs: &mut [f64]| {
        let mut c = vec![0.0; n];
        let mut b = m_di[0];
        c[0] = m_up[0] / b;
        rhs[0] /= b;
        for i in 1..n {
            b = m_di[i] - m_lo[i] * c[i - 1];
            c[i] = m_up[i] / b;
            rhs[i] = (rhs[i] - m_lo[i] * rhs[i - 1]) / b;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
    };
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { lo[i] * u[i - 1] };
            out[i] = left + di[i] * u[i] + up[i] * u[i + 1];
        }
    };
    let mut u: Vec<f64> = r.iter().map(|&x| u0(x)).collect();
    u[n] = 0.0;
    let mut out = RadialTrajectory {
        r: r.clone(),
        times: vec![0.0],
        fields: vec![u.clone()],
        mass: vec![trapezoid_2pi_r(&r, |i| u[i])],
    };
    let f = |t: f64| flux_amplitude.eval(t);
    let mut buf = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let startup = if opts.rannacher { 2.min(opts.n_steps) } else { 0 };
    for step in 0..opts.n_steps {
        let t0 = dt * step as f64;
        let t1 = t0 + dt;
        if step < startup {
            for half in 1..=2 {
                let th = t0 + 0.5 * dt * half as f64;
                for i in 0..n {
                    rhs[i] = u[i] + alpha * f(th) * forcing[i];
                }
                thomas(&mut rhs);
                u[..n].copy_from_slice(&rhs);
            }
        } else {
            apply(&u, &mut buf);
            for i in 0..n {
                rhs[i] = u[i] + alpha * buf[i] + alpha * (f(t0) + f(t1)) * forcing[i];
            }
            thomas(&mut rhs);
            u[..n].copy_from_slice(&rhs);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                step,
                reason: "non-finite radial solution".into(),
            });
        }
        if (step + 1) % opts.stamp_every == 0 {
            out.times.push(t1);
            out.mass.push(trapezoid_2pi_r(&r, |i| u[i]));
            out.fields.push(u.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> HeatKernelParams {
        HeatKernelParams::new(1.0).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let tr = solve_radial_oracle(1.0, 12.0, &|_| 0.0, &TimeSignal::zero(), &SolveOptions::new(1.0, 10, 5), 50, p1())
            .unwrap();
        assert!(tr.fields.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_influx_grows_mass_at_unit_rate() {
        let phi = TimeSignal::constant(1.0 / (2.0 * PI));
        let tr = solve_radial_oracle(1.0, 30.0, &|_| 0.0, &phi, &SolveOptions::new(2.0, 200, 100), 1600, p1()).unwrap();
        let m = *tr.mass.last().unwrap();
        assert!((m - 2.0).abs() < 1e-3, "mass {m}");
    }
}
