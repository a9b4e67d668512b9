use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Piecewise-linear scalar function of time.
///
/// Knots start at zero and increase strictly. The signal is held at its last
/// value after the last knot, so a single knot describes a constant signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal", into = "RawSignal")]
pub struct TimeSignal {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawSignal> for TimeSignal {
    type Error = crate::Error;
    fn try_from(raw: RawSignal) -> Result<Self> {
        TimeSignal::new(raw.knots, raw.values)
    }
}

impl From<TimeSignal> for RawSignal {
    fn from(s: TimeSignal) -> Self {
        RawSignal {
            knots: s.knots,
            values: s.values,
        }
    }
}

/// One linear piece `[start, end]` with end values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub v_start: f64,
    pub v_end: f64,
}

impl Segment {
    #[inline]
    pub fn at(&self, s: f64) -> f64 {
        if self.end == self.start {
            return self.v_start;
        }
        self.v_start + (self.v_end - self.v_start) * (s - self.start) / (self.end - self.start)
    }

    pub fn slope(&self) -> f64 {
        if self.end == self.start {
            0.0
        } else {
            (self.v_end - self.v_start) / (self.end - self.start)
        }
    }
}

impl TimeSignal {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(domain("signal needs matching, nonempty knot and value lists"));
        }
        if knots[0] != 0.0 {
            return Err(domain("signal knots must start at t = 0"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(domain("signal knots must be finite and strictly increasing, values finite"));
        }
        Ok(Self { knots, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![0.0],
            values: vec![value],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Uniform knots `k·horizon/(n−1)` with the given values.
    pub fn uniform(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 1 {
            return Self::new(vec![0.0], values);
        }
        let knots = (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last_knot(&self) -> f64 {
        *self.knots.last().expect("nonempty")
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.knots.clone(), values)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= 0.0 || n == 1 {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let k = self.knots.partition_point(|&x| x <= t) - 1;
        let (a, b) = (self.knots[k], self.knots[k + 1]);
        self.values[k] + (self.values[k + 1] - self.values[k]) * (t - a) / (b - a)
    }

    /// Linear pieces covering `[0, t]`, including the constant tail after the last knot.
    pub fn segments(&self, t: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        if t <= 0.0 {
            return out;
        }
        for w in 0..self.knots.len().saturating_sub(1) {
            let (a, b) = (self.knots[w], self.knots[w + 1]);
            if a >= t {
                break;
            }
            let end = b.min(t);
            out.push(Segment {
                start: a,
                end,
                v_start: self.values[w],
                v_end: if end == b { self.values[w + 1] } else { self.eval(end) },
            });
        }
        let last = self.last_knot();
        if t > last {
            let v = self.values[self.values.len() - 1];
            out.push(Segment {
                start: last,
                end: t,
                v_start: v,
                v_end: v,
            });
        }
        out
    }

    /// Segments of `|φ̄|` on `[0, t]`, split at sign changes so each is linear.
    pub fn abs_segments(&self, t: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        for seg in self.segments(t) {
            if seg.v_start * seg.v_end < 0.0 {
                let z = seg.start + (seg.end - seg.start) * seg.v_start / (seg.v_start - seg.v_end);
                out.push(Segment {
                    start: seg.start,
                    end: z,
                    v_start: seg.v_start.abs(),
                    v_end: 0.0,
                });
                out.push(Segment {
                    start: z,
                    end: seg.end,
                    v_start: 0.0,
                    v_end: seg.v_end.abs(),
                });
            } else {
                out.push(Segment {
                    start: seg.start,
                    end: seg.end,
                    v_start: seg.v_start.abs(),
                    v_end: seg.v_end.abs(),
                });
            }
        }
        out
    }

    /// `∫₀ᵗ φ̄(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        self.segments(t)
            .iter()
            .map(|s| 0.5 * (s.v_start + s.v_end) * (s.end - s.start))
            .sum()
    }

    /// `‖φ̄‖_{L¹(0,t)}`.
    pub fn l1_norm(&self, t: f64) -> f64 {
        self.abs_segments(t)
            .iter()
            .map(|s| 0.5 * (s.v_start + s.v_end) * (s.end - s.start))
            .sum()
    }

    /// `‖φ̄‖²_{L²(0,t)}`.
    pub fn l2_norm_sq(&self, t: f64) -> f64 {
        self.segments(t)
            .iter()
            .map(|s| (s.end - s.start) * (s.v_start * s.v_start + s.v_start * s.v_end + s.v_end * s.v_end) / 3.0)
            .sum()
    }

    /// The `j`-th hat function on this signal's knots.
    pub fn hat(knots: &[f64], j: usize) -> Result<Self> {
        let mut values = vec![0.0; knots.len()];
        values[j] = 1.0;
        Self::new(knots.to_vec(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TimeSignal::new(vec![], vec![]).is_err());
        assert!(TimeSignal::new(vec![0.1, 1.0], vec![1.0, 1.0]).is_err());
        assert!(TimeSignal::new(vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]).is_err());
        assert!(TimeSignal::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSignal::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn evaluation_and_tail() {
        let s = TimeSignal::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.eval(0.5), 1.0);
        assert_eq!(s.eval(2.0), 1.5);
        assert_eq!(s.eval(10.0), 1.0);
        assert_eq!(TimeSignal::constant(3.0).eval(7.0), 3.0);
    }

    #[test]
    fn closed_form_norms() {
        let s = TimeSignal::new(vec![0.0, 2.0], vec![-1.0, 1.0]).unwrap();
        assert!((s.integral(2.0)).abs() < 1e-15);
        assert!((s.l1_norm(2.0) - 1.0).abs() < 1e-15);
        assert!((s.l2_norm_sq(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((TimeSignal::constant(1.0).integral(2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip_validates() {
        let s: TimeSignal = serde_json::from_str(r#"{"knots":[0.0,1.0],"values":[1.0,2.0]}"#).unwrap();
        assert_eq!(s.eval(0.5), 1.5);
        assert!(serde_json::from_str::<TimeSignal>(r#"{"knots":[1.0],"values":[1.0]}"#).is_err());
    }
}
