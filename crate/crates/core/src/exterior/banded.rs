//! Square banded matrices with an in-place LU factorisation without pivoting.

/// Row-major band storage: entry `(i, j)` lives at `i·(kl+ku+1) + (j − i + kl)`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.data[self.slot(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += row[j + self.kl - i] * x[j];
            }
            y[i] = acc;
        }
    }

    /// Doolittle LU in place. Fails when a pivot is negligible against its row.
    pub fn factor(mut self) -> Result<BandLu, String> {
        let w = self.kl + self.ku + 1;
        let (kl, ku, n) = (self.kl, self.ku, self.n);
        for k in 0..n {
            let pivot = self.data[k * w + kl];
            let scale: f64 = self.data[k * w..(k + 1) * w].iter().map(|v| v.abs()).fold(0.0, f64::max);
            if !(pivot.abs() > 1e-14 * scale) {
                return Err(format!("pivot {pivot:e} at row {k} is negligible"));
            }
            let last = (k + kl).min(n - 1);
            let right = (k + ku).min(n - 1);
            for i in k + 1..=last {
                let ik = i * w + (k + kl - i);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=right {
                    let kj = self.data[k * w + (j + kl - k)];
                    self.data[i * w + (j + kl - i)] -= l * kj;
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let BandMatrix { n, kl, ku, ref data } = self.m;
        let w = kl + ku + 1;
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let mut acc = b[i];
            for j in lo..i {
                acc -= data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + ku).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=hi {
                acc -= data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = acc / data[i * w + kl];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_diagonally_dominant_system() {
        let n = 50;
        let (kl, ku) = (3, 5);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 20.0 } else { ((i * 7 + j * 3) % 5) as f64 - 2.0 };
                a.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x, &mut b);
        let lu = a.factor().unwrap();
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(a.factor().is_err());
    }
}
