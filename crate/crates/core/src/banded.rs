//! Real band matrices and their LU factorization with partial pivoting.
//!
//! Rows are stored compactly: entry `(i, j)` lives at column `j + kl - i` of
//! a row of width `kl + ku + 1`. The factorization uses the row-interchange
//! scheme in which the upper factor widens to `kl + ku + 1` entries per row
//! and the multipliers are kept separately.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandError {
    #[error("matrix is singular to working precision at pivot {0}")]
    Singular(usize),
    #[error("entry ({i}, {j}) lies outside the band")]
    OutsideBand { i: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        let w = m.width();
        for i in 0..n {
            m.data[i * w + kl] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku {
            return None;
        }
        Some(i * self.width() + j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<(), BandError> {
        let s = self.slot(i, j).ok_or(BandError::OutsideBand { i, j })?;
        self.data[s] += v;
        Ok(())
    }

    /// `a * self + b * other`; both must share dimensions and bandwidths.
    pub fn combine(&self, a: f64, other: &BandMatrix, b: f64) -> BandMatrix {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        BandMatrix { n: self.n, kl: self.kl, ku: self.ku, data }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += row[j + self.kl - i] * x[j];
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn factorize(&self) -> Result<BandLu, BandError> {
        BandLu::new(self)
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn new(a: &BandMatrix) -> Result<Self, BandError> {
        let (n, m1) = (a.n, a.kl);
        let mm = a.width();
        let mut au = a.data.clone();
        // shift the first kl rows left so that column 0 holds the leftmost stored entry
        let mut l = m1;
        for i in 0..m1.min(n) {
            for j in (m1 - i)..mm {
                au[i * mm + j - l] = au[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                au[i * mm + j] = 0.0;
            }
        }
        let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut lower = vec![0.0; n * m1.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let mut piv = au[k * mm];
            let mut p = k;
            let l = (k + m1 + 1).min(n);
            for j in k + 1..l {
                if au[j * mm].abs() > piv.abs() {
                    piv = au[j * mm];
                    p = j;
                }
            }
            pivots[k] = p;
            if piv.abs() <= f64::EPSILON * scale * n as f64 || piv == 0.0 {
                return Err(BandError::Singular(k));
            }
            if p != k {
                for j in 0..mm {
                    au.swap(k * mm + j, p * mm + j);
                }
            }
            for i in k + 1..l {
                let f = au[i * mm] / au[k * mm];
                lower[k * m1 + i - k - 1] = f;
                for j in 1..mm {
                    au[i * mm + j - 1] = au[i * mm + j] - f * au[k * mm + j];
                }
                au[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(Self { n, kl: m1, width: mm, upper: au, lower, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, m1, mm) = (self.n, self.kl, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let l = (k + m1 + 1).min(n);
            for j in k + 1..l {
                x[j] -= self.lower[k * m1 + j - k - 1] * x[k];
            }
        }
        let mut l = 1;
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in 1..l {
                acc -= self.upper[i * mm + k] * x[k + i];
            }
            x[i] = acc / self.upper[i * mm];
            if l < mm {
                l += 1;
            }
        }
    }
}
