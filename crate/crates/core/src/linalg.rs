//! Dense row-major helpers for the small d×d blocks of the tree solver.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *v;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + v;
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Inverse by Gauss-Jordan with partial pivoting; `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut piv = col;
            let mut best = a.get(col, col).abs();
            for r in col + 1..n {
                let v = a.get(r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > T::zero()) || !best.is_finite() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                    inv.data.swap(col * n + j, piv * n + j);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / p);
                inv.set(col, j, inv.get(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.get(r, j) - f * a.get(col, j));
                    inv.set(r, j, inv.get(r, j) - f * inv.get(col, j));
                }
            }
        }
        Some(inv)
    }
    /// LU factorization with complete pivoting; `None` if numerically singular.
    pub fn lu(&self) -> Option<Lu<T>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut pr, mut pc, mut best) = (k, k, T::zero());
            for r in k..n {
                for c in k..n {
                    let v = a[r * n + c].abs();
                    if v > best {
                        best = v;
                        pr = r;
                        pc = c;
                    }
                }
            }
            if !(best > T::zero()) || !best.is_finite() {
                return None;
            }
            if pr != k {
                for c in 0..n {
                    a.swap(k * n + c, pr * n + c);
                }
                rows.swap(k, pr);
            }
            if pc != k {
                for r in 0..n {
                    a.swap(r * n + k, r * n + pc);
                }
                cols.swap(k, pc);
            }
            let p = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / p;
                a[r * n + k] = f;
                if f != T::zero() {
                    for c in k + 1..n {
                        a[r * n + c] = a[r * n + c] - f * a[k * n + c];
                    }
                }
            }
        }
        Some(Lu { n, a, rows, cols })
    }
}

/// `P A Q = L U` with unit lower `L`, stored in place.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    a: Vec<T>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.rows.iter().map(|r| b[*r]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc = acc - self.a[i * n + j] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc = acc - self.a[i * n + j] * y[j];
            }
            y[i] = acc / self.a[i * n + i];
        }
        let mut x = vec![T::zero(); n];
        for (k, c) in self.cols.iter().enumerate() {
            x[*c] = y[k];
        }
        x
    }
}
