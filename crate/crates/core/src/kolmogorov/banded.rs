//! Dense-band LU factorization without pivoting.
//!
//! The shifted generators solved here are row diagonally dominant M-matrices
//! (or complex shifts of them), for which Gaussian elimination without row
//! exchanges is stable. Node numbering with `eta` varying fastest keeps every
//! nonzero within `2N + 1` of the diagonal.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field of matrix entries: real or complex.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn modulus(self) -> f64;

    fn zero() -> Self {
        Self::from(0.0)
    }

    fn one() -> Self {
        Self::from(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Bytes needed to store a band matrix of `n` rows and half-bandwidth `bw`.
pub fn band_bytes(n: usize, bw: usize, elem_bytes: usize) -> u64 {
    n as u64 * (2 * bw as u64 + 1) * elem_bytes as u64
}

/// Square matrix with `a[r][c] = 0` whenever `|r - c| > bw`, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![T::zero(); n * (2 * bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn width(&self) -> usize {
        2 * self.bw + 1
    }

    #[inline]
    fn index(&self, r: usize, c: usize) -> usize {
        debug_assert!(r.abs_diff(c) <= self.bw);
        r * self.width() + c + self.bw - r
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        if r.abs_diff(c) > self.bw {
            T::zero()
        } else {
            self.data[self.index(r, c)]
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, x: T) {
        let k = self.index(r, c);
        self.data[k] = x;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, x: T) {
        let k = self.index(r, c);
        self.data[k] += x;
    }

    /// Clears row `r` and puts 1 on its diagonal.
    pub fn set_identity_row(&mut self, r: usize) {
        let w = self.width();
        self.data[r * w..(r + 1) * w].fill(T::zero());
        self.set(r, r, T::one());
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.bw);
                let hi = (r + self.bw).min(self.n - 1);
                let mut acc = T::zero();
                for c in lo..=hi {
                    acc += self.data[self.index(r, c)] * x[c];
                }
                acc
            })
            .collect()
    }

    /// In-place Doolittle factorization `A = L U` with unit lower `L`.
    pub fn factor(mut self) -> Result<BandLu<T>> {
        let (n, bw, w) = (self.n, self.bw, self.width());
        for k in 0..n {
            let pivot = self.data[k * w + bw];
            if pivot.modulus() == 0.0 || !pivot.modulus().is_finite() {
                return Err(Error::ZeroPivot { row: k });
            }
            let last = (k + bw).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let row_k = &head[k * w + bw + 1..k * w + bw + 1 + (last - k)];
            for i in k + 1..=last {
                let row_i = &mut tail[(i - k - 1) * w..(i - k) * w];
                let ik = k + bw - i;
                let l = row_i[ik] / pivot;
                if l.modulus() == 0.0 {
                    continue;
                }
                row_i[ik] = l;
                for (a, &u) in row_i[ik + 1..ik + 1 + row_k.len()].iter_mut().zip(row_k) {
                    *a -= l * u;
                }
            }
        }
        Ok(BandLu { n, bw, data: self.data })
    }
}

/// Packed `L` and `U` factors of a band matrix.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandLu<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn bytes(&self) -> u64 {
        band_bytes(self.n, self.bw, std::mem::size_of::<T>())
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * w + bw - (i - lo)..i * w + bw];
            let mut acc = b[i];
            for (l, x) in row.iter().zip(&b[lo..i]) {
                acc -= *l * *x;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let row = &self.data[i * w + bw..i * w + bw + 1 + (hi - i)];
            let mut acc = b[i];
            for (u, x) in row[1..].iter().zip(&b[i + 1..=hi]) {
                acc -= *u * *x;
            }
            b[i] = acc / row[0];
        }
    }

    /// Overwrites `b` with `A^{-T} b` (plain transpose, no conjugation).
    pub fn solve_transpose_in_place(&self, b: &mut [T]) {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        assert_eq!(b.len(), n);
        // U^T z = b, column sweep
        for i in 0..n {
            let hi = (i + bw).min(n - 1);
            let row = &self.data[i * w + bw..i * w + bw + 1 + (hi - i)];
            let z = b[i] / row[0];
            b[i] = z;
            for (u, x) in row[1..].iter().zip(&mut b[i + 1..=hi]) {
                *x -= *u * z;
            }
        }
        // L^T x = z
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * w + bw - (i - lo)..i * w + bw];
            let xi = b[i];
            for (l, x) in row.iter().zip(&mut b[lo..i]) {
                *x -= *l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::replica_rng;
    use rand::Rng;

    fn random_dominant(n: usize, bw: usize, seed: u64) -> (BandMatrix<f64>, Vec<Vec<f64>>) {
        let mut rng = replica_rng(seed, 0);
        let mut a = BandMatrix::zeros(n, bw);
        let mut dense = vec![vec![0.0; n]; n];
        for r in 0..n {
            let mut off = 0.0;
            for c in r.saturating_sub(bw)..=(r + bw).min(n - 1) {
                if c != r {
                    let x = rng.random::<f64>() - 0.5;
                    a.set(r, c, x);
                    dense[r][c] = x;
                    off += x.abs();
                }
            }
            a.set(r, r, off + 0.1 + rng.random::<f64>());
            dense[r][r] = a.get(r, r);
        }
        (a, dense)
    }

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_match_dense_products() {
        for (n, bw) in [(1, 0), (5, 1), (40, 3), (60, 7), (30, 29)] {
            let (a, dense) = random_dominant(n, bw, n as u64);
            let x: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
            let b = dense_matvec(&dense, &x);
            assert_eq!(a.matvec(&x), b);
            let lu = a.factor().unwrap();
            let mut y = b.clone();
            lu.solve_in_place(&mut y);
            for (p, q) in y.iter().zip(&x) {
                assert!((p - q).abs() < 1e-12, "n {n} bw {bw}");
            }
            let t: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| dense[c][r]).collect()).collect();
            let bt = dense_matvec(&t, &x);
            let mut y = bt;
            lu.solve_transpose_in_place(&mut y);
            for (p, q) in y.iter().zip(&x) {
                assert!((p - q).abs() < 1e-12, "transpose n {n} bw {bw}");
            }
        }
    }

    #[test]
    fn complex_solve() {
        let n = 25;
        let (a, dense) = random_dominant(n, 4, 9);
        let mut c = BandMatrix::<Complex64>::zeros(n, 4);
        for r in 0..n {
            for k in r.saturating_sub(4)..=(r + 4).min(n - 1) {
                c.set(r, k, Complex64::from(a.get(r, k)));
            }
            c.add(r, r, Complex64::new(0.0, 0.7));
        }
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let b: Vec<Complex64> = (0..n)
            .map(|r| {
                let mut s = Complex64::new(0.0, 0.7) * x[r];
                for k in 0..n {
                    s += dense[r][k] * x[k];
                }
                s
            })
            .collect();
        let lu = c.factor().unwrap();
        let mut y = b;
        lu.solve_in_place(&mut y);
        for (p, q) in y.iter().zip(&x) {
            assert!((p - q).norm() < 1e-11);
        }
    }

    #[test]
    fn identity_rows_and_zero_pivot() {
        let mut a = BandMatrix::<f64>::zeros(3, 1);
        a.set(0, 0, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 5.0);
        a.set(1, 1, 9.0);
        a.set_identity_row(1);
        a.set(2, 2, 1.0);
        let lu = a.clone().factor().unwrap();
        let mut b = vec![3.0, 1.0, 4.0];
        lu.solve_in_place(&mut b);
        assert_eq!(b, vec![1.0, 1.0, 4.0]);
        let z = BandMatrix::<f64>::zeros(2, 1);
        assert_eq!(z.factor().unwrap_err(), Error::ZeroPivot { row: 0 });
    }

    #[test]
    fn byte_estimate() {
        assert_eq!(band_bytes(10, 2, 8), 400);
        let lu = BandMatrix::<f64>::zeros(10, 2);
        let mut m = lu;
        for r in 0..10 {
            m.set(r, r, 1.0);
        }
        assert_eq!(m.factor().unwrap().bytes(), 400);
    }
}
