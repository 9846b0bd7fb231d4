//! Sparse and banded linear algebra used by the elliptic solves.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds a CSR matrix from per-row `(column, value)` lists. Duplicate
    /// columns within a row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Csr { nrows, row_ptr, col_idx, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(c, _)| i.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.nrows).all(|i| {
            self.row(i).all(|(c, v)| {
                let t = self.row(c).find(|&(cc, _)| cc == i).map_or(0.0, |(_, w)| w);
                (v - t).abs() <= tol * v.abs().max(1.0)
            })
        })
    }
}

/// Cholesky factor of a symmetric positive definite band matrix, stored by
/// rows as the lower band `L[i][i - bw ..= i]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.nrows;
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // element (i, j) with i - bw <= j <= i lives at l[i * w + (j + bw - i)]
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    l[i * w + (c + bw - i)] = v;
                }
            }
        }
        for j in 0..n {
            let jlo = j.saturating_sub(bw);
            let mut d = l[j * w + bw];
            for k in jlo..j {
                let v = l[j * w + (k + bw - j)];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Factorization { pivot: j });
            }
            let d = d.sqrt();
            l[j * w + bw] = d;
            for i in (j + 1)..(j + 1 + bw).min(n) {
                let ilo = i.saturating_sub(bw).max(jlo);
                let mut s = l[i * w + (j + bw - i)];
                for k in ilo..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                l[i * w + (j + bw - i)] = s / d;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + 1 + bw).min(n) {
                s -= self.l[k * w + (i + bw - k)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
    }
}

/// LU factorization with partial pivoting of a general band matrix with
/// `kl` sub- and `ku` super-diagonals. Row swaps widen the upper band to
/// `kl + ku`, so each row stores columns `i - kl ..= i + kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(m: &Csr) -> Result<Self> {
        let n = m.nrows;
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..n {
            for (c, _) in m.row(i) {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        let w = 2 * kl + ku + 1;
        let mut a = vec![0.0; n * w];
        for i in 0..n {
            for (c, v) in m.row(i) {
                a[i * w + (c + kl - i)] = v;
            }
        }
        let mut lu = BandLu { n, kl, ku, a, piv: vec![0; n] };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.kl + self.ku + 1) + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let rmax = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.idx(k, k)].abs();
            for r in (k + 1)..=rmax {
                let v = self.a[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.piv[k] = p;
            if best <= 1e-300 * scale || !best.is_finite() {
                return Err(Error::Factorization { pivot: k });
            }
            let cmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=cmax {
                    let (ik, ip) = (self.idx(k, j), self.idx(p, j));
                    self.a.swap(ik, ip);
                }
            }
            let pivot = self.a[self.idx(k, k)];
            for r in (k + 1)..=rmax {
                let irk = self.idx(r, k);
                let f = self.a[irk] / pivot;
                self.a[irk] = f;
                if f != 0.0 {
                    for j in (k + 1)..=cmax {
                        let kj = self.a[self.idx(k, j)];
                        let irj = self.idx(r, j);
                        self.a[irj] -= f * kj;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in (k + 1)..=(k + kl).min(n - 1) {
                    b[r] -= self.a[self.idx(r, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..=(i + kl + ku).min(n - 1) {
                s -= self.a[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.a[self.idx(i, i)];
        }
    }

    /// Product of the pivots with the permutation sign.
    pub fn log_abs_det_and_sign(&self) -> (f64, f64) {
        let mut sign = 1.0;
        let mut logdet = 0.0;
        for k in 0..self.n {
            if self.piv[k] != k {
                sign = -sign;
            }
            let d = self.a[self.idx(k, k)];
            if d < 0.0 {
                sign = -sign;
            }
            logdet += d.abs().ln();
        }
        (logdet, sign)
    }
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite matrix. Stops when `||r||_inf <= tol * ||b||_inf`.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.nrows;
    let bnorm = inf_norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let dinv: Vec<f64> = (0..n).map(|i| 1.0 / a.diag(i)).collect();
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        if inf_norm(&r) <= tol * bnorm {
            return Ok(it);
        }
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = inf_norm(&r);
    if res <= tol * bnorm {
        Ok(max_iter)
    } else {
        Err(Error::LinearSolve { iterations: max_iter, residual: res / bnorm })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
