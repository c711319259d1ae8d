//! Small dense linear algebra for the stability analysis.
//!
//! Matrices here are at most a few dozen rows, so everything is written
//! directly over a row-major `Vec<f64>`: products, a pivoted Gaussian
//! solve, cyclic Jacobi for symmetric spectra and Hessenberg + shifted QR
//! for general (possibly complex) spectra.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn column(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetric_part(&self) -> Result<Matrix> {
        self.add(&self.transpose()).map(|m| m.scale(0.5))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Solves `self · x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if !self.is_square() || rhs.len() != self.rows {
            return Err(Error::Shape(format!(
                "solve with a {}x{} matrix and rhs of length {}",
                self.rows,
                self.cols,
                rhs.len()
            )));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if piv_abs <= 1e-13 * scale {
                return Err(Error::Singular(format!("pivot {piv_abs:e} in column {k}")));
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                b.swap(k, piv);
            }
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i * n + i];
        }
        Ok(x)
    }

    /// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::Shape("eigenvalues of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * norm || off == 0.0 {
                let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
                eig.sort_by(f64::total_cmp);
                return Ok(eig);
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        Err(Error::NoConvergence)
    }

    /// All eigenvalues of a general square matrix as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> Result<Vec<(f64, f64)>> {
        if !self.is_square() {
            return Err(Error::Shape("eigenvalues of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Vec::new());
        }
        // 1-based working copy keeps the QR sweep close to its textbook form.
        let mut h = OneBased::new(n);
        for i in 0..n {
            for j in 0..n {
                h.set(i + 1, j + 1, self[(i, j)]);
            }
        }
        h.reduce_to_hessenberg();
        h.hessenberg_qr()
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .map(|(re, im)| re.hypot(im))
            .fold(0.0, f64::max))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

struct OneBased {
    n: usize,
    a: Vec<f64>,
}

impl OneBased {
    fn new(n: usize) -> Self {
        OneBased {
            n,
            a: vec![0.0; (n + 1) * (n + 1)],
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * (self.n + 1) + j] = v;
    }

    #[inline]
    fn sub(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * (self.n + 1) + j] -= v;
    }

    /// Elimination with pivoting to upper Hessenberg form (similarity transform).
    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        for m in 2..n {
            let mut x: f64 = 0.0;
            let mut i = m;
            for j in m..=n {
                if self.get(j, m - 1).abs() > x.abs() {
                    x = self.get(j, m - 1);
                    i = j;
                }
            }
            if i != m {
                for j in (m - 1)..=n {
                    let t = self.get(i, j);
                    self.set(i, j, self.get(m, j));
                    self.set(m, j, t);
                }
                for j in 1..=n {
                    let t = self.get(j, i);
                    self.set(j, i, self.get(j, m));
                    self.set(j, m, t);
                }
            }
            if x != 0.0 {
                for i in (m + 1)..=n {
                    let mut y = self.get(i, m - 1);
                    if y != 0.0 {
                        y /= x;
                        self.set(i, m - 1, 0.0);
                        for j in m..=n {
                            let v = y * self.get(m, j);
                            self.sub(i, j, v);
                        }
                        for j in 1..=n {
                            let v = y * self.get(j, i);
                            self.sub(j, m, -v);
                        }
                    }
                }
            }
        }
    }

    /// Francis double-shift QR on an upper Hessenberg matrix.
    fn hessenberg_qr(&mut self) -> Result<Vec<(f64, f64)>> {
        let n = self.n;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];
        let mut anorm = 0.0;
        for i in 1..=n {
            for j in (i.saturating_sub(1)).max(1)..=n {
                anorm += self.get(i, j).abs();
            }
        }
        let mut nn = n;
        let mut t = 0.0;
        let (mut p, mut q, mut r): (f64, f64, f64);
        while nn >= 1 {
            let mut its = 0;
            loop {
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.get(l - 1, l - 1).abs() + self.get(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.get(l, l - 1).abs() + s == s {
                        self.set(l, l - 1, 0.0);
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.get(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.get(nn - 1, nn - 1);
                let mut w = self.get(nn, nn - 1) * self.get(nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                    break;
                }
                if its == 60 {
                    return Err(Error::NoConvergence);
                }
                if its == 10 || its == 20 || its == 40 {
                    // exceptional shift
                    t += x;
                    for i in 1..=nn {
                        self.sub(i, i, x);
                    }
                    let s = self.get(nn, nn - 1).abs() + self.get(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;
                let mut m = nn - 2;
                loop {
                    let z = self.get(m, m);
                    r = x - z;
                    let s = y - z;
                    p = (r * s - w) / self.get(m + 1, m) + self.get(m, m + 1);
                    q = self.get(m + 1, m + 1) - z - r - s;
                    r = self.get(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = self.get(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs()
                        * (self.get(m - 1, m - 1).abs() + z.abs() + self.get(m + 1, m + 1).abs());
                    if u + v == v {
                        break;
                    }
                    m -= 1;
                }
                for i in (m + 2)..=nn {
                    self.set(i, i - 2, 0.0);
                    if i != m + 2 {
                        self.set(i, i - 3, 0.0);
                    }
                }
                let mut k = m;
                while k < nn {
                    if k != m {
                        p = self.get(k, k - 1);
                        q = self.get(k + 1, k - 1);
                        r = 0.0;
                        if k != nn - 1 {
                            r = self.get(k + 2, k - 1);
                        }
                        x = p.abs() + q.abs() + r.abs();
                        if x != 0.0 {
                            p /= x;
                            q /= x;
                            r /= x;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().copysign(p);
                    if s != 0.0 {
                        if k == m {
                            if l != m {
                                let v = -self.get(k, k - 1);
                                self.set(k, k - 1, v);
                            }
                        } else {
                            self.set(k, k - 1, -s * x);
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        let z = r / s;
                        q /= p;
                        r /= p;
                        for j in k..=nn {
                            p = self.get(k, j) + q * self.get(k + 1, j);
                            if k != nn - 1 {
                                p += r * self.get(k + 2, j);
                                self.sub(k + 2, j, p * z);
                            }
                            self.sub(k + 1, j, p * y);
                            self.sub(k, j, p * x);
                        }
                        let mmin = if nn < k + 3 { nn } else { k + 3 };
                        for i in l..=mmin {
                            p = x * self.get(i, k) + y * self.get(i, k + 1);
                            if k != nn - 1 {
                                p += z * self.get(i, k + 2);
                                self.sub(i, k + 2, p * r);
                            }
                            self.sub(i, k + 1, p * q);
                            self.sub(i, k, p);
                        }
                    }
                    k += 1;
                }
            }
        }
        Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = a.solve(&[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let a = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let mut ev = a.eigenvalues().unwrap();
        ev.sort_by(|x, y| x.1.total_cmp(&y.1));
        assert!(ev[0].0.abs() < 1e-14 && (ev[0].1 + 1.0).abs() < 1e-14);
        assert!((a.spectral_radius().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_spectrum_is_its_diagonal() {
        let a = Matrix::from_rows(&[
            vec![3.0, 1.0, 4.0],
            vec![0.0, -2.0, 5.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let mut re: Vec<f64> = a.eigenvalues().unwrap().iter().map(|e| e.0).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([-2.0, 0.5, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn jacobi_on_known_symmetric() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let ev = a.symmetric_eigenvalues().unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
