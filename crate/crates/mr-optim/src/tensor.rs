//! Dense vector/matrix arithmetic at illustrative scale, a deterministic RNG,
//! and a small-matrix Moore-Penrose pseudo-inverse.
//!
//! All reductions accumulate left-to-right in a fixed order so repeated runs
//! (and any future parallel drivers) reproduce results bit for bit.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Default relative cutoff for singular values in [`pinv_small`].
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

/// Largest matrix side accepted by [`pinv_small`].
pub const PINV_MAX_SIDE: usize = 64;

/// A vector of 64-bit floats with an immutable length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vec64 {
    data: Vec<f64>,
}

impl Vec64 {
    pub fn new(data: Vec<f64>) -> Self {
        Vec64 { data }
    }

    pub fn zeros(n: usize) -> Self {
        Vec64 { data: vec![0.0; n] }
    }

    pub fn from_elem(n: usize, value: f64) -> Self {
        Vec64 {
            data: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm, accumulated in index order.
    pub fn norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc + v * v).sqrt()
    }

    /// Arithmetic mean; 0 for an empty vector.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.data.iter().sum::<f64>() / self.data.len() as f64
        }
    }
}

impl From<Vec<f64>> for Vec64 {
    fn from(data: Vec<f64>) -> Self {
        Vec64 { data }
    }
}

impl Deref for Vec64 {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vec64 {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Dot product accumulated strictly left-to-right.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension(format!(
            "dot: lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y))
}

/// log(sum(exp(v))) with max-subtraction; exact for length-1 input.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::dimension("logsumexp: empty input"));
    }
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if v.len() == 1 {
        return Ok(v[0]);
    }
    let sum = v.iter().fold(0.0, |acc, &x| acc + (x - m).exp());
    Ok(m + sum.ln())
}

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::dimension(format!(
                "Mat64: {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat64 { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat64 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat64::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Mat64::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Single-column matrix from a slice.
    pub fn from_column(col: &[f64]) -> Self {
        Mat64 {
            rows: col.len(),
            cols: 1,
            data: col.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat64 {
        let mut out = Mat64::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat64) -> Result<Mat64> {
        if self.cols != other.rows {
            return Err(Error::dimension(format!(
                "matmul: {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat64::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec64> {
        if self.cols != v.len() {
            return Err(Error::dimension(format!(
                "mul_vec: {}x{} by vector of {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            out.push(self.row(r).iter().zip(v).fold(0.0, |a, (x, y)| a + x * y));
        }
        Ok(Vec64::new(out))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a + v * v).sqrt()
    }
}

/// One-sided Jacobi orthogonalization of the columns of `a`, accumulating the
/// rotations in `v`. On return the columns of `a` are pairwise orthogonal and
/// `a_in = a_out * v^T`.
fn jacobi_orthogonalize(a: &mut Mat64, v: &mut Mat64) {
    let n = a.cols();
    let eps = 1e-15;
    // Columns whose norm has fallen to rounding level relative to the whole
    // matrix carry no usable singular direction; rotating them against the
    // others never converges. The Frobenius norm is rotation-invariant, so
    // this floor is computed once.
    let floor = a.data.iter().fold(0.0, |acc, x| acc + x * x) * (eps * eps);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for r in 0..a.rows() {
                    let x = a.get(r, p);
                    let y = a.get(r, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if app <= floor || aqq <= floor {
                    continue;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..a.rows() {
                    let x = a.get(r, p);
                    let y = a.get(r, q);
                    a.set(r, p, c * x - s * y);
                    a.set(r, q, s * x + c * y);
                }
                for r in 0..n {
                    let x = v.get(r, p);
                    let y = v.get(r, q);
                    v.set(r, p, c * x - s * y);
                    v.set(r, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Singular values of a small matrix, unsorted.
pub(crate) fn singular_values(m: &Mat64) -> Result<Vec<f64>> {
    if !m.all_finite() {
        return Err(Error::numeric("singular_values: non-finite entries"));
    }
    let mut a = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let mut v = Mat64::identity(a.cols());
    jacobi_orthogonalize(&mut a, &mut v);
    let mut sv = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut s = 0.0;
        for r in 0..a.rows() {
            let x = a.get(r, j);
            s += x * x;
        }
        sv.push(s.sqrt());
    }
    Ok(sv)
}

/// Moore-Penrose pseudo-inverse via one-sided Jacobi SVD.
///
/// Intended for matrices up to 64x64; singular values below
/// `tol * sigma_max` are treated as zero.
pub fn pinv_small(m: &Mat64, tol: f64) -> Result<Mat64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::dimension("pinv_small: empty matrix"));
    }
    if m.rows() > PINV_MAX_SIDE || m.cols() > PINV_MAX_SIDE {
        return Err(Error::parameter(format!(
            "pinv_small: {}x{} exceeds the {PINV_MAX_SIDE}x{PINV_MAX_SIDE} limit",
            m.rows(),
            m.cols()
        )));
    }
    if tol <= 0.0 {
        return Err(Error::parameter("pinv_small: tol must be > 0"));
    }
    if !m.all_finite() {
        return Err(Error::numeric("pinv_small: non-finite entries"));
    }

    // Work on a tall matrix; pinv(A^T) = pinv(A)^T.
    if m.rows() < m.cols() {
        return Ok(pinv_small(&m.transpose(), tol)?.transpose());
    }

    let mut a = m.clone();
    let mut v = Mat64::identity(m.cols());
    jacobi_orthogonalize(&mut a, &mut v);

    let n = m.cols();
    let mut sigma_sq = vec![0.0; n];
    for (j, s) in sigma_sq.iter_mut().enumerate() {
        for r in 0..a.rows() {
            let x = a.get(r, j);
            *s += x * x;
        }
    }
    let sigma_max = sigma_sq.iter().fold(0.0f64, |m, &s| m.max(s)).sqrt();
    let cutoff = tol * sigma_max;

    // pinv = sum_j v_j sigma_j^{-1} u_j^T with u_j = a_j / sigma_j.
    let mut out = Mat64::zeros(n, m.rows());
    for j in 0..n {
        let sigma = sigma_sq[j].sqrt();
        if sigma <= cutoff || sigma == 0.0 {
            continue;
        }
        let inv_sq = 1.0 / sigma_sq[j];
        for i in 0..n {
            let vij = v.get(i, j);
            if vij == 0.0 {
                continue;
            }
            let coeff = vij * inv_sq;
            for k in 0..m.rows() {
                let val = out.get(i, k) + coeff * a.get(k, j);
                out.set(i, k, val);
            }
        }
    }
    Ok(out)
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic splitmix64 generator.
///
/// The raw `u64`/uniform stream is a pure function of the seed and uses only
/// integer arithmetic, so it is identical across platforms. Derived draws
/// (normal, gamma, beta) go through libm and are deterministic per platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    state: u64,
    position: u64,
}

impl SeededRng {
    pub const ALGORITHM: &'static str = "splitmix64";

    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            state: seed,
            position: 0,
        }
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of raw draws consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// An independent child stream; deterministic in (seed, label).
    pub fn substream(&self, label: u64) -> SeededRng {
        let mixed = splitmix_finalize(
            self.seed ^ label.wrapping_mul(0xA24B_AED4_963E_E407) ^ SPLITMIX_GAMMA,
        );
        SeededRng::new(mixed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(SPLITMIX_GAMMA);
        self.position += 1;
        splitmix_finalize(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in [0, n).
    pub fn range(&mut self, n: usize) -> usize {
        assert!(n > 0, "range: n must be positive");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let v = self.next_f64();
            if v > 0.0 {
                break v;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma: shape must be positive");
        if shape < 1.0 {
            let boost = loop {
                let u = self.next_f64();
                if u > 0.0 {
                    break u.powf(1.0 / shape);
                }
            };
            return boost * self.gamma(shape + 1.0);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.next_f64();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v;
            }
            if u > 0.0 && u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Beta(a, b) as a ratio of gamma draws.
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        let ga = self.gamma(a);
        let gb = self.gamma(b);
        if ga + gb == 0.0 {
            return 0.5;
        }
        ga / (ga + gb)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.range(i + 1);
            slice.swap(i, j);
        }
    }
}
