//! Small dense matrices (dimension 1 to 4), singular values and the singular
//! value function `α^t`.

use std::fmt;
use std::ops::Mul;

use crate::affine::AffineIfs;
use crate::error::{Error, Result};
use crate::symbolic::Word;

pub const MAX_DIM: usize = 4;

/// Relative threshold below which the smallest singular value counts as zero.
pub const SINGULAR_RATIO: f64 = 1e-14;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 64;

/// A `d × d` real matrix with `1 ≤ d ≤ 4`, stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix {
    d: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl Matrix {
    pub fn zeros(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "matrix dimension {d} not supported");
        Self { d, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(d: usize) -> Self {
        let mut out = Self::zeros(d);
        for i in 0..d {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut out = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            out.m[i][i] = v;
        }
        out
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidArgument(format!("matrix dimension {d} outside supported range 1..={MAX_DIM}")));
        }
        let mut out = Self::zeros(d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidArgument(format!("row {i} has length {}, expected {d}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("entry ({i},{j}) is not finite")));
                }
                out.m[i][j] = v;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|i| self.m[i][..self.d].to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                out.m[j][i] = self.m[i][j];
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut().take(self.d) {
            for v in row.iter_mut().take(self.d) {
                *v *= factor;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.d).flat_map(|i| (0..self.d).map(move |j| (i, j))).map(|(i, j)| self.m[i][j].abs()).fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d).map(|i| (0..self.d).map(|j| self.m[i][j] * x[j]).sum()).collect()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.d;
        let mut a = self.m;
        let mut det = 1.0;
        for col in 0..d {
            let pivot = (col..d).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
            if a[pivot][col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            det *= a[col][col];
            let pivot_row = a[col];
            for row in a.iter_mut().take(d).skip(col + 1) {
                let f = row[col] / pivot_row[col];
                for (x, p) in row[col..d].iter_mut().zip(&pivot_row[col..d]) {
                    *x -= f * p;
                }
            }
        }
        det
    }

    pub fn is_finite(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| self.m[i][j].is_finite()))
    }
}

impl Mul for Matrix {
    type Output = Matrix;

    #[allow(clippy::op_ref)]
    fn mul(self, rhs: Matrix) -> Matrix {
        &self * &rhs
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.d, rhs.d, "dimension mismatch in matrix product");
        let d = self.d;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.m[i][k];
                for j in 0..d {
                    out.m[i][j] += a * rhs.m[k][j];
                }
            }
        }
        out
    }
}

/// Singular values sorted non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn product(&self) -> f64 {
        self.values.iter().product()
    }

    pub fn logs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }
}

/// Singular values without the singularity check; the smallest may be zero.
pub(crate) fn raw_singular_values(a: &Matrix) -> Vec<f64> {
    match a.d {
        1 => vec![a.m[0][0].abs()],
        2 => {
            let (s1, s2) = two_by_two(a);
            vec![s1, s2]
        }
        _ => jacobi_singular_values(a),
    }
}

/// Closed form for 2×2: the square roots of the eigenvalues of `AᵀA` are
/// `Q ± R` with `Q, R` below. The small value is recovered from `|det|`.
fn two_by_two(a: &Matrix) -> (f64, f64) {
    let s1 = top_singular_value_2x2(a);
    if s1 == 0.0 {
        return (0.0, 0.0);
    }
    let det = (a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0]).abs();
    (s1, (det / s1).min(s1))
}

pub(crate) fn top_singular_value_2x2(a: &Matrix) -> f64 {
    let e = 0.5 * (a.m[0][0] + a.m[1][1]);
    let f = 0.5 * (a.m[0][0] - a.m[1][1]);
    let g = 0.5 * (a.m[1][0] + a.m[0][1]);
    let h = 0.5 * (a.m[1][0] - a.m[0][1]);
    e.hypot(h) + f.hypot(g)
}

/// One-sided (Hestenes) cyclic Jacobi: orthogonalize the columns of `A` by
/// plane rotations, then the column norms are the singular values.
fn jacobi_singular_values(a: &Matrix) -> Vec<f64> {
    let d = a.d;
    let mut u = a.m;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in u.iter().take(d) {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut().take(d) {
                    let up = row[p];
                    let uq = row[q];
                    row[p] = c * up - s * uq;
                    row[q] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values: Vec<f64> = (0..d).map(|j| (0..d).map(|i| u[i][j] * u[i][j]).sum::<f64>().sqrt()).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

pub fn singular_values(a: &Matrix) -> Result<SingularSpectrum> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let values = raw_singular_values(a);
    let top = values[0];
    let bottom = *values.last().unwrap();
    if top == 0.0 || bottom < SINGULAR_RATIO * top {
        let ratio = if top == 0.0 { 0.0 } else { bottom / top };
        return Err(Error::NumericallySingular { ratio });
    }
    Ok(SingularSpectrum { values })
}

/// `log α^t` from the logarithms of the singular values (sorted non-increasing).
///
/// With `l = ⌈t⌉` (and `l = t` for integer `t`):
/// `α^t = α_1 ⋯ α_{l-1} α_l^{t-l+1}` for `0 < t ≤ d`,
/// `α^t = (α_1 ⋯ α_d)^{t/d}` for `t > d`, and `α^0 = 1`.
pub fn log_svf_from_logs(log_sv: &[f64], t: f64) -> f64 {
    let d = log_sv.len();
    if t <= 0.0 {
        return 0.0;
    }
    if t > d as f64 {
        return t / d as f64 * log_sv.iter().sum::<f64>();
    }
    let l = t.ceil() as usize;
    let head: f64 = log_sv[..l - 1].iter().sum();
    head + (t - (l - 1) as f64) * log_sv[l - 1]
}

pub fn svf_alpha_t(a: &Matrix, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be non-negative, got {t}")));
    }
    let spectrum = singular_values(a)?;
    Ok(log_svf_from_logs(&spectrum.logs(), t).exp())
}

/// `A_w = A_{w_1} ⋯ A_{w_n}`; the empty word maps to the identity.
pub fn word_matrix(ifs: &AffineIfs, w: &Word) -> Result<Matrix> {
    let mut out = Matrix::identity(ifs.dim());
    for &s in w.symbols() {
        let map = ifs.maps().get(s as usize).ok_or(Error::InvalidSymbol { symbol: s as usize, size: ifs.len() })?;
        out = out * map.matrix;
    }
    Ok(out)
}
