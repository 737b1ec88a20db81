//! Small dense linear algebra: 3-vectors, symmetric 3×3 matrices and a
//! general real 6×6 eigenvalue solver.
//!
//! Everything here is a plain `Copy` value type. Nothing allocates.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("no real eigenvalue found")]
    NoRealEigenvalue,
}

/// Relative pivot floor used to classify a symmetric matrix as positive definite.
pub const SPD_PIVOT_TOL: f64 = 1e-13;
/// An eigenvalue counts as real when `|im| <= REAL_EIGEN_TOL * (1 + |re|)`.
pub const REAL_EIGEN_TOL: f64 = 1e-8;
/// QR sweeps allowed per eigenvalue before giving up.
pub const QR_SWEEPS_PER_EIGENVALUE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn outer(self, other: Vec3) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[i] * other.0[j];
            }
        }
        m
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3(a)
    }
}

/// Dense 3×3 matrix, row-major. Used for eigenvector frames and
/// intermediate products that are not symmetric.
pub type Mat3 = [[f64; 3]; 3];

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat3_mul_vec(a: &Mat3, v: Vec3) -> Vec3 {
    Vec3([
        a[0][0] * v.0[0] + a[0][1] * v.0[1] + a[0][2] * v.0[2],
        a[1][0] * v.0[0] + a[1][1] * v.0[1] + a[1][2] * v.0[2],
        a[2][0] * v.0[0] + a[2][1] * v.0[1] + a[2][2] * v.0[2],
    ])
}

/// `aᵀ v`
pub fn mat3_tr_mul_vec(a: &Mat3, v: Vec3) -> Vec3 {
    Vec3([
        a[0][0] * v.0[0] + a[1][0] * v.0[1] + a[2][0] * v.0[2],
        a[0][1] * v.0[0] + a[1][1] * v.0[1] + a[2][1] * v.0[2],
        a[0][2] * v.0[0] + a[1][2] * v.0[1] + a[2][2] * v.0[2],
    ])
}

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Symmetric 3×3 matrix stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

/// Exponents supported by [`SymMat3::pow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymPower {
    Inverse,
    Sqrt,
    InverseSqrt,
}

impl SymPower {
    fn apply(self, eigenvalue: f64) -> f64 {
        match self {
            SymPower::Inverse => 1.0 / eigenvalue,
            SymPower::Sqrt => eigenvalue.sqrt(),
            SymPower::InverseSqrt => 1.0 / eigenvalue.sqrt(),
        }
    }
}

impl SymMat3 {
    pub const fn new(xx: f64, xy: f64, xz: f64, yy: f64, yz: f64, zz: f64) -> Self {
        SymMat3 { xx, xy, xz, yy, yz, zz }
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        SymMat3::new(a, 0.0, 0.0, b, 0.0, c)
    }

    /// Builds from a full matrix, averaging the off-diagonal pairs.
    pub fn from_mat3_symmetrized(m: &Mat3) -> Self {
        SymMat3::new(
            m[0][0],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1],
            0.5 * (m[1][2] + m[2][1]),
            m[2][2],
        )
    }

    /// `V diag(values) Vᵀ` where the columns of `vectors` are the eigenvectors.
    pub fn from_eigen(values: [f64; 3], vectors: &Mat3) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| vectors[i][k] * values[k] * vectors[j][k]).sum();
            }
        }
        Self::from_mat3_symmetrized(&m)
    }

    pub fn to_mat3(&self) -> Mat3 {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn entries(&self) -> [f64; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [self.xx, self.yy, self.zz]
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMat3::new(
            self.xx * s,
            self.xy * s,
            self.xz * s,
            self.yy * s,
            self.yz * s,
            self.zz * s,
        )
    }

    pub fn add(&self, o: &SymMat3) -> Self {
        SymMat3::new(
            self.xx + o.xx,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yy + o.yy,
            self.yz + o.yz,
            self.zz + o.zz,
        )
    }

    pub fn sub(&self, o: &SymMat3) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let [x, y, z] = v.0;
        Vec3([
            self.xx * x + self.xy * y + self.xz * z,
            self.xy * x + self.yy * y + self.yz * z,
            self.xz * x + self.yz * y + self.zz * z,
        ])
    }

    /// `vᵀ M v`
    pub fn quad_form(&self, v: Vec3) -> f64 {
        v.dot(self.mul_vec(v))
    }

    /// `self · other · self`, symmetrized.
    pub fn sandwich(&self, other: &SymMat3) -> Self {
        let a = self.to_mat3();
        let m = mat3_mul(&mat3_mul(&a, &other.to_mat3()), &a);
        Self::from_mat3_symmetrized(&m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz))
            .sqrt()
    }

    /// Lower-triangular Cholesky factor.
    ///
    /// A pivot must exceed `SPD_PIVOT_TOL` times the largest diagonal entry.
    pub fn cholesky(&self) -> Result<Cholesky3, LinalgError> {
        let a = self.to_mat3();
        let scale = self.xx.max(self.yy).max(self.zz);
        let floor = if scale > 0.0 && scale.is_finite() {
            SPD_PIVOT_TOL * scale
        } else {
            return Err(LinalgError::NotPositiveDefinite { pivot: 0, value: scale });
        };
        let mut l = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut d = a[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if !(d > floor) {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[j][j] = djj;
            for i in (j + 1)..3 {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / djj;
            }
        }
        Ok(Cholesky3 { l })
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    pub fn determinant(&self) -> f64 {
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Inverse through the adjugate. Works for indefinite matrices too;
    /// fails only on an exactly (or numerically) zero determinant.
    pub fn inverse_general(&self) -> Result<SymMat3, LinalgError> {
        let det = self.determinant();
        let scale = self.frobenius_norm();
        if !(det.abs() > f64::EPSILON * scale * scale * scale) || !det.is_finite() {
            return Err(LinalgError::Singular);
        }
        let inv = 1.0 / det;
        Ok(SymMat3::new(
            (self.yy * self.zz - self.yz * self.yz) * inv,
            (self.xz * self.yz - self.xy * self.zz) * inv,
            (self.xy * self.yz - self.xz * self.yy) * inv,
            (self.xx * self.zz - self.xz * self.xz) * inv,
            (self.xy * self.xz - self.xx * self.yz) * inv,
            (self.xx * self.yy - self.xy * self.xy) * inv,
        ))
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(self)
    }

    /// Matrix function of an SPD matrix via its eigen-decomposition.
    pub fn pow(&self, power: SymPower) -> Result<SymMat3, LinalgError> {
        self.cholesky()?;
        let eig = self.eigen();
        if let Some((i, &v)) = eig.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(LinalgError::NotPositiveDefinite { pivot: i, value: v });
        }
        let values = eig.values.map(|v| power.apply(v));
        Ok(SymMat3::from_eigen(values, &eig.vectors))
    }

    pub fn inverse(&self) -> Result<SymMat3, LinalgError> {
        let chol = self.cholesky()?;
        Ok(chol.inverse())
    }
}

/// `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cholesky3 {
    pub l: Mat3,
}

impl Cholesky3 {
    pub fn solve(&self, b: Vec3) -> Vec3 {
        let l = &self.l;
        let mut y = [0.0; 3];
        for i in 0..3 {
            let mut s = b.0[i];
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            let mut s = y[i];
            for k in (i + 1)..3 {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        Vec3(x)
    }

    pub fn inverse(&self) -> SymMat3 {
        let cols = [
            self.solve(Vec3::new(1.0, 0.0, 0.0)),
            self.solve(Vec3::new(0.0, 1.0, 0.0)),
            self.solve(Vec3::new(0.0, 0.0, 1.0)),
        ];
        let m = [
            [cols[0][0], cols[1][0], cols[2][0]],
            [cols[0][1], cols[1][1], cols[2][1]],
            [cols[0][2], cols[1][2], cols[2][2]],
        ];
        SymMat3::from_mat3_symmetrized(&m)
    }
}

/// Eigenvalues in ascending order, eigenvectors as the matching columns of
/// an orthonormal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: Mat3,
}

impl SymEigen {
    pub fn vector(&self, i: usize) -> Vec3 {
        Vec3([self.vectors[0][i], self.vectors[1][i], self.vectors[2][i]])
    }
}

fn jacobi_eigen(m: &SymMat3) -> SymEigen {
    let mut a = m.to_mat3();
    let mut v = IDENTITY3;
    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off == 0.0 {
            break;
        }
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= f64::EPSILON * f64::EPSILON * 1e-4 * diag {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A <- Jᵀ A J
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.map(|i| a[i][i]);
    let mut vectors = [[0.0; 3]; 3];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..3 {
            vectors[row][col] = v[row][src];
        }
    }
    SymEigen { values, vectors }
}

/// General (possibly non-symmetric, non-normal) real 6×6 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat6(pub [[f64; 6]; 6]);

/// A complex eigenvalue as `(re, im)`.
pub type Eigenvalue = (f64, f64);

impl Mat6 {
    pub fn identity() -> Self {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Mat6(m)
    }

    pub fn diag(d: [f64; 6]) -> Self {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = d[i];
        }
        Mat6(m)
    }

    /// `[[a, b], [c, d]]` from four 3×3 blocks.
    pub fn from_blocks(a: &Mat3, b: &Mat3, c: &Mat3, d: &Mat3) -> Self {
        let mut m = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = a[i][j];
                m[i][j + 3] = b[i][j];
                m[i + 3][j] = c[i][j];
                m[i + 3][j + 3] = d[i][j];
            }
        }
        Mat6(m)
    }

    pub fn transpose(&self) -> Self {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[j][i];
            }
        }
        Mat6(m)
    }

    pub fn mul(&self, o: &Mat6) -> Self {
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..6).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat6(m)
    }

    pub fn sub(&self, o: &Mat6) -> Self {
        let mut m = self.0;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= o.0[i][j];
            }
        }
        Mat6(m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// All six eigenvalues, unordered.
    pub fn eigenvalues(&self) -> Result<[Eigenvalue; 6], LinalgError> {
        if !self.is_finite() {
            return Err(LinalgError::NoRealEigenvalue);
        }
        let mut h = self.0;
        hessenberg_reduce(&mut h);
        hessenberg_qr(h)
    }

    /// Smallest eigenvalue whose imaginary part is negligible.
    pub fn min_real_eigenvalue(&self) -> Result<f64, LinalgError> {
        let eig = self.eigenvalues()?;
        eig.iter()
            .filter(|(re, im)| im.abs() <= REAL_EIGEN_TOL * (1.0 + re.abs()))
            .map(|(re, _)| *re)
            .min_by(f64::total_cmp)
            .ok_or(LinalgError::NoRealEigenvalue)
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg_reduce(a: &mut [[f64; 6]; 6]) {
    const N: usize = 6;
    for k in 0..N - 2 {
        let alpha_sq: f64 = (k + 1..N).map(|i| a[i][k] * a[i][k]).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        let mut v = [0.0; N];
        for i in k + 1..N {
            v[i] = a[i][k];
        }
        v[k + 1] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        // A <- H A, H = I - 2 v vᵀ / (vᵀ v)
        for j in k..N {
            let s: f64 = (k + 1..N).map(|i| v[i] * a[i][j]).sum::<f64>() * 2.0 / vnorm_sq;
            for i in k + 1..N {
                a[i][j] -= s * v[i];
            }
        }
        // A <- A H
        for row in a.iter_mut() {
            let s: f64 = (k + 1..N).map(|j| row[j] * v[j]).sum::<f64>() * 2.0 / vnorm_sq;
            for j in k + 1..N {
                row[j] -= s * v[j];
            }
        }
        a[k + 1][k] = alpha;
        for row in a.iter_mut().skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`
/// structure). Indices are 1-based internally to keep the classic
/// deflation logic readable.
fn hessenberg_qr(h: [[f64; 6]; 6]) -> Result<[Eigenvalue; 6], LinalgError> {
    const N: usize = 6;
    let mut a = [[0.0f64; N + 1]; N + 1];
    for i in 0..N {
        for j in 0..N {
            a[i + 1][j + 1] = h[i][j];
        }
    }
    let mut wr = [0.0f64; N + 1];
    let mut wi = [0.0f64; N + 1];

    let mut anorm = 0.0;
    for i in 1..=N {
        for j in i.saturating_sub(1).max(1)..=N {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = N;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = wr[nn - 1];
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
            if its == QR_SWEEPS_PER_EIGENVALUE {
                return Err(LinalgError::NoRealEigenvalue);
            }
            if its > 0 && its.is_multiple_of(10) {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // Form shift and look for two consecutive small subdiagonal elements.
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let r0 = x - z;
                let s0 = y - z;
                p = (r0 * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r0 - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            // Double QR step on rows l..nn and columns m..nn.
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    let mut out = [(0.0, 0.0); N];
    for i in 0..N {
        out[i] = (wr[i + 1], wi[i + 1]);
    }
    Ok(out)
}
