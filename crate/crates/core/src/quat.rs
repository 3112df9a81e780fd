//! Quaternions, column vectors in ℍⁿ and square quaternionic matrices.
//!
//! Conventions: `i·j = k`, components are stored as `(w, x, y, z)` along
//! `(1, i, j, k)`, and ℍⁿ is a right ℍ-module (scalars act from the right).

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    /// The four units in storage order.
    pub const UNITS: [Quaternion; 4] = [Self::ONE, Self::I, Self::J, Self::K];

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    pub const fn imaginary(x: f64, y: f64, z: f64) -> Self {
        Self::new(0.0, x, y, z)
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn re(self) -> f64 {
        self.w
    }

    pub fn im(self) -> Self {
        Self::new(0.0, self.x, self.y, self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            None
        } else {
            Some(self.conj() * (1.0 / n2))
        }
    }

    pub fn is_imaginary(self, tol: f64) -> bool {
        self.w.abs() <= tol
    }

    /// Uniformly distributed unit quaternion (an element of Sp(1)).
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q = Self::random_gaussian(rng);
            let n = q.norm();
            if n > 1e-8 {
                return q * (1.0 / n);
            }
        }
    }

    pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        )
    }

    /// Real 4×4 matrix of `b ↦ b·self` in `(w, x, y, z)` coordinates.
    pub fn right_matrix(self) -> [[f64; 4]; 4] {
        let Self { w, x, y, z } = self;
        [[w, -x, -y, -z], [x, w, z, -y], [y, -z, w, x], [z, y, -x, w]]
    }

    /// Real 4×4 matrix of `b ↦ self·b` in `(w, x, y, z)` coordinates.
    pub fn left_matrix(self) -> [[f64; 4]; 4] {
        let Self { w, x, y, z } = self;
        [[w, -x, -y, -z], [x, w, -z, y], [y, z, w, -x], [z, -y, x, w]]
    }
}

/// Hamilton product with `i·j = k`.
pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        qmul(self, rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Quaternion) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self * -1.0
    }
}

/// A column vector Z ∈ ℍⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVector {
    entries: Vec<Quaternion>,
}

impl QVector {
    pub fn new(entries: Vec<Quaternion>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidOrder(0));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "QVector needs n >= 1");
        Self {
            entries: vec![Quaternion::ZERO; n],
        }
    }

    /// The vector `q·e_a` (single nonzero entry).
    pub fn unit(n: usize, a: usize, q: Quaternion) -> Self {
        let mut v = Self::zeros(n);
        v.entries[a] = q;
        v
    }

    pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            entries: (0..n).map(|_| Quaternion::random_gaussian(rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> &[Quaternion] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Quaternion> {
        self.entries.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|q| q.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Right scalar action `Z ↦ Z·q`.
    pub fn right_mul(&self, q: Quaternion) -> Self {
        Self {
            entries: self.entries.iter().map(|&a| a * q).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&a| a * s).collect(),
        }
    }

    fn check_len(&self, other: &QVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &QVector) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self {
            entries: self
                .iter()
                .zip(other.iter())
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &QVector) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self {
            entries: self
                .iter()
                .zip(other.iter())
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// Flatten to ℝ^{4n}, `(w, x, y, z)` per entry.
    pub fn to_real(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|q| q.to_array()).collect()
    }

    pub fn from_real(c: &[f64]) -> Result<Self> {
        if c.is_empty() || c.len() % 4 != 0 {
            return Err(Error::LengthMismatch {
                expected: 4 * (c.len() / 4).max(1),
                found: c.len(),
            });
        }
        Ok(Self {
            entries: c
                .chunks_exact(4)
                .map(|q| Quaternion::new(q[0], q[1], q[2], q[3]))
                .collect(),
        })
    }

    /// `Z Z'†` as an n×n matrix.
    pub fn outer(&self, other: &QVector) -> Result<QMatrix> {
        self.check_len(other)?;
        let n = self.len();
        let mut m = QMatrix::zeros(n);
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] = self.entries[a] * other.entries[b].conj();
            }
        }
        Ok(m)
    }
}

impl Index<usize> for QVector {
    type Output = Quaternion;
    fn index(&self, i: usize) -> &Quaternion {
        &self.entries[i]
    }
}

impl IndexMut<usize> for QVector {
    fn index_mut(&mut self, i: usize) -> &mut Quaternion {
        &mut self.entries[i]
    }
}

/// Standard real inner product ⟨U, V⟩ = Re(U†V).
pub fn vec_inner(u: &QVector, v: &QVector) -> Result<f64> {
    u.check_len(v)?;
    Ok(u.iter()
        .zip(v.iter())
        .map(|(a, b)| a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z)
        .sum())
}

/// W†Z = Σ conj(Wᵢ)·Zᵢ.
pub fn dagger_product(w: &QVector, z: &QVector) -> Result<Quaternion> {
    w.check_len(z)?;
    Ok(w.iter()
        .zip(z.iter())
        .fold(Quaternion::ZERO, |acc, (&a, &b)| acc + a.conj() * b))
}

/// Square n×n quaternionic matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    n: usize,
    entries: Vec<Quaternion>,
}

impl QMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "QMatrix needs n >= 1");
        Self {
            n,
            entries: vec![Quaternion::ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for a in 0..n {
            m[(a, a)] = Quaternion::ONE;
        }
        m
    }

    /// `E_ab · q`.
    pub fn unit(n: usize, a: usize, b: usize, q: Quaternion) -> Self {
        let mut m = Self::zeros(n);
        m[(a, b)] = q;
        m
    }

    pub fn from_rows(rows: Vec<Vec<Quaternion>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        Ok(Self { n, entries })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn check_order(&self, other: &QMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::OrderMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    pub fn mat_apply(&self, z: &QVector) -> Result<QVector> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        let n = self.n;
        let entries = (0..n)
            .map(|a| {
                (0..n).fold(Quaternion::ZERO, |acc, b| {
                    acc + self.entries[a * n + b] * z[b]
                })
            })
            .collect();
        Ok(QVector { entries })
    }

    pub fn mat_mul(&self, other: &QMatrix) -> Result<QMatrix> {
        self.check_order(other)?;
        let n = self.n;
        let mut out = QMatrix::zeros(n);
        for a in 0..n {
            for c in 0..n {
                let lhs = self.entries[a * n + c];
                if lhs == Quaternion::ZERO {
                    continue;
                }
                for b in 0..n {
                    out.entries[a * n + b] += lhs * other.entries[c * n + b];
                }
            }
        }
        Ok(out)
    }

    pub fn mat_dagger(&self) -> QMatrix {
        let n = self.n;
        let mut out = QMatrix::zeros(n);
        for a in 0..n {
            for b in 0..n {
                out.entries[b * n + a] = self.entries[a * n + b].conj();
            }
        }
        out
    }

    /// Re tr(u).
    pub fn trace_re(&self) -> f64 {
        (0..self.n).map(|a| self.entries[a * self.n + a].w).sum()
    }

    pub fn try_add(&self, other: &QMatrix) -> Result<QMatrix> {
        self.check_order(other)?;
        Ok(QMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &QMatrix) -> Result<QMatrix> {
        self.check_order(other)?;
        Ok(QMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> QMatrix {
        QMatrix {
            n: self.n,
            entries: self.entries.iter().map(|&a| a * s).collect(),
        }
    }

    /// Frobenius norm over all real components.
    pub fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|q| q.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Real 4n×4n matrix of `Z ↦ self·Z` on the flattened ℍⁿ.
    pub fn to_real_left(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(4 * n, 4 * n);
        for a in 0..n {
            for b in 0..n {
                let block = self.entries[a * n + b].left_matrix();
                for (r, row) in block.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        m[(4 * a + r, 4 * b + c)] = v;
                    }
                }
            }
        }
        m
    }
}

impl Index<(usize, usize)> for QMatrix {
    type Output = Quaternion;
    fn index(&self, (a, b): (usize, usize)) -> &Quaternion {
        &self.entries[a * self.n + b]
    }
}

impl IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (a, b): (usize, usize)) -> &mut Quaternion {
        &mut self.entries[a * self.n + b]
    }
}
