//! Canonical Poisson structure on T*ℍⁿ_* ≅ ℝ^{8n}.
//!
//! Flattened coordinates are `z = (q, p)` with `q` the components of `Z` and
//! `p` those of `W`, each quaternion expanded as `(w, x, y, z)`. The bracket
//! convention is `{q_i, p_j} = δ_ij`, so that `{⟨U, Z⟩, ⟨V, W⟩} = ⟨U, V⟩`.
//!
//! Affine-quadratic observables `½ zᵀAz + bᵀz + c` are closed under the
//! bracket, which [`bracket_exact`] computes on the data `(A, b, c)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{QMatrix, QVector};
use crate::tol;

/// A point `(Z, W)` of T*ℍⁿ_*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    z: QVector,
    w: QVector,
}

impl PhasePoint {
    pub fn new(z: QVector, w: QVector) -> Result<Self> {
        if z.len() != w.len() {
            return Err(Error::LengthMismatch {
                expected: z.len(),
                found: w.len(),
            });
        }
        let norm = z.norm();
        if norm <= tol::DOMAIN_EPS {
            return Err(Error::DomainGuard { norm });
        }
        Ok(Self { z, w })
    }

    pub fn order(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &QVector {
        &self.z
    }

    pub fn w(&self) -> &QVector {
        &self.w
    }

    /// `(Z·g, W·g)`.
    pub fn right_mul(&self, g: crate::quat::Quaternion) -> Result<Self> {
        Self::new(self.z.right_mul(g), self.w.right_mul(g))
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut v = self.z.to_real();
        v.extend(self.w.to_real());
        DVector::from_vec(v)
    }

    pub fn unflatten(z: &[f64]) -> Result<Self> {
        if z.len() < 8 || z.len() % 8 != 0 {
            return Err(Error::LengthMismatch {
                expected: 8 * (z.len() / 8).max(1),
                found: z.len(),
            });
        }
        let half = z.len() / 2;
        Self::new(
            QVector::from_real(&z[..half])?,
            QVector::from_real(&z[half..])?,
        )
    }
}

/// `|Z|` of a flattened point.
fn position_norm(z: &[f64]) -> f64 {
    z[..z.len() / 2].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `f(z) = ½ zᵀAz + bᵀz + c` on ℝ^{8n}.
#[derive(Debug, Clone)]
pub struct QuadObservable {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    n: usize,
    // blocks (qq, qp; pq, pp) of A that may be nonzero; conservative
    mask: [[bool; 2]; 2],
}

impl PartialEq for QuadObservable {
    fn eq(&self, o: &Self) -> bool {
        self.n == o.n && self.a == o.a && self.b == o.b && self.c == o.c
    }
}

fn block_mask(a: &DMatrix<f64>, n: usize) -> [[bool; 2]; 2] {
    let h = 4 * n;
    let nz = |r: usize, c: usize| a.view((r * h, c * h), (h, h)).iter().any(|&x| x != 0.0);
    [[nz(0, 0), nz(0, 1)], [nz(1, 0), nz(1, 1)]]
}

impl QuadObservable {
    /// `A` is replaced by its symmetric part.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        let dim = a.nrows();
        if dim == 0 || dim % 8 != 0 || a.ncols() != dim {
            return Err(Error::LengthMismatch {
                expected: 8 * (dim / 8).max(1),
                found: a.ncols(),
            });
        }
        if b.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: b.len(),
            });
        }
        let a = (&a + a.transpose()) * 0.5;
        Ok(Self::from_parts(a, b, c, dim / 8))
    }

    fn from_parts(a: DMatrix<f64>, b: DVector<f64>, c: f64, n: usize) -> Self {
        let mask = block_mask(&a, n);
        Self { a, b, c, n, mask }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(8 * n, 8 * n),
            b: DVector::zeros(8 * n),
            c: 0.0,
            n,
            mask: [[false; 2]; 2],
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { c, ..Self::zero(n) }
    }

    /// `⟨U, Z⟩`.
    pub fn position_linear(u: &QVector) -> Self {
        let n = u.len();
        let mut f = Self::zero(n);
        f.b.rows_mut(0, 4 * n).copy_from_slice(&u.to_real());
        f
    }

    /// `⟨V, W⟩`.
    pub fn momentum_linear(v: &QVector) -> Self {
        let n = v.len();
        let mut f = Self::zero(n);
        f.b.rows_mut(4 * n, 4 * n).copy_from_slice(&v.to_real());
        f
    }

    /// `coef·⟨Z, M Z⟩`.
    pub fn position_form(m: &QMatrix, coef: f64) -> Self {
        let n = m.order();
        let r = m.to_real_left();
        let mut f = Self::zero(n);
        // ½ qᵀ A q = coef qᵀ R q  ⇒  A = coef (R + Rᵀ)
        let block = (&r + r.transpose()) * coef;
        f.a.view_mut((0, 0), (4 * n, 4 * n)).copy_from(&block);
        f.mask[0][0] = true;
        f
    }

    /// `coef·⟨W, M W⟩`.
    pub fn momentum_form(m: &QMatrix, coef: f64) -> Self {
        let n = m.order();
        let r = m.to_real_left();
        let mut f = Self::zero(n);
        let block = (&r + r.transpose()) * coef;
        f.a.view_mut((4 * n, 4 * n), (4 * n, 4 * n))
            .copy_from(&block);
        f.mask[1][1] = true;
        f
    }

    /// `coef·⟨W, M Z⟩`.
    pub fn mixed_form(m: &QMatrix, coef: f64) -> Self {
        let n = m.order();
        let h = 4 * n;
        let mut f = Self::zero(n);
        for r in 0..n {
            for c in 0..n {
                let blk = m[(r, c)].left_matrix();
                for (i, row) in blk.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        let v = coef * v;
                        f.a[(h + 4 * r + i, 4 * c + j)] = v;
                        f.a[(4 * c + j, h + 4 * r + i)] = v;
                    }
                }
            }
        }
        f.mask = [[false, true], [true, false]];
        f
    }

    /// `coef·pᵀ R q` for a real `4n×4n` matrix `R`.
    pub fn mixed_real(r: &DMatrix<f64>, coef: f64) -> Self {
        let n = r.nrows() / 4;
        let r = r * coef;
        let mut f = Self::zero(n);
        // ½ zᵀAz with A_pq = R, A_qp = Rᵀ gives pᵀ R q
        f.a.view_mut((4 * n, 0), (4 * n, 4 * n)).copy_from(&r);
        f.a.view_mut((0, 4 * n), (4 * n, 4 * n))
            .copy_from(&r.transpose());
        f.mask = [[false, true], [true, false]];
        f
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn constant_term(&self) -> f64 {
        self.c
    }

    fn check(&self, other: &QuadObservable) -> Result<()> {
        if self.n != other.n {
            return Err(Error::OrderMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, p: &PhasePoint) -> Result<f64> {
        if p.order() != self.n {
            return Err(Error::OrderMismatch {
                left: self.n,
                right: p.order(),
            });
        }
        Ok(self.evaluate_flat(p.flatten().as_slice()))
    }

    /// Evaluation on flattened coordinates; `z.len()` must be `8n`.
    pub fn evaluate_flat(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        0.5 * z.dot(&(&self.a * &z)) + self.b.dot(&z) + self.c
    }

    /// `∇f(z) = Az + b`.
    pub fn gradient_flat(&self, z: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(z) + &self.b
    }

    pub fn add(&self, other: &QuadObservable) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            c: self.c + other.c,
            n: self.n,
            mask: self.mask_or(other),
        })
    }

    pub fn sub(&self, other: &QuadObservable) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            a: &self.a - &other.a,
            b: &self.b - &other.b,
            c: self.c - other.c,
            n: self.n,
            mask: self.mask_or(other),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            a: &self.a * s,
            b: &self.b * s,
            c: self.c * s,
            n: self.n,
            mask: self.mask,
        }
    }

    /// `self += s·other` in place.
    pub fn axpy(&mut self, s: f64, other: &QuadObservable) -> Result<()> {
        self.check(other)?;
        self.a += &other.a * s;
        self.b += &other.b * s;
        self.c += s * other.c;
        self.mask = self.mask_or(other);
        Ok(())
    }

    fn mask_or(&self, o: &QuadObservable) -> [[bool; 2]; 2] {
        let (m, k) = (self.mask, o.mask);
        [
            [m[0][0] || k[0][0], m[0][1] || k[0][1]],
            [m[1][0] || k[1][0], m[1][1] || k[1][1]],
        ]
    }

    /// Frobenius norm of the data `(A, b, c)`.
    pub fn norm(&self) -> f64 {
        (self.a.norm_squared() + self.b.norm_squared() + self.c * self.c).sqrt()
    }

    /// `‖self − other‖ / max(1, ‖self‖, ‖other‖)`.
    pub fn relative_distance(&self, other: &QuadObservable) -> Result<f64> {
        self.check(other)?;
        let gap =
            |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        let d2 = gap(self.a.as_slice(), other.a.as_slice())
            + gap(self.b.as_slice(), other.b.as_slice())
            + (self.c - other.c).powi(2);
        Ok(d2.sqrt() / self.norm().max(other.norm()).max(1.0))
    }
}

/// `J·v`.
fn j_times(v: &DVector<f64>) -> DVector<f64> {
    let h = v.len() / 2;
    let mut out = DVector::zeros(v.len());
    out.rows_mut(0, h).copy_from(&v.rows(h, h));
    out.rows_mut(h, h).copy_from(&(-v.rows(0, h)));
    out
}

/// The canonical tensor `J` with `{z_a, z_b} = J_ab`.
pub fn poisson_tensor(n: usize) -> DMatrix<f64> {
    let h = 4 * n;
    let mut j = DMatrix::zeros(2 * h, 2 * h);
    for i in 0..h {
        j[(i, h + i)] = 1.0;
        j[(h + i, i)] = -1.0;
    }
    j
}

/// Exact canonical bracket `{f, g} = ∇fᵀ J ∇g` on quadratic data:
/// `A' = AJB − BJA`, `b' = AJb_g − BJb_f`, `c' = b_fᵀ J b_g`.
pub fn bracket_exact(f: &QuadObservable, g: &QuadObservable) -> Result<QuadObservable> {
    f.check(g)?;
    let h = 4 * f.n;
    let (fz, gz) = (f.mask, g.mask);
    // AJB block by block: (AJ)_{i0} = −A_{i1}, (AJ)_{i1} = A_{i0}; zero blocks skipped
    let mut a = DMatrix::zeros(2 * h, 2 * h);
    let mut mask = [[false; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut out = a.view_mut((i * h, j * h), (h, h));
            if fz[i][1] && gz[0][j] {
                out.gemm(
                    -1.0,
                    &f.a.view((i * h, h), (h, h)),
                    &g.a.view((0, j * h), (h, h)),
                    1.0,
                );
                mask[i][j] = true;
            }
            if fz[i][0] && gz[1][j] {
                out.gemm(
                    1.0,
                    &f.a.view((i * h, 0), (h, h)),
                    &g.a.view((h, j * h), (h, h)),
                    1.0,
                );
                mask[i][j] = true;
            }
        }
    }
    // A' = AJB + (AJB)ᵀ, since (AJB)ᵀ = −BJA for symmetric A, B
    for i in 0..2 * h {
        for j in i..2 * h {
            let v = a[(i, j)] + a[(j, i)];
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mask = [
        [mask[0][0], mask[0][1] || mask[1][0]],
        [mask[0][1] || mask[1][0], mask[1][1]],
    ];
    let (b, c) = if f.b.iter().all(|&x| x == 0.0) && g.b.iter().all(|&x| x == 0.0) {
        (DVector::zeros(2 * h), 0.0)
    } else {
        (
            &f.a * j_times(&g.b) - &g.a * j_times(&f.b),
            f.b.dot(&j_times(&g.b)),
        )
    };
    Ok(QuadObservable {
        a,
        b,
        c,
        n: f.n,
        mask,
    })
}

/// `∇fᵀ J ∇g` from two gradients at a point.
pub fn bracket_of_gradients(df: &DVector<f64>, dg: &DVector<f64>) -> f64 {
    df.dot(&j_times(dg))
}

fn central_gradient<F>(f: &F, z: &[f64], h: f64) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut probe = z.to_vec();
    let mut g = DVector::zeros(z.len());
    for i in 0..z.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let norm = position_norm(&probe);
        if norm <= tol::DOMAIN_EPS {
            return Err(Error::DomainGuard { norm });
        }
        let up = f(&probe);
        probe[i] = orig - h;
        let norm = position_norm(&probe);
        if norm <= tol::DOMAIN_EPS {
            return Err(Error::DomainGuard { norm });
        }
        let down = f(&probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference gradient with a Richardson step at `h/2` when the two
/// step sizes disagree by more than the oracle tolerance.
pub fn numeric_gradient<F>(f: &F, z: &[f64], h: f64) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !(h > 1e-12 * scale) {
        return Err(Error::StepUnderflow(h));
    }
    let coarse = central_gradient(f, z, h)?;
    let fine = central_gradient(f, z, h / 2.0)?;
    let gap = (&coarse - &fine).amax();
    if gap > tol::ORACLE * coarse.amax().max(1.0) {
        Ok((fine * 4.0 - coarse) / 3.0)
    } else {
        Ok(fine)
    }
}

/// Finite-difference canonical bracket
/// `Σ (∂f/∂qᵢ ∂g/∂pᵢ − ∂f/∂pᵢ ∂g/∂qᵢ)` at `p`.
pub fn bracket_numeric<F, G>(f: &F, g: &G, p: &PhasePoint, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    let z = p.flatten();
    let df = numeric_gradient(f, z.as_slice(), h)?;
    let dg = numeric_gradient(g, z.as_slice(), h)?;
    Ok(bracket_of_gradients(&df, &dg))
}
