//! The Euclidean Jordan algebra V = H_n(ℍ) of quaternionic hermitian matrices.
//!
//! The inner product is `⟨a|b⟩ = (1/n)·Re tr(a·b)`, so the identity `e` has
//! unit norm and `⟨nZZ†|u⟩ = ⟨Z, uZ⟩`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{QMatrix, Quaternion};
use crate::tol;

/// A quaternionic hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermElement {
    mat: QMatrix,
}

impl HermElement {
    /// Accepts `mat` if it is hermitian up to rounding; the stored matrix is
    /// the symmetrized `(mat + mat†)/2`.
    pub fn new(mat: QMatrix) -> Result<Self> {
        let dag = mat.mat_dagger();
        let drift = mat.try_sub(&dag)?.frobenius();
        let scale = mat.frobenius().max(1.0);
        if drift > tol::HERMITIAN_REJECT * scale {
            return Err(Error::NotHermitian { drift });
        }
        if drift > 0.0 {
            let sym = mat.try_add(&dag)?.scale(0.5);
            return Ok(Self { mat: sym });
        }
        Ok(Self { mat })
    }

    /// Hermitian part of an arbitrary matrix, `(m + m†)/2`.
    pub fn hermitian_part(m: &QMatrix) -> Self {
        let sym = m.try_add(&m.mat_dagger()).expect("same order").scale(0.5);
        Self { mat: sym }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            mat: QMatrix::zeros(n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: QMatrix::identity(n),
        }
    }

    /// Random element with Gaussian entries.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut m = QMatrix::zeros(n);
        for a in 0..n {
            m[(a, a)] = Quaternion::real(Quaternion::random_gaussian(rng).w);
            for b in (a + 1)..n {
                let q = Quaternion::random_gaussian(rng);
                m[(a, b)] = q;
                m[(b, a)] = q.conj();
            }
        }
        Self { mat: m }
    }

    pub fn order(&self) -> usize {
        self.mat.order()
    }

    pub fn mat(&self) -> &QMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> QMatrix {
        self.mat
    }

    fn check_order(&self, other: &HermElement) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::OrderMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &HermElement) -> Result<Self> {
        Ok(Self {
            mat: self.mat.try_add(&other.mat)?,
        })
    }

    pub fn sub(&self, other: &HermElement) -> Result<Self> {
        Ok(Self {
            mat: self.mat.try_sub(&other.mat)?,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: self.mat.scale(s),
        }
    }

    /// Jordan square `u∘u`, which is the matrix square.
    pub fn square(&self) -> Self {
        Self::hermitian_part(&self.mat.mat_mul(&self.mat).expect("same order"))
    }

    /// Frobenius norm induced by [`inner`].
    pub fn norm(&self) -> f64 {
        inner(self, self).expect("same order").max(0.0).sqrt()
    }
}

/// `u∘v = ½(u·v + v·u)`.
pub fn jordan_product(u: &HermElement, v: &HermElement) -> Result<HermElement> {
    u.check_order(v)?;
    let uv = u.mat.mat_mul(&v.mat)?;
    Ok(HermElement::hermitian_part(&uv))
}

/// `{uvz} = ½(u·v·z + z·v·u)`.
pub fn triple_product(u: &HermElement, v: &HermElement, z: &HermElement) -> Result<HermElement> {
    u.check_order(v)?;
    u.check_order(z)?;
    let uvz = u.mat.mat_mul(&v.mat)?.mat_mul(&z.mat)?;
    // z·v·u = (u·v·z)† for hermitian arguments
    Ok(HermElement::hermitian_part(&uvz))
}

/// `Re tr(a·b)` without forming the product.
fn trace_re_product(a: &QMatrix, b: &QMatrix) -> f64 {
    let n = a.order();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            let p = a[(r, c)];
            let q = b[(c, r)];
            acc += p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z;
        }
    }
    acc
}

/// `⟨u|v⟩ = (1/n)·Re tr(u·v)`.
pub fn inner(u: &HermElement, v: &HermElement) -> Result<f64> {
    u.check_order(v)?;
    Ok(trace_re_product(&u.mat, &v.mat) / u.order() as f64)
}

/// Orthonormal basis of V under [`inner`].
#[derive(Debug, Clone)]
pub struct JordanBasis {
    n: usize,
    elements: Vec<HermElement>,
}

impl JordanBasis {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[HermElement] {
        &self.elements
    }

    pub fn get(&self, alpha: usize) -> &HermElement {
        &self.elements[alpha]
    }

    /// Coordinates `⟨e_α|u⟩`.
    pub fn coords(&self, u: &HermElement) -> Result<DVector<f64>> {
        if u.order() != self.n {
            return Err(Error::OrderMismatch {
                left: self.n,
                right: u.order(),
            });
        }
        Ok(DVector::from_iterator(
            self.dim(),
            self.elements.iter().map(|e| inner(e, u).expect("checked")),
        ))
    }

    pub fn from_coords(&self, c: &DVector<f64>) -> Result<HermElement> {
        if c.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: c.len(),
            });
        }
        let mut m = QMatrix::zeros(self.n);
        for (e, &ci) in self.elements.iter().zip(c.iter()) {
            if ci != 0.0 {
                m = m.try_add(&e.mat.scale(ci))?;
            }
        }
        Ok(HermElement { mat: m })
    }

    /// Gram matrix `⟨e_α|e_β⟩`.
    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| {
            inner(&self.elements[a], &self.elements[b]).expect("same order")
        })
    }
}

/// `dim V = n(2n − 1)`.
pub fn jordan_dim(n: usize) -> usize {
    n * (2 * n - 1)
}

/// Diagonal generators `√n·E_aa` first, then for each `a < b` (lexicographic)
/// the four generators `√(n/2)·(E_ab q + E_ba q̄)`, `q = 1, i, j, k`.
pub fn orthonormal_basis(n: usize) -> Result<JordanBasis> {
    if n == 0 {
        return Err(Error::InvalidOrder(n));
    }
    let nf = n as f64;
    let mut elements = Vec::with_capacity(jordan_dim(n));
    for a in 0..n {
        elements.push(HermElement {
            mat: QMatrix::unit(n, a, a, Quaternion::real(nf.sqrt())),
        });
    }
    let off = (nf / 2.0).sqrt();
    for a in 0..n {
        for b in (a + 1)..n {
            for q in Quaternion::UNITS {
                let mut m = QMatrix::zeros(n);
                m[(a, b)] = q * off;
                m[(b, a)] = q.conj() * off;
                elements.push(HermElement { mat: m });
            }
        }
    }
    Ok(JordanBasis { n, elements })
}

/// Matrix of `S_uv = [L_u, L_v] + L_{u∘v}` in `basis`; column β holds the
/// coordinates of `{u v e_β}`.
pub fn s_operator(u: &HermElement, v: &HermElement, basis: &JordanBasis) -> Result<DMatrix<f64>> {
    u.check_order(v)?;
    if u.order() != basis.order() {
        return Err(Error::OrderMismatch {
            left: u.order(),
            right: basis.order(),
        });
    }
    let d = basis.dim();
    let uv = u.mat.mat_mul(&v.mat)?;
    let mut out = DMatrix::zeros(d, d);
    for (beta, e) in basis.elements().iter().enumerate() {
        let t = HermElement::hermitian_part(&uv.mat_mul(&e.mat)?);
        out.set_column(beta, &basis.coords(&t)?);
    }
    Ok(out)
}

/// Matrix of the Jordan multiplication `L_u` in `basis`.
pub fn l_operator(u: &HermElement, basis: &JordanBasis) -> Result<DMatrix<f64>> {
    let d = basis.dim();
    let mut out = DMatrix::zeros(d, d);
    for (beta, e) in basis.elements().iter().enumerate() {
        out.set_column(beta, &basis.coords(&jordan_product(u, e)?)?);
    }
    Ok(out)
}

/// Matrix of `S_uv` assembled from its defining commutator formula.
pub fn s_operator_from_l(
    u: &HermElement,
    v: &HermElement,
    basis: &JordanBasis,
) -> Result<DMatrix<f64>> {
    let lu = l_operator(u, basis)?;
    let lv = l_operator(v, basis)?;
    let luv = l_operator(&jordan_product(u, v)?, basis)?;
    Ok(&lu * &lv - &lv * &lu + luv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{vec_inner, QVector};
    use crate::rng;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    fn herm_close(a: &HermElement, b: &HermElement, tol: f64) -> bool {
        a.mat().try_sub(b.mat()).unwrap().frobenius() <= tol
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = QMatrix::unit(2, 0, 1, Quaternion::ONE);
        assert!(matches!(
            HermElement::new(m),
            Err(Error::NotHermitian { .. })
        ));
        let mut near = QMatrix::identity(2);
        near[(0, 1)] = Quaternion::new(0.0, 1e-9, 0.0, 0.0);
        let h = HermElement::new(near).unwrap();
        assert_eq!(h.mat()[(0, 1)], h.mat()[(1, 0)].conj());
    }

    #[test]
    fn jordan_product_examples() {
        let mut r = rng::stream(1, "jordan-product");
        let u = HermElement::random(3, &mut r);
        let e = HermElement::identity(3);
        assert!(herm_close(&jordan_product(&e, &u).unwrap(), &u, 1e-14));

        let mut m = QMatrix::zeros(2);
        m[(0, 1)] = Quaternion::ONE;
        m[(1, 0)] = Quaternion::ONE;
        let u2 = HermElement::new(m).unwrap();
        let d = HermElement::new(QMatrix::unit(2, 0, 0, Quaternion::ONE)).unwrap();
        assert!(herm_close(
            &jordan_product(&u2, &d).unwrap(),
            &u2.scale(0.5),
            1e-15
        ));

        assert!(herm_close(
            &jordan_product(&u, &u).unwrap(),
            &u.square(),
            1e-13
        ));
        assert!(jordan_product(&u, &HermElement::identity(2)).is_err());
    }

    #[test]
    fn triple_product_examples() {
        let e = HermElement::identity(2);
        assert!(herm_close(&triple_product(&e, &e, &e).unwrap(), &e, 0.0));
        let mut r = rng::stream(2, "triple");
        let u = HermElement::random(2, &mut r);
        assert!(herm_close(&triple_product(&e, &u, &e).unwrap(), &u, 1e-14));

        let basis = orthonormal_basis(2).unwrap();
        let v = HermElement::random(2, &mut r);
        let z = HermElement::random(2, &mut r);
        let s = s_operator(&u, &v, &basis).unwrap();
        let via_op = basis
            .from_coords(&(&s * basis.coords(&z).unwrap()))
            .unwrap();
        assert!(herm_close(
            &triple_product(&u, &v, &z).unwrap(),
            &via_op,
            1e-13
        ));
    }

    #[test]
    fn inner_examples() {
        for n in 1..=4 {
            let e = HermElement::identity(n);
            assert!((inner(&e, &e).unwrap() - 1.0).abs() < 1e-15);
        }
        let e11 = HermElement::new(QMatrix::unit(2, 0, 0, Quaternion::ONE)).unwrap();
        let e22 = HermElement::new(QMatrix::unit(2, 1, 1, Quaternion::ONE)).unwrap();
        assert_eq!(inner(&e11, &e22).unwrap(), 0.0);

        let mut r = rng::stream(3, "inner");
        for n in 2..=4 {
            let z = QVector::random_gaussian(n, &mut r);
            let u = HermElement::random(n, &mut r);
            let x = HermElement::new(z.outer(&z).unwrap().scale(n as f64)).unwrap();
            let lhs = inner(&x, &u).unwrap();
            let rhs = vec_inner(&z, &u.mat().mat_apply(&z).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn basis_is_orthonormal_with_expected_dimension() {
        for n in 1..=6 {
            let b = orthonormal_basis(n).unwrap();
            assert_eq!(b.dim(), jordan_dim(n));
            let g = b.gram() - DMatrix::identity(b.dim(), b.dim());
            assert!(max_abs(&g) < 1e-13, "n = {n}");
        }
        assert_eq!(orthonormal_basis(2).unwrap().dim(), 6);
        assert_eq!(orthonormal_basis(3).unwrap().dim(), 15);
        assert!(orthonormal_basis(0).is_err());
    }

    #[test]
    fn basis_spans_v() {
        let mut r = rng::stream(4, "span");
        let b = orthonormal_basis(3).unwrap();
        let u = HermElement::random(3, &mut r);
        let back = b.from_coords(&b.coords(&u).unwrap()).unwrap();
        assert!(herm_close(&u, &back, 1e-13));
    }

    #[test]
    fn structure_operator_properties() {
        let mut r = rng::stream(5, "s-op");
        for n in [2, 3] {
            let b = orthonormal_basis(n).unwrap();
            let e = HermElement::identity(n);
            let see = s_operator(&e, &e, &b).unwrap();
            assert!(max_abs(&(see - DMatrix::identity(b.dim(), b.dim()))) < 1e-13);
            let le = l_operator(&e, &b).unwrap();
            assert!(max_abs(&(le - DMatrix::identity(b.dim(), b.dim()))) < 1e-13);

            let u = HermElement::random(n, &mut r);
            let v = HermElement::random(n, &mut r);
            let z = HermElement::random(n, &mut r);
            let w = HermElement::random(n, &mut r);
            let suv = s_operator(&u, &v, &b).unwrap();
            let svu = s_operator(&v, &u, &b).unwrap();
            assert!(max_abs(&(suv.transpose() - &svu)) < 1e-12);

            let via_l = s_operator_from_l(&u, &v, &b).unwrap();
            assert!(max_abs(&(&via_l - &suv)) < 1e-12);

            let szw = s_operator(&z, &w, &b).unwrap();
            let lhs = &suv * &szw - &szw * &suv;
            let uvz = triple_product(&u, &v, &z).unwrap();
            let vuw = triple_product(&v, &u, &w).unwrap();
            let rhs = s_operator(&uvz, &w, &b).unwrap() - s_operator(&z, &vuw, &b).unwrap();
            let scale = max_abs(&lhs).max(1.0);
            assert!(max_abs(&(lhs - rhs)) < 1e-12 * scale);
        }
    }

    #[test]
    fn jordan_identity_and_associative_inner() {
        let mut r = rng::stream(6, "jordan-identity");
        for n in 1..=4 {
            for _ in 0..20 {
                let u = HermElement::random(n, &mut r);
                let v = HermElement::random(n, &mut r);
                let w = HermElement::random(n, &mut r);
                let u2 = u.square();
                let lhs = jordan_product(&jordan_product(&u2, &v).unwrap(), &u).unwrap();
                let rhs = jordan_product(&u2, &jordan_product(&v, &u).unwrap()).unwrap();
                let scale = lhs.mat().frobenius().max(1.0);
                assert!(lhs.sub(&rhs).unwrap().mat().frobenius() < 1e-12 * scale);

                let a = inner(&jordan_product(&u, &v).unwrap(), &w).unwrap();
                let c = inner(&v, &jordan_product(&u, &w).unwrap()).unwrap();
                assert!((a - c).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
