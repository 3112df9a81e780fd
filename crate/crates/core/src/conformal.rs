//! The conformal algebra 𝔠𝔬 = V ⊕ 𝔰𝔱𝔯 ⊕ V* of H_n(ℍ).
//!
//! Structure-algebra elements are stored as operators on V (real
//! `dim V × dim V` matrices in the orthonormal Jordan basis); V* is identified
//! with V through the inner product.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jordan::{self, HermElement, JordanBasis};
use crate::tol;

#[derive(Debug, Clone)]
pub struct ConformalElement {
    /// The `X_z` component.
    pub x: HermElement,
    /// The structure-algebra component, as an operator on V.
    pub s: DMatrix<f64>,
    /// The `Y_w` component.
    pub y: HermElement,
}

impl ConformalElement {
    pub fn order(&self) -> usize {
        self.x.order()
    }

    fn add(&self, other: &ConformalElement) -> Result<ConformalElement> {
        Ok(ConformalElement {
            x: self.x.add(&other.x)?,
            s: &self.s + &other.s,
            y: self.y.add(&other.y)?,
        })
    }

    /// Component-wise norm: the largest of `|x|`, `|s|_F`, `|y|`.
    pub fn norm(&self) -> f64 {
        self.x.norm().max(self.s.norm()).max(self.y.norm())
    }
}

/// Orthonormal (Frobenius) basis of 𝔰𝔱𝔯 together with the generator pairs
/// `(α, β)` whose operators `S_{e_α e_β}` were kept while building it.
#[derive(Debug, Clone)]
pub struct StructureSpan {
    pub basis: Vec<DMatrix<f64>>,
    pub pivots: Vec<(usize, usize)>,
}

impl StructureSpan {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Frobenius norm of the component of `s` orthogonal to the span.
    pub fn projection_residual(&self, s: &DMatrix<f64>) -> f64 {
        let mut r = s.clone();
        // two passes keep the residual honest at rounding level
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.dot(&r);
                r -= b * c;
            }
        }
        r.norm()
    }
}

/// The conformal algebra of H_n(ℍ) in a fixed orthonormal Jordan basis.
#[derive(Debug)]
pub struct ConformalAlgebra {
    basis: JordanBasis,
    span: OnceLock<StructureSpan>,
}

impl ConformalAlgebra {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            basis: jordan::orthonormal_basis(n)?,
            span: OnceLock::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn basis(&self) -> &JordanBasis {
        &self.basis
    }

    pub fn jordan_dim(&self) -> usize {
        self.basis.dim()
    }

    /// Span of `{S_{e_α e_β}}`, computed on first use.
    pub fn structure_span(&self) -> &StructureSpan {
        self.span.get_or_init(|| {
            let d = self.basis.dim();
            let mut basis: Vec<DMatrix<f64>> = Vec::new();
            let mut pivots = Vec::new();
            for a in 0..d {
                for b in 0..d {
                    let s = self.s(self.basis.get(a), self.basis.get(b));
                    let scale = s.norm();
                    let mut r = s;
                    for _ in 0..2 {
                        for q in &basis {
                            let c = q.dot(&r);
                            r -= q * c;
                        }
                    }
                    let rn = r.norm();
                    if rn > tol::GRAM_SCHMIDT_DROP * scale.max(1.0) {
                        basis.push(r / rn);
                        pivots.push((a, b));
                    }
                }
            }
            StructureSpan { basis, pivots }
        })
    }

    /// `S_uv` as an operator in the algebra's basis.
    pub fn s(&self, u: &HermElement, v: &HermElement) -> DMatrix<f64> {
        jordan::s_operator(u, v, &self.basis).expect("elements of this algebra's order")
    }

    fn check(&self, a: &ConformalElement) -> Result<()> {
        let d = self.basis.dim();
        if a.order() != self.order() || a.y.order() != self.order() {
            return Err(Error::OrderMismatch {
                left: self.order(),
                right: a.order(),
            });
        }
        if a.s.nrows() != d || a.s.ncols() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                found: a.s.nrows(),
            });
        }
        Ok(())
    }

    pub fn zero(&self) -> ConformalElement {
        let n = self.order();
        let d = self.basis.dim();
        ConformalElement {
            x: HermElement::zero(n),
            s: DMatrix::zeros(d, d),
            y: HermElement::zero(n),
        }
    }

    pub fn x_of(&self, z: &HermElement) -> ConformalElement {
        ConformalElement {
            x: z.clone(),
            ..self.zero()
        }
    }

    pub fn y_of(&self, w: &HermElement) -> ConformalElement {
        ConformalElement {
            y: w.clone(),
            ..self.zero()
        }
    }

    pub fn s_of(&self, u: &HermElement, v: &HermElement) -> ConformalElement {
        ConformalElement {
            s: self.s(u, v),
            ..self.zero()
        }
    }

    /// Builds an element from raw parts, rejecting a structure part outside 𝔰𝔱𝔯.
    pub fn element(
        &self,
        x: HermElement,
        s: DMatrix<f64>,
        y: HermElement,
    ) -> Result<ConformalElement> {
        let e = ConformalElement { x, s, y };
        self.check(&e)?;
        let r = self.structure_span().projection_residual(&e.s);
        if r > tol::ALGEBRA * e.s.norm().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "structure part is outside the span of S_uv (residual {r:.3e})"
            )));
        }
        Ok(e)
    }

    /// Random element: Gaussian `X`, `Y` parts and a structure part `S_{u₁v₁} + S_{u₂v₂}`.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> ConformalElement {
        let n = self.order();
        let mut s = DMatrix::zeros(self.basis.dim(), self.basis.dim());
        for _ in 0..2 {
            let u = HermElement::random(n, rng);
            let v = HermElement::random(n, rng);
            s += self.s(&u, &v);
        }
        ConformalElement {
            x: HermElement::random(n, rng),
            s,
            y: HermElement::random(n, rng),
        }
    }

    /// Generators `X_{e_α}`, `Y_{e_β}` and a maximal independent set of `S_{e_γ e_δ}`.
    pub fn generators(&self) -> Vec<ConformalElement> {
        let mut out: Vec<ConformalElement> =
            self.basis.elements().iter().map(|e| self.x_of(e)).collect();
        out.extend(self.basis.elements().iter().map(|e| self.y_of(e)));
        for &(a, b) in &self.structure_span().pivots {
            out.push(self.s_of(self.basis.get(a), self.basis.get(b)));
        }
        out
    }

    /// Bracket of 𝔠𝔬:
    /// `[S, X_z] = X_{S z}`, `[S, Y_w] = −Y_{Sᵀ w}`, `[S, S'] = SS' − S'S`,
    /// `[X, X] = [Y, Y] = 0`, `[X_u, Y_v] = −2 S_uv`.
    pub fn co_bracket(
        &self,
        a: &ConformalElement,
        b: &ConformalElement,
    ) -> Result<ConformalElement> {
        self.check(a)?;
        self.check(b)?;
        let basis = &self.basis;
        let act = |m: &DMatrix<f64>, z: &HermElement| -> Result<HermElement> {
            basis.from_coords(&(m * basis.coords(z)?))
        };
        let x = act(&a.s, &b.x)?.sub(&act(&b.s, &a.x)?)?;
        let y = act(&b.s.transpose(), &a.y)?.sub(&act(&a.s.transpose(), &b.y)?)?;
        let s = &a.s * &b.s - &b.s * &a.s - self.s(&a.x, &b.y) * 2.0 + self.s(&b.x, &a.y) * 2.0;
        Ok(ConformalElement { x, s, y })
    }

    /// Component-wise norm of `[A,[B,C]] + [B,[C,A]] + [C,[A,B]]`.
    pub fn jacobi_residual(
        &self,
        a: &ConformalElement,
        b: &ConformalElement,
        c: &ConformalElement,
    ) -> Result<f64> {
        Ok(self.jacobi_terms(a, b, c)?.0)
    }

    /// Jacobi residual together with the largest norm among the three terms.
    pub fn jacobi_terms(
        &self,
        a: &ConformalElement,
        b: &ConformalElement,
        c: &ConformalElement,
    ) -> Result<(f64, f64)> {
        let t1 = self.co_bracket(a, &self.co_bracket(b, c)?)?;
        let t2 = self.co_bracket(b, &self.co_bracket(c, a)?)?;
        let t3 = self.co_bracket(c, &self.co_bracket(a, b)?)?;
        let scale = t1.norm().max(t2.norm()).max(t3.norm());
        Ok((t1.add(&t2)?.add(&t3)?.norm(), scale))
    }

    /// `2·dim V + rank span{S_{e_α e_β}}`.
    pub fn co_dimension(&self) -> usize {
        2 * self.basis.dim() + self.structure_span().rank()
    }
}

/// One named check with its worst residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraCheck {
    pub name: String,
    pub checked: usize,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraReport {
    pub n: usize,
    pub dim: usize,
    pub expected_dim: usize,
    pub structure_rank: usize,
    pub checks: Vec<AlgebraCheck>,
}

impl AlgebraReport {
    pub fn pass(&self) -> bool {
        self.dim == self.expected_dim && self.checks.iter().all(|c| c.pass)
    }
}

fn relative_jacobi(
    alg: &ConformalAlgebra,
    a: &ConformalElement,
    b: &ConformalElement,
    c: &ConformalElement,
) -> f64 {
    let (res, scale) = alg.jacobi_terms(a, b, c).expect("elements of this algebra");
    res / scale.max(1.0)
}

/// Jacobi identity on `samples` random triples and on every triple of
/// distinct generators, closure of generator brackets, and the dimension.
/// Jacobi residuals are relative to the largest of the three terms.
pub fn verify_algebra<R: Rng + ?Sized>(
    n: usize,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<AlgebraReport> {
    let alg = ConformalAlgebra::new(n)?;
    let mut random = 0.0f64;
    for _ in 0..samples {
        let a = alg.random_element(rng);
        let b = alg.random_element(rng);
        let c = alg.random_element(rng);
        random = random.max(relative_jacobi(&alg, &a, &b, &c));
    }

    let gens = alg.generators();
    let g = gens.len();
    let mut brackets = vec![vec![None; g]; g];
    let mut closure = 0.0f64;
    let mut pairs = 0;
    for i in 0..g {
        for j in i + 1..g {
            let br = alg.co_bracket(&gens[i], &gens[j])?;
            closure =
                closure.max(alg.structure_span().projection_residual(&br.s) / br.norm().max(1.0));
            pairs += 1;
            brackets[i][j] = Some(br);
        }
    }
    let br = |i: usize, j: usize| -> ConformalElement {
        if i < j {
            brackets[i][j].clone().expect("filled above")
        } else {
            let b = brackets[j][i].as_ref().expect("filled above");
            ConformalElement {
                x: b.x.scale(-1.0),
                s: -&b.s,
                y: b.y.scale(-1.0),
            }
        }
    };
    let mut generator = 0.0f64;
    let mut triples = 0;
    for i in 0..g {
        for j in i + 1..g {
            for k in j + 1..g {
                let t1 = alg.co_bracket(&gens[i], &br(j, k))?;
                let t2 = alg.co_bracket(&gens[j], &br(k, i))?;
                let t3 = alg.co_bracket(&gens[k], &br(i, j))?;
                let scale = t1.norm().max(t2.norm()).max(t3.norm()).max(1.0);
                generator = generator.max(t1.add(&t2)?.add(&t3)?.norm() / scale);
                triples += 1;
            }
        }
    }

    let check = |name: &str, checked: usize, max_residual: f64| AlgebraCheck {
        name: name.to_string(),
        checked,
        max_residual,
        pass: max_residual < tol,
    };
    Ok(AlgebraReport {
        n,
        dim: alg.co_dimension(),
        expected_dim: expected_co_dimension(n),
        structure_rank: alg.structure_span().rank(),
        checks: vec![
            check("jacobi on random triples", samples, random),
            check("jacobi on generator triples", triples, generator),
            check("closure of generator brackets", pairs, closure),
        ],
    })
}

/// `dim 𝔠𝔬` computed by rank.
pub fn co_dimension(n: usize) -> Result<usize> {
    Ok(ConformalAlgebra::new(n)?.co_dimension())
}

/// `dim 𝔰𝔬*(4n) = 2n(4n − 1)` for `n ≥ 2`. For `n = 1`, V = ℝ and the
/// conformal algebra is 𝔰𝔩(2, ℝ) of dimension 3.
pub fn expected_co_dimension(n: usize) -> usize {
    match n {
        0 => 0,
        1 => 3,
        _ => 2 * n * (4 * n - 1),
    }
}

/// `dim 𝔰𝔱𝔯 = 4n²` for `n ≥ 2` (𝔰𝔲*(2n) ⊕ ℝ); 1 for `n = 1`.
pub fn expected_structure_dimension(n: usize) -> usize {
    match n {
        0 => 0,
        1 => 1,
        _ => 4 * n * n,
    }
}
