//! The Kepler cone 𝒞₁ ⊂ H_n(ℍ), its horizontal lifts to ℍⁿ_*, and the
//! cotangent variables `(x, π)` obtained from a point `(Z, W)` upstairs.
//!
//! `x = nZZ†`. The lift of a tangent vector `ẋ` at `x` is
//! `Ż = (ẋZ − ½Re tr(ẋ)·Z) / (n|Z|²)`, and `π ∈ T_x𝒞₁` is fixed by
//! `⟨π|ẋ⟩ = ⟨W, Ż⟩`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jordan::{inner, HermElement, JordanBasis};
use crate::poisson::PhasePoint;
use crate::quat::{vec_inner, QVector, Quaternion};
use crate::realization::magnetic_charge;
use crate::tol;

/// `x = nZZ†` on the rank-one cone, with `r = Re tr(x)/n = |Z|²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConePoint {
    x: HermElement,
    r: f64,
}

impl ConePoint {
    pub fn x(&self) -> &HermElement {
        &self.x
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

fn check_position(z: &QVector) -> Result<()> {
    let norm = z.norm();
    if norm <= tol::DOMAIN_EPS {
        return Err(Error::DomainGuard { norm });
    }
    Ok(())
}

pub fn cone_point(z: &QVector) -> Result<ConePoint> {
    check_position(z)?;
    let n = z.len() as f64;
    let x = HermElement::hermitian_part(&z.outer(z)?.scale(n));
    let r = x.mat().trace_re() / n;
    Ok(ConePoint { x, r })
}

/// `n(vZ† + Zv†)`, the pushforward of `v ∈ T_Zℍⁿ`.
pub fn pushforward(z: &QVector, v: &QVector) -> Result<HermElement> {
    let n = z.len() as f64;
    let m = v.outer(z)?.try_add(&z.outer(v)?)?.scale(n);
    Ok(HermElement::hermitian_part(&m))
}

/// Orthonormal basis of `T_x𝒞₁` at `x = nZZ†`, of dimension `4n − 3`.
pub fn tangent_basis(z: &QVector) -> Result<Vec<HermElement>> {
    check_position(z)?;
    let n = z.len();
    let mut basis: Vec<HermElement> = Vec::with_capacity(4 * n - 3);
    for a in 0..n {
        for q in Quaternion::UNITS {
            let mut t = pushforward(z, &QVector::unit(n, a, q))?;
            let scale = inner(&t, &t)?.sqrt();
            for _ in 0..2 {
                for b in &basis {
                    t = t.sub(&b.scale(inner(&t, b)?))?;
                }
            }
            let norm = inner(&t, &t)?.sqrt();
            if norm > tol::GRAM_SCHMIDT_DROP * scale.max(1.0) {
                basis.push(t.scale(1.0 / norm));
            }
        }
    }
    if basis.len() != 4 * n - 3 {
        return Err(Error::DegenerateTangentBasis {
            expected: 4 * n - 3,
            found: basis.len(),
        });
    }
    Ok(basis)
}

/// Orthogonal projection onto the tangent space, with the norm of the
/// discarded normal part.
fn project(v: &HermElement, basis: &[HermElement]) -> Result<(HermElement, f64)> {
    let mut proj = HermElement::zero(v.order());
    for b in basis {
        proj = proj.add(&b.scale(inner(v, b)?))?;
    }
    let normal = v.sub(&proj)?;
    Ok((proj, inner(&normal, &normal)?.sqrt()))
}

fn lift_unchecked(z: &QVector, xdot: &HermElement) -> Result<QVector> {
    let n = z.len() as f64;
    let r2 = z.norm_sqr();
    let xz = xdot.mat().mat_apply(z)?;
    let half_tr = 0.5 * xdot.mat().trace_re();
    Ok(xz.try_sub(&z.scale(half_tr))?.scale(1.0 / (n * r2)))
}

/// Horizontal lift of `ẋ ∈ T_x𝒞₁`: the unique `Ż` with `n(ŻZ† + ZŻ†) = ẋ` and
/// `Im(Z†Ż) = 0`. Inputs off the tangent space by more than rounding are
/// rejected; smaller normal components are projected away.
pub fn horizontal_lift(z: &QVector, xdot: &HermElement) -> Result<QVector> {
    check_position(z)?;
    if xdot.order() != z.len() {
        return Err(Error::OrderMismatch {
            left: z.len(),
            right: xdot.order(),
        });
    }
    let basis = tangent_basis(z)?;
    let (proj, residual) = project(xdot, &basis)?;
    let scale = inner(xdot, xdot)?.sqrt().max(1.0);
    if residual > tol::ALGEBRA * scale {
        return Err(Error::NotTangent { residual });
    }
    lift_unchecked(z, &proj)
}

/// The cotangent data `(x, π)` of a point `(Z, W)`, keeping the source point
/// for quantities that are read through the upstairs identification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CotangentData {
    x: ConePoint,
    pi: HermElement,
    source: PhasePoint,
}

impl CotangentData {
    pub fn x(&self) -> &ConePoint {
        &self.x
    }

    pub fn pi(&self) -> &HermElement {
        &self.pi
    }

    pub fn source(&self) -> &PhasePoint {
        &self.source
    }

    /// `⟨x|π²⟩`.
    pub fn kinetic(&self) -> Result<f64> {
        inner(self.x.x(), &self.pi.square())
    }

    /// `⟨π|ẋ⟩ − (1/(n|Z|²))⟨W, ẋZ − ½Re tr(ẋ)Z⟩`.
    pub fn pairing_residual(&self, xdot: &HermElement) -> Result<f64> {
        let lhs = inner(&self.pi, xdot)?;
        let rhs = vec_inner(self.source.w(), &lift_unchecked(self.source.z(), xdot)?)?;
        Ok((lhs - rhs).abs())
    }
}

pub fn pi_from_w(z: &QVector, w: &QVector) -> Result<CotangentData> {
    let x = cone_point(z)?;
    let source = PhasePoint::new(z.clone(), w.clone())?;
    let basis = tangent_basis(z)?;
    // the basis is orthonormal, so the coefficients are the pairings themselves
    let mut pi = HermElement::zero(z.len());
    for t in &basis {
        let c = vec_inner(w, &lift_unchecked(z, t)?)?;
        pi = pi.add(&t.scale(c))?;
    }
    Ok(CotangentData { x, pi, source })
}

/// `𝒳_e` on the Sternberg side: `⟨x|π²⟩ + μ²/⟨e|x⟩`.
pub fn x_e_downstairs(d: &CotangentData, mu: f64) -> Result<f64> {
    Ok(d.kinetic()? + mu * mu / d.x.r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackResiduals {
    /// `max_α |⟨x|e_α⟩ − ⟨Z, e_αZ⟩|`.
    pub position: f64,
    /// `|⟨x|π²⟩ + μ²/⟨e|x⟩ − ¼|W|²|`.
    pub kinetic: f64,
}

pub fn pullback_check(z: &QVector, w: &QVector, basis: &JordanBasis) -> Result<PullbackResiduals> {
    let d = pi_from_w(z, w)?;
    let mu = magnetic_charge(d.source());
    let mut position = 0.0f64;
    for u in basis.elements() {
        let lhs = inner(d.x.x(), u)?;
        let rhs = vec_inner(z, &u.mat().mat_apply(z)?)?;
        position = position.max((lhs - rhs).abs());
    }
    let kinetic = (x_e_downstairs(&d, mu)? - 0.25 * w.norm_sqr()).abs();
    Ok(PullbackResiduals { position, kinetic })
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cone radius r = {r} must be positive"
        )));
    }
    Ok(())
}

/// `H = ½⟨x|π²⟩/r + μ²/(2r²) − 1/r`.
pub fn hamiltonian_downstairs(d: &CotangentData, mu: f64) -> Result<f64> {
    let r = d.x.r;
    check_radius(r)?;
    Ok(0.5 * d.kinetic()? / r + mu * mu / (2.0 * r * r) - 1.0 / r)
}

/// `𝒜_u = ½(𝒳_u − 𝒴_u𝒳_e/𝒴_e) + 𝒴_u/𝒴_e` with `𝒴_u = ⟨x|u⟩`, `𝒳_e` from
/// `(x, π, μ)` and `𝒳_u = ¼⟨W, uW⟩` read upstairs.
pub fn lrl_downstairs(d: &CotangentData, mu: f64, u: &HermElement) -> Result<f64> {
    let r = d.x.r;
    check_radius(r)?;
    let y_u = inner(d.x.x(), u)?;
    let x_e = x_e_downstairs(d, mu)?;
    let w = d.source.w();
    let x_u = 0.25 * vec_inner(w, &u.mat().mat_apply(w)?)?;
    Ok(0.5 * (x_u - y_u * x_e / r) + y_u / r)
}
