//! The Poisson realization of 𝔰𝔬*(4n) on T*ℍⁿ_* by Sp(1)-invariant quadratic
//! functions:
//!
//! ```text
//! 𝒳_u = ¼⟨W, uW⟩,   𝒴_u = ⟨Z, uZ⟩,   𝒮_uv = ½⟨W, (u·v)Z⟩,
//! ℒ_u = 𝒮_eu,        ℒ_{u,v} = ½(𝒮_uv − 𝒮_vu).
//! ```
//!
//! The magnetic charge is read pointwise as `μ = ½|Im(W†Z)|`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jordan::{orthonormal_basis, triple_product, HermElement, JordanBasis};
use crate::poisson::{bracket_exact, PhasePoint, QuadObservable};
use crate::quat::{dagger_product, vec_inner, QMatrix, QVector, Quaternion};
use crate::tol;

pub fn x_observable(u: &HermElement) -> QuadObservable {
    QuadObservable::momentum_form(u.mat(), 0.25)
}

pub fn y_observable(u: &HermElement) -> QuadObservable {
    QuadObservable::position_form(u.mat(), 1.0)
}

pub fn s_observable(u: &HermElement, v: &HermElement) -> QuadObservable {
    let uv = u.mat().mat_mul(v.mat()).expect("orders checked by caller");
    QuadObservable::mixed_form(&uv, 0.5)
}

/// `ℒ_u = 𝒮_eu = ½⟨W, uZ⟩`.
pub fn l_observable(u: &HermElement) -> QuadObservable {
    QuadObservable::mixed_form(u.mat(), 0.5)
}

/// `ℒ_{u,v} = ½(𝒮_uv − 𝒮_vu)`.
pub fn l_pair_observable(u: &HermElement, v: &HermElement) -> QuadObservable {
    let uv = u.mat().mat_mul(v.mat()).expect("orders checked by caller");
    let vu = v.mat().mat_mul(u.mat()).expect("orders checked by caller");
    QuadObservable::mixed_form(&uv.try_sub(&vu).expect("same order"), 0.25)
}

/// Component `a ∈ {0, 1, 2}` of `ξ = −½Im(W†Z)` along `i, j, k`.
pub fn xi_observable(n: usize, a: usize) -> QuadObservable {
    // −½⟨q, W†Z⟩ = −½⟨W, Z q̄⟩ = ½⟨W, Z q⟩
    let q = Quaternion::UNITS[a + 1].right_matrix();
    let mut r = DMatrix::zeros(4 * n, 4 * n);
    for blk in 0..n {
        for i in 0..4 {
            for j in 0..4 {
                r[(4 * blk + i, 4 * blk + j)] = q[i][j];
            }
        }
    }
    QuadObservable::mixed_real(&r, 0.5)
}

/// The observables 𝒳, 𝒴, 𝒮 and ℒ over an orthonormal basis of H_n(ℍ).
#[derive(Debug, Clone)]
pub struct RealizationFamily {
    n: usize,
    basis: JordanBasis,
    x_obs: Vec<QuadObservable>,
    y_obs: Vec<QuadObservable>,
    s_obs: Vec<QuadObservable>,
    l_obs: Vec<QuadObservable>,
}

pub fn build_observables(n: usize) -> Result<RealizationFamily> {
    let basis = orthonormal_basis(n)?;
    let els = basis.elements();
    let x_obs = els.iter().map(x_observable).collect();
    let y_obs = els.iter().map(y_observable).collect();
    let l_obs = els.iter().map(l_observable).collect();
    let s_obs = els
        .iter()
        .flat_map(|u| els.iter().map(move |v| s_observable(u, v)))
        .collect();
    Ok(RealizationFamily {
        n,
        basis,
        x_obs,
        y_obs,
        s_obs,
        l_obs,
    })
}

impl RealizationFamily {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &JordanBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn x(&self, alpha: usize) -> &QuadObservable {
        &self.x_obs[alpha]
    }

    pub fn y(&self, alpha: usize) -> &QuadObservable {
        &self.y_obs[alpha]
    }

    pub fn s(&self, alpha: usize, beta: usize) -> &QuadObservable {
        &self.s_obs[alpha * self.dim() + beta]
    }

    pub fn l(&self, alpha: usize) -> &QuadObservable {
        &self.l_obs[alpha]
    }

    pub fn l_pair(&self, alpha: usize, beta: usize) -> QuadObservable {
        self.s(alpha, beta)
            .sub(self.s(beta, alpha))
            .expect("same order")
            .scale(0.5)
    }

    /// Every stored observable, in a fixed order.
    pub fn members(&self) -> impl Iterator<Item = &QuadObservable> {
        self.x_obs
            .iter()
            .chain(&self.y_obs)
            .chain(&self.l_obs)
            .chain(&self.s_obs)
    }

    /// Largest `|f(Z·g, W·g) − f(Z, W)|` over the family.
    pub fn invariance_residual(&self, p: &PhasePoint, g: Quaternion) -> Result<f64> {
        let moved = p.right_mul(g)?;
        let (a, b) = (p.flatten(), moved.flatten());
        Ok(self
            .members()
            .map(|f| (f.evaluate_flat(a.as_slice()) - f.evaluate_flat(b.as_slice())).abs())
            .fold(0.0, f64::max))
    }

    /// All family values at `p` from direct quaternion formulas.
    pub fn values(&self, p: &PhasePoint) -> Result<PointValues> {
        PointValues::at(&self.basis, p)
    }
}

/// Values of the realization at one phase point, over the basis `e_α`.
#[derive(Debug, Clone)]
pub struct PointValues {
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    /// `s[(α, β)] = 𝒮_{e_α e_β}`.
    pub s: DMatrix<f64>,
    pub x_e: f64,
    pub y_e: f64,
    pub l_e: f64,
    pub mu: f64,
}

impl PointValues {
    pub fn at(basis: &JordanBasis, p: &PhasePoint) -> Result<Self> {
        if basis.order() != p.order() {
            return Err(Error::OrderMismatch {
                left: basis.order(),
                right: p.order(),
            });
        }
        let (z, w) = (p.z(), p.w());
        let ew: Vec<QVector> = basis
            .elements()
            .iter()
            .map(|e| e.mat().mat_apply(w))
            .collect::<Result<_>>()?;
        let ez: Vec<QVector> = basis
            .elements()
            .iter()
            .map(|e| e.mat().mat_apply(z))
            .collect::<Result<_>>()?;
        let d = basis.dim();
        let mut s = DMatrix::zeros(d, d);
        // ⟨W, e_α e_β Z⟩ = ⟨e_α W, e_β Z⟩ since e_α is hermitian
        for a in 0..d {
            for b in 0..d {
                s[(a, b)] = 0.5 * vec_inner(&ew[a], &ez[b])?;
            }
        }
        Ok(Self {
            n: p.order(),
            x: ew
                .iter()
                .map(|v| vec_inner(w, v).map(|s| 0.25 * s))
                .collect::<Result<_>>()?,
            y: ez.iter().map(|v| vec_inner(z, v)).collect::<Result<_>>()?,
            l: ez
                .iter()
                .map(|v| vec_inner(w, v).map(|s| 0.5 * s))
                .collect::<Result<_>>()?,
            s,
            x_e: 0.25 * w.norm_sqr(),
            y_e: z.norm_sqr(),
            l_e: 0.5 * vec_inner(w, z)?,
            mu: magnetic_charge(p),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `ℒ_{e_α, e_β}`.
    pub fn l_pair(&self, a: usize, b: usize) -> f64 {
        0.5 * (self.s[(a, b)] - self.s[(b, a)])
    }

    /// `Σ_{α,β} ℒ_{e_α,e_β}²`.
    pub fn l_pair_square_sum(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .flat_map(|a| (0..d).map(move |b| (a, b)))
            .map(|(a, b)| self.l_pair(a, b).powi(2))
            .sum()
    }

    /// `H = ½𝒳_e/𝒴_e − 1/𝒴_e`.
    pub fn hamiltonian(&self) -> f64 {
        0.5 * self.x_e / self.y_e - 1.0 / self.y_e
    }

    /// `𝒜_{e_α} = ½(𝒳_α − 𝒴_α𝒳_e/𝒴_e) + 𝒴_α/𝒴_e`.
    pub fn lrl(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(x, y)| 0.5 * (x - y * self.x_e / self.y_e) + y / self.y_e)
            .collect()
    }

    /// `L² = ½Σ ℒ_{e_α,e_β}²`.
    pub fn l_squared(&self) -> f64 {
        0.5 * self.l_pair_square_sum()
    }

    /// `A² = −1 + Σ 𝒜_{e_α}²`.
    pub fn a_squared(&self) -> f64 {
        -1.0 + self.lrl().iter().map(|a| a * a).sum::<f64>()
    }
}

/// `μ = ½|Im(W†Z)|`.
pub fn magnetic_charge(p: &PhasePoint) -> f64 {
    0.5 * dagger_product(p.w(), p.z())
        .expect("phase point halves agree")
        .im()
        .norm()
}

/// `ρ(Z, W) = −Im(W†Z)`.
pub fn moment_rho(p: &PhasePoint) -> Quaternion {
    -dagger_product(p.w(), p.z())
        .expect("phase point halves agree")
        .im()
}

/// `ψ(Z, W, ξ) = Im(W†Z) + 2ξ` for imaginary `ξ`.
pub fn moment_psi(p: &PhasePoint, xi: Quaternion) -> Result<Quaternion> {
    if !xi.is_imaginary(tol::EXACT * xi.norm().max(1.0)) {
        return Err(Error::NotImaginary(xi.w));
    }
    Ok(-moment_rho(p) + xi.im() * 2.0)
}

/// Level `n` and magnetic charge `μ ≥ 0` of a symplectic leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeafSpec {
    n: usize,
    mu: f64,
}

impl LeafSpec {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidOrder(n));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::NegativeCharge(mu));
        }
        Ok(Self { n, mu })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `W + Zα` with `α = (ν − τ)/|Z|²`, `ν = Im(W†Z)`, so that `Im((W + Zα)†Z) = τ`.
pub fn shift_to_leaf(z: &QVector, w: &QVector, tau: Quaternion) -> Result<QVector> {
    if !tau.is_imaginary(tol::EXACT * tau.norm().max(1.0)) {
        return Err(Error::NotImaginary(tau.w));
    }
    let r2 = z.norm_sqr();
    if r2.sqrt() <= tol::DOMAIN_EPS {
        return Err(Error::DomainGuard { norm: r2.sqrt() });
    }
    let nu = dagger_product(w, z)?.im();
    let alpha = (nu - tau.im()) * (1.0 / r2);
    w.try_add(&z.right_mul(alpha))
}

/// Gaussian point moved onto the leaf `|Im(W†Z)| = 2μ`.
pub fn sample_leaf<R: Rng + ?Sized>(spec: LeafSpec, rng: &mut R) -> PhasePoint {
    let n = spec.n;
    let z = loop {
        let z = QVector::random_gaussian(n, rng);
        if z.norm() > 1e3 * tol::DOMAIN_EPS {
            break z;
        }
    };
    let w = QVector::random_gaussian(n, rng);
    let nu = dagger_product(&w, &z).expect("same length").im();
    let dir = if nu.norm() > 0.0 {
        nu * (1.0 / nu.norm())
    } else {
        Quaternion::I
    };
    let w = shift_to_leaf(&z, &w, dir * (2.0 * spec.mu)).expect("valid shift");
    PhasePoint::new(z, w).expect("Z away from 0")
}

fn guard(p: &PhasePoint) -> Result<()> {
    let norm = p.z().norm();
    if norm <= tol::DOMAIN_EPS {
        return Err(Error::DomainGuard { norm });
    }
    Ok(())
}

/// `|lhs − rhs|` relative to the summed size of the terms.
fn rel(lhs: f64, rhs: f64, magnitude: f64) -> f64 {
    tol::relative(lhs, rhs, magnitude)
}

/// `(2/n)Σ ℒ_{e_α}² = ℒ_e² + 𝒳_e𝒴_e − μ²`.
pub fn primary_quadratic_residual(v: &PointValues) -> f64 {
    let n = v.n as f64;
    let lhs = 2.0 / n * v.l.iter().map(|l| l * l).sum::<f64>();
    let le2 = v.l_e * v.l_e;
    let xy = v.x_e * v.y_e;
    let mu2 = v.mu * v.mu;
    rel(lhs, le2 + xy - mu2, lhs.abs() + le2 + xy.abs() + mu2)
}

/// Residuals of the six secondary relations, in order (i)–(vi), with
/// (vi) in the form `(4/n³)Σℒ_{αβ}² = 𝒳_e𝒴_e − ℒ_e² + ((n−2)/n)μ²`.
pub fn secondary_quadratic_residuals(v: &PointValues) -> [f64; 6] {
    let n = v.n as f64;
    let d = v.dim();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let abs_dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x * y).abs()).sum::<f64>();
    let (xe, ye, le, mu2) = (v.x_e, v.y_e, v.l_e, v.mu * v.mu);

    let i = rel(
        dot(&v.x, &v.l),
        n * xe * le,
        abs_dot(&v.x, &v.l) + n * (xe * le).abs(),
    )
    .max(rel(
        dot(&v.y, &v.l),
        n * ye * le,
        abs_dot(&v.y, &v.l) + n * (ye * le).abs(),
    ));

    let column = |u: usize| (0..d).map(|a| v.l_pair(a, u)).collect::<Vec<f64>>();
    let mut ii = 0.0f64;
    let mut iv = 0.0f64;
    for u in 0..d {
        let lu = column(u);
        let lhs = 4.0 / n * dot(&lu, &v.l);
        let rhs = -v.x[u] * ye + xe * v.y[u];
        let mag = 4.0 / n * abs_dot(&lu, &v.l) + (v.x[u] * ye).abs() + (xe * v.y[u]).abs();
        ii = ii.max(rel(lhs, rhs, mag));

        let lhs = 2.0 / n * dot(&lu, &v.x);
        let rhs = -v.x[u] * le + v.l[u] * xe;
        let mag = 2.0 / n * abs_dot(&lu, &v.x) + (v.x[u] * le).abs() + (v.l[u] * xe).abs();
        iv = iv.max(rel(lhs, rhs, mag));

        let lhs = 2.0 / n * dot(&lu, &v.y);
        let rhs = v.y[u] * le - v.l[u] * ye;
        let mag = 2.0 / n * abs_dot(&lu, &v.y) + (v.y[u] * le).abs() + (v.l[u] * ye).abs();
        iv = iv.max(rel(lhs, rhs, mag));
    }

    let sx = dot(&v.x, &v.x);
    let sy = dot(&v.y, &v.y);
    let iii = rel(sx, n * xe * xe, sx + n * xe * xe).max(rel(sy, n * ye * ye, sy + n * ye * ye));

    let v_ = rel(
        dot(&v.x, &v.y),
        n * (le * le + mu2),
        abs_dot(&v.x, &v.y) + n * (le * le + mu2),
    );

    let sum = v.l_pair_square_sum();
    let lhs = 4.0 / n.powi(3) * sum;
    let rhs = xe * ye - le * le + (n - 2.0) / n * mu2;
    let vi = rel(
        lhs,
        rhs,
        lhs + (xe * ye).abs() + le * le + ((n - 2.0) / n * mu2).abs(),
    );

    [i, ii, iii, iv, v_, vi]
}

/// `Σℒ_{αβ}² = (n²(n−1)/2)(𝒳_e𝒴_e − ℒ_e² + μ²)`, the form of (vi) that
/// follows from the primary relation.
pub fn angular_square_residual(v: &PointValues) -> f64 {
    let n = v.n as f64;
    let c = n * n * (n - 1.0) / 2.0;
    let sum = v.l_pair_square_sum();
    let (xy, le2, mu2) = (v.x_e * v.y_e, v.l_e * v.l_e, v.mu * v.mu);
    rel(sum, c * (xy - le2 + mu2), sum + c * (xy.abs() + le2 + mu2))
}

fn energy_residual(v: &PointValues, mu_coef: f64, rhs_coef: f64) -> f64 {
    let n = v.n as f64;
    let h = v.hamiltonian();
    let l2 = v.l_squared();
    let offset = mu_coef * v.mu * v.mu;
    let a_sum: f64 = v.lrl().iter().map(|a| a * a).sum();
    let a2 = a_sum - 1.0;
    let lhs = -2.0 * h * (l2 - offset);
    let rhs = rhs_coef * (n - 1.0 - a2);
    let mag = 2.0 * h.abs() * (l2 + offset) + rhs_coef * ((n - 1.0).abs() + 1.0 + a_sum);
    rel(lhs, rhs, mag)
}

/// `−2H(L² − n²(n−1)μ²/4) = (n/2)²(n−1−A²)`.
pub fn energy_formula_residual(v: &PointValues) -> f64 {
    let n = v.n as f64;
    energy_residual(v, n * n * (n - 1.0) / 4.0, (n / 2.0).powi(2))
}

/// `−2H(L² − n²(n−1)μ²/2) = (n(n−1)/2)(n−1−A²)`, the energy relation implied
/// by the primary relation.
pub fn energy_formula_residual_derived(v: &PointValues) -> f64 {
    let n = v.n as f64;
    energy_residual(v, n * n * (n - 1.0) / 2.0, n * (n - 1.0) / 2.0)
}

/// Residuals at a phase point, with the domain guard applied.
pub fn quadratic_residuals(
    family: &RealizationFamily,
    p: &PhasePoint,
) -> Result<QuadraticResiduals> {
    guard(p)?;
    let v = family.values(p)?;
    Ok(QuadraticResiduals {
        primary: primary_quadratic_residual(&v),
        secondary: secondary_quadratic_residuals(&v),
        angular_square: angular_square_residual(&v),
        energy: energy_formula_residual(&v),
        energy_derived: energy_formula_residual_derived(&v),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticResiduals {
    pub primary: f64,
    pub secondary: [f64; 6],
    pub angular_square: f64,
    pub energy: f64,
    pub energy_derived: f64,
}

impl QuadraticResiduals {
    pub fn max_with(&self, o: &QuadraticResiduals) -> QuadraticResiduals {
        let mut secondary = self.secondary;
        for (s, t) in secondary.iter_mut().zip(o.secondary) {
            *s = s.max(t);
        }
        QuadraticResiduals {
            primary: self.primary.max(o.primary),
            secondary,
            angular_square: self.angular_square.max(o.angular_square),
            energy: self.energy.max(o.energy),
            energy_derived: self.energy_derived.max(o.energy_derived),
        }
    }

    pub fn zero() -> Self {
        Self {
            primary: 0.0,
            secondary: [0.0; 6],
            angular_square: 0.0,
            energy: 0.0,
            energy_derived: 0.0,
        }
    }
}

/// Max residual of one family of bracket relations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationCheck {
    pub name: String,
    pub checked: usize,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoStarReport {
    pub n: usize,
    pub tol: f64,
    pub families: Vec<RelationCheck>,
}

impl SoStarReport {
    pub fn pass(&self) -> bool {
        self.families.iter().all(|f| f.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.families
            .iter()
            .map(|f| f.max_residual)
            .fold(0.0, f64::max)
    }
}

fn residual(lhs: &QuadObservable, rhs: &QuadObservable) -> f64 {
    lhs.relative_distance(rhs).expect("same order")
}

fn family_max<F>(count: usize, f: F) -> (usize, f64)
where
    F: Fn(usize) -> (usize, f64) + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(f)
        .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)))
}

/// Checks the six bracket families of the realization over all basis pairs
/// and quadruples as exact quadratic-form identities.
pub fn verify_so_star_relations(n: usize, tol: f64) -> Result<SoStarReport> {
    let fam = build_observables(n)?;
    Ok(verify_family(&fam, tol))
}

pub fn verify_family(fam: &RealizationFamily, tol: f64) -> SoStarReport {
    let d = fam.dim();
    let els = fam.basis().elements();
    let zero = QuadObservable::zero(fam.order());
    let tri = |a: usize, b: usize, c: usize| {
        triple_product(&els[a], &els[b], &els[c]).expect("same order")
    };

    let xx = family_max(d, |a| {
        let m = (0..d)
            .map(|b| residual(&bracket_exact(fam.x(a), fam.x(b)).unwrap(), &zero))
            .fold(0.0, f64::max);
        (d, m)
    });
    let yy = family_max(d, |a| {
        let m = (0..d)
            .map(|b| residual(&bracket_exact(fam.y(a), fam.y(b)).unwrap(), &zero))
            .fold(0.0, f64::max);
        (d, m)
    });
    let xy = family_max(d, |a| {
        let m = (0..d)
            .map(|b| {
                residual(
                    &bracket_exact(fam.x(a), fam.y(b)).unwrap(),
                    &fam.s(a, b).scale(-2.0),
                )
            })
            .fold(0.0, f64::max);
        (d, m)
    });
    let sx = family_max(d * d, |ab| {
        let (a, b) = (ab / d, ab % d);
        let m = (0..d)
            .map(|c| {
                residual(
                    &bracket_exact(fam.s(a, b), fam.x(c)).unwrap(),
                    &x_observable(&tri(a, b, c)),
                )
            })
            .fold(0.0, f64::max);
        (d, m)
    });
    let sy = family_max(d * d, |ab| {
        let (a, b) = (ab / d, ab % d);
        let m = (0..d)
            .map(|c| {
                let rhs = QuadObservable::position_form(tri(b, a, c).mat(), -1.0);
                residual(&bracket_exact(fam.s(a, b), fam.y(c)).unwrap(), &rhs)
            })
            .fold(0.0, f64::max);
        (d, m)
    });
    let ss = family_max(d * d, |ab| {
        let (a, b) = (ab / d, ab % d);
        let back: Vec<QMatrix> = (0..d).map(|w| tri(b, a, w).into_mat()).collect();
        let mut m = 0.0f64;
        for c in 0..d {
            let t = tri(a, b, c).into_mat();
            for w in 0..d {
                // 𝒮_{{uvz}w} − 𝒮_{z{vuw}} = ½⟨W, ({uvz}·w − z·{vuw})Z⟩
                let lead = t.mat_mul(els[w].mat()).unwrap();
                let tail = els[c].mat().mat_mul(&back[w]).unwrap();
                let rhs = QuadObservable::mixed_form(&lead.try_sub(&tail).unwrap(), 0.5);
                m = m.max(residual(
                    &bracket_exact(fam.s(a, b), fam.s(c, w)).unwrap(),
                    &rhs,
                ));
            }
        }
        (d * d, m)
    });

    let families = [
        ("{X_u, X_v} = 0", xx),
        ("{Y_u, Y_v} = 0", yy),
        ("{X_u, Y_v} = -2 S_uv", xy),
        ("{S_uv, X_z} = X_{uvz}", sx),
        ("{S_uv, Y_z} = -Y_{vuz}", sy),
        ("{S_uv, S_zw} = S_{{uvz}w} - S_{z{vuw}}", ss),
    ]
    .into_iter()
    .map(|(name, (checked, max_residual))| RelationCheck {
        name: name.to_string(),
        checked,
        max_residual,
        pass: max_residual < tol,
    })
    .collect();
    SoStarReport {
        n: fam.order(),
        tol,
        families,
    }
}

/// Max of `‖{ξᵃ, ξᵇ} − sign·ξᶜ‖` over the cyclic triples `(a, b, c)`.
/// `sign = 1` is the coadjoint sphere relation `{ξ¹, ξ²} = ξ³`.
pub fn coadjoint_residual(n: usize, sign: f64) -> Result<f64> {
    let xi: Vec<QuadObservable> = (0..3).map(|a| xi_observable(n, a)).collect();
    let mut worst = 0.0f64;
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        worst = worst.max(bracket_exact(&xi[a], &xi[b])?.relative_distance(&xi[c].scale(sign))?);
    }
    Ok(worst)
}

/// Max of `‖{ξᵃ, 𝒮_uv}‖` over components and basis pairs. Since
/// `μ² = Σ(ξᵃ)²`, this bounds `{μ², 𝒮_uv} = 2Σ ξᵃ{ξᵃ, 𝒮_uv}`.
pub fn casimir_residual(fam: &RealizationFamily) -> Result<f64> {
    let n = fam.order();
    let d = fam.dim();
    let zero = QuadObservable::zero(n);
    let mut worst = 0.0f64;
    for a in 0..3 {
        let xi = xi_observable(n, a);
        for al in 0..d {
            for be in 0..d {
                worst = worst.max(bracket_exact(&xi, fam.s(al, be))?.relative_distance(&zero)?);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn qv(v: &[Quaternion]) -> QVector {
        QVector::new(v.to_vec()).unwrap()
    }

    fn hand_point() -> PhasePoint {
        PhasePoint::new(
            qv(&[Quaternion::ONE, Quaternion::ZERO]),
            qv(&[Quaternion::K * 2.0, Quaternion::ZERO]),
        )
        .unwrap()
    }

    fn random_point(n: usize, rng: &mut impl Rng) -> PhasePoint {
        PhasePoint::new(
            QVector::random_gaussian(n, rng),
            QVector::random_gaussian(n, rng),
        )
        .unwrap()
    }

    #[test]
    fn observables_match_definitions() {
        let mut rng = stream(1, "realization-def");
        let n = 3;
        for _ in 0..10 {
            let p = random_point(n, &mut rng);
            let u = HermElement::random(n, &mut rng);
            let v = HermElement::random(n, &mut rng);
            let (z, w) = (p.z(), p.w());
            let uz = u.mat().mat_apply(z).unwrap();
            let uw = u.mat().mat_apply(w).unwrap();
            let uvz = u.mat().mat_apply(&v.mat().mat_apply(z).unwrap()).unwrap();
            let vuz = v.mat().mat_apply(&uz).unwrap();
            let close =
                |a: f64, b: f64| assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            close(
                y_observable(&u).evaluate(&p).unwrap(),
                vec_inner(z, &uz).unwrap(),
            );
            close(
                x_observable(&u).evaluate(&p).unwrap(),
                0.25 * vec_inner(w, &uw).unwrap(),
            );
            close(
                s_observable(&u, &v).evaluate(&p).unwrap(),
                0.5 * vec_inner(w, &uvz).unwrap(),
            );
            close(
                l_observable(&u).evaluate(&p).unwrap(),
                0.5 * vec_inner(w, &uz).unwrap(),
            );
            let lp = 0.25 * (vec_inner(w, &uvz).unwrap() - vec_inner(w, &vuz).unwrap());
            close(l_pair_observable(&u, &v).evaluate(&p).unwrap(), lp);
        }
    }

    #[test]
    fn l_is_s_with_identity() {
        let mut rng = stream(2, "realization-l");
        let e = HermElement::identity(2);
        let u = HermElement::random(2, &mut rng);
        assert!(
            s_observable(&e, &u)
                .relative_distance(&s_observable(&u, &e))
                .unwrap()
                < 1e-15
        );
        assert!(
            s_observable(&e, &u)
                .relative_distance(&l_observable(&u))
                .unwrap()
                < 1e-15
        );
    }

    #[test]
    fn x_e_at_hand_point() {
        let e = HermElement::identity(2);
        assert!((x_observable(&e).evaluate(&hand_point()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_values_match_family() {
        let mut rng = stream(3, "realization-values");
        for n in 1..=3 {
            let fam = build_observables(n).unwrap();
            let p = random_point(n, &mut rng);
            let v = fam.values(&p).unwrap();
            let d = fam.dim();
            let flat = p.flatten();
            let ev = |f: &QuadObservable| f.evaluate_flat(flat.as_slice());
            for a in 0..d {
                assert!((ev(fam.x(a)) - v.x[a]).abs() < 1e-12);
                assert!((ev(fam.y(a)) - v.y[a]).abs() < 1e-12);
                assert!((ev(fam.l(a)) - v.l[a]).abs() < 1e-12);
                for b in 0..d {
                    assert!((ev(fam.s(a, b)) - v.s[(a, b)]).abs() < 1e-12);
                    assert!((ev(&fam.l_pair(a, b)) - v.l_pair(a, b)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn family_is_sp1_invariant() {
        let mut rng = stream(4, "realization-invariance");
        for n in 1..=3 {
            let fam = build_observables(n).unwrap();
            for _ in 0..5 {
                let p = random_point(n, &mut rng);
                let g = Quaternion::random_unit(&mut rng);
                assert!(fam.invariance_residual(&p, g).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn so_star_relations_small_orders() {
        for n in 1..=3 {
            let report = verify_so_star_relations(n, 1e-12).unwrap();
            for f in &report.families {
                assert!(f.pass, "n={n} {}: {:e}", f.name, f.max_residual);
            }
        }
    }

    #[test]
    fn x_e_y_e_bracket() {
        let e = HermElement::identity(2);
        let lhs = bracket_exact(&x_observable(&e), &y_observable(&e)).unwrap();
        assert!(
            lhs.relative_distance(&l_observable(&e).scale(-2.0))
                .unwrap()
                < 1e-14
        );
    }

    #[test]
    fn symmetric_pair_is_jordan_product() {
        // ½(𝒮_uv + 𝒮_vu) = ℒ_{u∘v}, which fails the angular-momentum relations
        let mut rng = stream(5, "realization-sym");
        let u = HermElement::random(2, &mut rng);
        let v = HermElement::random(2, &mut rng);
        let sym = s_observable(&u, &v)
            .add(&s_observable(&v, &u))
            .unwrap()
            .scale(0.5);
        let uv = crate::jordan::jordan_product(&u, &v).unwrap();
        assert!(sym.relative_distance(&l_observable(&uv)).unwrap() < 1e-14);
    }

    #[test]
    fn xi_brackets_close_with_reversed_sign() {
        // {⟨Wi, Z⟩, ⟨Wj, Z⟩} = +2⟨k, W†Z⟩ under {⟨U,Z⟩, ⟨V,W⟩} = ⟨U,V⟩
        for n in 1..=4 {
            assert!(coadjoint_residual(n, -1.0).unwrap() < 1e-12);
            assert!((coadjoint_residual(n, 1.0).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_is_minus_half_imaginary_part() {
        let mut rng = stream(6, "realization-xi");
        let p = random_point(2, &mut rng);
        let rho = moment_rho(&p);
        let comps = [rho.x, rho.y, rho.z];
        for (a, r) in comps.iter().enumerate() {
            assert!((xi_observable(2, a).evaluate(&p).unwrap() - 0.5 * r).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_squared_is_casimir() {
        for n in 1..=3 {
            let fam = build_observables(n).unwrap();
            assert!(casimir_residual(&fam).unwrap() < 1e-12);
        }
    }

    #[test]
    fn moment_maps() {
        let p = hand_point();
        let rho = moment_rho(&p);
        assert_eq!(rho, Quaternion::K * 2.0);
        let zero_w =
            PhasePoint::new(qv(&[Quaternion::ONE, Quaternion::ZERO]), QVector::zeros(2)).unwrap();
        assert_eq!(moment_rho(&zero_w).norm(), 0.0);
        assert_eq!(moment_psi(&zero_w, Quaternion::ZERO).unwrap().norm(), 0.0);
        let psi = moment_psi(&p, Quaternion::I).unwrap();
        assert!((psi - Quaternion::imaginary(2.0, 0.0, -2.0)).norm() < 1e-15);
        assert!(matches!(
            moment_psi(&p, Quaternion::ONE),
            Err(Error::NotImaginary(_))
        ));

        let mut rng = stream(7, "realization-moment");
        for _ in 0..10 {
            let p = random_point(3, &mut rng);
            let xi = moment_rho(&p) * 0.5;
            assert!(moment_psi(&p, xi).unwrap().norm() < 1e-12);
            let g = Quaternion::random_unit(&mut rng);
            let moved = moment_rho(&p.right_mul(g).unwrap());
            let conj = g.inverse().unwrap() * moment_rho(&p) * g;
            assert!((moved - conj).norm() < 1e-12);
        }
    }

    #[test]
    fn leaf_shift() {
        let z = qv(&[Quaternion::ONE, Quaternion::ZERO]);
        let w = qv(&[Quaternion::K * 2.0, Quaternion::ZERO]);
        let shifted = shift_to_leaf(&z, &w, Quaternion::I * -2.0).unwrap();
        assert!((shifted[0] - Quaternion::I * 2.0).norm() < 1e-15);
        assert_eq!(shifted[1], Quaternion::ZERO);
        let im = dagger_product(&shifted, &z).unwrap().im();
        assert!((im - Quaternion::I * -2.0).norm() < 1e-15);

        let mut rng = stream(8, "realization-shift");
        for _ in 0..20 {
            let z = QVector::random_gaussian(3, &mut rng);
            let w = QVector::random_gaussian(3, &mut rng);
            let a = Quaternion::random_gaussian(&mut rng).im();
            let lhs = dagger_product(&w.try_add(&z.right_mul(a)).unwrap(), &z)
                .unwrap()
                .im();
            let rhs = dagger_product(&w, &z).unwrap().im() - a * z.norm_sqr();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn sampled_leaves_have_requested_charge() {
        let mut rng = stream(9, "realization-leaf");
        for &mu in &[0.0, 0.5, 1.0, 3.0] {
            let spec = LeafSpec::new(3, mu).unwrap();
            for _ in 0..20 {
                let p = sample_leaf(spec, &mut rng);
                let im = dagger_product(p.w(), p.z()).unwrap().im().norm();
                assert!((im - 2.0 * mu).abs() < 1e-12);
            }
        }
        assert!(matches!(
            LeafSpec::new(2, -1.0),
            Err(Error::NegativeCharge(_))
        ));
        assert!(LeafSpec::new(0, 1.0).is_err());
    }

    #[test]
    fn hand_point_relations() {
        let fam = build_observables(2).unwrap();
        let v = fam.values(&hand_point()).unwrap();
        assert!(v.l.iter().all(|l| l.abs() < 1e-15));
        assert!((v.x_e * v.y_e - 1.0).abs() < 1e-15);
        assert!((v.mu - 1.0).abs() < 1e-15);
        assert!(primary_quadratic_residual(&v) < 1e-15);
        let xy: f64 = v.x.iter().zip(&v.y).map(|(x, y)| x * y).sum();
        assert!((xy - 2.0).abs() < 1e-14);
        assert!((2.0 * (v.l_e * v.l_e + v.mu * v.mu) - 2.0).abs() < 1e-15);
        assert!((v.hamiltonian() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn relations_vanish_at_zero_momentum() {
        let fam = build_observables(2).unwrap();
        let p =
            PhasePoint::new(qv(&[Quaternion::ONE, Quaternion::ZERO]), QVector::zeros(2)).unwrap();
        let r = quadratic_residuals(&fam, &p).unwrap();
        assert_eq!(r.primary, 0.0);
        assert!(r.secondary.iter().all(|&s| s < 1e-15));
        assert!(r.energy < 1e-12);
    }

    #[test]
    fn sampled_identities() {
        let mut rng = stream(10, "realization-identities");
        for n in 2..=3 {
            let fam = build_observables(n).unwrap();
            for &mu in &[0.0, 1.0] {
                let spec = LeafSpec::new(n, mu).unwrap();
                for _ in 0..50 {
                    let p = sample_leaf(spec, &mut rng);
                    let r = quadratic_residuals(&fam, &p).unwrap();
                    assert!(r.primary < 1e-10, "primary {}", r.primary);
                    for (k, s) in r.secondary[..5].iter().enumerate() {
                        assert!(*s < 1e-9, "n={n} mu={mu} relation {} residual {s:e}", k + 1);
                    }
                    assert!(r.angular_square < 1e-9);
                    assert!(r.energy_derived < 1e-9);
                }
            }
        }
    }

    #[test]
    fn printed_angular_forms_agree_only_at_n2_zero_charge() {
        let mut rng = stream(11, "realization-printed");
        let fam = build_observables(2).unwrap();
        let p = sample_leaf(LeafSpec::new(2, 0.0).unwrap(), &mut rng);
        let r = quadratic_residuals(&fam, &p).unwrap();
        assert!(r.secondary[5] < 1e-9 && r.energy < 1e-9);
        let fam = build_observables(3).unwrap();
        let p = sample_leaf(LeafSpec::new(3, 1.0).unwrap(), &mut rng);
        let r = quadratic_residuals(&fam, &p).unwrap();
        assert!(r.secondary[5] > 1e-3 && r.energy > 1e-3);
    }

    #[test]
    fn domain_guard() {
        let fam = build_observables(1).unwrap();
        let p = PhasePoint::new(QVector::zeros(1), QVector::zeros(1));
        assert!(matches!(p, Err(Error::DomainGuard { .. })));
        assert!(fam.values(&hand_point()).is_err());
    }
}
