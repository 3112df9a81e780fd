//! Flow of the Sp(1)-Kepler Hamiltonian on T*ℍⁿ_*,
//!
//! ```text
//! H = ½𝒳_e/𝒴_e − 1/𝒴_e = |W|²/(8|Z|²) − 1/|Z|²,
//! ```
//!
//! integrated in flattened coordinates with `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`, and the
//! quantities the realization predicts to be conserved.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::JordanBasis;
use crate::poisson::PhasePoint;
use crate::quat::QVector;
use crate::realization::{
    energy_formula_residual, energy_formula_residual_derived, moment_rho, sample_leaf, LeafSpec,
    PointValues,
};
use crate::tol;

/// A Hamiltonian on flattened coordinates `(q, p)`.
pub trait Hamiltonian {
    fn energy(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64], out: &mut [f64]);
}

/// `|W|²/(8|Z|²) − κ/|Z|²`; `κ = 1` is the Sp(1)-Kepler problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kepler {
    pub coulomb: f64,
}

impl Default for Kepler {
    fn default() -> Self {
        Self { coulomb: 1.0 }
    }
}

fn halves(z: &[f64]) -> (&[f64], &[f64]) {
    z.split_at(z.len() / 2)
}

fn norm_sqr(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

impl Hamiltonian for Kepler {
    fn energy(&self, z: &[f64]) -> f64 {
        let (q, p) = halves(z);
        let r2 = norm_sqr(q);
        norm_sqr(p) / (8.0 * r2) - self.coulomb / r2
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let (q, p) = halves(z);
        let h = q.len();
        let r2 = norm_sqr(q);
        let w2 = norm_sqr(p);
        let cq = (-w2 / 4.0 + 2.0 * self.coulomb) / (r2 * r2);
        let cp = 1.0 / (4.0 * r2);
        for i in 0..h {
            out[i] = cq * q[i];
            out[h + i] = cp * p[i];
        }
    }
}

/// `½|W|²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Free;

impl Hamiltonian for Free {
    fn energy(&self, z: &[f64]) -> f64 {
        0.5 * norm_sqr(halves(z).1)
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let h = z.len() / 2;
        out[..h].fill(0.0);
        out[h..].copy_from_slice(&z[h..]);
    }
}

fn guard(p: &PhasePoint) -> Result<()> {
    let norm = p.z().norm();
    if norm <= tol::DOMAIN_EPS {
        return Err(Error::DomainGuard { norm });
    }
    Ok(())
}

/// `|W|²/(8|Z|²) − 1/|Z|²`.
pub fn hamiltonian_upstairs(p: &PhasePoint) -> Result<f64> {
    guard(p)?;
    Ok(Kepler::default().energy(p.flatten().as_slice()))
}

/// `(∂H/∂Z, ∂H/∂W)`.
pub fn hamiltonian_gradient(p: &PhasePoint) -> Result<(QVector, QVector)> {
    guard(p)?;
    let z = p.flatten();
    let mut g = vec![0.0; z.len()];
    Kepler::default().gradient(z.as_slice(), &mut g);
    let h = g.len() / 2;
    Ok((QVector::from_real(&g[..h])?, QVector::from_real(&g[h..])?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Midpoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Midpoint => "midpoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    /// Record every `stride`-th step (the final state is always recorded).
    pub stride: usize,
}

impl StepControl {
    pub fn new(method: Method, dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt} must be positive"
            )));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} must be non-negative"
            )));
        }
        Ok(Self {
            method,
            dt,
            t_end,
            stride: 1,
        })
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub n: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhasePoint)>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn first(&self) -> &PhasePoint {
        &self.samples[0].1
    }

    pub fn last(&self) -> &PhasePoint {
        &self.samples[self.samples.len() - 1].1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Header `t,Z_0w,…,W_{n-1}z`, then one row per sample with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.meta.n;
        let mut out = String::from("t");
        for part in ["Z", "W"] {
            for a in 0..n {
                for c in ["w", "x", "y", "z"] {
                    let _ = write!(out, ",{part}_{a}{c}");
                }
            }
        }
        out.push('\n');
        for (t, p) in &self.samples {
            let _ = write!(out, "{t:.16e}");
            for v in p.flatten().iter() {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Distance below which the integrator stops instead of stepping on.
pub const COLLISION_RADIUS: f64 = 10.0 * tol::DOMAIN_EPS;

/// Largest energy change a single step may make, relative to `max(1, |H|)`.
/// A fixed step cannot resolve a close approach to `Z = 0`; such steps jump
/// across the singularity and show up as an energy jump.
pub const STEP_ENERGY_JUMP: f64 = 1e-6;

fn check_state(z: &[f64], t: f64) -> Result<()> {
    let norm = norm_sqr(halves(z).0).sqrt();
    if norm < COLLISION_RADIUS || !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NearCollision { t, norm });
    }
    Ok(())
}

/// `J∇H`.
fn field<H: Hamiltonian + ?Sized>(h: &H, z: &[f64], grad: &mut [f64], out: &mut [f64]) {
    h.gradient(z, grad);
    let half = z.len() / 2;
    for i in 0..half {
        out[i] = grad[half + i];
        out[half + i] = -grad[i];
    }
}

struct Stepper {
    grad: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Self {
            grad: vec![0.0; dim],
            k: [
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
            ],
            tmp: vec![0.0; dim],
        }
    }

    fn rk4<H: Hamiltonian + ?Sized>(
        &mut self,
        h: &H,
        z: &mut [f64],
        dt: f64,
        t: f64,
    ) -> Result<()> {
        let dim = z.len();
        let coeffs = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            for i in 0..dim {
                self.tmp[i] = if s == 0 {
                    z[i]
                } else {
                    z[i] + coeffs[s] * dt * self.k[s - 1][i]
                };
            }
            check_state(&self.tmp, t)?;
            field(h, &self.tmp, &mut self.grad, &mut self.k[s]);
        }
        for i in 0..dim {
            z[i] +=
                dt / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }

    fn midpoint<H: Hamiltonian + ?Sized>(
        &mut self,
        h: &H,
        z: &mut [f64],
        dt: f64,
        t: f64,
    ) -> Result<()> {
        let dim = z.len();
        // k[0] = f(z_n) for the explicit predictor, k[1] = current iterate z_{n+1}
        field(h, z, &mut self.grad, &mut self.k[0]);
        for i in 0..dim {
            self.k[1][i] = z[i] + dt * self.k[0][i];
        }
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for _ in 0..MIDPOINT_MAX_ITER {
            for i in 0..dim {
                self.tmp[i] = 0.5 * (z[i] + self.k[1][i]);
            }
            check_state(&self.tmp, t)?;
            field(h, &self.tmp, &mut self.grad, &mut self.k[2]);
            let mut change = 0.0f64;
            for i in 0..dim {
                let next = z[i] + dt * self.k[2][i];
                change = change.max((next - self.k[1][i]).abs());
                self.k[1][i] = next;
            }
            if change <= MIDPOINT_TOL * scale {
                z.copy_from_slice(&self.k[1]);
                return Ok(());
            }
        }
        Err(Error::NonConvergence {
            t,
            iterations: MIDPOINT_MAX_ITER,
        })
    }
}

pub const MIDPOINT_TOL: f64 = 1e-12;
pub const MIDPOINT_MAX_ITER: usize = 50;

/// Integrates up to `t_end`, returning what was computed together with the
/// error that stopped the run early, if any.
pub fn integrate_partial<H: Hamiltonian + ?Sized>(
    h: &H,
    p0: &PhasePoint,
    ctl: StepControl,
) -> (Trajectory, Option<Error>) {
    let meta = TrajectoryMeta {
        method: ctl.method,
        dt: ctl.dt,
        t_end: ctl.t_end,
        stride: ctl.stride,
        n: p0.order(),
        seed: None,
    };
    let mut tr = Trajectory {
        samples: vec![(0.0, p0.clone())],
        meta,
    };
    let mut z = p0.flatten().as_slice().to_vec();
    if let Err(e) = check_state(&z, 0.0) {
        return (tr, Some(e));
    }
    let steps = (ctl.t_end / ctl.dt - 1e-9).ceil().max(0.0) as usize;
    let mut stepper = Stepper::new(z.len());
    let mut t = 0.0;
    let mut energy = h.energy(&z);
    for k in 1..=steps {
        let t_next = if k == steps {
            ctl.t_end
        } else {
            k as f64 * ctl.dt
        };
        let dt = t_next - t;
        let res = match ctl.method {
            Method::Rk4 => stepper.rk4(h, &mut z, dt, t),
            Method::Midpoint => stepper.midpoint(h, &mut z, dt, t),
        };
        if let Err(e) = res.and_then(|_| check_state(&z, t_next)) {
            return (tr, Some(e));
        }
        let next = h.energy(&z);
        if (next - energy).abs() > STEP_ENERGY_JUMP * energy.abs().max(1.0) {
            let norm = norm_sqr(halves(&z).0).sqrt();
            return (tr, Some(Error::NearCollision { t: t_next, norm }));
        }
        energy = next;
        t = t_next;
        if k % ctl.stride == 0 || k == steps {
            let p = PhasePoint::unflatten(&z).expect("state checked");
            tr.samples.push((t, p));
        }
    }
    (tr, None)
}

pub fn integrate<H: Hamiltonian + ?Sized>(
    h: &H,
    p0: &PhasePoint,
    ctl: StepControl,
) -> Result<Trajectory> {
    match integrate_partial(h, p0, ctl) {
        (tr, None) => Ok(tr),
        (_, Some(e)) => Err(e),
    }
}

/// `(Z, −W)`.
pub fn reverse_momentum(p: &PhasePoint) -> PhasePoint {
    PhasePoint::new(p.z().clone(), p.w().scale(-1.0)).expect("position unchanged")
}

/// Integrates to `t_end`, flips the momentum, integrates back and returns
/// `‖z_return − z_0‖∞`.
pub fn time_reversal_error<H: Hamiltonian + ?Sized>(
    h: &H,
    p0: &PhasePoint,
    ctl: StepControl,
) -> Result<f64> {
    let ctl = ctl.with_stride(usize::MAX);
    let fwd = integrate(h, p0, ctl)?;
    let back = integrate(h, &reverse_momentum(fwd.last()), ctl)?;
    let ret = reverse_momentum(back.last()).flatten();
    Ok((ret - p0.flatten()).amax())
}

/// A point of the leaf at charge `μ` with `H < 0`: a leaf sample rescaled by
/// `Z → λZ`, `W → W/λ` with `λ² = |W|²/4`, which keeps `W†Z` and gives
/// `H = −1/(2|Z|²)`.
pub fn bound_start<R: Rng + ?Sized>(spec: LeafSpec, rng: &mut R) -> PhasePoint {
    loop {
        let p = sample_leaf(spec, rng);
        let lambda = (p.w().norm_sqr() / 4.0).sqrt();
        if lambda > 1e-6 {
            if let Ok(q) = PhasePoint::new(p.z().scale(lambda), p.w().scale(1.0 / lambda)) {
                return q;
            }
        }
    }
}

/// Conserved quantities of one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariants {
    pub h: f64,
    pub rho: [f64; 3],
    pub mu: f64,
    /// `ℒ_{e_α,e_β}` for `α < β`.
    pub angular: Vec<f64>,
    /// `𝒜_{e_α}`.
    pub lrl: Vec<f64>,
    pub l_squared: f64,
    pub a_squared: f64,
    pub energy_relation_residual: f64,
    pub energy_relation_derived_residual: f64,
}

impl Invariants {
    pub fn at(basis: &JordanBasis, p: &PhasePoint) -> Result<Self> {
        let v = PointValues::at(basis, p)?;
        let d = v.dim();
        let rho = moment_rho(p);
        Ok(Self {
            h: hamiltonian_upstairs(p)?,
            rho: [rho.x, rho.y, rho.z],
            mu: v.mu,
            angular: (0..d)
                .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
                .map(|(a, b)| v.l_pair(a, b))
                .collect(),
            lrl: v.lrl(),
            l_squared: v.l_squared(),
            a_squared: v.a_squared(),
            energy_relation_residual: energy_formula_residual(&v),
            energy_relation_derived_residual: energy_formula_residual_derived(&v),
        })
    }
}

/// Drifts relative to the initial size of each family (`‖·‖∞`, or 1 when
/// that is below 1e-12), and the energy-relation residuals along the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservedReport {
    pub samples: usize,
    pub initial: Invariants,
    pub h_drift: f64,
    pub rho_drift: f64,
    pub mu_drift: f64,
    pub angular_drift: f64,
    pub lrl_drift: f64,
    pub energy_relation_residual_max: f64,
    pub energy_relation_derived_residual_max: f64,
    /// `(t, printed residual, derived residual)` per sample.
    pub energy_relation_trace: Vec<(f64, f64, f64)>,
}

impl ConservedReport {
    pub fn max_drift(&self) -> f64 {
        [
            self.h_drift,
            self.rho_drift,
            self.mu_drift,
            self.angular_drift,
            self.lrl_drift,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn family_drift(initial: &[f64], current: &[f64]) -> f64 {
    let size = initial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let denom = if size < 1e-12 { 1.0 } else { size };
    initial
        .iter()
        .zip(current)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / denom
}

pub fn conserved_report(tr: &Trajectory, basis: &JordanBasis) -> Result<ConservedReport> {
    if tr.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let initial = Invariants::at(basis, tr.first())?;
    let mut report = ConservedReport {
        samples: tr.len(),
        initial: initial.clone(),
        h_drift: 0.0,
        rho_drift: 0.0,
        mu_drift: 0.0,
        angular_drift: 0.0,
        lrl_drift: 0.0,
        energy_relation_residual_max: 0.0,
        energy_relation_derived_residual_max: 0.0,
        energy_relation_trace: Vec::with_capacity(tr.len()),
    };
    for (t, p) in &tr.samples {
        let cur = Invariants::at(basis, p)?;
        report.h_drift = report.h_drift.max(family_drift(&[initial.h], &[cur.h]));
        report.rho_drift = report.rho_drift.max(family_drift(&initial.rho, &cur.rho));
        report.mu_drift = report.mu_drift.max(family_drift(&[initial.mu], &[cur.mu]));
        report.angular_drift = report
            .angular_drift
            .max(family_drift(&initial.angular, &cur.angular));
        report.lrl_drift = report.lrl_drift.max(family_drift(&initial.lrl, &cur.lrl));
        report.energy_relation_residual_max = report
            .energy_relation_residual_max
            .max(cur.energy_relation_residual);
        report.energy_relation_derived_residual_max = report
            .energy_relation_derived_residual_max
            .max(cur.energy_relation_derived_residual);
        report.energy_relation_trace.push((
            *t,
            cur.energy_relation_residual,
            cur.energy_relation_derived_residual,
        ));
    }
    Ok(report)
}

/// `𝒜_{e_α}` as a function of flattened coordinates.
pub fn lrl_flat(basis: &JordanBasis, alpha: usize, z: &[f64]) -> f64 {
    match PhasePoint::unflatten(z).and_then(|p| PointValues::at(basis, &p)) {
        Ok(v) => v.lrl()[alpha],
        Err(_) => f64::NAN,
    }
}

/// `H` as a function of flattened coordinates.
pub fn hamiltonian_flat(z: &[f64]) -> f64 {
    Kepler::default().energy(z)
}

/// `∇H` on flattened coordinates.
pub fn hamiltonian_gradient_flat(z: &[f64]) -> DVector<f64> {
    let mut g = vec![0.0; z.len()];
    Kepler::default().gradient(z, &mut g);
    DVector::from_vec(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::orthonormal_basis;
    use crate::poisson::{bracket_numeric, numeric_gradient};
    use crate::quat::Quaternion;
    use crate::realization::build_observables;
    use crate::rng::stream;

    fn qv(v: &[Quaternion]) -> QVector {
        QVector::new(v.to_vec()).unwrap()
    }

    fn hand() -> PhasePoint {
        PhasePoint::new(
            qv(&[Quaternion::ONE, Quaternion::ZERO]),
            qv(&[Quaternion::K * 2.0, Quaternion::ZERO]),
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        assert!((hamiltonian_upstairs(&hand()).unwrap() + 0.5).abs() < 1e-15);
        let rest =
            PhasePoint::new(qv(&[Quaternion::ONE, Quaternion::ZERO]), QVector::zeros(2)).unwrap();
        assert_eq!(hamiltonian_upstairs(&rest).unwrap(), -1.0);

        let mut rng = stream(1, "dyn-scaling");
        let p = PhasePoint::new(
            QVector::random_gaussian(2, &mut rng),
            QVector::random_gaussian(2, &mut rng),
        )
        .unwrap();
        let lambda = 1.7;
        let scaled = PhasePoint::new(p.z().scale(lambda), p.w().clone()).unwrap();
        let (w2, r2) = (p.w().norm_sqr(), p.z().norm_sqr());
        let expect = w2 / (8.0 * lambda * lambda * r2) - 1.0 / (lambda * lambda * r2);
        assert!((hamiltonian_upstairs(&scaled).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        let (_, dw) = hamiltonian_gradient(&hand()).unwrap();
        assert!((dw[0] - Quaternion::K * 0.5).norm() < 1e-15);
        assert_eq!(dw[1], Quaternion::ZERO);
        let rest =
            PhasePoint::new(qv(&[Quaternion::ONE, Quaternion::ZERO]), QVector::zeros(2)).unwrap();
        assert_eq!(hamiltonian_gradient(&rest).unwrap().1.norm(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream(2, "dyn-grad");
        for _ in 0..100 {
            let n = rng.random_range(1..=4);
            let p = PhasePoint::new(
                QVector::random_gaussian(n, &mut rng),
                QVector::random_gaussian(n, &mut rng),
            )
            .unwrap();
            let z = p.flatten();
            let fd = numeric_gradient(&hamiltonian_flat, z.as_slice(), tol::FD_STEP).unwrap();
            let exact = hamiltonian_gradient_flat(z.as_slice());
            assert!((fd - exact).amax() < tol::ORACLE);
        }
    }

    #[test]
    fn domain_guard() {
        let near = PhasePoint::new(qv(&[Quaternion::real(1e-6)]), QVector::zeros(1)).unwrap();
        assert!(hamiltonian_upstairs(&near).is_ok());
        assert!(matches!(
            integrate(
                &Kepler::default(),
                &PhasePoint::new(qv(&[Quaternion::real(5e-9)]), QVector::zeros(1)).unwrap(),
                StepControl::new(Method::Rk4, 1e-3, 1.0).unwrap()
            ),
            Err(Error::NearCollision { .. })
        ));
        assert!(StepControl::new(Method::Rk4, 0.0, 1.0).is_err());
        assert!(StepControl::new(Method::Rk4, 1e-3, -1.0).is_err());
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let tr = integrate(
            &Kepler::default(),
            &hand(),
            StepControl::new(Method::Rk4, 1e-3, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(tr.len(), 1);
    }

    #[test]
    fn free_motion_is_a_straight_line() {
        let mut rng = stream(3, "dyn-free");
        let p = PhasePoint::new(
            QVector::random_gaussian(2, &mut rng),
            QVector::random_gaussian(2, &mut rng),
        )
        .unwrap();
        for method in [Method::Rk4, Method::Midpoint] {
            let tr = integrate(&Free, &p, StepControl::new(method, 1e-2, 1.0).unwrap()).unwrap();
            let end = tr.last();
            let expect = p.z().try_add(p.w()).unwrap();
            assert!(end.z().try_sub(&expect).unwrap().norm() < 1e-12);
            assert!(end.w().try_sub(p.w()).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn without_coulomb_term_momentum_still_changes() {
        // |W|²/(8|Z|²) depends on Z, so dropping −1/𝒴_e does not give free motion
        let sys = Kepler { coulomb: 0.0 };
        let tr = integrate(
            &sys,
            &hand(),
            StepControl::new(Method::Rk4, 1e-3, 1.0).unwrap(),
        )
        .unwrap();
        assert!(tr.last().w().try_sub(hand().w()).unwrap().norm() > 1e-2);
        let h0 = sys.energy(hand().flatten().as_slice());
        assert!((sys.energy(tr.last().flatten().as_slice()) - h0).abs() < 1e-10);
    }

    #[test]
    fn bound_orbit_stays_bounded() {
        let p = hand();
        let tr = integrate(
            &Kepler::default(),
            &p,
            StepControl::new(Method::Rk4, 1e-3, 50.0)
                .unwrap()
                .with_stride(10),
        )
        .unwrap();
        let max_r = tr
            .samples
            .iter()
            .map(|(_, q)| q.z().norm())
            .fold(0.0, f64::max);
        // H = −½ with 𝒳_e > 0 confines |Z|² below 2
        assert!(max_r < 2f64.sqrt() + 1e-6);
    }

    #[test]
    fn bound_start_properties() {
        let mut rng = stream(4, "dyn-bound");
        for &mu in &[0.0, 1.0, 3.0] {
            let p = bound_start(LeafSpec::new(2, mu).unwrap(), &mut rng);
            assert!(hamiltonian_upstairs(&p).unwrap() < 0.0);
            let m = crate::realization::magnetic_charge(&p);
            assert!((m - mu).abs() < 1e-12 * (1.0 + mu));
        }
    }

    #[test]
    fn time_reversal_rk4() {
        let err = time_reversal_error(
            &Kepler::default(),
            &hand(),
            StepControl::new(Method::Rk4, 1e-4, 1.0).unwrap(),
        )
        .unwrap();
        assert!(err < 1e-8, "{err:e}");
    }

    #[test]
    fn short_run_conserves_everything() {
        let mut rng = stream(5, "dyn-short");
        let p = bound_start(LeafSpec::new(2, 1.0).unwrap(), &mut rng);
        let tr = integrate(
            &Kepler::default(),
            &p,
            StepControl::new(Method::Rk4, 1e-4, 1.0).unwrap(),
        )
        .unwrap();
        let basis = orthonormal_basis(2).unwrap();
        let r = conserved_report(&tr, &basis).unwrap();
        assert_eq!(r.samples, 10_001);
        assert!(r.max_drift() < 1e-8, "{r:?}");
        assert!(r.energy_relation_derived_residual_max < 1e-8);
    }

    #[test]
    fn midpoint_energy_error_does_not_grow() {
        let sys = Kepler::default();
        let p = hand();
        let basis = orthonormal_basis(2).unwrap();
        let drift = |t_end: f64| {
            let tr = integrate(
                &sys,
                &p,
                StepControl::new(Method::Midpoint, 1e-3, t_end).unwrap(),
            )
            .unwrap();
            conserved_report(&tr, &basis).unwrap().h_drift
        };
        let (short, long) = (drift(10.0), drift(100.0));
        assert!(
            short > 0.0 && long < 3.0 * short + 1e-12,
            "{short:e} {long:e}"
        );
    }

    #[test]
    fn midpoint_reports_non_convergence() {
        let sys = Kepler::default();
        let res = integrate(
            &sys,
            &hand(),
            StepControl::new(Method::Midpoint, 10.0, 10.0).unwrap(),
        );
        assert!(matches!(
            res,
            Err(Error::NonConvergence { .. }) | Err(Error::NearCollision { .. })
        ));
    }

    #[test]
    fn radial_infall_aborts() {
        let z = qv(&[Quaternion::ONE, Quaternion::ZERO]);
        let p = PhasePoint::new(z.clone(), z.scale(-0.1)).unwrap();
        let (tr, err) = integrate_partial(
            &Kepler::default(),
            &p,
            StepControl::new(Method::Rk4, 1e-3, 10.0).unwrap(),
        );
        assert!(matches!(err, Some(Error::NearCollision { .. })), "{err:?}");
        assert!(!tr.is_empty());
    }

    #[test]
    fn conservation_brackets_vanish() {
        let mut rng = stream(6, "dyn-brackets");
        for n in 2..=3 {
            let fam = build_observables(n).unwrap();
            let basis = fam.basis().clone();
            for _ in 0..10 {
                let p = PhasePoint::new(
                    QVector::random_gaussian(n, &mut rng),
                    QVector::random_gaussian(n, &mut rng),
                )
                .unwrap();
                let (a, b) = (
                    rng.random_range(0..fam.dim()),
                    rng.random_range(0..fam.dim()),
                );
                let l = fam.l_pair(a, b);
                let lf = |z: &[f64]| l.evaluate_flat(z);
                assert!(
                    bracket_numeric(&hamiltonian_flat, &lf, &p, tol::FD_STEP)
                        .unwrap()
                        .abs()
                        < 1e-6
                );
                let af = |z: &[f64]| lrl_flat(&basis, a, z);
                assert!(
                    bracket_numeric(&hamiltonian_flat, &af, &p, tol::FD_STEP)
                        .unwrap()
                        .abs()
                        < 1e-6
                );
            }
        }
    }

    #[test]
    fn csv_layout() {
        let tr = integrate(
            &Kepler::default(),
            &hand(),
            StepControl::new(Method::Rk4, 0.01, 1.0)
                .unwrap()
                .with_stride(50),
        )
        .unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,Z_0w,Z_0x,Z_0y,Z_0z,Z_1w"));
        assert!(header.ends_with("W_1y,W_1z"));
        assert_eq!(header.split(',').count(), 17);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 17);
        assert_eq!(row[0], "0.0000000000000000e0");
        let parsed: f64 = row[16].parse().unwrap();
        assert_eq!(parsed, 0.0);
        assert_eq!(csv.lines().count(), 4);
    }
}
