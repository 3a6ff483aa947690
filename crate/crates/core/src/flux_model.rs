//! The hyperbolic system: flux, Jacobian and normalized eigenstructure.
//!
//! Right eigenvectors are scaled so that `Dλ_k · r_k = 1`. Along an integral
//! curve of `r_k` the eigenvalue `λ_k` then grows at unit rate, so the
//! strength of a rarefaction equals its speed increment. Left eigenvectors
//! are the dual basis, `ℓ_i · r_j = δ_ij`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvector, real_eigenvalues, Mat2, StateVec, GAUSS_LEGENDRE_5};

/// Step of the central differences used for Jacobians and `Dλ_k`.
pub const FD_STEP: f64 = 1e-6;

const HYPERBOLICITY_TOL: f64 = 1e-10;
const DOMAIN_SLACK: f64 = 1e-12;

/// Characteristic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    One,
    Two,
}

impl Family {
    pub const BOTH: [Family; 2] = [Family::One, Family::Two];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Family::One => 0,
            Family::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Family {
        match self {
            Family::One => Family::Two,
            Family::Two => Family::One,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

pub type FluxFn = dyn Fn(StateVec) -> StateVec + Send + Sync;
pub type JacobianFn = dyn Fn(StateVec) -> Mat2 + Send + Sync;

/// A 2x2 system `u_t + f(u)_x = 0` on the box `|u|_inf <= delta`.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct FluxModel {
    name: String,
    delta: f64,
    flux: Arc<FluxFn>,
    jacobian: Option<Arc<JacobianFn>>,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("delta", &self.delta)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

/// Eigenvalues, right and left eigenvectors at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenStructure {
    pub lambda: [f64; 2],
    pub r: [StateVec; 2],
    pub l: [StateVec; 2],
}

impl EigenStructure {
    pub fn lambda(&self, k: Family) -> f64 {
        self.lambda[k.index()]
    }
    pub fn r(&self, k: Family) -> StateVec {
        self.r[k.index()]
    }
    pub fn l(&self, k: Family) -> StateVec {
        self.l[k.index()]
    }
}

/// Outcome of [`FluxModel::check_genuine_nonlinearity`].
#[derive(Debug, Clone, Serialize)]
pub struct GnlReport {
    /// Minimum of the oriented `Dλ_k · r_k` per family.
    pub min: [f64; 2],
    pub points: usize,
    pub passes: bool,
}

impl FluxModel {
    /// Model with a flux only; the Jacobian is taken by central differences.
    pub fn from_flux<F>(name: impl Into<String>, delta: f64, flux: F) -> Self
    where
        F: Fn(StateVec) -> StateVec + Send + Sync + 'static,
    {
        assert!(delta > 0.0, "domain radius must be positive");
        FluxModel {
            name: name.into(),
            delta,
            flux: Arc::new(flux),
            jacobian: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(StateVec) -> Mat2 + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// `f(u) = (u1 + u1²/2, 2 u2 + u2²/2)`: two uncoupled Burgers-type fields.
    pub fn decoupled_burgers() -> Self {
        FluxModel::from_flux("decoupled_burgers", 0.4, |u| {
            StateVec::new(u.u1() + 0.5 * u.u1() * u.u1(), 2.0 * u.u2() + 0.5 * u.u2() * u.u2())
        })
        .with_jacobian(|u| Mat2::diag(1.0 + u.u1(), 2.0 + u.u2()))
    }

    /// `f(u) = (2 u1 + u2, (1 + u1)³/3 - 1/3 + 2 u2)`, with speeds `1 - u1` and `3 + u1`.
    pub fn coupled_drift() -> Self {
        FluxModel::from_flux("coupled_drift", 0.4, |u| {
            let a = 1.0 + u.u1();
            StateVec::new(2.0 * u.u1() + u.u2(), a * a * a / 3.0 - 1.0 / 3.0 + 2.0 * u.u2())
        })
        .with_jacobian(|u| {
            let a = 1.0 + u.u1();
            Mat2::new(2.0, 1.0, a * a, 2.0)
        })
    }

    /// Linear flux `f(u) = A u`.
    pub fn linear(a: Mat2, delta: f64) -> Self {
        FluxModel::from_flux("linear", delta, move |u| a.mul_vec(u)).with_jacobian(move |_| a)
    }

    /// Look up a builtin model by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "decoupled_burgers" => Some(Self::decoupled_burgers()),
            "coupled_drift" => Some(Self::coupled_drift()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 2] = ["decoupled_burgers", "coupled_drift"];

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The radius `δ` of the state box where the Riemann problem is solvable.
    pub fn domain_radius(&self) -> f64 {
        self.delta
    }

    /// Same model with a different domain radius.
    pub fn with_domain_radius(mut self, delta: f64) -> Self {
        assert!(delta > 0.0);
        self.delta = delta;
        self
    }

    pub fn in_domain(&self, u: StateVec) -> bool {
        u.is_finite() && u.norm_inf() <= self.delta * (1.0 + DOMAIN_SLACK)
    }

    pub(crate) fn ensure_in_domain(&self, u: StateVec) -> Result<()> {
        if self.in_domain(u) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(u, self.delta))
        }
    }

    #[inline]
    pub fn flux(&self, u: StateVec) -> StateVec {
        (self.flux)(u)
    }

    pub fn jacobian(&self, u: StateVec) -> Mat2 {
        match &self.jacobian {
            Some(j) => j(u),
            None => {
                let mut m = Mat2::ZERO;
                for j in 0..2 {
                    let mut e = StateVec::ZERO;
                    e.0[j] = FD_STEP;
                    let col = (1.0 / (2.0 * FD_STEP)) * (self.flux(u + e) - self.flux(u - e));
                    m.0[0][j] = col.0[0];
                    m.0[1][j] = col.0[1];
                }
                m
            }
        }
    }

    /// Eigenvalues without domain or positivity checks.
    pub(crate) fn eigenvalues_unchecked(&self, u: StateVec) -> Option<(f64, f64)> {
        real_eigenvalues(&self.jacobian(u), HYPERBOLICITY_TOL)
    }

    pub(crate) fn lambda_unchecked(&self, k: Family, u: StateVec) -> f64 {
        match self.eigenvalues_unchecked(u) {
            Some((l1, l2)) => [l1, l2][k.index()],
            None => f64::NAN,
        }
    }

    /// Characteristic speed `λ_k(u)`.
    pub fn lambda(&self, k: Family, u: StateVec) -> Result<f64> {
        self.ensure_in_domain(u)?;
        self.eigenvalues_unchecked(u)
            .map(|(l1, l2)| [l1, l2][k.index()])
            .ok_or(Error::NotHyperbolic(u))
    }

    /// Central-difference gradient of `λ_k` at `u`.
    pub fn lambda_gradient(&self, k: Family, u: StateVec) -> StateVec {
        let mut g = StateVec::ZERO;
        for j in 0..2 {
            let mut e = StateVec::ZERO;
            e.0[j] = FD_STEP;
            g.0[j] = (self.lambda_unchecked(k, u + e) - self.lambda_unchecked(k, u - e))
                / (2.0 * FD_STEP);
        }
        g
    }

    /// Unit eigenvector of family `k` and the directional derivative of `λ_k` along it.
    fn raw_eigenvector(&self, k: Family, u: StateVec, lambda: f64) -> (StateVec, f64) {
        let v = eigenvector(&self.jacobian(u), lambda);
        let v = (1.0 / v.norm2()) * v;
        let d = (self.lambda_unchecked(k, u + FD_STEP * v) - self.lambda_unchecked(k, u - FD_STEP * v))
            / (2.0 * FD_STEP);
        (v, d)
    }

    /// Eigenvalues, right eigenvectors with `Dλ_k · r_k = 1`, and dual left eigenvectors.
    pub fn eigen_structure(&self, u: StateVec) -> Result<EigenStructure> {
        self.ensure_in_domain(u)?;
        self.eigen_structure_unchecked(u)
    }

    /// As [`eigen_structure`](Self::eigen_structure) but without the domain check;
    /// used for finite-difference probes that may step just outside the box.
    pub(crate) fn eigen_structure_unchecked(&self, u: StateVec) -> Result<EigenStructure> {
        let (l1, l2) = self.eigenvalues_unchecked(u).ok_or(Error::NotHyperbolic(u))?;
        if l1 <= 0.0 {
            return Err(Error::NotPositive(u, l1));
        }
        let mut r = [StateVec::ZERO; 2];
        for k in Family::BOTH {
            let (v, d) = self.raw_eigenvector(k, u, [l1, l2][k.index()]);
            if !(d.abs() > 1e-8) {
                return Err(Error::LinearlyDegenerate {
                    family: k.number() as usize,
                    state: u,
                });
            }
            r[k.index()] = (1.0 / d) * v;
        }
        let inv = Mat2::from_columns(r[0], r[1])
            .inverse()
            .ok_or(Error::NotHyperbolic(u))?;
        let l = [
            StateVec::new(inv.get(0, 0), inv.get(0, 1)),
            StateVec::new(inv.get(1, 0), inv.get(1, 1)),
        ];
        Ok(EigenStructure {
            lambda: [l1, l2],
            r,
            l,
        })
    }

    /// Normalized right eigenvector `r_k(u)`.
    pub fn right_eigenvector(&self, k: Family, u: StateVec) -> Result<StateVec> {
        self.ensure_in_domain(u)?;
        self.right_eigenvector_unchecked(k, u)
    }

    pub(crate) fn right_eigenvector_unchecked(&self, k: Family, u: StateVec) -> Result<StateVec> {
        let (l1, l2) = self.eigenvalues_unchecked(u).ok_or(Error::NotHyperbolic(u))?;
        let (v, d) = self.raw_eigenvector(k, u, [l1, l2][k.index()]);
        if !(d.abs() > 1e-8) {
            return Err(Error::LinearlyDegenerate {
                family: k.number() as usize,
                state: u,
            });
        }
        Ok((1.0 / d) * v)
    }

    /// Path-averaged Jacobian `∫₀¹ Df(uL + t (uR - uL)) dt` by 5-point Gauss-Legendre.
    pub fn averaged_matrix(&self, ul: StateVec, ur: StateVec) -> Result<Mat2> {
        self.ensure_in_domain(ul)?;
        self.ensure_in_domain(ur)?;
        Ok(self.averaged_matrix_unchecked(ul, ur))
    }

    pub(crate) fn averaged_matrix_unchecked(&self, ul: StateVec, ur: StateVec) -> Mat2 {
        let jump = ur - ul;
        GAUSS_LEGENDRE_5
            .iter()
            .fold(Mat2::ZERO, |acc, &(t, w)| acc.add(&self.jacobian(ul + t * jump).scale(w)))
    }

    /// Samples the oriented `Dλ_k · r_k` on a `samples × samples` grid of the domain box.
    ///
    /// Eigenvectors are scaled so that their pivot component (largest at the
    /// centre) equals one, and oriented so the centre value is positive; the
    /// field is genuinely nonlinear on the box when the minimum stays positive.
    pub fn check_genuine_nonlinearity(&self, samples: usize) -> GnlReport {
        let samples = samples.max(1);
        let center = StateVec::ZERO;
        let mut min = [f64::INFINITY; 2];
        let mut pivots = [0usize; 2];
        let mut signs = [1.0f64; 2];
        let eig_center = self.eigenvalues_unchecked(center);
        for k in Family::BOTH {
            let Some((l1, l2)) = eig_center else {
                min[k.index()] = f64::NAN;
                continue;
            };
            let v = eigenvector(&self.jacobian(center), [l1, l2][k.index()]);
            pivots[k.index()] = if v.0[0].abs() >= v.0[1].abs() { 0 } else { 1 };
            let d = self.pivot_directional_derivative(k, center, pivots[k.index()]);
            signs[k.index()] = if d < 0.0 { -1.0 } else { 1.0 };
        }
        let coord = |i: usize| {
            if samples == 1 {
                0.0
            } else {
                -self.delta + 2.0 * self.delta * i as f64 / (samples - 1) as f64
            }
        };
        for i in 0..samples {
            for j in 0..samples {
                let u = StateVec::new(coord(i), coord(j));
                for k in Family::BOTH {
                    let d = signs[k.index()] * self.pivot_directional_derivative(k, u, pivots[k.index()]);
                    let m = &mut min[k.index()];
                    *m = if d.is_nan() { f64::NAN } else { m.min(d) };
                }
            }
        }
        let passes = min.iter().all(|m| *m > 0.0);
        GnlReport {
            min,
            points: samples * samples,
            passes,
        }
    }

    fn pivot_directional_derivative(&self, k: Family, u: StateVec, pivot: usize) -> f64 {
        let Some((l1, l2)) = self.eigenvalues_unchecked(u) else {
            return f64::NAN;
        };
        let v = eigenvector(&self.jacobian(u), [l1, l2][k.index()]);
        if v.0[pivot] == 0.0 {
            return f64::NAN;
        }
        let v = (1.0 / v.0[pivot]) * v;
        (self.lambda_unchecked(k, u + FD_STEP * v) - self.lambda_unchecked(k, u - FD_STEP * v))
            / (2.0 * FD_STEP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn decoupled_burgers_at_origin() {
        let m = FluxModel::decoupled_burgers();
        let e = m.eigen_structure(StateVec::ZERO).unwrap();
        assert_abs_diff_eq!(e.lambda[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.lambda[1], 2.0, epsilon = 1e-14);
        for (got, want) in [
            (e.r[0], StateVec::new(1.0, 0.0)),
            (e.r[1], StateVec::new(0.0, 1.0)),
            (e.l[0], StateVec::new(1.0, 0.0)),
            (e.l[1], StateVec::new(0.0, 1.0)),
        ] {
            assert!((got - want).norm_inf() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn coupled_drift_at_origin() {
        let m = FluxModel::coupled_drift();
        let e = m.eigen_structure(StateVec::ZERO).unwrap();
        assert_abs_diff_eq!(e.lambda[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.lambda[1], 3.0, epsilon = 1e-14);
        // analytic: r1 = (-1, 1 + u1), r2 = (1, 1 + u1)
        assert!((e.r[0] - StateVec::new(-1.0, 1.0)).norm_inf() < 1e-8);
        assert!((e.r[1] - StateVec::new(1.0, 1.0)).norm_inf() < 1e-8);
        assert_abs_diff_eq!(e.l[0].dot(&e.r[1]), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.l[0].dot(&e.r[0]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn errors_on_bad_states() {
        let m = FluxModel::decoupled_burgers();
        assert!(matches!(
            m.eigen_structure(StateVec::new(0.5, 0.0)),
            Err(Error::OutOfDomain(..))
        ));
        let neg = FluxModel::linear(Mat2::diag(-1.0, 1.0), 1.0);
        assert!(matches!(neg.eigen_structure(StateVec::ZERO), Err(Error::NotPositive(..))));
        let double = FluxModel::linear(Mat2::diag(1.0, 1.0), 1.0);
        assert!(matches!(
            double.eigen_structure(StateVec::ZERO),
            Err(Error::NotHyperbolic(..))
        ));
        let lin = FluxModel::linear(Mat2::diag(1.0, 2.0), 1.0);
        assert!(matches!(
            lin.eigen_structure(StateVec::ZERO),
            Err(Error::LinearlyDegenerate { .. })
        ));
    }

    #[test]
    fn averaged_matrix_examples() {
        let m = FluxModel::decoupled_burgers();
        let u = StateVec::new(0.1, -0.2);
        let (a, j) = (m.averaged_matrix(u, u).unwrap(), m.jacobian(u));
        for i in 0..2 {
            for k in 0..2 {
                assert_abs_diff_eq!(a.get(i, k), j.get(i, k), epsilon = 1e-14);
            }
        }
        let a = m
            .averaged_matrix(StateVec::ZERO, StateVec::new(0.2, 0.0))
            .unwrap();
        assert_abs_diff_eq!(a.get(0, 0), 1.1, epsilon = 1e-14);
        assert_abs_diff_eq!(a.get(1, 1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.get(0, 1), 0.0);
        let lam = Mat2::new(1.0, 0.5, 0.0, 2.0);
        let lin = FluxModel::linear(lam, 1.0);
        let b = lin
            .averaged_matrix(StateVec::new(0.3, -0.1), StateVec::new(-0.2, 0.4))
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(b.get(i, j), lam.get(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn genuine_nonlinearity_reports() {
        for m in [FluxModel::decoupled_burgers(), FluxModel::coupled_drift()] {
            let rep = m.check_genuine_nonlinearity(11);
            assert!(rep.passes, "{}: {rep:?}", m.name());
            for k in 0..2 {
                assert!((rep.min[k] - 1.0).abs() < 1e-6, "{}: {rep:?}", m.name());
            }
        }
        let lin = FluxModel::linear(Mat2::diag(1.0, 2.0), 0.4);
        let rep = lin.check_genuine_nonlinearity(5);
        assert!(!rep.passes);
        assert_abs_diff_eq!(rep.min[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn finite_difference_jacobian_matches_analytic() {
        let analytic = FluxModel::coupled_drift();
        let fd = FluxModel::from_flux("fd", 0.4, move |u| analytic.flux(u));
        let exact = FluxModel::coupled_drift();
        let u = StateVec::new(0.21, -0.13);
        let (a, b) = (fd.jacobian(u), exact.jacobian(u));
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(a.get(i, j), b.get(i, j), epsilon = 1e-8);
            }
        }
    }
}
