//! Lax curves and Riemann solvers.
//!
//! `Ψ_k(σ, u)` follows the integral curve of `r_k` for `σ >= 0` and the
//! Hugoniot locus for `σ < 0`. The shock branch is parameterized by
//! `u₊ - u = σ r̃_k(u, u₊)`, where `r̃_k` is the family-`k` eigenvector of
//! the averaged Jacobian scaled so that `Dλ_k(u) · r̃_k = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_model::{Family, FluxModel};
use crate::linalg::{eigenvector, real_eigenvalues, Mat2, StateVec};

/// Largest RK4 step along rarefaction curves.
pub const RK_MAX_STEP: f64 = 1e-3;
/// Newton tolerance on the Rankine-Hugoniot residual.
pub const SHOCK_TOL: f64 = 1e-12;
/// Newton tolerance on the Riemann residual `|Ψ₂(σ₂, Ψ₁(σ₁, uL)) - uR|`.
pub const RIEMANN_TOL: f64 = 1e-10;
/// Finite-difference step for the Riemann Newton Jacobian.
pub const RIEMANN_FD_STEP: f64 = 1e-7;
/// Tolerance in the Lax inequalities.
pub const LAX_TOL: f64 = 1e-10;

const SHOCK_FD_STEP: f64 = 1e-7;
const MAX_NEWTON: usize = 50;

/// Strengths of the two waves solving a Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiemannSolution {
    pub sigma: [f64; 2],
    /// `Ψ₁(σ₁, uL)`.
    pub middle_state: StateVec,
    /// `max(s/j, j/s)` with `s = |σ₁|+|σ₂|` and `j = |uR - uL|∞` (1 when both vanish).
    pub equivalence_constant: f64,
    pub residual: f64,
}

impl RiemannSolution {
    pub fn sigma(&self, k: Family) -> f64 {
        self.sigma[k.index()]
    }

    pub fn total_strength(&self) -> f64 {
        self.sigma[0].abs() + self.sigma[1].abs()
    }
}

/// Integrates `dR/ds = r_k(R)` from `u` over `[0, s]` with RK4; `s` may be negative.
pub fn integral_curve(model: &FluxModel, k: Family, s: f64, u: StateVec) -> Result<StateVec> {
    model.ensure_in_domain(u)?;
    if s == 0.0 {
        return Ok(u);
    }
    let steps = (s.abs() / RK_MAX_STEP).ceil().max(1.0) as usize;
    let ds = s / steps as f64;
    let field = |v: StateVec| model.right_eigenvector_unchecked(k, v);
    let mut v = u;
    for _ in 0..steps {
        let k1 = field(v)?;
        let k2 = field(v + (0.5 * ds) * k1)?;
        let k3 = field(v + (0.5 * ds) * k2)?;
        let k4 = field(v + ds * k3)?;
        v += (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        model.ensure_in_domain(v)?;
    }
    Ok(v)
}

/// Rarefaction branch `R_k(σ, u)`, `σ >= 0`.
pub fn rarefaction_curve(model: &FluxModel, k: Family, sigma: f64, u: StateVec) -> Result<StateVec> {
    debug_assert!(sigma >= 0.0, "rarefaction strength must be non-negative");
    integral_curve(model, k, sigma.max(0.0), u)
}

fn hugoniot_residual(
    model: &FluxModel,
    k: Family,
    sigma: f64,
    u: StateVec,
    grad: StateVec,
    w: StateVec,
) -> Result<StateVec> {
    let a = model.averaged_matrix_unchecked(u, w);
    let (l1, l2) = real_eigenvalues(&a, 1e-10).ok_or(Error::NotHyperbolic(w))?;
    let v = eigenvector(&a, [l1, l2][k.index()]);
    let scale = grad.dot(&v);
    if !(scale.abs() > 1e-12) {
        return Err(Error::LinearlyDegenerate {
            family: k.number() as usize,
            state: u,
        });
    }
    Ok(w - u - (sigma / scale) * v)
}

/// Point `S_k(σ, u)` of the Hugoniot locus and the Rankine-Hugoniot speed.
///
/// Admissible shocks have `σ < 0`; positive `σ` returns the non-admissible
/// branch of the same locus.
pub fn shock_curve(model: &FluxModel, k: Family, sigma: f64, u: StateVec) -> Result<(StateVec, f64)> {
    model.ensure_in_domain(u)?;
    if sigma == 0.0 {
        return Ok((u, model.lambda(k, u)?));
    }
    let grad = model.lambda_gradient(k, u);
    let r0 = model.right_eigenvector(k, u)?;
    let mut w = u + sigma * r0;
    let mut res = hugoniot_residual(model, k, sigma, u, grad, w)?;
    let mut converged_at = None;
    for it in 0..MAX_NEWTON {
        let norm = res.norm_inf();
        if norm <= SHOCK_TOL && converged_at.is_none() {
            converged_at = Some(it);
        }
        // one polishing step past the tolerance
        if converged_at.is_some_and(|c| it > c) || norm == 0.0 {
            break;
        }
        let mut jac = Mat2::ZERO;
        for j in 0..2 {
            let mut e = StateVec::ZERO;
            e.0[j] = SHOCK_FD_STEP;
            let col = (1.0 / (2.0 * SHOCK_FD_STEP))
                * (hugoniot_residual(model, k, sigma, u, grad, w + e)?
                    - hugoniot_residual(model, k, sigma, u, grad, w - e)?);
            jac.0[0][j] = col.0[0];
            jac.0[1][j] = col.0[1];
        }
        let inv = jac.inverse().ok_or(Error::NoConvergence {
            what: "shock curve",
            residual: norm,
        })?;
        let w_next = w - inv.mul_vec(res);
        let res_next = hugoniot_residual(model, k, sigma, u, grad, w_next)?;
        if converged_at.is_some() && res_next.norm_inf() >= norm {
            break;
        }
        w = w_next;
        res = res_next;
    }
    if !(res.norm_inf() <= SHOCK_TOL) {
        return Err(Error::NoConvergence {
            what: "shock curve",
            residual: res.norm_inf(),
        });
    }
    model.ensure_in_domain(w)?;
    Ok((w, shock_speed(model, k, u, w)?))
}

/// Family-`k` eigenvalue of the averaged Jacobian `A(uL, uR)`.
pub fn shock_speed(model: &FluxModel, k: Family, ul: StateVec, ur: StateVec) -> Result<f64> {
    let a = model.averaged_matrix(ul, ur)?;
    real_eigenvalues(&a, 1e-10)
        .map(|(l1, l2)| [l1, l2][k.index()])
        .ok_or(Error::NotHyperbolic(ur))
}

/// Lax curve `Ψ_k(σ, u)`: shock branch for `σ < 0`, rarefaction branch otherwise.
pub fn lax_curve(model: &FluxModel, k: Family, sigma: f64, u: StateVec) -> Result<StateVec> {
    if sigma < 0.0 {
        shock_curve(model, k, sigma, u).map(|(w, _)| w)
    } else {
        rarefaction_curve(model, k, sigma, u)
    }
}

fn compose(model: &FluxModel, sigma: [f64; 2], ul: StateVec) -> Result<(StateVec, StateVec)> {
    let mid = lax_curve(model, Family::One, sigma[0], ul)?;
    let end = lax_curve(model, Family::Two, sigma[1], mid)?;
    Ok((mid, end))
}

/// Solves `uR = Ψ₂(σ₂, Ψ₁(σ₁, uL))` by Newton's method with a forward-difference Jacobian.
pub fn solve_riemann(model: &FluxModel, ul: StateVec, ur: StateVec) -> Result<RiemannSolution> {
    model.ensure_in_domain(ul)?;
    model.ensure_in_domain(ur)?;
    let jump = ur - ul;
    if jump.norm_inf() == 0.0 {
        return Ok(RiemannSolution {
            sigma: [0.0, 0.0],
            middle_state: ul,
            equivalence_constant: 1.0,
            residual: 0.0,
        });
    }
    let eig = model.eigen_structure(ul)?;
    let mut sigma = [eig.l[0].dot(&jump), eig.l[1].dot(&jump)];
    let (mut mid, end) = compose(model, sigma, ul)?;
    let mut res = end - ur;
    let mut converged_at = None;
    for it in 0..MAX_NEWTON {
        let norm = res.norm_inf();
        if norm <= RIEMANN_TOL && converged_at.is_none() {
            converged_at = Some(it);
        }
        if converged_at.is_some_and(|c| it >= c + 3) || norm == 0.0 {
            break;
        }
        let mut jac = Mat2::ZERO;
        for j in 0..2 {
            let mut s = sigma;
            // step away from the domain edge
            let h = if s[j] > 0.0 { -RIEMANN_FD_STEP } else { RIEMANN_FD_STEP };
            s[j] += h;
            let (_, e) = compose(model, s, ul)?;
            let col = (1.0 / h) * (e - ur - res);
            jac.0[0][j] = col.0[0];
            jac.0[1][j] = col.0[1];
        }
        let inv = jac.inverse().ok_or(Error::NoConvergence {
            what: "Riemann solver",
            residual: norm,
        })?;
        let step = inv.mul_vec(res);
        // damped update: halve while the trial leaves the domain or increases the residual
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = [sigma[0] - t * step.0[0], sigma[1] - t * step.0[1]];
            if let Ok((m, e)) = compose(model, trial, ul) {
                let r = e - ur;
                if r.norm_inf() < norm || (converged_at.is_none() && t < 1e-3) {
                    accepted = Some((trial, m, r));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((s, m, r)) => {
                sigma = s;
                mid = m;
                res = r;
            }
            None => break,
        }
    }
    let residual = res.norm_inf();
    if !(residual <= RIEMANN_TOL) {
        return Err(Error::NoConvergence {
            what: "Riemann solver",
            residual,
        });
    }
    let s = sigma[0].abs() + sigma[1].abs();
    let j = jump.norm_inf();
    Ok(RiemannSolution {
        sigma,
        middle_state: mid,
        equivalence_constant: (s / j).max(j / s),
        residual,
    })
}

/// Riemann problem generated at `x = 0` between `K·u(L-)` and `u(0+)`.
pub fn solve_boundary_riemann(
    model: &FluxModel,
    k: &Mat2,
    ul_trace: StateVec,
    u0_trace: StateVec,
) -> Result<RiemannSolution> {
    solve_riemann(model, k.mul_vec(ul_trace), u0_trace)
}

/// Lax inequalities `λ_k(uR) < s < λ_k(uL)` up to [`LAX_TOL`].
pub fn lax_admissible(model: &FluxModel, k: Family, ul: StateVec, ur: StateVec, speed: f64) -> bool {
    match (model.lambda(k, ul), model.lambda(k, ur)) {
        (Ok(left), Ok(right)) => right < speed + LAX_TOL && speed < left + LAX_TOL,
        _ => false,
    }
}

/// Outgoing-minus-incoming residual of a transversal interaction: a 2-wave
/// `σ̂₂` from `ul` followed by a 1-wave `σ̂₁`. Returns `(residual, |σ̂₁||σ̂₂|)`.
pub fn transversal_interaction(
    model: &FluxModel,
    ul: StateVec,
    sigma2_hat: f64,
    sigma1_hat: f64,
) -> Result<(f64, f64)> {
    let um = lax_curve(model, Family::Two, sigma2_hat, ul)?;
    let ur = lax_curve(model, Family::One, sigma1_hat, um)?;
    let out = solve_riemann(model, ul, ur)?;
    let residual = (out.sigma[0] - sigma1_hat).abs() + (out.sigma[1] - sigma2_hat).abs();
    Ok((residual, sigma1_hat.abs() * sigma2_hat.abs()))
}

/// Residual of two same-family waves `σ̃` then `σ̂` merging. Returns
/// `(|σ_k - (σ̃+σ̂)| + |σ_k'|, |σ̃||σ̂|(|σ̃|+|σ̂|))`.
pub fn same_family_interaction(
    model: &FluxModel,
    k: Family,
    ul: StateVec,
    sigma_tilde: f64,
    sigma_hat: f64,
) -> Result<(f64, f64)> {
    let um = lax_curve(model, k, sigma_tilde, ul)?;
    let ur = lax_curve(model, k, sigma_hat, um)?;
    let out = solve_riemann(model, ul, ur)?;
    let residual =
        (out.sigma(k) - (sigma_tilde + sigma_hat)).abs() + out.sigma(k.other()).abs();
    let bound = sigma_tilde.abs() * sigma_hat.abs() * (sigma_tilde.abs() + sigma_hat.abs());
    Ok((residual, bound))
}

/// Empirical interaction constants, fitted as the largest observed ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InteractionEstimate {
    pub transversal: f64,
    pub same_family: f64,
    pub samples: usize,
}

impl InteractionEstimate {
    /// Single constant bounding both interaction estimates.
    pub fn c_delta(&self) -> f64 {
        self.transversal.max(self.same_family)
    }
}

/// Fits `C_δ` over random interactions with states in `|u| <= state_radius`
/// and strengths `|σ| ∈ [max_strength/10, max_strength]`.
pub fn estimate_interaction_constant(
    model: &FluxModel,
    state_radius: f64,
    max_strength: f64,
    samples: usize,
    seed: u64,
) -> Result<InteractionEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strength = |rng: &mut ChaCha8Rng| {
        let m = rng.gen_range(0.1 * max_strength..=max_strength);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let mut transversal = 0.0f64;
    let mut same_family = 0.0f64;
    for i in 0..samples {
        let ul = StateVec::new(
            rng.gen_range(-state_radius..=state_radius),
            rng.gen_range(-state_radius..=state_radius),
        );
        let (a, b) = (strength(&mut rng), strength(&mut rng));
        let (res, prod) = transversal_interaction(model, ul, a, b)?;
        transversal = transversal.max(res / prod);

        let k = if i % 2 == 0 { Family::One } else { Family::Two };
        let (mut st, sh) = (strength(&mut rng), strength(&mut rng));
        if st >= 0.0 && sh >= 0.0 {
            st = -st;
        }
        let (res, bound) = same_family_interaction(model, k, ul, st, sh)?;
        same_family = same_family.max(res / bound);
    }
    Ok(InteractionEstimate {
        transversal,
        same_family,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn burgers() -> FluxModel {
        FluxModel::decoupled_burgers()
    }

    #[test]
    fn rarefaction_examples() {
        let m = burgers();
        let u = StateVec::new(0.05, -0.1);
        assert_eq!(rarefaction_curve(&m, Family::One, 0.0, u).unwrap(), u);
        let r = rarefaction_curve(&m, Family::One, 0.1, StateVec::ZERO).unwrap();
        assert!((r - StateVec::new(0.1, 0.0)).norm_inf() < 1e-9);

        let c = FluxModel::coupled_drift();
        let r = rarefaction_curve(&c, Family::One, 0.1, StateVec::ZERO).unwrap();
        assert_abs_diff_eq!(c.lambda(Family::One, r).unwrap(), 1.1, epsilon = 1e-9);
    }

    #[test]
    fn rarefaction_leaving_domain_errors() {
        let m = burgers();
        let err = rarefaction_curve(&m, Family::One, 0.3, StateVec::new(0.3, 0.0)).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain(..)));
    }

    #[test]
    fn scalar_shock_oracle() {
        // g(v) = v + v²/2, RH speed (g(v+) - g(v-)) / (v+ - v-) = 1 + (v+ + v-)/2
        let (w, s) = shock_curve(&burgers(), Family::One, -0.2, StateVec::new(0.1, 0.0)).unwrap();
        // the Dλ normalization is a 1e-6 central difference: ~1e-10 relative noise
        assert!((w - StateVec::new(-0.1, 0.0)).norm_inf() < 1e-10);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_shock_limit() {
        let m = FluxModel::coupled_drift();
        let u = StateVec::new(0.05, 0.02);
        let (w, s) = shock_curve(&m, Family::Two, -1e-9, u).unwrap();
        assert!((w - u).norm_inf() < 1e-8);
        assert_abs_diff_eq!(s, m.lambda(Family::Two, u).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn shock_satisfies_rankine_hugoniot() {
        let m = FluxModel::coupled_drift();
        for k in Family::BOTH {
            let u = StateVec::new(0.03, -0.04);
            let (w, s) = shock_curve(&m, k, -0.07, u).unwrap();
            let rh = m.flux(w) - m.flux(u) - s * (w - u);
            assert!(rh.norm_inf() < 1e-12, "{rh:?}");
            assert!(lax_admissible(&m, k, u, w, s));
        }
    }

    #[test]
    fn lax_curve_continuity_at_zero() {
        let m = FluxModel::coupled_drift();
        let u = StateVec::new(-0.02, 0.1);
        for k in Family::BOTH {
            let r = m.right_eigenvector(k, u).unwrap().norm_inf();
            for s in [1e-6, -1e-6] {
                let w = lax_curve(&m, k, s, u).unwrap();
                assert!((w - u).norm_inf() <= 2e-6 * r);
            }
            assert_eq!(lax_curve(&m, k, 0.0, u).unwrap(), u);
        }
    }

    #[test]
    fn riemann_examples() {
        let m = burgers();
        let u = StateVec::new(0.1, 0.0);
        let s = solve_riemann(&m, u, u).unwrap();
        assert_eq!(s.sigma, [0.0, 0.0]);
        let s = solve_riemann(&m, u, StateVec::new(-0.1, 0.0)).unwrap();
        assert_abs_diff_eq!(s.sigma[0], -0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(s.sigma[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn boundary_riemann_examples() {
        let m = burgers();
        let k = Mat2::new(0.3, 0.3, 0.3, 0.3);
        let ul = StateVec::new(0.02, -0.01);
        let s = solve_boundary_riemann(&m, &k, ul, k.mul_vec(ul)).unwrap();
        assert_eq!(s.sigma, [0.0, 0.0]);
        let s = solve_boundary_riemann(&m, &Mat2::ZERO, StateVec::new(0.3, 0.3), StateVec::new(0.1, 0.0))
            .unwrap();
        assert_abs_diff_eq!(s.sigma[0], 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(s.sigma[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn admissibility_examples() {
        let m = burgers();
        let (ul, ur) = (StateVec::new(0.1, 0.0), StateVec::new(-0.1, 0.0));
        assert!(lax_admissible(&m, Family::One, ul, ur, 1.0));
        // positive strength glued as a shock
        let (w, s) = shock_curve(&m, Family::One, 0.2, ur).unwrap();
        assert!(!lax_admissible(&m, Family::One, ur, w, s));
    }

    #[test]
    fn decoupled_interactions_are_exact() {
        let m = burgers();
        let (res, _) = transversal_interaction(&m, StateVec::new(0.01, 0.02), -0.03, 0.04).unwrap();
        assert!(res < 1e-10, "{res}");
        let (res, _) = same_family_interaction(&m, Family::One, StateVec::ZERO, -0.05, -0.05).unwrap();
        assert!(res < 1e-10, "{res}");
    }
}
