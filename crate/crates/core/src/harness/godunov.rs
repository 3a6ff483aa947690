//! First-order Godunov scheme, used as an independent reference solution.

use crate::error::{Error, Result};
use crate::flux_model::{Family, FluxModel};
use crate::linalg::{Mat2, StateVec};
use crate::piecewise::PiecewiseConstant;
use crate::wave_curves::{rarefaction_curve, shock_speed, solve_riemann};

pub const CFL: f64 = 0.45;
pub const MIN_CELLS: usize = 16;

/// Exact cell averages of `u` on a uniform grid.
pub fn cell_averages(u: &PiecewiseConstant, cells: usize) -> Vec<StateVec> {
    let dx = u.length / cells as f64;
    let mut out = vec![StateVec::ZERO; cells];
    let mut edges: Vec<f64> = Vec::with_capacity(u.breakpoints.len() + 2);
    edges.push(0.0);
    edges.extend(&u.breakpoints);
    edges.push(u.length);
    for (piece, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let first = ((a / dx).floor() as usize).min(cells - 1);
        let last = ((b / dx).ceil() as usize).min(cells);
        for (c, slot) in out.iter_mut().enumerate().take(last).skip(first) {
            let lo = a.max(c as f64 * dx);
            let hi = b.min((c + 1) as f64 * dx);
            if hi > lo {
                *slot += (hi - lo) / dx * u.values[piece];
            }
        }
    }
    out
}

/// State of the Riemann solution `ul → ur` along the ray `x/t = xi`.
pub fn sample_riemann(model: &FluxModel, ul: StateVec, ur: StateVec, xi: f64) -> Result<StateVec> {
    let sol = solve_riemann(model, ul, ur)?;
    let sides = [(ul, sol.middle_state), (sol.middle_state, ur)];
    for (fam, (a, b)) in Family::BOTH.into_iter().zip(sides) {
        let sigma = sol.sigma(fam);
        if sigma < 0.0 {
            if xi < shock_speed(model, fam, a, b)? {
                return Ok(a);
            }
        } else {
            let (lo, hi) = (model.lambda(fam, a)?, model.lambda(fam, b)?);
            if xi < lo {
                return Ok(a);
            }
            if xi < hi {
                // speeds grow by exactly the strength along the rarefaction curve
                return rarefaction_curve(model, fam, xi - lo, a);
            }
        }
    }
    Ok(ur)
}

fn interface_flux(model: &FluxModel, ul: StateVec, ur: StateVec) -> Result<StateVec> {
    // every wave moves right: the interface sees the left state
    if model.lambda(Family::One, ul)? > 0.0 && model.lambda(Family::One, ur)? > 0.0 {
        return Ok(model.flux(ul));
    }
    Ok(model.flux(sample_riemann(model, ul, ur, 0.0)?))
}

fn to_piecewise(length: f64, cells: &[StateVec]) -> PiecewiseConstant {
    let dx = length / cells.len() as f64;
    PiecewiseConstant {
        length,
        breakpoints: (1..cells.len()).map(|i| i as f64 * dx).collect(),
        values: cells.to_vec(),
    }
    .simplified()
}

/// Godunov solution of `u_t + f(u)_x = 0`, `u(t, 0) = K u(t, L)`, with
/// `cells` cells, returned at the given increasing `times`.
pub fn godunov(
    model: &FluxModel,
    k: &Mat2,
    u0: &PiecewiseConstant,
    cells: usize,
    times: &[f64],
) -> Result<Vec<(f64, PiecewiseConstant)>> {
    if cells < MIN_CELLS {
        return Err(Error::CflViolation(format!("{cells} cells, at least {MIN_CELLS} required")));
    }
    let length = u0.length;
    let dx = length / cells as f64;
    let mut u = cell_averages(u0, cells);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut fluxes = vec![StateVec::ZERO; cells + 1];
    for &target in times {
        while t < target {
            let mut speed: f64 = 0.0;
            for &c in &u {
                let e = model.eigen_structure(c)?;
                speed = speed.max(e.lambda[0].abs()).max(e.lambda[1].abs());
            }
            if !speed.is_finite() || speed <= 0.0 {
                return Err(Error::CflViolation(format!("wave speed {speed} at t = {t}")));
            }
            let mut dt = CFL * dx / speed;
            if t + dt >= target {
                dt = target - t;
            }
            let ghost = k.mul_vec(u[cells - 1]);
            fluxes[0] = interface_flux(model, ghost, u[0])?;
            for i in 1..cells {
                fluxes[i] = interface_flux(model, u[i - 1], u[i])?;
            }
            fluxes[cells] = model.flux(u[cells - 1]);
            let ratio = dt / dx;
            for (i, c) in u.iter_mut().enumerate() {
                *c -= ratio * (fluxes[i + 1] - fluxes[i]);
            }
            t = if dt == target - t { target } else { t + dt };
        }
        out.push((target, to_piecewise(length, &u)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn averages_are_exact() {
        let u = PiecewiseConstant::new(1.0, vec![0.3], vec![StateVec::new(1.0, 0.0), StateVec::new(0.0, 2.0)]).unwrap();
        let avg = cell_averages(&u, 4);
        assert_abs_diff_eq!(avg[1].u1(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(avg[1].u2(), 1.6, epsilon = 1e-15);
        assert_eq!(avg[0], StateVec::new(1.0, 0.0));
        assert_eq!(avg[3], StateVec::new(0.0, 2.0));
    }

    #[test]
    fn zero_data_stays_zero() {
        let model = FluxModel::coupled_drift();
        let u0 = PiecewiseConstant::constant(1.0, StateVec::ZERO);
        let snaps = godunov(&model, &Mat2::new(0.3, 0.3, 0.3, 0.3), &u0, 32, &[0.0, 0.5]).unwrap();
        assert!(snaps.iter().all(|(_, u)| u.sup_norm() == 0.0));
    }

    #[test]
    fn burgers_shock_moves_at_rankine_hugoniot_speed() {
        // u1 jumps 0.1 -> -0.1: speed 1 + (0.1 - 0.1)/2 = 1
        let model = FluxModel::decoupled_burgers();
        let u0 = PiecewiseConstant::new(1.0, vec![0.2], vec![StateVec::new(0.1, 0.0), StateVec::new(-0.1, 0.0)]).unwrap();
        let cells = 200;
        let snaps = godunov(&model, &Mat2::ZERO, &u0, cells, &[0.3]).unwrap();
        let u = &snaps[0].1;
        // locate the midpoint of the smeared shock
        let x = u.jumps().find(|(_, l, r)| l.u1() >= 0.0 && r.u1() < 0.0).map(|j| j.0).unwrap();
        assert!((x - 0.5).abs() <= 1.0 / cells as f64 + 1e-12, "shock at {x}");
    }

    #[test]
    fn too_few_cells_rejected() {
        let model = FluxModel::decoupled_burgers();
        let u0 = PiecewiseConstant::constant(1.0, StateVec::ZERO);
        assert!(matches!(godunov(&model, &Mat2::ZERO, &u0, 8, &[0.1]), Err(Error::CflViolation(_))));
    }

    #[test]
    fn sampling_inside_a_fan() {
        let model = FluxModel::decoupled_burgers();
        let (ul, ur) = (StateVec::new(-0.2, 0.0), StateVec::new(0.2, 0.0));
        // 1-rarefaction spans speeds 0.8..1.2
        let u = sample_riemann(&model, ul, ur, 1.0).unwrap();
        assert_abs_diff_eq!(u.u1(), 0.0, epsilon = 1e-9);
        assert_eq!(sample_riemann(&model, ul, ur, 0.5).unwrap(), ul);
        assert_eq!(sample_riemann(&model, ul, ur, 5.0).unwrap(), ur);
    }
}
