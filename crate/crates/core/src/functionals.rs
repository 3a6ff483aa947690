//! TV*, the weighted Glimm functionals, the Lyapunov functional `J = V + c₀Q`,
//! parameter selection and the decay monitor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_model::{Family, FluxModel};
use crate::front_tracking::{EventRecord, EventType, Front, FrontKind, SolutionState};
use crate::linalg::{Mat2, StateVec};
use crate::piecewise::PiecewiseConstant;
use crate::stability;
use crate::wave_curves::{estimate_interaction_constant, solve_boundary_riemann, solve_riemann};

/// Relative slack of the decay monitor, above the noise of the finite
/// difference eigenvector normalization.
pub const MONITOR_REL_TOL: f64 = 1e-9;
/// Absolute slack: a hundred times the strength below which the tracker
/// drops waves, so that dropped dust reappearing later is not flagged.
pub const MONITOR_ABS_TOL: f64 = 1e-11;

/// The weight bundle of the Lyapunov functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalParams {
    pub length: f64,
    /// Sup-norm guard radius.
    pub delta0: f64,
    /// Lower bound of all front speeds.
    pub c_star: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub c0: f64,
    pub c_delta: f64,
    /// Expected decay rate `c*·γ`.
    pub nu: f64,
    /// Upper bound of all front speeds.
    pub m_speed: f64,
    /// Rescaling `r₁ → α r₁`; family-1 strengths are divided by `α`.
    pub alpha: f64,
    /// Largest boundary reflection coefficient found on the verification grid.
    pub feedback_bound: f64,
    pub include_boundary_in_q: bool,
}

impl FunctionalParams {
    /// Recomputes `c₀` and `ν` after a manual change of `γ`, `C_δ` or `c*`.
    pub fn refresh(&mut self) {
        self.c0 = 2.0 * self.c_delta * (2.0 * self.gamma * self.length).exp();
        self.nu = self.c_star * self.gamma;
    }

    /// Weight of a strength of family `k`.
    #[inline]
    pub fn strength_weight(&self, k: Family) -> f64 {
        match k {
            Family::One => 1.0 / self.alpha,
            Family::Two => 1.0,
        }
    }

    #[inline]
    pub fn scaled(&self, k: Family, sigma: f64) -> f64 {
        self.strength_weight(k) * sigma.abs()
    }

    /// `e^{-γL} - ε`, the admissible boundary reflection.
    pub fn feedback_margin(&self) -> f64 {
        (-self.gamma * self.length).exp() - self.epsilon
    }
}

/// Grid sizes of [`select_parameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    /// Points per axis of the state grid.
    pub grid: usize,
    /// Ratio of the geometric scans.
    pub ratio: f64,
    pub epsilon_max: f64,
    pub c_delta_samples: usize,
    pub c_delta_max_strength: f64,
    /// Multiplier applied to the fitted interaction constant.
    pub c_delta_safety: f64,
    /// Lower bound of `C_δ` (exactly decoupled systems fit 0).
    pub c_delta_floor: f64,
    pub seed: u64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            grid: 21,
            ratio: 0.8,
            epsilon_max: 0.05,
            c_delta_samples: 400,
            c_delta_max_strength: 0.05,
            c_delta_safety: 1.5,
            c_delta_floor: 1e-2,
            seed: 7,
        }
    }
}

/// Functional values at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub t: f64,
    pub v: f64,
    pub q: f64,
    pub j: f64,
    pub tv_star: f64,
}

/// `TV(U) + |K U(L-) - U(0+)|∞`.
pub fn tv_star(k: &Mat2, u: &PiecewiseConstant) -> f64 {
    u.tv_star(k)
}

fn state_grid(radius: f64, n: usize) -> impl Iterator<Item = StateVec> {
    let n = n.max(2);
    (0..n).flat_map(move |i| {
        (0..n).map(move |j| {
            let s = |m: usize| -radius + 2.0 * radius * m as f64 / (n - 1) as f64;
            StateVec::new(s(i), s(j))
        })
    })
}

/// `max_k Σ_i |ℓ̂_i(Ku)·K r̂_k(u)|` over the grid on `|u| <= radius`, with the
/// `α`-rescaled eigenbasis.
pub fn feedback_reflection(
    model: &FluxModel,
    k: &Mat2,
    alpha: f64,
    radius: f64,
    grid: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in state_grid(radius, grid) {
        let at_u = model.eigen_structure(u)?;
        let at_ku = model.eigen_structure(k.mul_vec(u))?;
        for fam in Family::BOTH {
            let scale_r = if fam == Family::One { alpha } else { 1.0 };
            let kr = k.mul_vec(scale_r * at_u.r(fam));
            let s = (at_ku.l(Family::One).dot(&kr) / alpha).abs()
                + at_ku.l(Family::Two).dot(&kr).abs();
            worst = worst.max(s);
        }
    }
    Ok(worst)
}

/// Chooses `δ₀, γ, ε, α, c*, C_δ, c₀` so that the boundary reflection bound
/// holds on the verification grid.
pub fn select_parameters(
    model: &FluxModel,
    k: &Mat2,
    length: f64,
    options: &SelectionOptions,
) -> Result<FunctionalParams> {
    let cond = stability::condition12(model, k)?;
    if !cond.satisfied {
        return Err(Error::NoFeasibleParams {
            rho1: stability::rho1(k),
        });
    }
    let alpha = cond.alpha_star;
    let delta = model.domain_radius();
    let ratio = options.ratio;
    let mut chosen = None;
    for m in 0..60 {
        let delta0 = delta * ratio.powi(m);
        // K u must stay inside the domain
        if k.norm_inf() * delta0 > delta {
            continue;
        }
        let bound = match feedback_reflection(model, k, alpha, delta0, options.grid) {
            Ok(b) => b,
            Err(_) => continue,
        };
        if bound >= 1.0 {
            continue;
        }
        let mut gamma = 1.0 / length;
        'gamma: for _ in 0..200 {
            let reach = (-gamma * length).exp();
            let mut eps = options.epsilon_max;
            for _ in 0..60 {
                if bound < reach - eps {
                    chosen = Some((delta0, bound, gamma, eps));
                    break 'gamma;
                }
                eps *= ratio;
            }
            gamma *= ratio;
        }
        if chosen.is_some() {
            break;
        }
    }
    let (delta0, feedback_bound, gamma, epsilon) = chosen.ok_or(Error::NoFeasibleParams {
        rho1: stability::rho1(k),
    })?;
    let mut min_speed = f64::INFINITY;
    let mut max_speed: f64 = 0.0;
    for u in state_grid(delta0, options.grid) {
        let e = model.eigen_structure(u)?;
        min_speed = min_speed.min(e.lambda[0]);
        max_speed = max_speed.max(e.lambda[1]);
    }
    let est = estimate_interaction_constant(
        model,
        delta0.min(0.5 * delta),
        options.c_delta_max_strength,
        options.c_delta_samples,
        options.seed,
    )?;
    let c_delta = (options.c_delta_safety * est.c_delta()).max(options.c_delta_floor);
    let mut params = FunctionalParams {
        length,
        delta0,
        c_star: 0.99 * min_speed,
        gamma,
        epsilon,
        c0: 0.0,
        c_delta,
        nu: 0.0,
        m_speed: max_speed,
        alpha,
        feedback_bound,
        include_boundary_in_q: false,
    };
    params.refresh();
    Ok(params)
}

fn boundary_strengths(
    model: &FluxModel,
    k: &Mat2,
    right_trace: StateVec,
    left_trace: StateVec,
) -> Result<[f64; 2]> {
    if k.mul_vec(right_trace) == left_trace {
        return Ok([0.0, 0.0]);
    }
    Ok(solve_boundary_riemann(model, k, right_trace, left_trace)?.sigma)
}

/// Linear functional `V = Σ |σ_i| e^{-γx_i}` plus the boundary term at `x = 0`.
pub fn glimm_v(model: &FluxModel, state: &SolutionState, k: &Mat2, params: &FunctionalParams) -> Result<f64> {
    let interior: f64 = state
        .fronts
        .iter()
        .map(|f| params.scaled(f.family, f.sigma) * (-params.gamma * f.x).exp())
        .sum();
    let b = boundary_strengths(model, k, state.right_trace(), state.leftmost_state)?;
    Ok(interior + params.scaled(Family::One, b[0]) + params.scaled(Family::Two, b[1]))
}

struct Weighted {
    family: Family,
    shock: bool,
    w: f64,
}

/// Sum over ordered approaching pairs in list order, in O(n).
fn approaching_sum(items: impl Iterator<Item = Weighted>) -> f64 {
    // running totals behind the current front: [family][all, shocks]
    let mut behind = [[0.0f64; 2]; 2];
    let mut q = 0.0;
    for it in items {
        let same = &behind[it.family.index()];
        let same_family = if it.shock { same[0] } else { same[1] };
        let transversal = if it.family == Family::One {
            behind[Family::Two.index()][0]
        } else {
            0.0
        };
        q += it.w * (same_family + transversal);
        let slot = &mut behind[it.family.index()];
        slot[0] += it.w;
        if it.shock {
            slot[1] += it.w;
        }
    }
    q
}

/// Quadratic functional over approaching pairs: a 2-front behind a 1-front,
/// or two same-family fronts of which at least one is a shock.
pub fn glimm_q(state: &SolutionState, params: &FunctionalParams) -> f64 {
    approaching_sum(state.fronts.iter().map(|f| Weighted {
        family: f.family,
        shock: f.sigma < 0.0,
        w: params.scaled(f.family, f.sigma) * (-params.gamma * f.x).exp(),
    }))
}

/// `J`, `V`, `Q` and `TV*` of a state.
pub fn evaluate(
    model: &FluxModel,
    state: &SolutionState,
    k: &Mat2,
    params: &FunctionalParams,
) -> Result<FunctionalValues> {
    let v = glimm_v(model, state, k, params)?;
    let mut q = glimm_q(state, params);
    if params.include_boundary_in_q {
        let b = boundary_strengths(model, k, state.right_trace(), state.leftmost_state)?;
        let virt = Family::BOTH.into_iter().filter(|f| b[f.index()] != 0.0).map(|f| Weighted {
            family: f,
            shock: b[f.index()] < 0.0,
            w: params.scaled(f, b[f.index()]),
        });
        let all = virt.chain(state.fronts.iter().map(|f| Weighted {
            family: f.family,
            shock: f.sigma < 0.0,
            w: params.scaled(f.family, f.sigma) * (-params.gamma * f.x).exp(),
        }));
        q = approaching_sum(all);
    }
    Ok(FunctionalValues {
        t: state.t,
        v,
        q,
        j: v + params.c0 * q,
        tv_star: state.tv_star(k),
    })
}

/// Functional values of piecewise-constant data, every jump resolved into its
/// two Riemann waves at the jump location.
pub fn evaluate_piecewise(
    model: &FluxModel,
    u: &PiecewiseConstant,
    k: &Mat2,
    params: &FunctionalParams,
) -> Result<FunctionalValues> {
    let mut waves = Vec::new();
    for (x, ul, ur) in u.jumps() {
        let sol = solve_riemann(model, ul, ur)?;
        for fam in Family::BOTH {
            let s = sol.sigma(fam);
            if s != 0.0 {
                waves.push((x, fam, s));
            }
        }
    }
    let b = boundary_strengths(model, k, u.right_trace(), u.left_trace())?;
    let weight = |x: f64| (-params.gamma * x).exp();
    let v = waves
        .iter()
        .map(|&(x, f, s)| params.scaled(f, s) * weight(x))
        .sum::<f64>()
        + params.scaled(Family::One, b[0])
        + params.scaled(Family::Two, b[1]);
    let virt: Vec<(f64, Family, f64)> = if params.include_boundary_in_q {
        Family::BOTH
            .into_iter()
            .filter(|f| b[f.index()] != 0.0)
            .map(|f| (0.0, f, b[f.index()]))
            .collect()
    } else {
        Vec::new()
    };
    let q = approaching_sum(virt.iter().chain(waves.iter()).map(|&(x, f, s)| Weighted {
        family: f,
        shock: s < 0.0,
        w: params.scaled(f, s) * weight(x),
    }));
    Ok(FunctionalValues {
        t: 0.0,
        v,
        q,
        j: v + params.c0 * q,
        tv_star: u.tv_star(k),
    })
}

/// Unweighted `V` and `Q` restricted to fronts with `x_i >= cutoff`.
pub fn cutoff_functionals(state: &SolutionState, cutoff: f64, params: &FunctionalParams) -> (f64, f64) {
    let kept: Vec<&Front> = state.fronts.iter().filter(|f| f.x >= cutoff).collect();
    let v = kept.iter().map(|f| params.scaled(f.family, f.sigma)).sum();
    let q = approaching_sum(kept.iter().map(|f| Weighted {
        family: f.family,
        shock: f.kind == FrontKind::Shock,
        w: params.scaled(f.family, f.sigma),
    }));
    (v, q)
}

/// One failed check of the decay monitor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: DecayCheck,
    pub event_index: usize,
    pub t: f64,
    /// Negative: amount by which the bound is exceeded.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayCheck {
    /// `J(t⁻_{k+1}) <= e^{-c*γ Δt} J(t⁺_k)`.
    InterEvent,
    /// `J(t⁺) <= J(t⁻)` at interior events.
    Interior,
    /// `ΔJ <= |σ̂|(-ε + c₀ V(t⁻))` at boundary events.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub events_checked: usize,
    /// Interior events where `2 C_δ e^{2γL} V(t⁻) > 1`, so no bound applies.
    pub interior_skipped: usize,
    /// Smallest relative margin of each check (`+∞` when never exercised).
    pub worst_margin: [f64; 3],
    /// Least-squares rate of `ln J` against `t`.
    pub fitted_rate: Option<f64>,
    pub expected_rate: f64,
    pub violations: Vec<Violation>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Least-squares slope of `ln y` against `t`, over the samples with `y > 0`;
/// returns the decay rate `-slope`.
pub fn fit_decay_rate(samples: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .into_iter()
        .filter(|&(_, y)| y > 0.0 && y.is_finite())
        .map(|(t, y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}

/// Checks the three decay statements along an event log. `end` is the value
/// at the final time, after the last event.
pub fn monitor_decay(
    events: &[EventRecord],
    end: Option<FunctionalValues>,
    params: &FunctionalParams,
) -> DecayReport {
    let mut report = DecayReport {
        events_checked: events.len(),
        interior_skipped: 0,
        worst_margin: [f64::INFINITY; 3],
        fitted_rate: None,
        expected_rate: params.nu,
        violations: Vec::new(),
    };
    let note = |report: &mut DecayReport, check: DecayCheck, idx: usize, t: f64, slack: f64, scale: f64| {
        let rel = slack / scale.max(f64::MIN_POSITIVE);
        let slot = &mut report.worst_margin[check as usize];
        *slot = slot.min(rel);
        if slack < -(MONITOR_REL_TOL * scale + MONITOR_ABS_TOL) {
            report.violations.push(Violation {
                check,
                event_index: idx,
                t,
                margin: slack,
            });
        }
    };
    let rate = params.c_star * params.gamma;
    for (idx, ev) in events.iter().enumerate() {
        if idx > 0 {
            let prev = &events[idx - 1];
            let bound = (-rate * (ev.t - prev.t)).exp() * prev.after.j;
            note(&mut report, DecayCheck::InterEvent, idx, ev.t, bound - ev.before.j, prev.after.j);
        }
        match ev.event_type {
            EventType::Init => {}
            EventType::InteriorSameFamily | EventType::InteriorTransversal => {
                if 2.0 * params.c_delta * (2.0 * params.gamma * params.length).exp() * ev.before.v <= 1.0 {
                    note(&mut report, DecayCheck::Interior, idx, ev.t, ev.before.j - ev.after.j, ev.before.j);
                } else {
                    report.interior_skipped += 1;
                }
            }
            EventType::BoundaryHit => {
                let hat: f64 = ev
                    .incoming
                    .iter()
                    .map(|&(f, s)| params.scaled(f, s))
                    .sum();
                let bound = hat * (-params.epsilon + params.c0 * ev.before.v);
                note(&mut report, DecayCheck::Boundary, idx, ev.t, bound - (ev.after.j - ev.before.j), ev.before.j);
            }
        }
    }
    if let (Some(last), Some(end)) = (events.last(), end) {
        if end.t > last.t {
            let bound = (-rate * (end.t - last.t)).exp() * last.after.j;
            note(&mut report, DecayCheck::InterEvent, events.len(), end.t, bound - end.j, last.after.j);
        }
    }
    let samples = events.iter().map(|e| (e.t, e.after.j)).chain(end.map(|e| (e.t, e.j)));
    report.fitted_rate = fit_decay_rate(samples);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn unit_params(gamma: f64) -> FunctionalParams {
        let mut p = FunctionalParams {
            length: 1.0,
            delta0: 0.3,
            c_star: 0.5,
            gamma,
            epsilon: 0.05,
            c0: 0.0,
            c_delta: 1.0,
            nu: 0.0,
            m_speed: 3.0,
            alpha: 1.0,
            feedback_bound: 0.0,
            include_boundary_in_q: false,
        };
        p.refresh();
        p
    }

    fn front(x: f64, family: Family, sigma: f64) -> Front {
        Front {
            id: 0,
            x,
            speed: 1.0,
            exact_speed: 1.0,
            family,
            kind: if sigma < 0.0 { FrontKind::Shock } else { FrontKind::Rarefaction },
            sigma,
            ul: StateVec::ZERO,
            ur: StateVec::ZERO,
            birth_time: 0.0,
            segment_start: (0.0, x),
        }
    }

    fn state(fronts: Vec<Front>) -> SolutionState {
        let mut s = SolutionState::new(StateVec::ZERO, 0.1);
        s.fronts = fronts;
        s
    }

    #[test]
    fn v_single_front() {
        let model = FluxModel::decoupled_burgers();
        let p = unit_params(0.4);
        let s = state(vec![front(0.5, Family::One, 0.1)]);
        let v = glimm_v(&model, &s, &Mat2::ZERO, &p).unwrap();
        assert_abs_diff_eq!(v, 0.1 * (-0.2f64).exp(), epsilon = 1e-15);
        assert_eq!(glimm_v(&model, &state(vec![]), &Mat2::ZERO, &p).unwrap(), 0.0);
    }

    #[test]
    fn q_examples() {
        let p = unit_params(0.0);
        assert_eq!(glimm_q(&state(vec![front(0.5, Family::One, 0.1)]), &p), 0.0);
        let pair = state(vec![front(0.2, Family::Two, 0.03), front(0.6, Family::One, -0.05)]);
        assert_abs_diff_eq!(glimm_q(&pair, &p), 0.03 * 0.05, epsilon = 1e-16);
        let rare = state(vec![front(0.2, Family::One, 0.03), front(0.6, Family::One, 0.05)]);
        assert_eq!(glimm_q(&rare, &p), 0.0);
        // a 1-front behind a 2-front is not approaching
        let apart = state(vec![front(0.2, Family::One, 0.03), front(0.6, Family::Two, 0.05)]);
        assert_eq!(glimm_q(&apart, &p), 0.0);
    }

    #[test]
    fn q_matches_quadratic_enumeration() {
        let p = unit_params(0.7);
        let fams = [Family::One, Family::Two];
        let fronts: Vec<Front> = (0..9)
            .map(|i| {
                let s = if i % 3 == 0 { -0.01 * i as f64 - 0.01 } else { 0.02 };
                front(0.1 * i as f64, fams[(i * 7 + 1) % 2], s)
            })
            .collect();
        let mut brute = 0.0;
        for (i, a) in fronts.iter().enumerate() {
            for b in &fronts[..i] {
                let approaching = (a.family == Family::One && b.family == Family::Two)
                    || (a.family == b.family && (a.sigma < 0.0 || b.sigma < 0.0));
                if approaching {
                    brute += a.sigma.abs() * (-0.7 * a.x).exp() * b.sigma.abs() * (-0.7 * b.x).exp();
                }
            }
        }
        assert_abs_diff_eq!(glimm_q(&state(fronts), &p), brute, epsilon = 1e-15);
    }

    #[test]
    fn cutoff_excludes_left_front() {
        let p = unit_params(0.4);
        let s = state(vec![front(0.2, Family::One, -0.05), front(0.6, Family::One, -0.02)]);
        let (v, q) = cutoff_functionals(&s, 0.0, &p);
        assert_abs_diff_eq!(v, 0.07, epsilon = 1e-16);
        assert_abs_diff_eq!(q, 0.001, epsilon = 1e-16);
        let (v, q) = cutoff_functionals(&s, 0.4, &p);
        assert_abs_diff_eq!(v, 0.02, epsilon = 1e-16);
        assert_eq!(q, 0.0);
        assert_eq!(cutoff_functionals(&s, 1.0, &p), (0.0, 0.0));
    }

    #[test]
    fn parameters_for_k_a() {
        let model = FluxModel::decoupled_burgers();
        let ka = |a: f64| Mat2::new(a, a, a, a);
        let p = select_parameters(&model, &ka(0.3), 1.0, &SelectionOptions::default()).unwrap();
        assert_abs_diff_eq!(p.alpha, 1.0, epsilon = 1e-12);
        assert!(p.feedback_bound < p.feedback_margin());
        assert!(p.gamma <= 0.41 && p.epsilon <= 0.05);
        assert!((-p.gamma).exp() - p.epsilon > 0.6);
        assert_abs_diff_eq!(p.feedback_bound, 0.6, epsilon = 1e-6);
        assert_abs_diff_eq!(p.nu, p.c_star * p.gamma, epsilon = 1e-15);
        match select_parameters(&model, &ka(0.6), 1.0, &SelectionOptions::default()) {
            Err(Error::NoFeasibleParams { rho1 }) => assert_abs_diff_eq!(rho1, 1.2, epsilon = 1e-12),
            other => panic!("expected NoFeasibleParams, got {other:?}"),
        }
        let p0 = select_parameters(&model, &Mat2::ZERO, 1.0, &SelectionOptions::default()).unwrap();
        assert_eq!(p0.feedback_bound, 0.0);
    }

    #[test]
    fn fitted_rate_of_exponential() {
        let r = fit_decay_rate((0..20).map(|i| (i as f64 * 0.5, 3.0 * (-0.7 * i as f64 * 0.5).exp())));
        assert_abs_diff_eq!(r.unwrap(), 0.7, epsilon = 1e-12);
        assert_eq!(fit_decay_rate([(0.0, 0.0)]), None);
    }

    #[test]
    fn empty_log_passes() {
        let r = monitor_decay(&[], None, &unit_params(0.4));
        assert!(r.passed());
    }
}
