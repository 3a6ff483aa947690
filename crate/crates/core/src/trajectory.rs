//! Space-time record of a run: every front segment and the history of the
//! inflow state. Reconstructs `u_h(t, ·)` exactly at any time.

use serde::{Deserialize, Serialize};

use crate::flux_model::{Family, FluxModel};
use crate::front_tracking::{Front, FrontKind};
use crate::linalg::{StateVec, GAUSS_LEGENDRE_5};
use crate::piecewise::PiecewiseConstant;

/// A front travelling in a straight line over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: u64,
    pub family: Family,
    pub kind: FrontKind,
    pub sigma: f64,
    pub ul: StateVec,
    pub ur: StateVec,
    pub t0: f64,
    pub x0: f64,
    pub t1: f64,
    pub speed: f64,
}

impl Segment {
    /// The current segment of `front`, ending at time `t1`.
    pub fn from_front(front: &Front, t1: f64) -> Self {
        let (t0, x0) = front.segment_start;
        Segment {
            id: front.id,
            family: front.family,
            kind: front.kind,
            sigma: front.sigma,
            ul: front.ul,
            ur: front.ur,
            t0,
            x0,
            t1,
            speed: front.speed,
        }
    }

    #[inline]
    pub fn position(&self, t: f64) -> f64 {
        self.x0 + self.speed * (t - self.t0)
    }

    pub fn x1(&self) -> f64 {
        self.position(self.t1)
    }

    fn alive_at(&self, t: f64, t_end: f64) -> bool {
        self.t0 <= t && (t < self.t1 || (t == t_end && self.t1 == t_end))
    }
}

/// A front moved instantly between `x0` and `x1` by a merge; on `(x0, x1)` the
/// state changed by `delta` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub t: f64,
    pub x0: f64,
    pub x1: f64,
    pub delta: StateVec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub length: f64,
    pub t_end: f64,
    pub segments: Vec<Segment>,
    /// `(t, u(t, 0+))` after every change of the inflow state.
    pub leftmost: Vec<(f64, StateVec)>,
    pub shifts: Vec<Shift>,
}

impl Trajectory {
    pub fn new(length: f64) -> Self {
        Trajectory {
            length,
            ..Default::default()
        }
    }

    fn leftmost_at(&self, t: f64) -> StateVec {
        let idx = self.leftmost.partition_point(|&(s, _)| s <= t);
        self.leftmost[idx.saturating_sub(1)].1
    }

    /// `u_h(t, ·)`; at an event time the state just after the event.
    pub fn state_at(&self, t: f64) -> PiecewiseConstant {
        let mut alive: Vec<(f64, f64, StateVec)> = self
            .segments
            .iter()
            .filter(|s| s.alive_at(t, self.t_end))
            .map(|s| (s.position(t), s.speed, s.ur))
            .collect();
        alive.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut breakpoints: Vec<f64> = Vec::with_capacity(alive.len());
        let mut values = vec![self.leftmost_at(t)];
        for (x, _, ur) in alive {
            if x <= 0.0 {
                *values.last_mut().unwrap() = ur;
            } else if x >= self.length {
                break;
            } else if breakpoints.last().is_some_and(|&last| x <= last) {
                *values.last_mut().unwrap() = ur;
            } else {
                breakpoints.push(x);
                values.push(ur);
            }
        }
        PiecewiseConstant {
            length: self.length,
            breakpoints,
            values,
        }
        .simplified()
    }

    /// Total variation of `t ↦ u_h(t, x)` over `(0, T)`.
    pub fn sideways_tv(&self, x: f64, t_max: f64) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.speed > 0.0 && s.x0 <= x && x < s.x1())
            .filter(|s| {
                let tc = s.t0 + (x - s.x0) / s.speed;
                tc > 0.0 && tc < t_max && tc < s.t1
            })
            .map(|s| (s.ur - s.ul).norm_inf())
            .sum()
    }

    /// `∬ (u_h φ_t + f(u_h) φ_x) dx dt` for `φ` vanishing near the boundary
    /// of `(0, T) × (0, L)`, computed as `Σ ∫ φ (s[u] - [f]) dt` along the fronts
    /// plus the instantaneous changes left by merges.
    pub fn weak_residual(&self, model: &FluxModel, phi: &dyn Fn(f64, f64) -> f64) -> StateVec {
        let mut total = StateVec::ZERO;
        for s in &self.segments {
            let dt = s.t1 - s.t0;
            if dt <= 0.0 {
                continue;
            }
            let jump = s.speed * (s.ur - s.ul) - (model.flux(s.ur) - model.flux(s.ul));
            let pieces = ((dt / 0.01).ceil() as usize).max(1);
            let step = dt / pieces as f64;
            let mut integral = 0.0;
            for p in 0..pieces {
                let a = s.t0 + p as f64 * step;
                for &(node, w) in GAUSS_LEGENDRE_5.iter() {
                    let t = a + node * step;
                    integral += w * step * phi(t, s.position(t));
                }
            }
            total += integral * jump;
        }
        for sh in &self.shifts {
            let width = sh.x1 - sh.x0;
            let integral: f64 = GAUSS_LEGENDRE_5
                .iter()
                .map(|&(node, w)| w * width * phi(sh.t, sh.x0 + node * width))
                .sum();
            total += -integral * sh.delta;
        }
        total
    }
}

/// Smooth bump `b(s) = exp(-1/(1-s²))` on `|s| < 1`.
pub fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `b'(s)`.
pub fn bump_derivative(s: f64) -> f64 {
    if s.abs() < 1.0 {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s / (d * d))
    } else {
        0.0
    }
}

/// Tensor bump centred at `(tc, xc)` with half-widths `(wt, wx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTest {
    pub tc: f64,
    pub xc: f64,
    pub wt: f64,
    pub wx: f64,
}

impl BumpTest {
    pub fn phi(&self, t: f64, x: f64) -> f64 {
        bump((t - self.tc) / self.wt) * bump((x - self.xc) / self.wx)
    }

    pub fn phi_t(&self, t: f64, x: f64) -> f64 {
        bump_derivative((t - self.tc) / self.wt) / self.wt * bump((x - self.xc) / self.wx)
    }

    pub fn phi_x(&self, t: f64, x: f64) -> f64 {
        bump((t - self.tc) / self.wt) * bump_derivative((x - self.xc) / self.wx) / self.wx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seg(x0: f64, t0: f64, t1: f64, speed: f64, ul: f64, ur: f64) -> Segment {
        Segment {
            id: 0,
            family: Family::One,
            kind: FrontKind::Shock,
            sigma: ur - ul,
            ul: StateVec::new(ul, 0.0),
            ur: StateVec::new(ur, 0.0),
            t0,
            x0,
            t1,
            speed,
        }
    }

    #[test]
    fn reconstructs_state() {
        let mut tr = Trajectory::new(1.0);
        tr.t_end = 1.0;
        tr.leftmost.push((0.0, StateVec::ZERO));
        tr.segments.push(seg(0.2, 0.0, 1.0, 0.5, 0.0, 0.1));
        let u = tr.state_at(0.4);
        assert_eq!(u.breakpoints, vec![0.4]);
        assert_eq!(u.values[1], StateVec::new(0.1, 0.0));
        // at t_end the front is still present
        assert_eq!(tr.state_at(1.0).breakpoints.len(), 1);
    }

    #[test]
    fn sideways_counts_single_crossing() {
        let mut tr = Trajectory::new(1.0);
        tr.segments.push(seg(0.0, 0.0, 1.0, 1.0, 0.0, -0.2));
        assert_abs_diff_eq!(tr.sideways_tv(0.5, 2.0), 0.2);
        assert_eq!(tr.sideways_tv(0.5, 0.4), 0.0);
        assert_eq!(Trajectory::new(1.0).sideways_tv(0.5, 1.0), 0.0);
    }

    #[test]
    fn rankine_hugoniot_shock_has_no_residual() {
        let model = FluxModel::decoupled_burgers();
        // Burgers shock 0.1 -> -0.1 travels at 1.0
        let mut tr = Trajectory::new(1.0);
        tr.segments.push(seg(0.2, 0.0, 0.8, 1.0, 0.1, -0.1));
        let test = BumpTest { tc: 0.4, xc: 0.6, wt: 0.3, wx: 0.3 };
        let r = tr.weak_residual(&model, &|t, x| test.phi(t, x));
        assert!(r.norm_inf() < 1e-15);
        // a wrong speed leaves a residual
        tr.segments[0].speed = 1.1;
        assert!(tr.weak_residual(&model, &|t, x| test.phi(t, x)).norm_inf() > 1e-4);
    }
}
