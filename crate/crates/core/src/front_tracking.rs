//! Event-driven wave-front tracking on `[0, L]` with boundary feedback.
//!
//! Fronts travel in straight lines between events. At an interior collision
//! the Riemann problem between the outer states is re-solved; at `x = L` the
//! arriving front is removed and the boundary Riemann problem between
//! `K u(L-)` and `u(0+)` emits new fronts at `x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_model::{Family, FluxModel};
use crate::functionals::{evaluate, evaluate_piecewise, FunctionalParams, FunctionalValues};
use crate::linalg::{Mat2, StateVec};
use crate::piecewise::PiecewiseConstant;
use crate::trajectory::{Segment, Shift, Trajectory};
use crate::wave_curves::{
    lax_admissible, rarefaction_curve, shock_speed, solve_riemann,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontKind {
    Shock,
    Rarefaction,
}

/// One moving discontinuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub id: u64,
    pub x: f64,
    pub speed: f64,
    /// Speed before any perturbation.
    pub exact_speed: f64,
    pub family: Family,
    pub kind: FrontKind,
    pub sigma: f64,
    pub ul: StateVec,
    pub ur: StateVec,
    pub birth_time: f64,
    /// `(t, x)` where the current straight segment started.
    pub segment_start: (f64, f64),
}

impl Front {
    fn new(family: Family, sigma: f64, ul: StateVec, ur: StateVec, speed: f64, t: f64, x: f64) -> Self {
        Front {
            id: 0,
            x,
            speed,
            exact_speed: speed,
            family,
            kind: if sigma < 0.0 { FrontKind::Shock } else { FrontKind::Rarefaction },
            sigma,
            ul,
            ur,
            birth_time: t,
            segment_start: (t, x),
        }
    }
}

/// The piecewise-constant approximation `u_h(t, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub t: f64,
    /// Value on `(0, x_1)`.
    pub leftmost_state: StateVec,
    /// Ordered by position.
    pub fronts: Vec<Front>,
    pub h: f64,
    pub event_count: usize,
    next_id: u64,
}

impl SolutionState {
    pub fn new(leftmost_state: StateVec, h: f64) -> Self {
        SolutionState {
            t: 0.0,
            leftmost_state,
            fronts: Vec::new(),
            h,
            event_count: 0,
            next_id: 0,
        }
    }

    /// `u(L-)`.
    pub fn right_trace(&self) -> StateVec {
        self.fronts.last().map_or(self.leftmost_state, |f| f.ur)
    }

    pub fn front_count(&self) -> usize {
        self.fronts.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.fronts
            .iter()
            .map(|f| f.ur.norm_inf())
            .fold(self.leftmost_state.norm_inf(), f64::max)
    }

    pub fn total_variation(&self) -> f64 {
        self.fronts.iter().map(|f| (f.ur - f.ul).norm_inf()).sum()
    }

    pub fn tv_star(&self, k: &Mat2) -> f64 {
        self.total_variation() + self.boundary_residual(k)
    }

    /// `|K u(L-) - u(0+)|∞`.
    pub fn boundary_residual(&self, k: &Mat2) -> f64 {
        (k.mul_vec(self.right_trace()) - self.leftmost_state).norm_inf()
    }

    pub fn max_rarefaction(&self) -> f64 {
        self.fronts
            .iter()
            .filter(|f| f.kind == FrontKind::Rarefaction)
            .map(|f| f.sigma)
            .fold(0.0, f64::max)
    }

    /// Largest mismatch between neighbouring side states.
    pub fn gluing_defect(&self) -> f64 {
        let mut prev = self.leftmost_state;
        let mut worst: f64 = 0.0;
        for f in &self.fronts {
            worst = worst.max((f.ul - prev).norm_inf());
            prev = f.ur;
        }
        worst
    }

    pub fn positions_sorted(&self) -> bool {
        self.fronts.windows(2).all(|w| w[0].x <= w[1].x)
    }

    pub fn to_piecewise(&self, length: f64) -> PiecewiseConstant {
        let mut breakpoints: Vec<f64> = Vec::with_capacity(self.fronts.len());
        let mut values = vec![self.leftmost_state];
        for f in &self.fronts {
            if f.x <= 0.0 {
                *values.last_mut().unwrap() = f.ur;
                continue;
            }
            if f.x >= length {
                break;
            }
            match breakpoints.last() {
                Some(&last) if f.x <= last => *values.last_mut().unwrap() = f.ur,
                _ => {
                    breakpoints.push(f.x);
                    values.push(f.ur);
                }
            }
        }
        PiecewiseConstant {
            length,
            breakpoints,
            values,
        }
        .simplified()
    }

    fn adopt(&mut self, mut fronts: Vec<Front>) -> Vec<Front> {
        for f in &mut fronts {
            f.id = self.next_id;
            self.next_id += 1;
        }
        fronts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EventKind {
    /// Fronts `left` and `left + 1` meet.
    Collision { left: usize },
    /// The rightmost front reaches `x = L`.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub dt: f64,
    pub x: f64,
    pub kind: EventKind,
}

impl Event {
    fn involves(&self, n: usize) -> [Option<usize>; 2] {
        match self.kind {
            EventKind::Collision { left } => [Some(left), Some(left + 1)],
            EventKind::Boundary => [Some(n - 1), None],
        }
    }
}

/// All pending events: adjacent collisions and the boundary arrival.
pub fn candidate_events(state: &SolutionState, length: f64) -> Vec<Event> {
    let mut out = Vec::new();
    for (i, w) in state.fronts.windows(2).enumerate() {
        let closing = w[0].speed - w[1].speed;
        if closing > 0.0 {
            let dt = ((w[1].x - w[0].x) / closing).max(0.0);
            out.push(Event {
                dt,
                x: w[0].x + w[0].speed * dt,
                kind: EventKind::Collision { left: i },
            });
        }
    }
    if let Some(last) = state.fronts.last() {
        out.push(Event {
            dt: ((length - last.x) / last.speed).max(0.0),
            x: length,
            kind: EventKind::Boundary,
        });
    }
    out
}

/// The soonest pending event.
pub fn next_event(state: &SolutionState, length: f64) -> Result<Event> {
    candidate_events(state, length)
        .into_iter()
        .min_by(|a, b| a.dt.total_cmp(&b.dt))
        .ok_or(Error::NoEvent)
}

/// Single front for `σ <= h`, otherwise `p = ⌈σ/h⌉` fronts of strength `σ/p`,
/// front `j` travelling at `λ_k(u_j)`. Shocks are always a single front.
pub fn build_fan(
    model: &FluxModel,
    family: Family,
    sigma: f64,
    u_minus: StateVec,
    h: f64,
    origin: (f64, f64),
) -> Result<Vec<Front>> {
    let (t, x) = origin;
    if sigma < 0.0 {
        let (ur, speed) = crate::wave_curves::shock_curve(model, family, sigma, u_minus)?;
        return Ok(vec![Front::new(family, sigma, u_minus, ur, speed, t, x)]);
    }
    let p = if sigma <= h { 1 } else { (sigma / h).ceil() as usize };
    let piece = sigma / p as f64;
    let mut fronts = Vec::with_capacity(p);
    let mut u = u_minus;
    for _ in 0..p {
        let next = rarefaction_curve(model, family, piece, u)?;
        let speed = model.lambda(family, next)?;
        fronts.push(Front::new(family, piece, u, next, speed, t, x));
        u = next;
    }
    Ok(fronts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Init,
    InteriorSameFamily,
    InteriorTransversal,
    BoundaryHit,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Init => "init",
            EventType::InteriorSameFamily => "interior_same_family",
            EventType::InteriorTransversal => "interior_transversal",
            EventType::BoundaryHit => "boundary_hit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub x: f64,
    pub event_type: EventType,
    /// Family and strength of each incoming front, left to right.
    pub incoming: Vec<(Family, f64)>,
    /// Total outgoing strength per family.
    pub outgoing: [f64; 2],
    pub before: FunctionalValues,
    pub after: FunctionalValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerOptions {
    /// Guard on the number of fronts.
    pub front_cap: usize,
    /// Outgoing waves with `|σ| <= min_strength` are dropped and the
    /// neighbouring states glued together.
    pub min_strength: f64,
    /// Events closer than this in time count as simultaneous.
    pub tie_tolerance: f64,
    /// Largest `j` in the perturbation amounts `h·2⁻ʲ`.
    pub max_perturbation_level: u32,
    /// Adjacent same-family fronts closer than `coalesce_fraction · h` are
    /// merged at the position of the right one; 0 disables merging.
    pub coalesce_fraction: f64,
    /// Largest other-family strength a merge may discard.
    pub coalesce_tolerance: f64,
    /// Record the full space-time trajectory.
    pub record_trajectory: bool,
}

impl Default for TrackerOptions {
    fn default() -> Self {
        TrackerOptions {
            front_cap: 100_000,
            min_strength: 1e-13,
            tie_tolerance: 1e-10,
            max_perturbation_level: 40,
            coalesce_fraction: 0.5,
            coalesce_tolerance: 1e-8,
            record_trajectory: true,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// No fronts remain and the state is constant.
    Steady { t: f64 },
    GuardTripped {
        t: f64,
        reason: String,
        sup_norm: f64,
        front_count: usize,
    },
}

/// Per-event time-series sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub values: FunctionalValues,
    pub max_rarefaction: f64,
    pub front_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub status: RunStatus,
    pub events: Vec<EventRecord>,
    pub series: Vec<SeriesRow>,
    pub final_state: SolutionState,
    /// Values at the time the run stopped.
    pub end_values: FunctionalValues,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub perturbations: usize,
    pub dropped_strength: f64,
    pub max_rarefaction_ratio: f64,
    pub max_boundary_residual: f64,
    pub max_gluing_defect: f64,
    pub min_speed: f64,
    pub inadmissible_shocks: usize,
}

/// Fixed context of a front-tracking run.
#[derive(Debug, Clone)]
pub struct FrontTracker<'m> {
    pub model: &'m FluxModel,
    pub k: Mat2,
    pub length: f64,
    pub h: f64,
    pub params: FunctionalParams,
    pub options: TrackerOptions,
}

struct Bookkeeping {
    trajectory: Trajectory,
    dropped: f64,
    inadmissible: usize,
}

impl Bookkeeping {
    fn retire(&mut self, f: &Front, t: f64, record: bool) {
        if record {
            self.trajectory.segments.push(Segment::from_front(f, t));
        }
    }
}

impl<'m> FrontTracker<'m> {
    pub fn new(model: &'m FluxModel, k: Mat2, length: f64, h: f64, params: FunctionalParams) -> Self {
        FrontTracker {
            model,
            k,
            length,
            h,
            params,
            options: TrackerOptions::default(),
        }
    }

    pub fn with_options(mut self, options: TrackerOptions) -> Self {
        self.options = options;
        self
    }

    pub fn values(&self, state: &SolutionState) -> Result<FunctionalValues> {
        evaluate(self.model, state, &self.k, &self.params)
    }

    /// Fronts for the Riemann problem `ul → ur` at `(t, x)`: shocks single,
    /// rarefactions of the families in `fan` split into fans, the others
    /// single fronts. Weak waves are dropped; the outer states are kept exact.
    fn emit(
        &self,
        ul: StateVec,
        ur: StateVec,
        t: f64,
        x: f64,
        fan: [bool; 2],
        book: &mut Bookkeeping,
    ) -> Result<(Vec<Front>, [f64; 2])> {
        let sol = solve_riemann(self.model, ul, ur)?;
        let mut fronts = Vec::new();
        let mut start = ul;
        for fam in Family::BOTH {
            let sigma = sol.sigma(fam);
            if sigma.abs() <= self.options.min_strength {
                book.dropped += sigma.abs();
                continue;
            }
            let target = if fam == Family::One { sol.middle_state } else { ur };
            let h = if fan[fam.index()] { self.h } else { f64::INFINITY };
            let mut wave = build_fan(self.model, fam, sigma, start, h, (t, x))?;
            let last = wave.last_mut().expect("non-empty wave");
            last.ur = target;
            if last.kind == FrontKind::Shock {
                last.speed = shock_speed(self.model, fam, last.ul, last.ur)?;
                last.exact_speed = last.speed;
                if !lax_admissible(self.model, fam, last.ul, last.ur, last.speed) {
                    book.inadmissible += 1;
                }
            }
            start = target;
            fronts.extend(wave);
        }
        if let Some(last) = fronts.last_mut() {
            last.ur = ur;
        }
        Ok((fronts, sol.sigma))
    }

    fn check_data(&self, u0h: &PiecewiseConstant) -> Result<()> {
        let sup = u0h.sup_norm();
        if sup > self.params.delta0 {
            return Err(Error::DataTooLarge(format!(
                "sup norm {sup} exceeds delta0 = {}",
                self.params.delta0
            )));
        }
        let tv = u0h.tv_star(&self.k);
        let limit = 1.0 / (2.0 * self.params.c_delta * (2.0 * self.params.gamma * self.length).exp());
        if tv > limit {
            return Err(Error::DataTooLarge(format!(
                "TV* = {tv} exceeds the interaction smallness threshold {limit}"
            )));
        }
        Ok(())
    }

    fn initialize_inner(&self, u0h: &PiecewiseConstant, book: &mut Bookkeeping) -> Result<(SolutionState, EventRecord)> {
        self.check_data(u0h)?;
        let before = evaluate_piecewise(self.model, u0h, &self.k, &self.params)?;
        let leftmost = self.k.mul_vec(u0h.right_trace());
        let mut state = SolutionState::new(leftmost, self.h);
        let mut fronts = Vec::new();
        let (at_zero, b) = self.emit(leftmost, u0h.left_trace(), 0.0, 0.0, [true, true], book)?;
        fronts.extend(at_zero);
        let mut outgoing = b;
        for (x, ul, ur) in u0h.jumps() {
            let (wave, s) = self.emit(ul, ur, 0.0, x, [true, true], book)?;
            outgoing[0] += s[0];
            outgoing[1] += s[1];
            fronts.extend(wave);
        }
        reglue(&mut fronts, leftmost, u0h.right_trace());
        state.fronts = state.adopt(fronts);
        book.trajectory.leftmost.push((0.0, leftmost));
        let after = self.values(&state)?;
        let record = EventRecord {
            t: 0.0,
            x: 0.0,
            event_type: EventType::Init,
            incoming: Vec::new(),
            outgoing,
            before,
            after,
        };
        Ok((state, record))
    }

    /// Resolves every initial jump and the boundary Riemann problem.
    pub fn initialize(&self, u0h: &PiecewiseConstant) -> Result<(SolutionState, EventRecord)> {
        let mut book = Bookkeeping {
            trajectory: Trajectory::new(self.length),
            dropped: 0.0,
            inadmissible: 0,
        };
        self.initialize_inner(u0h, &mut book)
    }

    /// Number of pending events within the tie tolerance of the soonest one.
    fn tie_group(&self, events: &[Event]) -> (usize, f64) {
        let first = events.iter().map(|e| e.dt).fold(f64::INFINITY, f64::min);
        let tol = self.options.tie_tolerance;
        (events.iter().filter(|e| e.dt - first <= tol).count(), first)
    }

    fn is_tied(&self, events: &[Event]) -> bool {
        self.tie_group(events).0 > 1
    }

    /// Changes the speed of the newest front involved in the soonest
    /// simultaneous events by the smallest `h·2⁻ʲ` that separates them.
    /// Returns the index of the perturbed front.
    pub fn perturb_speeds(&self, state: &mut SolutionState) -> Result<usize> {
        let events = candidate_events(state, self.length);
        let (group, first) = self.tie_group(&events);
        let tol = self.options.tie_tolerance;
        let n = state.fronts.len();
        let target = events
            .iter()
            .filter(|e| e.dt - first <= tol)
            .flat_map(|e| e.involves(n))
            .flatten()
            .max_by_key(|&i| state.fronts[i].id)
            .ok_or(Error::NoEvent)?;
        let original = state.fronts[target].speed;
        let exact = state.fronts[target].exact_speed;
        for j in (1..=self.options.max_perturbation_level).rev() {
            let amount = self.h * 0.5f64.powi(j as i32);
            for sign in [-1.0, 1.0] {
                let trial = original + sign * amount;
                if (trial - exact).abs() > self.h || trial < self.params.c_star {
                    continue;
                }
                state.fronts[target].speed = trial;
                let ev = candidate_events(state, self.length);
                let (g, soonest) = self.tie_group(&ev);
                if g < group && soonest > tol {
                    return Ok(target);
                }
            }
        }
        state.fronts[target].speed = original;
        Err(Error::CannotSeparate(state.t + first))
    }

    fn advance(&self, state: &mut SolutionState, dt: f64) {
        for f in &mut state.fronts {
            f.x += f.speed * dt;
        }
        state.t += dt;
    }

    fn apply_interior(
        &self,
        state: &mut SolutionState,
        left: usize,
        x: f64,
        book: &mut Bookkeeping,
    ) -> Result<EventRecord> {
        let (a, b) = (&state.fronts[left], &state.fronts[left + 1]);
        if a.family == b.family && a.kind == FrontKind::Rarefaction && b.kind == FrontKind::Rarefaction {
            return Err(Error::Invariant(format!(
                "rarefaction fronts {} and {} of the same family met at t = {}",
                a.id, b.id, state.t
            )));
        }
        state.fronts[left].x = x;
        state.fronts[left + 1].x = x;
        let before = self.values(state)?;
        let (a, b) = (state.fronts[left].clone(), state.fronts[left + 1].clone());
        let same = a.family == b.family;
        // the other family fans out after a same-family merge
        let fan = if same {
            let mut f = [false; 2];
            f[a.family.other().index()] = true;
            f
        } else {
            [false, false]
        };
        let (mut fronts, sigma) = self.emit(a.ul, b.ur, state.t, x, fan, book)?;
        let record_traj = self.options.record_trajectory;
        book.retire(&a, state.t, record_traj);
        book.retire(&b, state.t, record_traj);
        fronts = state.adopt(fronts);
        let count = fronts.len();
        state.fronts.splice(left..left + 2, fronts);
        self.coalesce_window(state, left, left + count, book)?;
        state.event_count += 1;
        let after = self.values(state)?;
        Ok(EventRecord {
            t: state.t,
            x,
            event_type: if same {
                EventType::InteriorSameFamily
            } else {
                EventType::InteriorTransversal
            },
            incoming: vec![(a.family, a.sigma), (b.family, b.sigma)],
            outgoing: sigma,
            before,
            after,
        })
    }

    /// Merges close same-family pairs among fronts `lo - 1 ..= hi`.
    fn coalesce_window(&self, state: &mut SolutionState, lo: usize, hi: usize, book: &mut Bookkeeping) -> Result<()> {
        if self.options.coalesce_fraction <= 0.0 {
            return Ok(());
        }
        let mut i = lo.saturating_sub(1);
        let mut end = hi;
        while i + 1 < state.fronts.len() && i <= end {
            if self.try_coalesce(state, i, book)? {
                end = end.saturating_sub(1);
                i = i.saturating_sub(1);
            } else {
                i += 1;
            }
        }
        Ok(())
    }

    fn try_coalesce(&self, state: &mut SolutionState, i: usize, book: &mut Bookkeeping) -> Result<bool> {
        let (a, b) = (&state.fronts[i], &state.fronts[i + 1]);
        if a.family != b.family || b.x - a.x > self.options.coalesce_fraction * self.h {
            return Ok(false);
        }
        let both_rarefactions = a.kind == FrontKind::Rarefaction && b.kind == FrontKind::Rarefaction;
        if both_rarefactions && a.sigma + b.sigma > self.h {
            return Ok(false);
        }
        let fam = a.family;
        let sol = solve_riemann(self.model, a.ul, b.ur)?;
        let other = sol.sigma(fam.other()).abs();
        if other > self.options.coalesce_tolerance {
            return Ok(false);
        }
        let (a, b) = (a.clone(), b.clone());
        book.dropped += other;
        let sigma = sol.sigma(fam);
        let t = state.t;
        let record = self.options.record_trajectory;
        book.retire(&a, t, record);
        book.retire(&b, t, record);
        // the merged front sits where the total jump keeps the mass of u,
        // as far as the gap between the two fronts allows
        let weight = a.sigma + b.sigma;
        let x = if weight.abs() > f64::EPSILON * (a.sigma.abs() + b.sigma.abs()) {
            ((a.sigma * a.x + b.sigma * b.x) / weight).clamp(a.x, b.x)
        } else {
            0.5 * (a.x + b.x)
        };
        if record {
            let shifts = &mut book.trajectory.shifts;
            if x > a.x {
                shifts.push(Shift { t, x0: a.x, x1: x, delta: a.ul - a.ur });
            }
            if b.x > x {
                shifts.push(Shift { t, x0: x, x1: b.x, delta: b.ur - b.ul });
            }
        }
        if sigma.abs() <= self.options.min_strength {
            book.dropped += sigma.abs();
            state.fronts.drain(i..i + 2);
            if let Some(next) = state.fronts.get_mut(i) {
                next.ul = a.ul;
            }
            return Ok(true);
        }
        let speed = if sigma < 0.0 {
            shock_speed(self.model, fam, a.ul, b.ur)?
        } else {
            self.model.lambda(fam, b.ur)?
        };
        let merged = Front::new(fam, sigma, a.ul, b.ur, speed, t, x);
        if merged.kind == FrontKind::Shock && !lax_admissible(self.model, fam, a.ul, b.ur, speed) {
            book.inadmissible += 1;
        }
        let merged = state.adopt(vec![merged]);
        state.fronts.splice(i..i + 2, merged);
        Ok(true)
    }

    fn apply_boundary(&self, state: &mut SolutionState, book: &mut Bookkeeping) -> Result<EventRecord> {
        let last = state.fronts.len() - 1;
        state.fronts[last].x = self.length;
        let before = self.values(state)?;
        let gone = state.fronts.pop().expect("a front at the boundary");
        book.retire(&gone, state.t, self.options.record_trajectory);
        let trace = gone.ul;
        let u0 = state.leftmost_state;
        let inflow = self.k.mul_vec(trace);
        let (mut fronts, outgoing) = self.emit(inflow, u0, state.t, 0.0, [true, true], book)?;
        if fronts.is_empty() {
            if let Some(first) = state.fronts.first_mut() {
                first.ul = inflow;
            }
        }
        fronts = state.adopt(fronts);
        let count = fronts.len();
        state.leftmost_state = inflow;
        state.fronts.splice(0..0, fronts);
        book.trajectory.leftmost.push((state.t, inflow));
        self.coalesce_window(state, 0, count, book)?;
        state.event_count += 1;
        let after = self.values(state)?;
        Ok(EventRecord {
            t: state.t,
            x: self.length,
            event_type: EventType::BoundaryHit,
            incoming: vec![(gone.family, gone.sigma)],
            outgoing,
            before,
            after,
        })
    }

    /// Collision of fronts `left` and `left + 1`, which must be at the same position.
    pub fn apply_interior_interaction(&self, state: &mut SolutionState, left: usize) -> Result<EventRecord> {
        let mut book = Bookkeeping {
            trajectory: Trajectory::new(self.length),
            dropped: 0.0,
            inadmissible: 0,
        };
        let x = 0.5 * (state.fronts[left].x + state.fronts[left + 1].x);
        self.apply_interior(state, left, x, &mut book)
    }

    /// The rightmost front reaches `x = L`.
    pub fn apply_boundary_event(&self, state: &mut SolutionState) -> Result<EventRecord> {
        let mut book = Bookkeeping {
            trajectory: Trajectory::new(self.length),
            dropped: 0.0,
            inadmissible: 0,
        };
        self.apply_boundary(state, &mut book)
    }

    fn guard(&self, state: &SolutionState) -> Option<String> {
        let sup = state.sup_norm();
        if sup > self.params.delta0 {
            return Some(format!("sup norm {sup} exceeds delta0 = {}", self.params.delta0));
        }
        if state.fronts.len() > self.options.front_cap {
            return Some(format!(
                "front count {} exceeds the cap {}",
                state.fronts.len(),
                self.options.front_cap
            ));
        }
        None
    }

    /// Advances from event to event until `t_final`.
    pub fn run(&self, u0h: &PiecewiseConstant, t_final: f64) -> Result<RunResult> {
        let record = self.options.record_trajectory;
        let mut book = Bookkeeping {
            trajectory: Trajectory::new(self.length),
            dropped: 0.0,
            inadmissible: 0,
        };
        let (mut state, init) = self.initialize_inner(u0h, &mut book)?;
        let mut result_events = vec![init];
        let row = |state: &SolutionState, values: FunctionalValues| SeriesRow {
            values,
            max_rarefaction: state.max_rarefaction(),
            front_count: state.fronts.len(),
        };
        let mut series = vec![row(&state, result_events[0].after)];
        let mut perturbations = 0;
        let mut max_residual: f64 = 0.0;
        let mut max_gluing: f64 = state.gluing_defect();
        let mut max_rare: f64 = state.max_rarefaction();
        let mut min_speed = state.fronts.iter().map(|f| f.speed).fold(f64::INFINITY, f64::min);
        let status = loop {
            if let Some(reason) = self.guard(&state) {
                break RunStatus::GuardTripped {
                    t: state.t,
                    reason,
                    sup_norm: state.sup_norm(),
                    front_count: state.fronts.len(),
                };
            }
            max_residual = max_residual.max(state.boundary_residual(&self.k));
            let events = candidate_events(&state, self.length);
            let Some(ev) = events.iter().copied().min_by(|a, b| a.dt.total_cmp(&b.dt)) else {
                let dt = (t_final - state.t).max(0.0);
                self.advance(&mut state, dt);
                break RunStatus::Steady { t: state.t - dt };
            };
            if state.t + ev.dt > t_final {
                let dt = (t_final - state.t).max(0.0);
                self.advance(&mut state, dt);
                break RunStatus::Completed;
            }
            if self.is_tied(&events) {
                let idx = self.perturb_speeds(&mut state)?;
                perturbations += 1;
                let f = &mut state.fronts[idx];
                // the old segment ends here, a new one starts with the new speed
                let t = state.t;
                if record {
                    let mut old = f.clone();
                    old.speed = f.speed_before_perturbation(t);
                    book.trajectory.segments.push(Segment::from_front(&old, t));
                }
                f.segment_start = (t, f.x);
                continue;
            }
            self.advance(&mut state, ev.dt);
            let rec = match ev.kind {
                EventKind::Collision { left } => self.apply_interior(&mut state, left, ev.x, &mut book)?,
                EventKind::Boundary => self.apply_boundary(&mut state, &mut book)?,
            };
            max_gluing = max_gluing.max(state.gluing_defect());
            max_rare = max_rare.max(state.max_rarefaction());
            for f in &state.fronts {
                if f.birth_time == state.t {
                    min_speed = min_speed.min(f.speed);
                }
            }
            series.push(row(&state, rec.after));
            result_events.push(rec);
        };
        let end_values = self.values(&state)?;
        if record {
            for f in &state.fronts {
                book.trajectory.segments.push(Segment::from_front(f, state.t));
            }
            book.trajectory.t_end = state.t;
        }
        Ok(RunResult {
            status,
            events: result_events,
            series,
            end_values,
            trajectory: book.trajectory,
            perturbations,
            dropped_strength: book.dropped,
            max_rarefaction_ratio: max_rare / self.h,
            max_boundary_residual: max_residual,
            max_gluing_defect: max_gluing,
            min_speed,
            inadmissible_shocks: book.inadmissible,
            final_state: state,
        })
    }
}

impl Front {
    /// Speed of the segment that ends at `t`, recovered from its endpoints.
    fn speed_before_perturbation(&self, t: f64) -> f64 {
        let (t0, x0) = self.segment_start;
        if t > t0 {
            (self.x - x0) / (t - t0)
        } else {
            self.speed
        }
    }
}

/// Makes consecutive side states match exactly, from `left` to `right`.
fn reglue(fronts: &mut [Front], left: StateVec, right: StateVec) {
    let mut prev = left;
    for f in fronts.iter_mut() {
        f.ul = prev;
        prev = f.ur;
    }
    if let Some(last) = fronts.last_mut() {
        last.ur = right;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{select_parameters, SelectionOptions};
    use approx::assert_abs_diff_eq;

    fn burgers_tracker(model: &FluxModel, k: Mat2, h: f64) -> FrontTracker<'_> {
        let params = select_parameters(model, &k, 1.0, &SelectionOptions::default()).unwrap();
        FrontTracker::new(model, k, 1.0, h, params)
    }

    fn bare(x: f64, speed: f64, id: u64) -> Front {
        let mut f = Front::new(Family::One, 0.01, StateVec::ZERO, StateVec::ZERO, speed, 0.0, x);
        f.id = id;
        f
    }

    #[test]
    fn next_event_examples() {
        let mut s = SolutionState::new(StateVec::ZERO, 0.1);
        assert_eq!(next_event(&s, 1.0), Err(Error::NoEvent));
        s.fronts = vec![bare(0.5, 2.0, 0)];
        let e = next_event(&s, 1.0).unwrap();
        assert_abs_diff_eq!(e.dt, 0.25);
        assert_eq!(e.kind, EventKind::Boundary);
        s.fronts = vec![bare(0.2, 2.0, 0), bare(0.5, 1.0, 1)];
        let e = next_event(&s, 1.0).unwrap();
        assert_abs_diff_eq!(e.dt, 0.3, epsilon = 1e-15);
        assert_eq!(e.kind, EventKind::Collision { left: 0 });
    }

    #[test]
    fn fan_examples() {
        let m = FluxModel::decoupled_burgers();
        let one = build_fan(&m, Family::One, 0.05, StateVec::ZERO, 0.1, (0.0, 0.0)).unwrap();
        assert_eq!(one.len(), 1);
        let three = build_fan(&m, Family::One, 0.25, StateVec::ZERO, 0.1, (0.0, 0.0)).unwrap();
        assert_eq!(three.len(), 3);
        for f in &three {
            assert_abs_diff_eq!(f.sigma, 0.25 / 3.0, epsilon = 1e-15);
        }
        let two = build_fan(&m, Family::One, 0.2, StateVec::ZERO, 0.1, (0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(two[0].speed, 1.1, epsilon = 1e-9);
        assert_abs_diff_eq!(two[1].speed, 1.2, epsilon = 1e-9);
        assert_eq!(two[0].ur, two[1].ul);
    }

    #[test]
    fn initialize_splits_rarefaction() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::ZERO, 0.1);
        let u0 = PiecewiseConstant::new(1.0, vec![0.5], vec![StateVec::ZERO, StateVec::new(0.15, 0.0)]).unwrap();
        // K u(L-) = 0 = u(0+): no boundary fronts
        let (s, rec) = tr.initialize(&u0).unwrap();
        assert_eq!(s.fronts.len(), 2);
        for f in &s.fronts {
            assert_abs_diff_eq!(f.sigma, 0.075, epsilon = 1e-9);
            assert_eq!(f.x, 0.5);
        }
        assert_eq!(s.boundary_residual(&Mat2::ZERO), 0.0);
        assert_eq!(rec.event_type, EventType::Init);
        let (z, _) = tr.initialize(&PiecewiseConstant::constant(1.0, StateVec::ZERO)).unwrap();
        assert!(z.fronts.is_empty());
    }

    #[test]
    fn transversal_crossing_is_exact() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::ZERO, 0.1);
        let u0 = PiecewiseConstant::new(
            1.0,
            vec![0.2, 0.4],
            vec![StateVec::new(0.0, 0.0), StateVec::new(0.0, -0.05), StateVec::new(-0.1, -0.05)],
        )
        .unwrap();
        let (mut s, _) = tr.initialize(&u0).unwrap();
        assert_eq!(s.fronts.len(), 2);
        let e = next_event(&s, 1.0).unwrap();
        assert_eq!(e.kind, EventKind::Collision { left: 0 });
        tr.advance(&mut s, e.dt);
        let rec = tr.apply_interior_interaction(&mut s, 0).unwrap();
        assert_eq!(rec.event_type, EventType::InteriorTransversal);
        assert_abs_diff_eq!(rec.outgoing[0], -0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(rec.outgoing[1], -0.05, epsilon = 1e-10);
        assert_eq!(s.fronts[0].family, Family::One);
        assert!(s.gluing_defect() < 1e-9);
    }

    #[test]
    fn shocks_merge() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::ZERO, 0.1);
        let u0 = PiecewiseConstant::new(
            1.0,
            vec![0.2, 0.4],
            vec![StateVec::new(0.0, 0.0), StateVec::new(-0.05, 0.0), StateVec::new(-0.1, 0.0)],
        )
        .unwrap();
        let (mut s, _) = tr.initialize(&u0).unwrap();
        let e = next_event(&s, 1.0).unwrap();
        tr.advance(&mut s, e.dt);
        let rec = tr.apply_interior_interaction(&mut s, 0).unwrap();
        assert_eq!(rec.event_type, EventType::InteriorSameFamily);
        assert_eq!(s.fronts.len(), 1);
        assert_abs_diff_eq!(s.fronts[0].sigma, -0.1, epsilon = 1e-10);
    }

    #[test]
    fn same_family_rarefactions_rejected() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::ZERO, 0.1);
        let mut s = SolutionState::new(StateVec::ZERO, 0.1);
        s.fronts = vec![bare(0.5, 1.2, 0), bare(0.5, 1.1, 1)];
        assert!(matches!(tr.apply_interior_interaction(&mut s, 0), Err(Error::Invariant(_))));
    }

    #[test]
    fn absorbing_boundary_emits_nothing() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::ZERO, 0.1);
        let u0 = PiecewiseConstant::new(1.0, vec![0.5], vec![StateVec::ZERO, StateVec::new(-0.05, 0.0)]).unwrap();
        let (mut s, _) = tr.initialize(&u0).unwrap();
        // the boundary jump K u(L-) = 0 vs u(0+) = 0 is empty, one shock inside
        assert_eq!(s.fronts.len(), 1);
        let e = next_event(&s, 1.0).unwrap();
        tr.advance(&mut s, e.dt);
        let rec = tr.apply_boundary_event(&mut s).unwrap();
        assert_eq!(rec.outgoing, [0.0, 0.0]);
        assert!(s.fronts.is_empty());
        assert_eq!(s.boundary_residual(&Mat2::ZERO), 0.0);
    }

    #[test]
    fn three_fronts_meeting_are_separated() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::ZERO, 0.1);
        let mut s = SolutionState::new(StateVec::ZERO, 0.1);
        // all three reach x = 0.6 at t = 0.2
        s.fronts = vec![bare(0.0, 3.0, 0), bare(0.2, 2.0, 1), bare(0.3, 1.5, 2)];
        let before = candidate_events(&s, 1.0);
        assert!(tr.is_tied(&before));
        let idx = tr.perturb_speeds(&mut s).unwrap();
        assert_eq!(s.fronts[idx].id, 2);
        let after = candidate_events(&s, 1.0);
        let mut times: Vec<f64> = after.iter().map(|e| e.dt).collect();
        times.sort_by(f64::total_cmp);
        assert!(times[1] - times[0] > tr.options.tie_tolerance);
        assert!((s.fronts[idx].speed - s.fronts[idx].exact_speed).abs() <= 0.1);
    }

    #[test]
    fn zero_data_run_is_immediately_steady() {
        let m = FluxModel::decoupled_burgers();
        let tr = burgers_tracker(&m, Mat2::new(0.3, 0.3, 0.3, 0.3), 0.1);
        let r = tr.run(&PiecewiseConstant::constant(1.0, StateVec::ZERO), 5.0).unwrap();
        assert_eq!(r.events.len(), 1);
        assert!(matches!(r.status, RunStatus::Steady { .. }));
    }
}
