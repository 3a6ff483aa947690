//! Matrix-level stability quantities of the feedback matrix `K`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_model::{Family, FluxModel};
use crate::linalg::{Mat2, StateVec};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Norm used in `ρ_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

impl PNorm {
    fn apply(self, m: &Mat2) -> f64 {
        match self {
            PNorm::One => m.norm_1(),
            PNorm::Two => m.norm_2(),
            PNorm::Inf => m.norm_inf(),
        }
    }
}

/// Spectral radius of the entrywise absolute value `|K|`.
pub fn rho1(k: &Mat2) -> f64 {
    let a = k.abs();
    let [[p, q], [r, s]] = a.0;
    let disc = ((p - s) * (p - s) + 4.0 * q * r).max(0.0);
    0.5 * (p + s + disc.sqrt())
}

/// Minimizes a unimodal-ish `g` on `[lo, hi]`: coarse scan, then golden section
/// around the best sample. Returns `(argmin, min)`.
fn scan_then_golden(g: impl Fn(f64) -> f64, lo: f64, hi: f64, coarse: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / coarse as f64;
    let mut best = (lo, g(lo));
    for i in 1..=coarse {
        let s = lo + i as f64 * step;
        let v = g(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - GOLDEN * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + GOLDEN * (b - a);
            gd = g(d);
        }
    }
    let mid = 0.5 * (a + b);
    let gm = g(mid);
    if gm < best.1 {
        (mid, gm)
    } else {
        best
    }
}

/// `inf_{Δ} ‖Δ K Δ⁻¹‖_p` over positive diagonal `Δ = diag(1, d)`, with
/// `log d ∈ [-12, 12]`. Returns `(ρ_p, d)`.
pub fn rho_p_with_scaling(k: &Mat2, p: PNorm) -> (f64, f64) {
    let scaled = |s: f64| {
        let d = s.exp();
        let [[a, b], [c, e]] = k.0;
        p.apply(&Mat2::new(a, b / d, c * d, e))
    };
    let (s, v) = scan_then_golden(scaled, -12.0, 12.0, 480, 1e-8);
    // the symmetric point d = 1 is often optimal; report it on ties
    let at_one = scaled(0.0);
    if at_one <= v + 1e-14 {
        (at_one, 1.0)
    } else {
        (v, s.exp())
    }
}

pub fn rho_p(k: &Mat2, p: PNorm) -> f64 {
    rho_p_with_scaling(k, p).0
}

fn complex_spectral_radius(m: [[Complex64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let root = (tr * tr - 4.0 * det).sqrt();
    ((tr + root) * 0.5).norm().max(((tr - root) * 0.5).norm())
}

fn phased_radius(k: &Mat2, phi: f64) -> f64 {
    let e = Complex64::from_polar(1.0, phi);
    let c = |x: f64| Complex64::new(x, 0.0);
    complex_spectral_radius([[c(k.0[0][0]), c(k.0[0][1])], [e * k.0[1][0], e * k.0[1][1]]])
}

/// `max_{θ₁, θ₂} ρ(diag(e^{iθ₁}, e^{iθ₂}) K)`.
///
/// A common phase does not change the spectral radius, so only `θ₂ - θ₁`
/// is scanned: 720 points, then a second 720-point pass around the maximum.
pub fn rho0(k: &Mat2) -> f64 {
    let n = 720;
    let tau = std::f64::consts::TAU;
    let step = tau / n as f64;
    let mut best = (0.0, phased_radius(k, 0.0));
    for i in 1..n {
        let phi = i as f64 * step;
        let v = phased_radius(k, phi);
        if v > best.1 {
            best = (phi, v);
        }
    }
    let fine = 2.0 * step / n as f64;
    for i in 0..=n {
        let phi = best.0 - step + i as f64 * fine;
        best.1 = best.1.max(phased_radius(k, phi));
    }
    best.1
}

/// Coordinates `M_ik = ℓ_i(0)·K r_k(0)` of `K` in the eigenbasis at the origin.
pub fn eigen_coordinates(model: &FluxModel, k: &Mat2) -> Result<Mat2> {
    let e = model
        .eigen_structure(StateVec::ZERO)
        .map_err(|_| Error::DegenerateEigenbasis)?;
    let mut m = Mat2::ZERO;
    for i in Family::BOTH {
        for j in Family::BOTH {
            m.0[i.index()][j.index()] = e.l(i).dot(&k.mul_vec(e.r(j)));
        }
    }
    if !m.is_finite() {
        return Err(Error::DegenerateEigenbasis);
    }
    Ok(m)
}

/// Verdict of the α-form dissipativity condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition12 {
    pub satisfied: bool,
    /// `inf_α max{|M11| + α|M21|, α⁻¹|M12| + |M22|}`.
    pub value: f64,
    /// `1 - value`.
    pub margin: f64,
    pub alpha_star: f64,
    /// `ρ₁` of the coordinate matrix; equals `value`.
    pub rho1_coordinates: f64,
}

/// Minimizes over `α > 0` the larger of the two column sums after `r₁ → α r₁`.
pub fn condition_from_coordinates(m: &Mat2) -> Condition12 {
    let a = m.abs();
    let g = |alpha: f64| (a.0[0][0] + alpha * a.0[1][0]).max(a.0[0][1] / alpha + a.0[1][1]);
    let (s, mut value) = scan_then_golden(|s| g(s.exp()), -12.0, 12.0, 480, 1e-10);
    let mut alpha = s.exp();
    // the two sums cross where |M21| α² + (|M11| - |M22|) α - |M12| = 0
    if a.0[1][0] > 0.0 && a.0[0][1] > 0.0 {
        let (qa, qb, qc) = (a.0[1][0], a.0[0][0] - a.0[1][1], -a.0[0][1]);
        let root = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        if root > 0.0 && g(root) < value {
            value = g(root);
            alpha = root;
        }
    }
    if g(1.0) <= value + 1e-12 {
        alpha = 1.0;
        value = value.min(g(1.0));
    }
    Condition12 {
        satisfied: value < 1.0,
        value,
        margin: 1.0 - value,
        alpha_star: alpha,
        rho1_coordinates: rho1(m),
    }
}

pub fn condition12(model: &FluxModel, k: &Mat2) -> Result<Condition12> {
    Ok(condition_from_coordinates(&eigen_coordinates(model, k)?))
}

/// All ρ values of one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackAnalysis {
    pub k: Mat2,
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho_inf: f64,
    /// `ρ_p` with `p = 1`; equals `rho1`.
    pub rho_p1: f64,
}

pub fn analyze_matrix(k: &Mat2) -> FeedbackAnalysis {
    FeedbackAnalysis {
        k: *k,
        rho0: rho0(k),
        rho1: rho1(k),
        rho2: rho_p(k, PNorm::Two),
        rho_inf: rho_p(k, PNorm::Inf),
        rho_p1: rho_p(k, PNorm::One),
    }
}

/// Search rectangle and resolution of [`linear_spectral_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootScan {
    pub re_max: f64,
    pub im_max: f64,
    pub cells: usize,
    /// Samples per cell edge for the argument increments.
    pub edge_samples: usize,
}

impl Default for RootScan {
    fn default() -> Self {
        RootScan {
            re_max: 10.0,
            im_max: 200.0,
            cells: 400,
            edge_samples: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearCheck {
    pub stable: bool,
    /// Root with the largest real part inside the rectangle.
    pub worst_root: Option<Complex64>,
    pub roots: Vec<Complex64>,
}

/// `det(I - diag(e^{-z/λ₁}, e^{-z/λ₂}) K)` and its derivative.
fn characteristic(z: Complex64, inv: [f64; 2], k: &Mat2) -> (Complex64, Complex64) {
    let e1 = (-z * inv[0]).exp();
    let e2 = (-z * inv[1]).exp();
    let det = k.det();
    let f = 1.0 - k.0[0][0] * e1 - k.0[1][1] * e2 + det * e1 * e2;
    let df = k.0[0][0] * inv[0] * e1 + k.0[1][1] * inv[1] * e2 - det * (inv[0] + inv[1]) * e1 * e2;
    (f, df)
}

fn newton_root(mut z: Complex64, inv: [f64; 2], k: &Mat2) -> Option<Complex64> {
    for _ in 0..60 {
        let (f, df) = characteristic(z, inv, k);
        if df.norm() == 0.0 {
            return None;
        }
        let step = f / df;
        z -= step;
        if step.norm() < 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let (f, _) = characteristic(z, inv, k);
    (f.norm() < 1e-10).then_some(z)
}

/// Counts roots of the characteristic function with `Re z > -delta` by the
/// argument principle on a grid of cells, then polishes each with Newton.
pub fn linear_spectral_check(lambdas: (f64, f64), k: &Mat2, delta: f64, scan: &RootScan) -> Result<LinearCheck> {
    let inv = [1.0 / lambdas.0, 1.0 / lambdas.1];
    let n = scan.cells;
    let s = scan.edge_samples.max(1);
    let nodes = n * s + 1;
    let re_min = -delta;
    let dre = (scan.re_max - re_min) / (n * s) as f64;
    let dim = 2.0 * scan.im_max / (n * s) as f64;
    let at = |i: usize, j: usize| Complex64::new(re_min + i as f64 * dre, -scan.im_max + j as f64 * dim);
    // F on the node lattice, row-major in the imaginary direction
    let values: Vec<Complex64> = (0..nodes)
        .into_par_iter()
        .flat_map_iter(|i| (0..nodes).map(move |j| (i, j)))
        .map(|(i, j)| characteristic(at(i, j), inv, k).0)
        .collect();
    let val = |i: usize, j: usize| values[i * nodes + j];
    let arg_step = |a: Complex64, b: Complex64| (b / a).arg();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|ci| (0..n).map(move |cj| (ci, cj))).collect();
    let winding: Vec<(usize, usize, i64)> = cells
        .par_iter()
        .filter_map(|&(ci, cj)| {
            let (i0, j0) = (ci * s, cj * s);
            let mut path = Vec::with_capacity(4 * s + 1);
            for q in 0..s {
                path.push((i0 + q, j0));
            }
            for q in 0..s {
                path.push((i0 + s, j0 + q));
            }
            for q in 0..s {
                path.push((i0 + s - q, j0 + s));
            }
            for q in 0..s {
                path.push((i0, j0 + s - q));
            }
            path.push((i0, j0));
            let mut total = 0.0;
            for w in path.windows(2) {
                total += arg_step(val(w[0].0, w[0].1), val(w[1].0, w[1].1));
            }
            let turns = (total / std::f64::consts::TAU).round() as i64;
            (turns != 0).then_some((ci, cj, turns))
        })
        .collect();
    let mut roots: Vec<Complex64> = Vec::new();
    for (ci, cj, _) in winding {
        let centre = at(ci * s, cj * s) + Complex64::new(0.5 * s as f64 * dre, 0.5 * s as f64 * dim);
        let z = newton_root(centre, inv, k).unwrap_or(centre);
        if !roots.iter().any(|r| (r - z).norm() < 1e-8) {
            roots.push(z);
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    if let Some(r) = roots.iter().find(|r| (r.re + delta).abs() < 1e-6) {
        return Err(Error::InconclusiveNearBoundary(*r));
    }
    let unstable: Vec<Complex64> = roots.iter().copied().filter(|r| r.re > -delta).collect();
    Ok(LinearCheck {
        stable: unstable.is_empty(),
        worst_root: roots.first().copied(),
        roots: unstable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ka(a: f64) -> Mat2 {
        Mat2::new(a, a, a, a)
    }

    #[test]
    fn rho1_examples() {
        assert_eq!(rho1(&Mat2::ZERO), 0.0);
        assert_abs_diff_eq!(rho1(&Mat2::diag(0.5, 0.7)), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(rho1(&ka(0.3)), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(rho1(&ka(-0.3)), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn rho_p_examples() {
        for p in [PNorm::One, PNorm::Two, PNorm::Inf] {
            assert_abs_diff_eq!(rho_p(&Mat2::diag(-0.4, 0.25), p), 0.4, epsilon = 1e-9);
        }
        let (v, d) = rho_p_with_scaling(&ka(0.3), PNorm::One);
        assert_abs_diff_eq!(v, 0.6, epsilon = 1e-12);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn rho0_examples() {
        assert_eq!(rho0(&Mat2::ZERO), 0.0);
        for a in [0.3, -0.7, 0.45] {
            assert_abs_diff_eq!(rho0(&ka(a)), 2.0 * a.abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn condition12_examples() {
        let m = FluxModel::decoupled_burgers();
        let zero = condition12(&m, &Mat2::ZERO).unwrap();
        assert!(zero.satisfied);
        assert_eq!(zero.margin, 1.0);
        let c = condition12(&m, &ka(0.3)).unwrap();
        assert!(c.satisfied);
        assert_abs_diff_eq!(c.value, 0.6, epsilon = 1e-9);
        assert_eq!(c.alpha_star, 1.0);
        let edge = condition12(&m, &ka(0.5)).unwrap();
        assert!(!edge.satisfied);
        assert_abs_diff_eq!(edge.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn condition_uses_rescaling() {
        // column sums 0.2 + 0.9 and 0.05 + 0.1 balance at α ≠ 1
        let m = Mat2::new(0.2, 0.05, 0.9, 0.1);
        let c = condition_from_coordinates(&m);
        assert!(c.alpha_star < 1.0);
        assert_abs_diff_eq!(c.value, c.rho1_coordinates, epsilon = 1e-8);
    }

    #[test]
    fn linear_check_zero_feedback() {
        let r = linear_spectral_check((1.0, 2.0), &Mat2::ZERO, 0.05, &RootScan::default()).unwrap();
        assert!(r.stable);
        assert!(r.roots.is_empty());
    }

    #[test]
    fn linear_check_rank_one_root() {
        // 1 - a w - a w² = 0 with w = e^{-z/2}
        let a: f64 = 0.55;
        let w = (-a + (a * a + 4.0 * a).sqrt()) / (2.0 * a);
        let expected = -2.0 * f64::ln(w);
        let scan = RootScan { re_max: 1.0, im_max: 10.0, cells: 100, edge_samples: 4 };
        let r = linear_spectral_check((1.0, 2.0), &ka(a), 0.05, &scan).unwrap();
        assert!(!r.stable);
        assert_abs_diff_eq!(r.worst_root.unwrap().re, expected, epsilon = 1e-10);
    }
}
