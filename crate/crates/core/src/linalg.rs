//! Fixed-size vectors and matrices for 2x2 systems.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A state `u = (u1, u2)` of the conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec(pub [f64; 2]);

impl StateVec {
    pub const ZERO: StateVec = StateVec([0.0, 0.0]);

    pub const fn new(u1: f64, u2: f64) -> Self {
        StateVec([u1, u2])
    }

    #[inline]
    pub fn u1(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn u2(&self) -> f64 {
        self.0[1]
    }

    #[inline]
    pub fn dot(&self, other: &StateVec) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    /// Sup norm `max(|u1|, |u2|)`.
    #[inline]
    pub fn norm_inf(&self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    #[inline]
    pub fn norm2(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }

    pub fn is_finite(&self) -> bool {
        self.0[0].is_finite() && self.0[1].is_finite()
    }
}

impl Index<usize> for StateVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for StateVec {
    type Output = StateVec;
    #[inline]
    fn add(self, rhs: StateVec) -> StateVec {
        StateVec([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl AddAssign for StateVec {
    #[inline]
    fn add_assign(&mut self, rhs: StateVec) {
        self.0[0] += rhs.0[0];
        self.0[1] += rhs.0[1];
    }
}

impl Sub for StateVec {
    type Output = StateVec;
    #[inline]
    fn sub(self, rhs: StateVec) -> StateVec {
        StateVec([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

impl SubAssign for StateVec {
    #[inline]
    fn sub_assign(&mut self, rhs: StateVec) {
        self.0[0] -= rhs.0[0];
        self.0[1] -= rhs.0[1];
    }
}

impl Neg for StateVec {
    type Output = StateVec;
    #[inline]
    fn neg(self) -> StateVec {
        StateVec([-self.0[0], -self.0[1]])
    }
}

impl Mul<StateVec> for f64 {
    type Output = StateVec;
    #[inline]
    fn mul(self, rhs: StateVec) -> StateVec {
        StateVec([self * rhs.0[0], self * rhs.0[1]])
    }
}

/// Row-major 2x2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2([[a11, a12], [a21, a22]])
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Mat2([[d1, 0.0], [0.0, d2]])
    }

    /// Build a matrix from two column vectors.
    pub fn from_columns(c1: StateVec, c2: StateVec) -> Self {
        Mat2([[c1.0[0], c2.0[0]], [c1.0[1], c2.0[1]]])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    /// Entrywise absolute value `|M|`.
    pub fn abs(&self) -> Mat2 {
        Mat2([
            [self.0[0][0].abs(), self.0[0][1].abs()],
            [self.0[1][0].abs(), self.0[1][1].abs()],
        ])
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }

    pub fn mul_vec(&self, v: StateVec) -> StateVec {
        StateVec([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1],
        ])
    }

    pub fn mul_mat(&self, b: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &b.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([
            [s * self.0[0][0], s * self.0[0][1]],
            [s * self.0[1][0], s * self.0[1][1]],
        ])
    }

    pub fn add(&self, b: &Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] + b.0[0][0], self.0[0][1] + b.0[0][1]],
            [self.0[1][0] + b.0[1][0], self.0[1][1] + b.0[1][1]],
        ])
    }

    /// Max absolute row sum (induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (self.0[0][0].abs() + self.0[0][1].abs()).max(self.0[1][0].abs() + self.0[1][1].abs())
    }

    /// Max absolute column sum (induced 1-norm).
    pub fn norm_1(&self) -> f64 {
        (self.0[0][0].abs() + self.0[1][0].abs()).max(self.0[0][1].abs() + self.0[1][1].abs())
    }

    /// Largest singular value, in closed form.
    pub fn norm_2(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        let frob2 = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0);
        ((frob2 + disc.sqrt()) / 2.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

/// Real eigenvalues of a 2x2 matrix in increasing order, or `None` when the
/// discriminant is not positive beyond `tol` (complex or repeated pair).
pub fn real_eigenvalues(m: &Mat2, tol: f64) -> Option<(f64, f64)> {
    let [[a, b], [c, d]] = m.0;
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    let scale = 1.0 + m.norm_inf();
    if !(disc > (tol * scale).powi(2)) {
        return None;
    }
    let root = disc.sqrt();
    let mid = 0.5 * (a + d);
    Some((mid - root, mid + root))
}

/// A (non-normalized) eigenvector of `m` for eigenvalue `lambda`, picked from
/// the better-conditioned row of `m - lambda I`.
pub fn eigenvector(m: &Mat2, lambda: f64) -> StateVec {
    let [[a, b], [c, d]] = m.0;
    let v_row1 = StateVec::new(b, lambda - a);
    let v_row2 = StateVec::new(lambda - d, c);
    if v_row1.norm2() >= v_row2.norm2() {
        v_row1
    } else {
        v_row2
    }
}

/// Nodes and weights of 5-point Gauss-Legendre quadrature on `[0, 1]`.
pub const GAUSS_LEGENDRE_5: [(f64, f64); 5] = {
    const X1: f64 = 0.538_469_310_105_683_1;
    const X2: f64 = 0.906_179_845_938_664;
    const W0: f64 = 0.568_888_888_888_888_9;
    const W1: f64 = 0.478_628_670_499_366_5;
    const W2: f64 = 0.236_926_885_056_189_1;
    [
        (0.5 * (1.0 - X2), 0.5 * W2),
        (0.5 * (1.0 - X1), 0.5 * W1),
        (0.5, 0.5 * W0),
        (0.5 * (1.0 + X1), 0.5 * W1),
        (0.5 * (1.0 + X2), 0.5 * W2),
    ]
};

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::new(2.0, 1.0, 1.0, 3.0);
        let p = m.mul_mat(&m.inverse().unwrap());
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(p.get(i, j), Mat2::IDENTITY.get(i, j), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_quartic() {
        // int_0^1 x^4 = 1/5 ; exactness up to degree 9
        let s: f64 = GAUSS_LEGENDRE_5.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert_relative_eq!(s, 0.1, epsilon = 1e-15);
        let total: f64 = GAUSS_LEGENDRE_5.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spectral_norm_of_rotation_is_one() {
        let (s, c) = 0.3f64.sin_cos();
        assert_relative_eq!(Mat2::new(c, -s, s, c).norm_2(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(Mat2::diag(-3.0, 2.0).norm_2(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenvector_matches_eigenvalue() {
        let m = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let (l1, l2) = real_eigenvalues(&m, 1e-12).unwrap();
        assert_relative_eq!(l1, 1.0, epsilon = 1e-15);
        assert_relative_eq!(l2, 3.0, epsilon = 1e-15);
        for l in [l1, l2] {
            let v = eigenvector(&m, l);
            let r = m.mul_vec(v) - l * v;
            assert!(r.norm_inf() < 1e-14);
        }
        assert!(real_eigenvalues(&Mat2::new(0.0, -1.0, 1.0, 0.0), 1e-12).is_none());
    }
}
