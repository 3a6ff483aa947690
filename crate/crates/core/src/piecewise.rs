//! Piecewise-constant functions on `[0, L]` and initial-data generators.

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat2, StateVec};

/// `values[0]` on `(0, x_1)`, `values[i]` on `(x_i, x_{i+1})`, `values[n]` on `(x_n, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub length: f64,
    pub breakpoints: Vec<f64>,
    pub values: Vec<StateVec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PiecewiseError {
    #[error("expected {expected} values for {breakpoints} breakpoints, got {got}")]
    Length {
        breakpoints: usize,
        expected: usize,
        got: usize,
    },
    #[error("breakpoints must be strictly increasing inside (0, L)")]
    Unsorted,
    #[error("non-finite value")]
    NonFinite,
}

impl PiecewiseConstant {
    pub fn new(
        length: f64,
        breakpoints: Vec<f64>,
        values: Vec<StateVec>,
    ) -> Result<Self, PiecewiseError> {
        if values.len() != breakpoints.len() + 1 {
            return Err(PiecewiseError::Length {
                breakpoints: breakpoints.len(),
                expected: breakpoints.len() + 1,
                got: values.len(),
            });
        }
        let inside = breakpoints.iter().all(|&x| x > 0.0 && x < length);
        let sorted = breakpoints.windows(2).all(|w| w[0] < w[1]);
        if !inside || !sorted {
            return Err(PiecewiseError::Unsorted);
        }
        if !values.iter().all(StateVec::is_finite) {
            return Err(PiecewiseError::NonFinite);
        }
        Ok(PiecewiseConstant {
            length,
            breakpoints,
            values,
        })
    }

    pub fn constant(length: f64, u: StateVec) -> Self {
        PiecewiseConstant {
            length,
            breakpoints: Vec::new(),
            values: vec![u],
        }
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> StateVec {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        self.values[idx]
    }

    /// `u(0+)`.
    pub fn left_trace(&self) -> StateVec {
        self.values[0]
    }

    /// `u(L-)`.
    pub fn right_trace(&self) -> StateVec {
        *self.values.last().expect("at least one value")
    }

    /// Jumps `(x_i, u(x_i-), u(x_i+))`.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, StateVec, StateVec)> + '_ {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, self.values[i], self.values[i + 1]))
    }

    /// Total variation on `[0, L]`, jumps measured in the sup norm.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).norm_inf()).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(StateVec::norm_inf).fold(0.0, f64::max)
    }

    /// `TV(U) + |K U(L-) - U(0+)|`.
    pub fn tv_star(&self, k: &Mat2) -> f64 {
        self.total_variation() + (k.mul_vec(self.right_trace()) - self.left_trace()).norm_inf()
    }

    /// Drops breakpoints across which the value does not change.
    pub fn simplified(&self) -> Self {
        let mut breakpoints = Vec::with_capacity(self.breakpoints.len());
        let mut values = vec![self.values[0]];
        for (i, &x) in self.breakpoints.iter().enumerate() {
            let v = self.values[i + 1];
            if v != *values.last().unwrap() {
                breakpoints.push(x);
                values.push(v);
            }
        }
        PiecewiseConstant {
            length: self.length,
            breakpoints,
            values,
        }
    }

    /// `∫₀ᴸ |a(x) - b(x)|∞ dx`, exact over the merged breakpoints.
    pub fn l1_distance(&self, other: &PiecewiseConstant) -> f64 {
        let length = self.length.min(other.length);
        let (mut i, mut j) = (0usize, 0usize);
        let mut x = 0.0;
        let mut total = 0.0;
        while x < length {
            let next_a = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            let next_b = other.breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
            let next = next_a.min(next_b).min(length);
            total += (next - x) * (self.values[i] - other.values[j]).norm_inf();
            if next_a <= next {
                i += 1;
            }
            if next_b <= next {
                j += 1;
            }
            x = next;
        }
        total
    }

    /// `∫₀ᴸ |u(x)|∞ dx`.
    pub fn l1_norm(&self) -> f64 {
        self.l1_distance(&PiecewiseConstant::constant(self.length, StateVec::ZERO))
    }
}

/// Builtin initial profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// `left` on `(0, position)`, `right` on `(position, L)`.
    Jump {
        position: f64,
        left: StateVec,
        right: StateVec,
    },
    /// `amplitude · sin(mode π x / L) · direction`, sampled at the midpoints of `cells` cells.
    Sine {
        amplitude: f64,
        cells: usize,
        mode: u32,
        direction: StateVec,
    },
    /// Quartic bump `amplitude (1 - s²)²`, `s = (x - center)/width`, sampled at cell midpoints.
    Bump {
        amplitude: f64,
        cells: usize,
        center: f64,
        width: f64,
        direction: StateVec,
    },
    Breakpoints {
        breakpoints: Vec<f64>,
        values: Vec<StateVec>,
    },
}

impl InitialProfile {
    pub fn sample(&self, length: f64) -> Result<PiecewiseConstant, PiecewiseError> {
        let midpoint_sampling = |cells: usize, g: &dyn Fn(f64) -> f64, direction: StateVec| {
            let cells = cells.max(1);
            let dx = length / cells as f64;
            let breakpoints = (1..cells).map(|i| i as f64 * dx).collect();
            let values = (0..cells)
                .map(|i| g((i as f64 + 0.5) * dx) * direction)
                .collect();
            PiecewiseConstant::new(length, breakpoints, values).map(|p| p.simplified())
        };
        match self {
            InitialProfile::Jump {
                position,
                left,
                right,
            } => PiecewiseConstant::new(length, vec![*position], vec![*left, *right])
                .map(|p| p.simplified()),
            InitialProfile::Sine {
                amplitude,
                cells,
                mode,
                direction,
            } => {
                let k = *mode as f64 * std::f64::consts::PI / length;
                midpoint_sampling(*cells, &|x| amplitude * (k * x).sin(), *direction)
            }
            InitialProfile::Bump {
                amplitude,
                cells,
                center,
                width,
                direction,
            } => midpoint_sampling(
                *cells,
                &|x| {
                    let s = (x - center) / width;
                    if s.abs() < 1.0 {
                        amplitude * (1.0 - s * s).powi(2)
                    } else {
                        0.0
                    }
                },
                *direction,
            ),
            InitialProfile::Breakpoints {
                breakpoints,
                values,
            } => PiecewiseConstant::new(length, breakpoints.clone(), values.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pc(bps: &[f64], vals: &[f64]) -> PiecewiseConstant {
        PiecewiseConstant::new(
            1.0,
            bps.to_vec(),
            vals.iter().map(|&v| StateVec::new(v, 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn tv_star_examples() {
        let k0 = Mat2::ZERO;
        assert_eq!(PiecewiseConstant::constant(1.0, StateVec::ZERO).tv_star(&k0), 0.0);
        let ubar = StateVec::new(0.1, -0.3);
        assert_abs_diff_eq!(PiecewiseConstant::constant(1.0, ubar).tv_star(&k0), 0.3);
        // matched boundary: K u(L-) = u(0+) = 0
        assert_abs_diff_eq!(pc(&[0.5], &[0.0, 0.2]).tv_star(&k0), 0.2);
    }

    #[test]
    fn l1_distance_merges_breakpoints() {
        let a = pc(&[0.25, 0.5], &[0.0, 1.0, 0.0]);
        let b = pc(&[0.4], &[0.0, 1.0]);
        // |a - b| is 1 on (0.25, 0.4) and on (0.5, 1), zero elsewhere
        assert_abs_diff_eq!(a.l1_distance(&b), 0.15 + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.l1_norm(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn unsorted_breakpoints_rejected() {
        let v = vec![StateVec::ZERO; 3];
        assert_eq!(
            PiecewiseConstant::new(1.0, vec![0.6, 0.2], v),
            Err(PiecewiseError::Unsorted)
        );
    }

    #[test]
    fn sampled_sine_does_not_increase_variation() {
        let p = InitialProfile::Sine {
            amplitude: 0.02,
            cells: 32,
            mode: 2,
            direction: StateVec::new(1.0, 1.0),
        }
        .sample(1.0)
        .unwrap();
        assert!(p.total_variation() <= 4.0 * 0.02 + 1e-15);
        assert!(p.sup_norm() <= 0.02);
    }

    proptest! {
        #[test]
        fn l1_distance_is_a_metric(
            xa in prop::collection::btree_set(1u32..99, 0..6),
            xb in prop::collection::btree_set(1u32..99, 0..6),
            seed in prop::collection::vec(-1.0f64..1.0, 14),
        ) {
            let mk = |xs: &std::collections::BTreeSet<u32>, off: usize| {
                let bps: Vec<f64> = xs.iter().map(|&x| x as f64 / 100.0).collect();
                let vals = (0..=bps.len()).map(|i| StateVec::new(seed[off + i], seed[i])).collect();
                PiecewiseConstant::new(1.0, bps, vals).unwrap()
            };
            let (a, b) = (mk(&xa, 0), mk(&xb, 7));
            prop_assert!((a.l1_distance(&b) - b.l1_distance(&a)).abs() < 1e-14);
            prop_assert!(a.l1_distance(&a) == 0.0);
            prop_assert!(a.l1_distance(&b) <= a.l1_norm() + b.l1_norm() + 1e-14);
        }
    }
}
