//! Strongly convex penalty functions for the f-divergence term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Occupancy;

/// Strongly convex scalar function together with its derivative calculus.
///
/// `Quadratic` is `(m_f / 2) x^2`. `ShiftedQuadratic` adds a constant, which
/// keeps the curvature but moves the function value; it exists to exercise
/// code paths that must not assume `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Quadratic { m_f: f64 },
    ShiftedQuadratic { m_f: f64, shift: f64 },
}

impl Default for Regularizer {
    fn default() -> Self {
        Regularizer::Quadratic { m_f: 1.0 }
    }
}

impl Regularizer {
    pub fn quadratic(m_f: f64) -> Self {
        Regularizer::Quadratic { m_f }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.strong_convexity();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "strong convexity modulus must be positive, got {m}"
            )));
        }
        if let Regularizer::ShiftedQuadratic { shift, .. } = self {
            if !shift.is_finite() {
                return Err(Error::InvalidArgument("shift must be finite".into()));
            }
        }
        Ok(())
    }

    /// The strong convexity modulus `M_f`.
    pub fn strong_convexity(&self) -> f64 {
        match *self {
            Regularizer::Quadratic { m_f } | Regularizer::ShiftedQuadratic { m_f, .. } => m_f,
        }
    }

    fn shift(&self) -> f64 {
        match *self {
            Regularizer::Quadratic { .. } => 0.0,
            Regularizer::ShiftedQuadratic { shift, .. } => shift,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        0.5 * self.strong_convexity() * x * x + self.shift()
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.strong_convexity() * x
    }

    #[inline]
    pub fn deriv_inverse(&self, y: f64) -> f64 {
        y / self.strong_convexity()
    }

    /// Second derivative; constant for the quadratic family.
    #[inline]
    pub fn second_deriv(&self, _x: f64) -> f64 {
        self.strong_convexity()
    }

    /// `(sup |f|, sup |f'|)` over `[0, b_w]`.
    pub fn bounds(&self, b_w: f64) -> Result<(f64, f64)> {
        if !(b_w >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight bound must be >= 0, got {b_w}")));
        }
        // f is convex, so |f| peaks at an endpoint or at the interior minimizer x = 0.
        let b_f = self.eval(0.0).abs().max(self.eval(b_w).abs());
        let b_fprime = self.deriv(0.0).abs().max(self.deriv(b_w).abs());
        Ok((b_f, b_fprime))
    }

    /// `sum_{dD > 0} dD(s,a) f(d(s,a) / dD(s,a))`.
    pub fn f_divergence(&self, d: &Occupancy, data_dist: &Occupancy) -> Result<f64> {
        if d.mass().shape() != data_dist.mass().shape() {
            return Err(Error::Shape("occupancy shapes differ".into()));
        }
        let (ns, na) = d.mass().shape();
        let mut total = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let base = data_dist.get(s, a);
                let mass = d.get(s, a);
                if base > 0.0 {
                    total += base * self.eval(mass / base);
                } else if mass > 0.0 {
                    return Err(Error::AbsoluteContinuity { state: s, action: a, mass });
                }
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let f = Regularizer::quadratic(2.0);
        assert_eq!(f.eval(3.0), 9.0);
        assert_eq!(f.deriv(3.0), 6.0);
        assert_eq!(f.deriv_inverse(6.0), 3.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.bounds(3.0).unwrap(), (9.0, 6.0));
        assert_eq!(f.bounds(0.0).unwrap(), (0.0, 0.0));
        assert!(f.bounds(-1.0).is_err());
    }

    #[test]
    fn bounds_match_grid_search() {
        for f in [
            Regularizer::quadratic(0.7),
            Regularizer::ShiftedQuadratic { m_f: 1.3, shift: -2.0 },
        ] {
            let b_w = 4.2;
            let (b_f, b_fp) = f.bounds(b_w).unwrap();
            let grid = (0..=10_000).map(|i| b_w * i as f64 / 10_000.0);
            let (gf, gfp) = grid.fold((0.0f64, 0.0f64), |(m, mp), x| {
                (m.max(f.eval(x).abs()), mp.max(f.deriv(x).abs()))
            });
            assert!((b_f - gf).abs() < 1e-9);
            assert!((b_fp - gfp).abs() < 1e-9);
        }
    }

    #[test]
    fn divergence_cases() {
        let f = Regularizer::quadratic(2.0);
        let dd = Occupancy::new(DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert!((f.f_divergence(&dd, &dd).unwrap() - 1.0).abs() < 1e-15);
        let zero = Occupancy::new(DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(f.f_divergence(&zero, &dd).unwrap(), 0.0);

        let holes = Occupancy::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.5, 0.0])).unwrap();
        match f.f_divergence(&dd, &holes) {
            Err(Error::AbsoluteContinuity { state: 0, action: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn divergence_matches_direct_sum() {
        let f = Regularizer::ShiftedQuadratic { m_f: 1.5, shift: 0.25 };
        let d = [0.05, 0.3, 0.0, 0.15, 0.2, 0.3];
        let dd = [0.1, 0.2, 0.1, 0.2, 0.15, 0.25];
        let occ = |v: &[f64]| Occupancy::new(DMatrix::from_row_slice(3, 2, v)).unwrap();
        let direct: f64 = d
            .iter()
            .zip(&dd)
            .map(|(x, b)| b * (0.75 * (x / b) * (x / b) + 0.25))
            .sum();
        assert!((f.f_divergence(&occ(&d), &occ(&dd)).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn serde_tagging() {
        let f: Regularizer = serde_json::from_str(r#"{"kind":"quadratic","m_f":1.0}"#).unwrap();
        assert_eq!(f, Regularizer::quadratic(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn inverse_round_trip(x in 0.0f64..10.0, m in 0.1f64..5.0) {
            let f = Regularizer::quadratic(m);
            prop_assert!((f.deriv_inverse(f.deriv(x)) - x).abs() < 1e-12);
        }

        #[test]
        fn midpoint_strong_convexity(x in -20.0f64..20.0, y in -20.0f64..20.0, m in 0.1f64..5.0) {
            let f = Regularizer::ShiftedQuadratic { m_f: m, shift: -1.0 };
            let lhs = f.eval(0.5 * (x + y));
            let rhs = 0.5 * (f.eval(x) + f.eval(y)) - m / 8.0 * (x - y).powi(2);
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn divergence_of_data_is_f_at_one(cells in proptest::collection::vec(0.01f64..1.0, 6), m in 0.1f64..4.0) {
            let z: f64 = cells.iter().sum();
            let dd = Occupancy::new(DMatrix::from_iterator(3, 2, cells.iter().map(|c| c / z))).unwrap();
            let f = Regularizer::quadratic(m);
            let div = f.f_divergence(&dd, &dd).unwrap();
            prop_assert!(div >= 0.0);
            prop_assert!((div - f.eval(1.0)).abs() < 1e-12);
        }
    }
}
