//! Uniform reporting type for inequality evaluations.

use serde::Serialize;

use crate::scalar::Scalar;

/// Which side of `lhs ? rhs` counts as a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// The inequality asserts `lhs ≥ rhs`; `lhs < rhs` is a violation
    /// (steering and superposition criteria).
    ViolatedIfLess,
    /// The inequality asserts `lhs ≤ rhs`; `lhs > rhs` is a violation
    /// (the continuous-variable Bell inequality).
    ViolatedIfGreater,
}

/// Outcome of evaluating one inequality on one state.
///
/// `margin` is oriented so that it is positive exactly when the inequality
/// is violated, whichever the direction: `rhs − lhs` for
/// [`Direction::ViolatedIfLess`], `lhs − rhs` for
/// [`Direction::ViolatedIfGreater`].
#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport<R: Scalar> {
    pub label: String,
    pub lhs: R,
    pub rhs: R,
    pub direction: Direction,
    pub violated: bool,
    pub margin: R,
    /// Named inputs and intermediate quantities, for reproducibility.
    pub params: Vec<(String, R)>,
}

impl<R: Scalar> CriterionReport<R> {
    pub fn new(
        label: impl Into<String>,
        lhs: R,
        rhs: R,
        direction: Direction,
        params: Vec<(String, R)>,
    ) -> Self {
        let margin = match direction {
            Direction::ViolatedIfLess => rhs - lhs,
            Direction::ViolatedIfGreater => lhs - rhs,
        };
        Self {
            label: label.into(),
            lhs,
            rhs,
            direction,
            violated: margin > R::zero(),
            margin,
            params,
        }
    }

    pub fn param(&self, key: &str) -> Option<R> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
    }

    pub fn with_param(mut self, key: impl Into<String>, value: R) -> Self {
        self.params.push((key.into(), value));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_orientation() {
        let less = CriterionReport::<f64>::new("a", 0.5, 1.0, Direction::ViolatedIfLess, vec![]);
        assert!(less.violated);
        assert!((less.margin - 0.5).abs() < 1e-15);

        let greater =
            CriterionReport::<f64>::new("b", 0.5, 1.0, Direction::ViolatedIfGreater, vec![]);
        assert!(!greater.violated);
        assert!((greater.margin + 0.5).abs() < 1e-15);
    }
}
