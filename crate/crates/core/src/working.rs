//! Working copy of an instance in the engine's scalar format.

use crate::model::{normalize_infinity, ProblemInstance, VariableBounds};
use crate::scalar::Scalar;

pub(crate) struct WorkingProblem<T> {
    pub coefs: Vec<T>,
    pub lhs: Vec<T>,
    pub rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> WorkingProblem<T> {
    pub fn new(instance: &ProblemInstance, infinity_threshold: f64) -> Self {
        let conv = |v: &[f64]| -> Vec<T> {
            v.iter()
                .map(|&x| T::from_f64(normalize_infinity(x, infinity_threshold)))
                .collect()
        };
        Self {
            coefs: instance.matrix.values.iter().map(|&a| T::from_f64(a)).collect(),
            lhs: conv(&instance.lhs),
            rhs: conv(&instance.rhs),
            lower: conv(&instance.bounds.lower),
            upper: conv(&instance.bounds.upper),
        }
    }
}

pub(crate) fn to_bounds<T: Scalar>(lower: &[T], upper: &[T]) -> VariableBounds {
    VariableBounds {
        lower: lower.iter().map(|v| v.widen()).collect(),
        upper: upper.iter().map(|v| v.widen()).collect(),
    }
}
