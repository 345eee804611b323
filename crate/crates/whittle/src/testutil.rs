//! Shared fixtures for unit tests.

use crate::linalg::DenseMatrix;
use crate::model::{BanditInstance, Discount};

/// Two-state fixture solvable in closed form: P0 = I, P1 sends both states
/// to state 1, active rewards (1, 2), unit active consumption, β = 0.8.
/// Whittle index (1.8, 2.0) by state.
pub(crate) fn e2() -> BanditInstance<f64> {
    BanditInstance::new_discrete(
        DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
        vec![0.0, 0.0],
        vec![1.0, 2.0],
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        Discount::Factor(0.8),
    )
    .unwrap()
}

/// One-state instance with `r¹ − r⁰ = 2`, so the index is exactly 2.
pub(crate) fn one_state() -> BanditInstance<f64> {
    BanditInstance::new_discrete(
        DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
        DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
        vec![0.0],
        vec![2.0],
        vec![0.0],
        vec![1.0],
        Discount::Factor(0.8),
    )
    .unwrap()
}
