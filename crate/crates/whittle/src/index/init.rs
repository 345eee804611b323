//! Initial-tableau construction.
//!
//! For the all-passive base the coefficient matrix solves the block system
//!
//! ```text
//! (A⁰)ᵀ · [ (I − Ψ⁰) with column j* replaced by m̃⁰ ]
//!        = [ (I − Ψ¹) with column j* replaced by m̃¹ ]
//! ```
//!
//! for an arbitrary distinguished state `j*`. The replacement keeps the
//! system nonsingular as the discount rate vanishes, where `I − Ψᵃ` itself
//! degenerates, so the same construction serves the discounted and the
//! average criterion. For a positive discount rate the result also
//! satisfies `(A⁰)ᵀ(I − Ψ⁰) = (I − Ψ¹)`.
//!
//! The all-active base swaps the action roles. Initial reduced costs come
//! out of the marginal-metric representation: `g = q¹ − q⁰A`, `f = r¹ − r⁰A`
//! at the all-passive base, and `g = q¹A − q⁰`, `f = r¹A − r⁰` at the
//! all-active one.

use crate::linalg::{lu_factor, lu_solve, DenseMatrix, FlopCounter, DEFAULT_PIVOT_TOL};
use crate::model::{ActiveSet, BanditInstance, Criterion};
use crate::scalar::Scalar;

use super::{Base, EngineError, Tableau, PCL_TOL_COEFF};

/// Build the tableau for the requested base set.
///
/// `jstar` defaults to state `n−1`; the computed tableau is independent of
/// the choice. Average-criterion instances must be communicating.
pub fn initial_tableau<F: Scalar>(
    inst: &BanditInstance<F>,
    base: Base,
    jstar: Option<usize>,
) -> Result<Tableau<F>, EngineError> {
    let n = inst.n();
    let jstar = jstar.unwrap_or(n - 1);
    if jstar >= n {
        return Err(EngineError::JstarOutOfRange { jstar, n });
    }
    if inst.criterion() == Criterion::Average && !inst.is_communicating() {
        return Err(EngineError::NotCommunicating);
    }

    // Action on the left-hand side of the block system.
    let (left, right) = match base {
        Base::Empty => (0u8, 1u8),
        Base::Full => (1u8, 0u8),
    };

    // Transposed column-replaced matrices, built directly so the solve
    // produces A in row-major order.
    let replaced_transposed = |action: u8| -> DenseMatrix<F> {
        let psi = inst.psi(action);
        let mtilde = inst.mtilde(action);
        DenseMatrix::from_fn(n, n, |i, j| {
            if i == jstar {
                mtilde[j]
            } else {
                let identity = if i == j { F::one() } else { F::zero() };
                identity - psi.get(j, i)
            }
        })
    };
    let lhs_t = replaced_transposed(left);
    let rhs_t = replaced_transposed(right);

    let mut init_flops = FlopCounter::new();
    let factors = lu_factor(&lhs_t, F::from_f64_c(DEFAULT_PIVOT_TOL), &mut init_flops)?;
    let a = lu_solve(&factors, &rhs_t, &mut init_flops)?;

    let q0 = inst.q(0);
    let q1 = inst.q(1);
    let r0 = inst.r(0);
    let r1 = inst.r(1);
    let (g, f) = match base {
        Base::Empty => {
            let qa = a.vec_mat(q0)?;
            let ra = a.vec_mat(r0)?;
            let g = q1.iter().zip(&qa).map(|(&x, &y)| x - y).collect();
            let f = r1.iter().zip(&ra).map(|(&x, &y)| x - y).collect();
            (g, f)
        }
        Base::Full => {
            let qa = a.vec_mat(q1)?;
            let ra = a.vec_mat(r1)?;
            let g = qa.iter().zip(q0).map(|(&x, &y)| x - y).collect();
            let f = ra.iter().zip(r0).map(|(&x, &y)| x - y).collect();
            (g, f)
        }
    };
    init_flops.add(4 * (n as u64) * (n as u64) + 2 * n as u64);

    let a_norm = a.max_abs();
    let q_norm = q0
        .iter()
        .chain(q1)
        .fold(F::zero(), |acc, &v| acc.max(v.abs()));
    let pcl_floor = F::from_f64_c(PCL_TOL_COEFF) * (F::one() + q_norm * a_norm);
    let pivot_floor = F::from_f64_c(DEFAULT_PIVOT_TOL) * (F::one() + a_norm);

    Ok(Tableau {
        base,
        s: match base {
            Base::Empty => ActiveSet::empty(n),
            Base::Full => ActiveSet::full(n),
        },
        a,
        g,
        f,
        k: 0,
        flops: FlopCounter::new(),
        init_flops: init_flops.count(),
        pcl_floor,
        pivot_floor,
    })
}
