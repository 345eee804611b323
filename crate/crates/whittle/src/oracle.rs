//! Independent ground truth for the pivoting engines, built only from
//! definitions: policy evaluation, occupation measures, marginal metrics,
//! price-problem value iteration, per-state index bisection, and the
//! decomposition-identity checks. Nothing here touches a pivoting tableau.
//!
//! The oracle covers the discounted criterion; average-criterion engine
//! output is verified elsewhere by vanishing-discount consistency.

use thiserror::Error;

use crate::linalg::{
    lu_factor, lu_solve, DenseMatrix, FlopCounter, LinalgError, DEFAULT_PIVOT_TOL,
};
use crate::model::{ActiveSet, BanditInstance, Criterion, ModelError};
use crate::scalar::Scalar;

/// Iteration cap for value iteration.
pub const VALUE_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle operations require the discounted criterion")]
    DiscountedOnly,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("value iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("no sign change for state {state} on bracket ({lo}, {hi})")]
    NoSignChange { state: usize, lo: f64, hi: f64 },
    #[error("invalid initial distribution: {reason}")]
    BadDistribution { reason: String },
    #[error("state {state} already belongs to the active set")]
    StateInActiveSet { state: usize },
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
}

fn require_discounted<F: Scalar>(inst: &BanditInstance<F>) -> Result<(), OracleError> {
    match inst.criterion() {
        Criterion::Discounted => Ok(()),
        Criterion::Average => Err(OracleError::DiscountedOnly),
    }
}

fn check_set<F: Scalar>(inst: &BanditInstance<F>, s: &ActiveSet) -> Result<(), OracleError> {
    if s.n() != inst.n() {
        return Err(OracleError::Dimension {
            context: format!(
                "active set over {} states, instance has {}",
                s.n(),
                inst.n()
            ),
        });
    }
    Ok(())
}

fn check_distribution<F: Scalar>(inst: &BanditInstance<F>, p: &[F]) -> Result<(), OracleError> {
    if p.len() != inst.n() {
        return Err(OracleError::Dimension {
            context: format!("distribution length {} vs {} states", p.len(), inst.n()),
        });
    }
    let mut sum = F::zero();
    for (i, &v) in p.iter().enumerate() {
        if v < -F::from_f64_c(1e-12) || !v.is_finite() {
            return Err(OracleError::BadDistribution {
                reason: format!("entry {i} is {v}"),
            });
        }
        sum += v;
    }
    if (sum - F::one()).abs() > F::from_f64_c(1e-9) {
        return Err(OracleError::BadDistribution {
            reason: format!("entries sum to {sum}"),
        });
    }
    Ok(())
}

/// `I − Ψ^S` with row `i` drawn from the active transform iff `i ∈ S`.
fn policy_system<F: Scalar>(inst: &BanditInstance<F>, s: &ActiveSet) -> DenseMatrix<F> {
    let n = inst.n();
    DenseMatrix::from_fn(n, n, |i, j| {
        let action = if s.contains(i) { 1 } else { 0 };
        let identity = if i == j { F::one() } else { F::zero() };
        identity - inst.psi(action).get(i, j)
    })
}

fn mixed_vector<F: Scalar>(active: &[F], passive: &[F], s: &ActiveSet) -> Vec<F> {
    (0..active.len())
        .map(|i| if s.contains(i) { active[i] } else { passive[i] })
        .collect()
}

/// Reward and resource metrics `(F^S, G^S)` of the S-active policy, by a
/// direct linear solve of the policy-evaluation equations.
pub fn policy_metrics<F: Scalar>(
    inst: &BanditInstance<F>,
    s: &ActiveSet,
) -> Result<(Vec<F>, Vec<F>), OracleError> {
    require_discounted(inst)?;
    check_set(inst, s)?;
    let n = inst.n();
    let system = policy_system(inst, s);
    let r_mix = mixed_vector(inst.r(1), inst.r(0), s);
    let q_mix = mixed_vector(inst.q(1), inst.q(0), s);
    let mut rhs = DenseMatrix::zeros(n, 2);
    for i in 0..n {
        rhs.set(i, 0, r_mix[i]);
        rhs.set(i, 1, q_mix[i]);
    }
    let mut flops = FlopCounter::new();
    let lu = lu_factor(&system, F::from_f64_c(DEFAULT_PIVOT_TOL), &mut flops)?;
    let x = lu_solve(&lu, &rhs, &mut flops)?;
    let f = (0..n).map(|i| x.get(i, 0)).collect();
    let g = (0..n).map(|i| x.get(i, 1)).collect();
    Ok((f, g))
}

/// Basic occupation measures `(x¹, x⁰)` of the S-active policy from initial
/// distribution `p`; non-basic measures are identically zero.
pub fn occupation_measures<F: Scalar>(
    inst: &BanditInstance<F>,
    s: &ActiveSet,
    p: &[F],
) -> Result<(Vec<F>, Vec<F>), OracleError> {
    require_discounted(inst)?;
    check_set(inst, s)?;
    check_distribution(inst, p)?;
    let n = inst.n();
    let system_t = policy_system(inst, s).transpose();
    let mut rhs = DenseMatrix::zeros(n, 1);
    for i in 0..n {
        rhs.set(i, 0, p[i]);
    }
    let mut flops = FlopCounter::new();
    let lu = lu_factor(&system_t, F::from_f64_c(DEFAULT_PIVOT_TOL), &mut flops)?;
    let x = lu_solve(&lu, &rhs, &mut flops)?;
    let mut x1 = vec![F::zero(); n];
    let mut x0 = vec![F::zero(); n];
    for i in 0..n {
        if s.contains(i) {
            x1[i] = x.get(i, 0);
        } else {
            x0[i] = x.get(i, 0);
        }
    }
    Ok((x1, x0))
}

/// Bundle of S-active policy metrics and occupation measures for one
/// initial distribution.
#[derive(Debug, Clone)]
pub struct OracleMetrics<F> {
    /// Reward metric `F^S` by state.
    pub f: Vec<F>,
    /// Resource metric `G^S` by state.
    pub g: Vec<F>,
    /// Active occupation measures (zero off `S`).
    pub x1: Vec<F>,
    /// Passive occupation measures (zero on `S`).
    pub x0: Vec<F>,
}

/// Evaluate the S-active policy fully: metrics plus occupation measures.
pub fn oracle_metrics<F: Scalar>(
    inst: &BanditInstance<F>,
    s: &ActiveSet,
    p: &[F],
) -> Result<OracleMetrics<F>, OracleError> {
    let (f, g) = policy_metrics(inst, s)?;
    let (x1, x0) = occupation_measures(inst, s, p)?;
    Ok(OracleMetrics { f, g, x1, x0 })
}

/// Marginal metrics `(g^S, f^S)` straight from their definition:
/// `gᵢ = qᵢ¹ − qᵢ⁰ + (Ψ¹ᵢ· − Ψ⁰ᵢ·)·G^S`, and likewise for `f` with rewards.
pub fn marginal_metrics<F: Scalar>(
    inst: &BanditInstance<F>,
    s: &ActiveSet,
) -> Result<(Vec<F>, Vec<F>), OracleError> {
    let (f_meta, g_meta) = policy_metrics(inst, s)?;
    let n = inst.n();
    let mut g = vec![F::zero(); n];
    let mut f = vec![F::zero(); n];
    for i in 0..n {
        let mut dg = inst.q(1)[i] - inst.q(0)[i];
        let mut df = inst.r(1)[i] - inst.r(0)[i];
        for j in 0..n {
            let dpsi = inst.psi(1).get(i, j) - inst.psi(0).get(i, j);
            dg += dpsi * g_meta[j];
            df += dpsi * f_meta[j];
        }
        g[i] = dg;
        f[i] = df;
    }
    Ok((g, f))
}

/// Solution of the λ-price dynamic program.
#[derive(Debug, Clone)]
pub struct PriceSolution<F> {
    /// Optimal values `V*(λ)` by state.
    pub v: Vec<F>,
    /// Marginal value of engaging, `Δᵢ = V⟨1⟩ᵢ − V⟨0⟩ᵢ`.
    pub delta: Vec<F>,
    /// States where the active action is optimal (`Δᵢ ≥ −τ`).
    pub optimal_active: ActiveSet,
    /// States with `|Δᵢ| ≤ τ`, where both actions are optimal.
    pub indifferent: Vec<usize>,
    /// The indifference tolerance τ actually applied.
    pub tol_indifference: F,
}

/// Value iteration on the price-problem optimality equations
/// `Vᵢ = maxₐ rᵢᵃ − λqᵢᵃ + Ψᵃᵢ·V`, stopped by the standard sup-norm
/// Cauchy bound with contraction modulus `ψmax` (the largest transform row
/// sum).
pub fn solve_price<F: Scalar>(
    inst: &BanditInstance<F>,
    lambda: F,
    tol: F,
) -> Result<PriceSolution<F>, OracleError> {
    require_discounted(inst)?;
    let n = inst.n();
    let mut psimax = F::zero();
    for a in [0u8, 1u8] {
        for i in 0..n {
            let sum: F = inst.psi(a).row(i).iter().copied().sum();
            psimax = psimax.max(sum);
        }
    }
    let stop = if psimax > F::zero() {
        tol * (F::one() - psimax) / psimax
    } else {
        F::infinity()
    };

    let one_step = |action: u8, v: &[F], i: usize| -> F {
        let mut acc = inst.r(action)[i] - lambda * inst.q(action)[i];
        for (j, &psi) in inst.psi(action).row(i).iter().enumerate() {
            acc += psi * v[j];
        }
        acc
    };

    let mut v = vec![F::zero(); n];
    let mut next = vec![F::zero(); n];
    let mut converged = false;
    for _ in 0..VALUE_ITERATION_CAP {
        let mut diff = F::zero();
        for i in 0..n {
            let candidate = one_step(0, &v, i).max(one_step(1, &v, i));
            diff = diff.max((candidate - v[i]).abs());
            next[i] = candidate;
        }
        std::mem::swap(&mut v, &mut next);
        if diff <= stop {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(OracleError::NoConvergence {
            iterations: VALUE_ITERATION_CAP,
        });
    }

    let vmax = v.iter().fold(F::zero(), |acc, x| acc.max(x.abs()));
    let tau = tol.max(F::from_f64_c(1e-9) * (F::one() + lambda.abs() + vmax));
    let mut delta = vec![F::zero(); n];
    let mut optimal_active = ActiveSet::empty(n);
    let mut indifferent = Vec::new();
    for i in 0..n {
        let d = one_step(1, &v, i) - one_step(0, &v, i);
        delta[i] = d;
        if d >= -tau {
            optimal_active.insert(i);
        }
        if d.abs() <= tau {
            indifferent.push(i);
        }
    }
    Ok(PriceSolution {
        v,
        delta,
        optimal_active,
        indifferent,
        tol_indifference: tau,
    })
}

fn delta_at<F: Scalar>(
    inst: &BanditInstance<F>,
    state: usize,
    lambda: F,
    vi_tol: F,
) -> Result<F, OracleError> {
    Ok(solve_price(inst, lambda, vi_tol)?.delta[state])
}

/// Bisect the sign change of `Δᵢ(λ)` to a bracket of width `tol`; the
/// midpoint is the oracle Whittle index of state `i` for indexable
/// instances. Requires `Δᵢ(lo) > 0 > Δᵢ(hi)`.
pub fn bisect_index<F: Scalar>(
    inst: &BanditInstance<F>,
    state: usize,
    bracket: (F, F),
    tol: F,
) -> Result<F, OracleError> {
    require_discounted(inst)?;
    let (mut lo, mut hi) = bracket;
    let vi_tol = (tol * F::from_f64_c(1e-3)).max(F::from_f64_c(1e-13));
    let d_lo = delta_at(inst, state, lo, vi_tol)?;
    let d_hi = delta_at(inst, state, hi, vi_tol)?;
    if !(d_lo > F::zero() && d_hi < F::zero()) {
        return Err(OracleError::NoSignChange {
            state,
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    while hi - lo > tol {
        let mid = (lo + hi) / F::from_f64_c(2.0);
        if mid <= lo || mid >= hi {
            break; // bracket at floating-point resolution
        }
        if delta_at(inst, state, mid, vi_tol)? >= F::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / F::from_f64_c(2.0))
}

#[derive(Debug, Clone)]
pub struct IndexabilityMismatch<F> {
    pub lambda: F,
    pub state: usize,
    pub expected_active: bool,
    pub delta: F,
}

/// Result of checking the index sign condition on a λ grid.
#[derive(Debug, Clone)]
pub struct IndexabilityReport<F> {
    /// Prices tested: midpoints between consecutive distinct candidates
    /// plus endpoints `eps` beyond the candidate range.
    pub tested: Vec<F>,
    pub mismatches: Vec<IndexabilityMismatch<F>>,
}

impl<F> IndexabilityReport<F> {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Verify that for every tested price λ the DP-optimal active set equals
/// the threshold set `{i : λᵢ* > λ}` of the candidate index values, up to
/// indifference-tolerance states. An empty report certifies the index sign
/// condition on the tested grid.
pub fn verify_indexability<F: Scalar>(
    inst: &BanditInstance<F>,
    whittle: &[F],
    eps: F,
) -> Result<IndexabilityReport<F>, OracleError> {
    require_discounted(inst)?;
    if whittle.len() != inst.n() {
        return Err(OracleError::Dimension {
            context: format!(
                "candidate list length {} vs {} states",
                whittle.len(),
                inst.n()
            ),
        });
    }
    let mut sorted = whittle.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite index values"));
    let mut grid = Vec::new();
    grid.push(sorted[0] - eps);
    for pair in sorted.windows(2) {
        let gap_tol = F::from_f64_c(1e-12) * (F::one() + pair[0].abs());
        if pair[1] - pair[0] > gap_tol {
            grid.push((pair[0] + pair[1]) / F::from_f64_c(2.0));
        }
    }
    grid.push(sorted[sorted.len() - 1] + eps);

    let mut mismatches = Vec::new();
    for &lambda in &grid {
        let vi_tol = F::from_f64_c(1e-10) * (F::one() + lambda.abs());
        let sol = solve_price(inst, lambda, vi_tol)?;
        for i in 0..inst.n() {
            if sol.delta[i].abs() <= sol.tol_indifference {
                continue;
            }
            let expected_active = whittle[i] > lambda;
            let actually_active = sol.delta[i] > F::zero();
            if expected_active != actually_active {
                mismatches.push(IndexabilityMismatch {
                    lambda,
                    state: i,
                    expected_active,
                    delta: sol.delta[i],
                });
            }
        }
    }
    Ok(IndexabilityReport {
        tested: grid,
        mismatches,
    })
}

/// One checked identity: a name, the raw residual, and the residual scaled
/// by one plus the magnitude of the quantities involved.
#[derive(Debug, Clone)]
pub struct IdentityCheck<F> {
    pub name: &'static str,
    pub raw: F,
    pub scaled: F,
}

#[derive(Debug, Clone)]
pub struct IdentityReport<F> {
    pub checks: Vec<IdentityCheck<F>>,
    /// Set when the ratio identity is skipped because the resource-metric
    /// difference vanishes.
    pub ratio_undefined: bool,
}

impl<F: Scalar> IdentityReport<F> {
    pub fn max_scaled_residual(&self) -> F {
        self.checks
            .iter()
            .fold(F::zero(), |acc, c| acc.max(c.scaled.abs()))
    }
}

fn weighted<F: Scalar>(p: &[F], v: &[F]) -> F {
    p.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

/// Decomposition-identity checks around the pair `(S, S ∪ {j})`:
///
/// * augmentation: `G_p^{S∪{j}} = G_p^S + g_j^S·x_{pj}^{1,S∪{j}}` and the
///   reward analogue;
/// * the policy decomposition
///   `G_p^π = G_p^S − Σ_{i∈S} g_i^S x_{pi}^{0,π} + Σ_{i∈Sᶜ} g_i^S x_{pi}^{1,π}`
///   (and the reward analogue) for the stationary policies
///   `π ∈ {S, S∪{j}, Sᶜ}`;
/// * the marginal-productivity ratio
///   `λ_j^S = (F_p^{S∪{j}} − F_p^S)/(G_p^{S∪{j}} − G_p^S)`.
pub fn check_identities<F: Scalar>(
    inst: &BanditInstance<F>,
    s: &ActiveSet,
    j: usize,
    p: &[F],
) -> Result<IdentityReport<F>, OracleError> {
    require_discounted(inst)?;
    check_set(inst, s)?;
    check_distribution(inst, p)?;
    if s.contains(j) {
        return Err(OracleError::StateInActiveSet { state: j });
    }

    let (g_s, f_s) = marginal_metrics(inst, s)?;
    let (f_base, g_base) = policy_metrics(inst, s)?;
    let g_p_s = weighted(p, &g_base);
    let f_p_s = weighted(p, &f_base);

    let mut s_aug = s.clone();
    s_aug.insert(j);
    let complement = ActiveSet::from_states(inst.n(), &s.complement_states());

    let mut checks = Vec::new();
    let mut push = |name: &'static str, raw: F, scale_terms: &[F]| {
        let scale = scale_terms.iter().fold(F::one(), |acc, t| acc.max(t.abs()));
        checks.push(IdentityCheck {
            name,
            raw,
            scaled: raw / scale,
        });
    };

    // Augmentation identities.
    let (f_aug, g_aug) = policy_metrics(inst, &s_aug)?;
    let (x1_aug, _) = occupation_measures(inst, &s_aug, p)?;
    let g_p_aug = weighted(p, &g_aug);
    let f_p_aug = weighted(p, &f_aug);
    push(
        "augmentation_g",
        g_p_aug - g_p_s - g_s[j] * x1_aug[j],
        &[g_p_aug, g_p_s],
    );
    push(
        "augmentation_f",
        f_p_aug - f_p_s - f_s[j] * x1_aug[j],
        &[f_p_aug, f_p_s],
    );

    // Policy decompositions against the S-active baseline.
    for (name_g, name_f, policy) in [
        ("decomposition_g_self", "decomposition_f_self", s.clone()),
        (
            "decomposition_g_augmented",
            "decomposition_f_augmented",
            s_aug.clone(),
        ),
        (
            "decomposition_g_complement",
            "decomposition_f_complement",
            complement,
        ),
    ] {
        let (f_pol, g_pol) = policy_metrics(inst, &policy)?;
        let (x1, x0) = occupation_measures(inst, &policy, p)?;
        let mut corr_g = F::zero();
        let mut corr_f = F::zero();
        for i in 0..inst.n() {
            if s.contains(i) {
                corr_g -= g_s[i] * x0[i];
                corr_f -= f_s[i] * x0[i];
            } else {
                corr_g += g_s[i] * x1[i];
                corr_f += f_s[i] * x1[i];
            }
        }
        let g_p_pol = weighted(p, &g_pol);
        let f_p_pol = weighted(p, &f_pol);
        push(
            name_g,
            g_p_pol - (g_p_s + corr_g),
            &[g_p_pol, g_p_s, corr_g],
        );
        push(
            name_f,
            f_p_pol - (f_p_s + corr_f),
            &[f_p_pol, f_p_s, corr_f],
        );
    }

    // Marginal-productivity ratio.
    let dg = g_p_aug - g_p_s;
    let df = f_p_aug - f_p_s;
    let mut ratio_undefined = false;
    if dg == F::zero() {
        ratio_undefined = true;
    } else {
        let lambda_j = f_s[j] / g_s[j];
        push("ratio", lambda_j - df / dg, &[lambda_j, df / dg]);
    }

    Ok(IdentityReport {
        checks,
        ratio_undefined,
    })
}
