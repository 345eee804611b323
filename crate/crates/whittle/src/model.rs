//! Restless-bandit instances, validation, and active-set families.
//!
//! An instance holds the discrete-stage data of a two-action semi-Markov
//! project: per-action transition transforms `ψᵃ` (for a discrete-time chain
//! with discount factor β these are `β·Pᵃ`; under the average criterion the
//! embedded transition probabilities), per-stage rewards `rᵃ`, per-stage
//! resource consumptions `qᵃ`, and the stage-length surrogates
//! `m̃ᵢᵃ = (1−ψᵢᵃ)/α` (mean stage lengths when the discount rate vanishes).
//!
//! State ids are dense integers `0..n−1`; any external labeling is the
//! caller's concern. Instances are immutable after construction and safe to
//! share across concurrent computations.

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Row-sum tolerance for stochastic matrices (absolute, per row).
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Discounted,
    Average,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Discounted => "discounted",
            Criterion::Average => "average",
        }
    }
}

/// Discounting mode for the discrete-time constructor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discount {
    /// Discount factor β ∈ (0, 1); transition transforms become `β·Pᵃ`.
    Factor(f64),
    /// Long-run average criterion; transforms are the probabilities `Pᵃ`.
    Average,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("P{action} row {state} is not stochastic: sum {sum}")]
    NonStochasticRow { action: u8, state: usize, sum: f64 },
    #[error("beta must lie in (0,1), got {0}")]
    BetaRange(f64),
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("active set is not a member of the {family} family")]
    NotInFamily { family: &'static str },
}

/// One violated invariant, with coordinates, as a human-readable line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        write!(f, "{}", self.violations.join("; "))
    }
}

/// Model data for one restless-bandit project.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance<F> {
    n: usize,
    criterion: Criterion,
    psi0: DenseMatrix<F>,
    psi1: DenseMatrix<F>,
    r0: Vec<F>,
    r1: Vec<F>,
    q0: Vec<F>,
    q1: Vec<F>,
    mtilde0: Vec<F>,
    mtilde1: Vec<F>,
}

impl<F: Scalar> BanditInstance<F> {
    /// Semi-Markov constructor from raw per-stage aggregates.
    #[allow(clippy::too_many_arguments)]
    pub fn new_semi_markov(
        criterion: Criterion,
        psi0: DenseMatrix<F>,
        psi1: DenseMatrix<F>,
        r0: Vec<F>,
        r1: Vec<F>,
        q0: Vec<F>,
        q1: Vec<F>,
        mtilde0: Vec<F>,
        mtilde1: Vec<F>,
    ) -> Result<Self, ModelError> {
        let n = psi0.rows();
        if n == 0 {
            return Err(ModelError::Dimension {
                context: "an instance needs at least one state".to_string(),
            });
        }
        for (name, m) in [("psi0", &psi0), ("psi1", &psi1)] {
            if m.rows() != n || m.cols() != n {
                return Err(ModelError::Dimension {
                    context: format!("{name} is {}x{}, expected {n}x{n}", m.rows(), m.cols()),
                });
            }
        }
        for (name, v) in [
            ("R0", &r0),
            ("R1", &r1),
            ("Q0", &q0),
            ("Q1", &q1),
            ("mtilde0", &mtilde0),
            ("mtilde1", &mtilde1),
        ] {
            if v.len() != n {
                return Err(ModelError::Dimension {
                    context: format!("{name} has length {}, expected {n}", v.len()),
                });
            }
        }
        let inst = Self {
            n,
            criterion,
            psi0,
            psi1,
            r0,
            r1,
            q0,
            q1,
            mtilde0,
            mtilde1,
        };
        let report = inst.validate();
        if !report.is_valid() {
            return Err(ModelError::Invalid(report));
        }
        Ok(inst)
    }

    /// Discrete-time Markov constructor.
    ///
    /// `psiᵃ = β·Pᵃ` (discounted) or `Pᵃ` (average). Both `m̃` columns are
    /// set to the all-ones vector: a common positive scaling of both columns
    /// leaves the initialization system equivalent, and 1 is the
    /// scaling-free representative.
    #[allow(clippy::too_many_arguments)]
    pub fn new_discrete(
        p0: DenseMatrix<F>,
        p1: DenseMatrix<F>,
        r0: Vec<F>,
        r1: Vec<F>,
        q0: Vec<F>,
        q1: Vec<F>,
        discount: Discount,
    ) -> Result<Self, ModelError> {
        let n = p0.rows();
        for (name, m, action) in [("P0", &p0, 0u8), ("P1", &p1, 1u8)] {
            if m.rows() != n || m.cols() != n {
                return Err(ModelError::Dimension {
                    context: format!("{name} is {}x{}, expected {n}x{n}", m.rows(), m.cols()),
                });
            }
            for i in 0..n {
                let sum: F = m.row(i).iter().copied().sum();
                let err = (sum - F::one()).abs();
                if err > F::from_f64_c(ROW_SUM_TOL) {
                    return Err(ModelError::NonStochasticRow {
                        action,
                        state: i,
                        sum: sum.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        let (criterion, scale) = match discount {
            Discount::Factor(beta) => {
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(ModelError::BetaRange(beta));
                }
                (Criterion::Discounted, F::from_f64_c(beta))
            }
            Discount::Average => (Criterion::Average, F::one()),
        };
        let scale_matrix = |m: &DenseMatrix<F>| {
            DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| scale * m.get(i, j))
        };
        Self::new_semi_markov(
            criterion,
            scale_matrix(&p0),
            scale_matrix(&p1),
            r0,
            r1,
            q0,
            q1,
            vec![F::one(); n],
            vec![F::one(); n],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn psi(&self, action: u8) -> &DenseMatrix<F> {
        match action {
            0 => &self.psi0,
            _ => &self.psi1,
        }
    }

    pub fn r(&self, action: u8) -> &[F] {
        match action {
            0 => &self.r0,
            _ => &self.r1,
        }
    }

    pub fn q(&self, action: u8) -> &[F] {
        match action {
            0 => &self.q0,
            _ => &self.q1,
        }
    }

    pub fn mtilde(&self, action: u8) -> &[F] {
        match action {
            0 => &self.mtilde0,
            _ => &self.mtilde1,
        }
    }

    /// Check every instance invariant; the report lists each violation with
    /// state/action coordinates and is empty for a valid instance.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let row_tol = F::from_f64_c(ROW_SUM_TOL);
        for (action, psi) in [(0u8, &self.psi0), (1u8, &self.psi1)] {
            for i in 0..self.n {
                let mut sum = F::zero();
                for (j, &v) in psi.row(i).iter().enumerate() {
                    if !v.is_finite() {
                        violations.push(format!("psi{action}[{i}][{j}] is not finite"));
                    } else if v < F::zero() {
                        violations.push(format!("psi{action}[{i}][{j}] = {v} is negative"));
                    }
                    sum += v;
                }
                match self.criterion {
                    Criterion::Discounted => {
                        if !(sum < F::one()) {
                            violations.push(format!(
                                "psi{action} row {i} sums to {sum}, must be < 1 under the discounted criterion"
                            ));
                        }
                    }
                    Criterion::Average => {
                        if (sum - F::one()).abs() > row_tol {
                            violations.push(format!(
                                "psi{action} row {i} sums to {sum}, must equal 1 within {ROW_SUM_TOL:e} under the average criterion"
                            ));
                        }
                    }
                }
            }
        }
        for (action, mt) in [(0u8, &self.mtilde0), (1u8, &self.mtilde1)] {
            for (i, &v) in mt.iter().enumerate() {
                if !(v > F::zero()) || !v.is_finite() {
                    violations.push(format!("mtilde{action}[{i}] = {v} must be positive"));
                }
            }
        }
        for (name, v) in [("r0", &self.r0), ("r1", &self.r1)] {
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    violations.push(format!("{name}[{i}] is not finite"));
                }
            }
        }
        for i in 0..self.n {
            let q0 = self.q0[i];
            let q1 = self.q1[i];
            if !q1.is_finite() || !q0.is_finite() {
                violations.push(format!("q at state {i} is not finite"));
                continue;
            }
            if !(q1 > F::zero()) {
                violations.push(format!("q¹ must be positive at state {i} (got {q1})"));
            }
            if q0 < F::zero() {
                violations.push(format!("q⁰ must be non-negative at state {i} (got {q0})"));
            }
            if q1 < q0 {
                violations.push(format!(
                    "q¹ must dominate q⁰ at state {i} (q¹ = {q1} < q⁰ = {q0})"
                ));
            }
        }
        ValidationReport { violations }
    }

    /// True iff the directed graph with an arc `(i, j)` whenever
    /// `ψᵢⱼ⁰ > 0` or `ψᵢⱼ¹ > 0` is strongly connected.
    pub fn is_communicating(&self) -> bool {
        let n = self.n;
        if n <= 1 {
            return true;
        }
        let arc =
            |i: usize, j: usize| self.psi0.get(i, j) > F::zero() || self.psi1.get(i, j) > F::zero();
        let reaches_all = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let connected = if forward { arc(i, j) } else { arc(j, i) };
                    if connected && !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
            count == n
        };
        reaches_all(true) && reaches_all(false)
    }
}

/// Subset of states where the active action is taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    member: Vec<bool>,
}

impl ActiveSet {
    pub fn empty(n: usize) -> Self {
        Self {
            member: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            member: vec![true; n],
        }
    }

    pub fn from_states(n: usize, states: &[usize]) -> Self {
        let mut s = Self::empty(n);
        for &i in states {
            s.member[i] = true;
        }
        s
    }

    pub fn n(&self) -> usize {
        self.member.len()
    }

    pub fn cardinality(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn contains(&self, state: usize) -> bool {
        self.member[state]
    }

    pub fn insert(&mut self, state: usize) {
        self.member[state] = true;
    }

    pub fn remove(&mut self, state: usize) {
        self.member[state] = false;
    }

    /// Active states in ascending order.
    pub fn states(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.member[i]).collect()
    }

    /// Passive states (the complement) in ascending order.
    pub fn complement_states(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.member[i]).collect()
    }

    /// True iff the set is a prefix `{0, …, m−1}` of the state ordering.
    pub fn is_prefix(&self) -> bool {
        let mut seen_passive = false;
        for &b in &self.member {
            if b && seen_passive {
                return false;
            }
            if !b {
                seen_passive = true;
            }
        }
        true
    }
}

/// Postulated family of candidate active sets.
///
/// `Full` is the power set `2^𝒩`; `Threshold` is the nested chain
/// `∅ ⊂ {0} ⊂ {0,1} ⊂ … ⊂ 𝒩`. Both satisfy the boundary-connectedness
/// requirements: every nonempty member has a nonempty inner boundary and
/// every proper member a nonempty outer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveSetFamily {
    Full,
    Threshold,
}

impl ActiveSetFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActiveSetFamily::Full => "full",
            ActiveSetFamily::Threshold => "threshold",
        }
    }

    pub fn contains(&self, s: &ActiveSet) -> bool {
        match self {
            ActiveSetFamily::Full => true,
            ActiveSetFamily::Threshold => s.is_prefix(),
        }
    }

    /// States `j ∉ S` with `S ∪ {j}` in the family, ascending.
    pub fn outer_boundary(&self, s: &ActiveSet) -> Result<Vec<usize>, ModelError> {
        if !self.contains(s) {
            return Err(ModelError::NotInFamily {
                family: self.as_str(),
            });
        }
        Ok(match self {
            ActiveSetFamily::Full => s.complement_states(),
            ActiveSetFamily::Threshold => {
                let k = s.cardinality();
                if k < s.n() {
                    vec![k]
                } else {
                    vec![]
                }
            }
        })
    }

    /// States `i ∈ S` with `S ∖ {i}` in the family, ascending.
    pub fn inner_boundary(&self, s: &ActiveSet) -> Result<Vec<usize>, ModelError> {
        if !self.contains(s) {
            return Err(ModelError::NotInFamily {
                family: self.as_str(),
            });
        }
        Ok(match self {
            ActiveSetFamily::Full => s.states(),
            ActiveSetFamily::Threshold => {
                let k = s.cardinality();
                if k > 0 {
                    vec![k - 1]
                } else {
                    vec![]
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::e2;

    #[test]
    fn single_state_discrete_constructor() {
        let inst = BanditInstance::new_discrete(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![0.0],
            vec![2.0],
            vec![0.0],
            vec![1.0],
            Discount::Factor(0.8),
        )
        .unwrap();
        assert_eq!(inst.psi(0).get(0, 0), 0.8);
        assert_eq!(inst.psi(1).get(0, 0), 0.8);
        assert_eq!(inst.mtilde(0), &[1.0]);
    }

    #[test]
    fn e2_transforms_are_scaled_probabilities() {
        let inst = e2();
        assert_eq!(inst.psi(0).row(0), &[0.8, 0.0]);
        assert_eq!(inst.psi(0).row(1), &[0.0, 0.8]);
        assert_eq!(inst.psi(1).row(0), &[0.0, 0.8]);
        assert_eq!(inst.psi(1).row(1), &[0.0, 0.8]);
        assert!(inst.validate().is_valid());
    }

    #[test]
    fn empty_state_space_is_rejected() {
        let got = BanditInstance::<f64>::new_semi_markov(
            Criterion::Discounted,
            DenseMatrix::zeros(0, 0),
            DenseMatrix::zeros(0, 0),
            vec![],
            vec![],
            vec![],
            vec![],
            vec![],
            vec![],
        );
        assert!(matches!(got, Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn beta_outside_unit_interval_is_rejected() {
        let p = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let r = vec![0.0];
        let q = vec![1.0];
        for beta in [0.0, 1.0, 1.5, -0.2] {
            let got = BanditInstance::new_discrete(
                p.clone(),
                p.clone(),
                r.clone(),
                r.clone(),
                r.clone(),
                q.clone(),
                Discount::Factor(beta),
            );
            assert!(matches!(got, Err(ModelError::BetaRange(_))), "beta={beta}");
        }
    }

    #[test]
    fn non_stochastic_row_is_rejected() {
        let p0 = DenseMatrix::from_rows(&[vec![0.6, 0.7], vec![0.0, 1.0]]).unwrap();
        let p1 = DenseMatrix::identity(2);
        let got = BanditInstance::new_discrete(
            p0,
            p1,
            vec![0.0; 2],
            vec![1.0; 2],
            vec![0.0; 2],
            vec![1.0; 2],
            Discount::Factor(0.8),
        );
        assert!(matches!(
            got,
            Err(ModelError::NonStochasticRow {
                action: 0,
                state: 0,
                ..
            })
        ));
    }

    #[test]
    fn validate_reports_nonpositive_active_consumption_with_coordinates() {
        let mut inst = e2();
        inst.q1[0] = 0.0;
        let report = inst.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("q¹ must be positive at state 0")));
    }

    #[test]
    fn validate_reports_bad_row_sum() {
        let mut inst = e2();
        inst.psi0.set(0, 1, 0.5); // row 0 now sums to 1.3
        let report = inst.validate();
        assert!(report.violations.iter().any(|v| v.contains("row 0 sums")));
    }

    #[test]
    fn validate_accepts_e2() {
        assert!(e2().validate().is_valid());
    }

    #[test]
    fn e2_is_not_communicating() {
        // State 0 is unreachable from state 1 under either action.
        assert!(!e2().is_communicating());
    }

    #[test]
    fn irreducible_cycle_is_communicating() {
        let p = DenseMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let inst = BanditInstance::new_discrete(
            p.clone(),
            p,
            vec![0.0; 3],
            vec![1.0; 3],
            vec![0.0; 3],
            vec![1.0; 3],
            Discount::Factor(0.8),
        )
        .unwrap();
        assert!(inst.is_communicating());
    }

    #[test]
    fn single_state_is_communicating() {
        let inst = BanditInstance::new_discrete(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![0.0],
            vec![2.0],
            vec![0.0],
            vec![1.0],
            Discount::Factor(0.8),
        )
        .unwrap();
        assert!(inst.is_communicating());
    }

    #[test]
    fn full_family_boundaries() {
        let s = ActiveSet::from_states(3, &[1]);
        let fam = ActiveSetFamily::Full;
        assert_eq!(fam.outer_boundary(&s).unwrap(), vec![0, 2]);
        assert_eq!(fam.inner_boundary(&s).unwrap(), vec![1]);
        let all = ActiveSet::full(3);
        assert!(fam.outer_boundary(&all).unwrap().is_empty());
        assert_eq!(
            fam.outer_boundary(&ActiveSet::empty(3)).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn threshold_family_boundaries() {
        let fam = ActiveSetFamily::Threshold;
        let s = ActiveSet::from_states(3, &[0, 1]);
        assert_eq!(fam.outer_boundary(&s).unwrap(), vec![2]);
        assert_eq!(fam.inner_boundary(&s).unwrap(), vec![1]);
        assert!(fam.outer_boundary(&ActiveSet::full(3)).unwrap().is_empty());
        assert!(fam.inner_boundary(&ActiveSet::empty(3)).unwrap().is_empty());
    }

    #[test]
    fn threshold_family_rejects_non_prefix_sets() {
        let fam = ActiveSetFamily::Threshold;
        let s = ActiveSet::from_states(3, &[1]);
        assert!(matches!(
            fam.outer_boundary(&s),
            Err(ModelError::NotInFamily { .. })
        ));
    }
}
