//! The greedy selection loop and the per-engine pivot kernels.

use std::time::Instant;

use crate::model::ActiveSetFamily;
use crate::scalar::Scalar;

use super::{
    Direction, EngineError, EngineKind, EngineOptions, EngineRun, IndexResult, IndexViolation,
    StepRecord, Tableau, ViolationKind, MONOTONE_TOL_COEFF,
};

pub(super) fn drive<F: Scalar>(
    mut tab: Tableau<F>,
    family: ActiveSetFamily,
    kind: EngineKind,
    opts: &EngineOptions,
) -> Result<EngineRun<F>, EngineError> {
    let n = tab.n();
    let direction = kind.direction();
    let start = Instant::now();

    let mut order = Vec::with_capacity(n);
    let mut whittle = vec![F::nan(); n];
    let mut violations: Vec<IndexViolation> = Vec::new();
    let mut pcl_positive = true;
    let mut monotone = true;
    let mut trace: Option<Vec<StepRecord<F>>> = opts.record_trace.then(Vec::new);
    let mut prev_lambda: Option<F> = None;
    let mut ops: u64 = 0;

    // States not yet selected: the passive states when growing the active
    // set, the active states when shrinking it. Kept ascending.
    let mut work: Vec<usize> = match direction {
        Direction::TopDown => tab.s.complement_states(),
        Direction::BottomUp => tab.s.states(),
    };
    let mut scratch: Vec<F> = vec![F::zero(); n];

    for k in 1..=n {
        let boundary = match direction {
            Direction::TopDown => family.outer_boundary(&tab.s)?,
            Direction::BottomUp => family.inner_boundary(&tab.s)?,
        };
        let Some(&first) = boundary.first() else {
            return Err(EngineError::EmptyBoundary { step: k });
        };

        // Marginal-resource positivity at S_{k-1}. CP retains reduced costs
        // for every state and checks them all; RP and FP check the stored
        // complement entries.
        {
            let mut check = |i: usize| {
                if !(tab.g[i] > tab.pcl_floor) {
                    pcl_positive = false;
                    violations.push(IndexViolation {
                        step: k,
                        state: i,
                        kind: ViolationKind::NonpositiveMarginal,
                        value: tab.g[i].to_f64().unwrap_or(f64::NAN),
                    });
                }
            };
            match kind {
                EngineKind::Cp(_) => (0..n).for_each(&mut check),
                EngineKind::Fp | EngineKind::Rp => work.iter().for_each(|&i| check(i)),
            }
        }

        // Greedy selection over the boundary; ties break to the lowest
        // state id.
        let mut pick = first;
        let mut pick_lambda = tab.f[first] / tab.g[first];
        for &j in boundary.iter().skip(1) {
            let lambda = tab.f[j] / tab.g[j];
            let better = match direction {
                Direction::TopDown => lambda > pick_lambda,
                Direction::BottomUp => lambda < pick_lambda,
            };
            if better || (pick_lambda.is_nan() && !lambda.is_nan()) {
                pick = j;
                pick_lambda = lambda;
            }
        }
        ops += boundary.len() as u64;

        if let Some(tr) = trace.as_mut() {
            let metrics = match kind {
                EngineKind::Cp(_) | EngineKind::Rp => {
                    (0..n).map(|i| (i, tab.g[i], tab.f[i])).collect()
                }
                EngineKind::Fp => work.iter().map(|&i| (i, tab.g[i], tab.f[i])).collect(),
            };
            tr.push(StepRecord {
                step: k,
                active: tab.s.states(),
                selected: pick,
                lambda: pick_lambda,
                metrics,
            });
        }

        whittle[pick] = pick_lambda;
        order.push(pick);
        if let Some(prev) = prev_lambda {
            let tol = F::from_f64_c(MONOTONE_TOL_COEFF) * (F::one() + prev.abs());
            let bad = match direction {
                Direction::TopDown => pick_lambda > prev + tol,
                Direction::BottomUp => pick_lambda < prev - tol,
            };
            if bad || !pick_lambda.is_finite() {
                monotone = false;
                violations.push(IndexViolation {
                    step: k,
                    state: pick,
                    kind: ViolationKind::NonmonotoneIndex,
                    value: pick_lambda.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        prev_lambda = Some(pick_lambda);

        match direction {
            Direction::TopDown => tab.s.insert(pick),
            Direction::BottomUp => tab.s.remove(pick),
        }
        work.retain(|&x| x != pick);
        tab.k = k;

        if k < n {
            let pivot = tab.a.get(pick, pick);
            if !(pivot.abs() > tab.pivot_floor) {
                return Err(EngineError::DegeneratePivot {
                    step: k,
                    state: pick,
                    pivot: pivot.abs().to_f64().unwrap_or(f64::NAN),
                });
            }
            match kind {
                EngineKind::Fp => fp_pivot(&mut tab, pick, &work, &mut scratch, &mut ops),
                EngineKind::Rp => rp_pivot(&mut tab, pick, &work, &mut scratch, &mut ops),
                EngineKind::Cp(_) => cp_pivot(&mut tab, pick, direction, &mut scratch, &mut ops),
            }
        }
    }

    tab.flops.add(ops);
    let loop_seconds = start.elapsed().as_secs_f64();
    Ok(EngineRun {
        result: IndexResult {
            order,
            whittle,
            pcl_positive,
            monotone,
            violations,
            flops: tab.flops.count(),
            direction,
        },
        trace,
        init_seconds: 0.0,
        loop_seconds,
        init_flops: tab.init_flops,
    })
}

/// Minimal-tableau pivot: rank-1 update of the remaining `Sᶜ×Sᶜ` block and
/// pivot-row update of the remaining reduced costs.
fn fp_pivot<F: Scalar>(
    tab: &mut Tableau<F>,
    p: usize,
    rem: &[usize],
    scratch: &mut [F],
    ops: &mut u64,
) {
    let m = rem.len() as u64;
    let inv = F::one() / tab.a.get(p, p);
    {
        let pivot_row = tab.a.row(p);
        for (idx, &c) in rem.iter().enumerate() {
            scratch[idx] = pivot_row[c];
        }
    }
    for &r in rem {
        let mult = tab.a.get(r, p) * inv;
        let row = tab.a.row_mut(r);
        for (idx, &c) in rem.iter().enumerate() {
            row[c] -= mult * scratch[idx];
        }
    }
    let gp = tab.g[p] * inv;
    let fp = tab.f[p] * inv;
    for (idx, &c) in rem.iter().enumerate() {
        tab.g[c] -= gp * scratch[idx];
        tab.f[c] -= fp * scratch[idx];
    }
    *ops += 2 * m * m + 5 * m + 3;
}

/// Reduced-tableau pivot: every remaining complement row is updated across
/// all `n` columns; the reduced-cost rows are updated full-length with the
/// tableau sign convention.
fn rp_pivot<F: Scalar>(
    tab: &mut Tableau<F>,
    p: usize,
    rem: &[usize],
    scratch: &mut [F],
    ops: &mut u64,
) {
    let n = tab.n();
    let inv = F::one() / tab.a.get(p, p);
    scratch.copy_from_slice(tab.a.row(p));
    update_costs_full(tab, p, inv, scratch, Direction::TopDown);
    for &r in rem {
        let mult = tab.a.get(r, p) * inv;
        let row = tab.a.row_mut(r);
        for (c, &w) in scratch.iter().enumerate() {
            if c != p {
                row[c] -= mult * w;
            }
        }
        row[p] = -mult;
    }
    *ops += 2 * (rem.len() as u64) * (n as u64) + 4 * (n as u64) - 1;
}

/// Conventional full-tableau pivot (standard simplex rank-1 update).
fn cp_pivot<F: Scalar>(
    tab: &mut Tableau<F>,
    p: usize,
    direction: Direction,
    scratch: &mut [F],
    ops: &mut u64,
) {
    let n = tab.n();
    let inv = F::one() / tab.a.get(p, p);
    scratch.copy_from_slice(tab.a.row(p));
    update_costs_full(tab, p, inv, scratch, direction);
    for r in 0..n {
        if r == p {
            continue;
        }
        let mult = tab.a.get(r, p) * inv;
        let row = tab.a.row_mut(r);
        for (c, &w) in scratch.iter().enumerate() {
            if c != p {
                row[c] -= mult * w;
            }
        }
        row[p] = -mult;
    }
    {
        let row = tab.a.row_mut(p);
        for (c, &w) in scratch.iter().enumerate() {
            if c != p {
                row[c] = w * inv;
            }
        }
        row[p] = inv;
    }
    *ops += 2 * (n as u64) * (n as u64 - 1) + 5 * (n as u64 - 1) + 3;
}

/// Full-length reduced-cost update used by CP and RP.
///
/// Stored `g`, `f` are unsigned; the tableau holds `+g` on columns of
/// states in `S` and `−g` on the complement. With the membership flag for
/// the pivot state already flipped, the signed update folds to: move every
/// non-pivot entry by `(g_p/a)·A[p][·]` toward members when growing the
/// active set and away from members when shrinking it; the pivot entry is
/// scaled by `1/a`.
fn update_costs_full<F: Scalar>(
    tab: &mut Tableau<F>,
    p: usize,
    inv: F,
    pivot_row: &[F],
    direction: Direction,
) {
    let gp = tab.g[p] * inv;
    let fp = tab.f[p] * inv;
    for (c, &w) in pivot_row.iter().enumerate() {
        if c == p {
            continue;
        }
        let member = tab.s.contains(c);
        let toward = match direction {
            Direction::TopDown => member,
            Direction::BottomUp => !member,
        };
        if toward {
            tab.g[c] += gp * w;
            tab.f[c] += fp * w;
        } else {
            tab.g[c] -= gp * w;
            tab.f[c] -= fp * w;
        }
    }
    tab.g[p] = gp;
    tab.f[p] = fp;
}
