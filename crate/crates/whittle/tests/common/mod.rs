//! Shared helpers for the integration suites.
//!
//! Not every binary uses every helper.
#![allow(dead_code)]

use whittle::gen::SplitMix64;
use whittle::{ActiveSet, BanditInstance, Criterion, DenseMatrix, Discount, Instance};

pub fn e2() -> Instance {
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

/// Random discounted semi-Markov instance consistent with discount rate
/// α = 1: substochastic transforms with `m̃ᵢ = 1 − ψᵢ`.
pub fn random_semi_markov(n: usize, seed: u64) -> Instance {
    let mut rng = SplitMix64::new(seed);
    let transform = |rng: &mut SplitMix64| {
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let raw: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let total: f64 = raw.iter().sum();
            let shrink = 0.3 + 0.6 * rng.next_f64();
            rows.push(
                raw.into_iter()
                    .map(|v| shrink * v / total)
                    .collect::<Vec<f64>>(),
            );
        }
        DenseMatrix::from_rows(&rows).unwrap()
    };
    let psi0 = transform(&mut rng);
    let psi1 = transform(&mut rng);
    let mtilde = |psi: &DenseMatrix<f64>| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - psi.row(i).iter().sum::<f64>())
            .collect()
    };
    let m0 = mtilde(&psi0);
    let m1 = mtilde(&psi1);
    let r0: Vec<f64> = (0..n).map(|_| rng.next_f64() * 0.2).collect();
    let r1: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    let q0: Vec<f64> = (0..n).map(|_| 0.3 * rng.next_f64()).collect();
    let q1: Vec<f64> = q0.iter().map(|&q| q + 0.2 + rng.next_f64()).collect();
    BanditInstance::new_semi_markov(Criterion::Discounted, psi0, psi1, r0, r1, q0, q1, m0, m1)
        .unwrap()
}

/// Random subset of `0..n` that excludes `exclude`, plus one state outside
/// the subset.
pub fn random_set_and_state(n: usize, rng: &mut SplitMix64) -> (ActiveSet, usize) {
    loop {
        let mut states = Vec::new();
        for i in 0..n {
            if rng.next_f64() < 0.5 {
                states.push(i);
            }
        }
        if states.len() == n {
            continue;
        }
        let outside: Vec<usize> = (0..n).filter(|i| !states.contains(i)).collect();
        let j = outside[(rng.next_u64() % outside.len() as u64) as usize];
        return (ActiveSet::from_states(n, &states), j);
    }
}

pub fn random_distribution(n: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.next_f64() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Relative agreement of two index vectors within `coeff·(1 + |value|)`.
pub fn whittle_close(a: &[f64], b: &[f64], coeff: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(&x, &y)| (x - y).abs() <= coeff * (1.0 + x.abs().max(y.abs())))
}

/// Orders must match exactly except at positions whose index values tie
/// within `coeff·(1 + |value|)`.
pub fn orders_agree_up_to_ties(
    order_a: &[usize],
    order_b: &[usize],
    whittle: &[f64],
    coeff: f64,
) -> bool {
    order_a.len() == order_b.len()
        && order_a.iter().zip(order_b).all(|(&a, &b)| {
            a == b || {
                let (wa, wb) = (whittle[a], whittle[b]);
                (wa - wb).abs() <= coeff * (1.0 + wa.abs().max(wb.abs()))
            }
        })
}
