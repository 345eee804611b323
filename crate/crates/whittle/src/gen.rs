//! Random instance generation and the runtime/flop benchmark harness.
//!
//! # Generator
//!
//! [`gen_random`] reproduces the standard experimental recipe: transition
//! matrices drawn with Uniform[0,1) entries and row-normalized, active
//! rewards Uniform[0,1), passive rewards zero, and resource consumption
//! equal to the action indicator (`Q⁰ = 0`, `Q¹ = 1`).
//!
//! Instances must be portable across implementations, so the PRNG is
//! pinned rather than borrowed from a library: **SplitMix64**. From a 64-bit
//! seed, each step advances the state by `0x9E3779B97F4A7C15` and returns
//! the mix
//!
//! ```text
//! z  = state;
//! z  = (z ^ (z >> 30)) · 0xBF58476D1CE4E5B9;
//! z  = (z ^ (z >> 27)) · 0x94D049BB133111EB;
//! out = z ^ (z >> 31);
//! ```
//!
//! (wrapping multiplies), and a uniform deviate is `(out >> 11) · 2⁻⁵³`.
//! Draw order: all of `P0` row-major, then all of `P1` row-major, then the
//! `n` active rewards; rows are normalized after drawing.
//!
//! # Benchmark harness
//!
//! [`bench_run`] times the engines' loops separately from initialization:
//! per size one instance is generated, the initial tableau is built once
//! per algorithm (timed), and each repetition re-runs the loop on a fresh
//! copy. Each cell gets one untimed warm-up repetition, timed repetitions
//! are interleaved across algorithms so ambient load perturbs them evenly,
//! and the reported loop time is the median. Flop counts are bit-identical
//! across repetitions and runs.

use std::time::Instant;

use thiserror::Error;

use crate::index::{initial_tableau, run_loop, Direction, EngineKind, EngineOptions};
use crate::linalg::{lu_factor, lu_solve, DenseMatrix, FlopCounter};
use crate::model::{ActiveSetFamily, BanditInstance, Discount};

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform deviate in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn random_parts(n: usize, seed: u64) -> (DenseMatrix<f64>, DenseMatrix<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let matrix = |rng: &mut SplitMix64| {
        let mut m = DenseMatrix::from_fn(n, n, |_, _| rng.next_f64());
        for i in 0..n {
            let sum: f64 = m.row(i).iter().sum();
            for v in m.row_mut(i) {
                *v /= sum;
            }
        }
        m
    };
    let p0 = matrix(&mut rng);
    let p1 = matrix(&mut rng);
    let r1 = (0..n).map(|_| rng.next_f64()).collect();
    (p0, p1, r1)
}

/// Random discounted instance: row-normalized Uniform[0,1) transition
/// matrices, Uniform[0,1) active rewards, zero passive rewards, resource
/// consumption equal to the action. Deterministic given `seed`.
pub fn gen_random(n: usize, beta: f64, seed: u64) -> BanditInstance<f64> {
    let (p0, p1, r1) = random_parts(n, seed);
    BanditInstance::new_discrete(
        p0,
        p1,
        vec![0.0; n],
        r1,
        vec![0.0; n],
        vec![1.0; n],
        Discount::Factor(beta),
    )
    .expect("generated instance is valid")
}

/// Same recipe under the average criterion. Uses the identical draw stream,
/// so `gen_random(n, β, seed)` and `gen_random_average(n, seed)` share
/// their transition matrices and rewards.
pub fn gen_random_average(n: usize, seed: u64) -> BanditInstance<f64> {
    let (p0, p1, r1) = random_parts(n, seed);
    BanditInstance::new_discrete(
        p0,
        p1,
        vec![0.0; n],
        r1,
        vec![0.0; n],
        vec![1.0; n],
        Discount::Average,
    )
    .expect("generated instance is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Fp,
    Rp,
    Cp,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Fp => "FP",
            Algo::Rp => "RP",
            Algo::Cp => "CP",
        }
    }

    pub fn engine_kind(&self) -> EngineKind {
        match self {
            Algo::Fp => EngineKind::Fp,
            Algo::Rp => EngineKind::Rp,
            Algo::Cp => EngineKind::Cp(Direction::TopDown),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub algorithm: Algo,
    pub loop_seconds: f64,
    pub init_seconds: f64,
    pub loop_flops: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BenchFailure {
    pub n: usize,
    pub algorithm: Algo,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub algorithms: Vec<Algo>,
    pub reps: usize,
    pub seed: u64,
    pub beta: f64,
    /// Run benchmark cells on worker threads. Loop flop counts stay exact;
    /// wall-clock fields become unreliable, so leave this off when timing
    /// matters.
    pub parallel: bool,
}

impl BenchConfig {
    pub fn new(sizes: Vec<usize>, algorithms: Vec<Algo>, reps: usize, seed: u64) -> Self {
        Self {
            sizes,
            algorithms,
            reps,
            seed,
            beta: 0.8,
            parallel: false,
        }
    }
}

#[derive(Debug, Default)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<BenchFailure>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let k = xs.len();
    if k == 0 {
        return 0.0;
    }
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

fn bench_cell(
    inst: &BanditInstance<f64>,
    n: usize,
    algo: Algo,
    reps: usize,
    seed: u64,
) -> Result<BenchRecord, String> {
    let kind = algo.engine_kind();
    let opts = EngineOptions::default();
    let start = Instant::now();
    let tableau = initial_tableau(inst, kind.base(), None).map_err(|e| e.to_string())?;
    let init_seconds = start.elapsed().as_secs_f64();

    let mut times = Vec::with_capacity(reps);
    let mut flops: Option<u64> = None;
    // One untimed warm-up repetition, then the timed ones.
    for rep in 0..=reps {
        let run = run_loop(tableau.clone(), ActiveSetFamily::Full, kind, &opts)
            .map_err(|e| e.to_string())?;
        if rep == 0 {
            continue;
        }
        times.push(run.loop_seconds);
        let got = run.result.flops;
        if let Some(first) = flops {
            debug_assert_eq!(first, got, "loop flop count must be deterministic");
        }
        flops = Some(got);
    }
    Ok(BenchRecord {
        n,
        algorithm: algo,
        loop_seconds: median(times),
        init_seconds,
        loop_flops: flops.unwrap_or(0),
        seed,
    })
}

/// One size's cells measured together: per algorithm one timed
/// initialization and one untimed warm-up loop, then the timed repetitions
/// interleaved across algorithms so ambient load perturbs them evenly.
fn bench_size(cfg: &BenchConfig, n: usize, outcome: &mut BenchOutcome) {
    struct Cell {
        algo: Algo,
        tableau: crate::index::Tableau<f64>,
        init_seconds: f64,
        times: Vec<f64>,
        flops: u64,
    }

    let inst = gen_random(n, cfg.beta, cfg.seed);
    let opts = EngineOptions::default();
    let mut cells: Vec<Cell> = Vec::new();
    for &algo in &cfg.algorithms {
        let kind = algo.engine_kind();
        let start = Instant::now();
        match initial_tableau(&inst, kind.base(), None) {
            Ok(tableau) => {
                let init_seconds = start.elapsed().as_secs_f64();
                match run_loop(tableau.clone(), ActiveSetFamily::Full, kind, &opts) {
                    Ok(warm) => cells.push(Cell {
                        algo,
                        tableau,
                        init_seconds,
                        times: Vec::with_capacity(cfg.reps),
                        flops: warm.result.flops,
                    }),
                    Err(e) => outcome.failures.push(BenchFailure {
                        n,
                        algorithm: algo,
                        error: e.to_string(),
                    }),
                }
            }
            Err(e) => outcome.failures.push(BenchFailure {
                n,
                algorithm: algo,
                error: e.to_string(),
            }),
        }
    }

    for _ in 0..cfg.reps {
        for cell in &mut cells {
            let kind = cell.algo.engine_kind();
            match run_loop(cell.tableau.clone(), ActiveSetFamily::Full, kind, &opts) {
                Ok(run) => {
                    debug_assert_eq!(cell.flops, run.result.flops);
                    cell.times.push(run.loop_seconds);
                }
                Err(e) => outcome.failures.push(BenchFailure {
                    n,
                    algorithm: cell.algo,
                    error: e.to_string(),
                }),
            }
        }
    }

    for cell in cells {
        outcome.records.push(BenchRecord {
            n,
            algorithm: cell.algo,
            loop_seconds: median(cell.times),
            init_seconds: cell.init_seconds,
            loop_flops: cell.flops,
            seed: cfg.seed,
        });
    }
}

/// Benchmark every `(size, algorithm)` cell: one generated instance per
/// size, `reps` timed loop runs per cell after an untimed warm-up, loop
/// time reported as the median and always excluding tableau
/// initialization. Engine failures are recorded per cell and the run
/// continues.
pub fn bench_run(cfg: &BenchConfig) -> BenchOutcome {
    let mut outcome = BenchOutcome::default();
    if cfg.parallel {
        let cells: Vec<(usize, Algo)> = cfg
            .sizes
            .iter()
            .flat_map(|&n| cfg.algorithms.iter().map(move |&a| (n, a)))
            .collect();
        let results: Vec<Result<BenchRecord, (usize, Algo, String)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = cells
                    .iter()
                    .map(|&(n, algo)| {
                        scope.spawn(move || {
                            let inst = gen_random(n, cfg.beta, cfg.seed);
                            bench_cell(&inst, n, algo, cfg.reps, cfg.seed).map_err(|e| (n, algo, e))
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("bench cell"))
                    .collect()
            });
        for res in results {
            match res {
                Ok(rec) => outcome.records.push(rec),
                Err((n, algorithm, error)) => outcome.failures.push(BenchFailure {
                    n,
                    algorithm,
                    error,
                }),
            }
        }
    } else {
        for &n in &cfg.sizes {
            bench_size(cfg, n, &mut outcome);
        }
    }
    outcome
}

/// CSV rendering of benchmark records; the header is part of the format.
pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("n,algorithm,loop_seconds,init_seconds,loop_flops,seed\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.9},{:.9},{},{}\n",
            r.n,
            r.algorithm.as_str(),
            r.loop_seconds,
            r.init_seconds,
            r.loop_flops,
            r.seed
        ));
    }
    out
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("cubic fit needs at least 4 distinct sizes, got {0}")]
    NotEnoughPoints(usize),
    #[error("rank-deficient design matrix")]
    RankDeficient,
}

/// Ordinary least-squares cubic `y ≈ c₀ + c₁n + c₂n² + c₃n³`.
#[derive(Debug, Clone)]
pub struct CubicFit {
    /// Coefficients `(c₀, c₁, c₂, c₃)`.
    pub coefficients: [f64; 4],
    /// `max |fit(n) − y| / max(1, |y|)` over the fitted points.
    pub max_relative_residual: f64,
}

impl CubicFit {
    pub fn eval(&self, n: f64) -> f64 {
        let c = &self.coefficients;
        ((c[3] * n + c[2]) * n + c[1]) * n + c[0]
    }
}

/// Least-squares cubic fit on basis `(1, n, n², n³)`, solved through the
/// normal equations on a size-normalized basis for conditioning.
pub fn cubic_fit(points: &[(f64, f64)]) -> Result<CubicFit, FitError> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite sizes"));
    xs.dedup();
    if xs.len() < 4 {
        return Err(FitError::NotEnoughPoints(xs.len()));
    }
    let scale = xs.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())).max(1.0);

    let mut normal = DenseMatrix::<f64>::zeros(4, 4);
    let mut rhs = DenseMatrix::<f64>::zeros(4, 1);
    for &(x, y) in points {
        let t = x / scale;
        let basis = [1.0, t, t * t, t * t * t];
        for a in 0..4 {
            for b in 0..4 {
                normal.set(a, b, normal.get(a, b) + basis[a] * basis[b]);
            }
            rhs.set(a, 0, rhs.get(a, 0) + basis[a] * y);
        }
    }
    let mut flops = FlopCounter::new();
    let lu = lu_factor(&normal, 1e-12, &mut flops).map_err(|_| FitError::RankDeficient)?;
    let sol = lu_solve(&lu, &rhs, &mut flops).map_err(|_| FitError::RankDeficient)?;
    let mut coefficients = [0.0; 4];
    for (a, c) in coefficients.iter_mut().enumerate() {
        *c = sol.get(a, 0) / scale.powi(a as i32);
    }
    let fit = CubicFit {
        coefficients,
        max_relative_residual: 0.0,
    };
    let max_relative_residual = points
        .iter()
        .map(|&(x, y)| (fit.eval(x) - y).abs() / y.abs().max(1.0))
        .fold(0.0f64, f64::max);
    Ok(CubicFit {
        max_relative_residual,
        ..fit
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = gen_random(5, 0.8, 42);
        let b = gen_random(5, 0.8, 42);
        assert_eq!(a, b);
        let c = gen_random(5, 0.8, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_rows_are_normalized_and_instances_valid() {
        for seed in [0u64, 7, 1234] {
            let inst = gen_random(11, 0.8, seed);
            assert!(inst.validate().is_valid());
            for i in 0..11 {
                let sum: f64 = inst.psi(0).row(i).iter().sum();
                assert!((sum - 0.8).abs() <= 1e-12, "scaled row sum {sum}");
            }
            assert!(gen_random_average(11, seed).validate().is_valid());
        }
    }

    #[test]
    fn average_variant_shares_the_draw_stream() {
        let disc = gen_random(6, 0.5, 9);
        let avg = gen_random_average(6, 9);
        for i in 0..6 {
            for j in 0..6 {
                let p_disc = disc.psi(1).get(i, j) / 0.5;
                assert!((p_disc - avg.psi(1).get(i, j)).abs() <= 1e-15);
            }
        }
        assert_eq!(disc.r(1), avg.r(1));
    }

    #[test]
    fn bench_smoke_produces_expected_cells() {
        let cfg = BenchConfig::new(vec![20, 30], vec![Algo::Fp, Algo::Cp], 3, 5);
        let out = bench_run(&cfg);
        assert!(out.failures.is_empty());
        assert_eq!(out.records.len(), 4);
        for rec in &out.records {
            assert!(rec.loop_seconds >= 0.0 && rec.init_seconds >= 0.0);
            assert!(rec.loop_flops > 0);
        }
        let csv = records_to_csv(&out.records);
        assert!(csv.starts_with("n,algorithm,loop_seconds,init_seconds,loop_flops,seed\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn bench_flops_are_reproducible() {
        let cfg = BenchConfig::new(vec![25], vec![Algo::Fp, Algo::Rp, Algo::Cp], 2, 11);
        let a = bench_run(&cfg);
        let b = bench_run(&cfg);
        let flops = |o: &BenchOutcome| o.records.iter().map(|r| r.loop_flops).collect::<Vec<_>>();
        assert_eq!(flops(&a), flops(&b));
    }

    #[test]
    fn parallel_mode_reports_the_same_flops() {
        let mut cfg = BenchConfig::new(vec![15, 25], vec![Algo::Fp, Algo::Rp], 1, 3);
        let serial = bench_run(&cfg);
        cfg.parallel = true;
        let par = bench_run(&cfg);
        let key = |o: &BenchOutcome| {
            let mut v: Vec<(usize, &str, u64)> = o
                .records
                .iter()
                .map(|r| (r.n, r.algorithm.as_str(), r.loop_flops))
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&serial), key(&par));
    }

    #[test]
    fn cubic_fit_recovers_exact_cubics() {
        let points: Vec<(f64, f64)> = [50.0, 100.0, 150.0, 200.0, 400.0]
            .iter()
            .map(|&n| (n, 2.0 * n * n * n))
            .collect();
        let fit = cubic_fit(&points).unwrap();
        assert!((fit.coefficients[3] - 2.0).abs() <= 1e-6, "{fit:?}");
        assert!(fit.coefficients[2].abs() <= 1e-3);
        assert!(fit.max_relative_residual <= 1e-9);
    }

    #[test]
    fn cubic_fit_requires_four_distinct_sizes() {
        let points = vec![(50.0, 1.0), (50.0, 1.1), (100.0, 2.0), (150.0, 3.0)];
        assert!(matches!(
            cubic_fit(&points),
            Err(FitError::NotEnoughPoints(3))
        ));
    }

    #[test]
    fn fp_flop_counts_fit_the_two_thirds_cubic() {
        let cfg = BenchConfig::new(vec![50, 100, 150, 200], vec![Algo::Fp], 1, 0);
        let out = bench_run(&cfg);
        let pts: Vec<(f64, f64)> = out
            .records
            .iter()
            .map(|r| (r.n as f64, r.loop_flops as f64))
            .collect();
        let fit = cubic_fit(&pts).unwrap();
        let c3 = fit.coefficients[3];
        assert!((0.6..=0.74).contains(&c3), "leading coefficient {c3}");
    }

    #[test]
    fn rp_and_cp_flop_fits_match_their_counts() {
        for (algo, expect) in [(Algo::Rp, 1.0), (Algo::Cp, 2.0)] {
            let cfg = BenchConfig::new(vec![50, 100, 150, 200], vec![algo], 1, 0);
            let out = bench_run(&cfg);
            let pts: Vec<(f64, f64)> = out
                .records
                .iter()
                .map(|r| (r.n as f64, r.loop_flops as f64))
                .collect();
            let c3 = cubic_fit(&pts).unwrap().coefficients[3];
            assert!(
                (c3 - expect).abs() <= 0.1 * expect,
                "{}: c3 = {c3}, expected ≈ {expect}",
                algo.as_str()
            );
        }
    }
}
