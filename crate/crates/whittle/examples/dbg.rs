use whittle::gen::{bench_run, gen_random, gen_random_average, Algo, BenchConfig};
use whittle::{fp_index, ActiveSetFamily};

fn main() {
    // Criterion 7 rehearsal.
    let n = 12;
    let seed = 2024;
    let avg = fp_index(&gen_random_average(n, seed), ActiveSetFamily::Full).unwrap();
    let b3 = fp_index(&gen_random(n, 0.999, seed), ActiveSetFamily::Full).unwrap();
    let b4 = fp_index(&gen_random(n, 0.9999, seed), ActiveSetFamily::Full).unwrap();
    println!("avg pcl={} monotone={}", avg.pcl_positive, avg.monotone);
    let mut worst_ratio = 0.0f64;
    let mut worst_abs = 0.0f64;
    for i in 0..n {
        let e3 = (b3.whittle[i] - avg.whittle[i]).abs();
        let e4 = (b4.whittle[i] - avg.whittle[i]).abs();
        worst_abs = worst_abs.max(e4);
        if e3 > 0.0 {
            worst_ratio = worst_ratio.max(e4 / e3);
        }
        if i < 4 {
            println!(
                "state {i}: avg {:.9} e3 {:.3e} e4 {:.3e}",
                avg.whittle[i], e3, e4
            );
        }
    }
    println!("worst e4/e3 ratio {worst_ratio:.4} (need <= 10), worst |e4| {worst_abs:.3e} (need <= 1e-2)");

    // Criterion 6 rehearsal at reduced size first.
    let cfg = BenchConfig::new(vec![1000], vec![Algo::Fp, Algo::Rp, Algo::Cp], 3, 42);
    let t0 = std::time::Instant::now();
    let out = bench_run(&cfg);
    for r in &out.records {
        println!(
            "n={} {} loop {:.3}s init {:.3}s flops {:.3e}",
            r.n,
            r.algorithm.as_str(),
            r.loop_seconds,
            r.init_seconds,
            r.loop_flops as f64
        );
    }
    println!("bench total {:.1}s", t0.elapsed().as_secs_f64());
}
