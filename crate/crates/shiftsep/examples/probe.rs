// Scratch harness for tuning fixture sizes; not part of the test suite.
use std::time::Instant;

use shiftsep::model::aligned_cosine_distance;
use shiftsep::solver::{solve, SolverConfig};
use shiftsep::synth::presets;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map(String::as_str).unwrap_or("random-3x18");
    let n_seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let max_iter: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let d: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(3);

    let data = presets::build(preset, 42, Some(0.3)).unwrap();
    let k_true = data.truth_h.n_sources();
    println!(
        "preset={preset} N={} M={} K_true={k_true} solving D={d} max_iter={max_iter}",
        data.v.n_sensors(),
        data.v.n_samples()
    );

    let mut successes = 0;
    let mut total_time = 0.0;
    for seed in 0..n_seeds {
        let config = SolverConfig {
            max_iterations: max_iter,
            seed,
            ..SolverConfig::default()
        };
        let start = Instant::now();
        let outcome = solve(&data.v, d, &config).unwrap();
        let dt = start.elapsed().as_secs_f64();
        total_time += dt;

        let mut dists = Vec::new();
        if d == k_true {
            for j in 0..k_true {
                let truth = data.truth_h.row(j);
                let best = (0..d)
                    .map(|c| aligned_cosine_distance(&outcome.solution.h.row(c), &truth).unwrap())
                    .fold(f64::INFINITY, f64::min);
                dists.push(best);
            }
            if dists.iter().all(|&x| x <= 0.05) {
                successes += 1;
            }
        }
        println!(
            "seed {seed}: iters={} conv={} R={:.5} t={:.2}s dists={:?}",
            outcome.iterations,
            outcome.converged,
            outcome.solution.r,
            dt,
            dists.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    println!(
        "successes: {successes}/{n_seeds}  avg time {:.2}s",
        total_time / n_seeds as f64
    );
}
