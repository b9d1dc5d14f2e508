// Scratch: success rate vs waveform width and iteration budget.
use std::time::Instant;

use shiftsep::model::aligned_cosine_distance;
use shiftsep::solver::{solve, SolverConfig};
use shiftsep::synth::{generate_random, make_lattice_array, WaveformSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let max_iter: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let scale: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.6);
    let tol: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-8);

    let m = 128;
    let waveforms = vec![
        WaveformSpec::GaussianPulse { center: 24.0, width: 5.0 * scale },
        WaveformSpec::DoublePulse {
            center: 64.0,
            width: 4.0 * scale,
            separation: 11.0 * scale,
            second_amplitude: 0.8,
        },
        WaveformSpec::RaisedCosineBurst { center: 102.0, half_width: 12.0 * scale },
    ];
    // Pairwise similarities.
    let rendered: Vec<Vec<f64>> = waveforms.iter().map(|w| w.generate(m).unwrap()).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let sim = 1.0 - shiftsep::model::cosine_distance(&rendered[i], &rendered[j]).unwrap();
            print!("sim({i},{j})={sim:.3} ");
        }
    }
    println!();

    let array = make_lattice_array(18, 1.0).unwrap();
    let data = generate_random(&waveforms, m, &array, 42, 0.0).unwrap();

    let mut successes = 0;
    let mut dist_sum = 0.0;
    let start = Instant::now();
    let mut iter_sum = 0usize;
    for seed in 0..n_seeds {
        let config = SolverConfig {
            max_iterations: max_iter,
            convergence_tol: tol,
            seed,
            ..SolverConfig::default()
        };
        let outcome = solve(&data.v, 3, &config).unwrap();
        iter_sum += outcome.iterations;
        let mut worst = 0.0f64;
        for j in 0..3 {
            let truth = data.truth_h.row(j);
            let best = (0..3)
                .map(|c| aligned_cosine_distance(&outcome.solution.h.row(c), &truth).unwrap())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        dist_sum += worst;
        if worst <= 0.05 {
            successes += 1;
        }
        println!("seed {seed}: R={:.4} iters={} worst_dist={:.4}", outcome.solution.r, outcome.iterations, worst);
    }
    println!(
        "scale={scale}: successes {successes}/{n_seeds}, mean worst dist {:.4}, avg iters {}, {:.2}s/solve",
        dist_sum / n_seeds as f64,
        iter_sum / n_seeds as usize,
        start.elapsed().as_secs_f64() / n_seeds as f64
    );
}
