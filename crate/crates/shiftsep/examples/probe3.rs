// Scratch diagnosis: are the delays or the waveforms wrong at the stall?
use shiftsep::model::{aligned_cosine_distance, best_alignment};
use shiftsep::solver::{solve, SolverConfig};
use shiftsep::synth::presets;

fn main() {
    let data = presets::build("random-3x18", 42, None).unwrap();
    let n = data.v.n_sensors();
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let iters: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(2000);

    let config = SolverConfig {
        max_iterations: iters,
        seed,
        ..SolverConfig::default()
    };
    let out = solve(&data.v, 3, &config).unwrap().solution;
    println!("R = {:.5}", out.r);

    // Match each truth source to the closest recovered waveform.
    for j in 0..3 {
        let truth = data.truth_h.row(j);
        let (mut best_c, mut best_d) = (0usize, f64::INFINITY);
        for c in 0..3 {
            let d = aligned_cosine_distance(&out.h.row(c), &truth).unwrap();
            if d < best_d {
                best_d = d;
                best_c = c;
            }
        }
        let (shift, _) = best_alignment(&out.h.row(best_c), &truth).unwrap();
        // Truth delays centered per source.
        let mean_true: f64 = (0..n).map(|s| data.truth_tau.data()[[s, j]]).sum::<f64>() / n as f64;
        let mut max_err = 0.0f64;
        let mut errs = Vec::new();
        for sensor in 0..n {
            let t_true = data.truth_tau.data()[[sensor, j]] - mean_true;
            // Estimated delay in the same gauge: est tau + alignment shift
            // (the recovered waveform is the truth delayed by -shift).
            let t_est = out.tau.data()[[sensor, best_c]] - shift as f64;
            let mut err = t_est - t_true;
            // allow a constant offset per source (gauge): subtract median err later
            errs.push(err);
            max_err = max_err.max(err.abs());
        }
        let mean_err: f64 = errs.iter().sum::<f64>() / n as f64;
        let spread: Vec<f64> = errs.iter().map(|e| ((e - mean_err) * 100.0).round() / 100.0).collect();
        println!(
            "truth {j} -> cluster {best_c}: dist {:.4}, delay errors (offset removed): {:?}",
            best_d, spread
        );
    }
}
