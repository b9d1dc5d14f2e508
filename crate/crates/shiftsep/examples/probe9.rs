// Scratch: per-run alignment shifts and delay columns, fixture C.
use shiftsep::model::{aligned_cosine_distance, best_alignment};
use shiftsep::selection::run_ensemble;
use shiftsep::solver::SolverConfig;
use shiftsep::synth::{generate_random, make_lattice_array, WaveformSpec};

fn main() {
    let m = 128;
    let waveforms = vec![
        WaveformSpec::GaussianPulse { center: 24.0, width: 7.0 },
        WaveformSpec::RaisedCosineBurst { center: 64.0, half_width: 16.0 },
        WaveformSpec::RaisedCosineBurst { center: 104.0, half_width: 22.0 },
    ];
    let array = make_lattice_array(18, 1.0).unwrap();
    let data = generate_random(&waveforms, m, &array, 42, 0.0).unwrap();
    for j in 0..3 {
        let mean: f64 = (0..18).map(|s| data.truth_tau.data()[[s, j]]).sum::<f64>() / 18.0;
        println!("truth source {j}: mean delay {mean:.2}");
    }
    let config = SolverConfig {
        max_iterations: 1000,
        convergence_tol: 1e-6,
        seed: 7,
        ..SolverConfig::default()
    };
    let ens = run_ensemble(&data.v, 3, 10, &config).unwrap();
    for sol in &ens.solutions {
        println!("run {} R={:.4}", sol.seed % 1000, sol.r);
        for j in 0..3 {
            let truth = data.truth_h.row(j);
            let (mut best_c, mut best_d) = (0usize, f64::INFINITY);
            for c in 0..3 {
                let d = aligned_cosine_distance(&sol.h.row(c), &truth).unwrap();
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            let (s, _) = best_alignment(&sol.h.row(best_c), &truth).unwrap();
            let col: Vec<f64> = (0..18)
                .map(|sensor| (sol.tau.data()[[sensor, best_c]] * 10.0).round() / 10.0)
                .collect();
            println!("  truth {j} -> c{best_c} dist {best_d:.3} shift {s} delays {col:?}");
        }
    }
}
