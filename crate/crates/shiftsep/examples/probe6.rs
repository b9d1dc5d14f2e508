// Scratch: per-run quality distribution under the ensemble config.
use shiftsep::model::aligned_cosine_distance;
use shiftsep::selection::{eliminate, run_ensemble, EliminationConfig};
use shiftsep::solver::SolverConfig;
use shiftsep::synth::{generate_random, make_lattice_array, WaveformSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let p_raw: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let max_iter: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let d: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let tol: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-6);

    let m = 128;
    let scale = 1.6;
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
    let array = make_lattice_array(18, 1.0).unwrap();
    let data = generate_random(&waveforms, m, &array, 42, 0.0).unwrap();

    // Truth CV per source.
    for j in 0..3 {
        let col: Vec<f64> = (0..18).map(|s| data.truth_tau.data()[[s, j]]).collect();
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let offs: Vec<f64> = col.iter().map(|x| x - min).collect();
        let mean = offs.iter().sum::<f64>() / offs.len() as f64;
        let std = (offs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (offs.len() as f64 - 1.0)).sqrt();
        println!("truth source {j}: CV = {:.3}", std / mean);
    }

    let config = SolverConfig {
        max_iterations: max_iter,
        convergence_tol: tol,
        seed: 7,
        tau_bound: Some(12.8),
        tau_warmup: 25,
        ..SolverConfig::default()
    };
    let ens = run_ensemble(&data.v, d, p_raw, &config).unwrap();
    println!("run  R        worst_dist  cv0    cv1    cv2");
    for sol in &ens.solutions {
        let mut worst = 0.0f64;
        if d == 3 {
            for j in 0..3 {
                let truth = data.truth_h.row(j);
                let best = (0..d)
                    .map(|c| aligned_cosine_distance(&sol.h.row(c), &truth).unwrap())
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
        }
        let mut cvs = Vec::new();
        let median_of = |v: &mut Vec<f64>| -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = v.len() / 2;
            if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) }
        };
        for c in 0..d {
            let col: Vec<f64> = (0..18).map(|s| sol.tau.data()[[s, c]]).collect();
            let med = median_of(&mut col.clone());
            let mad = median_of(&mut col.iter().map(|x| (x - med).abs()).collect());
            let fence = 3.0 * 1.4826 * mad;
            let anchor = col.iter().filter(|&&x| (x - med).abs() <= fence).fold(f64::INFINITY, |a, &x| a.min(x));
            let offs: Vec<f64> = col.iter().map(|x| x - anchor).collect();
            let mean = offs.iter().sum::<f64>() / offs.len() as f64;
            let std = (offs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (offs.len() as f64 - 1.0)).sqrt();
            cvs.push(std / mean);
        }
        println!(
            "{:>4} {:.5} {:.4}     {}",
            sol.seed % 1000,
            sol.r,
            worst,
            cvs.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("  ")
        );
    }
    let kept = eliminate(&ens, &EliminationConfig::default()).unwrap();
    println!("retained {}/{} (outliers {}, unphysical {})", kept.len(), ens.len(), kept.outliers_dropped, kept.unphysical_dropped);
}

// (appended) En route checks live in main2; switch by env var.
