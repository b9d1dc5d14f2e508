// Scratch: compare waveform sets — success rate, gauge jitter, silhouette.
use shiftsep::model::{aligned_cosine_distance, best_alignment};
use shiftsep::selection::{avg_silhouette, cluster_equal_size, eliminate, run_ensemble, EliminationConfig};
use shiftsep::solver::SolverConfig;
use shiftsep::synth::{generate_random, make_lattice_array, WaveformSpec};

fn run_fixture(name: &str, waveforms: Vec<WaveformSpec>, p_raw: usize) {
    let bound: f64 = std::env::var("TAU_BOUND").ok().and_then(|s| s.parse().ok()).unwrap_or(25.6);
    let warmup: usize = std::env::var("TAU_WARMUP").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let period: usize = std::env::var("TAU_PERIOD").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    let iters: usize = std::env::var("MAX_ITER").ok().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let m = 128;
    let array = make_lattice_array(18, 1.0).unwrap();
    let data = generate_random(&waveforms, m, &array, 42, 0.0).unwrap();
    let config = SolverConfig {
        max_iterations: iters,
        convergence_tol: 1e-6,
        seed: 7,
        tau_bound: Some(bound),
        tau_warmup: warmup,
        tau_update_period: period,
        ..SolverConfig::default()
    };
    let ens = run_ensemble(&data.v, 3, p_raw, &config).unwrap();

    let mut successes = 0;
    let mut shifts: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for sol in &ens.solutions {
        let mut worst = 0.0f64;
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
            worst = worst.max(best_d);
            let (s, _) = best_alignment(&sol.h.row(best_c), &truth).unwrap();
            let s = if s > 64 { s - 128 } else { s };
            shifts[j].push(s as f64);
        }
        if worst <= 0.05 {
            successes += 1;
        }
    }
    let jitter: Vec<f64> = shifts
        .iter()
        .map(|v| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        })
        .collect();

    let outliers: usize = ens
        .solutions
        .iter()
        .map(|s| s.tau.data().iter().filter(|t| t.abs() > 20.0).count())
        .sum();
    let (kept_n, sil3) = match eliminate(&ens, &EliminationConfig::default()) {
        Ok(kept) => (
            kept.len(),
            cluster_equal_size(&kept).ok().map(|c| avg_silhouette(&c).unwrap()).unwrap_or(-9.0),
        ),
        Err(_) => (0, -9.0),
    };
    let ens4 = run_ensemble(&data.v, 4, p_raw, &config).unwrap();
    let (kept4_n, sil4) = match eliminate(&ens4, &EliminationConfig::default()) {
        Ok(kept) => (
            kept.len(),
            cluster_equal_size(&kept).ok().map(|c| avg_silhouette(&c).unwrap()).unwrap_or(-9.0),
        ),
        Err(_) => (0, -9.0),
    };
    let kept = kept_n;
    let kept4 = kept4_n;

    println!(
        "{name}: success {successes}/{p_raw}, gauge jitter {:?}, outliers/run {:.1}, kept3 {} sil3 {:.3}, kept4 {} sil4 {:.3}",
        jitter.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>(),
        outliers as f64 / p_raw as f64,
        kept,
        sil3,
        kept4,
        sil4
    );
}

fn main() {
    let p: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    run_fixture(
        "A double0.8 ",
        vec![
            WaveformSpec::GaussianPulse { center: 24.0, width: 8.0 },
            WaveformSpec::DoublePulse { center: 64.0, width: 6.4, separation: 17.6, second_amplitude: 0.8 },
            WaveformSpec::RaisedCosineBurst { center: 102.0, half_width: 19.2 },
        ],
        p,
    );
    run_fixture(
        "B chirp     ",
        vec![
            WaveformSpec::GaussianPulse { center: 24.0, width: 8.0 },
            WaveformSpec::ChirpBurst { center: 64.0, half_width: 22.0, cycles: 3.0 },
            WaveformSpec::RaisedCosineBurst { center: 102.0, half_width: 19.2 },
        ],
        p,
    );
    run_fixture(
        "C unimodal  ",
        vec![
            WaveformSpec::GaussianPulse { center: 24.0, width: 7.0 },
            WaveformSpec::RaisedCosineBurst { center: 64.0, half_width: 16.0 },
            WaveformSpec::RaisedCosineBurst { center: 104.0, half_width: 22.0 },
        ],
        p,
    );
}
