// Scratch: silhouette anatomy of the retained, clustered ensemble.
use shiftsep::model::cosine_distance;
use shiftsep::selection::{avg_silhouette, cluster_equal_size, eliminate, run_ensemble, EliminationConfig};
use shiftsep::solver::SolverConfig;
use shiftsep::synth::{generate_random, make_lattice_array, WaveformSpec};

fn main() {
    let p_raw: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let d: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let m = 128;
    let scale = 1.6;
    let waveforms = vec![
        WaveformSpec::GaussianPulse { center: 24.0, width: 5.0 * scale },
        WaveformSpec::DoublePulse {
            center: 64.0,
            width: 4.0 * scale,
            separation: 11.0 * scale,
            second_amplitude: 0.45,
        },
        WaveformSpec::RaisedCosineBurst { center: 102.0, half_width: 12.0 * scale },
    ];
    let array = make_lattice_array(18, 1.0).unwrap();
    let data = generate_random(&waveforms, m, &array, 42, 0.0).unwrap();
    let config = SolverConfig {
        max_iterations: 1000,
        convergence_tol: 1e-6,
        seed: 7,
        ..SolverConfig::default()
    };
    let ens = run_ensemble(&data.v, d, p_raw, &config).unwrap();
    let kept = eliminate(&ens, &EliminationConfig::default()).unwrap();
    let clustered = cluster_equal_size(&kept).unwrap();
    println!("retained {}, silhouette {:.4}", clustered.len(), avg_silhouette(&clustered).unwrap());

    // Per-point a (own cluster), b (nearest other), s.
    let p = clustered.len();
    let mut points: Vec<(Vec<f64>, usize, u64)> = Vec::new();
    for (sol, asg) in clustered.solutions.iter().zip(clustered.assignments.iter()) {
        for (src, &c) in asg.iter().enumerate() {
            points.push((sol.h.row(src), c, sol.seed % 1000));
        }
    }
    let total = points.len();
    let mut rows = Vec::new();
    for i in 0..total {
        let mut sums = vec![0.0; d];
        let mut counts = vec![0usize; d];
        for j in 0..total {
            if i == j { continue; }
            let dist = cosine_distance(&points[i].0, &points[j].0).unwrap();
            sums[points[j].1] += dist;
            counts[points[j].1] += 1;
        }
        let own = points[i].1;
        let a = sums[own] / counts[own] as f64;
        let b = (0..d).filter(|&c| c != own).map(|c| sums[c] / counts[c] as f64).fold(f64::INFINITY, f64::min);
        rows.push((points[i].2, own, a, b, (b - a) / a.max(b)));
    }
    rows.sort_by(|x, y| x.4.partial_cmp(&y.4).unwrap());
    println!("worst points (seed, cluster, a, b, s):");
    for r in rows.iter().take(12) {
        println!("  seed {:>3} cluster {}  a={:.3} b={:.3} s={:.3}", r.0, r.1, r.2, r.3, r.4);
    }
    let _ = p;
}
