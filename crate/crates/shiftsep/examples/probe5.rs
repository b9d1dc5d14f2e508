// Scratch: master-seed scan for clean truth CVs + full selection run.
use std::time::Instant;

use shiftsep::selection::{select_k_detailed, SelectionConfig};
use shiftsep::synth::presets;

fn truth_cvs(data: &shiftsep::synth::SyntheticDataset) -> Vec<f64> {
    let n = data.array.len();
    let k = data.truth_h.n_sources();
    (0..k)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|s| data.truth_tau.data()[[s, j]]).collect();
            let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let offs: Vec<f64> = col.iter().map(|x| x - min).collect();
            let mean = offs.iter().sum::<f64>() / n as f64;
            let std =
                (offs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            std / mean
        })
        .collect()
}

fn main() {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "random-3x18".into());
    let mode = std::env::args().nth(2).unwrap_or_else(|| "scan".into());
    if mode == "scan" {
        for seed in 0..24u64 {
            let data = presets::build(&preset, seed, Some(0.3)).unwrap();
            let cvs = truth_cvs(&data);
            println!(
                "seed {seed}: truth CVs {:?}",
                cvs.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>()
            );
        }
        return;
    }
    let seed: u64 = mode.parse().unwrap();
    let p_raw: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(100);
    let d_max: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(4);
    let data = presets::build(&preset, seed, Some(0.3)).unwrap();
    println!("truth CVs: {:?}", truth_cvs(&data));
    let config = SelectionConfig {
        d_min: 1,
        d_max,
        p_raw,
        solver: shiftsep::solver::SolverConfig {
            seed: 11,
            ..presets::study_solver(data.v.n_samples())
        },
        ..SelectionConfig::default()
    };
    let start = Instant::now();
    let (report, _) = select_k_detailed(&data.v, &config).unwrap();
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    println!("D  silhouette  avg_R     retained  dropped(out/phys)");
    for row in &report.rows {
        println!(
            "{}  {:.4}      {:.5}   {}      {}/{}",
            row.d, row.silhouette, row.avg_r, row.retained, row.outliers_dropped, row.unphysical_dropped
        );
    }
    println!("selected K = {} (fallback {})", report.selected_k, report.fallback);
}
