//! Source localization: estimate source coordinates and the shared
//! propagation speed from ensemble delay statistics by multistart weighted
//! least squares on delay differences, with two-stage outlier pruning.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SensorArray;
use crate::optim::{Bounds, NelderMead};
use crate::seed::derive_seed;
use crate::selection::RunEnsemble;

/// Default floor for delay standard deviations, in samples; prevents
/// division blow-up for ensembles whose members agree exactly.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Per (source, sensor) sample mean and standard deviation of the aligned
/// delays across retained solutions. Both matrices are K x N.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayStatistics {
    pub mean_tau: Array2<f64>,
    pub sigma_tau: Array2<f64>,
}

impl DelayStatistics {
    pub fn new(mean_tau: Array2<f64>, sigma_tau: Array2<f64>) -> Result<Self> {
        if mean_tau.dim() != sigma_tau.dim() {
            return Err(Error::invalid("mean and sigma matrices must share dimensions"));
        }
        if sigma_tau.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::invalid("sigma entries must be positive and finite"));
        }
        Ok(DelayStatistics { mean_tau, sigma_tau })
    }

    pub fn n_sources(&self) -> usize {
        self.mean_tau.nrows()
    }

    pub fn n_sensors(&self) -> usize {
        self.mean_tau.ncols()
    }

    /// Reference sensor per source: the one with the smallest mean delay.
    pub fn reference_sensors(&self) -> Vec<usize> {
        (0..self.n_sources())
            .map(|source| {
                let row = self.mean_tau.row(source);
                let mut best = 0usize;
                for (idx, &value) in row.iter().enumerate() {
                    if value < row[best] {
                        best = idx;
                    }
                }
                best
            })
            .collect()
    }
}

/// Cluster-aligned delay statistics of a retained ensemble.
pub fn build_delay_stats(ensemble: &RunEnsemble) -> Result<DelayStatistics> {
    build_delay_stats_with_floor(ensemble, SIGMA_FLOOR)
}

pub fn build_delay_stats_with_floor(ensemble: &RunEnsemble, sigma_floor: f64) -> Result<DelayStatistics> {
    if !ensemble.is_clustered() {
        return Err(Error::invalid("ensemble is not clustered"));
    }
    let p = ensemble.len();
    if p < 2 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 2 solutions for delay statistics, got {p}"
        )));
    }
    let k = ensemble.d;
    let n = ensemble.solutions[0].n_sensors();
    let mut mean = Array2::<f64>::zeros((k, n));
    let mut sigma = Array2::<f64>::zeros((k, n));
    for cluster in 0..k {
        for sensor in 0..n {
            let values: Vec<f64> = ensemble
                .solutions
                .iter()
                .zip(ensemble.assignments.iter())
                .map(|(sol, assignment)| {
                    let source = assignment
                        .iter()
                        .position(|&c| c == cluster)
                        .expect("assignments are permutations");
                    sol.tau.data()[[sensor, source]]
                })
                .collect();
            let m = values.iter().sum::<f64>() / p as f64;
            let var = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (p as f64 - 1.0);
            mean[[cluster, sensor]] = m;
            sigma[[cluster, sensor]] = var.sqrt().max(sigma_floor);
        }
    }
    DelayStatistics::new(mean, sigma)
}

/// A candidate placement: one (x, y) per source plus the shared speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sources: Vec<(f64, f64)>,
    pub speed: f64,
    pub objective: f64,
}

/// Weighted squared mismatch between observed delay differences and the
/// distance differences implied by the candidate, summed over sources and
/// non-reference sensors.
pub fn objective_f(
    sources: &[(f64, f64)],
    speed: f64,
    stats: &DelayStatistics,
    array: &SensorArray,
) -> Result<f64> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::invalid("speed must be positive"));
    }
    if stats.n_sensors() != array.len() {
        return Err(Error::invalid(format!(
            "statistics cover {} sensors but the array has {}",
            stats.n_sensors(),
            array.len()
        )));
    }
    if sources.len() != stats.n_sources() {
        return Err(Error::invalid(format!(
            "candidate has {} sources but the statistics cover {}",
            sources.len(),
            stats.n_sources()
        )));
    }
    let refs = stats.reference_sensors();
    Ok(objective_f_inner(sources, speed, stats, array, &refs))
}

fn objective_f_inner(
    sources: &[(f64, f64)],
    speed: f64,
    stats: &DelayStatistics,
    array: &SensorArray,
    refs: &[usize],
) -> f64 {
    let coords = array.coordinates();
    let mut total = 0.0;
    for (source, &(sx, sy)) in sources.iter().enumerate() {
        let reference = refs[source];
        let (rx, ry) = coords[reference];
        let r_ref = ((sx - rx).powi(2) + (sy - ry).powi(2)).sqrt();
        let tau_ref = stats.mean_tau[[source, reference]];
        let sigma_ref_sq = stats.sigma_tau[[source, reference]].powi(2);
        for (sensor, &(cx, cy)) in coords.iter().enumerate() {
            if sensor == reference {
                continue;
            }
            let r = ((sx - cx).powi(2) + (sy - cy).powi(2)).sqrt();
            let delay_diff = tau_ref - stats.mean_tau[[source, sensor]];
            let range_diff = (r_ref - r) / speed;
            let weight = (sigma_ref_sq + stats.sigma_tau[[source, sensor]].powi(2)).sqrt();
            total += ((delay_diff - range_diff) / weight).powi(2);
        }
    }
    total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocateConfig {
    pub n_starts: usize,
    pub speed_bounds: (f64, f64),
    /// Coordinate box; `None` dilates the sensor bounding box threefold
    /// about its center.
    pub coord_bounds: Option<((f64, f64), (f64, f64))>,
    pub seed: u64,
}

impl Default for LocateConfig {
    fn default() -> Self {
        LocateConfig {
            n_starts: 1000,
            speed_bounds: (1e-3, 10.0),
            coord_bounds: None,
            seed: 0,
        }
    }
}

/// Estimated source coordinates, shared speed and the retained multistart
/// clouds after pruning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub sources: Vec<(f64, f64)>,
    pub speed: f64,
    pub objective: f64,
    /// Candidates surviving the objective-value prune; equal-objective
    /// solution modes (e.g. reflections across a collinear array) all
    /// appear here.
    pub candidates: Vec<Candidate>,
    /// cloud[j] holds the candidates for source j that also survived the
    /// per-source distance-to-median prune, as (x, y, speed, objective)
    /// rows; exactly ceil(ceil(n_converged/2)/2) per source.
    pub cloud: Vec<Vec<(f64, f64, f64, f64)>>,
}

pub(crate) fn default_coord_bounds(array: &SensorArray) -> ((f64, f64), (f64, f64)) {
    let ((x_lo, x_hi), (y_lo, y_hi)) = array.bounding_box();
    let dilate = |lo: f64, hi: f64| {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let half = if half > 0.0 { 3.0 * half } else { 3.0 * array.l_max().max(1.0) };
        (center - half, center + half)
    };
    (dilate(x_lo, x_hi), dilate(y_lo, y_hi))
}

/// Multistart minimization of the localization objective with two pruning
/// stages: drop the worst half by objective, then per source drop the worst
/// half by distance to the median position.
pub fn locate(
    stats: &DelayStatistics,
    array: &SensorArray,
    config: &LocateConfig,
) -> Result<LocalizationResult> {
    if stats.n_sensors() != array.len() {
        return Err(Error::invalid(format!(
            "statistics cover {} sensors but the array has {}",
            stats.n_sensors(),
            array.len()
        )));
    }
    if config.n_starts == 0 {
        return Err(Error::invalid("n_starts must be at least 1"));
    }
    let (v_lo, v_hi) = config.speed_bounds;
    if !(v_lo.is_finite() && v_hi.is_finite() && 0.0 < v_lo && v_lo < v_hi) {
        return Err(Error::invalid("speed bounds must satisfy 0 < lo < hi"));
    }
    let k = stats.n_sources();
    let ((x_lo, x_hi), (y_lo, y_hi)) = config
        .coord_bounds
        .unwrap_or_else(|| default_coord_bounds(array));
    let dim = 2 * k + 1;
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for _ in 0..k {
        lower.extend_from_slice(&[x_lo, y_lo]);
        upper.extend_from_slice(&[x_hi, y_hi]);
    }
    lower.push(v_lo);
    upper.push(v_hi);
    let bounds = Bounds { lower, upper };

    let refs = stats.reference_sensors();
    let objective = |params: &[f64]| {
        let sources: Vec<(f64, f64)> = (0..k).map(|j| (params[2 * j], params[2 * j + 1])).collect();
        objective_f_inner(&sources, params[dim - 1], stats, array, &refs)
    };

    let starts: Vec<Vec<f64>> = (0..config.n_starts)
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "locate", idx as u64));
            (0..dim)
                .map(|axis| rng.random_range(bounds.lower[axis]..=bounds.upper[axis]))
                .collect()
        })
        .collect();

    let solver = NelderMead::default();
    let mut candidates: Vec<Candidate> = starts
        .par_iter()
        .map(|start| {
            let (x, fx) = solver.minimize(&objective, start, &bounds);
            Candidate {
                sources: (0..k).map(|j| (x[2 * j], x[2 * j + 1])).collect(),
                speed: x[dim - 1],
                objective: fx,
            }
        })
        .filter(|c| c.objective.is_finite())
        .collect();
    if candidates.is_empty() {
        return Err(Error::LocalizationFailed(
            "no multistart run converged to a finite objective".into(),
        ));
    }

    // Stage 1: drop the worst half by objective value.
    candidates.sort_by(|a, b| a.objective.partial_cmp(&b.objective).unwrap_or(std::cmp::Ordering::Equal));
    let keep = candidates.len().div_ceil(2);
    candidates.truncate(keep);

    // Stage 2, per source: drop the worst half by distance to the median
    // position.
    let mut cloud = Vec::with_capacity(k);
    for source in 0..k {
        let xs: Vec<f64> = candidates.iter().map(|c| c.sources[source].0).collect();
        let ys: Vec<f64> = candidates.iter().map(|c| c.sources[source].1).collect();
        let med_x = median(&xs);
        let med_y = median(&ys);
        let mut scored: Vec<(f64, &Candidate)> = candidates
            .iter()
            .map(|c| {
                let (x, y) = c.sources[source];
                (((x - med_x).powi(2) + (y - med_y).powi(2)).sqrt(), c)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let keep_src = scored.len().div_ceil(2);
        cloud.push(
            scored
                .into_iter()
                .take(keep_src)
                .map(|(_, c)| (c.sources[source].0, c.sources[source].1, c.speed, c.objective))
                .collect::<Vec<_>>(),
        );
    }

    let best = candidates[0].clone();
    Ok(LocalizationResult {
        sources: best.sources.clone(),
        speed: best.speed,
        objective: best.objective,
        candidates,
        cloud,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn grid4() -> SensorArray {
        let mut coords = Vec::new();
        for y in 0..2 {
            for x in 0..2 {
                coords.push((x as f64 * 3.0, y as f64 * 3.0));
            }
        }
        SensorArray::new(coords).unwrap()
    }

    fn exact_stats(sources: &[(f64, f64)], speed: f64, array: &SensorArray, sigma: f64) -> DelayStatistics {
        let k = sources.len();
        let n = array.len();
        let mut mean = Array2::zeros((k, n));
        for (j, &(sx, sy)) in sources.iter().enumerate() {
            for (i, &(cx, cy)) in array.coordinates().iter().enumerate() {
                mean[[j, i]] = ((sx - cx).powi(2) + (sy - cy).powi(2)).sqrt() / speed;
            }
        }
        let sig = Array2::from_elem((k, n), sigma);
        DelayStatistics::new(mean, sig).unwrap()
    }

    #[test]
    fn objective_zero_at_truth() {
        let array = grid4();
        let truth = vec![(1.2, 2.0)];
        let stats = exact_stats(&truth, 0.5, &array, 0.01);
        let f = objective_f(&truth, 0.5, &stats, &array).unwrap();
        assert!(f <= 1e-12, "F = {f}");
    }

    #[test]
    fn objective_quadratic_in_sigma() {
        let array = grid4();
        let truth = vec![(1.2, 2.0)];
        let mut stats = exact_stats(&truth, 0.5, &array, 0.01);
        let off = vec![(1.4, 2.2)];
        let f1 = objective_f(&off, 0.52, &stats, &array).unwrap();
        stats.sigma_tau.mapv_inplace(|s| 2.0 * s);
        let f2 = objective_f(&off, 0.52, &stats, &array).unwrap();
        assert!((f1 / f2 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn objective_hand_case() {
        // One source, three sensors; evaluate Eq-style terms by hand.
        let array = SensorArray::new(vec![(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]).unwrap();
        let mean = array![[2.0, 5.0, 4.0]];
        let sigma = array![[0.1, 0.2, 0.3]];
        let stats = DelayStatistics::new(mean, sigma).unwrap();
        // Reference sensor: index 0 (smallest delay 2.0).
        let source = vec![(1.0, 1.0)];
        let speed = 0.8;
        let r0 = 2.0f64.sqrt();
        let r1 = (9.0f64 + 1.0).sqrt();
        let r2 = (1.0f64 + 4.0).sqrt();
        let term1 = (((2.0 - 5.0) - (r0 - r1) / speed) / (0.1f64 * 0.1 + 0.2 * 0.2).sqrt()).powi(2);
        let term2 = (((2.0 - 4.0) - (r0 - r2) / speed) / (0.1f64 * 0.1 + 0.3 * 0.3).sqrt()).powi(2);
        let expect = term1 + term2;
        let got = objective_f(&source, speed, &stats, &array).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect.max(1.0), "{got} vs {expect}");
    }

    #[test]
    fn objective_invariances() {
        let array = grid4();
        let truth = vec![(1.2, 2.0), (4.0, -1.0)];
        let mut stats = exact_stats(&truth, 0.5, &array, 0.05);
        let off = vec![(1.4, 2.2), (4.2, -0.8)];
        let f0 = objective_f(&off, 0.52, &stats, &array).unwrap();

        // Per-source constant delay offset: only differences enter.
        for sensor in 0..array.len() {
            stats.mean_tau[[0, sensor]] += 17.0;
        }
        let f1 = objective_f(&off, 0.52, &stats, &array).unwrap();
        assert!((f0 - f1).abs() <= 1e-9 * (1.0 + f0));

        // Rigid translation of sensors and sources together.
        let shifted_array = SensorArray::new(
            array.coordinates().iter().map(|&(x, y)| (x + 5.0, y - 2.0)).collect(),
        )
        .unwrap();
        let shifted_off: Vec<(f64, f64)> = off.iter().map(|&(x, y)| (x + 5.0, y - 2.0)).collect();
        let f2 = objective_f(&shifted_off, 0.52, &stats, &shifted_array).unwrap();
        assert!((f1 - f2).abs() <= 1e-9 * (1.0 + f1));

        // Joint rescaling of all coordinates and the speed.
        let scale = 2.5;
        let scaled_array = SensorArray::new(
            array.coordinates().iter().map(|&(x, y)| (x * scale, y * scale)).collect(),
        )
        .unwrap();
        let scaled_off: Vec<(f64, f64)> = off.iter().map(|&(x, y)| (x * scale, y * scale)).collect();
        let f3 = objective_f(&scaled_off, 0.52 * scale, &stats, &scaled_array).unwrap();
        assert!((f1 - f3).abs() <= 1e-9 * (1.0 + f1));
    }

    #[test]
    fn objective_rejects_bad_speed() {
        let array = grid4();
        let truth = vec![(1.2, 2.0)];
        let stats = exact_stats(&truth, 0.5, &array, 0.01);
        assert!(objective_f(&truth, 0.0, &stats, &array).is_err());
        assert!(objective_f(&truth, -1.0, &stats, &array).is_err());
    }

    #[test]
    fn build_stats_two_point_formula_and_floor() {
        use crate::model::{DelayMatrix, MixingMatrix, SourceMatrix};
        use crate::selection::RunEnsemble;
        let m = 8;
        let h = SourceMatrix::new(Array2::from_shape_fn((1, m), |(_, j)| {
            (-0.5 * ((j as f64 - 3.0) / 1.5).powi(2)).exp()
        }))
        .unwrap();
        let make = |tau0: f64, seed: u64| {
            crate::model::SolutionTuple::new(
                h.clone(),
                MixingMatrix::new(array![[1.0], [1.0]]).unwrap(),
                DelayMatrix::new(array![[tau0], [0.5]]).unwrap(),
                0.1,
                seed,
            )
            .unwrap()
        };
        let mut ens = RunEnsemble {
            d: 1,
            solutions: vec![make(0.0, 0), make(2.0, 1)],
            assignments: vec![vec![0], vec![0]],
            centroids: vec![h.row(0)],
            avg_silhouette: None,
            cluster_warning: false,
            outliers_dropped: 0,
            unphysical_dropped: 0,
        };
        let stats = build_delay_stats(&ens).unwrap();
        assert!((stats.mean_tau[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((stats.sigma_tau[[0, 0]] - 2.0f64.sqrt()).abs() < 1e-12);
        // Identical solutions: sigma floored, mean exact.
        ens.solutions = vec![make(0.75, 0), make(0.75, 1)];
        let stats = build_delay_stats(&ens).unwrap();
        assert!((stats.mean_tau[[0, 0]] - 0.75).abs() < 1e-15);
        assert_eq!(stats.sigma_tau[[0, 0]], SIGMA_FLOOR);

        ens.solutions.truncate(1);
        ens.assignments.truncate(1);
        assert!(matches!(
            build_delay_stats(&ens),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn build_stats_matches_two_pass_oracle() {
        use crate::model::{DelayMatrix, MixingMatrix, SourceMatrix};
        use crate::selection::RunEnsemble;
        let m = 8;
        let n = 3;
        let p = 12;
        let mut state = 77u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64) / (u32::MAX as f64) * 4.0 - 2.0
        };
        let h = SourceMatrix::new(Array2::from_shape_fn((2, m), |(i, j)| {
            (-0.5 * ((j as f64 - 2.0 - 3.0 * i as f64) / 1.2).powi(2)).exp()
        }))
        .unwrap();
        let mut solutions = Vec::new();
        let mut assignments = Vec::new();
        let mut all_taus: Vec<Array2<f64>> = Vec::new();
        for seed in 0..p {
            let tau = Array2::from_shape_fn((n, 2), |_| next());
            all_taus.push(tau.clone());
            solutions.push(
                crate::model::SolutionTuple::new(
                    h.clone(),
                    MixingMatrix::new(Array2::ones((n, 2))).unwrap(),
                    DelayMatrix::new(tau).unwrap(),
                    0.1,
                    seed,
                )
                .unwrap(),
            );
            assignments.push(vec![0usize, 1usize]);
        }
        let ens = RunEnsemble {
            d: 2,
            solutions,
            assignments,
            centroids: vec![h.row(0), h.row(1)],
            avg_silhouette: None,
            cluster_warning: false,
            outliers_dropped: 0,
            unphysical_dropped: 0,
        };
        let stats = build_delay_stats(&ens).unwrap();
        for cluster in 0..2 {
            for sensor in 0..n {
                let values: Vec<f64> = all_taus.iter().map(|t| t[[sensor, cluster]]).collect();
                let mean = values.iter().sum::<f64>() / p as f64;
                let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p as f64 - 1.0);
                assert!((stats.mean_tau[[cluster, sensor]] - mean).abs() < 1e-12);
                assert!((stats.sigma_tau[[cluster, sensor]] - var.sqrt().max(SIGMA_FLOOR)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn locate_recovers_interior_source() {
        let mut coords = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                coords.push((x as f64 * 3.0, y as f64 * 3.0));
            }
        }
        let array = SensorArray::new(coords).unwrap();
        let truth = vec![(3.0, 7.0)];
        let stats = exact_stats(&truth, 0.5, &array, 0.01);
        let config = LocateConfig {
            n_starts: 60,
            seed: 5,
            ..LocateConfig::default()
        };
        let result = locate(&stats, &array, &config).unwrap();
        assert!((result.sources[0].0 - 3.0).abs() < 1e-3, "{:?}", result.sources);
        assert!((result.sources[0].1 - 7.0).abs() < 1e-3);
        assert!((result.speed - 0.5).abs() < 1e-3);

        // Grid-search oracle: nothing on a coarse grid beats the optimum.
        let mut best_grid = f64::INFINITY;
        for gx in 0..20 {
            for gy in 0..20 {
                for gv in 1..20 {
                    let f = objective_f(
                        &[(gx as f64 * 0.75 - 3.0, gy as f64 * 0.75 - 3.0)],
                        gv as f64 * 0.1,
                        &stats,
                        &array,
                    )
                    .unwrap();
                    best_grid = best_grid.min(f);
                }
            }
        }
        assert!(result.objective <= best_grid + 1e-9);
    }

    #[test]
    fn pruning_counts_are_exact() {
        let array = grid4();
        let truth = vec![(1.0, 1.5)];
        let stats = exact_stats(&truth, 0.5, &array, 0.05);
        let config = LocateConfig {
            n_starts: 37,
            seed: 1,
            ..LocateConfig::default()
        };
        let result = locate(&stats, &array, &config).unwrap();
        let expected = 37usize.div_ceil(2).div_ceil(2);
        for source_cloud in &result.cloud {
            assert_eq!(source_cloud.len(), expected);
        }
    }

    #[test]
    fn collinear_array_surfaces_mirror_modes() {
        // Sensors on the x-axis: a source at (x, y) and its mirror (x, -y)
        // produce identical delays, so both modes must appear in the cloud.
        let array = SensorArray::new(vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (3.0, 0.0),
            (4.0, 0.0),
        ])
        .unwrap();
        let truth = vec![(1.5, 2.0)];
        let stats = exact_stats(&truth, 0.5, &array, 0.01);
        let config = LocateConfig {
            n_starts: 200,
            seed: 9,
            ..LocateConfig::default()
        };
        let result = locate(&stats, &array, &config).unwrap();
        // Both mirror placements minimize the objective equally.
        let f_up = objective_f(&[(1.5, 2.0)], 0.5, &stats, &array).unwrap();
        let f_down = objective_f(&[(1.5, -2.0)], 0.5, &stats, &array).unwrap();
        assert!((f_up - f_down).abs() <= 1e-9 * (1.0 + f_up));
        let near = |target: (f64, f64)| {
            result.candidates.iter().any(|c| {
                let (x, y) = c.sources[0];
                ((x - target.0).powi(2) + (y - target.1).powi(2)).sqrt() < 0.2
            })
        };
        assert!(near((1.5, 2.0)), "upper mode missing");
        assert!(near((1.5, -2.0)), "mirror mode missing");
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
