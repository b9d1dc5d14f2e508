//! Synthetic dataset generation: randomly mixed/delayed signals, and
//! physics-based propagation from placed sources with amplitude decay.
//! Both families come with the ground truth attached so end-to-end checks
//! can compare against it.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    cosine_distance, forward_mix, DelayMatrix, MixingMatrix, ObservationMatrix, SensorArray,
    SourceMatrix,
};

/// Clamp on source-to-sensor range inside the decay laws, in lattice units.
pub const R_MIN: f64 = 1e-3;

/// Parametric waveform library; every generated waveform is nonnegative
/// with unit maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WaveformSpec {
    GaussianPulse {
        center: f64,
        width: f64,
    },
    DoublePulse {
        center: f64,
        width: f64,
        separation: f64,
        second_amplitude: f64,
    },
    RaisedCosineBurst {
        center: f64,
        half_width: f64,
    },
    ChirpBurst {
        center: f64,
        half_width: f64,
        cycles: f64,
    },
    CustomSamples {
        samples: Vec<f64>,
    },
}

impl WaveformSpec {
    /// Render the waveform over `m` samples.
    pub fn generate(&self, m: usize) -> Result<Vec<f64>> {
        if m < 2 {
            return Err(Error::invalid("waveforms need at least 2 samples"));
        }
        let mut out = vec![0.0f64; m];
        match self {
            WaveformSpec::GaussianPulse { center, width } => {
                if *width <= 0.0 {
                    return Err(Error::invalid("gaussian width must be positive"));
                }
                for (i, slot) in out.iter_mut().enumerate() {
                    let x = (i as f64 - center) / width;
                    *slot = (-0.5 * x * x).exp();
                }
            }
            WaveformSpec::DoublePulse {
                center,
                width,
                separation,
                second_amplitude,
            } => {
                if *width <= 0.0 || *separation <= 0.0 {
                    return Err(Error::invalid("double-pulse width and separation must be positive"));
                }
                if !(0.0..=1.0).contains(second_amplitude) {
                    return Err(Error::invalid("second pulse amplitude must lie in [0, 1]"));
                }
                let c1 = center - separation / 2.0;
                let c2 = center + separation / 2.0;
                for (i, slot) in out.iter_mut().enumerate() {
                    let x1 = (i as f64 - c1) / width;
                    let x2 = (i as f64 - c2) / width;
                    *slot = (-0.5 * x1 * x1).exp() + second_amplitude * (-0.5 * x2 * x2).exp();
                }
            }
            WaveformSpec::RaisedCosineBurst { center, half_width } => {
                if *half_width <= 0.0 {
                    return Err(Error::invalid("burst half-width must be positive"));
                }
                for (i, slot) in out.iter_mut().enumerate() {
                    let x = (i as f64 - center) / half_width;
                    if x.abs() <= 1.0 {
                        *slot = 0.5 * (1.0 + (std::f64::consts::PI * x).cos());
                    }
                }
            }
            WaveformSpec::ChirpBurst {
                center,
                half_width,
                cycles,
            } => {
                if *half_width <= 0.0 || *cycles <= 0.0 {
                    return Err(Error::invalid("chirp half-width and cycles must be positive"));
                }
                for (i, slot) in out.iter_mut().enumerate() {
                    let x = (i as f64 - center) / half_width;
                    if x.abs() <= 1.0 {
                        let envelope = 0.5 * (1.0 + (std::f64::consts::PI * x).cos());
                        // Frequency rises across the burst.
                        let t = 0.5 * (x + 1.0);
                        let phase = 2.0 * std::f64::consts::PI * cycles * t * t;
                        *slot = envelope * 0.5 * (1.0 + phase.cos());
                    }
                }
            }
            WaveformSpec::CustomSamples { samples } => {
                if samples.len() != m {
                    return Err(Error::invalid(format!(
                        "custom waveform has {} samples, expected {m}",
                        samples.len()
                    )));
                }
                if samples.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(Error::invalid("custom waveform must be finite and nonnegative"));
                }
                out.copy_from_slice(samples);
            }
        }
        let peak = out.iter().fold(0.0f64, |a, &x| a.max(x));
        if peak <= 0.0 {
            return Err(Error::degenerate("waveform is identically zero over the window"));
        }
        out.iter_mut().for_each(|x| *x /= peak);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayLaw {
    InvSqrtR,
    InvR,
    InvR2,
}

impl DecayLaw {
    pub fn apply(&self, r: f64) -> f64 {
        let r = r.max(R_MIN);
        match self {
            DecayLaw::InvSqrtR => 1.0 / r.sqrt(),
            DecayLaw::InvR => 1.0 / r,
            DecayLaw::InvR2 => 1.0 / (r * r),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecayLaw::InvSqrtR => "inv-sqrt-r",
            DecayLaw::InvR => "inv-r",
            DecayLaw::InvR2 => "inv-r2",
        }
    }
}

/// A generated observation matrix with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub v: ObservationMatrix,
    pub truth_h: SourceMatrix,
    pub truth_w: MixingMatrix,
    pub truth_tau: DelayMatrix,
    pub array: SensorArray,
    pub source_coords: Option<Vec<(f64, f64)>>,
    pub speed: Option<f64>,
    pub decay_law: Option<DecayLaw>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Sensors on a rectangular lattice with the given spacing; the sensor
/// count must factor into a rows x cols rectangle (16 -> 4x4, 18 -> 3x6,
/// 24 -> 4x6).
pub fn make_lattice_array(n_sensors: usize, spacing: f64) -> Result<SensorArray> {
    if n_sensors < 2 {
        return Err(Error::invalid("a lattice needs at least 2 sensors"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid("lattice spacing must be positive"));
    }
    // Most-square factorization, rows <= cols.
    let mut rows = 1;
    let mut r = 1usize;
    while r * r <= n_sensors {
        if n_sensors % r == 0 {
            rows = r;
        }
        r += 1;
    }
    let cols = n_sensors / rows;
    if rows == 1 && n_sensors > 3 {
        return Err(Error::invalid(format!(
            "{n_sensors} sensors do not factor into a rectangular lattice"
        )));
    }
    let mut coords = Vec::with_capacity(n_sensors);
    for row in 0..rows {
        for col in 0..cols {
            coords.push((col as f64 * spacing, row as f64 * spacing));
        }
    }
    SensorArray::new(coords)
}

#[derive(Debug, Clone)]
pub struct RandomMixOptions {
    pub noise_sigma: f64,
    /// Draw fractional delays instead of integers.
    pub fractional_delays: bool,
    /// Upper delay bound; `None` means M/8.
    pub delay_max: Option<f64>,
}

impl Default for RandomMixOptions {
    fn default() -> Self {
        RandomMixOptions {
            noise_sigma: 0.0,
            fractional_delays: false,
            delay_max: None,
        }
    }
}

/// Random mixing: W uniform on (0,1], integer delays uniform on [0, M/8],
/// observations built through the forward model plus optional clipped
/// Gaussian noise.
pub fn generate_random(
    waveforms: &[WaveformSpec],
    m: usize,
    array: &SensorArray,
    seed: u64,
    noise_sigma: f64,
) -> Result<SyntheticDataset> {
    generate_random_with(
        waveforms,
        m,
        array,
        seed,
        &RandomMixOptions {
            noise_sigma,
            ..RandomMixOptions::default()
        },
    )
}

pub fn generate_random_with(
    waveforms: &[WaveformSpec],
    m: usize,
    array: &SensorArray,
    seed: u64,
    options: &RandomMixOptions,
) -> Result<SyntheticDataset> {
    let k = waveforms.len();
    let n = array.len();
    if k == 0 {
        return Err(Error::invalid("at least one waveform is required"));
    }
    if k >= n {
        return Err(Error::invalid(format!(
            "waveform count ({k}) must stay below the sensor count ({n})"
        )));
    }
    if !(options.noise_sigma.is_finite() && options.noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be finite and nonnegative"));
    }
    let mut h = Array2::<f64>::zeros((k, m));
    for (row, spec) in waveforms.iter().enumerate() {
        for (slot, value) in h.row_mut(row).iter_mut().zip(spec.generate(m)?) {
            *slot = value;
        }
    }
    let delay_max = options.delay_max.unwrap_or(m as f64 / 8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_fn((n, k), |_| 1.0 - rng.random::<f64>());
    let tau = Array2::from_shape_fn((n, k), |_| {
        if options.fractional_delays {
            rng.random_range(0.0..=delay_max)
        } else {
            rng.random_range(0..=(delay_max.floor() as i64)) as f64
        }
    });

    let truth_h = SourceMatrix::new(h)?;
    let truth_w = MixingMatrix::new(w)?;
    let truth_tau = DelayMatrix::new(tau)?;
    let clean = forward_mix(&truth_w, &truth_h, &truth_tau)?;
    let v = add_noise(&clean, options.noise_sigma, &mut rng)?;
    Ok(SyntheticDataset {
        v,
        truth_h,
        truth_w,
        truth_tau,
        array: array.clone(),
        source_coords: None,
        speed: None,
        decay_law: None,
        noise_sigma: options.noise_sigma,
        seed,
        warnings: Vec::new(),
    })
}

/// Physics-based generation: delays follow distance over speed, weights
/// follow the amplitude decay law, waveforms propagate unchanged
/// (non-dispersive medium).
#[allow(clippy::too_many_arguments)]
pub fn generate_physical(
    waveforms: &[WaveformSpec],
    m: usize,
    source_coords: &[(f64, f64)],
    amplitudes: &[f64],
    speed: f64,
    decay_law: DecayLaw,
    array: &SensorArray,
    seed: u64,
    noise_sigma: f64,
) -> Result<SyntheticDataset> {
    let k = waveforms.len();
    let n = array.len();
    if k == 0 || source_coords.len() != k || amplitudes.len() != k {
        return Err(Error::invalid(
            "waveforms, coordinates and amplitudes must have equal nonzero lengths",
        ));
    }
    if k >= n {
        return Err(Error::invalid(format!(
            "source count ({k}) must stay below the sensor count ({n})"
        )));
    }
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::invalid("propagation speed must be positive"));
    }
    if amplitudes.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::invalid("amplitudes must lie in (0, 1]"));
    }
    let mut h = Array2::<f64>::zeros((k, m));
    for (row, spec) in waveforms.iter().enumerate() {
        for (slot, value) in h.row_mut(row).iter_mut().zip(spec.generate(m)?) {
            *slot = value;
        }
    }
    let mut w = Array2::<f64>::zeros((n, k));
    let mut tau = Array2::<f64>::zeros((n, k));
    let mut warnings = Vec::new();
    for (sensor, &(cx, cy)) in array.coordinates().iter().enumerate() {
        for (source, &(sx, sy)) in source_coords.iter().enumerate() {
            let r = ((sx - cx).powi(2) + (sy - cy).powi(2)).sqrt();
            if r < R_MIN {
                warnings.push(format!(
                    "source {source} nearly coincides with sensor {sensor}; range clamped to {R_MIN}"
                ));
            }
            tau[[sensor, source]] = r / speed;
            w[[sensor, source]] = amplitudes[source] * decay_law.apply(r);
        }
    }
    let truth_h = SourceMatrix::new(h)?;
    let truth_w = MixingMatrix::new(w)?;
    let truth_tau = DelayMatrix::new(tau)?;
    let clean = forward_mix(&truth_w, &truth_h, &truth_tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = add_noise(&clean, noise_sigma, &mut rng)?;
    Ok(SyntheticDataset {
        v,
        truth_h,
        truth_w,
        truth_tau,
        array: array.clone(),
        source_coords: Some(source_coords.to_vec()),
        speed: Some(speed),
        decay_law: Some(decay_law),
        noise_sigma,
        seed,
        warnings,
    })
}

fn add_noise(clean: &ObservationMatrix, sigma: f64, rng: &mut ChaCha8Rng) -> Result<ObservationMatrix> {
    if sigma == 0.0 {
        return Ok(clean.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let noisy = clean.data().mapv(|x| (x + normal.sample(rng)).max(0.0));
    ObservationMatrix::new(noisy)
}

/// Build a pair of waveforms whose cosine similarity matches the target
/// within 0.02, by blending the base with an independent waveform and
/// bisecting the blend weight.
pub fn generate_correlated_pair(
    base: &WaveformSpec,
    m: usize,
    target_similarity: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=0.99).contains(&target_similarity) {
        return Err(Error::invalid("target similarity must lie in [0, 0.99]"));
    }
    let w1 = base.generate(m)?;
    // Independent partner: a pulse placed half a period away from the
    // base's peak, with seed-jittered width.
    let peak = w1
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = m as f64 / 40.0 * (1.0 + 0.3 * rng.random::<f64>());
    let partner_center = (peak as f64 + m as f64 / 2.0) % m as f64;
    let partner = WaveformSpec::GaussianPulse {
        center: partner_center,
        width,
    }
    .generate(m)?;

    let similarity_at = |lambda: f64| -> Result<f64> {
        let blend: Vec<f64> = partner
            .iter()
            .zip(w1.iter())
            .map(|(p, b)| (1.0 - lambda) * p + lambda * b)
            .collect();
        Ok(1.0 - cosine_distance(&blend, &w1)?)
    };

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    if similarity_at(lo)? > target_similarity + 0.02 {
        return Err(Error::ConstructionFailed(format!(
            "independent partner already has similarity {:.3} > target {target_similarity}",
            similarity_at(lo)?
        )));
    }
    let mut lambda = 0.5;
    let mut achieved = similarity_at(lambda)?;
    for _ in 0..100 {
        if (achieved - target_similarity).abs() <= 0.02 {
            break;
        }
        if achieved > target_similarity {
            hi = lambda;
        } else {
            lo = lambda;
        }
        lambda = 0.5 * (lo + hi);
        achieved = similarity_at(lambda)?;
    }
    if (achieved - target_similarity).abs() > 0.02 {
        return Err(Error::ConstructionFailed(format!(
            "could not reach similarity {target_similarity}; best {achieved:.4}"
        )));
    }
    let mut w2: Vec<f64> = partner
        .iter()
        .zip(w1.iter())
        .map(|(p, b)| (1.0 - lambda) * p + lambda * b)
        .collect();
    let peak = w2.iter().fold(0.0f64, |a, &x| a.max(x));
    w2.iter_mut().for_each(|x| *x /= peak);
    Ok((w1, w2))
}

/// Named dataset presets used by the command-line tool and the end-to-end
/// suites.
pub mod presets {
    use super::*;
    use crate::solver::SolverConfig;

    pub const NAMES: &[&str] = &[
        "random-3x18",
        "random-4x24",
        "inside-3x16",
        "outside-3x16",
        "fig1",
        "demo-2x6",
    ];

    /// Solver settings that converge reliably on the presets: a short
    /// factor-organization phase before the first delay update, delays
    /// confined to the initialization window, and a budget sized for
    /// ensemble work rather than single polished runs.
    pub fn study_solver(m: usize) -> SolverConfig {
        SolverConfig {
            max_iterations: 2000,
            convergence_tol: 1e-6,
            tau_bound: Some(m as f64 / 10.0),
            tau_warmup: 25,
            ..SolverConfig::default()
        }
    }

    /// Waveform set for the 18-sensor mixing studies (M = 128): broad
    /// smooth transients with near-disjoint supports.
    pub fn waveforms_3(m: usize) -> Vec<WaveformSpec> {
        let scale = m as f64 / 128.0;
        vec![
            WaveformSpec::GaussianPulse {
                center: 24.0 * scale,
                width: 8.0 * scale,
            },
            WaveformSpec::DoublePulse {
                center: 64.0 * scale,
                width: 6.4 * scale,
                separation: 17.6 * scale,
                second_amplitude: 0.8,
            },
            WaveformSpec::RaisedCosineBurst {
                center: 102.0 * scale,
                half_width: 19.0 * scale,
            },
        ]
    }

    pub fn build(name: &str, seed: u64, similarity: Option<f64>) -> Result<SyntheticDataset> {
        match name {
            "random-3x18" => {
                let array = make_lattice_array(18, 1.0)?;
                generate_random(&waveforms_3(128), 128, &array, seed, 0.0)
            }
            "random-4x24" => {
                let m = 160;
                let array = make_lattice_array(24, 1.0)?;
                let waveforms = vec![
                    WaveformSpec::GaussianPulse { center: 24.0, width: 8.0 },
                    WaveformSpec::DoublePulse {
                        center: 66.0,
                        width: 6.4,
                        separation: 17.6,
                        second_amplitude: 0.8,
                    },
                    WaveformSpec::RaisedCosineBurst { center: 105.0, half_width: 17.0 },
                    WaveformSpec::RaisedCosineBurst { center: 140.0, half_width: 13.0 },
                ];
                generate_random(&waveforms, m, &array, seed, 0.0)
            }
            "inside-3x16" | "outside-3x16" => {
                let m = 192;
                let array = make_lattice_array(16, 3.0)?;
                let waveforms = vec![
                    WaveformSpec::GaussianPulse { center: 40.0, width: 10.0 },
                    WaveformSpec::DoublePulse {
                        center: 90.0,
                        width: 6.4,
                        separation: 17.6,
                        second_amplitude: 0.8,
                    },
                    WaveformSpec::RaisedCosineBurst { center: 140.0, half_width: 22.0 },
                ];
                let coords: Vec<(f64, f64)> = if name == "inside-3x16" {
                    vec![(3.0, 7.0), (3.5, 3.0), (6.8, 5.0)]
                } else {
                    vec![(-3.0, 6.0), (10.0, 3.0), (10.8, 9.6)]
                };
                generate_physical(
                    &waveforms,
                    m,
                    &coords,
                    &[0.9, 0.6, 0.75],
                    0.5,
                    DecayLaw::InvSqrtR,
                    &array,
                    seed,
                    0.0,
                )
            }
            "fig1" => {
                let target = similarity.ok_or_else(|| {
                    Error::invalid("the fig1 preset needs a target similarity")
                })?;
                let m = 128;
                let array = make_lattice_array(18, 1.0)?;
                let base = WaveformSpec::GaussianPulse { center: 24.0, width: 8.0 };
                let (w1, w2) = generate_correlated_pair(&base, m, target, seed)?;
                let waveforms = vec![
                    WaveformSpec::CustomSamples { samples: w1 },
                    WaveformSpec::CustomSamples { samples: w2 },
                    WaveformSpec::RaisedCosineBurst { center: 58.0, half_width: 16.0 },
                ];
                generate_random(&waveforms, m, &array, seed, 0.0)
            }
            "demo-2x6" => {
                let array = make_lattice_array(6, 1.0)?;
                let waveforms = vec![
                    WaveformSpec::GaussianPulse { center: 16.0, width: 4.0 },
                    WaveformSpec::RaisedCosineBurst { center: 44.0, half_width: 10.0 },
                ];
                generate_random(&waveforms, 64, &array, seed, 0.0)
            }
            other => Err(Error::invalid(format!(
                "unknown preset '{other}'; available: {}",
                NAMES.join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reconstruction_error;
    use crate::model::SolutionTuple;

    #[test]
    fn lattice_geometries() {
        let a16 = make_lattice_array(16, 1.0).unwrap();
        assert_eq!(a16.len(), 16);
        assert!((a16.l_max() - 18.0f64.sqrt()).abs() < 1e-12);

        let a4 = make_lattice_array(4, 1.0).unwrap();
        assert!((a4.l_max() - 2.0f64.sqrt()).abs() < 1e-12);

        let a18 = make_lattice_array(18, 1.0).unwrap();
        assert!((a18.l_max() - 29.0f64.sqrt()).abs() < 1e-12);

        let a24 = make_lattice_array(24, 1.0).unwrap();
        assert_eq!(a24.len(), 24);

        assert!(make_lattice_array(7, 1.0).is_err());
        assert!(make_lattice_array(13, 1.0).is_err());
        assert!(make_lattice_array(3, 1.0).is_ok());
        assert!(make_lattice_array(2, 1.0).is_ok());
    }

    #[test]
    fn random_dataset_roundtrip_and_determinism() {
        let array = make_lattice_array(6, 1.0).unwrap();
        let waveforms = presets::waveforms_3(64);
        let a = generate_random(&waveforms, 64, &array, 5, 0.0).unwrap();
        let b = generate_random(&waveforms, 64, &array, 5, 0.0).unwrap();
        assert_eq!(a.v.data(), b.v.data());

        let sol = SolutionTuple::new(a.truth_h.clone(), a.truth_w.clone(), a.truth_tau.clone(), 0.0, 5).unwrap();
        assert!(reconstruction_error(&a.v, &sol).unwrap() <= 1e-12);
        // Integer delays by default.
        assert!(a.truth_tau.data().iter().all(|&t| (t - t.round()).abs() < 1e-12));
        assert!(a.truth_tau.data().iter().all(|&t| (0.0..=8.0).contains(&t)));
    }

    #[test]
    fn random_dataset_noise_norm() {
        let array = make_lattice_array(6, 1.0).unwrap();
        let waveforms = presets::waveforms_3(64);
        let sigma = 0.01;
        let noisy = generate_random(&waveforms, 64, &array, 5, sigma).unwrap();
        let clean = generate_random(&waveforms, 64, &array, 5, 0.0).unwrap();
        let mut resid = 0.0;
        for (a, b) in noisy.v.data().iter().zip(clean.v.data().iter()) {
            resid += (a - b) * (a - b);
        }
        let resid = resid.sqrt();
        let expect = sigma * ((6 * 64) as f64).sqrt();
        // Clipping at zero removes a little mass; stay within 20%.
        assert!(
            (resid - expect).abs() <= 0.2 * expect,
            "residual {resid} vs expected {expect}"
        );
    }

    #[test]
    fn physical_dataset_consistency() {
        let data = presets::build("inside-3x16", 3, None).unwrap();
        let speed = data.speed.unwrap();
        let coords = data.source_coords.clone().unwrap();
        for (sensor, &(cx, cy)) in data.array.coordinates().iter().enumerate() {
            for (source, &(sx, sy)) in coords.iter().enumerate() {
                let r = ((sx - cx).powi(2) + (sy - cy).powi(2)).sqrt();
                let tau = data.truth_tau.data()[[sensor, source]];
                assert!((tau * speed - r).abs() < 1e-12);
                assert!(tau >= 0.0);
            }
        }
        // Equidistant sensors see identical delays and weights.
        let sym = generate_physical(
            &[WaveformSpec::GaussianPulse { center: 20.0, width: 3.0 }],
            64,
            &[(0.5, 10.0)],
            &[0.9],
            0.5,
            DecayLaw::InvSqrtR,
            &SensorArray::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap(),
            0,
            0.0,
        )
        .unwrap();
        assert!((sym.truth_tau.data()[[0, 0]] - sym.truth_tau.data()[[1, 0]]).abs() < 1e-12);
        assert!((sym.truth_w.data()[[0, 0]] - sym.truth_w.data()[[1, 0]]).abs() < 1e-12);
    }

    #[test]
    fn decay_laws_monotone() {
        let radii: Vec<f64> = (1..40).map(|i| i as f64 * 0.3).collect();
        for law in [DecayLaw::InvSqrtR, DecayLaw::InvR, DecayLaw::InvR2] {
            for pair in radii.windows(2) {
                assert!(law.apply(pair[0]) > law.apply(pair[1]), "{law:?}");
            }
        }
    }

    #[test]
    fn source_on_sensor_is_clamped_with_warning() {
        let data = generate_physical(
            &[WaveformSpec::GaussianPulse { center: 20.0, width: 3.0 }],
            64,
            &[(0.0, 0.0)],
            &[0.9],
            0.5,
            DecayLaw::InvR2,
            &SensorArray::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap(),
            0,
            0.0,
        )
        .unwrap();
        assert!(!data.warnings.is_empty());
        assert!(data.truth_w.data()[[0, 0]].is_finite());
    }

    #[test]
    fn correlated_pair_hits_targets() {
        let base = WaveformSpec::GaussianPulse { center: 30.0, width: 5.0 };
        for &target in &[0.0, 0.3, 0.6, 0.9] {
            let (w1, w2) = generate_correlated_pair(&base, 128, target, 9).unwrap();
            let sim = 1.0 - cosine_distance(&w1, &w2).unwrap();
            assert!(
                (sim - target).abs() <= 0.02,
                "target {target}, achieved {sim}"
            );
            assert!(w2.iter().all(|&x| x >= 0.0));
            let peak = w2.iter().fold(0.0f64, |a, &x| a.max(x));
            assert!((peak - 1.0).abs() < 1e-12);
        }
        // Identical waveforms sit at similarity one (oracle endpoint).
        let w1 = base.generate(128).unwrap();
        assert!((1.0 - cosine_distance(&w1, &w1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waveforms_are_nonnegative_unit_peak() {
        let specs = vec![
            WaveformSpec::GaussianPulse { center: 30.0, width: 5.0 },
            WaveformSpec::DoublePulse {
                center: 64.0,
                width: 4.0,
                separation: 14.0,
                second_amplitude: 0.8,
            },
            WaveformSpec::RaisedCosineBurst { center: 100.0, half_width: 12.0 },
            WaveformSpec::ChirpBurst { center: 64.0, half_width: 20.0, cycles: 4.0 },
        ];
        for spec in specs {
            let w = spec.generate(128).unwrap();
            assert!(w.iter().all(|&x| x >= 0.0), "{spec:?}");
            let peak = w.iter().fold(0.0f64, |a, &x| a.max(x));
            assert!((peak - 1.0).abs() < 1e-12, "{spec:?}");
        }
    }

    #[test]
    fn preset_waveforms_weakly_correlated() {
        let waveforms = presets::waveforms_3(128);
        let rendered: Vec<Vec<f64>> = waveforms.iter().map(|w| w.generate(128).unwrap()).collect();
        for i in 0..rendered.len() {
            for j in i + 1..rendered.len() {
                let sim = 1.0 - cosine_distance(&rendered[i], &rendered[j]).unwrap();
                assert!(sim < 0.05, "waveforms {i},{j} similarity {sim}");
            }
        }
    }
}
