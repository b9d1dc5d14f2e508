//! Core matrix types, the delay operator, the forward mixing model and the
//! similarity/error metrics shared by every downstream stage.
//!
//! Layout convention: sensors index the rows of the observation and mixing
//! matrices; sources index the rows of the source matrix. Delays are
//! continuous, in units of samples, and shift semantics are circular (the
//! DFT formulation makes any other choice inconsistent); records should be
//! zero-padded by the expected maximum delay if wrap-around matters.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{self, FftPlan};

fn all_finite(data: &Array2<f64>) -> bool {
    data.iter().all(|x| x.is_finite())
}

/// Recorded mixtures: N sensors x M time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    data: Array2<f64>,
    sample_interval: f64,
}

impl ObservationMatrix {
    /// Sample interval defaults to one time unit per column.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        Self::with_sample_interval(data, 1.0)
    }

    pub fn with_sample_interval(data: Array2<f64>, sample_interval: f64) -> Result<Self> {
        if data.nrows() < 1 || data.ncols() < 2 {
            return Err(Error::invalid(format!(
                "observation matrix must be at least 1x2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::invalid("observation matrix contains non-finite entries"));
        }
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(Error::invalid("sample interval must be positive and finite"));
        }
        Ok(ObservationMatrix { data, sample_interval })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn n_sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Source waveforms: K sources x M samples, elementwise nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMatrix {
    data: Array2<f64>,
}

impl SourceMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::invalid("source matrix contains non-finite entries"));
        }
        if data.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("source matrix must be nonnegative"));
        }
        Ok(SourceMatrix { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn n_sources(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).to_vec()
    }
}

/// Mixing weights: N sensors x K sources, elementwise nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    data: Array2<f64>,
}

impl MixingMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::invalid("mixing matrix contains non-finite entries"));
        }
        if data.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("mixing matrix must be nonnegative"));
        }
        Ok(MixingMatrix { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }
}

/// Per (sensor, source) delays in samples: N x K, continuous-valued.
/// Entries may be negative after per-source centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayMatrix {
    data: Array2<f64>,
}

impl DelayMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::invalid("delay matrix contains non-finite entries"));
        }
        Ok(DelayMatrix { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }
}

/// Known sensor positions in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorArray {
    coordinates: Vec<(f64, f64)>,
}

impl SensorArray {
    pub fn new(coordinates: Vec<(f64, f64)>) -> Result<Self> {
        if coordinates.len() < 2 {
            return Err(Error::invalid("sensor array needs at least 2 sensors"));
        }
        if coordinates.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::invalid("sensor coordinates must be finite"));
        }
        for i in 0..coordinates.len() {
            for j in i + 1..coordinates.len() {
                if coordinates[i] == coordinates[j] {
                    return Err(Error::invalid(format!(
                        "sensors {i} and {j} share the same coordinates"
                    )));
                }
            }
        }
        Ok(SensorArray { coordinates })
    }

    pub fn coordinates(&self) -> &[(f64, f64)] {
        &self.coordinates
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    /// Largest pairwise sensor distance.
    pub fn l_max(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.coordinates.len() {
            for j in i + 1..self.coordinates.len() {
                let (xi, yi) = self.coordinates[i];
                let (xj, yj) = self.coordinates[j];
                best = best.max(((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt());
            }
        }
        best
    }

    /// Axis-aligned bounding box as ((x_min, x_max), (y_min, y_max)).
    pub fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        let mut xb = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yb = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.coordinates {
            xb = (xb.0.min(x), xb.1.max(x));
            yb = (yb.0.min(y), yb.1.max(y));
        }
        (xb, yb)
    }
}

/// One minimization result: factors plus its relative reconstruction error
/// and the RNG seed of the initial guess that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTuple {
    pub h: SourceMatrix,
    pub w: MixingMatrix,
    pub tau: DelayMatrix,
    pub r: f64,
    pub seed: u64,
}

impl SolutionTuple {
    pub fn new(h: SourceMatrix, w: MixingMatrix, tau: DelayMatrix, r: f64, seed: u64) -> Result<Self> {
        let k = h.n_sources();
        let n = w.data().nrows();
        if w.data().ncols() != k || tau.data().dim() != (n, k) {
            return Err(Error::invalid(format!(
                "inconsistent solution dimensions: H is {}x{}, W is {}x{}, tau is {}x{}",
                k,
                h.n_samples(),
                n,
                w.data().ncols(),
                tau.data().nrows(),
                tau.data().ncols()
            )));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("reconstruction error must be finite and nonnegative"));
        }
        Ok(SolutionTuple { h, w, tau, r, seed })
    }

    pub fn n_sources(&self) -> usize {
        self.h.n_sources()
    }

    pub fn n_sensors(&self) -> usize {
        self.w.data().nrows()
    }
}

/// Delay a signal by `delay` samples (continuous, circular semantics).
///
/// The signal's DFT is multiplied by the delay phase factors and transformed
/// back; the numerically-zero imaginary parts are discarded. Fractional
/// delays interpolate in the Fourier basis, so small negative ripples can
/// appear around sharp features.
pub fn apply_delay(signal: &[f64], delay: f64) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::invalid("signal must have at least 2 samples"));
    }
    if !delay.is_finite() {
        return Err(Error::invalid("delay must be finite"));
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("signal contains non-finite entries"));
    }
    let plan = FftPlan::new(signal.len());
    let mut spec = plan.forward_real(signal);
    spectrum::delay_spectrum(&mut spec, delay);
    let amplitude = signal.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    spectrum::inverse_checked(&plan, &spec, amplitude)
}

/// Mix delayed sources: row n of the result is sum_i W[n,i] * delay(H_i, tau[n,i]).
/// No noise term is added here.
pub fn forward_mix(w: &MixingMatrix, h: &SourceMatrix, tau: &DelayMatrix) -> Result<ObservationMatrix> {
    let n = w.data().nrows();
    let k = w.data().ncols();
    let m = h.n_samples();
    if h.n_sources() != k || tau.data().dim() != (n, k) {
        return Err(Error::invalid(format!(
            "dimension mismatch: W is {}x{}, H is {}x{}, tau is {}x{}",
            n,
            k,
            h.n_sources(),
            m,
            tau.data().nrows(),
            tau.data().ncols()
        )));
    }
    if m < 2 {
        return Err(Error::invalid("sources must have at least 2 samples"));
    }
    let plan = FftPlan::new(m);
    let h_spec: Vec<Vec<Complex64>> = (0..k).map(|i| plan.forward_real(&h.row(i))).collect();
    let mut out = Array2::<f64>::zeros((n, m));
    let mut phases = vec![Complex64::default(); m];
    let mut row_spec = vec![Complex64::default(); m];
    for sensor in 0..n {
        for source in 0..k {
            let weight = w.data()[[sensor, source]];
            if weight == 0.0 {
                continue;
            }
            spectrum::phase_row(&mut phases, tau.data()[[sensor, source]]);
            for f in 0..m {
                row_spec[f] = h_spec[source][f] * phases[f];
            }
            let amplitude = h.data().row(source).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let delayed = spectrum::inverse_checked(&plan, &row_spec, amplitude)?;
            for (slot, d) in out.row_mut(sensor).iter_mut().zip(delayed.iter()) {
                *slot += weight * d;
            }
        }
    }
    ObservationMatrix::new(out)
}

/// Relative reconstruction error ||V - mix(W,H,tau)||_F / ||V||_F.
pub fn reconstruction_error(v: &ObservationMatrix, sol: &SolutionTuple) -> Result<f64> {
    let v_norm = v.frobenius_norm();
    if v_norm == 0.0 {
        return Err(Error::degenerate("observation matrix is all zeros"));
    }
    let recon = forward_mix(&sol.w, &sol.h, &sol.tau)?;
    if recon.data().dim() != v.data().dim() {
        return Err(Error::invalid(format!(
            "solution reconstructs a {}x{} matrix but V is {}x{}",
            recon.n_sensors(),
            recon.n_samples(),
            v.n_sensors(),
            v.n_samples()
        )));
    }
    let mut resid = 0.0;
    for (a, b) in v.data().iter().zip(recon.data().iter()) {
        resid += (a - b) * (a - b);
    }
    Ok(resid.sqrt() / v_norm)
}

/// Cosine distance 1 - a.b / (|a||b|); in [0,1] for nonnegative vectors.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::degenerate("cosine distance of a zero vector"));
    }
    Ok(1.0 - dot / (na.sqrt() * nb.sqrt()))
}

/// Frequency-domain cost (1/2M) ||V~ - W~H~||_F^2; equals the time-domain
/// half squared Frobenius residual by Parseval's identity.
pub fn parseval_cost(v: &ObservationMatrix, sol: &SolutionTuple) -> Result<f64> {
    let n = v.n_sensors();
    let m = v.n_samples();
    let k = sol.n_sources();
    if sol.n_sensors() != n || sol.h.n_samples() != m {
        return Err(Error::invalid(format!(
            "solution dimensions ({}x{} sources, {} sensors) do not match V ({}x{})",
            k,
            sol.h.n_samples(),
            sol.n_sensors(),
            n,
            m
        )));
    }
    let plan = FftPlan::new(m);
    let h_spec: Vec<Vec<Complex64>> = (0..k).map(|i| plan.forward_real(&sol.h.row(i))).collect();
    let mut phases = vec![Complex64::default(); m];
    let mut model = vec![Complex64::default(); m];
    let mut cost = 0.0;
    for sensor in 0..n {
        model.iter_mut().for_each(|c| *c = Complex64::default());
        for source in 0..k {
            let weight = sol.w.data()[[sensor, source]];
            spectrum::phase_row(&mut phases, sol.tau.data()[[sensor, source]]);
            for f in 0..m {
                model[f] += weight * h_spec[source][f] * phases[f];
            }
        }
        let v_spec = plan.forward_real(&v.data().row(sensor).to_vec());
        for f in 0..m {
            cost += (v_spec[f] - model[f]).norm_sqr();
        }
    }
    Ok(cost / (2.0 * m as f64))
}

/// Circular integer rotation of `a` by `shift` positions to the right.
pub fn rotate(a: &[f64], shift: i64) -> Vec<f64> {
    let m = a.len() as i64;
    let mut out = vec![0.0; a.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let src = (idx as i64 - shift).rem_euclid(m) as usize;
        *slot = a[src];
    }
    out
}

/// Best integer circular alignment of `a` onto `b`: the rotation of `a`
/// minimizing the cosine distance to `b`. Returns (shift, distance).
///
/// Waveforms recovered from delayed mixtures carry a per-source global
/// shift ambiguity; comparisons against reference waveforms go through
/// this alignment.
pub fn best_alignment(a: &[f64], b: &[f64]) -> Result<(i64, f64)> {
    if a.len() != b.len() {
        return Err(Error::invalid("alignment requires equal-length vectors"));
    }
    let m = a.len();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::degenerate("alignment of a zero vector"));
    }
    // Circular cross-correlation via the DFT: corr[s] = sum_m a[m-s]*b[m].
    let plan = FftPlan::new(m);
    let a_spec = plan.forward_real(a);
    let b_spec = plan.forward_real(b);
    let prod: Vec<Complex64> = a_spec
        .iter()
        .zip(b_spec.iter())
        .map(|(x, y)| x.conj() * y)
        .collect();
    let (corr, _) = plan.inverse_real(&prod);
    let mut best_shift = 0i64;
    let mut best_corr = f64::NEG_INFINITY;
    for (s, &c) in corr.iter().enumerate() {
        if c > best_corr {
            best_corr = c;
            best_shift = s as i64;
        }
    }
    Ok((best_shift, 1.0 - best_corr / (na * nb)))
}

/// Cosine distance after the best integer circular alignment.
pub fn aligned_cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    best_alignment(a, b).map(|(_, d)| d)
}
