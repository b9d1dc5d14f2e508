//! Single-run minimization of the shifted factorization objective.
//!
//! Each sweep updates H and W with multiplicative rules evaluated through
//! the frequency-domain form of the model, then moves each delay entry by a
//! damped Newton step. Every partial update is accepted only if the cost
//! does not increase, which makes the objective sequence non-increasing
//! across sweeps by construction. At zero delay the H/W rules coincide with
//! the classic Frobenius multiplicative updates.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    DelayMatrix, MixingMatrix, ObservationMatrix, SolutionTuple, SourceMatrix,
};
use crate::spectrum::{self, FftPlan};

/// Division guard in the multiplicative ratios.
const RATIO_EPS: f64 = 1e-12;
/// Maximum blend-toward-previous attempts when a multiplicative update
/// overshoots.
const MAX_BLEND_ATTEMPTS: usize = 6;
/// Maximum Newton step halvings before a delay entry is left unchanged.
const MAX_TAU_BACKTRACKS: usize = 8;

/// Rewrite num/den so both are nonnegative while den - num stays exact.
#[inline]
fn split_ratio(num: f64, den: f64) -> (f64, f64) {
    (num.max(0.0) + (-den).max(0.0), den.max(0.0) + (-num).max(0.0))
}

#[inline]
fn row_residual(v_row: &[Complex64], model: &[Complex64]) -> f64 {
    v_row
        .iter()
        .zip(model.iter())
        .map(|(v, m)| (v - m).norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Iteration cap; convergence usually triggers earlier.
    pub max_iterations: usize,
    /// Relative cost decrease per check window below which the run stops.
    pub convergence_tol: f64,
    /// Window length (iterations) for the convergence check.
    pub convergence_window: usize,
    /// Delay update cadence: every `tau_update_period` iterations.
    pub tau_update_period: usize,
    /// Initial Newton step scale in (0, 1].
    pub tau_damping: f64,
    /// Half-width of the uniform delay initialization; `None` means M/10.
    pub tau_init_range: Option<f64>,
    /// Delay entries are confined to [-bound, bound] by the Newton update
    /// (projected steps); `None` means twice the initialization half-width.
    /// Entries drifting further would sit on zero-gradient plateaus with no
    /// way back, so the window doubles as a plausibility constraint.
    pub tau_bound: Option<f64>,
    /// Iterations to run before the first delay update, letting the factors
    /// organize first.
    pub tau_warmup: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 50_000,
            convergence_tol: 1e-8,
            convergence_window: 100,
            tau_update_period: 1,
            tau_damping: 1.0,
            tau_init_range: None,
            tau_bound: None,
            tau_warmup: 0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.convergence_tol <= 0.0 {
            return Err(Error::invalid("convergence_tol must be positive"));
        }
        if self.convergence_window == 0 {
            return Err(Error::invalid("convergence_window must be at least 1"));
        }
        if self.tau_update_period == 0 {
            return Err(Error::invalid("tau_update_period must be at least 1"));
        }
        if !(self.tau_damping > 0.0 && self.tau_damping <= 1.0) {
            return Err(Error::invalid("tau_damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Outcome of one `solve` call, with run diagnostics alongside the tuple.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: SolutionTuple,
    pub iterations: usize,
    pub converged: bool,
    /// Set when more than half the delay entries of a sweep had non-finite
    /// gradient or curvature.
    pub degraded: bool,
}

/// Random starting point: W, H uniform on (0,1], delays uniform on
/// [-t0, t0]. Deterministic for a given seed.
pub fn init_random(n: usize, d: usize, m: usize, seed: u64) -> Result<SolutionTuple> {
    init_random_with_range(n, d, m, seed, None)
}

pub(crate) fn init_random_with_range(
    n: usize,
    d: usize,
    m: usize,
    seed: u64,
    tau_range: Option<f64>,
) -> Result<SolutionTuple> {
    if d < 1 {
        return Err(Error::invalid("at least one source is required"));
    }
    if d >= n {
        return Err(Error::invalid(format!(
            "number of sensors ({n}) has to be greater than the number of sources ({d})"
        )));
    }
    if m < 2 {
        return Err(Error::invalid("at least 2 time samples are required"));
    }
    let t0 = tau_range.unwrap_or(m as f64 / 10.0);
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(Error::invalid("delay initialization range must be finite and nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_open = |rng: &mut ChaCha8Rng| 1.0 - rng.random::<f64>(); // (0, 1]
    let w = Array2::from_shape_fn((n, d), |_| draw_open(&mut rng));
    let h = Array2::from_shape_fn((d, m), |_| draw_open(&mut rng));
    let tau = Array2::from_shape_fn((n, d), |_| rng.random_range(-t0..=t0));
    SolutionTuple::new(
        SourceMatrix::new(h)?,
        MixingMatrix::new(w)?,
        DelayMatrix::new(tau)?,
        0.0,
        seed,
    )
}

/// Shared per-run state: the observation spectrum, the current factors,
/// the per-(sensor, source) delay phase rows, and reusable scratch buffers
/// (one solve runs tens of thousands of sweeps; the hot loops must not
/// allocate).
struct Workspace {
    n: usize,
    k: usize,
    m: usize,
    plan: FftPlan,
    v_spec: Vec<Vec<Complex64>>,
    w: Array2<f64>,
    h: Array2<f64>,
    tau: Array2<f64>,
    h_spec: Vec<Vec<Complex64>>,
    /// phases[n][k][f] = delay multiplier for (sensor n, source k, bin f).
    phases: Vec<Vec<Vec<Complex64>>>,
    scratch_row: Vec<Complex64>,
    scratch_row2: Vec<Complex64>,
    scratch_phase: Vec<Complex64>,
    scratch_num: Vec<Vec<Complex64>>,
    scratch_den: Vec<Vec<Complex64>>,
}

impl Workspace {
    fn new(v: &ObservationMatrix, sol: &SolutionTuple) -> Result<Self> {
        let n = v.n_sensors();
        let m = v.n_samples();
        let k = sol.n_sources();
        if sol.n_sensors() != n || sol.h.n_samples() != m {
            return Err(Error::invalid(format!(
                "solution ({} sensors, {} samples) does not match V ({}x{})",
                sol.n_sensors(),
                sol.h.n_samples(),
                n,
                m
            )));
        }
        let plan = FftPlan::new(m);
        let v_spec: Vec<Vec<Complex64>> = (0..n)
            .map(|row| plan.forward_real(&v.data().row(row).to_vec()))
            .collect();
        let mut ws = Workspace {
            n,
            k,
            m,
            plan,
            v_spec,
            w: sol.w.data().clone(),
            h: sol.h.data().clone(),
            tau: sol.tau.data().clone(),
            h_spec: vec![vec![Complex64::default(); m]; k],
            phases: vec![vec![vec![Complex64::default(); m]; k]; n],
            scratch_row: vec![Complex64::default(); m],
            scratch_row2: vec![Complex64::default(); m],
            scratch_phase: vec![Complex64::default(); m],
            scratch_num: vec![vec![Complex64::default(); m]; k],
            scratch_den: vec![vec![Complex64::default(); m]; k],
        };
        ws.refresh_h_spec();
        for sensor in 0..n {
            for source in 0..k {
                ws.refresh_phase(sensor, source);
            }
        }
        Ok(ws)
    }

    fn refresh_h_spec(&mut self) {
        for source in 0..self.k {
            self.h_spec[source] = self.plan.forward_real(&self.h.row(source).to_vec());
        }
    }

    fn refresh_phase(&mut self, sensor: usize, source: usize) {
        spectrum::phase_row(&mut self.phases[sensor][source], self.tau[[sensor, source]]);
    }

    /// Model spectrum of one sensor row.
    fn model_row(&self, sensor: usize, out: &mut [Complex64]) {
        out.fill(Complex64::default());
        for source in 0..self.k {
            let weight = self.w[[sensor, source]];
            if weight == 0.0 {
                continue;
            }
            let spec = &self.h_spec[source];
            let phase = &self.phases[sensor][source];
            for ((slot, &s), &p) in out.iter_mut().zip(spec.iter()).zip(phase.iter()) {
                *slot += weight * s * p;
            }
        }
    }

    /// Frequency-domain cost (1/2M) sum |V~ - model|^2 over all rows.
    fn cost(&mut self) -> f64 {
        let mut model = std::mem::take(&mut self.scratch_row);
        let mut acc = 0.0;
        for sensor in 0..self.n {
            self.model_row(sensor, &mut model);
            acc += row_residual(&self.v_spec[sensor], &model);
        }
        self.scratch_row = model;
        acc / (2.0 * self.m as f64)
    }

    fn row_cost(&self, sensor: usize, model: &[Complex64]) -> f64 {
        row_residual(&self.v_spec[sensor], model) / (2.0 * self.m as f64)
    }

    fn check_finite(&self) -> Result<()> {
        let finite = self.w.iter().all(|x| x.is_finite())
            && self.h.iter().all(|x| x.is_finite())
            && self.tau.iter().all(|x| x.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::numerical("non-finite value appeared in a factor"))
        }
    }

    /// Multiplicative H update with blend-backtracking; returns the cost
    /// after the update.
    fn update_h(&mut self, cost_before: f64) -> Result<f64> {
        let (n, k, m) = (self.n, self.k, self.m);
        // Numerator: W~^H V~; denominator: W~^H (W~ H~), per frequency bin.
        let mut num_spec = std::mem::take(&mut self.scratch_num);
        let mut den_spec = std::mem::take(&mut self.scratch_den);
        let mut model = std::mem::take(&mut self.scratch_row);
        num_spec.iter_mut().for_each(|row| row.fill(Complex64::default()));
        den_spec.iter_mut().for_each(|row| row.fill(Complex64::default()));
        for sensor in 0..n {
            self.model_row(sensor, &mut model);
            let v_row = &self.v_spec[sensor];
            for source in 0..k {
                let weight = self.w[[sensor, source]];
                if weight == 0.0 {
                    continue;
                }
                let phase = &self.phases[sensor][source];
                for (((num, den), &p), (&v, &mo)) in num_spec[source]
                    .iter_mut()
                    .zip(den_spec[source].iter_mut())
                    .zip(phase.iter())
                    .zip(v_row.iter().zip(model.iter()))
                {
                    let conj_w = weight * p.conj();
                    *num += conj_w * v;
                    *den += conj_w * mo;
                }
            }
        }
        let mut ratio = Array2::<f64>::zeros((k, m));
        for source in 0..k {
            let (num_t, _) = self.plan.inverse_real(&num_spec[source]);
            let (den_t, _) = self.plan.inverse_real(&den_spec[source]);
            let scale = den_t.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let eps = RATIO_EPS * scale.max(1.0);
            for sample in 0..m {
                // Interpolation ripples can push either side negative; move
                // the negative parts across so the split stays exact:
                // gradient = den - num with both sides nonnegative.
                let (num, den) = split_ratio(num_t[sample], den_t[sample]);
                ratio[[source, sample]] = num / (den + eps);
            }
        }
        self.scratch_num = num_spec;
        self.scratch_den = den_spec;
        self.scratch_row = model;

        let old_h = self.h.clone();
        let mut candidate = &old_h * &ratio;
        for _ in 0..=MAX_BLEND_ATTEMPTS {
            if candidate.iter().any(|x| !x.is_finite()) {
                return Err(Error::numerical("H update produced non-finite entries"));
            }
            self.h = candidate.clone();
            self.refresh_h_spec();
            let cost_after = self.cost();
            if cost_after <= cost_before {
                return Ok(cost_after);
            }
            candidate = (&candidate + &old_h) * 0.5;
        }
        self.h = old_h;
        self.refresh_h_spec();
        Ok(cost_before)
    }

    /// Multiplicative W update with blend-backtracking; returns the cost
    /// after the update.
    fn update_w(&mut self, cost_before: f64) -> Result<f64> {
        let (n, k) = (self.n, self.k);
        let mut ratio = Array2::<f64>::zeros((n, k));
        let mut model = std::mem::take(&mut self.scratch_row);
        for sensor in 0..n {
            self.model_row(sensor, &mut model);
            let v_row = &self.v_spec[sensor];
            for source in 0..k {
                let spec = &self.h_spec[source];
                let phase = &self.phases[sensor][source];
                let mut num = 0.0;
                let mut den = 0.0;
                for ((&s, &p), (&v, &mo)) in spec
                    .iter()
                    .zip(phase.iter())
                    .zip(v_row.iter().zip(model.iter()))
                {
                    let shifted_conj = (s * p).conj();
                    num += (v * shifted_conj).re;
                    den += (mo * shifted_conj).re;
                }
                let eps = RATIO_EPS * den.abs().max(1.0);
                let (num, den) = split_ratio(num, den);
                ratio[[sensor, source]] = num / (den + eps);
            }
        }
        self.scratch_row = model;

        let old_w = self.w.clone();
        let mut candidate = &old_w * &ratio;
        for _ in 0..=MAX_BLEND_ATTEMPTS {
            if candidate.iter().any(|x| !x.is_finite()) {
                return Err(Error::numerical("W update produced non-finite entries"));
            }
            self.w = candidate.clone();
            let cost_after = self.cost();
            if cost_after <= cost_before {
                return Ok(cost_after);
            }
            candidate = (&candidate + &old_w) * 0.5;
        }
        self.w = old_w;
        Ok(cost_before)
    }

    /// Damped Newton sweep over all delay entries, projected into
    /// [-bound, bound]. Returns the cost after the sweep and whether more
    /// than half the entries had non-finite gradient or curvature.
    fn update_tau(&mut self, cost_before: f64, damping: f64, bound: f64) -> Result<(f64, bool)> {
        let (n, k, m) = (self.n, self.k, self.m);
        let mut total_cost = cost_before;
        let mut nonfinite_skips = 0usize;
        let mut model = std::mem::take(&mut self.scratch_row);
        let mut trial_model = std::mem::take(&mut self.scratch_row2);
        let mut trial_phase = std::mem::take(&mut self.scratch_phase);
        for sensor in 0..n {
            self.model_row(sensor, &mut model);
            let mut row_cost = self.row_cost(sensor, &model);
            for source in 0..k {
                let weight = self.w[[sensor, source]];
                let spec = &self.h_spec[source];
                let phase = &self.phases[sensor][source];
                // Gradient and curvature of the row cost in this delay.
                let mut grad = 0.0;
                let mut hess = 0.0;
                for f in 0..m {
                    let contrib = weight * spec[f] * phase[f];
                    let resid = self.v_spec[sensor][f] - model[f];
                    let (deriv, second) = if spectrum::is_nyquist(f, m) {
                        // Bin multiplier is cos(pi*tau): differentiate it.
                        let tau = self.tau[[sensor, source]];
                        let pi = std::f64::consts::PI;
                        let base = weight * spec[f];
                        (
                            base * Complex64::new(-pi * (pi * tau).sin(), 0.0),
                            base * Complex64::new(-pi * pi * (pi * tau).cos(), 0.0),
                        )
                    } else {
                        let om = spectrum::omega(f, m);
                        (
                            contrib * Complex64::new(0.0, -om),
                            contrib * (-om * om),
                        )
                    };
                    grad -= (resid.conj() * deriv).re;
                    hess += deriv.norm_sqr() - (resid.conj() * second).re;
                }
                grad /= m as f64;
                hess /= m as f64;
                if !grad.is_finite() || !hess.is_finite() {
                    nonfinite_skips += 1;
                    continue;
                }
                // On flat stretches (a displaced component overlapping
                // nothing) both gradient and curvature vanish; accepting
                // rounding-level "improvements" there lets delays random-walk
                // far away, so such steps are filtered out entirely.
                let significance = 1e-11 * (1.0 + row_cost);
                let curvature = hess.abs();
                if curvature < f64::MIN_POSITIVE || grad.abs() <= significance {
                    continue;
                }
                let newton = (-grad / curvature).clamp(-(m as f64) / 4.0, m as f64 / 4.0);
                let mut step = damping;
                for _ in 0..=MAX_TAU_BACKTRACKS {
                    let tau_trial = (self.tau[[sensor, source]] + step * newton).clamp(-bound, bound);
                    if !tau_trial.is_finite() || tau_trial == self.tau[[sensor, source]] {
                        break;
                    }
                    spectrum::phase_row(&mut trial_phase, tau_trial);
                    for (((t, &mo), (&s, &p)), &tp) in trial_model
                        .iter_mut()
                        .zip(model.iter())
                        .zip(spec.iter().zip(phase.iter()))
                        .zip(trial_phase.iter())
                    {
                        *t = mo + weight * s * (tp - p);
                    }
                    let trial_cost = self.row_cost(sensor, &trial_model);
                    if trial_cost < row_cost - significance {
                        total_cost += trial_cost - row_cost;
                        row_cost = trial_cost;
                        self.tau[[sensor, source]] = tau_trial;
                        model.copy_from_slice(&trial_model);
                        self.phases[sensor][source].copy_from_slice(&trial_phase);
                        break;
                    }
                    step *= 0.5;
                }
            }
        }
        self.scratch_row = model;
        self.scratch_row2 = trial_model;
        self.scratch_phase = trial_phase;
        let degraded = 2 * nonfinite_skips > n * k;
        Ok((total_cost, degraded))
    }

    fn to_solution(&self, seed: u64) -> Result<SolutionTuple> {
        SolutionTuple::new(
            SourceMatrix::new(self.h.clone())?,
            MixingMatrix::new(self.w.clone())?,
            DelayMatrix::new(self.tau.clone())?,
            0.0,
            seed,
        )
    }
}

/// One multiplicative H update on `sol`; the cost never increases.
pub fn update_h(v: &ObservationMatrix, sol: &SolutionTuple) -> Result<SolutionTuple> {
    let mut ws = Workspace::new(v, sol)?;
    let before = ws.cost();
    ws.update_h(before)?;
    ws.check_finite()?;
    let mut out = ws.to_solution(sol.seed)?;
    out.r = sol.r;
    Ok(out)
}

/// One multiplicative W update on `sol`; the cost never increases.
pub fn update_w(v: &ObservationMatrix, sol: &SolutionTuple) -> Result<SolutionTuple> {
    let mut ws = Workspace::new(v, sol)?;
    let before = ws.cost();
    ws.update_w(before)?;
    ws.check_finite()?;
    let mut out = ws.to_solution(sol.seed)?;
    out.r = sol.r;
    Ok(out)
}

/// One damped-Newton delay sweep on `sol`; steps are accepted only when the
/// cost decreases, and entries stay within the default delay window.
pub fn update_tau(v: &ObservationMatrix, sol: &SolutionTuple) -> Result<SolutionTuple> {
    update_tau_damped(v, sol, 1.0)
}

pub fn update_tau_damped(v: &ObservationMatrix, sol: &SolutionTuple, damping: f64) -> Result<SolutionTuple> {
    let mut ws = Workspace::new(v, sol)?;
    let before = ws.cost();
    let bound = default_tau_bound(v.n_samples(), None, None);
    ws.update_tau(before, damping, bound)?;
    ws.check_finite()?;
    let mut out = ws.to_solution(sol.seed)?;
    out.r = sol.r;
    Ok(out)
}

fn default_tau_bound(m: usize, init_range: Option<f64>, bound: Option<f64>) -> f64 {
    bound.unwrap_or_else(|| 2.0 * init_range.unwrap_or(m as f64 / 10.0))
}

/// Gauge-fix a solution. The circular model is periodic in every delay
/// entry and shifts a whole delay column against the waveform freely, so a
/// canonical representative is chosen: entries are wrapped into the M-wide
/// window around their column's circular mean (keeping mutually consistent
/// delays together regardless of where the run drifted), columns are then
/// centered at zero mean with the waveform counter-rotated, and H rows are
/// normalized to unit maximum with W compensated. The reconstruction is
/// unchanged up to interpolation residue clipped at zero.
pub fn canonicalize(sol: &SolutionTuple) -> Result<SolutionTuple> {
    let k = sol.n_sources();
    let n = sol.n_sensors();
    let m = sol.h.n_samples() as f64;
    let mut h = sol.h.data().clone();
    let mut w = sol.w.data().clone();
    let mut tau = sol.tau.data().clone();
    let two_pi = 2.0 * std::f64::consts::PI;
    for source in 0..k {
        let (mut sin_sum, mut cos_sum) = (0.0f64, 0.0f64);
        for row in 0..n {
            let angle = two_pi * tau[[row, source]] / m;
            sin_sum += angle.sin();
            cos_sum += angle.cos();
        }
        let anchor = sin_sum.atan2(cos_sum) * m / two_pi;
        for row in 0..n {
            let excess = tau[[row, source]] - anchor;
            tau[[row, source]] = anchor + (excess - m * (excess / m).round());
        }
        let mean = (0..n).map(|row| tau[[row, source]]).sum::<f64>() / n as f64;
        for row in 0..n {
            tau[[row, source]] -= mean;
        }
        let shifted = crate::model::apply_delay(&h.row(source).to_vec(), mean)?;
        for (slot, val) in h.row_mut(source).iter_mut().zip(shifted.iter()) {
            *slot = val.max(0.0);
        }
        let peak = h.row(source).iter().fold(0.0f64, |a, &x| a.max(x));
        if peak <= f64::MIN_POSITIVE {
            return Err(Error::numerical(format!(
                "source {source} vanished during gauge fixing"
            )));
        }
        for slot in h.row_mut(source).iter_mut() {
            *slot /= peak;
        }
        for row in 0..n {
            w[[row, source]] *= peak;
        }
    }
    SolutionTuple::new(
        SourceMatrix::new(h)?,
        MixingMatrix::new(w)?,
        DelayMatrix::new(tau)?,
        sol.r,
        sol.seed,
    )
}

/// Run the full minimization from a random start derived from the config
/// seed.
pub fn solve(v: &ObservationMatrix, d: usize, config: &SolverConfig) -> Result<SolveOutcome> {
    let n = v.n_sensors();
    if n < 2 {
        return Err(Error::invalid("factorization needs at least 2 sensors"));
    }
    let init = init_random_with_range(n, d, v.n_samples(), config.seed, config.tau_init_range)?;
    solve_from(v, init, config)
}

/// Run the full minimization from a given starting point.
pub fn solve_from(v: &ObservationMatrix, init: SolutionTuple, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    if v.frobenius_norm() == 0.0 {
        return Err(Error::degenerate("observation matrix is all zeros"));
    }
    let d = init.n_sources();
    if d >= v.n_sensors() {
        return Err(Error::invalid(format!(
            "number of sensors ({}) has to be greater than the number of sources ({d})",
            v.n_sensors()
        )));
    }
    let seed = init.seed;
    let tau_bound = default_tau_bound(v.n_samples(), config.tau_init_range, config.tau_bound);
    let mut ws = Workspace::new(v, &init)?;
    let mut cost = ws.cost();
    let mut window_anchor = cost;
    let mut degraded = false;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        cost = ws.update_h(cost)?;
        cost = ws.update_w(cost)?;
        if iterations > config.tau_warmup && iterations % config.tau_update_period == 0 {
            let (next_cost, sweep_degraded) = ws.update_tau(cost, config.tau_damping, tau_bound)?;
            cost = next_cost;
            degraded = degraded || sweep_degraded;
        }
        ws.check_finite()?;
        if iterations % config.convergence_window == 0 {
            let drop = window_anchor - cost;
            if drop <= config.convergence_tol * window_anchor.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            window_anchor = cost;
        }
    }
    let raw = ws.to_solution(seed)?;
    let mut solution = canonicalize(&raw)?;
    solution.r = crate::model::reconstruction_error(v, &solution)?;
    if !solution.r.is_finite() {
        return Err(Error::numerical("reconstruction error is not finite"));
    }
    Ok(SolveOutcome {
        solution,
        iterations,
        converged,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_mix, parseval_cost, reconstruction_error};
    use ndarray::array;

    fn small_instance(seed: u64, n: usize, k: usize, m: usize) -> (ObservationMatrix, SolutionTuple) {
        let truth = init_random(n, k, m, seed).unwrap();
        let v = forward_mix(&truth.w, &truth.h, &truth.tau).unwrap();
        (v, truth)
    }

    #[test]
    fn init_random_is_deterministic_and_shaped() {
        let a = init_random(4, 2, 100, 7).unwrap();
        let b = init_random(4, 2, 100, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.w.data().dim(), (4, 2));
        assert_eq!(a.h.data().dim(), (2, 100));
        assert_eq!(a.tau.data().dim(), (4, 2));
        assert!(a.w.data().iter().all(|&x| x > 0.0));
        assert!(a.h.data().iter().all(|&x| x > 0.0));
        let t0 = 10.0;
        assert!(a.tau.data().iter().all(|&x| x.abs() <= t0));
    }

    #[test]
    fn init_random_rejects_too_many_sources() {
        assert!(matches!(init_random(3, 3, 16, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(init_random(3, 4, 16, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn init_random_uniform_mean() {
        let mut acc = 0.0;
        let mut count = 0usize;
        for seed in 0..50 {
            let sol = init_random(10, 5, 4, seed).unwrap();
            acc += sol.w.data().sum();
            count += sol.w.data().len();
        }
        let mean = acc / count as f64; // 2500 draws; widen via H too
        assert!((0.46..=0.54).contains(&mean));
        // The spec asks for 1e4 draws within [0.48, 0.52].
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut seed = 100;
        while count < 10_000 {
            let sol = init_random(26, 25, 4, seed).unwrap();
            acc += sol.w.data().sum();
            count += sol.w.data().len();
            seed += 1;
        }
        let mean = acc / count as f64;
        assert!((0.48..=0.52).contains(&mean), "mean {mean}");
    }

    #[test]
    fn updates_reduce_to_lee_seung_at_zero_tau() {
        let v_data = array![
            [0.5, 1.0, 1.2, 0.9, 0.8, 0.2],
            [0.4, 0.3, 0.9, 0.5, 1.6, 0.5],
            [0.7, 0.8, 0.4, 0.3, 0.2, 0.9]
        ];
        let v = ObservationMatrix::new(v_data.clone()).unwrap();
        let w0 = array![[0.7, 0.1], [0.2, 0.9], [0.5, 0.3]];
        let h0 = array![
            [0.1, 1.0, 2.0, 1.0, 0.4, 0.3],
            [0.2, 0.4, 0.3, 0.2, 1.5, 0.5]
        ];
        let sol = SolutionTuple::new(
            SourceMatrix::new(h0.clone()).unwrap(),
            MixingMatrix::new(w0.clone()).unwrap(),
            DelayMatrix::new(Array2::zeros((3, 2))).unwrap(),
            0.0,
            0,
        )
        .unwrap();

        let updated = update_h(&v, &sol).unwrap();
        let num = w0.t().dot(&v_data);
        let den = w0.t().dot(&w0).dot(&h0);
        for i in 0..2 {
            for j in 0..6 {
                let classic = h0[[i, j]] * num[[i, j]] / den[[i, j]];
                assert!(
                    (updated.h.data()[[i, j]] - classic).abs() < 1e-9,
                    "H[{i},{j}]"
                );
            }
        }

        let updated = update_w(&v, &sol).unwrap();
        let num = v_data.dot(&h0.t());
        let den = w0.dot(&h0.dot(&h0.t()));
        for i in 0..3 {
            for j in 0..2 {
                let classic = w0[[i, j]] * num[[i, j]] / den[[i, j]];
                assert!(
                    (updated.w.data()[[i, j]] - classic).abs() < 1e-9,
                    "W[{i},{j}]"
                );
            }
        }
    }

    #[test]
    fn exact_factorization_is_a_fixed_point() {
        let (v, truth) = small_instance(11, 5, 2, 24);
        let after_h = update_h(&v, &truth).unwrap();
        let after_w = update_w(&v, &truth).unwrap();
        let after_tau = update_tau(&v, &truth).unwrap();
        for (a, b) in truth.h.data().iter().zip(after_h.h.data().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in truth.w.data().iter().zip(after_w.w.data().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in truth.tau.data().iter().zip(after_tau.tau.data().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn tau_gradient_matches_finite_differences() {
        let (v, truth) = small_instance(3, 4, 2, 32);
        // Perturb so the residual is nonzero.
        let mut tau = truth.tau.data().clone();
        tau[[0, 0]] += 0.37;
        tau[[2, 1]] -= 0.51;
        let sol = SolutionTuple::new(truth.h.clone(), truth.w.clone(), DelayMatrix::new(tau).unwrap(), 0.0, 0).unwrap();
        let ws = Workspace::new(&v, &sol).unwrap();
        let m = ws.m;

        for (sensor, source) in [(0usize, 0usize), (1, 1), (2, 0), (3, 1)] {
            let mut model = vec![Complex64::default(); m];
            ws.model_row(sensor, &mut model);
            let weight = ws.w[[sensor, source]];
            let spec = &ws.h_spec[source];
            let phase = &ws.phases[sensor][source];
            let mut grad = 0.0;
            for f in 0..m {
                let contrib = weight * spec[f] * phase[f];
                let resid = ws.v_spec[sensor][f] - model[f];
                let deriv = if spectrum::is_nyquist(f, m) {
                    let tau = ws.tau[[sensor, source]];
                    let pi = std::f64::consts::PI;
                    weight * spec[f] * Complex64::new(-pi * (pi * tau).sin(), 0.0)
                } else {
                    contrib * Complex64::new(0.0, -spectrum::omega(f, m))
                };
                grad -= (resid.conj() * deriv).re;
            }
            grad /= m as f64;

            let eps = 1e-6;
            let eval = |delta: f64| {
                let mut tau2 = ws.tau.clone();
                tau2[[sensor, source]] += delta;
                let sol2 = SolutionTuple::new(
                    SourceMatrix::new(ws.h.clone()).unwrap(),
                    MixingMatrix::new(ws.w.clone()).unwrap(),
                    DelayMatrix::new(tau2).unwrap(),
                    0.0,
                    0,
                )
                .unwrap();
                parseval_cost(&v, &sol2).unwrap()
            };
            let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
            assert!(
                (grad - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                "sensor {sensor} source {source}: analytic {grad} vs fd {fd}"
            );
        }
    }

    #[test]
    fn newton_recovers_offset_delays() {
        // One source, exact W and H, every delay off by 0.3.
        let m = 64;
        let mut h = Array2::zeros((1, m));
        for i in 0..m {
            let x = (i as f64 - 20.0) / 4.0;
            h[[0, i]] = (-0.5 * x * x).exp();
        }
        let h = SourceMatrix::new(h).unwrap();
        let w = MixingMatrix::new(array![[1.0], [0.8], [1.3], [0.6]]).unwrap();
        let tau_true = array![[2.0], [5.5], [-1.0], [3.25]];
        let tau = DelayMatrix::new(tau_true.clone()).unwrap();
        let v = forward_mix(&w, &h, &tau).unwrap();

        let mut sol = SolutionTuple::new(
            h,
            w,
            DelayMatrix::new(tau_true.mapv(|x| x + 0.3)).unwrap(),
            0.0,
            0,
        )
        .unwrap();
        for _ in 0..30 {
            sol = update_tau(&v, &sol).unwrap();
        }
        for row in 0..4 {
            assert!(
                (sol.tau.data()[[row, 0]] - tau_true[[row, 0]]).abs() <= 0.05,
                "row {row}: {} vs {}",
                sol.tau.data()[[row, 0]],
                tau_true[[row, 0]]
            );
        }
    }

    #[test]
    fn solve_zero_iterations_returns_initial_guess() {
        let (v, _) = small_instance(5, 4, 2, 32);
        let config = SolverConfig {
            max_iterations: 0,
            seed: 99,
            ..SolverConfig::default()
        };
        let outcome = solve(&v, 2, &config).unwrap();
        let init = init_random(4, 2, 32, 99).unwrap();
        let expected = canonicalize(&init).unwrap();
        assert_eq!(outcome.iterations, 0);
        for (a, b) in outcome.solution.h.data().iter().zip(expected.h.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = reconstruction_error(&v, &expected).unwrap();
        assert!((outcome.solution.r - r).abs() < 1e-12);
    }

    #[test]
    fn solve_is_bit_deterministic() {
        let (v, _) = small_instance(17, 5, 2, 32);
        let config = SolverConfig {
            max_iterations: 40,
            seed: 5,
            ..SolverConfig::default()
        };
        let a = solve(&v, 2, &config).unwrap();
        let b = solve(&v, 2, &config).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn solve_output_gauges() {
        let (v, _) = small_instance(23, 5, 2, 32);
        let config = SolverConfig {
            max_iterations: 60,
            seed: 3,
            ..SolverConfig::default()
        };
        let out = solve(&v, 2, &config).unwrap().solution;
        for source in 0..2 {
            let mean: f64 = (0..5).map(|row| out.tau.data()[[row, source]]).sum::<f64>() / 5.0;
            assert!(mean.abs() <= 1e-9, "delay column mean {mean}");
            let peak = out.h.data().row(source).iter().fold(0.0f64, |a, &x| a.max(x));
            assert!((peak - 1.0).abs() <= 1e-12, "H row peak {peak}");
        }
        assert!(out.h.data().iter().all(|&x| x >= 0.0));
        assert!(out.w.data().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn scale_gauge_leaves_cost_unchanged() {
        let (v, truth) = small_instance(29, 5, 2, 32);
        let cost0 = parseval_cost(&v, &truth).unwrap();
        let c = 3.7;
        let mut h = truth.h.data().clone();
        let mut w = truth.w.data().clone();
        for slot in h.row_mut(0).iter_mut() {
            *slot *= c;
        }
        for row in 0..5 {
            w[[row, 0]] /= c;
        }
        let scaled = SolutionTuple::new(
            SourceMatrix::new(h).unwrap(),
            MixingMatrix::new(w).unwrap(),
            truth.tau.clone(),
            0.0,
            0,
        )
        .unwrap();
        let cost1 = parseval_cost(&v, &scaled).unwrap();
        assert!((cost0 - cost1).abs() <= 1e-10 * (1.0 + cost0));
    }
}
