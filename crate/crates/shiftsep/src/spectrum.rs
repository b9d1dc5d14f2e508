//! DFT helpers shared by the delay operator, the cost functions and the
//! solver: plan caching, real-signal transforms and the delay phase factors.
//!
//! Delays act multiplicatively on the spectrum. The phase factor for bin k
//! uses the signed frequency (k mapped to k - M for k > M/2) so that a real
//! signal stays real under fractional delays. For even M the Nyquist bin has
//! no well-defined phase for fractional delays; the symmetric real choice
//! cos(pi*tau) is used, which is exact for integer delays.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub(crate) struct FftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPlan {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// DFT of a real signal.
    pub fn forward_real(&self, signal: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(signal.len(), self.len);
        let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT expected to produce a real signal. Returns the real part
    /// and the largest imaginary magnitude encountered (for residue checks).
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(spectrum.len(), self.len);
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        let mut max_im = 0.0f64;
        let out = buf
            .iter()
            .map(|c| {
                max_im = max_im.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (out, max_im)
    }
}

/// Whether bin `k` of an M-point spectrum is the Nyquist bin.
#[inline]
pub(crate) fn is_nyquist(k: usize, m: usize) -> bool {
    m % 2 == 0 && k == m / 2
}

/// Signed angular frequency of bin `k`: 2*pi*k'/M with k' in (-M/2, M/2].
#[inline]
pub(crate) fn omega(k: usize, m: usize) -> f64 {
    let signed = if k <= m / 2 {
        k as f64
    } else {
        k as f64 - m as f64
    };
    2.0 * std::f64::consts::PI * signed / m as f64
}

/// Fill `dst` with the per-bin multipliers of a delay by `tau` samples.
///
/// dst[k] = exp(-i * omega_k * tau), with cos(pi*tau) at the Nyquist bin.
/// The lower half runs a phasor recurrence with periodic exact refresh to
/// bound drift; the upper half is the conjugate mirror.
pub(crate) fn phase_row(dst: &mut [Complex64], tau: f64) {
    let m = dst.len();
    debug_assert!(m >= 2);
    let step_angle = -2.0 * std::f64::consts::PI * tau / m as f64;
    let step = Complex64::from_polar(1.0, step_angle);
    let half = m / 2;
    let mut cur = Complex64::new(1.0, 0.0);
    for (k, slot) in dst.iter_mut().take(half + 1).enumerate() {
        if k % 64 == 0 {
            cur = Complex64::from_polar(1.0, step_angle * k as f64);
        }
        *slot = cur;
        cur *= step;
    }
    if m % 2 == 0 {
        dst[half] = Complex64::new((std::f64::consts::PI * tau).cos(), 0.0);
    }
    for k in 1..m.div_ceil(2) {
        dst[m - k] = dst[k].conj();
    }
}

/// Multiply a spectrum in place by the delay-by-`tau` phase factors.
pub(crate) fn delay_spectrum(spectrum: &mut [Complex64], tau: f64) {
    let m = spectrum.len();
    let mut phases = vec![Complex64::new(0.0, 0.0); m];
    phase_row(&mut phases, tau);
    for (s, p) in spectrum.iter_mut().zip(phases.iter()) {
        *s *= p;
    }
}

/// Inverse-transform a spectrum that must be (numerically) real, raising an
/// internal-consistency error when the imaginary residue exceeds
/// `1e-8 * amplitude`.
pub(crate) fn inverse_checked(plan: &FftPlan, spectrum: &[Complex64], amplitude: f64) -> Result<Vec<f64>> {
    let (out, max_im) = plan.inverse_real(spectrum);
    let limit = 1e-8 * amplitude.max(f64::MIN_POSITIVE);
    if max_im > limit {
        return Err(Error::InternalConsistency(format!(
            "imaginary residue {max_im:.3e} exceeds {limit:.3e} after inverse transform"
        )));
    }
    Ok(out)
}
