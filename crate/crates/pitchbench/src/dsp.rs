//! Shared numerical kernels: FFT-based correlation, the cumulative
//! mean-normalized difference function, linear prediction, and amplitude
//! spectra. Everything operates on `f64` and is deterministic.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) type Complex64 = Complex<f64>;

pub(crate) fn fft_in_place(buf: &mut [Complex<f64>], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Analysis window shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hanning,
    Blackman,
}

impl Window {
    /// Sampled window of length `n` (symmetric; endpoints near zero for the
    /// tapered shapes).
    pub fn samples(self, n: usize) -> Vec<f64> {
        if n <= 1 {
            return vec![1.0; n];
        }
        let denom = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let u = i as f64 / denom;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hanning => 0.5 - 0.5 * (2.0 * std::f64::consts::PI * u).cos(),
                    Window::Blackman => {
                        0.42 - 0.5 * (2.0 * std::f64::consts::PI * u).cos()
                            + 0.08 * (4.0 * std::f64::consts::PI * u).cos()
                    }
                }
            })
            .collect()
    }
}

/// Biased autocorrelation `r[tau] = sum_n x[n] * x[n+tau]` for
/// `tau = 0 .. n-1`, computed through an FFT zero-padded to at least twice
/// the frame length so linear (not circular) lags come out.
pub fn autocorrelation(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    if n == 0 {
        return Vec::new();
    }
    let len = next_pow2(2 * n);
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    fft_in_place(&mut buf, false);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / len as f64;
    buf[..n].iter().map(|v| v.re * scale).collect()
}

/// Head-anchored cross-correlation `c[tau] = sum_{i<w} x[i] * x[i+tau]` for
/// `tau = 0 ..= max_lag`. Requires `w + max_lag <= frame.len()`.
fn head_cross_correlation(frame: &[f64], w: usize, max_lag: usize) -> Vec<f64> {
    debug_assert!(w + max_lag <= frame.len());
    let n = frame.len();
    let len = next_pow2(n + 1);
    let mut a: Vec<Complex<f64>> = frame[..w]
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut b: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    fft_in_place(&mut a, false);
    fft_in_place(&mut b, false);
    for (va, vb) in a.iter_mut().zip(&b) {
        *va = va.conj() * vb;
    }
    fft_in_place(&mut a, true);
    let scale = 1.0 / len as f64;
    a[..=max_lag].iter().map(|v| v.re * scale).collect()
}

/// Head-window correlation pieces shared by the difference function and the
/// normalized cross-correlation: the cross terms plus the two energy terms.
pub(crate) struct CorrelationParts {
    /// `c[tau] = sum_{i<w} x[i] x[i+tau]`
    pub cross: Vec<f64>,
    /// `sum_{i<w} x[i]^2`
    pub head_energy: f64,
    /// `e[tau] = sum_{i=tau}^{tau+w-1} x[i]^2`
    pub lag_energy: Vec<f64>,
}

pub(crate) fn correlation_parts(frame: &[f64], w: usize, max_lag: usize) -> CorrelationParts {
    assert!(
        w >= 1 && w + max_lag <= frame.len(),
        "correlation window {} + max lag {} exceeds frame of {}",
        w,
        max_lag,
        frame.len()
    );
    let cross = head_cross_correlation(frame, w, max_lag);
    // prefix sums of x^2 for the sliding energy
    let mut prefix = Vec::with_capacity(frame.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in frame {
        acc += x * x;
        prefix.push(acc);
    }
    let head_energy = prefix[w];
    let lag_energy = (0..=max_lag).map(|t| prefix[t + w] - prefix[t]).collect();
    CorrelationParts {
        cross,
        head_energy,
        lag_energy,
    }
}

/// Cumulative mean-normalized difference over a fixed integration window of
/// `w` samples: `d[tau] = sum_{i<w} (x[i] - x[i+tau])^2`, normalized to
/// `d'[0] = 1`, `d'[tau] = d[tau] * tau / sum_{j<=tau} d[j]`.
///
/// A zero-energy (or exactly constant) frame has no dips by definition and
/// comes back as all ones.
pub(crate) fn cmnd(frame: &[f64], w: usize, max_lag: usize) -> Vec<f64> {
    let mut out = vec![1.0; max_lag + 1];
    // A constant frame correlates perfectly at every lag; computing the
    // normalized difference would divide rounding noise by rounding noise.
    if frame.iter().all(|&x| x == frame[0]) {
        return out;
    }
    let parts = correlation_parts(frame, w, max_lag);
    if parts.head_energy + parts.lag_energy.last().copied().unwrap_or(0.0) <= 0.0 {
        return out;
    }
    let mut running = 0.0;
    for tau in 1..=max_lag {
        let d = (parts.head_energy + parts.lag_energy[tau] - 2.0 * parts.cross[tau]).max(0.0);
        running += d;
        out[tau] = if running > 0.0 {
            d * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

/// Cumulative mean-normalized difference function of a frame, with the
/// integration window fixed to the first half of the frame and lags up to
/// half the frame length. Scale-invariant; dips toward 0 at lags matching
/// the frame's period.
pub fn yin_difference(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    if n < 2 {
        return vec![1.0; n.min(1)];
    }
    let max_lag = n / 2;
    let w = n - max_lag;
    cmnd(frame, w, max_lag)
}

/// Result of linear-prediction analysis of one frame.
#[derive(Debug, Clone)]
pub struct LpcAnalysis {
    /// Inverse-filter coefficients `a[0..=order]` with `a[0] = 1`.
    pub coefficients: Vec<f64>,
    /// The frame filtered by `A(z)` (zero initial state), same length as
    /// the input.
    pub residual: Vec<f64>,
    /// True when the frame was all zeros or constant and no model was fit;
    /// the residual is then the frame itself.
    pub degenerate: bool,
}

/// Fit an all-pole model of `order` by Levinson-Durbin on the frame's
/// autocorrelation and inverse-filter the frame with it.
///
/// Order 0 returns the frame unchanged with `a = [1]`. Degenerate frames
/// (all zeros or constant) skip the fit and set the flag.
pub fn lpc_residual(frame: &[f64], order: usize) -> LpcAnalysis {
    let identity = |degenerate| LpcAnalysis {
        coefficients: vec![1.0],
        residual: frame.to_vec(),
        degenerate,
    };
    if order == 0 {
        return identity(false);
    }
    if frame.len() <= order {
        return identity(true);
    }
    let constant = frame.windows(2).all(|p| p[0] == p[1]);
    if constant {
        return identity(true);
    }
    let r = autocorrelation(frame);
    if !(r[0] > 0.0) || !r[0].is_finite() {
        return identity(true);
    }

    // Levinson-Durbin recursion
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let mut acc = r[i];
        for j in 1..i {
            acc += a[j] * r[i - j];
        }
        let k = -acc / err;
        if !k.is_finite() {
            break;
        }
        let half = i / 2;
        for j in 1..=half {
            let tmp = a[j] + k * a[i - j];
            a[i - j] += k * a[j];
            a[j] = tmp;
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= r[0] * 1e-12 {
            // numerically exhausted; keep the model fitted so far
            break;
        }
    }

    // inverse filter with zero initial state
    let mut residual = vec![0.0; frame.len()];
    for (n, slot) in residual.iter_mut().enumerate() {
        let mut acc = frame[n];
        let kmax = n.min(order);
        for k in 1..=kmax {
            acc += a[k] * frame[n - k];
        }
        *slot = acc;
    }
    LpcAnalysis {
        coefficients: a,
        residual,
        degenerate: false,
    }
}

/// All-pole synthesis filter: the exact inverse of the inverse filtering in
/// [`lpc_residual`] (zero initial state), used to check reconstruction.
pub fn lpc_synthesis(residual: &[f64], coefficients: &[f64]) -> Vec<f64> {
    let order = coefficients.len().saturating_sub(1);
    let mut out = vec![0.0; residual.len()];
    for n in 0..residual.len() {
        let mut acc = residual[n];
        let kmax = n.min(order);
        for k in 1..=kmax {
            acc -= coefficients[k] * out[n - k];
        }
        out[n] = acc;
    }
    out
}

/// Magnitude of the `n_bins`-point DFT of the windowed frame. Bin `k` maps
/// to frequency `k * sample_rate / n_bins`; all `n_bins` bins are returned
/// (the upper half mirrors the lower for real input).
pub fn amplitude_spectrum(frame: &[f64], n_bins: usize) -> Result<Vec<f64>> {
    amplitude_spectrum_windowed(frame, n_bins, Window::Blackman)
}

/// [`amplitude_spectrum`] with an explicit window choice.
pub fn amplitude_spectrum_windowed(
    frame: &[f64],
    n_bins: usize,
    window: Window,
) -> Result<Vec<f64>> {
    if n_bins < frame.len() {
        return Err(Error::Domain(format!(
            "n_bins {} smaller than frame length {}",
            n_bins,
            frame.len()
        )));
    }
    if n_bins == 0 {
        return Err(Error::Domain("n_bins must be positive".into()));
    }
    let w = window.samples(frame.len());
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| Complex::new(x * wi, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_bins)
        .collect();
    fft_in_place(&mut buf, false);
    Ok(buf.iter().map(|v| v.norm()).collect())
}

/// Offset of a parabola's extremum fitted through three equally spaced
/// points, relative to the middle one, in [-1, 1]. Returns 0 when the
/// points are (numerically) collinear or the fit lands outside one step.
pub fn parabolic_offset(y_prev: f64, y_mid: f64, y_next: f64) -> f64 {
    let denom = y_prev - 2.0 * y_mid + y_next;
    if denom.abs() < 1e-30 {
        return 0.0;
    }
    let delta = 0.5 * (y_prev - y_next) / denom;
    if delta.abs() >= 1.0 {
        0.0
    } else {
        delta
    }
}
