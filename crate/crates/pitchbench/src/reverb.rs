//! Rectangular-room reverberation: image-source impulse responses with a
//! target decay time, convolution, and decay-time measurement by backward
//! energy integration.

use crate::dsp::next_pow2;
use crate::error::{Error, Result};
use crate::signal::Signal;

/// A shoebox room with one source and one microphone, used to render a
/// family of impulse responses that differ only in target decay time.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    /// Interior dimensions, meters.
    pub dimensions: [f64; 3],
    /// Source position, meters.
    pub source: [f64; 3],
    /// Microphone position, meters.
    pub microphone: [f64; 3],
    /// Speed of sound, m/s.
    pub speed_of_sound: f64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec {
            dimensions: [3.0, 4.0, 5.0],
            source: [1.0, 1.5, 1.5],
            microphone: [2.0, 2.5, 1.5],
            speed_of_sound: 343.0,
        }
    }
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, &d) in self.dimensions.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::Domain(format!("room dimension {i} must be positive")));
            }
        }
        for (name, p) in [("source", &self.source), ("microphone", &self.microphone)] {
            for i in 0..3 {
                if !(p[i] > 0.0 && p[i] < self.dimensions[i]) {
                    return Err(Error::Domain(format!(
                        "{name} position {:?} outside the room interior {:?}",
                        p, self.dimensions
                    )));
                }
            }
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::Domain("speed of sound must be positive".into()));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn source_distance(&self) -> f64 {
        self.source
            .iter()
            .zip(&self.microphone)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-bounce pressure reflection coefficient that makes the room's
/// statistical decay hit `t60`.
///
/// Inverting the exponential-absorption (Eyring) relation
/// `t60 = 0.161 V / (-S ln(1 - a))` gives `a = 1 - exp(-0.161 V / (S t60))`
/// for the energy absorption `a`, i.e. a wall amplitude coefficient of
/// `sqrt(1 - a)`. The simpler linear (Sabine) inversion is unusable here:
/// for a small room and a short decay it yields absorption greater than 1,
/// and even where it stays legal the rendered decay comes out well short
/// of the target, because the image-source construction is itself
/// exponential in the number of bounces.
fn reflection_coefficient(room: &RoomSpec, t60: f64) -> f64 {
    (-0.161 * room.volume() / (2.0 * room.surface_area() * t60)).exp()
}

/// Render the room's impulse response for a target decay time, at
/// amplitude `reflections^bounces / distance` per image source, nearest-
/// sample delays, length `1.2 * t60`.
///
/// The wall coefficient starts at the exponential-absorption value and is
/// then refined against the measured decay of the rendered response (a few
/// deterministic iterations), because for short decays in a small room the
/// sparse early reflections bias the measurement window; the refinement
/// puts the measured decay on target rather than merely the asymptotic
/// one.
///
/// Fails with the room's minimum feasible decay when `t60` is so short the
/// response could not even contain the direct-path arrival.
pub fn simulate_rir(room: &RoomSpec, t60: f64, sample_rate: u32) -> Result<Signal> {
    room.validate()?;
    let direct = room.source_distance();
    let minimum = direct / (1.2 * room.speed_of_sound);
    if !(t60 > minimum) {
        return Err(Error::InfeasibleRoom {
            requested: t60,
            minimum,
        });
    }
    let mut beta = reflection_coefficient(room, t60);
    let mut rir = render_rir(room, t60, beta, sample_rate);
    for _ in 0..4 {
        let Ok(measured) = schroeder_t60(&rir) else {
            break;
        };
        let rel = (measured - t60) / t60;
        if rel.abs() < 0.05 {
            break;
        }
        // decay time scales as -1/ln(beta); exponentiate to rescale it
        beta = beta.powf((measured / t60).clamp(0.2, 5.0)).clamp(1e-6, 0.999_999);
        rir = render_rir(room, t60, beta, sample_rate);
    }
    Ok(rir)
}

fn render_rir(room: &RoomSpec, t60: f64, beta: f64, sample_rate: u32) -> Signal {
    let c = room.speed_of_sound;
    let sr = sample_rate as f64;
    let n = (1.2 * t60 * sr).ceil() as usize;
    let max_dist = c * n as f64 / sr;

    // per-dimension image coordinates and bounce counts:
    // +s + 2kL reflects 2|k| times, -s + 2kL reflects |2k - 1| times
    let axis_images = |dim: usize| -> Vec<(f64, u32)> {
        let length = room.dimensions[dim];
        let s = room.source[dim];
        let m = room.microphone[dim];
        let k_max = (max_dist / (2.0 * length)).ceil() as i64 + 1;
        let mut out = Vec::with_capacity(4 * k_max as usize + 2);
        for k in -k_max..=k_max {
            let base = 2.0 * k as f64 * length;
            out.push((base + s - m, 2 * k.unsigned_abs() as u32));
            out.push((base - s - m, (2 * k - 1).unsigned_abs() as u32));
        }
        out
    };
    let xs = axis_images(0);
    let ys = axis_images(1);
    let zs = axis_images(2);

    let mut rir = vec![0.0f64; n];
    for &(dx, rx) in &xs {
        let dx2 = dx * dx;
        if dx2 > max_dist * max_dist {
            continue;
        }
        for &(dy, ry) in &ys {
            let dxy2 = dx2 + dy * dy;
            if dxy2 > max_dist * max_dist {
                continue;
            }
            for &(dz, rz) in &zs {
                let dist = (dxy2 + dz * dz).sqrt();
                let tap = (dist / c * sr).round() as usize;
                if tap >= n || dist <= 0.0 {
                    continue;
                }
                rir[tap] += beta.powi((rx + ry + rz) as i32) / dist;
            }
        }
    }
    Signal::new(rir, sample_rate)
}

/// Full linear convolution of `a` and `b` (length `a + b - 1`), by direct
/// summation for short kernels and via the frequency domain otherwise.
pub(crate) fn convolve_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 128 {
        // exact direct form, so a one-tap kernel is a bit-identical copy
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let mut out = vec![0.0; out_len];
        for (i, &s) in short.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (j, &l) in long.iter().enumerate() {
                out[i + j] += s * l;
            }
        }
        return out;
    }
    let n = next_pow2(out_len);
    let mut fa: Vec<crate::dsp::Complex64> = a
        .iter()
        .map(|&x| crate::dsp::Complex64::new(x, 0.0))
        .chain(std::iter::repeat(crate::dsp::Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut fb: Vec<crate::dsp::Complex64> = b
        .iter()
        .map(|&x| crate::dsp::Complex64::new(x, 0.0))
        .chain(std::iter::repeat(crate::dsp::Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    crate::dsp::fft_in_place(&mut fa, false);
    crate::dsp::fft_in_place(&mut fb, false);
    for (va, vb) in fa.iter_mut().zip(&fb) {
        *va *= vb;
    }
    crate::dsp::fft_in_place(&mut fa, true);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|v| v.re * scale).collect()
}

/// Convolve a signal with an impulse response, truncate to the signal's
/// length, and rescale so the output peak matches the input peak (an
/// all-zero input stays all-zero). Sample rates must agree.
pub fn convolve(signal: &Signal, rir: &Signal) -> Result<Signal> {
    if signal.sample_rate != rir.sample_rate {
        return Err(Error::Domain(format!(
            "sample rate mismatch: signal {} Hz vs impulse response {} Hz",
            signal.sample_rate, rir.sample_rate
        )));
    }
    let mut out = convolve_full(&signal.samples, &rir.samples);
    out.truncate(signal.len());
    out.resize(signal.len(), 0.0);
    let out_peak = out.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let in_peak = signal.peak();
    if out_peak > 0.0 && in_peak > 0.0 {
        let gain = in_peak / out_peak;
        for x in &mut out {
            *x *= gain;
        }
    }
    Ok(Signal::new(out, signal.sample_rate))
}

/// Decay time measured from the backward-integrated energy curve: time for
/// the -5 dB to -25 dB stretch, extrapolated to 60 dB. Fails when the
/// response never decays 25 dB below its integrated total.
pub fn schroeder_t60(rir: &Signal) -> Result<f64> {
    if rir.is_empty() {
        return Err(Error::Domain("empty impulse response".into()));
    }
    let mut energy: Vec<f64> = rir.samples.iter().rev().map(|x| x * x).collect();
    let mut acc = 0.0;
    for e in &mut energy {
        acc += *e;
        *e = acc;
    }
    energy.reverse();
    let total = energy[0];
    if total <= 0.0 {
        return Err(Error::Domain("silent impulse response".into()));
    }
    let db: Vec<f64> = energy
        .iter()
        .map(|&e| {
            if e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let sr = rir.sample_rate as f64;
    let crossing = |level: f64| -> Option<f64> {
        let i = db.iter().position(|&v| v <= level)?;
        if i == 0 {
            return Some(0.0);
        }
        // linear interpolation between the straddling samples
        let (a, b) = (db[i - 1], db[i]);
        let frac = if b.is_finite() && (a - b).abs() > 0.0 {
            (a - level) / (a - b)
        } else {
            0.0
        };
        Some((i as f64 - 1.0 + frac) / sr)
    };
    let t5 = crossing(-5.0);
    let t25 = crossing(-25.0);
    match (t5, t25) {
        (Some(a), Some(b)) if b > a => Ok(3.0 * (b - a)),
        _ => Err(Error::Domain(
            "impulse response never decays 25 dB; cannot measure a decay time".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_path_tap_lands_at_the_predicted_sample() {
        let room = RoomSpec::default();
        let sr = 16000u32;
        let rir = simulate_rir(&room, 0.3, sr).unwrap();
        let dist = room.source_distance();
        assert!((dist - 2f64.sqrt()).abs() < 1e-12);
        let expected = (dist / 343.0 * sr as f64).round() as usize;
        // first arrival is the direct path...
        let first = rir.samples.iter().position(|&x| x != 0.0).unwrap();
        assert_eq!(first, expected);
        // ...and it is the strongest tap, at amplitude 1/distance
        let (argmax, max) = rir
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap();
        assert_eq!(argmax, expected);
        assert!((max - 1.0 / dist).abs() < 0.05 / dist, "direct amp {max}");
    }

    #[test]
    fn measured_decay_matches_the_target_within_twenty_percent() {
        let room = RoomSpec::default();
        for &t60 in &[0.1, 0.2, 0.3, 0.6, 1.0] {
            let rir = simulate_rir(&room, t60, 16000).unwrap();
            let measured = schroeder_t60(&rir).unwrap();
            let rel = (measured - t60) / t60;
            assert!(
                rel.abs() < 0.2,
                "target {t60}: measured {measured:.3} ({:+.0}%)",
                rel * 100.0
            );
        }
    }

    #[test]
    fn infeasibly_short_decay_is_rejected_with_the_minimum() {
        let room = RoomSpec::default();
        let err = simulate_rir(&room, 0.001, 16000).unwrap_err();
        match err {
            crate::error::Error::InfeasibleRoom { requested, minimum } => {
                assert_eq!(requested, 0.001);
                let expected = 2f64.sqrt() / (1.2 * 343.0);
                assert!((minimum - expected).abs() < 1e-12);
            }
            other => panic!("wrong error: {other}"),
        }
        assert!(simulate_rir(&room, 0.0, 16000).is_err());
        assert!(simulate_rir(&room, -1.0, 16000).is_err());
    }

    #[test]
    fn bad_geometry_is_rejected() {
        let mut room = RoomSpec::default();
        room.microphone = [2.0, 4.5, 1.5]; // outside the 4 m dimension
        assert!(simulate_rir(&room, 0.3, 16000).is_err());
        let mut room = RoomSpec::default();
        room.dimensions = [3.0, 0.0, 5.0];
        assert!(simulate_rir(&room, 0.3, 16000).is_err());
    }

    #[test]
    fn fft_convolution_matches_brute_force() {
        // deterministic pseudo-random operands long enough for the FFT path
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..400).map(|_| next()).collect();
        let b: Vec<f64> = (0..300).map(|_| next()).collect();
        let fast = convolve_full(&a, &b);
        assert_eq!(fast.len(), 699);
        for (k, &v) in fast.iter().enumerate() {
            let mut direct = 0.0;
            for i in 0..a.len() {
                if k >= i && k - i < b.len() {
                    direct += a[i] * b[k - i];
                }
            }
            assert!((v - direct).abs() < 1e-9, "index {k}: {v} vs {direct}");
        }
    }

    #[test]
    fn one_tap_response_copies_the_signal_exactly() {
        let samples: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let s = Signal::new(samples.clone(), 16000);
        let delta = Signal::new(vec![1.0], 16000);
        let out = convolve(&s, &delta).unwrap();
        assert_eq!(out.samples, samples);
    }

    #[test]
    fn convolution_output_is_level_matched_and_length_preserved() {
        let room = RoomSpec::default();
        let rir = simulate_rir(&room, 0.3, 16000).unwrap();
        let tone: Vec<f64> = (0..8000)
            .map(|i| 0.7 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / 16000.0).sin())
            .collect();
        let s = Signal::new(tone, 16000);
        let wet = convolve(&s, &rir).unwrap();
        assert_eq!(wet.len(), s.len());
        assert!((wet.peak() - s.peak()).abs() < 1e-12);
        // silence stays silence
        let z = Signal::new(vec![0.0; 1000], 16000);
        let wz = convolve(&z, &rir).unwrap();
        assert!(wz.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rate_mismatch_is_an_error() {
        let s = Signal::new(vec![1.0; 100], 16000);
        let r = Signal::new(vec![1.0], 22050);
        assert!(convolve(&s, &r).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let room = RoomSpec::default();
        let a = simulate_rir(&room, 0.4, 22050).unwrap();
        let b = simulate_rir(&room, 0.4, 22050).unwrap();
        assert_eq!(a.samples, b.samples);
    }
}
