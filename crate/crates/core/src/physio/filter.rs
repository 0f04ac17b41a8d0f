//! Butterworth and notch sections in second-order-section form, applied
//! forward and backward for zero phase.
//!
//! Every section is the bilinear transform (with frequency pre-warping) of
//! an analog prototype, written out in the audio-EQ-cookbook closed forms.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// One section of `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// `|H|` at frequency `f` for sample rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, -self.b[1] * s1 - self.b[2] * s2);
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, -self.a[0] * s1 - self.a[1] * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    fn pole_radius(&self) -> f64 {
        let [a1, a2] = self.a;
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.sqrt()
        } else {
            let r = disc.sqrt();
            ((-a1 + r) / 2.0).abs().max(((-a1 - r) / 2.0).abs())
        }
    }

    /// Internal state that makes the section's output constant for a unit
    /// constant input (transposed direct form II).
    fn steady_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }
}

/// Cascade of sections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    Low,
    High,
}

fn check_frequency(f: f64, fs: f64) -> Result<()> {
    if !(fs > 0.0) {
        return Err(Error::invalid(format!("sample rate must be positive, got {fs}")));
    }
    if !(f > 0.0) || f >= fs / 2.0 {
        return Err(Error::invalid(format!(
            "cutoff {f} Hz must lie in (0, {}) Hz for fs = {fs} Hz",
            fs / 2.0
        )));
    }
    Ok(())
}

fn butterworth(order: usize, cutoff: f64, fs: f64, pass: Pass) -> Result<Sos> {
    check_frequency(cutoff, fs)?;
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    let w0 = 2.0 * PI * cutoff / fs;
    let (cw, sw) = (w0.cos(), w0.sin());
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for k in 0..order / 2 {
        // pole pair angle from the negative real axis
        let theta = if order.is_multiple_of(2) {
            PI * (2 * k + 1) as f64 / (2 * order) as f64
        } else {
            PI * (k + 1) as f64 / order as f64
        };
        let q = 1.0 / (2.0 * theta.cos());
        let alpha = sw / (2.0 * q);
        let a = [1.0 + alpha, -2.0 * cw, 1.0 - alpha];
        let b = match pass {
            Pass::Low => [(1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0],
            Pass::High => [(1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0],
        };
        sections.push(Biquad::normalized(b, a));
    }
    if order % 2 == 1 {
        // real pole: first-order section
        let k = (w0 / 2.0).tan();
        let a = [1.0 + k, k - 1.0, 0.0];
        let b = match pass {
            Pass::Low => [k, k, 0.0],
            Pass::High => [1.0, -1.0, 0.0],
        };
        sections.push(Biquad::normalized(b, a));
    }
    Ok(Sos { sections })
}

pub fn butter_lowpass(order: usize, cutoff: f64, fs: f64) -> Result<Sos> {
    butterworth(order, cutoff, fs, Pass::Low)
}

pub fn butter_highpass(order: usize, cutoff: f64, fs: f64) -> Result<Sos> {
    butterworth(order, cutoff, fs, Pass::High)
}

/// High-pass at `low` cascaded with low-pass at `high`, each of `order`.
pub fn band_pass(order: usize, low: f64, high: f64, fs: f64) -> Result<Sos> {
    if !(low < high) {
        return Err(Error::invalid(format!("band [{low}, {high}] is inverted")));
    }
    let mut sos = butter_highpass(order, low, fs)?;
    sos.sections.extend(butter_lowpass(order, high, fs)?.sections);
    Ok(sos)
}

/// Second-order band-stop centred at the geometric mean of the edges.
pub fn band_stop(low: f64, high: f64, fs: f64) -> Result<Sos> {
    if !(low > 0.0 && low < high) {
        return Err(Error::invalid(format!("band [{low}, {high}] is inverted")));
    }
    check_frequency(high, fs)?;
    let f0 = (low * high).sqrt();
    let w0 = 2.0 * PI * f0 / fs;
    let octaves = (high / low).log2();
    let alpha = w0.sin() * (LN_2 / 2.0 * octaves * w0 / w0.sin()).sinh();
    let c = -2.0 * w0.cos();
    Ok(Sos {
        sections: vec![Biquad::normalized([1.0, c, 1.0], [1.0 + alpha, c, 1.0 - alpha])],
    })
}

impl Sos {
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f, fs)).product()
    }

    /// Causal filtering with per-section initial state `zi` (consumed).
    fn run(&self, x: &[f64], mut zi: Vec<[f64; 2]>) -> Vec<f64> {
        let mut y = x.to_vec();
        for (sec, z) in self.sections.iter().zip(zi.iter_mut()) {
            for v in y.iter_mut() {
                let input = *v;
                let out = sec.b[0] * input + z[0];
                z[0] = sec.b[1] * input - sec.a[0] * out + z[1];
                z[1] = sec.b[2] * input - sec.a[1] * out;
                *v = out;
            }
        }
        y
    }

    /// Initial states for a constant input of `level`.
    fn steady_states(&self, level: f64) -> Vec<[f64; 2]> {
        let mut scale = level;
        self.sections
            .iter()
            .map(|s| {
                let [z0, z1] = s.steady_state();
                let zi = [z0 * scale, z1 * scale];
                scale *= s.dc_gain();
                zi
            })
            .collect()
    }

    /// Samples for the slowest pole to decay by 1e-6.
    fn settling_length(&self) -> usize {
        let r = self.sections.iter().map(Biquad::pole_radius).fold(0.0, f64::max);
        if r <= 0.0 {
            0
        } else if r >= 1.0 {
            usize::MAX
        } else {
            ((1e-6f64).ln() / r.ln()).ceil() as usize
        }
    }

    /// Zero-phase filtering: odd extension at both ends, forward pass, then
    /// backward pass, each starting from steady state. The extension covers
    /// the settling time of the slowest pole when the signal is long enough.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() || self.sections.is_empty() {
            return x.to_vec();
        }
        let n = x.len();
        let pad = (3 * (2 * self.sections.len() + 1))
            .max(self.settling_length())
            .min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut y = self.run(&ext, self.steady_states(ext[0]));
        y.reverse();
        let mut y = self.run(&y, self.steady_states(y[0]));
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Centred moving average over `width` samples; the window shrinks at the
/// edges so constants pass unchanged.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let n = x.len();
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix[prefix.len() - 1] + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn butterworth_is_maximally_flat() {
        // |H|^2 = 1 / (1 + (tan(w/2) / tan(wc/2))^(2N)) after the bilinear map
        let (fs, fc) = (100.0, 7.0);
        for order in 1..=6 {
            let sos = butter_lowpass(order, fc, fs).unwrap();
            for f in [0.5, 3.0, 7.0, 12.0, 30.0] {
                let ratio = (PI * f / fs).tan() / (PI * fc / fs).tan();
                let expected = 1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt();
                assert_abs_diff_eq!(sos.magnitude(f, fs), expected, epsilon = 1e-12);
            }
            let hp = butter_highpass(order, fc, fs).unwrap();
            let ratio = (PI * fc / fs).tan() / (PI * 20.0 / fs).tan();
            let expected = 1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt();
            assert_abs_diff_eq!(hp.magnitude(20.0, fs), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn band_stop_nulls_centre() {
        let sos = band_stop(49.0, 51.0, 256.0).unwrap();
        let f0 = (49.0f64 * 51.0).sqrt();
        assert!(sos.magnitude(f0, 256.0) < 1e-9);
        assert!(sos.magnitude(10.0, 256.0) > 0.999);
        assert_abs_diff_eq!(sos.sections[0].dc_gain(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_above_nyquist_is_rejected() {
        assert!(butter_lowpass(4, 16.0, 32.0).is_err());
        assert!(butter_lowpass(4, 0.0, 32.0).is_err());
        assert!(band_pass(2, 10.0, 5.0, 100.0).is_err());
    }

    #[test]
    fn filtfilt_keeps_constants_and_kills_dc_with_highpass() {
        let x = vec![3.5; 500];
        let lp = butter_lowpass(4, 1.0, 32.0).unwrap();
        assert!(lp.filtfilt(&x).iter().all(|v| (v - 3.5).abs() < 1e-9));
        let hp = butter_highpass(2, 0.5, 256.0).unwrap();
        assert!(hp.filtfilt(&x).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn filtfilt_has_zero_phase() {
        let fs = 200.0;
        let x: Vec<f64> = (0..4000).map(|i| (2.0 * PI * 3.0 * i as f64 / fs).sin()).collect();
        let sos = butter_lowpass(4, 20.0, fs).unwrap();
        let y = sos.filtfilt(&x);
        let gain = sos.magnitude(3.0, fs).powi(2);
        for i in 1000..3000 {
            assert!((y[i] - gain * x[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn moving_average_edges() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 3), vec![1.5, 2.0, 3.0, 3.5]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
        assert_eq!(moving_average(&[2.0; 7], 4), vec![2.0; 7]);
    }
}
