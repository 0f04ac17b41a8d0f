use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchParams {
    pub window_seconds: f64,
    /// Fraction of a segment shared with the next one, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams {
            window_seconds: 2.0,
            overlap: 0.5,
        }
    }
}

/// One-sided power spectral density, power per Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }

    /// Integral over the whole grid; equals the signal's mean power.
    pub fn total_power(&self) -> f64 {
        let hi = self.freqs[self.freqs.len() - 1];
        band_power(self, [0.0, hi]).expect("full band is valid")
    }

    fn value_at(&self, f: f64) -> f64 {
        let df = self.resolution();
        let i = ((f / df).floor() as usize).min(self.freqs.len() - 2);
        let w = (f - self.freqs[i]) / df;
        self.density[i] * (1.0 - w) + self.density[i + 1] * w
    }
}

/// Welch estimate with periodic Hann segments.
///
/// Segment periodograms `|X_k|^2` are averaged and scaled by
/// `1 / (fs * sum(w^2))`; bins strictly between DC and Nyquist are doubled
/// to fold in negative frequencies. Integrating the result over frequency
/// gives the mean power of the signal. No detrending is applied.
pub fn welch_psd(x: &[f64], fs: f64, params: &WelchParams) -> Result<Psd> {
    if !(fs > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if !(0.0..1.0).contains(&params.overlap) {
        return Err(Error::invalid(format!(
            "overlap must be in [0, 1), got {}",
            params.overlap
        )));
    }
    let seg = (params.window_seconds * fs).round() as usize;
    if seg < 2 {
        return Err(Error::invalid("Welch window shorter than two samples"));
    }
    if x.len() < seg {
        return Err(Error::invalid(format!(
            "series of {} samples is shorter than one {seg}-sample window",
            x.len()
        )));
    }
    let hop = (seg - (params.overlap * seg as f64).round() as usize).max(1);
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let norm = fs * window.iter().map(|w| w * w).sum::<f64>();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= x.len() {
        for ((b, v), w) in buf.iter_mut().zip(&x[start..start + seg]).zip(&window) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) { 1.0 } else { 2.0 };
            one_sided * a / (count as f64 * norm)
        })
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / seg as f64).collect();
    Ok(Psd { freqs, density })
}

/// Trapezoidal integral of the PSD over `[lo, hi]` Hz, with the density
/// interpolated linearly at the band edges.
pub fn band_power(psd: &Psd, band: [f64; 2]) -> Result<f64> {
    let [lo, hi] = band;
    if lo > hi {
        return Err(Error::invalid(format!("band [{lo}, {hi}] is inverted")));
    }
    let f_max = psd.freqs[psd.freqs.len() - 1];
    if lo < 0.0 || hi > f_max {
        return Err(Error::invalid(format!(
            "band [{lo}, {hi}] outside PSD range [0, {f_max}]"
        )));
    }
    let mut points = vec![(lo, psd.value_at(lo))];
    points.extend(
        psd.freqs
            .iter()
            .zip(&psd.density)
            .filter(|(f, _)| **f > lo && **f < hi)
            .map(|(f, d)| (*f, *d)),
    );
    points.push((hi, psd.value_at(hi)));
    Ok(points
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_signal_gives_zero_psd() {
        let psd = welch_psd(&vec![0.0; 1024], 256.0, &WelchParams::default()).unwrap();
        assert!(psd.density.iter().all(|d| *d == 0.0));
        assert_eq!(psd.freqs.len(), 257);
        assert_eq!(psd.resolution(), 0.5);
    }

    #[test]
    fn rejects_short_series_and_bad_overlap() {
        assert!(welch_psd(&[1.0; 100], 256.0, &WelchParams::default()).is_err());
        let bad = WelchParams {
            overlap: 1.0,
            ..Default::default()
        };
        assert!(welch_psd(&[1.0; 1000], 256.0, &bad).is_err());
    }

    #[test]
    fn flat_density_band_is_rectangle() {
        let freqs: Vec<f64> = (0..=256).map(|k| k as f64 * 0.5).collect();
        let psd = Psd {
            density: vec![0.3; freqs.len()],
            freqs,
        };
        assert_abs_diff_eq!(band_power(&psd, [8.0, 13.0]).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(band_power(&psd, [8.2, 8.7]).unwrap(), 0.15, epsilon = 1e-12);
        assert!(band_power(&psd, [13.0, 8.0]).is_err());
        assert!(band_power(&psd, [8.0, 200.0]).is_err());
        let zero = Psd {
            density: vec![0.0; psd.freqs.len()],
            freqs: psd.freqs.clone(),
        };
        assert_eq!(band_power(&zero, [4.0, 8.0]).unwrap(), 0.0);
    }

    #[test]
    fn on_grid_sinusoid_integrates_to_mean_power() {
        let x: Vec<f64> = (0..4096)
            .map(|i| 3.0 * (2.0 * PI * 10.0 * i as f64 / 128.0).sin())
            .collect();
        let psd = welch_psd(&x, 128.0, &WelchParams::default()).unwrap();
        assert_abs_diff_eq!(psd.total_power(), 4.5, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn band_power_is_additive_and_non_negative(
            values in prop::collection::vec(0.0f64..5.0, 300..600),
            a in 0.0f64..20.0, b in 0.0f64..20.0, c in 0.0f64..20.0
        ) {
            let psd = welch_psd(&values, 64.0, &WelchParams::default()).unwrap();
            prop_assert!(psd.density.iter().all(|d| *d >= 0.0));
            let mut e = [a, b, c];
            e.sort_by(f64::total_cmp);
            let whole = band_power(&psd, [e[0], e[2]]).unwrap();
            let left = band_power(&psd, [e[0], e[1]]).unwrap();
            let right = band_power(&psd, [e[1], e[2]]).unwrap();
            prop_assert!((whole - left - right).abs() <= 1e-9 * whole.max(1.0));
            prop_assert!(whole + 1e-12 >= left && whole + 1e-12 >= right);
        }
    }
}
