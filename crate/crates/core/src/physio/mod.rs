//! Physiological indexes: tonic skin conductance and EEG band powers.

mod filter;
mod welch;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub use filter::{band_pass, band_stop, butter_highpass, butter_lowpass, moving_average, Biquad, Sos};
pub use welch::{band_power, welch_psd, Psd, WelchParams};

pub const THETA_BAND: [f64; 2] = [4.0, 8.0];
pub const ALPHA_BAND: [f64; 2] = [8.0, 13.0];
pub const MIN_ALPHA_POWER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordingFile", into = "RecordingFile")]
pub struct PhysioRecording {
    fs: f64,
    channels: Vec<Channel>,
}

#[derive(Serialize, Deserialize)]
struct RecordingFile {
    fs: f64,
    channels: Vec<Channel>,
}

impl TryFrom<RecordingFile> for PhysioRecording {
    type Error = Error;
    fn try_from(f: RecordingFile) -> Result<Self> {
        PhysioRecording::new(f.fs, f.channels)
    }
}

impl From<PhysioRecording> for RecordingFile {
    fn from(r: PhysioRecording) -> Self {
        RecordingFile {
            fs: r.fs,
            channels: r.channels,
        }
    }
}

#[derive(Serialize, Deserialize, Default)]
struct Sidecar {
    fs: Option<f64>,
    #[serde(default)]
    units: BTreeMap<String, String>,
}

impl PhysioRecording {
    pub fn new(fs: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {fs}")));
        }
        let Some(first) = channels.first() else {
            return Err(Error::NoData("recording has no channels".into()));
        };
        let n = first.samples.len();
        for c in &channels {
            if c.samples.len() != n {
                return Err(Error::invalid(format!(
                    "channel {} has {} samples, expected {n}",
                    c.name,
                    c.samples.len()
                )));
            }
            if let Some(i) = c.samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("channel {} sample {i} is not finite", c.name)));
            }
        }
        Ok(PhysioRecording { fs, channels })
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.samples.as_slice())
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    /// Reads a `.json` container, or a CSV `t,<channels...>` with an
    /// optional sidecar `<stem>.json` holding `fs` and `units`. Without a
    /// sidecar the rate comes from the time column.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            return io::read_json(path);
        }
        let table = io::read_table(path)?;
        let sidecar_path = path.with_extension("json");
        let sidecar: Sidecar = if sidecar_path.exists() {
            io::read_json(&sidecar_path)?
        } else {
            Sidecar::default()
        };
        let t_col = table.column_index("t");
        let fs = match sidecar.fs {
            Some(fs) => fs,
            None => {
                let t = table
                    .column("t")
                    .ok_or_else(|| Error::invalid(format!("{}: no sample rate and no t column", path.display())))?;
                if t.len() < 2 {
                    return Err(Error::NoData(format!("{}: too few samples", path.display())));
                }
                (t.len() - 1) as f64 / (t[t.len() - 1] - t[0])
            }
        };
        let channels = table
            .columns
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != t_col)
            .map(|(i, name)| Channel {
                name: name.clone(),
                unit: sidecar.units.get(name).cloned(),
                samples: table.rows.iter().map(|r| r[i]).collect(),
            })
            .collect();
        PhysioRecording::new(fs, channels)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    /// Writes the CSV plus its sidecar.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut header = vec!["t".to_string()];
        header.extend(self.channels.iter().map(|c| c.name.clone()));
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|i| {
                let mut row = vec![i as f64 / self.fs];
                row.extend(self.channels.iter().map(|c| c.samples[i]));
                row
            })
            .collect();
        io::write_table(path, &header, &rows)?;
        let sidecar = Sidecar {
            fs: Some(self.fs),
            units: self
                .channels
                .iter()
                .filter_map(|c| c.unit.clone().map(|u| (c.name.clone(), u)))
                .collect(),
        };
        io::write_json(path.with_extension("json"), &sidecar)
    }
}

/// Seconds from the start of the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        TimeWindow { start, end }
    }

    /// Half-open sample range `[round(start fs), round(end fs))`.
    pub fn samples(&self, fs: f64, len: usize) -> Result<std::ops::Range<usize>> {
        if !(self.start >= 0.0) || !self.end.is_finite() {
            return Err(Error::invalid(format!("window [{}, {}] is invalid", self.start, self.end)));
        }
        let a = (self.start * fs).round() as usize;
        let b = (self.end * fs).round() as usize;
        if b > len {
            return Err(Error::invalid(format!(
                "window [{}, {}] s ends after the recording ({} s)",
                self.start,
                self.end,
                len as f64 / fs
            )));
        }
        if a >= b {
            return Err(Error::NoData(format!("window [{}, {}] s is empty", self.start, self.end)));
        }
        Ok(a..b)
    }
}

impl std::str::FromStr for TimeWindow {
    type Err = Error;
    /// `start:end` in seconds.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("window `{s}` is not start:end")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("window `{s}`: `{v}` is not a number")))
        };
        Ok(TimeWindow::new(parse(a)?, parse(b)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdaFilter {
    pub cutoff_hz: f64,
    pub order: usize,
    pub smoothing_seconds: f64,
}

impl Default for EdaFilter {
    fn default() -> Self {
        EdaFilter {
            cutoff_hz: 1.0,
            order: 4,
            smoothing_seconds: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EegFilter {
    pub band: [f64; 2],
    pub order: usize,
    pub notch: Option<[f64; 2]>,
}

impl Default for EegFilter {
    fn default() -> Self {
        EegFilter {
            band: [0.5, 40.0],
            order: 2,
            notch: Some([49.0, 51.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysioParams {
    pub eda: EdaFilter,
    pub eeg: EegFilter,
    pub welch: WelchParams,
    pub theta: [f64; 2],
    pub alpha: [f64; 2],
    pub eda_channel: String,
    /// Left then right.
    pub frontal: [String; 2],
    pub parietal: [String; 2],
}

impl Default for PhysioParams {
    fn default() -> Self {
        PhysioParams {
            eda: EdaFilter::default(),
            eeg: EegFilter::default(),
            welch: WelchParams::default(),
            theta: THETA_BAND,
            alpha: ALPHA_BAND,
            eda_channel: "EDA".into(),
            frontal: ["F3".into(), "F4".into()],
            parietal: ["P3".into(), "P4".into()],
        }
    }
}

/// Zero-phase Butterworth low-pass followed by a centred moving average.
/// The average spans the odd sample count nearest the smoothing window and
/// reflects the signal oddly about its end points, so constants and
/// straight lines pass unchanged.
pub fn filter_eda(x: &[f64], fs: f64, p: &EdaFilter) -> Result<Vec<f64>> {
    let y = butter_lowpass(p.order, p.cutoff_hz, fs)?.filtfilt(x);
    let width = 2 * ((p.smoothing_seconds * fs - 1.0) / 2.0).round().max(0.0) as usize + 1;
    Ok(smooth_reflected(&y, width))
}

fn smooth_reflected(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    if n < 2 || width < 2 {
        return x.to_vec();
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    let (pl, pr) = (before.min(n - 1), after.min(n - 1));
    let mut ext = Vec::with_capacity(n + pl + pr);
    ext.extend((1..=pl).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pr).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    moving_average(&ext, width)[pl..pl + n].to_vec()
}

/// Zero-phase band-pass then band-stop. The band-stop is skipped, with a
/// warning, when its upper edge is not below Nyquist.
pub fn filter_eeg(x: &[f64], fs: f64, p: &EegFilter) -> Result<Vec<f64>> {
    let mut sos = band_pass(p.order, p.band[0], p.band[1], fs)?;
    if let Some([lo, hi]) = p.notch {
        if fs > 2.0 * hi {
            sos.sections.extend(band_stop(lo, hi, fs)?.sections);
        } else {
            log::warn!("fs = {fs} Hz too low for the [{lo}, {hi}] Hz band-stop; skipped");
        }
    }
    Ok(sos.filtfilt(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPowers {
    pub theta: f64,
    pub alpha: f64,
}

/// θ and α power of one filtered EEG channel inside `window`.
pub fn band_powers(
    rec: &PhysioRecording,
    channel: &str,
    window: TimeWindow,
    p: &PhysioParams,
) -> Result<BandPowers> {
    let x = rec.channel(channel)?;
    let range = window.samples(rec.fs, rec.len())?;
    let y = filter_eeg(x, rec.fs, &p.eeg)?;
    let psd = welch_psd(&y[range], rec.fs, &p.welch)?;
    Ok(BandPowers {
        theta: band_power(&psd, p.theta)?,
        alpha: band_power(&psd, p.alpha)?,
    })
}

/// Mean over both hemispheres of frontal θ over parietal α.
pub fn theta_alpha_ratio(rec: &PhysioRecording, window: TimeWindow, p: &PhysioParams) -> Result<f64> {
    let mut sum = 0.0;
    for (f, par) in p.frontal.iter().zip(&p.parietal) {
        let theta = band_powers(rec, f, window, p)?.theta;
        let alpha = band_powers(rec, par, window, p)?.alpha;
        if alpha < MIN_ALPHA_POWER {
            return Err(Error::DegenerateDenominator(format!(
                "alpha power of {par} is {alpha:e}"
            )));
        }
        sum += theta / alpha;
    }
    Ok(0.5 * sum)
}

/// Mean of the filtered EDA channel inside `window`.
pub fn scl_mean(rec: &PhysioRecording, window: TimeWindow, p: &PhysioParams) -> Result<f64> {
    let x = rec.channel(&p.eda_channel)?;
    let range = window.samples(rec.fs, rec.len())?;
    let y = filter_eda(x, rec.fs, &p.eda)?;
    let slice = &y[range];
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}

pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::NoData("nothing to normalize".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateRange(lo));
    }
    Ok(values
        .iter()
        .map(|v| if *v == hi { 1.0 } else { (v - lo) / (hi - lo) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, fs: f64, seconds: f64) -> Vec<f64> {
        let n = (seconds * fs).round() as usize;
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn recording(fs: f64, chans: &[(&str, Vec<f64>)]) -> PhysioRecording {
        PhysioRecording::new(
            fs,
            chans
                .iter()
                .map(|(n, s)| Channel {
                    name: n.to_string(),
                    unit: None,
                    samples: s.clone(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn eda_constant_passes() {
        let y = filter_eda(&vec![2.0; 640], 32.0, &EdaFilter::default()).unwrap();
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn eda_keeps_slow_and_kills_fast() {
        let p = EdaFilter::default();
        let slow = sine(0.1, 1.0, 32.0, 100.0);
        let y = filter_eda(&slow, 32.0, &p).unwrap();
        let mid = &y[320..2880];
        let ratio = rms(mid) / rms(&slow[320..2880]);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");

        let fast = sine(10.0, 1.0, 32.0, 20.0);
        let y = filter_eda(&fast, 32.0, &p).unwrap();
        let db = 20.0 * (rms(&y[64..576]) / rms(&fast)).log10();
        assert!(db <= -40.0, "{db}");
        // the low-pass alone, applied twice, already reaches this
        let h = butter_lowpass(4, 1.0, 32.0).unwrap().magnitude(10.0, 32.0);
        assert!(40.0 * h.log10() < -40.0);
    }

    #[test]
    fn eda_rejects_cutoff_at_nyquist() {
        let p = EdaFilter {
            cutoff_hz: 16.0,
            ..Default::default()
        };
        assert!(matches!(filter_eda(&[1.0; 100], 32.0, &p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn eeg_notch_band_and_dc() {
        let p = EegFilter::default();
        let fs = 256.0;
        // steady state, clear of the band-stop's ring at the record ends
        let mains = sine(50.0, 1.0, fs, 20.0);
        let y = filter_eeg(&mains, fs, &p).unwrap();
        let r = rms(&y[512..4608]) / rms(&mains[512..4608]);
        assert!(r <= 0.05, "{r}");

        let alpha = sine(10.0, 1.0, fs, 20.0);
        let y = filter_eeg(&alpha, fs, &p).unwrap();
        let r = rms(&y[512..4608]) / rms(&alpha[512..4608]);
        assert!((r - 1.0).abs() < 0.1, "{r}");

        let y = filter_eeg(&vec![5.0; 5120], fs, &p).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(mean.abs() <= 1e-3 * 5.0);
    }

    #[test]
    fn eeg_skips_notch_at_low_rate() {
        let x = sine(10.0, 1.0, 100.0, 10.0);
        assert!(filter_eeg(&x, 100.0, &EegFilter::default()).is_ok());
        assert!(filter_eeg(&x, 60.0, &EegFilter::default()).is_err());
    }

    #[test]
    fn welch_sinusoid_and_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let fs = 256.0;
        let psd = welch_psd(&sine(10.0, 1.0, fs, 60.0), fs, &WelchParams::default()).unwrap();
        assert_abs_diff_eq!(band_power(&psd, [9.0, 11.0]).unwrap(), 0.5, epsilon = 0.05);
        assert!(band_power(&psd, THETA_BAND).unwrap() < 1e-3);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..(120.0 * fs) as usize)
            .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
            .collect();
        let psd = welch_psd(&noise, fs, &WelchParams::default()).unwrap();
        assert!((psd.total_power() - 1.0).abs() < 0.1);
    }

    #[test]
    fn ratio_examples() {
        let fs = 256.0;
        let p = PhysioParams::default();
        let a10 = sine(10.0, 1.0, fs, 30.0);
        let a6 = sine(6.0, 1.0, fs, 30.0);
        let w = TimeWindow::new(2.0, 28.0);
        let same = recording(fs, &[("F3", a10.clone()), ("F4", a10.clone()), ("P3", a10.clone()), ("P4", a10.clone())]);
        assert!(theta_alpha_ratio(&same, w, &p).unwrap() < 0.01);

        let rec = recording(fs, &[("F3", a6.clone()), ("F4", a6.clone()), ("P3", a10.clone()), ("P4", a10.clone())]);
        let r = theta_alpha_ratio(&rec, w, &p).unwrap();
        assert!((r - 1.0).abs() < 0.15, "{r}");

        let left = recording(fs, &[("F3", a6.clone()), ("F4", sine(6.0, 2.0, fs, 30.0)), ("P3", a10.clone()), ("P4", sine(10.0, 0.5, fs, 30.0))]);
        let right = recording(fs, &[("F4", a6.clone()), ("F3", sine(6.0, 2.0, fs, 30.0)), ("P4", a10.clone()), ("P3", sine(10.0, 0.5, fs, 30.0))]);
        assert_eq!(theta_alpha_ratio(&left, w, &p).unwrap(), theta_alpha_ratio(&right, w, &p).unwrap());

        let flat = recording(fs, &[("F3", a6.clone()), ("F4", a6.clone()), ("P3", vec![0.0; a6.len()]), ("P4", a10)]);
        assert!(matches!(theta_alpha_ratio(&flat, w, &p), Err(Error::DegenerateDenominator(_))));
        let missing = recording(fs, &[("F3", a6)]);
        assert!(matches!(theta_alpha_ratio(&missing, w, &p), Err(Error::MissingChannel(c)) if c == "F4" || c == "P3"));
    }

    #[test]
    fn scl_examples() {
        let fs = 32.0;
        let p = PhysioParams::default();
        let rec = recording(fs, &[("EDA", vec![2.0; 640])]);
        assert_abs_diff_eq!(scl_mean(&rec, TimeWindow::new(2.0, 12.0), &p).unwrap(), 2.0, epsilon = 1e-9);

        let ramp: Vec<f64> = (0..=320).map(|i| i as f64 / 320.0).collect();
        let rec = recording(fs, &[("EDA", ramp)]);
        let whole = TimeWindow::new(0.0, 321.0 / fs);
        assert_abs_diff_eq!(scl_mean(&rec, whole, &p).unwrap(), 0.5, epsilon = 1e-6);

        let wave: Vec<f64> = sine(0.05, 0.5, fs, 200.0).iter().map(|v| v + 3.0).collect();
        let rec = recording(fs, &[("EDA", wave)]);
        assert_abs_diff_eq!(scl_mean(&rec, TimeWindow::new(20.0, 180.0), &p).unwrap(), 3.0, epsilon = 1e-3);

        assert!(matches!(scl_mean(&rec, TimeWindow::new(5.0, 5.0), &p), Err(Error::NoData(_))));
        assert!(scl_mean(&rec, TimeWindow::new(5.0, 500.0), &p).is_err());
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[5.0, 10.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(minmax_normalize(&[3.0, 3.0]), Err(Error::DegenerateRange(_))));
    }

    #[test]
    fn recording_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = recording(128.0, &[("EDA", vec![1.0, 2.0, 3.0]), ("F3", vec![0.1, -0.2, 0.3])]);
        rec.channels[0].unit = Some("uS".into());
        let csv = dir.path().join("rec.csv");
        rec.save_csv(&csv).unwrap();
        assert_eq!(PhysioRecording::load(&csv).unwrap(), rec);
        std::fs::remove_file(dir.path().join("rec.json")).unwrap();
        let inferred = PhysioRecording::load(&csv).unwrap();
        assert_abs_diff_eq!(inferred.fs(), 128.0, epsilon = 1e-9);

        let json = dir.path().join("container.json");
        rec.save_json(&json).unwrap();
        assert_eq!(PhysioRecording::load(&json).unwrap(), rec);
    }

    #[test]
    fn window_parsing() {
        let w: TimeWindow = "1.5:3".parse().unwrap();
        assert_eq!(w, TimeWindow::new(1.5, 3.0));
        assert!("3".parse::<TimeWindow>().is_err());
    }

    proptest! {
        #[test]
        fn filters_are_linear(
            x in prop::collection::vec(-5.0f64..5.0, 700),
            y in prop::collection::vec(-5.0f64..5.0, 700),
            a in -3.0f64..3.0, b in -3.0f64..3.0
        ) {
            let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let fx = filter_eeg(&x, 256.0, &EegFilter::default()).unwrap();
            let fy = filter_eeg(&y, 256.0, &EegFilter::default()).unwrap();
            let fm = filter_eeg(&mix, 256.0, &EegFilter::default()).unwrap();
            for i in 0..x.len() {
                prop_assert!((fm[i] - a * fx[i] - b * fy[i]).abs() < 1e-9);
            }
            let ex = filter_eda(&x, 32.0, &EdaFilter::default()).unwrap();
            let ey = filter_eda(&y, 32.0, &EdaFilter::default()).unwrap();
            let em = filter_eda(&mix, 32.0, &EdaFilter::default()).unwrap();
            for i in 0..x.len() {
                prop_assert!((em[i] - a * ex[i] - b * ey[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn minmax_is_affine_invariant(
            v in prop::collection::vec(-100.0f64..100.0, 2..20),
            scale in 0.1f64..10.0, shift in -50.0f64..50.0
        ) {
            prop_assume!(v.iter().any(|x| *x != v[0]));
            let n = minmax_normalize(&v).unwrap();
            prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(n.contains(&0.0) && n.contains(&1.0));
            let moved: Vec<f64> = v.iter().map(|x| scale * x + shift).collect();
            let m = minmax_normalize(&moved).unwrap();
            for (p, q) in n.iter().zip(&m) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
