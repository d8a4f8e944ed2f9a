//! Uniformly sampled signals, three-phase generation and power-quality
//! analytics (harmonic spectrum, RMS, THD, active/reactive power).

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dqfuzzy::abc_to_dq0;

/// Default highest harmonic order used for THD.
pub const DEFAULT_HARMONICS: usize = 50;

/// Fundamental magnitudes at or below this fraction of the signal's total
/// spectral content are treated as absent.
const NO_FUNDAMENTAL_REL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid time grid: dt={dt}, n_steps={n_steps}")]
    InvalidGrid { dt: f64, n_steps: usize },
    #[error("empty series")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("only {per_period:.2} samples per fundamental period (need at least 4)")]
    InsufficientSamples { per_period: f64 },
    #[error("series covers less than one fundamental period")]
    ShortWindow,
    #[error("harmonic {n_max} at {freq:.1} Hz is not below Nyquist ({nyquist:.1} Hz)")]
    AboveNyquist { n_max: usize, freq: f64, nyquist: f64 },
    #[error("no fundamental component: THD is undefined")]
    NoFundamental,
}

/// A uniform sampling grid: `n_steps` samples spaced `dt` seconds apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self, WaveformError> {
        if !(dt.is_finite() && dt > 0.0) || n_steps == 0 {
            return Err(WaveformError::InvalidGrid { dt, n_steps });
        }
        Ok(Self { dt, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_steps).map(move |k| self.time(k))
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Instantaneous values of phases a, b, c (or A, B, C on the input side).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreePhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhase {
    pub const ZERO: ThreePhase = ThreePhase { a: 0.0, b: 0.0, c: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub const fn splat(v: f64) -> Self {
        Self { a: v, b: v, c: v }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn get(&self, phase: usize) -> f64 {
        match phase {
            0 => self.a,
            1 => self.b,
            2 => self.c,
            _ => panic!("phase index {phase} out of range"),
        }
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn mean(&self) -> f64 {
        self.sum() / 3.0
    }

    pub fn dot(&self, other: &ThreePhase) -> f64 {
        self.a * other.a + self.b * other.b + self.c * other.c
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    /// Removes the zero-sequence component, i.e. the voltage seen across a
    /// balanced star-connected load with an isolated neutral.
    pub fn without_common_mode(&self) -> Self {
        let m = self.mean();
        Self::new(self.a - m, self.b - m, self.c - m)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.a), f(self.b), f(self.c))
    }
}

impl Add for ThreePhase {
    type Output = ThreePhase;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.a + rhs.a, self.b + rhs.b, self.c + rhs.c)
    }
}

impl Sub for ThreePhase {
    type Output = ThreePhase;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c)
    }
}

impl Mul<f64> for ThreePhase {
    type Output = ThreePhase;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.a * rhs, self.b * rhs, self.c * rhs)
    }
}

/// Harmonic magnitudes of a periodic signal. `magnitudes[0]` is the absolute
/// DC level, `magnitudes[n]` the peak amplitude of harmonic `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub fundamental_hz: f64,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    pub fn n_max(&self) -> usize {
        self.magnitudes.len().saturating_sub(1)
    }

    pub fn fundamental(&self) -> f64 {
        self.magnitudes.get(1).copied().unwrap_or(0.0)
    }

    pub fn dc(&self) -> f64 {
        self.magnitudes[0]
    }

    pub fn harmonic(&self, n: usize) -> f64 {
        self.magnitudes.get(n).copied().unwrap_or(0.0)
    }
}

/// Active and reactive power of a three-phase port.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PQSetting {
    pub p_active: f64,
    pub q_reactive: f64,
}

/// Positive-sequence three-phase cosine set; phase b lags a by 2π/3, c by 4π/3.
pub fn gen_three_phase(
    amplitude: f64,
    freq: f64,
    phase: f64,
    grid: &TimeGrid,
) -> Result<Vec<ThreePhase>, WaveformError> {
    if !amplitude.is_finite() || !freq.is_finite() || !phase.is_finite() {
        return Err(WaveformError::NonFinite("gen_three_phase parameters"));
    }
    let omega = TAU * freq;
    Ok(grid
        .times()
        .map(|t| three_phase_at(amplitude, omega * t + phase))
        .collect())
}

/// Balanced set at electrical angle `theta` (phase a = amplitude·cos θ).
#[inline]
pub fn three_phase_at(amplitude: f64, theta: f64) -> ThreePhase {
    ThreePhase::new(
        amplitude * theta.cos(),
        amplitude * (theta - TAU / 3.0).cos(),
        amplitude * (theta - 2.0 * TAU / 3.0).cos(),
    )
}

pub fn rms(series: &[f64], grid: &TimeGrid) -> Result<f64, WaveformError> {
    if series.is_empty() {
        return Err(WaveformError::Empty);
    }
    check_len(series.len(), grid.n_steps())?;
    let ms = series.iter().map(|x| x * x).sum::<f64>() / series.len() as f64;
    Ok(ms.sqrt())
}

fn check_len(left: usize, right: usize) -> Result<(), WaveformError> {
    if left != right {
        return Err(WaveformError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Length (in samples) and period count of the longest prefix that spans a
/// whole number of fundamental periods. Prefers an exact fit; falls back to
/// the nearest sample count when the period is not commensurate with `dt`.
fn whole_period_window(len: usize, f1: f64, dt: f64) -> Result<(usize, usize), WaveformError> {
    let samples_per_period = 1.0 / (f1 * dt);
    if samples_per_period < 4.0 {
        return Err(WaveformError::InsufficientSamples {
            per_period: samples_per_period,
        });
    }
    let p_max = (len as f64 / samples_per_period + 1e-9).floor() as usize;
    if p_max == 0 {
        return Err(WaveformError::ShortWindow);
    }
    let exact = (p_max.div_ceil(2)..=p_max).rev().find(|&p| {
        let m = p as f64 * samples_per_period;
        (m - m.round()).abs() < 1e-6
    });
    let periods = exact.unwrap_or(p_max);
    let samples = ((periods as f64 * samples_per_period).round() as usize).min(len);
    Ok((samples, periods))
}

/// Harmonic magnitudes by projection onto exact harmonic bins over the longest
/// whole-period prefix of `series`.
pub fn spectrum(series: &[f64], fundamental_hz: f64, grid: &TimeGrid, n_max: usize) -> Result<Spectrum, WaveformError> {
    if series.is_empty() {
        return Err(WaveformError::Empty);
    }
    check_len(series.len(), grid.n_steps())?;
    if !(fundamental_hz.is_finite() && fundamental_hz > 0.0) {
        return Err(WaveformError::NonFinite("fundamental_hz"));
    }
    let nyquist = 0.5 * grid.sample_rate();
    if n_max as f64 * fundamental_hz >= nyquist {
        return Err(WaveformError::AboveNyquist {
            n_max,
            freq: n_max as f64 * fundamental_hz,
            nyquist,
        });
    }
    let (m, periods) = whole_period_window(series.len(), fundamental_hz, grid.dt())?;
    let bins = fft(&series[..m]);
    let scale = 2.0 / m as f64;
    let mut magnitudes = Vec::with_capacity(n_max + 1);
    magnitudes.push(bins[0].re.abs() / m as f64);
    for n in 1..=n_max {
        magnitudes.push(bins[n * periods].norm() * scale);
    }
    Ok(Spectrum {
        fundamental_hz,
        magnitudes,
    })
}

fn fft(series: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Total harmonic distortion over harmonics 2..=n_max of `spec`.
pub fn thd(spec: &Spectrum) -> Result<f64, WaveformError> {
    let v1 = spec.fundamental();
    let total = spec.magnitudes.iter().map(|m| m * m).sum::<f64>().sqrt();
    if v1 <= NO_FUNDAMENTAL_REL * total || v1 == 0.0 {
        return Err(WaveformError::NoFundamental);
    }
    let harmonics = spec.magnitudes.iter().skip(2).map(|m| m * m).sum::<f64>();
    Ok(harmonics.sqrt() / v1)
}

/// Distortion including every non-fundamental component of the whole-period
/// window (interharmonics and switching sidebands as well as integer
/// harmonics), obtained from the AC RMS by Parseval. Equals [`thd`] in the
/// limit `n_max → ∞` when the signal holds only integer harmonics.
pub fn thd_wideband(series: &[f64], fundamental_hz: f64, grid: &TimeGrid) -> Result<f64, WaveformError> {
    let spec = spectrum(series, fundamental_hz, grid, 1)?;
    let (m, _) = whole_period_window(series.len(), fundamental_hz, grid.dt())?;
    let window = &series[..m];
    let mean = window.iter().sum::<f64>() / m as f64;
    let ac_ms = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
    let v1 = spec.fundamental();
    let scale = ac_ms.sqrt() * std::f64::consts::SQRT_2;
    if v1 <= NO_FUNDAMENTAL_REL * scale || v1 == 0.0 {
        return Err(WaveformError::NoFundamental);
    }
    Ok((2.0 * ac_ms - v1 * v1).max(0.0).sqrt() / v1)
}

/// Frequency of the largest non-DC line of the full-window DFT, and the bin
/// width in hertz.
pub fn dominant_frequency(series: &[f64], grid: &TimeGrid) -> Result<(f64, f64), WaveformError> {
    if series.len() < 4 {
        return Err(WaveformError::Empty);
    }
    check_len(series.len(), grid.n_steps())?;
    let bins = fft(series);
    let half = series.len() / 2;
    let (k, _) = bins[1..=half].iter().enumerate().fold((0, f64::MIN), |best, (i, z)| {
        let m = z.norm_sqr();
        if m > best.1 {
            (i + 1, m)
        } else {
            best
        }
    });
    let bin_hz = 1.0 / grid.duration();
    Ok((k as f64 * bin_hz, bin_hz))
}

/// Mean active power and mean dq-frame reactive power `(3/2)(v_q i_d − v_d i_q)`
/// with the dq transform evaluated at the supplied rotation angles.
pub fn pq(
    voltages: &[ThreePhase],
    currents: &[ThreePhase],
    wt_series: &[f64],
    grid: &TimeGrid,
) -> Result<PQSetting, WaveformError> {
    check_len(voltages.len(), currents.len())?;
    check_len(voltages.len(), wt_series.len())?;
    check_len(voltages.len(), grid.n_steps())?;
    let n = voltages.len() as f64;
    let (mut p, mut q) = (0.0, 0.0);
    for ((v, i), &wt) in voltages.iter().zip(currents).zip(wt_series) {
        p += v.dot(i);
        let vdq = abc_to_dq0(*v, wt);
        let idq = abc_to_dq0(*i, wt);
        q += 1.5 * (vdq.v_q * idq.v_d - vdq.v_d * idq.v_q);
    }
    Ok(PQSetting {
        p_active: p / n,
        q_reactive: q / n,
    })
}

/// Splits a three-phase sequence into per-phase series.
pub fn phases(series: &[ThreePhase]) -> [Vec<f64>; 3] {
    [
        series.iter().map(|s| s.a).collect(),
        series.iter().map(|s| s.b).collect(),
        series.iter().map(|s| s.c).collect(),
    ]
}

/// Renders `t,a,b,c` CSV with shortest round-trip decimal formatting.
pub fn to_csv(series: &[ThreePhase], grid: &TimeGrid) -> String {
    let mut out = String::with_capacity(series.len() * 64 + 8);
    out.push_str("t,a,b,c\n");
    for (k, s) in series.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", grid.time(k), s.a, s.b, s.c);
    }
    out
}

/// Peak of a balanced set given its line-to-line RMS value.
pub fn phase_peak_from_line_rms(v_ll_rms: f64) -> f64 {
    v_ll_rms * std::f64::consts::SQRT_2 / 3f64.sqrt()
}

/// Angle wrapped into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_for(f1: f64, per_period: usize, periods: usize) -> TimeGrid {
        TimeGrid::new(1.0 / (f1 * per_period as f64), per_period * periods).unwrap()
    }

    fn square(grid: &TimeGrid, f1: f64) -> Vec<f64> {
        // Sample at cell centres so the wave is symmetric with no samples on edges.
        grid.times()
            .map(|t| {
                let x = ((t + 0.5 * grid.dt()) * f1).fract();
                if x < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    #[test]
    fn grid_rejects_bad_params() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1e-3, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 3).is_err());
        let g = TimeGrid::new(0.5, 4).unwrap();
        assert_eq!(g.duration(), 2.0);
    }

    #[test]
    fn three_phase_at_zero() {
        let g = TimeGrid::new(1e-4, 1).unwrap();
        let s = gen_three_phase(1.0, 60.0, 0.0, &g).unwrap();
        assert!((s[0].a - 1.0).abs() < 1e-15);
        assert!((s[0].b + 0.5).abs() < 1e-15);
        assert!((s[0].c + 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_phase_balanced_and_peak() {
        let amp = phase_peak_from_line_rms(440.0);
        assert!((amp - 359.26).abs() < 0.01, "{amp}");
        let g = TimeGrid::new(1.3e-5, 5000).unwrap();
        for s in gen_three_phase(amp, 60.0, 0.3, &g).unwrap() {
            assert!(s.sum().abs() < 1e-12 * amp);
        }
        assert!(gen_three_phase(f64::INFINITY, 60.0, 0.0, &g).is_err());
    }

    #[test]
    fn rms_cases() {
        let g = grid_for(50.0, 200, 3);
        let sine: Vec<f64> = g.times().map(|t| 3.0 * (TAU * 50.0 * t).sin()).collect();
        let r = rms(&sine, &g).unwrap();
        assert!((r / (3.0 / 2f64.sqrt()) - 1.0).abs() < 1e-6);
        let c = vec![-2.5; g.n_steps()];
        assert!((rms(&c, &g).unwrap() - 2.5).abs() < 1e-12);
        let sq = square(&g, 50.0);
        assert!((rms(&sq, &g).unwrap() - 1.0).abs() < 1e-12);
        let empty = TimeGrid::new(1.0, 1).unwrap();
        assert_eq!(rms(&[], &empty), Err(WaveformError::Empty));
    }

    #[test]
    fn spectrum_of_pure_sine() {
        let g = grid_for(60.0, 128, 4);
        let s: Vec<f64> = g.times().map(|t| 2.0 * (TAU * 60.0 * t + 0.4).cos()).collect();
        let spec = spectrum(&s, 60.0, &g, 20).unwrap();
        assert!((spec.fundamental() - 2.0).abs() < 1e-9);
        for n in 2..=20 {
            assert!(spec.harmonic(n) < 1e-9);
        }
        assert!(thd(&spec).unwrap() < 1e-10);
    }

    #[test]
    fn spectrum_of_two_tone() {
        let g = grid_for(50.0, 256, 2);
        let s: Vec<f64> = g
            .times()
            .map(|t| (TAU * 50.0 * t).sin() + 0.2 * (TAU * 150.0 * t).sin())
            .collect();
        let spec = spectrum(&s, 50.0, &g, 10).unwrap();
        assert!((spec.harmonic(3) - 0.2).abs() < 1e-6);
    }

    #[test]
    fn spectrum_rejects_coarse_and_short() {
        let g = TimeGrid::new(1.0 / 180.0, 30).unwrap();
        let s = vec![0.0; 30];
        assert!(matches!(
            spectrum(&s, 60.0, &g, 1),
            Err(WaveformError::InsufficientSamples { .. })
        ));
        let g = grid_for(60.0, 100, 1);
        let s = vec![0.0; 50];
        let g_short = TimeGrid::new(g.dt(), 50).unwrap();
        assert_eq!(spectrum(&s, 60.0, &g_short, 2), Err(WaveformError::ShortWindow));
        let g = grid_for(60.0, 10, 3);
        let s = vec![0.0; 30];
        assert!(matches!(
            spectrum(&s, 60.0, &g, 5),
            Err(WaveformError::AboveNyquist { .. })
        ));
    }

    #[test]
    fn thd_definition_and_errors() {
        let mut mags = vec![0.0; 8];
        mags[1] = 1.0;
        mags[5] = 0.1;
        let spec = Spectrum {
            fundamental_hz: 50.0,
            magnitudes: mags,
        };
        assert!((thd(&spec).unwrap() - 0.1).abs() < 1e-15);
        let zero = Spectrum {
            fundamental_hz: 50.0,
            magnitudes: vec![0.0; 5],
        };
        assert_eq!(thd(&zero), Err(WaveformError::NoFundamental));
    }

    #[test]
    fn pq_zero_current() {
        let g = grid_for(60.0, 64, 2);
        let v = gen_three_phase(10.0, 60.0, 0.0, &g).unwrap();
        let i = vec![ThreePhase::ZERO; v.len()];
        let wt: Vec<f64> = g.times().map(|t| TAU * 60.0 * t).collect();
        let r = pq(&v, &i, &wt, &g).unwrap();
        assert_eq!(r, PQSetting::default());
        assert!(pq(&v, &i[1..], &wt, &g).is_err());
    }

    #[test]
    fn wideband_thd_sees_interharmonics() {
        let g = grid_for(30.0, 1000, 3);
        let s: Vec<f64> = g
            .times()
            .map(|t| (TAU * 30.0 * t).cos() + 0.5 * (TAU * 1010.0 * t).cos())
            .collect();
        let spec = spectrum(&s, 30.0, &g, 50).unwrap();
        assert!(thd(&spec).unwrap() < 1e-9);
        let wb = thd_wideband(&s, 30.0, &g).unwrap();
        assert!((wb - 0.5).abs() < 1e-9, "{wb}");
    }

    #[test]
    fn dominant_line() {
        let g = TimeGrid::new(1e-4, 5000).unwrap();
        let s: Vec<f64> = g
            .times()
            .map(|t| 0.3 + (TAU * 30.0 * t).cos() + 0.4 * (TAU * 90.0 * t).cos())
            .collect();
        let (f, bin) = dominant_frequency(&s, &g).unwrap();
        assert!((f - 30.0).abs() <= bin);
    }

    #[test]
    fn csv_header_and_rows() {
        let g = TimeGrid::new(0.5, 2).unwrap();
        let csv = to_csv(&[ThreePhase::new(1.0, 2.0, 3.0), ThreePhase::splat(0.1)], &g);
        assert_eq!(csv, "t,a,b,c\n0,1,2,3\n0.5,0.1,0.1,0.1\n");
    }
}
