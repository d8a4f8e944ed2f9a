use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqfuzzy::abc_to_dq0;
use crate::waveforms::{to_csv, PQSetting, ThreePhase, TimeGrid};

/// Cell-averaged waveforms over the whole run. Sample `k` covers
/// `[k·dt, (k+1)·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveforms {
    pub dt: f64,
    pub in_v: Vec<ThreePhase>,
    pub in_i: Vec<ThreePhase>,
    pub out_v: Vec<ThreePhase>,
    pub out_i: Vec<ThreePhase>,
}

impl Waveforms {
    pub fn len(&self) -> usize {
        self.out_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_v.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.dt, self.len().max(1)).expect("recording grid is valid")
    }

    /// `(file name, CSV text)` for the four recorded quantities.
    pub fn csv_files(&self) -> [(&'static str, String); 4] {
        let grid = self.grid();
        [
            ("waveforms_in_v.csv", to_csv(&self.in_v, &grid)),
            ("waveforms_in_i.csv", to_csv(&self.in_i, &grid)),
            ("waveforms_out_v.csv", to_csv(&self.out_v, &grid)),
            ("waveforms_out_i.csv", to_csv(&self.out_i, &grid)),
        ]
    }
}

/// Harmonic (integer multiples up to `n_max`) and wideband (every
/// non-fundamental component) distortion. `None` when the record has no
/// measurable fundamental.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThdPair {
    pub voltage: Option<f64>,
    pub current: Option<f64>,
    pub voltage_wideband: Option<f64>,
    pub current_wideband: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyAccount {
    /// Energy delivered by the source (or into the converter without a filter), J.
    pub input_j: f64,
    /// Energy into the load terminals, J.
    pub output_j: f64,
    /// Resistive loss inside the load, J (R and RL loads).
    pub load_dissipated_j: Option<f64>,
    /// Change of magnetic energy held by the load, J (R and RL loads).
    pub load_stored_delta_j: Option<f64>,
    /// `(input − output) / |input|`.
    pub converter_balance_rel: f64,
    /// `(output − dissipated − Δstored) / |output|`.
    pub load_balance_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub load: String,
    pub q_target: f64,
    pub f_i_hz: f64,
    pub f_o_hz: f64,
    pub f_sw_hz: f64,
    pub v_im: f64,
    pub duration_s: f64,
    pub analysis_start_s: f64,
    pub sample_dt_s: f64,
    pub thd_in: ThdPair,
    pub thd_out: ThdPair,
    pub pq_in: PQSetting,
    pub pq_out: PQSetting,
    /// Output fundamental phase-voltage amplitude over the nominal input peak.
    pub transfer_ratio_measured: f64,
    /// Largest line of the output current spectrum, Hz.
    pub dominant_out_hz: Option<f64>,
    pub spectral_bin_hz: f64,
    pub commutations_per_period: f64,
    pub max_commutations_per_period: usize,
    pub overmodulated_periods: usize,
    pub energy: EnergyAccount,
    pub p_in_mean_w: f64,
    pub p_out_mean_w: f64,
    pub final_speed_rad_s: Option<f64>,
    pub controlled: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub summary: Summary,
    pub waveforms: Waveforms,
    /// Output angle used for the analysis (`ω_o t + φ_o`) per sample.
    pub(crate) omega_o: f64,
    pub(crate) phi_o: f64,
}

impl SimResult {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Writes the four waveform CSVs and `summary.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.waveforms.csv_files() {
            std::fs::write(dir.join(name), text)?;
        }
        let mut json = self.summary_json();
        json.push('\n');
        std::fs::write(dir.join("summary.json"), json)
    }

    /// Output-voltage fundamental magnitude over consecutive windows of
    /// `window_s`: the magnitude of the mean dq vector of the phase voltages
    /// in each window, as `(window end time, |v|)`. Averaging in the
    /// rotating frame makes any window length usable, including a fraction
    /// of an output period.
    pub fn output_envelope(&self, window_s: f64) -> Vec<(f64, f64)> {
        let w = &self.waveforms;
        let per_window = (window_s / w.dt).max(1.0);
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut p = 1usize;
        loop {
            let end = (p as f64 * per_window).round() as usize;
            if end > w.len() || end <= start {
                break;
            }
            let (mut d, mut q) = (0.0, 0.0);
            for k in start..end {
                let t = (k as f64 + 0.5) * w.dt;
                let v = abc_to_dq0(w.out_v[k], self.omega_o * t + self.phi_o);
                d += v.v_d;
                q += v.v_q;
            }
            let n = (end - start) as f64;
            out.push((end as f64 * w.dt, (d / n).hypot(q / n)));
            start = end;
            p += 1;
        }
        out
    }

    /// Start of the first envelope window after which every window stays
    /// within `tol` (relative) of `reference`.
    pub fn settling_time(&self, reference: f64, tol: f64, window_s: f64) -> Option<f64> {
        let env = self.output_envelope(window_s);
        let mut settled = None;
        let mut prev_end = 0.0;
        for &(t, a) in &env {
            if ((a - reference) / reference).abs() > tol {
                settled = None;
            } else if settled.is_none() {
                settled = Some(prev_end);
            }
            prev_end = t;
        }
        settled
    }

    /// One-line human summary.
    pub fn brief(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let _ = write!(
            out,
            "{} / {} load: q_meas={:.4} (target {:.4}), THD out v={} i={}, in i={}, commutations/period={:.2}",
            s.method,
            s.load,
            s.transfer_ratio_measured,
            s.q_target,
            pct(s.thd_out.voltage_wideband),
            pct(s.thd_out.current_wideband),
            pct(s.thd_in.current_wideband),
            s.commutations_per_period
        );
        out
    }
}
