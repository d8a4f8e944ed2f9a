//! The 3×3 bidirectional switch matrix: duty-cycle matrices, admissible
//! switch states, intra-period sequencing and the ideal-switch mapping of
//! voltages and currents.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waveforms::ThreePhase;

/// Tolerance on duty-cell range and column sums.
pub const DUTY_TOL: f64 = 1e-9;

/// Segments shorter than this fraction of the period are dropped.
const MIN_SEGMENT_REL: f64 = 1e-12;

const INPUT_NAMES: [char; 3] = ['A', 'B', 'C'];
const OUTPUT_NAMES: [char; 3] = ['a', 'b', 'c'];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("invalid duty matrix: {0}")]
    InvalidDuty(DutyViolation),
    #[error("malformed switch state: output column {column} has {on} switches on")]
    MalformedState { column: usize, on: usize },
}

/// Duty ratios `m[k][j]`: fraction of the period that input `k` (A, B, C)
/// is connected to output `j` (a, b, c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyMatrix {
    pub m: [[f64; 3]; 3],
    pub t_seq: f64,
}

impl DutyMatrix {
    pub fn new(m: [[f64; 3]; 3], t_seq: f64) -> Self {
        Self { m, t_seq }
    }

    pub fn uniform(t_seq: f64) -> Self {
        Self::new([[1.0 / 3.0; 3]; 3], t_seq)
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.m[0][j] + self.m[1][j] + self.m[2][j]
    }

    pub fn min_cell(&self) -> f64 {
        self.m.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_cell(&self) -> f64 {
        self.m.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Period-average output voltages `Σ_k m_kj · v_k`.
    pub fn average_output(&self, v_in: ThreePhase) -> ThreePhase {
        let v = v_in.to_array();
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|k| self.m[k][j] * v[k]).sum();
        }
        ThreePhase::from_array(out)
    }

    /// Clips every cell into [0, 1] and renormalizes each column to sum to 1.
    pub fn clipped(&self) -> DutyMatrix {
        let mut m = self.m;
        for j in 0..3 {
            let mut sum = 0.0;
            for row in m.iter_mut() {
                row[j] = row[j].clamp(0.0, 1.0);
                sum += row[j];
            }
            for row in m.iter_mut() {
                row[j] = if sum > 0.0 { row[j] / sum } else { 1.0 / 3.0 };
            }
        }
        DutyMatrix { m, t_seq: self.t_seq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellViolation {
    pub input: usize,
    pub output: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnViolation {
    pub output: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DutyViolation {
    pub cells: Vec<CellViolation>,
    pub columns: Vec<ColumnViolation>,
}

impl DutyViolation {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.columns.is_empty()
    }
}

impl fmt::Display for DutyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for c in &self.cells {
            parts.push(format!(
                "m_{}{} = {:.6} outside [0, 1]",
                INPUT_NAMES[c.input], OUTPUT_NAMES[c.output], c.value
            ));
        }
        for c in &self.columns {
            parts.push(format!("column {} sums to {:.9}", OUTPUT_NAMES[c.output], c.sum));
        }
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_duty(d: &DutyMatrix) -> Result<(), DutyViolation> {
    let mut v = DutyViolation::default();
    for k in 0..3 {
        for j in 0..3 {
            let value = d.m[k][j];
            if !(-DUTY_TOL..=1.0 + DUTY_TOL).contains(&value) {
                v.cells.push(CellViolation {
                    input: k,
                    output: j,
                    value,
                });
            }
        }
    }
    for j in 0..3 {
        let sum = d.column_sum(j);
        // NaN sums count as violations
        if !(-DUTY_TOL..=DUTY_TOL).contains(&(sum - 1.0)) {
            v.columns.push(ColumnViolation { output: j, sum });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// One admissible configuration: for each output column, the input it is
/// connected to. Exactly one switch per column is on by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchState {
    pub source: [u8; 3],
}

impl SwitchState {
    pub fn new(source: [u8; 3]) -> Result<Self, SwitchError> {
        for (column, &k) in source.iter().enumerate() {
            if k > 2 {
                return Err(SwitchError::MalformedState { column, on: 0 });
            }
        }
        Ok(Self { source })
    }

    /// Builds a state from a 3×3 on/off grid `s[k][j]`.
    pub fn from_flags(s: [[bool; 3]; 3]) -> Result<Self, SwitchError> {
        let mut source = [0u8; 3];
        for (j, src) in source.iter_mut().enumerate() {
            let on: Vec<usize> = (0..3).filter(|&k| s[k][j]).collect();
            if on.len() != 1 {
                return Err(SwitchError::MalformedState {
                    column: j,
                    on: on.len(),
                });
            }
            *src = on[0] as u8;
        }
        Ok(Self { source })
    }

    pub fn flags(&self) -> [[bool; 3]; 3] {
        let mut s = [[false; 3]; 3];
        for (j, &k) in self.source.iter().enumerate() {
            s[k as usize][j] = true;
        }
        s
    }

    pub fn is_on(&self, input: usize, output: usize) -> bool {
        self.source[output] as usize == input
    }

    /// All 27 admissible states.
    pub fn all() -> impl Iterator<Item = SwitchState> {
        (0..27u8).map(|n| SwitchState {
            source: [n % 3, (n / 3) % 3, n / 9],
        })
    }

    /// Number of output columns whose connection differs from `other`.
    pub fn commutations_to(&self, other: &SwitchState) -> usize {
        (0..3).filter(|&j| self.source[j] != other.source[j]).count()
    }
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, &k) in self.source.iter().enumerate() {
            if j > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}→{}", INPUT_NAMES[k as usize], OUTPUT_NAMES[j])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub state: SwitchState,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchTimeline {
    pub segments: Vec<Segment>,
    pub t_seq: f64,
}

impl SwitchTimeline {
    /// Accumulated on-time of input `k` on output `j`.
    pub fn dwell(&self) -> [[f64; 3]; 3] {
        let mut d = [[0.0; 3]; 3];
        for seg in &self.segments {
            for (j, &k) in seg.state.source.iter().enumerate() {
                d[k as usize][j] += seg.duration;
            }
        }
        d
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Switch transitions inside the period.
    pub fn internal_commutations(&self) -> usize {
        self.segments
            .windows(2)
            .map(|w| w[0].state.commutations_to(&w[1].state))
            .sum()
    }

    pub fn first_state(&self) -> Option<SwitchState> {
        self.segments.first().map(|s| s.state)
    }

    pub fn last_state(&self) -> Option<SwitchState> {
        self.segments.last().map(|s| s.state)
    }
}

/// Intra-period ordering of the input connections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequencing {
    /// A→B→C in every column, every period.
    #[default]
    Single,
    /// A→B→C over the first half period, C→B→A over the second.
    Symmetric,
}

pub fn sequence(d: &DutyMatrix) -> Result<SwitchTimeline, SwitchError> {
    sequence_with(d, Sequencing::Single)
}

pub fn sequence_with(d: &DutyMatrix, order: Sequencing) -> Result<SwitchTimeline, SwitchError> {
    validate_duty(d).map_err(SwitchError::InvalidDuty)?;
    let segments = match order {
        Sequencing::Single => sawtooth_segments(d, d.t_seq, false),
        Sequencing::Symmetric => {
            let half = 0.5 * d.t_seq;
            let mut segs = sawtooth_segments(d, half, false);
            segs.extend(sawtooth_segments(d, half, true));
            merge_adjacent(segs)
        }
    };
    Ok(SwitchTimeline {
        segments,
        t_seq: d.t_seq,
    })
}

/// Lays every column out as consecutive A, B, C intervals (or C, B, A when
/// `reversed`) over `span` and cuts the period at the union of the
/// interval edges.
fn sawtooth_segments(d: &DutyMatrix, span: f64, reversed: bool) -> Vec<Segment> {
    let order: [usize; 3] = if reversed { [2, 1, 0] } else { [0, 1, 2] };
    // edges[j] = [0, e1, e2, span]
    let mut edges = [[0.0f64; 4]; 3];
    let mut cuts = Vec::with_capacity(8);
    for j in 0..3 {
        let m0 = d.m[order[0]][j].max(0.0);
        let m1 = d.m[order[1]][j].max(0.0);
        let e1 = (m0 * span).min(span);
        let e2 = ((m0 + m1) * span).min(span);
        edges[j] = [0.0, e1, e2, span];
        cuts.push(e1);
        cuts.push(e2);
    }
    cuts.push(0.0);
    cuts.push(span);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let min_len = MIN_SEGMENT_REL * d.t_seq;
    let mut segments = Vec::with_capacity(7);
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= min_len {
            continue;
        }
        let mid = 0.5 * (t0 + t1);
        let mut source = [0u8; 3];
        for j in 0..3 {
            let slot = (0..3).find(|&s| mid < edges[j][s + 1]).unwrap_or(2);
            source[j] = order[slot] as u8;
        }
        segments.push(Segment {
            state: SwitchState { source },
            duration: t1 - t0,
        });
    }
    segments
}

fn merge_adjacent(segs: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
    for s in segs {
        match out.last_mut() {
            Some(last) if last.state == s.state => last.duration += s.duration,
            _ => out.push(s),
        }
    }
    out
}

/// Output phase `j` carries the voltage of the input it is connected to.
pub fn apply_state(s: &SwitchState, v_in: ThreePhase) -> ThreePhase {
    let v = v_in.to_array();
    ThreePhase::new(
        v[s.source[0] as usize],
        v[s.source[1] as usize],
        v[s.source[2] as usize],
    )
}

/// Input current of phase `k`: the sum of output currents routed to it.
pub fn input_current(s: &SwitchState, i_out: ThreePhase) -> ThreePhase {
    let i = i_out.to_array();
    let mut out = [0.0; 3];
    for (j, &k) in s.source.iter().enumerate() {
        out[k as usize] += i[j];
    }
    ThreePhase::from_array(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: f64 = 62.5e-6;

    #[test]
    fn uniform_matrix_is_valid() {
        assert!(validate_duty(&DutyMatrix::uniform(T)).is_ok());
    }

    #[test]
    fn short_column_is_named() {
        let mut d = DutyMatrix::uniform(T);
        d.m[2][1] -= 0.1;
        let v = validate_duty(&d).unwrap_err();
        assert!(v.cells.is_empty());
        assert_eq!(v.columns.len(), 1);
        assert_eq!(v.columns[0].output, 1);
        assert!((v.columns[0].sum - 0.9).abs() < 1e-12);
        assert!(v.to_string().contains("column b"));
    }

    #[test]
    fn out_of_range_cell_is_reported() {
        let mut d = DutyMatrix::uniform(T);
        d.m[0][0] = 1.08;
        d.m[1][0] = -0.04;
        d.m[2][0] = -0.04;
        let v = validate_duty(&d).unwrap_err();
        assert_eq!(v.cells.len(), 3);
        assert!(v.columns.is_empty());
        assert!(v.to_string().contains("m_Aa = 1.080000"));
        assert!(matches!(sequence(&d), Err(SwitchError::InvalidDuty(_))));
    }

    #[test]
    fn exactly_27_states() {
        let all: std::collections::HashSet<_> = SwitchState::all().collect();
        assert_eq!(all.len(), 27);
        for s in all {
            let flags = s.flags();
            for j in 0..3 {
                assert_eq!((0..3).filter(|&k| flags[k][j]).count(), 1);
            }
            assert_eq!(SwitchState::from_flags(flags).unwrap(), s);
        }
    }

    #[test]
    fn malformed_flags_rejected() {
        let mut f = [[false; 3]; 3];
        f[0][0] = true;
        f[1][0] = true;
        f[2][1] = true;
        f[2][2] = true;
        assert_eq!(
            SwitchState::from_flags(f),
            Err(SwitchError::MalformedState { column: 0, on: 2 })
        );
        assert!(SwitchState::new([0, 3, 1]).is_err());
    }

    #[test]
    fn uniform_sequence_dwells() {
        let tl = sequence(&DutyMatrix::uniform(T)).unwrap();
        assert_eq!(tl.segments.len(), 3);
        for seg in &tl.segments {
            assert!((seg.duration - T / 3.0).abs() < 1e-18);
        }
        assert_eq!(tl.internal_commutations(), 6);
    }

    #[test]
    fn full_connection_is_one_segment_per_column() {
        let mut m = [[1.0 / 3.0; 3]; 3];
        m[0][0] = 1.0;
        m[1][0] = 0.0;
        m[2][0] = 0.0;
        let tl = sequence(&DutyMatrix::new(m, T)).unwrap();
        for seg in &tl.segments {
            assert_eq!(seg.state.source[0], 0);
        }
        assert!((tl.total_duration() - T).abs() < 1e-18);
    }

    #[test]
    fn symmetric_sequence_reproduces_dwell() {
        let m = [[0.2, 0.5, 0.0], [0.3, 0.25, 0.6], [0.5, 0.25, 0.4]];
        let d = DutyMatrix::new(m, T);
        let tl = sequence_with(&d, Sequencing::Symmetric).unwrap();
        let dw = tl.dwell();
        for k in 0..3 {
            for j in 0..3 {
                assert!((dw[k][j] - m[k][j] * T).abs() < 1e-12 * T);
            }
        }
        assert_eq!(tl.first_state(), tl.last_state());
    }

    #[test]
    fn mapping_cases() {
        let v = ThreePhase::new(1.0, 0.0, -1.0);
        let id = SwitchState::new([0, 1, 2]).unwrap();
        assert_eq!(apply_state(&id, v), v);
        assert_eq!(
            input_current(&id, ThreePhase::new(1.0, 2.0, -3.0)),
            ThreePhase::new(1.0, 2.0, -3.0)
        );
        let all_a = SwitchState::new([0, 0, 0]).unwrap();
        assert_eq!(apply_state(&all_a, v), ThreePhase::splat(1.0));
        assert_eq!(input_current(&all_a, ThreePhase::new(1.0, 2.0, -3.0)), ThreePhase::ZERO);
        // A→b, B→c, C→a
        let cyc = SwitchState::new([2, 0, 1]).unwrap();
        assert_eq!(apply_state(&cyc, v), ThreePhase::new(-1.0, 1.0, 0.0));
    }

    #[test]
    fn clipped_is_valid() {
        let m = [[1.08, 0.2, 0.3], [-0.04, 0.5, 0.3], [-0.04, 0.3, 0.4]];
        let c = DutyMatrix::new(m, T).clipped();
        assert!(validate_duty(&c).is_ok());
        assert_eq!(c.m[0][0], 1.0);
    }
}
