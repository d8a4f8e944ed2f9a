use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::waveforms::ThreePhase;

const THIRD: f64 = TAU / 3.0;

/// Direct, quadrature and zero-sequence components in a frame rotating at
/// angle `wt`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Dq0 {
    pub v_d: f64,
    pub v_q: f64,
    pub v_0: f64,
}

impl Dq0 {
    pub const fn new(v_d: f64, v_q: f64, v_0: f64) -> Self {
        Self { v_d, v_q, v_0 }
    }

    pub fn magnitude(&self) -> f64 {
        self.v_d.hypot(self.v_q)
    }
}

/// Amplitude-invariant projection: d on the sine set, q on the cosine set.
pub fn abc_to_dq0(v: ThreePhase, wt: f64) -> Dq0 {
    let (s0, c0) = wt.sin_cos();
    let (s1, c1) = (wt - THIRD).sin_cos();
    let (s2, c2) = (wt + THIRD).sin_cos();
    Dq0 {
        v_d: 2.0 / 3.0 * (v.a * s0 + v.b * s1 + v.c * s2),
        v_q: 2.0 / 3.0 * (v.a * c0 + v.b * c1 + v.c * c2),
        v_0: (v.a + v.b + v.c) / 3.0,
    }
}

pub fn dq0_to_abc(d: Dq0, wt: f64) -> ThreePhase {
    let (s0, c0) = wt.sin_cos();
    let (s1, c1) = (wt - THIRD).sin_cos();
    let (s2, c2) = (wt + THIRD).sin_cos();
    ThreePhase {
        a: d.v_d * s0 + d.v_q * c0 + d.v_0,
        b: d.v_d * s1 + d.v_q * c1 + d.v_0,
        c: d.v_d * s2 + d.v_q * c2 + d.v_0,
    }
}
