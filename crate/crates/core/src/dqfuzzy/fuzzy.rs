//! Seven-set triangular partitions, the 7×7 rule base and Mamdani max-min
//! inference with centroid defuzzification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of grid points used by the centroid defuzzifier.
pub const DEFUZZ_POINTS: usize = 1001;
const HALF: usize = DEFUZZ_POINTS / 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("no rule fired: aggregate membership is identically zero")]
    NoRuleFired,
    #[error("rule base line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid partition: {0}")]
    Partition(String),
}

/// Linguistic labels, ordered from negative big to positive big.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    NB,
    NM,
    NS,
    ZE,
    PS,
    PM,
    PB,
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::NB,
        Label::NM,
        Label::NS,
        Label::ZE,
        Label::PS,
        Label::PM,
        Label::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        Self::ALL[i]
    }

    /// Signed level in -3..=3.
    pub fn level(self) -> i32 {
        self as i32 - 3
    }

    pub fn from_level(level: i32) -> Label {
        Self::ALL[(level.clamp(-3, 3) + 3) as usize]
    }

    pub fn negate(self) -> Label {
        Self::ALL[6 - self.index()]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NB" | "NL" => Ok(Label::NB),
            "NM" => Ok(Label::NM),
            "NS" => Ok(Label::NS),
            "ZE" | "Z" => Ok(Label::ZE),
            "PS" => Ok(Label::PS),
            "PM" => Ok(Label::PM),
            "PB" | "PL" => Ok(Label::PB),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Seven triangular sets whose feet sit on the neighbouring centres, so
/// adjacent sets overlap by 50% and memberships sum to one on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    centers: [f64; 7],
}

impl Default for FuzzyPartition {
    fn default() -> Self {
        Self::uniform()
    }
}

impl FuzzyPartition {
    /// Centres at -1, -2/3, …, 1.
    pub fn uniform() -> Self {
        let mut centers = [0.0; 7];
        for (i, c) in centers.iter_mut().enumerate() {
            *c = (i as f64 - 3.0) / 3.0;
        }
        Self { centers }
    }

    pub fn new(centers: [f64; 7]) -> Result<Self, FuzzyError> {
        if centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FuzzyError::Partition("centres must increase strictly".into()));
        }
        if centers[3] != 0.0 || (0..7).any(|i| centers[i] != -centers[6 - i]) {
            return Err(FuzzyError::Partition("centres must be symmetric about 0".into()));
        }
        if centers[0] != -1.0 {
            return Err(FuzzyError::Partition("outer centres must sit at ±1".into()));
        }
        Ok(Self { centers })
    }

    pub fn centers(&self) -> &[f64; 7] {
        &self.centers
    }

    fn feet(&self, i: usize) -> (f64, f64) {
        let c = &self.centers;
        let left = if i == 0 { 2.0 * c[0] - c[1] } else { c[i - 1] };
        let right = if i == 6 { 2.0 * c[6] - c[5] } else { c[i + 1] };
        (left, right)
    }

    pub fn membership(&self, label: Label, x: f64) -> f64 {
        let i = label.index();
        let c = self.centers[i];
        let (left, right) = self.feet(i);
        if x >= c {
            ((right - x) / (right - c)).max(0.0)
        } else {
            ((x - left) / (c - left)).max(0.0)
        }
    }
}

pub type Degrees = [f64; 7];

/// Membership degrees of `x` clamped to [-1, 1].
pub fn fuzzify(x: f64, p: &FuzzyPartition) -> Degrees {
    let x = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    let mut out = [0.0; 7];
    for label in Label::ALL {
        out[label.index()] = p.membership(label, x);
    }
    out
}

/// 7×7 rule table indexed by (error label, change-of-error label).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBase {
    table: [[Label; 7]; 7],
}

use Label::*;

/// Rows are error NB..PB, columns change-of-error NB..PB.
const EMBEDDED: [[Label; 7]; 7] = [
    [NB, NB, NM, NM, NS, NS, ZE],
    [NB, NM, NM, NS, NS, ZE, PS],
    [NM, NM, NS, NS, ZE, PS, PS],
    [NM, NS, NS, ZE, PS, PS, PM],
    [NS, NS, ZE, PS, PS, PM, PM],
    [NS, ZE, PS, PS, PM, PM, PB],
    [ZE, PS, PS, PM, PM, PB, PB],
];

impl Default for RuleBase {
    fn default() -> Self {
        Self { table: EMBEDDED }
    }
}

impl RuleBase {
    pub fn new(table: [[Label; 7]; 7]) -> Self {
        Self { table }
    }

    pub fn rule(&self, e: Label, ce: Label) -> Label {
        self.table[e.index()][ce.index()]
    }

    pub fn table(&self) -> &[[Label; 7]; 7] {
        &self.table
    }

    pub fn is_antisymmetric(&self) -> bool {
        Label::ALL.iter().all(|&e| {
            Label::ALL
                .iter()
                .all(|&ce| self.rule(e.negate(), ce.negate()) == self.rule(e, ce).negate())
        })
    }

    pub fn is_monotone(&self) -> bool {
        (0..7).all(|i| {
            (0..6).all(|j| self.table[i][j] <= self.table[i][j + 1] && self.table[j][i] <= self.table[j + 1][i])
        })
    }

    /// Parses a whitespace-separated 7×7 label grid. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, FuzzyError> {
        let mut rows = Vec::with_capacity(7);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let labels = line
                .split_whitespace()
                .map(|tok| tok.parse::<Label>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|msg| FuzzyError::Parse { line: n + 1, msg })?;
            let row: [Label; 7] = labels.try_into().map_err(|v: Vec<Label>| FuzzyError::Parse {
                line: n + 1,
                msg: format!("expected 7 labels, found {}", v.len()),
            })?;
            rows.push(row);
        }
        let table: [[Label; 7]; 7] = rows.try_into().map_err(|v: Vec<[Label; 7]>| FuzzyError::Parse {
            line: 0,
            msg: format!("expected 7 rows, found {}", v.len()),
        })?;
        Ok(Self { table })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.table {
            let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Max-min aggregate: each output label clipped at its strongest firing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub heights: [f64; 7],
    pub partition: FuzzyPartition,
}

impl Aggregate {
    pub fn membership(&self, x: f64) -> f64 {
        Label::ALL
            .iter()
            .filter(|l| self.heights[l.index()] > 0.0)
            .map(|&l| self.heights[l.index()].min(self.partition.membership(l, x)))
            .fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.heights.iter().all(|&h| h <= 0.0)
    }
}

/// Mamdani max-min composition over the full rule table.
pub fn infer(e_deg: &Degrees, ce_deg: &Degrees, rules: &RuleBase, p_u: &FuzzyPartition) -> Aggregate {
    let mut heights = [0.0f64; 7];
    for (i, &de) in e_deg.iter().enumerate() {
        if de <= 0.0 {
            continue;
        }
        for (j, &dce) in ce_deg.iter().enumerate() {
            let w = de.min(dce);
            if w > 0.0 {
                let out = rules.table[i][j].index();
                heights[out] = heights[out].max(w);
            }
        }
    }
    Aggregate {
        heights,
        partition: *p_u,
    }
}

fn grid_point(k: usize) -> f64 {
    k as f64 / HALF as f64
}

/// Centroid of `aggregate` on a uniform 1001-point grid over [-1, 1].
/// Mirror points are summed pairwise, so an even aggregate yields exactly 0
/// and mirrored aggregates yield exactly negated centroids.
pub fn defuzzify(aggregate: impl Fn(f64) -> f64) -> Result<f64, FuzzyError> {
    let centre = aggregate(0.0);
    let mut num = 0.0;
    let mut den = centre;
    for k in 1..=HALF {
        let x = grid_point(k);
        let right = aggregate(x);
        let left = aggregate(-x);
        num += x * (right - left);
        den += right + left;
    }
    if den <= 0.0 {
        return Err(FuzzyError::NoRuleFired);
    }
    Ok(num / den)
}

pub fn defuzzify_aggregate(aggregate: &Aggregate) -> Result<f64, FuzzyError> {
    if aggregate.is_empty() {
        return Err(FuzzyError::NoRuleFired);
    }
    defuzzify(|x| aggregate.membership(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_centres_and_unity() {
        let p = FuzzyPartition::uniform();
        assert_eq!(p.centers()[3], 0.0);
        for k in 0..=2000 {
            let x = -1.0 + k as f64 * 1e-3;
            let d = fuzzify(x, &p);
            let s: f64 = d.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x} sum={s}");
            assert!(d.iter().filter(|&&v| v > 0.0).count() <= 2);
        }
    }

    #[test]
    fn fuzzify_cases() {
        let p = FuzzyPartition::uniform();
        let d = fuzzify(0.0, &p);
        assert_eq!(d[Label::ZE.index()], 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);
        let d = fuzzify(1.0 / 6.0, &p);
        assert!((d[Label::ZE.index()] - 0.5).abs() < 1e-12);
        assert!((d[Label::PS.index()] - 0.5).abs() < 1e-12);
        let d = fuzzify(2.0, &p);
        assert_eq!(d[Label::PB.index()], 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn partition_validation() {
        let mut c = *FuzzyPartition::uniform().centers();
        assert!(FuzzyPartition::new(c).is_ok());
        c.swap(1, 2);
        assert!(FuzzyPartition::new(c).is_err());
        assert!(FuzzyPartition::new([-1.0, -0.5, -0.2, 0.0, 0.3, 0.5, 1.0]).is_err());
    }

    #[test]
    fn embedded_rules_are_consistent() {
        let r = RuleBase::default();
        assert!(r.is_antisymmetric());
        assert!(r.is_monotone());
        assert_eq!(r.rule(Label::NB, Label::PB), Label::ZE);
        assert_eq!(r.rule(Label::ZE, Label::ZE), Label::ZE);
        for e in Label::ALL {
            for ce in Label::ALL {
                // round-half-away-from-zero of the mean level
                let s = e.level() + ce.level();
                let expect = (s as f64 / 2.0).round() as i32;
                assert_eq!(r.rule(e, ce).level(), expect);
            }
        }
    }

    #[test]
    fn rule_text_round_trip_and_errors() {
        let r = RuleBase::default();
        assert_eq!(RuleBase::parse(&r.to_text()).unwrap(), r);
        let bad = "NB NB\n";
        assert!(matches!(RuleBase::parse(bad), Err(FuzzyError::Parse { line: 1, .. })));
        let unknown = r.to_text().replacen("NB", "XX", 1);
        assert!(RuleBase::parse(&unknown).is_err());
        let short: String = r.to_text().lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(RuleBase::parse(&short).is_err());
    }

    #[test]
    fn inference_corner_and_centre() {
        let p = FuzzyPartition::uniform();
        let r = RuleBase::default();
        let agg = infer(&fuzzify(-1.0, &p), &fuzzify(1.0, &p), &r, &p);
        let mut expect = [0.0; 7];
        expect[Label::ZE.index()] = 1.0;
        assert_eq!(agg.heights, expect);
        let agg = infer(&fuzzify(0.0, &p), &fuzzify(0.0, &p), &r, &p);
        assert_eq!(agg.heights, expect);
        assert_eq!(defuzzify_aggregate(&agg).unwrap(), 0.0);
    }

    #[test]
    fn same_consequent_aggregates_by_max() {
        let p = FuzzyPartition::uniform();
        let r = RuleBase::default();
        // (NS,PS) and (ZE,ZE) both fire ZE at 0.5
        let e = fuzzify(-1.0 / 6.0, &p);
        let ce = fuzzify(1.0 / 6.0, &p);
        let agg = infer(&e, &ce, &r, &p);
        assert_eq!(agg.heights[Label::ZE.index()], 0.5);
        assert_eq!(defuzzify_aggregate(&agg).unwrap(), 0.0);
    }

    #[test]
    fn centroid_of_pb_triangle() {
        let p = FuzzyPartition::uniform();
        let mut heights = [0.0; 7];
        heights[Label::PB.index()] = 1.0;
        let agg = Aggregate { heights, partition: p };
        // closed form: right triangle rising on [2/3, 1] has centroid 2/3 + 2/3·(1/3)
        let exact = 2.0 / 3.0 + 2.0 / 9.0;
        let got = defuzzify_aggregate(&agg).unwrap();
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn defuzzify_errors_and_symmetry() {
        assert_eq!(defuzzify(|_| 0.0), Err(FuzzyError::NoRuleFired));
        let even = |x: f64| (1.0 - x * x) * (0.3 + (5.0 * x).cos().abs());
        assert_eq!(defuzzify(even).unwrap(), 0.0);
    }
}
