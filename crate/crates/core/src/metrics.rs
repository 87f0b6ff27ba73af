//! Whole-space classifier metrics by model counting.
//!
//! `acc_mc` compares a tree against a ground-truth formula over all 2^n
//! inputs; `diff_mc` compares two trees. False positives and true
//! negatives come from complement identities (`fp = mc(T) - tp`,
//! `tn = mc(F) - fn`) so every count is of a plain CNF conjunction.

use std::time::Duration;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cnf::{CnfFormula, VarId};
use crate::counter::{count, CountError, CountMode};
use crate::dtree::DecisionTree;
use crate::tree2cnf::side_cnf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(
        "formula projects onto {found} variables; tree has {expected} features (projection must be 1..={expected})"
    )]
    ProjectionMismatch { expected: usize, found: usize },
    #[error("trees have {left} and {right} features")]
    FeatureCount { left: usize, right: usize },
    #[error(transparent)]
    Count(#[from] CountError),
    #[error("count {timed_out} timed out; completed: {}", completed_list(.completed))]
    Partial { completed: Vec<(String, BigUint)>, timed_out: String },
    #[error("counts sum to {sum}, expected 2^{n_bits}")]
    Identity { sum: BigUint, n_bits: usize },
}

fn completed_list(c: &[(String, BigUint)]) -> String {
    if c.is_empty() {
        return "none".into();
    }
    c.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

/// Accuracy, precision, recall and F1 as exact fractions; 0/0 is 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scores {
    pub accuracy: BigRational,
    pub precision: BigRational,
    pub recall: BigRational,
    pub f1: BigRational,
}

fn ratio(num: &BigUint, den: &BigUint) -> BigRational {
    if den.is_zero() {
        BigRational::zero()
    } else {
        BigRational::new(num.clone().into(), den.clone().into())
    }
}

impl Scores {
    pub fn from_counts(tp: &BigUint, fp: &BigUint, tn: &BigUint, fn_: &BigUint) -> Self {
        let accuracy = ratio(&(tp + tn), &(tp + fp + tn + fn_));
        let precision = ratio(tp, &(tp + fp));
        let recall = ratio(tp, &(tp + fn_));
        let sum = &precision + &recall;
        let f1 = if sum.is_zero() {
            BigRational::zero()
        } else {
            BigRational::from_integer(2.into()) * &precision * &recall / sum
        };
        Scores { accuracy, precision, recall, f1 }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "accuracy": format_decimal(&self.accuracy, 4),
            "precision": format_decimal(&self.precision, 4),
            "recall": format_decimal(&self.recall, 4),
            "f1": format_decimal(&self.f1, 4),
        })
    }
}

/// Rounds half away from zero to `places` decimals.
pub fn format_decimal(r: &BigRational, places: usize) -> String {
    let scale = BigRational::from_integer(num_bigint::BigInt::from(10u32).pow(places as u32));
    let scaled = (r.abs() * scale).round().to_integer();
    let digits = format!("{:0>width$}", scaled.to_string(), width = places + 1);
    let (int, frac) = digits.split_at(digits.len() - places);
    let sign = if r.is_negative() && !scaled.is_zero() { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Three significant digits, e.g. `7.88E+116`.
pub fn format_scientific(n: &BigUint) -> String {
    let s = n.to_string();
    if n.is_zero() {
        return "0.00E+00".into();
    }
    let mut exp = s.len() - 1;
    let mut lead: u32 = s[..s.len().min(3)].parse().unwrap();
    for _ in s.len()..3 {
        lead *= 10;
    }
    if s.len() > 3 && s.as_bytes()[3] >= b'5' {
        lead += 1;
        if lead == 1000 {
            lead = 100;
            exp += 1;
        }
    }
    format!("{}.{:02}E+{:02}", lead / 100, lead % 100, exp)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Wall time of one sub-count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timing {
    pub name: &'static str,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionCounts {
    pub tp: BigUint,
    pub fp: BigUint,
    pub tn: BigUint,
    pub fn_: BigUint,
    pub n_bits: usize,
    pub mode: CountMode,
    pub timings: Vec<Timing>,
}

impl ConfusionCounts {
    pub fn scores(&self) -> Scores {
        Scores::from_counts(&self.tp, &self.fp, &self.tn, &self.fn_)
    }

    pub fn total(&self) -> BigUint {
        &self.tp + &self.fp + &self.tn + &self.fn_
    }

    /// Report object; wall times are omitted unless `with_times`.
    pub fn to_json(&self, with_times: bool) -> Value {
        let counts = [("tp", &self.tp), ("fp", &self.fp), ("tn", &self.tn), ("fn", &self.fn_)];
        let mut v = json!({
            "mode": self.mode.to_string(),
            "n_bits": self.n_bits,
            "counts": Map::from_iter(counts.iter().map(|(k, c)| (k.to_string(), Value::String(c.to_string())))),
            "scientific": Map::from_iter(counts.iter().map(|(k, c)| (k.to_string(), Value::String(format_scientific(c))))),
            "scores": self.scores().to_json(),
        });
        if with_times {
            v["seconds"] = timings_json(&self.timings);
        }
        v
    }
}

fn timings_json(t: &[Timing]) -> Value {
    Value::Object(t.iter().map(|t| (t.name.to_string(), json!(t.elapsed.as_secs_f64()))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffResult {
    pub tt: BigUint,
    pub tf: BigUint,
    pub ft: BigUint,
    pub ff: BigUint,
    pub n_bits: usize,
    pub mode: CountMode,
    pub timings: Vec<Timing>,
}

impl DiffResult {
    fn space(&self) -> BigUint {
        BigUint::one() << self.n_bits
    }

    /// Fraction of inputs on which the trees disagree.
    pub fn diff(&self) -> BigRational {
        ratio(&(&self.tf + &self.ft), &self.space())
    }

    pub fn sim(&self) -> BigRational {
        ratio(&(&self.tt + &self.ff), &self.space())
    }

    /// `diff` as a percentage with two decimals, e.g. `2.25`.
    pub fn diff_percent(&self) -> String {
        format_decimal(&(self.diff() * BigRational::from_integer(100.into())), 2)
    }

    pub fn to_json(&self, with_times: bool) -> Value {
        let counts = [("tt", &self.tt), ("tf", &self.tf), ("ft", &self.ft), ("ff", &self.ff)];
        let mut v = json!({
            "mode": self.mode.to_string(),
            "n_bits": self.n_bits,
            "counts": Map::from_iter(counts.iter().map(|(k, c)| (k.to_string(), Value::String(c.to_string())))),
            "scientific": Map::from_iter(counts.iter().map(|(k, c)| (k.to_string(), Value::String(format_scientific(c))))),
            "diff": format_decimal(&self.diff(), 4),
            "sim": format_decimal(&self.sim(), 4),
            "diff_percent": self.diff_percent(),
        });
        if with_times {
            v["seconds"] = timings_json(&self.timings);
        }
        v
    }
}

struct Runner {
    mode: CountMode,
    share: Duration,
    done: Vec<(String, BigUint)>,
    timings: Vec<Timing>,
}

impl Runner {
    fn new(mode: CountMode, timeout: Duration) -> Self {
        Runner { mode, share: timeout / 4, done: Vec::new(), timings: Vec::new() }
    }

    fn run(&mut self, name: &'static str, f: &CnfFormula) -> Result<BigUint, MetricsError> {
        let r = count(f, self.mode, self.share)?;
        self.timings.push(Timing { name, elapsed: r.elapsed });
        match r.count {
            Some(c) => {
                self.done.push((name.to_string(), c.clone()));
                Ok(c)
            }
            None => Err(MetricsError::Partial { completed: self.done.clone(), timed_out: name.to_string() }),
        }
    }

    fn exact(&self) -> bool {
        !matches!(self.mode, CountMode::Approx { .. })
    }
}

fn check_projection(phi: &CnfFormula, feature_count: usize) -> Result<(), MetricsError> {
    let proj = phi.projection();
    let ok = proj.len() == feature_count && proj.iter().enumerate().all(|(i, v)| *v == VarId::from_index(i));
    if ok {
        Ok(())
    } else {
        Err(MetricsError::ProjectionMismatch { expected: feature_count, found: proj.len() })
    }
}

fn check_partition(sum: BigUint, n_bits: usize) -> Result<(), MetricsError> {
    if sum != BigUint::one() << n_bits {
        return Err(MetricsError::Identity { sum, n_bits });
    }
    Ok(())
}

fn minus(a: &BigUint, b: &BigUint) -> BigUint {
    if a >= b {
        a - b
    } else {
        BigUint::zero()
    }
}

/// Confusion counts of `tree` against ground truth `phi` over all inputs.
pub fn acc_mc(
    phi: &CnfFormula,
    tree: &DecisionTree,
    mode: CountMode,
    timeout: Duration,
) -> Result<ConfusionCounts, MetricsError> {
    let n = tree.feature_count();
    check_projection(phi, n)?;
    let t = side_cnf(tree, true);
    let f = side_cnf(tree, false);
    let mut run = Runner::new(mode, timeout);
    let tp = run.run("tp", &phi.conjoin(&t))?;
    let fn_ = run.run("fn", &phi.conjoin(&f))?;
    let mc_t = run.run("mc_true", &t)?;
    let mc_f = run.run("mc_false", &f)?;
    if run.exact() {
        check_partition(&mc_t + &mc_f, n)?;
        if tp > mc_t || fn_ > mc_f {
            return Err(MetricsError::Identity { sum: &mc_t + &mc_f, n_bits: n });
        }
    }
    let fp = minus(&mc_t, &tp);
    let tn = minus(&mc_f, &fn_);
    Ok(ConfusionCounts { tp, fp, tn, fn_, n_bits: n, mode, timings: run.timings })
}

/// Agreement counts between two trees over all inputs.
pub fn diff_mc(
    d1: &DecisionTree,
    d2: &DecisionTree,
    mode: CountMode,
    timeout: Duration,
) -> Result<DiffResult, MetricsError> {
    let n = d1.feature_count();
    if d2.feature_count() != n {
        return Err(MetricsError::FeatureCount { left: n, right: d2.feature_count() });
    }
    let (t1, f1) = (side_cnf(d1, true), side_cnf(d1, false));
    let (t2, f2) = (side_cnf(d2, true), side_cnf(d2, false));
    let mut run = Runner::new(mode, timeout);
    let tt = run.run("tt", &t1.conjoin(&t2))?;
    let tf = run.run("tf", &t1.conjoin(&f2))?;
    let ft = run.run("ft", &f1.conjoin(&t2))?;
    let ff = run.run("ff", &f1.conjoin(&f2))?;
    if run.exact() {
        check_partition(&tt + &tf + &ft + &ff, n)?;
    }
    Ok(DiffResult { tt, tf, ft, ff, n_bits: n, mode, timings: run.timings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn scores_basic() {
        let s = Scores::from_counts(&big(1), &big(1), &big(1), &big(1));
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(s, Scores { accuracy: half.clone(), precision: half.clone(), recall: half.clone(), f1: half });
        let s = Scores::from_counts(&big(3), &big(0), &big(5), &big(0));
        assert!(s.accuracy.is_one() && s.precision.is_one() && s.recall.is_one() && s.f1.is_one());
        let s = Scores::from_counts(&big(0), &big(0), &big(5), &big(0));
        assert!(s.precision.is_zero() && s.recall.is_zero() && s.f1.is_zero());
    }

    #[test]
    fn decimal_formatting() {
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(format_decimal(&r(1, 3), 4), "0.3333");
        assert_eq!(format_decimal(&r(2, 3), 4), "0.6667");
        assert_eq!(format_decimal(&r(1, 1), 4), "1.0000");
        assert_eq!(format_decimal(&r(0, 1), 4), "0.0000");
        assert_eq!(format_decimal(&r(9, 4), 2), "2.25");
    }

    #[test]
    fn scientific_formatting() {
        assert_eq!(format_scientific(&big(0)), "0.00E+00");
        assert_eq!(format_scientific(&big(7)), "7.00E+00");
        assert_eq!(format_scientific(&big(1_889_568)), "1.89E+06");
        assert_eq!(format_scientific(&big(9_995)), "1.00E+04");
        let n: BigUint = "788123456789012345678901234567890123456789012345678901234567890123456789012345678901234567890123456789012345678901".parse().unwrap();
        assert_eq!(format_scientific(&n), format!("7.88E+{}", n.to_string().len() - 1));
    }
}
