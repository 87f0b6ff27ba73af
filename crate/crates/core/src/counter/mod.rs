//! Projected model counting, enumeration and satisfiability.

mod approx;
mod brute;
mod enumerate;
mod exact;
mod propagate;
mod sat;

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use thiserror::Error;

use crate::cnf::{CnfFormula, Literal, VarId};

pub use approx::{repetitions, threshold};
pub use enumerate::Solutions;
pub use exact::ExactStats;

/// Default per-call time budget.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5000);

/// Largest projection the brute-force counter accepts by default.
pub const DEFAULT_BRUTE_LIMIT: usize = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountError {
    #[error("brute-force counting refused: {vars} projection variables exceeds limit {limit}")]
    TooLarge { vars: usize, limit: usize },
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountMode {
    Exact,
    Brute,
    Approx { epsilon: f64, delta: f64, seed: u64 },
}

impl CountMode {
    pub fn name(&self) -> &'static str {
        match self {
            CountMode::Exact => "exact",
            CountMode::Brute => "brute",
            CountMode::Approx { .. } => "approx",
        }
    }
}

impl fmt::Display for CountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountMode::Approx { epsilon, delta, seed } => {
                write!(f, "approx(epsilon={epsilon}, delta={delta}, seed={seed})")
            }
            m => f.write_str(m.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    /// Absent when the count timed out.
    pub count: Option<BigUint>,
    pub mode: CountMode,
    pub elapsed: Duration,
}

impl CountResult {
    pub fn timed_out(&self) -> bool {
        self.count.is_none()
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.mode {
            CountMode::Approx { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self.mode {
            CountMode::Approx { delta, .. } => Some(delta),
            _ => None,
        }
    }
}

/// Values of the projection variables of one solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    vars: Arc<[VarId]>,
    values: Vec<bool>,
}

impl Assignment {
    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    /// Values aligned with [`Assignment::vars`].
    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, var: VarId) -> Option<bool> {
        self.vars.binary_search(&var).ok().map(|i| self.values[i])
    }

    pub fn into_values(self) -> Vec<bool> {
        self.values
    }
}

fn deadline(timeout: Duration) -> Option<Instant> {
    Instant::now().checked_add(timeout)
}

/// Exact projected count.
pub fn count_exact(f: &CnfFormula, timeout: Duration) -> CountResult {
    count_exact_with_stats(f, timeout).0
}

/// Exact projected count along with search statistics.
pub fn count_exact_with_stats(f: &CnfFormula, timeout: Duration) -> (CountResult, ExactStats) {
    let start = Instant::now();
    let mut counter = exact::ExactCounter::new(f, deadline(timeout), exact::DEFAULT_CACHE_WORDS);
    let count = counter.count().ok();
    (CountResult { count, mode: CountMode::Exact, elapsed: start.elapsed() }, counter.stats())
}

/// Exhaustive projected count; refuses projections above `max_proj_vars`.
pub fn count_bruteforce(f: &CnfFormula, max_proj_vars: usize) -> Result<CountResult, CountError> {
    let vars = f.projection().len();
    let limit = max_proj_vars.min(63);
    if vars > limit {
        return Err(CountError::TooLarge { vars, limit: max_proj_vars });
    }
    let start = Instant::now();
    let n = brute::count(f);
    Ok(CountResult { count: Some(BigUint::from(n)), mode: CountMode::Brute, elapsed: start.elapsed() })
}

/// (epsilon, delta) approximate projected count.
pub fn count_approx(
    f: &CnfFormula,
    epsilon: f64,
    delta: f64,
    seed: u64,
    timeout: Duration,
) -> Result<CountResult, CountError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CountError::Epsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CountError::Delta(delta));
    }
    let start = Instant::now();
    let count = approx::estimate(f, epsilon, delta, seed, deadline(timeout)).ok();
    Ok(CountResult { count, mode: CountMode::Approx { epsilon, delta, seed }, elapsed: start.elapsed() })
}

/// Dispatches on `mode`; the brute-force limit is [`DEFAULT_BRUTE_LIMIT`].
pub fn count(f: &CnfFormula, mode: CountMode, timeout: Duration) -> Result<CountResult, CountError> {
    match mode {
        CountMode::Exact => Ok(count_exact(f, timeout)),
        CountMode::Brute => count_bruteforce(f, DEFAULT_BRUTE_LIMIT),
        CountMode::Approx { epsilon, delta, seed } => count_approx(f, epsilon, delta, seed, timeout),
    }
}

/// Streams distinct projected solutions in a fixed order.
pub fn enumerate_solutions(f: &CnfFormula, limit: Option<u64>) -> Solutions {
    Solutions::new(f, limit, None)
}

/// As [`enumerate_solutions`], stopping once `timeout` elapses; check
/// [`Solutions::timed_out`] afterwards.
pub fn enumerate_solutions_until(f: &CnfFormula, limit: Option<u64>, timeout: Duration) -> Solutions {
    Solutions::new(f, limit, deadline(timeout))
}

/// Satisfiability of `f` under `assumptions`.
pub fn is_sat(f: &CnfFormula, assumptions: &[Literal]) -> bool {
    let mut n = f.num_vars() as usize;
    for a in assumptions {
        n = n.max(a.var().index() + 1);
    }
    let mut s = sat::Solver::new(n);
    for c in propagate::compile(f) {
        if !s.add_clause(&c) {
            return false;
        }
    }
    let lits: Vec<u32> = assumptions.iter().map(|l| propagate::make_lit(l.var().index(), l.is_positive())).collect();
    s.solve(&lits).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::Clause;
    use crate::props::{encode, PropertyId, PropertySpec};

    fn lit(x: i64) -> Literal {
        Literal::from_dimacs(x).unwrap()
    }

    fn formula(n: u32, clauses: &[&[i64]]) -> CnfFormula {
        let cs = clauses.iter().map(|c| Clause::new(c.iter().map(|&x| lit(x)).collect()).unwrap()).collect();
        CnfFormula::from_clauses(n, cs).unwrap()
    }

    fn exact(f: &CnfFormula) -> u64 {
        count_exact(f, DEFAULT_TIMEOUT).count.unwrap().try_into().unwrap()
    }

    #[test]
    fn free_formula() {
        assert_eq!(exact(&CnfFormula::new(10)), 1024);
        assert_eq!(count_bruteforce(&CnfFormula::new(10), 26).unwrap().count, Some(BigUint::from(1024u32)));
    }

    #[test]
    fn projection_semantics() {
        let mut f = formula(2, &[&[1]]);
        f.set_projection([VarId::new(2).unwrap()]).unwrap();
        assert_eq!(exact(&f), 2);
        assert_eq!(count_bruteforce(&f, 26).unwrap().count.unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn aux_variables_count_once() {
        // x1 ∨ x2 ∨ x3 with projection {1}: both values of x1 extend.
        let mut f = formula(3, &[&[1, 2, 3], &[-2, -3]]);
        f.set_projection([VarId::new(1).unwrap()]).unwrap();
        assert_eq!(exact(&f), 2);
        assert_eq!(enumerate_solutions(&f, None).count(), 2);
    }

    #[test]
    fn unsat_counts_zero() {
        let f = formula(1, &[&[1], &[-1]]);
        assert_eq!(exact(&f), 0);
        assert_eq!(count_bruteforce(&f, 26).unwrap().count.unwrap(), BigUint::from(0u32));
        assert_eq!(count_approx(&f, 0.8, 0.2, 1, DEFAULT_TIMEOUT).unwrap().count.unwrap(), BigUint::from(0u32));
        assert_eq!(enumerate_solutions(&f, None).count(), 0);
    }

    #[test]
    fn brute_refuses_large_projection() {
        assert!(matches!(count_bruteforce(&CnfFormula::new(30), 26), Err(CountError::TooLarge { vars: 30, .. })));
    }

    #[test]
    fn enumerate_small() {
        let f = formula(2, &[&[1, 2]]);
        let all: Vec<_> = enumerate_solutions(&f, None).map(|a| a.into_values()).collect();
        assert_eq!(all.len(), 3);
        assert!(all.iter().all(|v| v[0] || v[1]));
        assert_eq!(enumerate_solutions(&f, Some(1)).count(), 1);
    }

    #[test]
    fn is_sat_basics() {
        let f = formula(1, &[&[1]]);
        assert!(!is_sat(&f, &[lit(-1)]));
        assert!(is_sat(&CnfFormula::new(0), &[]));
        let t = encode(PropertySpec::new(PropertyId::TotalOrder, 4).unwrap());
        assert!(is_sat(&t, &[]));
    }

    #[test]
    fn small_property_counts() {
        let spec = PropertySpec::new(PropertyId::Equivalence, 4).unwrap();
        assert_eq!(exact(&encode(spec)), 15);
        assert_eq!(enumerate_solutions(&encode(spec), None).count(), 15);
    }

    #[test]
    fn approx_on_free_formula() {
        let r = count_approx(&CnfFormula::new(20), 0.8, 0.2, 7, DEFAULT_TIMEOUT).unwrap();
        let est: f64 = r.count.unwrap().to_string().parse().unwrap();
        let exact = 1048576.0;
        assert!(est >= exact / 1.8 && est <= exact * 1.8, "{est}");
    }
}
