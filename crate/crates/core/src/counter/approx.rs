//! Hashing-based approximate projected counting.
//!
//! Each repetition draws a nested family of random parity constraints over
//! the projection variables and finds the smallest prefix length `m` whose
//! cell holds fewer than `thresh` projected solutions. The repetition's
//! estimate is `cell · 2^m`; the answer is the median over repetitions.
//! Parity constraints are added both as chained clauses and as rows for the
//! solver's Gauss-Jordan engine.
//!
//! Every projected solution found is kept in a pool. A cell's members
//! already in the pool are counted and blocked up front, so nested cells
//! and later repetitions never search for them again. Within a repetition
//! the solver is kept while `m` grows, since more rows only shrink the
//! cell and learnt clauses stay valid.

use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::propagate::{compile, make_lit, Lit};
use super::sat::{Interrupted, Solver};
use crate::cnf::CnfFormula;

/// Cell-size threshold for tolerance `epsilon`.
pub fn threshold(epsilon: f64) -> u64 {
    let e = epsilon;
    let k = 9.84 * (1.0 + e / (1.0 + e)) * (1.0 + 1.0 / e).powi(2);
    1 + k.ceil() as u64
}

/// Chance that a single repetition lands outside the tolerance band.
const REPETITION_FAILURE: f64 = 0.36;

/// Smallest odd number of repetitions whose median fails with probability
/// at most `delta`, each repetition failing independently with probability
/// at most `REPETITION_FAILURE`.
pub fn repetitions(delta: f64) -> u64 {
    let q = REPETITION_FAILURE;
    let mut t = 1u64;
    loop {
        // P[successes <= t/2] for Binomial(t, 1 - q)
        let mut term = q.powi(t as i32);
        let mut tail = term;
        for k in 1..=t / 2 {
            term *= (t - k + 1) as f64 / k as f64 * (1.0 - q) / q;
            tail += term;
        }
        if tail <= delta {
            return t;
        }
        t += 2;
    }
}

/// Projected solution as a bitset over projection positions.
type Point = Vec<u64>;

struct Row {
    vars: Vec<usize>,
    mask: Point,
    parity: bool,
}

impl Row {
    fn holds(&self, p: &Point) -> bool {
        let ones: u32 = self.mask.iter().zip(p).map(|(a, b)| (a & b).count_ones()).sum();
        (ones % 2 == 1) == self.parity
    }
}

struct Counter<'a> {
    base: &'a [Vec<Lit>],
    num_vars: usize,
    proj: &'a [usize],
    deadline: Option<Instant>,
    pool: Vec<Point>,
    /// Solver holding the first `.1` rows of the current repetition.
    live: Option<(Solver, usize)>,
}

impl Counter<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Row> {
        let words = self.proj.len().div_ceil(64);
        (0..self.proj.len())
            .map(|_| {
                let mut row = Row { vars: Vec::new(), mask: vec![0; words], parity: false };
                for (i, &v) in self.proj.iter().enumerate() {
                    if rng.gen_bool(0.5) {
                        row.vars.push(v);
                        row.mask[i / 64] |= 1 << (i % 64);
                    }
                }
                row.parity = rng.gen();
                row
            })
            .collect()
    }

    fn block(&self, solver: &mut Solver, p: &Point) {
        let clause: Vec<Lit> =
            self.proj.iter().enumerate().map(|(i, &v)| make_lit(v, p[i / 64] >> (i % 64) & 1 == 0)).collect();
        solver.add_clause(&clause);
    }

    /// Projected solutions satisfying `rows`, counted up to `limit`.
    fn bounded_count(&mut self, rows: &[Row], limit: u64) -> Result<u64, Interrupted> {
        let known: Vec<usize> = (0..self.pool.len()).filter(|&k| rows.iter().all(|r| r.holds(&self.pool[k]))).collect();
        if known.len() as u64 >= limit {
            return Ok(limit);
        }
        let (mut solver, have) = match self.live.take() {
            Some((solver, have)) if have <= rows.len() => (solver, have),
            _ => {
                let mut solver = Solver::new(self.num_vars);
                solver.set_deadline(self.deadline);
                for c in self.base {
                    solver.add_clause(c);
                }
                (solver, 0)
            }
        };
        for row in &rows[have..] {
            add_xor(&mut solver, row.vars.clone(), row.parity);
            solver.add_xor(&row.vars, row.parity);
        }
        for &k in &known {
            self.block(&mut solver, &self.pool[k]);
        }
        let mut found = known.len() as u64;
        while found < limit {
            if !solver.solve(&[])? {
                break;
            }
            found += 1;
            let mut p = vec![0u64; self.proj.len().div_ceil(64)];
            for (i, &v) in self.proj.iter().enumerate() {
                if solver.model_value(v) {
                    p[i / 64] |= 1 << (i % 64);
                }
            }
            self.block(&mut solver, &p);
            self.pool.push(p);
        }
        self.live = Some((solver, rows.len()));
        Ok(found)
    }
}

/// Clausal form of `⊕ vars = parity`, chained through fresh variables in
/// pieces of at most four.
fn add_xor(solver: &mut Solver, mut vars: Vec<usize>, parity: bool) {
    while vars.len() > 4 {
        let y = solver.new_var();
        let chunk: Vec<usize> = vars.drain(..3).collect();
        add_parity(solver, &[chunk[0], chunk[1], chunk[2], y], false);
        vars.push(y);
    }
    add_parity(solver, &vars, parity);
}

fn add_parity(solver: &mut Solver, vars: &[usize], parity: bool) {
    for mask in 0u32..(1 << vars.len()) {
        if (mask.count_ones() % 2 == 1) == parity {
            continue;
        }
        let clause: Vec<Lit> = vars.iter().enumerate().map(|(i, &v)| make_lit(v, mask >> i & 1 == 0)).collect();
        solver.add_clause(&clause);
    }
}

/// Runs the full estimate. `Err` on deadline.
pub(crate) fn estimate(
    f: &CnfFormula,
    epsilon: f64,
    delta: f64,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<BigUint, Interrupted> {
    let thresh = threshold(epsilon);
    let base = compile(f);
    let proj: Vec<usize> = f.projection().iter().map(|v| v.index()).collect();
    let mut counter =
        Counter { base: &base, num_vars: f.num_vars() as usize, proj: &proj, deadline, pool: Vec::new(), live: None };

    let c = counter.bounded_count(&[], thresh)?;
    if c < thresh {
        return Ok(BigUint::from(c));
    }

    let mut estimates = Vec::new();
    let mut prev_m = 1usize;
    for rep in 0..repetitions(delta) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep + 1);
        let rows = counter.draw(&mut rng);
        counter.live = None;
        let (m, cell) = search_m(&mut counter, &rows, prev_m, thresh)?;
        prev_m = m;
        estimates.push(BigUint::from(cell) << m);
    }
    estimates.sort();
    Ok(estimates[estimates.len() / 2].clone())
}

/// Smallest `m` with a cell below `thresh`, probing around `start` first.
/// Cells shrink monotonically in `m` because the rows are nested prefixes.
fn search_m(counter: &mut Counter, rows: &[Row], start: usize, thresh: u64) -> Result<(usize, u64), Interrupted> {
    let top = rows.len();
    let mut memo: Vec<Option<u64>> = vec![None; top + 1];
    memo[0] = Some(thresh);
    let mut probe = |m: usize| -> Result<u64, Interrupted> {
        if let Some(c) = memo[m] {
            return Ok(c);
        }
        let c = counter.bounded_count(&rows[..m], thresh)?;
        memo[m] = Some(c);
        Ok(c)
    };
    // invariant: cell(lo) >= thresh, cell(hi) < thresh
    let mut lo = 0usize;
    let mut hi = top;
    let start = start.saturating_sub(1).clamp(1, top);
    if probe(start)? < thresh {
        hi = start;
        let mut step = 1;
        while hi > lo + 1 {
            let m = hi.saturating_sub(step).max(lo + 1);
            if probe(m)? < thresh {
                hi = m;
                step *= 2;
            } else {
                lo = m;
                break;
            }
        }
    } else {
        lo = start;
        let mut step = 1;
        while hi > lo + 1 {
            let m = (lo + step).min(hi - 1);
            if probe(m)? >= thresh {
                lo = m;
                step *= 2;
            } else {
                hi = m;
                break;
            }
        }
    }
    while hi > lo + 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? < thresh {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let cell = probe(hi)?;
    Ok((hi, cell))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_constants() {
        assert_eq!(threshold(0.8), 73);
        assert_eq!(repetitions(0.2), 9);
        assert_eq!(repetitions(0.5), 1);
        assert!(repetitions(0.01) > repetitions(0.05));
    }

    #[test]
    fn rows_check_parity() {
        let row = Row { vars: vec![0, 2], mask: vec![0b101], parity: true };
        assert!(row.holds(&vec![0b001]));
        assert!(!row.holds(&vec![0b101]));
        assert!(row.holds(&vec![0b110]));
    }
}
