//! Projected solution enumeration.
//!
//! A chronological search over projection variables. Every visited leaf is
//! blocked implicitly: backtracking flips the deepest open decision, so no
//! projected assignment is produced twice. Leaves where all clauses are
//! satisfied expand into every completion of the still-free projection
//! variables; leaves where only auxiliary variables remain are decided by
//! the CDCL solver under the projected values as assumptions.

use std::sync::Arc;
use std::time::Instant;

use super::propagate::{compile, make_lit, Propagator};
use super::sat::Solver;
use super::Assignment;
use crate::cnf::{CnfFormula, VarId};

struct Frame {
    var: usize,
    mark: usize,
    flipped: bool,
}

/// Pending completions of a fully-satisfied leaf.
struct Cube {
    free: Vec<usize>,
    bits: Vec<bool>,
    done: bool,
}

/// Streaming enumerator; see [`super::enumerate_solutions`].
pub struct Solutions {
    prop: Propagator,
    order: Vec<usize>,
    proj: Arc<[VarId]>,
    residual: Option<Solver>,
    stack: Vec<Frame>,
    cube: Option<Cube>,
    started: bool,
    finished: bool,
    remaining: Option<u64>,
    deadline: Option<Instant>,
    steps: u64,
    timed_out: bool,
}

impl Solutions {
    pub(crate) fn new(f: &CnfFormula, limit: Option<u64>, deadline: Option<Instant>) -> Self {
        let n = f.num_vars() as usize;
        let clauses = compile(f);
        let mut occ = vec![0usize; n];
        for c in &clauses {
            for &l in c {
                occ[super::propagate::lit_var(l)] += 1;
            }
        }
        let mut order: Vec<usize> = f.projection().iter().map(|v| v.index()).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(occ[v]), v));
        let residual = if f.projection_is_all() {
            None
        } else {
            let mut s = Solver::new(n);
            for c in &clauses {
                s.add_clause(c);
            }
            s.set_deadline(deadline);
            Some(s)
        };
        Solutions {
            prop: Propagator::new(n, clauses),
            order,
            proj: f.projection().into(),
            residual,
            stack: Vec::new(),
            cube: None,
            started: false,
            finished: false,
            remaining: limit,
            deadline,
            steps: 0,
            timed_out: false,
        }
    }

    /// True if the stream ended because the deadline passed.
    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    fn snapshot(&self, cube: Option<&Cube>) -> Assignment {
        let mut values: Vec<bool> = self.proj.iter().map(|v| self.prop.values[v.index()] > 0).collect();
        if let Some(c) = cube {
            let mut k = 0;
            for (slot, v) in values.iter_mut().zip(self.proj.iter()) {
                if k < c.free.len() && c.free[k] == v.index() {
                    *slot = c.bits[k];
                    k += 1;
                }
            }
        }
        Assignment { vars: Arc::clone(&self.proj), values }
    }

    fn out_of_time(&mut self) -> bool {
        self.steps += 1;
        if self.steps.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                    self.finished = true;
                    return true;
                }
            }
        }
        false
    }

    /// Undoes decisions until one can be flipped. False when exhausted.
    fn backtrack(&mut self) -> bool {
        while let Some(top) = self.stack.last_mut() {
            self.prop.undo_to(top.mark);
            if top.flipped {
                self.stack.pop();
                continue;
            }
            top.flipped = true;
            let var = top.var;
            if self.prop.decide(make_lit(var, true)) {
                return true;
            }
        }
        false
    }

    /// Descends to the next leaf. Returns an assignment to emit, or None
    /// once the search is exhausted.
    fn next_leaf(&mut self) -> Option<Assignment> {
        if !self.started {
            self.started = true;
            if !self.prop.propagate_units() {
                return None;
            }
        } else if !self.backtrack() {
            return None;
        }
        loop {
            if self.out_of_time() {
                return None;
            }
            if self.prop.unsat_clauses == 0 {
                let mut free: Vec<usize> =
                    self.proj.iter().map(|v| v.index()).filter(|&v| !self.prop.is_assigned(v)).collect();
                free.sort_unstable();
                let cube = Cube { bits: vec![false; free.len()], free, done: false };
                let first = self.snapshot(Some(&cube));
                self.cube = Some(cube);
                return Some(first);
            }
            let next = self.order.iter().copied().find(|&v| !self.prop.is_assigned(v));
            match next {
                Some(var) => {
                    let mark = self.prop.trail.len();
                    self.stack.push(Frame { var, mark, flipped: false });
                    if self.prop.decide(make_lit(var, false)) {
                        continue;
                    }
                }
                None => {
                    let assumptions: Vec<u32> =
                        self.proj.iter().map(|v| make_lit(v.index(), self.prop.values[v.index()] > 0)).collect();
                    let solver = self.residual.as_mut().expect("auxiliary variables present");
                    match solver.solve(&assumptions) {
                        Ok(true) => return Some(self.snapshot(None)),
                        Ok(false) => {}
                        Err(_) => {
                            self.timed_out = true;
                            self.finished = true;
                            return None;
                        }
                    }
                }
            }
            if !self.backtrack() {
                return None;
            }
        }
    }

    fn next_in_cube(&mut self) -> Option<Assignment> {
        let mut cube = self.cube.take()?;
        // binary increment, least significant slot last
        let mut i = cube.bits.len();
        loop {
            if i == 0 {
                cube.done = true;
                break;
            }
            i -= 1;
            if cube.bits[i] {
                cube.bits[i] = false;
            } else {
                cube.bits[i] = true;
                break;
            }
        }
        if cube.done {
            return None;
        }
        let a = self.snapshot(Some(&cube));
        self.cube = Some(cube);
        Some(a)
    }
}

impl Iterator for Solutions {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.finished || self.remaining == Some(0) {
            return None;
        }
        let item = match self.next_in_cube() {
            Some(a) => Some(a),
            None => self.next_leaf(),
        };
        match item {
            Some(a) => {
                if let Some(r) = self.remaining.as_mut() {
                    *r -= 1;
                }
                Some(a)
            }
            None => {
                self.finished = true;
                None
            }
        }
    }
}
