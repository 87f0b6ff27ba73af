//! Occurrence-list unit propagation over a fixed clause set, with an
//! undoable trail. Shared by the exact counter and the solution enumerator.

use crate::cnf::CnfFormula;

/// Internal literal: `2·var + negative`, var 0-based.
pub(crate) type Lit = u32;

#[inline]
pub(crate) fn lit_var(l: Lit) -> usize {
    (l >> 1) as usize
}

#[inline]
pub(crate) fn lit_neg(l: Lit) -> Lit {
    l ^ 1
}

#[inline]
pub(crate) fn make_lit(var: usize, value: bool) -> Lit {
    ((var as u32) << 1) | u32::from(!value)
}

/// Internal clauses of a formula, literals sorted within each clause.
pub(crate) fn compile(f: &CnfFormula) -> Vec<Vec<Lit>> {
    f.clauses()
        .iter()
        .map(|c| {
            let mut lits: Vec<Lit> = c.literals().iter().map(|l| make_lit(l.var().index(), l.is_positive())).collect();
            lits.sort_unstable();
            lits
        })
        .collect()
}

pub(crate) const UNASSIGNED: i8 = 0;

pub(crate) struct Propagator {
    pub(crate) clauses: Vec<Vec<Lit>>,
    /// Clause ids containing each literal.
    pub(crate) occurs: Vec<Vec<u32>>,
    /// +1 true, -1 false, 0 unassigned.
    pub(crate) values: Vec<i8>,
    pub(crate) trail: Vec<Lit>,
    qhead: usize,
    /// Number of true literals per clause.
    pub(crate) sat_count: Vec<u32>,
    /// Clauses with no true literal.
    pub(crate) unsat_clauses: usize,
    /// Set when the clause list contains an empty clause.
    pub(crate) has_empty: bool,
}

impl Propagator {
    pub(crate) fn new(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Self {
        let mut occurs = vec![Vec::new(); 2 * num_vars];
        let mut has_empty = false;
        for (i, c) in clauses.iter().enumerate() {
            has_empty |= c.is_empty();
            for &l in c {
                occurs[l as usize].push(i as u32);
            }
        }
        let n = clauses.len();
        Propagator {
            clauses,
            occurs,
            values: vec![UNASSIGNED; num_vars],
            trail: Vec::new(),
            qhead: 0,
            sat_count: vec![0; n],
            unsat_clauses: n,
            has_empty,
        }
    }

    pub(crate) fn num_vars(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub(crate) fn lit_value(&self, l: Lit) -> i8 {
        let v = self.values[lit_var(l)];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    #[inline]
    pub(crate) fn is_assigned(&self, var: usize) -> bool {
        self.values[var] != UNASSIGNED
    }

    fn assign(&mut self, l: Lit) {
        debug_assert_eq!(self.lit_value(l), UNASSIGNED);
        self.values[lit_var(l)] = if l & 1 == 1 { -1 } else { 1 };
        self.trail.push(l);
        for &c in &self.occurs[l as usize] {
            let sc = &mut self.sat_count[c as usize];
            *sc += 1;
            if *sc == 1 {
                self.unsat_clauses -= 1;
            }
        }
    }

    /// Assigns `l` and propagates. Returns false on conflict; the caller
    /// must then `undo_to` a saved trail length.
    pub(crate) fn decide(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            1 => true,
            -1 => false,
            _ => {
                self.assign(l);
                self.propagate()
            }
        }
    }

    /// Enqueues unit clauses of the original formula and propagates.
    pub(crate) fn propagate_units(&mut self) -> bool {
        if self.has_empty {
            return false;
        }
        for i in 0..self.clauses.len() {
            if self.clauses[i].len() == 1 {
                let l = self.clauses[i][0];
                match self.lit_value(l) {
                    -1 => return false,
                    0 => self.assign(l),
                    _ => {}
                }
            }
        }
        self.propagate()
    }

    pub(crate) fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let l = self.trail[self.qhead];
            self.qhead += 1;
            let falsified = lit_neg(l) as usize;
            for i in 0..self.occurs[falsified].len() {
                let c = self.occurs[falsified][i] as usize;
                if self.sat_count[c] > 0 {
                    continue;
                }
                let mut unit = None;
                let mut free = 0;
                for &x in &self.clauses[c] {
                    if self.values[lit_var(x)] == UNASSIGNED {
                        free += 1;
                        if free > 1 {
                            break;
                        }
                        unit = Some(x);
                    }
                }
                match (free, unit) {
                    (0, _) => {
                        self.qhead = self.trail.len();
                        return false;
                    }
                    (1, Some(u)) => self.assign(u),
                    _ => {}
                }
            }
        }
        true
    }

    pub(crate) fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let l = self.trail.pop().unwrap();
            self.values[lit_var(l)] = UNASSIGNED;
            for &c in &self.occurs[l as usize] {
                let sc = &mut self.sat_count[c as usize];
                *sc -= 1;
                if *sc == 0 {
                    self.unsat_clauses += 1;
                }
            }
        }
        self.qhead = self.qhead.min(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_and_undo() {
        // (a ∨ b) ∧ (¬a ∨ c) ∧ (¬c ∨ ¬b)
        let a = make_lit(0, true);
        let b = make_lit(1, true);
        let c = make_lit(2, true);
        let mut p = Propagator::new(3, vec![vec![a, b], vec![lit_neg(a), c], vec![lit_neg(c), lit_neg(b)]]);
        assert!(p.propagate_units());
        assert!(p.decide(a));
        assert_eq!(p.lit_value(c), 1);
        assert_eq!(p.lit_value(b), -1);
        assert_eq!(p.unsat_clauses, 0);
        p.undo_to(0);
        assert_eq!(p.unsat_clauses, 3);
        assert!(p.decide(lit_neg(a)));
        assert_eq!(p.lit_value(b), 1);
        assert_eq!(p.lit_value(c), -1);
    }

    #[test]
    fn conflict_detected() {
        let a = make_lit(0, true);
        let b = make_lit(1, true);
        let mut p = Propagator::new(2, vec![vec![lit_neg(a), b], vec![lit_neg(a), lit_neg(b)]]);
        assert!(!p.decide(a));
    }
}
