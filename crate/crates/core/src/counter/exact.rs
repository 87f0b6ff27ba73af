//! Exact projected model counting.
//!
//! DPLL search with unit propagation that branches only on unassigned
//! projection variables. After every decision the residual clauses are
//! split into variable-disjoint components whose counts multiply; each
//! component count is memoized under its residual clause set. A component
//! without projection variables contributes 1 if satisfiable and 0
//! otherwise, decided by the same search branching on any variable.

use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

use super::propagate::{lit_neg, lit_var, make_lit, Propagator};
use crate::cnf::CnfFormula;

const SEPARATOR: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TimedOut;

/// Cache statistics, exposed for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExactStats {
    pub decisions: u64,
    pub cache_hits: u64,
    pub cache_entries: usize,
    pub cache_flushes: u64,
}

struct Component {
    vars: Vec<u32>,
    clauses: Vec<u32>,
}

/// Bounded memo table. When the stored key material exceeds the budget the
/// table is flushed; counts never depend on hits.
struct ComponentCache {
    map: FxHashMap<Box<[u32]>, BigUint>,
    words: usize,
    budget_words: usize,
    flushes: u64,
}

impl ComponentCache {
    fn new(budget_words: usize) -> Self {
        ComponentCache { map: FxHashMap::default(), words: 0, budget_words, flushes: 0 }
    }

    fn get(&self, key: &[u32]) -> Option<&BigUint> {
        self.map.get(key)
    }

    fn insert(&mut self, key: Vec<u32>, value: BigUint) {
        let cost = key.len() + 8;
        if self.words + cost > self.budget_words {
            self.map.clear();
            self.words = 0;
            self.flushes += 1;
        }
        self.words += cost;
        self.map.insert(key.into_boxed_slice(), value);
    }
}

pub(crate) struct ExactCounter {
    prop: Propagator,
    is_proj: Vec<bool>,
    cache: ComponentCache,
    deadline: Option<Instant>,
    stats: ExactStats,
    // scratch, reset by stamping
    uf_parent: Vec<u32>,
    stamp: Vec<u32>,
    comp_of_root: Vec<u32>,
    occ: Vec<u32>,
    epoch: u32,
}

/// Default cache budget: 2^25 words (128 MiB of keys).
pub(crate) const DEFAULT_CACHE_WORDS: usize = 1 << 25;

impl ExactCounter {
    pub(crate) fn new(f: &CnfFormula, deadline: Option<Instant>, cache_words: usize) -> Self {
        let n = f.num_vars() as usize;
        let mut is_proj = vec![false; n];
        for v in f.projection() {
            is_proj[v.index()] = true;
        }
        ExactCounter {
            prop: Propagator::new(n, super::propagate::compile(f)),
            is_proj,
            cache: ComponentCache::new(cache_words),
            deadline,
            stats: ExactStats::default(),
            uf_parent: vec![0; n],
            stamp: vec![0; n],
            comp_of_root: vec![0; n],
            occ: vec![0; n],
            epoch: 0,
        }
    }

    pub(crate) fn stats(&self) -> ExactStats {
        ExactStats { cache_entries: self.cache.map.len(), cache_flushes: self.cache.flushes, ..self.stats }
    }

    pub(crate) fn count(&mut self) -> Result<BigUint, TimedOut> {
        if !self.prop.propagate_units() {
            return Ok(BigUint::zero());
        }
        let clauses: Vec<u32> = (0..self.prop.clauses.len() as u32).collect();
        let vars: Vec<u32> = (0..self.prop.num_vars() as u32).collect();
        self.count_residual(&clauses, &vars)
    }

    fn check_deadline(&mut self) -> Result<(), TimedOut> {
        self.stats.decisions += 1;
        if self.stats.decisions.is_multiple_of(512) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(TimedOut);
                }
            }
        }
        Ok(())
    }

    fn find(&mut self, v: u32) -> u32 {
        let mut r = v;
        while self.uf_parent[r as usize] != r {
            r = self.uf_parent[r as usize];
        }
        let mut x = v;
        while self.uf_parent[x as usize] != r {
            let next = self.uf_parent[x as usize];
            self.uf_parent[x as usize] = r;
            x = next;
        }
        r
    }

    /// Splits the unsatisfied clauses among `clauses` into components over
    /// unassigned variables. Also returns the number of unassigned projection
    /// variables of `vars` that occur in no residual clause.
    fn components(&mut self, clauses: &[u32], vars: &[u32]) -> (Vec<Component>, usize) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let mut residual: Vec<u32> = Vec::new();
        for &c in clauses {
            if self.prop.sat_count[c as usize] > 0 {
                continue;
            }
            residual.push(c);
            let mut first: Option<u32> = None;
            for i in 0..self.prop.clauses[c as usize].len() {
                let v = lit_var(self.prop.clauses[c as usize][i]) as u32;
                if self.prop.is_assigned(v as usize) {
                    continue;
                }
                if self.stamp[v as usize] != epoch {
                    self.stamp[v as usize] = epoch;
                    self.uf_parent[v as usize] = v;
                }
                match first {
                    None => first = Some(v),
                    Some(f) => {
                        let (a, b) = (self.find(f), self.find(v));
                        if a != b {
                            self.uf_parent[a.max(b) as usize] = a.min(b);
                        }
                    }
                }
            }
        }

        let mut comps: Vec<Component> = Vec::new();
        let mut free_proj = 0;
        for &v in vars {
            if self.prop.is_assigned(v as usize) {
                continue;
            }
            if self.stamp[v as usize] != epoch {
                if self.is_proj[v as usize] {
                    free_proj += 1;
                }
                continue;
            }
            let root = self.find(v);
            if root == v {
                self.comp_of_root[v as usize] = comps.len() as u32;
                comps.push(Component { vars: Vec::new(), clauses: Vec::new() });
            }
            let idx = self.comp_of_root[root as usize] as usize;
            comps[idx].vars.push(v);
        }
        for c in residual {
            let v = self.prop.clauses[c as usize]
                .iter()
                .map(|&l| lit_var(l))
                .find(|&v| !self.prop.is_assigned(v))
                .expect("propagated residual clause has an unassigned literal");
            let root = self.find(v as u32);
            let idx = self.comp_of_root[root as usize] as usize;
            comps[idx].clauses.push(c);
        }
        (comps, free_proj)
    }

    fn count_residual(&mut self, clauses: &[u32], vars: &[u32]) -> Result<BigUint, TimedOut> {
        let (comps, free_proj) = self.components(clauses, vars);
        let mut total = BigUint::one() << free_proj;
        for comp in comps {
            let c = self.count_component(&comp)?;
            if c.is_zero() {
                return Ok(c);
            }
            total *= c;
        }
        Ok(total)
    }

    /// Canonical key (sorted residual clauses) and the branching variable.
    fn signature(&mut self, comp: &Component) -> (Vec<u32>, u32, bool) {
        let mut residual: Vec<Vec<u32>> = Vec::with_capacity(comp.clauses.len());
        for &v in &comp.vars {
            self.occ[v as usize] = 0;
        }
        for &c in &comp.clauses {
            let lits: Vec<u32> =
                self.prop.clauses[c as usize].iter().copied().filter(|&l| !self.prop.is_assigned(lit_var(l))).collect();
            for &l in &lits {
                self.occ[lit_var(l)] += 1;
            }
            residual.push(lits);
        }
        residual.sort_unstable();
        residual.dedup();
        let mut key = Vec::with_capacity(residual.iter().map(|c| c.len() + 1).sum());
        for c in residual {
            key.extend_from_slice(&c);
            key.push(SEPARATOR);
        }

        let mut best: Option<(u32, u32)> = None;
        let mut best_any: Option<(u32, u32)> = None;
        for &v in &comp.vars {
            let score = self.occ[v as usize];
            let slot = if self.is_proj[v as usize] { &mut best } else { &mut best_any };
            if slot.is_none_or(|(_, s)| score > s) {
                *slot = Some((v, score));
            }
        }
        match best {
            Some((v, _)) => (key, v, true),
            None => (key, best_any.expect("component has variables").0, false),
        }
    }

    fn count_component(&mut self, comp: &Component) -> Result<BigUint, TimedOut> {
        let (key, var, projected) = self.signature(comp);
        if let Some(hit) = self.cache.get(&key) {
            self.stats.cache_hits += 1;
            return Ok(hit.clone());
        }
        self.check_deadline()?;
        let mut total = BigUint::zero();
        let mark = self.prop.trail.len();
        let pos = make_lit(var as usize, true);
        for lit in [lit_neg(pos), pos] {
            if self.prop.decide(lit) {
                let sub = self.count_residual(&comp.clauses, &comp.vars);
                self.prop.undo_to(mark);
                total += sub?;
            } else {
                self.prop.undo_to(mark);
            }
            if !projected && !total.is_zero() {
                total = BigUint::one();
                break;
            }
        }
        self.cache.insert(key, total.clone());
        Ok(total)
    }
}
