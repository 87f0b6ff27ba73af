//! A small incremental CDCL solver: two watched literals, first-UIP
//! learning with clause minimization, LBD-based learnt clause deletion,
//! VSIDS, phase saving, Luby restarts, and MiniSat-style assumptions. Clauses may be added between `solve` calls.
//!
//! Parity constraints registered with `add_xor` are additionally handled
//! by Gauss-Jordan elimination at every propagation fixpoint, which finds
//! every implied literal and every conflict of the linear system under the
//! current assignment. Explanations are built on demand and discarded on
//! backtrack.

use std::time::Instant;

use super::propagate::{lit_neg, lit_var, make_lit, Lit};

const NO_REASON: u32 = u32::MAX;
const NO_VAR: u32 = u32::MAX;
/// Reasons with this bit set index `xor_units`.
const XOR_REASON: u32 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Interrupted;

#[derive(Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: Lit,
}

#[derive(Clone, Copy, Default)]
struct ClauseMeta {
    learnt: bool,
    deleted: bool,
    lbd: u32,
}

pub(crate) struct Solver {
    clauses: Vec<Vec<Lit>>,
    meta: Vec<ClauseMeta>,
    num_learnt: usize,
    next_reduce: u64,
    level_stamp: Vec<u64>,
    stamp: u64,
    watches: Vec<Vec<Watcher>>,
    values: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    polarity: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    model: Vec<bool>,
    deadline: Option<Instant>,
    conflicts: u64,
    xor: Option<XorEngine>,
    /// Implied variable per parity explanation, `NO_VAR` for conflicts.
    xor_units: Vec<u32>,
    /// Combined row support per explanation, `XorEngine::words` each.
    xor_support: Vec<u64>,
    scratch: Vec<Lit>,
    scratch2: Vec<Lit>,
    xor_lim: Vec<usize>,
}

impl Solver {
    pub(crate) fn new(num_vars: usize) -> Self {
        let mut s = Solver {
            clauses: Vec::new(),
            meta: Vec::new(),
            num_learnt: 0,
            next_reduce: 2000,
            level_stamp: Vec::new(),
            stamp: 0,
            watches: Vec::new(),
            values: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            heap: VarHeap::default(),
            polarity: Vec::new(),
            seen: Vec::new(),
            ok: true,
            model: Vec::new(),
            deadline: None,
            conflicts: 0,
            xor: None,
            xor_units: Vec::new(),
            xor_support: Vec::new(),
            scratch: Vec::new(),
            scratch2: Vec::new(),
            xor_lim: Vec::new(),
        };
        for _ in 0..num_vars {
            s.new_var();
        }
        s
    }

    pub(crate) fn new_var(&mut self) -> usize {
        let v = self.values.len();
        self.values.push(0);
        self.level.push(0);
        self.reason.push(NO_REASON);
        self.activity.push(0.0);
        self.polarity.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.insert(v, &self.activity);
        v
    }

    /// Registers `⊕ vars = rhs`. The caller must also add a clausal
    /// encoding; the engine only strengthens propagation.
    pub(crate) fn add_xor(&mut self, vars: &[usize], rhs: bool) {
        self.xor.get_or_insert_with(XorEngine::default).add(vars, rhs);
    }

    pub(crate) fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    /// Value of `var` in the last model.
    pub(crate) fn model_value(&self, var: usize) -> bool {
        self.model[var]
    }

    #[inline]
    fn lit_value(&self, l: Lit) -> i8 {
        let v = self.values[lit_var(l)];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a clause at decision level 0. Returns false once the clause set
    /// is unsatisfiable at the root.
    pub(crate) fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        let mut out = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i + 1 < c.len() && c[i + 1] == lit_neg(l) {
                return true;
            }
            match self.lit_value(l) {
                1 => return true,
                -1 => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], NO_REASON);
                self.ok = self.propagate().is_none();
                self.ok
            }
            _ => {
                self.attach(out, ClauseMeta::default());
                true
            }
        }
    }

    fn attach(&mut self, c: Vec<Lit>, meta: ClauseMeta) -> u32 {
        let id = self.clauses.len() as u32;
        self.meta.push(meta);
        if meta.learnt {
            self.num_learnt += 1;
        }
        self.watches[lit_neg(c[0]) as usize].push(Watcher { clause: id, blocker: c[1] });
        self.watches[lit_neg(c[1]) as usize].push(Watcher { clause: id, blocker: c[0] });
        self.clauses.push(c);
        id
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = lit_var(l);
        self.values[v] = if l & 1 == 1 { -1 } else { 1 };
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Returns the conflicting clause, if any.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = lit_neg(p);
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.lit_value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cid = w.clause as usize;
                if self.meta[cid].deleted {
                    continue;
                }
                let clause = &mut self.clauses[cid];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                let fv = self.values[lit_var(first)];
                let first_val = if first & 1 == 1 { -fv } else { fv };
                if first != w.blocker && first_val == 1 {
                    ws[j] = Watcher { clause: w.clause, blocker: first };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let v = self.values[lit_var(l)];
                    let val = if l & 1 == 1 { -v } else { v };
                    if val != -1 {
                        clause.swap(1, k);
                        let nl = clause[1];
                        self.watches[lit_neg(nl) as usize].push(Watcher { clause: w.clause, blocker: first });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watcher { clause: w.clause, blocker: first };
                j += 1;
                if self.lit_value(first) == -1 {
                    conflict = Some(w.clause);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.clause);
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn new_level(&mut self) {
        self.trail_lim.push(self.trail.len());
        self.xor_lim.push(self.xor_units.len());
    }

    /// Literals of reason `r`, the implied literal first.
    fn reason_into(&self, r: u32, buf: &mut Vec<Lit>) {
        buf.clear();
        if r & XOR_REASON == 0 {
            buf.extend_from_slice(&self.clauses[r as usize]);
            return;
        }
        let idx = (r & !XOR_REASON) as usize;
        let engine = self.xor.as_ref().expect("parity reason without engine");
        let w = engine.words;
        let unit = self.xor_units[idx];
        if unit != NO_VAR {
            let v = unit as usize;
            buf.push(make_lit(v, self.values[v] == 1));
        }
        for (k, &word) in self.xor_support[idx * w..(idx + 1) * w].iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let v = engine.cols[64 * k + bits.trailing_zeros() as usize];
                bits &= bits - 1;
                if v as u32 != unit {
                    buf.push(make_lit(v, self.values[v] != 1));
                }
            }
        }
    }

    fn push_xor_reason(&mut self, engine: &XorEngine, row: usize, unit: u32) -> u32 {
        let idx = self.xor_units.len();
        self.xor_units.push(unit);
        engine.support_into(row, &mut self.xor_support);
        XOR_REASON | idx as u32
    }

    /// Unit propagation interleaved with parity reasoning until neither
    /// derives anything new.
    fn propagate_all(&mut self) -> Option<u32> {
        loop {
            if let Some(c) = self.propagate() {
                return Some(c);
            }
            let mut engine = self.xor.take()?;
            let result = match engine.eliminate(&self.values) {
                Elimination::Quiet => None,
                Elimination::Conflict(row) => Some(self.push_xor_reason(&engine, row, NO_VAR)),
                Elimination::Implied => {
                    for k in 0..engine.implied.len() {
                        let (var, value, row) = engine.implied[k];
                        let r = self.push_xor_reason(&engine, row, var as u32);
                        self.enqueue(make_lit(var, value), r);
                    }
                    self.xor = Some(engine);
                    continue;
                }
            };
            self.xor = Some(engine);
            return result;
        }
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increased(v, &self.activity);
    }

    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize) {
        let mut learnt: Vec<Lit> = vec![0];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level() as u32;
        loop {
            let start = usize::from(p.is_some());
            let mut reason = std::mem::take(&mut self.scratch);
            self.reason_into(confl, &mut reason);
            for &q in &reason[start..] {
                let v = lit_var(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            self.scratch = reason;
            loop {
                index -= 1;
                if self.seen[lit_var(self.trail[index])] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[lit_var(pl)] = false;
            path -= 1;
            if path == 0 {
                learnt[0] = lit_neg(pl);
                break;
            }
            confl = self.reason[lit_var(pl)];
        }
        let keep: Vec<bool> = learnt.iter().enumerate().map(|(k, &l)| k == 0 || !self.redundant(l)).collect();
        for &l in &learnt {
            self.seen[lit_var(l)] = false;
        }
        let mut keep = keep.into_iter();
        learnt.retain(|_| keep.next().unwrap());
        let mut back = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.level[lit_var(learnt[k])] > self.level[lit_var(learnt[best])] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            back = self.level[lit_var(learnt[1])] as usize;
        }
        (learnt, back)
    }

    /// Whether `l` is implied by other literals of the learnt clause.
    fn redundant(&mut self, l: Lit) -> bool {
        let r = self.reason[lit_var(l)];
        if r == NO_REASON {
            return false;
        }
        let mut buf = std::mem::take(&mut self.scratch2);
        self.reason_into(r, &mut buf);
        let out = buf[1..].iter().all(|&q| {
            let v = lit_var(q);
            self.seen[v] || self.level[v] == 0
        });
        self.scratch2 = buf;
        out
    }

    fn lbd(&mut self, lits: &[Lit]) -> u32 {
        self.stamp += 1;
        let mut n = 0;
        for &l in lits {
            let lv = self.level[lit_var(l)] as usize;
            if self.level_stamp.len() <= lv {
                self.level_stamp.resize(lv + 1, 0);
            }
            if self.level_stamp[lv] != self.stamp {
                self.level_stamp[lv] = self.stamp;
                n += 1;
            }
        }
        n
    }

    /// Drops the less useful half of the learnt clauses.
    fn reduce_db(&mut self) {
        let locked = |s: &Self, id: usize| {
            let c = &s.clauses[id];
            let v = lit_var(c[0]);
            s.reason[v] == id as u32 && s.lit_value(c[0]) == 1
        };
        let mut cands: Vec<usize> = (0..self.clauses.len())
            .filter(|&id| {
                let m = self.meta[id];
                m.learnt && !m.deleted && m.lbd > 2 && !locked(self, id)
            })
            .collect();
        cands.sort_by_key(|&id| std::cmp::Reverse((self.meta[id].lbd, self.clauses[id].len())));
        for &id in &cands[..cands.len() / 2] {
            self.meta[id].deleted = true;
            self.clauses[id] = Vec::new();
            self.num_learnt -= 1;
        }
        for ws in &mut self.watches {
            ws.retain(|w| !self.meta[w.clause as usize].deleted);
        }
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for k in (lim..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = lit_var(l);
            self.values[v] = 0;
            self.reason[v] = NO_REASON;
            self.polarity[v] = l & 1 == 0;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        let kept = self.xor_lim[level];
        self.xor_units.truncate(kept);
        if let Some(e) = &self.xor {
            self.xor_support.truncate(kept * e.words);
        }
        self.xor_lim.truncate(level);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.values[v] == 0 {
                return Some(((v as u32) << 1) | u32::from(!self.polarity[v]));
            }
        }
        None
    }

    /// Solves under assumptions. `Ok(true)` leaves a model readable through
    /// `model_value`; the solver is back at level 0 afterwards either way.
    pub(crate) fn solve(&mut self, assumptions: &[Lit]) -> Result<bool, Interrupted> {
        if !self.ok {
            return Ok(false);
        }
        self.cancel_until(0);
        let mut restart = 0u32;
        let result = loop {
            let budget = 100 * luby(restart);
            restart += 1;
            match self.search(assumptions, budget)? {
                Some(r) => break r,
                None => self.cancel_until(0),
            }
        };
        self.cancel_until(0);
        Ok(result)
    }

    fn search(&mut self, assumptions: &[Lit], budget: u64) -> Result<Option<bool>, Interrupted> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate_all() {
                self.conflicts += 1;
                local += 1;
                if self.conflicts.is_multiple_of(256) {
                    if let Some(d) = self.deadline {
                        if Instant::now() >= d {
                            return Err(Interrupted);
                        }
                    }
                }
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(Some(false));
                }
                let (learnt, back) = self.analyze(confl);
                let lbd = self.lbd(&learnt);
                self.cancel_until(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let l0 = learnt[0];
                    let id = self.attach(learnt, ClauseMeta { learnt: true, deleted: false, lbd });
                    self.enqueue(l0, id);
                }
                if self.conflicts >= self.next_reduce {
                    self.next_reduce = self.conflicts + 2000 + 300 * (self.next_reduce / 2000);
                    self.reduce_db();
                }
                self.var_inc *= 1.0 / 0.95;
                continue;
            }
            if local >= budget {
                return Ok(None);
            }
            let mut next = None;
            while self.decision_level() < assumptions.len() {
                let a = assumptions[self.decision_level()];
                match self.lit_value(a) {
                    1 => self.new_level(),
                    -1 => return Ok(Some(false)),
                    _ => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(l) => l,
                    None => {
                        self.model = self.values.iter().map(|&v| v == 1).collect();
                        return Ok(Some(true));
                    }
                },
            };
            self.new_level();
            self.enqueue(decision, NO_REASON);
        }
    }
}

enum Elimination {
    Quiet,
    /// Work row reduced to `0 = 1`.
    Conflict(usize),
    /// See `XorEngine::implied`.
    Implied,
}

/// Dense GF(2) matrix of the registered parity rows.
#[derive(Default)]
struct XorEngine {
    sparse: Vec<(Vec<usize>, bool)>,
    cols: Vec<usize>,
    words: usize,
    origin_words: usize,
    rows: Vec<u64>,
    rhs: Vec<bool>,
    /// Variable, value, and work row of each literal found by the last
    /// elimination.
    implied: Vec<(usize, bool, usize)>,
    work: Vec<u64>,
    work_rhs: Vec<bool>,
    origin: Vec<u64>,
    assigned_true: Vec<u64>,
    unassigned: Vec<u64>,
}

impl XorEngine {
    fn add(&mut self, vars: &[usize], rhs: bool) {
        self.sparse.push((vars.to_vec(), rhs));
        self.cols.clear();
    }

    fn build(&mut self) {
        let mut cols: Vec<usize> = self.sparse.iter().flat_map(|(v, _)| v.iter().copied()).collect();
        cols.sort_unstable();
        cols.dedup();
        self.words = cols.len().div_ceil(64).max(1);
        self.origin_words = self.sparse.len().div_ceil(64).max(1);
        self.rows = vec![0; self.sparse.len() * self.words];
        self.rhs = Vec::with_capacity(self.sparse.len());
        for (i, (vars, rhs)) in self.sparse.iter().enumerate() {
            for v in vars {
                let c = cols.binary_search(v).expect("column present");
                self.rows[i * self.words + c / 64] ^= 1 << (c % 64);
            }
            self.rhs.push(*rhs);
        }
        self.cols = cols;
    }

    fn eliminate(&mut self, values: &[i8]) -> Elimination {
        if self.cols.is_empty() {
            if self.sparse.is_empty() {
                return Elimination::Quiet;
            }
            self.build();
        }
        let (w, m, ow) = (self.words, self.rhs.len(), self.origin_words);
        if w == 1 && ow == 1 {
            return self.eliminate_small(values);
        }
        self.assigned_true.clear();
        self.assigned_true.resize(w, 0);
        self.unassigned.clear();
        self.unassigned.resize(w, 0);
        for (c, &v) in self.cols.iter().enumerate() {
            match values[v] {
                1 => self.assigned_true[c / 64] |= 1 << (c % 64),
                0 => self.unassigned[c / 64] |= 1 << (c % 64),
                _ => {}
            }
        }
        self.work.clear();
        self.work_rhs.clear();
        self.origin.clear();
        self.origin.resize(m * ow, 0);
        for i in 0..m {
            let mut parity = self.rhs[i];
            for k in 0..w {
                let row = self.rows[i * w + k];
                self.work.push(row & self.unassigned[k]);
                parity ^= (row & self.assigned_true[k]).count_ones() % 2 == 1;
            }
            self.work_rhs.push(parity);
            self.origin[i * ow + i / 64] |= 1 << (i % 64);
        }

        let mut rank = 0;
        for cw in 0..w {
            let mut pending = self.unassigned[cw];
            while pending != 0 && rank < m {
                let cb = pending & pending.wrapping_neg();
                pending ^= cb;
                let Some(p) = (rank..m).find(|&r| self.work[r * w + cw] & cb != 0) else {
                    continue;
                };
                if p != rank {
                    for k in 0..w {
                        self.work.swap(p * w + k, rank * w + k);
                    }
                    for k in 0..ow {
                        self.origin.swap(p * ow + k, rank * ow + k);
                    }
                    self.work_rhs.swap(p, rank);
                }
                for r in 0..m {
                    if r != rank && self.work[r * w + cw] & cb != 0 {
                        for k in 0..w {
                            self.work[r * w + k] ^= self.work[rank * w + k];
                        }
                        for k in 0..ow {
                            self.origin[r * ow + k] ^= self.origin[rank * ow + k];
                        }
                        self.work_rhs[r] ^= self.work_rhs[rank];
                    }
                }
                rank += 1;
            }
        }

        if let Some(r) = (rank..m).find(|&r| self.work_rhs[r]) {
            return Elimination::Conflict(r);
        }
        self.implied.clear();
        for r in 0..rank {
            let row = &self.work[r * w..(r + 1) * w];
            if row.iter().map(|x| x.count_ones()).sum::<u32>() == 1 {
                let k = row.iter().position(|&x| x != 0).unwrap();
                let c = 64 * k + row[k].trailing_zeros() as usize;
                self.implied.push((self.cols[c], self.work_rhs[r], r));
            }
        }
        if self.implied.is_empty() {
            Elimination::Quiet
        } else {
            Elimination::Implied
        }
    }

    /// `eliminate` for at most 64 columns and 64 rows.
    fn eliminate_small(&mut self, values: &[i8]) -> Elimination {
        let m = self.rhs.len();
        let (mut truth, mut free) = (0u64, 0u64);
        for (c, &v) in self.cols.iter().enumerate() {
            match values[v] {
                1 => truth |= 1 << c,
                0 => free |= 1 << c,
                _ => {}
            }
        }
        self.work.clear();
        self.origin.clear();
        self.work_rhs.clear();
        for i in 0..m {
            self.work.push(self.rows[i] & free);
            self.origin.push(1 << i);
            self.work_rhs.push(self.rhs[i] ^ ((self.rows[i] & truth).count_ones() & 1 == 1));
        }
        let (work, origin, rhs) = (&mut self.work[..m], &mut self.origin[..m], &mut self.work_rhs[..m]);
        let mut rank = 0;
        let mut pending = free;
        while pending != 0 && rank < m {
            let cb = pending & pending.wrapping_neg();
            pending ^= cb;
            let Some(p) = (rank..m).find(|&r| work[r] & cb != 0) else {
                continue;
            };
            work.swap(p, rank);
            origin.swap(p, rank);
            rhs.swap(p, rank);
            let (pw, po, pr) = (work[rank], origin[rank], rhs[rank]);
            for r in 0..m {
                if r != rank && work[r] & cb != 0 {
                    work[r] ^= pw;
                    origin[r] ^= po;
                    rhs[r] ^= pr;
                }
            }
            rank += 1;
        }
        if let Some(r) = (rank..m).find(|&r| rhs[r]) {
            return Elimination::Conflict(r);
        }
        self.implied.clear();
        for r in 0..rank {
            if work[r].count_ones() == 1 {
                self.implied.push((self.cols[work[r].trailing_zeros() as usize], rhs[r], r));
            }
        }
        if self.implied.is_empty() {
            Elimination::Quiet
        } else {
            Elimination::Implied
        }
    }

    /// Appends the column support of the original rows combined into work
    /// row `r`.
    fn support_into(&self, r: usize, out: &mut Vec<u64>) {
        let (w, ow) = (self.words, self.origin_words);
        let base = out.len();
        out.resize(base + w, 0);
        for k in 0..ow {
            let mut bits = self.origin[r * ow + k];
            while bits != 0 {
                let i = 64 * k + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                for j in 0..w {
                    out[base + j] ^= self.rows[i * w + j];
                }
            }
        }
    }
}

fn luby(mut i: u32) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < u64::from(i) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = 1u64;
    while size - 1 != u64::from(i) {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size as u32;
    }
    for _ in 0..seq {
        x *= 2;
    }
    x
}

/// Max-heap of variables keyed by activity.
#[derive(Default)]
struct VarHeap {
    heap: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.pos.len() <= v {
            self.pos.resize(v + 1, None);
        }
        if self.pos[v].is_some() {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v] = Some(i);
        self.up(i, act);
    }

    fn increased(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos.get(v).copied().flatten() {
            self.up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0]] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn better(a: usize, b: usize, act: &[f64]) -> bool {
        act[a] > act[b] || (act[a] == act[b] && a < b)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if Self::better(self.heap[i], self.heap[parent], act) {
                self.heap.swap(i, parent);
                self.pos[self.heap[i]] = Some(i);
                self.pos[self.heap[parent]] = Some(parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut best = i;
            if l < self.heap.len() && Self::better(self.heap[l], self.heap[best], act) {
                best = l;
            }
            if r < self.heap.len() && Self::better(self.heap[r], self.heap[best], act) {
                best = r;
            }
            if best == i {
                break;
            }
            self.heap.swap(i, best);
            self.pos[self.heap[i]] = Some(i);
            self.pos[self.heap[best]] = Some(best);
            i = best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::propagate::make_lit;
    use super::*;

    fn l(v: i32) -> Lit {
        make_lit(v.unsigned_abs() as usize - 1, v > 0)
    }

    #[test]
    fn luby_sequence() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn simple_sat_and_unsat() {
        let mut s = Solver::new(3);
        assert!(s.add_clause(&[l(1), l(2)]));
        assert!(s.add_clause(&[l(-1), l(3)]));
        assert!(s.add_clause(&[l(-3), l(-2)]));
        assert_eq!(s.solve(&[]), Ok(true));
        let m: Vec<bool> = (0..3).map(|v| s.model_value(v)).collect();
        assert!((m[0] || m[1]) && (!m[0] || m[2]) && (!m[2] || !m[1]));
        assert_eq!(s.solve(&[l(1), l(2)]), Ok(false));
        assert_eq!(s.solve(&[l(1)]), Ok(true));
        s.add_clause(&[l(1)]);
        s.add_clause(&[l(-3)]);
        assert_eq!(s.solve(&[]), Ok(false));
    }

    #[test]
    fn pigeonhole_unsat() {
        // 4 pigeons, 3 holes.
        let (p, h) = (4, 3);
        let var = |i: usize, j: usize| (i * h + j + 1) as i32;
        let mut s = Solver::new(p * h);
        for i in 0..p {
            let c: Vec<Lit> = (0..h).map(|j| l(var(i, j))).collect();
            s.add_clause(&c);
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    s.add_clause(&[l(-var(a, j)), l(-var(b, j))]);
                }
            }
        }
        assert_eq!(s.solve(&[]), Ok(false));
    }

    #[test]
    fn blocking_clauses_enumerate_all() {
        // x1 ∨ x2 ∨ x3 has 7 models.
        let mut s = Solver::new(3);
        s.add_clause(&[l(1), l(2), l(3)]);
        let mut n = 0;
        while s.solve(&[]) == Ok(true) {
            n += 1;
            let block: Vec<Lit> = (0..3).map(|v| make_lit(v, !s.model_value(v))).collect();
            s.add_clause(&block);
        }
        assert_eq!(n, 7);
    }

    #[test]
    fn xor_rows_alone_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(2..9usize);
            let rows: Vec<(Vec<usize>, bool)> = (0..rng.gen_range(1..n + 2))
                .map(|_| ((0..n).filter(|_| rng.gen_bool(0.5)).collect(), rng.gen()))
                .collect();
            let clauses: Vec<Vec<i32>> = (0..rng.gen_range(0..6))
                .map(|_| {
                    (0..3)
                        .map(|_| {
                            let v = rng.gen_range(1..=n as i32);
                            if rng.gen() {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let holds = |x: u32| {
                rows.iter().all(|(vs, p)| vs.iter().filter(|&&v| x >> v & 1 == 1).count() % 2 == usize::from(*p))
                    && clauses.iter().all(|c| c.iter().any(|&q| (x >> (q.unsigned_abs() - 1) & 1 == 1) == (q > 0)))
            };
            let expected = (0..1u32 << n).filter(|&x| holds(x)).count();
            let mut s = Solver::new(n);
            for (vs, p) in &rows {
                s.add_xor(vs, *p);
            }
            for c in &clauses {
                s.add_clause(&c.iter().map(|&q| l(q)).collect::<Vec<_>>());
            }
            let mut found = 0;
            while s.solve(&[]) == Ok(true) {
                let x: u32 = (0..n).filter(|&v| s.model_value(v)).map(|v| 1 << v).sum();
                assert!(holds(x));
                found += 1;
                s.add_clause(&(0..n).map(|v| make_lit(v, !s.model_value(v))).collect::<Vec<_>>());
            }
            assert_eq!(found, expected);
        }
    }
}
