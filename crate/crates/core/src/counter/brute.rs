//! Exhaustive projected counting, used as the reference oracle.
//!
//! Every assignment of the projection variables is tried. Clauses over
//! projection variables only are checked with bit masks; if auxiliary
//! variables exist, the remaining clauses are decided by a plain
//! backtracking search that shares no code with the other counters.

use crate::cnf::CnfFormula;

/// Clause over projection bits: satisfied iff `(a & pos) | (!a & neg) != 0`.
#[derive(Clone, Copy)]
struct MaskClause {
    pos: u64,
    neg: u64,
}

/// Clause with at least one auxiliary literal. Projection literals are
/// bit masks as above; auxiliaries are `(aux index, polarity)`.
struct MixedClause {
    pos: u64,
    neg: u64,
    aux: Vec<(usize, bool)>,
}

/// Counts projected solutions. Requires `projection.len() <= 63`.
pub(crate) fn count(f: &CnfFormula) -> u64 {
    let proj = f.projection();
    assert!(proj.len() < 64);
    let mut bit_of = vec![None; f.num_vars() as usize];
    for (i, v) in proj.iter().enumerate() {
        bit_of[v.index()] = Some(i);
    }
    let mut aux_of = vec![None; f.num_vars() as usize];
    let mut num_aux = 0;
    for c in f.clauses() {
        for l in c {
            let v = l.var().index();
            if bit_of[v].is_none() && aux_of[v].is_none() {
                aux_of[v] = Some(num_aux);
                num_aux += 1;
            }
        }
    }

    let mut pure = Vec::new();
    let mut mixed = Vec::new();
    for c in f.clauses() {
        let (mut pos, mut neg, mut aux) = (0u64, 0u64, Vec::new());
        for l in c {
            match bit_of[l.var().index()] {
                Some(b) if l.is_positive() => pos |= 1 << b,
                Some(b) => neg |= 1 << b,
                None => aux.push((aux_of[l.var().index()].unwrap(), l.is_positive())),
            }
        }
        if aux.is_empty() {
            pure.push(MaskClause { pos, neg });
        } else {
            mixed.push(MixedClause { pos, neg, aux });
        }
    }

    let total = 1u64 << proj.len();
    let mut n = 0u64;
    let mut aux_vals: Vec<Option<bool>> = vec![None; num_aux];
    for a in 0..total {
        if !pure.iter().all(|c| (a & c.pos) | (!a & c.neg) != 0) {
            continue;
        }
        if mixed.is_empty() {
            n += 1;
            continue;
        }
        let open: Vec<&[(usize, bool)]> =
            mixed.iter().filter(|c| (a & c.pos) | (!a & c.neg) == 0).map(|c| c.aux.as_slice()).collect();
        aux_vals.iter_mut().for_each(|v| *v = None);
        if backtrack(&open, &mut aux_vals, 0) {
            n += 1;
        }
    }
    n
}

/// Tries auxiliaries in index order, pruning once some clause is falsified.
fn backtrack(clauses: &[&[(usize, bool)]], vals: &mut [Option<bool>], next: usize) -> bool {
    let falsified = clauses.iter().any(|c| c.iter().all(|&(v, pol)| vals[v].is_some_and(|x| x != pol)));
    if falsified {
        return false;
    }
    let satisfied = clauses.iter().all(|c| c.iter().any(|&(v, pol)| vals[v] == Some(pol)));
    if satisfied || next == vals.len() {
        return satisfied;
    }
    for value in [false, true] {
        vals[next] = Some(value);
        if backtrack(clauses, vals, next + 1) {
            vals[next] = None;
            return true;
        }
    }
    vals[next] = None;
    false
}
