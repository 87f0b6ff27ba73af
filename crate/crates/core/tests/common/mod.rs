#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relcount::cnf::{Clause, CnfFormula, Literal, VarId};
use relcount::dtree::DecisionTree;
use relcount::props::PropertyId;

/// Projected model count by walking every total assignment.
pub fn oracle_count(f: &CnfFormula) -> u64 {
    let n = f.num_vars() as usize;
    assert!(n <= 24, "oracle limited to 24 variables");
    let proj: Vec<usize> = f.projection().iter().map(|v| v.index()).collect();
    let mut seen = HashSet::new();
    let mut values = vec![false; n];
    for x in 0u64..1 << n {
        for (i, v) in values.iter_mut().enumerate() {
            *v = x >> i & 1 == 1;
        }
        let sat = f.clauses().iter().all(|c| c.literals().iter().any(|l| values[l.var().index()] == l.is_positive()));
        if sat {
            let key: u64 = proj.iter().enumerate().filter(|(_, &v)| values[v]).map(|(k, _)| 1u64 << k).sum();
            seen.insert(key);
        }
    }
    seen.len() as u64
}

/// Relation semantics over an n×n matrix, written from first principles.
pub fn holds(p: PropertyId, n: usize, m: &[bool]) -> bool {
    let x = |s: usize, t: usize| m[s * n + t];
    let all = |f: &dyn Fn(usize, usize) -> bool| (0..n).all(|s| (0..n).all(|t| f(s, t)));
    let reflexive = (0..n).all(|s| x(s, s));
    let irreflexive = (0..n).all(|s| !x(s, s));
    let symmetric = all(&|s, t| !x(s, t) || x(t, s));
    let antisymmetric = all(&|s, t| s == t || !(x(s, t) && x(t, s)));
    let connex = all(&|s, t| x(s, t) || x(t, s));
    let transitive = (0..n).all(|s| (0..n).all(|t| (0..n).all(|u| !(x(s, t) && x(t, u)) || x(s, u))));
    let transitive_distinct =
        (0..n).all(|s| (0..n).all(|t| (0..n).all(|u| s == t || t == u || s == u || !(x(s, t) && x(t, u)) || x(s, u))));
    let row = |s: usize| (0..n).filter(|&t| x(s, t)).count();
    let col = |t: usize| (0..n).filter(|&s| x(s, t)).count();
    let rows = |f: &dyn Fn(usize) -> bool| (0..n).all(|s| f(row(s)));
    let cols = |f: &dyn Fn(usize) -> bool| (0..n).all(|t| f(col(t)));
    match p {
        PropertyId::Reflexive => reflexive,
        PropertyId::Irreflexive => irreflexive,
        PropertyId::Antisymmetric => antisymmetric,
        PropertyId::Connex => connex,
        PropertyId::Transitive => transitive,
        PropertyId::Equivalence => reflexive && symmetric && transitive,
        PropertyId::Function => rows(&|c| c == 1),
        PropertyId::Functional => rows(&|c| c <= 1),
        PropertyId::Injective => cols(&|c| c == 1),
        PropertyId::Surjective => cols(&|c| c >= 1),
        PropertyId::Bijective => rows(&|c| c == 1) && cols(&|c| c == 1),
        PropertyId::PreOrder => reflexive && transitive,
        PropertyId::NonStrictOrder => reflexive && antisymmetric && transitive,
        PropertyId::StrictOrder => irreflexive && transitive,
        PropertyId::PartialOrder => antisymmetric && transitive_distinct,
        PropertyId::TotalOrder => transitive && antisymmetric && connex,
    }
}

pub fn bits(x: u64, len: usize) -> Vec<bool> {
    (0..len).map(|i| x >> i & 1 == 1).collect()
}

/// Matrices of scope `n` satisfying `p`, counted by enumeration.
pub fn semantic_count(p: PropertyId, n: usize) -> u64 {
    (0u64..1 << (n * n)).filter(|&x| holds(p, n, &bits(x, n * n))).count() as u64
}

/// Random k-CNF; when `project` is set a random nonempty subset of the
/// variables forms the projection.
pub fn random_cnf(rng: &mut ChaCha8Rng, num_vars: u32, num_clauses: usize, k: usize, project: bool) -> CnfFormula {
    let mut f = CnfFormula::new(num_vars);
    for _ in 0..num_clauses {
        let mut lits: Vec<Literal> = Vec::new();
        while lits.len() < k.min(num_vars as usize) {
            let v = VarId::new(rng.gen_range(1..=num_vars)).unwrap();
            if lits.iter().all(|l| l.var() != v) {
                lits.push(Literal::new(v, rng.gen()));
            }
        }
        f.add_clause(Clause::new(lits).unwrap()).unwrap();
    }
    if project {
        let mut proj: Vec<VarId> =
            (1..=num_vars).filter(|_| rng.gen_bool(0.6)).map(|v| VarId::new(v).unwrap()).collect();
        if proj.is_empty() {
            proj.push(VarId::new(1).unwrap());
        }
        f.set_projection(proj).unwrap();
    }
    f
}

/// Random tree over `features` with no feature repeated on a path.
pub fn random_tree(rng: &mut ChaCha8Rng, features: usize, depth: usize) -> DecisionTree {
    fn grow(rng: &mut ChaCha8Rng, features: usize, depth: usize, used: &mut Vec<usize>) -> DecisionTree {
        if depth == 0 || used.len() == features || rng.gen_bool(0.25) {
            return DecisionTree::leaf(features, rng.gen());
        }
        let f = loop {
            let f = rng.gen_range(0..features);
            if !used.contains(&f) {
                break f;
            }
        };
        used.push(f);
        let low = grow(rng, features, depth - 1, used);
        let high = grow(rng, features, depth - 1, used);
        used.pop();
        DecisionTree::split(f, low, high).unwrap()
    }
    grow(rng, features, depth, &mut Vec::new())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
