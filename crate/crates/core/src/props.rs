//! The sixteen relational properties over a binary relation `r ⊆ S × S`
//! with `|S| = n`, compiled to CNF over the n² adjacency-matrix variables
//! and evaluated directly on concrete matrices.
//!
//! Cell `(s, t)` (0-based) maps to variable `s·n + t + 1`, i.e. row-major.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cnf::{CnfFormula, Literal, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropError {
    #[error("scope must be at least 1")]
    ZeroScope,
    #[error("scope {0} is too large (n² must fit in a variable id)")]
    ScopeTooLarge(usize),
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("matrix has {got} cells, expected {expected}")]
    MatrixSize { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyId {
    Antisymmetric,
    Bijective,
    Connex,
    Equivalence,
    Function,
    Functional,
    Injective,
    Irreflexive,
    NonStrictOrder,
    PartialOrder,
    PreOrder,
    Reflexive,
    StrictOrder,
    Surjective,
    TotalOrder,
    Transitive,
}

impl PropertyId {
    pub const ALL: [PropertyId; 16] = [
        PropertyId::Antisymmetric,
        PropertyId::Bijective,
        PropertyId::Connex,
        PropertyId::Equivalence,
        PropertyId::Function,
        PropertyId::Functional,
        PropertyId::Injective,
        PropertyId::Irreflexive,
        PropertyId::NonStrictOrder,
        PropertyId::PartialOrder,
        PropertyId::PreOrder,
        PropertyId::Reflexive,
        PropertyId::StrictOrder,
        PropertyId::Surjective,
        PropertyId::TotalOrder,
        PropertyId::Transitive,
    ];

    /// Canonical lower-case name.
    pub fn name(self) -> &'static str {
        match self {
            PropertyId::Antisymmetric => "antisymmetric",
            PropertyId::Bijective => "bijective",
            PropertyId::Connex => "connex",
            PropertyId::Equivalence => "equivalence",
            PropertyId::Function => "function",
            PropertyId::Functional => "functional",
            PropertyId::Injective => "injective",
            PropertyId::Irreflexive => "irreflexive",
            PropertyId::NonStrictOrder => "nonstrictorder",
            PropertyId::PartialOrder => "partialorder",
            PropertyId::PreOrder => "preorder",
            PropertyId::Reflexive => "reflexive",
            PropertyId::StrictOrder => "strictorder",
            PropertyId::Surjective => "surjective",
            PropertyId::TotalOrder => "totalorder",
            PropertyId::Transitive => "transitive",
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyId {
    type Err = PropError;

    /// Case-insensitive; `-` and `_` are ignored so `non-strict-order` works.
    fn from_str(s: &str) -> Result<Self, PropError> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').flat_map(char::to_lowercase).collect();
        PropertyId::ALL.into_iter().find(|p| p.name() == key).ok_or_else(|| PropError::UnknownProperty(s.to_string()))
    }
}

/// A property at a fixed scope (number of atoms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PropertySpec {
    pub property: PropertyId,
    scope: usize,
}

impl PropertySpec {
    pub fn new(property: PropertyId, scope: usize) -> Result<Self, PropError> {
        if scope == 0 {
            return Err(PropError::ZeroScope);
        }
        if scope > 4096 {
            return Err(PropError::ScopeTooLarge(scope));
        }
        Ok(PropertySpec { property, scope })
    }

    pub fn scope(&self) -> usize {
        self.scope
    }

    /// n², the number of matrix cells and of primary variables.
    pub fn num_cells(&self) -> usize {
        self.scope * self.scope
    }
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.property, self.scope)
    }
}

/// An n×n boolean matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn new(n: usize, bits: Vec<bool>) -> Result<Self, PropError> {
        if bits.len() != n * n {
            return Err(PropError::MatrixSize { expected: n * n, got: bits.len() });
        }
        Ok(AdjacencyMatrix { n, bits })
    }

    pub fn zeros(n: usize) -> Self {
        AdjacencyMatrix { n, bits: vec![false; n * n] }
    }

    pub fn ones(n: usize) -> Self {
        AdjacencyMatrix { n, bits: vec![true; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for s in 0..n {
            m.set(s, s, true);
        }
        m
    }

    /// Row-major bits of the low `n²` bits of `word` (bit k = cell k).
    pub fn from_word(n: usize, word: u64) -> Self {
        assert!(n * n <= 64);
        AdjacencyMatrix { n, bits: (0..n * n).map(|k| word >> k & 1 == 1).collect() }
    }

    pub fn scope(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, s: usize, t: usize) -> bool {
        self.bits[s * self.n + t]
    }

    pub fn set(&mut self, s: usize, t: usize, value: bool) {
        self.bits[s * self.n + t] = value;
    }

    /// The matrix of the relation after renaming atom `i` to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n);
        for s in 0..self.n {
            for t in 0..self.n {
                out.set(perm[s], perm[t], self.get(s, t));
            }
        }
        out
    }
}

/// Variable for cell `(s, t)` at scope `n`.
pub fn cell_var(n: usize, s: usize, t: usize) -> VarId {
    VarId::from_index(s * n + t)
}

struct Encoder {
    n: usize,
    f: CnfFormula,
}

impl Encoder {
    fn x(&self, s: usize, t: usize) -> Literal {
        cell_var(self.n, s, t).pos()
    }

    fn clause(&mut self, lits: &[Literal]) {
        self.f.push(lits);
    }

    fn reflexive(&mut self) {
        for s in 0..self.n {
            let l = self.x(s, s);
            self.clause(&[l]);
        }
    }

    fn irreflexive(&mut self) {
        for s in 0..self.n {
            let l = !self.x(s, s);
            self.clause(&[l]);
        }
    }

    fn antisymmetric(&mut self) {
        for s in 0..self.n {
            for t in s + 1..self.n {
                let (a, b) = (!self.x(s, t), !self.x(t, s));
                self.clause(&[a, b]);
            }
        }
    }

    fn symmetric(&mut self) {
        for s in 0..self.n {
            for t in 0..self.n {
                if s != t {
                    let (a, b) = (!self.x(s, t), self.x(t, s));
                    self.clause(&[a, b]);
                }
            }
        }
    }

    fn connex(&mut self) {
        for s in 0..self.n {
            let l = self.x(s, s);
            self.clause(&[l]);
            for t in s + 1..self.n {
                let (a, b) = (self.x(s, t), self.x(t, s));
                self.clause(&[a, b]);
            }
        }
    }

    /// `x_st ∧ x_tu → x_su`. With `distinct` only pairwise-distinct triples.
    /// s = t or t = u yields a tautology and is skipped; no two surviving
    /// triples produce the same clause.
    fn transitive(&mut self, distinct: bool) {
        let n = self.n;
        for s in 0..n {
            for t in 0..n {
                if s == t {
                    continue;
                }
                for u in 0..n {
                    if t == u || (distinct && s == u) {
                        continue;
                    }
                    let (a, b, c) = (!self.x(s, t), !self.x(t, u), self.x(s, u));
                    self.clause(&[a, b, c]);
                }
            }
        }
    }

    fn at_most_one(&mut self, lits: &[Literal]) {
        for i in 0..lits.len() {
            for j in i + 1..lits.len() {
                self.clause(&[!lits[i], !lits[j]]);
            }
        }
    }

    fn rows(&self) -> Vec<Vec<Literal>> {
        (0..self.n).map(|s| (0..self.n).map(|t| self.x(s, t)).collect()).collect()
    }

    fn columns(&self) -> Vec<Vec<Literal>> {
        (0..self.n).map(|t| (0..self.n).map(|s| self.x(s, t)).collect()).collect()
    }

    fn lines(&mut self, lines: Vec<Vec<Literal>>, at_least: bool, at_most: bool) {
        for line in lines {
            if at_least {
                self.clause(&line);
            }
            if at_most {
                self.at_most_one(&line);
            }
        }
    }
}

/// Compiles a property to CNF over exactly n² variables with no auxiliary
/// variables. The projection is all n² variables.
pub fn encode(spec: PropertySpec) -> CnfFormula {
    let n = spec.scope;
    let num_vars = u32::try_from(n * n).expect("scope checked at construction");
    let mut e = Encoder { n, f: CnfFormula::new(num_vars) };
    match spec.property {
        PropertyId::Reflexive => e.reflexive(),
        PropertyId::Irreflexive => e.irreflexive(),
        PropertyId::Antisymmetric => e.antisymmetric(),
        PropertyId::Connex => e.connex(),
        PropertyId::Transitive => e.transitive(false),
        PropertyId::Equivalence => {
            e.reflexive();
            e.symmetric();
            e.transitive(false);
        }
        PropertyId::Function => {
            let rows = e.rows();
            e.lines(rows, true, true);
        }
        PropertyId::Functional => {
            let rows = e.rows();
            e.lines(rows, false, true);
        }
        PropertyId::Injective => {
            let cols = e.columns();
            e.lines(cols, true, true);
        }
        PropertyId::Surjective => {
            let cols = e.columns();
            e.lines(cols, true, false);
        }
        PropertyId::Bijective => {
            let rows = e.rows();
            e.lines(rows, true, true);
            let cols = e.columns();
            e.lines(cols, true, true);
        }
        PropertyId::PreOrder => {
            e.reflexive();
            e.transitive(false);
        }
        PropertyId::NonStrictOrder => {
            e.reflexive();
            e.antisymmetric();
            e.transitive(false);
        }
        PropertyId::StrictOrder => {
            e.irreflexive();
            e.transitive(false);
        }
        PropertyId::PartialOrder => {
            e.antisymmetric();
            e.transitive(true);
        }
        PropertyId::TotalOrder => {
            e.transitive(false);
            e.antisymmetric();
            e.connex();
        }
    }
    e.f
}

fn all_cells(m: &AdjacencyMatrix, mut pred: impl FnMut(usize, usize) -> bool) -> bool {
    (0..m.n).all(|s| (0..m.n).all(|t| pred(s, t)))
}

fn is_reflexive(m: &AdjacencyMatrix) -> bool {
    (0..m.n).all(|s| m.get(s, s))
}

fn is_irreflexive(m: &AdjacencyMatrix) -> bool {
    (0..m.n).all(|s| !m.get(s, s))
}

fn is_antisymmetric(m: &AdjacencyMatrix) -> bool {
    all_cells(m, |s, t| s == t || !(m.get(s, t) && m.get(t, s)))
}

fn is_symmetric(m: &AdjacencyMatrix) -> bool {
    all_cells(m, |s, t| !m.get(s, t) || m.get(t, s))
}

fn is_connex(m: &AdjacencyMatrix) -> bool {
    all_cells(m, |s, t| m.get(s, t) || m.get(t, s))
}

fn is_transitive(m: &AdjacencyMatrix, distinct: bool) -> bool {
    all_cells(m, |s, t| {
        !m.get(s, t) || (0..m.n).all(|u| (distinct && (s == t || t == u || s == u)) || !m.get(t, u) || m.get(s, u))
    })
}

fn row_count(m: &AdjacencyMatrix, s: usize) -> usize {
    (0..m.n).filter(|&t| m.get(s, t)).count()
}

fn col_count(m: &AdjacencyMatrix, t: usize) -> usize {
    (0..m.n).filter(|&s| m.get(s, t)).count()
}

/// Evaluates a property on a concrete matrix without any solving.
pub fn evaluate(property: PropertyId, m: &AdjacencyMatrix) -> bool {
    let rows = |pred: fn(usize) -> bool| (0..m.n).all(|s| pred(row_count(m, s)));
    let cols = |pred: fn(usize) -> bool| (0..m.n).all(|t| pred(col_count(m, t)));
    match property {
        PropertyId::Reflexive => is_reflexive(m),
        PropertyId::Irreflexive => is_irreflexive(m),
        PropertyId::Antisymmetric => is_antisymmetric(m),
        PropertyId::Connex => is_connex(m),
        PropertyId::Transitive => is_transitive(m, false),
        PropertyId::Equivalence => is_reflexive(m) && is_symmetric(m) && is_transitive(m, false),
        PropertyId::Function => rows(|c| c == 1),
        PropertyId::Functional => rows(|c| c <= 1),
        PropertyId::Injective => cols(|c| c == 1),
        PropertyId::Surjective => cols(|c| c >= 1),
        PropertyId::Bijective => rows(|c| c == 1) && cols(|c| c == 1),
        PropertyId::PreOrder => is_reflexive(m) && is_transitive(m, false),
        PropertyId::NonStrictOrder => is_reflexive(m) && is_antisymmetric(m) && is_transitive(m, false),
        PropertyId::StrictOrder => is_irreflexive(m) && is_transitive(m, false),
        PropertyId::PartialOrder => is_antisymmetric(m) && is_transitive(m, true),
        PropertyId::TotalOrder => is_transitive(m, false) && is_antisymmetric(m) && is_connex(m),
    }
}

/// Lex-leader symmetry breaking for the adjacent transpositions `(a, a+1)`.
///
/// For each transposition σ the row-major bit vector of the matrix must be
/// lexicographically ≤ (false < true) the vector of its image under σ.
/// Auxiliary "equal so far" variables are numbered after the n² cells and
/// excluded from the projection. The lex-least member of every orbit
/// satisfies all constraints, so each isomorphism class keeps at least one
/// representative. For n = 1 there is nothing to break and the formula is empty.
pub fn lex_leader_symbreak(n: usize) -> Result<CnfFormula, PropError> {
    if n == 0 {
        return Err(PropError::ZeroScope);
    }
    let cells = n * n;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut next_aux = cells;
    let var = |k: usize| VarId::from_index(k);

    for a in 0..n.saturating_sub(1) {
        let sigma = |i: usize| {
            if i == a {
                a + 1
            } else if i == a + 1 {
                a
            } else {
                i
            }
        };
        let pairs: Vec<(usize, usize)> =
            (0..cells).map(|k| (k, sigma(k / n) * n + sigma(k % n))).filter(|(k, img)| k != img).collect();
        // `eq` is None while the prefix is trivially equal (no pair seen yet).
        let mut eq: Option<VarId> = None;
        for (idx, &(k, img)) in pairs.iter().enumerate() {
            let (x, y) = (var(k), var(img));
            let guard: Vec<Literal> = eq.iter().map(|e| e.neg()).collect();
            let mut c = guard.clone();
            c.extend([x.neg(), y.pos()]);
            clauses.push(c);
            if idx + 1 == pairs.len() {
                break;
            }
            let e = VarId::from_index(next_aux);
            next_aux += 1;
            for (lx, ly) in [(x.pos(), y.pos()), (x.neg(), y.neg())] {
                let mut c = guard.clone();
                c.extend([lx, ly, e.pos()]);
                clauses.push(c);
            }
            eq = Some(e);
        }
    }

    let num_vars = u32::try_from(next_aux).map_err(|_| PropError::ScopeTooLarge(n))?;
    let mut f = CnfFormula::new(num_vars);
    for c in clauses {
        f.push(&c);
    }
    f.set_projection((0..cells).map(VarId::from_index)).expect("cells are in range");
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: PropertyId, n: usize) -> PropertySpec {
        PropertySpec::new(p, n).unwrap()
    }

    /// Counts matrices satisfying every clause, by enumeration.
    fn clause_count(f: &CnfFormula, n: usize) -> usize {
        (0u64..1 << (n * n)).filter(|w| f.satisfied_by(AdjacencyMatrix::from_word(n, *w).bits())).count()
    }

    #[test]
    fn parse_names() {
        assert_eq!("Reflexive".parse::<PropertyId>().unwrap(), PropertyId::Reflexive);
        assert_eq!("NON-STRICT-ORDER".parse::<PropertyId>().unwrap(), PropertyId::NonStrictOrder);
        assert_eq!("partial_order".parse::<PropertyId>().unwrap(), PropertyId::PartialOrder);
        assert!("symmetric".parse::<PropertyId>().is_err());
        for p in PropertyId::ALL {
            assert_eq!(p.name().parse::<PropertyId>().unwrap(), p);
        }
    }

    #[test]
    fn zero_scope_rejected() {
        assert_eq!(PropertySpec::new(PropertyId::Reflexive, 0), Err(PropError::ZeroScope));
        assert!(lex_leader_symbreak(0).is_err());
    }

    #[test]
    fn reflexive_is_unit_clauses() {
        let f = encode(spec(PropertyId::Reflexive, 5));
        assert_eq!(f.num_vars(), 25);
        assert_eq!(f.num_clauses(), 5);
        assert!(f.clauses().iter().all(|c| c.len() == 1));
    }

    #[test]
    fn no_auxiliary_variables() {
        for p in PropertyId::ALL {
            for n in 1..=5 {
                let f = encode(spec(p, n));
                assert_eq!(f.num_vars() as usize, n * n, "{p}");
                assert!(f.projection_is_all());
            }
        }
    }

    #[test]
    fn evaluator_examples() {
        let id = AdjacencyMatrix::identity(4);
        assert!(evaluate(PropertyId::Reflexive, &id));
        assert!(!evaluate(PropertyId::Irreflexive, &id));
        assert!(evaluate(PropertyId::Equivalence, &AdjacencyMatrix::ones(4)));
        assert!(evaluate(PropertyId::Bijective, &id));
        assert!(!evaluate(PropertyId::Bijective, &AdjacencyMatrix::zeros(4)));
    }

    #[test]
    fn encoder_agrees_with_evaluator_exhaustively() {
        for n in 1..=4 {
            let words = 1u64 << (n * n);
            for p in PropertyId::ALL {
                let f = encode(spec(p, n));
                for w in 0..words {
                    let m = AdjacencyMatrix::from_word(n, w);
                    assert_eq!(f.satisfied_by(m.bits()), evaluate(p, &m), "{p} n={n} word={w:#x}");
                }
            }
        }
    }

    #[test]
    fn small_counts_by_enumeration() {
        assert_eq!(clause_count(&encode(spec(PropertyId::Equivalence, 4)), 4), 15);
        assert_eq!(clause_count(&encode(spec(PropertyId::Bijective, 4)), 4), 24);
        assert_eq!(clause_count(&encode(spec(PropertyId::TotalOrder, 4)), 4), 24);
        assert_eq!(clause_count(&encode(spec(PropertyId::PartialOrder, 4)), 4), 219 * 16);
        assert_eq!(clause_count(&encode(spec(PropertyId::Injective, 3)), 3), 27);
        assert_eq!(clause_count(&encode(spec(PropertyId::Functional, 3)), 3), 64);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Whether some auxiliary assignment extends the matrix, by brute force
    /// over the auxiliaries.
    fn breaker_accepts(f: &CnfFormula, m: &AdjacencyMatrix) -> bool {
        let cells = m.bits().len();
        let aux = f.num_vars() as usize - cells;
        (0u64..1 << aux).any(|w| {
            let mut vals = m.bits().to_vec();
            vals.extend((0..aux).map(|k| w >> k & 1 == 1));
            f.satisfied_by(&vals)
        })
    }

    #[test]
    fn symbreak_keeps_a_representative_per_orbit() {
        let n = 3;
        let brk = lex_leader_symbreak(n).unwrap();
        assert_eq!(brk.projection().len(), 9);
        let perms = permutations(n);
        let mut kept = 0;
        for w in 0u64..1 << 9 {
            let m = AdjacencyMatrix::from_word(n, w);
            if breaker_accepts(&brk, &m) {
                kept += 1;
            } else {
                assert!(perms.iter().any(|p| breaker_accepts(&brk, &m.permuted(p))), "orbit of {w:#x} lost");
            }
        }
        // 104 isomorphism classes of relations on 3 atoms; not all symmetry is removed.
        assert!((104..512).contains(&kept), "kept {kept}");
    }

    #[test]
    fn symbreak_scope_one_is_empty() {
        let f = lex_leader_symbreak(1).unwrap();
        assert_eq!(f.num_clauses(), 0);
        assert_eq!(f.num_vars(), 1);
    }
}
