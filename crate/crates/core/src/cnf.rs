//! CNF formulas with projection (primary variable) sets and DIMACS I/O.
//!
//! Variables are 1-based everywhere, matching DIMACS. A formula carries its
//! projection set; when a DIMACS file has no `c ind` lines the projection is
//! every variable.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::num::NonZeroU32;

use thiserror::Error;

/// A propositional variable, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(NonZeroU32);

impl VarId {
    /// Returns `None` for 0.
    pub fn new(id: u32) -> Option<Self> {
        NonZeroU32::new(id).map(VarId)
    }

    /// Variable for a 0-based index (`index + 1`).
    pub fn from_index(index: usize) -> Self {
        let id = u32::try_from(index + 1).expect("variable index overflows u32");
        VarId(NonZeroU32::new(id).unwrap())
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }

    /// 0-based index (`id - 1`).
    pub fn index(self) -> usize {
        self.0.get() as usize - 1
    }

    pub fn pos(self) -> Literal {
        Literal::new(self, true)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Literal {
        Literal::new(self, false)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: VarId,
    positive: bool,
}

impl Literal {
    pub fn new(var: VarId, positive: bool) -> Self {
        Literal { var, positive }
    }

    /// Parses a non-zero DIMACS integer.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        let id = u32::try_from(value.unsigned_abs()).ok()?;
        VarId::new(id).map(|v| Literal::new(v, value > 0))
    }

    pub fn var(self) -> VarId {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal { var: self.var, positive: !self.positive }
    }

    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var.get());
        if self.positive {
            v
        } else {
            -v
        }
    }

    /// Whether this literal is true under `value` for its variable.
    pub fn holds(self, value: bool) -> bool {
        value == self.positive
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        self.negated()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClauseError {
    #[error("duplicate literal {0}")]
    Duplicate(Literal),
    #[error("tautological clause contains both {0} and its negation")]
    Tautology(VarId),
}

/// A disjunction of literals. Never contains a literal twice nor both
/// polarities of one variable. The empty clause is allowed and is false.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause(Vec<Literal>);

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Result<Self, ClauseError> {
        for (i, a) in literals.iter().enumerate() {
            for b in &literals[..i] {
                if a.var == b.var {
                    return Err(if a.positive == b.positive {
                        ClauseError::Duplicate(*a)
                    } else {
                        ClauseError::Tautology(a.var)
                    });
                }
            }
        }
        Ok(Clause(literals))
    }

    pub fn empty() -> Self {
        Clause(Vec::new())
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_var(&self) -> u32 {
        self.0.iter().map(|l| l.var.get()).max().unwrap_or(0)
    }

    /// Evaluates the clause under a total assignment indexed by `VarId::index`.
    pub fn satisfied_by(&self, values: &[bool]) -> bool {
        self.0.iter().any(|l| l.holds(values[l.var.index()]))
    }
}

impl<'a> IntoIterator for &'a Clause {
    type Item = &'a Literal;
    type IntoIter = std::slice::Iter<'a, Literal>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("literal {lit} exceeds the declared {num_vars} variables")]
    VarOutOfRange { lit: i64, num_vars: u32 },
    #[error("projection variable {var} exceeds the declared {num_vars} variables")]
    ProjectionOutOfRange { var: u32, num_vars: u32 },
}

/// Clauses over variables `1..=num_vars` plus a projection set.
///
/// The projection is kept sorted and deduplicated, so two formulas that
/// count the same way compare equal regardless of how they were built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    projection: Vec<VarId>,
}

impl CnfFormula {
    /// A clause-free formula over `num_vars` variables, projection = all.
    pub fn new(num_vars: u32) -> Self {
        CnfFormula {
            num_vars,
            clauses: Vec::new(),
            projection: (1..=num_vars).map(|v| VarId::new(v).unwrap()).collect(),
        }
    }

    pub fn from_clauses(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        let mut f = CnfFormula::new(num_vars);
        for c in clauses {
            f.add_clause(c)?;
        }
        Ok(f)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn projection(&self) -> &[VarId] {
        &self.projection
    }

    pub fn projection_is_all(&self) -> bool {
        self.projection.len() == self.num_vars as usize
    }

    pub fn is_projected(&self, var: VarId) -> bool {
        self.projection.binary_search(&var).is_ok()
    }

    pub fn add_clause(&mut self, clause: Clause) -> Result<(), CnfError> {
        if let Some(l) = clause.literals().iter().find(|l| l.var.get() > self.num_vars) {
            return Err(CnfError::VarOutOfRange { lit: l.to_dimacs(), num_vars: self.num_vars });
        }
        self.clauses.push(clause);
        Ok(())
    }

    /// Builds and appends a clause from DIMACS integers. Panics on invalid
    /// input; meant for encoders that construct clauses programmatically.
    pub(crate) fn push(&mut self, lits: &[Literal]) {
        let clause = Clause::new(lits.to_vec()).expect("encoder produced an invalid clause");
        self.add_clause(clause).expect("encoder produced an out-of-range literal");
    }

    /// Replaces the projection set.
    pub fn set_projection<I: IntoIterator<Item = VarId>>(&mut self, vars: I) -> Result<(), CnfError> {
        let set: BTreeSet<VarId> = vars.into_iter().collect();
        if let Some(v) = set.iter().find(|v| v.get() > self.num_vars) {
            return Err(CnfError::ProjectionOutOfRange { var: v.get(), num_vars: self.num_vars });
        }
        self.projection = set.into_iter().collect();
        Ok(())
    }

    /// Grows the variable count. New variables are added to the projection
    /// only if the projection was "all".
    pub fn extend_vars(&mut self, num_vars: u32) {
        if num_vars <= self.num_vars {
            return;
        }
        let all = self.projection_is_all();
        let old = self.num_vars;
        self.num_vars = num_vars;
        if all {
            self.projection.extend((old + 1..=num_vars).map(|v| VarId::new(v).unwrap()));
        }
    }

    /// Conjunction: clauses of `self` followed by those of `other`; the
    /// projection is the union of both projections.
    pub fn conjoin(&self, other: &CnfFormula) -> CnfFormula {
        let mut clauses = Vec::with_capacity(self.clauses.len() + other.clauses.len());
        clauses.extend(self.clauses.iter().cloned());
        clauses.extend(other.clauses.iter().cloned());
        let projection: BTreeSet<VarId> = self.projection.iter().chain(other.projection.iter()).copied().collect();
        CnfFormula {
            num_vars: self.num_vars.max(other.num_vars),
            clauses,
            projection: projection.into_iter().collect(),
        }
    }

    /// Whether a total assignment (indexed by `VarId::index`) satisfies every clause.
    pub fn satisfied_by(&self, values: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(values))
    }

    pub fn to_dimacs(&self) -> String {
        emit_dimacs(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimacsError {
    #[error("line {line}: malformed problem line: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: clause data before the problem line")]
    MissingHeader { line: usize },
    #[error("line {line}: invalid token {token:?}")]
    Token { line: usize, token: String },
    #[error("line {line}: literal {lit} out of range (declared {num_vars} variables)")]
    LiteralOutOfRange { line: usize, lit: i64, num_vars: u32 },
    #[error("line {line}: {source}")]
    Clause { line: usize, source: ClauseError },
    #[error("line {line}: unterminated clause at end of input")]
    Unterminated { line: usize },
    #[error("expected {expected} clauses, found {found}")]
    ClauseCount { expected: usize, found: usize },
    #[error("no problem line found")]
    NoHeader,
}

/// Parses DIMACS CNF text. `c ind v1 ... vk 0` comment lines set the
/// projection; other comments are skipped. Clause and literal order are kept.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut formula = CnfFormula::new(0);
    let mut projection: Option<BTreeSet<VarId>> = None;
    let mut current: Vec<Literal> = Vec::new();
    let mut clause_line = 0;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line == "%" {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if !(rest.is_empty() || rest.starts_with(char::is_whitespace)) {
                return Err(DimacsError::Token { line: line_no, token: line.to_string() });
            }
            let mut words = rest.split_whitespace();
            if words.next() == Some("ind") {
                let set = projection.get_or_insert_with(BTreeSet::new);
                let mut terminated = false;
                for w in words {
                    if terminated {
                        return Err(DimacsError::Token { line: line_no, token: w.to_string() });
                    }
                    let v: u32 = w.parse().map_err(|_| DimacsError::Token { line: line_no, token: w.to_string() })?;
                    match VarId::new(v) {
                        None => terminated = true,
                        Some(var) => {
                            if let Some((n, _)) = header {
                                if v > n {
                                    return Err(DimacsError::LiteralOutOfRange {
                                        line: line_no,
                                        lit: i64::from(v),
                                        num_vars: n,
                                    });
                                }
                            }
                            set.insert(var);
                        }
                    }
                }
                if !terminated {
                    return Err(DimacsError::Unterminated { line: line_no });
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(DimacsError::Header { line: line_no, msg: "duplicate problem line".into() });
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.len() != 3 || words[0] != "cnf" {
                return Err(DimacsError::Header {
                    line: line_no,
                    msg: format!("expected `p cnf <vars> <clauses>`, got {line:?}"),
                });
            }
            let nv: u32 = words[1].parse().map_err(|_| DimacsError::Header {
                line: line_no,
                msg: format!("bad variable count {:?}", words[1]),
            })?;
            let nc: usize = words[2]
                .parse()
                .map_err(|_| DimacsError::Header { line: line_no, msg: format!("bad clause count {:?}", words[2]) })?;
            header = Some((nv, nc));
            formula = CnfFormula::new(nv);
            if let Some(set) = &projection {
                if let Some(v) = set.iter().find(|v| v.get() > nv) {
                    return Err(DimacsError::LiteralOutOfRange {
                        line: line_no,
                        lit: i64::from(v.get()),
                        num_vars: nv,
                    });
                }
            }
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(DimacsError::MissingHeader { line: line_no });
        };
        for tok in line.split_whitespace() {
            let value: i64 = tok.parse().map_err(|_| DimacsError::Token { line: line_no, token: tok.to_string() })?;
            if current.is_empty() {
                clause_line = line_no;
            }
            if value == 0 {
                let clause = Clause::new(std::mem::take(&mut current))
                    .map_err(|source| DimacsError::Clause { line: clause_line, source })?;
                formula.clauses.push(clause);
                continue;
            }
            let lit = Literal::from_dimacs(value)
                .filter(|l| l.var.get() <= num_vars)
                .ok_or(DimacsError::LiteralOutOfRange { line: line_no, lit: value, num_vars })?;
            current.push(lit);
        }
    }

    if !current.is_empty() {
        return Err(DimacsError::Unterminated { line: last_line.max(clause_line) });
    }
    let (_, expected) = header.ok_or(DimacsError::NoHeader)?;
    if expected != formula.clauses.len() {
        return Err(DimacsError::ClauseCount { expected, found: formula.clauses.len() });
    }
    if let Some(set) = projection {
        formula.projection = set.into_iter().collect();
    }
    Ok(formula)
}

/// Emits canonical DIMACS: the problem line, one `c ind` line when the
/// projection is not every variable, then one clause per line.
pub fn emit_dimacs(f: &CnfFormula) -> String {
    let mut out = String::with_capacity(16 + f.clauses.len() * 12);
    let _ = writeln!(out, "p cnf {} {}", f.num_vars, f.clauses.len());
    if !f.projection_is_all() {
        out.push_str("c ind");
        for v in &f.projection {
            let _ = write!(out, " {v}");
        }
        out.push_str(" 0\n");
    }
    for c in &f.clauses {
        for l in c {
            let _ = write!(out, "{l} ");
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: i64) -> Literal {
        Literal::from_dimacs(v).unwrap()
    }

    #[test]
    fn parse_simple() {
        let f = parse_dimacs("p cnf 2 1\n1 -2 0\n").unwrap();
        assert_eq!(f.num_vars(), 2);
        assert_eq!(f.clauses(), &[Clause::new(vec![lit(1), lit(-2)]).unwrap()]);
        assert_eq!(f.projection().len(), 2);
        assert_eq!(emit_dimacs(&f), "p cnf 2 1\n1 -2 0\n");
    }

    #[test]
    fn parse_projection() {
        let f = parse_dimacs("p cnf 3 0\nc ind 1 2 0\n").unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.num_clauses(), 0);
        assert_eq!(f.projection(), &[VarId::new(1).unwrap(), VarId::new(2).unwrap()]);
        let text = emit_dimacs(&f);
        assert!(text.lines().any(|l| l == "c ind 1 2 0"));
        assert_eq!(parse_dimacs(&text).unwrap(), f);
    }

    #[test]
    fn empty_formula() {
        assert_eq!(emit_dimacs(&CnfFormula::new(0)), "p cnf 0 0\n");
        assert_eq!(parse_dimacs("p cnf 0 0\n").unwrap(), CnfFormula::new(0));
    }

    #[test]
    fn clauses_may_span_lines_and_comments() {
        let f = parse_dimacs("c hello\np cnf 3 2\n1 2\n 3 0 -1\n0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.clauses()[0].len(), 3);
        assert_eq!(f.clauses()[1].literals(), &[lit(-1)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(parse_dimacs("p cnf x 1\n"), Err(DimacsError::Header { line: 1, .. })));
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 3 0\n"),
            Err(DimacsError::LiteralOutOfRange { line: 2, lit: 3, .. })
        ));
        assert!(matches!(parse_dimacs("p cnf 2 1\n1 2\n"), Err(DimacsError::Unterminated { line: 2 })));
        assert!(matches!(parse_dimacs("1 2 0\n"), Err(DimacsError::MissingHeader { line: 1 })));
        assert!(matches!(parse_dimacs("p cnf 2 1\np cnf 2 1\n"), Err(DimacsError::Header { line: 2, .. })));
        assert!(matches!(parse_dimacs("p cnf 2 2\n1 0\n"), Err(DimacsError::ClauseCount { expected: 2, found: 1 })));
        assert!(matches!(parse_dimacs("p cnf 2 1\n1 -1 0\n"), Err(DimacsError::Clause { line: 2, .. })));
        assert!(matches!(parse_dimacs("p cnf 2 0\nc ind 3 0\n"), Err(DimacsError::LiteralOutOfRange { line: 2, .. })));
        assert_eq!(parse_dimacs(""), Err(DimacsError::NoHeader));
    }

    #[test]
    fn clause_rejects_tautology_and_duplicates() {
        assert_eq!(Clause::new(vec![lit(1), lit(-1)]), Err(ClauseError::Tautology(VarId::new(1).unwrap())));
        assert_eq!(Clause::new(vec![lit(2), lit(2)]), Err(ClauseError::Duplicate(lit(2))));
        assert!(Clause::new(vec![]).unwrap().is_empty());
    }

    #[test]
    fn conjoin_unions_projection() {
        let mut a = CnfFormula::new(3);
        a.set_projection([VarId::new(1).unwrap()]).unwrap();
        a.push(&[lit(1), lit(3)]);
        let mut b = CnfFormula::new(4);
        b.set_projection([VarId::new(2).unwrap()]).unwrap();
        b.push(&[lit(-4)]);
        let c = a.conjoin(&b);
        assert_eq!(c.num_vars(), 4);
        assert_eq!(c.num_clauses(), 2);
        assert_eq!(c.projection(), &[VarId::new(1).unwrap(), VarId::new(2).unwrap()]);
        assert_eq!(c.clauses()[0], a.clauses()[0]);
    }

    #[test]
    fn add_clause_checks_range() {
        let mut f = CnfFormula::new(1);
        assert!(f.add_clause(Clause::new(vec![lit(2)]).unwrap()).is_err());
    }
}
