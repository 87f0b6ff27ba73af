//! Decision-tree logic as CNF.
//!
//! The inputs a tree labels `L` are exactly those that follow no path to
//! the other label, so each opposing path contributes the clause that
//! negates its path condition. No auxiliary variables are introduced and
//! the formula has one clause per opposing leaf. Feature `k` is variable
//! `k + 1`, matching the cell numbering of the property encodings.

use crate::cnf::{Clause, CnfFormula, Literal, VarId};
use crate::dtree::{DecisionTree, Node};

/// Conjunction of branch literals along one root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCondition(pub Vec<Literal>);

impl PathCondition {
    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn holds(&self, features: &[bool]) -> bool {
        self.0.iter().all(|l| l.holds(features[l.var().index()]))
    }

    /// Clause satisfied by every input outside this path.
    pub fn negation(&self) -> Clause {
        Clause::new(self.0.iter().map(|l| l.negated()).collect()).expect("path variables are distinct")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreeSides {
    pub true_paths: Vec<PathCondition>,
    pub false_paths: Vec<PathCondition>,
}

impl TreeSides {
    pub fn side(&self, label: bool) -> &[PathCondition] {
        if label {
            &self.true_paths
        } else {
            &self.false_paths
        }
    }
}

pub fn feature_var(feature: usize) -> VarId {
    VarId::from_index(feature)
}

/// Depth-first paths, `low` branch first.
pub fn paths(tree: &DecisionTree) -> TreeSides {
    let mut sides = TreeSides::default();
    let mut stack = vec![(tree.root(), Vec::new())];
    while let Some((id, prefix)) = stack.pop() {
        match tree.node(id) {
            Node::Leaf { label } => {
                let p = PathCondition(prefix);
                if label {
                    sides.true_paths.push(p);
                } else {
                    sides.false_paths.push(p);
                }
            }
            Node::Split { feature, low, high } => {
                let v = feature_var(feature);
                let mut hi = prefix.clone();
                hi.push(v.pos());
                let mut lo = prefix;
                lo.push(v.neg());
                stack.push((high, hi));
                stack.push((low, lo));
            }
        }
    }
    sides
}

/// CNF whose solutions are the inputs `tree` labels `label`.
pub fn side_cnf(tree: &DecisionTree, label: bool) -> CnfFormula {
    side_cnf_from(&paths(tree), tree.feature_count(), label)
}

pub fn side_cnf_from(sides: &TreeSides, feature_count: usize, label: bool) -> CnfFormula {
    let clauses = sides.side(!label).iter().map(PathCondition::negation).collect();
    CnfFormula::from_clauses(feature_count as u32, clauses).expect("features are in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(x: i64) -> Literal {
        Literal::from_dimacs(x).unwrap()
    }

    fn fig_tree() -> DecisionTree {
        let y_tree = |a, b| DecisionTree::split(1, DecisionTree::leaf(2, a), DecisionTree::leaf(2, b)).unwrap();
        DecisionTree::split(0, y_tree(true, false), y_tree(false, true)).unwrap()
    }

    #[test]
    fn paths_low_first() {
        let s = paths(&fig_tree());
        let all: Vec<Vec<i64>> = s
            .true_paths
            .iter()
            .chain(&s.false_paths)
            .map(|p| p.literals().iter().map(|l| l.to_dimacs()).collect())
            .collect();
        assert_eq!(all, vec![vec![-1, -2], vec![1, 2], vec![-1, 2], vec![1, -2]]);
    }

    #[test]
    fn constant_tree() {
        let t = DecisionTree::leaf(9, true);
        let s = paths(&t);
        assert_eq!(s.true_paths, vec![PathCondition(vec![])]);
        assert!(s.false_paths.is_empty());
        assert_eq!(side_cnf(&t, true).num_clauses(), 0);
        let f = side_cnf(&t, false);
        assert_eq!(f.num_clauses(), 1);
        assert!(f.clauses()[0].is_empty());
    }

    #[test]
    fn false_side_of_example() {
        let f = side_cnf(&fig_tree(), false);
        let got: Vec<Vec<Literal>> = f.clauses().iter().map(|c| c.literals().to_vec()).collect();
        assert_eq!(got, vec![vec![lit(1), lit(2)], vec![lit(-1), lit(-2)]]);
    }
}
