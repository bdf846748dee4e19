//! Expression-tree genotype.
//!
//! Programs are stored as a flat prefix (Polish) sequence of nodes. Every
//! function node is binary, so a subtree is always a contiguous slice and
//! subtree swaps reduce to slice splicing.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Intermediate values are clamped to `[-VALUE_BOUND, VALUE_BOUND]`.
pub const VALUE_BOUND: f64 = 1e12;

/// Denominators with magnitude at or below this make `%` return 1.
pub const PROTECTED_DIV_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Add,
    Sub,
    Mul,
    /// Protected division.
    Div,
    /// Feature column, 0-based.
    Var(u32),
    /// Ephemeral random constant.
    Const(f64),
}

impl Node {
    pub const FUNCTIONS: [Node; 4] = [Node::Add, Node::Sub, Node::Mul, Node::Div];

    #[inline]
    pub fn arity(self) -> usize {
        match self {
            Node::Add | Node::Sub | Node::Mul | Node::Div => 2,
            Node::Var(_) | Node::Const(_) => 0,
        }
    }

    #[inline]
    pub fn is_terminal(self) -> bool {
        self.arity() == 0
    }

    fn symbol(self) -> Option<&'static str> {
        match self {
            Node::Add => Some("+"),
            Node::Sub => Some("-"),
            Node::Mul => Some("*"),
            Node::Div => Some("%"),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Node::Add => a + b,
            Node::Sub => a - b,
            Node::Mul => a * b,
            Node::Div => protected_div(a, b),
            Node::Var(_) | Node::Const(_) => unreachable!("terminal has no operands"),
        };
        clamp(v)
    }
}

#[inline]
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() <= PROTECTED_DIV_EPS {
        1.0
    } else {
        a / b
    }
}

#[inline]
fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-VALUE_BOUND, VALUE_BOUND)
    }
}

/// A GP program: an arithmetic expression over feature columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    nodes: Vec<Node>,
}

impl Program {
    /// Builds a program from prefix-ordered nodes, checking that the
    /// sequence encodes exactly one complete tree.
    pub fn from_prefix(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedProgram("empty node sequence".into()));
        }
        let mut open = 1usize;
        for (i, node) in nodes.iter().enumerate() {
            if open == 0 {
                return Err(Error::MalformedProgram(format!("trailing nodes after position {i}")));
            }
            open = open - 1 + node.arity();
        }
        if open != 0 {
            return Err(Error::MalformedProgram(format!("{open} missing operand(s)")));
        }
        Ok(Self { nodes })
    }

    /// Caller guarantees `nodes` is a complete prefix tree.
    pub(crate) fn from_prefix_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(Self::from_prefix(nodes.clone()).is_ok());
        Self { nodes }
    }

    pub fn var(index: u32) -> Self {
        Self {
            nodes: vec![Node::Var(index)],
        }
    }

    /// Combines two programs under a binary function node.
    pub fn binary(op: Node, left: &Program, right: &Program) -> Self {
        assert_eq!(op.arity(), 2, "binary() needs a function node");
        let mut nodes = Vec::with_capacity(1 + left.len() + right.len());
        nodes.push(op);
        nodes.extend_from_slice(&left.nodes);
        nodes.extend_from_slice(&right.nodes);
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Number of nodes in the tree.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.len()
    }

    /// Depth of the deepest node; a lone terminal has depth 0.
    pub fn depth(&self) -> usize {
        depth_of(&self.nodes)
    }

    /// One past the last index of the subtree rooted at `start`.
    pub fn subtree_end(&self, start: usize) -> usize {
        subtree_end(&self.nodes, start)
    }

    pub fn subtree(&self, start: usize) -> &[Node] {
        &self.nodes[start..self.subtree_end(start)]
    }

    /// Depth of node `index` below the root.
    pub fn depth_at(&self, index: usize) -> usize {
        let mut pending: Vec<usize> = Vec::with_capacity(16);
        let mut depth = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if i == index {
                return depth;
            }
            if node.arity() > 0 {
                pending.push(depth + 1);
                pending.push(depth + 1);
            }
            depth = pending.pop().unwrap_or(0);
        }
        panic!("node index {index} out of range for program of {} nodes", self.len());
    }

    /// Returns a copy with the subtree at `at` replaced by `replacement`.
    pub fn replace_subtree(&self, at: usize, replacement: &[Node]) -> Program {
        let end = self.subtree_end(at);
        let mut nodes = Vec::with_capacity(self.len() - (end - at) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..at]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.nodes[end..]);
        Program::from_prefix_unchecked(nodes)
    }

    /// Indices of function nodes and of terminals, in prefix order.
    pub fn partition_nodes(&self) -> (Vec<usize>, Vec<usize>) {
        let mut internal = Vec::new();
        let mut leaves = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.is_terminal() {
                leaves.push(i);
            } else {
                internal.push(i);
            }
        }
        (internal, leaves)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(i) => Some(*i as usize),
                _ => None,
            })
            .max()
    }

    fn check_features(&self, feature_count: usize) -> Result<()> {
        match self.max_feature() {
            Some(i) if i >= feature_count => Err(Error::MalformedProgram(format!(
                "feature x{i} referenced but only {feature_count} features exist"
            ))),
            _ => Ok(()),
        }
    }

    /// Evaluates the program on one fitness case.
    pub fn evaluate(&self, row: &[f64]) -> Result<f64> {
        self.check_features(row.len())?;
        let mut stack = Vec::with_capacity(16);
        Ok(eval_prefix(&self.nodes, row, &mut stack))
    }

    /// Output vector over every row of `dataset`, in dataset order.
    pub fn semantics(&self, dataset: &Dataset) -> Result<Semantics> {
        if dataset.is_empty() {
            return Err(Error::Usage("semantics of an empty dataset".into()));
        }
        self.check_features(dataset.feature_count())?;
        let mut stack = Vec::with_capacity(16);
        let values: Vec<f64> = dataset
            .rows()
            .map(|row| eval_prefix(&self.nodes, row, &mut stack))
            .collect();
        Ok(Semantics::new(values))
    }
}

fn eval_prefix(nodes: &[Node], row: &[f64], stack: &mut Vec<f64>) -> f64 {
    stack.clear();
    for node in nodes.iter().rev() {
        let v = match *node {
            Node::Var(i) => row[i as usize],
            Node::Const(c) => c,
            op => {
                let a = stack.pop().expect("operand");
                let b = stack.pop().expect("operand");
                op.apply(a, b)
            }
        };
        stack.push(v);
    }
    debug_assert_eq!(stack.len(), 1);
    stack[0]
}

pub(crate) fn subtree_end(nodes: &[Node], start: usize) -> usize {
    let mut open = 1usize;
    let mut i = start;
    while open > 0 {
        open = open - 1 + nodes[i].arity();
        i += 1;
    }
    i
}

pub(crate) fn depth_of(nodes: &[Node]) -> usize {
    let mut pending: Vec<usize> = Vec::with_capacity(16);
    let mut depth = 0;
    let mut max_depth = 0;
    for node in nodes {
        max_depth = max_depth.max(depth);
        if node.arity() > 0 {
            pending.push(depth + 1);
            pending.push(depth + 1);
        }
        depth = pending.pop().unwrap_or(0);
    }
    max_depth
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Closing parens owed after each completed subtree.
        let mut remaining: Vec<usize> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match node {
                Node::Var(v) => write!(f, "x{v}")?,
                Node::Const(c) => write!(f, "{c:?}")?,
                op => {
                    write!(f, "({}", op.symbol().unwrap())?;
                    remaining.push(op.arity());
                    continue;
                }
            }
            while let Some(top) = remaining.last_mut() {
                *top -= 1;
                if *top > 0 {
                    break;
                }
                remaining.pop();
                f.write_str(")")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Program {
    type Err = Error;

    /// Parses the prefix s-expression form, e.g. `(+ (* x0 x1) (% x2 x3))`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |offset: usize, reason: &str| Error::Parse {
            input: s.to_string(),
            offset,
            reason: reason.to_string(),
        };
        let mut nodes = Vec::new();
        // Operand slots still to fill for each open paren.
        let mut open: Vec<usize> = Vec::new();
        let bytes = s.as_bytes();
        let mut i = 0;
        let mut expect_op = false;
        let mut finished = false;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            if finished {
                return Err(err(i, "trailing input after complete expression"));
            }
            if c == b'(' {
                if expect_op {
                    return Err(err(i, "expected operator"));
                }
                expect_op = true;
                i += 1;
                continue;
            }
            if c == b')' {
                match open.pop() {
                    Some(0) => {}
                    Some(_) => return Err(err(i, "too few operands")),
                    None => return Err(err(i, "unbalanced ')'")),
                }
                i += 1;
                if open.is_empty() {
                    finished = true;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                i += 1;
            }
            let token = &s[start..i];
            if expect_op {
                let op = match token {
                    "+" => Node::Add,
                    "-" => Node::Sub,
                    "*" => Node::Mul,
                    "%" => Node::Div,
                    _ => return Err(err(start, "unknown operator")),
                };
                if let Some(slot) = open.last_mut() {
                    if *slot == 0 {
                        return Err(err(start, "too many operands"));
                    }
                    *slot -= 1;
                }
                nodes.push(op);
                open.push(op.arity());
                expect_op = false;
                continue;
            }
            let node = if let Some(index) = token.strip_prefix('x') {
                Node::Var(index.parse().map_err(|_| err(start, "bad feature index"))?)
            } else {
                Node::Const(token.parse().map_err(|_| err(start, "bad terminal"))?)
            };
            match open.last_mut() {
                Some(0) => return Err(err(start, "too many operands")),
                Some(slot) => *slot -= 1,
                None => finished = true,
            }
            nodes.push(node);
        }
        if !open.is_empty() || expect_op {
            return Err(err(s.len(), "unexpected end of input"));
        }
        Program::from_prefix(nodes)
    }
}

/// Program outputs over every fitness case, in dataset row order.
///
/// Cheap to clone; the values are shared.
#[derive(Clone, Debug, PartialEq)]
pub struct Semantics(Arc<[f64]>);

impl Semantics {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values.into())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean absolute per-case difference.
    pub fn mean_abs_distance(&self, other: &Semantics) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Usage(format!(
                "semantics length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let total: f64 = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(total / self.len() as f64)
    }
}
