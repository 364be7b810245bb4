use std::fmt;

use super::eval::{evaluate_kinds, Evaluation};
use super::library::{format_number, Kind, TokenId, TokenLibrary};
use super::traversal::Traversal;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: TokenId,
    pub kind: Kind,
    pub children: Vec<Node>,
}

impl Node {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }

    fn collect_preorder(&self, out: &mut Vec<Node>) {
        out.push(Node {
            id: self.id,
            kind: self.kind,
            children: Vec::new(),
        });
        for c in &self.children {
            c.collect_preorder(out);
        }
    }
}

/// Expression tree plus the values of its constant placeholders (pre-order).
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionTree {
    pub root: Node,
    pub constants: Vec<f64>,
}

impl ExpressionTree {
    /// Rebuilds the tree from a complete traversal.
    pub fn from_traversal(t: &Traversal, lib: &TokenLibrary) -> Result<Self> {
        if !t.is_complete(lib)? {
            return Err(Error::Incomplete);
        }
        let mut pos = 0;
        let root = build(t.ids(), &mut pos, lib);
        debug_assert_eq!(pos, t.len());
        Ok(ExpressionTree {
            root,
            constants: Vec::new(),
        })
    }

    pub fn with_constants(mut self, constants: Vec<f64>) -> Self {
        self.constants = constants;
        self
    }

    pub fn to_traversal(&self) -> Traversal {
        let mut ids = Vec::with_capacity(self.root.size());
        push_ids(&self.root, &mut ids);
        Traversal::new(ids)
    }

    pub fn kinds(&self) -> Vec<Kind> {
        let mut nodes = Vec::new();
        self.root.collect_preorder(&mut nodes);
        nodes.into_iter().map(|n| n.kind).collect()
    }

    pub fn const_count(&self) -> usize {
        self.kinds().iter().filter(|k| matches!(k, Kind::Const)).count()
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    /// Element-wise evaluation over column-major inputs.
    ///
    /// Unfilled placeholders evaluate as NaN, which yields `Invalid`.
    pub fn evaluate(&self, columns: &[Vec<f64>]) -> Evaluation {
        let kinds = self.kinds();
        let k = kinds.iter().filter(|k| matches!(k, Kind::Const)).count();
        if self.constants.len() < k {
            let mut c = self.constants.clone();
            c.resize(k, f64::NAN);
            return evaluate_kinds(&kinds, &c, columns);
        }
        evaluate_kinds(&kinds, &self.constants, columns)
    }

    /// Fully parenthesized infix rendering; functions as `name(arg)`.
    pub fn infix(&self) -> String {
        let mut next_const = 0;
        render(&self.root, &self.constants, &mut next_const)
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.infix())
    }
}

fn build(ids: &[TokenId], pos: &mut usize, lib: &TokenLibrary) -> Node {
    let id = ids[*pos];
    *pos += 1;
    let kind = lib.kind(id);
    let children = (0..kind.arity()).map(|_| build(ids, pos, lib)).collect();
    Node { id, kind, children }
}

fn push_ids(node: &Node, out: &mut Vec<TokenId>) {
    out.push(node.id);
    for c in &node.children {
        push_ids(c, out);
    }
}

fn render(node: &Node, constants: &[f64], next_const: &mut usize) -> String {
    match node.kind {
        Kind::Binary(op) => {
            let a = render(&node.children[0], constants, next_const);
            let b = render(&node.children[1], constants, next_const);
            format!("({a} {} {b})", op.infix())
        }
        Kind::Unary(op) => {
            let a = render(&node.children[0], constants, next_const);
            format!("{}({a})", op.name())
        }
        Kind::Variable(i) => format!("x{}", i + 1),
        Kind::Literal(v) => format_number(v),
        Kind::Const => {
            let s = match constants.get(*next_const) {
                Some(v) => format!("{v}"),
                None => "const".to_string(),
            };
            *next_const += 1;
            s
        }
    }
}
