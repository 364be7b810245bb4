//! Token library, pre-order traversals, expression trees, evaluation and
//! symbolic equivalence.

mod equiv;
mod eval;
mod library;
mod traversal;
mod tree;

pub use equiv::{
    canonically_equal, halton_points, numerically_equal, symbolically_equivalent, Equivalence,
    FOLD_TOLERANCE, PROBE_POINTS, PROBE_TOLERANCE,
};
pub use eval::{evaluate_kinds, evaluate_traversal, variance, Dataset, Evaluation};
pub use library::{BinaryOp, Kind, Token, TokenId, TokenLibrary, UnaryOp};
pub use traversal::{subtree_end, PrefixState, Traversal};
pub use tree::{ExpressionTree, Node};

