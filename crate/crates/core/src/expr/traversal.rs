use std::fmt;

use serde::{Deserialize, Serialize};

use super::library::{TokenId, TokenLibrary};
use crate::error::{Error, Result};

/// Pre-order (depth-first, left-to-right) token sequence of an expression tree.
///
/// A sequence is complete when its dangling-slot count,
/// `1 + sum(arity(t) - 1)`, first reaches zero at its final token.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Traversal(Vec<TokenId>);

impl Traversal {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Traversal(ids)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn into_ids(self) -> Vec<TokenId> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, id: TokenId) {
        self.0.push(id);
    }

    fn check_ids(&self, lib: &TokenLibrary) -> Result<()> {
        for id in &self.0 {
            lib.get(*id)?;
        }
        Ok(())
    }

    pub fn is_complete(&self, lib: &TokenLibrary) -> Result<bool> {
        self.check_ids(lib)?;
        Ok(is_complete_ids(&self.0, lib))
    }

    /// True when the sequence never closes early; complete traversals count as prefixes.
    pub fn is_valid_prefix(&self, lib: &TokenLibrary) -> Result<bool> {
        self.check_ids(lib)?;
        let mut dangling = 1i64;
        for (k, id) in self.0.iter().enumerate() {
            if dangling == 0 {
                return Ok(false);
            }
            dangling += lib.arity(*id) as i64 - 1;
            if dangling < 0 || (dangling == 0 && k + 1 != self.0.len()) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Parent token of the next slot and its completed left sibling, if any.
    pub fn parent_sibling(
        &self,
        lib: &TokenLibrary,
    ) -> Result<(Option<TokenId>, Option<TokenId>)> {
        self.check_ids(lib)?;
        let mut state = PrefixState::new();
        for id in &self.0 {
            state.push(*id, lib)?;
        }
        if state.is_complete() {
            return Err(Error::AlreadyComplete);
        }
        Ok((state.parent(), state.sibling()))
    }

    /// Space-separated symbols.
    pub fn to_symbols(&self, lib: &TokenLibrary) -> String {
        self.0
            .iter()
            .map(|id| lib.token(*id).symbol.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl From<Vec<TokenId>> for Traversal {
    fn from(ids: Vec<TokenId>) -> Self {
        Traversal(ids)
    }
}

impl fmt::Display for Traversal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

pub(crate) fn is_complete_ids(ids: &[TokenId], lib: &TokenLibrary) -> bool {
    if ids.is_empty() {
        return false;
    }
    let mut dangling = 1i64;
    for (k, id) in ids.iter().enumerate() {
        dangling += lib.arity(*id) as i64 - 1;
        if dangling == 0 {
            return k + 1 == ids.len();
        }
    }
    false
}

/// Exclusive end of the subtree rooted at `start` in a complete (or valid) traversal.
pub fn subtree_end(ids: &[TokenId], start: usize, lib: &TokenLibrary) -> usize {
    let mut need = 1usize;
    let mut i = start;
    while need > 0 && i < ids.len() {
        need = need + lib.arity(ids[i]) - 1;
        i += 1;
    }
    i
}

#[derive(Clone, Copy, Debug)]
struct OpenNode {
    id: TokenId,
    arity: u8,
    started: u8,
    first_child: Option<TokenId>,
}

/// Incremental tree context of a growing prefix: open ancestors, the parent and
/// sibling of the next slot, and the dangling-slot count.
#[derive(Clone, Debug, Default)]
pub struct PrefixState {
    stack: Vec<OpenNode>,
    ancestors: Vec<TokenId>,
    len: usize,
    dangling: usize,
}

impl PrefixState {
    pub fn new() -> Self {
        PrefixState {
            stack: Vec::new(),
            ancestors: Vec::new(),
            len: 0,
            dangling: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unfilled child slots; zero once the expression is complete.
    pub fn dangling(&self) -> usize {
        self.dangling
    }

    pub fn is_complete(&self) -> bool {
        self.dangling == 0
    }

    pub fn parent(&self) -> Option<TokenId> {
        self.stack.last().map(|n| n.id)
    }

    /// Left sibling of the next slot: only defined when the parent is binary
    /// and its first subtree is finished.
    pub fn sibling(&self) -> Option<TokenId> {
        self.stack
            .last()
            .filter(|n| n.arity == 2 && n.started == 1)
            .and_then(|n| n.first_child)
    }

    /// Every node above the next slot, root first.
    pub fn ancestors(&self) -> &[TokenId] {
        &self.ancestors
    }

    pub fn push(&mut self, id: TokenId, lib: &TokenLibrary) -> Result<()> {
        if self.dangling == 0 {
            return Err(Error::AlreadyComplete);
        }
        let arity = lib.get(id)?.arity();
        if let Some(top) = self.stack.last_mut() {
            top.started += 1;
            if top.started == 1 {
                top.first_child = Some(id);
            }
        }
        self.len += 1;
        self.dangling = self.dangling + arity - 1;
        if arity > 0 {
            self.stack.push(OpenNode {
                id,
                arity: arity as u8,
                started: 0,
                first_child: None,
            });
            self.ancestors.push(id);
        }
        while let Some(top) = self.stack.last() {
            if top.started == top.arity {
                self.stack.pop();
                self.ancestors.pop();
            } else {
                break;
            }
        }
        Ok(())
    }
}
