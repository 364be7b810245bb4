use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a token inside its [`TokenLibrary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u16);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Square,
    Neg,
}

impl BinaryOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Pow => "pow",
        }
    }

    pub fn infix(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

impl UnaryOp {
    /// Plain (unprotected) operators: domain errors surface as NaN/Inf.
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => a.ln(),
            UnaryOp::Sqrt => a.sqrt(),
            UnaryOp::Square => a * a,
            UnaryOp::Neg => -a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Square => "n2",
            UnaryOp::Neg => "neg",
        }
    }

    pub fn is_trig(self) -> bool {
        matches!(self, UnaryOp::Sin | UnaryOp::Cos)
    }

    /// The operator whose direct application to this one's output is an identity.
    pub fn inverse(self) -> Option<UnaryOp> {
        match self {
            UnaryOp::Exp => Some(UnaryOp::Log),
            UnaryOp::Log => Some(UnaryOp::Exp),
            UnaryOp::Sqrt => Some(UnaryOp::Square),
            UnaryOp::Square => Some(UnaryOp::Sqrt),
            UnaryOp::Neg => Some(UnaryOp::Neg),
            UnaryOp::Sin | UnaryOp::Cos => None,
        }
    }
}

/// What a token does when evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Binary(BinaryOp),
    Unary(UnaryOp),
    /// Input column, zero-based.
    Variable(usize),
    Literal(f64),
    /// Placeholder whose value is fitted against the data.
    Const,
}

impl Kind {
    #[inline]
    pub fn arity(self) -> usize {
        match self {
            Kind::Binary(_) => 2,
            Kind::Unary(_) => 1,
            Kind::Variable(_) | Kind::Literal(_) | Kind::Const => 0,
        }
    }

    /// Canonical library symbol for this kind.
    pub fn symbol(self) -> String {
        match self {
            Kind::Binary(op) => op.name().to_string(),
            Kind::Unary(op) => op.name().to_string(),
            Kind::Variable(i) => format!("x{}", i + 1),
            Kind::Literal(v) => format_number(v),
            Kind::Const => "const".to_string(),
        }
    }

    /// Parses a library symbol: operator names, `x1..xd`, `const`, or a numeric literal.
    pub fn parse(symbol: &str) -> Result<Kind> {
        let kind = match symbol {
            "add" => Kind::Binary(BinaryOp::Add),
            "sub" => Kind::Binary(BinaryOp::Sub),
            "mul" => Kind::Binary(BinaryOp::Mul),
            "div" => Kind::Binary(BinaryOp::Div),
            "pow" => Kind::Binary(BinaryOp::Pow),
            "sin" => Kind::Unary(UnaryOp::Sin),
            "cos" => Kind::Unary(UnaryOp::Cos),
            "exp" => Kind::Unary(UnaryOp::Exp),
            "log" => Kind::Unary(UnaryOp::Log),
            "sqrt" => Kind::Unary(UnaryOp::Sqrt),
            "n2" => Kind::Unary(UnaryOp::Square),
            "neg" => Kind::Unary(UnaryOp::Neg),
            "const" => Kind::Const,
            s if s.starts_with('x') && s.len() > 1 => {
                let n: usize = s[1..]
                    .parse()
                    .map_err(|_| Error::UnknownSymbol(symbol.to_string()))?;
                if n == 0 {
                    return Err(Error::UnknownSymbol(symbol.to_string()));
                }
                Kind::Variable(n - 1)
            }
            s => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Kind::Literal(v),
                _ => return Err(Error::UnknownSymbol(symbol.to_string())),
            },
        };
        Ok(kind)
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{:.1}", v)
    } else {
        format!("{}", v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub id: TokenId,
    pub symbol: String,
    pub kind: Kind,
}

impl Token {
    #[inline]
    pub fn arity(&self) -> usize {
        self.kind.arity()
    }
}

/// Ordered alphabet of tokens available to the search.
#[derive(Clone, Debug)]
pub struct TokenLibrary {
    tokens: Vec<Token>,
    variable_count: usize,
    by_symbol: HashMap<String, TokenId>,
    arities: Vec<usize>,
}

impl TokenLibrary {
    pub fn new(kinds: &[Kind]) -> Result<Self> {
        if kinds.len() > u16::MAX as usize {
            return Err(Error::Library("too many tokens".into()));
        }
        let mut tokens = Vec::with_capacity(kinds.len());
        let mut by_symbol = HashMap::new();
        for (i, &kind) in kinds.iter().enumerate() {
            let symbol = kind.symbol();
            let id = TokenId(i as u16);
            if by_symbol.insert(symbol.clone(), id).is_some() {
                return Err(Error::Library(format!("duplicate symbol `{symbol}`")));
            }
            tokens.push(Token { id, symbol, kind });
        }
        if !tokens.iter().any(|t| t.arity() == 0) {
            return Err(Error::Library(
                "library needs at least one terminal token".into(),
            ));
        }
        let variable_count = tokens
            .iter()
            .filter_map(|t| match t.kind {
                Kind::Variable(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        for i in 0..variable_count {
            if !by_symbol.contains_key(&Kind::Variable(i).symbol()) {
                return Err(Error::Library(format!(
                    "variable x{} missing (variables must be x1..x{variable_count})",
                    i + 1
                )));
            }
        }
        let arities = tokens.iter().map(Token::arity).collect();
        Ok(TokenLibrary {
            tokens,
            variable_count,
            by_symbol,
            arities,
        })
    }

    pub fn from_symbols<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        let kinds = symbols
            .iter()
            .map(|s| Kind::parse(s.as_ref().trim()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&kinds)
    }

    /// `add sub mul div sin cos exp log` plus `x1..x{n_vars}`.
    pub fn koza(n_vars: usize) -> Self {
        let mut names: Vec<String> = ["add", "sub", "mul", "div", "sin", "cos", "exp", "log"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend((1..=n_vars).map(|i| format!("x{i}")));
        Self::from_symbols(&names).expect("koza library is well formed")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn variable_count(&self) -> usize {
        self.variable_count
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn get(&self, id: TokenId) -> Result<&Token> {
        self.tokens
            .get(id.index())
            .ok_or(Error::UnknownToken(id.index()))
    }

    #[inline]
    pub fn token(&self, id: TokenId) -> &Token {
        &self.tokens[id.index()]
    }

    #[inline]
    pub fn kind(&self, id: TokenId) -> Kind {
        self.tokens[id.index()].kind
    }

    #[inline]
    pub fn arity(&self, id: TokenId) -> usize {
        self.arities[id.index()]
    }

    pub fn id(&self, symbol: &str) -> Result<TokenId> {
        if let Some(&id) = self.by_symbol.get(symbol) {
            return Ok(id);
        }
        // Accept non-canonical spellings such as `2` for `2.0`.
        Kind::parse(symbol)
            .ok()
            .and_then(|k| self.by_symbol.get(&k.symbol()).copied())
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    pub fn id_of_kind(&self, kind: Kind) -> Option<TokenId> {
        self.tokens.iter().find(|t| t.kind == kind).map(|t| t.id)
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.tokens.iter().map(|t| t.id)
    }

    pub fn symbols(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.symbol.clone()).collect()
    }

    /// Parses a whitespace-separated pre-order listing of symbols.
    pub fn parse_traversal(&self, text: &str) -> Result<crate::expr::Traversal> {
        text.split_whitespace()
            .map(|s| self.id(s))
            .collect::<Result<Vec<_>>>()
            .map(crate::expr::Traversal::new)
    }

    pub fn is_const(&self, id: TokenId) -> bool {
        matches!(self.kind(id), Kind::Const)
    }

    pub fn is_trig(&self, id: TokenId) -> bool {
        matches!(self.kind(id), Kind::Unary(op) if op.is_trig())
    }

    pub fn has_const(&self) -> bool {
        self.tokens.iter().any(|t| t.kind == Kind::Const)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_match_positions() {
        let lib = TokenLibrary::koza(2);
        for (i, t) in lib.tokens().iter().enumerate() {
            assert_eq!(t.id.index(), i);
        }
        assert_eq!(lib.variable_count(), 2);
        assert_eq!(lib.arity(lib.id("add").unwrap()), 2);
        assert_eq!(lib.arity(lib.id("sin").unwrap()), 1);
        assert_eq!(lib.arity(lib.id("x2").unwrap()), 0);
    }

    #[test]
    fn rejects_bad_libraries() {
        assert!(matches!(
            TokenLibrary::from_symbols(&["add", "sin"]),
            Err(Error::Library(_))
        ));
        assert!(matches!(
            TokenLibrary::from_symbols(&["add", "x1", "x1"]),
            Err(Error::Library(_))
        ));
        assert!(matches!(
            TokenLibrary::from_symbols(&["add", "x2"]),
            Err(Error::Library(_))
        ));
        assert!(matches!(
            TokenLibrary::from_symbols(&["add", "foo"]),
            Err(Error::UnknownSymbol(_))
        ));
    }

    #[test]
    fn literals_parse() {
        let lib = TokenLibrary::from_symbols(&["mul", "x1", "0.5", "2"]).unwrap();
        assert_eq!(lib.kind(lib.id("0.5").unwrap()), Kind::Literal(0.5));
        assert_eq!(lib.kind(lib.id("2.0").unwrap()), Kind::Literal(2.0));
    }
}
