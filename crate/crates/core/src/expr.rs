//! Rate expressions: a small arithmetic language over parameters,
//! compartment counts and the population size.
//!
//! Grammar (standard precedence, left associative):
//!
//! ```text
//! Expr   := Term (('+' | '-') Term)*
//! Term   := Factor (('*' | '/') Factor)*
//! Factor := number | ident | 'W_' ident | 'N' | '(' Expr ')'
//! ```
//!
//! `W_X` refers to the count of compartment `X`, `N` to the population
//! size, and every other identifier to a model parameter.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    #[inline]
    fn apply(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            BinOp::Add => lhs + rhs,
            BinOp::Sub => lhs - rhs,
            BinOp::Mul => lhs * rhs,
            BinOp::Div => lhs / rhs,
        }
    }
}

/// Expression tree with identifiers resolved to indices of the owning model.
#[derive(Debug, Clone, PartialEq)]
pub enum RateExpr {
    Num(f64),
    /// Index into the model's parameter list.
    Param(usize),
    /// Index into the model's compartment list.
    Count(usize),
    /// Population size `N`.
    PopSize,
    Binary(BinOp, Box<RateExpr>, Box<RateExpr>),
}

impl RateExpr {
    pub fn num(v: f64) -> Self {
        RateExpr::Num(v)
    }

    pub fn param(index: usize) -> Self {
        RateExpr::Param(index)
    }

    pub fn count(index: usize) -> Self {
        RateExpr::Count(index)
    }

    pub fn binary(op: BinOp, lhs: RateExpr, rhs: RateExpr) -> Self {
        RateExpr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(self, rhs: RateExpr) -> Self {
        Self::binary(BinOp::Add, self, rhs)
    }

    pub fn sub(self, rhs: RateExpr) -> Self {
        Self::binary(BinOp::Sub, self, rhs)
    }

    pub fn mul(self, rhs: RateExpr) -> Self {
        Self::binary(BinOp::Mul, self, rhs)
    }

    pub fn div(self, rhs: RateExpr) -> Self {
        Self::binary(BinOp::Div, self, rhs)
    }

    /// Direct evaluation. Used for one-off evaluations and as the reference
    /// for [`BoundRate`]; simulators go through `bind`.
    pub fn eval(&self, params: &[f64], counts: &[u32], population: f64) -> f64 {
        match self {
            RateExpr::Num(v) => *v,
            RateExpr::Param(i) => params[*i],
            RateExpr::Count(i) => f64::from(counts[*i]),
            RateExpr::PopSize => population,
            RateExpr::Binary(op, l, r) => op.apply(
                l.eval(params, counts, population),
                r.eval(params, counts, population),
            ),
        }
    }

    /// Calls `f` on every leaf.
    pub fn visit_leaves(&self, f: &mut impl FnMut(&RateExpr)) {
        match self {
            RateExpr::Binary(_, l, r) => {
                l.visit_leaves(f);
                r.visit_leaves(f);
            }
            leaf => f(leaf),
        }
    }

    /// Substitutes parameters and `N`, folding every state-independent
    /// subtree into a constant.
    pub fn bind(&self, params: &[f64], population: f64) -> BoundRate {
        let folded = fold(self, params, population);
        let mut ops = Vec::new();
        let mut depth = 0;
        let mut max_depth = 0;
        emit(&folded, &mut ops, &mut depth, &mut max_depth);
        BoundRate {
            shape: Shape::of(&folded),
            ops,
            max_depth,
        }
    }

    /// Renders the expression in the grammar accepted by [`parse_rate_expr`].
    pub fn display<'a>(&'a self, symbols: &'a Symbols<'a>) -> DisplayExpr<'a> {
        DisplayExpr { expr: self, symbols }
    }
}

enum Folded {
    Const(f64),
    Count(usize),
    Binary(BinOp, Box<Folded>, Box<Folded>),
}

fn fold(expr: &RateExpr, params: &[f64], population: f64) -> Folded {
    match expr {
        RateExpr::Num(v) => Folded::Const(*v),
        RateExpr::Param(i) => Folded::Const(params[*i]),
        RateExpr::PopSize => Folded::Const(population),
        RateExpr::Count(i) => Folded::Count(*i),
        RateExpr::Binary(op, l, r) => {
            let l = fold(l, params, population);
            let r = fold(r, params, population);
            match (&l, &r) {
                (Folded::Const(a), Folded::Const(b)) => Folded::Const(op.apply(*a, *b)),
                _ => Folded::Binary(*op, Box::new(l), Box::new(r)),
            }
        }
    }
}

fn emit(node: &Folded, ops: &mut Vec<Op>, depth: &mut usize, max_depth: &mut usize) {
    match node {
        Folded::Const(v) => {
            ops.push(Op::Const(*v));
            *depth += 1;
        }
        Folded::Count(i) => {
            ops.push(Op::Count(*i));
            *depth += 1;
        }
        Folded::Binary(op, l, r) => {
            emit(l, ops, depth, max_depth);
            emit(r, ops, depth, max_depth);
            ops.push(Op::Bin(*op));
            *depth -= 1;
        }
    }
    *max_depth = (*max_depth).max(*depth);
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Count(usize),
    Bin(BinOp),
}

const INLINE_STACK: usize = 16;

/// Common mass-action forms evaluated without the postfix interpreter.
/// Each variant performs the same floating-point operations in the same
/// order as the general path, so results are bitwise identical.
#[derive(Debug, Clone, Copy)]
enum Shape {
    General,
    Const(f64),
    /// `c * W_i`
    Linear(f64, usize),
    /// `c * W_i * W_j`
    Bilinear(f64, usize, usize),
    /// `c * W_i * (W_j + W_k)`
    LinearTimesSum(f64, usize, usize, usize),
}

impl Shape {
    fn of(node: &Folded) -> Shape {
        use Folded::{Binary, Const, Count};
        match node {
            Const(c) => Shape::Const(*c),
            Binary(BinOp::Mul, l, r) => match (l.as_ref(), r.as_ref()) {
                // Multiplication is commutative in IEEE arithmetic.
                (Const(c), Count(i)) | (Count(i), Const(c)) => Shape::Linear(*c, *i),
                (Binary(BinOp::Mul, a, b), rhs) => match (a.as_ref(), b.as_ref(), rhs) {
                    (Const(c), Count(i), Count(j)) => Shape::Bilinear(*c, *i, *j),
                    (Const(c), Count(i), Binary(BinOp::Add, x, y)) => match (x.as_ref(), y.as_ref()) {
                        (Count(j), Count(k)) => Shape::LinearTimesSum(*c, *i, *j, *k),
                        _ => Shape::General,
                    },
                    _ => Shape::General,
                },
                _ => Shape::General,
            },
            _ => Shape::General,
        }
    }
}

/// A rate expression with parameters substituted, compiled to postfix.
#[derive(Debug, Clone)]
pub struct BoundRate {
    shape: Shape,
    ops: Vec<Op>,
    max_depth: usize,
}

impl BoundRate {
    #[inline]
    pub fn eval(&self, counts: &[u32]) -> f64 {
        let w = |i: usize| f64::from(counts[i]);
        match self.shape {
            Shape::Const(c) => return c,
            Shape::Linear(c, i) => return c * w(i),
            Shape::Bilinear(c, i, j) => return c * w(i) * w(j),
            Shape::LinearTimesSum(c, i, j, k) => return c * w(i) * (w(j) + w(k)),
            Shape::General => {}
        }
        if self.max_depth <= INLINE_STACK {
            let mut stack = [0.0f64; INLINE_STACK];
            self.run(counts, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.max_depth];
            self.run(counts, &mut stack)
        }
    }

    #[inline]
    fn run(&self, counts: &[u32], stack: &mut [f64]) -> f64 {
        let mut top = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[top] = v;
                    top += 1;
                }
                Op::Count(i) => {
                    stack[top] = f64::from(counts[i]);
                    top += 1;
                }
                Op::Bin(b) => {
                    top -= 1;
                    stack[top - 1] = b.apply(stack[top - 1], stack[top]);
                }
            }
        }
        stack[0]
    }
}

/// Names visible to the parser, in model index order.
#[derive(Debug, Clone, Copy)]
pub struct Symbols<'a> {
    pub parameters: &'a [String],
    pub compartments: &'a [String],
}

pub struct DisplayExpr<'a> {
    expr: &'a RateExpr,
    symbols: &'a Symbols<'a>,
}

impl DisplayExpr<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, e: &RateExpr) -> fmt::Result {
        match e {
            RateExpr::Num(v) => write!(f, "{v}"),
            RateExpr::Param(i) => f.write_str(&self.symbols.parameters[*i]),
            RateExpr::Count(i) => write!(f, "W_{}", self.symbols.compartments[*i]),
            RateExpr::PopSize => f.write_str("N"),
            RateExpr::Binary(op, l, r) => {
                let prec = op.precedence();
                let wrap_l = matches!(**l, RateExpr::Binary(lop, ..) if lop.precedence() < prec);
                // Left associativity: an equal-precedence right child needs parentheses.
                let wrap_r = matches!(**r, RateExpr::Binary(rop, ..) if rop.precedence() <= prec);
                self.write_wrapped(f, l, wrap_l)?;
                write!(f, " {} ", op.symbol())?;
                self.write_wrapped(f, r, wrap_r)
            }
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, e: &RateExpr, wrap: bool) -> fmt::Result {
        if wrap {
            f.write_str("(")?;
            self.write(f, e)?;
            f.write_str(")")
        } else {
            self.write(f, e)
        }
    }
}

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: unexpected {found}, expected {expected}")]
    Syntax {
        position: usize,
        found: String,
        expected: &'static str,
    },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown compartment `{0}`")]
    UnknownCompartment(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number `{v}`"),
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Plus => f.write_str("token '+'"),
            Token::Minus => f.write_str("token '-'"),
            Token::Star => f.write_str("token '*'"),
            Token::Slash => f.write_str("token '/'"),
            Token::LParen => f.write_str("token '('"),
            Token::RParen => f.write_str("token ')'"),
            Token::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    position: start,
                    found: format!("malformed number `{text}`"),
                    expected: "a number",
                })?;
                out.push((start, Token::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    position: start,
                    found: format!("character `{ch}`"),
                    expected: "an expression",
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Token::End));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    symbols: &'a Symbols<'a>,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn error(&self, expected: &'static str) -> ExprError {
        let (position, tok) = &self.tokens[self.pos];
        ExprError::Syntax {
            position: *position,
            found: tok.to_string(),
            expected,
        }
    }

    fn expr(&mut self) -> Result<RateExpr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = RateExpr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<RateExpr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = RateExpr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<RateExpr, ExprError> {
        match self.peek().clone() {
            Token::Num(v) => {
                self.pos += 1;
                Ok(RateExpr::Num(v))
            }
            Token::Ident(name) => {
                self.pos += 1;
                self.resolve(&name)
            }
            Token::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                if *self.peek() != Token::RParen {
                    return Err(self.error("')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(self.error("a number, identifier or '('")),
        }
    }

    fn resolve(&self, name: &str) -> Result<RateExpr, ExprError> {
        if name == "N" {
            return Ok(RateExpr::PopSize);
        }
        if let Some(comp) = name.strip_prefix("W_") {
            return self
                .symbols
                .compartments
                .iter()
                .position(|c| c == comp)
                .map(RateExpr::Count)
                .ok_or_else(|| ExprError::UnknownCompartment(comp.to_string()));
        }
        self.symbols
            .parameters
            .iter()
            .position(|p| p == name)
            .map(RateExpr::Param)
            .ok_or_else(|| ExprError::UnknownParameter(name.to_string()))
    }
}

/// Parses `src` and resolves its identifiers against `symbols`.
pub fn parse_rate_expr(src: &str, symbols: &Symbols<'_>) -> Result<RateExpr, ExprError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        symbols,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(parser.error("an operator or end of input"));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn seiarhd_symbols() -> (Vec<String>, Vec<String>) {
        (
            names(&[
                "beta", "gamma_E", "gamma_A", "gamma_I", "gamma_H", "p_EA", "p_IH", "p_ID", "p_HD",
            ]),
            names(&["S", "E", "A", "I", "H", "R", "D"]),
        )
    }

    #[test]
    fn infection_rate_tree() {
        let (p, c) = seiarhd_symbols();
        let syms = Symbols {
            parameters: &p,
            compartments: &c,
        };
        let e = parse_rate_expr("beta/N * W_S * (W_A + W_I)", &syms).unwrap();
        let expected = RateExpr::param(0)
            .div(RateExpr::PopSize)
            .mul(RateExpr::count(0))
            .mul(RateExpr::count(2).add(RateExpr::count(3)));
        assert_eq!(e, expected);
        let counts = [2000, 5, 3, 7, 0, 0, 0];
        let params = [2.0, 0., 0., 0., 0., 0., 0., 0., 0.];
        assert!((e.eval(&params, &counts, 2010.0) - 2.0 / 2010.0 * 2000.0 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_of_symptomatic_tree() {
        let (p, c) = seiarhd_symbols();
        let syms = Symbols {
            parameters: &p,
            compartments: &c,
        };
        let e = parse_rate_expr("gamma_I * (1 - p_IH - p_ID) * W_I", &syms).unwrap();
        let expected = RateExpr::param(3)
            .mul(RateExpr::num(1.0).sub(RateExpr::param(6)).sub(RateExpr::param(7)))
            .mul(RateExpr::count(3));
        assert_eq!(e, expected);
    }

    #[test]
    fn syntax_error_points_at_operator() {
        let syms = Symbols {
            parameters: &[],
            compartments: &[],
        };
        match parse_rate_expr("2 + * 3", &syms) {
            Err(ExprError::Syntax {
                position, found, ..
            }) => {
                assert_eq!(position, 4);
                assert!(found.contains('*'), "{found}");
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifiers_are_named() {
        let (p, c) = seiarhd_symbols();
        let syms = Symbols {
            parameters: &p,
            compartments: &c,
        };
        assert_eq!(
            parse_rate_expr("delta * W_S", &syms),
            Err(ExprError::UnknownParameter("delta".into()))
        );
        assert_eq!(
            parse_rate_expr("beta * W_Q", &syms),
            Err(ExprError::UnknownCompartment("Q".into()))
        );
    }

    #[test]
    fn trailing_tokens_and_unbalanced_parens() {
        let syms = Symbols {
            parameters: &[],
            compartments: &[],
        };
        assert!(parse_rate_expr("(1 + 2", &syms).is_err());
        assert!(parse_rate_expr("1 + 2)", &syms).is_err());
        assert!(parse_rate_expr("", &syms).is_err());
        assert!(parse_rate_expr("1 $ 2", &syms).is_err());
        assert!(parse_rate_expr("1..2", &syms).is_err());
    }

    #[test]
    fn left_associative_subtraction_and_division() {
        let syms = Symbols {
            parameters: &[],
            compartments: &[],
        };
        let e = parse_rate_expr("8 - 4 - 2", &syms).unwrap();
        assert_eq!(e.eval(&[], &[], 1.0), 2.0);
        let e = parse_rate_expr("8 / 4 / 2", &syms).unwrap();
        assert_eq!(e.eval(&[], &[], 1.0), 1.0);
        let e = parse_rate_expr("1 + 2 * 3", &syms).unwrap();
        assert_eq!(e.eval(&[], &[], 1.0), 7.0);
        let e = parse_rate_expr("1.5e1 * 2E-1", &syms).unwrap();
        assert!((e.eval(&[], &[], 1.0) - 3.0).abs() < 1e-12);
    }

    fn arb_expr() -> impl Strategy<Value = RateExpr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(RateExpr::Num),
            (0usize..3).prop_map(RateExpr::Param),
            (0usize..4).prop_map(RateExpr::Count),
            Just(RateExpr::PopSize),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div)
                ],
                inner.clone(),
                inner,
            )
                .prop_map(|(op, l, r)| RateExpr::binary(op, l, r))
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let p = names(&["a", "b_1", "gamma"]);
            let c = names(&["S", "I", "R", "X2"]);
            let syms = Symbols { parameters: &p, compartments: &c };
            let text = e.display(&syms).to_string();
            let back = parse_rate_expr(&text, &syms).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn bound_matches_direct_eval(
            e in arb_expr(),
            params in proptest::collection::vec(0.0f64..10.0, 3),
            counts in proptest::collection::vec(0u32..1000, 4),
        ) {
            let direct = e.eval(&params, &counts, 1000.0);
            let bound = e.bind(&params, 1000.0).eval(&counts);
            prop_assert!(
                direct.to_bits() == bound.to_bits() || (direct.is_nan() && bound.is_nan()),
                "{direct} vs {bound}"
            );
        }

        #[test]
        fn random_token_streams_never_panic(
            toks in proptest::collection::vec(
                prop_oneof![
                    Just("+"), Just("-"), Just("*"), Just("/"), Just("("), Just(")"),
                    Just("N"), Just("W_S"), Just("W_Z"), Just("a"), Just("zz"),
                    Just("1"), Just("2.5"), Just("1e"), Just("."), Just(" "), Just("#"),
                ],
                0..20,
            )
        ) {
            let p = names(&["a"]);
            let c = names(&["S"]);
            let syms = Symbols { parameters: &p, compartments: &c };
            let _ = parse_rate_expr(&toks.concat(), &syms);
        }
    }
}
