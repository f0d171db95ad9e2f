//! A small language of closed-form scalar expressions.
//!
//! Expressions are immutable trees over a declared, ordered list of variable
//! names. The operation set is closed under differentiation: parse once,
//! differentiate symbolically as many times as needed, and evaluate the
//! resulting trees without ever touching text again.
//!
//! Grammar (ASCII, whitespace-insensitive, no implicit multiplication):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right-associative
//! atom   := number | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `^` binds tighter than unary minus, which binds tighter than `*` `/`,
//! which bind tighter than `+` `-`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "sinh" => UnaryOp::Sinh,
            "cosh" => UnaryOp::Cosh,
            "tanh" => UnaryOp::Tanh,
            "atan" => UnaryOp::Atan,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree over scalars of type `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression<F> {
    Constant(F),
    Variable { name: String, index: usize },
    Unary(UnaryOp, Box<Expression<F>>),
    Binary(BinaryOp, Box<Expression<F>>, Box<Expression<F>>),
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let slice = &text[start..i];
                let value: f64 = slice.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{slice}`"),
                })?;
                tokens.push((Token::Number(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// parser

struct Parser<'a, F> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    variables: &'a [&'a str],
    _marker: std::marker::PhantomData<F>,
}

impl<'a, F: Scalar> Parser<'a, F> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.end, |&(_, off)| off)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&token) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expression<F>> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expression::binary(BinaryOp::Add, lhs, rhs);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expression::binary(BinaryOp::Sub, lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression<F>> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expression::binary(BinaryOp::Mul, lhs, rhs);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expression::binary(BinaryOp::Div, lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression<F>> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expression::unary(UnaryOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression<F>> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            // the exponent may itself carry a sign, e.g. x^-2
            let exponent = self.unary()?;
            return Ok(Expression::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression<F>> {
        let offset = self.offset();
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expression::Constant(F::of(v))),
            Some(Token::Ident(name)) => {
                if let Some(op) = UnaryOp::from_name(&name) {
                    self.expect(Token::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "closing `)`")?;
                    Ok(Expression::unary(op, arg))
                } else if let Some(index) =
                    self.variables.iter().position(|&v| v == name)
                {
                    Ok(Expression::Variable { name, index })
                } else {
                    Err(Error::UnknownIdentifier { name, offset })
                }
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(inner)
            }
            Some(_) => Err(Error::Syntax {
                offset,
                message: "expected a number, variable, function call or `(`".into(),
            }),
            None => Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parse `text` against an ordered list of variable names.
///
/// Variable indices in the returned tree follow the order of `variables`,
/// which makes slice-based evaluation possible downstream.
pub fn parse_expression<F: Scalar>(
    text: &str,
    variables: &[&str],
) -> Result<Expression<F>> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        variables,
        _marker: std::marker::PhantomData,
    };
    let e = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(Error::Syntax {
            offset: parser.offset(),
            message: "trailing input".into(),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// evaluation

impl<F: Scalar> Expression<F> {
    fn unary(op: UnaryOp, inner: Expression<F>) -> Expression<F> {
        Expression::Unary(op, Box::new(inner))
    }

    fn binary(op: BinaryOp, lhs: Expression<F>, rhs: Expression<F>) -> Expression<F> {
        Expression::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Evaluate with variables bound by name.
    pub fn evaluate(&self, env: &HashMap<String, F>) -> Result<F> {
        match self {
            Expression::Constant(c) => Ok(*c),
            Expression::Variable { name, .. } => env
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnboundVariable { name: name.clone() }),
            Expression::Unary(op, inner) => {
                let v = inner.evaluate(env)?;
                self.apply_unary(*op, v)
            }
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.evaluate(env)?;
                let b = rhs.evaluate(env)?;
                self.apply_binary(*op, a, b)
            }
        }
    }

    /// Evaluate with variables bound positionally, in declaration order.
    pub fn eval_slice(&self, env: &[F]) -> Result<F> {
        match self {
            Expression::Constant(c) => Ok(*c),
            Expression::Variable { name, index } => {
                env.get(*index).copied().ok_or_else(|| Error::UnboundVariable {
                    name: name.clone(),
                })
            }
            Expression::Unary(op, inner) => {
                let v = inner.eval_slice(env)?;
                self.apply_unary(*op, v)
            }
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.eval_slice(env)?;
                let b = rhs.eval_slice(env)?;
                self.apply_binary(*op, a, b)
            }
        }
    }

    fn apply_unary(&self, op: UnaryOp, v: F) -> Result<F> {
        let out = match op {
            UnaryOp::Neg => -v,
            UnaryOp::Sin => v.sin(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Tan => v.tan(),
            UnaryOp::Exp => v.exp(),
            UnaryOp::Log => {
                if v <= F::zero() {
                    return Err(self.domain_error(format!("log of non-positive value {v}")));
                }
                v.ln()
            }
            UnaryOp::Sqrt => {
                if v < F::zero() {
                    return Err(self.domain_error(format!("sqrt of negative value {v}")));
                }
                v.sqrt()
            }
            UnaryOp::Sinh => v.sinh(),
            UnaryOp::Cosh => v.cosh(),
            UnaryOp::Tanh => v.tanh(),
            UnaryOp::Atan => v.atan(),
        };
        Ok(out)
    }

    fn apply_binary(&self, op: BinaryOp, a: F, b: F) -> Result<F> {
        match op {
            BinaryOp::Add => Ok(a + b),
            BinaryOp::Sub => Ok(a - b),
            BinaryOp::Mul => Ok(a * b),
            BinaryOp::Div => {
                if b == F::zero() {
                    return Err(self.domain_error("division by zero".into()));
                }
                Ok(a / b)
            }
            BinaryOp::Pow => self.pow_value(a, b),
        }
    }

    fn pow_value(&self, base: F, exponent: F) -> Result<F> {
        // Integer exponents keep negative bases meaningful; everything else
        // requires a positive base.
        if exponent.fract() == F::zero() && exponent.abs() < F::of(2147483647.0) {
            let e = exponent.to_i32().unwrap_or(0);
            if base == F::zero() && e < 0 {
                return Err(self.domain_error("zero raised to a negative power".into()));
            }
            return Ok(base.powi(e));
        }
        if base < F::zero() {
            return Err(self.domain_error(format!(
                "negative base {base} with non-integer exponent {exponent}"
            )));
        }
        if base == F::zero() {
            return Ok(F::zero());
        }
        Ok(base.powf(exponent))
    }

    fn domain_error(&self, message: String) -> Error {
        Error::Domain {
            expr: self.to_string(),
            message,
        }
    }

    // -----------------------------------------------------------------------
    // differentiation

    /// Exact partial derivative with respect to the named variable.
    pub fn differentiate(&self, var: &str) -> Expression<F> {
        match self {
            Expression::Constant(_) => Expression::Constant(F::zero()),
            Expression::Variable { name, .. } => {
                if name == var {
                    Expression::Constant(F::one())
                } else {
                    Expression::Constant(F::zero())
                }
            }
            Expression::Unary(op, inner) => {
                let u = inner.as_ref().clone();
                let du = inner.differentiate(var);
                use BinaryOp::*;
                use UnaryOp::*;
                match op {
                    Neg => Expression::unary(Neg, du),
                    Sin => Expression::binary(Mul, Expression::unary(Cos, u), du),
                    Cos => Expression::unary(
                        Neg,
                        Expression::binary(Mul, Expression::unary(Sin, u), du),
                    ),
                    Tan => Expression::binary(
                        Div,
                        du,
                        Expression::binary(
                            Pow,
                            Expression::unary(Cos, u),
                            Expression::Constant(F::of(2.0)),
                        ),
                    ),
                    Exp => Expression::binary(Mul, Expression::unary(Exp, u), du),
                    Log => Expression::binary(Div, du, u),
                    Sqrt => Expression::binary(
                        Div,
                        du,
                        Expression::binary(
                            Mul,
                            Expression::Constant(F::of(2.0)),
                            Expression::unary(Sqrt, u),
                        ),
                    ),
                    Sinh => Expression::binary(Mul, Expression::unary(Cosh, u), du),
                    Cosh => Expression::binary(Mul, Expression::unary(Sinh, u), du),
                    Tanh => Expression::binary(
                        Mul,
                        Expression::binary(
                            Sub,
                            Expression::Constant(F::one()),
                            Expression::binary(
                                Pow,
                                Expression::unary(Tanh, u),
                                Expression::Constant(F::of(2.0)),
                            ),
                        ),
                        du,
                    ),
                    Atan => Expression::binary(
                        Div,
                        du,
                        Expression::binary(
                            Add,
                            Expression::Constant(F::one()),
                            Expression::binary(
                                Pow,
                                u,
                                Expression::Constant(F::of(2.0)),
                            ),
                        ),
                    ),
                }
            }
            Expression::Binary(op, lhs, rhs) => {
                let u = lhs.as_ref().clone();
                let v = rhs.as_ref().clone();
                let du = lhs.differentiate(var);
                let dv = rhs.differentiate(var);
                use BinaryOp::*;
                match op {
                    Add => Expression::binary(Add, du, dv),
                    Sub => Expression::binary(Sub, du, dv),
                    Mul => Expression::binary(
                        Add,
                        Expression::binary(Mul, du, v),
                        Expression::binary(Mul, u, dv),
                    ),
                    Div => Expression::binary(
                        Div,
                        Expression::binary(
                            Sub,
                            Expression::binary(Mul, du, v.clone()),
                            Expression::binary(Mul, u, dv),
                        ),
                        Expression::binary(Pow, v, Expression::Constant(F::of(2.0))),
                    ),
                    Pow => {
                        if let Expression::Constant(c) = v {
                            // c * u^(c-1) * u'
                            let power = Expression::binary(
                                Pow,
                                u,
                                Expression::Constant(c - F::one()),
                            );
                            Expression::binary(
                                Mul,
                                Expression::binary(Mul, Expression::Constant(c), power),
                                du,
                            )
                        } else {
                            // u^v = exp(v log u):
                            // (u^v) * (v' log u + v u' / u)
                            let term = Expression::binary(
                                Add,
                                Expression::binary(
                                    Mul,
                                    dv,
                                    Expression::unary(UnaryOp::Log, u.clone()),
                                ),
                                Expression::binary(
                                    Div,
                                    Expression::binary(Mul, v.clone(), du),
                                    u.clone(),
                                ),
                            );
                            Expression::binary(
                                Mul,
                                Expression::binary(Pow, u, v),
                                term,
                            )
                        }
                    }
                }
            }
        }
    }

    // -----------------------------------------------------------------------
    // simplification

    /// Value-preserving cleanup: constant folding and unit/zero rules.
    ///
    /// This never reorders or factors, so the output evaluates identically to
    /// the input (up to rounding) wherever the input is defined.
    pub fn simplify(&self) -> Expression<F> {
        match self {
            Expression::Constant(_) | Expression::Variable { .. } => self.clone(),
            Expression::Unary(op, inner) => {
                let inner = inner.simplify();
                match (op, &inner) {
                    (UnaryOp::Neg, Expression::Constant(c)) => Expression::Constant(-*c),
                    (UnaryOp::Neg, Expression::Unary(UnaryOp::Neg, x)) => {
                        x.as_ref().clone()
                    }
                    (op, Expression::Constant(_)) => {
                        let node = Expression::unary(*op, inner.clone());
                        match node.eval_slice(&[]) {
                            Ok(v) if v.is_finite() => Expression::Constant(v),
                            _ => node,
                        }
                    }
                    _ => Expression::unary(*op, inner),
                }
            }
            Expression::Binary(op, lhs, rhs) => {
                let a = lhs.simplify();
                let b = rhs.simplify();
                use BinaryOp::*;
                if let (Expression::Constant(_), Expression::Constant(_)) = (&a, &b) {
                    let node = Expression::binary(*op, a.clone(), b.clone());
                    if let Ok(v) = node.eval_slice(&[]) {
                        if v.is_finite() {
                            return Expression::Constant(v);
                        }
                    }
                    return node;
                }
                match op {
                    Add => {
                        if a.is_zero_const() {
                            return b;
                        }
                        if b.is_zero_const() {
                            return a;
                        }
                    }
                    Sub => {
                        if b.is_zero_const() {
                            return a;
                        }
                        if a.is_zero_const() {
                            return Expression::unary(UnaryOp::Neg, b);
                        }
                    }
                    Mul => {
                        if a.is_zero_const() || b.is_zero_const() {
                            return Expression::Constant(F::zero());
                        }
                        if a.is_one_const() {
                            return b;
                        }
                        if b.is_one_const() {
                            return a;
                        }
                    }
                    Div => {
                        if b.is_one_const() {
                            return a;
                        }
                        if a.is_zero_const() {
                            return Expression::Constant(F::zero());
                        }
                    }
                    Pow => {
                        if b.is_one_const() {
                            return a;
                        }
                        if b.is_zero_const() {
                            return Expression::Constant(F::one());
                        }
                    }
                }
                Expression::binary(*op, a, b)
            }
        }
    }

    fn is_zero_const(&self) -> bool {
        matches!(self, Expression::Constant(c) if *c == F::zero())
    }

    fn is_one_const(&self) -> bool {
        matches!(self, Expression::Constant(c) if *c == F::one())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Constant(_) | Expression::Variable { .. } => 4,
            Expression::Unary(UnaryOp::Neg, _) => 2,
            Expression::Unary(..) => 4,
            Expression::Binary(BinaryOp::Pow, ..) => 3,
            Expression::Binary(BinaryOp::Mul, ..) | Expression::Binary(BinaryOp::Div, ..) => 1,
            Expression::Binary(BinaryOp::Add, ..) | Expression::Binary(BinaryOp::Sub, ..) => 0,
        }
    }
}

impl<F: Scalar> fmt::Display for Expression<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren<F: Scalar>(
            f: &mut fmt::Formatter<'_>,
            e: &Expression<F>,
            parent: u8,
        ) -> fmt::Result {
            if e.precedence() < parent {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expression::Constant(c) => {
                if *c < F::zero() {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expression::Variable { name, .. } => write!(f, "{name}"),
            Expression::Unary(UnaryOp::Neg, inner) => {
                write!(f, "-")?;
                paren(f, inner, 3)
            }
            Expression::Unary(op, inner) => write!(f, "{}({inner})", op.name()),
            Expression::Binary(op, lhs, rhs) => {
                let (sym, prec) = match op {
                    BinaryOp::Add => ("+", 0),
                    BinaryOp::Sub => ("-", 0),
                    BinaryOp::Mul => ("*", 1),
                    BinaryOp::Div => ("/", 1),
                    BinaryOp::Pow => ("^", 3),
                };
                // Parenthesize so the printed form reparses to the same
                // grouping: the parser associates +,-,*,/ to the left and ^
                // to the right, so an equal-precedence child on the other
                // side needs explicit parens.
                let (lhs_prec, rhs_prec) = if matches!(op, BinaryOp::Pow) {
                    (prec + 1, prec)
                } else {
                    (prec, prec + 1)
                };
                paren(f, lhs, lhs_prec)?;
                write!(f, "{sym}")?;
                paren(f, rhs, rhs_prec)
            }
        }
    }
}
