//! Warp-profile expressions.
//!
//! A profile is a real function of `x` built from constants, `+ - * /`,
//! integer powers and `exp`, `cosh`, `sinh`. Derivatives are computed by
//! differentiating the tree, so curvature `-f''/f` carries no
//! finite-difference noise.
//!
//! Grammar (byte offsets in errors refer to the input string):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" exponent ] ;
//! exponent= [ "-" | "+" ] integer | "(" [ "-" | "+" ] integer ")" ;
//! atom    = number | ident | func "(" expr ")" | "(" expr ")" ;
//! func    = "exp" | "cosh" | "sinh" ;
//! ident   = "x" | "s" ;      (* "s" only in profile families *)
//! ```

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: &'static str },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("literal at offset {offset} is not a finite number")]
    NonFiniteLiteral { offset: usize },
    #[error("denominator `{denominator}` is not certified nonzero on the window (x = {x})")]
    UncertifiedDivision { denominator: String, x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at x = {x}")]
    DivisionByZero { x: f64 },
    #[error("non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    /// Family parameter.
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Cosh,
    Sinh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => libm::exp(v),
            Func::Cosh => libm::cosh(v),
            Func::Sinh => libm::sinh(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Arc<Node>),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Pow(Arc<Node>, i32),
    Call(Func, Arc<Node>),
}

fn powi(base: f64, exp: i32) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    let mut e = exp.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            result *= b;
        }
        b *= b;
        e >>= 1;
    }
    if exp < 0 {
        1.0 / result
    } else {
        result
    }
}

impl Node {
    fn constant(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, s: f64) -> Result<f64, EvalError> {
        let v = match self {
            Node::Const(c) => *c,
            Node::Var(Var::X) => x,
            Node::Var(Var::S) => s,
            Node::Neg(a) => -a.eval(x, s)?,
            Node::Add(a, b) => a.eval(x, s)? + b.eval(x, s)?,
            Node::Sub(a, b) => a.eval(x, s)? - b.eval(x, s)?,
            Node::Mul(a, b) => a.eval(x, s)? * b.eval(x, s)?,
            Node::Div(a, b) => {
                let num = a.eval(x, s)?;
                let den = b.eval(x, s)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero { x });
                }
                num / den
            }
            Node::Pow(a, n) => {
                let base = a.eval(x, s)?;
                if *n < 0 && base == 0.0 {
                    return Err(EvalError::DivisionByZero { x });
                }
                powi(base, *n)
            }
            Node::Call(f, a) => f.apply(a.eval(x, s)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x })
        }
    }

    fn contains_var(&self, var: Var) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(v) => *v == var,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.contains_var(var),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.contains_var(var) || b.contains_var(var)
            }
        }
    }

    /// Every subtree that ends up in a denominator.
    fn denominators<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            Node::Const(_) | Node::Var(_) => {}
            Node::Neg(a) | Node::Call(_, a) => a.denominators(out),
            Node::Pow(a, n) => {
                if *n < 0 {
                    out.push(a);
                }
                a.denominators(out);
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.denominators(out);
                b.denominators(out);
            }
            Node::Div(a, b) => {
                out.push(b);
                a.denominators(out);
                b.denominators(out);
            }
        }
    }
}

// Smart constructors fold constants and the 0/1 identities so derivative
// trees stay small.

fn cnst(c: f64) -> Arc<Node> {
    Arc::new(Node::Const(c))
}

fn neg(a: Arc<Node>) -> Arc<Node> {
    match &*a {
        Node::Const(c) => cnst(-c),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(a)),
    }
}

fn add(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => cnst(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

fn sub(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => cnst(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Arc::new(Node::Sub(a, b)),
    }
}

fn mul(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => cnst(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => cnst(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Arc::new(Node::Mul(a, b)),
    }
}

fn div(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) if y != 0.0 => cnst(x / y),
        (Some(0.0), _) => cnst(0.0),
        (_, Some(1.0)) => a,
        _ => Arc::new(Node::Div(a, b)),
    }
}

fn pow(a: Arc<Node>, n: i32) -> Arc<Node> {
    match (a.constant(), n) {
        (_, 0) => cnst(1.0),
        (_, 1) => a,
        (Some(c), _) if n > 0 || c != 0.0 => cnst(powi(c, n)),
        _ => Arc::new(Node::Pow(a, n)),
    }
}

fn call(f: Func, a: Arc<Node>) -> Arc<Node> {
    match a.constant() {
        Some(c) => cnst(f.apply(c)),
        None => Arc::new(Node::Call(f, a)),
    }
}

/// Symbolic d/dx.
fn differentiate(node: &Arc<Node>) -> Arc<Node> {
    match &**node {
        Node::Const(_) | Node::Var(Var::S) => cnst(0.0),
        Node::Var(Var::X) => cnst(1.0),
        Node::Neg(a) => neg(differentiate(a)),
        Node::Add(a, b) => add(differentiate(a), differentiate(b)),
        Node::Sub(a, b) => sub(differentiate(a), differentiate(b)),
        Node::Mul(a, b) => add(mul(differentiate(a), b.clone()), mul(a.clone(), differentiate(b))),
        Node::Div(a, b) => div(
            sub(mul(differentiate(a), b.clone()), mul(a.clone(), differentiate(b))),
            pow(b.clone(), 2),
        ),
        Node::Pow(a, n) => mul(mul(cnst(f64::from(*n)), pow(a.clone(), n - 1)), differentiate(a)),
        Node::Call(Func::Exp, a) => mul(node.clone(), differentiate(a)),
        Node::Call(Func::Cosh, a) => mul(call(Func::Sinh, a.clone()), differentiate(a)),
        Node::Call(Func::Sinh, a) => mul(call(Func::Cosh, a.clone()), differentiate(a)),
    }
}

fn substitute_param(node: &Arc<Node>, s: f64) -> Arc<Node> {
    match &**node {
        Node::Const(_) | Node::Var(Var::X) => node.clone(),
        Node::Var(Var::S) => cnst(s),
        Node::Neg(a) => neg(substitute_param(a, s)),
        Node::Add(a, b) => add(substitute_param(a, s), substitute_param(b, s)),
        Node::Sub(a, b) => sub(substitute_param(a, s), substitute_param(b, s)),
        Node::Mul(a, b) => mul(substitute_param(a, s), substitute_param(b, s)),
        Node::Div(a, b) => div(substitute_param(a, s), substitute_param(b, s)),
        Node::Pow(a, n) => pow(substitute_param(a, s), *n),
        Node::Call(f, a) => call(*f, substitute_param(a, s)),
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(Var::X) => f.write_str("x"),
            Node::Var(Var::S) => f.write_str("s"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, n) if *n < 0 => write!(f, "({a})^({n})"),
            Node::Pow(a, n) => write!(f, "({a})^{n}"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    allow_param: bool,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err(&self, message: &'static str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message,
        }
    }

    fn expect(&mut self, byte: u8, message: &'static str) -> Result<(), ExprError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(message))
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Arc::new(Node::Add(lhs, self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Arc::new(Node::Sub(lhs, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Node>, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Arc::new(Node::Mul(lhs, self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Arc::new(Node::Div(lhs, self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Arc<Node>, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Arc::new(Node::Neg(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Arc<Node>, ExprError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let exponent = if self.peek() == Some(b'(') {
            self.pos += 1;
            let n = self.integer()?;
            self.expect(b')', "expected `)` after exponent")?;
            n
        } else {
            self.integer()?
        };
        Ok(Arc::new(Node::Pow(base, exponent)))
    }

    fn integer(&mut self) -> Result<i32, ExprError> {
        let mut sign = 1i64;
        match self.peek() {
            Some(b'-') => {
                sign = -1;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer exponent"));
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        digits
            .parse::<i64>()
            .ok()
            .and_then(|v| i32::try_from(sign * v).ok())
            .ok_or(ExprError::Syntax {
                offset: start,
                message: "exponent out of range",
            })
    }

    fn number(&mut self) -> Result<Arc<Node>, ExprError> {
        let start = self.pos;
        let src = self.src;
        let mut end = start;
        while end < src.len() && (src[end].is_ascii_digit() || src[end] == b'.') {
            end += 1;
        }
        if end < src.len() && (src[end] == b'e' || src[end] == b'E') {
            let mut probe = end + 1;
            if probe < src.len() && (src[probe] == b'+' || src[probe] == b'-') {
                probe += 1;
            }
            if probe < src.len() && src[probe].is_ascii_digit() {
                end = probe;
                while end < src.len() && src[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        let text = core::str::from_utf8(&src[start..end]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: "malformed number",
        })?;
        if !value.is_finite() {
            return Err(ExprError::NonFiniteLiteral { offset: start });
        }
        self.pos = end;
        Ok(cnst(value))
    }

    fn atom(&mut self) -> Result<Arc<Node>, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')', "expected `)`")?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
                let func = match name {
                    "x" => return Ok(Arc::new(Node::Var(Var::X))),
                    "s" if self.allow_param => return Ok(Arc::new(Node::Var(Var::S))),
                    "exp" => Func::Exp,
                    "cosh" => Func::Cosh,
                    "sinh" => Func::Sinh,
                    _ => {
                        return Err(ExprError::UnknownIdentifier {
                            offset: start,
                            name: name.to_string(),
                        })
                    }
                };
                self.expect(b'(', "expected `(` after function name")?;
                let arg = self.expr()?;
                self.expect(b')', "expected `)`")?;
                Ok(Arc::new(Node::Call(func, arg)))
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }
}

fn parse_tree(text: &str, allow_param: bool) -> Result<Arc<Node>, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        allow_param,
    };
    if p.peek().is_none() {
        return Err(p.err("empty expression"));
    }
    let tree = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(tree)
}

/// Which derivative of a profile to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Zero,
    First,
    Second,
}

/// A warp profile `f(x)` with its first two derivative trees.
///
/// The three trees are built once at construction and shared through `Arc`,
/// so a `ProfileExpr` is cheap to clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ProfileExpr {
    trees: [Arc<Node>; 3],
}

impl ProfileExpr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        Ok(Self::from_tree(parse_tree(text, false)?))
    }

    pub fn from_tree(root: Arc<Node>) -> Self {
        let d1 = differentiate(&root);
        let d2 = differentiate(&d1);
        Self { trees: [root, d1, d2] }
    }

    pub fn root(&self) -> &Arc<Node> {
        &self.trees[0]
    }

    /// Derivative of order 1 or 2 as a new profile. The returned root is the
    /// cached tree, so repeated calls hand back the same allocation.
    pub fn derivative(&self, order: u8) -> Self {
        match order {
            1 => Self {
                trees: [
                    self.trees[1].clone(),
                    self.trees[2].clone(),
                    differentiate(&self.trees[2]),
                ],
            },
            2 => {
                let d3 = differentiate(&self.trees[2]);
                let d4 = differentiate(&d3);
                Self {
                    trees: [self.trees[2].clone(), d3, d4],
                }
            }
            _ => panic!("derivative order must be 1 or 2, got {order}"),
        }
    }

    pub fn tree(&self, order: Order) -> &Arc<Node> {
        match order {
            Order::Zero => &self.trees[0],
            Order::First => &self.trees[1],
            Order::Second => &self.trees[2],
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        self.trees[0].eval(x, 0.0)
    }

    pub fn eval_order(&self, order: Order, x: f64) -> Result<f64, EvalError> {
        self.tree(order).eval(x, 0.0)
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval_jet(&self, x: f64) -> Result<[f64; 3], EvalError> {
        Ok([
            self.trees[0].eval(x, 0.0)?,
            self.trees[1].eval(x, 0.0)?,
            self.trees[2].eval(x, 0.0)?,
        ])
    }

    /// Checks every denominator for nonzero, sign-constant values on
    /// `grid_n` points of `[-half_width, half_width]` and at `extra` points.
    ///
    /// Sampling cannot rule out a zero between grid points; a denominator
    /// that dips through zero and back between samples goes undetected.
    pub fn certify(&self, half_width: f64, grid_n: usize, extra: &[f64]) -> Result<(), ExprError> {
        let mut dens = Vec::new();
        self.trees[0].denominators(&mut dens);
        if dens.is_empty() {
            return Ok(());
        }
        let n = grid_n.max(2);
        let points = (0..n)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
            .chain(extra.iter().copied());
        let points: Vec<f64> = points.collect();
        for den in dens {
            let mut sign = 0.0f64;
            for &x in &points {
                let v = den.eval(x, 0.0).unwrap_or(0.0);
                let bad = v == 0.0 || (sign != 0.0 && v.signum() != sign);
                if bad {
                    return Err(ExprError::UncertifiedDivision {
                        denominator: den.to_string(),
                        x,
                    });
                }
                sign = v.signum();
            }
        }
        Ok(())
    }
}

impl fmt::Display for ProfileExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.trees[0].fmt(f)
    }
}

/// A profile expression in `x` and the family parameter `s`.
#[derive(Debug, Clone)]
pub struct ProfileFamily {
    root: Arc<Node>,
}

impl ProfileFamily {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        Ok(Self {
            root: parse_tree(text, true)?,
        })
    }

    pub fn depends_on_parameter(&self) -> bool {
        self.root.contains_var(Var::S)
    }

    /// The profile `f_s` with `s` substituted and constants folded.
    pub fn slice(&self, s: f64) -> ProfileExpr {
        ProfileExpr::from_tree(substitute_param(&self.root, s))
    }
}

impl fmt::Display for ProfileFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
