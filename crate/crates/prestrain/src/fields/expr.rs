//! Expression language for midplate fields.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x1' | 'x2' | 'pi'
//!          | func '(' expr ')' | 'weier' '(' num ',' num ',' int ')'
//!          | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! `weier(a, b, N)` is Σ_{k=0..N} b^{-ak} sin(b^k (x1 + x2)).

use super::jet::{Jet2, Jet3};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                Some(*offset)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error at ({x1}, {x2}): {message}")]
pub struct EvalError {
    pub x1: f64,
    pub x2: f64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate x1 (index 0) or x2 (index 1).
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Weier { a: f64, b: f64, n: u32 },
}

/// A parsed scalar expression in x1, x2.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    root: Expr,
}

pub fn parse_expression(src: &str) -> Result<FieldExpr, ParseError> {
    src.parse()
}

impl FromStr for FieldExpr {
    type Err = ParseError;
    fn from_str(src: &str) -> Result<Self, ParseError> {
        let tokens = lex(src)?;
        if tokens.len() == 1 {
            return Err(ParseError::Empty);
        }
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        let t = p.peek();
        if t.kind != Tok::End {
            return Err(ParseError::Syntax { offset: t.offset, message: "unexpected trailing input".into() });
        }
        Ok(FieldExpr { root })
    }
}

impl FieldExpr {
    pub fn new(root: Expr) -> FieldExpr {
        FieldExpr { root }
    }

    pub fn constant(c: f64) -> FieldExpr {
        FieldExpr { root: Expr::Const(c) }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// True when the expression is the literal constant 0.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self.root, Expr::Const(c) if c == 0.0)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64, EvalError> {
        let v = eval_value(&self.root, x1, x2);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(x1, x2, &self.root, v))
        }
    }

    pub fn eval_jet3(&self, x1: f64, x2: f64) -> Result<Jet3, EvalError> {
        let j = jet_of(&self.root, Jet3::variable(0, x1), Jet3::variable(1, x2));
        if j.is_finite() {
            Ok(j)
        } else {
            Err(domain(x1, x2, &self.root, j.v))
        }
    }

    pub fn eval_jet(&self, x1: f64, x2: f64) -> Result<Jet2, EvalError> {
        self.eval_jet3(x1, x2).map(Jet2::from)
    }
}

pub fn eval_jet(expr: &FieldExpr, p: (f64, f64)) -> Result<Jet2, EvalError> {
    expr.eval_jet(p.0, p.1)
}

fn domain(x1: f64, x2: f64, root: &Expr, v: f64) -> EvalError {
    let message = find_domain_violation(root, x1, x2)
        .unwrap_or_else(|| if v.is_nan() { "result is not a number".into() } else { "result is not finite".into() });
    EvalError { x1, x2, message }
}

fn find_domain_violation(e: &Expr, x1: f64, x2: f64) -> Option<String> {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Weier { .. } => None,
        Expr::Neg(a) => find_domain_violation(a, x1, x2),
        Expr::Bin(op, a, b) => find_domain_violation(a, x1, x2)
            .or_else(|| find_domain_violation(b, x1, x2))
            .or_else(|| {
                let bv = eval_value(b, x1, x2);
                let av = eval_value(a, x1, x2);
                match op {
                    BinOp::Div if bv == 0.0 => Some("division by zero".into()),
                    BinOp::Pow if av < 0.0 && bv.fract() != 0.0 => {
                        Some("negative base with non-integer exponent".into())
                    }
                    BinOp::Pow if av == 0.0 && bv < 3.0 && bv.fract() != 0.0 => {
                        Some("derivative of power singular at zero base".into())
                    }
                    _ => None,
                }
            }),
        Expr::Call(f, a) => find_domain_violation(a, x1, x2).or_else(|| {
            let av = eval_value(a, x1, x2);
            match f {
                Func::Log if av <= 0.0 => Some("log of non-positive value".into()),
                Func::Sqrt if av < 0.0 => Some("sqrt of negative value".into()),
                Func::Sqrt if av == 0.0 => Some("sqrt is not differentiable at 0".into()),
                _ => None,
            }
        }),
    }
}

fn weier_terms(a: f64, b: f64, n: u32) -> impl Iterator<Item = (f64, f64)> {
    (0..=n).map(move |k| (b.powf(-a * k as f64), b.powi(k as i32)))
}

fn eval_value(e: &Expr, x1: f64, x2: f64) -> f64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Var(0) => x1,
        Expr::Var(_) => x2,
        Expr::Neg(a) => -eval_value(a, x1, x2),
        Expr::Bin(op, a, b) => {
            let (a, b) = (eval_value(a, x1, x2), eval_value(b, x1, x2));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => {
                    if b.fract() == 0.0 && b.abs() <= 1024.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Expr::Call(f, a) => {
            let a = eval_value(a, x1, x2);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
        Expr::Weier { a, b, n } => {
            let s = x1 + x2;
            weier_terms(*a, *b, *n).map(|(c, f)| c * (f * s).sin()).sum()
        }
    }
}

fn jet_of(e: &Expr, x: Jet3, y: Jet3) -> Jet3 {
    match e {
        Expr::Const(c) => Jet3::constant(*c),
        Expr::Var(0) => x,
        Expr::Var(_) => y,
        Expr::Neg(a) => -jet_of(a, x, y),
        Expr::Bin(op, a, b) => {
            let ja = jet_of(a, x, y);
            match op {
                BinOp::Pow => {
                    if let Some(c) = constant_value(b) {
                        ja.powf(c)
                    } else {
                        let jb = jet_of(b, x, y);
                        (jb * ja.ln()).exp()
                    }
                }
                _ => {
                    let jb = jet_of(b, x, y);
                    match op {
                        BinOp::Add => ja + jb,
                        BinOp::Sub => ja - jb,
                        BinOp::Mul => ja * jb,
                        BinOp::Div => ja * jb.recip(),
                        BinOp::Pow => unreachable!(),
                    }
                }
            }
        }
        Expr::Call(f, a) => {
            let j = jet_of(a, x, y);
            match f {
                Func::Sin => j.sin(),
                Func::Cos => j.cos(),
                Func::Exp => j.exp(),
                Func::Log => j.ln(),
                Func::Sqrt => j.sqrt(),
                Func::Abs => j.abs(),
            }
        }
        Expr::Weier { a, b, n } => {
            let s = x + y;
            let mut acc = Jet3::constant(0.0);
            for (c, f) in weier_terms(*a, *b, *n) {
                acc = acc + s.scale(f).sin().scale(c);
            }
            acc
        }
    }
}

/// Value of a subtree that does not depend on x1, x2.
fn constant_value(e: &Expr) -> Option<f64> {
    fn free_of_vars(e: &Expr) -> bool {
        match e {
            Expr::Const(_) => true,
            Expr::Var(_) | Expr::Weier { .. } => false,
            Expr::Neg(a) | Expr::Call(_, a) => free_of_vars(a),
            Expr::Bin(_, a, b) => free_of_vars(a) && free_of_vars(b),
        }
    }
    free_of_vars(e).then(|| eval_value(e, 0.0, 0.0))
}

// ---------------------------------------------------------------- printing

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
        _ => 5,
    }
}

fn fmt_num(c: f64) -> String {
    format!("{c:?}")
}

fn write_expr(e: &Expr, out: &mut String) {
    let child = |e: &Expr, min: u8, out: &mut String| {
        if precedence(e) < min {
            out.push('(');
            write_expr(e, out);
            out.push(')');
        } else {
            write_expr(e, out);
        }
    };
    match e {
        Expr::Const(c) => {
            if c.is_sign_negative() {
                out.push('-');
                out.push_str(&fmt_num(-c));
            } else {
                out.push_str(&fmt_num(*c));
            }
        }
        Expr::Var(k) => out.push_str(if *k == 0 { "x1" } else { "x2" }),
        Expr::Neg(a) => {
            out.push('-');
            child(a, 3, out);
        }
        Expr::Bin(op, a, b) => {
            let (sym, p) = match op {
                BinOp::Add => ("+", 1),
                BinOp::Sub => ("-", 1),
                BinOp::Mul => ("*", 2),
                BinOp::Div => ("/", 2),
                BinOp::Pow => ("^", 4),
            };
            if *op == BinOp::Pow {
                child(a, 5, out);
                out.push('^');
                child(b, 3, out);
            } else {
                child(a, p, out);
                out.push(' ');
                out.push_str(sym);
                out.push(' ');
                child(b, p + 1, out);
            }
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(a, out);
            out.push(')');
        }
        Expr::Weier { a, b, n } => {
            out.push_str(&format!("weier({}, {}, {})", fmt_num(*a), fmt_num(*b), n));
        }
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&self.root, &mut s);
        f.write_str(&s)
    }
}

// ----------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                if !v.is_finite() {
                    return Err(ParseError::Syntax { offset: start, message: format!("number '{text}' out of range") });
                }
                out.push(Token { kind: Tok::Num(v), offset: start });
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token { kind: Tok::Ident(chars[start..i].iter().collect()), offset: start });
                continue;
            }
            _ => {
                return Err(ParseError::Syntax { offset: start, message: format!("unexpected character '{c}'") })
            }
        };
        out.push(Token { kind, offset: start });
        i += 1;
    }
    out.push(Token { kind: Tok::End, offset: chars.len() });
    Ok(out)
}

// ---------------------------------------------------------------- parsing

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn unexpected(t: &Token) -> ParseError {
        let message = match &t.kind {
            Tok::End => "unexpected end of input".to_string(),
            k => format!("unexpected token {k:?}"),
        };
        ParseError::Syntax { offset: t.offset, message }
    }

    fn expect(&mut self, kind: Tok) -> Result<(), ParseError> {
        let t = self.next();
        if t.kind == kind {
            Ok(())
        } else {
            Err(Self::unexpected(&t))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().kind == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().kind == Tok::Caret {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn signed_literal(&mut self) -> Result<f64, ParseError> {
        let neg = if self.peek().kind == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let t = self.next();
        match t.kind {
            Tok::Num(v) => Ok(if neg { -v } else { v }),
            _ => Err(ParseError::Syntax { offset: t.offset, message: "expected a numeric literal".into() }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match t.kind {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x1" => Ok(Expr::Var(0)),
                "x2" => Ok(Expr::Var(1)),
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "weier" => {
                    self.expect(Tok::LParen)?;
                    let a = self.signed_literal()?;
                    self.expect(Tok::Comma)?;
                    let b_off = self.peek().offset;
                    let b = self.signed_literal()?;
                    if b <= 0.0 {
                        return Err(ParseError::Syntax { offset: b_off, message: "weier base must be positive".into() });
                    }
                    self.expect(Tok::Comma)?;
                    let n_tok = self.next();
                    let n = match n_tok.kind {
                        Tok::Num(v) if v.fract() == 0.0 && (0.0..=64.0).contains(&v) => v as u32,
                        _ => {
                            return Err(ParseError::Syntax {
                                offset: n_tok.offset,
                                message: "weier term count must be an integer in 0..=64".into(),
                            })
                        }
                    };
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Weier { a, b, n })
                }
                other => match Func::from_name(other) {
                    Some(f) => {
                        self.expect(Tok::LParen)?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Call(f, Box::new(arg)))
                    }
                    None => Err(ParseError::UnknownIdentifier { name: name.clone(), offset: t.offset }),
                },
            },
            _ => Err(Self::unexpected(&t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_node() {
        let e = parse_expression("x1*x2").unwrap();
        assert_eq!(
            e.root(),
            &Expr::Bin(BinOp::Mul, Box::new(Expr::Var(0)), Box::new(Expr::Var(1)))
        );
    }

    #[test]
    fn zero_constant() {
        let e = parse_expression("0").unwrap();
        assert!(e.is_zero_literal());
    }

    #[test]
    fn open_call_reports_offset() {
        let err = parse_expression("sin(").unwrap_err();
        assert_eq!(err.offset(), Some(4));
    }

    #[test]
    fn unknown_identifier() {
        let err = parse_expression("x3 + 1").unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { ref name, offset: 0 } if name == "x3"));
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_expression("   ").unwrap_err(), ParseError::Empty);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("-x1^2").unwrap();
        assert_eq!(e.eval(3.0, 0.0).unwrap(), -9.0);
        let e = parse_expression("2^3^2").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 512.0);
        let e = parse_expression("8/4/2").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 1.0);
        let e = parse_expression("2^-1").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn printer_round_trip() {
        for src in ["x1*x2", "1 - (x1 - x2)", "(-x1)^2", "x1^(x2 + 1)", "-(-x1)", "weier(0.5, 3, 12)", "sqrt(1e-3 + x2)/(2*pi)"] {
            let e = parse_expression(src).unwrap();
            let again = parse_expression(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn jets_of_polynomials() {
        let j = eval_jet(&parse_expression("x1*x2").unwrap(), (2.0, 3.0)).unwrap();
        assert_eq!(j.value, 6.0);
        assert_eq!(j.grad, [3.0, 2.0]);
        assert_eq!(j.hess, [[0.0, 1.0], [1.0, 0.0]]);
        let j = eval_jet(&parse_expression("x1^2").unwrap(), (1.0, 0.0)).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.grad, [2.0, 0.0]);
        assert_eq!(j.hess, [[2.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn weier_matches_direct_sum() {
        let e = parse_expression("weier(0.5,3,12)").unwrap();
        let (x1, x2) = (0.31, 0.57);
        let mut direct = 0.0;
        for k in 0..=12 {
            direct += 3f64.powf(-0.5 * k as f64) * (3f64.powi(k) * (x1 + x2)).sin();
        }
        assert!((e.eval(x1, x2).unwrap() - direct).abs() < 1e-14);
        assert!((e.eval_jet(x1, x2).unwrap().value - direct).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let e = parse_expression("log(x1)").unwrap();
        let err = e.eval_jet(-1.0, 0.0).unwrap_err();
        assert!(err.message.contains("log"));
        assert!(parse_expression("1/x1").unwrap().eval(0.0, 1.0).is_err());
    }
}
