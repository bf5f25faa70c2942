//! Small arithmetic expression language for metric and coefficient files.
//!
//! Grammar, loosest first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-x1^2` is `-(x1^2)`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 7] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Tanh];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    /// Zero-based coordinate index; written `x1`, `x2`, ... in source.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Const(Constant::Pi) => T::PI(),
            Expr::Const(Constant::E) => T::E(),
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Number of coordinates the expression needs (largest variable index plus one).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
        }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the fewest parentheses that re-parse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.level() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let lv = self.level();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    write_child(f, a, a.level() <= lv)?;
                    f.write_str(sym)?;
                    write_child(f, b, b.level() < 3)
                } else {
                    write_child(f, a, a.level() < lv)?;
                    f.write_str(sym)?;
                    write_child(f, b, b.level() <= lv)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: Option<usize>,
}

fn err(col: usize, message: impl Into<String>) -> Error {
    Error::Parse { line: 1, column: col, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap_or_default();
        let col = src[..i].chars().count() + 1;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| err(col, format!("malformed number '{text}'")))?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), col));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(col, format!("unexpected character '{c}'"))),
            };
            out.push((t, col));
            i += c.len_utf8();
        }
    }
    out.push((Tok::End, src.chars().count() + 1));
    Ok(out)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }
    fn col(&self) -> usize {
        self.toks[self.pos].1
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(err(self.col(), format!("expected {}, found {}", describe(&want), describe(self.peek()))))
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen)?;
                    let e = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(func, Box::new(e)));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(Constant::Pi)),
                    "e" => return Ok(Expr::Const(Constant::E)),
                    _ => {}
                }
                if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                    if k == 0 {
                        return Err(err(col, "coordinates are numbered from x1"));
                    }
                    if let Some(dim) = self.dim {
                        if k > dim {
                            return Err(err(col, format!("variable x{k} exceeds dimension {dim}")));
                        }
                    }
                    return Ok(Expr::Var(k - 1));
                }
                Err(err(col, format!("unknown identifier '{name}'")))
            }
            t => Err(err(col, format!("expected a number, name or '(', found {}", describe(&t)))),
        }
    }
}

/// Parses an expression; errors report line 1 and a 1-based column.
pub fn parse_expression(text: &str) -> Result<Expr> {
    parse_expression_in(text, None)
}

/// As [`parse_expression`], rejecting variables beyond `dim` when given.
pub fn parse_expression_in(text: &str, dim: Option<usize>) -> Result<Expr> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, dim };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(err(p.col(), format!("expected an operator or end of input, found {}", describe(p.peek()))));
    }
    Ok(e)
}

/// Random well-formed expression of bounded depth over `dim` variables.
pub fn random_expression(rng: &mut impl Rng, depth: usize, dim: usize) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => Expr::Num(rng.gen_range(0..1000) as f64 / 8.0),
            1 => Expr::Num(rng.gen::<f64>() * 10f64.powi(rng.gen_range(-8..8))),
            2 => Expr::Const(if rng.gen_bool(0.5) { Constant::Pi } else { Constant::E }),
            _ => Expr::Var(rng.gen_range(0..dim.max(1))),
        };
    }
    let sub = |rng: &mut _| Box::new(random_expression(rng, depth - 1, dim));
    match rng.gen_range(0..7) {
        0 => Expr::Neg(sub(rng)),
        1 => Expr::Call(Func::ALL[rng.gen_range(0..Func::ALL.len())], sub(rng)),
        k => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][k - 2];
            Expr::Bin(op, sub(rng), sub(rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        parse_expression(s).unwrap().eval(x)
    }

    #[test]
    fn documented_values() {
        assert_eq!(ev("4/(1+x1^2+x2^2)^2", &[0.0, 0.0]), 4.0);
        assert_eq!(ev("2*x1 + -3", &[1.0]), -1.0);
        assert!(ev("sin(pi)", &[]).abs() <= 1e-15);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("8/4/2", &[]), 1.0);
        assert_eq!(ev("1.5e2 + 2E-1", &[]), 150.2);
        assert_eq!(ev("e", &[]), std::f64::consts::E);
    }

    #[test]
    fn errors_carry_columns() {
        let col = |s: &str| match parse_expression(s) {
            Err(Error::Parse { column, .. }) => column,
            other => panic!("{other:?}"),
        };
        assert_eq!(col("1 + * 2"), 5);
        assert_eq!(col("sin 2"), 5);
        assert_eq!(col("(1 + 2"), 7);
        assert_eq!(col("foo(1)"), 1);
        assert_eq!(col("1 $ 2"), 3);
        assert_eq!(col("1 2"), 3);
        assert!(matches!(parse_expression_in("x3", Some(2)), Err(Error::Parse { column: 1, .. })));
        assert!(parse_expression("x0").is_err());
    }

    #[test]
    fn printing_round_trips() {
        for s in ["-(x1 + 2)*3", "(x1^2)^3", "x1^x2^2", "-x1^2", "(-x1)^2", "1 - (2 - 3)", "2/(3*x1)"] {
            let e = parse_expression(s).unwrap();
            assert_eq!(parse_expression(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }
}
