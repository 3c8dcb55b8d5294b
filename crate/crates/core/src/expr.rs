//! A small expression language for the model coefficients.
//!
//! Coefficients (`sigma`, `b`, `beta_tilde`, custom jump kernels) are given
//! as strings in the config file and parsed into an [`Expr`] tree. The
//! grammar is deliberately tiny: literals, the variables `x` and `z`
//! (the latter only for two-variable jump kernels), `+ - * /`, unary
//! minus, and the calls `sin cos exp tanh abs clamp min max pow`. The
//! `pow` exponent must be a literal so that regularity metadata stays
//! estimable on a grid.

use crate::error::{Error, EvalError, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Z,
}

/// Parsed expression tree. Immutable after parse, cheap to evaluate,
/// safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Tanh(Box<Expr>),
    Abs(Box<Expr>),
    Clamp(Box<Expr>, Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

/// Parse an expression in the single variable `x`.
pub fn parse_expr(text: &str) -> Result<Expr> {
    parse_with_vars(text, false)
}

/// Parse a two-variable jump kernel in `x` and `z`.
pub fn parse_kernel(text: &str) -> Result<Expr> {
    parse_with_vars(text, true)
}

fn parse_with_vars(text: &str, allow_z: bool) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            msg: "empty expression".into(),
            col: 1,
        });
    }
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        allow_z,
        end_col: text.len() + 1,
    };
    let e = p.parse_add()?;
    if p.pos < p.tokens.len() {
        let t = &p.tokens[p.pos];
        return Err(Error::Parse {
            msg: format!("unexpected `{}`", t.text),
            col: t.col,
        });
    }
    Ok(e)
}

/// Evaluate a single-variable expression at `x`.
pub fn eval_expr(e: &Expr, x: f64) -> Result<f64> {
    Ok(e.eval(x)?)
}

impl Expr {
    pub fn eval(&self, x: f64) -> std::result::Result<f64, EvalError> {
        self.eval_xz(x, 0.0)
    }

    pub fn eval_xz(&self, x: f64, z: f64) -> std::result::Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Z) => z,
            Expr::Neg(a) => -a.eval_xz(x, z)?,
            Expr::Add(a, b) => a.eval_xz(x, z)? + b.eval_xz(x, z)?,
            Expr::Sub(a, b) => a.eval_xz(x, z)? - b.eval_xz(x, z)?,
            Expr::Mul(a, b) => a.eval_xz(x, z)? * b.eval_xz(x, z)?,
            Expr::Div(a, b) => {
                let d = b.eval_xz(x, z)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_xz(x, z)? / d
            }
            Expr::Sin(a) => a.eval_xz(x, z)?.sin(),
            Expr::Cos(a) => a.eval_xz(x, z)?.cos(),
            Expr::Exp(a) => a.eval_xz(x, z)?.exp(),
            Expr::Tanh(a) => a.eval_xz(x, z)?.tanh(),
            Expr::Abs(a) => a.eval_xz(x, z)?.abs(),
            Expr::Clamp(a, lo, hi) => {
                let v = a.eval_xz(x, z)?;
                let lo = lo.eval_xz(x, z)?;
                let hi = hi.eval_xz(x, z)?;
                v.max(lo).min(hi)
            }
            Expr::Min(a, b) => a.eval_xz(x, z)?.min(b.eval_xz(x, z)?),
            Expr::Max(a, b) => a.eval_xz(x, z)?.max(b.eval_xz(x, z)?),
            Expr::Pow(a, c) => a.eval_xz(x, z)?.powf(*c),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(self.op_name()))
        }
    }

    fn op_name(&self) -> &'static str {
        match self {
            Expr::Num(_) => "literal",
            Expr::Var(_) => "variable",
            Expr::Neg(_) => "-",
            Expr::Add(..) => "+",
            Expr::Sub(..) => "-",
            Expr::Mul(..) => "*",
            Expr::Div(..) => "/",
            Expr::Sin(_) => "sin",
            Expr::Cos(_) => "cos",
            Expr::Exp(_) => "exp",
            Expr::Tanh(_) => "tanh",
            Expr::Abs(_) => "abs",
            Expr::Clamp(..) => "clamp",
            Expr::Min(..) => "min",
            Expr::Max(..) => "max",
            Expr::Pow(..) => "pow",
        }
    }

    /// Structurally a literal zero (used to fast-path drift-free models).
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Constant value, if the tree contains no variable.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Var(_) => None,
            Expr::Num(v) => Some(*v),
            _ => {
                if self.uses_var(Var::X) || self.uses_var(Var::Z) {
                    None
                } else {
                    self.eval(0.0).ok()
                }
            }
        }
    }

    pub fn uses_var(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Tanh(a)
            | Expr::Abs(a) => a.uses_var(v),
            Expr::Pow(a, _) => a.uses_var(v),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => a.uses_var(v) || b.uses_var(v),
            Expr::Clamp(a, b, c) => a.uses_var(v) || b.uses_var(v) || c.uses_var(v),
        }
    }
}

/// Grid estimate of the Lipschitz constant: max adjacent difference
/// quotient over `n` uniform nodes on `[lo, hi]`. Always a lower bound
/// on the true constant.
pub fn estimate_lipschitz(e: &Expr, lo: f64, hi: f64, n: usize) -> Result<f64> {
    if !(lo < hi) || n < 2 {
        return Err(Error::invalid(
            "estimate_lipschitz needs lo < hi and n >= 2",
        ));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut prev = e.eval(lo)?;
    let mut best = 0.0f64;
    for i in 1..n {
        let x = lo + step * i as f64;
        let v = e.eval(x)?;
        best = best.max(((v - prev) / step).abs());
        prev = v;
    }
    Ok(best)
}

/// True iff all `n` grid evaluations on `[lo, hi]` land inside the
/// closed band `[band.0, band.1]`.
pub fn check_range(e: &Expr, lo: f64, hi: f64, band: (f64, f64), n: usize) -> Result<bool> {
    if !(lo < hi) || n < 1 {
        return Err(Error::invalid("check_range needs lo < hi and n >= 1"));
    }
    let step = if n == 1 {
        0.0
    } else {
        (hi - lo) / (n - 1) as f64
    };
    for i in 0..n {
        let v = e.eval(lo + step * i as f64)?;
        if v < band.0 || v > band.1 {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// lexer / parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    text: String,
    col: usize, // 1-based
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '+' | '-' | '*' | '/' | '(' | ')' | ',' => {
                let kind = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => Tok::Comma,
                };
                out.push(Token {
                    kind,
                    text: c.to_string(),
                    col,
                });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    msg: format!("bad number `{s}`"),
                    col,
                })?;
                out.push(Token {
                    kind: Tok::Num(v),
                    text: s.to_string(),
                    col,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Ident,
                    text: text[start..i].to_string(),
                    col,
                });
            }
            _ => {
                return Err(Error::Parse {
                    msg: format!("unexpected character `{c}`"),
                    col,
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    allow_z: bool,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        let col = self.peek().map(|t| t.col).unwrap_or(self.end_col);
        Error::Parse {
            msg: msg.into(),
            col,
        }
    }

    fn expect(&mut self, kind: Tok, what: &str) -> Result<Token> {
        match self.peek() {
            Some(t) if t.kind == kind => Ok(self.bump().unwrap()),
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn parse_add(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_mul()?;
        while let Some(t) = self.peek() {
            lhs = match t.kind {
                Tok::Plus => {
                    self.bump();
                    Expr::Add(Box::new(lhs), Box::new(self.parse_mul()?))
                }
                Tok::Minus => {
                    self.bump();
                    Expr::Sub(Box::new(lhs), Box::new(self.parse_mul()?))
                }
                _ => break,
            };
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some(t) = self.peek() {
            lhs = match t.kind {
                Tok::Star => {
                    self.bump();
                    Expr::Mul(Box::new(lhs), Box::new(self.parse_unary()?))
                }
                Tok::Slash => {
                    self.bump();
                    Expr::Div(Box::new(lhs), Box::new(self.parse_unary()?))
                }
                _ => break,
            };
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if matches!(self.peek().map(|t| &t.kind), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        let t = match self.bump() {
            Some(t) => t,
            None => {
                return Err(Error::Parse {
                    msg: "unexpected end of expression".into(),
                    col: self.end_col,
                })
            }
        };
        match t.kind {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.parse_add()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(e)
            }
            Tok::Ident => self.parse_ident(t),
            _ => Err(Error::Parse {
                msg: format!("unexpected `{}`", t.text),
                col: t.col,
            }),
        }
    }

    fn parse_ident(&mut self, t: Token) -> Result<Expr> {
        let is_call = matches!(self.peek().map(|p| &p.kind), Some(Tok::LParen));
        if !is_call {
            return match t.text.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "z" if self.allow_z => Ok(Expr::Var(Var::Z)),
                _ => Err(Error::Parse {
                    msg: format!("unknown identifier `{}`", t.text),
                    col: t.col,
                }),
            };
        }
        self.bump(); // '('
        let mut args = vec![self.parse_add()?];
        while matches!(self.peek().map(|p| &p.kind), Some(Tok::Comma)) {
            self.bump();
            args.push(self.parse_add()?);
        }
        self.expect(Tok::RParen, "closing `)`")?;

        let n_args = args.len();
        let arity_err = |want: usize| Error::Parse {
            msg: format!("`{}` takes {} argument(s), got {}", t.text, want, n_args),
            col: t.col,
        };
        let mut args = args.into_iter();
        macro_rules! one {
            () => {{
                if n_args != 1 {
                    return Err(arity_err(1));
                }
                Box::new(args.next().unwrap())
            }};
        }
        match t.text.as_str() {
            "sin" => Ok(Expr::Sin(one!())),
            "cos" => Ok(Expr::Cos(one!())),
            "exp" => Ok(Expr::Exp(one!())),
            "tanh" => Ok(Expr::Tanh(one!())),
            "abs" => Ok(Expr::Abs(one!())),
            "min" | "max" => {
                if n_args != 2 {
                    return Err(arity_err(2));
                }
                let a = Box::new(args.next().unwrap());
                let b = Box::new(args.next().unwrap());
                Ok(if t.text == "min" {
                    Expr::Min(a, b)
                } else {
                    Expr::Max(a, b)
                })
            }
            "clamp" => {
                if n_args != 3 {
                    return Err(arity_err(3));
                }
                let a = Box::new(args.next().unwrap());
                let lo = Box::new(args.next().unwrap());
                let hi = Box::new(args.next().unwrap());
                Ok(Expr::Clamp(a, lo, hi))
            }
            "pow" => {
                if n_args != 2 {
                    return Err(arity_err(2));
                }
                let base = args.next().unwrap();
                let expo = match args.next().unwrap() {
                    Expr::Num(v) => v,
                    Expr::Neg(inner) => match *inner {
                        Expr::Num(v) => -v,
                        _ => {
                            return Err(Error::Parse {
                                msg: "`pow` exponent must be a numeric literal".into(),
                                col: t.col,
                            })
                        }
                    },
                    _ => {
                        return Err(Error::Parse {
                            msg: "`pow` exponent must be a numeric literal".into(),
                            col: t.col,
                        })
                    }
                };
                Ok(Expr::Pow(Box::new(base), expo))
            }
            _ => Err(Error::Parse {
                msg: format!("unknown function `{}`", t.text),
                col: t.col,
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// canonical printing: parse(print(e)) == e for parser-produced trees
// ---------------------------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let needs_parens = self.prec() < min_prec;
        if needs_parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(Var::X) => write!(f, "x")?,
            Expr::Var(Var::Z) => write!(f, "z")?,
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 4)?;
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Sin(a) => write!(f, "sin({a})")?,
            Expr::Cos(a) => write!(f, "cos({a})")?,
            Expr::Exp(a) => write!(f, "exp({a})")?,
            Expr::Tanh(a) => write!(f, "tanh({a})")?,
            Expr::Abs(a) => write!(f, "abs({a})")?,
            Expr::Clamp(a, lo, hi) => write!(f, "clamp({a}, {lo}, {hi})")?,
            Expr::Min(a, b) => write!(f, "min({a}, {b})")?,
            Expr::Max(a, b) => write!(f, "max({a}, {b})")?,
            Expr::Pow(a, c) => {
                write!(f, "pow({a}, ")?;
                if *c < 0.0 {
                    write!(f, "-{}", -c)?;
                } else {
                    write!(f, "{c}")?;
                }
                write!(f, ")")?;
            }
        }
        if needs_parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_and_basic_eval() {
        let e = parse_expr("1.2").unwrap();
        assert_eq!(e, Expr::Num(1.2));
        assert_eq!(e.eval(3.7).unwrap(), 1.2);

        let e = parse_expr("0.5 + 0.3*sin(x)").unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 0.5);

        let e = parse_expr("clamp(x, 0.2, 1.8)").unwrap();
        assert_eq!(e.eval(3.0).unwrap(), 1.8);
        assert_eq!(e.eval(0.0).unwrap(), 0.2);

        let e = parse_expr("x*x").unwrap();
        assert_eq!(e.eval(3.0).unwrap(), 9.0);

        let e = parse_expr("pow(abs(x), 0.5)").unwrap();
        assert_eq!(e.eval(4.0).unwrap(), 2.0);
    }

    #[test]
    fn syntax_errors_carry_columns() {
        match parse_expr("1 + foo") {
            Err(Error::Parse { col, msg }) => {
                assert_eq!(col, 5);
                assert!(msg.contains("foo"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("sin(x, 1)") {
            Err(Error::Parse { col, .. }) => assert_eq!(col, 1),
            other => panic!("expected arity error, got {other:?}"),
        }
        assert!(parse_expr("(1 + 2").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("pow(x, x)").is_err());
        // `z` is only legal in kernel expressions
        assert!(parse_expr("z").is_err());
        assert!(parse_kernel("sin(z)*x").is_ok());
    }

    #[test]
    fn division_by_zero_and_non_finite_are_errors() {
        let e = parse_expr("1/x").unwrap();
        assert!(matches!(e.eval(0.0), Err(EvalError::DivisionByZero)));
        assert!(e.eval(2.0).is_ok());

        let e = parse_expr("exp(x)").unwrap();
        assert!(matches!(e.eval(1e9), Err(EvalError::NonFinite(_))));
    }

    #[test]
    fn lipschitz_examples() {
        let c = parse_expr("1.7").unwrap();
        assert_eq!(estimate_lipschitz(&c, -1.0, 1.0, 50).unwrap(), 0.0);

        let lin = parse_expr("0.3*x").unwrap();
        let l = estimate_lipschitz(&lin, -1.0, 1.0, 100).unwrap();
        assert!((l - 0.3).abs() < 1e-12);

        let s = parse_expr("sin(x)").unwrap();
        let l = estimate_lipschitz(&s, 0.0, std::f64::consts::PI, 10_000).unwrap();
        assert!(l <= 1.0 && l >= 0.99, "lipschitz estimate {l}");
    }

    #[test]
    fn range_examples() {
        let e = parse_expr("1.2").unwrap();
        assert!(check_range(&e, -1.0, 1.0, (0.0, 2.0), 100).unwrap());

        let e = parse_expr("clamp(1 + 0.5*sin(x), 0.6, 1.8)").unwrap();
        assert!(check_range(&e, -10.0, 10.0, (0.5, 1.9), 1000).unwrap());

        let e = parse_expr("2.5").unwrap();
        assert!(!check_range(&e, -1.0, 1.0, (0.0, 2.0), 10).unwrap());
    }

    #[test]
    fn print_parse_round_trip() {
        for s in [
            "1.2",
            "0.5 + 0.3*sin(x)",
            "clamp(1 + 0.5*sin(x), 0.6, 1.8)",
            "x*x - 1/(x + 2)",
            "-(x + 1)*x",
            "pow(abs(x), 1.5) - min(x, 0.3)",
            "max(x, -2)/tanh(x + 4)",
            "cos(exp(x/8))",
        ] {
            let e = parse_expr(s).unwrap();
            let printed = e.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            assert_eq!(e, reparsed, "round trip failed for `{s}` -> `{printed}`");
        }
    }

    #[test]
    fn determinism_bitwise() {
        let e = parse_expr("clamp(1 + 0.5*sin(x), 0.6, 1.8)*pow(abs(x), 0.25)").unwrap();
        for &x in &[0.0, 0.1, -3.7, 1e-8, 42.0] {
            let a = e.eval(x).unwrap();
            let b = e.eval(x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
