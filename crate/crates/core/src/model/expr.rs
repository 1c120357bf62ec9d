//! Coefficient expression language.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | VAR | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | abs | sqrt | exp | ln | sign
//! ```
//!
//! `VAR` is `t` for coefficients and delays and `k` for impulse sequences.
//! Expressions are validated at parse time so that evaluation is total on
//! the whole real line.

use std::fmt;

use thiserror::Error;

use super::interval::Interval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("invalid expression: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sign => "sign",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Expression tree in a single free variable.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffExpr {
    Const(f64),
    Var,
    Pi,
    Neg(Box<CoeffExpr>),
    Add(Box<CoeffExpr>, Box<CoeffExpr>),
    Sub(Box<CoeffExpr>, Box<CoeffExpr>),
    Mul(Box<CoeffExpr>, Box<CoeffExpr>),
    Div(Box<CoeffExpr>, Box<CoeffExpr>),
    Pow(Box<CoeffExpr>, Box<CoeffExpr>),
    Call(Func, Box<CoeffExpr>),
}

use CoeffExpr::*;

/// Parses an expression in `t` and validates it.
pub fn parse_expr(text: &str) -> Result<CoeffExpr, ExprError> {
    parse_expr_in(text, "t")
}

/// Parses an impulse-sequence expression in the index `k`.
pub fn parse_sequence_expr(text: &str) -> Result<CoeffExpr, ExprError> {
    parse_expr_in(text, "k")
}

pub fn parse_expr_in(text: &str, var: &str) -> Result<CoeffExpr, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        var,
        end: text.len(),
    };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ExprError::Syntax {
            pos: tok.pos,
            msg: format!("unexpected {}", tok.kind),
        });
    }
    e.validate()?;
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "number {v}"),
            TokKind::Ident(s) => write!(f, "identifier '{s}'"),
            TokKind::Op(c) => write!(f, "'{c}'"),
            TokKind::LParen => write!(f, "'('"),
            TokKind::RParen => write!(f, "')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number '{lit}'"),
            })?;
            if !v.is_finite() {
                return Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("number '{lit}' is not finite"),
                });
            }
            out.push(Token {
                kind: TokKind::Num(v),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        pos: start,
                        msg: format!("unexpected character '{c}'"),
                    })
                }
            };
            i += c.len_utf8();
            out.push(Token { kind, pos: start });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    var: &'a str,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c), ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn err_here(&self, msg: &str) -> ExprError {
        let pos = self.peek().map(|t| t.pos).unwrap_or(self.end);
        ExprError::Syntax {
            pos,
            msg: msg.to_string(),
        }
    }

    fn expr(&mut self) -> Result<CoeffExpr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Add(Box::new(lhs), Box::new(rhs))
            } else {
                Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<CoeffExpr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<CoeffExpr, ExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<CoeffExpr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<CoeffExpr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err_here("unexpected end of input"));
        };
        self.pos += 1;
        match tok.kind {
            TokKind::Num(v) => Ok(Const(v)),
            TokKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if name == self.var {
                    Ok(Var)
                } else if name == "pi" {
                    Ok(Pi)
                } else if let Some(f) = Func::from_name(&name) {
                    match self.peek() {
                        Some(Token {
                            kind: TokKind::LParen, ..
                        }) => self.pos += 1,
                        _ => return Err(self.err_here(&format!("expected '(' after {name}"))),
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Call(f, Box::new(arg)))
                } else {
                    Err(ExprError::Syntax {
                        pos: tok.pos,
                        msg: format!("unknown identifier '{name}'"),
                    })
                }
            }
            other => Err(ExprError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {other}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::RParen, ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err_here("expected ')'")),
        }
    }
}

impl CoeffExpr {
    pub fn constant(v: f64) -> Self {
        Const(v)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Const(v) => *v,
            Var => t,
            Pi => std::f64::consts::PI,
            Neg(a) => -a.eval(t),
            Add(a, b) => a.eval(t) + b.eval(t),
            Sub(a, b) => a.eval(t) - b.eval(t),
            Mul(a, b) => a.eval(t) * b.eval(t),
            Div(a, b) => a.eval(t) / b.eval(t),
            Pow(a, b) => pow(a.eval(t), b.eval(t)),
            Call(f, a) => f.apply(a.eval(t)),
        }
    }

    /// Number of occurrences of the free variable.
    pub fn var_count(&self) -> usize {
        match self {
            Var => 1,
            Const(_) | Pi => 0,
            Neg(a) | Call(_, a) => a.var_count(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => a.var_count() + b.var_count(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.var_count() == 0
    }

    /// Interval enclosure of the expression for `t` in `domain`.
    pub fn enclose(&self, domain: Interval) -> Interval {
        match self {
            Const(v) => Interval::point(*v),
            Var => domain,
            Pi => Interval::point(std::f64::consts::PI),
            Neg(a) => -a.enclose(domain),
            Add(a, b) => a.enclose(domain) + b.enclose(domain),
            Sub(a, b) => a.enclose(domain) - b.enclose(domain),
            Mul(a, b) => a.enclose(domain) * b.enclose(domain),
            Div(a, b) => a.enclose(domain).div(b.enclose(domain)),
            Pow(a, b) => {
                let base = a.enclose(domain);
                if b.is_constant() {
                    let n = b.eval(0.0);
                    if n.fract() == 0.0 && n.abs() < i32::MAX as f64 {
                        return base.powi(n as i32);
                    }
                }
                if base.lo > 0.0 {
                    (b.enclose(domain) * base.ln()).exp()
                } else {
                    Interval::ENTIRE
                }
            }
            Call(f, a) => {
                let x = a.enclose(domain);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Abs => x.abs(),
                    Func::Sqrt => Interval::new(x.lo.max(0.0).sqrt(), x.hi.max(0.0).sqrt()),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sign => x.sign(),
                }
            }
        }
    }

    /// Checks totality on the whole real line: divisors bounded away from
    /// zero, `sqrt` of nonnegative constants only, powers with a positive base
    /// or a constant integer exponent.
    pub fn validate(&self) -> Result<(), ExprError> {
        match self {
            Const(_) | Var | Pi => Ok(()),
            Neg(a) => a.validate(),
            Add(a, b) | Sub(a, b) | Mul(a, b) => {
                a.validate()?;
                b.validate()
            }
            Div(a, b) => {
                a.validate()?;
                b.validate()?;
                if !b.nonvanishing() {
                    return Err(ExprError::Validation(format!("divisor '{b}' may vanish")));
                }
                Ok(())
            }
            Pow(a, b) => {
                a.validate()?;
                b.validate()?;
                let int_exp = b.is_constant() && b.eval(0.0).fract() == 0.0;
                let base = a.enclose(Interval::ENTIRE);
                if int_exp {
                    if b.eval(0.0) < 0.0 && base.contains_zero() {
                        return Err(ExprError::Validation(format!(
                            "base '{a}' of a negative power may vanish"
                        )));
                    }
                    Ok(())
                } else if base.lo > 0.0 {
                    Ok(())
                } else {
                    Err(ExprError::Validation(format!(
                        "power '{self}' needs a positive base or an integer constant exponent"
                    )))
                }
            }
            Call(Func::Sqrt, a) => {
                a.validate()?;
                if !a.is_constant() {
                    return Err(ExprError::Validation("sqrt only applies to constants".into()));
                }
                if a.eval(0.0) < 0.0 {
                    return Err(ExprError::Validation(format!("sqrt of negative constant '{a}'")));
                }
                Ok(())
            }
            Call(Func::Ln, a) => {
                a.validate()?;
                if a.enclose(Interval::ENTIRE).lo > 0.0 {
                    Ok(())
                } else {
                    Err(ExprError::Validation(format!(
                        "argument '{a}' of ln may be nonpositive"
                    )))
                }
            }
            Call(_, a) => a.validate(),
        }
    }

    /// Structural or enclosure-based proof that the value is never zero.
    fn nonvanishing(&self) -> bool {
        match self {
            Call(Func::Exp, _) => true,
            Pow(a, _) if a.enclose(Interval::ENTIRE).lo > 0.0 => true,
            Mul(a, b) => a.nonvanishing() && b.nonvanishing(),
            Neg(a) => a.nonvanishing(),
            _ => !self.enclose(Interval::ENTIRE).contains_zero(),
        }
    }

    /// Symbolic derivative with respect to the free variable.
    pub fn derivative(&self) -> CoeffExpr {
        self.raw_derivative().simplify()
    }

    /// Folds constant subtrees and drops additive zeros and unit factors.
    pub fn simplify(&self) -> CoeffExpr {
        if self.is_constant() {
            return Const(self.eval(0.0));
        }
        let zero = |e: &CoeffExpr| matches!(e, Const(v) if *v == 0.0);
        let one = |e: &CoeffExpr| matches!(e, Const(v) if *v == 1.0);
        match self {
            Neg(a) => Neg(Box::new(a.simplify())),
            Add(x, y) => match (x.simplify(), y.simplify()) {
                (x, y) if zero(&x) => y,
                (x, y) if zero(&y) => x,
                (x, y) => Add(Box::new(x), Box::new(y)),
            },
            Sub(x, y) => match (x.simplify(), y.simplify()) {
                (x, y) if zero(&y) => x,
                (x, y) if zero(&x) => Neg(Box::new(y)),
                (x, y) => Sub(Box::new(x), Box::new(y)),
            },
            Mul(x, y) => match (x.simplify(), y.simplify()) {
                (x, _) | (_, x) if zero(&x) => Const(0.0),
                (x, y) if one(&x) => y,
                (x, y) if one(&y) => x,
                (x, y) => Mul(Box::new(x), Box::new(y)),
            },
            Div(x, y) => match (x.simplify(), y.simplify()) {
                (x, y) if one(&y) => x,
                (x, y) => Div(Box::new(x), Box::new(y)),
            },
            Pow(x, y) => Pow(Box::new(x.simplify()), Box::new(y.simplify())),
            Call(f, a) => Call(*f, Box::new(a.simplify())),
            Const(_) | Var | Pi => self.clone(),
        }
    }

    fn raw_derivative(&self) -> CoeffExpr {
        fn b(e: CoeffExpr) -> Box<CoeffExpr> {
            Box::new(e)
        }
        match self {
            Const(_) | Pi => Const(0.0),
            Var => Const(1.0),
            _ if self.is_constant() => Const(0.0),
            Neg(a) => Neg(b(a.raw_derivative())),
            Add(x, y) => Add(b(x.raw_derivative()), b(y.raw_derivative())),
            Sub(x, y) => Sub(b(x.raw_derivative()), b(y.raw_derivative())),
            Mul(x, y) => Add(
                b(Mul(b(x.raw_derivative()), y.clone())),
                b(Mul(x.clone(), b(y.raw_derivative()))),
            ),
            Div(x, y) => Div(
                b(Sub(
                    b(Mul(b(x.raw_derivative()), y.clone())),
                    b(Mul(x.clone(), b(y.raw_derivative()))),
                )),
                b(Pow(y.clone(), b(Const(2.0)))),
            ),
            Pow(x, y) if y.is_constant() => {
                let n = y.eval(0.0);
                Mul(
                    b(Mul(b(Const(n)), b(Pow(x.clone(), b(Const(n - 1.0)))))),
                    b(x.raw_derivative()),
                )
            }
            Pow(x, y) => {
                // x > 0 here by validation
                Mul(
                    b(self.clone()),
                    b(Add(
                        b(Mul(b(y.raw_derivative()), b(Call(Func::Ln, x.clone())))),
                        b(Div(b(Mul(y.clone(), b(x.raw_derivative()))), x.clone())),
                    )),
                )
            }
            Call(f, a) => {
                let inner = a.raw_derivative();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(b(Call(Func::Sin, a.clone()))),
                    Func::Abs => Call(Func::Sign, a.clone()),
                    Func::Exp => self.clone(),
                    Func::Ln => Div(b(Const(1.0)), a.clone()),
                    Func::Sqrt | Func::Sign => Const(0.0),
                };
                Mul(b(outer), b(inner))
            }
        }
    }
}

fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

// Precedence levels used by the renderer.
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_NEG: u8 = 3;
const P_POW: u8 = 4;
const P_ATOM: u8 = 5;

impl CoeffExpr {
    fn prec(&self) -> u8 {
        match self {
            Add(..) | Sub(..) => P_ADD,
            Mul(..) | Div(..) => P_MUL,
            Neg(_) => P_NEG,
            Pow(..) => P_POW,
            Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => P_NEG,
            _ => P_ATOM,
        }
    }

    /// Renders using `var` as the variable name.
    pub fn render(&self, var: &str) -> String {
        let mut s = String::new();
        self.write(&mut s, var);
        s
    }

    fn write_child(&self, out: &mut String, var: &str, min_prec: u8) {
        if self.prec() < min_prec {
            out.push('(');
            self.write(out, var);
            out.push(')');
        } else {
            self.write(out, var);
        }
    }

    fn write(&self, out: &mut String, var: &str) {
        match self {
            Const(v) => out.push_str(&format!("{v:?}")),
            Var => out.push_str(var),
            Pi => out.push_str("pi"),
            Neg(a) => {
                out.push('-');
                a.write_child(out, var, P_NEG);
            }
            Add(a, b) | Sub(a, b) => {
                a.write_child(out, var, P_ADD);
                out.push_str(if matches!(self, Add(..)) { " + " } else { " - " });
                b.write_child(out, var, P_ADD + 1);
            }
            Mul(a, b) | Div(a, b) => {
                a.write_child(out, var, P_MUL);
                out.push_str(if matches!(self, Mul(..)) { "*" } else { "/" });
                b.write_child(out, var, P_NEG);
            }
            Pow(a, b) => {
                a.write_child(out, var, P_ATOM);
                out.push('^');
                b.write_child(out, var, P_NEG);
            }
            Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(out, var);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("t"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_published_coefficients() {
        let b1 = parse_expr("9 - abs(cos(sqrt(2)*t))").unwrap();
        assert_eq!(b1.eval(0.0), 8.0);
        let tau = parse_expr("0.003 - 0.001*sin(2*pi*t)").unwrap();
        assert!((tau.eval(0.25) - 0.002).abs() < 1e-15);
        assert_eq!(parse_expr("0.1").unwrap().eval(7.0), 0.1);
    }

    #[test]
    fn lattice_form_of_alternating_delay() {
        // (1 + (-1)^t)/1000 on the integers
        let e = parse_expr("0.001 + 0.001*cos(pi*t)").unwrap();
        for k in 0..20 {
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((e.eval(k as f64) - (1.0 + alt) / 1000.0).abs() < 1e-15);
        }
        assert!((e.eval(2.0) - 0.002).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_position() {
        assert_eq!(
            parse_expr("3 +"),
            Err(ExprError::Syntax {
                pos: 3,
                msg: "unexpected end of input".into()
            })
        );
        assert!(matches!(parse_expr("sin t"), Err(ExprError::Syntax { pos: 4, .. })));
        assert!(matches!(parse_expr("2 $ 3"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expr("(1 + t"), Err(ExprError::Syntax { pos: 6, .. })));
        assert!(matches!(parse_expr("foo(t)"), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_expr("1 2"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expr("k + 1"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn validation_rejects_partial_expressions() {
        assert!(matches!(parse_expr("1/t"), Err(ExprError::Validation(_))));
        assert!(matches!(parse_expr("1/sin(t)"), Err(ExprError::Validation(_))));
        assert!(parse_expr("1/(2 + sin(t))").is_ok());
        assert!(matches!(parse_expr("sqrt(t)"), Err(ExprError::Validation(_))));
        assert!(matches!(parse_expr("sqrt(-2)"), Err(ExprError::Validation(_))));
        assert!(matches!(parse_expr("(-1)^t"), Err(ExprError::Validation(_))));
        assert!(matches!(parse_expr("ln(t)"), Err(ExprError::Validation(_))));
        assert!(parse_expr("cos(t)^2").is_ok());
        assert!(parse_expr("2^t").is_ok());
        assert!(matches!(parse_expr("sin(t)^-1"), Err(ExprError::Validation(_))));
    }

    #[test]
    fn sequence_expressions() {
        let lam = parse_sequence_expr("exp(0.04^(1/2^k)) - 1").unwrap();
        assert!((lam.eval(1.0) - (0.2f64.exp() - 1.0)).abs() < 1e-15);
        let h2 = parse_sequence_expr("-0.01/2^k").unwrap();
        assert_eq!(h2.eval(1.0), -0.005);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse_expr("2 - 3 - 4").unwrap().eval(0.0), -5.0);
        assert_eq!(parse_expr("2 / 4 / 2").unwrap().eval(0.0), 0.25);
        assert_eq!(parse_expr("-2^2").unwrap().eval(0.0), -4.0);
        assert_eq!(parse_expr("2^3^2").unwrap().eval(0.0), 512.0);
        assert_eq!(parse_expr("2*-3").unwrap().eval(0.0), -6.0);
        assert_eq!(parse_expr("1.5e-3*1e3").unwrap().eval(0.0), 1.5);
    }

    #[test]
    fn enclosure_of_single_use_expression_is_tight() {
        let e = parse_expr("9 - abs(cos(sqrt(2)*t))").unwrap();
        let enc = e.enclose(Interval::new(0.0, f64::INFINITY));
        assert_eq!((enc.lo, enc.hi), (8.0, 9.0));
        assert_eq!(e.var_count(), 1);
    }

    #[test]
    fn derivative_of_delay() {
        let tau = parse_expr("0.003 - 0.001*sin(2*pi*t)").unwrap();
        let d = tau.derivative();
        assert_eq!(d.var_count(), 1);
        let expected = |t: f64| -0.002 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).cos();
        for &t in &[0.0, 0.1, 0.37, 2.5] {
            assert!((d.eval(t) - expected(t)).abs() < 1e-15);
        }
    }

    fn central_diff(e: &CoeffExpr, t: f64) -> f64 {
        let h = 1e-5;
        (e.eval(t + h) - e.eval(t - h)) / (2.0 * h)
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let cases = [
            "0.003 - 0.001*sin(2*pi*t)",
            "0.002 - 0.001*cos(2*pi*t)",
            "0.07 + 0.02*cos(t)^2",
            "1/(2 + sin(3*t))",
            "exp(0.1*sin(t))*cos(sqrt(2)*t)",
            "2^(0.5*sin(t))",
            "ln(3 + cos(t))",
        ];
        let mut rng = 0.123_f64;
        for src in cases {
            let e = parse_expr(src).unwrap();
            let d = e.derivative();
            for _ in 0..1000 {
                rng = (rng * 9301.0 + 49297.0) % 233280.0;
                let t = rng / 233280.0 * 50.0;
                assert!((d.eval(t) - central_diff(&e, t)).abs() < 1e-6, "{src} at {t}");
            }
        }
    }

    fn arb_expr() -> impl Strategy<Value = CoeffExpr> {
        let leaf = prop_oneof![(0u32..1000).prop_map(|v| Const(v as f64 / 8.0)), Just(Var), Just(Pi),];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Mul(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Call(Func::Sin, Box::new(a))),
                inner.clone().prop_map(|a| Call(Func::Abs, Box::new(a))),
                inner.clone().prop_map(|a| Pow(Box::new(a), Box::new(Const(2.0)))),
                inner.prop_map(|a| Div(Box::new(a), Box::new(Const(3.0)))),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let parsed = parse_expr(&text).unwrap();
            prop_assert_eq!(&parsed, &e);
            let again = parse_expr(&parsed.to_string()).unwrap();
            prop_assert_eq!(again, parsed);
        }

        #[test]
        fn simplify_preserves_values(e in arb_expr(), t in -5.0f64..5.0) {
            let s = e.simplify();
            prop_assert!(s.var_count() <= e.var_count());
            let (a, b) = (e.eval(t), s.eval(t));
            if a.is_finite() {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}: {a} {b}", e, s);
            }
        }
    }
}
