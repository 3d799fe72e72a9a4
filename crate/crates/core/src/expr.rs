//! A small expression language for right-hand sides and parameter curves.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' integer)?
//! primary := number | 't' | 'pi' | xI | pI | x[I] | p[I]
//!          | sin(expr) | cos(expr) | exp(expr) | pow(expr, integer)
//!          | '(' expr ')'
//! ```
//!
//! Every tree can be differentiated symbolically with respect to `t`, any
//! `x[i]` and any `p[j]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ode::{ParamFunction, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X(usize),
    P(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        (a, b) if is_num(&a, 0.0) => b,
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) if is_num(&a, 0.0) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        (a, _) if is_num(&a, 0.0) => num(0.0),
        (_, b) if is_num(&b, 0.0) => num(0.0),
        (a, b) if is_num(&a, 1.0) => b,
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if is_num(&a, 0.0) => num(0.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match (a, k) {
        (_, 0) => num(1.0),
        (a, 1) => a,
        (Expr::Num(x), k) => num(x.powi(k)),
        (a, k) => Expr::Pow(Box::new(a), k),
    }
}

impl Expr {
    pub fn eval(&self, t: f64, x: &[f64], p: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X(i)) => x[*i],
            Expr::Var(Var::P(j)) => p[*j],
            Expr::Neg(a) => -a.eval(t, x, p),
            Expr::Add(a, b) => a.eval(t, x, p) + b.eval(t, x, p),
            Expr::Sub(a, b) => a.eval(t, x, p) - b.eval(t, x, p),
            Expr::Mul(a, b) => a.eval(t, x, p) * b.eval(t, x, p),
            Expr::Div(a, b) => a.eval(t, x, p) / b.eval(t, x, p),
            Expr::Pow(a, k) => a.eval(t, x, p).powi(*k),
            Expr::Sin(a) => a.eval(t, x, p).sin(),
            Expr::Cos(a) => a.eval(t, x, p).cos(),
            Expr::Exp(a) => a.eval(t, x, p).exp(),
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(w) => num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Expr::Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                pow((**b).clone(), 2),
            ),
            Expr::Pow(a, k) => mul(mul(num(*k as f64), pow((**a).clone(), k - 1)), a.diff(v)),
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.diff(v)),
            Expr::Cos(a) => mul(neg(Expr::Sin(a.clone())), a.diff(v)),
            Expr::Exp(a) => mul(Expr::Exp(a.clone()), a.diff(v)),
        }
    }

    /// Whether the expression mentions `x` or `p`.
    pub fn depends_on_state_or_param(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(Var::T) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.depends_on_state_or_param(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on_state_or_param() || b.depends_on_state_or_param()
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::X(i)) => write!(f, "x{i}"),
            Expr::Var(Var::P(j)) => write!(f, "p{j}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "pow({a}, {k})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let start = (line, column);
        if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Syntax {
                line,
                column,
                message: format!("malformed number `{s}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(v),
                line: start.0,
                column: start.1,
            });
            column += j - i;
            i = j;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[i..j].iter().collect()),
                line: start.0,
                column: start.1,
            });
            column += j - i;
            i = j;
        } else if "+-*/^(),[]".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                line,
                column,
            });
            i += 1;
            column += 1;
        } else {
            return Err(Error::Syntax {
                line,
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push(Token { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    n: usize,
    l: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(tok: &Token, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: tok.line,
            column: tok.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        let tok = self.next();
        if tok.tok == Tok::Sym(c) {
            Ok(())
        } else {
            Err(Self::syntax(&tok, format!("expected `{c}`, found {}", describe(&tok.tok))))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Sym('-') {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if self.peek().tok == Tok::Sym('^') {
            self.next();
            let k = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32> {
        let mut sign = 1;
        if self.peek().tok == Tok::Sym('-') {
            self.next();
            sign = -1;
        }
        let tok = self.next();
        match tok.tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => Ok(sign * v as i32),
            _ => Err(Error::NonIntegerExponent {
                line: tok.line,
                column: tok.column,
            }),
        }
    }

    fn index(&mut self, name: &str, tok: &Token) -> Result<usize> {
        self.expect('[')?;
        let idx = self.next();
        let i = match idx.tok {
            Tok::Num(v) if v.fract() == 0.0 && v >= 0.0 => v as usize,
            _ => return Err(Self::syntax(&idx, format!("expected an index for `{name}`"))),
        };
        self.expect(']')?;
        let _ = tok;
        Ok(i)
    }

    fn variable(&self, kind: char, i: usize, tok: &Token, name: &str) -> Result<Expr> {
        let (limit, var) = match kind {
            'x' => (self.n, Var::X(i)),
            _ => (self.l, Var::P(i)),
        };
        if i >= limit {
            return Err(Error::UnknownIdentifier {
                name: name.to_string(),
                line: tok.line,
                column: tok.column,
            });
        }
        Ok(Expr::Var(var))
    }

    fn primary(&mut self) -> Result<Expr> {
        let tok = self.next();
        match &tok.tok {
            Tok::Num(v) => Ok(Expr::Num(*v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let name = name.clone();
                match name.as_str() {
                    "t" => return Ok(Expr::Var(Var::T)),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        self.expect('(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(')')?;
                        return Ok(match name.as_str() {
                            "sin" => Expr::Sin(a),
                            "cos" => Expr::Cos(a),
                            _ => Expr::Exp(a),
                        });
                    }
                    "pow" => {
                        self.expect('(')?;
                        let a = self.expr()?;
                        self.expect(',')?;
                        let k = self.integer()?;
                        self.expect(')')?;
                        return Ok(Expr::Pow(Box::new(a), k));
                    }
                    "x" | "p" if self.peek().tok == Tok::Sym('[') => {
                        let i = self.index(&name, &tok)?;
                        let kind = name.chars().next().unwrap_or('x');
                        return self.variable(kind, i, &tok, &format!("{name}[{i}]"));
                    }
                    _ => {}
                }
                let mut chars = name.chars();
                let head = chars.next().unwrap_or(' ');
                let rest = chars.as_str();
                if (head == 'x' || head == 'p') && !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                    if let Ok(i) = rest.parse::<usize>() {
                        return self.variable(head, i, &tok, &name);
                    }
                }
                Err(Error::UnknownIdentifier {
                    name,
                    line: tok.line,
                    column: tok.column,
                })
            }
            other => Err(Self::syntax(&tok, format!("unexpected {}", describe(other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

/// Parses `text` admitting `x[i]` for `i < n` and `p[j]` for `j < l`.
pub fn parse_with(text: &str, n: usize, l: usize) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            line: 1,
            column: 1,
            message: "empty expression".into(),
        });
    }
    let toks = tokenize(text)?;
    let mut parser = Parser { toks, pos: 0, n, l };
    let e = parser.expr()?;
    let tok = parser.next();
    if tok.tok != Tok::End {
        return Err(Parser::syntax(&tok, format!("unexpected {} after expression", describe(&tok.tok))));
    }
    Ok(e)
}

/// Parses `text` with unrestricted variable indices.
pub fn parse_expression(text: &str) -> Result<Expr> {
    parse_with(text, usize::MAX, usize::MAX)
}

fn eval_matrix(rows: &[Vec<Expr>], t: f64, x: &[f64], p: &[f64]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    let mut m = Matrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = e.eval(t, x, p);
        }
    }
    m
}

/// Builds a [`SystemModel`] with symbolic Jacobians from `n` right-hand
/// side expressions over `x[0..n)` and `p[0..l)`.
pub fn system_from_exprs(name: &str, rhs: &[String], l: usize, horizon: f64, x0: Vec<f64>) -> Result<SystemModel> {
    let n = rhs.len();
    let exprs: Vec<Expr> = rhs.iter().map(|s| parse_with(s, n, l)).collect::<Result<_>>()?;
    let jx: Vec<Vec<Expr>> = exprs.iter().map(|e| (0..n).map(|j| e.diff(Var::X(j))).collect()).collect();
    let jp: Vec<Vec<Expr>> = exprs.iter().map(|e| (0..l).map(|j| e.diff(Var::P(j))).collect()).collect();
    let f = Arc::new(exprs);
    let (jx, jp) = (Arc::new(jx), Arc::new(jp));
    let model = SystemModel::new(n, l, horizon, x0, move |t, x, p| f.iter().map(|e| e.eval(t, x, p)).collect())?
        .with_name(name)
        .with_jacobians(move |t, x, p| eval_matrix(&jx, t, x, p), move |t, x, p| eval_matrix(&jp, t, x, p));
    Ok(model)
}

/// Builds a parameter curve from `l` expressions in `t` only.
pub fn param_from_exprs(components: &[String]) -> Result<ParamFunction> {
    let exprs: Vec<Expr> = components.iter().map(|s| parse_with(s, 0, 0)).collect::<Result<_>>()?;
    let derivs: Vec<Expr> = exprs.iter().map(|e| e.diff(Var::T)).collect();
    let desc = components.join(", ");
    let (e, d) = (Arc::new(exprs), Arc::new(derivs));
    Ok(ParamFunction::new(
        components.len(),
        move |t| e.iter().map(|x| x.eval(t, &[], &[])).collect(),
        move |t| d.iter().map(|x| x.eval(t, &[], &[])).collect(),
        format!("[{desc}]"),
    ))
}
