//! Expression language for user-defined geometries.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | func '(' expr ')' | '(' expr ')'
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::numkit::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply(self, x: &Jet) -> Jet {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Numbers are non-negative; a leading minus is [`Expr::Neg`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(s: &str) -> Expr {
        Expr::Var(s.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Expr::Bin(BinOp::Pow, ..) => PREC_POW,
        }
    }

    fn write_at(&self, out: &mut String, min: u8) {
        let paren = self.prec() < min;
        if paren {
            out.push('(');
        }
        match self {
            Expr::Num(x) => out.push_str(&format!("{x}")),
            Expr::Var(s) => out.push_str(s),
            Expr::Neg(a) => {
                out.push('-');
                a.write_at(out, PREC_NEG);
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write_at(out, 0);
                out.push(')');
            }
            Expr::Bin(op, a, b) => {
                let (l, r) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_ADD, PREC_MUL),
                    BinOp::Mul | BinOp::Div => (PREC_MUL, PREC_NEG),
                    BinOp::Pow => (PREC_ATOM, PREC_NEG),
                };
                a.write_at(out, l);
                out.push(op.symbol());
                b.write_at(out, r);
            }
        }
        if paren {
            out.push(')');
        }
    }

    /// Free identifiers, sorted.
    pub fn variables(&self) -> Vec<String> {
        let mut acc = std::collections::BTreeSet::new();
        self.collect_vars(&mut acc);
        acc.into_iter().collect()
    }

    fn collect_vars(&self, acc: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(s) => {
                acc.insert(s.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(acc),
            Expr::Bin(_, a, b) => {
                a.collect_vars(acc);
                b.collect_vars(acc);
            }
        }
    }

    /// Resolves identifiers to coordinate slots or constants.
    pub fn compile(&self, coords: &[String], consts: &BTreeMap<String, f64>) -> Result<Compiled, String> {
        Ok(Compiled(self.lower(coords, consts)?))
    }

    fn lower(&self, coords: &[String], consts: &BTreeMap<String, f64>) -> Result<Node, String> {
        Ok(match self {
            Expr::Num(x) => Node::Const(*x),
            Expr::Var(s) => {
                if let Some(i) = coords.iter().position(|c| c == s) {
                    Node::Coord(i)
                } else if let Some(v) = consts.get(s) {
                    Node::Const(*v)
                } else {
                    return Err(format!("unbound variable `{s}`"));
                }
            }
            Expr::Neg(a) => Node::Neg(Box::new(a.lower(coords, consts)?)),
            Expr::Call(f, a) => Node::Call(*f, Box::new(a.lower(coords, consts)?)),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.lower(coords, consts)?, b.lower(coords, consts)?);
                match (op, &b) {
                    (BinOp::Pow, Node::Const(p)) if p.fract() == 0.0 && p.abs() <= 64.0 => Node::Powi(Box::new(a), *p as i32),
                    (BinOp::Pow, Node::Const(p)) => Node::Powf(Box::new(a), *p),
                    _ => Node::Bin(*op, Box::new(a), Box::new(b)),
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_at(&mut s, 0);
        f.write_str(&s)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Coord(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Powi(Box<Node>, i32),
    Powf(Box<Node>, f64),
    Call(Func, Box<Node>),
}

/// An expression with identifiers resolved, evaluable on jets.
#[derive(Debug, Clone)]
pub struct Compiled(Node);

impl Compiled {
    pub fn eval_jet(&self, x: &[Jet]) -> Jet {
        eval_node(&self.0, x)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let j: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, x.len().max(1), 0)).collect();
        if j.is_empty() {
            return eval_node(&self.0, &[Jet::constant(0.0, 1, 0)]).value();
        }
        self.eval_jet(&j).value()
    }

    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Const(_) => true,
                Node::Coord(_) => false,
                Node::Neg(a) | Node::Call(_, a) | Node::Powi(a, _) | Node::Powf(a, _) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.0)
    }
}

fn eval_node(n: &Node, x: &[Jet]) -> Jet {
    match n {
        Node::Const(c) => x[0].lift(*c),
        Node::Coord(i) => x[*i],
        Node::Neg(a) => -eval_node(a, x),
        Node::Call(f, a) => f.apply(&eval_node(a, x)),
        Node::Powi(a, p) => eval_node(a, x).powi(*p),
        Node::Powf(a, p) => eval_node(a, x).powf(*p),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => (a.ln() * b).exp(),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// lexer and parser

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// Token kinds that would have been accepted.
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number `{x}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of line".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const SYMBOLS: &str = "+-*/^()[],=";

/// Tokenizes one line; `#` starts a comment. Columns are 1-based characters.
pub(crate) fn lex_line(text: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
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
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| ParseError {
                line,
                column,
                message: format!("malformed number `{s}`"),
                expected: vec![],
            })?;
            out.push(Token { tok: Tok::Num(v), line, column });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line,
                column,
            });
            continue;
        }
        if SYMBOLS.contains(c) {
            out.push(Token { tok: Tok::Sym(c), line, column });
            i += 1;
            continue;
        }
        return Err(ParseError {
            line,
            column,
            message: format!("unexpected character `{c}`"),
            expected: vec![],
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: chars.len() + 1,
    });
    Ok(out)
}

pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    /// Identifiers an expression may mention; unchecked when `None`.
    pub scope: Option<Vec<String>>,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Cursor {
        Cursor { toks, pos: 0, scope: None }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    pub fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            column: t.column,
            message: format!("unexpected {}", t.tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Like [`Cursor::error`], pointing at the token just consumed.
    pub fn error_before(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos.saturating_sub(1)];
        ParseError {
            line: t.line,
            column: t.column,
            message: format!("unexpected {}", t.tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{c}`")]))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.next();
                Ok((s, t.line, t.column))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    pub fn expect_end(&mut self) -> Result<(), ParseError> {
        if self.peek().tok == Tok::End {
            Ok(())
        } else {
            Err(self.error(&["end of line"]))
        }
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_sym('^') {
            return Ok(Expr::bin(BinOp::Pow, base, self.unary()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(x) => {
                self.next();
                Ok(Expr::Num(x))
            }
            Tok::Ident(s) => {
                self.next();
                if self.peek().tok == Tok::Sym('(') {
                    let f = Func::from_name(&s).ok_or_else(|| ParseError {
                        line: t.line,
                        column: t.column,
                        message: format!("unknown function `{s}`"),
                        expected: Func::ALL.iter().map(|f| f.name().to_string()).collect(),
                    })?;
                    self.next();
                    let a = self.expr()?;
                    if self.peek().tok == Tok::Sym(',') {
                        let t = self.peek();
                        return Err(ParseError {
                            line: t.line,
                            column: t.column,
                            message: format!("arity error: `{s}` takes one argument"),
                            expected: vec!["`)`".into()],
                        });
                    }
                    self.expect_sym(')')?;
                    Ok(Expr::call(f, a))
                } else {
                    if let Some(scope) = &self.scope {
                        if !scope.contains(&s) {
                            return Err(ParseError {
                                line: t.line,
                                column: t.column,
                                message: format!("unbound variable `{s}`"),
                                expected: scope.iter().map(|v| format!("`{v}`")).collect(),
                            });
                        }
                    }
                    Ok(Expr::Var(s))
                }
            }
            Tok::Sym('(') => {
                self.next();
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            _ => Err(self.error(&["number", "identifier", "function call", "`(`", "`-`"])),
        }
    }
}

/// Parses a single expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut c = Cursor::new(lex_line(text, 1)?);
    let e = c.expr()?;
    if c.peek().tok != Tok::End {
        return Err(c.error(&["operator", "end of expression"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("1 - 2 - 3").unwrap();
        assert_eq!(e.to_string(), "1-2-3");
        let e = parse_expr("1 - (2 - 3)").unwrap();
        assert_eq!(e.to_string(), "1-(2-3)");
        let e = parse_expr("2^3^2").unwrap();
        assert_eq!(e, parse_expr("2^(3^2)").unwrap());
        let e = parse_expr("-x^2").unwrap();
        assert_eq!(e, Expr::Neg(Box::new(parse_expr("x^2").unwrap())));
        assert_eq!(parse_expr("(2^3)^2").unwrap().to_string(), "(2^3)^2");
        assert_eq!(parse_expr("a*-b").unwrap().to_string(), "a*-b");
    }

    #[test]
    fn evaluation_with_jets() {
        let e = parse_expr("sin(u)*cos(v) + u^2/2").unwrap();
        let c = e.compile(&["u".into(), "v".into()], &BTreeMap::new()).unwrap();
        let x = Jet::variables(&[0.3, 0.7], 2);
        let j = c.eval_jet(&x);
        assert!((j.value() - (0.3f64.sin() * 0.7f64.cos() + 0.045)).abs() < 1e-15);
        assert!((j.partial(&[0]) - (0.3f64.cos() * 0.7f64.cos() + 0.3)).abs() < 1e-15);
    }

    #[test]
    fn diagnostics_carry_positions() {
        let err = parse_expr("1 + * 2").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
        assert!(err.expected.iter().any(|s| s == "number"));
        let err = parse_expr("foo(1)").unwrap_err();
        assert!(err.message.contains("unknown function"));
        let err = parse_expr("1 $ 2").unwrap_err();
        assert_eq!(err.column, 3);
        let err = parse_expr("(1 + 2").unwrap_err();
        assert_eq!(err.expected, vec!["`)`".to_string()]);
    }

    #[test]
    fn unbound_names_are_rejected_at_compile() {
        let e = parse_expr("k*x").unwrap();
        assert!(e.compile(&["x".into()], &BTreeMap::new()).is_err());
        let mut p = BTreeMap::new();
        p.insert("k".to_string(), 2.0);
        assert_eq!(e.compile(&["x".into()], &p).unwrap().eval(&[3.0]), 6.0);
    }
}
