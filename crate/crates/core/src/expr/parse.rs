//! Recursive-descent parser for integrand expressions.
//!
//! ```text
//! expr    := term { ("+" | "-") term }
//! term    := unary { ("*" | "/") unary }
//! unary   := "-" unary | power
//! power   := base [ "^" expon ]
//! expon   := integer | ident | "(" expr ")" | "-" expon
//! base    := number | ident | "x" "[" expr "]" | "(" expr ")"
//!          | ("exp" | "sin" | "cos" | "sqrt") "(" expr ")"
//!          | ("sum" | "prod") "(" ident "=" expr ".." expr "," expr ")"
//! ```
//!
//! Unary minus binds looser than `^`, so `-x[1]^2` is `-(x[1]^2)`.
//! Exponents, subscripts and summation bounds must evaluate to integers;
//! they may use `d` and in-scope index variables. Index variables can also
//! appear as plain numbers in the body. `sqrt` accepts constant arguments
//! only.

use super::{Expr, ExprStore};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("index {index} at byte {pos} is outside 1..={d}")]
    IndexOutOfRange { pos: usize, index: i64, d: u32 },
    #[error("expected an integer at byte {pos}")]
    NotInteger { pos: usize },
    #[error("division by zero at byte {pos}")]
    DivisionByZero { pos: usize },
    #[error("`{name}` at byte {pos} needs a constant argument")]
    NonConstantArgument { pos: usize, name: String },
}

/// Parses `text` for dimension `d` and returns its canonical form.
pub fn parse(store: &mut ExprStore, text: &str, d: u32) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, at: 0 };
    let ast = p.expr()?;
    if let Some(t) = p.tokens.get(p.at) {
        return Err(ParseError::Syntax { pos: t.pos, msg: format!("unexpected {:?}", t.tok) });
    }
    let mut lower = Lower { store, d, scope: Vec::new() };
    lower.lower(&ast)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    DotDot,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            // A single '.' starts a fraction; '..' is the range operator.
            if i < b.len() && b[i] == b'.' && b.get(i + 1) != Some(&b'.') {
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    while j < b.len() && b[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let v: f64 = text[start..i].parse().map_err(|_| ParseError::Syntax {
                pos: start,
                msg: format!("bad number `{}`", &text[start..i]),
            })?;
            out.push(Token { tok: Tok::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), pos: start });
        } else if c == b'.' && b.get(i + 1) == Some(&b'.') {
            out.push(Token { tok: Tok::DotDot, pos: i });
            i += 2;
        } else if b"+-*/^()[],=".contains(&c) {
            out.push(Token { tok: Tok::Sym(c as char), pos: i });
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap();
            return Err(ParseError::Syntax { pos: i, msg: format!("unexpected character `{ch}`") });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Debug)]
enum Ast {
    Num(f64),
    Ident(String, usize),
    Var(Box<Ast>, usize),
    Neg(Box<Ast>),
    Bin(char, Box<Ast>, Box<Ast>, usize),
    Pow(Box<Ast>, Box<Ast>, usize),
    Call(Func, Box<Ast>, usize),
    Big { product: bool, index: String, lo: Box<Ast>, hi: Box<Ast>, body: Box<Ast> },
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).or(self.tokens.last()).map_or(0, |t| t.pos)
    }

    fn end_pos(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.pos + 1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.tokens.get(self.at) {
            Some(t) => ParseError::Syntax { pos: t.pos, msg: format!("expected {wanted}, found {:?}", t.tok) },
            None => ParseError::Syntax { pos: self.end_pos(), msg: format!("expected {wanted}, found end of input") },
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let pos = self.pos();
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs), pos);
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let pos = self.pos();
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs), pos);
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.eat('-') {
            Ok(Ast::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.base()?;
        let pos = self.pos();
        if self.eat('^') {
            let e = self.exponent()?;
            Ok(Ast::Pow(Box::new(base), Box::new(e), pos))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<Ast, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Sym('-')) => {
                self.at += 1;
                Ok(Ast::Neg(Box::new(self.exponent()?)))
            }
            Some(Tok::Sym('(')) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Ast::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                Ok(Ast::Ident(name, pos))
            }
            _ => Err(self.unexpected("an exponent")),
        }
    }

    fn base(&mut self) -> Result<Ast, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Ast::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "x" => {
                        self.expect('[')?;
                        let i = self.expr()?;
                        self.expect(']')?;
                        Ok(Ast::Var(Box::new(i), pos))
                    }
                    "exp" | "sin" | "cos" | "sqrt" if self.peek() == Some(&Tok::Sym('(')) => {
                        let f = match name.as_str() {
                            "exp" => Func::Exp,
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            _ => Func::Sqrt,
                        };
                        self.at += 1;
                        let a = self.expr()?;
                        self.expect(')')?;
                        Ok(Ast::Call(f, Box::new(a), pos))
                    }
                    "sum" | "prod" if self.peek() == Some(&Tok::Sym('(')) => {
                        self.at += 1;
                        let index = match self.peek().cloned() {
                            Some(Tok::Ident(v)) => {
                                self.at += 1;
                                v
                            }
                            _ => return Err(self.unexpected("an index variable")),
                        };
                        self.expect('=')?;
                        let lo = self.expr()?;
                        if self.peek() != Some(&Tok::DotDot) {
                            return Err(self.unexpected("`..`"));
                        }
                        self.at += 1;
                        let hi = self.expr()?;
                        self.expect(',')?;
                        let body = self.expr()?;
                        self.expect(')')?;
                        Ok(Ast::Big {
                            product: name == "prod",
                            index,
                            lo: Box::new(lo),
                            hi: Box::new(hi),
                            body: Box::new(body),
                        })
                    }
                    _ => Ok(Ast::Ident(name, pos)),
                }
            }
            _ => Err(self.unexpected("an operand")),
        }
    }
}

struct Lower<'a> {
    store: &'a mut ExprStore,
    d: u32,
    scope: Vec<(String, i64)>,
}

impl Lower<'_> {
    fn lookup(&self, name: &str, pos: usize) -> Result<f64, ParseError> {
        if let Some((_, v)) = self.scope.iter().rev().find(|(n, _)| n == name) {
            return Ok(*v as f64);
        }
        match name {
            "d" => Ok(self.d as f64),
            "pi" => Ok(std::f64::consts::PI),
            "e" => Ok(std::f64::consts::E),
            _ => Err(ParseError::UnknownIdentifier { pos, name: name.to_string() }),
        }
    }

    fn int(&mut self, a: &Ast, pos: usize) -> Result<i64, ParseError> {
        let e = self.lower(a)?;
        match self.store.as_const(e) {
            Some(v) if v.fract() == 0.0 && v.abs() < 1e15 => Ok(v as i64),
            _ => Err(ParseError::NotInteger { pos }),
        }
    }

    fn lower(&mut self, a: &Ast) -> Result<Expr, ParseError> {
        Ok(match a {
            Ast::Num(v) => self.store.constant(*v),
            Ast::Ident(name, pos) => {
                let v = self.lookup(name, *pos)?;
                self.store.constant(v)
            }
            Ast::Var(i, pos) => {
                let k = self.int(i, *pos)?;
                if k < 1 || k > self.d as i64 {
                    return Err(ParseError::IndexOutOfRange { pos: *pos, index: k, d: self.d });
                }
                self.store.var(k as u32)
            }
            Ast::Neg(x) => {
                let x = self.lower(x)?;
                self.store.neg(x)
            }
            Ast::Bin(op, l, r, pos) => {
                let l = self.lower(l)?;
                let r = self.lower(r)?;
                match op {
                    '+' => self.store.add(l, r),
                    '-' => self.store.sub(l, r),
                    '*' => self.store.mul(l, r),
                    _ => {
                        if self.store.as_const(r) == Some(0.0) {
                            return Err(ParseError::DivisionByZero { pos: *pos });
                        }
                        self.store.div(l, r)
                    }
                }
            }
            Ast::Pow(b, e, pos) => {
                let k = self.int(e, *pos)?;
                let k = i32::try_from(k).map_err(|_| ParseError::NotInteger { pos: *pos })?;
                let b = self.lower(b)?;
                if k < 0 && self.store.as_const(b) == Some(0.0) {
                    return Err(ParseError::DivisionByZero { pos: *pos });
                }
                self.store.pow(b, k)
            }
            Ast::Call(f, x, pos) => {
                let x = self.lower(x)?;
                match f {
                    Func::Exp => self.store.exp(x),
                    Func::Sin => self.store.sin(x),
                    Func::Cos => self.store.cos(x),
                    Func::Sqrt => match self.store.as_const(x) {
                        Some(v) => self.store.constant(v.sqrt()),
                        None => {
                            return Err(ParseError::NonConstantArgument { pos: *pos, name: "sqrt".into() })
                        }
                    },
                }
            }
            Ast::Big { product, index, lo, hi, body } => {
                let lo = self.int(lo, 0)?;
                let hi = self.int(hi, 0)?;
                let mut parts = Vec::new();
                for i in lo..=hi {
                    self.scope.push((index.clone(), i));
                    let r = self.lower(body);
                    self.scope.pop();
                    parts.push(r?);
                }
                if *product {
                    self.store.product(parts)
                } else {
                    self.store.linear_combination(0.0, parts.into_iter().map(|p| (1.0, p)))
                }
            }
        })
    }
}
