//! Imputation Expression Language: a closed arithmetic language over the
//! boundary variables of a gap. See `docs/iel.md` for the grammar.

use crate::error::{Error, Result};

/// Variables bound by the evaluator, in slot order.
pub const VARIABLES: [&str; 10] = ["u", "lat0", "lon0", "lat1", "lon1", "dt_total", "vlat0", "vlon0", "vlat1", "vlon1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan2,
    Sqrt,
    Min,
    Max,
    Clamp,
    Pow,
    Abs,
    Exp,
    Sinc,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan2" => Func::Atan2,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            "clamp" => Func::Clamp,
            "pow" => Func::Pow,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "sinc" => Func::Sinc,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Atan2 | Func::Min | Func::Max | Func::Pow => 2,
            Func::Clamp => 3,
            _ => 1,
        }
    }

    fn apply(self, a: &[f64]) -> f64 {
        match self {
            Func::Sin => a[0].sin(),
            Func::Cos => a[0].cos(),
            Func::Tan => a[0].tan(),
            Func::Atan2 => a[0].atan2(a[1]),
            Func::Sqrt => a[0].sqrt(),
            Func::Min => a[0].min(a[1]),
            Func::Max => a[0].max(a[1]),
            Func::Clamp => {
                if a[1] > a[2] {
                    f64::NAN
                } else {
                    a[0].clamp(a[1], a[2])
                }
            }
            Func::Pow => a[0].powf(a[1]),
            Func::Abs => a[0].abs(),
            Func::Exp => a[0].exp(),
            Func::Sinc => {
                if a[0] == 0.0 {
                    1.0
                } else {
                    a[0].sin() / a[0]
                }
            }
        }
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
pub enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Pow,
    Sep,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::Eof;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while let Some(c) = self.peek() {
            if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
            } else if c.is_whitespace() && c != '\n' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Tok::Eof, start));
        };
        if c == '\n' || c == ';' {
            self.pos += 1;
            return Ok((Tok::Sep, start));
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        if self.src[self.pos..].starts_with("**") {
            self.pos += 2;
            return Ok((Tok::Pow, start));
        }
        self.pos += c.len_utf8();
        match c {
            '^' => Ok((Tok::Pow, start)),
            '+' | '-' | '*' | '/' | '(' | ')' | ',' | '=' => Ok((Tok::Op(c), start)),
            _ => Err(Error::Syntax { offset: start, reason: format!("unexpected character {c:?}") }),
        }
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
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
        self.pos = i;
        let text = &self.src[start..i];
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| Error::Syntax { offset: start, reason: format!("bad number {text:?}") })
    }
}

/// One `name = expr` statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub name: String,
    pub node: Node,
    /// Source text of the right-hand side, trimmed.
    pub text: String,
}

/// A parsed function body. `lat` and `lon` are mandatory; every other
/// binding is either a named constant (a parameter) or a helper
/// expression visible to later statements.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub bindings: Vec<Binding>,
    lat_slot: usize,
    lon_slot: usize,
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    scope: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset: self.offset(), reason: reason.into() })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {c:?}"))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node> {
        let at = self.pos;
        let mut lhs = match self.bump() {
            Tok::Num(v) => Node::Num(v),
            Tok::Op('-') => Node::Neg(Box::new(self.expr(30)?)),
            Tok::Op('+') => self.expr(30)?,
            Tok::Op('(') => {
                let e = self.expr(0)?;
                self.expect(')')?;
                e
            }
            Tok::Ident(name) => self.ident(name)?,
            _ => {
                self.pos = at;
                return self.syntax("expected an expression");
            }
        };
        loop {
            let (op, lbp, rbp) = match self.peek() {
                Tok::Op('+') => (BinOp::Add, 10, 11),
                Tok::Op('-') => (BinOp::Sub, 10, 11),
                Tok::Op('*') => (BinOp::Mul, 20, 21),
                Tok::Op('/') => (BinOp::Div, 20, 21),
                Tok::Pow => (BinOp::Pow, 41, 40),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ident(&mut self, name: String) -> Result<Node> {
        if *self.peek() == Tok::Op('(') {
            let at = self.offset();
            self.bump();
            let func =
                Func::lookup(&name).ok_or_else(|| Error::UnsupportedConstruct(format!("unknown function {name:?}")))?;
            let mut args = Vec::new();
            if *self.peek() != Tok::Op(')') {
                loop {
                    args.push(self.expr(0)?);
                    if *self.peek() == Tok::Op(',') {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(')')?;
            if args.len() != func.arity() {
                return Err(Error::Syntax {
                    offset: at,
                    reason: format!("{name} takes {} argument(s), got {}", func.arity(), args.len()),
                });
            }
            return Ok(Node::Call(func, args));
        }
        if name == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        match self.scope.iter().rposition(|s| *s == name) {
            Some(slot) => Ok(Node::Slot(slot)),
            None => Err(Error::UnsupportedConstruct(format!("unknown identifier {name:?}"))),
        }
    }
}

impl Program {
    pub fn parse(src: &str) -> Result<Program> {
        let toks = Lexer::tokens(src)?;
        let mut scope: Vec<String> = VARIABLES.iter().map(|s| s.to_string()).collect();
        let mut bindings = Vec::new();
        let mut pos = 0;
        loop {
            while toks[pos].0 == Tok::Sep {
                pos += 1;
            }
            if toks[pos].0 == Tok::Eof {
                break;
            }
            let (name, at) = match &toks[pos] {
                (Tok::Ident(n), at) => (n.clone(), *at),
                (_, at) => return Err(Error::Syntax { offset: *at, reason: "expected `name = expression`".into() }),
            };
            if VARIABLES.contains(&name.as_str()) || Func::lookup(&name).is_some() || name == "pi" {
                return Err(Error::Syntax { offset: at, reason: format!("{name:?} is reserved") });
            }
            if scope[VARIABLES.len()..].contains(&name) {
                return Err(Error::Syntax { offset: at, reason: format!("{name:?} bound twice") });
            }
            pos += 1;
            if toks[pos].0 != Tok::Op('=') {
                return Err(Error::Syntax { offset: toks[pos].1, reason: "expected '='".into() });
            }
            pos += 1;
            let rhs_start = toks[pos].1;
            let mut p = Parser { toks: &toks, pos, scope: &scope };
            let node = p.expr(0)?;
            if !matches!(p.peek(), Tok::Sep | Tok::Eof) {
                return p.syntax("expected end of statement");
            }
            let rhs_end = p.offset();
            pos = p.pos;
            bindings.push(Binding { name: name.clone(), node, text: src[rhs_start..rhs_end].trim().to_string() });
            scope.push(name);
        }
        let slot_of = |n: &str| {
            bindings
                .iter()
                .position(|b| b.name == n)
                .map(|i| i + VARIABLES.len())
                .ok_or_else(|| Error::Syntax { offset: src.len(), reason: format!("missing `{n} = ...` statement") })
        };
        let lat_slot = slot_of("lat")?;
        let lon_slot = slot_of("lon")?;
        Ok(Program { bindings, lat_slot, lon_slot })
    }

    /// Named constants: bindings whose right-hand side is a literal.
    pub fn params(&self) -> Vec<(&str, f64)> {
        self.bindings
            .iter()
            .filter_map(|b| {
                let v = match &b.node {
                    Node::Num(v) => *v,
                    Node::Neg(inner) => match **inner {
                        Node::Num(v) => -v,
                        _ => return None,
                    },
                    _ => return None,
                };
                Some((b.name.as_str(), v))
            })
            .collect()
    }

    /// Canonical source: one `name = expr` statement per line.
    pub fn canonical_text(&self) -> String {
        self.bindings.iter().map(|b| format!("{} = {}", b.name, b.text)).collect::<Vec<_>>().join("\n")
    }

    /// Evaluates `(lat, lon)` with the ten variables bound in
    /// [`VARIABLES`] order.
    pub fn eval(&self, vars: &[f64; 10]) -> Result<(f64, f64)> {
        let mut slots = Vec::with_capacity(VARIABLES.len() + self.bindings.len());
        slots.extend_from_slice(vars);
        for b in &self.bindings {
            let v = eval_node(&b.node, &slots)?;
            slots.push(v);
        }
        Ok((slots[self.lat_slot], slots[self.lon_slot]))
    }
}

fn eval_node(node: &Node, slots: &[f64]) -> Result<f64> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Slot(i) => slots[*i],
        Node::Neg(e) => -eval_node(e, slots)?,
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_node(a, slots)?, eval_node(b, slots)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(Error::Evaluation("division by zero".into()));
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let vals = args.iter().map(|a| eval_node(a, slots)).collect::<Result<Vec<_>>>()?;
            f.apply(&vals)
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("non-finite intermediate value {v}")))
    }
}
