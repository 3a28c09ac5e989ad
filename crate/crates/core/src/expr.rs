//! Small expression language for scenario coefficients.
//!
//! Grammar: reals, the variables `x t u v ux`, caller-supplied parameter
//! names, `+ - * / ^` (right associative, binds tighter than unary minus),
//! parentheses and the functions
//! `sin cos tan exp log sqrt abs tanh sinh cosh gamma enzyme min max ml`.
//! `enzyme(u) = -u / (1 + |u|)`; `ml(a, b, z)` is the Mittag-Leffler function.
//! Constants `pi` and `e`.

use crate::error::{Error, Result};
use crate::mlf::{ml, MlParams};
use crate::special::gamma;
use std::fmt;

/// Variable slots every expression can refer to, in evaluation order.
pub const BASE_VARS: [&str; 5] = ["x", "t", "u", "v", "ux"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
    Gamma,
    Enzyme,
    Min,
    Max,
    Ml,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "sinh" => (Func::Sinh, 1),
            "cosh" => (Func::Cosh, 1),
            "gamma" => (Func::Gamma, 1),
            "enzyme" => (Func::Enzyme, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "ml" => (Func::Ml, 3),
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Gamma => "gamma",
            Func::Enzyme => "enzyme",
            Func::Min => "min",
            Func::Max => "max",
            Func::Ml => "ml",
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
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its slot names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    names: Vec<String>,
}

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn bin(op: BinOp, a: Node, b: Node) -> Node {
    match (op, &a, &b) {
        (_, Node::Num(x), Node::Num(y)) => Node::Num(apply_bin(op, *x, *y)),
        (BinOp::Add, Node::Num(z), _) if *z == 0.0 => b,
        (BinOp::Add | BinOp::Sub, _, Node::Num(z)) if *z == 0.0 => a,
        (BinOp::Sub, Node::Num(z), _) if *z == 0.0 => Node::Neg(Box::new(b)),
        (BinOp::Mul, Node::Num(z), _) | (BinOp::Mul, _, Node::Num(z)) if *z == 0.0 => num(0.0),
        (BinOp::Mul, Node::Num(o), _) if *o == 1.0 => b,
        (BinOp::Mul | BinOp::Div, _, Node::Num(o)) if *o == 1.0 => a,
        (BinOp::Div, Node::Num(z), _) if *z == 0.0 => num(0.0),
        _ => Node::Bin(op, Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(v) => Node::Num(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn call(f: Func, args: Vec<Node>) -> Node {
    Node::Call(f, args)
}

fn apply_bin(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Pow => a.powf(b),
    }
}

fn apply_fn(f: Func, args: &[f64]) -> f64 {
    let a = args[0];
    match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => a.tan(),
        Func::Exp => a.exp(),
        Func::Log => a.ln(),
        Func::Sqrt => a.sqrt(),
        Func::Abs => a.abs(),
        Func::Tanh => a.tanh(),
        Func::Sinh => a.sinh(),
        Func::Cosh => a.cosh(),
        Func::Gamma => gamma(a),
        Func::Enzyme => -a / (1.0 + a.abs()),
        Func::Min => a.min(args[1]),
        Func::Max => a.max(args[1]),
        Func::Ml => match MlParams::new(args[0], args[1]) {
            Ok(p) => ml(p, args[2]).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        },
    }
}

fn eval_node(n: &Node, vars: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => vars.get(*i).copied().unwrap_or(0.0),
        Node::Neg(a) => -eval_node(a, vars),
        Node::Bin(op, a, b) => apply_bin(*op, eval_node(a, vars), eval_node(b, vars)),
        Node::Call(f, args) => {
            let mut buf = [0.0; 3];
            for (slot, a) in buf.iter_mut().zip(args) {
                *slot = eval_node(a, vars);
            }
            apply_fn(*f, &buf[..args.len()])
        }
    }
}

fn uses_node(n: &Node, slot: usize) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(i) => *i == slot,
        Node::Neg(a) => uses_node(a, slot),
        Node::Bin(_, a, b) => uses_node(a, slot) || uses_node(b, slot),
        Node::Call(_, args) => args.iter().any(|a| uses_node(a, slot)),
    }
}

/// `None` when a non-differentiable builtin depends on the variable.
fn diff_node(n: &Node, slot: usize) -> Option<Node> {
    if !uses_node(n, slot) {
        return Some(num(0.0));
    }
    Some(match n {
        Node::Num(_) => num(0.0),
        Node::Var(_) => num(1.0),
        Node::Neg(a) => neg(diff_node(a, slot)?),
        Node::Bin(op, a, b) => {
            let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
            let (da, db) = (diff_node(&a, slot)?, diff_node(&b, slot)?);
            match op {
                BinOp::Add => bin(BinOp::Add, da, db),
                BinOp::Sub => bin(BinOp::Sub, da, db),
                BinOp::Mul => bin(BinOp::Add, bin(BinOp::Mul, da, b), bin(BinOp::Mul, a, db)),
                BinOp::Div => bin(
                    BinOp::Div,
                    bin(BinOp::Sub, bin(BinOp::Mul, da, b.clone()), bin(BinOp::Mul, a, db)),
                    bin(BinOp::Mul, b.clone(), b),
                ),
                BinOp::Pow => {
                    if !uses_node(&b, slot) {
                        // b a^(b-1) a'
                        let lowered = bin(BinOp::Pow, a, bin(BinOp::Sub, b.clone(), num(1.0)));
                        bin(BinOp::Mul, bin(BinOp::Mul, b, lowered), da)
                    } else {
                        // a^b (b' ln a + b a' / a)
                        let whole = n.clone();
                        let term = bin(
                            BinOp::Add,
                            bin(BinOp::Mul, db, call(Func::Log, vec![a.clone()])),
                            bin(BinOp::Div, bin(BinOp::Mul, b, da), a),
                        );
                        bin(BinOp::Mul, whole, term)
                    }
                }
            }
        }
        Node::Call(f, args) => {
            let a = args[0].clone();
            let da = diff_node(&a, slot)?;
            let outer = match f {
                Func::Sin => call(Func::Cos, vec![a]),
                Func::Cos => neg(call(Func::Sin, vec![a])),
                Func::Tan => {
                    let c = call(Func::Cos, vec![a]);
                    bin(BinOp::Div, num(1.0), bin(BinOp::Mul, c.clone(), c))
                }
                Func::Exp => n.clone(),
                Func::Log => bin(BinOp::Div, num(1.0), a),
                Func::Sqrt => bin(BinOp::Div, num(0.5), n.clone()),
                Func::Abs => bin(BinOp::Div, a.clone(), call(Func::Abs, vec![a])),
                Func::Tanh => {
                    let t = n.clone();
                    bin(BinOp::Sub, num(1.0), bin(BinOp::Mul, t.clone(), t))
                }
                Func::Sinh => call(Func::Cosh, vec![a]),
                Func::Cosh => call(Func::Sinh, vec![a]),
                Func::Enzyme => {
                    let d = bin(BinOp::Add, num(1.0), call(Func::Abs, vec![a]));
                    neg(bin(BinOp::Div, num(1.0), bin(BinOp::Mul, d.clone(), d)))
                }
                Func::Gamma | Func::Min | Func::Max | Func::Ml => return None,
            };
            bin(BinOp::Mul, outer, da)
        }
    })
}

impl Expr {
    /// Parses over the base variables only.
    pub fn parse(text: &str) -> Result<Expr> {
        Self::parse_with(text, &[])
    }

    /// Parses with extra parameter names, evaluated after the base slots.
    pub fn parse_with(text: &str, params: &[&str]) -> Result<Expr> {
        let mut names: Vec<String> = BASE_VARS.iter().map(|s| s.to_string()).collect();
        names.extend(params.iter().map(|s| s.to_string()));
        let mut p = Parser { src: text, chars: text.char_indices().collect(), pos: 0, names: &names };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error(format!("unexpected '{}'", p.chars[p.pos].1)));
        }
        Ok(Expr { root, names })
    }

    pub fn constant(v: f64) -> Expr {
        Expr { root: num(v), names: BASE_VARS.iter().map(|s| s.to_string()).collect() }
    }

    /// Evaluates with slots `[x, t, u, v, ux, params...]`; missing slots read 0.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        eval_node(&self.root, vars)
    }

    pub fn eval_xt(&self, x: f64, t: f64) -> f64 {
        self.eval(&[x, t])
    }

    pub fn eval_xtu(&self, x: f64, t: f64, u: f64) -> f64 {
        self.eval(&[x, t, u])
    }

    pub fn eval_uv(&self, u: f64, v: f64) -> f64 {
        self.eval(&[0.0, 0.0, u, v])
    }

    fn slot(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn uses(&self, name: &str) -> bool {
        self.slot(name).is_some_and(|s| uses_node(&self.root, s))
    }

    /// Symbolic partial derivative; `None` if a builtin without a derivative
    /// rule depends on `name`.
    pub fn derivative(&self, name: &str) -> Option<Expr> {
        let slot = self.slot(name)?;
        diff_node(&self.root, slot).map(|root| Expr { root, names: self.names.clone() })
    }

    pub fn is_zero(&self) -> bool {
        self.root == Node::Num(0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &Node, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match n {
                Node::Num(v) => write!(f, "{v}"),
                Node::Var(i) => f.write_str(&names[*i]),
                Node::Neg(a) => {
                    f.write_str("-(")?;
                    go(a, names, f)?;
                    f.write_str(")")
                }
                Node::Bin(op, a, b) => {
                    let s = match op {
                        BinOp::Add => " + ",
                        BinOp::Sub => " - ",
                        BinOp::Mul => "*",
                        BinOp::Div => "/",
                        BinOp::Pow => "^",
                    };
                    f.write_str("(")?;
                    go(a, names, f)?;
                    f.write_str(s)?;
                    go(b, names, f)?;
                    f.write_str(")")
                }
                Node::Call(func, args) => {
                    write!(f, "{}(", func.name())?;
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            f.write_str(", ")?;
                        }
                        go(a, names, f)?;
                    }
                    f.write_str(")")
                }
            }
        }
        go(&self.root, &self.names, f)
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn error(&self, message: String) -> Error {
        Error::Parse { line: 1, column: self.pos.min(self.chars.len()) + 1, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin(BinOp::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin(BinOp::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin(BinOp::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin(BinOp::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of expression".into()));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'".into()));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = self.pos;
            while self.pos < self.chars.len() && (self.chars[self.pos].1.is_ascii_alphanumeric() || self.chars[self.pos].1 == '_') {
                self.pos += 1;
            }
            let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
            if self.peek() == Some('(') {
                let Some((f, arity)) = Func::lookup(&name) else {
                    self.pos = start;
                    return Err(self.error(format!("unknown function '{name}'")));
                };
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                if !self.eat(')') {
                    return Err(self.error("expected ')' or ','".into()));
                }
                if args.len() != arity {
                    self.pos = start;
                    return Err(self.error(format!("'{name}' takes {arity} argument(s), got {}", args.len())));
                }
                return Ok(Node::Call(f, args));
            }
            if let Some(i) = self.names.iter().position(|n| *n == name) {
                return Ok(Node::Var(i));
            }
            return match name.as_str() {
                "pi" => Ok(num(std::f64::consts::PI)),
                "e" => Ok(num(std::f64::consts::E)),
                _ => {
                    self.pos = start;
                    Err(self.error(format!("unknown identifier '{name}'")))
                }
            };
        }
        Err(self.error(format!("unexpected '{c}'")))
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.chars.len() && p.chars[p.pos].1.is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.chars.len() && self.chars[self.pos].1 == '.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.chars.len() && matches!(self.chars[self.pos].1, 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.chars.len() && matches!(self.chars[self.pos].1, '+' | '-') {
                self.pos += 1;
            }
            if self.pos < self.chars.len() && self.chars[self.pos].1.is_ascii_digit() {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let lo = self.chars[start].0;
        let hi = self.chars.get(self.pos).map_or(self.src.len(), |c| c.0);
        let text = &self.src[lo..hi];
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error(format!("malformed number '{text}'"))
        })
    }
}
