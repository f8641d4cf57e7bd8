//! Arithmetic expressions in the single variable `t`.
//!
//! Every coefficient, delay and initial history of a model is written as one
//! of these expressions. The grammar, from loosest to tightest binding:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | 't' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! Unary minus sits below `^`, so `-2^2` is `-(2^2) = -4`, while the exponent
//! of a power may itself be negated (`2^-1 = 0.5`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest integer exponent evaluated by repeated multiplication.
const MAX_INTEGER_EXPONENT: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at offset {offset}: expected {expected}")]
pub struct ParseError {
    /// Byte offset into the source where parsing failed.
    pub offset: usize,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of nonpositive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("power {base}^{exponent} is not real")]
    PowerDomain { base: f64, exponent: f64 },
    #[error("non-finite intermediate result")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Function {
    pub const ALL: [Function; 6] = [
        Function::Sin,
        Function::Cos,
        Function::Exp,
        Function::Log,
        Function::Sqrt,
        Function::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64, EvalError> {
        match self {
            Function::Sin => Ok(x.sin()),
            Function::Cos => Ok(x.cos()),
            Function::Exp => Ok(x.exp()),
            Function::Log if x <= 0.0 => Err(EvalError::LogDomain(x)),
            Function::Log => Ok(x.ln()),
            Function::Sqrt if x < 0.0 => Err(EvalError::SqrtDomain(x)),
            Function::Sqrt => Ok(x.sqrt()),
            Function::Abs => Ok(x.abs()),
        }
    }
}

/// Named constants recognized by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Number(f64),
    Time,
    Constant(Constant),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Function, Box<Node>),
}

impl Node {
    pub fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let value = match self {
            Node::Number(v) => *v,
            Node::Time => t,
            Node::Constant(c) => c.value(),
            Node::Neg(inner) => -inner.eval(t)?,
            Node::Call(f, arg) => f.apply(arg.eval(t)?)?,
            Node::Binary(op, lhs, rhs) => {
                let a = lhs.eval(t)?;
                let b = rhs.eval(t)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div if b == 0.0 => return Err(EvalError::DivisionByZero),
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => power(a, b)?,
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// True when the subtree does not mention `t`.
    pub fn is_time_independent(&self) -> bool {
        match self {
            Node::Number(_) | Node::Constant(_) => true,
            Node::Time => false,
            Node::Neg(inner) | Node::Call(_, inner) => inner.is_time_independent(),
            Node::Binary(_, lhs, rhs) => lhs.is_time_independent() && rhs.is_time_independent(),
        }
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= MAX_INTEGER_EXPONENT {
        let n = exponent.abs() as u32;
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let mut acc = 1.0;
        for _ in 0..n {
            acc *= base;
        }
        return Ok(if exponent < 0.0 { 1.0 / acc } else { acc });
    }
    if base > 0.0 {
        Ok((exponent * base.ln()).exp())
    } else if base == 0.0 && exponent > 0.0 {
        Ok(0.0)
    } else if base == 0.0 {
        Err(EvalError::DivisionByZero)
    } else {
        Err(EvalError::PowerDomain { base, exponent })
    }
}

impl fmt::Display for Node {
    /// Fully parenthesized form; re-parsing it yields an identical tree up to
    /// the sign of negative literals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Number(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
            Node::Number(v) => write!(f, "{v:?}"),
            Node::Time => f.write_str("t"),
            Node::Constant(Constant::Pi) => f.write_str("pi"),
            Node::Constant(Constant::E) => f.write_str("e"),
            Node::Neg(inner) => write!(f, "(-{inner})"),
            Node::Binary(op, lhs, rhs) => write!(f, "({lhs}{}{rhs})", op.symbol()),
            Node::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// A parsed expression together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let root = Parser::new(source).parse()?;
        Ok(Expression {
            source: source.to_string(),
            root,
        })
    }

    pub fn from_node(root: Node) -> Self {
        Expression {
            source: root.to_string(),
            root,
        }
    }

    pub fn constant(value: f64) -> Self {
        Expression::from_node(Node::Number(value))
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.root.eval(t)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn into_node(self) -> Node {
        self.root
    }

    pub fn is_time_independent(&self) -> bool {
        self.root.is_time_independent()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Expression::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(v) => format!("number {v}"),
            Token::Ident(name) => format!("identifier `{name}`"),
            Token::Op(c) => format!("`{c}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    current: Token,
    current_offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            current: Token::End,
            current_offset: 0,
        }
    }

    fn parse(mut self) -> Result<Node, ParseError> {
        self.advance()?;
        if self.current == Token::End {
            return Err(self.error("an expression"));
        }
        let node = self.expr()?;
        if self.current != Token::End {
            return Err(self.error("an operator or end of input"));
        }
        Ok(node)
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.current_offset,
            expected: format!("{expected}, found {}", self.current.describe()),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.current_offset = self.pos;
        if self.pos >= bytes.len() {
            self.current = Token::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        self.current = match c {
            b'0'..=b'9' | b'.' => self.number()?,
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = self.pos;
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Token::Ident(self.src[start..self.pos].to_string())
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Token::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            _ => {
                return Err(ParseError {
                    offset: self.pos,
                    expected: format!(
                        "a number, identifier, operator or parenthesis, found `{}`",
                        self.src[self.pos..].chars().next().unwrap_or('?')
                    ),
                })
            }
        };
        Ok(())
    }

    fn number(&mut self) -> Result<Token, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let digits = |p: &mut usize| {
            let begin = *p;
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - begin
        };
        let mut count = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            count += digits(&mut self.pos);
        }
        if count == 0 {
            return Err(ParseError {
                offset: start,
                expected: "digits in numeric literal".into(),
            });
        }
        // An exponent only when `e`/`E` is followed by digits, so `2*e` still
        // reads the constant.
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                p += 1;
            }
            if p < bytes.len() && bytes[p].is_ascii_digit() {
                self.pos = p;
                digits(&mut self.pos);
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Token::Number).map_err(|_| ParseError {
            offset: start,
            expected: format!("a valid numeric literal, found `{text}`"),
        })
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.current {
                Token::Op('+') => BinaryOp::Add,
                Token::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.current {
                Token::Op('*') => BinaryOp::Mul,
                Token::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.current == Token::Op('-') {
            self.advance()?;
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.current == Token::Op('^') {
            self.advance()?;
            let exponent = self.unary()?;
            return Ok(Node::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.current.clone() {
            Token::Number(v) => {
                self.advance()?;
                Ok(Node::Number(v))
            }
            Token::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let ident_offset = self.current_offset;
                self.advance()?;
                match name.as_str() {
                    "t" => Ok(Node::Time),
                    "pi" => Ok(Node::Constant(Constant::Pi)),
                    "e" => Ok(Node::Constant(Constant::E)),
                    other => {
                        let Some(func) = Function::from_name(other) else {
                            return Err(ParseError {
                                offset: ident_offset,
                                expected: format!(
                                    "`t`, `pi`, `e` or a function name, found unknown identifier `{other}`"
                                ),
                            });
                        };
                        if self.current != Token::LParen {
                            return Err(self.error(&format!("`(` after `{other}`")));
                        }
                        self.advance()?;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(Node::Call(func, Box::new(arg)))
                    }
                }
            }
            _ => Err(self.error("a number, `t`, a constant, a function call or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.current != Token::RParen {
            return Err(self.error("`)`"));
        }
        self.advance()
    }
}
