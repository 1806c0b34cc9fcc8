//! A minimal arithmetic expression language over the single variable `x`.
//!
//! Config files specify scalar model data (`U(x)`, `a(x)`, `G(x)`, `g(x)`)
//! as strings in this language, so scenarios can change without recompiling.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr   := term (('+' | '-') term)*          left associative
//! term   := unary (('*' | '/') unary)*        left associative
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?                 right associative
//! atom   := NUMBER | 'x' | FUNC '(' expr ')' | '(' expr ')'
//! FUNC   := 'exp' | 'ln' | 'sin' | 'cos' | 'sinh' | 'cosh'
//!         | 'sqrt' | 'abs' | 'atan'
//! NUMBER := digits ['.' digits] [('e'|'E') ['+'|'-'] digits] | '.' digits …
//! ```
//!
//! Precedence is `^` above unary minus above `*` `/` above `+` `-`, so
//! `-x^2` parses as `-(x^2)` and `x^-2` as `x^(-2)`.
//!
//! Expressions are real-valued only; complex quantities are assembled from
//! real parts downstream. Evaluation is IEEE-754 double precision, and
//! domain violations (log of a non-positive value, square root of a negative
//! value, division by zero, fractional powers of negatives) surface as
//! errors rather than silent NaN.

use std::fmt;

use thiserror::Error;

/// Errors from parsing or evaluating an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    /// Malformed input; `offset` is a byte offset into the source string.
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    /// An identifier that is neither `x` nor a known function name.
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    /// Evaluation left the domain of a real-valued operation.
    #[error("domain error: {message}")]
    Domain { message: String },
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// The fixed function set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Sqrt,
    Abs,
    Atan,
}

impl Func {
    /// All functions, in documentation order.
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Ln,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Sqrt,
        Func::Abs,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Abstract syntax tree of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// A real literal (always finite after a successful parse).
    Num(f64),
    /// The variable `x`.
    Var,
    /// Unary negation.
    Neg(Box<Expr>),
    /// A binary operation.
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// A function application.
    Call(Func, Box<Expr>),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let kind = match c {
                    b'+' => TokKind::Plus,
                    b'-' => TokKind::Minus,
                    b'*' => TokKind::Star,
                    b'/' => TokKind::Slash,
                    b'^' => TokKind::Caret,
                    b'(' => TokKind::LParen,
                    _ => TokKind::RParen,
                };
                tokens.push(Token { kind, offset: i });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // A bare "." with no digits on either side is malformed.
                if i == start + 1 && bytes[start] == b'.' {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: "expected digits in number".into(),
                    });
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
                    // Otherwise leave the 'e' for the identifier lexer; it
                    // will be rejected there with a clear message.
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("invalid number literal `{text}`"),
                })?;
                tokens.push(Token {
                    kind: TokKind::Num(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokKind::Ident(source[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &source[i..i + 1]),
                });
            }
        }
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Parser (recursive descent mirroring the grammar above)
// ---------------------------------------------------------------------------

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    /// Byte length of the source, used to report errors at end of input.
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.offset).unwrap_or(self.end)
    }

    fn expect(&mut self, kind: &TokKind, what: &str) -> Result<(), ExprError> {
        match self.peek() {
            Some(t) if &t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ExprError::Syntax {
                offset: self.here(),
                message: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokKind::Plus) => BinOp::Add,
                Some(TokKind::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokKind::Star) => BinOp::Mul,
                Some(TokKind::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokKind::Minus)) {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokKind::Caret)) {
            self.bump();
            // Exponent re-enters at `unary`, which yields right associativity
            // and admits a leading minus: `x^-2`.
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.here();
        let token = match self.bump() {
            Some(t) => t.clone(),
            None => {
                return Err(ExprError::Syntax {
                    offset,
                    message: "unexpected end of input".into(),
                })
            }
        };
        match token.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::Ident(name) => {
                if name == "x" {
                    return Ok(Expr::Var);
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect(&TokKind::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(&TokKind::RParen, "`)` closing function argument")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Err(ExprError::UnknownIdentifier {
                    offset: token.offset,
                    name,
                })
            }
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect(&TokKind::RParen, "`)`")?;
                Ok(inner)
            }
            other => Err(ExprError::Syntax {
                offset: token.offset,
                message: format!("unexpected token `{}`", tok_text(&other)),
            }),
        }
    }
}

fn tok_text(kind: &TokKind) -> String {
    match kind {
        TokKind::Num(v) => format!("{v}"),
        TokKind::Ident(s) => s.clone(),
        TokKind::Plus => "+".into(),
        TokKind::Minus => "-".into(),
        TokKind::Star => "*".into(),
        TokKind::Slash => "/".into(),
        TokKind::Caret => "^".into(),
        TokKind::LParen => "(".into(),
        TokKind::RParen => ")".into(),
    }
}

/// Parse a source string into an [`Expr`].
///
/// Every parse either yields a complete tree or a positioned error; there are
/// no partial results. Literal values are required to be finite.
pub fn parse_expr(source: &str) -> Result<Expr, ExprError> {
    let tokens = lex(source)?;
    if tokens.is_empty() {
        return Err(ExprError::Syntax {
            offset: source.len(),
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        end: source.len(),
    };
    let tree = parser.expr()?;
    if let Some(extra) = parser.peek() {
        return Err(ExprError::Syntax {
            offset: extra.offset,
            message: format!("unexpected token `{}` after expression", tok_text(&extra.kind)),
        });
    }
    Ok(tree)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn domain(message: String) -> ExprError {
    ExprError::Domain { message }
}

/// Evaluate an expression at a real point.
///
/// Deterministic IEEE-754 double evaluation. Returns a [`ExprError::Domain`]
/// for `ln` of a non-positive value, `sqrt` of a negative value, division by
/// zero, zero raised to a negative power, and a negative base raised to a
/// non-integer power — the situations where floating point would otherwise
/// produce NaN or a spurious infinity.
pub fn eval_expr(e: &Expr, x: f64) -> Result<f64, ExprError> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Var => Ok(x),
        Expr::Neg(inner) => Ok(-eval_expr(inner, x)?),
        Expr::Bin(op, lhs, rhs) => {
            let a = eval_expr(lhs, x)?;
            let b = eval_expr(rhs, x)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(domain(format!("division by zero at x = {x}")))
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => {
                    if a == 0.0 && b < 0.0 {
                        return Err(domain(format!(
                            "zero raised to negative power {b} at x = {x}"
                        )));
                    }
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(domain(format!(
                            "negative base {a} raised to non-integer power {b} at x = {x}"
                        )));
                    }
                    Ok(a.powf(b))
                }
            }
        }
        Expr::Call(func, arg) => {
            let v = eval_expr(arg, x)?;
            match func {
                Func::Exp => Ok(v.exp()),
                Func::Ln => {
                    if v <= 0.0 {
                        Err(domain(format!("ln of non-positive value {v} at x = {x}")))
                    } else {
                        Ok(v.ln())
                    }
                }
                Func::Sin => Ok(v.sin()),
                Func::Cos => Ok(v.cos()),
                Func::Sinh => Ok(v.sinh()),
                Func::Cosh => Ok(v.cosh()),
                Func::Sqrt => {
                    if v < 0.0 {
                        Err(domain(format!("sqrt of negative value {v} at x = {x}")))
                    } else {
                        Ok(v.sqrt())
                    }
                }
                Func::Abs => Ok(v.abs()),
                Func::Atan => Ok(v.atan()),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Printing (minimal parentheses; round-trips through parse_expr)
// ---------------------------------------------------------------------------

// Precedence levels used when printing: higher binds tighter.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(_) | Expr::Var | Expr::Call(..) => 5,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(v) => {
            if *v < 0.0 || v.is_sign_negative() {
                // Negative literals only arise from programmatic trees; print
                // them parenthesized so `2^-3` style output stays canonical.
                write!(f, "(-{})", -v)
            } else {
                write!(f, "{v}")
            }
        }
        Expr::Var => write!(f, "x"),
        Expr::Neg(inner) => {
            write!(f, "-")?;
            // The operand of unary minus must bind at least as tightly as
            // `unary` does, i.e. be a unary or power production.
            write_child(f, inner, 3)
        }
        Expr::Bin(op, lhs, rhs) => {
            let lv = level(e);
            match op {
                BinOp::Pow => {
                    // Right associative; the base must be an atom.
                    write_child(f, lhs, 5)?;
                    write!(f, "^")?;
                    write_child(f, rhs, 3)
                }
                _ => {
                    // Left associative: the left child may be at the same
                    // level, the right child must bind strictly tighter.
                    write_child(f, lhs, lv)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, rhs, lv + 1)
                }
            }
        }
        Expr::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, arg)?;
            write!(f, ")")
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_level: u8) -> fmt::Result {
    if level(e) < min_level {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
