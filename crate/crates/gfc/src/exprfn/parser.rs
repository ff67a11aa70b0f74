//! Recursive-descent parser for the one-variable expression language.
//!
//! Grammar (whitespace-insensitive, `^` right-associative and binding
//! tighter than unary minus is *not* the convention here — the unary sits
//! inside the power base, so `-x^2` means `(-x)^2`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | 'x' | 'pi' | 'e'
//!         | name '(' expr ')' | 'pow' '(' expr ',' expr ')'
//!         | '(' expr ')'
//! ```
//!
//! `pow(a, b)` is normalised to the same node as `a ^ b`.  A unary minus
//! applied directly to a numeric literal folds into a negative literal.

use super::ast::{Builtin, Constant, Expr};

/// Error with the byte offset where parsing stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub found: String,
    pub expected: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "parse error at byte {}: found {}, expected {}",
            self.offset, self.found, self.expected
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token together with the byte offset at which it starts.
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((start, Tok::End));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.lex_number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("identifier bytes are ASCII")
                .to_owned();
            return Ok((start, Tok::Ident(name)));
        }
        Err(ParseError {
            offset: start,
            found: format!("byte `{}`", char::from(c)),
            expected: "a token".into(),
        })
    }

    fn lex_number(&mut self, start: usize) -> Result<(usize, Tok), ParseError> {
        let mut saw_digit = false;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
            saw_digit = true;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                saw_digit = true;
            }
        }
        if !saw_digit {
            return Err(ParseError {
                offset: start,
                found: "`.`".into(),
                expected: "digits around the decimal point".into(),
            });
        }
        // Exponent part, only when followed by a well-formed exponent; a
        // trailing `e` is an identifier boundary (e.g. `2e` is not a number).
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mut probe = self.pos + 1;
            if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                probe += 1;
                while probe < self.src.len() && self.src[probe].is_ascii_digit() {
                    probe += 1;
                }
                self.pos = probe;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("number bytes are ASCII");
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            found: format!("`{text}`"),
            expected: "a numeric literal".into(),
        })?;
        Ok((start, Tok::Number(value)))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    look: (usize, Tok),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let look = lexer.next()?;
        Ok(Parser { lexer, look })
    }

    fn advance(&mut self) -> Result<(usize, Tok), ParseError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.look, next))
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<(), ParseError> {
        if &self.look.1 == want {
            self.advance()?;
            Ok(())
        } else {
            Err(self.error_here(expected))
        }
    }

    fn error_here(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.look.0,
            found: self.look.1.describe(),
            expected: expected.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.look.1 {
                Tok::Plus => {
                    self.advance()?;
                    let rhs = self.term()?;
                    acc = Expr::Add(Box::new(acc), Box::new(rhs));
                }
                Tok::Minus => {
                    self.advance()?;
                    let rhs = self.term()?;
                    acc = Expr::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.look.1 {
                Tok::Star => {
                    self.advance()?;
                    let rhs = self.factor()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(rhs));
                }
                Tok::Slash => {
                    self.advance()?;
                    let rhs = self.factor()?;
                    acc = Expr::Div(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if self.look.1 == Tok::Caret {
            self.advance()?;
            let exponent = self.factor()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.look.1 == Tok::Minus {
            self.advance()?;
            let inner = self.unary()?;
            // Fold a minus applied directly to a literal.
            if let Expr::Number(n) = inner {
                return Ok(Expr::Number(-n));
            }
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.look.1.clone() {
            Tok::Number(n) => {
                self.advance()?;
                Ok(Expr::Number(n))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (ident_offset, _) = self.advance()?;
                self.ident_atom(&name, ident_offset)
            }
            _ => Err(self.error_here("a number, `x`, a constant, a function call, or `(`")),
        }
    }

    fn ident_atom(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        match name {
            "x" => return Ok(Expr::Var),
            "pi" => return Ok(Expr::Const(Constant::Pi)),
            "e" => return Ok(Expr::Const(Constant::E)),
            _ => {}
        }
        if name == "pow" {
            self.expect(&Tok::LParen, "`(` after `pow`")?;
            let base = self.expr()?;
            self.expect(&Tok::Comma, "`,` between the two arguments of `pow`")?;
            let exponent = self.expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        if let Some(builtin) = Builtin::from_name(name) {
            self.expect(&Tok::LParen, format!("`(` after `{name}`").as_str())?;
            let arg = self.expr()?;
            if self.look.1 == Tok::Comma {
                return Err(ParseError {
                    offset: self.look.0,
                    found: "`,`".into(),
                    expected: format!("`)` — `{name}` takes one argument"),
                });
            }
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Expr::Call(builtin, Box::new(arg)));
        }
        Err(ParseError {
            offset,
            found: format!("identifier `{name}`"),
            expected: "`x`, `pi`, `e`, or a known function name".into(),
        })
    }
}

/// Parse a complete expression; trailing input is an error.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if p.look.1 != Tok::End {
        return Err(p.error_here("end of input"));
    }
    Ok(e)
}
