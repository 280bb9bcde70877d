//! Recursive-descent parser producing an untyped syntax tree. Integer
//! literals without a suffix get their type during elaboration.

use super::expr::{BinOp, Sign};
use super::lexer::{tokenize, CmpTok, Loc, Tok, Token};
use super::IlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RawOp {
    Logic(BinOp),
    Eq,
    Neq,
    Cmp(CmpTok, Option<Sign>),
    Arith(BinOp),
}

#[derive(Debug, Clone)]
pub(crate) enum Raw {
    Bool(bool),
    Int {
        value: u64,
        negative: bool,
        suffix: Option<(bool, u32)>,
        loc: Loc,
    },
    Var(String),
    Old(String),
    Select(Box<Raw>, String),
    Not(Box<Raw>),
    Bin(RawOp, Box<Raw>, Box<Raw>, Loc),
    Ite(Box<Raw>, Box<Raw>, Box<Raw>),
}

impl Raw {
    /// Whether the type of this term is derivable without an expected type.
    pub(crate) fn synthesizable(&self) -> bool {
        match self {
            Raw::Int { suffix, .. } => suffix.is_some(),
            Raw::Bin(RawOp::Arith(_), a, b, _) => a.synthesizable() || b.synthesizable(),
            Raw::Ite(_, t, e) => t.synthesizable() || e.synthesizable(),
            _ => true,
        }
    }
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Parser, IlError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    pub(crate) fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), IlError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", self.peek())))
        }
    }

    pub(crate) fn error(&self, message: String) -> IlError {
        IlError::Syntax {
            loc: self.loc(),
            message,
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String, IlError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn expr(&mut self) -> Result<Raw, IlError> {
        self.implies()
    }

    fn implies(&mut self) -> Result<Raw, IlError> {
        let lhs = self.or()?;
        let loc = self.loc();
        if self.eat(&Tok::Implies) {
            let rhs = self.implies()?;
            return Ok(Raw::Bin(
                RawOp::Logic(BinOp::Implies),
                Box::new(lhs),
                Box::new(rhs),
                loc,
            ));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Raw, IlError> {
        let mut lhs = self.and()?;
        loop {
            let loc = self.loc();
            if !self.eat(&Tok::OrOr) {
                return Ok(lhs);
            }
            let rhs = self.and()?;
            lhs = Raw::Bin(RawOp::Logic(BinOp::Or), Box::new(lhs), Box::new(rhs), loc);
        }
    }

    fn and(&mut self) -> Result<Raw, IlError> {
        let mut lhs = self.cmp()?;
        loop {
            let loc = self.loc();
            if !self.eat(&Tok::AndAnd) {
                return Ok(lhs);
            }
            let rhs = self.cmp()?;
            lhs = Raw::Bin(RawOp::Logic(BinOp::And), Box::new(lhs), Box::new(rhs), loc);
        }
    }

    fn cmp(&mut self) -> Result<Raw, IlError> {
        let lhs = self.sum()?;
        let loc = self.loc();
        let op = match self.peek() {
            Tok::EqEq => RawOp::Eq,
            Tok::NotEq => RawOp::Neq,
            Tok::Cmp(kind, sign) => RawOp::Cmp(*kind, *sign),
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.sum()?;
        if matches!(self.peek(), Tok::EqEq | Tok::NotEq | Tok::Cmp(..)) {
            return Err(self.error("comparisons do not chain; add parentheses".into()));
        }
        Ok(Raw::Bin(op, Box::new(lhs), Box::new(rhs), loc))
    }

    fn sum(&mut self) -> Result<Raw, IlError> {
        let mut lhs = self.prod()?;
        loop {
            let loc = self.loc();
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.prod()?;
            lhs = Raw::Bin(RawOp::Arith(op), Box::new(lhs), Box::new(rhs), loc);
        }
    }

    fn prod(&mut self) -> Result<Raw, IlError> {
        let mut lhs = self.unary()?;
        loop {
            let loc = self.loc();
            if !self.eat(&Tok::Star) {
                return Ok(lhs);
            }
            let rhs = self.unary()?;
            lhs = Raw::Bin(RawOp::Arith(BinOp::Mul), Box::new(lhs), Box::new(rhs), loc);
        }
    }

    fn unary(&mut self) -> Result<Raw, IlError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Bang => {
                self.advance();
                Ok(Raw::Not(Box::new(self.unary()?)))
            }
            Tok::Minus => {
                self.advance();
                match self.advance() {
                    Tok::Int(value, suffix) => Ok(Raw::Int {
                        value,
                        negative: true,
                        suffix,
                        loc,
                    }),
                    _ => Err(IlError::Syntax {
                        loc,
                        message: "unary minus applies only to integer literals".into(),
                    }),
                }
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Raw, IlError> {
        let mut e = self.primary()?;
        while self.eat(&Tok::Dot) {
            let field = self.ident()?;
            e = Raw::Select(Box::new(e), field);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Raw, IlError> {
        let loc = self.loc();
        match self.advance() {
            Tok::True => Ok(Raw::Bool(true)),
            Tok::False => Ok(Raw::Bool(false)),
            Tok::Int(value, suffix) => Ok(Raw::Int {
                value,
                negative: false,
                suffix,
                loc,
            }),
            Tok::Ident(name) => Ok(Raw::Var(name)),
            Tok::Old => {
                self.expect(&Tok::LParen, "`(` after `old`")?;
                let name = self.ident()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Raw::Old(name))
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::If => {
                let c = self.expr()?;
                self.expect(&Tok::Then, "`then`")?;
                let t = self.expr()?;
                self.expect(&Tok::Else, "`else`")?;
                let e = self.expr()?;
                Ok(Raw::Ite(Box::new(c), Box::new(t), Box::new(e)))
            }
            other => Err(IlError::Syntax {
                loc,
                message: format!("unexpected {other}"),
            }),
        }
    }
}
