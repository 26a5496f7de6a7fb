//! Recursive-descent parser for rational expressions in `h`.
//!
//! Accepts integers, `h`, `+ - * / ^` and parentheses, which covers every
//! rendering produced by [`RatFunc`]'s `Display` as well as hand-written
//! forms such as `-(5*h^2-7)/64`.

use num_bigint::BigInt;

use super::{CoeffError, RatFunc};

pub fn parse_ratfunc(input: &str) -> Result<RatFunc, CoeffError> {
    let tokens: Vec<char> = input.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = Parser { tokens, pos: 0 };
    let value = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.error("trailing input"));
    }
    Ok(value)
}

struct Parser {
    tokens: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, msg: &str) -> CoeffError {
        CoeffError::Parse(format!("{msg} at offset {}", self.pos))
    }

    fn peek(&self) -> Option<char> {
        self.tokens.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<RatFunc, CoeffError> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<RatFunc, CoeffError> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' {
                acc * rhs
            } else {
                acc.try_div(&rhs)?
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<RatFunc, CoeffError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<RatFunc, CoeffError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let e = self.integer()?;
            let e: i32 = e
                .try_into()
                .map_err(|_| self.error("exponent out of range"))?;
            return base.pow(e);
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt, CoeffError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        let s: String = self.tokens[start..self.pos].iter().collect();
        s.parse().map_err(|_| self.error("bad integer"))
    }

    fn atom(&mut self) -> Result<RatFunc, CoeffError> {
        match self.peek() {
            Some('h') => {
                self.pos += 1;
                Ok(RatFunc::h())
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(RatFunc::from_rational(super::Rational::from_integer(n)))
            }
            _ => Err(self.error("unexpected token")),
        }
    }
}
