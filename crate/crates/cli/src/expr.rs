//! Arithmetic for `substrate.sigma_expr`: numbers, `pi`, `cos(..)`,
//! parentheses, unary minus, `*` and `/`.

use crate::{CliError, CliResult};

/// Evaluates an expression such as `cos(3*pi/4)`.
pub fn eval(text: &str) -> CliResult<f64> {
    let mut p = Parser { src: text, pos: 0 };
    let value = p.product()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    if !value.is_finite() {
        return Err(CliError::Validation(format!(
            "expression {text:?} is not finite"
        )));
    }
    Ok(value)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> CliError {
        CliError::Validation(format!(
            "expression {:?}: {what} at column {}",
            self.src,
            self.pos + 1
        ))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn product(&mut self) -> CliResult<f64> {
        let mut value = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    value *= self.factor()?;
                }
                Some('/') => {
                    self.pos += 1;
                    value /= self.factor()?;
                }
                _ => return Ok(value),
            }
        }
    }

    fn factor(&mut self) -> CliResult<f64> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some('(') => {
                self.pos += 1;
                let v = self.product()?;
                self.expect(')')?;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.src[self.pos..].starts_with(|c: char| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                match &self.src[start..self.pos] {
                    "pi" => Ok(std::f64::consts::PI),
                    "cos" => {
                        self.expect('(')?;
                        let v = self.product()?;
                        self.expect(')')?;
                        Ok(v.cos())
                    }
                    name => {
                        self.pos = start;
                        Err(self.error(&format!("unknown name {name:?}")))
                    }
                }
            }
            _ => Err(self.error("expected a number, pi, cos(..) or '('")),
        }
    }

    fn number(&mut self) -> CliResult<f64> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = mark;
            }
        }
        self.src[start..self.pos].parse::<f64>().map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }

    fn expect(&mut self, c: char) -> CliResult<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }
}
