//! Arithmetic expressions in one variable `t`, used for `expr` coefficients.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, `t`, `pi`, `e`
//! and the functions `sin cos tan exp ln sqrt abs tanh min max`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { s: src.as_bytes(), i: 0 };
        let e = p.sum()?;
        p.ws();
        if p.i != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => t,
            Expr::Neg(a) => -a.eval(t),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(t), b.eval(t));
                match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => x / y,
                    _ => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(t);
                match f.as_str() {
                    "sin" => x.sin(),
                    "cos" => x.cos(),
                    "tan" => x.tan(),
                    "exp" => x.exp(),
                    "ln" => x.ln(),
                    "sqrt" => x.sqrt(),
                    "abs" => x.abs(),
                    "tanh" => x.tanh(),
                    "min" => x.min(args[1].eval(t)),
                    _ => x.max(args[1].eval(t)),
                }
            }
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Invalid(format!("expression: {msg} at byte {}", self.i))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.i += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.i += 1;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.i += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                    self.i += 1;
                }
                if self.i < self.s.len() && matches!(self.s[self.i], b'e' | b'E') {
                    let save = self.i;
                    self.i += 1;
                    if self.i < self.s.len() && matches!(self.s[self.i], b'+' | b'-') {
                        self.i += 1;
                    }
                    if self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                            self.i += 1;
                        }
                    } else {
                        self.i = save;
                    }
                }
                let txt = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
                txt.parse().map(Expr::Num).map_err(|_| self.err("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.i;
                while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).expect("ascii").to_string();
                match name.as_str() {
                    "t" => Ok(Expr::Var),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    "sin" | "cos" | "tan" | "exp" | "ln" | "sqrt" | "abs" | "tanh" | "min" | "max" => {
                        if self.peek() != Some(b'(') {
                            return Err(self.err("expected '(' after function name"));
                        }
                        self.i += 1;
                        let mut args = vec![self.sum()?];
                        while self.peek() == Some(b',') {
                            self.i += 1;
                            args.push(self.sum()?);
                        }
                        if self.peek() != Some(b')') {
                            return Err(self.err("expected ')'"));
                        }
                        self.i += 1;
                        let want = if matches!(name.as_str(), "min" | "max") { 2 } else { 1 };
                        if args.len() != want {
                            return Err(self.err(&format!("{name} takes {want} argument(s)")));
                        }
                        Ok(Expr::Call(name, args))
                    }
                    _ => Err(self.err(&format!("unknown identifier '{name}'"))),
                }
            }
            _ => Err(self.err("expected a value")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("1 + 2*t^2 - -3/4").unwrap();
        assert_eq!(e.eval(2.0), 1.0 + 8.0 + 0.75);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval(0.0), 512.0);
        let e = Expr::parse("max(abs(sin(pi*t)), 0.5) + 1e-1").unwrap();
        assert!((e.eval(0.5) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn errors_are_reported() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(t)").is_err());
        assert!(Expr::parse("(t").is_err());
        assert!(Expr::parse("min(t)").is_err());
    }
}
