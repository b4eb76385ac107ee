//! Text syntax: `x1^2 + 3.5*x1^4*x2`. Whitespace is ignored, `^` raises a variable to a
//! non-negative integer power, `*` multiplies factors, variables are `x1 … xn`.

use super::{MultiIndex, Polynomial};
use crate::numerics::BigReal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at offset {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: self.pos, message: message.into() })
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            s.push(c);
            self.pos += 1;
        }
        s
    }

    fn number(&mut self) -> Result<String, ParseError> {
        let mut s = self.digits();
        if self.peek() == Some('.') {
            self.pos += 1;
            s.push('.');
            s.push_str(&self.digits());
        }
        if s.is_empty() || s == "." {
            return self.err("expected a number");
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut exp = String::from("e");
            if let Some(sign @ ('+' | '-')) = self.peek() {
                exp.push(sign);
                self.pos += 1;
            }
            let d = self.digits();
            if d.is_empty() {
                self.pos = save;
            } else {
                exp.push_str(&d);
                s.push_str(&exp);
            }
        }
        Ok(s)
    }
}

enum Factor {
    Coeff(BigReal),
    Var { index: usize, power: u32 },
}

fn factor(cur: &mut Cursor, precision: usize) -> Result<Factor, ParseError> {
    match cur.peek() {
        Some('x') => {
            cur.bump();
            let d = cur.digits();
            if d.is_empty() {
                return cur.err("expected variable index after 'x'");
            }
            let index: usize = d
                .parse()
                .map_err(|_| ParseError { position: cur.pos, message: "variable index out of range".into() })?;
            if index == 0 {
                return cur.err("variables are numbered from x1");
            }
            let power = if cur.peek() == Some('^') {
                cur.bump();
                let d = cur.digits();
                if d.is_empty() {
                    return cur.err("expected a non-negative integer exponent");
                }
                d.parse().map_err(|_| ParseError { position: cur.pos, message: "exponent out of range".into() })?
            } else {
                1
            };
            Ok(Factor::Var { index, power })
        }
        Some(c) if c.is_ascii_digit() || c == '.' => {
            let text = cur.number()?;
            let v = BigReal::parse(&text, precision)
                .map_err(|_| ParseError { position: cur.pos, message: format!("invalid number {text:?}") })?;
            if cur.peek() == Some('^') {
                return cur.err("powers of constants are not supported");
            }
            Ok(Factor::Coeff(v))
        }
        Some(c) => cur.err(format!("unexpected character {c:?}")),
        None => cur.err("unexpected end of input"),
    }
}

fn scan(text: &str, precision: usize) -> Result<Vec<(Vec<(usize, u32)>, BigReal)>, ParseError> {
    let mut cur = Cursor::new(text);
    if cur.chars.is_empty() {
        return cur.err("empty polynomial");
    }
    let mut terms = Vec::new();
    let mut first = true;
    while cur.peek().is_some() {
        let negative = match cur.peek() {
            Some('+') => {
                cur.bump();
                false
            }
            Some('-') => {
                cur.bump();
                true
            }
            _ if first => false,
            Some(c) => return cur.err(format!("expected '+' or '-', found {c:?}")),
            None => unreachable!(),
        };
        first = false;
        let mut coeff = BigReal::one(precision);
        let mut vars = Vec::new();
        loop {
            match factor(&mut cur, precision)? {
                Factor::Coeff(c) => coeff *= c,
                Factor::Var { index, power } => vars.push((index, power)),
            }
            if cur.peek() == Some('*') {
                cur.bump();
            } else {
                break;
            }
        }
        if negative {
            coeff = -coeff;
        }
        terms.push((vars, coeff));
    }
    Ok(terms)
}

pub(super) fn count_vars(text: &str) -> Result<usize, ParseError> {
    let terms = scan(text, 64)?;
    Ok(terms.iter().flat_map(|(v, _)| v.iter().map(|(i, _)| *i)).max().unwrap_or(0))
}

pub(super) fn parse_polynomial(text: &str, n_vars: usize, precision: usize) -> Result<Polynomial, ParseError> {
    let terms = scan(text, precision)?;
    let mut p = Polynomial::zero(n_vars);
    for (vars, coeff) in terms {
        let mut exps = vec![0u32; n_vars];
        for (index, power) in vars {
            if index > n_vars {
                return Err(ParseError {
                    position: 0,
                    message: format!("variable x{index} exceeds the {n_vars}-variable ring"),
                });
            }
            exps[index - 1] += power;
        }
        p.add_term(MultiIndex::new(exps), coeff);
    }
    Ok(p)
}
