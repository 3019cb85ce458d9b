//! Plain-text operator terms.
//!
//! ```text
//! term    := [coeff] factor*
//! coeff   := real | "(" real "," real ")"
//! factor  := ("q" | "p" | "a" | "ad") mode ["^" power]
//! ```
//!
//! Factors are separated by whitespace or `*` and multiply in the order
//! written, so `p0 q0` is `P̂ Q̂`. `a`/`ad` are the standard ladder
//! operators `(Q̂ + iP̂)/√(2ħ)` and its adjoint (unit width). Modes are
//! numbered globally with the constrained modes first. A missing coefficient
//! means 1; a term with no factors is a multiple of the identity.

use num_complex::Complex64;
use std::fmt;

use super::operator::PolynomialOperator;
use crate::states::ModeSpace;

/// Position of a syntax error: term index (0-based) and character column
/// (1-based) inside the term.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub term: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "term {}, column {}: {}", self.term + 1, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
    term: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, term: usize) -> Self {
        Cursor {
            chars: src.char_indices().collect(),
            pos: 0,
            src,
            term,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            term: self.term,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace() || c == '*') {
            self.pos += 1;
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn byte_offset(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0).unwrap_or(self.src.len())
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let begin = self.byte_offset();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-')) {
            // a sign is only part of the number at the start or after an exponent marker
            let c = self.peek().unwrap();
            if (c == '+' || c == '-') && self.pos > start {
                let prev = self.chars[self.pos - 1].1;
                if prev != 'e' && prev != 'E' {
                    break;
                }
            }
            self.pos += 1;
        }
        let text = &self.src[begin..self.byte_offset()];
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.err(format!("malformed number `{text}`"))
        })
    }

    fn unsigned(&mut self, what: &str) -> Result<u32, ParseError> {
        let begin = self.byte_offset();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text = &self.src[begin..self.byte_offset()];
        text.parse::<u32>().map_err(|_| self.err(format!("expected {what}")))
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }
}

fn starts_number(c: char) -> bool {
    c.is_ascii_digit() || matches!(c, '.' | '+' | '-')
}

/// Parses one term into an operator on `space`.
pub fn parse_term(space: &ModeSpace, src: &str, term: usize) -> Result<PolynomialOperator, ParseError> {
    let mut cur = Cursor::new(src, term);
    cur.skip_ws();
    let coeff = match cur.peek() {
        Some('(') => {
            cur.pos += 1;
            cur.skip_ws();
            let re = cur.number()?;
            cur.skip_ws();
            cur.expect(',')?;
            cur.skip_ws();
            let im = cur.number()?;
            cur.skip_ws();
            cur.expect(')')?;
            Complex64::new(re, im)
        }
        Some(c) if starts_number(c) => Complex64::new(cur.number()?, 0.0),
        _ => Complex64::new(1.0, 0.0),
    };
    if !(coeff.re.is_finite() && coeff.im.is_finite()) {
        return Err(ParseError {
            term,
            column: 1,
            message: "coefficient is not finite".into(),
        });
    }
    let mut op = PolynomialOperator::scalar(space, coeff);
    loop {
        cur.skip_separators();
        let Some(c) = cur.peek() else { break };
        let col = cur.column();
        let kind = match c {
            'q' | 'p' => {
                cur.pos += 1;
                c.to_string()
            }
            'a' => {
                cur.pos += 1;
                if cur.peek() == Some('d') {
                    cur.pos += 1;
                    "ad".to_string()
                } else {
                    "a".to_string()
                }
            }
            other => return Err(cur.err(format!("unexpected `{other}`; expected q, p, a or ad"))),
        };
        let mode = cur.unsigned("mode index")? as usize;
        if mode >= space.modes() {
            return Err(ParseError {
                term,
                column: col,
                message: format!("mode {mode} out of range (system has {} modes)", space.modes()),
            });
        }
        let power = if cur.peek() == Some('^') {
            cur.pos += 1;
            cur.unsigned("power")?
        } else {
            1
        };
        let base = match kind.as_str() {
            "q" => PolynomialOperator::position(space, mode),
            "p" => PolynomialOperator::momentum(space, mode),
            "a" => PolynomialOperator::annihilator(space, mode),
            _ => PolynomialOperator::creator(space, mode),
        };
        op = &op * &base.pow(power);
        if let Some(c) = cur.peek() {
            if !(c.is_whitespace() || c == '*') {
                return Err(cur.err(format!("unexpected `{c}` after factor")));
            }
        }
    }
    Ok(op)
}

/// Sum of all `terms`.
pub fn parse_operator<S: AsRef<str>>(space: &ModeSpace, terms: &[S]) -> Result<PolynomialOperator, ParseError> {
    let mut op = PolynomialOperator::zero(space);
    for (i, t) in terms.iter().enumerate() {
        op = &op + &parse_term(space, t.as_ref(), i)?;
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_from_text() {
        let s = ModeSpace::single(1.0).unwrap();
        let op = parse_operator(&s, &["0.5 p0^2", "0.5*q0*q0"]).unwrap();
        assert!(op.approx_eq(&PolynomialOperator::harmonic_oscillator(&s), 1e-15));
        let n = parse_operator(&s, &["ad0 a0", "0.5"]).unwrap();
        assert!(op.approx_eq(&n, 1e-15));
    }

    #[test]
    fn complex_coefficient_and_order() {
        let s = ModeSpace::single(1.0).unwrap();
        let qp = parse_term(&s, "(0, 1) q0 p0", 0).unwrap();
        let q = PolynomialOperator::position(&s, 0);
        let p = PolynomialOperator::momentum(&s, 0);
        assert_eq!(qp, (&q * &p).scale(Complex64::new(0.0, 1.0)));
        let pure = parse_term(&s, "-2.5e-1", 0).unwrap();
        assert_eq!(pure, PolynomialOperator::scalar(&s, -0.25));
    }

    #[test]
    fn errors_carry_position() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let e = parse_operator(&s, &["1 q0", "2 x1"]).unwrap_err();
        assert_eq!((e.term, e.column), (1, 3));
        let e = parse_term(&s, "1 q5", 0).unwrap_err();
        assert_eq!(e.column, 3);
        assert!(e.message.contains("out of range"));
        assert!(parse_term(&s, "1 q", 0).is_err());
        assert!(parse_term(&s, "(1, 2 q0", 0).is_err());
        assert!(parse_term(&s, "1.2.3 q0", 0).is_err());
    }
}
