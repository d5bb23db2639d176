//! Abstract syntax, parser and printer for π-terms.
//!
//! Concrete syntax:
//!
//! ```text
//! term   := factor { factor }
//! factor := atom [ "^" power ]
//! atom   := letter | "(" term ")"
//! power  := "w" | integer>=1
//! letter := "a".."z"
//! ```
//!
//! Whitespace is ignored between tokens. `^w` is the π-power. The same
//! tokenizer also serves the extended word-literal syntax in
//! [`crate::genword::parse_word`], which admits more power suffixes.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A π-term over lowercase letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PiTerm {
    Letter(char),
    Concat(Box<PiTerm>, Box<PiTerm>),
    PiPower(Box<PiTerm>),
    FinPower(Box<PiTerm>, u64),
}

impl PiTerm {
    pub fn letter(c: char) -> Self {
        PiTerm::Letter(c)
    }

    pub fn concat(left: PiTerm, right: PiTerm) -> Self {
        PiTerm::Concat(Box::new(left), Box::new(right))
    }

    pub fn pi(inner: PiTerm) -> Self {
        PiTerm::PiPower(Box::new(inner))
    }

    pub fn fin(inner: PiTerm, k: u64) -> Self {
        assert!(k >= 1, "finite power must be positive");
        PiTerm::FinPower(Box::new(inner), k)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("letter '{letter}' at offset {offset} is not in the alphabet")]
    Alphabet { offset: usize, letter: char },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::Alphabet { offset, .. } => *offset,
        }
    }
}

/// Power suffix as written after `^`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PowerToken {
    /// `w`
    Pi,
    /// `s`
    Sigma,
    /// `r`
    Rho,
    /// `z`
    Zeta,
    /// `o`
    Omega,
    /// `o*`
    OmegaStar,
    /// a decimal integer (may be zero; callers validate)
    Int(u64),
}

/// Untyped syntax tree shared by the term and word-literal grammars.
#[derive(Clone, Debug)]
pub(crate) enum Syntax {
    Letter(char),
    Concat(Box<Syntax>, Box<Syntax>),
    Power(Box<Syntax>, PowerToken, usize),
}

pub(crate) struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    alphabet: &'a dyn Fn(char) -> bool,
    extended: bool,
    len: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(text: &str, alphabet: &'a dyn Fn(char) -> bool, extended: bool) -> Self {
        Parser { chars: text.char_indices().collect(), pos: 0, alphabet, extended, len: text.len() }
    }

    fn skip_ws(&mut self) {
        while let Some((_, c)) = self.chars.get(self.pos) {
            if c.is_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<(usize, char)> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn offset(&mut self) -> usize {
        self.peek().map(|(o, _)| o).unwrap_or(self.len)
    }

    fn syntax<T>(&mut self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { offset: self.offset(), message: message.into() })
    }

    pub(crate) fn parse_all(mut self) -> Result<Syntax, ParseError> {
        let term = self.term()?;
        if self.peek().is_some() {
            return self.syntax("unexpected trailing input");
        }
        Ok(term)
    }

    pub(crate) fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn starts_atom(c: char) -> bool {
        c == '(' || c.is_ascii_alphabetic()
    }

    fn term(&mut self) -> Result<Syntax, ParseError> {
        let mut acc = self.factor()?;
        while let Some((_, c)) = self.peek() {
            if !Self::starts_atom(c) {
                break;
            }
            let next = self.factor()?;
            acc = Syntax::Concat(Box::new(acc), Box::new(next));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Syntax, ParseError> {
        let atom = self.atom()?;
        match self.peek() {
            Some((offset, '^')) => {
                self.pos += 1;
                let power = self.power()?;
                Ok(Syntax::Power(Box::new(atom), power, offset))
            }
            _ => Ok(atom),
        }
    }

    fn atom(&mut self) -> Result<Syntax, ParseError> {
        match self.peek() {
            Some((_, '(')) => {
                self.pos += 1;
                let inner = self.term()?;
                match self.peek() {
                    Some((_, ')')) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.syntax("expected ')'"),
                }
            }
            Some((offset, c)) if c.is_ascii_alphabetic() => {
                if !(self.alphabet)(c) {
                    return Err(ParseError::Alphabet { offset, letter: c });
                }
                self.pos += 1;
                Ok(Syntax::Letter(c))
            }
            Some(_) => self.syntax("expected a letter or '('"),
            None => self.syntax("unexpected end of input"),
        }
    }

    fn power(&mut self) -> Result<PowerToken, ParseError> {
        match self.peek() {
            Some((_, d)) if d.is_ascii_digit() => {
                let start = self.offset();
                let mut digits = String::new();
                while let Some((_, d)) = self.chars.get(self.pos) {
                    if d.is_ascii_digit() {
                        digits.push(*d);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                digits
                    .parse::<u64>()
                    .map(PowerToken::Int)
                    .map_err(|_| ParseError::Syntax { offset: start, message: "power out of range".into() })
            }
            Some((_, 'w')) => {
                self.pos += 1;
                Ok(PowerToken::Pi)
            }
            Some((_, c)) if self.extended && matches!(c, 's' | 'r' | 'z' | 'o') => {
                self.pos += 1;
                Ok(match c {
                    's' => PowerToken::Sigma,
                    'r' => PowerToken::Rho,
                    'z' => PowerToken::Zeta,
                    _ => {
                        if let Some((_, '*')) = self.chars.get(self.pos) {
                            self.pos += 1;
                            PowerToken::OmegaStar
                        } else {
                            PowerToken::Omega
                        }
                    }
                })
            }
            _ => {
                if self.extended {
                    self.syntax("expected a power: w, s, r, z, o, o* or an integer")
                } else {
                    self.syntax("expected a power: w or a positive integer")
                }
            }
        }
    }
}

fn lowercase(c: char) -> bool {
    c.is_ascii_lowercase()
}

/// Parses a π-term over the full lowercase alphabet.
pub fn parse_term(text: &str) -> Result<PiTerm, ParseError> {
    parse_term_in(text, &lowercase)
}

/// Parses a π-term, rejecting letters outside `alphabet`.
pub fn parse_term_with_alphabet(text: &str, alphabet: &BTreeSet<char>) -> Result<PiTerm, ParseError> {
    let allowed = |c: char| c.is_ascii_lowercase() && alphabet.contains(&c);
    parse_term_in(text, &allowed)
}

fn parse_term_in(text: &str, alphabet: &dyn Fn(char) -> bool) -> Result<PiTerm, ParseError> {
    let syntax = Parser::new(text, alphabet, false).parse_all()?;
    to_term(syntax)
}

fn to_term(syntax: Syntax) -> Result<PiTerm, ParseError> {
    Ok(match syntax {
        Syntax::Letter(c) => PiTerm::Letter(c),
        Syntax::Concat(l, r) => PiTerm::concat(to_term(*l)?, to_term(*r)?),
        Syntax::Power(inner, power, offset) => {
            let inner = to_term(*inner)?;
            match power {
                PowerToken::Pi => PiTerm::pi(inner),
                PowerToken::Int(k) if k >= 1 => PiTerm::fin(inner, k),
                PowerToken::Int(_) => {
                    return Err(ParseError::Syntax { offset, message: "finite power must be at least 1".into() })
                }
                _ => {
                    return Err(ParseError::Syntax {
                        offset,
                        message: "only ^w and positive integer powers are allowed in π-terms".into(),
                    })
                }
            }
        }
    })
}

/// Canonical text; `parse_term(&render_term(t)) == Ok(t)`.
pub fn render_term(t: &PiTerm) -> String {
    let mut out = String::new();
    render_into(t, &mut out);
    out
}

fn render_into(t: &PiTerm, out: &mut String) {
    match t {
        PiTerm::Letter(c) => out.push(*c),
        PiTerm::Concat(l, r) => {
            render_into(l, out);
            // concatenation is parsed left-associatively
            if matches!(**r, PiTerm::Concat(..)) {
                out.push('(');
                render_into(r, out);
                out.push(')');
            } else {
                render_into(r, out);
            }
        }
        PiTerm::PiPower(inner) => {
            render_base(inner, out);
            out.push_str("^w");
        }
        PiTerm::FinPower(inner, k) => {
            render_base(inner, out);
            out.push('^');
            out.push_str(&k.to_string());
        }
    }
}

fn render_base(inner: &PiTerm, out: &mut String) {
    if let PiTerm::Letter(c) = inner {
        out.push(*c);
    } else {
        out.push('(');
        render_into(inner, out);
        out.push(')');
    }
}

impl fmt::Display for PiTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_term(self))
    }
}

/// The letters (identity variables) occurring in `t`.
pub fn term_letters(t: &PiTerm) -> BTreeSet<char> {
    let mut out = BTreeSet::new();
    let mut stack = vec![t];
    while let Some(node) = stack.pop() {
        match node {
            PiTerm::Letter(c) => {
                out.insert(*c);
            }
            PiTerm::Concat(l, r) => {
                stack.push(l);
                stack.push(r);
            }
            PiTerm::PiPower(inner) | PiTerm::FinPower(inner, _) => stack.push(inner),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> PiTerm {
        PiTerm::letter('x')
    }
    fn y() -> PiTerm {
        PiTerm::letter('y')
    }

    #[test]
    fn parses_letters_and_powers() {
        assert_eq!(parse_term("x").unwrap(), x());
        assert_eq!(parse_term("(xy)^w x").unwrap(), PiTerm::concat(PiTerm::pi(PiTerm::concat(x(), y())), x()));
        assert_eq!(parse_term("a^3").unwrap(), PiTerm::fin(PiTerm::letter('a'), 3));
    }

    #[test]
    fn concatenation_is_left_associative() {
        let t = parse_term("x y x").unwrap();
        assert_eq!(t, PiTerm::concat(PiTerm::concat(x(), y()), x()));
        assert_eq!(render_term(&PiTerm::concat(x(), PiTerm::concat(y(), x()))), "x(yx)");
    }

    #[test]
    fn power_binds_tighter() {
        assert_eq!(parse_term("xy^w").unwrap(), PiTerm::concat(x(), PiTerm::pi(y())));
    }

    #[test]
    fn renders_canonically() {
        assert_eq!(render_term(&x()), "x");
        assert_eq!(render_term(&PiTerm::pi(PiTerm::concat(x(), y()))), "(xy)^w");
        assert_eq!(render_term(&PiTerm::pi(PiTerm::pi(x()))), "(x^w)^w");
        assert_eq!(render_term(&PiTerm::concat(PiTerm::pi(x()), PiTerm::letter('w'))), "x^ww");
    }

    #[test]
    fn located_errors() {
        assert_eq!(parse_term("").unwrap_err().offset(), 0);
        assert_eq!(parse_term("x^").unwrap_err().offset(), 2);
        assert_eq!(parse_term("(xy").unwrap_err().offset(), 3);
        assert!(matches!(parse_term("x^0"), Err(ParseError::Syntax { offset: 1, .. })));
        assert!(matches!(parse_term("x^s"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_term("xY"), Err(ParseError::Alphabet { offset: 1, letter: 'Y' })));
        assert!(matches!(parse_term("x#"), Err(ParseError::Syntax { offset: 1, .. })));
        let ab: BTreeSet<char> = ['a', 'b'].into_iter().collect();
        assert!(matches!(parse_term_with_alphabet("abc", &ab), Err(ParseError::Alphabet { offset: 2, letter: 'c' })));
    }

    #[test]
    fn letters_of_terms() {
        assert_eq!(term_letters(&parse_term("x").unwrap()), ['x'].into_iter().collect());
        assert_eq!(term_letters(&parse_term("(xy)^w x").unwrap()), ['x', 'y'].into_iter().collect());
    }

    fn arb_term() -> impl Strategy<Value = PiTerm> {
        let leaf = prop::sample::select(vec!['a', 'b', 'w', 'x', 'y']).prop_map(PiTerm::Letter);
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| PiTerm::concat(l, r)),
                inner.clone().prop_map(PiTerm::pi),
                (inner, 1u64..12).prop_map(|(t, k)| PiTerm::fin(t, k)),
            ]
        })
    }

    fn letters_by_recursion(t: &PiTerm, out: &mut Vec<char>) {
        match t {
            PiTerm::Letter(c) => out.push(*c),
            PiTerm::Concat(l, r) => {
                letters_by_recursion(l, out);
                letters_by_recursion(r, out);
            }
            PiTerm::PiPower(i) | PiTerm::FinPower(i, _) => letters_by_recursion(i, out),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, .. ProptestConfig::default() })]

        #[test]
        fn render_parse_round_trip(t in arb_term()) {
            let text = render_term(&t);
            prop_assert_eq!(parse_term(&text).unwrap(), t);
        }

        #[test]
        fn letters_match_tree_walk(t in arb_term()) {
            let mut walk = Vec::new();
            letters_by_recursion(&t, &mut walk);
            let expected: BTreeSet<char> = walk.into_iter().collect();
            prop_assert_eq!(term_letters(&t), expected);
        }
    }
}
