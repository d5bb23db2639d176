//! Generalized words built from finite words by concatenation and order-type
//! powers, with symbolic positions.
//!
//! A position is a path through the construction tree: `L`/`R` at a
//! concatenation, an index value at a power, and a letter offset at a
//! literal. Positions are compared index-first at powers, which is the order
//! of the power `w^τ` on `dom(w) × T`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pi_term::{ParseError, Parser, PiTerm, PowerToken, Syntax};

/// Exact rationals indexing the dense middle of ϱ.
pub type Rational = Ratio<i64>;

/// Order types usable as exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tau {
    Fin(u64),
    Omega,
    OmegaStar,
    Zeta,
    /// ω + ζ + ω*
    Sigma,
    /// ω + ζ·η + ω*
    Rho,
}

impl Tau {
    pub fn is_infinite(self) -> bool {
        !matches!(self, Tau::Fin(_))
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Fin(k) => write!(f, "{k}"),
            Tau::Omega => f.write_str("o"),
            Tau::OmegaStar => f.write_str("o*"),
            Tau::Zeta => f.write_str("z"),
            Tau::Sigma => f.write_str("s"),
            Tau::Rho => f.write_str("r"),
        }
    }
}

/// A generalized word as a construction tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WordExpr {
    Lit(String),
    Cat(Box<WordExpr>, Box<WordExpr>),
    Pow(Tau, Box<WordExpr>),
}

/// Index of one copy inside a power.
///
/// `OmegaStar(j)` is stored as the distance `j` from the right end, i.e. the
/// index `-j` of `-ℕ`. Which variants a power admits depends on its [`Tau`]:
/// σ admits `Omega`, `Zeta` and `OmegaStar`; ϱ admits `Omega`, `Dense` and
/// `OmegaStar`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndexValue {
    Fin(u64),
    Omega(u64),
    OmegaStar(u64),
    Zeta(i64),
    /// copy `q` of ζ inside ζ·η, element `i` of that copy
    Dense(Rational, i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    Left,
    Right,
    At(IndexValue),
    Offset(u32),
}

/// A symbolic position of a [`WordExpr`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(pub Vec<Step>);

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenWordError {
    #[error("invalid position {position}: {reason}")]
    InvalidPosition { position: String, reason: String },
    #[error("unsupported order type {0:?} for this operation")]
    UnsupportedTau(Tau),
    #[error("word is not finite")]
    NotFinite,
    #[error("malformed position text '{0}'")]
    PositionSyntax(String),
}

fn invalid(p: &[Step], reason: &str) -> GenWordError {
    GenWordError::InvalidPosition { position: Position(p.to_vec()).to_string(), reason: reason.to_string() }
}

impl WordExpr {
    pub fn lit(s: &str) -> Self {
        WordExpr::Lit(s.to_string())
    }

    pub fn cat(l: WordExpr, r: WordExpr) -> Self {
        WordExpr::Cat(Box::new(l), Box::new(r))
    }

    pub fn pow(tau: Tau, inner: WordExpr) -> Self {
        WordExpr::Pow(tau, Box::new(inner))
    }

    /// Number of positions; `None` when infinite. Saturates on overflow.
    pub fn size(&self) -> Option<u128> {
        match self {
            WordExpr::Lit(s) => Some(s.chars().count() as u128),
            WordExpr::Cat(l, r) => Some(l.size()?.saturating_add(r.size()?)),
            WordExpr::Pow(tau, inner) => {
                let n = inner.size();
                match (tau, n) {
                    (_, Some(0)) | (Tau::Fin(0), _) => Some(0),
                    (Tau::Fin(k), Some(n)) => Some((*k as u128).saturating_mul(n)),
                    _ => None,
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.size().is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == Some(0)
    }

    /// All powers use σ or a finite exponent.
    pub fn is_sigma_rational(&self) -> bool {
        match self {
            WordExpr::Lit(_) => true,
            WordExpr::Cat(l, r) => l.is_sigma_rational() && r.is_sigma_rational(),
            WordExpr::Pow(tau, inner) => matches!(tau, Tau::Sigma | Tau::Fin(_)) && inner.is_sigma_rational(),
        }
    }

    pub fn letters(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        self.collect_letters(&mut out);
        out
    }

    fn collect_letters(&self, out: &mut BTreeSet<char>) {
        match self {
            WordExpr::Lit(s) => out.extend(s.chars()),
            WordExpr::Cat(l, r) => {
                l.collect_letters(out);
                r.collect_letters(out);
            }
            WordExpr::Pow(Tau::Fin(0), _) => {}
            WordExpr::Pow(_, inner) => inner.collect_letters(out),
        }
    }

    /// The flattened string of a finite word.
    pub fn flatten(&self) -> Result<String, GenWordError> {
        let mut out = String::new();
        self.flatten_into(&mut out)?;
        Ok(out)
    }

    fn flatten_into(&self, out: &mut String) -> Result<(), GenWordError> {
        match self {
            WordExpr::Lit(s) => out.push_str(s),
            WordExpr::Cat(l, r) => {
                l.flatten_into(out)?;
                r.flatten_into(out)?;
            }
            WordExpr::Pow(Tau::Fin(k), inner) => {
                let mut piece = String::new();
                inner.flatten_into(&mut piece)?;
                for _ in 0..*k {
                    out.push_str(&piece);
                }
            }
            WordExpr::Pow(_, inner) => {
                if !inner.is_empty() {
                    return Err(GenWordError::NotFinite);
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for WordExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordExpr::Lit(s) if s.is_empty() => f.write_str("()"),
            WordExpr::Lit(s) => f.write_str(s),
            WordExpr::Cat(l, r) => {
                write!(f, "{l}")?;
                if matches!(**r, WordExpr::Cat(..)) {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            WordExpr::Pow(tau, inner) => {
                match &**inner {
                    WordExpr::Lit(s) if s.chars().count() == 1 => write!(f, "{s}")?,
                    other => write!(f, "({other})")?,
                }
                write!(f, "^{tau}")
            }
        }
    }
}

/// Parses a word literal: the π-term grammar extended with the power
/// suffixes `^s` (σ), `^r` (ϱ), `^z` (ζ), `^o` (ω), `^o*` (ω*) and `^<int>`
/// (including `^0`). `^w` is read as `pi_tau`. Whitespace-only input is the
/// empty word.
pub fn parse_word(text: &str, pi_tau: Tau) -> Result<WordExpr, ParseError> {
    let lowercase = |c: char| c.is_ascii_lowercase();
    let mut parser = Parser::new(text, &lowercase, true);
    if parser.at_end() {
        return Ok(WordExpr::lit(""));
    }
    let syntax = parser.parse_all()?;
    Ok(syntax_to_word(syntax, pi_tau))
}

fn syntax_to_word(syntax: Syntax, pi_tau: Tau) -> WordExpr {
    match syntax {
        Syntax::Letter(c) => WordExpr::Lit(c.to_string()),
        Syntax::Concat(l, r) => {
            let l = syntax_to_word(*l, pi_tau);
            let r = syntax_to_word(*r, pi_tau);
            match (l, r) {
                (WordExpr::Lit(a), WordExpr::Lit(b)) => WordExpr::Lit(a + &b),
                (l, r) => WordExpr::cat(l, r),
            }
        }
        Syntax::Power(inner, power, _) => {
            let tau = match power {
                PowerToken::Pi => pi_tau,
                PowerToken::Sigma => Tau::Sigma,
                PowerToken::Rho => Tau::Rho,
                PowerToken::Zeta => Tau::Zeta,
                PowerToken::Omega => Tau::Omega,
                PowerToken::OmegaStar => Tau::OmegaStar,
                PowerToken::Int(k) => Tau::Fin(k),
            };
            WordExpr::pow(tau, syntax_to_word(*inner, pi_tau))
        }
    }
}

/// Translates a π-term into a word, replacing π by `tau`.
pub fn eval_term(t: &PiTerm, tau: Tau) -> Result<WordExpr, GenWordError> {
    match tau {
        Tau::Sigma | Tau::Rho => {}
        Tau::Fin(k) if k >= 1 => {}
        other => return Err(GenWordError::UnsupportedTau(other)),
    }
    Ok(eval_term_unchecked(t, tau))
}

fn eval_term_unchecked(t: &PiTerm, tau: Tau) -> WordExpr {
    match t {
        PiTerm::Letter(c) => WordExpr::Lit(c.to_string()),
        PiTerm::Concat(l, r) => WordExpr::cat(eval_term_unchecked(l, tau), eval_term_unchecked(r, tau)),
        PiTerm::PiPower(inner) => WordExpr::pow(tau, eval_term_unchecked(inner, tau)),
        PiTerm::FinPower(inner, k) => WordExpr::pow(Tau::Fin(*k), eval_term_unchecked(inner, tau)),
    }
}

// ---------------------------------------------------------------------------
// index sets

/// Part of an index set, without the rational of a dense copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartTag {
    Fin,
    Omega,
    Zeta,
    Dense,
    OmegaStar,
}

impl IndexValue {
    pub fn part(&self) -> PartTag {
        match self {
            IndexValue::Fin(_) => PartTag::Fin,
            IndexValue::Omega(_) => PartTag::Omega,
            IndexValue::OmegaStar(_) => PartTag::OmegaStar,
            IndexValue::Zeta(_) => PartTag::Zeta,
            IndexValue::Dense(..) => PartTag::Dense,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            IndexValue::Fin(_) | IndexValue::Omega(_) => 0,
            IndexValue::Zeta(_) | IndexValue::Dense(..) => 1,
            IndexValue::OmegaStar(_) => 2,
        }
    }
}

pub fn index_valid(tau: Tau, t: &IndexValue) -> bool {
    match (tau, t) {
        (Tau::Fin(k), IndexValue::Fin(i)) => i < &k,
        (Tau::Omega, IndexValue::Omega(_)) => true,
        (Tau::OmegaStar, IndexValue::OmegaStar(_)) => true,
        (Tau::Zeta, IndexValue::Zeta(_)) => true,
        (Tau::Sigma, IndexValue::Omega(_) | IndexValue::Zeta(_) | IndexValue::OmegaStar(_)) => true,
        (Tau::Rho, IndexValue::Omega(_) | IndexValue::OmegaStar(_)) => true,
        (Tau::Rho, IndexValue::Dense(q, _)) => *q.denom() > 0,
        _ => false,
    }
}

/// Order of two valid indices of the same power.
pub fn index_cmp(a: &IndexValue, b: &IndexValue) -> Ordering {
    a.rank().cmp(&b.rank()).then_with(|| match (a, b) {
        (IndexValue::Fin(x), IndexValue::Fin(y)) | (IndexValue::Omega(x), IndexValue::Omega(y)) => x.cmp(y),
        (IndexValue::OmegaStar(x), IndexValue::OmegaStar(y)) => y.cmp(x),
        (IndexValue::Zeta(x), IndexValue::Zeta(y)) => x.cmp(y),
        (IndexValue::Dense(q, i), IndexValue::Dense(r, j)) => q.cmp(r).then(i.cmp(j)),
        _ => Ordering::Equal,
    })
}

pub fn first_index(tau: Tau) -> Option<IndexValue> {
    match tau {
        Tau::Fin(0) | Tau::Zeta | Tau::OmegaStar => None,
        Tau::Fin(_) => Some(IndexValue::Fin(0)),
        Tau::Omega | Tau::Sigma | Tau::Rho => Some(IndexValue::Omega(0)),
    }
}

pub fn last_index(tau: Tau) -> Option<IndexValue> {
    match tau {
        Tau::Fin(0) | Tau::Zeta | Tau::Omega => None,
        Tau::Fin(k) => Some(IndexValue::Fin(k - 1)),
        Tau::OmegaStar | Tau::Sigma | Tau::Rho => Some(IndexValue::OmegaStar(0)),
    }
}

/// Immediate successor of an index; `None` when `t` is the last index.
pub fn index_succ(tau: Tau, t: &IndexValue) -> Option<IndexValue> {
    match t {
        IndexValue::Fin(i) => match tau {
            Tau::Fin(k) if i + 1 < k => Some(IndexValue::Fin(i + 1)),
            _ => None,
        },
        IndexValue::Omega(i) => Some(IndexValue::Omega(i + 1)),
        IndexValue::OmegaStar(0) => None,
        IndexValue::OmegaStar(j) => Some(IndexValue::OmegaStar(j - 1)),
        IndexValue::Zeta(i) => Some(IndexValue::Zeta(i + 1)),
        IndexValue::Dense(q, i) => Some(IndexValue::Dense(*q, i + 1)),
    }
}

/// Immediate predecessor of an index; `None` when `t` is the first index.
pub fn index_pred(_tau: Tau, t: &IndexValue) -> Option<IndexValue> {
    match t {
        IndexValue::Fin(0) | IndexValue::Omega(0) => None,
        IndexValue::Fin(i) => Some(IndexValue::Fin(i - 1)),
        IndexValue::Omega(i) => Some(IndexValue::Omega(i - 1)),
        IndexValue::OmegaStar(j) => Some(IndexValue::OmegaStar(j + 1)),
        IndexValue::Zeta(i) => Some(IndexValue::Zeta(i - 1)),
        IndexValue::Dense(q, i) => Some(IndexValue::Dense(*q, i - 1)),
    }
}

/// Number of indices strictly before `t`, `None` if infinite.
pub fn index_count_before(_tau: Tau, t: &IndexValue) -> Option<u128> {
    match t {
        IndexValue::Fin(i) | IndexValue::Omega(i) => Some(*i as u128),
        _ => None,
    }
}

/// Number of indices strictly after `t`, `None` if infinite.
pub fn index_count_after(tau: Tau, t: &IndexValue) -> Option<u128> {
    match (tau, t) {
        (Tau::Fin(k), IndexValue::Fin(i)) => Some((k - 1 - i) as u128),
        (_, IndexValue::OmegaStar(j)) => Some(*j as u128),
        _ => None,
    }
}

/// `t` lies among the first `n` or the last `n` indices of its power.
pub fn index_in_border(t: &IndexValue, n: u64) -> bool {
    match t {
        IndexValue::Omega(i) => *i < n,
        IndexValue::OmegaStar(j) => *j < n,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// positions

pub fn validate(w: &WordExpr, p: &Position) -> Result<(), GenWordError> {
    validate_rec(w, &p.0, &p.0)
}

fn validate_rec(w: &WordExpr, path: &[Step], full: &[Step]) -> Result<(), GenWordError> {
    match (w, path.split_first()) {
        (WordExpr::Lit(s), Some((Step::Offset(i), []))) => {
            if (*i as usize) < s.chars().count() {
                Ok(())
            } else {
                Err(invalid(full, "offset out of range"))
            }
        }
        (WordExpr::Cat(l, _), Some((Step::Left, rest))) => validate_rec(l, rest, full),
        (WordExpr::Cat(_, r), Some((Step::Right, rest))) => validate_rec(r, rest, full),
        (WordExpr::Pow(tau, inner), Some((Step::At(t), rest))) => {
            if !index_valid(*tau, t) {
                return Err(invalid(full, "index does not belong to the power's order type"));
            }
            validate_rec(inner, rest, full)
        }
        _ => Err(invalid(full, "path does not match the word's shape")),
    }
}

fn lit_char(s: &str, i: u32) -> Option<char> {
    s.chars().nth(i as usize)
}

pub fn label(w: &WordExpr, p: &Position) -> Result<char, GenWordError> {
    validate(w, p)?;
    let mut node = w;
    for step in &p.0 {
        match (node, step) {
            (WordExpr::Cat(l, _), Step::Left) => node = l,
            (WordExpr::Cat(_, r), Step::Right) => node = r,
            (WordExpr::Pow(_, inner), Step::At(_)) => node = inner,
            (WordExpr::Lit(s), Step::Offset(i)) => {
                return lit_char(s, *i).ok_or_else(|| invalid(&p.0, "offset out of range"))
            }
            _ => break,
        }
    }
    Err(invalid(&p.0, "path does not end at a letter"))
}

/// Order comparison of two positions of `w`.
pub fn ord(w: &WordExpr, p1: &Position, p2: &Position) -> Result<Ordering, GenWordError> {
    validate(w, p1)?;
    validate(w, p2)?;
    Ok(ord_unchecked(&p1.0, &p2.0))
}

/// Compares two paths already known to be valid in the same word.
pub(crate) fn ord_unchecked(a: &[Step], b: &[Step]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = match (x, y) {
            (Step::Left, Step::Right) => Ordering::Less,
            (Step::Right, Step::Left) => Ordering::Greater,
            (Step::At(s), Step::At(t)) => index_cmp(s, t),
            (Step::Offset(i), Step::Offset(j)) => i.cmp(j),
            _ => Ordering::Equal,
        };
        if c != Ordering::Equal {
            return c;
        }
    }
    Ordering::Equal
}

pub fn first(w: &WordExpr) -> Option<Position> {
    first_rec(w).map(Position)
}

pub fn last(w: &WordExpr) -> Option<Position> {
    last_rec(w).map(Position)
}

fn first_rec(w: &WordExpr) -> Option<Vec<Step>> {
    match w {
        WordExpr::Lit(s) => (!s.is_empty()).then(|| vec![Step::Offset(0)]),
        WordExpr::Cat(l, r) => {
            if l.is_empty() {
                prepend(Step::Right, first_rec(r)?)
            } else {
                prepend(Step::Left, first_rec(l)?)
            }
        }
        WordExpr::Pow(tau, inner) => {
            if w.is_empty() {
                return None;
            }
            prepend(Step::At(first_index(*tau)?), first_rec(inner)?)
        }
    }
}

fn last_rec(w: &WordExpr) -> Option<Vec<Step>> {
    match w {
        WordExpr::Lit(s) => {
            let n = s.chars().count();
            (n > 0).then(|| vec![Step::Offset(n as u32 - 1)])
        }
        WordExpr::Cat(l, r) => {
            if r.is_empty() {
                prepend(Step::Left, last_rec(l)?)
            } else {
                prepend(Step::Right, last_rec(r)?)
            }
        }
        WordExpr::Pow(tau, inner) => {
            if w.is_empty() {
                return None;
            }
            prepend(Step::At(last_index(*tau)?), last_rec(inner)?)
        }
    }
}

fn prepend(step: Step, mut rest: Vec<Step>) -> Option<Vec<Step>> {
    rest.insert(0, step);
    Some(rest)
}

enum Neighbor {
    Found(Vec<Step>),
    /// the position is the last (resp. first) of this subword
    Boundary,
    /// elements follow but none is immediate
    Gap,
}

fn succ_rec(w: &WordExpr, path: &[Step]) -> Neighbor {
    use Neighbor::*;
    match (w, path.split_first()) {
        (WordExpr::Lit(s), Some((Step::Offset(i), _))) => {
            if ((i + 1) as usize) < s.chars().count() {
                Found(vec![Step::Offset(i + 1)])
            } else {
                Boundary
            }
        }
        (WordExpr::Cat(l, r), Some((Step::Left, rest))) => match succ_rec(l, rest) {
            Found(p) => Found(prepend(Step::Left, p).unwrap()),
            Gap => Gap,
            Boundary => {
                if r.is_empty() {
                    Boundary
                } else {
                    match first_rec(r) {
                        Some(p) => Found(prepend(Step::Right, p).unwrap()),
                        None => Gap,
                    }
                }
            }
        },
        (WordExpr::Cat(_, r), Some((Step::Right, rest))) => match succ_rec(r, rest) {
            Found(p) => Found(prepend(Step::Right, p).unwrap()),
            other => other,
        },
        (WordExpr::Pow(tau, inner), Some((Step::At(t), rest))) => match succ_rec(inner, rest) {
            Found(p) => Found(prepend(Step::At(t.clone()), p).unwrap()),
            Gap => Gap,
            Boundary => match index_succ(*tau, t) {
                None => Boundary,
                Some(next) => match first_rec(inner) {
                    Some(p) => Found(prepend(Step::At(next), p).unwrap()),
                    None => Gap,
                },
            },
        },
        _ => Gap,
    }
}

fn pred_rec(w: &WordExpr, path: &[Step]) -> Neighbor {
    use Neighbor::*;
    match (w, path.split_first()) {
        (WordExpr::Lit(_), Some((Step::Offset(i), _))) => {
            if *i > 0 {
                Found(vec![Step::Offset(i - 1)])
            } else {
                Boundary
            }
        }
        (WordExpr::Cat(l, _), Some((Step::Left, rest))) => match pred_rec(l, rest) {
            Found(p) => Found(prepend(Step::Left, p).unwrap()),
            other => other,
        },
        (WordExpr::Cat(l, _), Some((Step::Right, rest))) => match pred_rec(w_right(w), rest) {
            Found(p) => Found(prepend(Step::Right, p).unwrap()),
            Gap => Gap,
            Boundary => {
                if l.is_empty() {
                    Boundary
                } else {
                    match last_rec(l) {
                        Some(p) => Found(prepend(Step::Left, p).unwrap()),
                        None => Gap,
                    }
                }
            }
        },
        (WordExpr::Pow(tau, inner), Some((Step::At(t), rest))) => match pred_rec(inner, rest) {
            Found(p) => Found(prepend(Step::At(t.clone()), p).unwrap()),
            Gap => Gap,
            Boundary => match index_pred(*tau, t) {
                None => Boundary,
                Some(prev) => match last_rec(inner) {
                    Some(p) => Found(prepend(Step::At(prev), p).unwrap()),
                    None => Gap,
                },
            },
        },
        _ => Gap,
    }
}

fn w_right(w: &WordExpr) -> &WordExpr {
    match w {
        WordExpr::Cat(_, r) => r,
        _ => w,
    }
}

/// Immediate successor, if one exists.
pub fn succ(w: &WordExpr, p: &Position) -> Result<Option<Position>, GenWordError> {
    validate(w, p)?;
    Ok(match succ_rec(w, &p.0) {
        Neighbor::Found(q) => Some(Position(q)),
        _ => None,
    })
}

/// Immediate predecessor, if one exists.
pub fn pred(w: &WordExpr, p: &Position) -> Result<Option<Position>, GenWordError> {
    validate(w, p)?;
    Ok(match pred_rec(w, &p.0) {
        Neighbor::Found(q) => Some(Position(q)),
        _ => None,
    })
}

/// Border test at the innermost infinite power on the path of `p`.
pub fn in_n_border(w: &WordExpr, p: &Position, n: u64) -> Result<bool, GenWordError> {
    validate(w, p)?;
    let mut node = w;
    let mut governing = None;
    for step in &p.0 {
        match (node, step) {
            (WordExpr::Cat(l, _), Step::Left) => node = l,
            (WordExpr::Cat(_, r), Step::Right) => node = r,
            (WordExpr::Pow(tau, inner), Step::At(t)) => {
                if tau.is_infinite() {
                    governing = Some(t);
                }
                node = inner;
            }
            _ => {}
        }
    }
    Ok(governing.map(|t| index_in_border(t, n)).unwrap_or(false))
}

/// Number of positions strictly before `p`; `None` if infinite.
pub fn count_before(w: &WordExpr, p: &[Step]) -> Option<u128> {
    match (w, p.split_first()) {
        (WordExpr::Lit(_), Some((Step::Offset(i), _))) => Some(*i as u128),
        (WordExpr::Cat(l, _), Some((Step::Left, rest))) => count_before(l, rest),
        (WordExpr::Cat(l, r), Some((Step::Right, rest))) => Some(l.size()?.saturating_add(count_before(r, rest)?)),
        (WordExpr::Pow(tau, inner), Some((Step::At(t), rest))) => {
            let within = count_before(inner, rest)?;
            let copies = index_count_before(*tau, t)?;
            if copies == 0 {
                Some(within)
            } else {
                Some(copies.saturating_mul(inner.size()?).saturating_add(within))
            }
        }
        _ => None,
    }
}

/// Number of positions strictly after `p`; `None` if infinite.
pub fn count_after(w: &WordExpr, p: &[Step]) -> Option<u128> {
    match (w, p.split_first()) {
        (WordExpr::Lit(s), Some((Step::Offset(i), _))) => Some((s.chars().count() - 1 - *i as usize) as u128),
        (WordExpr::Cat(_, r), Some((Step::Right, rest))) => count_after(r, rest),
        (WordExpr::Cat(l, r), Some((Step::Left, rest))) => Some(r.size()?.saturating_add(count_after(l, rest)?)),
        (WordExpr::Pow(tau, inner), Some((Step::At(t), rest))) => {
            let within = count_after(inner, rest)?;
            let copies = index_count_after(*tau, t)?;
            if copies == 0 {
                Some(within)
            } else {
                Some(copies.saturating_mul(inner.size()?).saturating_add(within))
            }
        }
        _ => None,
    }
}

/// Number of successor steps between two positions, if finite.
pub fn distance(w: &WordExpr, a: &[Step], b: &[Step]) -> Option<u128> {
    let (lo, hi) = match ord_unchecked(a, b) {
        Ordering::Equal => return Some(0),
        Ordering::Less => (a, b),
        Ordering::Greater => (b, a),
    };
    let mut node = w;
    let mut i = 0;
    while lo[i] == hi[i] {
        node = match (node, &lo[i]) {
            (WordExpr::Cat(l, _), Step::Left) => l,
            (WordExpr::Cat(_, r), Step::Right) => r,
            (WordExpr::Pow(_, inner), Step::At(_)) => inner,
            _ => return None,
        };
        i += 1;
    }
    let (x, y) = (&lo[i + 1..], &hi[i + 1..]);
    match (node, &lo[i], &hi[i]) {
        (WordExpr::Lit(_), Step::Offset(p), Step::Offset(q)) => Some((q - p) as u128),
        (WordExpr::Cat(l, r), Step::Left, Step::Right) => Some(count_after(l, x)? + 1 + count_before(r, y)?),
        (WordExpr::Pow(_, inner), Step::At(s), Step::At(t)) => {
            let copies = index_gap(s, t)?;
            let between = if copies > 1 { (copies - 1).checked_mul(inner.size()?)? } else { 0 };
            Some(count_after(inner, x)? + 1 + between + count_before(inner, y)?)
        }
        _ => None,
    }
}

/// `t - s` for indices `s < t` of the same discrete part.
fn index_gap(s: &IndexValue, t: &IndexValue) -> Option<u128> {
    match (s, t) {
        (IndexValue::Fin(i), IndexValue::Fin(j)) | (IndexValue::Omega(i), IndexValue::Omega(j)) => {
            Some((j - i) as u128)
        }
        (IndexValue::OmegaStar(i), IndexValue::OmegaStar(j)) => Some((i - j) as u128),
        (IndexValue::Zeta(i), IndexValue::Zeta(j)) => Some((j - i) as u128),
        (IndexValue::Dense(q, i), IndexValue::Dense(r, j)) if q == r => Some((j - i) as u128),
        _ => None,
    }
}

/// The position with exactly `n` predecessors, if any.
pub fn locate_by_count_before(w: &WordExpr, n: u128) -> Option<Position> {
    locate_before(w, n).map(Position)
}

/// The position with exactly `n` successors, if any.
pub fn locate_by_count_after(w: &WordExpr, n: u128) -> Option<Position> {
    locate_after(w, n).map(Position)
}

fn locate_before(w: &WordExpr, n: u128) -> Option<Vec<Step>> {
    match w {
        WordExpr::Lit(s) => ((n as usize) < s.chars().count()).then(|| vec![Step::Offset(n as u32)]),
        WordExpr::Cat(l, r) => match l.size() {
            Some(m) if n >= m => prepend(Step::Right, locate_before(r, n - m)?),
            _ => prepend(Step::Left, locate_before(l, n)?),
        },
        WordExpr::Pow(tau, inner) => {
            if w.is_empty() {
                return None;
            }
            let (copy, rest) = match inner.size() {
                Some(m) => ((n / m) as u64, n % m),
                None => (0, n),
            };
            let idx = match tau {
                Tau::Fin(k) if copy < *k => IndexValue::Fin(copy),
                Tau::Omega | Tau::Sigma | Tau::Rho => IndexValue::Omega(copy),
                _ => return None,
            };
            prepend(Step::At(idx), locate_before(inner, rest)?)
        }
    }
}

fn locate_after(w: &WordExpr, n: u128) -> Option<Vec<Step>> {
    match w {
        WordExpr::Lit(s) => {
            let len = s.chars().count();
            ((n as usize) < len).then(|| vec![Step::Offset((len - 1 - n as usize) as u32)])
        }
        WordExpr::Cat(l, r) => match r.size() {
            Some(m) if n >= m => prepend(Step::Left, locate_after(l, n - m)?),
            _ => prepend(Step::Right, locate_after(r, n)?),
        },
        WordExpr::Pow(tau, inner) => {
            if w.is_empty() {
                return None;
            }
            let (copy, rest) = match inner.size() {
                Some(m) => ((n / m) as u64, n % m),
                None => (0, n),
            };
            let idx = match tau {
                Tau::Fin(k) if copy < *k => IndexValue::Fin(k - 1 - copy),
                Tau::OmegaStar | Tau::Sigma | Tau::Rho => IndexValue::OmegaStar(copy),
                _ => return None,
            };
            prepend(Step::At(idx), locate_after(inner, rest)?)
        }
    }
}

/// All positions of a finite word in increasing order.
pub fn all_positions(w: &WordExpr) -> Result<Vec<Position>, GenWordError> {
    let n = w.size().ok_or(GenWordError::NotFinite)?;
    Ok((0..n).filter_map(|i| locate_by_count_before(w, i)).collect())
}

/// Replaces every infinite power by a finite one (σ, ϱ, ζ by `3k`, ω and ω*
/// by `k`) and flattens.
pub fn finite_approx(w: &WordExpr, k: u64) -> String {
    approx_expr(w, k).flatten().expect("approximation is finite")
}

pub fn approx_multiplicity(tau: Tau, k: u64) -> u64 {
    match tau {
        Tau::Fin(j) => j,
        Tau::Sigma | Tau::Rho | Tau::Zeta => 3 * k,
        Tau::Omega | Tau::OmegaStar => k,
    }
}

pub fn approx_expr(w: &WordExpr, k: u64) -> WordExpr {
    match w {
        WordExpr::Lit(_) => w.clone(),
        WordExpr::Cat(l, r) => WordExpr::cat(approx_expr(l, k), approx_expr(r, k)),
        WordExpr::Pow(tau, inner) => WordExpr::pow(Tau::Fin(approx_multiplicity(*tau, k)), approx_expr(inner, k)),
    }
}

// ---------------------------------------------------------------------------
// region signatures

/// Distance of an index to the accessible end(s) of its part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistClass {
    FromStart(u64),
    FromEnd(u64),
    Deep,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SigStep {
    Left,
    Right,
    /// exact index inside a finite power
    Fin(u64),
    Part(PartTag, DistClass),
    Offset(u32),
}

/// Abstraction of a position: exact near the ends of infinite parts, "deep"
/// elsewhere.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionSignature(pub Vec<SigStep>);

pub fn region_signature(w: &WordExpr, p: &Position, budget: u64) -> Result<RegionSignature, GenWordError> {
    validate(w, p)?;
    Ok(signature_unchecked(&p.0, budget))
}

pub(crate) fn index_sig(t: &IndexValue, budget: u64) -> SigStep {
    match t {
        IndexValue::Fin(i) => SigStep::Fin(*i),
        IndexValue::Omega(i) if *i < budget => SigStep::Part(PartTag::Omega, DistClass::FromStart(*i)),
        IndexValue::OmegaStar(j) if *j < budget => SigStep::Part(PartTag::OmegaStar, DistClass::FromEnd(*j)),
        other => SigStep::Part(other.part(), DistClass::Deep),
    }
}

pub(crate) fn signature_unchecked(p: &[Step], budget: u64) -> RegionSignature {
    RegionSignature(
        p.iter()
            .map(|s| match s {
                Step::Left => SigStep::Left,
                Step::Right => SigStep::Right,
                Step::Offset(i) => SigStep::Offset(*i),
                Step::At(t) => index_sig(t, budget),
            })
            .collect(),
    )
}

/// Coarse class of a position: its letter and whether it has finitely many
/// predecessors and successors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionClass {
    pub letter: char,
    pub finite_before: bool,
    pub finite_after: bool,
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |fin: bool| if fin { "fin" } else { "inf" };
        write!(f, "{}:({},{})", self.letter, d(self.finite_before), d(self.finite_after))
    }
}

/// The set of region classes realized by positions of `w`.
pub fn region_classes(w: &WordExpr) -> BTreeSet<RegionClass> {
    match w {
        WordExpr::Lit(s) => {
            s.chars().map(|c| RegionClass { letter: c, finite_before: true, finite_after: true }).collect()
        }
        WordExpr::Cat(l, r) => {
            let (lf, rf) = (l.is_finite(), r.is_finite());
            let mut out: BTreeSet<_> = region_classes(l)
                .into_iter()
                .map(|c| RegionClass { finite_after: c.finite_after && rf, ..c })
                .collect();
            out.extend(
                region_classes(r).into_iter().map(|c| RegionClass { finite_before: c.finite_before && lf, ..c }),
            );
            out
        }
        WordExpr::Pow(tau, inner) => {
            if w.is_empty() {
                return BTreeSet::new();
            }
            let inner_finite = inner.is_finite();
            // (first, finitely many before, last, finitely many after) for each kind of index
            let kinds: Vec<(bool, bool, bool, bool)> = match tau {
                Tau::Fin(1) => vec![(true, true, true, true)],
                Tau::Fin(2) => vec![(true, true, false, true), (false, true, true, true)],
                Tau::Fin(_) => vec![(true, true, false, true), (false, true, false, true), (false, true, true, true)],
                Tau::Omega => vec![(true, true, false, false), (false, true, false, false)],
                Tau::OmegaStar => vec![(false, false, true, true), (false, false, false, true)],
                Tau::Zeta => vec![(false, false, false, false)],
                Tau::Sigma | Tau::Rho => vec![
                    (true, true, false, false),
                    (false, true, false, false),
                    (false, false, false, false),
                    (false, false, false, true),
                    (false, false, true, true),
                ],
            };
            let inner_classes = region_classes(inner);
            let mut out = BTreeSet::new();
            for (is_first, fin_before, is_last, fin_after) in kinds {
                for c in &inner_classes {
                    out.insert(RegionClass {
                        letter: c.letter,
                        finite_before: c.finite_before && (is_first || (fin_before && inner_finite)),
                        finite_after: c.finite_after && (is_last || (fin_after && inner_finite)),
                    });
                }
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// text encoding of positions

fn fmt_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

impl fmt::Display for IndexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexValue::Fin(i) => write!(f, "fin:{i}"),
            IndexValue::Omega(i) => write!(f, "w:{i}"),
            IndexValue::OmegaStar(0) => f.write_str("w*:0"),
            IndexValue::OmegaStar(j) => write!(f, "w*:-{j}"),
            IndexValue::Zeta(i) => write!(f, "z:{i}"),
            IndexValue::Dense(q, i) => write!(f, "zn({}):{i}", fmt_rational(q)),
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, step) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str("/")?;
            }
            match step {
                Step::Left => f.write_str("L")?,
                Step::Right => f.write_str("R")?,
                Step::At(t) => write!(f, "P[{t}]")?,
                Step::Offset(i) => write!(f, "@{i}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for IndexValue {
    type Err = GenWordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GenWordError::PositionSyntax(s.to_string());
        let (part, index) = s.rsplit_once(':').ok_or_else(bad)?;
        let int: i64 = index.trim().parse().map_err(|_| bad())?;
        let nat = || u64::try_from(int).map_err(|_| bad());
        match part.trim() {
            "fin" => Ok(IndexValue::Fin(nat()?)),
            "w" => Ok(IndexValue::Omega(nat()?)),
            "w*" => {
                if int > 0 {
                    return Err(bad());
                }
                Ok(IndexValue::OmegaStar(int.unsigned_abs()))
            }
            "z" => Ok(IndexValue::Zeta(int)),
            other => {
                let q = other.strip_prefix("zn(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
                let (num, den) = match q.split_once('/') {
                    Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
                    None => (q.trim().parse().map_err(|_| bad())?, 1i64),
                };
                if den == 0 {
                    return Err(bad());
                }
                Ok(IndexValue::Dense(Rational::new(num, den), int))
            }
        }
    }
}

impl FromStr for Position {
    type Err = GenWordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(GenWordError::PositionSyntax(s.to_string()));
        }
        parse_steps(s)
    }
}

// Not a plain split on '/': dense indices contain rationals such as "zn(1/2)".
fn parse_steps(s: &str) -> Result<Position, GenWordError> {
    let bad = || GenWordError::PositionSyntax(s.to_string());
    let mut steps = Vec::new();
    let mut rest = s;
    while !rest.is_empty() {
        let (tok, tail) = if rest.starts_with("P[") {
            let end = rest.find(']').ok_or_else(bad)?;
            (&rest[..=end], &rest[end + 1..])
        } else {
            match rest.find('/') {
                Some(i) => (&rest[..i], &rest[i..]),
                None => (rest, ""),
            }
        };
        let step = match tok.trim() {
            "L" => Step::Left,
            "R" => Step::Right,
            t if t.starts_with('@') => Step::Offset(t[1..].parse().map_err(|_| bad())?),
            t if t.starts_with("P[") => Step::At(t[2..t.len() - 1].parse()?),
            _ => return Err(bad()),
        };
        steps.push(step);
        rest = tail.strip_prefix('/').unwrap_or(tail);
        if tail.starts_with('/') && rest.is_empty() {
            return Err(bad());
        }
    }
    Ok(Position(steps))
}

impl Serialize for Position {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Position {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi_term::parse_term;
    use proptest::prelude::*;

    fn pos(s: &str) -> Position {
        s.parse().unwrap()
    }

    fn a_sigma() -> WordExpr {
        WordExpr::pow(Tau::Sigma, WordExpr::lit("a"))
    }

    #[test]
    fn eval_term_examples() {
        let t = parse_term("x^w").unwrap();
        assert_eq!(eval_term(&t, Tau::Sigma).unwrap(), WordExpr::pow(Tau::Sigma, WordExpr::lit("x")));
        let t = parse_term("(xy)^2").unwrap();
        let w = eval_term(&t, Tau::Sigma).unwrap();
        assert_eq!(w.size(), Some(4));
        assert_eq!(w.flatten().unwrap(), "xyxy");
        let t = parse_term("(xy)^w").unwrap();
        assert_eq!(eval_term(&t, Tau::Fin(3)).unwrap().flatten().unwrap(), "xy".repeat(3));
        assert_eq!(eval_term(&t, Tau::Fin(0)), Err(GenWordError::UnsupportedTau(Tau::Fin(0))));
        assert!(eval_term(&t, Tau::Zeta).is_err());
    }

    #[test]
    fn ord_examples() {
        let w = a_sigma();
        assert_eq!(ord(&w, &pos("P[w:0]/@0"), &pos("P[w:1]/@0")).unwrap(), Ordering::Less);
        assert_eq!(ord(&w, &pos("P[w:5]/@0"), &pos("P[z:-10]/@0")).unwrap(), Ordering::Less);
        assert_eq!(ord(&w, &pos("P[w*:-3]/@0"), &pos("P[w*:0]/@0")).unwrap(), Ordering::Less);
        assert_eq!(ord(&w, &pos("P[z:4]/@0"), &pos("P[z:4]/@0")).unwrap(), Ordering::Equal);
        assert!(ord(&w, &pos("P[fin:0]/@0"), &pos("P[w:0]/@0")).is_err());
    }

    #[test]
    fn labels() {
        let w = WordExpr::pow(Tau::Sigma, WordExpr::lit("ab"));
        assert_eq!(label(&w, &pos("P[z:0]/@1")).unwrap(), 'b');
        let r = WordExpr::pow(Tau::Rho, WordExpr::lit("a"));
        assert_eq!(label(&r, &pos("P[zn(1/2):-7]/@0")).unwrap(), 'a');
        assert!(label(&w, &pos("P[z:0]/@2")).is_err());
    }

    #[test]
    fn neighbors() {
        let w = a_sigma();
        assert_eq!(succ(&w, &pos("P[w:3]/@0")).unwrap(), Some(pos("P[w:4]/@0")));
        assert_eq!(pred(&w, &pos("P[w:0]/@0")).unwrap(), None);
        assert_eq!(succ(&w, &pos("P[w*:0]/@0")).unwrap(), None);
        assert_eq!(pred(&w, &pos("P[w*:0]/@0")).unwrap(), Some(pos("P[w*:-1]/@0")));
        // crossing a concatenation boundary
        let ww = WordExpr::cat(a_sigma(), a_sigma());
        assert_eq!(succ(&ww, &pos("L/P[w*:0]/@0")).unwrap(), Some(pos("R/P[w:0]/@0")));
        assert_eq!(pred(&ww, &pos("R/P[w:0]/@0")).unwrap(), Some(pos("L/P[w*:0]/@0")));
        // no first element after a ζ-power
        let z = WordExpr::cat(WordExpr::lit("b"), WordExpr::pow(Tau::Zeta, WordExpr::lit("a")));
        assert_eq!(succ(&z, &pos("L/@0")).unwrap(), None);
        // dense copies
        let r = WordExpr::pow(Tau::Rho, WordExpr::lit("a"));
        assert_eq!(succ(&r, &pos("P[zn(1/3):2]/@0")).unwrap(), Some(pos("P[zn(1/3):3]/@0")));
        // the ω-part has no last element
        let o = WordExpr::cat(WordExpr::pow(Tau::Omega, WordExpr::lit("a")), WordExpr::lit("b"));
        assert_eq!(pred(&o, &pos("R/@0")).unwrap(), None);
    }

    #[test]
    fn borders() {
        let w = a_sigma();
        assert!(in_n_border(&w, &pos("P[w:1]/@0"), 2).unwrap());
        assert!(!in_n_border(&w, &pos("P[w:2]/@0"), 2).unwrap());
        assert!(in_n_border(&w, &pos("P[w*:-1]/@0"), 2).unwrap());
        assert!(!in_n_border(&w, &pos("P[z:0]/@0"), 2).unwrap());
        assert!(!in_n_border(&WordExpr::lit("ab"), &pos("@0"), 2).unwrap());
    }

    #[test]
    fn border_cardinality_per_power() {
        let w = a_sigma();
        let sample: Vec<IndexValue> = (0..20u64)
            .map(IndexValue::Omega)
            .chain((-20..20).map(IndexValue::Zeta))
            .chain((0..20u64).map(IndexValue::OmegaStar))
            .collect();
        for n in 0..=5 {
            let count = sample
                .iter()
                .filter(|t| in_n_border(&w, &Position(vec![Step::At((*t).clone()), Step::Offset(0)]), n).unwrap())
                .count();
            assert_eq!(count as u64, 2 * n);
        }
    }

    #[test]
    fn finite_approximations() {
        assert_eq!(finite_approx(&a_sigma(), 1), "aaa");
        assert_eq!(finite_approx(&WordExpr::cat(a_sigma(), a_sigma()), 2), "a".repeat(12));
    }

    fn size_oracle(w: &WordExpr, k: u64) -> u64 {
        match w {
            WordExpr::Lit(s) => s.len() as u64,
            WordExpr::Cat(l, r) => size_oracle(l, k) + size_oracle(r, k),
            WordExpr::Pow(Tau::Fin(j), i) => j * size_oracle(i, k),
            WordExpr::Pow(Tau::Omega | Tau::OmegaStar, i) => k * size_oracle(i, k),
            WordExpr::Pow(_, i) => 3 * k * size_oracle(i, k),
        }
    }

    #[test]
    fn signatures() {
        let w = a_sigma();
        assert_eq!(
            region_signature(&w, &pos("P[w:0]/@0"), 4).unwrap(),
            RegionSignature(vec![SigStep::Part(PartTag::Omega, DistClass::FromStart(0)), SigStep::Offset(0)])
        );
        for b in 1..6 {
            assert_eq!(
                region_signature(&w, &pos("P[z:7]/@0"), b).unwrap(),
                RegionSignature(vec![SigStep::Part(PartTag::Zeta, DistClass::Deep), SigStep::Offset(0)])
            );
        }
    }

    #[test]
    fn signature_equality_implies_border_agreement() {
        let words =
            [a_sigma(), WordExpr::pow(Tau::Sigma, WordExpr::lit("ab")), WordExpr::cat(a_sigma(), WordExpr::lit("b"))];
        for w in &words {
            let mut positions = Vec::new();
            let idx: Vec<IndexValue> = (0..8u64)
                .map(IndexValue::Omega)
                .chain((-3..3).map(IndexValue::Zeta))
                .chain((0..8u64).map(IndexValue::OmegaStar))
                .collect();
            for t in &idx {
                let inner_len = match w {
                    WordExpr::Pow(_, i) => i.size().unwrap() as u32,
                    _ => 1,
                };
                for o in 0..inner_len {
                    let p = match w {
                        WordExpr::Pow(..) => Position(vec![Step::At(t.clone()), Step::Offset(o)]),
                        _ => Position(vec![Step::Left, Step::At(t.clone()), Step::Offset(0)]),
                    };
                    positions.push(p);
                }
            }
            for budget in 1..5u64 {
                for p in &positions {
                    for q in &positions {
                        if region_signature(w, p, budget).unwrap() == region_signature(w, q, budget).unwrap() {
                            for n in 0..budget {
                                assert_eq!(in_n_border(w, p, n).unwrap(), in_n_border(w, q, n).unwrap());
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn position_text_round_trip() {
        for s in ["R/P[z:-3]/@0", "P[w*:-1]/@0", "L/P[fin:2]/@1", "P[zn(1/2):4]/@0", "P[zn(-3/1):0]/R/@0"] {
            assert_eq!(pos(s).to_string(), s);
        }
        assert!("P[w*:1]/@0".parse::<Position>().is_err());
        assert!("P[q:1]".parse::<Position>().is_err());
        assert!("".parse::<Position>().is_err());
        assert!("L//@0".parse::<Position>().is_err());
    }

    #[test]
    fn region_class_sets() {
        let u = WordExpr::cat(
            WordExpr::pow(Tau::Omega, WordExpr::lit("a")),
            WordExpr::pow(Tau::OmegaStar, WordExpr::lit("a")),
        );
        let v = a_sigma();
        let cu = region_classes(&u);
        let cv = region_classes(&v);
        let deep = RegionClass { letter: 'a', finite_before: false, finite_after: false };
        assert!(!cu.contains(&deep));
        assert!(cv.contains(&deep));
        assert_eq!(region_classes(&WordExpr::cat(a_sigma(), a_sigma())), cv);
    }

    #[test]
    fn counting_and_locating() {
        let w = WordExpr::pow(Tau::Sigma, WordExpr::lit("ab"));
        assert_eq!(count_before(&w, &pos("P[w:3]/@1").0), Some(7));
        assert_eq!(count_before(&w, &pos("P[z:0]/@0").0), None);
        assert_eq!(count_after(&w, &pos("P[w*:-2]/@0").0), Some(5));
        assert_eq!(locate_by_count_before(&w, 7), Some(pos("P[w:3]/@1")));
        assert_eq!(locate_by_count_after(&w, 5), Some(pos("P[w*:-2]/@0")));
        let z = WordExpr::pow(Tau::Zeta, WordExpr::lit("a"));
        assert_eq!(locate_by_count_before(&z, 0), None);
    }

    #[test]
    fn parse_word_literals() {
        assert_eq!(parse_word("a^w a^w", Tau::Sigma).unwrap(), WordExpr::cat(a_sigma(), a_sigma()));
        assert_eq!(
            parse_word("a^o a^o*", Tau::Sigma).unwrap(),
            WordExpr::cat(
                WordExpr::pow(Tau::Omega, WordExpr::lit("a")),
                WordExpr::pow(Tau::OmegaStar, WordExpr::lit("a"))
            )
        );
        assert_eq!(parse_word("aab", Tau::Sigma).unwrap(), WordExpr::lit("aab"));
        assert_eq!(parse_word("", Tau::Sigma).unwrap(), WordExpr::lit(""));
        assert_eq!(parse_word("a^0", Tau::Sigma).unwrap().size(), Some(0));
        assert_eq!(parse_word("(ab)^z", Tau::Sigma).unwrap(), WordExpr::pow(Tau::Zeta, WordExpr::lit("ab")));
    }

    fn arb_finite_word() -> impl Strategy<Value = WordExpr> {
        let leaf = "[ab]{0,3}".prop_map(WordExpr::Lit);
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| WordExpr::cat(l, r)),
                (inner, 0u64..3).prop_map(|(w, k)| WordExpr::pow(Tau::Fin(k), w)),
            ]
        })
        .prop_filter("short", |w| w.size().unwrap() <= 5)
    }

    fn arb_sigma_word() -> impl Strategy<Value = WordExpr> {
        let leaf = "[ab]{1,2}".prop_map(WordExpr::Lit);
        leaf.prop_recursive(3, 10, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| WordExpr::cat(l, r)),
                inner.clone().prop_map(|w| WordExpr::pow(Tau::Sigma, w)),
                (inner, 1u64..3).prop_map(|(w, k)| WordExpr::pow(Tau::Fin(k), w)),
            ]
        })
    }

    fn sample_position(w: &WordExpr, seed: &mut u64) -> Position {
        fn next(seed: &mut u64) -> u64 {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *seed >> 33
        }
        let mut steps = Vec::new();
        let mut node = w;
        loop {
            match node {
                WordExpr::Lit(s) => {
                    steps.push(Step::Offset((next(seed) % s.len() as u64) as u32));
                    return Position(steps);
                }
                WordExpr::Cat(l, r) => {
                    if next(seed).is_multiple_of(2) {
                        steps.push(Step::Left);
                        node = l;
                    } else {
                        steps.push(Step::Right);
                        node = r;
                    }
                }
                WordExpr::Pow(tau, inner) => {
                    let t = match tau {
                        Tau::Fin(k) => IndexValue::Fin(next(seed) % k),
                        _ => match next(seed) % 3 {
                            0 => IndexValue::Omega(next(seed) % 4),
                            1 => IndexValue::Zeta((next(seed) % 7) as i64 - 3),
                            _ => IndexValue::OmegaStar(next(seed) % 4),
                        },
                    };
                    steps.push(Step::At(t));
                    node = inner;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn finite_words_are_isomorphic_to_their_flattening(w in arb_finite_word()) {
            let flat = w.flatten().unwrap();
            let positions = all_positions(&w).unwrap();
            prop_assert_eq!(positions.len(), flat.len());
            for (i, p) in positions.iter().enumerate() {
                prop_assert_eq!(label(&w, p).unwrap(), flat.as_bytes()[i] as char);
                prop_assert_eq!(count_before(&w, &p.0), Some(i as u128));
                for (j, q) in positions.iter().enumerate() {
                    prop_assert_eq!(ord(&w, p, q).unwrap(), i.cmp(&j));
                }
                let s = succ(&w, p).unwrap();
                prop_assert_eq!(s, positions.get(i + 1).cloned());
                let pr = pred(&w, p).unwrap();
                prop_assert_eq!(pr, if i == 0 { None } else { positions.get(i - 1).cloned() });
            }
        }

        #[test]
        fn approximation_length_matches_size_recursion(w in arb_sigma_word(), k in 1u64..4) {
            prop_assert_eq!(finite_approx(&w, k).len() as u64, size_oracle(&w, k));
        }

        #[test]
        fn ord_is_a_total_order(w in arb_sigma_word(), seed in any::<u64>()) {
            let mut s = seed;
            let ps: Vec<Position> = (0..6).map(|_| sample_position(&w, &mut s)).collect();
            for p in &ps {
                for q in &ps {
                    let c = ord(&w, p, q).unwrap();
                    prop_assert_eq!(c.reverse(), ord(&w, q, p).unwrap());
                    prop_assert_eq!(c == Ordering::Equal, p == q);
                    for r in &ps {
                        if c != Ordering::Greater && ord(&w, q, r).unwrap() != Ordering::Greater {
                            prop_assert_ne!(ord(&w, p, r).unwrap(), Ordering::Greater);
                        }
                    }
                }
            }
        }

        #[test]
        fn succ_and_pred_are_inverse(w in arb_sigma_word(), seed in any::<u64>()) {
            let mut s = seed;
            for _ in 0..8 {
                let p = sample_position(&w, &mut s);
                if let Some(q) = succ(&w, &p).unwrap() {
                    prop_assert_eq!(pred(&w, &q).unwrap(), Some(p.clone()));
                    prop_assert_eq!(ord(&w, &p, &q).unwrap(), Ordering::Less);
                }
                if let Some(q) = pred(&w, &p).unwrap() {
                    prop_assert_eq!(succ(&w, &q).unwrap(), Some(p.clone()));
                }
            }
        }

        #[test]
        fn distance_matches_successor_walk(w in arb_sigma_word(), seed in any::<u64>()) {
            let mut s = seed;
            let p = sample_position(&w, &mut s);
            let q = sample_position(&w, &mut s);
            let (lo, hi) = if ord(&w, &p, &q).unwrap() == Ordering::Greater { (q.clone(), p.clone()) } else { (p.clone(), q.clone()) };
            let mut walked = None;
            let mut cur = lo.clone();
            for d in 0..40u128 {
                if cur == hi {
                    walked = Some(d);
                    break;
                }
                match succ(&w, &cur).unwrap() {
                    Some(n) => cur = n,
                    None => break,
                }
            }
            let d = distance(&w, &p.0, &q.0);
            match walked {
                Some(k) => prop_assert_eq!(d, Some(k)),
                None => prop_assert!(d.is_none_or(|k| k >= 40)),
            }
        }

        #[test]
        fn border_is_monotone(w in arb_sigma_word(), seed in any::<u64>(), n in 0u64..6) {
            let mut s = seed;
            let p = sample_position(&w, &mut s);
            if in_n_border(&w, &p, n).unwrap() {
                prop_assert!(in_n_border(&w, &p, n + 1).unwrap());
            }
        }

        #[test]
        fn position_text_encoding_round_trips(w in arb_sigma_word(), seed in any::<u64>()) {
            let mut s = seed;
            let p = sample_position(&w, &mut s);
            prop_assert_eq!(p.to_string().parse::<Position>().unwrap(), p);
        }
    }
}
