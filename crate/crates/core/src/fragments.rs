//! Fragment descriptors and first-order formulas over words.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genword::{self, GenWordError, Position, WordExpr};

/// A first-order variable. `Var(0)`, `Var(1)`, `Var(2)` print as x, y, z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(pub u8);

impl Var {
    pub const X: Var = Var(0);
    pub const Y: Var = Var(1);
    pub const Z: Var = Var(2);
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("x"),
            1 => f.write_str("y"),
            2 => f.write_str("z"),
            n => write!(f, "x{n}"),
        }
    }
}

impl FromStr for Var {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Var::X),
            "y" => Ok(Var::Y),
            "z" => Ok(Var::Z),
            _ => s
                .strip_prefix('x')
                .and_then(|n| n.parse().ok())
                .map(Var)
                .ok_or_else(|| FormulaError::Syntax { offset: 0, message: format!("bad variable '{s}'") }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantifier {
    Exists,
    Forall,
    NotExists,
    NotForall,
}

impl Quantifier {
    pub const ALL: [Quantifier; 4] =
        [Quantifier::Exists, Quantifier::Forall, Quantifier::NotExists, Quantifier::NotForall];

    /// The quest is placed in the left word for ∃ and ¬∀.
    pub fn quest_on_left(self) -> bool {
        matches!(self, Quantifier::Exists | Quantifier::NotForall)
    }

    /// ¬∃ and ¬∀ swap the two words in the resulting configuration.
    pub fn swaps(self) -> bool {
        matches!(self, Quantifier::NotExists | Quantifier::NotForall)
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantifier::Exists => "E",
            Quantifier::Forall => "A",
            Quantifier::NotExists => "!E",
            Quantifier::NotForall => "!A",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Fo,
    Fo2,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Fo => "FO",
            Family::Fo2 => "FO2",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "FO" => Ok(Family::Fo),
            "FO2" => Ok(Family::Fo2),
            _ => Err(format!("unknown fragment family '{s}' (expected FO or FO2)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Depth {
    Bounded(u32),
    Unbounded,
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Bounded(n) => write!(f, "{n}"),
            Depth::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// FO_n, FO²_n, or their unbounded unions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FragmentDesc {
    pub family: Family,
    pub depth: Depth,
}

impl FragmentDesc {
    pub fn new(family: Family, depth: Depth) -> Self {
        FragmentDesc { family, depth }
    }

    pub fn fo(n: u32) -> Self {
        Self::new(Family::Fo, Depth::Bounded(n))
    }

    pub fn fo2(n: u32) -> Self {
        Self::new(Family::Fo2, Depth::Bounded(n))
    }

    pub fn in_pool(&self, x: Var) -> bool {
        match self.family {
            Family::Fo => true,
            Family::Fo2 => x.0 < 2,
        }
    }

    /// The reduct by `q x`; `None` when it is empty.
    pub fn reduct(&self, _q: Quantifier, x: Var) -> Option<FragmentDesc> {
        if !self.in_pool(x) {
            return None;
        }
        let depth = match self.depth {
            Depth::Bounded(0) => return None,
            Depth::Bounded(n) => Depth::Bounded(n - 1),
            Depth::Unbounded => Depth::Unbounded,
        };
        Some(FragmentDesc { family: self.family, depth })
    }

    pub fn with_depth(&self, n: u32) -> FragmentDesc {
        FragmentDesc { family: self.family, depth: Depth::Bounded(n) }
    }
}

impl fmt::Display for FragmentDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.depth {
            Depth::Bounded(n) => write!(f, "{}_{n}", self.family),
            Depth::Unbounded => write!(f, "{}", self.family),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    True,
    False,
    Eq(Var, Var),
    Lt(Var, Var),
    Le(Var, Var),
    Label(Var, char),
}

impl Atom {
    pub fn vars(&self) -> Vec<Var> {
        match *self {
            Atom::True | Atom::False => vec![],
            Atom::Eq(a, b) | Atom::Lt(a, b) | Atom::Le(a, b) => vec![a, b],
            Atom::Label(a, _) => vec![a],
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::True => f.write_str("T"),
            Atom::False => f.write_str("F"),
            Atom::Eq(a, b) => write!(f, "{a}={b}"),
            Atom::Lt(a, b) => write!(f, "{a}<{b}"),
            Atom::Le(a, b) => write!(f, "{a}<={b}"),
            Atom::Label(a, c) => write!(f, "lab({a})={c}"),
        }
    }
}

/// A formula. `And(vec![])` is ⊤ and `Or(vec![])` is ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn exists(x: Var, f: Formula) -> Self {
        Formula::Exists(x, Box::new(f))
    }

    pub fn forall(x: Var, f: Formula) -> Self {
        Formula::Forall(x, Box::new(f))
    }
}

/// Quantifier depth.
pub fn qd(phi: &Formula) -> u32 {
    match phi {
        Formula::Atom(_) => 0,
        Formula::Not(f) => qd(f),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().map(qd).max().unwrap_or(0),
        Formula::Exists(_, f) | Formula::Forall(_, f) => 1 + qd(f),
    }
}

pub fn free_vars(phi: &Formula) -> BTreeSet<Var> {
    match phi {
        Formula::Atom(a) => a.vars().into_iter().collect(),
        Formula::Not(f) => free_vars(f),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().flat_map(free_vars).collect(),
        Formula::Exists(x, f) | Formula::Forall(x, f) => {
            let mut v = free_vars(f);
            v.remove(x);
            v
        }
    }
}

/// All variables occurring in `phi`, bound or free.
pub fn all_vars(phi: &Formula) -> BTreeSet<Var> {
    match phi {
        Formula::Atom(a) => a.vars().into_iter().collect(),
        Formula::Not(f) => all_vars(f),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().flat_map(all_vars).collect(),
        Formula::Exists(x, f) | Formula::Forall(x, f) => {
            let mut v = all_vars(f);
            v.insert(*x);
            v
        }
    }
}

pub fn in_fragment(f: &FragmentDesc, phi: &Formula) -> bool {
    let depth_ok = match f.depth {
        Depth::Bounded(n) => qd(phi) <= n,
        Depth::Unbounded => true,
    };
    depth_ok && all_vars(phi).into_iter().all(|x| f.in_pool(x))
}

pub type Valuation = BTreeMap<Var, Position>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("variable {0} is not bound by the valuation")]
    Unbound(Var),
    #[error(transparent)]
    Word(#[from] GenWordError),
    #[error("formula syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

/// Tarskian evaluation on a finite word.
pub fn eval_formula(w: &WordExpr, alpha: &Valuation, phi: &Formula) -> Result<bool, FormulaError> {
    let letters: Vec<char> = w.flatten()?.chars().collect();
    let mut env = BTreeMap::new();
    for (x, p) in alpha {
        genword::validate(w, p)?;
        let i = genword::count_before(w, &p.0).expect("finite word") as usize;
        env.insert(*x, i);
    }
    eval_flat(&letters, &mut env, phi)
}

fn eval_flat(letters: &[char], env: &mut BTreeMap<Var, usize>, phi: &Formula) -> Result<bool, FormulaError> {
    let get = |env: &BTreeMap<Var, usize>, x: &Var| env.get(x).copied().ok_or(FormulaError::Unbound(*x));
    Ok(match phi {
        Formula::Atom(a) => match a {
            Atom::True => true,
            Atom::False => false,
            Atom::Eq(x, y) => get(env, x)? == get(env, y)?,
            Atom::Lt(x, y) => get(env, x)? < get(env, y)?,
            Atom::Le(x, y) => get(env, x)? <= get(env, y)?,
            Atom::Label(x, c) => letters[get(env, x)?] == *c,
        },
        Formula::Not(f) => !eval_flat(letters, env, f)?,
        Formula::And(fs) => {
            for f in fs {
                if !eval_flat(letters, env, f)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(fs) => {
            for f in fs {
                if eval_flat(letters, env, f)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Exists(x, f) | Formula::Forall(x, f) => {
            let want = matches!(phi, Formula::Exists(..));
            let saved = env.get(x).copied();
            let mut result = !want;
            for i in 0..letters.len() {
                env.insert(*x, i);
                if eval_flat(letters, env, f)? == want {
                    result = want;
                    break;
                }
            }
            restore(env, *x, saved);
            result
        }
    })
}

fn restore(env: &mut BTreeMap<Var, usize>, x: Var, saved: Option<usize>) {
    match saved {
        Some(i) => env.insert(x, i),
        None => env.remove(&x),
    };
}

/// Atomic semantics on a symbolic word, finite or not.
pub fn eval_atomic(w: &WordExpr, alpha: &Valuation, atom: &Atom) -> Result<bool, FormulaError> {
    let get = |x: &Var| alpha.get(x).ok_or(FormulaError::Unbound(*x));
    Ok(match atom {
        Atom::True => true,
        Atom::False => false,
        Atom::Eq(x, y) => genword::ord(w, get(x)?, get(y)?)? == Ordering::Equal,
        Atom::Lt(x, y) => genword::ord(w, get(x)?, get(y)?)? == Ordering::Less,
        Atom::Le(x, y) => genword::ord(w, get(x)?, get(y)?)? != Ordering::Greater,
        Atom::Label(x, c) => genword::label(w, get(x)?)? == *c,
    })
}

// ---------------------------------------------------------------------------
// text syntax

fn is_compound(f: &Formula) -> bool {
    matches!(f, Formula::And(fs) | Formula::Or(fs) if fs.len() >= 2)
}

fn write_operand(f: &mut fmt::Formatter<'_>, phi: &Formula) -> fmt::Result {
    if is_compound(phi) {
        write!(f, "({phi})")
    } else {
        write!(f, "{phi}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => {
                f.write_str("!")?;
                write_operand(f, g)
            }
            Formula::And(fs) | Formula::Or(fs) => match fs.as_slice() {
                [] => f.write_str(if matches!(self, Formula::And(_)) { "T" } else { "F" }),
                [one] => write!(f, "{one}"),
                many => {
                    let sep = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                    for (i, g) in many.iter().enumerate() {
                        if i > 0 {
                            f.write_str(sep)?;
                        }
                        write_operand(f, g)?;
                    }
                    Ok(())
                }
            },
            Formula::Exists(x, g) | Formula::Forall(x, g) => {
                let q = if matches!(self, Formula::Exists(..)) { "E" } else { "A" };
                write!(f, "{q}{x} ")?;
                write_operand(f, g)
            }
        }
    }
}

struct FormulaParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> FormulaParser<'a> {
    fn err(&self, message: impl Into<String>) -> FormulaError {
        FormulaError::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn var(&mut self) -> Result<Var, FormulaError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = match rest.chars().next() {
            Some('x') => 1 + rest[1..].chars().take_while(char::is_ascii_digit).count(),
            Some('y' | 'z') => 1,
            _ => return Err(self.err("expected a variable")),
        };
        let v = rest[..len].parse().map_err(|_| self.err("bad variable"))?;
        self.pos += len;
        Ok(v)
    }

    fn or(&mut self) -> Result<Formula, FormulaError> {
        let mut items = vec![self.and()?];
        while self.eat("|") {
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::Or(items) })
    }

    fn and(&mut self) -> Result<Formula, FormulaError> {
        let mut items = vec![self.unary()?];
        while self.eat("&") {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::And(items) })
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        if self.eat("!") {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat("(") {
            let f = self.or()?;
            if !self.eat(")") {
                return Err(self.err("expected ')'"));
            }
            return Ok(f);
        }
        if self.eat("E") {
            let x = self.var()?;
            return Ok(Formula::exists(x, self.unary()?));
        }
        if self.eat("A") {
            let x = self.var()?;
            return Ok(Formula::forall(x, self.unary()?));
        }
        if self.eat("T") {
            return Ok(Formula::Atom(Atom::True));
        }
        if self.eat("F") {
            return Ok(Formula::Atom(Atom::False));
        }
        if self.eat("lab(") {
            let x = self.var()?;
            if !self.eat(")") || !self.eat("=") {
                return Err(self.err("expected ')='"));
            }
            self.skip_ws();
            let c = self.src[self.pos..].chars().next().filter(char::is_ascii_lowercase);
            let c = c.ok_or_else(|| self.err("expected a letter"))?;
            self.pos += 1;
            return Ok(Formula::Atom(Atom::Label(x, c)));
        }
        let x = self.var()?;
        let atom = if self.eat("<=") {
            Atom::Le(x, self.var()?)
        } else if self.eat("<") {
            Atom::Lt(x, self.var()?)
        } else if self.eat("=") {
            Atom::Eq(x, self.var()?)
        } else {
            return Err(self.err("expected '=', '<' or '<='"));
        };
        Ok(Formula::Atom(atom))
    }
}

impl FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = FormulaParser { src: s, pos: 0 };
        let f = p.or()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(f)
    }
}
