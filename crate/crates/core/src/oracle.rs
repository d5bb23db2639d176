//! Brute-force ground truth on finite words: exhaustive game search and
//! enumeration of sentences up to quantifier depth 2.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{self, decide_bounded, default_budget, spoiler_wins_now, step, GameConfig, Move, Player, Valuated};
use crate::fragments::{
    eval_formula, Atom, Depth, Family, Formula, FormulaError, FragmentDesc, Quantifier, Valuation, Var,
};
use crate::genword::{self, approx_expr, Position, WordExpr};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("the oracle needs finite words")]
    NotFinite,
    #[error("the oracle needs a bounded fragment")]
    Unbounded,
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

type ExactKey = (FragmentDesc, String, Vec<(Var, u128)>, String, Vec<(Var, u128)>);

struct Exhaustive {
    memo: HashMap<ExactKey, bool>,
    positions: HashMap<String, Vec<Position>>,
}

impl Exhaustive {
    fn positions(&mut self, w: &WordExpr) -> Vec<Position> {
        let flat = w.flatten().expect("finite word");
        self.positions.entry(flat).or_insert_with(|| genword::all_positions(w).expect("finite word")).clone()
    }

    fn key(c: &GameConfig) -> ExactKey {
        let side = |v: &Valuated| -> (String, Vec<(Var, u128)>) {
            let idx =
                v.val.iter().map(|(x, p)| (*x, genword::count_before(&v.word, &p.0).expect("finite word"))).collect();
            (v.word.flatten().expect("finite word"), idx)
        };
        let (lw, lv) = side(&c.left);
        let (rw, rv) = side(&c.right);
        (c.fragment, lw, lv, rw, rv)
    }

    fn candidate_vars(c: &GameConfig) -> Vec<Var> {
        let mut vars: BTreeSet<Var> = c.left.val.keys().copied().collect();
        match c.fragment.family {
            Family::Fo2 => {
                vars.insert(Var::X);
                vars.insert(Var::Y);
            }
            Family::Fo => {
                let fresh = (0u8..).map(Var).find(|x| !vars.contains(x)).unwrap();
                vars.insert(fresh);
            }
        }
        vars.into_iter().collect()
    }

    fn spoiler_wins(&mut self, c: &GameConfig) -> Result<bool, OracleError> {
        if spoiler_wins_now(c).is_some() {
            return Ok(true);
        }
        let key = Self::key(c);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let mut wins = false;
        'search: for q in Quantifier::ALL {
            for x in Self::candidate_vars(c) {
                if c.fragment.reduct(q, x).is_none() {
                    continue;
                }
                let (quest_word, answer_word) = if q.quest_on_left() {
                    (c.left.word.clone(), c.right.word.clone())
                } else {
                    (c.right.word.clone(), c.left.word.clone())
                };
                let answers = self.positions(&answer_word);
                for quest in self.positions(&quest_word) {
                    let mut all_lose = true;
                    for response in &answers {
                        let m = Move { quantifier: q, var: x, quest: quest.clone(), response: response.clone() };
                        if !self.spoiler_wins(&step(c, &m)?)? {
                            all_lose = false;
                            break;
                        }
                    }
                    if all_lose {
                        wins = true;
                        break 'search;
                    }
                }
            }
        }
        self.memo.insert(key, wins);
        Ok(wins)
    }
}

/// Exhaustive minimax over every quantifier, variable, quest and response.
pub fn decide_finite_exact(c: &GameConfig) -> Result<Player, OracleError> {
    if !c.left.word.is_finite() || !c.right.word.is_finite() {
        return Err(OracleError::NotFinite);
    }
    if c.fragment.depth == Depth::Unbounded {
        return Err(OracleError::Unbounded);
    }
    let mut search = Exhaustive { memo: HashMap::new(), positions: HashMap::new() };
    Ok(if search.spoiler_wins(c)? { Player::Spoiler } else { Player::Duplicator })
}

// ---------------------------------------------------------------------------
// sentence enumeration

/// A generating set of sentences: every sentence of the fragment is
/// equivalent to a Boolean combination of the listed ones.
///
/// Formulas of depth `k` with free variables `V` are generated by atoms
/// over `V` and by `∃z T` where `T` ranges over consistent complete types
/// of depth `k - 1` over `V ∪ {z}`. A complete type fixes the truth value of
/// every generator, so only consistent atomic parts are kept: one letter per
/// variable and one order relation per pair.
pub struct SentenceOracle {
    fragment: FragmentDesc,
    alphabet: Vec<char>,
    sentences: Vec<Formula>,
}

const MAX_ENUM_DEPTH: u32 = 2;
const MAX_ALPHABET: usize = 2;

fn conj(items: Vec<Formula>) -> Formula {
    if items.len() == 1 {
        items.into_iter().next().unwrap()
    } else {
        Formula::And(items)
    }
}

fn literal(f: Formula, positive: bool) -> Formula {
    if positive {
        f
    } else {
        Formula::not(f)
    }
}

impl SentenceOracle {
    pub fn new(fragment: FragmentDesc, alphabet: &BTreeSet<char>) -> Result<Self, OracleError> {
        let depth = match fragment.depth {
            Depth::Bounded(n) if n <= MAX_ENUM_DEPTH => n,
            Depth::Bounded(n) => return Err(OracleError::Budget(format!("depth {n} exceeds {MAX_ENUM_DEPTH}"))),
            Depth::Unbounded => return Err(OracleError::Unbounded),
        };
        if alphabet.len() > MAX_ALPHABET {
            return Err(OracleError::Budget(format!("alphabet of size {} exceeds {MAX_ALPHABET}", alphabet.len())));
        }
        let alphabet: Vec<char> = alphabet.iter().copied().collect();
        let mut o = SentenceOracle { fragment, alphabet, sentences: vec![] };
        let mut out = vec![Formula::Atom(Atom::True), Formula::Atom(Atom::False)];
        for g in o.generators(&[], depth) {
            out.push(Formula::not(g.clone()));
            out.push(g);
        }
        let mut seen = BTreeSet::new();
        out.retain(|f| seen.insert(f.to_string()));
        o.sentences = out;
        Ok(o)
    }

    pub fn sentences(&self) -> &[Formula] {
        &self.sentences
    }

    fn pool_for(&self, vars: &[Var]) -> Vec<Var> {
        match self.fragment.family {
            Family::Fo2 => vec![Var::X, Var::Y],
            Family::Fo => vec![(0u8..).map(Var).find(|x| !vars.contains(x)).unwrap()],
        }
    }

    /// Consistent complete atomic types over `vars`.
    fn atomic_types(&self, vars: &[Var]) -> Vec<Vec<Formula>> {
        let mut types: Vec<(Vec<Formula>, Vec<(Var, char)>)> = vec![(vec![], vec![])];
        for x in vars {
            let mut next = Vec::new();
            for (lits, labels) in &types {
                for (i, c) in self.alphabet.iter().enumerate() {
                    let mut l = lits.clone();
                    for (j, d) in self.alphabet.iter().enumerate() {
                        l.push(literal(Formula::Atom(Atom::Label(*x, *d)), i == j));
                    }
                    let mut lb = labels.clone();
                    lb.push((*x, *c));
                    next.push((l, lb));
                }
            }
            types = next;
        }
        for (i, x) in vars.iter().enumerate() {
            for y in &vars[i + 1..] {
                let mut next = Vec::new();
                for (lits, labels) in &types {
                    for rel in [-1i8, 0, 1] {
                        if rel == 0 {
                            let lx = labels.iter().find(|(v, _)| v == x).map(|p| p.1);
                            let ly = labels.iter().find(|(v, _)| v == y).map(|p| p.1);
                            if lx != ly {
                                continue;
                            }
                        }
                        let mut l = lits.clone();
                        l.push(literal(Formula::Atom(Atom::Lt(*x, *y)), rel == -1));
                        l.push(literal(Formula::Atom(Atom::Eq(*x, *y)), rel == 0));
                        l.push(literal(Formula::Atom(Atom::Lt(*y, *x)), rel == 1));
                        next.push((l, labels.clone()));
                    }
                }
                types = next;
            }
        }
        // at depth 2 there are at most two variables, so pairwise choices are consistent
        types.into_iter().map(|(l, _)| l).collect()
    }

    /// Quantified generators of depth exactly `1..=k` with free variables in `vars`.
    fn generators(&self, vars: &[Var], k: u32) -> Vec<Formula> {
        if k == 0 {
            return vec![];
        }
        let mut out = Vec::new();
        for z in self.pool_for(vars) {
            let mut inner_vars: Vec<Var> = vars.iter().copied().filter(|v| *v != z).collect();
            inner_vars.push(z);
            inner_vars.sort();
            let inner_gens = self.generators(&inner_vars, k - 1);
            for atomic in self.atomic_types(&inner_vars) {
                let n = inner_gens.len();
                for mask in 0u64..(1u64 << n) {
                    let mut lits = atomic.clone();
                    for (i, g) in inner_gens.iter().enumerate() {
                        lits.push(literal(g.clone(), mask >> i & 1 == 1));
                    }
                    out.push(Formula::exists(z, conj(lits)));
                }
            }
        }
        out
    }

    /// Truth values of all sentences on a finite word.
    pub fn profile(&self, w: &WordExpr) -> Result<Vec<bool>, OracleError> {
        let empty = Valuation::new();
        self.sentences.iter().map(|f| Ok(eval_formula(w, &empty, f)?)).collect()
    }

    /// Every listed sentence true in `u` holds in `v`.
    pub fn implies(&self, u: &WordExpr, v: &WordExpr) -> Result<bool, OracleError> {
        let (pu, pv) = (self.profile(u)?, self.profile(v)?);
        Ok(pu.iter().zip(&pv).all(|(a, b)| !a || *b))
    }
}

/// A generating set of sentences of `f` over `alphabet`.
pub fn enumerate_formulas(f: &FragmentDesc, alphabet: &BTreeSet<char>) -> Result<Vec<Formula>, OracleError> {
    Ok(SentenceOracle::new(*f, alphabet)?.sentences)
}

/// Every sentence of `f` satisfied by `u` is satisfied by `v`.
pub fn implication_check(u: &WordExpr, v: &WordExpr, f: &FragmentDesc) -> Result<bool, OracleError> {
    if !u.is_finite() || !v.is_finite() {
        return Err(OracleError::NotFinite);
    }
    let alphabet: BTreeSet<char> = u.letters().union(&v.letters()).copied().collect();
    SentenceOracle::new(*f, &alphabet)?.implies(u, v)
}

/// Engine verdict on `(u, v)` next to the exhaustive verdict on their
/// finite approximations with parameter `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrossCheck {
    pub engine: Player,
    pub oracle: Player,
}

impl CrossCheck {
    pub fn agree(&self) -> bool {
        self.engine == self.oracle
    }
}

pub fn crosscheck_sigma(u: &WordExpr, v: &WordExpr, family: Family, n: u32, k: u64) -> Result<CrossCheck, OracleError> {
    let f = FragmentDesc::new(family, Depth::Bounded(n));
    let engine = decide_bounded(&GameConfig::sentences(f, u.clone(), v.clone()), default_budget(n))?.winner;
    let approx = |w: &WordExpr| Valuated::empty(Arc::new(approx_expr(w, k)));
    let oracle = decide_finite_exact(&GameConfig::new(f, approx(u), approx(v)))?;
    Ok(CrossCheck { engine, oracle })
}

/// All words over `alphabet` of length at most `max_len`, shortest first.
pub fn words_up_to(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|w| alphabet.iter().map(move |c| format!("{w}{c}"))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}
