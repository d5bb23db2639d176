//! Ehrenfeucht–Fraïssé games between two valuated words.
//!
//! The bounded solver is a memoized minimax over representative quests. On
//! finite words the representative sets are the full domains and keys are
//! exact, so verdicts are exact. On infinite words a quest set is a finite
//! sample covering every region near part ends and pinned positions plus
//! one deep position per gap; Spoiler wins found this way are genuine, while
//! Duplicator wins are relative to the sample.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fragments::{Atom, Depth, Family, FragmentDesc, Quantifier, Valuation, Var};
use crate::genword::{
    self, count_after, count_before, index_cmp, index_in_border, index_pred, index_succ, ord_unchecked, region_classes,
    signature_unchecked, GenWordError, IndexValue, Position, RegionClass, RegionSignature, Step, Tau, WordExpr,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    Duplicator,
    Spoiler,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Duplicator => "Duplicator",
            Player::Spoiler => "Spoiler",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A word together with a valuation of the game variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Valuated {
    pub word: Arc<WordExpr>,
    pub val: Valuation,
}

impl Valuated {
    pub fn new(word: Arc<WordExpr>, val: Valuation) -> Self {
        Valuated { word, val }
    }

    pub fn empty(word: Arc<WordExpr>) -> Self {
        Valuated { word, val: Valuation::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameConfig {
    pub fragment: FragmentDesc,
    pub left: Valuated,
    pub right: Valuated,
}

impl GameConfig {
    pub fn new(fragment: FragmentDesc, left: Valuated, right: Valuated) -> Self {
        GameConfig { fragment, left, right }
    }

    /// Both words with empty valuations.
    pub fn sentences(fragment: FragmentDesc, u: WordExpr, v: WordExpr) -> Self {
        Self::new(fragment, Valuated::empty(Arc::new(u)), Valuated::empty(Arc::new(v)))
    }

    pub fn side(&self, s: Side) -> &Valuated {
        match s {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        let dl: BTreeSet<_> = self.left.val.keys().collect();
        let dr: BTreeSet<_> = self.right.val.keys().collect();
        if dl != dr {
            return Err(EngineError::InvalidConfig("valuations have different domains".into()));
        }
        if dl.iter().any(|x| !self.fragment.in_pool(**x)) {
            return Err(EngineError::InvalidConfig(format!("variable outside the pool of {}", self.fragment)));
        }
        for s in [&self.left, &self.right] {
            for p in s.val.values() {
                genword::validate(&s.word, p)?;
            }
        }
        Ok(())
    }
}

/// One round: Spoiler's quest and Duplicator's response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub quantifier: Quantifier,
    pub var: Var,
    pub quest: Position,
    pub response: Position,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("the reduct of {fragment} by {quantifier}{var} is empty")]
    EmptyReduct { fragment: FragmentDesc, quantifier: Quantifier, var: Var },
    #[error("{what} is not a position of the {side:?} word: {source}")]
    WrongSide { what: &'static str, side: Side, source: GenWordError },
    #[error(transparent)]
    Word(#[from] GenWordError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("operation needs a bounded fragment")]
    NeedsBoundedDepth,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// One round of a game. The quest lies in the left word for ∃ and ¬∀ and in
/// the right word for ∀ and ¬∃; negated quantifiers swap the two valuated
/// words.
pub fn step(c: &GameConfig, m: &Move) -> Result<GameConfig, EngineError> {
    let reduct = c.fragment.reduct(m.quantifier, m.var).ok_or(EngineError::EmptyReduct {
        fragment: c.fragment,
        quantifier: m.quantifier,
        var: m.var,
    })?;
    let quest_side = if m.quantifier.quest_on_left() { Side::Left } else { Side::Right };
    genword::validate(&c.side(quest_side).word, &m.quest).map_err(|source| EngineError::WrongSide {
        what: "quest",
        side: quest_side,
        source,
    })?;
    genword::validate(&c.side(quest_side.other()).word, &m.response).map_err(|source| EngineError::WrongSide {
        what: "response",
        side: quest_side.other(),
        source,
    })?;
    let (mut u, mut v) = (c.left.clone(), c.right.clone());
    let (at_u, at_v) = match quest_side {
        Side::Left => (&m.quest, &m.response),
        Side::Right => (&m.response, &m.quest),
    };
    u.val.insert(m.var, at_u.clone());
    v.val.insert(m.var, at_v.clone());
    Ok(if m.quantifier.swaps() { GameConfig::new(reduct, v, u) } else { GameConfig::new(reduct, u, v) })
}

fn atoms_disagree(wl: &WordExpr, vl: &Valuation, wr: &WordExpr, vr: &Valuation) -> Option<Atom> {
    let label = |w: &WordExpr, p: &Position| genword::label(w, p).ok();
    for (x, pl) in vl {
        let pr = vr.get(x)?;
        let (a, b) = (label(wl, pl), label(wr, pr));
        if a != b {
            return a.map(|c| Atom::Label(*x, c));
        }
    }
    let vars: Vec<Var> = vl.keys().copied().collect();
    for (i, x) in vars.iter().enumerate() {
        for y in &vars[i + 1..] {
            let ol = ord_unchecked(&vl[x].0, &vl[y].0);
            let or = ord_unchecked(&vr[x].0, &vr[y].0);
            if ol != or {
                return Some(match ol {
                    Ordering::Less => Atom::Lt(*x, *y),
                    Ordering::Equal => Atom::Eq(*x, *y),
                    Ordering::Greater => Atom::Lt(*y, *x),
                });
            }
        }
    }
    None
}

/// An atom true in the left valuated word and false in the right one, if
/// any exists. Every literal difference between the two sides reduces to
/// such an atom or its negation.
pub fn spoiler_wins_now(c: &GameConfig) -> Option<Atom> {
    atoms_disagree(&c.left.word, &c.left.val, &c.right.word, &c.right.val)
}

pub fn default_budget(depth: u32) -> u64 {
    (1u64 << depth.min(40)) + depth as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certification {
    ExactFinite,
    Representative(u64),
    RuleBased,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub quantifier: Quantifier,
    pub var: Var,
    pub quest: Position,
    pub response: Position,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub winner: Player,
    pub certification: Certification,
    /// principal variation of a Spoiler win, ending in `witness`
    pub trace: Vec<TraceStep>,
    pub witness: Option<Atom>,
}

/// Spoiler's winning strategy as a tree over representative responses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// an atom true on the left and false on the right
    Leaf(Atom),
    Move {
        quest_side: Side,
        var: Var,
        quest: Position,
        /// one subtree per response class
        branches: Vec<(Position, Strategy)>,
    },
}

// ---------------------------------------------------------------------------
// representative positions

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Mode {
    /// drop the deep ω-tail and ω*-head of σ and ϱ in favour of the middle part
    Coarse,
    Fine,
}

struct RepParams {
    radius: u64,
    budget: u64,
    mode: Mode,
}

/// Landmarks of one discrete part plus a deep coordinate in every gap
/// between them and, where the part is unbounded, beyond them.
fn chain(marks: &BTreeSet<i128>, far: i128, below: bool, above: bool) -> Vec<i128> {
    let v: Vec<i128> = marks.iter().copied().collect();
    let mut out = v.clone();
    for w in v.windows(2) {
        if w[1] - w[0] > 1 {
            out.push((w[0] + w[1]).div_euclid(2));
        }
    }
    match (v.first(), v.last()) {
        (Some(&lo), Some(&hi)) => {
            if below {
                out.push(lo - far);
            }
            if above {
                out.push(hi + far);
            }
        }
        _ => out.push(0),
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn pin_marks(pins: impl Iterator<Item = i128>, radius: u64, floor: Option<i128>) -> BTreeSet<i128> {
    let r = radius as i128;
    pins.flat_map(|p| (p - r)..=(p + r)).filter(|c| floor.is_none_or(|f| *c >= f)).collect()
}

fn index_reps(tau: Tau, pinned: &[IndexValue], p: &RepParams) -> Vec<IndexValue> {
    if let Tau::Fin(k) = tau {
        return (0..k).map(IndexValue::Fin).collect();
    }
    let b = p.budget as i128;
    let far = 3 * b + p.radius as i128;
    let keep_tails = !(p.mode == Mode::Coarse && matches!(tau, Tau::Sigma | Tau::Rho));
    let mut out = Vec::new();
    // a part with an accessible end: the first `b` coordinates are landmarks
    let ended = |pins: Vec<i128>| -> Vec<i128> {
        let mut marks = pin_marks(pins.into_iter(), p.radius, Some(0));
        marks.extend(0..b);
        chain(&marks, far, false, keep_tails)
    };
    if matches!(tau, Tau::Omega | Tau::Sigma | Tau::Rho) {
        let pins = pinned.iter().filter_map(|t| match t {
            IndexValue::Omega(i) => Some(*i as i128),
            _ => None,
        });
        out.extend(ended(pins.collect()).into_iter().map(|c| IndexValue::Omega(c as u64)));
    }
    match tau {
        Tau::Zeta | Tau::Sigma => {
            let pins = pinned.iter().filter_map(|t| match t {
                IndexValue::Zeta(i) => Some(*i as i128),
                _ => None,
            });
            let marks = pin_marks(pins, p.radius, None);
            out.extend(chain(&marks, far, true, true).into_iter().map(|c| IndexValue::Zeta(c as i64)));
        }
        Tau::Rho => {
            let mut copies: BTreeMap<genword::Rational, Vec<i128>> = BTreeMap::new();
            for t in pinned {
                if let IndexValue::Dense(q, i) = t {
                    copies.entry(*q).or_default().push(*i as i128);
                }
            }
            let qs: Vec<genword::Rational> = copies.keys().copied().collect();
            let mut all: Vec<(genword::Rational, i128)> = Vec::new();
            match (qs.first(), qs.last()) {
                (Some(lo), Some(hi)) => {
                    all.push((lo - 1, 0));
                    all.push((hi + 1, 0));
                    for w in qs.windows(2) {
                        all.push(((w[0] + w[1]) / 2, 0));
                    }
                }
                _ => all.push((genword::Rational::from_integer(0), 0)),
            }
            for (q, pins) in &copies {
                let marks = pin_marks(pins.iter().copied(), p.radius, None);
                all.extend(chain(&marks, far, true, true).into_iter().map(|c| (*q, c)));
            }
            all.sort();
            all.dedup();
            out.extend(all.into_iter().map(|(q, c)| IndexValue::Dense(q, c as i64)));
        }
        _ => {}
    }
    if matches!(tau, Tau::OmegaStar | Tau::Sigma | Tau::Rho) {
        let pins = pinned.iter().filter_map(|t| match t {
            IndexValue::OmegaStar(j) => Some(*j as i128),
            _ => None,
        });
        let mut js = ended(pins.collect());
        js.reverse();
        out.extend(js.into_iter().map(|c| IndexValue::OmegaStar(c as u64)));
    }
    out
}

fn reps_rec(w: &WordExpr, pins: &[&[Step]], p: &RepParams, out: &mut Vec<Vec<Step>>, prefix: &mut Vec<Step>) {
    match w {
        WordExpr::Lit(s) => {
            for i in 0..s.chars().count() {
                prefix.push(Step::Offset(i as u32));
                out.push(prefix.clone());
                prefix.pop();
            }
        }
        WordExpr::Cat(l, r) => {
            for (step, sub) in [(Step::Left, &**l), (Step::Right, &**r)] {
                let inner: Vec<&[Step]> = pins.iter().filter(|q| q.first() == Some(&step)).map(|q| &q[1..]).collect();
                prefix.push(step);
                reps_rec(sub, &inner, p, out, prefix);
                prefix.pop();
            }
        }
        WordExpr::Pow(tau, inner) => {
            if w.is_empty() {
                return;
            }
            let pinned: Vec<IndexValue> = pins
                .iter()
                .filter_map(|q| match q.first() {
                    Some(Step::At(t)) => Some(t.clone()),
                    _ => None,
                })
                .collect();
            for t in index_reps(*tau, &pinned, p) {
                let sub: Vec<&[Step]> = pins
                    .iter()
                    .filter(|q| matches!(q.first(), Some(Step::At(u)) if *u == t))
                    .map(|q| &q[1..])
                    .collect();
                prefix.push(Step::At(t));
                reps_rec(inner, &sub, p, out, prefix);
                prefix.pop();
            }
        }
    }
}

fn representatives(w: &WordExpr, pins: &[&[Step]], p: &RepParams) -> Vec<Vec<Step>> {
    let mut out = Vec::new();
    reps_rec(w, pins, p, &mut out, &mut Vec::new());
    out.sort_by(|a, b| ord_unchecked(a, b));
    out.dedup();
    out
}

fn is_valid(w: &WordExpr, p: &[Step]) -> bool {
    genword::validate(w, &Position(p.to_vec())).is_ok()
}

// ---------------------------------------------------------------------------
// abstract keys

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PosKey {
    Exact(u128),
    Sig(RegionSignature),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct SideKey {
    word: u8,
    vars: Vec<(Var, PosKey)>,
    /// order and, for FO, the distance if below the budget
    pairs: Vec<(Ordering, Option<u64>)>,
}

type StateKey = (u32, SideKey, SideKey);

/// Distance between two positions if at most `limit`.
fn distance(w: &WordExpr, a: &[Step], b: &[Step], limit: u64) -> Option<u64> {
    genword::distance(w, a, b).filter(|d| *d <= limit as u128).map(|d| d as u64)
}

// ---------------------------------------------------------------------------
// bounded solver

#[derive(Clone)]
struct SideState {
    word: usize,
    val: Valuation,
}

/// Memoized bounded-depth game solver for one pair of words.
pub struct Solver {
    family: Family,
    budget: u64,
    words: Vec<Arc<WordExpr>>,
    finite: Vec<bool>,
    word_ids: Vec<u8>,
    all_positions: Vec<Option<Vec<Vec<Step>>>>,
    memo: HashMap<StateKey, bool>,
    /// per response side without the moved variable: (label, order against each pin) of some response
    response_types: RefCell<HashMap<(usize, Var, Valuation), Rc<HashSet<ResponseType>>>>,
    pub nodes: u64,
}

type ResponseType = (Option<char>, Vec<Ordering>);

impl Solver {
    pub fn new(family: Family, budget: u64, u: Arc<WordExpr>, v: Arc<WordExpr>) -> Self {
        let same = *u == *v;
        let words = vec![u, v];
        let finite: Vec<bool> = words.iter().map(|w| w.is_finite()).collect();
        let all_positions = words
            .iter()
            .map(|w| genword::all_positions(w).ok().map(|ps| ps.into_iter().map(|p| p.0).collect()))
            .collect();
        Solver {
            family,
            budget: budget.max(1),
            words,
            finite,
            word_ids: vec![0, if same { 0 } else { 1 }],
            all_positions,
            memo: HashMap::new(),
            response_types: RefCell::new(HashMap::new()),
            nodes: 0,
        }
    }

    fn radius(&self) -> u64 {
        match self.family {
            Family::Fo => self.budget,
            Family::Fo2 => 1,
        }
    }

    fn word(&self, s: &SideState) -> &WordExpr {
        &self.words[s.word]
    }

    fn side_key(&self, s: &SideState) -> SideKey {
        let w = self.word(s);
        let finite = self.finite[s.word];
        let vars = s
            .val
            .iter()
            .map(|(x, p)| {
                let k = if finite {
                    PosKey::Exact(count_before(w, &p.0).unwrap_or(0))
                } else {
                    PosKey::Sig(signature_unchecked(&p.0, self.budget))
                };
                (*x, k)
            })
            .collect();
        let ps: Vec<&Position> = s.val.values().collect();
        let mut pairs = Vec::new();
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                let o = ord_unchecked(&ps[i].0, &ps[j].0);
                let d = if finite || self.family == Family::Fo2 {
                    None
                } else {
                    distance(w, &ps[i].0, &ps[j].0, self.budget)
                };
                pairs.push((o, d));
            }
        }
        SideKey { word: self.word_ids[s.word], vars, pairs }
    }

    fn state_key(&self, l: &SideState, r: &SideState, d: u32) -> StateKey {
        let (a, b) = (self.side_key(l), self.side_key(r));
        if a <= b {
            (d, a, b)
        } else {
            (d, b, a)
        }
    }

    fn vars_to_try(&self, s: &SideState) -> Vec<Var> {
        match self.family {
            Family::Fo2 => vec![Var::X, Var::Y],
            // a fresh variable dominates reusing one: it keeps every pin
            Family::Fo => {
                let mut x = 0u8;
                while s.val.contains_key(&Var(x)) {
                    x += 1;
                }
                vec![Var(x)]
            }
        }
    }

    fn pins<'a>(&self, own: &'a SideState, other: &'a SideState) -> Vec<&'a [Step]> {
        let w = self.word(own);
        let mut pins: Vec<&[Step]> = own.val.values().map(|p| p.0.as_slice()).collect();
        if own.word != other.word {
            pins.extend(other.val.values().map(|p| p.0.as_slice()).filter(|p| is_valid(w, p)));
        } else {
            pins.extend(other.val.values().map(|p| p.0.as_slice()));
        }
        pins
    }

    fn quest_candidates(&self, quest: &SideState, other: &SideState, mode: Mode) -> Vec<Vec<Step>> {
        if let Some(all) = &self.all_positions[quest.word] {
            return all.clone();
        }
        let params = RepParams { radius: self.radius(), budget: self.budget, mode };
        representatives(self.word(quest), &self.pins(quest, other), &params)
    }

    fn response_type(&self, w: &WordExpr, a: &[Step], pins: &Valuation, x: Var) -> ResponseType {
        let label = genword::label(w, &Position(a.to_vec())).ok();
        (label, pins.iter().filter(|(y, _)| **y != x).map(|(_, p)| ord_unchecked(a, &p.0)).collect())
    }

    /// Whether some position of `resp` realizes `want` after rebinding `x`.
    fn realizable(&self, resp: &SideState, x: Var, want: &ResponseType) -> bool {
        let mut rest = resp.val.clone();
        rest.remove(&x);
        let key = (resp.word, x, rest);
        let cached = self.response_types.borrow().get(&key).cloned();
        let types = match cached {
            Some(t) => t,
            None => {
                let w = self.word(resp);
                let fine;
                let candidates = match &self.all_positions[resp.word] {
                    Some(all) => all,
                    None => {
                        let pins: Vec<&[Step]> = key.2.values().map(|p| p.0.as_slice()).collect();
                        let params = RepParams { radius: self.radius(), budget: self.budget, mode: Mode::Fine };
                        fine = representatives(w, &pins, &params);
                        &fine
                    }
                };
                let t: HashSet<ResponseType> = candidates.iter().map(|a| self.response_type(w, a, &key.2, x)).collect();
                let t = Rc::new(t);
                self.response_types.borrow_mut().insert(key, t.clone());
                t
            }
        };
        types.contains(want)
    }

    /// The mirror and count-matched responses.
    fn priority_responses(&self, quest: &SideState, q: &[Step], resp: &SideState) -> Vec<Vec<Step>> {
        let wq = self.word(quest);
        let wr = self.word(resp);
        let mut out: Vec<Vec<Step>> = Vec::new();
        if is_valid(wr, q) {
            out.push(q.to_vec());
        }
        if let Some(p) = count_before(wq, q).and_then(|n| genword::locate_by_count_before(wr, n)) {
            out.push(p.0);
        }
        if let Some(p) = count_after(wq, q).and_then(|n| genword::locate_by_count_after(wr, n)) {
            out.push(p.0);
        }
        out.dedup();
        out
    }

    fn broad_responses(&self, quest: &SideState, q: &[Step], resp: &SideState) -> Vec<Vec<Step>> {
        match &self.all_positions[resp.word] {
            Some(all) => all.clone(),
            None => {
                let wr = self.word(resp);
                let mut pins = self.pins(resp, quest);
                if is_valid(wr, q) {
                    pins.push(q);
                }
                // pinned by the quest, so rarely shared: not cached
                let params = RepParams { radius: self.radius(), budget: self.budget, mode: Mode::Fine };
                representatives(wr, &pins, &params)
            }
        }
    }

    fn response_candidates(&self, quest: &SideState, q: &[Step], resp: &SideState) -> Vec<Vec<Step>> {
        let mut out = self.priority_responses(quest, q, resp);
        out.extend(self.broad_responses(quest, q, resp));
        let mut seen = HashSet::new();
        out.retain(|p| seen.insert(p.clone()));
        out
    }

    fn assign(s: &SideState, x: Var, p: &[Step]) -> SideState {
        let mut t = s.clone();
        t.val.insert(x, Position(p.to_vec()));
        t
    }

    fn immediate(&self, l: &SideState, r: &SideState) -> Option<Atom> {
        atoms_disagree(self.word(l), &l.val, self.word(r), &r.val)
    }

    /// Quest side, variable and quest candidates, deduplicated by key.
    fn spoiler_options(&self, l: &SideState, r: &SideState, mode: Mode) -> Vec<(Side, Var, Vec<Step>)> {
        let mut out = Vec::new();
        for side in [Side::Left, Side::Right] {
            let (qs, os) = match side {
                Side::Left => (l, r),
                Side::Right => (r, l),
            };
            for x in self.vars_to_try(qs) {
                let mut seen = HashSet::new();
                for q in self.quest_candidates(qs, os, mode) {
                    let mut probe = qs.clone();
                    probe.val.remove(&x);
                    // the abstract class of the quest relative to the remaining pins
                    let key = self.side_key(&Self::assign(&probe, x, &q));
                    if seen.insert(key) {
                        out.push((side, x, q));
                    }
                }
            }
        }
        out
    }

    fn children(
        &self,
        l: &SideState,
        r: &SideState,
        side: Side,
        x: Var,
        q: &[Step],
    ) -> Vec<(Vec<Step>, SideState, SideState)> {
        let (qs, rs) = match side {
            Side::Left => (l, r),
            Side::Right => (r, l),
        };
        let nq = Self::assign(qs, x, q);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for a in self.response_candidates(qs, q, rs) {
            let na = Self::assign(rs, x, &a);
            if !seen.insert(self.side_key(&na)) {
                continue;
            }
            let (nl, nr) = match side {
                Side::Left => (nq.clone(), na),
                Side::Right => (na, nq.clone()),
            };
            out.push((a, nl, nr));
        }
        out
    }

    /// Responses that do not lose on the spot, most similar to the quest first.
    fn scored_responses(&self, l: &SideState, r: &SideState, side: Side, x: Var, q: &[Step]) -> Vec<Vec<Step>> {
        let (qs, rs) = match side {
            Side::Left => (l, r),
            Side::Right => (r, l),
        };
        let candidates = self.response_candidates(qs, q, rs);
        self.score(l, r, side, x, q, candidates)
    }

    fn score(
        &self,
        l: &SideState,
        r: &SideState,
        side: Side,
        x: Var,
        q: &[Step],
        candidates: Vec<Vec<Step>>,
    ) -> Vec<Vec<Step>> {
        let (qs, rs) = match side {
            Side::Left => (l, r),
            Side::Right => (r, l),
        };
        let (wq, wr) = (self.word(qs), self.word(rs));
        let q_label = genword::label(wq, &Position(q.to_vec())).ok();
        let others: Vec<(&Position, &Position)> =
            qs.val.iter().filter(|(y, _)| **y != x).map(|(y, p)| (p, &rs.val[y])).collect();
        let (before, after) = (count_before(wq, q), count_after(wq, q));
        let fo_infinite = self.family == Family::Fo && !self.finite[qs.word];
        let dq: Vec<Option<u64>> = if fo_infinite {
            others.iter().map(|(pq, _)| distance(wq, q, &pq.0, self.budget)).collect()
        } else {
            vec![]
        };
        let mut scored: Vec<(u32, Vec<Step>)> = Vec::new();
        for a in candidates {
            if genword::label(wr, &Position(a.clone())).ok() != q_label
                || others.iter().any(|(pq, pr)| ord_unchecked(q, &pq.0) != ord_unchecked(&a, &pr.0))
            {
                continue;
            }
            let mut score = 2 * (before == count_before(wr, &a)) as u32 + 2 * (after == count_after(wr, &a)) as u32;
            if fo_infinite {
                for (i, (_, pr)) in others.iter().enumerate() {
                    score += (dq[i] == distance(wr, &a, &pr.0, self.budget)) as u32;
                }
            }
            scored.push((score, a));
        }
        scored.sort_by(|a, b| b.0.cmp(&a.0));
        scored.into_iter().map(|(_, a)| a).collect()
    }

    /// Viable responses as successor configurations, one per abstract key.
    fn viable_children(
        &self,
        l: &SideState,
        r: &SideState,
        side: Side,
        x: Var,
        q: &[Step],
    ) -> Vec<(Vec<Step>, SideState, SideState)> {
        let (qs, rs) = match side {
            Side::Left => (l, r),
            Side::Right => (r, l),
        };
        let nq = Self::assign(qs, x, q);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for a in self.scored_responses(l, r, side, x, q) {
            let na = Self::assign(rs, x, &a);
            if !seen.insert(self.side_key(&na)) {
                continue;
            }
            let (nl, nr) = match side {
                Side::Left => (nq.clone(), na),
                Side::Right => (na, nq.clone()),
            };
            out.push((a, nl, nr));
        }
        out
    }

    /// Whether some response to the quest keeps Duplicator alive for `d`
    /// more rounds.
    fn duplicator_survives(&mut self, l: &SideState, r: &SideState, side: Side, x: Var, q: &[Step], d: u32) -> bool {
        let (qs, rs) = match side {
            Side::Left => (l, r),
            Side::Right => (r, l),
        };
        if d == 0 {
            // the last response only has to match label and order
            let want = self.response_type(self.word(qs), q, &qs.val, x);
            if self.realizable(rs, x, &want) {
                return true;
            }
        }
        let nq = Self::assign(qs, x, q);
        let mut seen = HashSet::new();
        let priority = self.priority_responses(qs, q, rs);
        for stage in 0..2 {
            let candidates = if stage == 0 {
                self.score(l, r, side, x, q, priority.clone())
            } else {
                let mut broad = self.broad_responses(qs, q, rs);
                broad.retain(|a| !priority.contains(a));
                self.score(l, r, side, x, q, broad)
            };
            for a in candidates {
                if d == 0 {
                    return true;
                }
                let na = Self::assign(rs, x, &a);
                if !seen.insert(self.side_key(&na)) {
                    continue;
                }
                let alive = match side {
                    Side::Left => !self.spoiler_wins(&nq, &na, d),
                    Side::Right => !self.spoiler_wins(&na, &nq, d),
                };
                if alive {
                    return true;
                }
            }
        }
        false
    }

    /// One round left: quests are grouped by label and order against the
    /// pins, and only groups without a matching response are searched.
    fn spoiler_wins_last_round(&mut self, l: &SideState, r: &SideState) -> bool {
        for side in [Side::Left, Side::Right] {
            let (qs, rs) = match side {
                Side::Left => (l, r),
                Side::Right => (r, l),
            };
            for x in self.vars_to_try(qs) {
                let mut answered: HashMap<ResponseType, bool> = HashMap::new();
                for q in self.quest_candidates(qs, rs, Mode::Coarse) {
                    let t = self.response_type(self.word(qs), &q, &qs.val, x);
                    let ok = match answered.get(&t) {
                        Some(&ok) => ok,
                        None => {
                            let ok = self.realizable(rs, x, &t);
                            answered.insert(t, ok);
                            ok
                        }
                    };
                    if !ok && !self.duplicator_survives(l, r, side, x, &q, 0) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn spoiler_wins(&mut self, l: &SideState, r: &SideState, d: u32) -> bool {
        self.nodes += 1;
        if self.immediate(l, r).is_some() {
            return true;
        }
        // equal configurations: Duplicator copies every move
        if d == 0 || (self.word_ids[l.word] == self.word_ids[r.word] && l.val == r.val) {
            return false;
        }
        let key = self.state_key(l, r, d);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        if d == 1 {
            let result = self.spoiler_wins_last_round(l, r);
            self.memo.insert(key, result);
            return result;
        }
        let mut result = false;
        for (side, x, q) in self.spoiler_options(l, r, Mode::Coarse) {
            if !self.duplicator_survives(l, r, side, x, &q, d - 1) {
                result = true;
                break;
            }
        }
        self.memo.insert(key, result);
        result
    }

    fn winning_move(&mut self, l: &SideState, r: &SideState, d: u32) -> Option<(Side, Var, Vec<Step>)> {
        if d == 0 {
            return None;
        }
        for (side, x, q) in self.spoiler_options(l, r, Mode::Coarse) {
            if !self.duplicator_survives(l, r, side, x, &q, d - 1) {
                return Some((side, x, q));
            }
        }
        None
    }

    fn strategy(&mut self, l: &SideState, r: &SideState, d: u32) -> Option<Strategy> {
        if let Some(a) = self.immediate(l, r) {
            return Some(Strategy::Leaf(a));
        }
        let (side, x, q) = self.winning_move(l, r, d)?;
        let mut branches = Vec::new();
        for (a, nl, nr) in self.children(l, r, side, x, &q) {
            branches.push((Position(a), self.strategy(&nl, &nr, d - 1)?));
        }
        Some(Strategy::Move { quest_side: side, var: x, quest: Position(q), branches })
    }

    fn principal_variation(&mut self, l: &SideState, r: &SideState, d: u32) -> (Vec<TraceStep>, Option<Atom>) {
        let (mut l, mut r, mut d) = (l.clone(), r.clone(), d);
        let mut trace = Vec::new();
        loop {
            if let Some(a) = self.immediate(&l, &r) {
                return (trace, Some(a));
            }
            let Some((side, x, q)) = self.winning_move(&l, &r, d) else {
                return (trace, None);
            };
            // Duplicator's most stubborn answer: the one Spoiler needs most rounds to beat
            let children = self.children(&l, &r, side, x, &q);
            let rounds_needed =
                |s: &mut Self, nl: &SideState, nr: &SideState| (0..d).find(|&m| s.spoiler_wins(nl, nr, m)).unwrap_or(d);
            let mut best: Option<(u32, (Vec<Step>, SideState, SideState))> = None;
            for child in children {
                let m = rounds_needed(self, &child.1, &child.2);
                if best.as_ref().is_none_or(|(bm, _)| m > *bm) {
                    best = Some((m, child));
                }
            }
            let Some((_, (a, nl, nr))) = best else {
                // the response domain is empty
                return (trace, None);
            };
            trace.push(TraceStep {
                quantifier: if side == Side::Left { Quantifier::Exists } else { Quantifier::Forall },
                var: x,
                quest: Position(q),
                response: Position(a),
            });
            l = nl;
            r = nr;
            d -= 1;
        }
    }
}

fn states(c: &GameConfig) -> (SideState, SideState) {
    (SideState { word: 0, val: c.left.val.clone() }, SideState { word: 1, val: c.right.val.clone() })
}

fn bounded_depth(c: &GameConfig) -> Result<u32, EngineError> {
    match c.fragment.depth {
        Depth::Bounded(n) => Ok(n),
        Depth::Unbounded => Err(EngineError::NeedsBoundedDepth),
    }
}

fn solver_for(c: &GameConfig, budget: u64) -> Solver {
    Solver::new(c.fragment.family, budget, c.left.word.clone(), c.right.word.clone())
}

/// Decides a bounded game. Exact when both words are finite.
pub fn decide_bounded(c: &GameConfig, budget: u64) -> Result<Verdict, EngineError> {
    c.validate()?;
    let n = bounded_depth(c)?;
    let mut solver = solver_for(c, budget);
    let (l, r) = states(c);
    let spoiler = solver.spoiler_wins(&l, &r, n);
    let certification = if c.left.word.is_finite() && c.right.word.is_finite() {
        Certification::ExactFinite
    } else {
        Certification::Representative(solver.budget)
    };
    let (trace, witness) = if spoiler { solver.principal_variation(&l, &r, n) } else { (vec![], None) };
    Ok(Verdict { winner: if spoiler { Player::Spoiler } else { Player::Duplicator }, certification, trace, witness })
}

/// Spoiler's winning strategy tree, if Spoiler wins the bounded game.
pub fn spoiler_strategy(c: &GameConfig, budget: u64) -> Result<Option<Strategy>, EngineError> {
    c.validate()?;
    let n = bounded_depth(c)?;
    let mut solver = solver_for(c, budget);
    let (l, r) = states(c);
    if !solver.spoiler_wins(&l, &r, n) {
        return Ok(None);
    }
    Ok(solver.strategy(&l, &r, n))
}

/// A winning Duplicator response to the move `q x` with the given quest, if
/// one exists among the representative responses.
pub fn best_response(
    c: &GameConfig,
    q: Quantifier,
    x: Var,
    quest: &Position,
    budget: u64,
) -> Result<Option<Position>, EngineError> {
    c.validate()?;
    let reduct =
        c.fragment.reduct(q, x).ok_or(EngineError::EmptyReduct { fragment: c.fragment, quantifier: q, var: x })?;
    let quest_side = if q.quest_on_left() { Side::Left } else { Side::Right };
    genword::validate(&c.side(quest_side).word, quest).map_err(|source| EngineError::WrongSide {
        what: "quest",
        side: quest_side,
        source,
    })?;
    let d = match reduct.depth {
        Depth::Bounded(n) => n,
        Depth::Unbounded => return Err(EngineError::NeedsBoundedDepth),
    };
    let mut solver = solver_for(c, budget);
    let (l, r) = states(c);
    let children = solver.viable_children(&l, &r, quest_side, x, &quest.0);
    for (a, nl, nr) in children {
        if !solver.spoiler_wins(&nl, &nr, d) {
            return Ok(Some(Position(a)));
        }
    }
    Ok(None)
}

/// The representative quests Spoiler considers on one side.
pub fn representative_quests(c: &GameConfig, side: Side, budget: u64) -> Vec<Position> {
    let solver = solver_for(c, budget);
    let (l, r) = states(c);
    let (q, o) = match side {
        Side::Left => (&l, &r),
        Side::Right => (&r, &l),
    };
    solver.quest_candidates(q, o, Mode::Coarse).into_iter().map(Position).collect()
}

// ---------------------------------------------------------------------------
// unbounded games

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCertificate {
    /// a class realized only in the word on this side
    pub class: RegionClass,
    pub present_in: Side,
    pub left_classes: Vec<RegionClass>,
    pub right_classes: Vec<RegionClass>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpoilerCertificate {
    Region(RegionCertificate),
    BoundedDepth { depth: u32, trace: Vec<TraceStep>, witness: Option<Atom> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DuplicatorCertificate {
    /// equal valuated words: Duplicator copies every move
    Identity,
    /// abstract configurations closed under Spoiler moves by Duplicator responses
    ClosedSet { budget: u64, states: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnboundedVerdict {
    DuplicatorCertified(DuplicatorCertificate),
    SpoilerCertified(SpoilerCertificate),
    DuplicatorUpToDepth(u32),
}

impl UnboundedVerdict {
    pub fn tag(&self) -> &'static str {
        match self {
            UnboundedVerdict::DuplicatorCertified(_) => "DuplicatorCertified",
            UnboundedVerdict::SpoilerCertified(_) => "SpoilerCertified",
            UnboundedVerdict::DuplicatorUpToDepth(_) => "DuplicatorUpToDepth",
        }
    }
}

/// A position class (letter, finitely many predecessors, finitely many
/// successors) realized in one word but not the other. Spoiler pins such a
/// position and then counts towards the nearer end in as many rounds as
/// needed.
pub fn spoiler_region_certificate(c: &GameConfig) -> Option<RegionCertificate> {
    let lc = region_classes(&c.left.word);
    let rc = region_classes(&c.right.word);
    let found = lc
        .difference(&rc)
        .next()
        .map(|k| (*k, Side::Left))
        .or_else(|| rc.difference(&lc).next().map(|k| (*k, Side::Right)))?;
    Some(RegionCertificate {
        class: found.0,
        present_in: found.1,
        left_classes: lc.into_iter().collect(),
        right_classes: rc.into_iter().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ClosedKey {
    vars: Vec<(Var, RegionSignature, RegionSignature, bool)>,
    order: Option<Ordering>,
}

impl fmt::Display for ClosedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = |s: &RegionSignature| format!("{:?}", s.0);
        for (x, a, b, agree) in &self.vars {
            write!(f, "{x}:{}|{}|{} ", sig(a), sig(b), if *agree { "=" } else { "~" })?;
        }
        if let Some(o) = self.order {
            write!(f, "ord:{o:?}")?;
        }
        Ok(())
    }
}

const CLOSED_SET_CAP: usize = 5_000;
/// Signature granularity of the closed-set abstraction. Fixed, so the
/// certificate does not depend on the representative budget of the sweep.
pub const CLOSED_SET_BUDGET: u64 = 4;

fn counts_agree(wl: &WordExpr, pl: &[Step], wr: &WordExpr, pr: &[Step]) -> bool {
    count_before(wl, pl) == count_before(wr, pr) && count_after(wl, pl) == count_after(wr, pr)
}

fn closed_key(solver: &Solver, l: &SideState, r: &SideState) -> ClosedKey {
    let (wl, wr) = (solver.word(l), solver.word(r));
    let vars = l
        .val
        .iter()
        .map(|(x, pl)| {
            let pr = &r.val[x];
            (
                *x,
                signature_unchecked(&pl.0, solver.budget),
                signature_unchecked(&pr.0, solver.budget),
                counts_agree(wl, &pl.0, wr, &pr.0),
            )
        })
        .collect();
    let order = match (l.val.get(&Var::X), l.val.get(&Var::Y)) {
        (Some(a), Some(b)) => Some(ord_unchecked(&a.0, &b.0)),
        _ => None,
    };
    ClosedKey { vars, order }
}

/// Greatest set of reachable abstract configurations in which Duplicator
/// can answer every representative quest without leaving the set.
fn closed_set(c: &GameConfig, budget: u64) -> Option<Vec<String>> {
    let mut solver = solver_for(c, budget);
    solver.family = Family::Fo2;
    let (l0, r0) = states(c);
    if solver.immediate(&l0, &r0).is_some() {
        return None;
    }
    let k0 = closed_key(&solver, &l0, &r0);
    let mut index: HashMap<ClosedKey, usize> = HashMap::new();
    // per state: for each Spoiler option, the successor states of its viable responses
    let mut edges: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut queue = vec![(l0, r0)];
    index.insert(k0, 0);
    let mut keys = vec![];
    let mut head = 0;
    while head < queue.len() {
        if queue.len() > CLOSED_SET_CAP {
            return None;
        }
        let (l, r) = queue[head].clone();
        keys.push(closed_key(&solver, &l, &r).to_string());
        head += 1;
        let mut options = Vec::new();
        for (side, x, q) in solver.spoiler_options(&l, &r, Mode::Fine) {
            let mut succ = Vec::new();
            for (_, nl, nr) in solver.viable_children(&l, &r, side, x, &q) {
                // differing finite counts lose: Spoiler counts towards the end
                if solver.immediate(&nl, &nr).is_some()
                    || !counts_agree(solver.word(&nl), &nl.val[&x].0, solver.word(&nr), &nr.val[&x].0)
                {
                    continue;
                }
                let k = closed_key(&solver, &nl, &nr);
                let id = match index.get(&k) {
                    Some(&id) => id,
                    None => {
                        let id = queue.len();
                        index.insert(k, id);
                        queue.push((nl, nr));
                        id
                    }
                };
                succ.push(id);
            }
            options.push(succ);
        }
        edges.push(options);
    }
    let mut alive = vec![true; queue.len()];
    loop {
        let mut changed = false;
        for s in 0..queue.len() {
            if alive[s] && edges[s].iter().any(|succ| !succ.iter().any(|&t| alive[t])) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if !alive[0] {
        return None;
    }
    Some(keys.into_iter().zip(alive).filter(|(_, a)| *a).map(|(k, _)| k).collect())
}

/// Decides an unbounded game as far as certificates allow: a region
/// certificate for Spoiler, a copy or closed-set certificate for
/// Duplicator, otherwise a depth sweep up to `max_depth`.
pub fn decide_unbounded(c: &GameConfig, max_depth: u32, budget: u64) -> Result<UnboundedVerdict, EngineError> {
    if c.fragment.depth != Depth::Unbounded {
        return Err(EngineError::InvalidConfig("decide_unbounded needs an unbounded fragment".into()));
    }
    c.validate()?;
    if let Some(atom) = spoiler_wins_now(c) {
        return Ok(UnboundedVerdict::SpoilerCertified(SpoilerCertificate::BoundedDepth {
            depth: 0,
            trace: vec![],
            witness: Some(atom),
        }));
    }
    if let Some(cert) = spoiler_region_certificate(c) {
        return Ok(UnboundedVerdict::SpoilerCertified(SpoilerCertificate::Region(cert)));
    }
    if c.left == c.right {
        return Ok(UnboundedVerdict::DuplicatorCertified(DuplicatorCertificate::Identity));
    }
    if c.fragment.family == Family::Fo2 {
        if let Some(states) = closed_set(c, CLOSED_SET_BUDGET) {
            return Ok(UnboundedVerdict::DuplicatorCertified(DuplicatorCertificate::ClosedSet {
                budget: CLOSED_SET_BUDGET,
                states,
            }));
        }
    }
    for n in 0..=max_depth {
        let bounded = GameConfig { fragment: c.fragment.with_depth(n), ..c.clone() };
        let v = decide_bounded(&bounded, default_budget(n).max(budget))?;
        if v.winner == Player::Spoiler {
            return Ok(UnboundedVerdict::SpoilerCertified(SpoilerCertificate::BoundedDepth {
                depth: n,
                trace: v.trace,
                witness: v.witness,
            }));
        }
    }
    Ok(UnboundedVerdict::DuplicatorUpToDepth(max_depth))
}

// ---------------------------------------------------------------------------
// the n-border strategy on σ-powers

fn split_power(p: &Position) -> Option<(IndexValue, Position)> {
    match p.0.split_first() {
        Some((Step::At(t), rest)) => Some((t.clone(), Position(rest.to_vec()))),
        _ => None,
    }
}

fn other_var(x: Var) -> Var {
    if x == Var::X {
        Var::Y
    } else {
        Var::X
    }
}

/// Duplicator's answer on `u = v^σ` for the FO² game of depth `n` between
/// `⟨u, α⟩` and `⟨u, β⟩`, following the n-border strategy: the inner
/// coordinate comes from a winning answer on `v`, the outer index is copied
/// near the borders and otherwise placed next to the other variable's index.
pub fn duplicator_power_response(
    u: &WordExpr,
    alpha: &Valuation,
    beta: &Valuation,
    n: u32,
    q: Quantifier,
    x: Var,
    quest: &Position,
) -> Result<Position, EngineError> {
    let pre = |m: &str| EngineError::Precondition(m.to_string());
    let WordExpr::Pow(Tau::Sigma, v) = u else {
        return Err(pre("the word must be a σ-power"));
    };
    if v.is_empty() {
        return Err(pre("the base word must be non-empty"));
    }
    if n == 0 {
        return Err(pre("no round is left at depth 0"));
    }
    if alpha.keys().ne(beta.keys()) || alpha.keys().any(|y| y.0 > 1) || x.0 > 1 {
        return Err(pre("valuations must share a domain within {x, y}"));
    }
    let split = |val: &Valuation| -> Result<BTreeMap<Var, (IndexValue, Position)>, EngineError> {
        val.iter()
            .map(|(y, p)| {
                genword::validate(u, p)?;
                Ok((*y, split_power(p).ok_or_else(|| pre("position outside the power"))?))
            })
            .collect()
    };
    let (a, b) = (split(alpha)?, split(beta)?);
    let inner = |m: &BTreeMap<Var, (IndexValue, Position)>| -> Valuation {
        m.iter().map(|(y, (_, s))| (*y, s.clone())).collect()
    };
    // condition 1
    let inner_cfg = GameConfig::new(
        FragmentDesc::fo2(n),
        Valuated::new(Arc::new((**v).clone()), inner(&a)),
        Valuated::new(Arc::new((**v).clone()), inner(&b)),
    );
    if decide_bounded(&inner_cfg, default_budget(n))?.winner != Player::Duplicator {
        return Err(pre("condition 1 fails: the inner valuations are not equivalent"));
    }
    // condition 2
    for y in a.keys() {
        let (pa, pb) = (&a[y].0, &b[y].0);
        if (index_in_border(pa, n as u64) || index_in_border(pb, n as u64)) && pa != pb {
            return Err(pre("condition 2 fails: a border index differs"));
        }
    }
    // condition 3
    if a.len() == 2 && index_cmp(&a[&Var::X].0, &a[&Var::Y].0) != index_cmp(&b[&Var::X].0, &b[&Var::Y].0) {
        return Err(pre("condition 3 fails: the index order differs"));
    }

    let quest_on_alpha = q.quest_on_left();
    let (src, dst) = if quest_on_alpha { (&a, &b) } else { (&b, &a) };
    genword::validate(u, quest)?;
    let (p, s) = split_power(quest).ok_or_else(|| pre("quest outside the power"))?;
    let y = other_var(x);
    if !src.contains_key(&y) {
        return Ok(quest.clone());
    }
    let inner_game = GameConfig::new(
        FragmentDesc::fo2(n),
        Valuated::new(Arc::new((**v).clone()), inner(src)),
        Valuated::new(Arc::new((**v).clone()), inner(dst)),
    );
    let s_answer = best_response(&inner_game, Quantifier::Exists, x, &s, default_budget(n))?
        .ok_or_else(|| pre("no inner answer exists"))?;
    let (py_src, py_dst) = (&src[&y].0, &dst[&y].0);
    let r = if index_in_border(py_dst, n as u64) || index_in_border(&p, n as u64 - 1) {
        p
    } else {
        let r = match index_cmp(&p, py_src) {
            Ordering::Less => index_pred(Tau::Sigma, py_dst),
            Ordering::Equal => Some(py_dst.clone()),
            Ordering::Greater => index_succ(Tau::Sigma, py_dst),
        };
        r.ok_or_else(|| pre("no neighbouring index"))?
    };
    let mut path = vec![Step::At(r)];
    path.extend(s_answer.0);
    Ok(Position(path))
}

/// Whether `(α, β, n)` satisfies the three conditions of the n-border
/// strategy on `u = v^σ`.
pub fn power_conditions_hold(u: &WordExpr, alpha: &Valuation, beta: &Valuation, n: u32) -> bool {
    let WordExpr::Pow(Tau::Sigma, v) = u else { return false };
    let parts = |val: &Valuation| -> Option<BTreeMap<Var, (IndexValue, Position)>> {
        val.iter().map(|(y, p)| Some((*y, split_power(p)?))).collect()
    };
    let (Some(a), Some(b)) = (parts(alpha), parts(beta)) else { return false };
    if a.keys().ne(b.keys()) {
        return false;
    }
    let inner = |m: &BTreeMap<Var, (IndexValue, Position)>| -> Valuation {
        m.iter().map(|(y, (_, s))| (*y, s.clone())).collect()
    };
    let cfg = GameConfig::new(
        FragmentDesc::fo2(n),
        Valuated::new(Arc::new((**v).clone()), inner(&a)),
        Valuated::new(Arc::new((**v).clone()), inner(&b)),
    );
    let cond1 = decide_bounded(&cfg, default_budget(n)).map(|v| v.winner == Player::Duplicator).unwrap_or(false);
    let cond2 = a.keys().all(|y| {
        let (pa, pb) = (&a[y].0, &b[y].0);
        !(index_in_border(pa, n as u64) || index_in_border(pb, n as u64)) || pa == pb
    });
    let cond3 = a.len() < 2 || index_cmp(&a[&Var::X].0, &a[&Var::Y].0) == index_cmp(&b[&Var::X].0, &b[&Var::Y].0);
    cond1 && cond2 && cond3
}

/// Index of a position in the outer σ-power, for callers checking the
/// border rules.
pub fn outer_index(p: &Position) -> Option<IndexValue> {
    split_power(p).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genword::parse_word;

    fn w(s: &str) -> WordExpr {
        parse_word(s, Tau::Sigma).unwrap()
    }

    fn pos(s: &str) -> Position {
        s.parse().unwrap()
    }

    fn winner(f: FragmentDesc, u: &str, v: &str) -> Player {
        let c = GameConfig::sentences(f, w(u), w(v));
        let n = match f.depth {
            Depth::Bounded(n) => n,
            Depth::Unbounded => unreachable!(),
        };
        decide_bounded(&c, default_budget(n)).unwrap().winner
    }

    #[test]
    fn finite_examples() {
        assert_eq!(winner(FragmentDesc::fo(2), "aa", "aaa"), Player::Spoiler);
        assert_eq!(winner(FragmentDesc::fo(1), "aa", "aaa"), Player::Duplicator);
        assert_eq!(winner(FragmentDesc::fo(0), "a", "b"), Player::Duplicator);
        assert_eq!(winner(FragmentDesc::fo(1), "a", "b"), Player::Spoiler);
        assert_eq!(winner(FragmentDesc::fo2(2), "ab", "ba"), Player::Spoiler);
        assert_eq!(winner(FragmentDesc::fo(1), "", "a"), Player::Spoiler);
        assert_eq!(winner(FragmentDesc::fo(3), "", ""), Player::Duplicator);
    }

    #[test]
    fn zeta_fixture() {
        for n in 0..=3 {
            assert_eq!(winner(FragmentDesc::fo(n), "a^z", "a^z a^z"), Player::Duplicator, "n={n}");
        }
    }

    #[test]
    fn sigma_fixture() {
        for n in 0..=3 {
            assert_eq!(winner(FragmentDesc::fo(n), "a^s", "a^s a^s"), Player::Duplicator, "n={n}");
            assert_eq!(winner(FragmentDesc::fo2(n), "a^o a^o*", "a^s"), Player::Duplicator, "n={n}");
        }
    }

    #[test]
    fn spoiler_separates_infinite_words() {
        assert_eq!(winner(FragmentDesc::fo(1), "a^s", "b^s"), Player::Spoiler);
        assert_eq!(winner(FragmentDesc::fo2(2), "a^s b", "b a^s"), Player::Spoiler);
        // a last position exists on one side only
        assert_eq!(winner(FragmentDesc::fo(2), "a^s", "a^o"), Player::Spoiler);
    }

    #[test]
    fn quest_examples() {
        let c = GameConfig::sentences(FragmentDesc::fo2(1), w("a^s"), w("a^s"));
        let got: Vec<String> = representative_quests(&c, Side::Left, 2).iter().map(|p| p.to_string()).collect();
        assert_eq!(got, ["P[w:0]/@0", "P[w:1]/@0", "P[z:0]/@0", "P[w*:-1]/@0", "P[w*:0]/@0"]);
        let c = GameConfig::sentences(FragmentDesc::fo2(1), w("ab"), w("a"));
        assert_eq!(representative_quests(&c, Side::Left, 2), vec![pos("@0"), pos("@1")]);
    }

    #[test]
    fn quest_sets_grow_with_budget() {
        let c = GameConfig::sentences(FragmentDesc::fo(2), w("(ab)^s a^s"), w("a"));
        for b in 1..6 {
            let small: BTreeSet<Position> = representative_quests(&c, Side::Left, b).into_iter().collect();
            let big: BTreeSet<Position> = representative_quests(&c, Side::Left, b + 1).into_iter().collect();
            assert!(small.is_subset(&big), "b={b}");
        }
    }

    #[test]
    fn table_one_rows() {
        let c = GameConfig::sentences(FragmentDesc::fo(2), w("ab"), w("ba"));
        let m = |q| Move { quantifier: q, var: Var::X, quest: pos("@0"), response: pos("@1") };
        let s = step(&c, &m(Quantifier::Exists)).unwrap();
        assert_eq!(s.fragment, FragmentDesc::fo(1));
        assert_eq!(*s.left.word, w("ab"));
        assert_eq!(s.left.val[&Var::X], pos("@0"));
        assert_eq!(s.right.val[&Var::X], pos("@1"));
        let s = step(&c, &m(Quantifier::NotExists)).unwrap();
        // quest in v, sides swapped
        assert_eq!(*s.left.word, w("ba"));
        assert_eq!(s.left.val[&Var::X], pos("@0"));
        assert_eq!(*s.right.word, w("ab"));
        assert_eq!(s.right.val[&Var::X], pos("@1"));
        let twice = step(&s, &Move { var: Var::Y, ..m(Quantifier::NotExists) }).unwrap();
        assert_eq!(*twice.left.word, w("ab"));
        assert_eq!(twice.left.val.len(), 2);
        let z = step(&c, &Move { var: Var::Z, ..m(Quantifier::Forall) }).unwrap();
        assert_eq!(z.left.val.keys().copied().collect::<Vec<_>>(), vec![Var::Z]);
        let empty = step(&c, &m(Quantifier::Exists))
            .and_then(|s| step(&s, &Move { var: Var::Y, ..m(Quantifier::Exists) }))
            .unwrap();
        assert!(matches!(step(&empty, &m(Quantifier::Exists)), Err(EngineError::EmptyReduct { .. })));
        assert!(matches!(
            step(&c, &Move { quest: pos("@5"), ..m(Quantifier::Exists) }),
            Err(EngineError::WrongSide { what: "quest", .. })
        ));
    }

    #[test]
    fn immediate_wins() {
        let c = GameConfig::sentences(FragmentDesc::fo(0), w("a"), w("b"));
        assert_eq!(spoiler_wins_now(&c), None);
        let c = GameConfig::new(
            FragmentDesc::fo(0),
            Valuated::new(Arc::new(w("a")), [(Var::X, pos("@0"))].into()),
            Valuated::new(Arc::new(w("b")), [(Var::X, pos("@0"))].into()),
        );
        assert_eq!(spoiler_wins_now(&c), Some(Atom::Label(Var::X, 'a')));
    }

    #[test]
    fn unbounded_fixtures() {
        let unb = FragmentDesc::new(Family::Fo2, Depth::Unbounded);
        let a = GameConfig::sentences(unb, w("a^s"), w("a^s a^s"));
        let v = decide_unbounded(&a, 3, 2).unwrap();
        assert!(matches!(v, UnboundedVerdict::DuplicatorCertified(DuplicatorCertificate::ClosedSet { .. })), "{v:?}");
        let b = GameConfig::sentences(unb, w("a^o a^o*"), w("a^s"));
        let v = decide_unbounded(&b, 3, 2).unwrap();
        let UnboundedVerdict::SpoilerCertified(SpoilerCertificate::Region(cert)) = v else { panic!("{v:?}") };
        assert_eq!(cert.class, RegionClass { letter: 'a', finite_before: false, finite_after: false });
        assert_eq!(cert.present_in, Side::Right);
        let same = GameConfig::sentences(unb, w("(ab)^s b"), w("(ab)^s b"));
        assert_eq!(
            decide_unbounded(&same, 2, 2).unwrap(),
            UnboundedVerdict::DuplicatorCertified(DuplicatorCertificate::Identity)
        );
    }

    #[test]
    fn region_certificate_examples() {
        let unb = FragmentDesc::new(Family::Fo2, Depth::Unbounded);
        assert!(spoiler_region_certificate(&GameConfig::sentences(unb, w("a^s"), w("a^s a^s"))).is_none());
        assert!(spoiler_region_certificate(&GameConfig::sentences(unb, w("ab^s"), w("ab^s"))).is_none());
    }

    #[test]
    fn power_response_copies_border_quests() {
        let u = w("(ab)^s");
        let alpha: Valuation = [(Var::X, pos("P[z:3]/@0"))].into();
        // in the (n-1)-border the quest index is copied
        let r =
            duplicator_power_response(&u, &alpha, &alpha, 2, Quantifier::Exists, Var::Y, &pos("P[w:0]/@1")).unwrap();
        assert_eq!(r, pos("P[w:0]/@1"));
        // in the n-border only, the index is placed next to the other variable
        let r =
            duplicator_power_response(&u, &alpha, &alpha, 2, Quantifier::Exists, Var::Y, &pos("P[w:1]/@1")).unwrap();
        assert_eq!(r, pos("P[z:2]/@1"));
        // without a second variable the quest is copied
        let r =
            duplicator_power_response(&u, &alpha, &alpha, 2, Quantifier::Forall, Var::X, &pos("P[w:1]/@1")).unwrap();
        assert_eq!(r, pos("P[w:1]/@1"));
    }

    #[test]
    fn power_response_steps_next_to_the_other_variable() {
        let u = w("a^s");
        let alpha: Valuation = [(Var::Y, pos("P[z:0]/@0"))].into();
        let beta: Valuation = [(Var::Y, pos("P[z:40]/@0"))].into();
        let r = duplicator_power_response(&u, &alpha, &beta, 2, Quantifier::Exists, Var::X, &pos("P[z:7]/@0")).unwrap();
        assert_eq!(r, pos("P[z:41]/@0"));
        let r = duplicator_power_response(&u, &alpha, &beta, 2, Quantifier::Exists, Var::X, &pos("P[z:0]/@0")).unwrap();
        assert_eq!(r, pos("P[z:40]/@0"));
        // a quest in the 1-border is copied
        let r =
            duplicator_power_response(&u, &alpha, &beta, 2, Quantifier::Exists, Var::X, &pos("P[w*:0]/@0")).unwrap();
        assert_eq!(r, pos("P[w*:0]/@0"));
        // the border condition fails when only one side sits in the border
        let gamma: Valuation = [(Var::Y, pos("P[w:0]/@0"))].into();
        assert!(matches!(
            duplicator_power_response(&u, &alpha, &gamma, 2, Quantifier::Exists, Var::X, &pos("P[z:0]/@0")),
            Err(EngineError::Precondition(_))
        ));
    }

    #[test]
    fn best_response_in_finite_words() {
        let c = GameConfig::sentences(FragmentDesc::fo(2), w("aab"), w("ab"));
        let r = best_response(&c, Quantifier::Exists, Var::X, &pos("@2"), 4).unwrap();
        assert_eq!(r, Some(pos("@1")));
    }

    mod properties {
        use super::*;
        use crate::oracle::decide_finite_exact;
        use proptest::prelude::*;
        use proptest::strategy::Strategy;

        fn finite_word() -> impl Strategy<Value = String> {
            proptest::collection::vec(prop_oneof![Just('a'), Just('b')], 0..=5).prop_map(|v| v.into_iter().collect())
        }

        fn sigma_word() -> impl Strategy<Value = WordExpr> {
            let leaf = prop_oneof![Just(WordExpr::lit("a")), Just(WordExpr::lit("b"))];
            leaf.prop_recursive(2, 4, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(l, r)| WordExpr::cat(l, r)),
                    inner.prop_map(|i| WordExpr::pow(Tau::Sigma, i)),
                ]
            })
        }

        fn family() -> impl Strategy<Value = Family> {
            prop_oneof![Just(Family::Fo), Just(Family::Fo2)]
        }

        fn decide(f: FragmentDesc, u: &WordExpr, v: &WordExpr) -> Player {
            let n = match f.depth {
                Depth::Bounded(n) => n,
                Depth::Unbounded => unreachable!(),
            };
            decide_bounded(&GameConfig::sentences(f, u.clone(), v.clone()), default_budget(n)).unwrap().winner
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn finite_games_match_exhaustive_search(u in finite_word(), v in finite_word(), fam in family(), n in 0u32..=3) {
                let c = GameConfig::sentences(FragmentDesc::new(fam, Depth::Bounded(n)), w(&u), w(&v));
                let exact = decide_finite_exact(&c).unwrap();
                prop_assert_eq!(decide_bounded(&c, default_budget(n)).unwrap().winner, exact);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn a_word_is_equivalent_to_itself(u in sigma_word(), fam in family(), n in 0u32..=2) {
                let copy = w(&u.to_string());
                prop_assert_eq!(decide(FragmentDesc::new(fam, Depth::Bounded(n)), &u, &copy), Player::Duplicator);
            }

            #[test]
            fn spoiler_wins_persist_with_more_rounds(u in sigma_word(), v in sigma_word(), fam in family()) {
                let mut spoiler = false;
                for n in 0..=2 {
                    let now = decide(FragmentDesc::new(fam, Depth::Bounded(n)), &u, &v) == Player::Spoiler;
                    prop_assert!(!spoiler || now, "{} vs {}: Spoiler lost at depth {}", u, v, n);
                    spoiler = now;
                }
            }

            #[test]
            fn verdicts_are_symmetric(u in sigma_word(), v in sigma_word(), fam in family(), n in 0u32..=2) {
                let f = FragmentDesc::new(fam, Depth::Bounded(n));
                prop_assert_eq!(decide(f, &u, &v), decide(f, &v, &u));
            }

            #[test]
            fn concatenating_equivalent_pairs_keeps_equivalence(
                u1 in sigma_word(), u2 in sigma_word(), v1 in sigma_word(), v2 in sigma_word(), n in 0u32..=2
            ) {
                let f = FragmentDesc::fo2(n);
                prop_assume!(decide(f, &u1, &v1) == Player::Duplicator && decide(f, &u2, &v2) == Player::Duplicator);
                let (u, v) = (WordExpr::cat(u1, u2), WordExpr::cat(v1, v2));
                prop_assert_eq!(decide(f, &u, &v), Player::Duplicator);
            }

            #[test]
            fn certificates_agree_with_bounded_games(u in sigma_word(), v in sigma_word()) {
                let c = GameConfig::sentences(FragmentDesc::new(Family::Fo2, Depth::Unbounded), u.clone(), v.clone());
                match decide_unbounded(&c, 2, default_budget(2)).unwrap() {
                    UnboundedVerdict::DuplicatorCertified(_) => {
                        for n in 0..=2 {
                            prop_assert_eq!(decide(FragmentDesc::fo2(n), &u, &v), Player::Duplicator);
                        }
                    }
                    UnboundedVerdict::SpoilerCertified(SpoilerCertificate::BoundedDepth { depth, .. }) => {
                        prop_assert_eq!(decide(FragmentDesc::fo2(depth), &u, &v), Player::Spoiler);
                    }
                    UnboundedVerdict::SpoilerCertified(SpoilerCertificate::Region(cert)) => {
                        let classes = match cert.present_in {
                            Side::Left => &cert.left_classes,
                            Side::Right => &cert.right_classes,
                        };
                        prop_assert!(classes.contains(&cert.class));
                    }
                    UnboundedVerdict::DuplicatorUpToDepth(d) => {
                        prop_assert_eq!(decide(FragmentDesc::fo2(d), &u, &v), Player::Duplicator);
                    }
                }
            }
        }
    }
}
