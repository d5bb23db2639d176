//! Identities `s = t` between π-terms: both games on the substituted words
//! must be Duplicator wins. Spoiler wins yield distinguishing sentences.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    self, decide_bounded, decide_unbounded, spoiler_strategy, GameConfig, Player, Side, SpoilerCertificate, Strategy,
    TraceStep, UnboundedVerdict, Valuated,
};
use crate::fragments::{eval_formula, in_fragment, qd, Depth, Family, Formula, FormulaError, FragmentDesc, Valuation};
use crate::genword::{approx_expr, eval_term, GenWordError, Tau, WordExpr};
use crate::pi_term::{parse_term, render_term, ParseError, PiTerm};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("identity must contain exactly one '='")]
    NotAnIdentity,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Word(#[from] GenWordError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("tau must be σ or a positive finite exponent, got {0}")]
    UnsupportedTau(Tau),
    #[error("Spoiler does not win this game")]
    NotSpoilerWinning,
}

/// Which game a verdict belongs to: `Forward` plays on `(⟦s⟧, ⟦t⟧)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthVerdict {
    pub depth: u32,
    pub forward: Player,
    pub backward: Player,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum IdentityStatus {
    HoldsCertified,
    HoldsUpToDepth {
        depth: u32,
    },
    FailsAtDepth {
        depth: u32,
        direction: Direction,
        trace: Vec<TraceStep>,
        formula: Option<Synthesized>,
    },
    /// no bounded failure up to the sweep limit, but an unbounded certificate for Spoiler
    FailsCertified {
        direction: Direction,
        certificate: SpoilerCertificate,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub s: String,
    pub t: String,
    pub family: Family,
    pub tau: Tau,
    pub max_depth: u32,
    pub per_depth: Vec<DepthVerdict>,
    pub unbounded: Option<(UnboundedVerdict, UnboundedVerdict)>,
    pub status: IdentityStatus,
}

impl IdentityReport {
    pub fn holds(&self) -> bool {
        matches!(self.status, IdentityStatus::HoldsCertified | IdentityStatus::HoldsUpToDepth { .. })
    }
}

/// Splits `"s = t"` and parses both sides.
pub fn parse_identity(text: &str) -> Result<(PiTerm, PiTerm), IdentityError> {
    let parts: Vec<&str> = text.split('=').collect();
    if parts.len() != 2 {
        return Err(IdentityError::NotAnIdentity);
    }
    let s = parse_term(parts[0]).map_err(IdentityError::Parse)?;
    let t = parse_term(parts[1]).map_err(|e| IdentityError::Parse(shift_offset(e, parts[0].len() + 1)))?;
    Ok((s, t))
}

fn shift_offset(e: ParseError, by: usize) -> ParseError {
    match e {
        ParseError::Syntax { offset, message } => ParseError::Syntax { offset: offset + by, message },
        ParseError::Alphabet { offset, letter } => ParseError::Alphabet { offset: offset + by, letter },
    }
}

/// Checks `s = t` over `family` with π read as `tau`, using `budget(n)`
/// representatives at depth `n`.
pub fn check_identity(
    s: &PiTerm,
    t: &PiTerm,
    family: Family,
    tau: Tau,
    max_depth: u32,
    budget: &dyn Fn(u32) -> u64,
) -> Result<IdentityReport, IdentityError> {
    match tau {
        Tau::Sigma => {}
        Tau::Fin(k) if k >= 1 => {}
        other => return Err(IdentityError::UnsupportedTau(other)),
    }
    let u = Arc::new(eval_term(s, tau)?);
    let v = Arc::new(eval_term(t, tau)?);
    let game = |n: u32, dir: Direction| {
        let (l, r) = match dir {
            Direction::Forward => (u.clone(), v.clone()),
            Direction::Backward => (v.clone(), u.clone()),
        };
        GameConfig::new(FragmentDesc::new(family, Depth::Bounded(n)), Valuated::empty(l), Valuated::empty(r))
    };
    let mut report = IdentityReport {
        s: render_term(s),
        t: render_term(t),
        family,
        tau,
        max_depth,
        per_depth: vec![],
        unbounded: None,
        status: IdentityStatus::HoldsUpToDepth { depth: max_depth },
    };
    for n in 0..=max_depth {
        let b = budget(n);
        let fwd = decide_bounded(&game(n, Direction::Forward), b)?;
        let bwd = decide_bounded(&game(n, Direction::Backward), b)?;
        report.per_depth.push(DepthVerdict { depth: n, forward: fwd.winner, backward: bwd.winner });
        let failed = [(Direction::Forward, fwd), (Direction::Backward, bwd)]
            .into_iter()
            .find(|(_, v)| v.winner == Player::Spoiler);
        if let Some((direction, verdict)) = failed {
            let c = game(n, direction);
            let formula = synthesize_distinguishing_formula(&c.left.word, &c.right.word, &c.fragment, b).ok();
            report.status = IdentityStatus::FailsAtDepth { depth: n, direction, trace: verdict.trace, formula };
            return Ok(report);
        }
    }
    if u == v {
        report.status = IdentityStatus::HoldsCertified;
        return Ok(report);
    }
    if family == Family::Fo2 && tau == Tau::Sigma {
        let b = budget(max_depth);
        let unbounded = |dir| {
            let mut c = game(0, dir);
            c.fragment = FragmentDesc::new(family, Depth::Unbounded);
            decide_unbounded(&c, max_depth, b)
        };
        let (fwd, bwd) = (unbounded(Direction::Forward)?, unbounded(Direction::Backward)?);
        report.status = match (&fwd, &bwd) {
            (UnboundedVerdict::DuplicatorCertified(_), UnboundedVerdict::DuplicatorCertified(_)) => {
                IdentityStatus::HoldsCertified
            }
            (UnboundedVerdict::SpoilerCertified(c), _) => {
                IdentityStatus::FailsCertified { direction: Direction::Forward, certificate: c.clone() }
            }
            (_, UnboundedVerdict::SpoilerCertified(c)) => {
                IdentityStatus::FailsCertified { direction: Direction::Backward, certificate: c.clone() }
            }
            _ => IdentityStatus::HoldsUpToDepth { depth: max_depth },
        };
        report.unbounded = Some((fwd, bwd));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// formula synthesis

/// How far a synthesized sentence was checked with `eval_formula`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verification {
    /// both words finite: `u ⊨ φ` and `v ⊭ φ` evaluated exactly
    Exact,
    /// infinite input: results on finite approximations with parameter `k`,
    /// the claim on the words themselves needs external verification
    Approximations { checked: Vec<(u64, bool)> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synthesized {
    pub formula: String,
    pub depth: u32,
    pub verification: Verification,
    #[serde(skip)]
    pub parsed: Option<Formula>,
}

fn dedup(items: Vec<Formula>) -> Vec<Formula> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|f| seen.insert(f.to_string())).collect()
}

fn connective(items: Vec<Formula>, and: bool) -> Formula {
    let items = dedup(items);
    match items.len() {
        1 => items.into_iter().next().unwrap(),
        _ if and => Formula::And(items),
        _ => Formula::Or(items),
    }
}

/// Reads a sentence off a strategy tree. Each subformula is true on the
/// left configuration and false on the right one of its node.
pub fn strategy_formula(s: &Strategy) -> Formula {
    match s {
        Strategy::Leaf(atom) => Formula::atom(*atom),
        Strategy::Move { quest_side: Side::Left, var, branches, .. } => {
            Formula::exists(*var, connective(branches.iter().map(|(_, b)| strategy_formula(b)).collect(), true))
        }
        Strategy::Move { quest_side: Side::Right, var, branches, .. } => {
            Formula::forall(*var, connective(branches.iter().map(|(_, b)| strategy_formula(b)).collect(), false))
        }
    }
}

const APPROXIMATIONS: [u64; 3] = [4, 8, 16];

/// A sentence of `f` true on `u` and false on `v`, built from Spoiler's
/// strategy tree.
pub fn synthesize_distinguishing_formula(
    u: &WordExpr,
    v: &WordExpr,
    f: &FragmentDesc,
    budget: u64,
) -> Result<Synthesized, IdentityError> {
    let c = GameConfig::sentences(*f, u.clone(), v.clone());
    let strategy = spoiler_strategy(&c, budget)?.ok_or(IdentityError::NotSpoilerWinning)?;
    let phi = strategy_formula(&strategy);
    debug_assert!(in_fragment(f, &phi), "{phi} outside {f}");
    let empty = Valuation::new();
    let verification = if u.is_finite() && v.is_finite() {
        if !eval_formula(u, &empty, &phi)? || eval_formula(v, &empty, &phi)? {
            return Err(IdentityError::NotSpoilerWinning);
        }
        Verification::Exact
    } else {
        let mut checked = vec![];
        for k in APPROXIMATIONS {
            let (au, av) = (approx_expr(u, k), approx_expr(v, k));
            checked.push((k, eval_formula(&au, &empty, &phi)? && !eval_formula(&av, &empty, &phi)?));
        }
        Verification::Approximations { checked }
    };
    Ok(Synthesized { formula: phi.to_string(), depth: qd(&phi), verification, parsed: Some(phi) })
}
