//! Interactive game sessions: the human plays one role, the engine the other.

use std::io::{self, BufRead, Write};

use efpi::engine::{
    best_response, representative_quests, spoiler_strategy, spoiler_wins_now, step, GameConfig, Move, Player, Side,
    Strategy,
};
use efpi::fragments::{Depth, Family, Formula, Quantifier, Var};
use efpi::genword::{self, Position};

pub const POSITION_GRAMMAR: &str = "\
positions are paths of steps separated by '/':
  L, R          left or right factor of a concatenation
  P[w:i]        i-th copy in the ω part of a power (i >= 0)
  P[z:i]        copy i of the ζ part (any integer)
  P[w*:-j]      j-th copy from the end in the ω* part (w*:0 is the last)
  P[zn(a/b):i]  element i of the ζ copy at rational a/b in a dense power
  P[fin:i]      i-th copy of a finite power
  @k            k-th letter of a literal
example: L/P[w:0]/@0";

const MOVE_GRAMMAR: &str =
    "moves are '<quantifier> <variable> <position>', quantifier one of E, A, !E, !A; e.g. E x P[w:0]/@0";

fn rounds_left(c: &GameConfig) -> u32 {
    match c.fragment.depth {
        Depth::Bounded(n) => n,
        Depth::Unbounded => u32::MAX,
    }
}

fn describe(c: &GameConfig) -> String {
    let side = |s: &efpi::engine::Valuated| {
        let val: Vec<String> = s.val.iter().map(|(x, p)| format!("{x}={p}")).collect();
        format!("{} {{{}}}", s.word, val.join(", "))
    };
    format!("left:  {}\nright: {}", side(&c.left), side(&c.right))
}

fn parse_quantifier(s: &str) -> Option<Quantifier> {
    Some(match s {
        "E" | "exists" => Quantifier::Exists,
        "A" | "forall" => Quantifier::Forall,
        "!E" | "not_exists" => Quantifier::NotExists,
        "!A" | "not_forall" => Quantifier::NotForall,
        _ => return None,
    })
}

fn list_positions(c: &GameConfig, side: Side, budget: u64) -> String {
    let reps = representative_quests(c, side, budget);
    reps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("  ")
}

/// A winning response if there is one, else the first representative.
fn engine_answer(c: &GameConfig, q: Quantifier, x: Var, quest: &Position, budget: u64) -> Option<Position> {
    if let Ok(Some(p)) = best_response(c, q, x, quest, budget) {
        return Some(p);
    }
    let answer_side = if q.quest_on_left() { Side::Right } else { Side::Left };
    representative_quests(c, answer_side, budget).into_iter().next()
}

pub struct Session<'a, R: BufRead, W: Write> {
    pub input: R,
    pub output: &'a mut W,
    pub budget: u64,
}

enum Read<T> {
    Value(T),
    Quit,
}

impl<R: BufRead, W: Write> Session<'_, R, W> {
    fn prompt(&mut self, text: &str) -> io::Result<Option<String>> {
        write!(self.output, "{text}> ")?;
        self.output.flush()?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim().to_string()))
    }

    fn read_move(&mut self, c: &GameConfig) -> io::Result<Read<Move>> {
        loop {
            let Some(line) = self.prompt("move")? else { return Ok(Read::Quit) };
            match line.as_str() {
                "quit" | "q" => return Ok(Read::Quit),
                "help" | "?" => {
                    writeln!(self.output, "{MOVE_GRAMMAR}\n{POSITION_GRAMMAR}")?;
                    continue;
                }
                _ => {}
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [q, x, p] = parts.as_slice() else {
                writeln!(self.output, "{MOVE_GRAMMAR}")?;
                continue;
            };
            let Some(q) = parse_quantifier(q) else {
                writeln!(self.output, "unknown quantifier '{q}'; {MOVE_GRAMMAR}")?;
                continue;
            };
            let Ok(x) = x.parse::<Var>() else {
                writeln!(self.output, "unknown variable '{x}'")?;
                continue;
            };
            if c.fragment.reduct(q, x).is_none() {
                writeln!(self.output, "{q}{x} is not available in {}", c.fragment)?;
                continue;
            }
            let side = if q.quest_on_left() { &c.left } else { &c.right };
            let quest = match p.parse::<Position>() {
                Ok(p) => p,
                Err(e) => {
                    writeln!(self.output, "{e}\n{POSITION_GRAMMAR}")?;
                    continue;
                }
            };
            if let Err(e) = genword::validate(&side.word, &quest) {
                writeln!(self.output, "{e}\n{POSITION_GRAMMAR}")?;
                continue;
            }
            return Ok(Read::Value(Move { quantifier: q, var: x, quest, response: Position(vec![]) }));
        }
    }

    fn read_position(&mut self, c: &GameConfig, side: Side) -> io::Result<Read<Position>> {
        let word = &c.side(side).word;
        loop {
            let Some(line) = self.prompt("response")? else { return Ok(Read::Quit) };
            match line.as_str() {
                "quit" | "q" => return Ok(Read::Quit),
                "help" | "?" => {
                    writeln!(self.output, "{POSITION_GRAMMAR}")?;
                    continue;
                }
                _ => {}
            }
            match line.parse::<Position>().map_err(|e| e.to_string()).and_then(|p| {
                genword::validate(word, &p).map_err(|e| e.to_string())?;
                Ok(p)
            }) {
                Ok(p) => return Ok(Read::Value(p)),
                Err(e) => writeln!(self.output, "{e}\n{POSITION_GRAMMAR}")?,
            }
        }
    }

    fn finished(&mut self, c: &GameConfig) -> io::Result<Option<Player>> {
        if let Some(atom) = spoiler_wins_now(c) {
            writeln!(self.output, "{} holds on the left only: Spoiler wins", Formula::atom(atom))?;
            return Ok(Some(Player::Spoiler));
        }
        if rounds_left(c) == 0 {
            writeln!(self.output, "no rounds left: Duplicator wins")?;
            return Ok(Some(Player::Duplicator));
        }
        Ok(None)
    }

    fn announce(&mut self, m: &Move) -> io::Result<()> {
        if m.quantifier.swaps() {
            writeln!(self.output, "{} swaps the words", m.quantifier)?;
        }
        Ok(())
    }

    /// The human chooses quests, the engine answers.
    pub fn as_spoiler(&mut self, mut c: GameConfig) -> io::Result<Option<Player>> {
        writeln!(self.output, "you are Spoiler; type 'help' for the move grammar")?;
        loop {
            writeln!(self.output, "{}", describe(&c))?;
            if let Some(p) = self.finished(&c)? {
                return Ok(Some(p));
            }
            writeln!(self.output, "{} rounds left", rounds_left(&c))?;
            writeln!(self.output, "left positions:  {}", list_positions(&c, Side::Left, self.budget))?;
            writeln!(self.output, "right positions: {}", list_positions(&c, Side::Right, self.budget))?;
            let mut m = match self.read_move(&c)? {
                Read::Value(m) => m,
                Read::Quit => return Ok(None),
            };
            let Some(answer) = engine_answer(&c, m.quantifier, m.var, &m.quest, self.budget) else {
                writeln!(self.output, "Duplicator has no position to answer with: Spoiler wins")?;
                return Ok(Some(Player::Spoiler));
            };
            writeln!(self.output, "Duplicator answers {answer}")?;
            m.response = answer;
            self.announce(&m)?;
            c = step(&c, &m).expect("validated move");
        }
    }

    fn engine_quest(&self, c: &GameConfig) -> Option<(Quantifier, Var, Position)> {
        if let Ok(Some(Strategy::Move { quest_side, var, quest, .. })) = spoiler_strategy(c, self.budget) {
            let q = if quest_side == Side::Left { Quantifier::Exists } else { Quantifier::Forall };
            return Some((q, var, quest));
        }
        let var = match c.fragment.family {
            Family::Fo2 => Var::X,
            Family::Fo => (0u8..).map(Var).find(|x| !c.left.val.contains_key(x)).unwrap(),
        };
        for (side, q) in [(Side::Left, Quantifier::Exists), (Side::Right, Quantifier::Forall)] {
            if let Some(p) = representative_quests(c, side, self.budget).into_iter().next() {
                return Some((q, var, p));
            }
        }
        None
    }

    /// The engine chooses quests, the human answers.
    pub fn as_duplicator(&mut self, mut c: GameConfig) -> io::Result<Option<Player>> {
        writeln!(self.output, "you are Duplicator; answer each quest with a position, 'help' shows the grammar")?;
        loop {
            writeln!(self.output, "{}", describe(&c))?;
            if let Some(p) = self.finished(&c)? {
                return Ok(Some(p));
            }
            writeln!(self.output, "{} rounds left", rounds_left(&c))?;
            let Some((q, var, quest)) = self.engine_quest(&c) else {
                writeln!(self.output, "Spoiler has no quest: Duplicator wins")?;
                return Ok(Some(Player::Duplicator));
            };
            let answer_side = if q.quest_on_left() { Side::Right } else { Side::Left };
            let side_name = if answer_side == Side::Left { "left" } else { "right" };
            writeln!(self.output, "Spoiler plays {q}{var} at {quest}; answer in the {side_name} word")?;
            let hints = list_positions(&c, answer_side, self.budget);
            if hints.is_empty() {
                writeln!(self.output, "no position to answer with: Spoiler wins")?;
                return Ok(Some(Player::Spoiler));
            }
            writeln!(self.output, "candidates: {hints}")?;
            let response = match self.read_position(&c, answer_side)? {
                Read::Value(p) => p,
                Read::Quit => return Ok(None),
            };
            let m = Move { quantifier: q, var, quest, response };
            self.announce(&m)?;
            c = step(&c, &m).expect("validated move");
        }
    }
}
