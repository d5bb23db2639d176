mod cache;
mod play;
mod record;

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use efpi::engine::{
    decide_bounded, decide_unbounded, default_budget, GameConfig, Player, SpoilerCertificate, UnboundedVerdict,
};
use efpi::fragments::{Depth, Family, Formula, FragmentDesc};
use efpi::genword::{parse_word, Tau, WordExpr};
use efpi::identity::{check_identity, parse_identity, IdentityStatus};
use efpi::oracle::{crosscheck_sigma, decide_finite_exact, words_up_to, OracleError, SentenceOracle};

use cache::Cache;
use record::{trace_entries, Outcome, RunRecord};

const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;
const EXIT_BUDGET: u8 = 66;

/// Largest depth accepted by `game` and `check-identity`; beyond it the
/// default budget of 2^n + n representatives is out of reach.
const MAX_DEPTH: u32 = 12;
const MAX_ORACLE_LEN: usize = 5;
const MAX_ORACLE_DEPTH: u32 = 3;
const MAX_CROSSCHECK_K: u64 = 64;

#[derive(Parser)]
#[command(name = "efpi", version, about = "Ehrenfeucht-Fraisse games over generalized words and π-term identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the game on two words
    Game(GameArgs),
    /// Check an identity "s = t" of π-terms
    CheckIdentity(IdentityArgs),
    /// Play a game interactively against the engine
    Play(PlayArgs),
    /// Run the exhaustive finite-word oracles
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Fo,
    Fo2,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Fo => Family::Fo,
            FamilyArg::Fo2 => Family::Fo2,
        }
    }
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// verdict cache file, overrides EFPI_CACHE
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct GameArgs {
    left: String,
    right: String,
    #[arg(long, value_enum, default_value = "fo")]
    family: FamilyArg,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, conflicts_with = "depth")]
    unbounded: bool,
    /// depth of the bounded sweep behind an unbounded verdict
    #[arg(long, default_value_t = 4)]
    max_depth: u32,
    /// representatives per region, default 2^depth + depth
    #[arg(long)]
    budget: Option<u64>,
    /// print the principal variation in text output
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct IdentityArgs {
    identity: String,
    #[arg(long, value_enum, default_value = "fo2")]
    family: FamilyArg,
    /// "sigma" or a positive integer exponent
    #[arg(long, default_value = "sigma")]
    tau: String,
    #[arg(long, default_value_t = 4)]
    max_depth: u32,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Spoiler,
    Duplicator,
}

#[derive(Args)]
struct PlayArgs {
    left: String,
    right: String,
    #[arg(long, value_enum, default_value = "fo")]
    family: FamilyArg,
    #[arg(long)]
    depth: u32,
    #[arg(long = "as", value_enum, default_value = "spoiler")]
    role: Role,
}

#[derive(Args)]
struct OracleArgs {
    #[command(subcommand)]
    command: OracleCommand,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyChoice {
    Fo,
    Fo2,
    Both,
}

impl FamilyChoice {
    fn families(self) -> Vec<Family> {
        match self {
            FamilyChoice::Fo => vec![Family::Fo],
            FamilyChoice::Fo2 => vec![Family::Fo2],
            FamilyChoice::Both => vec![Family::Fo, Family::Fo2],
        }
    }
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Engine against exhaustive search on all pairs of short words over {a, b}
    Exactness {
        #[arg(long, value_enum, default_value = "both")]
        family: FamilyChoice,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        #[arg(long, default_value_t = 3)]
        maxlen: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Game verdicts against implication of sentence profiles
    Theorem2 {
        #[arg(long, value_enum, default_value = "fo2")]
        family: FamilyChoice,
        #[arg(long, default_value_t = 1)]
        depth: u32,
        #[arg(long, default_value_t = 3)]
        maxlen: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Engine on σ-words against exhaustive search on finite approximations
    Crosscheck {
        #[arg(long, default_value = "builtin")]
        pairs: String,
        #[arg(long, default_value_t = 8)]
        k: u64,
        #[command(flatten)]
        out: Output,
    },
}

enum CliError {
    Usage(String),
    Input(String),
    Budget(String),
}

impl CliError {
    fn exit(self) -> ExitCode {
        let (code, msg) = match self {
            CliError::Usage(m) => (EXIT_USAGE, m),
            CliError::Input(m) => (EXIT_INPUT, m),
            CliError::Budget(m) => (EXIT_BUDGET, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::Budget(m) => CliError::Budget(m),
        other => CliError::Input(other.to_string()),
    }
}

fn word(text: &str) -> Result<WordExpr, CliError> {
    parse_word(text, Tau::Sigma).map_err(|e| CliError::Input(format!("{text:?}: {e}")))
}

fn check_depth(n: u32) -> Result<(), CliError> {
    if n > MAX_DEPTH {
        return Err(CliError::Budget(format!("depth {n} exceeds the limit of {MAX_DEPTH}")));
    }
    Ok(())
}

/// A computed or cached outcome plus the text rendering of it.
struct Run {
    command: &'static str,
    inputs: Value,
    params: Value,
    outcome: Outcome,
}

fn cached(
    out: &Output,
    command: &'static str,
    inputs: Value,
    params: Value,
    compute: impl FnOnce() -> Result<Outcome, CliError>,
) -> Result<(Run, u64), CliError> {
    let start = Instant::now();
    let path = out.cache.clone().or_else(|| std::env::var_os("EFPI_CACHE").map(PathBuf::from));
    let mut cache = path.map(Cache::open);
    let key = cache::key(command, &inputs, &params);
    let outcome = match cache.as_ref().and_then(|c| c.get(&key)) {
        Some(o) => o.clone(),
        None => {
            let o = compute()?;
            if let Some(c) = cache.as_mut() {
                c.put(&key, &o);
            }
            o
        }
    };
    let ms = start.elapsed().as_millis() as u64;
    Ok((Run { command, inputs, params, outcome }, ms))
}

fn emit(format: Format, run: Run, ms: u64, text: impl FnOnce(&Outcome) -> String) -> ExitCode {
    let code = run.outcome.exit;
    match format {
        Format::Json => {
            let rec = RunRecord::new(run.command, run.inputs, run.params, &run.outcome, ms);
            println!("{}", serde_json::to_string_pretty(&rec).expect("record serializes"));
        }
        Format::Text => print!("{}", text(&run.outcome)),
    }
    ExitCode::from(code as u8)
}

fn trace_text(o: &Outcome) -> String {
    o.trace
        .iter()
        .map(|t| {
            format!("  round {}: {} {} quest {} response {}\n", t.round, t.quantifier, t.variable, t.quest, t.response)
        })
        .collect()
}

fn cmd_game(a: GameArgs) -> Result<ExitCode, CliError> {
    if a.depth.is_none() && !a.unbounded {
        return Err(CliError::Usage("give either --depth N or --unbounded".into()));
    }
    let (u, v) = (word(&a.left)?, word(&a.right)?);
    let family = Family::from(a.family);
    let depth_for_budget = a.depth.unwrap_or(a.max_depth);
    check_depth(depth_for_budget)?;
    let budget = a.budget.unwrap_or_else(|| default_budget(depth_for_budget));
    let inputs = json!([a.left, a.right]);
    let params = json!({
        "family": family.to_string(),
        "depth": a.depth,
        "unbounded": a.unbounded,
        "max_depth": a.max_depth,
        "budget": budget,
    });
    let (run, ms) = cached(&a.out, "game", inputs, params, || {
        let depth = a.depth.map_or(Depth::Unbounded, Depth::Bounded);
        let c = GameConfig::sentences(FragmentDesc::new(family, depth), u, v);
        if a.depth.is_some() {
            let v = decide_bounded(&c, budget).map_err(|e| CliError::Input(e.to_string()))?;
            let exit = if v.winner == Player::Spoiler { 1 } else { 0 };
            Ok(Outcome {
                verdict: json!({
                    "winner": v.winner.to_string(),
                    "certification": v.certification,
                    "witness": v.witness.map(|w| Formula::atom(w).to_string()),
                }),
                trace: trace_entries(&v.trace),
                exit,
            })
        } else {
            let v = decide_unbounded(&c, a.max_depth, budget).map_err(|e| CliError::Input(e.to_string()))?;
            let (winner, exit, trace) = match &v {
                UnboundedVerdict::DuplicatorCertified(_) => ("Duplicator", 0, vec![]),
                UnboundedVerdict::SpoilerCertified(SpoilerCertificate::BoundedDepth { trace, .. }) => {
                    ("Spoiler", 1, trace_entries(trace))
                }
                UnboundedVerdict::SpoilerCertified(_) => ("Spoiler", 1, vec![]),
                UnboundedVerdict::DuplicatorUpToDepth(_) => ("Duplicator", 2, vec![]),
            };
            Ok(Outcome { verdict: json!({ "winner": winner, "status": v.tag(), "certificate": v }), trace, exit })
        }
    })?;
    let show_trace = a.trace;
    Ok(emit(a.out.format, run, ms, |o| {
        let mut s = format!("winner: {}\n", o.verdict["winner"].as_str().unwrap_or("?"));
        if let Some(c) = o.verdict.get("certification") {
            s += &format!("certification: {}\n", certification_text(c));
        }
        if let Some(status) = o.verdict.get("status").and_then(Value::as_str) {
            s += &format!("status: {}\n", unbounded_text(status, &o.verdict["certificate"]));
        }
        if show_trace && !o.trace.is_empty() {
            s += "trace:\n";
            s += &trace_text(o);
        }
        if let Some(w) = o.verdict.get("witness").and_then(Value::as_str) {
            s += &format!("witness: {w}\n");
        }
        s
    }))
}

fn certification_text(c: &Value) -> String {
    match c {
        Value::String(s) if s == "ExactFinite" => "exact (finite words)".into(),
        Value::String(s) if s == "RuleBased" => "rule-based".into(),
        Value::Object(m) => match m.get("Representative") {
            Some(b) => format!("representatives, budget {b}"),
            None => c.to_string(),
        },
        other => other.to_string(),
    }
}

fn unbounded_text(status: &str, cert: &Value) -> String {
    let body = &cert[status];
    match status {
        "DuplicatorCertified" if body.get("ClosedSet").is_some() => {
            let n = body["ClosedSet"]["states"].as_array().map_or(0, Vec::len);
            format!("certified (closed set of {n} abstract configurations)")
        }
        "DuplicatorCertified" => "certified (identical words)".into(),
        "SpoilerCertified" if body.get("Region").is_some() => {
            format!("certified (region class {} occurs on one side only)", body["Region"]["class"])
        }
        "SpoilerCertified" => format!("certified (Spoiler wins at depth {})", body["BoundedDepth"]["depth"]),
        _ => format!("Duplicator survives up to depth {body}, not certified beyond"),
    }
}

fn parse_tau(text: &str) -> Result<Tau, CliError> {
    match text {
        "sigma" | "s" | "σ" => Ok(Tau::Sigma),
        n => match n.parse::<u64>() {
            Ok(k) if k >= 1 => Ok(Tau::Fin(k)),
            _ => Err(CliError::Usage(format!("--tau must be 'sigma' or a positive integer, got {n:?}"))),
        },
    }
}

fn cmd_check_identity(a: IdentityArgs) -> Result<ExitCode, CliError> {
    let tau = parse_tau(&a.tau)?;
    check_depth(a.max_depth)?;
    let (s, t) = parse_identity(&a.identity).map_err(|e| CliError::Input(format!("{:?}: {e}", a.identity)))?;
    let family = Family::from(a.family);
    let inputs = json!([a.identity]);
    let params = json!({ "family": family.to_string(), "tau": tau.to_string(), "max_depth": a.max_depth });
    let (run, ms) = cached(&a.out, "check-identity", inputs, params, || {
        let report = check_identity(&s, &t, family, tau, a.max_depth, &default_budget)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let (exit, trace) = match &report.status {
            IdentityStatus::HoldsCertified => (0, vec![]),
            IdentityStatus::HoldsUpToDepth { .. } => (2, vec![]),
            IdentityStatus::FailsAtDepth { trace, .. } => (1, trace_entries(trace)),
            IdentityStatus::FailsCertified { .. } => (1, vec![]),
        };
        Ok(Outcome { verdict: serde_json::to_value(&report).expect("report serializes"), trace, exit })
    })?;
    Ok(emit(a.out.format, run, ms, |o| {
        let r = &o.verdict;
        let mut s = format!("identity: {} = {}\n", r["s"].as_str().unwrap_or("?"), r["t"].as_str().unwrap_or("?"));
        for d in r["per_depth"].as_array().into_iter().flatten() {
            s += &format!(
                "  depth {}: forward {}, backward {}\n",
                d["depth"],
                str_of(&d["forward"]),
                str_of(&d["backward"])
            );
        }
        let st = &r["status"];
        s += &match str_of(&st["status"]) {
            "holds-certified" => "status: holds-certified\n".to_string(),
            "holds-up-to-depth" => format!("status: holds-up-to-depth {}\n", st["depth"]),
            "fails-at-depth" => {
                let mut line = format!("status: fails-at-depth {} ({})\n", st["depth"], str_of(&st["direction"]));
                if let Some(f) = st["formula"].get("formula").and_then(Value::as_str) {
                    line += &format!("distinguishing sentence: {f}\n");
                }
                line + &trace_text(o)
            }
            "fails-certified" => format!("status: fails-certified ({})\n", str_of(&st["direction"])),
            other => format!("status: {other}\n"),
        };
        s
    }))
}

fn str_of(v: &Value) -> &str {
    v.as_str().unwrap_or("?")
}

fn cmd_play(a: PlayArgs) -> Result<ExitCode, CliError> {
    check_depth(a.depth)?;
    let (u, v) = (word(&a.left)?, word(&a.right)?);
    let c = GameConfig::sentences(FragmentDesc::new(a.family.into(), Depth::Bounded(a.depth)), u, v);
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    let mut session = play::Session { input: stdin.lock(), output: &mut stdout, budget: default_budget(a.depth) };
    let result = match a.role {
        Role::Spoiler => session.as_spoiler(c),
        Role::Duplicator => session.as_duplicator(c),
    };
    let winner = result.map_err(|e| CliError::Input(e.to_string()))?;
    let _ = writeln!(stdout);
    Ok(match winner {
        Some(Player::Spoiler) => ExitCode::from(1),
        Some(Player::Duplicator) => ExitCode::SUCCESS,
        None => {
            println!("session ended without a winner");
            ExitCode::from(2)
        }
    })
}

const ALPHABET: [char; 2] = ['a', 'b'];

struct Row {
    label: String,
    pass: bool,
    detail: String,
}

fn table_outcome(rows: Vec<Row>) -> Outcome {
    let failed = rows.iter().filter(|r| !r.pass).count();
    let rows_json: Vec<Value> =
        rows.iter().map(|r| json!({ "case": r.label, "pass": r.pass, "detail": r.detail })).collect();
    Outcome {
        verdict: json!({ "cases": rows.len(), "failed": failed, "rows": rows_json }),
        trace: vec![],
        exit: if failed == 0 { 0 } else { 1 },
    }
}

fn table_text(o: &Outcome) -> String {
    let mut s = String::new();
    for r in o.verdict["rows"].as_array().into_iter().flatten() {
        let mark = if r["pass"].as_bool() == Some(true) { "pass" } else { "FAIL" };
        s += &format!("{mark}  {}  {}\n", str_of(&r["case"]), str_of(&r["detail"]));
    }
    s + &format!("{} cases, {} failed\n", o.verdict["cases"], o.verdict["failed"])
}

fn listing(items: &[String]) -> String {
    items.iter().map(|i| format!(" {i}")).collect()
}

fn check_grid(depth: u32, maxlen: usize) -> Result<(), CliError> {
    if depth > MAX_ORACLE_DEPTH || maxlen > MAX_ORACLE_LEN {
        return Err(CliError::Budget(format!(
            "oracle grids are limited to depth {MAX_ORACLE_DEPTH} and length {MAX_ORACLE_LEN}"
        )));
    }
    Ok(())
}

fn oracle_exactness(families: &[Family], depth: u32, maxlen: usize) -> Result<Outcome, CliError> {
    let words = words_up_to(&ALPHABET, maxlen);
    let mut rows = vec![];
    for &family in families {
        for n in 0..=depth {
            let f = FragmentDesc::new(family, Depth::Bounded(n));
            let mut mismatches = vec![];
            for u in &words {
                for v in &words {
                    let c = GameConfig::sentences(f, WordExpr::lit(u), WordExpr::lit(v));
                    let engine = decide_bounded(&c, default_budget(n)).map_err(|e| CliError::Input(e.to_string()))?;
                    let exact = decide_finite_exact(&c).map_err(oracle_error)?;
                    if engine.winner != exact {
                        mismatches.push(format!("({u:?}, {v:?})"));
                    }
                }
            }
            let pairs = words.len() * words.len();
            rows.push(Row {
                label: f.to_string(),
                pass: mismatches.is_empty(),
                detail: format!("{} of {pairs} pairs disagree{}", mismatches.len(), listing(&mismatches)),
            });
        }
    }
    Ok(table_outcome(rows))
}

fn oracle_implication(families: &[Family], depth: u32, maxlen: usize) -> Result<Outcome, CliError> {
    let words = words_up_to(&ALPHABET, maxlen);
    let alphabet: BTreeSet<char> = ALPHABET.into_iter().collect();
    let mut rows = vec![];
    for &family in families {
        let f = FragmentDesc::new(family, Depth::Bounded(depth));
        let oracle = SentenceOracle::new(f, &alphabet).map_err(oracle_error)?;
        let mut mismatches = vec![];
        for u in &words {
            for v in &words {
                let (wu, wv) = (WordExpr::lit(u), WordExpr::lit(v));
                let game = decide_bounded(&GameConfig::sentences(f, wu.clone(), wv.clone()), default_budget(depth))
                    .map_err(|e| CliError::Input(e.to_string()))?;
                let implies = oracle.implies(&wu, &wv).map_err(oracle_error)?;
                if (game.winner == Player::Duplicator) != implies {
                    mismatches.push(format!("({u:?}, {v:?})"));
                }
            }
        }
        rows.push(Row {
            label: f.to_string(),
            pass: mismatches.is_empty(),
            detail: format!(
                "{} sentences, {} pairs, {} inconsistent{}",
                oracle.sentences().len(),
                words.len() * words.len(),
                mismatches.len(),
                listing(&mismatches)
            ),
        });
    }
    Ok(table_outcome(rows))
}

/// σ-word pairs with known verdicts, each with the depths to sweep.
const BUILTIN_PAIRS: [(&str, &str, Family, u32); 4] = [
    ("a^s", "a^s", Family::Fo, 2),
    ("a^s", "a^s a^s", Family::Fo2, 2),
    ("a^s", "aaa", Family::Fo, 2),
    ("(ab)^s", "(ab)^s ab", Family::Fo2, 2),
];

fn oracle_crosscheck(pairs: &str, k: u64) -> Result<Outcome, CliError> {
    if pairs != "builtin" {
        return Err(CliError::Usage(format!("unknown pair set {pairs:?}, only 'builtin' is available")));
    }
    if k > MAX_CROSSCHECK_K {
        return Err(CliError::Budget(format!("k {k} exceeds the limit of {MAX_CROSSCHECK_K}")));
    }
    let mut rows = vec![];
    for (l, r, family, max_n) in BUILTIN_PAIRS {
        let (u, v) = (word(l)?, word(r)?);
        for n in 0..=max_n {
            let cc = crosscheck_sigma(&u, &v, family, n, k).map_err(oracle_error)?;
            rows.push(Row {
                label: format!("({l}, {r}) {}", FragmentDesc::new(family, Depth::Bounded(n))),
                pass: cc.agree(),
                detail: format!("engine {}, approximations {}", cc.engine, cc.oracle),
            });
        }
    }
    Ok(table_outcome(rows))
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode, CliError> {
    let (name, out, inputs, params, compute): (_, _, _, _, Box<dyn FnOnce() -> Result<Outcome, CliError>>) = match a
        .command
    {
        OracleCommand::Exactness { family, depth, maxlen, out } => {
            check_grid(depth, maxlen)?;
            let fams = family.families();
            let params = json!({ "families": fams.iter().map(Family::to_string).collect::<Vec<_>>(), "depth": depth, "maxlen": maxlen });
            ("oracle exactness", out, json!([]), params, Box::new(move || oracle_exactness(&fams, depth, maxlen)))
        }
        OracleCommand::Theorem2 { family, depth, maxlen, out } => {
            check_grid(depth, maxlen)?;
            let fams = family.families();
            let params = json!({ "families": fams.iter().map(Family::to_string).collect::<Vec<_>>(), "depth": depth, "maxlen": maxlen });
            ("oracle theorem2", out, json!([]), params, Box::new(move || oracle_implication(&fams, depth, maxlen)))
        }
        OracleCommand::Crosscheck { pairs, k, out } => {
            let inputs = json!([pairs]);
            let params = json!({ "k": k });
            ("oracle crosscheck", out, inputs, params, Box::new(move || oracle_crosscheck(&pairs, k)))
        }
    };
    let (run, ms) = cached(&out, name, inputs, params, compute)?;
    Ok(emit(out.format, run, ms, table_text))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Game(a) => cmd_game(a),
        Command::CheckIdentity(a) => cmd_check_identity(a),
        Command::Play(a) => cmd_play(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    let _ = io::stdout().flush();
    result.unwrap_or_else(CliError::exit)
}
