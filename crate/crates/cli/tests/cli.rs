use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn efpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efpi")).args(args).env_remove("EFPI_CACHE").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = efpi(&all);
    (serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o))), code(&o))
}

const TOP_LEVEL: [&str; 7] = ["command", "inputs", "params", "verdict", "trace", "timing_ms", "version"];

fn assert_schema(v: &Value) {
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = TOP_LEVEL.to_vec();
    want.sort();
    assert_eq!(keys, want);
    for entry in v["trace"].as_array().unwrap() {
        let keys: Vec<&str> = entry.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["quantifier", "quest", "response", "round", "variable"]);
        assert!(["exists", "forall", "not_exists", "not_forall"].contains(&entry["quantifier"].as_str().unwrap()));
    }
}

#[test]
fn unbounded_fo2_on_omega_powers_is_certified() {
    let (v, c) = json(&["game", "--family", "fo2", "--unbounded", "a^w", "a^w a^w"]);
    assert_schema(&v);
    assert_eq!(c, 0);
    assert_eq!(v["verdict"]["winner"], "Duplicator");
    assert_eq!(v["verdict"]["status"], "DuplicatorCertified");
}

#[test]
fn spoiler_counts_to_three() {
    let (v, c) = json(&["game", "--family", "fo", "--depth", "2", "aa", "aaa"]);
    assert_schema(&v);
    assert_eq!(c, 1);
    assert_eq!(v["verdict"]["winner"], "Spoiler");
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_rounds_on_equal_letters() {
    let o = efpi(&["game", "--family", "fo2", "--depth", "0", "a", "a"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("winner: Duplicator"));
}

#[test]
fn unsettled_unbounded_game_exits_2() {
    // not certified either way: the closed-set search does not cover FO on σ-words
    let (v, c) = json(&["game", "--family", "fo", "--unbounded", "--max-depth", "1", "a^s", "a^s a^s"]);
    assert_eq!(v["verdict"]["status"], "DuplicatorUpToDepth");
    assert_eq!(c, 2);
}

#[test]
fn identity_examples() {
    let (v, c) = json(&["check-identity", "x^w = x^w x^w", "--family", "fo2"]);
    assert_schema(&v);
    assert_eq!(c, 0);
    assert_eq!(v["verdict"]["status"]["status"], "holds-certified");

    let (v, c) = json(&["check-identity", "xy = yx", "--family", "fo2", "--max-depth", "2"]);
    assert_schema(&v);
    assert_eq!(c, 1);
    assert_eq!(v["verdict"]["status"]["status"], "fails-at-depth");
    assert_eq!(v["verdict"]["status"]["depth"], 2);
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);

    let (_, c) = json(&["check-identity", "x = x"]);
    assert_eq!(c, 0);
}

#[test]
fn identity_up_to_depth_exits_2() {
    let (v, c) = json(&["check-identity", "x^w = x^w x", "--family", "fo", "--max-depth", "1"]);
    assert_eq!(v["verdict"]["status"]["status"], "holds-up-to-depth");
    assert_eq!(c, 2);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&efpi(&["game", "a", "b"])), 64, "depth or unbounded is required");
    assert_eq!(code(&efpi(&["game", "--depth", "1", "--unbounded", "a", "b"])), 64);
    assert_eq!(code(&efpi(&["game", "--bogus"])), 64);
    assert_eq!(code(&efpi(&["check-identity", "x = x", "--tau", "omega"])), 64);
    assert_eq!(code(&efpi(&["game", "--depth", "1", "a(", "b"])), 65);
    assert_eq!(code(&efpi(&["check-identity", "x = y = z"])), 65);
    assert_eq!(code(&efpi(&["check-identity", "x = Y"])), 65);
    assert_eq!(code(&efpi(&["oracle", "theorem2", "--depth", "3"])), 66);
    assert_eq!(code(&efpi(&["game", "--depth", "40", "a", "a"])), 66);
    assert_eq!(code(&efpi(&["--help"])), 0);
    assert_eq!(code(&efpi(&["--version"])), 0);
}

#[test]
fn input_errors_report_the_offset() {
    let o = efpi(&["game", "--depth", "1", "a^q", "a"]);
    assert_eq!(code(&o), 65);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset"));
}

#[test]
fn oracle_examples() {
    for args in [
        &["oracle", "theorem2", "--family", "fo2", "--depth", "1", "--maxlen", "3"][..],
        &["oracle", "crosscheck", "--pairs", "builtin", "--k", "8"],
        &["oracle", "theorem2", "--depth", "0"],
        &["oracle", "exactness", "--depth", "1", "--maxlen", "3"],
    ] {
        let (v, c) = json(args);
        assert_schema(&v);
        assert_eq!(c, 0, "{args:?}");
        assert_eq!(v["verdict"]["failed"], 0);
        assert!(v["verdict"]["rows"].as_array().unwrap().iter().all(|r| r["pass"] == true));
    }
}

fn without_timing(text: &str) -> String {
    text.lines().filter(|l| !l.contains("\"timing_ms\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn cached_runs_are_identical_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.log");
    let cache_arg = cache.to_str().unwrap();
    let args = ["game", "--family", "fo", "--depth", "2", "aa", "aaa", "--format", "json", "--cache", cache_arg];
    let first = stdout(&efpi(&args));
    let log = fs::read_to_string(&cache).unwrap();
    assert_eq!(log.lines().count(), 1);
    let second = stdout(&efpi(&args));
    assert_eq!(without_timing(&first), without_timing(&second));
    assert_eq!(fs::read_to_string(&cache).unwrap(), log, "a hit appends nothing");

    let via_env = Command::new(env!("CARGO_BIN_EXE_efpi"))
        .args(&args[..args.len() - 2])
        .env("EFPI_CACHE", &cache)
        .output()
        .unwrap();
    assert_eq!(without_timing(&first), without_timing(&stdout(&via_env)));
    assert_eq!(fs::read_to_string(&cache).unwrap(), log);
}

#[test]
fn corrupt_cache_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.log");
    let cache_arg = cache.to_str().unwrap();
    let args = ["game", "--family", "fo", "--depth", "2", "aa", "aaa", "--format", "json", "--cache", cache_arg];
    efpi(&args);
    // flip the stored verdict without fixing the checksum
    let tampered = fs::read_to_string(&cache).unwrap().replace("Spoiler", "Duplicator");
    fs::write(&cache, &tampered).unwrap();
    let o = efpi(&args);
    assert!(String::from_utf8_lossy(&o.stderr).contains("corrupt"));
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["winner"], "Spoiler");
    assert_eq!(fs::read_to_string(&cache).unwrap(), tampered, "an untrusted cache is never written");
}

fn play(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_efpi"))
        .arg("play")
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn play_engine_mirrors_on_equal_words() {
    let o = play(&["a", "a", "--depth", "1"], "E x @0\n");
    assert!(stdout(&o).contains("Duplicator wins"), "{}", stdout(&o));
    assert_eq!(code(&o), 0);
}

#[test]
fn play_malformed_position_reprompts() {
    let o = play(&["a", "a", "--depth", "1"], "E x P[w:\nE x @0\n");
    let out = stdout(&o);
    assert!(out.contains("positions are paths of steps"), "{out}");
    assert!(out.contains("Duplicator wins"));
}

#[test]
fn play_optimal_spoiler_wins_on_aa_aaa() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_efpi"))
        .args(["play", "aa", "aaa", "--family", "fo", "--depth", "2", "--as", "spoiler"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    // pin the middle of aaa, then quest on whichever side of the answer aa has no room
    writeln!(stdin, "A x @1").unwrap();
    let answer = lines
        .by_ref()
        .map(Result::unwrap)
        .find_map(|l| l.split("Duplicator answers ").nth(1).map(str::to_string))
        .unwrap();
    let second = if answer == "@0" { "A y @0" } else { "A y @2" };
    writeln!(stdin, "{second}").unwrap();
    drop(stdin);
    let rest: Vec<String> = lines.map(Result::unwrap).collect();
    assert!(rest.iter().any(|l| l.contains("Spoiler wins")), "{rest:?}");
    assert_eq!(child.wait().unwrap().code(), Some(1));
}

#[test]
fn play_as_duplicator_against_the_engine() {
    let o = play(&["a", "b", "--depth", "1", "--as", "duplicator"], "@0\n");
    assert!(stdout(&o).contains("Spoiler wins"), "{}", stdout(&o));
    assert_eq!(code(&o), 1);
}
