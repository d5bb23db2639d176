//! Append-only verdict cache. One record per line:
//! `<key>\t<outcome json>\t<sha256 of key and outcome>`. A single bad
//! record makes the whole file untrusted for the rest of the run.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::record::{Outcome, VERSION};

pub struct Cache {
    path: PathBuf,
    entries: HashMap<String, Outcome>,
    trusted: bool,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn checksum(key: &str, payload: &str) -> String {
    let mut h = Sha256::new();
    h.update(key.as_bytes());
    h.update(b"\t");
    h.update(payload.as_bytes());
    hex(&h.finalize())
}

/// Hash of everything that determines a verdict.
pub fn key(command: &str, inputs: &Value, params: &Value) -> String {
    let canonical = serde_json::json!({ "command": command, "inputs": inputs, "params": params, "version": VERSION });
    hex(&Sha256::digest(canonical.to_string().as_bytes()))
}

impl Cache {
    pub fn open(path: PathBuf) -> Cache {
        let mut cache = Cache { path, entries: HashMap::new(), trusted: true };
        let Ok(text) = fs::read_to_string(&cache.path) else {
            return cache;
        };
        for line in text.lines().filter(|l| !l.is_empty()) {
            let parsed = line.split('\t').collect::<Vec<_>>();
            let record = match parsed.as_slice() {
                [k, payload, sum] if checksum(k, payload) == *sum => {
                    serde_json::from_str::<Outcome>(payload).ok().map(|o| (k.to_string(), o))
                }
                _ => None,
            };
            match record {
                Some((k, o)) => {
                    cache.entries.insert(k, o);
                }
                None => {
                    eprintln!("warning: cache {} is corrupt, ignoring it", cache.path.display());
                    cache.entries.clear();
                    cache.trusted = false;
                    break;
                }
            }
        }
        cache
    }

    pub fn get(&self, key: &str) -> Option<&Outcome> {
        self.entries.get(key)
    }

    pub fn put(&mut self, key: &str, outcome: &Outcome) {
        if !self.trusted || self.entries.contains_key(key) {
            return;
        }
        let payload = serde_json::to_string(outcome).expect("outcome serializes");
        let line = format!("{key}\t{payload}\t{}\n", checksum(key, &payload));
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| f.write_all(line.as_bytes()));
        if let Err(e) = written {
            eprintln!("warning: cannot write cache {}: {e}", self.path.display());
            return;
        }
        self.entries.insert(key.to_string(), outcome.clone());
    }
}
