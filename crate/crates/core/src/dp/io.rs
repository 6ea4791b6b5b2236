//! Plain-text MDP exchange format.
//!
//! ```text
//! # tabular-mdp v1
//! n_states,2
//! n_actions,1
//! gamma,0.9
//! [P]
//! s,a,s_next,prob
//! 0,0,1,1
//! ...
//! [R]
//! s,a,reward
//! ...
//! [init]
//! s,prob
//! ...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a write/read cycle
//! is bit-exact.

use std::io::{BufRead, Write};

use super::{Row, TabularMdp, MODULE};
use crate::error::{Error, Result};

const MAGIC: &str = "# tabular-mdp v1";

pub fn write_mdp<W: Write>(mdp: &TabularMdp, mut out: W) -> Result<()> {
    let io = |e| Error::io("mdp", e);
    writeln!(out, "{MAGIC}").map_err(io)?;
    writeln!(out, "n_states,{}", mdp.n_states()).map_err(io)?;
    writeln!(out, "n_actions,{}", mdp.n_actions()).map_err(io)?;
    writeln!(out, "gamma,{}", mdp.gamma()).map_err(io)?;
    writeln!(out, "[P]\ns,a,s_next,prob").map_err(io)?;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            for &(j, p) in mdp.row(s, a) {
                writeln!(out, "{s},{a},{j},{p}").map_err(io)?;
            }
        }
    }
    writeln!(out, "[R]\ns,a,reward").map_err(io)?;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            writeln!(out, "{s},{a},{}", mdp.reward(s, a)).map_err(io)?;
        }
    }
    writeln!(out, "[init]\ns,prob").map_err(io)?;
    for (s, p) in mdp.init().iter().enumerate() {
        writeln!(out, "{s},{p}").map_err(io)?;
    }
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::invalid(MODULE, format!("mdp text line {line}: {msg}"))
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, line: usize) -> Result<T> {
    parts
        .get(i)
        .ok_or_else(|| bad(line, "missing field"))?
        .trim()
        .parse()
        .map_err(|_| bad(line, format!("unparsable field {:?}", parts[i])))
}

pub fn read_mdp<R: BufRead>(input: R) -> Result<TabularMdp> {
    let mut lines = input.lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((i, l)) => Ok(Some((i + 1, l.map_err(|e| Error::io("mdp", e))?))),
        }
    };
    match next()? {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut header = |key: &str| -> Result<String> {
        let (n, l) = next()?.ok_or_else(|| bad(0, format!("missing {key}")))?;
        let (k, v) = l.split_once(',').ok_or_else(|| bad(n, "expected key,value"))?;
        if k.trim() != key {
            return Err(bad(n, format!("expected {key}")));
        }
        Ok(v.trim().to_string())
    };
    let n_states: usize = header("n_states")?.parse().map_err(|_| bad(2, "n_states"))?;
    let n_actions: usize = header("n_actions")?.parse().map_err(|_| bad(3, "n_actions"))?;
    let gamma: f64 = header("gamma")?.parse().map_err(|_| bad(4, "gamma"))?;
    let mut rows: Vec<Row> = vec![Vec::new(); n_states * n_actions];
    let mut rewards = vec![0.0; n_states * n_actions];
    let mut init = vec![0.0; n_states];
    let mut section = String::new();
    let mut skip_header = false;
    while let Some((n, l)) = next()? {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        if l.starts_with('[') {
            section = l.to_string();
            skip_header = true;
            continue;
        }
        if skip_header {
            skip_header = false;
            continue;
        }
        let parts: Vec<&str> = l.split(',').collect();
        let sa = |s: usize, a: usize| -> Result<usize> {
            if s >= n_states || a >= n_actions {
                Err(bad(n, "index out of range"))
            } else {
                Ok(s * n_actions + a)
            }
        };
        match section.as_str() {
            "[P]" => {
                let i = sa(field(&parts, 0, n)?, field(&parts, 1, n)?)?;
                rows[i].push((field(&parts, 2, n)?, field(&parts, 3, n)?));
            }
            "[R]" => {
                let i = sa(field(&parts, 0, n)?, field(&parts, 1, n)?)?;
                rewards[i] = field(&parts, 2, n)?;
            }
            "[init]" => {
                let s: usize = field(&parts, 0, n)?;
                *init.get_mut(s).ok_or_else(|| bad(n, "state out of range"))? = field(&parts, 1, n)?;
            }
            other => return Err(bad(n, format!("unknown section {other:?}"))),
        }
    }
    TabularMdp::new(n_states, n_actions, rows, rewards, gamma, init)
}
