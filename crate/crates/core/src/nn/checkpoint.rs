//! Versioned text checkpoints.
//!
//! ```text
//! mlp v1
//! sizes 3 64 1
//! activations tanh identity
//! w <row-major weights of layer 0>
//! b <biases of layer 0>
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so save/load is exact.

use std::fmt::Write as _;

use super::mlp::{Activation, Mlp};
use super::td3::{ActorCritic, Td3Config};
use crate::error::{Error, Result};

const MLP_HEADER: &str = "mlp v1";
const AC_HEADER: &str = "actor-critic v1";

fn bad(msg: impl Into<String>) -> Error {
    Error::invalid("nn", format!("checkpoint: {}", msg.into()))
}

fn join(xs: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:?}").unwrap();
    }
    s
}

pub fn write_mlp(net: &Mlp, out: &mut String) {
    let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
    writeln!(out, "{MLP_HEADER}").unwrap();
    writeln!(out, "sizes {}", sizes.join(" ")).unwrap();
    writeln!(out, "activations {} {}", net.hidden_activation().name(), net.output_activation().name()).unwrap();
    let p = net.params();
    let mut off = 0;
    for w in net.sizes().windows(2) {
        let nw = w[0] * w[1];
        writeln!(out, "w {}", join(&p[off..off + nw])).unwrap();
        writeln!(out, "b {}", join(&p[off + nw..off + nw + w[1]])).unwrap();
        off += nw + w[1];
    }
    writeln!(out, "end").unwrap();
}

struct Lines<'a> {
    it: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            let l = self.it.next().ok_or_else(|| bad("unexpected end of input"))?.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
    }

    fn tagged(&mut self, tag: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.strip_prefix(tag) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok(rest.trim()),
            _ => Err(bad(format!("expected '{tag}', found '{l}'"))),
        }
    }
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number '{t}'"))))
        .collect()
}

fn read_mlp_lines(lines: &mut Lines<'_>) -> Result<Mlp> {
    if lines.next()? != MLP_HEADER {
        return Err(bad("missing mlp header"));
    }
    let sizes = lines
        .tagged("sizes")?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad size '{t}'"))))
        .collect::<Result<Vec<_>>>()?;
    let acts: Vec<&str> = lines.tagged("activations")?.split_whitespace().collect();
    if acts.len() != 2 {
        return Err(bad("expected two activation names"));
    }
    let parse = |s: &str| Activation::parse(s).ok_or_else(|| bad(format!("unknown activation '{s}'")));
    let mut net = Mlp::zeros(&sizes, parse(acts[0])?, parse(acts[1])?)?;
    let mut params = Vec::with_capacity(net.param_count());
    for w in sizes.windows(2) {
        let ws = floats(lines.tagged("w")?)?;
        let bs = floats(lines.tagged("b")?)?;
        if ws.len() != w[0] * w[1] || bs.len() != w[1] {
            return Err(bad("layer parameter count does not match sizes"));
        }
        params.extend(ws);
        params.extend(bs);
    }
    lines.tagged("end")?;
    net.set_params(&params)?;
    Ok(net)
}

pub fn mlp_to_string(net: &Mlp) -> String {
    let mut s = String::new();
    write_mlp(net, &mut s);
    s
}

pub fn mlp_from_str(s: &str) -> Result<Mlp> {
    read_mlp_lines(&mut Lines { it: s.lines().peekable() })
}

pub fn actor_critic_to_string(ac: &ActorCritic) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "{AC_HEADER}").unwrap();
    let lo: Vec<f64> = ac.bounds.iter().map(|b| b.0).collect();
    let hi: Vec<f64> = ac.bounds.iter().map(|b| b.1).collect();
    writeln!(s, "bounds_lo {}", join(&lo)).unwrap();
    writeln!(s, "bounds_hi {}", join(&hi)).unwrap();
    writeln!(s, "obs_scale {}", join(&ac.obs_scale)).unwrap();
    writeln!(s, "config {}", serde_json::to_string(&ac.config)?).unwrap();
    writeln!(s, "value_head {}", ac.value_head.is_some() as u8).unwrap();
    for net in [&ac.actor, &ac.critic_q1, &ac.critic_q2, &ac.actor_target, &ac.q1_target, &ac.q2_target] {
        write_mlp(net, &mut s);
    }
    if let Some(v) = &ac.value_head {
        write_mlp(v, &mut s);
    }
    Ok(s)
}

pub fn actor_critic_from_str(s: &str) -> Result<ActorCritic> {
    let mut lines = Lines { it: s.lines().peekable() };
    if lines.next()? != AC_HEADER {
        return Err(bad("missing actor-critic header"));
    }
    let lo = floats(lines.tagged("bounds_lo")?)?;
    let hi = floats(lines.tagged("bounds_hi")?)?;
    if lo.len() != hi.len() {
        return Err(bad("bound vectors differ in length"));
    }
    let obs_scale = floats(lines.tagged("obs_scale")?)?;
    let config: Td3Config = serde_json::from_str(lines.tagged("config")?)?;
    let has_value = match lines.tagged("value_head")? {
        "0" => false,
        "1" => true,
        other => return Err(bad(format!("bad value_head flag '{other}'"))),
    };
    let mut nets = Vec::with_capacity(7);
    for _ in 0..6 {
        nets.push(read_mlp_lines(&mut lines)?);
    }
    let value_head = if has_value { Some(read_mlp_lines(&mut lines)?) } else { None };
    let mut it = nets.into_iter();
    let mut take = || it.next().unwrap();
    Ok(ActorCritic {
        actor: take(),
        critic_q1: take(),
        critic_q2: take(),
        actor_target: take(),
        q1_target: take(),
        q2_target: take(),
        value_head,
        bounds: lo.into_iter().zip(hi).collect(),
        obs_scale,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn mlp_roundtrip_is_exact() {
        let net = Mlp::new(&[3, 5, 2], Activation::Relu, Activation::Tanh, &mut rng_from_seed(4)).unwrap();
        let back = mlp_from_str(&mlp_to_string(&net)).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn actor_critic_roundtrip_is_exact() {
        let cfg = Td3Config {
            value_head: true,
            hidden: vec![4],
            ..Td3Config::default()
        };
        let ac = ActorCritic::new(2, &[(-1.0, 3.0)], &cfg, &mut rng_from_seed(9)).unwrap();
        let back = actor_critic_from_str(&actor_critic_to_string(&ac).unwrap()).unwrap();
        assert_eq!(ac, back);
    }

    #[test]
    fn truncated_input_rejected() {
        let net = Mlp::zeros(&[2, 2], Activation::Tanh, Activation::Identity).unwrap();
        let s = mlp_to_string(&net);
        assert!(mlp_from_str(&s[..s.len() - 5]).is_err());
    }
}
