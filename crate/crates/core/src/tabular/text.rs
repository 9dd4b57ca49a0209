//! Plain-text MDP format.
//!
//! ```text
//! # comments and blank lines are ignored
//! mdp <n_states> <n_actions> <gamma>
//! terminal <0|1 per state>
//! reward
//! <one line per state: n_actions values>
//! transition
//! <one line per (state, action), state-major: n_states probabilities>
//! ```

use super::FiniteMdp;
use crate::error::{Error, Result};

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(format!("MDP text: {}", msg.into()))
}

fn numbers(line: &str, expected: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| bad(format!("not a number: {t}")))
        })
        .collect::<Result<_>>()?;
    if v.len() != expected {
        return Err(bad(format!("expected {expected} values, got {}", v.len())));
    }
    Ok(v)
}

pub fn parse_mdp(text: &str) -> Result<FiniteMdp> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}")));

    let header: Vec<&str> = next("header")?.split_whitespace().collect();
    if header.len() != 4 || header[0] != "mdp" {
        return Err(bad("header must be `mdp <n_states> <n_actions> <gamma>`"));
    }
    let ns: usize = header[1].parse().map_err(|_| bad("bad state count"))?;
    let na: usize = header[2].parse().map_err(|_| bad("bad action count"))?;
    let gamma: f64 = header[3].parse().map_err(|_| bad("bad gamma"))?;

    let term_line = next("terminal line")?;
    let flags = term_line
        .strip_prefix("terminal")
        .ok_or_else(|| bad("expected `terminal`"))?;
    let terminal: Vec<bool> = numbers(flags, ns)?.into_iter().map(|f| f != 0.0).collect();

    if next("reward section")? != "reward" {
        return Err(bad("expected `reward`"));
    }
    let mut reward = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        reward.extend(numbers(next("reward row")?, na)?);
    }
    if next("transition section")? != "transition" {
        return Err(bad("expected `transition`"));
    }
    let mut transition = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        transition.extend(numbers(next("transition row")?, ns)?);
    }
    FiniteMdp::new(ns, na, transition, reward, gamma, terminal)
}

pub fn write_mdp(mdp: &FiniteMdp) -> String {
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = format!("mdp {} {} {:?}\n", mdp.n_states, mdp.n_actions, mdp.gamma);
    let flags: Vec<&str> = mdp
        .terminal
        .iter()
        .map(|t| if *t { "1" } else { "0" })
        .collect();
    out.push_str(&format!("terminal {}\nreward\n", flags.join(" ")));
    for s in 0..mdp.n_states {
        out.push_str(&join(
            &mdp.reward[s * mdp.n_actions..(s + 1) * mdp.n_actions],
        ));
        out.push('\n');
    }
    out.push_str("transition\n");
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            out.push_str(&join(mdp.next_distribution(s, a)));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_chain() {
        let text = "\
# two-step chain
mdp 3 1 0.9
terminal 0 0 1
reward
1
1
0
transition
0 1 0
0 0 1
0 0 1   # terminal self-loop
";
        let mdp = parse_mdp(text).unwrap();
        assert_eq!(mdp.terminal, vec![false, false, true]);
        assert_eq!(mdp.next_distribution(1, 0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = FiniteMdp::random_stochastic(4, 3, 0.95, &mut rng).unwrap();
        assert_eq!(parse_mdp(&write_mdp(&mdp)).unwrap(), mdp);
    }

    #[test]
    fn truncated_input() {
        assert!(parse_mdp("mdp 2 1 0.5\nterminal 0 0\nreward\n1\n").is_err());
        assert!(parse_mdp("").is_err());
    }
}
