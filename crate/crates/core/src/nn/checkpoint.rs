//! Plain-text network checkpoints.
//!
//! Layout, one token group per line, values separated by single spaces:
//!
//! ```text
//! drlc-network 1
//! layers <count>
//! layer <in_dim> <out_dim> <activation> <l2_decay> <bn: 0|1>
//! weights <in_dim * out_dim values, row-major, row = output unit>
//! biases <out_dim values>
//! bn <epsilon> <momentum>                 (only when bn = 1)
//! gamma <out_dim values>                  (only when bn = 1)
//! beta <out_dim values>                   (only when bn = 1)
//! running_mean <out_dim values>           (only when bn = 1)
//! running_var <out_dim values>            (only when bn = 1)
//! ... repeated per layer ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a write/read cycle
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;

use super::{Activation, BatchNorm, DenseLayer, DenseNetwork, Matrix};
use crate::error::{Error, Result};

const MAGIC: &str = "drlc-network";
const VERSION: u32 = 1;

pub fn write_network(net: &DenseNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "layers {}", net.layers().len());
    for l in net.layers() {
        let _ = writeln!(
            out,
            "layer {} {} {} {} {}",
            l.in_dim(),
            l.out_dim(),
            l.activation.name(),
            l.l2_decay,
            u8::from(l.batch_norm.is_some())
        );
        write_values(&mut out, "weights", l.weights.as_slice());
        write_values(&mut out, "biases", &l.biases);
        if let Some(bn) = &l.batch_norm {
            let _ = writeln!(out, "bn {} {}", bn.epsilon, bn.momentum);
            write_values(&mut out, "gamma", &bn.gamma);
            write_values(&mut out, "beta", &bn.beta);
            write_values(&mut out, "running_mean", &bn.running_mean);
            write_values(&mut out, "running_var", &bn.running_var);
        }
    }
    out.push_str("end\n");
    out
}

fn write_values(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

/// Parses a network from `lines`, consuming exactly the lines it owns so
/// that callers can embed checkpoints in larger files.
pub fn read_network<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<DenseNetwork> {
    let header = next_tokens(lines, MAGIC)?;
    let version: u32 = parse(header.first().copied(), "version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count: usize = parse(
        next_tokens(lines, "layers")?.first().copied(),
        "layer count",
    )?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let t = next_tokens(lines, "layer")?;
        if t.len() != 5 {
            return Err(Error::Checkpoint("layer line needs 5 fields".into()));
        }
        let in_dim: usize = parse(Some(t[0]), "in_dim")?;
        let out_dim: usize = parse(Some(t[1]), "out_dim")?;
        let activation = Activation::from_name(t[2])
            .ok_or_else(|| Error::Checkpoint(format!("unknown activation `{}`", t[2])))?;
        let l2: f64 = parse(Some(t[3]), "l2_decay")?;
        let has_bn = match t[4] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Checkpoint(format!("bad batch-norm flag `{other}`"))),
        };
        let weights =
            Matrix::from_vec(out_dim, in_dim, values(lines, "weights", in_dim * out_dim)?)?;
        let biases = values(lines, "biases", out_dim)?;
        let mut layer = DenseLayer::new(weights, biases, activation)?.with_l2_decay(l2)?;
        if has_bn {
            let t = next_tokens(lines, "bn")?;
            let epsilon: f64 = parse(t.first().copied(), "bn epsilon")?;
            let momentum: f64 = parse(t.get(1).copied(), "bn momentum")?;
            let bn = BatchNorm {
                gamma: values(lines, "gamma", out_dim)?,
                beta: values(lines, "beta", out_dim)?,
                running_mean: values(lines, "running_mean", out_dim)?,
                running_var: values(lines, "running_var", out_dim)?,
                epsilon,
                momentum,
            };
            layer.batch_norm = Some(bn);
        }
        layers.push(layer);
    }
    next_tokens(lines, "end")?;
    DenseNetwork::from_layers(layers)
}

fn next_tokens<'a, I: Iterator<Item = &'a str>>(lines: &mut I, tag: &str) -> Result<Vec<&'a str>> {
    let line = lines
        .by_ref()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected `{tag}`")))?;
    let mut tokens = line.split_whitespace();
    match tokens.next() {
        Some(t) if t == tag => Ok(tokens.collect()),
        other => Err(Error::Checkpoint(format!(
            "expected `{tag}`, found `{}`",
            other.unwrap_or_default()
        ))),
    }
}

fn values<'a, I: Iterator<Item = &'a str>>(lines: &mut I, tag: &str, n: usize) -> Result<Vec<f64>> {
    let tokens = next_tokens(lines, tag)?;
    if tokens.len() != n {
        return Err(Error::Checkpoint(format!(
            "`{tag}` has {} values, expected {n}",
            tokens.len()
        )));
    }
    tokens.into_iter().map(|t| parse(Some(t), tag)).collect()
}

fn parse<T: std::str::FromStr>(token: Option<&str>, what: &str) -> Result<T> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("missing or malformed {what}")))
}
