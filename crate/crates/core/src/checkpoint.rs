//! Plain-text parameter checkpoints.
//!
//! ```text
//! checkpoint 1
//! tensor <name> <rank> <dim>...
//! <values, whitespace separated, row-major>
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

const HEADER: &str = "checkpoint 1";

pub fn format_checkpoint(params: &ParamSet) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for (_, name, t) in params.iter() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "tensor {name} {} {}", t.shape().len(), dims.join(" "));
        let values: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&values.join(" "));
        out.push('\n');
    }
    out
}

/// Named tensors in file order.
pub fn parse_checkpoint(text: &str) -> Result<Vec<(String, Tensor)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let err = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
    match lines.next() {
        Some((_, l)) if l.trim() == HEADER => {}
        Some((i, l)) => return Err(err(i, format!("expected `{HEADER}`, found `{}`", l.trim()))),
        None => return Err(err(0, "empty checkpoint".into())),
    }
    let mut out = Vec::new();
    while let Some((i, l)) = lines.next() {
        let words: Vec<&str> = l.split_whitespace().collect();
        if words.len() < 3 || words[0] != "tensor" {
            return Err(err(i, format!("expected `tensor <name> <rank> <dims>`, found `{}`", l.trim())));
        }
        let rank: usize = words[2].parse().map_err(|_| err(i, format!("bad rank `{}`", words[2])))?;
        if words.len() != 3 + rank {
            return Err(err(i, format!("rank {rank} needs {rank} dimensions")));
        }
        let shape = words[3..]
            .iter()
            .map(|w| w.parse::<usize>().map_err(|_| err(i, format!("bad dimension `{w}`"))))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let (j, values) = lines.next().ok_or_else(|| err(i, "missing values".into()))?;
        let data = values
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| err(j, format!("bad value `{w}`"))))
            .collect::<Result<Vec<_>>>()?;
        if data.len() != n {
            return Err(err(j, format!("expected {n} values, found {}", data.len())));
        }
        out.push((words[1].to_string(), Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    std::fs::write(path, format_checkpoint(params))?;
    Ok(())
}

/// Overwrites every tensor of `params` with the stored value of the same
/// name. Names and shapes must match exactly.
pub fn restore(params: &mut ParamSet, stored: Vec<(String, Tensor)>) -> Result<()> {
    if stored.len() != params.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} tensors, model has {}",
            stored.len(),
            params.len()
        )));
    }
    for (name, t) in stored {
        let id = params
            .find(&name)
            .ok_or_else(|| Error::Config(format!("checkpoint tensor `{name}` is not a model parameter")))?;
        if params.get(id).shape() != t.shape() {
            return Err(Error::Shape {
                op: "restore",
                lhs: params.get(id).shape().to_vec(),
                rhs: t.shape().to_vec(),
            });
        }
        *params.get_mut(id) = t;
    }
    Ok(())
}

pub fn load_checkpoint(params: &mut ParamSet, path: &Path) -> Result<()> {
    restore(params, parse_checkpoint(&std::fs::read_to_string(path)?)?)
}
