//! Tensor literals on the command line.
//!
//! Accepted forms:
//! - `diag(a,b,c)`: diagonal matrix;
//! - `I`: identity, sized to match the other operands (3 when none fix it);
//! - a list of numbers separated by commas or spaces, optionally in brackets.
//!   A triangular count (3, 6, 10, ...) is read as `vech`, a square count
//!   (4, 9, 16, ...) as a full row-major symmetric matrix.

use anyhow::{anyhow, bail, Context, Result};
use spd_power::spd::{dim_from_vech_len, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Identity,
    Matrix(SymMatrix),
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("{t:?} is not a number"))
        })
        .collect()
}

pub fn parse_literal(text: &str) -> Result<Literal> {
    let t = text.trim();
    if t == "I" {
        return Ok(Literal::Identity);
    }
    if let Some(inner) = t.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let d = numbers(inner)?;
        if d.is_empty() {
            bail!("diag() needs at least one entry");
        }
        return Ok(Literal::Matrix(SymMatrix::from_diag(&d)));
    }
    let inner = t.trim_start_matches('[').trim_end_matches(']');
    let v = numbers(inner).with_context(|| format!("cannot read tensor literal {text:?}"))?;
    if v.is_empty() {
        bail!("empty tensor literal");
    }
    if v.iter().any(|x| !x.is_finite()) {
        bail!("tensor literal {text:?} has non-finite entries");
    }
    if let Some(m) = dim_from_vech_len(v.len()) {
        return Ok(Literal::Matrix(SymMatrix::from_vech(m, v)?));
    }
    let m = (v.len() as f64).sqrt().round() as usize;
    if m * m == v.len() {
        let scale = v.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        let symmetric =
            (0..m).all(|i| (i..m).all(|j| (v[i * m + j] - v[j * m + i]).abs() <= 1e-10 * scale));
        if !symmetric {
            return Err(anyhow!("full matrix literal {text:?} is not symmetric"));
        }
        return Ok(Literal::Matrix(SymMatrix::from_fn(m, |i, j| v[i * m + j])));
    }
    bail!(
        "tensor literal {text:?} has {} entries; expected a vech (3, 6, 10, ...) or a full square matrix",
        v.len()
    )
}

/// Parses all literals and resolves `I` against the common dimension.
pub fn parse_tensors(texts: &[String]) -> Result<Vec<SymMatrix>> {
    let parsed = texts
        .iter()
        .map(|t| parse_literal(t))
        .collect::<Result<Vec<_>>>()?;
    let mut dim = None;
    for p in &parsed {
        if let Literal::Matrix(s) = p {
            match dim {
                None => dim = Some(s.dim()),
                Some(d) if d != s.dim() => {
                    bail!("tensor literals mix dimensions {d} and {}", s.dim())
                }
                _ => {}
            }
        }
    }
    let m = dim.unwrap_or(3);
    Ok(parsed
        .into_iter()
        .map(|p| match p {
            Literal::Identity => SymMatrix::identity(m),
            Literal::Matrix(s) => s,
        })
        .collect())
}

/// One literal per non-empty line; `#` starts a comment.
pub fn read_tensor_file(path: &std::path::Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}
