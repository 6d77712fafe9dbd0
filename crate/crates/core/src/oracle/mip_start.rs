//! MIP start files: one `name value` line per variable.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::BinaryAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStartMode {
    /// The decoded feasible binary solution.
    #[serde(rename = "DECODED")]
    Decoded,
    /// Raw relaxed values.
    #[serde(rename = "RELAXED")]
    Relaxed,
}

impl std::str::FromStr for MipStartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DECODED" => Ok(Self::Decoded),
            "RELAXED" => Ok(Self::Relaxed),
            _ => Err(Error::Parameter(format!("unknown MIP start mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum MipStart<'a> {
    Decoded(&'a BinaryAssignment),
    Relaxed(&'a [f64]),
}

impl MipStart<'_> {
    pub fn mode(&self) -> MipStartMode {
        match self {
            MipStart::Decoded(_) => MipStartMode::Decoded,
            MipStart::Relaxed(_) => MipStartMode::Relaxed,
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            MipStart::Decoded(x) => x.to_f64(),
            MipStart::Relaxed(v) => v.to_vec(),
        }
    }
}

/// Formats like C's `%.17g`.
pub fn format_g17(v: f64) -> Result<String> {
    const P: i32 = 17;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("cannot write {v} to a MIP start")));
    }
    if v == 0.0 {
        return Ok(if v.is_sign_negative() { "-0".into() } else { "0".into() });
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= P {
        let sign = if exp < 0 { '-' } else { '+' };
        Ok(format!("{}e{}{:02}", trim(mantissa), sign, exp.abs()))
    } else {
        Ok(trim(&format!("{:.*}", (P - 1 - exp) as usize, v)))
    }
}

pub fn format_mip_start(names: &[String], x: MipStart) -> Result<String> {
    let values = x.values();
    if names.len() != values.len() {
        return Err(Error::Dimension { expected: names.len(), got: values.len() });
    }
    let mut out = String::new();
    for (name, v) in names.iter().zip(values) {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Parameter(format!("invalid variable name {name:?}")));
        }
        writeln!(out, "{name} {}", format_g17(v)?).expect("string write");
    }
    Ok(out)
}

pub fn export_mip_start(x: MipStart, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let text = format_mip_start(names, x)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_mip_start(text: &str) -> Result<Vec<(String, f64)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut parts = line.split_whitespace();
            let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse { line: i + 1, message: "expected `name value`".into() });
            };
            let v = value
                .parse::<f64>()
                .map_err(|e| Error::Parse { line: i + 1, message: format!("bad value {value:?}: {e}") })?;
            Ok((name.to_string(), v))
        })
        .collect()
}
