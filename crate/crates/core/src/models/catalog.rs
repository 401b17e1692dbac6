//! Named built-in functions used by model configs.
//!
//! Vector fields (`F`, `b`) apply a catalog entry to each coordinate;
//! scalar fields (`G`, `r`) apply it to the Euclidean norm of the point.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FnSpec {
    /// `x ↦ c x`
    Linear(f64),
    /// `x ↦ c0 + c1 x`
    Affine(f64, f64),
    /// `x ↦ v`
    Const(f64),
}

impl FnSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FnSpec::Linear(c) => c * x,
            FnSpec::Affine(c0, c1) => c0 + c1 * x,
            FnSpec::Const(v) => v,
        }
    }

    /// Coordinatewise application.
    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.eval(v)).collect()
    }

    /// Application to `|x|`.
    pub fn eval_norm(&self, x: &[f64]) -> f64 {
        self.eval(norm(x))
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn parse_params(name: &str, s: &str, n: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{name}: cannot parse '{t}' as a number")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(Error::Config(format!(
            "{name} takes {n} parameter(s), got {}",
            vals.len()
        )));
    }
    if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!(
            "{name}: parameter {v} is not finite"
        )));
    }
    Ok(vals)
}

impl FromStr for FnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("function '{s}' must look like name:params")))?;
        match name.trim() {
            "linear" => Ok(FnSpec::Linear(parse_params("linear", params, 1)?[0])),
            "affine" => {
                let p = parse_params("affine", params, 2)?;
                Ok(FnSpec::Affine(p[0], p[1]))
            }
            "const" => Ok(FnSpec::Const(parse_params("const", params, 1)?[0])),
            other => Err(Error::Config(format!(
                "unknown function '{other}' (known: linear:c, affine:c0,c1, const:v)"
            ))),
        }
    }
}

impl fmt::Display for FnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FnSpec::Linear(c) => write!(f, "linear:{c}"),
            FnSpec::Affine(a, b) => write!(f, "affine:{a},{b}"),
            FnSpec::Const(v) => write!(f, "const:{v}"),
        }
    }
}

impl serde::Serialize for FnSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        let f: FnSpec = "affine:1,-1".parse().unwrap();
        assert_eq!(f.eval(3.0), -2.0);
        assert_eq!("linear:0.25".parse::<FnSpec>().unwrap().eval(4.0), 1.0);
        assert_eq!(
            "const:2".parse::<FnSpec>().unwrap().eval_norm(&[3.0, 4.0]),
            2.0
        );
        assert_eq!(FnSpec::Linear(2.0).eval_vec(&[1.0, -1.0]), vec![2.0, -2.0]);
    }

    #[test]
    fn round_trip() {
        for s in ["linear:0.25", "affine:1,-1", "const:1"] {
            assert_eq!(s.parse::<FnSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for s in ["linear", "cubic:1", "affine:1", "const:x", "linear:inf"] {
            assert!(s.parse::<FnSpec>().is_err(), "{s}");
        }
    }
}
