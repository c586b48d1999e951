//! Argument types accepted both as command-line strings and as descriptor JSON values.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elliptic::{Lattice, LatticeRef, LatticeSpec, C64};
use crate::error::{Error, Result};
use crate::operators::parse_quad;

/// A lattice given by preset name, inline JSON, or path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeArg {
    Spec(LatticeSpec),
    Text(String),
}

impl Default for LatticeArg {
    fn default() -> Self {
        LatticeArg::Text("generic".into())
    }
}

pub const PRESETS: [(&str, [f64; 2], [f64; 2]); 3] = [
    ("generic", [0.5, 0.0], [0.2, 0.35]),
    ("rectangular", [0.5, 0.0], [0.0, 0.3]),
    ("lemniscatic", [0.5, 0.0], [0.0, 0.5]),
];

impl LatticeArg {
    /// Half-periods with presets and files resolved.
    pub fn spec(&self) -> Result<LatticeSpec> {
        match self {
            LatticeArg::Spec(s) => Ok(*s),
            LatticeArg::Text(t) => {
                let t = t.trim();
                if let Some((_, o1, o3)) = PRESETS.iter().find(|(name, ..)| *name == t) {
                    return Ok(LatticeSpec { omega1: *o1, omega3: *o3 });
                }
                let text = if t.starts_with('{') {
                    t.to_string()
                } else {
                    std::fs::read_to_string(t)
                        .map_err(|e| Error::Schema(format!("lattice {t:?} is neither a preset, inline JSON nor a readable file: {e}")))?
                };
                serde_json::from_str(&text).map_err(|e| Error::Schema(format!("lattice JSON: {e}")))
            }
        }
    }

    pub fn resolve(&self) -> Result<LatticeRef> {
        let spec = self.spec()?;
        Lattice::from_spec(&spec).map(Arc::new).map_err(|e| Error::Schema(e.to_string()))
    }
}

impl FromStr for LatticeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(LatticeArg::Text(s.to_string()))
    }
}

/// A complex number written `re,im` (or `re`) on the command line and `[re, im]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ComplexRepr", into = "[f64; 2]")]
pub struct ComplexArg(pub C64);

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Pair([f64; 2]),
    Real(f64),
}

impl From<ComplexRepr> for ComplexArg {
    fn from(r: ComplexRepr) -> Self {
        match r {
            ComplexRepr::Pair([a, b]) => ComplexArg(C64::new(a, b)),
            ComplexRepr::Real(a) => ComplexArg(C64::new(a, 0.0)),
        }
    }
}

impl From<ComplexArg> for [f64; 2] {
    fn from(c: ComplexArg) -> Self {
        [c.0.re, c.0.im]
    }
}

impl FromStr for ComplexArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        match parts.as_slice() {
            [re] => Ok(ComplexArg(C64::new(num(re)?, 0.0))),
            [re, im] => Ok(ComplexArg(C64::new(num(re)?, num(im)?))),
            _ => Err(format!("expected `re` or `re,im`, got {s:?}")),
        }
    }
}

impl fmt::Display for ComplexArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0.re, self.0.im)
    }
}

/// Four reals written `a,b,c,d` on the command line and `[a, b, c, d]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuadArg(pub [f64; 4]);

impl FromStr for QuadArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_quad(s).map(QuadArg)
    }
}

/// Exponent vectors separated by `;` on the command line, a list of quadruples in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainArg(pub Vec<[f64; 4]>);

impl FromStr for ChainArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(';')
            .filter(|t| !t.trim().is_empty())
            .map(parse_quad)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ChainArg)
    }
}

/// Energy grid: `lin:a:b:n` (real, endpoints included), `seg:re0,im0:re1,im1:n`
/// (complex segment), or an explicit list of energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridArg {
    Points(Vec<ComplexArg>),
    Text(String),
}

impl GridArg {
    pub fn energies(&self) -> Result<Vec<C64>> {
        match self {
            GridArg::Points(p) => Ok(p.iter().map(|c| c.0).collect()),
            GridArg::Text(t) => parse_grid(t),
        }
    }
}

fn linspace(a: C64, b: C64, n: usize) -> Vec<C64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|j| a + (b - a) * (j as f64 / (n - 1) as f64)).collect(),
    }
}

fn parse_grid(t: &str) -> Result<Vec<C64>> {
    let bad = |m: String| Error::Schema(format!("grid {t:?}: {m}"));
    let parts: Vec<&str> = t.split(':').collect();
    let count = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
    match parts.as_slice() {
        ["lin", a, b, n] => {
            let a: f64 = a.trim().parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            let b: f64 = b.trim().parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            Ok(linspace(C64::new(a, 0.0), C64::new(b, 0.0), count(n)?))
        }
        ["seg", a, b, n] => {
            let a: ComplexArg = a.parse().map_err(bad)?;
            let b: ComplexArg = b.parse().map_err(bad)?;
            Ok(linspace(a.0, b.0, count(n)?))
        }
        _ => Err(bad("expected lin:a:b:n or seg:re0,im0:re1,im1:n".into())),
    }
}

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_grid(s).map_err(|e| e.to_string())?;
        Ok(GridArg::Text(s.to_string()))
    }
}
