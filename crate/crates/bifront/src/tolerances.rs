use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Named numerical tolerances used across the crate.
///
/// Every field can be overridden by name (the CLI exposes this through
/// `--tol <name>=<value>`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    /// Dominance comparisons: values within `dom` are treated as equal.
    pub dom: f64,
    /// Constraint feasibility slack.
    pub feas: f64,
    /// LP optimality slack.
    pub opt: f64,
    /// Optimal-face membership slack.
    pub face: f64,
    /// Vertex merging radius in vertex enumeration.
    pub vert: f64,
    /// Projection optimality (distance) accuracy.
    pub proj: f64,
    /// Nonnegative least squares accuracy.
    pub nnls: f64,
    /// Certificate verification slack.
    pub cert: f64,
    /// Active-set detection tolerance.
    pub act: f64,
    /// Strict-positivity threshold for sampled moduli.
    pub pos: f64,
    /// Inward perturbation of lexicographic corner weights (reporting only).
    pub eps_lex: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dom: 0.0,
            feas: 1e-9,
            opt: 1e-9,
            face: 1e-7,
            vert: 1e-8,
            proj: 1e-9,
            nnls: 1e-9,
            cert: 1e-8,
            act: 1e-7,
            pos: 1e-6,
            eps_lex: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "dom" => self.dom = value,
            "feas" => self.feas = value,
            "opt" => self.opt = value,
            "face" => self.face = value,
            "vert" => self.vert = value,
            "proj" => self.proj = value,
            "nnls" => self.nnls = value,
            "cert" => self.cert = value,
            "act" => self.act = value,
            "pos" => self.pos = value,
            "eps_lex" => self.eps_lex = value,
            other => return Err(Error::UnknownTolerance(other.to_string())),
        }
        Ok(())
    }

    /// Name/value pairs in a stable order, for report output.
    pub fn named(&self) -> Vec<(String, f64)> {
        [
            ("dom", self.dom),
            ("feas", self.feas),
            ("opt", self.opt),
            ("face", self.face),
            ("vert", self.vert),
            ("proj", self.proj),
            ("nnls", self.nnls),
            ("cert", self.cert),
            ("act", self.act),
            ("pos", self.pos),
            ("eps_lex", self.eps_lex),
        ]
        .into_iter()
        .map(|(n, v)| (n.to_string(), v))
        .collect()
    }
}
