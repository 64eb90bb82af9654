//! Exponent tuple `(n, alpha, s, q, p, r)` and kernel selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which potential operator is in play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `gamma(n, alpha) |x|^(alpha - n)`.
    Riesz,
    /// Fourier multiplier `(1 + |xi|^2)^(-alpha/2)`.
    Bessel,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Riesz => "riesz",
            KernelKind::Bessel => "bessel",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riesz" => Ok(KernelKind::Riesz),
            "bessel" => Ok(KernelKind::Bessel),
            other => Err(Error::InvalidParams(format!("unknown kernel kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub alpha: f64,
    pub s: f64,
    pub q: f64,
    pub p: f64,
    pub r: f64,
}

impl Params {
    /// Builds and validates the tuple for the given kernel.
    pub fn new(n: usize, alpha: f64, s: f64, q: f64, p: f64, r: f64, kind: KernelKind) -> Result<Self> {
        let params = Self { n, alpha, s, q, p, r };
        params.validate(kind)?;
        Ok(params)
    }

    pub fn validate(&self, kind: KernelKind) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(1..=3).contains(&self.n) {
            return bad(format!("n = {} not in 1..=3", self.n));
        }
        for (name, v) in [("alpha", self.alpha), ("s", self.s), ("q", self.q), ("p", self.p), ("r", self.r)] {
            if !v.is_finite() {
                return bad(format!("{name} = {v} is not finite"));
            }
        }
        if self.s <= 1.0 {
            return bad(format!("s = {} must exceed 1", self.s));
        }
        let limit = self.n as f64 / self.s;
        let alpha_ok = match kind {
            KernelKind::Riesz => self.alpha > 0.0 && self.alpha < limit,
            KernelKind::Bessel => self.alpha > 0.0 && self.alpha <= limit,
        };
        if !alpha_ok {
            return bad(format!("alpha = {} outside the admissible range for n/s = {limit} ({kind})", self.alpha));
        }
        if self.q < 1.0 {
            return bad(format!("q = {} must be at least 1", self.q));
        }
        if self.p <= 1.0 {
            return bad(format!("p = {} must exceed 1", self.p));
        }
        if !(self.r > 0.0 && self.r <= self.s) {
            return bad(format!("r = {} must lie in (0, s]", self.r));
        }
        Ok(())
    }

    /// Conjugate exponent `s' = s / (s - 1)`.
    pub fn s_conj(&self) -> f64 {
        self.s / (self.s - 1.0)
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `n - alpha s`, the homogeneity degree of capacity under dilation.
    pub fn capacity_degree(&self) -> f64 {
        self.n as f64 - self.alpha * self.s
    }

    /// Decay exponent `(n - alpha s) / (s - 1)` of the Wolff potential of a point mass.
    pub fn wolff_exponent(&self) -> f64 {
        self.capacity_degree() / (self.s - 1.0)
    }

    /// The `r` that pairs with a given `q < s` for the weighted `L^s` spaces.
    pub fn r_for_otilde(&self, q: f64) -> f64 {
        self.s * (self.s - q) / ((self.s - 1.0) * q)
    }

    pub fn with_q(&self, q: f64) -> Self {
        Self { q, ..*self }
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..*self }
    }
}
