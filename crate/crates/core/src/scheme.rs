//! Scheme identifiers and their free parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Bfe,
    Imex2,
    Ee,
    Erk2p2,
    Erk2p1,
    L2a,
    L2b,
    Le,
    Sle,
    Sl2,
    Erbe,
}

impl SchemeId {
    /// Descending stability threshold, then the Rosenbrock scheme.
    pub const ALL: [SchemeId; 11] = [
        SchemeId::Bfe,
        SchemeId::Imex2,
        SchemeId::Ee,
        SchemeId::Erk2p2,
        SchemeId::Erk2p1,
        SchemeId::L2a,
        SchemeId::L2b,
        SchemeId::Le,
        SchemeId::Sle,
        SchemeId::Sl2,
        SchemeId::Erbe,
    ];

    /// Schemes with a closed-form stability function.
    pub const ANALYZED: [SchemeId; 10] = [
        SchemeId::Bfe,
        SchemeId::Imex2,
        SchemeId::Ee,
        SchemeId::Erk2p2,
        SchemeId::Erk2p1,
        SchemeId::L2a,
        SchemeId::L2b,
        SchemeId::Le,
        SchemeId::Sle,
        SchemeId::Sl2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Bfe => "bfe",
            SchemeId::Imex2 => "imex2",
            SchemeId::Ee => "ee",
            SchemeId::Erk2p2 => "erk2p2",
            SchemeId::Erk2p1 => "erk2p1",
            SchemeId::L2a => "l2a",
            SchemeId::L2b => "l2b",
            SchemeId::Le => "le",
            SchemeId::Sle => "sle",
            SchemeId::Sl2 => "sl2",
            SchemeId::Erbe => "erbe",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            SchemeId::Bfe | SchemeId::Ee | SchemeId::Le | SchemeId::Sle => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        SchemeId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == lower)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

pub const DEFAULT_C2: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 0.327;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec {
    pub id: SchemeId,
    /// Only for the exponential Runge–Kutta pair.
    pub c2: Option<f64>,
    /// Only for the stabilized second-order Lawson scheme.
    pub alpha: Option<f64>,
}

impl SchemeSpec {
    pub fn new(id: SchemeId) -> Self {
        let c2 = matches!(id, SchemeId::Erk2p1 | SchemeId::Erk2p2).then_some(DEFAULT_C2);
        let alpha = (id == SchemeId::Sl2).then_some(DEFAULT_ALPHA);
        Self { id, c2, alpha }
    }

    pub fn with_c2(mut self, c2: f64) -> Result<Self> {
        if self.c2.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} has no c2 parameter",
                self.id
            )));
        }
        if !(c2 > 0.0 && c2 <= 1.0) {
            return Err(Error::InvalidArgument(format!("c2 = {c2} outside (0, 1]")));
        }
        self.c2 = Some(c2);
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if self.alpha.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} has no alpha parameter",
                self.id
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} outside (0, 1]"
            )));
        }
        self.alpha = Some(alpha);
        Ok(self)
    }

    pub fn order(&self) -> u32 {
        self.id.order()
    }

    pub fn c2(&self) -> f64 {
        self.c2.unwrap_or(DEFAULT_C2)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }
}

impl From<SchemeId> for SchemeSpec {
    fn from(id: SchemeId) -> Self {
        SchemeSpec::new(id)
    }
}
