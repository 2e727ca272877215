use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four exclusion dynamics, with its parameters.
///
/// Textual form: `ssep`, `pmm:n=4`, `bernstein:n=2,L=4`, `rpmm:l=2,L=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Ssep,
    /// Porous media model of order `n`.
    Pmm {
        n: usize,
    },
    /// Bernstein model: exactly `n` particles in a window of `l` sites.
    Bernstein {
        n: usize,
        l: usize,
    },
    /// Reduced porous media model of order `ell` with box parameter `l`.
    ReducedPmm {
        ell: usize,
        l: usize,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Ssep => Ok(()),
            ModelSpec::Pmm { n } if n >= 1 => Ok(()),
            ModelSpec::Pmm { .. } => Err(Error::InvalidModel("pmm requires n >= 1".into())),
            ModelSpec::Bernstein { n, l } if n <= l && l >= 1 => Ok(()),
            ModelSpec::Bernstein { n, l } => Err(Error::InvalidModel(format!(
                "bernstein requires 0 <= n <= L and L >= 1 (got n={n}, L={l})"
            ))),
            ModelSpec::ReducedPmm { ell, l } if ell <= l && l >= 1 => Ok(()),
            ModelSpec::ReducedPmm { ell, l } => Err(Error::InvalidModel(format!(
                "rpmm requires 0 <= l <= L and L >= 1 (got l={ell}, L={l})"
            ))),
        }
    }

    /// Length of the constraint windows (`L`, or `n` for the PMM, `0` for SSEP).
    pub fn window_len(&self) -> usize {
        match *self {
            ModelSpec::Ssep => 0,
            ModelSpec::Pmm { n } => n,
            ModelSpec::Bernstein { l, .. } | ModelSpec::ReducedPmm { l, .. } => l,
        }
    }

    /// The rate at node `x` reads sites `x − r ..= x + 1 + r` only.
    pub fn interaction_radius(&self) -> usize {
        self.window_len()
    }

    /// Smallest torus on which every window has distinct sites.
    pub fn min_sites(&self) -> usize {
        self.window_len() + 2
    }

    /// Degree of the equilibrium diffusivity as a polynomial in the density.
    pub fn diffusivity_degree(&self) -> usize {
        match *self {
            ModelSpec::Ssep => 0,
            ModelSpec::Pmm { n } => n,
            ModelSpec::Bernstein { l, .. } => l,
            ModelSpec::ReducedPmm { ell, .. } => ell,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Ssep => "ssep",
            ModelSpec::Pmm { .. } => "pmm",
            ModelSpec::Bernstein { .. } => "bernstein",
            ModelSpec::ReducedPmm { .. } => "rpmm",
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelSpec::Ssep => write!(f, "ssep"),
            ModelSpec::Pmm { n } => write!(f, "pmm:n={n}"),
            ModelSpec::Bernstein { n, l } => write!(f, "bernstein:n={n},L={l}"),
            ModelSpec::ReducedPmm { ell, l } => write!(f, "rpmm:l={ell},L={l}"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, params) = s.split_once(':').unwrap_or((s, ""));
        let mut n = None;
        let mut ell = None;
        let mut big_l = None;
        for item in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?}")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer in {item:?}")))?;
            let slot = match key.trim() {
                "n" => &mut n,
                "l" | "ell" => &mut ell,
                "L" => &mut big_l,
                other => return Err(Error::Parse(format!("unknown model parameter {other:?}"))),
            };
            if slot.replace(value).is_some() {
                return Err(Error::Parse(format!("parameter repeated in {s:?}")));
            }
        }
        let missing = |what: &str| Error::Parse(format!("{family} needs parameter {what}"));
        let unexpected = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Parse(format!("unexpected parameter for {family}")))
            }
        };
        let model = match family.to_ascii_lowercase().as_str() {
            "ssep" => {
                unexpected(n.is_none() && ell.is_none() && big_l.is_none())?;
                ModelSpec::Ssep
            }
            "pmm" => {
                unexpected(ell.is_none() && big_l.is_none())?;
                ModelSpec::Pmm {
                    n: n.ok_or_else(|| missing("n"))?,
                }
            }
            "bernstein" => {
                unexpected(ell.is_none())?;
                ModelSpec::Bernstein {
                    n: n.ok_or_else(|| missing("n"))?,
                    l: big_l.ok_or_else(|| missing("L"))?,
                }
            }
            "rpmm" => {
                unexpected(n.is_none())?;
                ModelSpec::ReducedPmm {
                    ell: ell.ok_or_else(|| missing("l"))?,
                    l: big_l.ok_or_else(|| missing("L"))?,
                }
            }
            other => return Err(Error::Parse(format!("unknown model family {other:?}"))),
        };
        model.validate()?;
        Ok(model)
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(value: ModelSpec) -> Self {
        value.to_string()
    }
}
