//! Gap expansion tester on top of a maintained walk series.
//!
//! A graph is accepted when every return probability `T^{2l}[v][v]` is at
//! most `(1/n)(1 + 2/n)`; that value is the collision probability of two
//! independent `l`-step walks from `v`.

use num_traits::{One, Signed, Zero};

use crate::dyncore::DynState;
use crate::error::{Error, Result};
use crate::numerics::{fmt_q, q, qi, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TesterConfig {
    /// Spectral threshold of the yes case, in `(0, 1)`.
    pub alpha: Q,
    pub d: usize,
    /// Walk length.
    pub ell: usize,
}

impl TesterConfig {
    /// Uses the default walk length `ceil(ln n / (8 (1 - alpha)^2))`.
    pub fn new(alpha: Q, d: usize, n: usize) -> Result<Self> {
        let ell = default_walk_length(&alpha, n)?;
        TesterConfig::with_walk_length(alpha, d, ell)
    }

    pub fn with_walk_length(alpha: Q, d: usize, ell: usize) -> Result<Self> {
        if !alpha.is_positive() || alpha >= Q::one() {
            return Err(Error::Config(format!("alpha = {} must lie strictly between 0 and 1", fmt_q(&alpha))));
        }
        if ell == 0 {
            return Err(Error::Config("walk length must be at least 1".into()));
        }
        Ok(TesterConfig { alpha, d, ell })
    }

    /// `1 - alpha`.
    pub fn gap(&self) -> Q {
        Q::one() - &self.alpha
    }

    /// No-case threshold `1 - (1 - alpha)^2 / 5000`.
    pub fn alpha_prime(&self) -> Q {
        let g = self.gap();
        Q::one() - &g * &g / qi(5000)
    }

    /// Series degree needed to read `T^{2l}`.
    pub fn required_degree(&self) -> usize {
        4 * self.ell
    }
}

pub fn default_walk_length(alpha: &Q, n: usize) -> Result<usize> {
    if !alpha.is_positive() || *alpha >= Q::one() {
        return Err(Error::Config(format!("alpha = {} must lie strictly between 0 and 1", fmt_q(alpha))));
    }
    let gap = 1.0 - rational_to_f64(alpha);
    let raw = (n.max(1) as f64).ln() / (8.0 * gap * gap);
    Ok((raw.ceil() as usize).max(1))
}

fn rational_to_f64(r: &Q) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// `(1/n)(1 + 2/n)`.
pub fn threshold(n: usize) -> Q {
    let n = n as i64;
    q(1, n) * (qi(1) + q(2, n))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub accept: bool,
    /// First vertex whose return probability exceeds the threshold.
    pub witness: Option<(usize, Q)>,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.witness {
            None => write!(f, "expansion: accept"),
            Some((v, value)) => write!(f, "expansion: reject witness={v} value={}", fmt_q(value)),
        }
    }
}

/// Scans every diagonal entry of `T^{2l}`.
///
/// In bits mode the state must certify an error of at most `1/n^3`,
/// otherwise the query is refused.
pub fn expansion_query(state: &DynState, cfg: &TesterConfig) -> Result<Verdict> {
    let n = state.n();
    if state.max_degree() < cfg.required_degree() {
        return Err(Error::Contract(format!(
            "walk length {} needs series degree {}, state keeps {}",
            cfg.ell,
            cfg.required_degree(),
            state.max_degree()
        )));
    }
    let err = state.error_bound();
    if !err.is_zero() {
        let tolerance = Q::new(1.into(), num_traits::pow(num_bigint::BigInt::from(n.max(1)), 3));
        if err > tolerance {
            return Err(Error::Refused(format!("error bound {} exceeds 1/n^3; refresh needed", fmt_q(&err))));
        }
    }
    let limit = threshold(n);
    for v in 0..n {
        let value = state.read_power_entry(v, v, 2 * cfg.ell)?;
        if value > limit {
            return Ok(Verdict { accept: false, witness: Some((v, value)) });
        }
    }
    Ok(Verdict { accept: true, witness: None })
}
