use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("count {0} is negative or not finite")]
    InvalidCount(f64),
    #[error("contingency table has a zero marginal; the statistic is undefined")]
    ZeroMarginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
    pub n: f64,
}

/// Upper tail of the chi-square distribution with one degree of freedom:
/// `P(X > x) = erfc(sqrt(x / 2))`.
pub fn chi_square_sf_1dof(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc((x / 2.0).sqrt())
}

fn check(counts: [f64; 4]) -> Result<(), StatsError> {
    match counts.into_iter().find(|c| !(c.is_finite() && *c >= 0.0)) {
        Some(c) => Err(StatsError::InvalidCount(c)),
        None => Ok(()),
    }
}

/// Pearson chi-square for `[[a, b], [c, d]]`, without continuity
/// correction.
pub fn chi_square_2x2(a: f64, b: f64, c: f64, d: f64) -> Result<ChiSquare, StatsError> {
    check([a, b, c, d])?;
    let n = a + b + c + d;
    let marginals = (a + b) * (c + d) * (a + c) * (b + d);
    if marginals == 0.0 {
        return Err(StatsError::ZeroMarginal);
    }
    let diff = a * d - b * c;
    let statistic = n * diff * diff / marginals;
    Ok(ChiSquare {
        statistic,
        p_value: chi_square_sf_1dof(statistic),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub ratio: f64,
    /// Set when a zero cell forced the +0.5 (Haldane-Anscombe) correction.
    pub corrected: bool,
}

/// `(a d) / (b c)` for `[[a, b], [c, d]]`. When any cell is zero, 0.5 is
/// added to every cell.
pub fn odds_ratio(a: f64, b: f64, c: f64, d: f64) -> Result<OddsRatio, StatsError> {
    check([a, b, c, d])?;
    let corrected = [a, b, c, d].contains(&0.0);
    let k = if corrected { 0.5 } else { 0.0 };
    Ok(OddsRatio {
        ratio: ((a + k) * (d + k)) / ((b + k) * (c + k)),
        corrected,
    })
}
