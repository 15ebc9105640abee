//! Ordinal risk scoring: a 3x3 likelihood/consequence grid and the
//! built-in register of issuance risks with their mitigations.

use serde::{Deserialize, Serialize};

/// How likely an undesirable outcome is. Ordered `Low < Medium < High`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Likelihood {
    /// Not expected to occur (A).
    Low,
    /// May foreseeably occur (B).
    Medium,
    /// Certain to occur (C).
    High,
}

impl Likelihood {
    pub fn letter(self) -> char {
        match self {
            Likelihood::Low => 'A',
            Likelihood::Medium => 'B',
            Likelihood::High => 'C',
        }
    }
}

/// How severe the impact to systemic health is. Ordered `Low < Medium < High`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Consequence {
    /// Marginal, temporary impact (1).
    Low,
    /// Considerable, temporary impact (2).
    Medium,
    /// Existential impact (3).
    High,
}

impl Consequence {
    pub fn digit(self) -> u8 {
        match self {
            Consequence::Low => 1,
            Consequence::Medium => 2,
            Consequence::High => 3,
        }
    }
}

/// Colour tier of a grid cell, ordered from most benign to most severe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskTier {
    Blue,
    Green,
    Yellow,
    Orange,
    Red,
}

/// A scored cell of the grid, e.g. `C2` / Orange.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskCell {
    pub code: String,
    pub tier: RiskTier,
}

/// A likelihood/consequence pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskRating {
    pub likelihood: Likelihood,
    pub consequence: Consequence,
}

impl RiskRating {
    pub fn new(likelihood: Likelihood, consequence: Consequence) -> RiskRating {
        RiskRating {
            likelihood,
            consequence,
        }
    }
}

/// A named risk with its ratings before and after mitigation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskRegisterEntry {
    pub name: String,
    pub unmitigated: RiskRating,
    pub interim_mitigations: Vec<String>,
    pub enduring_mitigations: Vec<String>,
    pub mitigated: RiskRating,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RiskError {
    /// Mitigation may never worsen a rating on either axis.
    #[error("risk entry `{name}` rates mitigated above unmitigated")]
    InvalidEntry { name: String },
}

/// Scores a likelihood/consequence pair onto the grid. Total: every pair
/// maps to exactly one cell.
pub fn score(likelihood: Likelihood, consequence: Consequence) -> RiskCell {
    use Consequence as C;
    use Likelihood as L;
    let tier = match (likelihood, consequence) {
        (L::Low, C::Low) => RiskTier::Blue,
        (L::Low, C::Medium) | (L::Medium, C::Low) => RiskTier::Green,
        (L::Low, C::High) | (L::Medium, C::Medium) | (L::High, C::Low) => RiskTier::Yellow,
        (L::Medium, C::High) | (L::High, C::Medium) => RiskTier::Orange,
        (L::High, C::High) => RiskTier::Red,
    };
    RiskCell {
        code: format!("{}{}", likelihood.letter(), consequence.digit()),
        tier,
    }
}

impl RiskRegisterEntry {
    /// Checks that mitigation is monotone non-increasing on both axes.
    pub fn validate(&self) -> Result<(), RiskError> {
        if self.mitigated.likelihood > self.unmitigated.likelihood
            || self.mitigated.consequence > self.unmitigated.consequence
        {
            return Err(RiskError::InvalidEntry {
                name: self.name.clone(),
            });
        }
        Ok(())
    }
}

/// Scores an entry before and after mitigation.
pub fn apply_mitigations(entry: &RiskRegisterEntry) -> Result<(RiskCell, RiskCell), RiskError> {
    entry.validate()?;
    Ok((
        score(entry.unmitigated.likelihood, entry.unmitigated.consequence),
        score(entry.mitigated.likelihood, entry.mitigated.consequence),
    ))
}

/// The built-in register covering the four issuance risks. Shipped as data
/// so scenario files can extend it without code changes.
pub fn default_register() -> Vec<RiskRegisterEntry> {
    use Consequence as C;
    use Likelihood as L;
    let entry = |name: &str,
                 unmit: (L, C),
                 interim: &[&str],
                 enduring: &[&str],
                 mit: (L, C)| RiskRegisterEntry {
        name: name.to_string(),
        unmitigated: RiskRating::new(unmit.0, unmit.1),
        interim_mitigations: interim.iter().map(|s| s.to_string()).collect(),
        enduring_mitigations: enduring.iter().map(|s| s.to_string()).collect(),
        mitigated: RiskRating::new(mit.0, mit.1),
    };
    vec![
        entry(
            "Liquidation Risk",
            (L::High, C::Medium),
            &["System Health Monitoring"],
            &["Liquidation/Redistribution Infrastructure"],
            (L::Low, C::Medium),
        ),
        entry(
            "Operations Risk",
            (L::Medium, C::High),
            &["Multisignature Safe", "Timelock"],
            &["Immutable, Permissionless"],
            (L::Low, C::Medium),
        ),
        entry(
            "Cost of Borrowing Risk",
            (L::High, C::Medium),
            &["Excessive Rates", "Credit Limit"],
            &["Active Monitoring Infrastructure", "Endogenous Yield"],
            (L::Medium, C::Medium),
        ),
        entry(
            "Unbacked Circulation Risk",
            (L::Medium, C::High),
            &["Credit Limit"],
            &["Active Monitoring Infrastructure", "Endogenous Yield"],
            (L::Low, C::High),
        ),
    ]
}

/// A register row with both scored cells, ready for report rendering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredRegisterRow {
    pub name: String,
    pub unmitigated: RiskRating,
    pub unmitigated_cell: RiskCell,
    pub interim_mitigations: Vec<String>,
    pub enduring_mitigations: Vec<String>,
    pub mitigated: RiskRating,
    pub mitigated_cell: RiskCell,
}

/// Scores a whole register, preserving row order.
pub fn score_register(entries: &[RiskRegisterEntry]) -> Result<Vec<ScoredRegisterRow>, RiskError> {
    entries
        .iter()
        .map(|e| {
            let (unmit, mit) = apply_mitigations(e)?;
            Ok(ScoredRegisterRow {
                name: e.name.clone(),
                unmitigated: e.unmitigated,
                unmitigated_cell: unmit,
                interim_mitigations: e.interim_mitigations.clone(),
                enduring_mitigations: e.enduring_mitigations.clone(),
                mitigated: e.mitigated,
                mitigated_cell: mit,
            })
        })
        .collect()
}
