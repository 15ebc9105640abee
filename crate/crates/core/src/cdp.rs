//! Over-collateralized debt positions: health factors, mint caps and the
//! single-step full liquidation model.
//!
//! Position math is pure; interest accrual and ledger effects of minting
//! live in the simulation loop ([`crate::sim`]) and the supply ledger
//! ([`crate::ledger`]).

use serde::{Deserialize, Serialize};

use crate::fixed::{fx, Fixed};

/// Liquidation bonus applied when a scenario does not override it.
pub fn default_liquidation_bonus() -> Fixed {
    fx("0.05")
}

/// A collateralized debt position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub owner: String,
    pub collateral_value: Fixed,
    /// Fraction of collateral value counted toward solvency, in (0, 1].
    pub liquidation_threshold: Fixed,
    pub debt: Fixed,
}

impl Position {
    pub fn validate(&self) -> Result<(), CdpError> {
        if self.collateral_value.is_negative()
            || self.debt.is_negative()
            || !self.liquidation_threshold.is_positive()
            || self.liquidation_threshold > Fixed::ONE
        {
            return Err(CdpError::InvalidPosition {
                owner: self.owner.clone(),
            });
        }
        Ok(())
    }
}

/// Health of a position: `collateral * threshold / debt`, or
/// [`HealthFactor::Unleveraged`] when there is no debt to be unhealthy
/// against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HealthFactor {
    Unleveraged,
    Ratio(Fixed),
}

impl HealthFactor {
    /// A position is liquidatable strictly below 1; at exactly 1 the owner
    /// is only at risk if value drops further.
    pub fn is_liquidatable(self) -> bool {
        match self {
            HealthFactor::Unleveraged => false,
            HealthFactor::Ratio(hf) => hf < Fixed::ONE,
        }
    }
}

/// Result of a single-step full liquidation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidationOutcome {
    pub debt_repaid: Fixed,
    pub collateral_seized: Fixed,
    pub liquidator_profit: Fixed,
    /// Shortfall absorbed by the protocol when collateral no longer covers
    /// the debt.
    pub bad_debt: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CdpError {
    #[error("position `{owner}` has out-of-range fields")]
    InvalidPosition { owner: String },
    #[error("mint would push debt {attempted} beyond the LTV cap {cap} on {collateral} collateral")]
    ExceedsLtv {
        attempted: Fixed,
        cap: Fixed,
        collateral: Fixed,
    },
    #[error("position is not liquidatable (health factor {hf})")]
    NotLiquidatable { hf: Fixed },
}

/// Health factor of a position.
pub fn health_factor(position: &Position) -> HealthFactor {
    if position.debt.is_zero() {
        return HealthFactor::Unleveraged;
    }
    let hf = position
        .collateral_value
        .checked_mul_div(position.liquidation_threshold, position.debt)
        .unwrap_or(Fixed::MAX);
    HealthFactor::Ratio(hf)
}

/// Mints `amount` of new debt against the position, capped so that total
/// debt never exceeds `collateral_value * ltv_cap`.
pub fn mint(position: &Position, amount: Fixed, ltv_cap: Fixed) -> Result<Position, CdpError> {
    position.validate()?;
    if amount.is_negative() {
        return Err(CdpError::InvalidPosition {
            owner: position.owner.clone(),
        });
    }
    let new_debt = position.debt + amount;
    let max_debt = position
        .collateral_value
        .checked_mul(ltv_cap)
        .unwrap_or(Fixed::MAX);
    if new_debt > max_debt {
        return Err(CdpError::ExceedsLtv {
            attempted: new_debt,
            cap: ltv_cap,
            collateral: position.collateral_value,
        });
    }
    Ok(Position {
        debt: new_debt,
        ..position.clone()
    })
}

/// Liquidates an unhealthy position in one step: the full debt is repaid,
/// the liquidator seizes collateral worth up to `debt * (1 + bonus)`, and
/// any uncovered remainder is recorded as bad debt.
pub fn liquidate(position: &Position, bonus: Fixed) -> Result<LiquidationOutcome, CdpError> {
    position.validate()?;
    let hf = health_factor(position);
    if !hf.is_liquidatable() {
        let hf = match hf {
            HealthFactor::Unleveraged => Fixed::MAX,
            HealthFactor::Ratio(v) => v,
        };
        return Err(CdpError::NotLiquidatable { hf });
    }
    let debt = position.debt;
    let target = debt
        .checked_mul(Fixed::ONE + bonus)
        .unwrap_or(position.collateral_value);
    let collateral_seized = target.min(position.collateral_value);
    let liquidator_profit = (collateral_seized - debt).max(Fixed::ZERO);
    let bad_debt = (debt - position.collateral_value).max(Fixed::ZERO);
    Ok(LiquidationOutcome {
        debt_repaid: debt,
        collateral_seized,
        liquidator_profit,
        bad_debt,
    })
}
