//! Credit-line sizing: rate-curve comparison, its closed form at optimal
//! utilization, absorption budgets, drawdown-bounded sizing and the
//! endogenous-yield accounting that feeds earned interest back to pool
//! liquidity.
//!
//! A credit line to an external lending market is safe while borrowing
//! from that market costs at least what the core facilitator charges for
//! the same liquidity: `external_rate(u) >= controller_rate(x * u)` at
//! every utilization `u`, where `x` is the line's size relative to the
//! core pool's counterassets. Otherwise borrowers could extract liquidity
//! from the external line at a discount to the facilitator's own users.

use serde::{Deserialize, Serialize};

use crate::fixed::{fx, Fixed};
use crate::rates::{controller_rate, e_from_credit, piecewise_rate, ControllerParams,
    PiecewiseRateParams, RateError};

/// Number of utilization samples when a scenario does not override it.
pub const DEFAULT_GRID_POINTS: usize = 101;

/// Upper end of the default utilization grid; the controller diverges
/// toward full absorption, so the grid stops short of 1.
pub fn default_u_max() -> Fixed {
    fx("0.99")
}

/// Which kind of facilitator a credit line funds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilitatorKind {
    B2fLendingMarket,
    B2sPerpsVault,
}

/// A sized credit line with its pricing basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreditLine {
    pub facilitator_kind: FacilitatorKind,
    pub size: Fixed,
    /// Size relative to core-pool counterassets; lending markets only.
    pub size_fraction: Option<Fixed>,
    pub cost_basis: String,
}

/// One sampled point of the margin curve,
/// `external_rate(u) - controller_rate(x * u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub utilization: Fixed,
    pub margin: Fixed,
}

/// Outcome of the rate-curve comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnderwritingVerdict {
    /// True iff the margin is non-negative at every sampled utilization.
    pub satisfied: bool,
    /// Utilization minimizing the margin (ties resolve to the largest).
    pub binding_utilization: Fixed,
    pub min_margin: Fixed,
    pub margin_curve: Vec<MarginPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnderwriteError {
    #[error("{what} (got {value})")]
    OutOfRange { what: &'static str, value: Fixed },
    #[error("sizing arithmetic overflows the fixed-point range")]
    Overflow,
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// `points` evenly spaced utilization samples on `[0, u_max]`.
pub fn default_u_grid(points: usize, u_max: Fixed) -> Vec<Fixed> {
    let n = points.max(2);
    (0..n)
        .map(|i| {
            u_max
                .checked_mul_div(
                    Fixed::from_int(i as i64),
                    Fixed::from_int((n - 1) as i64),
                )
                .expect("grid arithmetic")
        })
        .collect()
}

fn margin_at(
    u: Fixed,
    x: Fixed,
    external: &PiecewiseRateParams,
    controller: &ControllerParams,
) -> Result<Fixed, UnderwriteError> {
    let cost = piecewise_rate(u, external)?;
    let e = e_from_credit(x, u)?;
    let yield_ = controller_rate(e, controller)?;
    Ok(cost - yield_)
}

/// Evaluates the underwriting condition for a credit line of relative
/// size `x` against an external rate curve, over the given utilization
/// grid. The curve's own branch point is always sampled alongside the
/// grid, and the minimum is refined by shrinking a bracket around the
/// worst sample, so condition violations confined to a sliver between
/// grid points are still caught.
pub fn check_condition(
    x: Fixed,
    external: &PiecewiseRateParams,
    controller: &ControllerParams,
    u_grid: &[Fixed],
) -> Result<UnderwritingVerdict, UnderwriteError> {
    if x.is_negative() {
        return Err(UnderwriteError::OutOfRange {
            what: "credit fraction must be non-negative",
            value: x,
        });
    }
    if u_grid.is_empty() {
        return Err(UnderwriteError::OutOfRange {
            what: "utilization grid must not be empty",
            value: Fixed::ZERO,
        });
    }
    external.validate()?;
    controller.validate()?;

    let mut samples: Vec<Fixed> = u_grid.to_vec();
    let grid_max = *samples.iter().max().expect("non-empty grid");
    if external.u_optimal <= grid_max {
        samples.push(external.u_optimal);
    }
    samples.sort();
    samples.dedup();

    let mut curve = Vec::with_capacity(samples.len());
    let mut best = (Fixed::ZERO, Fixed::MAX);
    let mut best_index = 0usize;
    for (i, &u) in samples.iter().enumerate() {
        let margin = margin_at(u, x, external, controller)?;
        curve.push(MarginPoint {
            utilization: u,
            margin,
        });
        if margin <= best.1 {
            best = (u, margin);
            best_index = i;
        }
    }

    // Bracket-shrink refinement around the worst sample.
    let mut lo = samples[best_index.saturating_sub(1)];
    let mut hi = samples[(best_index + 1).min(samples.len() - 1)];
    for _ in 0..64 {
        let width = hi - lo;
        if width <= Fixed::from_raw(2) {
            break;
        }
        let third = width.checked_div(Fixed::from_int(3)).expect("third");
        let left = lo + third;
        let right = hi - third;
        let m_left = margin_at(left, x, external, controller)?;
        let m_right = margin_at(right, x, external, controller)?;
        if m_left <= best.1 {
            best = (left, m_left);
        }
        if m_right < best.1 || (m_right == best.1 && right > best.0) {
            best = (right, m_right);
        }
        if m_left <= m_right {
            hi = right;
        } else {
            lo = left;
        }
    }

    Ok(UnderwritingVerdict {
        satisfied: !best.1.is_negative(),
        binding_utilization: best.0,
        min_margin: best.1,
        margin_curve: curve,
    })
}

/// Largest safe credit fraction when utilization holds at optimal, using
/// the default controller gain: solves
/// `slope1 = gain * (X * u_opt) / (1 - X * u_opt)` for `X`.
pub fn max_credit_fraction(slope1: Fixed, u_optimal: Fixed) -> Result<Fixed, UnderwriteError> {
    max_credit_fraction_with_gain(slope1, u_optimal, ControllerParams::default().gain)
}

/// [`max_credit_fraction`] generalized to an arbitrary controller gain:
/// `X = slope1 / (u_opt * (gain + slope1))`.
pub fn max_credit_fraction_with_gain(
    slope1: Fixed,
    u_optimal: Fixed,
    gain: Fixed,
) -> Result<Fixed, UnderwriteError> {
    if slope1.is_negative() {
        return Err(UnderwriteError::OutOfRange {
            what: "slope1 must be non-negative",
            value: slope1,
        });
    }
    if !u_optimal.is_positive() || u_optimal >= Fixed::ONE {
        return Err(UnderwriteError::OutOfRange {
            what: "u_optimal must lie in (0, 1)",
            value: u_optimal,
        });
    }
    if !gain.is_positive() {
        return Err(UnderwriteError::OutOfRange {
            what: "controller gain must be positive",
            value: gain,
        });
    }
    slope1
        .checked_mul_div(Fixed::ONE, gain + slope1)
        .and_then(|xu| xu.checked_mul_div(Fixed::ONE, u_optimal))
        .ok_or(UnderwriteError::Overflow)
}

/// Absolute credit line for a fraction of the core pool's counterassets.
pub fn credit_line_amount(x: Fixed, counterassets: Fixed) -> Result<Fixed, UnderwriteError> {
    if x.is_negative() || counterassets.is_negative() {
        return Err(UnderwriteError::OutOfRange {
            what: "inputs must be non-negative",
            value: x.min(counterassets),
        });
    }
    x.checked_mul(counterassets)
        .ok_or(UnderwriteError::Overflow)
}

/// Sizes a perps-vault credit line so that the worst historical vault
/// drawdown cannot push more than `absorbable` unbacked stablecoins into
/// circulation: `absorbable / worst_case_drawdown`.
pub fn b2s_credit_size(
    absorbable: Fixed,
    worst_case_drawdown: Fixed,
) -> Result<Fixed, UnderwriteError> {
    if !worst_case_drawdown.is_positive() || worst_case_drawdown > Fixed::ONE {
        return Err(UnderwriteError::OutOfRange {
            what: "worst_case_drawdown must lie in (0, 1]",
            value: worst_case_drawdown,
        });
    }
    if absorbable.is_negative() {
        return Err(UnderwriteError::OutOfRange {
            what: "absorbable must be non-negative",
            value: absorbable,
        });
    }
    absorbable
        .checked_mul_div(Fixed::ONE, worst_case_drawdown)
        .ok_or(UnderwriteError::Overflow)
}

/// How many stablecoins the core pool can absorb before the controller's
/// rate reaches `target_rate`: inverts the transfer function to
/// `E = target / (gain + target)` and scales by the counterasset reserve.
pub fn absorbable_liquidity(
    target_rate: Fixed,
    controller: &ControllerParams,
    counterassets: Fixed,
) -> Result<Fixed, UnderwriteError> {
    controller.validate()?;
    if target_rate.is_negative() || counterassets.is_negative() {
        return Err(UnderwriteError::OutOfRange {
            what: "inputs must be non-negative",
            value: target_rate.min(counterassets),
        });
    }
    let e = target_rate
        .checked_mul_div(Fixed::ONE, controller.gain + target_rate)
        .ok_or(UnderwriteError::Overflow)?;
    counterassets.checked_mul(e).ok_or(UnderwriteError::Overflow)
}

/// Component-level endogenous-yield accounting: interest earned on the
/// credit line (net of the reserve factor) plus interest paid on
/// facilitator-issued supply, directed at the core pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndogenousYieldBreakdown {
    pub credit_borrowed: Fixed,
    pub external_rate: Fixed,
    pub reserve_factor: Fixed,
    pub credit_interest_gross: Fixed,
    /// Credit interest kept after the external protocol's reserve cut.
    pub credit_interest_net: Fixed,
    pub lend_supply: Fixed,
    pub lend_rate: Fixed,
    pub lend_interest: Fixed,
    /// Total yearly flow directed to pool liquidity.
    pub total_directed: Fixed,
    pub pool_tvl: Fixed,
    /// `total_directed / pool_tvl`, as an annual rate.
    pub pool_yield: Fixed,
}

/// Computes the full endogenous-yield breakdown.
pub fn endogenous_yield_breakdown(
    credit_borrowed: Fixed,
    external_rate: Fixed,
    reserve_factor: Fixed,
    lend_supply: Fixed,
    lend_rate: Fixed,
    pool_tvl: Fixed,
) -> Result<EndogenousYieldBreakdown, UnderwriteError> {
    if !pool_tvl.is_positive() {
        return Err(UnderwriteError::OutOfRange {
            what: "pool_tvl must be positive",
            value: pool_tvl,
        });
    }
    if reserve_factor.is_negative() || reserve_factor > Fixed::ONE {
        return Err(UnderwriteError::OutOfRange {
            what: "reserve_factor must lie in [0, 1]",
            value: reserve_factor,
        });
    }
    let credit_interest_gross = credit_borrowed
        .checked_mul(external_rate)
        .ok_or(UnderwriteError::Overflow)?;
    let credit_interest_net = credit_interest_gross
        .checked_mul(Fixed::ONE - reserve_factor)
        .ok_or(UnderwriteError::Overflow)?;
    let lend_interest = lend_supply
        .checked_mul(lend_rate)
        .ok_or(UnderwriteError::Overflow)?;
    let total_directed = credit_interest_net + lend_interest;
    let pool_yield = total_directed
        .checked_mul_div(Fixed::ONE, pool_tvl)
        .ok_or(UnderwriteError::Overflow)?;
    Ok(EndogenousYieldBreakdown {
        credit_borrowed,
        external_rate,
        reserve_factor,
        credit_interest_gross,
        credit_interest_net,
        lend_supply,
        lend_rate,
        lend_interest,
        total_directed,
        pool_tvl,
        pool_yield,
    })
}

/// Annual pool yield sustained by directing credit-line and facilitator
/// interest to the pool.
pub fn endogenous_yield(
    credit_borrowed: Fixed,
    external_rate: Fixed,
    reserve_factor: Fixed,
    lend_supply: Fixed,
    lend_rate: Fixed,
    pool_tvl: Fixed,
) -> Result<Fixed, UnderwriteError> {
    endogenous_yield_breakdown(
        credit_borrowed,
        external_rate,
        reserve_factor,
        lend_supply,
        lend_rate,
        pool_tvl,
    )
    .map(|b| b.pool_yield)
}
