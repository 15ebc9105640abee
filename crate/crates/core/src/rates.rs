//! Interest-rate models: the piecewise utilization curve used by external
//! lending markets and the hyperbolic transfer function of the core
//! issuance controller.
//!
//! Rates are annualized simple rates expressed as dimensionless fractions
//! (0.10 = 10% per year). Compounding is out of scope.

use serde::{Deserialize, Serialize};

use crate::fixed::{fx, Fixed};

/// Piecewise-linear borrow-rate curve over utilization.
///
/// Below `u_optimal` the rate climbs from `base_rate` to
/// `base_rate + slope1`; above it, a second (usually much steeper) slope
/// takes over, reaching `base_rate + slope1 + slope2` as utilization
/// approaches 1. The curve is continuous at `u_optimal`, and the boundary
/// itself is owned by the first branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseRateParams {
    pub u_optimal: Fixed,
    pub slope1: Fixed,
    pub slope2: Fixed,
    pub base_rate: Fixed,
}

impl PiecewiseRateParams {
    pub fn new(u_optimal: Fixed, slope1: Fixed, slope2: Fixed, base_rate: Fixed) -> PiecewiseRateParams {
        PiecewiseRateParams {
            u_optimal,
            slope1,
            slope2,
            base_rate,
        }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if !self.u_optimal.is_positive() || self.u_optimal >= Fixed::ONE {
            return Err(RateError::OutOfRange {
                what: "u_optimal must lie in (0, 1)",
                value: self.u_optimal,
            });
        }
        for (name, v) in [
            ("slope1", self.slope1),
            ("slope2", self.slope2),
            ("base_rate", self.base_rate),
        ] {
            if v.is_negative() {
                return Err(RateError::OutOfRange {
                    what: name,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// The rate at exactly optimal utilization, `base_rate + slope1`.
    pub fn rate_at_optimal(&self) -> Fixed {
        self.base_rate + self.slope1
    }
}

/// Gain of the issuance controller's transfer function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub gain: Fixed,
}

/// Controller gain used when a scenario does not override it.
pub fn default_gain() -> Fixed {
    fx("0.15")
}

impl Default for ControllerParams {
    fn default() -> ControllerParams {
        ControllerParams {
            gain: default_gain(),
        }
    }
}

impl ControllerParams {
    pub fn new(gain: Fixed) -> ControllerParams {
        ControllerParams { gain }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if !self.gain.is_positive() {
            return Err(RateError::OutOfRange {
                what: "controller gain must be positive",
                value: self.gain,
            });
        }
        Ok(())
    }
}

/// The controller's operating point: a credit line sized at `x` times the
/// core pool's counterassets, drawn down to utilization `u` and sold into
/// the pool, absorbs the fraction `e = x * u` of those counterassets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerInput {
    pub credit_fraction: Fixed,
    pub utilization: Fixed,
    pub e_controller: Fixed,
}

impl ControllerInput {
    pub fn new(credit_fraction: Fixed, utilization: Fixed) -> Result<ControllerInput, RateError> {
        let e_controller = e_from_credit(credit_fraction, utilization)?;
        Ok(ControllerInput {
            credit_fraction,
            utilization,
            e_controller,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RateError {
    #[error("{what} (got {value})")]
    OutOfRange { what: &'static str, value: Fixed },
    /// The controller's rate grows without bound as absorption approaches
    /// the whole counterasset reserve.
    #[error("controller input {e} >= 1 diverges")]
    Divergence { e: Fixed },
}

/// Borrow rate of the piecewise curve at utilization `u` in `[0, 1)`.
pub fn piecewise_rate(u: Fixed, params: &PiecewiseRateParams) -> Result<Fixed, RateError> {
    params.validate()?;
    if u.is_negative() || u >= Fixed::ONE {
        return Err(RateError::OutOfRange {
            what: "utilization must lie in [0, 1)",
            value: u,
        });
    }
    Ok(piecewise_rate_unchecked(u, params))
}

/// Same curve with the right endpoint closed: `u = 1` yields the finite
/// limit `base + slope1 + slope2`. The simulation loop uses this when a
/// market is drawn to its full credit line.
pub(crate) fn piecewise_rate_closed(u: Fixed, params: &PiecewiseRateParams) -> Fixed {
    if u >= Fixed::ONE {
        params.base_rate + params.slope1 + params.slope2
    } else {
        piecewise_rate_unchecked(u, params)
    }
}

fn piecewise_rate_unchecked(u: Fixed, params: &PiecewiseRateParams) -> Fixed {
    if u <= params.u_optimal {
        let ramp = u
            .checked_mul_div(params.slope1, params.u_optimal)
            .expect("slope1 ramp overflow");
        params.base_rate + ramp
    } else {
        let excess = (u - params.u_optimal)
            .checked_mul_div(params.slope2, Fixed::ONE - params.u_optimal)
            .expect("slope2 ramp overflow");
        params.base_rate + params.slope1 + excess
    }
}

/// Controller transfer function `gain * e / (1 - e)` for `e` in `[0, 1)`.
pub fn controller_rate(e: Fixed, params: &ControllerParams) -> Result<Fixed, RateError> {
    params.validate()?;
    if e.is_negative() {
        return Err(RateError::OutOfRange {
            what: "controller input must be non-negative",
            value: e,
        });
    }
    if e >= Fixed::ONE {
        return Err(RateError::Divergence { e });
    }
    params
        .gain
        .checked_mul_div(e, Fixed::ONE - e)
        .ok_or(RateError::Divergence { e })
}

/// Absorbed counterasset fraction `x * u` for a credit line of relative
/// size `x` at utilization `u`.
pub fn e_from_credit(x: Fixed, u: Fixed) -> Result<Fixed, RateError> {
    if x.is_negative() {
        return Err(RateError::OutOfRange {
            what: "credit fraction must be non-negative",
            value: x,
        });
    }
    if u.is_negative() || u > Fixed::ONE {
        return Err(RateError::OutOfRange {
            what: "utilization must lie in [0, 1]",
            value: u,
        });
    }
    let e = x.checked_mul(u).ok_or(RateError::Divergence { e: Fixed::MAX })?;
    if e >= Fixed::ONE {
        return Err(RateError::Divergence { e });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_params() -> PiecewiseRateParams {
        PiecewiseRateParams::new(fx("0.8"), fx("0.10"), fx("0.75"), Fixed::ZERO)
    }

    #[test]
    fn piecewise_hits_slope1_at_optimal() {
        let r = piecewise_rate(fx("0.8"), &reference_params()).unwrap();
        assert_eq!(r, fx("0.10"));
    }

    #[test]
    fn piecewise_is_zero_at_zero_with_zero_base() {
        let r = piecewise_rate(Fixed::ZERO, &reference_params()).unwrap();
        assert_eq!(r, Fixed::ZERO);
    }

    #[test]
    fn piecewise_second_branch_by_direct_substitution() {
        // 0 + 0.10 + (0.9 - 0.8) / (1 - 0.8) * 0.75 = 0.475
        let r = piecewise_rate(fx("0.9"), &reference_params()).unwrap();
        assert_eq!(r, fx("0.475"));
    }

    #[test]
    fn piecewise_rejects_out_of_range_utilization() {
        let p = reference_params();
        assert!(matches!(
            piecewise_rate(Fixed::ONE, &p),
            Err(RateError::OutOfRange { .. })
        ));
        assert!(matches!(
            piecewise_rate(fx("-0.1"), &p),
            Err(RateError::OutOfRange { .. })
        ));
        assert_eq!(piecewise_rate_closed(Fixed::ONE, &p), fx("0.85"));
    }

    #[test]
    fn controller_matches_tuned_operating_point() {
        let c = ControllerParams::default();
        assert_eq!(controller_rate(Fixed::ZERO, &c).unwrap(), Fixed::ZERO);
        // At 400,000 of 1,000,000 counterassets absorbed the controller
        // is tuned to 10%.
        assert_eq!(controller_rate(fx("0.4"), &c).unwrap(), fx("0.10"));
        assert_eq!(controller_rate(fx("0.5"), &c).unwrap(), fx("0.15"));
        assert!(matches!(
            controller_rate(Fixed::ONE, &c),
            Err(RateError::Divergence { .. })
        ));
    }

    #[test]
    fn e_from_credit_examples() {
        assert_eq!(e_from_credit(fx("0.5"), fx("0.8")).unwrap(), fx("0.4"));
        assert_eq!(e_from_credit(Fixed::ZERO, fx("0.6")).unwrap(), Fixed::ZERO);
        assert!(matches!(
            e_from_credit(fx("2.0"), fx("0.6")),
            Err(RateError::Divergence { .. })
        ));
    }

    #[test]
    fn controller_rate_ordering_toward_divergence() {
        let c = ControllerParams::default();
        let at = |e: &str| controller_rate(fx(e), &c).unwrap();
        assert!(at("0.99") > at("0.9"));
        let ten_x = at("0.4").checked_mul(Fixed::from_int(10)).unwrap();
        assert!(at("0.9") > ten_x);
    }

    proptest! {
        #[test]
        fn piecewise_is_monotone_and_continuous(
            a in 0u64..1_000_000,
            b in 0u64..1_000_000,
            u_opt in 1u64..1_000_000,
            s1 in 0u64..2_000_000,
            s2 in 0u64..2_000_000,
            base in 0u64..1_000_000,
        ) {
            let scale = |n: u64| Fixed::from_raw(n as i128 * 1_000_000_000_000);
            let p = PiecewiseRateParams::new(
                scale(u_opt),
                scale(s1),
                scale(s2),
                scale(base),
            );
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = piecewise_rate(scale(lo), &p).unwrap();
            let r_hi = piecewise_rate(scale(hi), &p).unwrap();
            prop_assert!(r_lo <= r_hi);

            // The boundary is owned by the first branch and the second
            // branch limits to the same value there; one grid step above
            // may move at most one local-slope increment.
            let at = piecewise_rate(p.u_optimal, &p).unwrap();
            prop_assert_eq!(at, p.base_rate + p.slope1);
            let just_above = p.u_optimal + Fixed::from_raw(1);
            if just_above < Fixed::ONE {
                let above = piecewise_rate(just_above, &p).unwrap();
                let local_slope = p.slope2
                    .checked_div(Fixed::ONE - p.u_optimal)
                    .unwrap();
                prop_assert!(above >= at);
                prop_assert!(above.raw() - at.raw() <= local_slope.raw() / crate::fixed::UNIT + 2);
            }
        }

        #[test]
        fn controller_is_monotone_and_convex(
            a in 0u64..995_000,
            b in 0u64..995_000,
        ) {
            let c = ControllerParams::default();
            let scale = |n: u64| Fixed::from_raw(n as i128 * 1_000_000_000_000);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = controller_rate(scale(lo), &c).unwrap();
            let r_hi = controller_rate(scale(hi), &c).unwrap();
            prop_assert!(r_lo <= r_hi);

            // Midpoint convexity with slack for one rounding unit each.
            let mid = Fixed::from_raw((scale(lo).raw() + scale(hi).raw()) / 2);
            let r_mid = controller_rate(mid, &c).unwrap();
            let chord = Fixed::from_raw((r_lo.raw() + r_hi.raw()) / 2);
            prop_assert!(r_mid <= chord + Fixed::from_raw(2));
        }
    }
}
