//! The supply ledger and the facilitator state machines that move
//! stablecoins between backing states.
//!
//! Every minted stablecoin is in exactly one of three states:
//!
//! - `backed_circulating`: in free circulation with corresponding backing
//!   (CDP collateral, or counterassets captured by the PSM / core pool);
//! - `custodied_unbacked`: minted but held by an autonomous system (PSM
//!   reserve, core-pool AMO, an undrawn credit line, a perps vault) and
//!   functionally out of circulation;
//! - `circulating_unbacked`: in free circulation without backing. Only
//!   credit-line borrowing and winning perps traders can push supply here.
//!
//! Conservation — `total_minted` equals the sum of the three components —
//! holds exactly at every step because all transitions go through
//! saturating component moves and mint/burn updates both sides at once.
//!
//! Borrowed credit-line funds are conservatively classified
//! `circulating_unbacked` even though they are collateralized on the
//! external market; reports carry the externally-collateralized total
//! alongside the ledger so the nuance is not lost.

use serde::{Deserialize, Serialize};

use crate::fixed::Fixed;
use crate::rates::{piecewise_rate_closed, PiecewiseRateParams};
use crate::stableswap::{self, PoolError, PoolState, SwapDirection, SwapQuote};

/// Partition of all minted stablecoins by backing state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyLedger {
    pub backed_circulating: Fixed,
    pub custodied_unbacked: Fixed,
    pub circulating_unbacked: Fixed,
    pub total_minted: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("insufficient reserve: requested {requested}, available {available}")]
    InsufficientReserve { requested: Fixed, available: Fixed },
    #[error("borrow target {requested} outside the credit line {credit_line}")]
    ExceedsCreditLine {
        requested: Fixed,
        credit_line: Fixed,
    },
    #[error("quote was computed against a different pool state")]
    StaleQuote,
    #[error("amounts must be non-negative (got {amount})")]
    NegativeAmount { amount: Fixed },
    #[error(transparent)]
    Pool(#[from] PoolError),
}

fn ensure_non_negative(amount: Fixed) -> Result<(), LedgerError> {
    if amount.is_negative() {
        Err(LedgerError::NegativeAmount { amount })
    } else {
        Ok(())
    }
}

impl SupplyLedger {
    pub fn new() -> SupplyLedger {
        SupplyLedger::default()
    }

    /// Exact conservation check; should never fail for ledgers driven
    /// through this API.
    pub fn is_conserved(&self) -> bool {
        self.backed_circulating + self.custodied_unbacked + self.circulating_unbacked
            == self.total_minted
            && !self.backed_circulating.is_negative()
            && !self.custodied_unbacked.is_negative()
            && !self.circulating_unbacked.is_negative()
    }

    /// Mints supply that enters circulation against collateral (CDP path).
    pub fn mint_backed(&mut self, amount: Fixed) {
        debug_assert!(!amount.is_negative());
        self.backed_circulating += amount;
        self.total_minted += amount;
    }

    /// Burns circulating backed supply (repayment or liquidation).
    pub fn burn_backed(&mut self, amount: Fixed) {
        debug_assert!(!amount.is_negative());
        let burned = amount.min(self.backed_circulating);
        self.backed_circulating -= burned;
        self.total_minted -= burned;
    }

    /// Mints supply directly into custody (PSM reserves, AMO pool shares,
    /// credit lines awaiting drawdown).
    pub fn mint_custodied(&mut self, amount: Fixed) {
        debug_assert!(!amount.is_negative());
        self.custodied_unbacked += amount;
        self.total_minted += amount;
    }

    fn move_between(from: &mut Fixed, to: &mut Fixed, amount: Fixed) -> Fixed {
        let moved = amount.max(Fixed::ZERO).min(*from);
        *from -= moved;
        *to += moved;
        moved
    }

    /// Custody released against captured counterassets: supply becomes
    /// backed circulation.
    fn custody_to_backed(&mut self, amount: Fixed) -> Fixed {
        let (mut c, mut b) = (self.custodied_unbacked, self.backed_circulating);
        let moved = Self::move_between(&mut c, &mut b, amount);
        self.custodied_unbacked = c;
        self.backed_circulating = b;
        moved
    }

    /// Custody released with no backing attached (credit-line drawdown,
    /// perps payouts).
    fn custody_to_unbacked(&mut self, amount: Fixed) -> Fixed {
        let (mut c, mut u) = (self.custodied_unbacked, self.circulating_unbacked);
        let moved = Self::move_between(&mut c, &mut u, amount);
        self.custodied_unbacked = c;
        self.circulating_unbacked = u;
        moved
    }

    /// Backed circulation returning to custody (PSM redemptions).
    fn backed_to_custody(&mut self, amount: Fixed) -> Fixed {
        let (mut b, mut c) = (self.backed_circulating, self.custodied_unbacked);
        let moved = Self::move_between(&mut b, &mut c, amount);
        self.backed_circulating = b;
        self.custodied_unbacked = c;
        moved
    }

    /// Circulating supply absorbed back into custody, unbacked first so
    /// the riskiest bucket drains before backed circulation is touched.
    /// Returns `(from_unbacked, from_backed)`.
    fn absorb_into_custody(&mut self, amount: Fixed) -> (Fixed, Fixed) {
        let (mut u, mut c) = (self.circulating_unbacked, self.custodied_unbacked);
        let from_unbacked = Self::move_between(&mut u, &mut c, amount);
        self.circulating_unbacked = u;
        self.custodied_unbacked = c;
        let (mut b, mut c) = (self.backed_circulating, self.custodied_unbacked);
        let from_backed = Self::move_between(&mut b, &mut c, amount - from_unbacked);
        self.backed_circulating = b;
        self.custodied_unbacked = c;
        (from_unbacked, from_backed)
    }

    /// Unbacked circulation re-backed by an external counterasset fund.
    fn unbacked_to_backed(&mut self, amount: Fixed) -> Fixed {
        let (mut u, mut b) = (self.circulating_unbacked, self.backed_circulating);
        let moved = Self::move_between(&mut u, &mut b, amount);
        self.circulating_unbacked = u;
        self.backed_circulating = b;
        moved
    }
}

/// Peg stability module: a custodied stablecoin reserve swapped 1:1
/// against counterassets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsmState {
    pub stable_reserve: Fixed,
    pub counter_reserve: Fixed,
}

impl PsmState {
    pub fn new(stable_reserve: Fixed, counter_reserve: Fixed) -> PsmState {
        PsmState {
            stable_reserve,
            counter_reserve,
        }
    }

    /// Counterassets in, stablecoins out 1:1. The incoming counterassets
    /// back the released supply.
    pub fn swap_in(
        &mut self,
        ledger: &mut SupplyLedger,
        counter_in: Fixed,
    ) -> Result<Fixed, LedgerError> {
        ensure_non_negative(counter_in)?;
        if counter_in > self.stable_reserve {
            return Err(LedgerError::InsufficientReserve {
                requested: counter_in,
                available: self.stable_reserve,
            });
        }
        self.stable_reserve -= counter_in;
        self.counter_reserve += counter_in;
        ledger.custody_to_backed(counter_in);
        Ok(counter_in)
    }

    /// Stablecoins in, counterassets out 1:1. The returned supply goes
    /// back to custody.
    pub fn redeem(
        &mut self,
        ledger: &mut SupplyLedger,
        stable_in: Fixed,
    ) -> Result<Fixed, LedgerError> {
        ensure_non_negative(stable_in)?;
        if stable_in > self.counter_reserve {
            return Err(LedgerError::InsufficientReserve {
                requested: stable_in,
                available: self.counter_reserve,
            });
        }
        self.counter_reserve -= stable_in;
        self.stable_reserve += stable_in;
        ledger.backed_to_custody(stable_in);
        Ok(stable_in)
    }
}

/// The core liquidity pool operated as an AMO: its in-pool stablecoins
/// stay custodied until a trade captures counterassets for them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidityAmoState {
    pub pool: PoolState,
    /// Stablecoins the AMO minted into the pool at deployment.
    pub deployed_unbacked: Fixed,
}

/// Ledger movements applied by an AMO trade.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmoTradeEffect {
    pub released_to_backed: Fixed,
    pub absorbed_from_unbacked: Fixed,
    pub absorbed_from_backed: Fixed,
}

/// Creates the core pool, minting its stablecoin side into custody.
pub fn amo_deploy(
    ledger: &mut SupplyLedger,
    amount_stable: Fixed,
    amount_counter: Fixed,
    amplification: u64,
) -> Result<LiquidityAmoState, LedgerError> {
    let pool = PoolState::new(amount_stable, amount_counter, amplification)?;
    ledger.mint_custodied(amount_stable);
    Ok(LiquidityAmoState {
        pool,
        deployed_unbacked: amount_stable,
    })
}

impl LiquidityAmoState {
    /// Applies a swap quote to the pool and reclassifies the supply it
    /// moved. Counter-in trades capture counterassets and release backed
    /// stablecoins; stable-in trades absorb circulating stablecoins back
    /// into custody (unbacked ones first).
    pub fn apply_trade(
        &mut self,
        ledger: &mut SupplyLedger,
        quote: &SwapQuote,
    ) -> Result<AmoTradeEffect, LedgerError> {
        if quote.pre_state != self.pool {
            return Err(LedgerError::StaleQuote);
        }
        let effect = match quote.direction {
            SwapDirection::CounterIn => AmoTradeEffect {
                released_to_backed: ledger.custody_to_backed(quote.amount_out),
                absorbed_from_unbacked: Fixed::ZERO,
                absorbed_from_backed: Fixed::ZERO,
            },
            SwapDirection::StableIn => {
                let (from_unbacked, from_backed) = ledger.absorb_into_custody(quote.amount_in);
                AmoTradeEffect {
                    released_to_backed: Fixed::ZERO,
                    absorbed_from_unbacked: from_unbacked,
                    absorbed_from_backed: from_backed,
                }
            }
        };
        self.pool = quote.post_state;
        Ok(effect)
    }

    /// Convenience: quote and apply in one step.
    pub fn trade(
        &mut self,
        ledger: &mut SupplyLedger,
        amount_in: Fixed,
        direction: SwapDirection,
    ) -> Result<(SwapQuote, AmoTradeEffect), LedgerError> {
        let quote = stableswap::swap(&self.pool, amount_in, direction)?;
        let effect = self.apply_trade(ledger, &quote)?;
        Ok((quote, effect))
    }
}

/// An external isolated lending market holding an unbacked credit line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LendingMarketState {
    pub credit_line: Fixed,
    pub borrowed: Fixed,
    pub rate_params: PiecewiseRateParams,
    pub reserve_factor: Fixed,
}

/// One accrual step of a lending market.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LendingAccrual {
    pub utilization: Fixed,
    pub rate: Fixed,
    pub interest_accrued: Fixed,
    pub protocol_share: Fixed,
    pub supplier_share: Fixed,
}

impl LendingMarketState {
    pub fn new(
        credit_line: Fixed,
        rate_params: PiecewiseRateParams,
        reserve_factor: Fixed,
    ) -> LendingMarketState {
        LendingMarketState {
            credit_line,
            borrowed: Fixed::ZERO,
            rate_params,
            reserve_factor,
        }
    }

    pub fn utilization(&self) -> Fixed {
        if self.credit_line.is_zero() {
            Fixed::ZERO
        } else {
            self.borrowed
                .checked_mul_div(Fixed::ONE, self.credit_line)
                .unwrap_or(Fixed::ZERO)
        }
    }

    /// Moves borrowed volume by `borrow_delta` (negative repays), then
    /// accrues simple interest on the post-move balance over `dt` years.
    /// Drawn funds leave custody as circulating unbacked supply; repaid
    /// funds are absorbed back.
    pub fn step(
        &mut self,
        ledger: &mut SupplyLedger,
        borrow_delta: Fixed,
        dt: Fixed,
    ) -> Result<LendingAccrual, LedgerError> {
        let target = self.borrowed + borrow_delta;
        if target.is_negative() || target > self.credit_line {
            return Err(LedgerError::ExceedsCreditLine {
                requested: target,
                credit_line: self.credit_line,
            });
        }
        if borrow_delta.is_positive() {
            ledger.custody_to_unbacked(borrow_delta);
        } else if borrow_delta.is_negative() {
            ledger.absorb_into_custody(-borrow_delta);
        }
        self.borrowed = target;

        let utilization = self.utilization();
        let rate = piecewise_rate_closed(utilization, &self.rate_params);
        let interest_accrued = self
            .borrowed
            .checked_mul(rate)
            .and_then(|r| r.checked_mul(dt))
            .unwrap_or(Fixed::ZERO);
        let protocol_share = interest_accrued
            .checked_mul(self.reserve_factor)
            .unwrap_or(Fixed::ZERO);
        Ok(LendingAccrual {
            utilization,
            rate,
            interest_accrued,
            protocol_share,
            supplier_share: interest_accrued - protocol_share,
        })
    }
}

/// A perpetuals-exchange counterparty vault funded by an unbacked credit
/// line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerpsVaultState {
    pub credit_line: Fixed,
    pub vault_assets: Fixed,
    /// Payouts owed to winning traders that the vault could not cover.
    pub open_liability: Fixed,
}

/// Ledger movements from settling one trading period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerpsSettlement {
    pub paid_to_traders: Fixed,
    pub shortfall: Fixed,
    pub received_from_traders: Fixed,
}

impl PerpsVaultState {
    pub fn new(credit_line: Fixed) -> PerpsVaultState {
        PerpsVaultState {
            credit_line,
            vault_assets: credit_line,
            open_liability: Fixed::ZERO,
        }
    }

    /// `vault_assets / credit_line`; 1 when the line is zero-sized.
    pub fn collateralization(&self) -> Fixed {
        if self.credit_line.is_zero() {
            Fixed::ONE
        } else {
            self.vault_assets
                .checked_mul_div(Fixed::ONE, self.credit_line)
                .unwrap_or(Fixed::ZERO)
        }
    }

    /// How far the vault sits below full collateralization, in [0, 1].
    pub fn undercollateralization(&self) -> Fixed {
        (Fixed::ONE - self.collateralization()).max(Fixed::ZERO)
    }

    /// Settles aggregate trader P&L for one period. Positive P&L pays out
    /// of the vault (floored at zero, the excess recorded as liability)
    /// and the paid supply enters unbacked circulation. Negative P&L grows
    /// the vault and pulls circulating supply back into custody.
    pub fn settle(&mut self, ledger: &mut SupplyLedger, trader_pnl: Fixed) -> PerpsSettlement {
        if trader_pnl.is_positive() {
            let paid = trader_pnl.min(self.vault_assets);
            let shortfall = trader_pnl - paid;
            self.vault_assets -= paid;
            self.open_liability += shortfall;
            ledger.custody_to_unbacked(paid);
            PerpsSettlement {
                paid_to_traders: paid,
                shortfall,
                received_from_traders: Fixed::ZERO,
            }
        } else {
            let received = -trader_pnl;
            self.vault_assets += received;
            ledger.absorb_into_custody(received);
            PerpsSettlement {
                paid_to_traders: Fixed::ZERO,
                shortfall: Fixed::ZERO,
                received_from_traders: received,
            }
        }
    }
}

/// Applies a counterasset backfill fund: up to `fund` of circulating
/// unbacked supply becomes backed. Returns the amount actually re-backed.
pub fn backfill(ledger: &mut SupplyLedger, fund: Fixed) -> Result<Fixed, LedgerError> {
    ensure_non_negative(fund)?;
    Ok(ledger.unbacked_to_backed(fund))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::fx;
    use proptest::prelude::*;

    fn funded_psm(ledger: &mut SupplyLedger, reserve: Fixed, counter: Fixed) -> PsmState {
        ledger.mint_custodied(reserve);
        PsmState::new(reserve, counter)
    }

    #[test]
    fn psm_swap_in_releases_backed_supply() {
        let mut ledger = SupplyLedger::new();
        let mut psm = funded_psm(&mut ledger, fx("1000"), Fixed::ZERO);
        let out = psm.swap_in(&mut ledger, fx("100")).unwrap();
        assert_eq!(out, fx("100"));
        assert_eq!(ledger.backed_circulating, fx("100"));
        assert_eq!(ledger.custodied_unbacked, fx("900"));
        assert!(ledger.is_conserved());
    }

    #[test]
    fn psm_swap_in_rejects_over_reserve() {
        let mut ledger = SupplyLedger::new();
        let mut psm = funded_psm(&mut ledger, fx("50"), Fixed::ZERO);
        assert!(matches!(
            psm.swap_in(&mut ledger, fx("100")),
            Err(LedgerError::InsufficientReserve { .. })
        ));
        let before = ledger;
        psm.swap_in(&mut ledger, Fixed::ZERO).unwrap();
        assert_eq!(ledger, before);
    }

    #[test]
    fn psm_round_trip_restores_ledger() {
        let mut ledger = SupplyLedger::new();
        let mut psm = funded_psm(&mut ledger, fx("1000"), Fixed::ZERO);
        let before_ledger = ledger;
        let before_psm = psm;
        psm.swap_in(&mut ledger, fx("100")).unwrap();
        psm.redeem(&mut ledger, fx("100")).unwrap();
        assert_eq!(ledger, before_ledger);
        assert_eq!(psm, before_psm);
    }

    #[test]
    fn psm_redeem_requires_counterassets() {
        let mut ledger = SupplyLedger::new();
        let mut psm = funded_psm(&mut ledger, Fixed::ZERO, fx("100"));
        ledger.mint_backed(fx("200"));
        let out = psm.redeem(&mut ledger, fx("100")).unwrap();
        assert_eq!(out, fx("100"));
        assert_eq!(ledger.custodied_unbacked, fx("100"));
        assert!(matches!(
            psm.redeem(&mut ledger, fx("101")),
            Err(LedgerError::InsufficientReserve { .. })
        ));
    }

    #[test]
    fn amo_deploy_mints_into_custody_only() {
        let mut ledger = SupplyLedger::new();
        let amo = amo_deploy(&mut ledger, fx("1000000"), fx("1000000"), 100).unwrap();
        assert_eq!(amo.pool.stable_reserve, fx("1000000"));
        assert_eq!(ledger.custodied_unbacked, fx("1000000"));
        assert_eq!(ledger.circulating_unbacked, Fixed::ZERO);
        assert!(ledger.is_conserved());

        assert!(matches!(
            amo_deploy(&mut ledger, Fixed::ZERO, fx("1"), 100),
            Err(LedgerError::Pool(PoolError::InvalidPool { .. }))
        ));
    }

    #[test]
    fn amo_counter_in_releases_backed_supply() {
        let mut ledger = SupplyLedger::new();
        let mut amo = amo_deploy(&mut ledger, fx("1000000"), fx("1000000"), 100).unwrap();
        let (quote, effect) = amo
            .trade(&mut ledger, fx("100"), SwapDirection::CounterIn)
            .unwrap();
        assert_eq!(effect.released_to_backed, quote.amount_out);
        assert_eq!(ledger.backed_circulating, quote.amount_out);
        assert!(quote.amount_out < fx("100"));
        assert!(ledger.is_conserved());
    }

    #[test]
    fn amo_stable_in_absorbs_the_reference_trade() {
        let mut ledger = SupplyLedger::new();
        let mut amo = amo_deploy(&mut ledger, fx("1000000"), fx("1000000"), 100).unwrap();
        // Stablecoins arrive from a drawn credit line.
        ledger.mint_custodied(fx("400000"));
        ledger.custody_to_unbacked(fx("400000"));

        let (quote, effect) = amo
            .trade(&mut ledger, fx("400000"), SwapDirection::StableIn)
            .unwrap();
        assert_eq!(effect.absorbed_from_unbacked, fx("400000"));
        assert_eq!(ledger.custodied_unbacked, fx("1400000"));
        assert_eq!(ledger.circulating_unbacked, Fixed::ZERO);
        let frac = quote.post_fraction_stable.to_f64();
        assert!((frac - 0.70).abs() <= 0.01);
        assert!(ledger.is_conserved());
    }

    #[test]
    fn amo_rejects_stale_quotes() {
        let mut ledger = SupplyLedger::new();
        let mut amo = amo_deploy(&mut ledger, fx("1000000"), fx("1000000"), 100).unwrap();
        let stale_pool = PoolState::new(fx("2"), fx("2"), 100).unwrap();
        let stale = stableswap::swap(&stale_pool, fx("1"), SwapDirection::StableIn).unwrap();
        assert!(matches!(
            amo.apply_trade(&mut ledger, &stale),
            Err(LedgerError::StaleQuote)
        ));
    }

    #[test]
    fn lending_step_reference_accrual() {
        let mut ledger = SupplyLedger::new();
        ledger.mint_custodied(fx("500000"));
        let params = PiecewiseRateParams::new(fx("0.8"), fx("0.10"), fx("0.75"), Fixed::ZERO);
        let mut market = LendingMarketState::new(fx("500000"), params, fx("0.2"));

        let accrual = market.step(&mut ledger, fx("400000"), Fixed::ONE).unwrap();
        assert_eq!(accrual.utilization, fx("0.8"));
        assert_eq!(accrual.interest_accrued, fx("40000"));
        assert_eq!(accrual.protocol_share, fx("8000"));
        assert_eq!(accrual.supplier_share, fx("32000"));
        assert_eq!(ledger.circulating_unbacked, fx("400000"));
        assert!(ledger.is_conserved());
    }

    #[test]
    fn lending_step_identity_and_bounds() {
        let mut ledger = SupplyLedger::new();
        ledger.mint_custodied(fx("500000"));
        let params = PiecewiseRateParams::new(fx("0.8"), fx("0.10"), fx("0.75"), Fixed::ZERO);
        let mut market = LendingMarketState::new(fx("500000"), params, fx("0.2"));

        let before = (ledger, market.clone());
        let accrual = market.step(&mut ledger, Fixed::ZERO, Fixed::ZERO).unwrap();
        assert_eq!(accrual.interest_accrued, Fixed::ZERO);
        assert_eq!((ledger, market.clone()), before);

        assert!(matches!(
            market.step(&mut ledger, fx("500001"), Fixed::ONE),
            Err(LedgerError::ExceedsCreditLine { .. })
        ));
        assert!(matches!(
            market.step(&mut ledger, fx("-1"), Fixed::ONE),
            Err(LedgerError::ExceedsCreditLine { .. })
        ));
    }

    fn funded_vault(ledger: &mut SupplyLedger, credit: Fixed) -> PerpsVaultState {
        ledger.mint_custodied(credit);
        PerpsVaultState::new(credit)
    }

    #[test]
    fn perps_wins_release_unbacked_supply() {
        let mut ledger = SupplyLedger::new();
        let mut vault = funded_vault(&mut ledger, fx("1000000"));
        let s = vault.settle(&mut ledger, fx("10000"));
        assert_eq!(s.paid_to_traders, fx("10000"));
        assert_eq!(vault.vault_assets, fx("990000"));
        assert_eq!(ledger.circulating_unbacked, fx("10000"));
        assert_eq!(vault.collateralization(), fx("0.99"));
        assert!(ledger.is_conserved());
    }

    #[test]
    fn perps_losses_grow_the_vault() {
        let mut ledger = SupplyLedger::new();
        let mut vault = funded_vault(&mut ledger, fx("1000000"));
        vault.settle(&mut ledger, fx("-10000"));
        assert_eq!(vault.vault_assets, fx("1010000"));
        assert!(ledger.is_conserved());
    }

    #[test]
    fn perps_payout_floors_at_zero_with_shortfall() {
        let mut ledger = SupplyLedger::new();
        let mut vault = funded_vault(&mut ledger, fx("5000"));
        let s = vault.settle(&mut ledger, fx("10000"));
        assert_eq!(vault.vault_assets, Fixed::ZERO);
        assert_eq!(s.shortfall, fx("5000"));
        assert_eq!(vault.open_liability, fx("5000"));
        assert!(ledger.is_conserved());
    }

    #[test]
    fn backfill_rebacks_up_to_the_fund() {
        let mut ledger = SupplyLedger::new();
        let mut vault = funded_vault(&mut ledger, fx("1000000"));
        vault.settle(&mut ledger, fx("10000"));

        assert_eq!(backfill(&mut ledger, Fixed::ZERO).unwrap(), Fixed::ZERO);
        assert_eq!(backfill(&mut ledger, fx("15000")).unwrap(), fx("10000"));
        assert_eq!(ledger.circulating_unbacked, Fixed::ZERO);
        assert_eq!(ledger.backed_circulating, fx("10000"));
        assert!(ledger.is_conserved());
    }

    proptest! {
        #[test]
        fn perps_win_then_equal_loss_restores_vault(
            credit in 1_000i64..10_000_000,
            pnl in 1i64..1_000,
        ) {
            let mut ledger = SupplyLedger::new();
            let mut vault = funded_vault(&mut ledger, Fixed::from_int(credit));
            let x = Fixed::from_int(pnl);
            prop_assume!(x <= vault.vault_assets);
            let before = vault.vault_assets;
            vault.settle(&mut ledger, x);
            vault.settle(&mut ledger, -x);
            prop_assert_eq!(vault.vault_assets, before);
            prop_assert!(ledger.is_conserved());
        }

        #[test]
        fn random_op_sequences_conserve_and_keep_psm_amo_monotone(
            ops in proptest::collection::vec((0u8..6, 1i64..5_000), 1..60),
        ) {
            let mut ledger = SupplyLedger::new();
            let mut psm = funded_psm(&mut ledger, fx("100000"), fx("100000"));
            let mut amo = amo_deploy(&mut ledger, fx("1000000"), fx("1000000"), 100).unwrap();
            let mut vault = funded_vault(&mut ledger, fx("50000"));

            for (op, size) in ops {
                let amount = Fixed::from_int(size);
                let circ_before = ledger.circulating_unbacked;
                let psm_or_amo = op < 4;
                match op {
                    0 => { let _ = psm.swap_in(&mut ledger, amount); }
                    1 => { let _ = psm.redeem(&mut ledger, amount); }
                    2 => { let _ = amo.trade(&mut ledger, amount, SwapDirection::StableIn); }
                    3 => { let _ = amo.trade(&mut ledger, amount, SwapDirection::CounterIn); }
                    4 => { vault.settle(&mut ledger, amount); }
                    _ => { vault.settle(&mut ledger, -amount); }
                }
                prop_assert!(ledger.is_conserved());
                if psm_or_amo {
                    prop_assert!(ledger.circulating_unbacked <= circ_before);
                }
            }
        }
    }
}
