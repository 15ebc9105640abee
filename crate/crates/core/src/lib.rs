//! Deterministic simulation and underwriting engine for decentralized
//! stablecoin credit issuance.
//!
//! The crate models the full spectrum of issuance mechanisms — CDP
//! over-collateralized minting, peg-stability and liquidity market
//! operations, credit lines to external lending markets, and credit lines
//! to perpetuals counterparty vaults — over a shared supply ledger that
//! partitions every minted stablecoin into backed-circulating,
//! custodied-unbacked, or circulating-unbacked.
//!
//! Quantitative building blocks:
//! - [`stableswap`]: two-asset StableSwap pool math (invariant solving,
//!   swap quotes, marginal spot price) on 18-digit fixed point.
//! - [`rates`]: the piecewise utilization rate curve of external lending
//!   markets and the hyperbolic controller transfer function of the core
//!   issuance facilitator.
//! - [`cdp`]: position health factors, minting caps and liquidation.
//! - [`ledger`]: the supply ledger and the facilitator state machines.
//! - [`underwriting`]: credit-line sizing from rate-curve comparison,
//!   liquidity absorption and drawdown budgets.
//! - [`risk`]: the ordinal likelihood/consequence scoring grid and the
//!   built-in risk register.
//! - [`scenario`] and [`sim`]: JSON scenario ingestion, the discrete-time
//!   simulation loop and seeded Monte Carlo.
//!
//! Everything is deterministic: numbers are decimal fixed point
//! ([`fixed::Fixed`]), randomness flows only from a scenario-pinned seeded
//! generator ([`rng`]), and reports serialize to byte-stable JSON.

pub mod cdp;
pub mod fixed;
pub mod ledger;
pub mod rates;
pub mod risk;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod stableswap;
pub mod underwriting;

pub use fixed::Fixed;

/// Engine version embedded in every report for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
