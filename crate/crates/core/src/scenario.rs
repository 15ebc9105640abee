//! Scenario ingestion: the JSON configuration schema, validation with
//! field-level diagnostics, and pre-simulation credit-line resolution.
//!
//! A scenario is a single JSON document. Monetary values, rates and
//! ratios are decimal strings (`"0.8"`, `"1000000"`); integers are also
//! accepted, but binary floats are rejected outright so configurations
//! replay bit-exactly everywhere. Rate blocks may alternatively carry
//! on-chain ray-scaled integers (27 decimals) under `"units": "ray"`;
//! the loader normalizes them to dimensionless decimals.
//!
//! Three error classes separate cleanly: [`ScenarioError::Parse`] for
//! malformed JSON, [`ScenarioError::Schema`] for missing/unknown/mistyped
//! fields, and [`ScenarioError::Range`] for well-formed values outside
//! their domain, named by field path.

use std::fmt;
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::fixed::{fx, Fixed};
use crate::rates::{default_gain, ControllerParams, PiecewiseRateParams};
use crate::rng::RNG_ALGORITHM;
use crate::underwriting::{
    absorbable_liquidity, b2s_credit_size, check_condition, credit_line_amount, default_u_grid,
    max_credit_fraction_with_gain, UnderwriteError, UnderwritingVerdict, DEFAULT_GRID_POINTS,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Parse(String),
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error("scenario field `{field}`: {message}")]
    Range { field: String, message: String },
    #[error("underwriting failed while resolving credit lines: {0}")]
    Underwrite(#[from] UnderwriteError),
}

impl ScenarioError {
    fn range(field: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
        ScenarioError::Range {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// Core liquidity pool block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub stable: Fixed,
    pub counter: Fixed,
    pub amplification: u64,
}

/// Issuance controller block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub gain: Fixed,
}

impl Default for ControllerConfig {
    fn default() -> ControllerConfig {
        ControllerConfig {
            gain: default_gain(),
        }
    }
}

/// Rate-curve block, normalized to decimal fractions on load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RatesConfig {
    pub u_optimal: Fixed,
    pub slope1: Fixed,
    pub slope2: Fixed,
    pub base_rate: Fixed,
}

impl RatesConfig {
    pub fn params(&self) -> PiecewiseRateParams {
        PiecewiseRateParams::new(self.u_optimal, self.slope1, self.slope2, self.base_rate)
    }
}

/// Scale of the numbers inside a rate block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RateUnits {
    #[default]
    Decimal,
    /// On-chain 27-decimal integers, e.g. `"1e26"` for a 10% slope.
    Ray,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    u_optimal: RawNumber,
    slope1: RawNumber,
    slope2: Option<RawNumber>,
    base_rate: Option<RawNumber>,
    #[serde(default)]
    units: RateUnits,
}

/// A number literal before unit normalization.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Text(String),
    Int(i64),
}

impl RawNumber {
    fn to_fixed(&self, units: RateUnits) -> Result<Fixed, String> {
        let text = match self {
            RawNumber::Text(s) => s.clone(),
            RawNumber::Int(n) => n.to_string(),
        };
        let parsed = match units {
            RateUnits::Decimal => text.parse::<Fixed>(),
            RateUnits::Ray => Fixed::from_ray_str(&text),
        };
        parsed.map_err(|e| e.to_string())
    }
}

impl<'de> Deserialize<'de> for RatesConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<RatesConfig, D::Error> {
        let raw = RawRates::deserialize(deserializer)?;
        let conv = |n: &RawNumber, name: &str| {
            n.to_fixed(raw.units)
                .map_err(|e| D::Error::custom(format!("rates.{name}: {e}")))
        };
        Ok(RatesConfig {
            u_optimal: conv(&raw.u_optimal, "u_optimal")?,
            slope1: conv(&raw.slope1, "slope1")?,
            slope2: match &raw.slope2 {
                Some(n) => conv(n, "slope2")?,
                None => fx("0.75"),
            },
            base_rate: match &raw.base_rate {
                Some(n) => conv(n, "base_rate")?,
                None => Fixed::ZERO,
            },
        })
    }
}

/// A credit line that is either sized by the underwriting engine or
/// pinned to an explicit amount.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CreditLineSetting {
    Auto,
    Amount(Fixed),
}

impl Default for CreditLineSetting {
    fn default() -> CreditLineSetting {
        CreditLineSetting::Auto
    }
}

impl Serialize for CreditLineSetting {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CreditLineSetting::Auto => serializer.serialize_str("auto"),
            CreditLineSetting::Amount(v) => v.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for CreditLineSetting {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<CreditLineSetting, D::Error> {
        let raw = RawNumberOrAuto::deserialize(deserializer)?;
        match raw {
            RawNumberOrAuto::Text(s) if s == "auto" => Ok(CreditLineSetting::Auto),
            RawNumberOrAuto::Text(s) => s
                .parse()
                .map(CreditLineSetting::Amount)
                .map_err(|e| D::Error::custom(format!("credit_line: {e}"))),
            RawNumberOrAuto::Int(n) => Ok(CreditLineSetting::Amount(Fixed::from_int(n))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumberOrAuto {
    Text(String),
    Int(i64),
}

/// Borrow-demand model for an external lending market.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandConfig {
    /// Hold borrowing at a fixed utilization of the credit line.
    ConstantUtilization { target: Fixed },
    /// Explicit borrowed balances per step; the last entry holds.
    BorrowedPath { path: Vec<Fixed> },
}

/// An external lending market receiving a credit line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(default = "default_market_name")]
    pub name: String,
    pub rates: RatesConfig,
    #[serde(default = "default_reserve_factor")]
    pub reserve_factor: Fixed,
    #[serde(default)]
    pub credit_line: CreditLineSetting,
    #[serde(default)]
    pub demand: Option<DemandConfig>,
}

fn default_market_name() -> String {
    "external-market".to_string()
}

fn default_reserve_factor() -> Fixed {
    fx("0.20")
}

/// Trader P&L model for the perps vault.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PnlModelConfig {
    /// Scripted per-step trader P&L; steps beyond the sequence are flat.
    Fixed { sequence: Vec<Fixed> },
    /// Win with probability `win_probability` for `win_size`, else lose
    /// `loss_size`.
    Bernoulli {
        win_probability: Fixed,
        win_size: Fixed,
        loss_size: Fixed,
    },
    /// Normally distributed per-step P&L.
    Gaussian { mean: Fixed, std_dev: Fixed },
}

/// A scripted backfill action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackfillAction {
    pub step: u32,
    pub amount: Fixed,
}

/// Perpetuals counterparty vault block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerpsConfig {
    #[serde(default)]
    pub credit_line: CreditLineSetting,
    pub pnl: PnlModelConfig,
    #[serde(default = "default_worst_case_drawdown")]
    pub worst_case_drawdown: Fixed,
    #[serde(default)]
    pub backfill: Vec<BackfillAction>,
}

fn default_worst_case_drawdown() -> Fixed {
    fx("0.06")
}

/// A CDP at simulation start.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionConfig {
    pub owner: String,
    pub collateral_value: Fixed,
    pub liquidation_threshold: Fixed,
    pub debt: Fixed,
}

/// Over-collateralized lending book block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdpBookConfig {
    #[serde(default)]
    pub positions: Vec<PositionConfig>,
    /// Collateral price factors per step relative to initial values; the
    /// last entry holds for the remaining horizon.
    #[serde(default)]
    pub price_path: Vec<Fixed>,
    #[serde(default = "default_ltv_cap")]
    pub ltv_cap: Fixed,
    #[serde(default = "default_liquidation_bonus")]
    pub liquidation_bonus: Fixed,
    /// Annual simple rate charged on CDP debt by the simulation loop.
    #[serde(default = "default_cdp_borrow_rate")]
    pub borrow_rate: Fixed,
}

fn default_ltv_cap() -> Fixed {
    fx("0.8")
}

fn default_liquidation_bonus() -> Fixed {
    crate::cdp::default_liquidation_bonus()
}

fn default_cdp_borrow_rate() -> Fixed {
    fx("0.10")
}

impl Default for CdpBookConfig {
    fn default() -> CdpBookConfig {
        CdpBookConfig {
            positions: Vec::new(),
            price_path: Vec::new(),
            ltv_cap: default_ltv_cap(),
            liquidation_bonus: default_liquidation_bonus(),
            borrow_rate: default_cdp_borrow_rate(),
        }
    }
}

/// Peg stability module block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsmConfig {
    pub stable_reserve: Fixed,
    pub counter_reserve: Fixed,
}

/// Underwriting engine knobs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnderwritingConfig {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_u_max_field")]
    pub u_max: Fixed,
    /// Facilitator rate both absorption sizing and B2S sizing target.
    #[serde(default = "default_target_rate")]
    pub target_rate: Fixed,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_u_max_field() -> Fixed {
    crate::underwriting::default_u_max()
}

fn default_target_rate() -> Fixed {
    fx("0.10")
}

impl Default for UnderwritingConfig {
    fn default() -> UnderwritingConfig {
        UnderwritingConfig {
            grid_points: default_grid_points(),
            u_max: default_u_max_field(),
            target_rate: default_target_rate(),
        }
    }
}

/// Randomness block; the algorithm is pinned so configurations replay.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    #[serde(default = "default_rng_algorithm")]
    pub algorithm: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_rng_algorithm() -> String {
    RNG_ALGORITHM.to_string()
}

impl Default for RngConfig {
    fn default() -> RngConfig {
        RngConfig {
            algorithm: default_rng_algorithm(),
            seed: 0,
        }
    }
}

/// A full simulation/underwriting scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub pool: PoolConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub external_markets: Vec<MarketConfig>,
    #[serde(default)]
    pub perps: Option<PerpsConfig>,
    #[serde(default)]
    pub psm: Option<PsmConfig>,
    #[serde(default)]
    pub cdp_book: CdpBookConfig,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_dt")]
    pub dt: Fixed,
    #[serde(default)]
    pub underwriting: UnderwritingConfig,
    #[serde(default)]
    pub rng: RngConfig,
}

fn default_horizon() -> u32 {
    30
}

/// One day in years on the fixed grid.
fn default_dt() -> Fixed {
    Fixed::from_ratio(1, 365)
}

impl ScenarioConfig {
    pub fn controller_params(&self) -> ControllerParams {
        ControllerParams::new(self.controller.gain)
    }

    /// Utilization grid configured for this scenario.
    pub fn u_grid(&self) -> Vec<Fixed> {
        default_u_grid(self.underwriting.grid_points, self.underwriting.u_max)
    }

    /// Validates every field, reporting the first violation with its
    /// field path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.pool.stable.is_positive() {
            return Err(ScenarioError::range("pool.stable", "must be positive"));
        }
        if !self.pool.counter.is_positive() {
            return Err(ScenarioError::range("pool.counter", "must be positive"));
        }
        if self.pool.amplification < 1 {
            return Err(ScenarioError::range("pool.amplification", "must be at least 1"));
        }
        if !self.controller.gain.is_positive() {
            return Err(ScenarioError::range("controller.gain", "must be positive"));
        }
        for (i, market) in self.external_markets.iter().enumerate() {
            let field = |name: &str| format!("external_markets[{i}].{name}");
            let r = &market.rates;
            if !r.u_optimal.is_positive() || r.u_optimal >= Fixed::ONE {
                return Err(ScenarioError::range(field("rates.u_optimal"), "must lie in (0, 1)"));
            }
            if r.slope1.is_negative() || r.slope2.is_negative() || r.base_rate.is_negative() {
                return Err(ScenarioError::range(field("rates"), "slopes and base rate must be non-negative"));
            }
            if market.reserve_factor.is_negative() || market.reserve_factor > Fixed::ONE {
                return Err(ScenarioError::range(field("reserve_factor"), "must lie in [0, 1]"));
            }
            if let CreditLineSetting::Amount(v) = market.credit_line {
                if v.is_negative() {
                    return Err(ScenarioError::range(field("credit_line"), "must be non-negative"));
                }
            }
            match &market.demand {
                Some(DemandConfig::ConstantUtilization { target }) => {
                    if target.is_negative() || *target > Fixed::ONE {
                        return Err(ScenarioError::range(field("demand.target"), "must lie in [0, 1]"));
                    }
                }
                Some(DemandConfig::BorrowedPath { path }) => {
                    if path.iter().any(|v| v.is_negative()) {
                        return Err(ScenarioError::range(field("demand.path"), "entries must be non-negative"));
                    }
                }
                None => {}
            }
        }
        if let Some(perps) = &self.perps {
            if !perps.worst_case_drawdown.is_positive() || perps.worst_case_drawdown > Fixed::ONE {
                return Err(ScenarioError::range("perps.worst_case_drawdown", "must lie in (0, 1]"));
            }
            if let CreditLineSetting::Amount(v) = perps.credit_line {
                if v.is_negative() {
                    return Err(ScenarioError::range("perps.credit_line", "must be non-negative"));
                }
            }
            match &perps.pnl {
                PnlModelConfig::Bernoulli {
                    win_probability,
                    win_size,
                    loss_size,
                } => {
                    if win_probability.is_negative() || *win_probability > Fixed::ONE {
                        return Err(ScenarioError::range("perps.pnl.win_probability", "must lie in [0, 1]"));
                    }
                    if win_size.is_negative() || loss_size.is_negative() {
                        return Err(ScenarioError::range("perps.pnl", "win and loss sizes must be non-negative"));
                    }
                }
                PnlModelConfig::Gaussian { std_dev, .. } => {
                    if std_dev.is_negative() {
                        return Err(ScenarioError::range("perps.pnl.std_dev", "must be non-negative"));
                    }
                }
                PnlModelConfig::Fixed { .. } => {}
            }
            for (i, action) in perps.backfill.iter().enumerate() {
                if action.amount.is_negative() {
                    return Err(ScenarioError::range(
                        format!("perps.backfill[{i}].amount"),
                        "must be non-negative",
                    ));
                }
            }
        }
        if let Some(psm) = &self.psm {
            if psm.stable_reserve.is_negative() || psm.counter_reserve.is_negative() {
                return Err(ScenarioError::range("psm", "reserves must be non-negative"));
            }
        }
        for (i, p) in self.cdp_book.positions.iter().enumerate() {
            let field = |name: &str| format!("cdp_book.positions[{i}].{name}");
            if p.collateral_value.is_negative() {
                return Err(ScenarioError::range(field("collateral_value"), "must be non-negative"));
            }
            if !p.liquidation_threshold.is_positive() || p.liquidation_threshold > Fixed::ONE {
                return Err(ScenarioError::range(field("liquidation_threshold"), "must lie in (0, 1]"));
            }
            if p.debt.is_negative() {
                return Err(ScenarioError::range(field("debt"), "must be non-negative"));
            }
        }
        if self.cdp_book.price_path.iter().any(|v| v.is_negative()) {
            return Err(ScenarioError::range("cdp_book.price_path", "factors must be non-negative"));
        }
        if !self.cdp_book.ltv_cap.is_positive() || self.cdp_book.ltv_cap > Fixed::ONE {
            return Err(ScenarioError::range("cdp_book.ltv_cap", "must lie in (0, 1]"));
        }
        if self.cdp_book.liquidation_bonus.is_negative() {
            return Err(ScenarioError::range("cdp_book.liquidation_bonus", "must be non-negative"));
        }
        if self.cdp_book.borrow_rate.is_negative() {
            return Err(ScenarioError::range("cdp_book.borrow_rate", "must be non-negative"));
        }
        if !self.dt.is_positive() {
            return Err(ScenarioError::range("dt", "must be positive"));
        }
        if self.underwriting.grid_points < 2 {
            return Err(ScenarioError::range("underwriting.grid_points", "need at least 2 samples"));
        }
        if !self.underwriting.u_max.is_positive() || self.underwriting.u_max >= Fixed::ONE {
            return Err(ScenarioError::range("underwriting.u_max", "must lie in (0, 1)"));
        }
        if self.underwriting.target_rate.is_negative() {
            return Err(ScenarioError::range("underwriting.target_rate", "must be non-negative"));
        }
        if self.rng.algorithm != RNG_ALGORITHM {
            return Err(ScenarioError::range(
                "rng.algorithm",
                format!("unsupported generator; this build pins `{RNG_ALGORITHM}`"),
            ));
        }
        Ok(())
    }
}

/// Parses and validates a scenario from a JSON string.
pub fn parse_scenario(json: &str) -> Result<ScenarioConfig, ScenarioError> {
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let config: ScenarioConfig =
        serde_json::from_value(value).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// SHA-256 of the canonical re-serialized configuration, as lowercase
/// hex. Whitespace and formatting of the source file do not matter; the
/// resolved numbers do.
pub fn scenario_hash(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        use fmt::Write;
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A lending-market credit line after auto-sizing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMarket {
    pub name: String,
    pub credit_line: Fixed,
    /// Line size relative to the core pool's counterassets.
    pub size_fraction: Fixed,
    pub auto_sized: bool,
    pub verdict: UnderwritingVerdict,
}

/// The perps credit line after auto-sizing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPerps {
    pub credit_line: Fixed,
    pub auto_sized: bool,
    pub target_rate: Fixed,
    /// Stablecoins the core pool absorbs before rates hit the target.
    pub absorbable: Fixed,
    pub worst_case_drawdown: Fixed,
}

/// All credit lines resolved for a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedCreditLines {
    pub markets: Vec<ResolvedMarket>,
    pub perps: Option<ResolvedPerps>,
}

/// Resolves `"auto"` credit lines through the underwriting engine and
/// re-checks every line (explicit ones included) against the rate-curve
/// condition.
pub fn resolve_credit_lines(config: &ScenarioConfig) -> Result<ResolvedCreditLines, ScenarioError> {
    let controller = config.controller_params();
    let grid = config.u_grid();
    let counterassets = config.pool.counter;

    let mut markets = Vec::with_capacity(config.external_markets.len());
    for market in &config.external_markets {
        let params = market.rates.params();
        let (credit_line, size_fraction, auto_sized) = match market.credit_line {
            CreditLineSetting::Auto => {
                let x = max_credit_fraction_with_gain(
                    params.slope1,
                    params.u_optimal,
                    controller.gain,
                )?;
                (credit_line_amount(x, counterassets)?, x, true)
            }
            CreditLineSetting::Amount(amount) => {
                let x = amount
                    .checked_mul_div(Fixed::ONE, counterassets)
                    .ok_or(UnderwriteError::Overflow)?;
                (amount, x, false)
            }
        };
        let verdict = check_condition(size_fraction, &params, &controller, &grid)?;
        markets.push(ResolvedMarket {
            name: market.name.clone(),
            credit_line,
            size_fraction,
            auto_sized,
            verdict,
        });
    }

    let perps = match &config.perps {
        Some(perps) => {
            let target_rate = config.underwriting.target_rate;
            let absorbable = absorbable_liquidity(target_rate, &controller, counterassets)?;
            let (credit_line, auto_sized) = match perps.credit_line {
                CreditLineSetting::Auto => {
                    (b2s_credit_size(absorbable, perps.worst_case_drawdown)?, true)
                }
                CreditLineSetting::Amount(amount) => (amount, false),
            };
            Some(ResolvedPerps {
                credit_line,
                auto_sized,
                target_rate,
                absorbable,
                worst_case_drawdown: perps.worst_case_drawdown,
            })
        }
        None => None,
    };

    Ok(ResolvedCreditLines { markets, perps })
}
