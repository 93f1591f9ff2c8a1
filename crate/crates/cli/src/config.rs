//! Scenario configuration: a flat key/value + nested-table text format
//! (TOML) with canonical JSON accepted as an alternative input. Exactly one
//! scenario per file.

use serde::{Deserialize, Serialize};
use std::path::Path;
use tfm_core::agents::{BelowReserve, MinerStrategy, UserStrategy};
use tfm_core::checkers::{CheckCfg, CheckerBudget, Scenario, Thresholds};
use tfm_core::dist::ValueDistribution;
use tfm_core::engine::OnChainProfile;
use tfm_core::matrix::Table1Overrides;
use tfm_core::mech::{CryptoModel, Mechanism};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Root seed; required so runs never depend on wall-clock state.
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub checkers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miner: Option<MinerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<UserConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<GridsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table1: Option<Table1Config>,
}

fn default_reps() -> u64 {
    1_000_000
}

fn default_n_list() -> Vec<usize> {
    vec![2]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_conceal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crypto_model: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amounts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_lowest: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub below_reserve: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_eps: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fab_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_fabricated: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opp_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collusion_screen_reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirm_top: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dra_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_reps: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2pa_reserve: Option<f64>,
}

/// Checkers the runner knows by name, in canonical vocabulary order.
pub const CHECKER_NAMES: [&str; 10] = [
    "user_simplicity",
    "miner_simplicity",
    "strong_collusion",
    "off_chain_influence",
    "weak_collusion",
    "trustless_collusion",
    "constant_revenue",
    "payment_identity",
    "revenue_virtual_welfare",
    "revenue_estimate",
];

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parsed: ScenarioConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        };
        parsed.validate()?;
        Ok(parsed)
    }

    /// Canonical JSON form; the cache key hashes these bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Content hash of the canonicalized config.
    pub fn scenario_hash(&self) -> String {
        let bytes = self.canonical_json();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn is_table1(&self) -> bool {
        self.table1.as_ref().is_some_and(|t| t.enabled)
            || self.checkers.iter().any(|c| c == "table1")
    }

    pub fn table1_overrides(&self) -> Table1Overrides {
        Table1Overrides {
            c2pa_reserve: self.table1.as_ref().and_then(|t| t.c2pa_reserve),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(invalid("name must not be empty"));
        }
        for c in &self.checkers {
            if c != "table1" && !CHECKER_NAMES.contains(&c.as_str()) {
                return Err(invalid(format!(
                    "unknown checker '{c}' (known: {})",
                    CHECKER_NAMES.join(", ")
                )));
            }
        }
        if self.is_table1() {
            return Ok(());
        }
        if self.n_list.is_empty() {
            return Err(invalid("n_list must not be empty"));
        }
        // a non-matrix run needs the full scenario; building it validates it
        self.build_mechanism()?;
        self.build_dist()?;
        self.build_profile()?;
        Ok(())
    }

    pub fn build_mechanism(&self) -> Result<Mechanism, ConfigError> {
        let m = self
            .mechanism
            .as_ref()
            .ok_or_else(|| invalid("missing [mechanism] table"))?;
        let k = || {
            m.k.ok_or_else(|| invalid(format!("mechanism '{}' requires key 'k'", m.kind)))
        };
        let reserve = || {
            m.reserve
                .ok_or_else(|| invalid(format!("mechanism '{}' requires key 'reserve'", m.kind)))
        };
        let crypto = match m.crypto_model.as_deref() {
            None => None,
            Some("plaintext") => Some(CryptoModel::Plaintext),
            Some("gatekeeper") => Some(CryptoModel::Gatekeeper),
            Some("deferred") => Some(CryptoModel::DeferredRevelation),
            Some(other) => return Err(invalid(format!("unknown crypto_model '{other}'"))),
        };
        let mech = match m.kind.as_str() {
            "eip1559" => Mechanism::Eip1559 {
                price: m
                    .price
                    .ok_or_else(|| invalid("mechanism 'eip1559' requires key 'price'"))?,
            },
            "c_k1_pa" => Mechanism::KPlusOnePrice {
                k: k()?,
                crypto: CryptoModel::Gatekeeper,
            },
            "p_k1_pa" => Mechanism::KPlusOnePrice {
                k: k()?,
                crypto: CryptoModel::Plaintext,
            },
            "wpb" => Mechanism::WinnerPaysBid {
                k: k()?,
                crypto: crypto.unwrap_or(CryptoModel::Plaintext),
            },
            "posted_plain" => Mechanism::PostedPrice {
                crypto: CryptoModel::Plaintext,
            },
            "posted_crypto" => Mechanism::PostedPrice {
                crypto: CryptoModel::Gatekeeper,
            },
            "bomb" => Mechanism::Bomb {
                reserve: reserve()?,
            },
            "sr2pa" => Mechanism::Sr2pa,
            "dra" => Mechanism::Dra {
                reserve: reserve()?,
                conceal_penalty: m
                    .p_conceal
                    .ok_or_else(|| invalid("mechanism 'dra' requires key 'p_conceal'"))?,
            },
            other => {
                return Err(invalid(format!(
                    "unknown mechanism kind '{other}' (known: eip1559, c_k1_pa, p_k1_pa, wpb, \
                     posted_plain, posted_crypto, bomb, sr2pa, dra)"
                )))
            }
        };
        Ok(mech)
    }

    pub fn build_dist(&self) -> Result<ValueDistribution, ConfigError> {
        let d = self
            .dist
            .as_ref()
            .ok_or_else(|| invalid("missing [dist] table"))?;
        let built = match d.kind.as_str() {
            "uniform" => ValueDistribution::uniform(
                d.lo.ok_or_else(|| invalid("dist 'uniform' requires key 'lo'"))?,
                d.hi.ok_or_else(|| invalid("dist 'uniform' requires key 'hi'"))?,
            ),
            "exponential" => ValueDistribution::exponential(
                d.rate
                    .ok_or_else(|| invalid("dist 'exponential' requires key 'rate'"))?,
            ),
            "truncated_exponential" => ValueDistribution::truncated_exponential(
                d.rate
                    .ok_or_else(|| invalid("dist 'truncated_exponential' requires key 'rate'"))?,
                d.hi.ok_or_else(|| invalid("dist 'truncated_exponential' requires key 'hi'"))?,
            ),
            "piecewise_linear_cdf" => ValueDistribution::piecewise_linear_cdf(
                d.knots
                    .clone()
                    .ok_or_else(|| invalid("dist 'piecewise_linear_cdf' requires key 'knots'"))?,
            ),
            other => return Err(invalid(format!("unknown dist kind '{other}'"))),
        };
        built.map_err(|e| invalid(format!("dist: {e}")))
    }

    pub fn build_profile(&self) -> Result<OnChainProfile, ConfigError> {
        let miner = self.build_miner()?;
        let user = self.build_user()?;
        Ok(OnChainProfile::symmetric(miner, user))
    }

    fn build_miner(&self) -> Result<MinerStrategy, ConfigError> {
        let m = self
            .miner
            .as_ref()
            .ok_or_else(|| invalid("missing [miner] table"))?;
        let advice = m.advice.unwrap_or(0.0);
        let strategy =
            match m.kind.as_str() {
                "compliant" => MinerStrategy::Compliant { advice },
                "censor_lowest" => MinerStrategy::Censor {
                    advice,
                    rule: tfm_core::agents::CensorRule::DropLowestIds(m.drop_lowest.ok_or_else(
                        || invalid("miner 'censor_lowest' requires key 'drop_lowest'"),
                    )?),
                },
                "fabricate" => MinerStrategy::Fabricate {
                    advice,
                    amounts: m
                        .amounts
                        .clone()
                        .ok_or_else(|| invalid("miner 'fabricate' requires key 'amounts'"))?,
                },
                "reserve_at_max_bid" => MinerStrategy::ReserveAtMaxBid,
                "p2pa_revenue_reserve" => MinerStrategy::P2paRevenueReserve,
                "dra_selective_reveal" => {
                    let g = m.grid_points.unwrap_or(100);
                    let dist = self.build_dist()?;
                    let hi = dist.grid_hi();
                    let grid: Vec<f64> = (1..=g).map(|i| hi * i as f64 / (g + 1) as f64).collect();
                    MinerStrategy::DraSelectiveReveal { grid }
                }
                other => return Err(invalid(format!("unknown miner strategy '{other}'"))),
            };
        Ok(strategy)
    }

    fn build_user(&self) -> Result<UserStrategy, ConfigError> {
        let u = self
            .users
            .as_ref()
            .ok_or_else(|| invalid("missing [users] table"))?;
        let strategy = match u.kind.as_str() {
            "truthful" => UserStrategy::Truthful,
            "dra_truthful_reveal" => UserStrategy::DraTruthfulReveal,
            "threshold" => UserStrategy::Threshold {
                reserve: u
                    .reserve
                    .ok_or_else(|| invalid("users 'threshold' requires key 'reserve'"))?,
            },
            "fixed" => UserStrategy::Fixed {
                bid: u
                    .bid
                    .ok_or_else(|| invalid("users 'fixed' requires key 'bid'"))?,
            },
            "shade_wpb" => {
                let below = match u.below_reserve.as_deref() {
                    None | Some("bid_value") => BelowReserve::BidValue,
                    Some("bid_zero") => BelowReserve::BidZero,
                    Some(other) => return Err(invalid(format!("unknown below_reserve '{other}'"))),
                };
                UserStrategy::ShadeWpb {
                    reserve: u
                        .reserve
                        .ok_or_else(|| invalid("users 'shade_wpb' requires key 'reserve'"))?,
                    below,
                }
            }
            other => return Err(invalid(format!("unknown user strategy '{other}'"))),
        };
        Ok(strategy)
    }

    /// The core scenario at market size n.
    pub fn build_scenario(&self, n: usize) -> Result<Scenario, ConfigError> {
        Ok(Scenario {
            name: self.name.clone(),
            mech: self.build_mechanism()?,
            dist: self.build_dist()?,
            n,
            profile: self.build_profile()?,
        })
    }

    pub fn check_cfg(&self) -> CheckCfg {
        let mut thresholds = Thresholds::default();
        if let Some(t) = &self.thresholds {
            if let Some(z) = t.z {
                thresholds.z = z;
            }
            if let Some(e) = t.abs_eps {
                thresholds.abs_eps = e;
            }
            if let Some(e) = t.user_eps {
                thresholds.user_eps = e;
            }
            if let Some(e) = t.benchmark_eps {
                thresholds.benchmark_eps = e;
            }
        }
        let mut budget = CheckerBudget {
            confirm_reps: self.reps,
            ..CheckerBudget::default()
        };
        if let Some(g) = &self.grids {
            if let Some(v) = g.value_points {
                budget.value_grid = v;
            }
            if let Some(v) = g.bid_points {
                budget.bid_grid = v;
            }
            if let Some(v) = g.reserve_points {
                budget.reserve_grid = v;
            }
            if let Some(v) = g.fab_points {
                budget.fab_grid = v;
            }
            if let Some(v) = g.max_fabricated {
                budget.max_fabricated = v;
            }
            if let Some(v) = g.opp_samples {
                budget.opp_samples = v;
            }
            if let Some(v) = g.screen_reps {
                budget.screen_reps = v;
            }
            if let Some(v) = g.collusion_screen_reps {
                budget.collusion_screen_reps = v;
            }
            if let Some(v) = g.confirm_top {
                budget.confirm_top = v;
            }
            if let Some(v) = g.dra_grid {
                budget.dra_grid = v;
            }
            if let Some(v) = g.benchmark_reps {
                budget.benchmark_reps = v;
            }
        }
        CheckCfg {
            thresholds,
            budget,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(name: &str, body: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("tfmlab-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    const C2PA_TOML: &str = r#"
name = "c2pa_demo"
seed = 7
reps = 1000
checkers = ["user_simplicity"]
n_list = [2]

[mechanism]
kind = "c_k1_pa"
k = 1

[dist]
kind = "uniform"
lo = 0.0
hi = 1.0

[miner]
kind = "compliant"
advice = 0.5

[users]
kind = "truthful"
"#;

    #[test]
    fn toml_round_trip_is_a_fixed_point() {
        let path = write_temp("c2pa.toml", C2PA_TOML);
        let cfg = ScenarioConfig::load(&path).unwrap();
        let canonical = cfg.canonical_json();
        let reparsed: ScenarioConfig = serde_json::from_str(&canonical).unwrap();
        assert_eq!(canonical, reparsed.canonical_json());
        assert_eq!(cfg.scenario_hash(), reparsed.scenario_hash());
    }

    #[test]
    fn json_is_accepted() {
        let path = write_temp("c2pa.toml", C2PA_TOML);
        let cfg = ScenarioConfig::load(&path).unwrap();
        let json_path = write_temp("c2pa.json", &cfg.canonical_json());
        let from_json = ScenarioConfig::load(&json_path).unwrap();
        assert_eq!(cfg.scenario_hash(), from_json.scenario_hash());
    }

    #[test]
    fn unknown_mechanism_kind_is_named_in_the_error() {
        let bad = C2PA_TOML.replace("c_k1_pa", "zorple");
        let path = write_temp("bad.toml", &bad);
        let err = ScenarioConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("zorple"), "{err}");
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let bad = format!("{C2PA_TOML}\nwibble = 3\n");
        let path = write_temp("bad2.toml", &bad);
        let err = ScenarioConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("wibble"), "{err}");
    }

    #[test]
    fn scenario_builds() {
        let path = write_temp("c2pa3.toml", C2PA_TOML);
        let cfg = ScenarioConfig::load(&path).unwrap();
        let sc = cfg.build_scenario(2).unwrap();
        assert_eq!(sc.n, 2);
        assert_eq!(sc.mech.kind_name(), "c_k1_pa");
    }
}
