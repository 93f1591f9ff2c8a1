//! Property verdicts for the simplicity and collusion desiderata: on-chain
//! user/miner simplicity, strong/weak/trustless collusion proofness,
//! off-chain influence proofness, and constant revenue.
//!
//! Checkers are falsifiers over declared search budgets: a VIOLATION carries
//! a concrete witness deviation with its measured gain, while
//! NO_VIOLATION_FOUND means the search found nothing — never a proof of
//! compliance. Deviation families are screened with common random numbers at
//! reduced replications, then the top candidates plus every
//! mechanism-specific canonical attack are confirmed at full replications;
//! thresholds apply at confirmation standard errors.

use crate::agents::{CensorRule, MinerStrategy, UserStrategy};
use crate::dist::ValueDistribution;
use crate::engine::{
    estimate_attack_revenue, estimate_paired, estimate_stat, known_off_chain_attacks, resolve,
    DiffEstimate, EngineError, OffChainAction, OffChainAttack, OffChainMechanism,
    OffChainResolution, OnChainProfile, PlayResult, ResolvedScenario, SimEstimate,
};
use crate::interim::{optimal_revenue_benchmark, InterimError};
use crate::mech::{BidId, CryptoModel, Mechanism};
use crate::rng::{mc_accumulate, RunningStat, Substreams};
use serde::Serialize;
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckerError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Interim(#[from] InterimError),
    #[error("no revenue benchmark available for mechanism '{mechanism}'")]
    BenchmarkUnavailable { mechanism: String },
    #[error("property matrix scenario missing: {missing}")]
    ScenarioGap { missing: String },
}

/// Statistical thresholds. A deviation counts as a violation only when its
/// confirmed gain exceeds both `z` standard errors and the relevant floor.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thresholds {
    pub z: f64,
    /// Absolute floor for Monte Carlo utility comparisons.
    pub abs_eps: f64,
    /// Floor for exact ex-post comparisons (user simplicity).
    pub user_eps: f64,
    /// Floor for revenue-benchmark and constant-revenue comparisons.
    pub benchmark_eps: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            z: 5.0,
            abs_eps: 1e-4,
            user_eps: 1e-9,
            benchmark_eps: 1e-3,
        }
    }
}

/// Search-budget knobs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CheckerBudget {
    pub value_grid: usize,
    pub bid_grid: usize,
    pub reserve_grid: usize,
    pub fab_grid: usize,
    pub max_fabricated: usize,
    pub opp_samples: usize,
    pub screen_reps: u64,
    pub collusion_screen_reps: u64,
    pub confirm_reps: u64,
    pub confirm_top: usize,
    pub dra_grid: usize,
    pub benchmark_reps: u64,
}

impl Default for CheckerBudget {
    fn default() -> Self {
        CheckerBudget {
            value_grid: 21,
            bid_grid: 201,
            reserve_grid: 41,
            fab_grid: 9,
            max_fabricated: 3,
            opp_samples: 40,
            screen_reps: 10_000,
            collusion_screen_reps: 2_000,
            confirm_reps: 1_000_000,
            confirm_top: 3,
            dra_grid: 100,
            benchmark_reps: 10_000_000,
        }
    }
}

impl CheckerBudget {
    /// Reduced budget for fast tests; every family stays represented.
    pub fn small() -> Self {
        CheckerBudget {
            value_grid: 7,
            bid_grid: 41,
            reserve_grid: 11,
            fab_grid: 5,
            max_fabricated: 2,
            opp_samples: 12,
            screen_reps: 4_000,
            collusion_screen_reps: 1_000,
            confirm_reps: 60_000,
            confirm_top: 3,
            dra_grid: 40,
            benchmark_reps: 400_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CheckCfg {
    pub thresholds: Thresholds,
    pub budget: CheckerBudget,
    pub seed: u64,
}

impl CheckCfg {
    pub fn new(seed: u64) -> Self {
        CheckCfg {
            thresholds: Thresholds::default(),
            budget: CheckerBudget::default(),
            seed,
        }
    }

    pub fn small(seed: u64) -> Self {
        CheckCfg {
            thresholds: Thresholds::default(),
            budget: CheckerBudget::small(),
            seed,
        }
    }

    fn streams(&self, scenario: &str, purpose: &str) -> Substreams {
        Substreams::new(self.seed)
            .labeled(scenario)
            .labeled(purpose)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "NO_VIOLATION_FOUND")]
    NoViolationFound,
    #[serde(rename = "VIOLATION")]
    Violation,
}

/// Machine-readable deviation behind a witness, sufficient to replay it.
#[derive(Clone, Debug, Serialize)]
pub enum Deviation {
    NonTruthfulProfile,
    NonCompliantMiner,
    UserBid {
        user: usize,
        value: f64,
        bid: f64,
        conceal: bool,
    },
    IndividualRationality {
        user: usize,
        value: f64,
    },
    MinerDeviation {
        strategy: MinerStrategy,
    },
    Cartel {
        user: usize,
        value: f64,
        bid: f64,
        miner: MinerStrategy,
    },
    OffChainAttack {
        name: String,
    },
    BenchmarkGap {
        benchmark: f64,
        revenue: f64,
    },
    Contract {
        name: String,
    },
    RevenueVariation {
        detail: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub description: String,
    pub gain: f64,
    pub std_err: f64,
    pub deviation: Deviation,
}

#[derive(Clone, Debug, Serialize)]
pub struct BudgetSummary {
    pub value_grid: usize,
    pub bid_grid: usize,
    pub reserve_grid: usize,
    pub families: Vec<String>,
    pub screen_reps: u64,
    pub confirm_reps: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyVerdict {
    pub scenario: String,
    pub property: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub budget: BudgetSummary,
    pub seed: u64,
}

impl PropertyVerdict {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::NoViolationFound
    }
}

/// A named experiment: mechanism, prior, market size, and the (fully
/// on-chain) strategy profile under scrutiny.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub mech: Mechanism,
    pub dist: ValueDistribution,
    pub n: usize,
    pub profile: OnChainProfile,
}

impl Scenario {
    fn resolved(&self) -> Result<ResolvedScenario<'_>, EngineError> {
        resolve(&self.mech, &self.profile, &self.dist, self.n)
    }

    fn base_advice(&self) -> f64 {
        match &self.profile.miner {
            MinerStrategy::Compliant { advice } => *advice,
            _ => 0.0,
        }
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn budget_summary(cfg: &CheckCfg, families: Vec<String>) -> BudgetSummary {
    BudgetSummary {
        value_grid: cfg.budget.value_grid,
        bid_grid: cfg.budget.bid_grid,
        reserve_grid: cfg.budget.reserve_grid,
        families,
        screen_reps: cfg.budget.screen_reps,
        confirm_reps: cfg.budget.confirm_reps,
    }
}

fn verdict(
    sc: &Scenario,
    property: &str,
    witness: Option<Witness>,
    budget: BudgetSummary,
    seed: u64,
) -> PropertyVerdict {
    PropertyVerdict {
        scenario: sc.name.clone(),
        property: property.into(),
        verdict: if witness.is_some() {
            Verdict::Violation
        } else {
            Verdict::NoViolationFound
        },
        witness,
        budget,
        seed,
    }
}

fn trivial_witness(description: &str, deviation: Deviation) -> Witness {
    Witness {
        description: description.into(),
        gain: 0.0,
        std_err: 0.0,
        deviation,
    }
}

/// On-chain user simplicity: truthful bidding must be an ex-post best
/// response (and individually rational) against sampled opponent bid
/// profiles, for every grid value and every grid deviation. Utilities are
/// exact, so violations are flagged at the `user_eps` floor.
pub fn check_user_simplicity(
    sc: &Scenario,
    cfg: &CheckCfg,
) -> Result<PropertyVerdict, CheckerError> {
    let property = "on_chain_user_simple";
    let budget = budget_summary(
        cfg,
        vec!["bid_grid".into(), "individual_rationality".into()],
    );
    if !sc.profile.users_truthful(sc.n) {
        let w = trivial_witness(
            "profile users are not truthful",
            Deviation::NonTruthfulProfile,
        );
        return Ok(verdict(sc, property, Some(w), budget, cfg.seed));
    }
    let base = sc.resolved()?;
    let streams = cfg.streams(&sc.name, "user_simplicity");
    let values_grid = sc.dist.inclusive_grid(cfg.budget.value_grid);
    let hi = sc.dist.grid_hi();
    let mut bid_candidates = linspace(0.0, hi, cfg.budget.bid_grid);
    bid_candidates.push(hi * 1.25); // one overbid beyond the support
    let is_dra = matches!(sc.mech, Mechanism::Dra { .. });

    let mut best: Option<Witness> = None;
    let consider = |w: Witness, best: &mut Option<Witness>| {
        if best.as_ref().is_none_or(|b| w.gain > b.gain) {
            *best = Some(w);
        }
    };

    for user in 0..sc.n {
        // deviation scenarios are value-independent; resolve them once
        let deviated: Vec<ResolvedScenario> = bid_candidates
            .iter()
            .map(|&b| base.with_user_fixed_bid(user, b))
            .collect();
        for sample in 0..cfg.budget.opp_samples {
            let mut stream = streams.stream(sample as u64);
            let mut values: Vec<f64> = (0..sc.n).map(|_| sc.dist.sample(&mut stream)).collect();
            for &v in &values_grid {
                values[user] = v;
                let u_truth = base.play(&values)?.user_utilities[user];
                if u_truth < -cfg.thresholds.user_eps {
                    consider(
                        Witness {
                            description: format!(
                                "truthful bidding yields negative utility {u_truth:.6} at value {v:.4}"
                            ),
                            gain: -u_truth,
                            std_err: 0.0,
                            deviation: Deviation::IndividualRationality { user, value: v },
                        },
                        &mut best,
                    );
                }
                for (bi, dev) in deviated.iter().enumerate() {
                    let u_dev = dev.play(&values)?.user_utilities[user];
                    let gain = u_dev - u_truth;
                    if gain > cfg.thresholds.user_eps {
                        consider(
                            Witness {
                                description: format!(
                                    "value {v:.4}: bidding {:.4} beats truthful by {gain:.6} \
                                     against a sampled opponent profile",
                                    bid_candidates[bi]
                                ),
                                gain,
                                std_err: 0.0,
                                deviation: Deviation::UserBid {
                                    user,
                                    value: v,
                                    bid: bid_candidates[bi],
                                    conceal: false,
                                },
                            },
                            &mut best,
                        );
                    }
                }
                if is_dra {
                    // bid the value, then conceal in phase two
                    let dev = base.with_user_strategy(
                        user,
                        UserStrategy::DraFixed {
                            bid: v,
                            reveal: false,
                        },
                    );
                    let u_dev = dev.play(&values)?.user_utilities[user];
                    let gain = u_dev - u_truth;
                    if gain > cfg.thresholds.user_eps {
                        consider(
                            Witness {
                                description: format!(
                                    "value {v:.4}: concealing in phase two beats truthful by {gain:.6}"
                                ),
                                gain,
                                std_err: 0.0,
                                deviation: Deviation::UserBid { user, value: v, bid: v, conceal: true },
                            },
                            &mut best,
                        );
                    }
                }
            }
        }
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

/// Deviation families for the miner-simplicity search, in fixed order.
fn miner_deviation_families(sc: &Scenario, cfg: &CheckCfg) -> Vec<(String, MinerStrategy)> {
    let mut families = Vec::new();
    let advice = sc.base_advice();
    let hi = sc.dist.grid_hi();
    if sc.mech.takes_advice() {
        for r in linspace(0.0, hi, cfg.budget.reserve_grid) {
            families.push((
                "reserve_grid".to_string(),
                MinerStrategy::Compliant { advice: r },
            ));
        }
    }
    for j in 1..=sc.n {
        families.push((
            "censor_lowest_ids".to_string(),
            MinerStrategy::Censor {
                advice,
                rule: CensorRule::DropLowestIds(j),
            },
        ));
    }
    // fabrication: multisets of up to max_fabricated grid amounts
    let fab_points: Vec<f64> = (1..=cfg.budget.fab_grid)
        .map(|i| hi * i as f64 / cfg.budget.fab_grid as f64)
        .collect();
    let mut sizes: Vec<Vec<usize>> = (0..fab_points.len()).map(|i| vec![i]).collect();
    let mut combos: Vec<Vec<usize>> = sizes.clone();
    for _ in 2..=cfg.budget.max_fabricated.max(1) {
        let mut next = Vec::new();
        for combo in &sizes {
            let last = *combo.last().expect("nonempty combo");
            for j in last..fab_points.len() {
                let mut c = combo.clone();
                c.push(j);
                next.push(c);
            }
        }
        combos.extend(next.iter().cloned());
        sizes = next;
    }
    for combo in combos {
        let amounts: Vec<f64> = combo.iter().map(|&i| fab_points[i]).collect();
        families.push((
            "fabricate_grid".to_string(),
            MinerStrategy::Fabricate { advice, amounts },
        ));
    }
    families
}

/// Mechanism-specific attacks, always confirmed at full replications.
fn miner_special_deviations(sc: &Scenario, cfg: &CheckCfg) -> Vec<(String, MinerStrategy)> {
    let mut specials = Vec::new();
    if sc.mech.crypto() == CryptoModel::Plaintext {
        specials.push((
            "reserve_at_max_bid".to_string(),
            MinerStrategy::ReserveAtMaxBid,
        ));
        specials.push((
            "p2pa_revenue_reserve".to_string(),
            MinerStrategy::P2paRevenueReserve,
        ));
    }
    if matches!(sc.mech, Mechanism::Dra { .. }) {
        let hi = sc.dist.grid_hi();
        let g = cfg.budget.dra_grid;
        let grid: Vec<f64> = (1..=g).map(|i| hi * i as f64 / (g + 1) as f64).collect();
        specials.push((
            "dra_selective_reveal".to_string(),
            MinerStrategy::DraSelectiveReveal { grid },
        ));
    }
    specials
}

/// On-chain miner simplicity: the compliant strategy must be an expected-
/// revenue best response within the deviation families (reserve grid,
/// censoring, blind fabrication, plus the plaintext and deferred-revelation
/// attacks when the cryptographic model admits them).
pub fn check_miner_simplicity(
    sc: &Scenario,
    cfg: &CheckCfg,
) -> Result<PropertyVerdict, CheckerError> {
    let property = "on_chain_miner_simple";
    if !sc.profile.miner.is_compliant() {
        let budget = budget_summary(cfg, vec!["compliance".into()]);
        let w = trivial_witness(
            "profile miner strategy is not compliant",
            Deviation::NonCompliantMiner,
        );
        return Ok(verdict(sc, property, Some(w), budget, cfg.seed));
    }
    let base = sc.resolved()?;
    let families = miner_deviation_families(sc, cfg);
    let specials = miner_special_deviations(sc, cfg);
    let family_names: Vec<String> = {
        let mut names: Vec<String> = Vec::new();
        for (f, _) in families.iter().chain(specials.iter()) {
            if names.last() != Some(f) {
                names.push(f.clone());
            }
        }
        names
    };
    let budget = budget_summary(cfg, family_names);

    let screen_streams = cfg.streams(&sc.name, "miner_simplicity/screen");
    let mut screened: Vec<(usize, f64)> = Vec::with_capacity(families.len());
    for (idx, (_, strategy)) in families.iter().enumerate() {
        let dev = base.with_miner(strategy.clone())?;
        let est = estimate_paired(
            &base,
            &dev,
            None,
            cfg.budget.screen_reps,
            &screen_streams,
            |p| p.miner_utility,
        );
        screened.push((idx, est.gain));
    }
    screened.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("no NaN gains")
            .then(a.0.cmp(&b.0))
    });

    // confirmation set: best screened candidates, then every special attack
    let mut confirm: Vec<(String, MinerStrategy)> = screened
        .iter()
        .take(cfg.budget.confirm_top)
        .map(|&(idx, _)| families[idx].clone())
        .collect();
    confirm.extend(specials);

    let confirm_streams = cfg.streams(&sc.name, "miner_simplicity/confirm");
    let mut best: Option<Witness> = None;
    for (family, strategy) in confirm {
        let dev = base.with_miner(strategy.clone())?;
        let est = estimate_paired(
            &base,
            &dev,
            None,
            cfg.budget.confirm_reps,
            &confirm_streams,
            |p| p.miner_utility,
        );
        let threshold = (cfg.thresholds.z * est.std_err).max(cfg.thresholds.abs_eps);
        if est.gain > threshold && best.as_ref().is_none_or(|b| est.gain > b.gain) {
            best = Some(Witness {
                description: format!(
                    "{family}: {} raises expected miner utility from {:.6} to {:.6} (gain {:.6} ± {:.6})",
                    strategy.name(),
                    est.base_mean,
                    est.dev_mean,
                    est.gain,
                    est.std_err
                ),
                gain: est.gain,
                std_err: est.std_err,
                deviation: Deviation::MinerDeviation { strategy },
            });
        }
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

/// 1-1 strong collusion proofness: no joint deviation by the miner and one
/// user (a bid change plus a miner strategy change) may raise their joint
/// expected utility. The canonical shill bid at the inverse virtual value
/// and the reserve-to-zero deviation are always confirmed.
pub fn check_strong_collusion(
    sc: &Scenario,
    cfg: &CheckCfg,
    cartel_user: usize,
) -> Result<PropertyVerdict, CheckerError> {
    let property = "strong_collusion_proof";
    let base = sc.resolved()?;
    let budget = budget_summary(
        cfg,
        vec![
            "bid_grid x miner".into(),
            "inverse_virtual_shill".into(),
            "reserve_zero".into(),
        ],
    );
    let cartel = move |p: &PlayResult| p.miner_utility + p.user_utilities[cartel_user];

    let values_grid = sc.dist.inclusive_grid(cfg.budget.value_grid);
    let hi = sc.dist.grid_hi();
    let bid_candidates = linspace(0.0, hi, cfg.budget.bid_grid);
    let base_miner = sc.profile.miner.clone();
    let mut miners: Vec<MinerStrategy> = vec![base_miner.clone()];
    if sc.mech.takes_advice() && sc.base_advice() != 0.0 {
        miners.push(MinerStrategy::Compliant { advice: 0.0 });
    }

    #[derive(Clone)]
    struct Candidate {
        value: f64,
        bid: f64,
        miner: MinerStrategy,
        gain: f64,
    }

    // screening over the full (value, bid, miner) grid with shared draws
    let screen_streams = cfg.streams(&sc.name, "strong_collusion/screen");
    let mut screened: Vec<Candidate> = Vec::new();
    for &v in &values_grid {
        for miner in &miners {
            let with_miner = base.with_miner(miner.clone())?;
            for &b in &bid_candidates {
                let dev = with_miner.with_user_fixed_bid(cartel_user, b);
                let est = estimate_paired(
                    &base,
                    &dev,
                    Some((cartel_user, v)),
                    cfg.budget.collusion_screen_reps,
                    &screen_streams,
                    cartel,
                );
                screened.push(Candidate {
                    value: v,
                    bid: b,
                    miner: miner.clone(),
                    gain: est.gain,
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..screened.len()).collect();
    order.sort_by(|&a, &b| {
        screened[b]
            .gain
            .partial_cmp(&screened[a].gain)
            .expect("no NaN")
            .then(a.cmp(&b))
    });

    // canonical candidates at their screened-best value: the inverse-virtual
    // shill with the profile miner, and keep-bidding-value with reserve zero
    let mut canonical: Vec<Candidate> = Vec::new();
    {
        let canon_streams = cfg.streams(&sc.name, "strong_collusion/canonical");
        let mut best_shill: Option<Candidate> = None;
        let mut best_zero: Option<Candidate> = None;
        for &v in &values_grid {
            if let Ok(shill) = sc.dist.inverse_virtual(v) {
                let dev = base.with_user_fixed_bid(cartel_user, shill);
                let est = estimate_paired(
                    &base,
                    &dev,
                    Some((cartel_user, v)),
                    cfg.budget.collusion_screen_reps,
                    &canon_streams,
                    cartel,
                );
                if best_shill.as_ref().is_none_or(|c| est.gain > c.gain) {
                    best_shill = Some(Candidate {
                        value: v,
                        bid: shill,
                        miner: base_miner.clone(),
                        gain: est.gain,
                    });
                }
            }
            if miners.len() > 1 {
                let dev = base
                    .with_miner(MinerStrategy::Compliant { advice: 0.0 })?
                    .with_user_fixed_bid(cartel_user, v);
                let est = estimate_paired(
                    &base,
                    &dev,
                    Some((cartel_user, v)),
                    cfg.budget.collusion_screen_reps,
                    &canon_streams,
                    cartel,
                );
                if best_zero.as_ref().is_none_or(|c| est.gain > c.gain) {
                    best_zero = Some(Candidate {
                        value: v,
                        bid: v,
                        miner: MinerStrategy::Compliant { advice: 0.0 },
                        gain: est.gain,
                    });
                }
            }
        }
        canonical.extend(best_shill);
        canonical.extend(best_zero);
    }

    let confirm_streams = cfg.streams(&sc.name, "strong_collusion/confirm");
    let mut best: Option<Witness> = None;
    let confirm_list: Vec<Candidate> = order
        .iter()
        .take(cfg.budget.confirm_top)
        .map(|&i| screened[i].clone())
        .chain(canonical)
        .collect();
    for cand in confirm_list {
        let dev = base
            .with_miner(cand.miner.clone())?
            .with_user_fixed_bid(cartel_user, cand.bid);
        let est = estimate_paired(
            &base,
            &dev,
            Some((cartel_user, cand.value)),
            cfg.budget.confirm_reps,
            &confirm_streams,
            cartel,
        );
        let threshold = (cfg.thresholds.z * est.std_err).max(cfg.thresholds.abs_eps);
        if est.gain > threshold && best.as_ref().is_none_or(|b| est.gain > b.gain) {
            best = Some(Witness {
                description: format!(
                    "cartel (miner, user {cartel_user}) at value {:.4}: bid {:.4} with {} \
                     raises joint utility by {:.6} ± {:.6}",
                    cand.value,
                    cand.bid,
                    cand.miner.name(),
                    est.gain,
                    est.std_err
                ),
                gain: est.gain,
                std_err: est.std_err,
                deviation: Deviation::Cartel {
                    user: cartel_user,
                    value: cand.value,
                    bid: cand.bid,
                    miner: cand.miner,
                },
            });
        }
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

/// Direct paired estimate of a cartel deviation's joint-utility gain at one
/// value; the confirmation primitive behind [`check_strong_collusion`],
/// exposed for replays and golden attacks.
#[allow(clippy::too_many_arguments)]
pub fn estimate_cartel_gain(
    sc: &Scenario,
    cartel_user: usize,
    value: f64,
    bid: f64,
    miner: &MinerStrategy,
    reps: u64,
    streams: &Substreams,
) -> Result<DiffEstimate, CheckerError> {
    let base = sc.resolved()?;
    let dev = base
        .with_miner(miner.clone())?
        .with_user_fixed_bid(cartel_user, bid);
    Ok(estimate_paired(
        &base,
        &dev,
        Some((cartel_user, value)),
        reps,
        streams,
        move |p| p.miner_utility + p.user_utilities[cartel_user],
    ))
}

/// Off-chain influence proofness, two-sided: (a) the on-chain expected
/// revenue must reach the burn-adjusted optimal-revenue benchmark; (b) no
/// known off-chain attack may beat it.
pub fn check_off_chain_influence(
    sc: &Scenario,
    cfg: &CheckCfg,
) -> Result<PropertyVerdict, CheckerError> {
    let property = "off_chain_influence_proof";
    let base = sc.resolved()?;
    let streams = cfg.streams(&sc.name, "off_chain_influence");
    let revenue = estimate_stat(
        &base,
        cfg.budget.confirm_reps,
        &streams.labeled("revenue"),
        |p| p.miner_utility,
    );
    let bench = optimal_revenue_benchmark(
        &sc.dist,
        sc.n,
        sc.mech.capacity(),
        sc.mech.burn_per_inclusion(),
        cfg.budget.benchmark_reps,
        &streams.labeled("benchmark"),
    );
    let attacks = known_off_chain_attacks(&sc.mech, &sc.dist, sc.n);
    let mut families = vec!["optimal_revenue_benchmark".to_string()];
    families.extend(attacks.iter().map(|a| a.name.clone()));
    let budget = budget_summary(cfg, families);

    let mut best: Option<Witness> = None;
    // attacks first: a concrete mechanism is the more actionable witness
    for attack in &attacks {
        let est = estimate_attack_revenue(
            &sc.mech,
            attack,
            &sc.dist,
            sc.n,
            cfg.budget.confirm_reps,
            &streams.labeled(&format!("attack/{}", attack.name)),
        );
        let gain = est.mean - revenue.mean;
        let se = (est.std_err.powi(2) + revenue.std_err.powi(2)).sqrt();
        let threshold = (cfg.thresholds.z * se).max(cfg.thresholds.benchmark_eps);
        if gain > threshold && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Witness {
                description: format!(
                    "off-chain mechanism '{}' earns {:.6} vs on-chain {:.6} (gain {:.6} ± {:.6})",
                    attack.name, est.mean, revenue.mean, gain, se
                ),
                gain,
                std_err: se,
                deviation: Deviation::OffChainAttack {
                    name: attack.name.clone(),
                },
            });
        }
    }
    let gap = bench.value - revenue.mean;
    let se = (bench.std_err.powi(2) + revenue.std_err.powi(2)).sqrt();
    let threshold = (cfg.thresholds.z * se).max(cfg.thresholds.benchmark_eps);
    if gap > threshold && best.as_ref().is_none_or(|b| gap > b.gain) {
        best = Some(Witness {
            description: format!(
                "optimal-revenue benchmark {:.6} exceeds on-chain revenue {:.6} (gap {:.6} ± {:.6})",
                bench.value, revenue.mean, gap, se
            ),
            gain: gap,
            std_err: se,
            deviation: Deviation::BenchmarkGap { benchmark: bench.value, revenue: revenue.mean },
        });
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

/// A collusion contract: a finite menu of (on-chain user strategy, miner
/// strategy, transfer to the miner) options for the cartel user, with
/// abstention always implicitly available.
pub struct CollusionContract {
    pub name: String,
    pub options: Vec<ContractOption>,
}

#[derive(Clone)]
pub struct ContractOption {
    pub label: String,
    pub user: UserStrategy,
    pub miner: MinerStrategy,
    /// Off-chain transfer from the cartel user to the miner (negative =
    /// rebate).
    pub transfer: f64,
}

/// The contract library behind the weak/trustless collusion checks: entry
/// fees backed by a censorship threat, the posted-price rebate-for-shill
/// contract, and an inverse-virtual shill with a transfer share.
pub fn collusion_contracts(sc: &Scenario, cartel_user: usize) -> Vec<CollusionContract> {
    let advice = sc.base_advice();
    let price_like = match &sc.mech {
        Mechanism::Eip1559 { price } => *price,
        Mechanism::Bomb { reserve } | Mechanism::Dra { reserve, .. } => *reserve,
        _ => advice,
    };
    let mut contracts = Vec::new();

    for gamma in [0.02, 0.05, 0.1, 0.2] {
        let mut drop = BTreeSet::new();
        drop.insert(BidId(cartel_user as u32));
        contracts.push(CollusionContract {
            name: format!("entry_fee_{gamma}"),
            options: vec![
                ContractOption {
                    label: "pay".into(),
                    user: sc.profile.user(cartel_user).clone(),
                    miner: sc.profile.miner.clone(),
                    transfer: gamma,
                },
                ContractOption {
                    label: "refuse".into(),
                    user: sc.profile.user(cartel_user).clone(),
                    miner: MinerStrategy::Censor {
                        advice,
                        rule: CensorRule::DropIds(drop),
                    },
                    transfer: 0.0,
                },
            ],
        });
    }

    if price_like > 0.0 {
        // bid the posted price, report a value, get rebated price − report/2
        let options = (0..=8)
            .map(|i| {
                let report = sc.dist.grid_hi() * i as f64 / 8.0;
                ContractOption {
                    label: format!("report_{report:.3}"),
                    user: UserStrategy::Fixed { bid: price_like },
                    miner: sc.profile.miner.clone(),
                    transfer: -(price_like - report / 2.0),
                }
            })
            .collect();
        contracts.push(CollusionContract {
            name: "rebate_shill".into(),
            options,
        });
    }

    // bid the inverse virtual value of a reported value, pay a share of it
    let mut shill_options = Vec::new();
    for i in 0..=8 {
        let report = sc.dist.grid_hi() * i as f64 / 8.0;
        if let Ok(bid) = sc.dist.inverse_virtual(report) {
            shill_options.push(ContractOption {
                label: format!("report_{report:.3}"),
                user: UserStrategy::Fixed { bid },
                miner: sc.profile.miner.clone(),
                transfer: 0.1 * report,
            });
        }
    }
    if !shill_options.is_empty() {
        contracts.push(CollusionContract {
            name: "inverse_virtual_shill".into(),
            options: shill_options,
        });
    }
    contracts
}

struct ContractOutcome {
    /// Expected miner gain with the cartel user best-responding per value.
    miner_gain: f64,
    miner_se: f64,
    /// Largest per-value gain of the best-responding cartel user.
    user_gain: f64,
    user_se: f64,
}

/// Evaluates a contract under the cartel user's one-shot grid best response,
/// holding all other users at their profile strategies. The miner side is
/// averaged over the prior with trapezoid pdf weights on the value grid.
fn evaluate_contract(
    sc: &Scenario,
    cfg: &CheckCfg,
    cartel_user: usize,
    contract: &CollusionContract,
    streams: &Substreams,
) -> Result<ContractOutcome, CheckerError> {
    let base = sc.resolved()?;
    let values_grid = sc.dist.inclusive_grid(cfg.budget.value_grid);
    let reps = cfg.budget.screen_reps;

    let mut best_user_gain = f64::NEG_INFINITY;
    let mut best_user_se = 0.0;
    let mut sum_miner_gain = 0.0;
    let mut sum_miner_var = 0.0;
    let mut total_weight = 0.0;
    for &v in &values_grid {
        // abstain is the default: zero gain for both sides
        let mut chosen_user_gain = 0.0;
        let mut chosen_user_se = 0.0;
        let mut chosen_miner_gain = 0.0;
        let mut chosen_miner_se = 0.0;
        for opt in &contract.options {
            let dev = base
                .with_miner(opt.miner.clone())?
                .with_user_strategy(cartel_user, opt.user.clone());
            let est = estimate_paired(&base, &dev, Some((cartel_user, v)), reps, streams, |p| {
                p.user_utilities[cartel_user]
            });
            let est_m = estimate_paired(&base, &dev, Some((cartel_user, v)), reps, streams, |p| {
                p.miner_utility
            });
            let user_gain = est.gain - opt.transfer;
            let miner_gain = est_m.gain + opt.transfer;
            if user_gain > chosen_user_gain {
                chosen_user_gain = user_gain;
                chosen_user_se = est.std_err;
                chosen_miner_gain = miner_gain;
                chosen_miner_se = est_m.std_err;
            }
        }
        if chosen_user_gain > best_user_gain {
            best_user_gain = chosen_user_gain;
            best_user_se = chosen_user_se;
        }
        let w = sc.dist.pdf(v).max(0.0);
        sum_miner_gain += w * chosen_miner_gain;
        sum_miner_var += (w * chosen_miner_se).powi(2);
        total_weight += w;
    }
    if total_weight <= 0.0 {
        total_weight = 1.0;
    }
    Ok(ContractOutcome {
        miner_gain: sum_miner_gain / total_weight,
        miner_se: sum_miner_var.sqrt() / total_weight,
        user_gain: best_user_gain,
        user_se: best_user_se,
    })
}

/// 1-1 weak collusion proofness: for every contract in the library, the
/// cartel user best-responds on the option menu while everyone else stays
/// oblivious; a violation requires both the miner and the cartel user to
/// strictly gain over the trivial mechanism.
pub fn check_weak_collusion(
    sc: &Scenario,
    cfg: &CheckCfg,
    cartel_user: usize,
) -> Result<PropertyVerdict, CheckerError> {
    let property = "weak_collusion_proof";
    let contracts = collusion_contracts(sc, cartel_user);
    let budget = budget_summary(cfg, contracts.iter().map(|c| c.name.clone()).collect());
    let streams = cfg.streams(&sc.name, "weak_collusion");
    let mut best: Option<Witness> = None;
    for contract in &contracts {
        let outcome = evaluate_contract(sc, cfg, cartel_user, contract, &streams)?;
        let miner_thr = (cfg.thresholds.z * outcome.miner_se).max(cfg.thresholds.abs_eps);
        let user_thr = (cfg.thresholds.z * outcome.user_se).max(cfg.thresholds.abs_eps);
        if outcome.miner_gain > miner_thr && outcome.user_gain > user_thr {
            let joint = outcome.miner_gain + outcome.user_gain;
            if best.as_ref().is_none_or(|b| joint > b.gain) {
                best = Some(Witness {
                    description: format!(
                        "contract '{}': miner gains {:.6} and the best-responding cartel user gains {:.6}",
                        contract.name, outcome.miner_gain, outcome.user_gain
                    ),
                    gain: joint,
                    std_err: (outcome.miner_se.powi(2) + outcome.user_se.powi(2)).sqrt(),
                    deviation: Deviation::Contract { name: contract.name.clone() },
                });
            }
        }
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

/// 1-1 trustless collusion proofness. Off-chain influence proofness implies
/// it, so a passing influence check short-circuits; otherwise every contract
/// is evaluated with all users re-equilibrated by one-shot grid best
/// response (announced contracts are public).
pub fn check_trustless_collusion(
    sc: &Scenario,
    cfg: &CheckCfg,
    ocip: Option<&PropertyVerdict>,
) -> Result<PropertyVerdict, CheckerError> {
    let property = "trustless_collusion_proof";
    let ocip_verdict = match ocip {
        Some(v) => v.clone(),
        None => check_off_chain_influence(sc, cfg)?,
    };
    if ocip_verdict.passed() {
        let budget = budget_summary(
            cfg,
            vec!["corollary: off-chain influence proof implies trustless collusion proof".into()],
        );
        return Ok(verdict(sc, property, None, budget, cfg.seed));
    }

    let contracts = collusion_contracts(sc, 0);
    let budget = budget_summary(cfg, contracts.iter().map(|c| c.name.clone()).collect());
    let streams = cfg.streams(&sc.name, "trustless_collusion");
    let base = sc.resolved()?;
    let baseline_rev = estimate_stat(
        &base,
        cfg.budget.screen_reps * 4,
        &streams.labeled("baseline"),
        |p| p.miner_utility,
    );
    let mut best: Option<Witness> = None;
    for contract in &contracts {
        let policy = best_response_policy(sc, cfg, contract, &streams.labeled(&contract.name))?;
        let off = contract_as_mechanism(sc, contract, &policy);
        let est = estimate_attack_revenue(
            &sc.mech,
            &off,
            &sc.dist,
            sc.n,
            cfg.budget.screen_reps * 4,
            &streams.labeled(&format!("{}/rev", contract.name)),
        );
        let miner_gain = est.mean - baseline_rev.mean;
        let miner_se = (est.std_err.powi(2) + baseline_rev.std_err.powi(2)).sqrt();
        let user_gain = policy.best_user_gain;
        let miner_thr = (cfg.thresholds.z * miner_se).max(cfg.thresholds.abs_eps);
        let user_thr = (cfg.thresholds.z * policy.best_user_se).max(cfg.thresholds.abs_eps);
        if miner_gain > miner_thr && user_gain > user_thr {
            let joint = miner_gain + user_gain;
            if best.as_ref().is_none_or(|b| joint > b.gain) {
                best = Some(Witness {
                    description: format!(
                        "announced contract '{}': miner gains {:.6}, some re-equilibrated user gains {:.6}",
                        contract.name, miner_gain, user_gain
                    ),
                    gain: joint,
                    std_err: miner_se,
                    deviation: Deviation::Contract { name: contract.name.clone() },
                });
            }
        }
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

struct BestResponsePolicy {
    grid: Vec<f64>,
    /// Option index per grid value; None = abstain.
    choice: Vec<Option<usize>>,
    best_user_gain: f64,
    best_user_se: f64,
}

/// One-shot symmetric grid best response of a user to an announced contract
/// (opponents held at the profile strategies).
fn best_response_policy(
    sc: &Scenario,
    cfg: &CheckCfg,
    contract: &CollusionContract,
    streams: &Substreams,
) -> Result<BestResponsePolicy, CheckerError> {
    let base = sc.resolved()?;
    let grid = sc.dist.inclusive_grid(cfg.budget.value_grid);
    let mut choice = Vec::with_capacity(grid.len());
    let mut best_user_gain = f64::NEG_INFINITY;
    let mut best_user_se = 0.0;
    for &v in &grid {
        let mut chosen: Option<usize> = None;
        let mut chosen_gain = 0.0;
        let mut chosen_se = 0.0;
        for (oi, opt) in contract.options.iter().enumerate() {
            let dev = base
                .with_miner(opt.miner.clone())?
                .with_user_strategy(0, opt.user.clone());
            let est = estimate_paired(
                &base,
                &dev,
                Some((0, v)),
                cfg.budget.screen_reps,
                streams,
                |p| p.user_utilities[0],
            );
            let gain = est.gain - opt.transfer;
            if gain > chosen_gain {
                chosen = Some(oi);
                chosen_gain = gain;
                chosen_se = est.std_err;
            }
        }
        if chosen_gain > best_user_gain {
            best_user_gain = chosen_gain;
            best_user_se = chosen_se;
        }
        choice.push(chosen);
    }
    Ok(BestResponsePolicy {
        grid,
        choice,
        best_user_gain,
        best_user_se,
    })
}

/// Wraps a contract plus a symmetric best-response policy as an off-chain
/// mechanism so the trustless evaluation can replay it end to end.
fn contract_as_mechanism(
    sc: &Scenario,
    contract: &CollusionContract,
    policy: &BestResponsePolicy,
) -> OffChainAttack {
    let options = contract.options.clone();
    let grid = policy.grid.clone();
    let choice = policy.choice.clone();
    let name = contract.name.clone();
    let profile_users: Vec<UserStrategy> = (0..sc.n.max(1))
        .map(|i| sc.profile.user(i).clone())
        .collect();
    let base_miner = sc.profile.miner.clone();
    let mechanism = OffChainMechanism {
        name: name.clone(),
        resolve: Arc::new(move |participants: &[(usize, f64)]| {
            // participants report the option index they chose
            let mut strategies = Vec::with_capacity(participants.len());
            let mut payments = Vec::with_capacity(participants.len());
            let mut miner = base_miner.clone();
            for &(_, msg) in participants {
                let oi = (msg as usize).min(options.len().saturating_sub(1));
                let opt = &options[oi];
                strategies.push(opt.user.clone());
                payments.push(opt.transfer);
                miner = opt.miner.clone();
            }
            OffChainResolution {
                miner,
                strategies,
                payments,
            }
        }),
    };
    let policy_fn = move |user: usize, v: f64| -> OffChainAction {
        // nearest grid point's best response
        let gi = grid
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - v).abs().partial_cmp(&(*b - v).abs()).expect("no NaN"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        match choice[gi] {
            Some(oi) => OffChainAction::Message(oi as f64),
            None => {
                OffChainAction::Abstain(profile_users[user.min(profile_users.len() - 1)].clone())
            }
        }
    };
    OffChainAttack {
        name,
        mechanism,
        policy: Arc::new(policy_fn),
    }
}

/// Constant-revenue check: expected miner revenue must not vary with the
/// number of participants, nor (at the largest n) with the conditioned value
/// of a single user.
pub fn check_constant_revenue(
    sc: &Scenario,
    cfg: &CheckCfg,
    n_list: &[usize],
) -> Result<PropertyVerdict, CheckerError> {
    let property = "constant_revenue";
    let budget = budget_summary(cfg, vec!["n_sweep".into(), "conditioned_value".into()]);
    let streams = cfg.streams(&sc.name, "constant_revenue");
    let mut estimates: Vec<(usize, SimEstimate)> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let scenario = resolve(&sc.mech, &sc.profile, &sc.dist, n)?;
        let est = estimate_stat(
            &scenario,
            cfg.budget.confirm_reps,
            &streams.labeled(&format!("n{n}")),
            |p| p.miner_utility,
        );
        estimates.push((n, est));
    }
    let mut best: Option<Witness> = None;
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let (na, ea) = estimates[i];
            let (nb, eb) = estimates[j];
            let diff = (ea.mean - eb.mean).abs();
            let se = (ea.std_err.powi(2) + eb.std_err.powi(2)).sqrt();
            let threshold = (cfg.thresholds.z * se).max(cfg.thresholds.benchmark_eps);
            if diff > threshold && best.as_ref().is_none_or(|b| diff > b.gain) {
                best = Some(Witness {
                    description: format!(
                        "revenue varies with market size: {:.6} at n={na} vs {:.6} at n={nb}",
                        ea.mean, eb.mean
                    ),
                    gain: diff,
                    std_err: se,
                    deviation: Deviation::RevenueVariation {
                        detail: format!("n={na}: {:.6}, n={nb}: {:.6}", ea.mean, eb.mean),
                    },
                });
            }
        }
    }
    // conditioning on one user's value at the largest n
    if let Some(&n) = n_list.iter().filter(|&&n| n >= 1).max() {
        if best.is_none() {
            let scenario = resolve(&sc.mech, &sc.profile, &sc.dist, n)?;
            let grid = sc.dist.inclusive_grid(cfg.budget.value_grid);
            let cond_reps = (cfg.budget.confirm_reps / 4).max(1);
            let mut cond: Vec<(f64, (f64, f64))> = Vec::with_capacity(grid.len());
            for (gi, &v) in grid.iter().enumerate() {
                let streams = streams.labeled(&format!("cond{gi}"));
                let acc = mc_accumulate(
                    &streams,
                    cond_reps,
                    RunningStat::default,
                    |acc, _, stream| {
                        let mut values: Vec<f64> = (0..n).map(|_| sc.dist.sample(stream)).collect();
                        values[0] = v;
                        let play = scenario.play(&values).expect("resolved play");
                        acc.push(play.miner_utility);
                    },
                );
                cond.push((v, (acc.mean(), acc.std_err())));
            }
            for i in 0..cond.len() {
                for j in i + 1..cond.len() {
                    let (va, (ma, sa)) = cond[i];
                    let (vb, (mb, sb)) = cond[j];
                    let diff = (ma - mb).abs();
                    let se = (sa.powi(2) + sb.powi(2)).sqrt();
                    let threshold = (cfg.thresholds.z * se).max(cfg.thresholds.benchmark_eps);
                    if diff > threshold && best.as_ref().is_none_or(|b| diff > b.gain) {
                        best = Some(Witness {
                            description: format!(
                                "revenue varies with a conditioned value at n={n}: \
                                 {ma:.6} at v={va:.3} vs {mb:.6} at v={vb:.3}"
                            ),
                            gain: diff,
                            std_err: se,
                            deviation: Deviation::RevenueVariation {
                                detail: format!("n={n}, v={va:.3}: {ma:.6} vs v={vb:.3}: {mb:.6}"),
                            },
                        });
                    }
                }
            }
        }
    }
    Ok(verdict(sc, property, best, budget, cfg.seed))
}

/// Expected-revenue ranking of several equilibria of one mechanism, on
/// shared draws.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumRanking {
    pub entries: Vec<RankedEquilibrium>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankedEquilibrium {
    pub name: String,
    pub mean: f64,
    pub std_err: f64,
}

pub fn compare_on_chain_equilibria(
    mech: &Mechanism,
    equilibria: &[(String, OnChainProfile)],
    dist: &ValueDistribution,
    n: usize,
    reps: u64,
    streams: &Substreams,
) -> Result<EquilibriumRanking, CheckerError> {
    assert!(!equilibria.is_empty());
    let resolved: Vec<ResolvedScenario> = equilibria
        .iter()
        .map(|(_, p)| resolve(mech, p, dist, n))
        .collect::<Result<_, _>>()?;
    let stats = mc_accumulate(
        streams,
        reps,
        || vec![RunningStat::default(); resolved.len()],
        |acc, _, stream| {
            let values: Vec<f64> = (0..n).map(|_| dist.sample(stream)).collect();
            for (i, r) in resolved.iter().enumerate() {
                acc[i].push(r.play(&values).expect("resolved play").miner_utility);
            }
        },
    );
    let mut entries: Vec<RankedEquilibrium> = equilibria
        .iter()
        .zip(&stats)
        .map(|((name, _), s)| RankedEquilibrium {
            name: name.clone(),
            mean: s.mean(),
            std_err: s.std_err(),
        })
        .collect();
    entries.sort_by(|a, b| b.mean.partial_cmp(&a.mean).expect("no NaN"));
    Ok(EquilibriumRanking { entries })
}

/// Replays a violation witness standalone with a fresh seed and the given
/// replication count. Returns None for witnesses that are precondition
/// failures rather than measured deviations.
pub fn replay_witness(
    sc: &Scenario,
    witness: &Witness,
    fresh_seed: u64,
    reps: u64,
) -> Result<Option<DiffEstimate>, CheckerError> {
    let streams = Substreams::new(fresh_seed)
        .labeled(&sc.name)
        .labeled("replay");
    let base = sc.resolved()?;
    let est = match &witness.deviation {
        Deviation::MinerDeviation { strategy } => {
            let dev = base.with_miner(strategy.clone())?;
            estimate_paired(&base, &dev, None, reps, &streams, |p| p.miner_utility)
        }
        Deviation::Cartel {
            user,
            value,
            bid,
            miner,
        } => {
            let dev = base
                .with_miner(miner.clone())?
                .with_user_fixed_bid(*user, *bid);
            let u = *user;
            estimate_paired(
                &base,
                &dev,
                Some((*user, *value)),
                reps,
                &streams,
                move |p| p.miner_utility + p.user_utilities[u],
            )
        }
        Deviation::UserBid {
            user,
            value,
            bid,
            conceal,
        } => {
            let dev = if *conceal {
                base.with_user_strategy(
                    *user,
                    UserStrategy::DraFixed {
                        bid: *bid,
                        reveal: false,
                    },
                )
            } else {
                base.with_user_fixed_bid(*user, *bid)
            };
            let u = *user;
            estimate_paired(
                &base,
                &dev,
                Some((*user, *value)),
                reps,
                &streams,
                move |p| p.user_utilities[u],
            )
        }
        Deviation::OffChainAttack { name } => {
            let attacks = known_off_chain_attacks(&sc.mech, &sc.dist, sc.n);
            let Some(attack) = attacks.iter().find(|a| &a.name == name) else {
                return Ok(None);
            };
            let rev = estimate_stat(&base, reps, &streams.labeled("base"), |p| p.miner_utility);
            let att = estimate_attack_revenue(
                &sc.mech,
                attack,
                &sc.dist,
                sc.n,
                reps,
                &streams.labeled("dev"),
            );
            return Ok(Some(DiffEstimate {
                base_mean: rev.mean,
                dev_mean: att.mean,
                gain: att.mean - rev.mean,
                std_err: (rev.std_err.powi(2) + att.std_err.powi(2)).sqrt(),
                reps,
                seed: fresh_seed,
            }));
        }
        Deviation::BenchmarkGap { .. } => {
            let rev = estimate_stat(&base, reps, &streams.labeled("base"), |p| p.miner_utility);
            let bench = optimal_revenue_benchmark(
                &sc.dist,
                sc.n,
                sc.mech.capacity(),
                sc.mech.burn_per_inclusion(),
                reps,
                &streams.labeled("bench"),
            );
            return Ok(Some(DiffEstimate {
                base_mean: rev.mean,
                dev_mean: bench.value,
                gain: bench.value - rev.mean,
                std_err: (rev.std_err.powi(2) + bench.std_err.powi(2)).sqrt(),
                reps,
                seed: fresh_seed,
            }));
        }
        _ => return Ok(None),
    };
    Ok(Some(est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::BelowReserve;

    fn u01() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    fn scenario(name: &str, mech: Mechanism, profile: OnChainProfile, n: usize) -> Scenario {
        Scenario {
            name: name.into(),
            mech,
            dist: u01(),
            n,
            profile,
        }
    }

    fn truthful(advice: f64) -> OnChainProfile {
        OnChainProfile::symmetric(MinerStrategy::Compliant { advice }, UserStrategy::Truthful)
    }

    fn c2pa_scenario() -> Scenario {
        scenario(
            "c2pa",
            Mechanism::KPlusOnePrice {
                k: 1,
                crypto: CryptoModel::Gatekeeper,
            },
            truthful(0.5),
            2,
        )
    }

    #[test]
    fn user_simplicity_verdicts() {
        let cfg = CheckCfg::small(11);
        let v = check_user_simplicity(&c2pa_scenario(), &cfg).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        // winner-pays-bid truthful: deviating downward pays less
        let sc = scenario(
            "wpb_truthful",
            Mechanism::WinnerPaysBid {
                k: 1,
                crypto: CryptoModel::Gatekeeper,
            },
            truthful(0.5),
            2,
        );
        let v = check_user_simplicity(&sc, &cfg).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().gain > 0.01);

        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.4 }, truthful(0.0), 2);
        let v = check_user_simplicity(&sc, &cfg).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        // non-truthful profile: trivial violation
        let sc = scenario(
            "bomb_pp",
            Mechanism::Bomb { reserve: 0.5 },
            OnChainProfile::symmetric(
                MinerStrategy::Compliant { advice: 0.0 },
                UserStrategy::Threshold { reserve: 0.5 },
            ),
            2,
        );
        let v = check_user_simplicity(&sc, &cfg).unwrap();
        assert!(!v.passed());
        assert!(matches!(
            v.witness.unwrap().deviation,
            Deviation::NonTruthfulProfile
        ));
    }

    #[test]
    fn miner_simplicity_flags_p2pa_shill_reserve() {
        let cfg = CheckCfg::small(13);
        let sc = scenario(
            "p2pa",
            Mechanism::KPlusOnePrice {
                k: 1,
                crypto: CryptoModel::Plaintext,
            },
            truthful(0.5),
            2,
        );
        let v = check_miner_simplicity(&sc, &cfg).unwrap();
        assert!(!v.passed());
        // E[max] − Myerson = 2/3 − 5/12 = 0.25
        let w = v.witness.unwrap();
        assert!((w.gain - 0.25).abs() < 0.03, "gain {}", w.gain);
    }

    #[test]
    fn miner_simplicity_passes_c2pa_and_eip() {
        let cfg = CheckCfg::small(17);
        let v = check_miner_simplicity(&c2pa_scenario(), &cfg).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.4 }, truthful(0.0), 2);
        let v = check_miner_simplicity(&sc, &cfg).unwrap();
        assert!(v.passed(), "{:?}", v.witness);
    }

    #[test]
    fn strong_collusion_flags_c2pa_and_passes_eip() {
        let cfg = CheckCfg::small(19);
        let v = check_strong_collusion(&c2pa_scenario(), &cfg, 0).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().gain > 0.005);

        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.4 }, truthful(0.0), 2);
        let v = check_strong_collusion(&sc, &cfg, 0).unwrap();
        assert!(v.passed(), "{:?}", v.witness);
    }

    #[test]
    fn strong_collusion_flags_wpb_value_equilibrium() {
        // reserve-to-zero with the cartel user bidding their value turns
        // all-below-reserve events into revenue
        let cfg = CheckCfg::small(53);
        let sc = scenario(
            "wpb_val",
            Mechanism::WinnerPaysBid {
                k: 1,
                crypto: CryptoModel::Gatekeeper,
            },
            OnChainProfile::symmetric(
                MinerStrategy::Compliant { advice: 0.5 },
                UserStrategy::ShadeWpb {
                    reserve: 0.5,
                    below: BelowReserve::BidValue,
                },
            ),
            2,
        );
        let v = check_strong_collusion(&sc, &cfg, 0).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().gain > 0.01);
    }

    #[test]
    fn cartel_gain_matches_three_region_oracle() {
        // U[0,1], n=2, r=0.5, v=0.6, shill φ⁻¹(0.6)=0.8:
        // baseline joint utility 0.6 everywhere; deviation 0.6·P(v_j ≤ 0.8)
        // + 0.8·P(v_j > 0.8) = 0.64
        let sc = c2pa_scenario();
        let streams = Substreams::new(7).labeled("cartel-oracle");
        let est = estimate_cartel_gain(
            &sc,
            0,
            0.6,
            0.8,
            &MinerStrategy::Compliant { advice: 0.5 },
            400_000,
            &streams,
        )
        .unwrap();
        assert!(
            (est.gain - 0.04).abs() <= 4.0 * est.std_err.max(1e-4),
            "gain {}",
            est.gain
        );
        assert!((est.base_mean - 0.6).abs() < 5e-3);
    }

    #[test]
    fn off_chain_influence_verdicts() {
        let cfg = CheckCfg::small(23);
        // EIP-1559 loses to the off-chain posted price
        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.3 }, truthful(0.0), 4);
        let v = check_off_chain_influence(&sc, &cfg).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().gain > 0.4);

        // C2PA at the monopoly reserve is revenue optimal
        let v = check_off_chain_influence(&c2pa_scenario(), &cfg).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        // SR2PA second-price equilibrium burns; the off-chain SPA beats it
        let sc = scenario("sr2pa", Mechanism::Sr2pa, truthful(0.5), 2);
        let v = check_off_chain_influence(&sc, &cfg).unwrap();
        assert!(!v.passed());
    }

    #[test]
    fn weak_collusion_passes_library_scenarios() {
        let cfg = CheckCfg::small(29);
        let v = check_weak_collusion(&c2pa_scenario(), &cfg, 0).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.4 }, truthful(0.0), 2);
        let v = check_weak_collusion(&sc, &cfg, 0).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        // posted-price rebate contract unravels under best response
        let sc = scenario(
            "posted_crypto",
            Mechanism::PostedPrice {
                crypto: CryptoModel::Gatekeeper,
            },
            truthful(0.5),
            2,
        );
        let v = check_weak_collusion(&sc, &cfg, 0).unwrap();
        assert!(v.passed(), "{:?}", v.witness);
    }

    #[test]
    fn trustless_collusion_corollary_and_direct_paths() {
        let cfg = CheckCfg::small(31);
        // C2PA passes via the corollary
        let v = check_trustless_collusion(&c2pa_scenario(), &cfg, None).unwrap();
        assert!(v.passed());
        assert!(v.budget.families.iter().any(|f| f.contains("corollary")));

        // EIP falls through to direct evaluation and still passes
        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.4 }, truthful(0.0), 2);
        let v = check_trustless_collusion(&sc, &cfg, None).unwrap();
        assert!(v.passed(), "{:?}", v.witness);
        assert!(!v.budget.families.iter().any(|f| f.contains("corollary")));
    }

    #[test]
    fn constant_revenue_verdicts() {
        let mut cfg = CheckCfg::small(37);
        cfg.budget.confirm_reps = 40_000;
        // EIP: identically zero for every n
        let sc = scenario("eip", Mechanism::Eip1559 { price: 0.4 }, truthful(0.0), 2);
        let v = check_constant_revenue(&sc, &cfg, &[0, 1, 2, 3, 4]).unwrap();
        assert!(v.passed(), "{:?}", v.witness);

        // posted price: revenue scales with n
        let sc = scenario(
            "posted_crypto",
            Mechanism::PostedPrice {
                crypto: CryptoModel::Gatekeeper,
            },
            truthful(0.5),
            2,
        );
        let v = check_constant_revenue(&sc, &cfg, &[1, 2]).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().gain > 0.2);

        // C2PA: revenue grows with n
        let v = check_constant_revenue(&c2pa_scenario(), &cfg, &[1, 2, 3]).unwrap();
        assert!(!v.passed());
    }

    #[test]
    fn equilibrium_comparison_bomb_and_wpb() {
        let streams = Substreams::new(41).labeled("compare");
        let d = u01();
        // BoMB: the posted-price equilibrium beats the shaded equilibrium
        let mech = Mechanism::Bomb { reserve: 0.5 };
        let pp = OnChainProfile::symmetric(
            MinerStrategy::Compliant { advice: 0.0 },
            UserStrategy::Threshold { reserve: 0.5 },
        );
        let wpb = OnChainProfile::symmetric(
            MinerStrategy::Compliant { advice: 0.0 },
            UserStrategy::ShadeWpb {
                reserve: 0.5,
                below: BelowReserve::BidValue,
            },
        );
        let ranking = compare_on_chain_equilibria(
            &mech,
            &[
                ("posted_price_eq".into(), pp),
                ("winner_pays_bid_eq".into(), wpb),
            ],
            &d,
            2,
            200_000,
            &streams,
        )
        .unwrap();
        assert_eq!(ranking.entries[0].name, "posted_price_eq");
        assert!((ranking.entries[0].mean - 0.5).abs() < 0.01);
        assert!((ranking.entries[1].mean - 5.0 / 12.0).abs() < 0.01);

        // WPB: the two below-reserve conventions tie at the monopoly reserve
        let mech = Mechanism::WinnerPaysBid {
            k: 1,
            crypto: CryptoModel::Gatekeeper,
        };
        let sigma_val = OnChainProfile::symmetric(
            MinerStrategy::Compliant { advice: 0.5 },
            UserStrategy::ShadeWpb {
                reserve: 0.5,
                below: BelowReserve::BidValue,
            },
        );
        let sigma_0 = OnChainProfile::symmetric(
            MinerStrategy::Compliant { advice: 0.5 },
            UserStrategy::ShadeWpb {
                reserve: 0.5,
                below: BelowReserve::BidZero,
            },
        );
        let ranking = compare_on_chain_equilibria(
            &mech,
            &[("sigma_val".into(), sigma_val), ("sigma_0".into(), sigma_0)],
            &d,
            2,
            100_000,
            &streams,
        )
        .unwrap();
        let diff = (ranking.entries[0].mean - ranking.entries[1].mean).abs();
        let se = (ranking.entries[0].std_err.powi(2) + ranking.entries[1].std_err.powi(2)).sqrt();
        assert!(diff <= 3.0 * se.max(1e-12), "diff {diff}");
    }

    #[test]
    fn violation_witnesses_replay() {
        let cfg = CheckCfg::small(43);
        // P2PA miner witness
        let sc = scenario(
            "p2pa",
            Mechanism::KPlusOnePrice {
                k: 1,
                crypto: CryptoModel::Plaintext,
            },
            truthful(0.5),
            2,
        );
        let v = check_miner_simplicity(&sc, &cfg).unwrap();
        let w = v.witness.expect("violation expected");
        let replay = replay_witness(&sc, &w, cfg.seed ^ 0xdead, cfg.budget.confirm_reps * 4)
            .unwrap()
            .expect("replayable");
        assert!(
            replay.gain > 3.0 * replay.std_err,
            "gain {} se {}",
            replay.gain,
            replay.std_err
        );

        // C2PA cartel witness
        let sc = c2pa_scenario();
        let v = check_strong_collusion(&sc, &cfg, 0).unwrap();
        let w = v.witness.expect("violation expected");
        let replay = replay_witness(&sc, &w, cfg.seed ^ 0xbeef, cfg.budget.confirm_reps * 4)
            .unwrap()
            .expect("replayable");
        assert!(replay.gain > 3.0 * replay.std_err);
    }

    #[test]
    fn dra_penalty_dial() {
        let mut cfg = CheckCfg::small(47);
        cfg.budget.confirm_reps = 100_000;
        let profile = OnChainProfile::symmetric(
            MinerStrategy::Compliant { advice: 0.0 },
            UserStrategy::DraTruthfulReveal,
        );
        // free concealment: selective reveal turns the auction first-price
        let sc = scenario(
            "dra_free",
            Mechanism::Dra {
                reserve: 0.5,
                conceal_penalty: 0.0,
            },
            profile.clone(),
            2,
        );
        let v = check_miner_simplicity(&sc, &cfg).unwrap();
        assert!(!v.passed());
        let w = v.witness.unwrap();
        assert!(matches!(
            w.deviation,
            Deviation::MinerDeviation {
                strategy: MinerStrategy::DraSelectiveReveal { .. }
            }
        ));

        // penalty at twice the value supremum: concealment never pays
        let sc = scenario(
            "dra_fined",
            Mechanism::Dra {
                reserve: 0.5,
                conceal_penalty: 2.0,
            },
            profile,
            2,
        );
        let v = check_miner_simplicity(&sc, &cfg).unwrap();
        assert!(v.passed(), "{:?}", v.witness);
    }
}
