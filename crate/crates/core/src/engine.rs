//! Executes the on-chain game and the off-chain game: resolves strategies
//! into bids and miner actions, runs the block-building process, accounts
//! utilities (fabricated-bid payments, conceal penalties, off-chain
//! transfers), and produces seeded Monte Carlo estimates.
//!
//! Determinism contract: every estimate is a function of (seed, reps) only.
//! Replication draws come from counter-based substreams and per-chunk
//! partials are merged in a fixed order, so results are bit-identical for
//! any number of worker threads.

use crate::agents::{
    AgentError, BelowReserve, BidContext, CustomBidFn, MinerStrategy, Observation, UserStrategy,
};
use crate::dist::ValueDistribution;
use crate::mech::{Bid, BidId, BidOrigin, CryptoModel, DraBid, Mechanism, Outcome, RevealChoice};
use crate::rng::{mc_accumulate, RngStream, RunningStat, Substreams};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("invalid profile: {0}")]
    Profile(String),
}

/// One miner strategy plus one strategy per user.
#[derive(Clone, Debug)]
pub struct OnChainProfile {
    pub miner: MinerStrategy,
    pub users: UserRoster,
}

#[derive(Clone, Debug)]
pub enum UserRoster {
    /// Every user plays the same strategy.
    Symmetric(UserStrategy),
    PerUser(Vec<UserStrategy>),
}

impl OnChainProfile {
    pub fn symmetric(miner: MinerStrategy, user: UserStrategy) -> Self {
        OnChainProfile {
            miner,
            users: UserRoster::Symmetric(user),
        }
    }

    pub fn user(&self, i: usize) -> &UserStrategy {
        match &self.users {
            UserRoster::Symmetric(s) => s,
            UserRoster::PerUser(v) => &v[i],
        }
    }

    /// Same profile with user `i` replaced.
    pub fn with_user(&self, n: usize, i: usize, s: UserStrategy) -> OnChainProfile {
        let mut users: Vec<UserStrategy> = (0..n).map(|j| self.user(j).clone()).collect();
        users[i] = s;
        OnChainProfile {
            miner: self.miner.clone(),
            users: UserRoster::PerUser(users),
        }
    }

    pub fn with_miner(&self, miner: MinerStrategy) -> OnChainProfile {
        OnChainProfile {
            miner,
            users: self.users.clone(),
        }
    }

    pub fn users_truthful(&self, n: usize) -> bool {
        (0..n).all(|i| self.user(i).is_truthful())
    }
}

/// Realized play of one auction instance.
#[derive(Clone, Debug)]
pub struct PlayResult {
    pub outcome: Outcome,
    pub user_utilities: Vec<f64>,
    /// Net miner utility: revenue from the block-building process minus all
    /// payments (including penalties) charged to fabricated bids.
    pub miner_utility: f64,
}

/// Monte Carlo estimate, reproducible bit-exactly from (seed, reps).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Common-random-numbers comparison of a deviation against a baseline.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiffEstimate {
    pub base_mean: f64,
    pub dev_mean: f64,
    /// Mean of the per-replication difference (dev − base).
    pub gain: f64,
    /// Standard error of the paired difference.
    pub std_err: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Precomputed shading curve: uniform grid on [reserve, hi], linear
/// interpolation in between.
#[derive(Clone, Debug)]
struct ShadeTable {
    reserve: f64,
    hi: f64,
    bids: Vec<f64>,
}

impl ShadeTable {
    const POINTS: usize = 1025;

    fn build(
        dist: &ValueDistribution,
        n: usize,
        k: usize,
        reserve: f64,
    ) -> Result<ShadeTable, AgentError> {
        let hi = dist.grid_hi().max(reserve + 1e-9);
        let mut bids = Vec::with_capacity(Self::POINTS);
        for i in 0..Self::POINTS {
            let v = reserve + (hi - reserve) * i as f64 / (Self::POINTS - 1) as f64;
            bids.push(crate::agents::shade_winner_pays_bid(
                dist, n, k, reserve, v,
            )?);
        }
        Ok(ShadeTable { reserve, hi, bids })
    }

    fn bid(&self, v: f64) -> f64 {
        let t = (v - self.reserve) / (self.hi - self.reserve) * (Self::POINTS - 1) as f64;
        if t <= 0.0 {
            return self.bids[0];
        }
        let i = t.floor() as usize;
        if i >= Self::POINTS - 1 {
            return self.bids[Self::POINTS - 1];
        }
        let frac = t - i as f64;
        self.bids[i] * (1.0 - frac) + self.bids[i + 1] * frac
    }
}

#[derive(Clone)]
enum ResolvedUser {
    Truthful,
    Threshold {
        reserve: f64,
    },
    Fixed {
        bid: f64,
    },
    DraFixed {
        bid: f64,
        reveal: bool,
    },
    Shade {
        reserve: f64,
        below: BelowReserve,
        table: Arc<ShadeTable>,
    },
    Custom(CustomBidFn),
}

/// A profile resolved against a mechanism, prior, and market size; shading
/// curves are tabulated once so Monte Carlo plays stay cheap.
pub struct ResolvedScenario<'a> {
    pub mech: &'a Mechanism,
    pub dist: &'a ValueDistribution,
    pub n: usize,
    miner: MinerStrategy,
    users: Vec<ResolvedUser>,
    multi_bid: bool,
}

/// Resolves a profile for play. Fails fast on information-constraint
/// violations (a plaintext-only miner strategy under gatekeeper or
/// deferred-revelation cryptography).
pub fn resolve<'a>(
    mech: &'a Mechanism,
    profile: &OnChainProfile,
    dist: &'a ValueDistribution,
    n: usize,
) -> Result<ResolvedScenario<'a>, EngineError> {
    if mech.crypto() != CryptoModel::Plaintext && profile.miner.needs_plaintext() {
        return Err(AgentError::InfoViolation {
            needs: "plaintext bids",
            got: "bid identifiers only",
        }
        .into());
    }
    let mut users = Vec::with_capacity(n);
    let mut shade_cache: Vec<(f64, Arc<ShadeTable>)> = Vec::new();
    for i in 0..n {
        let resolved = match profile.user(i) {
            UserStrategy::Truthful | UserStrategy::DraTruthfulReveal => ResolvedUser::Truthful,
            UserStrategy::Threshold { reserve } => ResolvedUser::Threshold { reserve: *reserve },
            UserStrategy::Fixed { bid } => ResolvedUser::Fixed { bid: *bid },
            UserStrategy::DraFixed { bid, reveal } => ResolvedUser::DraFixed {
                bid: *bid,
                reveal: *reveal,
            },
            UserStrategy::ShadeWpb { reserve, below } => {
                let table = match shade_cache.iter().find(|(r, _)| r == reserve) {
                    Some((_, t)) => t.clone(),
                    None => {
                        let t = Arc::new(
                            ShadeTable::build(dist, n, mech.shading_k(), *reserve)
                                .map_err(EngineError::from)?,
                        );
                        shade_cache.push((*reserve, t.clone()));
                        t
                    }
                };
                ResolvedUser::Shade {
                    reserve: *reserve,
                    below: *below,
                    table,
                }
            }
            UserStrategy::Custom(f) => ResolvedUser::Custom(f.clone()),
        };
        users.push(resolved);
    }
    Ok(ResolvedScenario {
        mech,
        dist,
        n,
        miner: profile.miner.clone(),
        users,
        multi_bid: false,
    })
}

/// As [`resolve`], allowing custom strategies to submit several bids.
pub fn resolve_multi_bid<'a>(
    mech: &'a Mechanism,
    profile: &OnChainProfile,
    dist: &'a ValueDistribution,
    n: usize,
) -> Result<ResolvedScenario<'a>, EngineError> {
    let mut r = resolve(mech, profile, dist, n)?;
    r.multi_bid = true;
    Ok(r)
}

impl<'a> ResolvedScenario<'a> {
    pub fn with_miner(&self, miner: MinerStrategy) -> Result<ResolvedScenario<'a>, EngineError> {
        if self.mech.crypto() != CryptoModel::Plaintext && miner.needs_plaintext() {
            return Err(AgentError::InfoViolation {
                needs: "plaintext bids",
                got: "bid identifiers only",
            }
            .into());
        }
        Ok(ResolvedScenario {
            mech: self.mech,
            dist: self.dist,
            n: self.n,
            miner,
            users: self.users.clone(),
            multi_bid: self.multi_bid,
        })
    }

    pub fn with_user_fixed_bid(&self, i: usize, bid: f64) -> ResolvedScenario<'a> {
        let mut users = self.users.clone();
        users[i] = match self.mech {
            Mechanism::Dra { .. } => ResolvedUser::DraFixed { bid, reveal: true },
            _ => ResolvedUser::Fixed { bid },
        };
        ResolvedScenario {
            mech: self.mech,
            dist: self.dist,
            n: self.n,
            miner: self.miner.clone(),
            users,
            multi_bid: self.multi_bid,
        }
    }

    /// Same scenario with user `i` playing an arbitrary strategy. Shading
    /// strategies are tabulated on demand.
    pub fn with_user_strategy(&self, i: usize, strategy: UserStrategy) -> ResolvedScenario<'a> {
        let mut users = self.users.clone();
        users[i] = match strategy {
            UserStrategy::Truthful | UserStrategy::DraTruthfulReveal => ResolvedUser::Truthful,
            UserStrategy::Threshold { reserve } => ResolvedUser::Threshold { reserve },
            UserStrategy::Fixed { bid } => ResolvedUser::Fixed { bid },
            UserStrategy::DraFixed { bid, reveal } => ResolvedUser::DraFixed { bid, reveal },
            UserStrategy::ShadeWpb { reserve, below } => {
                let table = Arc::new(
                    ShadeTable::build(self.dist, self.n, self.mech.shading_k(), reserve)
                        .expect("shading quadrature"),
                );
                ResolvedUser::Shade {
                    reserve,
                    below,
                    table,
                }
            }
            UserStrategy::Custom(f) => ResolvedUser::Custom(f),
        };
        ResolvedScenario {
            mech: self.mech,
            dist: self.dist,
            n: self.n,
            miner: self.miner.clone(),
            users,
            multi_bid: self.multi_bid,
        }
    }

    fn user_bids(&self, values: &[f64]) -> Result<(Vec<Bid>, Vec<usize>), EngineError> {
        let ctx = BidContext {
            n: self.n,
            k: self.mech.shading_k(),
            dist: self.dist,
        };
        let mut bids = Vec::with_capacity(self.n);
        let mut owner = Vec::with_capacity(self.n);
        for (i, ru) in self.users.iter().enumerate() {
            let v = values[i];
            let user_bids: Vec<f64> = match ru {
                ResolvedUser::Truthful => vec![v],
                ResolvedUser::Threshold { reserve } => {
                    vec![if v >= *reserve { *reserve } else { 0.0 }]
                }
                ResolvedUser::Fixed { bid } | ResolvedUser::DraFixed { bid, .. } => vec![*bid],
                ResolvedUser::Shade {
                    reserve,
                    below,
                    table,
                } => {
                    vec![if v >= *reserve {
                        table.bid(v)
                    } else {
                        match below {
                            BelowReserve::BidValue => v,
                            BelowReserve::BidZero => 0.0,
                        }
                    }]
                }
                ResolvedUser::Custom(f) => f(v, &ctx),
            };
            if !self.multi_bid && user_bids.len() != 1 {
                return Err(EngineError::Profile(format!(
                    "user {i} submitted {} bids; exactly one is required unless multi-bid mode is enabled",
                    user_bids.len()
                )));
            }
            for amount in user_bids {
                let id = bids.len() as u32;
                bids.push(Bid {
                    id: BidId(id),
                    amount,
                    origin: BidOrigin::User,
                });
                owner.push(i);
            }
        }
        Ok((bids, owner))
    }

    /// Plays one instance of the on-chain game.
    pub fn play(&self, values: &[f64]) -> Result<PlayResult, EngineError> {
        debug_assert_eq!(values.len(), self.n);
        let (user_bids, owner) = self.user_bids(values)?;

        let ids: Vec<BidId>;
        let obs = match self.mech.crypto() {
            CryptoModel::Plaintext => Observation::Bids(&user_bids),
            CryptoModel::Gatekeeper | CryptoModel::DeferredRevelation => {
                ids = user_bids.iter().map(|b| b.id).collect();
                Observation::Ids(&ids)
            }
        };
        let action = self.miner.act(&obs, self.mech)?;

        let mut forward = action.forward;
        forward.sort_unstable();
        let forwarded: Vec<Bid> = user_bids
            .iter()
            .filter(|b| forward.binary_search(&b.id).is_ok())
            .copied()
            .collect();

        let fab_base = user_bids.len() as u32;
        let fabricated: Vec<Bid> = action
            .fabricated
            .iter()
            .enumerate()
            .map(|(j, &amount)| Bid {
                id: BidId(fab_base + j as u32),
                amount,
                origin: BidOrigin::Fabricated,
            })
            .collect();

        let outcome = match self.mech {
            Mechanism::Dra {
                reserve,
                conceal_penalty,
            } => {
                let mut dra_bids: Vec<DraBid> =
                    Vec::with_capacity(forwarded.len() + fabricated.len());
                let mut revealed_user_amounts = Vec::with_capacity(forwarded.len());
                for b in &forwarded {
                    let choice = match &self.users[owner[b.id.0 as usize]] {
                        ResolvedUser::DraFixed { reveal: false, .. } => RevealChoice::Conceal,
                        _ => RevealChoice::Reveal,
                    };
                    if choice == RevealChoice::Reveal {
                        revealed_user_amounts.push(b.amount);
                    }
                    dra_bids.push(DraBid {
                        bid: *b,
                        phase_two: choice,
                    });
                }
                let fab_choices = self
                    .miner
                    .dra_reveal(&revealed_user_amounts, &action.fabricated);
                for (b, choice) in fabricated.iter().zip(fab_choices) {
                    dra_bids.push(DraBid {
                        bid: *b,
                        phase_two: choice,
                    });
                }
                crate::mech::dra(*reserve, *conceal_penalty, &dra_bids)
            }
            _ => {
                let mut all = forwarded;
                all.extend_from_slice(&fabricated);
                self.mech.run(action.advice, &all)
            }
        };

        // a user's value accrues once if at least one of their bids lands
        let mut user_utilities = vec![0.0; self.n];
        let mut allocated = vec![false; self.n];
        for (bid_idx, &user) in owner.iter().enumerate() {
            let id = BidId(bid_idx as u32);
            if outcome.is_included(id) && !allocated[user] {
                allocated[user] = true;
                user_utilities[user] += values[user];
            }
            user_utilities[user] -= outcome.payment_of(id);
        }
        let fabricated_payments: f64 = fabricated.iter().map(|b| outcome.payment_of(b.id)).sum();
        let miner_utility = outcome.miner_revenue - fabricated_payments;

        Ok(PlayResult {
            outcome,
            user_utilities,
            miner_utility,
        })
    }
}

/// Convenience single-shot play without pre-resolving.
pub fn play_on_chain(
    mech: &Mechanism,
    profile: &OnChainProfile,
    dist: &ValueDistribution,
    values: &[f64],
) -> Result<PlayResult, EngineError> {
    resolve(mech, profile, dist, values.len())?.play(values)
}

fn draw_values(dist: &ValueDistribution, n: usize, stream: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| dist.sample(stream)).collect()
}

/// Monte Carlo mean of an arbitrary statistic of the play.
pub fn estimate_stat<F>(
    scenario: &ResolvedScenario,
    reps: u64,
    streams: &Substreams,
    stat: F,
) -> SimEstimate
where
    F: Fn(&PlayResult) -> f64 + Sync,
{
    let acc = mc_accumulate(streams, reps, RunningStat::default, |acc, _, stream| {
        let values = draw_values(scenario.dist, scenario.n, stream);
        let play = scenario
            .play(&values)
            .expect("resolved scenario plays are infallible");
        acc.push(stat(&play));
    });
    SimEstimate {
        mean: acc.mean(),
        std_err: acc.std_err(),
        reps,
        seed: streams.seed(),
    }
}

/// Expected net miner revenue of the on-chain game.
pub fn estimate_miner_revenue(
    mech: &Mechanism,
    profile: &OnChainProfile,
    dist: &ValueDistribution,
    n: usize,
    reps: u64,
    streams: &Substreams,
) -> Result<SimEstimate, EngineError> {
    let scenario = resolve(mech, profile, dist, n)?;
    Ok(estimate_stat(&scenario, reps, streams, |p| p.miner_utility))
}

/// Expected total user payments (on-chain transaction fees).
pub fn estimate_total_payments(
    mech: &Mechanism,
    profile: &OnChainProfile,
    dist: &ValueDistribution,
    n: usize,
    reps: u64,
    streams: &Substreams,
) -> Result<SimEstimate, EngineError> {
    let scenario = resolve(mech, profile, dist, n)?;
    Ok(estimate_stat(&scenario, reps, streams, |p| {
        p.outcome.total_payments() - p.outcome.penalties_collected
    }))
}

/// Paired (common-random-numbers) comparison: both scenarios are played on
/// identical value draws; `fixed` pins one user's value.
pub fn estimate_paired<F>(
    base: &ResolvedScenario,
    dev: &ResolvedScenario,
    fixed: Option<(usize, f64)>,
    reps: u64,
    streams: &Substreams,
    stat: F,
) -> DiffEstimate
where
    F: Fn(&PlayResult) -> f64 + Sync,
{
    debug_assert_eq!(base.n, dev.n);
    let stats = mc_accumulate(
        streams,
        reps,
        || vec![RunningStat::default(); 3],
        |acc, _, stream| {
            let mut values = draw_values(base.dist, base.n, stream);
            if let Some((i, v)) = fixed {
                values[i] = v;
            }
            let b = stat(&base.play(&values).expect("resolved base play"));
            let d = stat(&dev.play(&values).expect("resolved deviation play"));
            acc[0].push(b);
            acc[1].push(d);
            acc[2].push(d - b);
        },
    );
    DiffEstimate {
        base_mean: stats[0].mean(),
        dev_mean: stats[1].mean(),
        gain: stats[2].mean(),
        std_err: stats[2].std_err(),
        reps,
        seed: streams.seed(),
    }
}

/// One user's report to an off-chain mechanism, or the abstaining bid
/// requesting a given on-chain strategy.
#[derive(Clone, Debug)]
pub enum OffChainAction {
    Abstain(UserStrategy),
    Message(f64),
}

/// Output of resolving an off-chain mechanism on the non-abstaining
/// participants: the miner's on-chain strategy, one on-chain strategy per
/// participant, and one off-chain payment per participant.
#[derive(Clone, Debug)]
pub struct OffChainResolution {
    pub miner: MinerStrategy,
    pub strategies: Vec<UserStrategy>,
    pub payments: Vec<f64>,
}

/// A committed off-chain mechanism. `resolve` sees only the non-abstaining
/// participants (user index, message), which enforces abstain-invariance by
/// construction.
#[derive(Clone)]
pub struct OffChainMechanism {
    pub name: String,
    pub resolve: Arc<ResolveFn>,
}

/// Maps the non-abstaining participants (user index, message) to on-chain
/// behaviour and transfers.
pub type ResolveFn = dyn Fn(&[(usize, f64)]) -> OffChainResolution + Send + Sync;

impl OffChainMechanism {
    /// The trivial mechanism: everyone abstains and the miner plays a fixed
    /// on-chain strategy.
    pub fn trivial(miner: MinerStrategy) -> OffChainMechanism {
        OffChainMechanism {
            name: "trivial".into(),
            resolve: Arc::new(move |_| OffChainResolution {
                miner: miner.clone(),
                strategies: Vec::new(),
                payments: Vec::new(),
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OffChainPlay {
    pub result: PlayResult,
    pub off_chain_payments: Vec<f64>,
}

/// Plays the off-chain game: resolves the mechanism over non-abstaining
/// messages, runs the induced on-chain game, then settles transfers.
pub fn play_off_chain(
    mech: &Mechanism,
    off: &OffChainMechanism,
    actions: &[OffChainAction],
    dist: &ValueDistribution,
    values: &[f64],
) -> Result<OffChainPlay, EngineError> {
    let n = values.len();
    debug_assert_eq!(actions.len(), n);
    let participants: Vec<(usize, f64)> = actions
        .iter()
        .enumerate()
        .filter_map(|(i, a)| match a {
            OffChainAction::Message(m) => Some((i, *m)),
            OffChainAction::Abstain(_) => None,
        })
        .collect();
    let resolution = (off.resolve)(&participants);
    if resolution.strategies.len() != participants.len()
        || resolution.payments.len() != participants.len()
    {
        return Err(EngineError::Profile(format!(
            "off-chain mechanism '{}' resolved {} strategies / {} payments for {} participants",
            off.name,
            resolution.strategies.len(),
            resolution.payments.len(),
            participants.len()
        )));
    }

    let mut users: Vec<UserStrategy> = actions
        .iter()
        .map(|a| match a {
            OffChainAction::Abstain(s) => s.clone(),
            OffChainAction::Message(_) => UserStrategy::Truthful, // placeholder
        })
        .collect();
    let mut off_chain_payments = vec![0.0; n];
    for (slot, &(user, _)) in participants.iter().enumerate() {
        users[user] = resolution.strategies[slot].clone();
        off_chain_payments[user] = resolution.payments[slot];
    }

    let profile = OnChainProfile {
        miner: resolution.miner,
        users: UserRoster::PerUser(users),
    };
    let mut play = play_on_chain(mech, &profile, dist, values)?;
    for (u, p) in play.user_utilities.iter_mut().zip(&off_chain_payments) {
        *u -= p;
    }
    play.miner_utility += off_chain_payments.iter().sum::<f64>();
    Ok(OffChainPlay {
        result: play,
        off_chain_payments,
    })
}

/// An off-chain attack bundled with the documented user best response.
#[derive(Clone)]
pub struct OffChainAttack {
    pub name: String,
    pub mechanism: OffChainMechanism,
    pub policy: Arc<dyn Fn(usize, f64) -> OffChainAction + Send + Sync>,
}

/// Expected miner revenue of an attack under its documented user responses.
pub fn estimate_attack_revenue(
    mech: &Mechanism,
    attack: &OffChainAttack,
    dist: &ValueDistribution,
    n: usize,
    reps: u64,
    streams: &Substreams,
) -> SimEstimate {
    let acc = mc_accumulate(streams, reps, RunningStat::default, |acc, _, stream| {
        let values = draw_values(dist, n, stream);
        let actions: Vec<OffChainAction> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (attack.policy)(i, v))
            .collect();
        let play = play_off_chain(mech, &attack.mechanism, &actions, dist, &values)
            .expect("attack plays are infallible");
        acc.push(play.result.miner_utility);
    });
    SimEstimate {
        mean: acc.mean(),
        std_err: acc.std_err(),
        reps,
        seed: streams.seed(),
    }
}

/// The attack library relevant to a mechanism: entry-fee censorship with a
/// grid-optimized fee, the off-chain posted price at the inverse virtual
/// value of the burn, the off-chain second-price auction at the monopoly
/// reserve, and equilibrium steering for the matched-bid auction.
pub fn known_off_chain_attacks(
    mech: &Mechanism,
    dist: &ValueDistribution,
    _n: usize,
) -> Vec<OffChainAttack> {
    match mech {
        Mechanism::Eip1559 { price } => {
            let p = *price;
            let mut attacks = Vec::new();
            if let Ok(q) = dist.inverse_virtual(p) {
                attacks.push(posted_price_attack("off_chain_posted_price", p, q));
            }
            // entry fee γ maximizing γ·(1−F(p+γ)) over a grid
            let hi = dist.grid_hi();
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 1..200 {
                let gamma = (hi - p).max(0.0) * i as f64 / 200.0;
                let rev = gamma * (1.0 - dist.cdf(p + gamma));
                if rev > best.1 {
                    best = (gamma, rev);
                }
            }
            if best.1 > 0.0 {
                attacks.push(posted_price_attack("entry_fee_censor", p, p + best.0));
            }
            attacks
        }
        Mechanism::Sr2pa | Mechanism::Dra { .. } => {
            let reserve = dist.monopoly_reserve().map(|r| r.value).unwrap_or(0.0);
            if matches!(mech, Mechanism::Sr2pa) {
                vec![off_chain_second_price_attack(reserve)]
            } else {
                Vec::new()
            }
        }
        Mechanism::Bomb { reserve } => vec![steer_to_posted_price_attack(*reserve)],
        _ => Vec::new(),
    }
}

/// Off-chain posted price `q`: participants pay q − on-chain price off-chain,
/// bid exactly the on-chain price, and everyone else is censored.
fn posted_price_attack(name: &str, on_chain_price: f64, q: f64) -> OffChainAttack {
    let mechanism = OffChainMechanism {
        name: name.into(),
        resolve: Arc::new(move |participants: &[(usize, f64)]| {
            let keep: std::collections::BTreeSet<BidId> =
                participants.iter().map(|&(u, _)| BidId(u as u32)).collect();
            OffChainResolution {
                miner: MinerStrategy::Censor {
                    advice: 0.0,
                    rule: crate::agents::CensorRule::KeepIds(keep),
                },
                strategies: vec![
                    UserStrategy::Fixed {
                        bid: on_chain_price
                    };
                    participants.len()
                ],
                payments: vec![q - on_chain_price; participants.len()],
            }
        }),
    };
    OffChainAttack {
        name: name.into(),
        mechanism,
        policy: Arc::new(move |_, v| {
            if v >= q {
                OffChainAction::Message(v)
            } else {
                OffChainAction::Abstain(UserStrategy::Truthful)
            }
        }),
    }
}

/// Off-chain second-price auction with reserve: the winner is instructed to
/// bid zero on-chain, pays the second price off-chain, everyone else is
/// censored. Avoids all on-chain burning.
fn off_chain_second_price_attack(reserve: f64) -> OffChainAttack {
    let mechanism = OffChainMechanism {
        name: "off_chain_second_price".into(),
        resolve: Arc::new(move |participants: &[(usize, f64)]| {
            let mut strategies = vec![UserStrategy::Fixed { bid: 0.0 }; participants.len()];
            let mut payments = vec![0.0; participants.len()];
            let winner = participants
                .iter()
                .enumerate()
                .filter(|(_, &(_, m))| m >= reserve)
                .max_by(|(_, &(ua, a)), (_, &(ub, b))| {
                    a.partial_cmp(&b)
                        .expect("no NaN messages")
                        .then(ub.cmp(&ua))
                })
                .map(|(slot, _)| slot);
            let mut keep = std::collections::BTreeSet::new();
            if let Some(w) = winner {
                let second = participants
                    .iter()
                    .enumerate()
                    .filter(|&(slot, _)| slot != w)
                    .map(|(_, &(_, m))| m)
                    .fold(0.0, f64::max);
                payments[w] = second.max(reserve);
                strategies[w] = UserStrategy::Fixed { bid: 0.0 };
                keep.insert(BidId(participants[w].0 as u32));
            }
            OffChainResolution {
                miner: MinerStrategy::Censor {
                    advice: 0.0,
                    rule: crate::agents::CensorRule::KeepIds(keep),
                },
                strategies,
                payments,
            }
        }),
    };
    OffChainAttack {
        name: "off_chain_second_price".into(),
        mechanism,
        // bidding the value is dominant in the committed second-price auction
        policy: Arc::new(|_, v| OffChainAction::Message(v)),
    }
}

/// No payments: the mechanism only recommends the posted-price equilibrium
/// strategies, steering users toward the higher-revenue equilibrium.
fn steer_to_posted_price_attack(reserve: f64) -> OffChainAttack {
    let mechanism = OffChainMechanism {
        name: "steer_to_posted_price".into(),
        resolve: Arc::new(move |participants: &[(usize, f64)]| OffChainResolution {
            miner: MinerStrategy::Compliant { advice: 0.0 },
            strategies: vec![UserStrategy::Threshold { reserve }; participants.len()],
            payments: vec![0.0; participants.len()],
        }),
    };
    OffChainAttack {
        name: "steer_to_posted_price".into(),
        mechanism,
        policy: Arc::new(|_, v| OffChainAction::Message(v)),
    }
}
