//! Strategy library: user bidding strategies and miner strategies, each
//! tagged with the information it may legally observe.
//!
//! Miner strategies are evaluated against an [`Observation`] that carries
//! either bid identifiers only (gatekeeper) or full bids (plaintext); a
//! strategy that needs amounts fails with `InfoViolation` when handed ids.

use crate::dist::ValueDistribution;
use crate::mech::{Bid, BidId, Mechanism, RevealChoice};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AgentError {
    #[error("strategy requires {needs} but the cryptographic model provides {got}")]
    InfoViolation {
        needs: &'static str,
        got: &'static str,
    },
    #[error("quadrature failed to converge: {0}")]
    NumericFailure(String),
}

/// Behaviour of the pay-your-bid shading strategy for values below the
/// reserve (such users never win; both variants are equilibria).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum BelowReserve {
    BidValue,
    BidZero,
}

/// Value-to-bids mapping for custom strategies.
pub type CustomBidFn = Arc<dyn Fn(f64, &BidContext) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum UserStrategy {
    /// Bid exactly the value.
    Truthful,
    /// Pay-your-bid equilibrium shading at the given reserve.
    ShadeWpb { reserve: f64, below: BelowReserve },
    /// Bid the threshold when the value clears it, zero otherwise.
    Threshold { reserve: f64 },
    /// Constant bid regardless of value.
    Fixed { bid: f64 },
    /// Deferred-revelation: bid the value, reveal in phase two.
    DraTruthfulReveal,
    /// Deferred-revelation deviation: fixed bid with an explicit phase-two
    /// choice. Used by checkers, not part of the scenario vocabulary.
    DraFixed { bid: f64, reveal: bool },
    /// Arbitrary value-to-bids mapping.
    Custom(CustomBidFn),
}

impl fmt::Debug for UserStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserStrategy::Truthful => write!(f, "Truthful"),
            UserStrategy::ShadeWpb { reserve, below } => {
                write!(f, "ShadeWpb {{ reserve: {reserve}, below: {below:?} }}")
            }
            UserStrategy::Threshold { reserve } => write!(f, "Threshold {{ reserve: {reserve} }}"),
            UserStrategy::Fixed { bid } => write!(f, "Fixed {{ bid: {bid} }}"),
            UserStrategy::DraTruthfulReveal => write!(f, "DraTruthfulReveal"),
            UserStrategy::DraFixed { bid, reveal } => {
                write!(f, "DraFixed {{ bid: {bid}, reveal: {reveal} }}")
            }
            UserStrategy::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Everything a user strategy may condition on besides the value.
pub struct BidContext<'a> {
    pub n: usize,
    pub k: usize,
    pub dist: &'a ValueDistribution,
}

impl UserStrategy {
    /// The bids this strategy submits for value `v`. All shipped strategies
    /// emit exactly one bid.
    pub fn bids(&self, v: f64, ctx: &BidContext) -> Result<Vec<f64>, AgentError> {
        match self {
            UserStrategy::Truthful | UserStrategy::DraTruthfulReveal => Ok(vec![v]),
            UserStrategy::ShadeWpb { reserve, below } => {
                if v >= *reserve {
                    Ok(vec![shade_winner_pays_bid(
                        ctx.dist, ctx.n, ctx.k, *reserve, v,
                    )?])
                } else {
                    Ok(vec![match below {
                        BelowReserve::BidValue => v,
                        BelowReserve::BidZero => 0.0,
                    }])
                }
            }
            UserStrategy::Threshold { reserve } => {
                Ok(vec![if v >= *reserve { *reserve } else { 0.0 }])
            }
            UserStrategy::Fixed { bid } => Ok(vec![*bid]),
            UserStrategy::DraFixed { bid, .. } => Ok(vec![*bid]),
            UserStrategy::Custom(f) => Ok(f(v, ctx)),
        }
    }

    /// Phase-two choice in the deferred-revelation model.
    pub fn reveal_choice(&self) -> RevealChoice {
        match self {
            UserStrategy::DraFixed { reveal: false, .. } => RevealChoice::Conceal,
            _ => RevealChoice::Reveal,
        }
    }

    /// Truthful in the sense of the on-chain user-simplicity precondition.
    pub fn is_truthful(&self) -> bool {
        matches!(
            self,
            UserStrategy::Truthful | UserStrategy::DraTruthfulReveal
        )
    }
}

/// CDF of the k-th highest of `m` i.i.d. draws (0 when m < k): the
/// probability that at most k−1 draws exceed `z`.
fn kth_highest_cdf(dist: &ValueDistribution, m: usize, k: usize, z: f64) -> f64 {
    if m < k {
        return 1.0;
    }
    let f = dist.cdf(z);
    let q = 1.0 - f;
    let mut total = 0.0;
    let mut binom = 1.0; // C(m, j)
    for j in 0..k {
        if j > 0 {
            binom *= (m - j + 1) as f64 / j as f64;
        }
        total += binom * q.powi(j as i32) * f.powi((m - j) as i32);
    }
    total
}

/// Adaptive Simpson quadrature with absolute tolerance.
#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, AgentError> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, AgentError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(AgentError::NumericFailure(format!(
                "adaptive Simpson did not converge on [{a}, {b}]"
            )));
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    if b <= a {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Equilibrium bid for the pay-your-bid auction with reserve `r`:
/// E[max(r, Y_k) | Y_k ≤ v], where Y_k is the k-th highest of n−1 opponent
/// draws (0 when there are fewer than k opponents). Computed as
/// v − ∫_r^v G / G(v) with G the CDF of Y_k; strictly increasing in v above
/// the reserve and never exceeding v.
pub fn shade_winner_pays_bid(
    dist: &ValueDistribution,
    n: usize,
    k: usize,
    reserve: f64,
    v: f64,
) -> Result<f64, AgentError> {
    assert!(n >= 1 && k >= 1);
    assert!(
        v >= reserve,
        "shading is defined for v >= reserve; below-reserve behaviour is the caller's choice"
    );
    let m = n - 1;
    if m < k || v == reserve {
        return Ok(reserve);
    }
    let g = |z: f64| kth_highest_cdf(dist, m, k, z);
    let gv = g(v);
    if gv <= 0.0 {
        return Ok(reserve);
    }
    let integral = adaptive_simpson(&g, reserve, v, 1e-10)?;
    Ok(v - integral / gv)
}

/// Identifier-based censor rules (legal in every cryptographic model).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CensorRule {
    DropIds(BTreeSet<BidId>),
    KeepIds(BTreeSet<BidId>),
    /// Drop the j smallest ids among submitted user bids.
    DropLowestIds(usize),
}

impl CensorRule {
    fn apply(&self, forward: &mut Vec<BidId>) {
        match self {
            CensorRule::DropIds(drop) => forward.retain(|id| !drop.contains(id)),
            CensorRule::KeepIds(keep) => forward.retain(|id| keep.contains(id)),
            CensorRule::DropLowestIds(j) => {
                forward.sort_unstable();
                forward.drain(..(*j).min(forward.len()));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MinerStrategy {
    /// Constant advice, forward everything, fabricate nothing.
    Compliant { advice: f64 },
    /// Compliant advice plus an id-based censor rule.
    Censor { advice: f64, rule: CensorRule },
    /// Compliant advice plus fabricated bids at fixed amounts.
    Fabricate { advice: f64, amounts: Vec<f64> },
    /// Plaintext: advise a reserve equal to the largest submitted bid (the
    /// ε→0 shill reserve).
    ReserveAtMaxBid,
    /// Plaintext: advise the revenue-maximising reserve argmax_i i·b^(i)
    /// over the top k bids.
    P2paRevenueReserve,
    /// Keep only bids from the paid set, as resolved by an off-chain
    /// entry-fee mechanism charging `fee`.
    EntryFeeCensor {
        advice: f64,
        fee: f64,
        paid: BTreeSet<BidId>,
    },
    /// Deferred-revelation: fabricate one bid per grid point in the
    /// commitment phase, then reveal exactly the grid points strictly below
    /// the largest revealed user bid.
    DraSelectiveReveal { grid: Vec<f64> },
    /// Apply sub-strategies left to right; later advice wins, censors
    /// compose, fabrications accumulate.
    Composite(Vec<MinerStrategy>),
}

/// What the miner sees before choosing its commitment-phase action.
pub enum Observation<'a> {
    Ids(&'a [BidId]),
    Bids(&'a [Bid]),
}

impl Observation<'_> {
    pub fn ids(&self) -> Vec<BidId> {
        match self {
            Observation::Ids(ids) => ids.to_vec(),
            Observation::Bids(bids) => bids.iter().map(|b| b.id).collect(),
        }
    }

    fn amounts(&self) -> Option<Vec<f64>> {
        match self {
            Observation::Ids(_) => None,
            Observation::Bids(bids) => Some(bids.iter().map(|b| b.amount).collect()),
        }
    }
}

/// The resolved commitment-phase action: advice, forwarded user bids, and
/// fabricated bid amounts.
#[derive(Clone, Debug, PartialEq)]
pub struct MinerAction {
    pub advice: f64,
    pub forward: Vec<BidId>,
    pub fabricated: Vec<f64>,
}

impl MinerStrategy {
    pub fn is_compliant(&self) -> bool {
        matches!(self, MinerStrategy::Compliant { .. })
    }

    /// Whether the commitment-phase action reads bid amounts.
    pub fn needs_plaintext(&self) -> bool {
        match self {
            MinerStrategy::ReserveAtMaxBid | MinerStrategy::P2paRevenueReserve => true,
            MinerStrategy::Composite(parts) => parts.iter().any(|p| p.needs_plaintext()),
            _ => false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            MinerStrategy::Compliant { advice } => format!("compliant({advice})"),
            MinerStrategy::Censor { rule, .. } => format!("censor({rule:?})"),
            MinerStrategy::Fabricate { amounts, .. } => format!("fabricate({amounts:?})"),
            MinerStrategy::ReserveAtMaxBid => "reserve_at_max_bid".into(),
            MinerStrategy::P2paRevenueReserve => "p2pa_revenue_reserve".into(),
            MinerStrategy::EntryFeeCensor { fee, .. } => format!("entry_fee_censor({fee})"),
            MinerStrategy::DraSelectiveReveal { grid } => {
                format!("dra_selective_reveal({} grid bids)", grid.len())
            }
            MinerStrategy::Composite(parts) => {
                let names: Vec<String> = parts.iter().map(|p| p.name()).collect();
                format!("composite[{}]", names.join(", "))
            }
        }
    }

    /// Commitment-phase action. Gatekeeper observations carry ids only, and
    /// plaintext-only strategies fail on them.
    pub fn act(&self, obs: &Observation, mech: &Mechanism) -> Result<MinerAction, AgentError> {
        let mut action = MinerAction {
            advice: 0.0,
            forward: obs.ids(),
            fabricated: Vec::new(),
        };
        self.apply(obs, mech, &mut action)?;
        Ok(action)
    }

    fn apply(
        &self,
        obs: &Observation,
        mech: &Mechanism,
        action: &mut MinerAction,
    ) -> Result<(), AgentError> {
        let plaintext_amounts = |obs: &Observation| {
            obs.amounts().ok_or(AgentError::InfoViolation {
                needs: "plaintext bids",
                got: "bid identifiers only",
            })
        };
        match self {
            MinerStrategy::Compliant { advice } => action.advice = *advice,
            MinerStrategy::Censor { advice, rule } => {
                action.advice = *advice;
                rule.apply(&mut action.forward);
            }
            MinerStrategy::Fabricate { advice, amounts } => {
                action.advice = *advice;
                action.fabricated.extend_from_slice(amounts);
            }
            MinerStrategy::ReserveAtMaxBid => {
                let amounts = plaintext_amounts(obs)?;
                action.advice = amounts.iter().copied().fold(0.0, f64::max);
            }
            MinerStrategy::P2paRevenueReserve => {
                let mut amounts = plaintext_amounts(obs)?;
                amounts.sort_unstable_by(|a, b| b.partial_cmp(a).expect("no NaN bids"));
                let k = match mech.capacity() {
                    crate::mech::Capacity::Finite(k) => k,
                    crate::mech::Capacity::Unlimited => amounts.len(),
                };
                // the advice is the maximising b^(i), not the revenue i·b^(i)
                action.advice = amounts
                    .iter()
                    .take(k)
                    .enumerate()
                    .max_by(|(i, &a), (j, &b)| {
                        ((*i + 1) as f64 * a)
                            .partial_cmp(&((*j + 1) as f64 * b))
                            .expect("no NaN bids")
                    })
                    .map(|(_, &b)| b)
                    .unwrap_or(0.0);
            }
            MinerStrategy::EntryFeeCensor { advice, paid, .. } => {
                action.advice = *advice;
                action.forward.retain(|id| paid.contains(id));
            }
            MinerStrategy::DraSelectiveReveal { grid } => {
                action.fabricated.extend_from_slice(grid);
            }
            MinerStrategy::Composite(parts) => {
                for p in parts {
                    p.apply(obs, mech, action)?;
                }
            }
        }
        Ok(())
    }

    /// Decryption-phase choice for each fabricated bid, given the contents
    /// of all revealed user bids.
    pub fn dra_reveal(
        &self,
        revealed_user_amounts: &[f64],
        fabricated: &[f64],
    ) -> Vec<RevealChoice> {
        match self {
            MinerStrategy::DraSelectiveReveal { .. } => {
                let max_user = revealed_user_amounts
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                fabricated
                    .iter()
                    .map(|&a| {
                        if a < max_user {
                            RevealChoice::Reveal
                        } else {
                            RevealChoice::Conceal
                        }
                    })
                    .collect()
            }
            MinerStrategy::Composite(parts) => {
                // the selective-reveal component, if any, governs its grid;
                // plain fabrications reveal
                if let Some(sel) = parts
                    .iter()
                    .find(|p| matches!(p, MinerStrategy::DraSelectiveReveal { .. }))
                {
                    sel.dra_reveal(revealed_user_amounts, fabricated)
                } else {
                    vec![RevealChoice::Reveal; fabricated.len()]
                }
            }
            _ => vec![RevealChoice::Reveal; fabricated.len()],
        }
    }
}
