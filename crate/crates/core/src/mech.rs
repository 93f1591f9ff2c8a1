//! Block-building processes: pure functions from (miner advice, bids) to an
//! outcome, one per mechanism, with exact tie-breaking and money-flow
//! accounting.
//!
//! Ties are broken by smaller bid id everywhere. "Reserve just below the
//! largest bid" strategies are represented exactly as reserve = max bid, with
//! the winner paying the reserve (the ε→0 limit).

use serde::Serialize;

/// Opaque, totally ordered bidder identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct BidId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum BidOrigin {
    User,
    Fabricated,
}

#[derive(Clone, Copy, Debug)]
pub struct Bid {
    pub id: BidId,
    pub amount: f64,
    pub origin: BidOrigin,
}

impl Bid {
    pub fn user(id: u32, amount: f64) -> Bid {
        Bid {
            id: BidId(id),
            amount,
            origin: BidOrigin::User,
        }
    }

    pub fn fabricated(id: u32, amount: f64) -> Bid {
        Bid {
            id: BidId(id),
            amount,
            origin: BidOrigin::Fabricated,
        }
    }
}

/// Phase-two action in the deferred-revelation model.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum RevealChoice {
    Reveal,
    Conceal,
}

#[derive(Clone, Copy, Debug)]
pub struct DraBid {
    pub bid: Bid,
    pub phase_two: RevealChoice,
}

/// Resolved money flows of one auction instance. Conservation holds exactly:
/// total payments = miner revenue + burned + penalties collected.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    /// Included bid ids, sorted.
    pub included: Vec<BidId>,
    /// Nonzero payments (including penalties), sorted by id.
    pub payments: Vec<(BidId, f64)>,
    /// Gross revenue transferred to the miner by the block-building process.
    pub miner_revenue: f64,
    pub burned: f64,
    pub penalties_collected: f64,
}

impl Outcome {
    pub fn is_included(&self, id: BidId) -> bool {
        self.included.binary_search(&id).is_ok()
    }

    pub fn payment_of(&self, id: BidId) -> f64 {
        match self.payments.binary_search_by_key(&id, |&(i, _)| i) {
            Ok(idx) => self.payments[idx].1,
            Err(_) => 0.0,
        }
    }

    pub fn total_payments(&self) -> f64 {
        self.payments.iter().map(|&(_, p)| p).sum()
    }

    /// |Σ payments − (revenue + burned + penalties)|, for conservation tests.
    pub fn conservation_gap(&self) -> f64 {
        (self.total_payments() - (self.miner_revenue + self.burned + self.penalties_collected))
            .abs()
    }

    fn finish(mut self) -> Outcome {
        self.included.sort_unstable();
        self.payments.sort_unstable_by_key(|&(id, _)| id);
        self
    }
}

/// Cryptographic model of the bidding channel; constrains what the miner may
/// observe before acting, never the block-building process itself.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum CryptoModel {
    Plaintext,
    Gatekeeper,
    DeferredRevelation,
}

/// A block-building process with its fixed parameters. The miner advice (a
/// reserve or posted price) is passed at run time; exogenous parameters live
/// here.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Mechanism {
    /// Unlimited-supply posted price with exogenous price; all payments burn.
    Eip1559 { price: f64 },
    /// (k+1)th-price auction with miner-advised reserve; all payments to the
    /// miner. Gatekeeper = C(k+1)PA, plaintext = P(k+1)PA.
    KPlusOnePrice { k: usize, crypto: CryptoModel },
    /// Same inclusion rule, winners pay their bid.
    WinnerPaysBid { k: usize, crypto: CryptoModel },
    /// Unlimited-supply posted price at the miner-advised price; payments to
    /// the miner.
    PostedPrice { crypto: CryptoModel },
    /// Bonus-on-matching-bids: every bid equal to the maximum is included if
    /// the maximum clears the builder-known reserve; winners pay their bid.
    Bomb { reserve: f64 },
    /// Second-price auction, single slot, miner-advised reserve; the miner
    /// receives the square of the payment if it is at most 1, else nothing.
    Sr2pa,
    /// Deferred-revelation second-price auction with builder-known reserve
    /// and conceal penalty.
    Dra { reserve: f64, conceal_penalty: f64 },
}

/// Block capacity as seen by revenue benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capacity {
    Finite(usize),
    Unlimited,
}

impl Mechanism {
    pub fn crypto(&self) -> CryptoModel {
        match self {
            Mechanism::Eip1559 { .. } | Mechanism::Sr2pa => CryptoModel::Plaintext,
            Mechanism::KPlusOnePrice { crypto, .. }
            | Mechanism::WinnerPaysBid { crypto, .. }
            | Mechanism::PostedPrice { crypto } => *crypto,
            Mechanism::Bomb { .. } => CryptoModel::Gatekeeper,
            Mechanism::Dra { .. } => CryptoModel::DeferredRevelation,
        }
    }

    /// Whether the advice argument is read at all.
    pub fn takes_advice(&self) -> bool {
        matches!(
            self,
            Mechanism::KPlusOnePrice { .. }
                | Mechanism::WinnerPaysBid { .. }
                | Mechanism::PostedPrice { .. }
                | Mechanism::Sr2pa
        )
    }

    pub fn capacity(&self) -> Capacity {
        match self {
            Mechanism::Eip1559 { .. } | Mechanism::PostedPrice { .. } | Mechanism::Bomb { .. } => {
                Capacity::Unlimited
            }
            Mechanism::KPlusOnePrice { k, .. } | Mechanism::WinnerPaysBid { k, .. } => {
                Capacity::Finite(*k)
            }
            Mechanism::Sr2pa | Mechanism::Dra { .. } => Capacity::Finite(1),
        }
    }

    /// Money destroyed per included bid, as used by revenue benchmarks.
    pub fn burn_per_inclusion(&self) -> f64 {
        match self {
            Mechanism::Eip1559 { price } => *price,
            _ => 0.0,
        }
    }

    /// Capacity relevant to pay-your-bid shading (single slot for the
    /// auctions that allocate one winner).
    pub fn shading_k(&self) -> usize {
        match self.capacity() {
            Capacity::Finite(k) => k,
            Capacity::Unlimited => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Mechanism::Eip1559 { .. } => "eip1559",
            Mechanism::KPlusOnePrice {
                crypto: CryptoModel::Gatekeeper,
                ..
            } => "c_k1_pa",
            Mechanism::KPlusOnePrice { .. } => "p_k1_pa",
            Mechanism::WinnerPaysBid { .. } => "wpb",
            Mechanism::PostedPrice {
                crypto: CryptoModel::Gatekeeper,
            } => "posted_crypto",
            Mechanism::PostedPrice { .. } => "posted_plain",
            Mechanism::Bomb { .. } => "bomb",
            Mechanism::Sr2pa => "sr2pa",
            Mechanism::Dra { .. } => "dra",
        }
    }

    /// Runs the block-building process on plain (single-phase) bids.
    /// DRA instances must go through [`dra`] with phase-two choices resolved.
    pub fn run(&self, advice: f64, bids: &[Bid]) -> Outcome {
        match self {
            Mechanism::Eip1559 { price } => eip1559(*price, bids),
            Mechanism::KPlusOnePrice { k, .. } => k_plus_one_price(*k, advice, bids),
            Mechanism::WinnerPaysBid { k, .. } => winner_pays_bid(*k, advice, bids),
            Mechanism::PostedPrice { .. } => posted_price(advice, bids),
            Mechanism::Bomb { reserve } => bomb(*reserve, bids),
            Mechanism::Sr2pa => sr2pa(advice, bids),
            Mechanism::Dra {
                reserve,
                conceal_penalty,
            } => {
                // treating plain bids as all-revealed
                let dra_bids: Vec<DraBid> = bids
                    .iter()
                    .map(|&bid| DraBid {
                        bid,
                        phase_two: RevealChoice::Reveal,
                    })
                    .collect();
                dra(*reserve, *conceal_penalty, &dra_bids)
            }
        }
    }
}

/// Indices sorted by (amount desc, id asc): the inclusion order everywhere.
fn ranked(bids: &[Bid]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..bids.len()).collect();
    idx.sort_unstable_by(|&a, &b| {
        bids[b]
            .amount
            .partial_cmp(&bids[a].amount)
            .expect("bid amounts must not be NaN")
            .then(bids[a].id.cmp(&bids[b].id))
    });
    idx
}

/// Every bid at or above the exogenous price is included and pays it; all
/// payments burn and the miner receives nothing.
pub fn eip1559(price: f64, bids: &[Bid]) -> Outcome {
    let mut out = Outcome::default();
    for b in bids {
        if b.amount >= price {
            out.included.push(b.id);
            out.payments.push((b.id, price));
            out.burned += price;
        }
    }
    out.finish()
}

/// Up to k highest bids clearing the reserve are included; each pays
/// max{(k+1)th highest bid, reserve} with the (k+1)th bid taken as 0 when
/// fewer than k+1 bids exist. All payments go to the miner.
pub fn k_plus_one_price(k: usize, reserve: f64, bids: &[Bid]) -> Outcome {
    assert!(k >= 1, "capacity k must be at least 1");
    let order = ranked(bids);
    let kth_plus_one = if bids.len() > k {
        bids[order[k]].amount
    } else {
        0.0
    };
    let price = kth_plus_one.max(reserve);
    let mut out = Outcome::default();
    for &i in order.iter().take(k) {
        if bids[i].amount >= reserve {
            out.included.push(bids[i].id);
            out.payments.push((bids[i].id, price));
            out.miner_revenue += price;
        }
    }
    out.finish()
}

/// Same inclusion rule as [`k_plus_one_price`]; winners pay their own bid.
pub fn winner_pays_bid(k: usize, reserve: f64, bids: &[Bid]) -> Outcome {
    assert!(k >= 1, "capacity k must be at least 1");
    let order = ranked(bids);
    let mut out = Outcome::default();
    for &i in order.iter().take(k) {
        if bids[i].amount >= reserve {
            out.included.push(bids[i].id);
            out.payments.push((bids[i].id, bids[i].amount));
            out.miner_revenue += bids[i].amount;
        }
    }
    out.finish()
}

/// Unlimited supply: every bid at or above the posted price is included and
/// pays it; payments transfer to the miner.
pub fn posted_price(price: f64, bids: &[Bid]) -> Outcome {
    let mut out = Outcome::default();
    for b in bids {
        if b.amount >= price {
            out.included.push(b.id);
            out.payments.push((b.id, price));
            out.miner_revenue += price;
        }
    }
    out.finish()
}

/// All bids equal to the maximum are included when the maximum clears the
/// builder-known reserve; each winner pays its bid.
pub fn bomb(reserve: f64, bids: &[Bid]) -> Outcome {
    let mut out = Outcome::default();
    let max = bids
        .iter()
        .map(|b| b.amount)
        .fold(f64::NEG_INFINITY, f64::max);
    if bids.is_empty() || max < reserve {
        return out;
    }
    for b in bids {
        if b.amount == max {
            out.included.push(b.id);
            out.payments.push((b.id, b.amount));
            out.miner_revenue += b.amount;
        }
    }
    out.finish()
}

/// Single-slot second-price auction with reserve; the miner receives the
/// square of the payment when the payment is at most 1, and nothing
/// otherwise. The remainder burns.
pub fn sr2pa(reserve: f64, bids: &[Bid]) -> Outcome {
    let mut out = Outcome::default();
    let order = ranked(bids);
    let Some(&w) = order.first() else { return out };
    if bids[w].amount < reserve {
        return out;
    }
    let second = if order.len() > 1 {
        bids[order[1]].amount
    } else {
        0.0
    };
    let payment = second.max(reserve);
    out.included.push(bids[w].id);
    out.payments.push((bids[w].id, payment));
    out.miner_revenue = if payment <= 1.0 {
        payment * payment
    } else {
        0.0
    };
    out.burned = payment - out.miner_revenue;
    out.finish()
}

/// Deferred-revelation second-price auction. The largest revealed bid
/// clearing the builder-known reserve wins and pays max{second-highest
/// revealed bid, reserve}; every concealed bid pays the penalty, which is
/// collected outside the miner's revenue. Concealed bids never influence the
/// allocation or the winner's payment.
pub fn dra(reserve: f64, conceal_penalty: f64, bids: &[DraBid]) -> Outcome {
    let mut out = Outcome::default();
    let revealed: Vec<Bid> = bids
        .iter()
        .filter(|b| b.phase_two == RevealChoice::Reveal)
        .map(|b| b.bid)
        .collect();
    let order = ranked(&revealed);
    if let Some(&w) = order.first() {
        if revealed[w].amount >= reserve {
            let second = if order.len() > 1 {
                revealed[order[1]].amount
            } else {
                0.0
            };
            let payment = second.max(reserve);
            out.included.push(revealed[w].id);
            out.payments.push((revealed[w].id, payment));
            out.miner_revenue = payment;
        }
    }
    for b in bids {
        if b.phase_two == RevealChoice::Conceal {
            out.payments.push((b.bid.id, conceal_penalty));
            out.penalties_collected += conceal_penalty;
        }
    }
    out.finish()
}
