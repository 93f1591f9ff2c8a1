//! Interim allocation/payment estimation and the Myerson identities:
//! payment identity, revenue = virtual welfare, revenue equivalence, and
//! constrained optimal-revenue benchmarks.

use crate::dist::ValueDistribution;
use crate::engine::{resolve, OnChainProfile, ResolvedScenario, SimEstimate};
use crate::mech::{Capacity, Mechanism};
use crate::rng::{mc_accumulate, RunningStat, Substreams};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterimError {
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error("interim allocation decreases by more than 3 standard errors at grid point {at}")]
    MonotonicityViolation { at: f64 },
}

/// Monte Carlo interim allocation and payment rules of one user on a value
/// grid. Opponent draws are shared across grid points (common random
/// numbers), so adjacent points are positively correlated.
#[derive(Clone, Debug, Serialize)]
pub struct InterimRules {
    pub user: usize,
    pub grid: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub se_x: Vec<f64>,
    pub se_p: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn interim_rules(
    mech: &Mechanism,
    profile: &OnChainProfile,
    dist: &ValueDistribution,
    n: usize,
    user: usize,
    grid: &[f64],
    reps: u64,
    streams: &Substreams,
) -> Result<InterimRules, InterimError> {
    assert!(user < n);
    let scenario = resolve(mech, profile, dist, n)?;
    let g = grid.len();
    let stats = mc_accumulate(
        streams,
        reps,
        || vec![RunningStat::default(); 2 * g],
        |acc, _, stream| {
            let mut values: Vec<f64> = (0..n).map(|_| dist.sample(stream)).collect();
            for (gi, &v) in grid.iter().enumerate() {
                values[user] = v;
                let play = scenario.play(&values).expect("resolved play");
                let included = play.outcome.is_included(crate::mech::BidId(user as u32));
                acc[2 * gi].push(f64::from(included));
                acc[2 * gi + 1].push(payment_of_user(&play, user));
            }
        },
    );
    let mut out = InterimRules {
        user,
        grid: grid.to_vec(),
        x: Vec::with_capacity(g),
        p: Vec::with_capacity(g),
        se_x: Vec::with_capacity(g),
        se_p: Vec::with_capacity(g),
        reps,
        seed: streams.seed(),
    };
    for gi in 0..g {
        out.x.push(stats[2 * gi].mean());
        out.se_x.push(stats[2 * gi].std_err());
        out.p.push(stats[2 * gi + 1].mean());
        out.se_p.push(stats[2 * gi + 1].std_err());
    }
    Ok(out)
}

/// Payment charged to one user's bid (single-bid profiles: the bid id equals
/// the user index).
fn payment_of_user(play: &crate::engine::PlayResult, user: usize) -> f64 {
    play.outcome.payment_of(crate::mech::BidId(user as u32))
}

#[derive(Clone, Debug, Serialize)]
pub struct PaymentIdentityReport {
    pub pass: bool,
    /// Largest gap beyond the statistical allowance across grid points.
    pub max_gap: f64,
    pub tol: f64,
    pub gaps: Vec<f64>,
}

/// Verifies p(v) − p(v₀) = v·x(v) − v₀·x(v₀) − ∫_{v₀}^v x(z) dz on the grid
/// (the payment identity integrated by parts, avoiding differentiation of
/// the Monte Carlo estimate).
///
/// Grid data cannot localize allocation mass inside a cell: a step in x at
/// an unknown point of a cell of width h shifts the Stieltjes integral by up
/// to mass·h/2. The allowance at each point is therefore
/// tol + 3·(propagated standard error) + Σ Δx·h/2. Genuine identity
/// violations (a payment rule inconsistent with the allocation rule) exceed
/// this by an order of magnitude on the shipped grids.
pub fn check_payment_identity(
    rules: &InterimRules,
    tol: f64,
) -> Result<PaymentIdentityReport, InterimError> {
    let g = rules.grid.len();
    assert!(g >= 2);
    for i in 1..g {
        let drop = rules.x[i - 1] - rules.x[i];
        let se = 3.0 * (rules.se_x[i - 1].powi(2) + rules.se_x[i].powi(2)).sqrt();
        if drop > se + 1e-9 {
            return Err(InterimError::MonotonicityViolation { at: rules.grid[i] });
        }
    }
    let v0 = rules.grid[0];
    let x0 = rules.x[0];
    let p0 = rules.p[0];
    let mut integral = 0.0;
    let mut integral_var = 0.0;
    let mut discretization = 0.0;
    let mut gaps = Vec::with_capacity(g);
    let mut max_gap = 0.0f64;
    let mut pass = true;
    gaps.push(0.0);
    for i in 1..g {
        let dv = rules.grid[i] - rules.grid[i - 1];
        integral += 0.5 * dv * (rules.x[i] + rules.x[i - 1]);
        integral_var += (0.5 * dv).powi(2) * (rules.se_x[i].powi(2) + rules.se_x[i - 1].powi(2));
        discretization += (rules.x[i] - rules.x[i - 1]).abs() * dv * 0.5;
        let lhs = rules.p[i] - p0;
        let rhs = rules.grid[i] * rules.x[i] - v0 * x0 - integral;
        let se = (rules.se_p[i].powi(2)
            + rules.se_p[0].powi(2)
            + (rules.grid[i] * rules.se_x[i]).powi(2)
            + (v0 * rules.se_x[0]).powi(2)
            + integral_var)
            .sqrt();
        let gap = (lhs - rhs).abs();
        if gap > tol + 3.0 * se + discretization {
            pass = false;
        }
        max_gap = max_gap.max(gap - 3.0 * se - discretization);
        gaps.push(gap);
    }
    Ok(PaymentIdentityReport {
        pass,
        max_gap,
        tol,
        gaps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VirtualWelfareReport {
    /// E[Σ user payments].
    pub lhs: f64,
    /// E[Σ φ(vᵢ)·1{i allocated}].
    pub rhs: f64,
    pub diff: f64,
    /// Standard error of the per-replication difference.
    pub std_err: f64,
    pub pass: bool,
    pub reps: u64,
}

/// Revenue-equals-virtual-welfare check on shared draws. The profile must be
/// a user BNE for the identity to be meaningful; the checker only measures.
pub fn revenue_equals_virtual_welfare(
    mech: &Mechanism,
    profile: &OnChainProfile,
    dist: &ValueDistribution,
    n: usize,
    reps: u64,
    streams: &Substreams,
) -> Result<VirtualWelfareReport, InterimError> {
    let scenario = resolve(mech, profile, dist, n)?;
    let stats = mc_accumulate(
        streams,
        reps,
        || vec![RunningStat::default(); 3],
        |acc, _, stream| {
            let values: Vec<f64> = (0..n).map(|_| dist.sample(stream)).collect();
            let play = scenario.play(&values).expect("resolved play");
            let mut payments = 0.0;
            let mut virtual_welfare = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let id = crate::mech::BidId(i as u32);
                payments += play.outcome.payment_of(id);
                if play.outcome.is_included(id) {
                    virtual_welfare += dist.virtual_value(v).expect("interior draw");
                }
            }
            acc[0].push(payments);
            acc[1].push(virtual_welfare);
            acc[2].push(payments - virtual_welfare);
        },
    );
    let diff = stats[2].mean();
    let se = stats[2].std_err();
    Ok(VirtualWelfareReport {
        lhs: stats[0].mean(),
        rhs: stats[1].mean(),
        diff,
        std_err: se,
        pass: diff.abs() <= 3.0 * se || diff.abs() <= 1e-12,
        reps,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BenchmarkEstimate {
    pub value: f64,
    pub std_err: f64,
    /// Deterministic quadrature cross-check, available for n ≤ 3.
    pub quadrature: Option<f64>,
    pub reps: u64,
}

/// E[sum of the top-k values of (φ(vᵢ) − burn)⁺]: the optimal expected
/// revenue over BIC allocations with capacity k when each inclusion burns
/// `burn`. Monte Carlo, plus a tensor-quadrature cross-check for n ≤ 3.
pub fn optimal_revenue_benchmark(
    dist: &ValueDistribution,
    n: usize,
    k: Capacity,
    burn: f64,
    reps: u64,
    streams: &Substreams,
) -> BenchmarkEstimate {
    let acc = mc_accumulate(streams, reps, RunningStat::default, |acc, _, stream| {
        let values: Vec<f64> = (0..n).map(|_| dist.sample(stream)).collect();
        acc.push(top_k_virtual_surplus(dist, n, k, burn, &values));
    });
    let quadrature = (n <= 3).then(|| benchmark_quadrature(dist, n, k, burn));
    BenchmarkEstimate {
        value: acc.mean(),
        std_err: acc.std_err(),
        quadrature,
        reps,
    }
}

fn top_k_virtual_surplus(
    dist: &ValueDistribution,
    n: usize,
    k: Capacity,
    burn: f64,
    values: &[f64],
) -> f64 {
    let mut surpluses: Vec<f64> = (0..n)
        .map(|i| (dist.virtual_value(values[i]).unwrap_or(f64::NEG_INFINITY) - burn).max(0.0))
        .collect();
    match k {
        Capacity::Unlimited => surpluses.iter().sum(),
        Capacity::Finite(k) => {
            surpluses.sort_unstable_by(|a, b| b.partial_cmp(a).expect("no NaN"));
            surpluses.iter().take(k).sum()
        }
    }
}

/// Composite-Simpson tensor quadrature of the benchmark integrand over the
/// quantile-transformed unit cube.
fn benchmark_quadrature(dist: &ValueDistribution, n: usize, k: Capacity, burn: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let m = match n {
        1 => 4096,
        2 => 512,
        _ => 128,
    };
    let h = 1.0 / m as f64;
    let nodes: Vec<(f64, f64)> = (0..=m)
        .map(|j| {
            let p = j as f64 * h;
            let w = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            (w, dist.quantile(p.clamp(1e-12, 1.0 - 1e-12)))
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    let mut values = vec![0.0; n];
    loop {
        let mut w = 1.0;
        for (d, &j) in idx.iter().enumerate() {
            w *= nodes[j].0;
            values[d] = nodes[j].1;
        }
        total += w * top_k_virtual_surplus(dist, n, k, burn, &values);
        let mut dim = 0;
        loop {
            if dim == n {
                return total;
            }
            idx[dim] += 1;
            if idx[dim] <= m {
                break;
            }
            idx[dim] = 0;
            dim += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquivalenceReport {
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff: f64,
    pub std_err: f64,
    pub pass: bool,
}

/// Revenue-equivalence comparison of two expected-total-payment estimates:
/// pass iff |Δ| ≤ 3·√(se_a² + se_b²).
pub fn check_revenue_equivalence(a: &SimEstimate, b: &SimEstimate) -> EquivalenceReport {
    let diff = a.mean - b.mean;
    let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    EquivalenceReport {
        mean_a: a.mean,
        mean_b: b.mean,
        diff,
        std_err: se,
        pass: diff.abs() <= 3.0 * se,
    }
}

/// Interim utility of bidding `bid` with value `v` against opponents playing
/// the profile strategies, by Monte Carlo. Used by grid best responses.
pub fn interim_utility(
    scenario: &ResolvedScenario,
    user: usize,
    v: f64,
    bid: f64,
    reps: u64,
    streams: &Substreams,
) -> SimEstimate {
    let deviated = scenario.with_user_fixed_bid(user, bid);
    let acc = mc_accumulate(streams, reps, RunningStat::default, |acc, _, stream| {
        let mut values: Vec<f64> = (0..scenario.n)
            .map(|_| scenario.dist.sample(stream))
            .collect();
        values[user] = v;
        let play = deviated.play(&values).expect("resolved play");
        acc.push(play.user_utilities[user]);
    });
    SimEstimate {
        mean: acc.mean(),
        std_err: acc.std_err(),
        reps,
        seed: streams.seed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{BelowReserve, MinerStrategy, UserStrategy};
    use crate::mech::CryptoModel;

    fn u01() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    fn c2pa() -> Mechanism {
        Mechanism::KPlusOnePrice {
            k: 1,
            crypto: CryptoModel::Gatekeeper,
        }
    }

    fn truthful(advice: f64) -> OnChainProfile {
        OnChainProfile::symmetric(MinerStrategy::Compliant { advice }, UserStrategy::Truthful)
    }

    #[test]
    fn interim_rules_match_closed_forms() {
        let d = u01();
        let streams = Substreams::new(41).labeled("interim");
        let grid = vec![0.4, 0.75];
        let rules =
            interim_rules(&c2pa(), &truthful(0.5), &d, 2, 0, &grid, 200_000, &streams).unwrap();
        // x(0.4) = 0 below the reserve
        assert_eq!(rules.x[0], 0.0);
        // x(0.75) = 0.75; p(0.75) = 0.25 + ∫_{0.5}^{0.75} z dz = 0.40625
        assert!((rules.x[1] - 0.75).abs() < 5.0 * rules.se_x[1].max(1e-4));
        assert!((rules.p[1] - 0.40625).abs() < 5.0 * rules.se_p[1].max(1e-4));
    }

    #[test]
    fn payment_identity_holds_for_c2pa_and_posted() {
        let d = u01();
        let streams = Substreams::new(42).labeled("payid");
        let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let rules =
            interim_rules(&c2pa(), &truthful(0.5), &d, 2, 0, &grid, 200_000, &streams).unwrap();
        let report = check_payment_identity(&rules, 0.01).unwrap();
        assert!(report.pass, "max gap {}", report.max_gap);

        // posted price: x is a step at the reserve and p = r·x
        let mech = Mechanism::PostedPrice {
            crypto: CryptoModel::Gatekeeper,
        };
        let rules =
            interim_rules(&mech, &truthful(0.5), &d, 2, 0, &grid, 100_000, &streams).unwrap();
        let report = check_payment_identity(&rules, 0.01).unwrap();
        assert!(report.pass, "max gap {}", report.max_gap);
    }

    #[test]
    fn payment_identity_rejects_non_bic_rules() {
        // truthful bidding in winner-pays-bid is not an equilibrium; the
        // induced (x, p) pair breaks the identity by ~∫x, far beyond the
        // statistical and discretization allowances
        let d = u01();
        let streams = Substreams::new(48).labeled("payid-neg");
        let mech = Mechanism::WinnerPaysBid {
            k: 1,
            crypto: CryptoModel::Gatekeeper,
        };
        let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let rules =
            interim_rules(&mech, &truthful(0.0), &d, 2, 0, &grid, 100_000, &streams).unwrap();
        let report = check_payment_identity(&rules, 0.01).unwrap();
        assert!(
            !report.pass,
            "non-BIC rules must fail, max gap {}",
            report.max_gap
        );
    }

    #[test]
    fn payment_identity_holds_for_wpb_equilibrium_rules() {
        // equilibrium (shaded) strategies induce BIC interim rules
        let d = u01();
        let streams = Substreams::new(43).labeled("payid-wpb");
        let mech = Mechanism::WinnerPaysBid {
            k: 1,
            crypto: CryptoModel::Gatekeeper,
        };
        let profile = OnChainProfile::symmetric(
            MinerStrategy::Compliant { advice: 0.0 },
            UserStrategy::ShadeWpb {
                reserve: 0.0,
                below: BelowReserve::BidZero,
            },
        );
        let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let rules = interim_rules(&mech, &profile, &d, 2, 0, &grid, 200_000, &streams).unwrap();
        let report = check_payment_identity(&rules, 0.01).unwrap();
        assert!(report.pass, "max gap {}", report.max_gap);
    }

    #[test]
    fn virtual_welfare_identity_examples() {
        let d = u01();
        let streams = Substreams::new(44).labeled("rvw");
        // EIP-1559 p = 0.4, n = 3: both sides 0.72
        let mech = Mechanism::Eip1559 { price: 0.4 };
        let rep = revenue_equals_virtual_welfare(&mech, &truthful(0.0), &d, 3, 400_000, &streams)
            .unwrap();
        assert!(rep.pass, "diff {} se {}", rep.diff, rep.std_err);
        assert!((rep.lhs - 0.72).abs() < 0.01);
        assert!((rep.rhs - 0.72).abs() < 0.01);

        // C2PA n=2 at the monopoly reserve: both sides 5/12
        let rep = revenue_equals_virtual_welfare(&c2pa(), &truthful(0.5), &d, 2, 400_000, &streams)
            .unwrap();
        assert!(rep.pass);
        assert!((rep.lhs - 5.0 / 12.0).abs() < 0.01);

        // empty market
        let rep = revenue_equals_virtual_welfare(&c2pa(), &truthful(0.5), &d, 0, 1_000, &streams)
            .unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn benchmark_examples() {
        let d = u01();
        let streams = Substreams::new(45).labeled("bench");
        // n=2, k=1: Myerson revenue 5/12
        let b = optimal_revenue_benchmark(&d, 2, Capacity::Finite(1), 0.0, 2_000_000, &streams);
        assert!(
            (b.value - 5.0 / 12.0).abs() < 5.0 * b.std_err.max(1e-4),
            "got {}",
            b.value
        );
        assert!((b.quadrature.unwrap() - 5.0 / 12.0).abs() < 1e-3);

        // n=1: posting the monopoly price earns 1/4
        let b = optimal_revenue_benchmark(&d, 1, Capacity::Finite(1), 0.0, 2_000_000, &streams);
        assert!((b.value - 0.25).abs() < 5.0 * b.std_err.max(1e-4));

        // unlimited supply with burn 0.3: 0.1225 per user
        let b = optimal_revenue_benchmark(&d, 4, Capacity::Unlimited, 0.3, 2_000_000, &streams);
        assert!(
            (b.value - 4.0 * 0.1225).abs() < 5.0 * b.std_err.max(1e-3),
            "got {}",
            b.value
        );
    }

    #[test]
    fn benchmark_monotonicity() {
        let d = u01();
        let streams = Substreams::new(46).labeled("bench-mono");
        let reps = 300_000;
        let at = |n: usize, k: Capacity, burn: f64| {
            optimal_revenue_benchmark(&d, n, k, burn, reps, &streams).value
        };
        // non-decreasing in n
        assert!(at(1, Capacity::Finite(1), 0.0) <= at(2, Capacity::Finite(1), 0.0) + 1e-3);
        assert!(at(2, Capacity::Finite(1), 0.0) <= at(3, Capacity::Finite(1), 0.0) + 1e-3);
        // non-decreasing in k
        assert!(at(3, Capacity::Finite(1), 0.0) <= at(3, Capacity::Finite(2), 0.0) + 1e-3);
        assert!(at(3, Capacity::Finite(2), 0.0) <= at(3, Capacity::Unlimited, 0.0) + 1e-3);
        // non-increasing in burn
        assert!(at(2, Capacity::Unlimited, 0.2) >= at(2, Capacity::Unlimited, 0.4) - 1e-3);
    }

    #[test]
    fn revenue_equivalence_spa_vs_shaded_wpb() {
        let d = u01();
        let streams = Substreams::new(47).labeled("rev-eq");
        let spa = c2pa();
        let wpb = Mechanism::WinnerPaysBid {
            k: 1,
            crypto: CryptoModel::Gatekeeper,
        };
        for (reserve, expected) in [(0.0, 1.0 / 3.0), (0.5, 5.0 / 12.0)] {
            let shaded = OnChainProfile::symmetric(
                MinerStrategy::Compliant { advice: reserve },
                UserStrategy::ShadeWpb {
                    reserve,
                    below: BelowReserve::BidZero,
                },
            );
            let a = crate::engine::estimate_total_payments(
                &spa,
                &truthful(reserve),
                &d,
                2,
                400_000,
                &streams.labeled("a"),
            )
            .unwrap();
            let b = crate::engine::estimate_total_payments(
                &wpb,
                &shaded,
                &d,
                2,
                400_000,
                &streams.labeled("b"),
            )
            .unwrap();
            let rep = check_revenue_equivalence(&a, &b);
            assert!(rep.pass, "reserve {reserve}: {} vs {}", a.mean, b.mean);
            assert!((a.mean - expected).abs() < 5.0 * a.std_err.max(1e-3));
        }
        // negative control: mismatched reserves
        let a = crate::engine::estimate_total_payments(
            &spa,
            &truthful(0.0),
            &d,
            2,
            400_000,
            &streams.labeled("na"),
        )
        .unwrap();
        let b = crate::engine::estimate_total_payments(
            &spa,
            &truthful(0.5),
            &d,
            2,
            400_000,
            &streams.labeled("nb"),
        )
        .unwrap();
        assert!(!check_revenue_equivalence(&a, &b).pass);
    }
}
