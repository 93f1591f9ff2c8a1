//! Equilibrium sanity of the pay-your-bid shading strategy: on a value grid,
//! the shaded bid must come within 1e-3 of the maximum interim utility over
//! a dense bid grid, against opponents playing the same strategy. The
//! utilities are estimated empirically from the opponents' maximum-bid
//! sample (common random numbers across bids by construction).

use tfm_core::agents::shade_winner_pays_bid;
use tfm_core::dist::ValueDistribution;
use tfm_core::rng::Substreams;

/// Empirical interim utility of bidding `b` with value `v` in the k = 1
/// pay-your-bid auction with reserve, given the sorted sample of opponents'
/// highest bids.
fn utility(v: f64, b: f64, reserve: f64, sorted_opp_max: &[f64]) -> f64 {
    if b < reserve {
        return 0.0;
    }
    let wins = sorted_opp_max.partition_point(|&m| m < b);
    (v - b) * wins as f64 / sorted_opp_max.len() as f64
}

#[test]
fn shading_is_a_grid_best_response() {
    let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
    let reps = 1_000_000usize;
    for (n, reserve) in [(2usize, 0.0), (2, 0.5), (3, 0.0), (3, 0.5)] {
        let shade = |v: f64| shade_winner_pays_bid(&d, n, 1, reserve, v).unwrap();
        // opponents' highest shaded bid per replication
        let streams = Substreams::new(9090).labeled(&format!("br-{n}-{reserve}"));
        let mut opp_max = Vec::with_capacity(reps);
        for t in 0..reps as u64 {
            let mut stream = streams.stream(t);
            let mut m = f64::NEG_INFINITY;
            for _ in 0..n - 1 {
                let vj = d.sample(&mut stream);
                let bid = if vj >= reserve { shade(vj) } else { 0.0 };
                m = m.max(bid);
            }
            opp_max.push(m);
        }
        opp_max.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

        let value_grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let bid_grid: Vec<f64> = (0..201).map(|i| i as f64 / 200.0).collect();
        for &v in &value_grid {
            let sigma_bid = if v >= reserve { shade(v) } else { 0.0 };
            let u_sigma = utility(v, sigma_bid, reserve, &opp_max);
            let u_best = bid_grid
                .iter()
                .map(|&b| utility(v, b, reserve, &opp_max))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                u_best - u_sigma <= 1e-3,
                "n={n} r={reserve} v={v}: best {u_best} vs shaded {u_sigma}"
            );
        }
    }
}
