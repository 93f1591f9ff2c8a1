#![allow(dead_code)] // each test binary uses a different slice of the oracles

//! Independent numerical oracles for the integration and acceptance tests.
//!
//! Everything here is computed from first principles on the unit-uniform
//! prior (closed-form CDF F(v) = v), deliberately avoiding the library's
//! engine and mechanism code paths so the oracles stay independent of the
//! implementation they check.

/// Composite Simpson quadrature on [a, b] with an even number of panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = if panels.is_multiple_of(2) {
        panels
    } else {
        panels + 1
    };
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(a + i as f64 * h);
    }
    total * h / 3.0
}

/// Expected revenue of the second-price auction with reserve on two
/// unit-uniform bidders: E[max(min(v1,v2), r) · 1{max(v1,v2) ≥ r}].
///
/// Integrated over the ordered triangle lo ≤ hi with explicit splits at the
/// reserve so every Simpson piece is smooth:
/// 2·∫_{hi=r}^{1} [ ∫_0^r r dlo + ∫_r^{hi} lo dlo ] dhi.
pub fn spa_revenue_u01_n2(reserve: f64) -> f64 {
    let inner = |hi: f64| {
        let below = simpson(|_| reserve, 0.0, reserve, 64);
        let above = simpson(|lo| lo, reserve, hi, 512);
        below + above
    };
    2.0 * simpson(inner, reserve, 1.0, 1024)
}

/// Joint (miner + cartel user) expected utility in the n = 2 second-price
/// auction with reserve, when the cartel user holds value `v` and bids `b`
/// while the opponent bids truthfully. 1-D quadrature over the opponent's
/// value, split at the jump points (the cartel bid and the reserve) so every
/// Simpson piece is smooth:
/// - opponent below b: the cartel wins iff b clears the reserve, and
///   quasilinearity makes the joint utility exactly v;
/// - opponent above max(b, reserve): the opponent wins and pays
///   max(b, reserve), which the cartel keeps as revenue.
pub fn spa_cartel_joint_u01(v: f64, b: f64, reserve: f64) -> f64 {
    let win_hi = b.min(1.0);
    let win = if b >= reserve {
        simpson(|_| v, 0.0, win_hi, 64)
    } else {
        0.0
    };
    let lose_lo = b.max(reserve).min(1.0);
    let lose = simpson(|_| b.max(reserve), lose_lo, 1.0, 64);
    win + lose
}

/// Revenue of the off-chain posted price φ⁻¹(p) against the unit uniform:
/// n · (φ⁻¹(p) − p) · (1 − F(φ⁻¹(p))), with φ⁻¹(w) = (1 + w)/2.
pub fn eip_posted_attack_revenue_u01(p: f64, n: usize) -> f64 {
    let q = (1.0 + p) / 2.0;
    n as f64 * (q - p) * (1.0 - q)
}

/// E[max of n unit uniforms] = n/(n+1).
pub fn expected_max_u01(n: usize) -> f64 {
    n as f64 / (n + 1) as f64
}

/// E[min of two unit uniforms] = 1/3.
pub fn expected_min2_u01() -> f64 {
    1.0 / 3.0
}

/// Expected squared-payment revenue of the n = 2 second-price auction with
/// reserve on unit uniforms (payments never exceed 1 here), with the same
/// smooth region splits as [`spa_revenue_u01_n2`].
pub fn sr2pa_revenue_u01_n2(reserve: f64) -> f64 {
    let inner = |hi: f64| {
        let below = simpson(|_| reserve * reserve, 0.0, reserve, 64);
        let above = simpson(|lo| lo * lo, reserve, hi, 512);
        below + above
    };
    2.0 * simpson(inner, reserve, 1.0, 1024)
}
