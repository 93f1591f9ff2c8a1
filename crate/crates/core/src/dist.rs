//! Value distributions and Myerson primitives.
//!
//! Each supported prior exposes CDF/PDF/quantile in closed form, the virtual
//! value φ(v) = v − (1−F(v))/f(v), the monopoly reserve (root of φ), the
//! inverse virtual value, and a grid-based regularity report.

use crate::rng::RngStream;
use thiserror::Error;

/// Quantile used to truncate infinite supports for grids and quadrature.
pub const TAIL_MASS: f64 = 1e-9;

/// Bisection settings for every root-find in this module.
const BISECT_MAX_ITERS: usize = 200;
const BISECT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("density vanishes at interior point v = {0}")]
    ZeroDensity(f64),
    #[error("virtual value {0} outside the attainable range")]
    OutOfRange(f64),
}

/// An i.i.d. user-value prior.
#[derive(Clone, Debug, PartialEq)]
pub enum ValueDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    TruncatedExponential {
        rate: f64,
        hi: f64,
    },
    /// CDF given by strictly increasing knots (v, F(v)) from (lo, 0) to (hi, 1),
    /// linear in between; the density is piecewise constant.
    PiecewiseLinearCdf {
        knots: Vec<(f64, f64)>,
    },
}

/// Result of the reserve computation. `exact_root` is false when φ never
/// changes sign and the sup{v : φ(v) ≤ 0} fallback was used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonopolyReserve {
    pub value: f64,
    pub exact_root: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityReport {
    pub regular: bool,
    pub alpha_lower_bound: f64,
}

impl ValueDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DistError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "uniform requires 0 <= lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(ValueDistribution::Uniform { lo, hi })
    }

    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "exponential rate must be > 0, got {rate}"
            )));
        }
        Ok(ValueDistribution::Exponential { rate })
    }

    pub fn truncated_exponential(rate: f64, hi: f64) -> Result<Self, DistError> {
        if !(rate.is_finite() && rate > 0.0 && hi.is_finite() && hi > 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "truncated exponential requires rate > 0 and hi > 0, got rate {rate}, hi {hi}"
            )));
        }
        Ok(ValueDistribution::TruncatedExponential { rate, hi })
    }

    pub fn piecewise_linear_cdf(knots: Vec<(f64, f64)>) -> Result<Self, DistError> {
        if knots.len() < 2 {
            return Err(DistError::InvalidParameter(
                "need at least two knots".into(),
            ));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if first.1 != 0.0 || last.1 != 1.0 {
            return Err(DistError::InvalidParameter(
                "knot CDF must run from 0 to 1".into(),
            ));
        }
        if first.0 < 0.0 {
            return Err(DistError::InvalidParameter(
                "support must be nonnegative".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 < w[1].1) {
                return Err(DistError::InvalidParameter(
                    "knots must be strictly increasing in both coordinates".into(),
                ));
            }
        }
        Ok(ValueDistribution::PiecewiseLinearCdf { knots })
    }

    /// Closed support [lo, hi]; hi may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ValueDistribution::Uniform { lo, hi } => (*lo, *hi),
            ValueDistribution::Exponential { .. } => (0.0, f64::INFINITY),
            ValueDistribution::TruncatedExponential { hi, .. } => (0.0, *hi),
            ValueDistribution::PiecewiseLinearCdf { knots } => {
                (knots[0].0, knots[knots.len() - 1].0)
            }
        }
    }

    /// Supremum of the support.
    pub fn v_sup(&self) -> f64 {
        self.support().1
    }

    /// Finite upper bound for grids and quadrature: quantile(1 − 1e-9) when
    /// the support is infinite, the true upper end otherwise.
    pub fn grid_hi(&self) -> f64 {
        let (_, hi) = self.support();
        if hi.is_finite() {
            hi
        } else {
            self.quantile(1.0 - TAIL_MASS)
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            ValueDistribution::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            ValueDistribution::Exponential { rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * v).exp()
                }
            }
            ValueDistribution::TruncatedExponential { rate, hi } => {
                if v <= 0.0 {
                    0.0
                } else if v >= *hi {
                    1.0
                } else {
                    let z = 1.0 - (-rate * hi).exp();
                    (1.0 - (-rate * v).exp()) / z
                }
            }
            ValueDistribution::PiecewiseLinearCdf { knots } => {
                if v <= knots[0].0 {
                    return 0.0;
                }
                if v >= knots[knots.len() - 1].0 {
                    return 1.0;
                }
                let i = knots.partition_point(|k| k.0 <= v);
                let (v0, p0) = knots[i - 1];
                let (v1, p1) = knots[i];
                p0 + (p1 - p0) * (v - v0) / (v1 - v0)
            }
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        match self {
            ValueDistribution::Uniform { lo, hi } => {
                if v < *lo || v > *hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            ValueDistribution::Exponential { rate } => {
                if v < 0.0 {
                    0.0
                } else {
                    rate * (-rate * v).exp()
                }
            }
            ValueDistribution::TruncatedExponential { rate, hi } => {
                if v < 0.0 || v > *hi {
                    0.0
                } else {
                    let z = 1.0 - (-rate * hi).exp();
                    rate * (-rate * v).exp() / z
                }
            }
            ValueDistribution::PiecewiseLinearCdf { knots } => {
                if v < knots[0].0 || v > knots[knots.len() - 1].0 {
                    return 0.0;
                }
                // density on the segment containing v; right-continuous at knots
                let i = knots
                    .partition_point(|k| k.0 <= v)
                    .clamp(1, knots.len() - 1);
                let (v0, p0) = knots[i - 1];
                let (v1, p1) = knots[i];
                (p1 - p0) / (v1 - v0)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            ValueDistribution::Uniform { lo, hi } => lo + p * (hi - lo),
            ValueDistribution::Exponential { rate } => -(-p).ln_1p() / rate,
            ValueDistribution::TruncatedExponential { rate, hi } => {
                let z = 1.0 - (-rate * hi).exp();
                -(-p * z).ln_1p() / rate
            }
            ValueDistribution::PiecewiseLinearCdf { knots } => {
                if p <= 0.0 {
                    return knots[0].0;
                }
                if p >= 1.0 {
                    return knots[knots.len() - 1].0;
                }
                let i = knots.partition_point(|k| k.1 <= p);
                let (v0, p0) = knots[i - 1];
                let (v1, p1) = knots[i];
                v0 + (v1 - v0) * (p - p0) / (p1 - p0)
            }
        }
    }

    /// Inverse-CDF sampling; deterministic given the stream state.
    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        self.quantile(stream.next_f64())
    }

    /// φ(v) = v − (1 − F(v)) / f(v), for v in the interior of the support.
    pub fn virtual_value(&self, v: f64) -> Result<f64, DistError> {
        match self {
            ValueDistribution::Uniform { hi, .. } => Ok(2.0 * v - hi),
            ValueDistribution::Exponential { rate } => Ok(v - 1.0 / rate),
            _ => {
                let f = self.pdf(v);
                if f <= 0.0 {
                    return Err(DistError::ZeroDensity(v));
                }
                Ok(v - (1.0 - self.cdf(v)) / f)
            }
        }
    }

    /// The reserve r with φ(r) = 0, found by bisection on the support. Falls
    /// back to sup{v : φ(v) ≤ 0} (flagged) when φ does not change sign.
    pub fn monopoly_reserve(&self) -> Result<MonopolyReserve, DistError> {
        let (lo, _) = self.support();
        let hi = self.grid_hi();
        // evaluate just inside the support edges
        let eps = (hi - lo) * 1e-12;
        let a = lo + eps;
        let b = hi - eps;
        let phi_a = self.virtual_value(a)?;
        let phi_b = self.virtual_value(b)?;
        if phi_a > 0.0 {
            // φ positive on the whole interior: either the root sits exactly
            // on the lower support edge, or no value is ever excluded.
            let exact_root = self
                .virtual_value(lo)
                .map(|p| p.abs() <= 1e-9)
                .unwrap_or(false);
            return Ok(MonopolyReserve {
                value: lo,
                exact_root,
            });
        }
        if phi_b < 0.0 {
            return Ok(MonopolyReserve {
                value: hi,
                exact_root: false,
            });
        }
        let root = self.bisect(a, b, |v| self.virtual_value(v).unwrap_or(f64::NAN))?;
        Ok(MonopolyReserve {
            value: root,
            exact_root: true,
        })
    }

    /// Monotone bisection for φ(v) = w on a regular distribution.
    pub fn inverse_virtual(&self, w: f64) -> Result<f64, DistError> {
        let (lo, _) = self.support();
        let hi = self.grid_hi();
        let eps = (hi - lo) * 1e-12;
        let a = lo + eps;
        let b = hi - eps;
        let phi_a = self.virtual_value(a)?;
        let phi_b = self.virtual_value(b)?;
        if w < phi_a || w > phi_b {
            return Err(DistError::OutOfRange(w));
        }
        self.bisect(a, b, |v| self.virtual_value(v).unwrap_or(f64::NAN) - w)
    }

    fn bisect(&self, mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> Result<f64, DistError> {
        let fa = f(a);
        if fa == 0.0 {
            return Ok(a);
        }
        for _ in 0..BISECT_MAX_ITERS {
            if b - a <= BISECT_TOL {
                break;
            }
            let mid = 0.5 * (a + b);
            let fm = f(mid);
            if fm.is_nan() {
                return Err(DistError::ZeroDensity(mid));
            }
            if (fm <= 0.0) == (fa <= 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Checks φ monotonicity on a strictly increasing interior grid and
    /// reports the smallest secant slope (the α of α-regularity), clipped at 0.
    pub fn regularity_report(&self, grid: &[f64]) -> Result<RegularityReport, DistError> {
        assert!(grid.len() >= 2, "regularity grid needs at least two points");
        let mut regular = true;
        let mut alpha = f64::INFINITY;
        let mut prev_v = grid[0];
        let mut prev_phi = self.virtual_value(prev_v)?;
        for &v in &grid[1..] {
            debug_assert!(v > prev_v, "grid must be strictly increasing");
            let phi = self.virtual_value(v)?;
            let dphi = phi - prev_phi;
            if dphi < -1e-9 {
                regular = false;
            }
            alpha = alpha.min(dphi / (v - prev_v));
            prev_v = v;
            prev_phi = phi;
        }
        Ok(RegularityReport {
            regular,
            alpha_lower_bound: alpha.max(0.0),
        })
    }

    /// Evenly spaced grid strictly inside the support (endpoints excluded).
    pub fn interior_grid(&self, points: usize) -> Vec<f64> {
        let (lo, _) = self.support();
        let hi = self.grid_hi();
        let n = points.max(2);
        (1..=n)
            .map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64)
            .collect()
    }

    /// Evenly spaced grid including both support endpoints (hi truncated for
    /// infinite supports).
    pub fn inclusive_grid(&self, points: usize) -> Vec<f64> {
        let (lo, _) = self.support();
        let hi = self.grid_hi();
        let n = points.max(2);
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Substreams;
    use proptest::prelude::*;

    fn u01() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    fn exp1() -> ValueDistribution {
        ValueDistribution::exponential(1.0).unwrap()
    }

    /// pdf [2.0, 0.5, 2/3] on [0, 0.3, 0.7, 1.0]; the hazard-rate dip makes φ
    /// jump downward at 0.3.
    fn nonregular() -> ValueDistribution {
        ValueDistribution::piecewise_linear_cdf(vec![
            (0.0, 0.0),
            (0.3, 0.6),
            (0.7, 0.8),
            (1.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(u01().cdf(0.3), 0.3);
        assert_eq!(u01().cdf(-1.0), 0.0);
        assert!((exp1().cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn virtual_value_examples() {
        assert!((u01().virtual_value(0.75).unwrap() - 0.5).abs() < 1e-12);
        assert!((exp1().virtual_value(2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(u01().virtual_value(0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn monopoly_reserve_examples() {
        let r = u01().monopoly_reserve().unwrap();
        assert!(r.exact_root);
        assert!((r.value - 0.5).abs() <= 1e-9);
        let r = exp1().monopoly_reserve().unwrap();
        assert!((r.value - 1.0).abs() <= 1e-9);
        // root at the support edge: φ(v) = 2v − 2 on [1, 2]
        let d = ValueDistribution::uniform(1.0, 2.0).unwrap();
        let r = d.monopoly_reserve().unwrap();
        assert!((r.value - 1.0).abs() <= 1e-9);
        assert!(d.virtual_value(r.value.max(1.0 + 1e-15)).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn inverse_virtual_examples() {
        assert!((u01().inverse_virtual(0.3).unwrap() - 0.65).abs() <= 1e-9);
        assert!((u01().inverse_virtual(0.6).unwrap() - 0.8).abs() <= 1e-9);
        assert!((exp1().inverse_virtual(0.0).unwrap() - 1.0).abs() <= 1e-9);
        assert_eq!(u01().inverse_virtual(2.0), Err(DistError::OutOfRange(2.0)));
    }

    #[test]
    fn regularity_examples() {
        let grid = u01().interior_grid(1000);
        let rep = u01().regularity_report(&grid).unwrap();
        assert!(rep.regular);
        assert!((rep.alpha_lower_bound - 2.0).abs() < 1e-6);

        let grid = exp1().interior_grid(1000);
        let rep = exp1().regularity_report(&grid).unwrap();
        assert!(rep.regular);
        assert!((rep.alpha_lower_bound - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constructed_nonregular_prior_is_flagged() {
        let d = nonregular();
        // dense grid oracle: φ must drop somewhere around the 0.3 knot
        let grid = d.interior_grid(5000);
        let mut saw_drop = false;
        for w in grid.windows(2) {
            let a = d.virtual_value(w[0]).unwrap();
            let b = d.virtual_value(w[1]).unwrap();
            if b - a < -1e-6 {
                saw_drop = true;
            }
        }
        assert!(saw_drop, "oracle should see a φ drop");
        let rep = d.regularity_report(&grid).unwrap();
        assert!(!rep.regular);
        assert_eq!(rep.alpha_lower_bound, 0.0);
    }

    #[test]
    fn pdf_integrates_to_one_by_quadrature() {
        for d in [
            u01(),
            exp1(),
            ValueDistribution::truncated_exponential(2.0, 3.0).unwrap(),
            nonregular(),
        ] {
            let lo = d.support().0;
            let hi = d.grid_hi();
            // composite Simpson over a fine even grid; fine enough that the
            // O(h) error at piecewise-density jumps stays below 1e-6
            let n = 2_000_000;
            let h = (hi - lo) / n as f64;
            let mut s = d.pdf(lo) + d.pdf(hi);
            for i in 1..n {
                let v = lo + i as f64 * h;
                s += d.pdf(v) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let integral = s * h / 3.0;
            assert!(
                (integral - 1.0).abs() < 1e-6,
                "{d:?} integrates to {integral}"
            );
        }
    }

    #[test]
    fn inverse_cdf_sampling_examples() {
        // u = 0.42 on U[0,1] maps straight through
        assert_eq!(u01().quantile(0.42), 0.42);
        assert!((exp1().quantile(1.0 - (-1.0f64).exp()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_matches_clt_bound() {
        let streams = Substreams::new(123).labeled("dist-clt");
        let d = u01();
        let n = 1_000_000u64;
        let mut sum = 0.0;
        let mut stream = streams.stream(0);
        for _ in 0..n {
            sum += d.sample(&mut stream);
        }
        let mean = sum / n as f64;
        let bound = 3.0 * (1.0 / 12f64).sqrt() / 1e3;
        assert!(
            (mean - 0.5).abs() < bound,
            "mean {mean} outside CLT bound {bound}"
        );
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ValueDistribution::uniform(1.0, 1.0).is_err());
        assert!(ValueDistribution::exponential(0.0).is_err());
        assert!(
            ValueDistribution::piecewise_linear_cdf(vec![(0.0, 0.0), (0.5, 0.4), (0.4, 1.0)])
                .is_err()
        );
        assert!(ValueDistribution::piecewise_linear_cdf(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf_on_interior(p in 1e-6..0.999_999f64, hi in 0.5..4.0f64, rate in 0.2..5.0f64) {
            for d in [ValueDistribution::uniform(0.0, hi).unwrap(),
                      ValueDistribution::exponential(rate).unwrap(),
                      ValueDistribution::truncated_exponential(rate, hi).unwrap(),
                      nonregular()] {
                let v = d.quantile(p);
                let back = d.quantile(d.cdf(v));
                prop_assert!((back - v).abs() <= 1e-9, "{:?}: v {} back {}", d, v, back);
            }
        }

        #[test]
        fn inverse_virtual_round_trips(v in 0.05..0.95f64, hi in 0.5..4.0f64, rate in 0.2..5.0f64) {
            for d in [ValueDistribution::uniform(0.0, hi).unwrap(),
                      ValueDistribution::exponential(rate).unwrap()] {
                let hi_grid = d.grid_hi();
                let val = d.support().0 + v * (hi_grid - d.support().0);
                let w = d.virtual_value(val).unwrap();
                let back = d.inverse_virtual(w).unwrap();
                prop_assert!((back - val).abs() <= 1e-8);
            }
        }

        #[test]
        fn reserve_root_is_a_zero_of_phi(hi in 0.5..4.0f64, rate in 0.2..5.0f64) {
            for d in [ValueDistribution::uniform(0.0, hi).unwrap(),
                      ValueDistribution::exponential(rate).unwrap(),
                      ValueDistribution::truncated_exponential(rate, hi).unwrap()] {
                let r = d.monopoly_reserve().unwrap();
                if r.exact_root {
                    prop_assert!(d.virtual_value(r.value).unwrap().abs() <= 1e-8);
                }
            }
        }
    }
}
