//! Small statistics helpers for Monte Carlo summaries.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Self { mean, se: 0.0, n };
        }
        let ss: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&ss) / (n - 1) as f64;
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Pairwise (cascade) summation; deterministic for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Least-squares nonincreasing fit (pool adjacent violators).
pub fn isotonic_decreasing(ys: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &y in ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb));
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Whether a decreasing sequence fits inside the intervals `[lo_i, hi_i]`.
/// With `strict`, consecutive values must drop by at least `1e-12`.
pub fn decreasing_fit_within(intervals: &[(f64, f64)], strict: bool) -> Option<Vec<f64>> {
    let gap = if strict { 1e-12 } else { 0.0 };
    let mut fit = Vec::with_capacity(intervals.len());
    let mut prev = f64::INFINITY;
    for &(lo, hi) in intervals {
        // stay as high as allowed to leave room for later rows
        let y = if prev.is_finite() { hi.min(prev - gap) } else { hi };
        if y < lo || y.is_nan() {
            return None;
        }
        fit.push(y);
        prev = y;
    }
    Some(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wilson_reference_values() {
        // closed form evaluated by hand for 10/100
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert_abs_diff_eq!(lo, 0.055229, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 0.174366, epsilon = 1e-6);
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, Z95 * Z95 / (1000.0 + Z95 * Z95), epsilon = 1e-15);
    }

    #[test]
    fn quantiles() {
        let xs = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&xs), 2.5);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
    }

    #[test]
    fn estimate_basic() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert_abs_diff_eq!(e.se, (1.666_666_666_666_666_7f64 / 4.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn decreasing_fit() {
        assert!(decreasing_fit_within(&[(-1.0, 0.0), (-1.0, 0.0), (-1.0, 0.0)], true).is_some());
        assert!(decreasing_fit_within(&[(0.0, 0.0), (0.0, 0.0)], true).is_none());
        assert!(decreasing_fit_within(&[(0.0, 0.0), (0.0, 0.0)], false).is_some());
        assert!(decreasing_fit_within(&[(-2.0, -1.0), (0.0, 1.0)], false).is_none());
        assert!(decreasing_fit_within(&[(-0.5, -0.4), (f64::NEG_INFINITY, -0.3)], true).is_some());
    }

    proptest! {
        #[test]
        fn isotonic_is_nonincreasing_and_mean_preserving(ys in prop::collection::vec(-10.0f64..10.0, 1..20)) {
            let fit = isotonic_decreasing(&ys);
            prop_assert_eq!(fit.len(), ys.len());
            for w in fit.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12);
            }
            let s1: f64 = ys.iter().sum();
            let s2: f64 = fit.iter().sum();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }

        #[test]
        fn wilson_contains_point_estimate(hits in 0usize..200, extra in 0usize..200) {
            let n = hits + extra + 1;
            let (lo, hi) = wilson_interval(hits, n, Z95);
            let p = hits as f64 / n as f64;
            prop_assert!(lo <= p + 1e-15 && p <= hi + 1e-15);
        }
    }
}
