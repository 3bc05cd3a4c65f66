//! Empirical distributions.

/// Sorted copy with NaNs removed.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Percentile `q` in `[0, 100]` of sorted data, linear interpolation between
/// order statistics (`(n - 1) * q / 100` positions). NaN for empty input.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = (n - 1) as f64 * q.clamp(0.0, 100.0) / 100.0;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let t = pos - lo as f64;
            sorted[lo] + t * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    percentile_sorted(&sorted(values), q)
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Empirical CDF as `(x, F(x))` pairs, `x` nondecreasing, `F = (i + 1) / n`.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let s = sorted(values);
    let n = s.len() as f64;
    s.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// ECDF thinned to at most `points` evenly spaced quantiles.
pub fn ecdf_thinned(values: &[f64], points: usize) -> Vec<(f64, f64)> {
    let full = ecdf(values);
    if full.len() <= points || points < 2 {
        return full;
    }
    let n = full.len();
    (0..points)
        .map(|k| full[k * (n - 1) / (points - 1)])
        .collect()
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert_eq!(median(&v), 2.5);
        assert!((percentile(&v, 5.0) - 1.15).abs() < 1e-12);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn ecdf_is_sorted_and_ends_at_one() {
        let c = ecdf(&[3.0, 1.0, 2.0]);
        assert_eq!(c, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        let t = ecdf_thinned(&(0..1000).map(|i| i as f64).collect::<Vec<_>>(), 11);
        assert_eq!(t.len(), 11);
        assert_eq!(t.last().unwrap().1, 1.0);
        assert!(t.windows(2).all(|w| w[0].0 <= w[1].0));
    }
}
