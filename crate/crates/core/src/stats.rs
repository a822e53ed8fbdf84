//! Rank statistics.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
}

/// 1-based ranks with ties sharing the average of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        // A constant sequence carries no ordering information.
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort(xs.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_reversed() {
        let v = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        assert!((spearman(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let r: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((spearman(&v, &r).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_use_average_ranks() {
        // By hand: ranks of [1,2,2,3] are [1, 2.5, 2.5, 4]; ranks of y are
        // [1,2,3,4]. Both have mean 2.5. Deviations: [-1.5,0,0,1.5] and
        // [-1.5,-0.5,0.5,1.5]. Sxy = 4.5, Sxx = 4.5, Syy = 5.
        // rho = 4.5 / sqrt(4.5 * 5) = sqrt(0.9).
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((rho - 0.9f64.sqrt()).abs() < 1e-12, "{rho}");
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn constant_input_is_uncorrelated() {
        assert_eq!(spearman(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(spearman(&[1.0], &[1.0]), Err(StatsError::TooShort(1)));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
    }

    proptest! {
        #[test]
        fn bounded_and_rank_invariant(xs in prop::collection::vec(-100i32..100, 2..40), seed in 0u64..1000) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| ((i as u64 * 7919 + seed) % 13) as f64 - x).collect();
            let rho = spearman(&xs, &ys).unwrap();
            prop_assert!((-1.0..=1.0).contains(&rho));
            // Strictly monotone transforms leave the statistic unchanged.
            let cubed: Vec<f64> = xs.iter().map(|x| x * x * x + 5.0).collect();
            prop_assert!((spearman(&cubed, &ys).unwrap() - rho).abs() < 1e-12);
        }
    }
}
