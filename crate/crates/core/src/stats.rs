//! Small statistics helpers for multi-run aggregation and trend tests.

/// z-value of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). `None` for fewer than two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Normal-approximation half-width `1.96·σ/√n`.
pub fn ci95_halfwidth(xs: &[f64]) -> Option<f64> {
    sample_std(xs).map(|s| Z_95 * s / (xs.len() as f64).sqrt())
}

/// 1-based ranks, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut num = 0.0;
    let (mut dx, mut dy) = (0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    if dx == 0.0 || dy == 0.0 {
        0.0
    } else {
        num / (dx * dy).sqrt()
    }
}

/// One-sided sign test: `P(X >= successes)` for `X ~ Binomial(trials, 1/2)`.
pub fn sign_test_p(successes: usize, trials: usize) -> f64 {
    if successes == 0 {
        return 1.0;
    }
    // Pascal's triangle in f64 is exact far past any realistic trial count.
    let mut row = vec![1.0f64];
    for _ in 0..trials {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    let tail: f64 = row[successes.min(trials + 1)..].iter().sum();
    tail / 2f64.powi(trials as i32)
}
