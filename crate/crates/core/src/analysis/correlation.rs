use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check<F: Scalar>(xs: &[F], ys: &[F]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidConfig(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::Undefined(format!("correlation needs at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Undefined("non-finite input".into()));
    }
    Ok(())
}

fn constant<F: Scalar>(v: &[F]) -> bool {
    v.iter().all(|&x| x == v[0])
}

pub fn pearson<F: Scalar>(xs: &[F], ys: &[F]) -> Result<F> {
    check(xs, ys)?;
    if constant(xs) || constant(ys) {
        return Err(Error::Undefined("constant input".into()));
    }
    let n = F::from_count(xs.len());
    let mx = xs.iter().copied().sum::<F>() / n;
    let my = ys.iter().copied().sum::<F>() / n;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-F::one()).min(F::one()))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks<F: Scalar>(xs: &[F]) -> Vec<F> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite input"));
    let mut ranks = vec![F::zero(); xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged.
        let avg = F::from_count(i + j + 2) / F::lit(2.0);
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman<F: Scalar>(xs: &[F], ys: &[F]) -> Result<F> {
    check(xs, ys)?;
    if constant(xs) || constant(ys) {
        return Err(Error::Undefined("constant input".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Number of tied pairs among runs of equal adjacent values.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of inversions.
fn merge_count<F: Scalar>(v: &mut [F]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            merged.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Kendall tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall<F: Scalar>(xs: &[F], ys: &[F]) -> Result<F> {
    check(xs, ys)?;
    let n = xs.len() as u64;
    let mut pairs: Vec<(F, F)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite input")
            .then(a.1.partial_cmp(&b.1).expect("finite input"))
    });
    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let n3 = tied_pairs(&pairs);
    let mut y: Vec<F> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut y);
    let n2 = tied_pairs(&y);
    if n1 == n0 || n2 == n0 {
        return Err(Error::Undefined("constant input".into()));
    }
    // concordant - discordant = n0 - n1 - n2 + n3 - 2 * swaps
    let num = (n0 + n3) as f64 - (n1 + n2) as f64 - 2.0 * swaps as f64;
    let den = (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt();
    let tau = F::lit(num) / F::lit(den);
    Ok(tau.max(-F::one()).min(F::one()))
}
