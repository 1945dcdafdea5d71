use std::collections::HashMap;

use crate::error::{arg, Result};
use crate::mixtures::Partition;

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same records.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return arg(format!("labelings of different lengths {} and {}", a.len(), b.len()));
    }
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len());
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max == expected {
        // Both labelings are all-singletons or all-one-cluster.
        return Ok(if Partition::from_labels(a) == Partition::from_labels(b) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Fraction of samples in which records `i` and `j` share a cluster,
/// stored row-major as an `n x n` matrix.
pub fn posterior_similarity(samples: &[Vec<usize>]) -> Vec<f64> {
    let n = samples.first().map_or(0, Vec::len);
    let mut psm = vec![0.0; n * n];
    for s in samples {
        for i in 0..n {
            for j in i..n {
                if s[i] == s[j] {
                    psm[i * n + j] += 1.0;
                }
            }
        }
    }
    let inv = 1.0 / samples.len().max(1) as f64;
    for i in 0..n {
        for j in i..n {
            let v = psm[i * n + j] * inv;
            psm[i * n + j] = v;
            psm[j * n + i] = v;
        }
    }
    psm
}

/// Expected Binder loss (equal costs, up to a constant) of `labels`.
pub fn binder_loss(labels: &[usize], psm: &[f64]) -> f64 {
    let n = labels.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let same = (labels[i] == labels[j]) as u8 as f64;
            loss += (same - psm[i * n + j]).abs();
        }
    }
    loss
}

/// Visited partition with the smallest expected Binder loss; ties go to the
/// earliest sample.
pub fn point_estimate_partition(samples: &[Vec<usize>]) -> Result<Partition> {
    if samples.is_empty() {
        return arg("no allocation samples");
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return arg("allocation samples of different lengths");
    }
    let psm = posterior_similarity(samples);
    let mut seen = std::collections::HashSet::new();
    let mut best: Option<(f64, Partition)> = None;
    for s in samples {
        let p = Partition::from_labels(s);
        if !seen.insert(p.labels().to_vec()) {
            continue;
        }
        let loss = binder_loss(p.labels(), &psm);
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, p));
        }
    }
    Ok(best.expect("at least one sample").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ari_reference_cases() {
        assert_eq!(ari(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(ari(&[0, 0, 0], &[5, 5, 5]).unwrap(), 1.0);
        assert!(ari(&[0, 1], &[0]).is_err());
        // Hand-computed contingency table.
        let v = ari(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        let (index, sa, sb, total) = (2.0, 6.0, 3.0, 15.0);
        let e = sa * sb / total;
        assert!((v - (index - e) / (0.5 * (sa + sb) - e)).abs() < 1e-15);
    }

    #[test]
    fn ari_chance_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mean = 0.0;
        for _ in 0..100 {
            let a: Vec<usize> = (0..1000).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<usize> = (0..1000).map(|_| rng.random_range(0..2)).collect();
            mean += ari(&a, &b).unwrap();
        }
        assert!((mean / 100.0).abs() < 0.02);
    }

    #[test]
    fn point_estimates() {
        let p = vec![0, 0, 1, 1, 2];
        assert_eq!(point_estimate_partition(&vec![p.clone(); 4]).unwrap(), Partition::from_labels(&p));
        let a = vec![0, 0, 1];
        let b = vec![0, 1, 1];
        let tie = point_estimate_partition(&[a.clone(), b.clone(), a.clone(), b.clone()]).unwrap();
        assert_eq!(tie, Partition::from_labels(&a));
        let mode = vec![0, 0, 0, 1, 1];
        let mut samples = vec![mode.clone(); 7];
        samples.extend([vec![0, 1, 2, 3, 4], vec![0, 0, 0, 0, 0], vec![0, 1, 0, 1, 0]]);
        assert_eq!(point_estimate_partition(&samples).unwrap(), Partition::from_labels(&mode));
    }

    proptest! {
        #[test]
        fn ari_is_permutation_invariant(a in proptest::collection::vec(0usize..4, 2..40), shift in 1usize..5) {
            let b: Vec<usize> = a.iter().map(|&x| (x + shift) % 4 + 10).collect();
            prop_assert!((ari(&a, &b).unwrap() - 1.0).abs() < 1e-12);
            let v = ari(&a, &a.iter().rev().copied().collect::<Vec<_>>()).unwrap();
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&v));
        }
    }
}
