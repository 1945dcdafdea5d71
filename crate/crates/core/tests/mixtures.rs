use proptest::prelude::*;
use rand::SeedableRng;

use privmix::mixtures::{
    eppf_log_prob, mala_beta_params_step, nig_posterior, polya_urn_propose, stick_breaking_weights, BetaKernel,
    BetaKernelParam, GammaGammaBase, GaussianKernel, GaussianKernelParam, Kernel, NigBase, Partition, SuffStats,
};
use privmix::samplers::ChainRng;
use privmix::special::ln_gamma;

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for _ in 1..n {
        let mut next = Vec::new();
        for p in &out {
            let k = p.iter().max().unwrap() + 1;
            for c in 0..=k {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

#[test]
fn urn_frequencies() {
    let mut rng = ChainRng::seed_from_u64(2);
    let draws = 200_000;
    let check = |sizes: &[usize], alpha: f64, want: &[f64], rng: &mut ChainRng| {
        let mut counts = vec![0usize; want.len()];
        for _ in 0..draws {
            counts[polya_urn_propose(sizes, alpha, rng)] += 1;
        }
        for (c, p) in counts.iter().zip(want) {
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() < 4.0 * se, "{counts:?} vs {want:?}");
        }
    };
    check(&[2], 1.0, &[2.0 / 3.0, 1.0 / 3.0], &mut rng);
    check(&[1, 1], 2.0, &[0.25, 0.25, 0.5], &mut rng);
    assert_eq!(polya_urn_propose(&[], 1.0, &mut rng), 0);
    let new = (0..1000).filter(|_| polya_urn_propose(&[3, 4], 1e12, &mut rng) == 2).count();
    assert_eq!(new, 1000);
}

#[test]
fn eppf_values() {
    assert!(eppf_log_prob(&Partition::one_cluster(1), 0.7).abs() < 1e-12);
    assert!((eppf_log_prob(&Partition::one_cluster(2), 1.0) - 0.5f64.ln()).abs() < 1e-14);
    let total: f64 = set_partitions(3).iter().map(|l| eppf_log_prob(&Partition::from_labels(l), 1.5).exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn kernels() {
    let g = GaussianKernel;
    let std = GaussianKernelParam { mu: 0.0, sigma2: 1.0 };
    assert!((g.log_density(&std, 0.0) + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    let b = BetaKernel;
    let flat = BetaKernelParam { a: 1.0, b: 1.0 };
    for y in [1e-6, 0.3, 0.999] {
        assert!(b.log_density(&flat, y).abs() < 1e-12);
    }
    assert!(b.checked_log_density(&flat, 1.5).is_err());
    let p = BetaKernelParam { a: 5.0, b: 50.0 };
    let mut rng = ChainRng::seed_from_u64(3);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| b.sample(&p, &mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = 5.0 * 50.0 / (55.0f64.powi(2) * 56.0);
    assert!((mean - 5.0 / 55.0).abs() < 3.0 * (var / n as f64).sqrt());
    assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
}

#[test]
fn nig_posterior_degenerate_cases() {
    let prior = NigBase::new(1.5, 0.3, 2.0, 4.0).unwrap();
    assert_eq!(nig_posterior(&prior, &SuffStats::default()), prior);
    let one = nig_posterior(&prior, &SuffStats::from_data(&[1.5]));
    assert!((one.mu0 - 1.5).abs() < 1e-14);
    assert!((one.b - 4.0).abs() < 1e-14);
    assert!((one.a - 2.5).abs() < 1e-14);
    assert!((one.lambda - 1.3).abs() < 1e-14);
}

fn ln_nig(p: &NigBase, mu: f64, s2: f64) -> f64 {
    let ln_normal = -0.5 * (2.0 * std::f64::consts::PI * s2 / p.lambda).ln() - p.lambda * (mu - p.mu0).powi(2) / (2.0 * s2);
    let ln_ig = p.a * p.b.ln() - ln_gamma(p.a) - (p.a + 1.0) * s2.ln() - p.b / s2;
    ln_normal + ln_ig
}

#[test]
fn mala_tiny_step_accepts() {
    let y = [0.2, 0.35, 0.5, 0.41, 0.27];
    let prior = GammaGammaBase::default();
    let mut rng = ChainRng::seed_from_u64(8);
    let mut p = BetaKernelParam { a: 2.0, b: 3.0 };
    let mut accepted = 0;
    for _ in 0..10_000 {
        let o = mala_beta_params_step(&y, p, 1e-4, &prior, &mut rng);
        accepted += o.accepted as usize;
        p = o.param;
    }
    assert!(accepted as f64 / 1e4 >= 0.999);
}

#[test]
fn mala_reaches_the_mode_of_a_large_cluster() {
    let mut rng = ChainRng::seed_from_u64(9);
    let b = BetaKernel;
    let truth = BetaKernelParam { a: 5.0, b: 50.0 };
    let y: Vec<f64> = (0..80).map(|_| b.sample(&truth, &mut rng)).collect();
    let prior = GammaGammaBase::default();
    let mut p = BetaKernelParam { a: 1.0, b: 1.0 };
    let mut accepted = 0;
    let mut trace = Vec::new();
    for it in 0..4000 {
        let o = mala_beta_params_step(&y, p, prior.step, &prior, &mut rng);
        accepted += o.accepted as usize;
        p = o.param;
        if it >= 2000 {
            trace.push(p.b / (p.a + p.b));
        }
    }
    assert!(accepted > 3000, "{accepted}");
    // the cluster mean is pinned by the data even though the prior shrinks a and b
    let m = trace.iter().sum::<f64>() / trace.len() as f64;
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    assert!((1.0 - m - ybar).abs() < 0.02, "{m} {ybar}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eppf_sums_to_one(n in 1usize..7, alpha in 0.05f64..20.0) {
        let total: f64 = set_partitions(n).iter().map(|l| eppf_log_prob(&Partition::from_labels(l), alpha).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stick_breaking_telescopes(alpha in 0.01f64..50.0, h in 1usize..80, seed in any::<u64>()) {
        let s = stick_breaking_weights(alpha, h, &mut ChainRng::seed_from_u64(seed));
        prop_assert_eq!(s.weights.len(), h);
        prop_assert!(s.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        prop_assert!(s.remainder >= 0.0);
        prop_assert!((s.weights.iter().sum::<f64>() + s.remainder - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nig_posterior_is_prior_times_likelihood(
        data in prop::collection::vec(-5.0f64..5.0, 1..20),
        mu0 in -2.0f64..2.0,
        lambda in 0.05f64..3.0,
        a in 0.5f64..5.0,
        b in 0.5f64..5.0,
    ) {
        let prior = NigBase::new(mu0, lambda, a, b).unwrap();
        let post = nig_posterior(&prior, &SuffStats::from_data(&data));
        let g = GaussianKernel;
        let gap = |mu: f64, s2: f64| {
            let lik: f64 = data.iter().map(|&y| g.log_density(&GaussianKernelParam { mu, sigma2: s2 }, y)).sum();
            ln_nig(&post, mu, s2) - ln_nig(&prior, mu, s2) - lik
        };
        let base = gap(0.0, 1.0);
        for (mu, s2) in [(-1.0, 0.5), (2.0, 3.0), (0.3, 0.2), (-3.0, 7.0)] {
            prop_assert!((gap(mu, s2) - base).abs() < 1e-6 * (1.0 + base.abs()));
        }
    }
}
