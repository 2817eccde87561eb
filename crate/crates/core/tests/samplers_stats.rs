use sepdp::samplers::{poisson_sample, shuffle_sample, RngSeed};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn shuffle_round_of_fixed_record_is_uniform() {
    let (n, m, plans) = (10usize, 3usize, 100_000u64);
    let mut counts = vec![0u64; m];
    let mut kept = 0u64;
    for s in 0..plans {
        let plan = shuffle_sample(n, m, &mut RngSeed::new(s, 0).rng()).unwrap();
        if let Some(j) = plan.round_of(0) {
            counts[j] += 1;
            kept += 1;
        }
    }
    let expected = kept as f64 / m as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((m - 1) as f64)
        .unwrap()
        .inverse_cdf(1.0 - 1e-6);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    // A record is discarded with probability (N mod M) / N.
    let drop_rate = 1.0 - kept as f64 / plans as f64;
    let se = (0.1 * 0.9 / plans as f64).sqrt();
    assert!((drop_rate - 0.1).abs() < 4.0 * se, "drop rate {drop_rate}");
}

#[test]
fn singleton_rounds_are_uniform() {
    let seeds = 100_000u64;
    let mut counts = [0u64; 6];
    for s in 0..seeds {
        let plan = shuffle_sample(6, 6, &mut RngSeed::new(s, 1).rng()).unwrap();
        assert!(plan.rounds.iter().all(|r| r.len() == 1));
        counts[plan.round_of(1).unwrap()] += 1;
    }
    let p = 1.0 / 6.0;
    let se = (p * (1.0 - p) / seeds as f64).sqrt();
    for (j, &c) in counts.iter().enumerate() {
        let f = c as f64 / seeds as f64;
        assert!((f - p).abs() <= 3.0 * se, "round {j}: {f}");
    }
}

#[test]
fn shuffle_plans_are_exact_partitions() {
    for s in 0..200u64 {
        let n = 50 + (s as usize % 17);
        let m = 1 + (s as usize % 9);
        let plan = shuffle_sample(n, m, &mut RngSeed::new(s, 2).rng()).unwrap();
        let b = n / m;
        let mut all: Vec<usize> = plan.rounds.concat();
        assert!(plan.rounds.iter().all(|r| r.len() == b));
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), m * b);
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn poisson_memberships_are_uncorrelated() {
    let (n, q, m, plans) = (20usize, 0.3, 3usize, 20_000u64);
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut neighbour = Vec::new();
    for s in 0..plans {
        let plan = poisson_sample(n, q, m, &mut RngSeed::new(s, 3).rng()).unwrap();
        for i in 0..n {
            first.push(plan.contains(0, i) as u8 as f64);
            second.push(plan.contains(1, i) as u8 as f64);
            neighbour.push(plan.contains(0, (i + 1) % n) as u8 as f64);
        }
    }
    let se = 1.0 / (first.len() as f64).sqrt();
    let across_rounds = correlation(&first, &second);
    let across_records = correlation(&first, &neighbour);
    assert!(across_rounds.abs() <= 3.0 * se, "rounds: {across_rounds}");
    assert!(
        across_records.abs() <= 3.0 * se,
        "records: {across_records}"
    );
    let rate = first.iter().sum::<f64>() / first.len() as f64;
    assert!((rate - q).abs() <= 3.0 * (q * (1.0 - q) / first.len() as f64).sqrt());
}
