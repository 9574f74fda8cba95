use levy_exit::subordinator::{PassageKind, StableHalfParams};
use levy_exit::validation::oracles::discretized_subordinator_oracle;
use levy_exit::validation::{ks_distance, ks_two_sample};
use levy_exit::RandomStream;

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn marginal_median_and_scaling() {
    let p = StableHalfParams::new(1.7).unwrap();
    let mut s = RandomStream::new(1, 0);
    let u = 0.6;
    let mut xs: Vec<f64> = (0..100_000).map(|_| p.sample_marginal(&mut s, u).unwrap()).collect();
    // z_0.75 = 0.6744897501960817
    let want = (p.sigma * u / 0.674_489_750_196_081_7f64).powi(2);
    assert!((median(&mut xs) / want - 1.0).abs() < 0.02);

    // S_u / u^2 has the law of S_1
    let unit: Vec<f64> = (0..20_000).map(|_| p.sample_marginal(&mut s, 1.0).unwrap()).collect();
    let scaled: Vec<f64> = (0..20_000).map(|_| p.sample_marginal(&mut s, 3.0).unwrap() / 9.0).collect();
    assert!(ks_two_sample(&unit, &scaled) <= 1.95 * (2.0f64 / 20_000.0).sqrt());
}

#[test]
fn marginal_below_level_matches_erfc() {
    let p = StableHalfParams::new(1.0).unwrap();
    let mut s = RandomStream::new(2, 0);
    let (u, h, n) = (0.8, 1.0, 100_000);
    let below = (0..n).filter(|_| p.sample_marginal(&mut s, u).unwrap() <= h).count() as f64 / n as f64;
    let want = p.prob_below(u, h);
    assert!((below - want).abs() <= 3.0 * (want * (1.0 - want) / n as f64).sqrt());
}

#[test]
fn overshoot_conditional_median() {
    // given s_minus the overshoot s_plus - s_minus has median 4 (h - s_minus)
    let p = StableHalfParams::new(1.0).unwrap();
    let mut s = RandomStream::new(3, 0);
    let h = 1.0;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); 5];
    for _ in 0..100_000 {
        let tr = p.sample_first_passage(&mut s, h).unwrap();
        let b = ((tr.s_minus / h) * 5.0) as usize;
        bins[b.min(4)].push((tr.s_plus - tr.s_minus) / (h - tr.s_minus));
    }
    for mut b in bins {
        assert!((median(&mut b) / 4.0 - 1.0).abs() < 0.05);
    }
}

#[test]
fn infinite_horizon_is_the_plain_triplet() {
    let p = StableHalfParams::new(0.7).unwrap();
    let mut s1 = RandomStream::new(4, 0);
    let mut s2 = RandomStream::new(4, 0);
    for _ in 0..1000 {
        let a = p.sample_first_passage(&mut s1, 2.0).unwrap();
        let b = p.sample_first_passage_with_horizon(&mut s2, 2.0, f64::INFINITY).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn triplet_classification_holds_everywhere() {
    let mut s = RandomStream::new(5, 0);
    for i in 0..1_000_000u64 {
        let sigma = 0.1 + (i % 7) as f64;
        let h = 0.01 + (i % 11) as f64 * 0.3;
        let horizon = if i % 3 == 0 { f64::INFINITY } else { 0.05 + (i % 5) as f64 * 0.2 };
        let p = StableHalfParams::new(sigma).unwrap();
        let tr = p.sample_first_passage_with_horizon(&mut s, h, horizon).unwrap();
        assert!(tr.is_consistent(h, horizon), "{tr:?} h = {h} horizon = {horizon}");
        assert_ne!(tr.kind, PassageKind::Creep);
    }
}

#[test]
fn undershoot_is_arcsine() {
    let p = StableHalfParams::new(2.0).unwrap();
    let mut s = RandomStream::new(6, 0);
    let h = 3.0;
    let xs: Vec<f64> = (0..50_000).map(|_| p.sample_first_passage(&mut s, h).unwrap().s_minus).collect();
    let d = ks_distance(&xs, |y| levy_exit::validation::oracles::arcsine_cdf(y, h));
    assert!(d * (50_000f64).sqrt() <= 1.95);
}

#[test]
fn grid_oracle_bias_shrinks_with_the_step() {
    let p = StableHalfParams::new(1.0).unwrap();
    let mut s = RandomStream::new(7, 0);
    // the bias is about half a step in t, so the ladder starts coarse enough
    // to stand out of the sampling noise
    let n = 20_000;
    let exact: Vec<f64> = (0..n).map(|_| p.sample_first_passage(&mut s, 1.0).unwrap().t).collect();
    let d: Vec<f64> = [0.3, 0.1, 0.01]
        .iter()
        .map(|&delta| {
            let grid: Vec<f64> = (0..n)
                .map(|_| discretized_subordinator_oracle(&mut s, &p, 1.0, delta).unwrap().t)
                .collect();
            ks_two_sample(&exact, &grid)
        })
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}
