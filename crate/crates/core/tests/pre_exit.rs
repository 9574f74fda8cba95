use levy_exit::densities::{exit_side_density, pre_exit_density, Side};
use levy_exit::pre_exit::{
    p_star, q_star, sample_gamma_envelope, weight_a, weight_b, EnvelopeKind, PreExitSampler,
};
use levy_exit::validation::oracles::simpson;
use levy_exit::validation::{chi_square, ks_two_sample, mean};
use levy_exit::RandomStream;

const BINS: usize = 50;

fn bin_counts(xs: &[f64], a: f64) -> Vec<u64> {
    let mut counts = vec![0u64; BINS];
    for &x in xs {
        let b = ((x + a) / (2.0 * a) * BINS as f64) as usize;
        counts[b.min(BINS - 1)] += 1;
    }
    counts
}

fn bin_probs(a: f64, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let w = 2.0 * a / BINS as f64;
    let m: Vec<f64> = (0..BINS).map(|i| simpson(&g, -a + i as f64 * w, -a + (i + 1) as f64 * w, 40)).collect();
    let total: f64 = m.iter().sum();
    m.iter().map(|v| v / total).collect()
}

fn gauss(v: f64, s: f64) -> f64 {
    (-v * v / (2.0 * s)).exp()
}

#[test]
fn gamma_envelope_matches_quadrature() {
    let (a, big_t, t) = (1.0, 0.5, 0.3);
    let probs = bin_probs(a, |x| gauss(a - x, t) * (a - x) * gauss(x, big_t) * (a - x.abs()));
    let mut passes = 0;
    for seed in 0..3 {
        let mut s = RandomStream::new(100 + seed, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma_envelope(&mut s, a, big_t, t).unwrap()).collect();
        assert!(xs.iter().all(|x| x.abs() < a));
        let (_, p) = chi_square(&bin_counts(&xs, a), &probs);
        if p > 1e-3 {
            passes += 1;
        }
    }
    assert!(passes >= 2);
}

#[test]
fn gamma_thinning_accepts_at_least_an_eighth() {
    // acceptance of the polynomial step is E[(a - x)(a - |x|)] / 2a^2 under the
    // truncated normal with mean a/2 when T = t
    let a = 1.0;
    for &time in &[0.02, 0.3, 1.0, 4.0] {
        let (mu, var) = (a / 2.0, time / 2.0);
        let w = |x: f64| gauss(x - mu, var);
        let norm = simpson(w, -a, a, 2000);
        let thin = simpson(|x| w(x) * (a - x) * (a - x.abs()), -a, a, 2000) / (2.0 * a * a);
        assert!(thin / norm >= 0.125, "T = t = {time}: {}", thin / norm);
    }
}

#[test]
fn pre_exit_chi_square_both_envelopes() {
    let (a, big_t, t) = (1.0, 0.5, 0.3);
    let probs = bin_probs(a, |x| {
        if x.abs() >= a {
            return 0.0;
        }
        exit_side_density(a, t, x, Side::Top, 1e-15).unwrap().value * pre_exit_density(a, big_t, x, 1e-15).unwrap().value
    });
    for (kind, n) in [(EnvelopeKind::Adaptive, 100_000), (EnvelopeKind::Paper, 5_000)] {
        let sampler = PreExitSampler::new(a, big_t, t, kind).unwrap();
        let mut passes = 0;
        for seed in 0..3 {
            let mut s = RandomStream::new(200 + seed, 0);
            let xs: Vec<f64> = (0..n).map(|_| sampler.sample(&mut s, Side::Top).unwrap()).collect();
            let (_, p) = chi_square(&bin_counts(&xs, a), &probs);
            if p > 1e-3 {
                passes += 1;
            }
        }
        assert!(passes >= 2, "{kind:?}");
    }
}

#[test]
fn bottom_side_is_the_mirror_image() {
    let sampler = PreExitSampler::new(1.0, 0.5, 0.3, EnvelopeKind::Adaptive).unwrap();
    let mut s = RandomStream::new(7, 1);
    let n = 20_000;
    let up: Vec<f64> = (0..n).map(|_| sampler.sample(&mut s, Side::Top).unwrap()).collect();
    let down: Vec<f64> = (0..n).map(|_| -sampler.sample(&mut s, Side::Bottom).unwrap()).collect();
    // two-sample threshold: 1.95 sqrt(2 / n)
    assert!(ks_two_sample(&up, &down) <= 1.95 * (2.0 / n as f64).sqrt());
}

#[test]
fn short_remaining_time_pushes_mass_to_the_exit() {
    let mut s = RandomStream::new(9, 0);
    let means: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&t| {
            let sampler = PreExitSampler::new(1.0, 0.5, t, EnvelopeKind::Adaptive).unwrap();
            let xs: Vec<f64> = (0..20_000).map(|_| sampler.sample(&mut s, Side::Top).unwrap()).collect();
            mean(&xs)
        })
        .collect();
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    assert!(means[2] > 0.9);
}

#[test]
fn weights_at_the_origin_of_the_index() {
    for &(a, t) in &[(1.0, 1.0), (0.3, 2.0), (2.0, 0.1)] {
        assert_eq!(weight_a(0, a, t), 1.0);
        assert_eq!(weight_a(1, a, t), 2.0);
        assert_eq!(weight_b(0, a, t), 1.0);
        for k in 2..8 {
            let (l, m, r) = (weight_a(k - 1, a, t), weight_a(k, a, t), weight_a(k + 1, a, t));
            assert!(l * r <= m * m, "a_k not log-concave at k = {k}");
        }
    }
}

#[test]
fn star_indices_stay_small_near_the_edges() {
    let a = 1.0;
    for &t in &[0.1, 1.0, 5.0] {
        assert_eq!(p_star(0.0, a, a * a).unwrap(), 0);
        for i in 1..=100 {
            let e = 1e-3 * i as f64 / 100.0;
            assert!(p_star(-a + e, a, t).unwrap() <= 3);
            assert!(q_star(a - e, a, t).unwrap() <= 3);
            assert_eq!(q_star(a - e, a, t).unwrap(), q_star(-a + e, a, t).unwrap());
        }
    }
}
