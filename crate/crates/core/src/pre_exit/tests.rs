use super::*;
use crate::densities::{envelope_constant_cf, exit_side_density, pre_exit_density};

#[test]
fn p_terms_sum_to_exit_side_density() {
    let (a, t, x) = (1.0, 1.0, 0.5);
    let sum: f64 = (0..=40).map(|k| term_p(k, x, a, t).unwrap()).sum();
    let want = exit_side_density(a, t, x, Side::Top, 1e-14).unwrap();
    assert!((sum - want.value).abs() <= want.error_bound + 1e-14, "{sum} vs {want:?}");
}

#[test]
fn q_terms_sum_to_pre_exit_density() {
    let (a, big_t, x) = (1.0, 1.0, 0.4);
    let sum: f64 = (0..=40).map(|k| term_q(k, x, a, big_t).unwrap()).sum();
    let want = pre_exit_density(a, big_t, x, 1e-14).unwrap();
    assert!((sum - want.value).abs() <= want.error_bound + 1e-14);
    for k in 0..5 {
        assert_eq!(term_q(k, x, a, big_t).unwrap(), term_q(k, -x, a, big_t).unwrap());
    }
}

#[test]
fn scaled_terms_match_direct_hitting_densities() {
    use crate::densities::hitting;
    let (a, t) = (0.8, 0.3);
    for &x in &[-0.7, -0.2, 0.0, 0.35, 0.79] {
        for k in 0..4 {
            let kf = k as f64;
            let direct = hitting(4.0 * kf * a + a - x, t) - hitting(4.0 * kf * a + 3.0 * a + x, t);
            let got = term_p(k, x, a, t).unwrap();
            assert!((got - direct).abs() <= 1e-13 * direct.abs().max(1e-300) + 1e-300, "k={k} x={x}");
        }
    }
}

#[test]
fn star_indices() {
    assert_eq!(p_star(0.0, 1.0, 1.0).unwrap(), 0);
    let near_top = p_star(1.0 - 1e-6, 1.0, 1.0).unwrap();
    assert!((1..=2).contains(&near_top), "p* = {near_top}");
    let edge_bottom = (1..=50)
        .map(|i| p_star(-1.0 + 1e-3 * i as f64 / 50.0, 1.0, 1.0).unwrap())
        .max()
        .unwrap();
    assert!(edge_bottom <= 3);
    let edge_q = (1..=50)
        .flat_map(|i| {
            let x = 1.0 - 1e-3 * i as f64 / 50.0;
            [q_star(x, 1.0, 1.0).unwrap(), q_star(-x, 1.0, 1.0).unwrap()]
        })
        .max()
        .unwrap();
    assert!(edge_q <= 3);
}

#[test]
fn terms_positive_beyond_star() {
    let mut s = RandomStream::new(8, 0);
    for _ in 0..2000 {
        let a = 0.2 + 2.0 * s.uniform();
        let t = a * a * (0.01 + 5.0 * s.uniform());
        let x = a * (2.0 * s.uniform() - 1.0);
        let p = p_star(x, a, t).unwrap();
        for k in p + 1..p + 6 {
            let v = term_p_scaled(k, x, a, t);
            assert!(v > 0.0 || v == 0.0 && term_p_scaled(k - 1, x, a, t) >= 0.0);
        }
        let q = q_star(x, a, t).unwrap();
        for k in q + 1..q + 6 {
            assert!(term_q_scaled(k, x, a, t) >= 0.0);
        }
    }
}

#[test]
fn weights() {
    assert_eq!(weight_a(0, 1.3, 0.2), 1.0);
    assert_eq!(weight_a(1, 1.3, 0.2), 2.0);
    assert_eq!(weight_b(0, 1.3, 0.2), 1.0);
    for &(a, t) in &[(1.0, 0.1), (1.0, 1.0), (0.5, 3.0), (2.0, 50.0)] {
        for k in 2..30 {
            let (lo, mid, hi) = (weight_a(k - 1, a, t), weight_a(k, a, t), weight_a(k + 1, a, t));
            assert!(lo * hi <= mid * mid * (1.0 + 1e-12));
        }
        for k in 1..30 {
            let (lo, mid, hi) = (weight_b(k - 1, a, t), weight_b(k, a, t), weight_b(k + 1, a, t));
            assert!(lo * hi <= mid * mid * (1.0 + 1e-12));
        }
        for k in 1..40 {
            assert!(weight_a(k + 1, a, t) <= ratio_bound_a(k, a, t) * weight_a(k, a, t) * (1.0 + 1e-12) + f64::MIN_POSITIVE);
            assert!(weight_b(k + 1, a, t) <= ratio_bound_b(k, a, t) * weight_b(k, a, t) * (1.0 + 1e-12) + f64::MIN_POSITIVE);
        }
        let direct_a: f64 = (0..2000).map(|k| weight_a(k, a, t)).sum();
        let direct_b: f64 = (0..2000).map(|k| weight_b(k, a, t)).sum();
        let (ta, tb) = (weight_a_total(a, t).unwrap(), weight_b_total(a, t).unwrap());
        assert!(ta >= direct_a && ta <= direct_a * (1.0 + 1e-12));
        assert!(tb >= direct_b && tb <= direct_b * (1.0 + 1e-12));
    }
}

fn sum_ar(x: f64, a: f64, t: f64, c: f64) -> f64 {
    let m = p_star(x, a, t).unwrap();
    (0..60).map(|k| weight_a(k, a, t) * ratio_r(k, x, m, a, t, c).unwrap()).sum()
}

fn sum_bs(x: f64, a: f64, big_t: f64, bound: QBound) -> f64 {
    let m = q_star(x, a, big_t).unwrap();
    (0..60).map(|k| weight_b(k, a, big_t) * ratio_s(k, x, m, a, big_t, bound).unwrap()).sum()
}

#[test]
fn ratio_series_identities() {
    let (a, t, x) = (1.0, 1.0, 0.3);
    let cf = envelope_constant_cf(a, t).unwrap();
    let f = exit_side_density(a, t, x, Side::Top, 1e-15).unwrap().value;
    let want = f / (cf * normal_density(t, a - x) * (a - x));
    assert!((sum_ar(x, a, t, cf) - want).abs() < 1e-9);

    let big_t = 1.0;
    let q = pre_exit_density(a, big_t, x, 1e-15).unwrap().value;
    let want = q / (4.0 * a / big_t * normal_density(big_t, x) * (a - x.abs()));
    assert!((sum_bs(x, a, big_t, QBound::Paper) - want).abs() < 1e-9);
    let want = q / (normal_density(big_t, x) * QBound::Capped.shape(a, big_t, x));
    assert!((sum_bs(x, a, big_t, QBound::Capped) - want).abs() < 1e-9);
}

#[test]
fn ratios_lie_in_unit_interval() {
    let mut s = RandomStream::new(21, 0);
    for _ in 0..10_000 {
        let a = 0.1 + 3.0 * s.uniform();
        let t = a * a * (0.002 + 4.0 * s.uniform());
        let big_t = a * a * (0.002 + 4.0 * s.uniform());
        let x = a * (2.0 * s.uniform() - 1.0) * (1.0 - 1e-9);
        let k = (s.uniform() * 6.0) as usize;
        let p = p_star(x, a, t).unwrap();
        let q = q_star(x, a, big_t).unwrap();
        let cf = envelope_constant_cf(a, t).unwrap();
        let r = ratio_r(k, x, p, a, t, cf).unwrap();
        assert!((0.0..1.0).contains(&r), "r = {r} a={a} t={t} x={x} k={k}");
        // the 1/t bound is attained up to rounding when g_t(4a - y) << g_t(y)
        let r = ratio_r(k, x, p, a, t, 1.0 / t).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&r), "sharp r = {r} a={a} t={t} x={x} k={k}");
        let j = k + q.saturating_sub(2);
        let v = ratio_s(j, x, q, a, big_t, QBound::Paper).unwrap();
        assert!((0.0..1.0).contains(&v), "s = {v} a={a} T={big_t} x={x} k={j}");
        let v = ratio_s(j, x, q, a, big_t, QBound::Capped).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&v), "capped s = {v} a={a} T={big_t} x={x} k={j}");
    }
}

#[test]
fn eigen_bounds_dominate() {
    for &(a, time) in &[(1.0, 0.25), (1.0, 0.7), (0.5, 0.2), (2.0, 30.0), (1.0, 3.0)] {
        let (mf, lf) = exit_side_eigen_bounds(a, time).unwrap();
        let (mq, lq) = pre_exit_eigen_bounds(a, time).unwrap();
        for i in 1..400 {
            let x = -a + 2.0 * a * i as f64 / 400.0;
            let w = a - x.abs();
            let f = exit_side_density(a, time, x, Side::Top, 1e-14).unwrap();
            let q = pre_exit_density(a, time, x, 1e-14).unwrap();
            assert!(f.upper() <= mf.min(lf * w) * (1.0 + 1e-12), "f a={a} t={time} x={x}");
            assert!(q.upper() <= mq.min(lq * w) * (1.0 + 1e-12), "q a={a} T={time} x={x}");
        }
    }
}

#[test]
fn implied_density_matches_product_for_both_envelopes() {
    let cases = [
        (1.0, 0.5, 0.3),
        (1.0, 0.05, 0.01),
        (1.0, 0.01, 0.2),
        (1.0, 2.0, 0.1),
        (1.0, 0.3, 3.0),
        (1.0, 5.0, 5.0),
        (0.4, 0.02, 0.05),
    ];
    for &(a, big_t, t) in &cases {
        for kind in [EnvelopeKind::Paper, EnvelopeKind::Adaptive] {
            let Ok(s) = PreExitSampler::new(a, big_t, t, kind) else {
                assert_eq!(kind, EnvelopeKind::Paper);
                continue;
            };
            let d = s.identity_defect(101).unwrap();
            assert!(d < 1e-9, "{kind:?} a={a} T={big_t} t={t}: defect {d}");
        }
    }
}

#[test]
fn adaptive_acceptance_is_bounded_below() {
    let grid = [1e-4, 1e-3, 0.01, 0.05, 0.2, 0.24, 0.26, 0.5, 0.69, 0.71, 1.0, 2.0, 5.0, 20.0];
    let mut worst = f64::INFINITY;
    for &big_t in &grid {
        for &t in &grid {
            let s = PreExitSampler::new(1.0, big_t, t, EnvelopeKind::Adaptive).unwrap();
            worst = worst.min(s.acceptance_rate());
            assert!(s.acceptance_rate() <= 1.0 + 1e-9);
        }
    }
    assert!(worst > 0.1, "worst acceptance {worst}");
}

#[test]
fn paper_envelope_refuses_tiny_times() {
    let r = PreExitSampler::new(1.0, 1e-6, 1e-6, EnvelopeKind::Paper);
    assert!(matches!(r, Err(Error::Parameter(_))));
}

#[test]
fn samples_stay_inside_and_reflect() {
    let mut s1 = RandomStream::new(4, 0);
    let mut s2 = RandomStream::new(4, 0);
    for &(big_t, t) in &[(0.5, 0.3), (0.01, 0.01), (3.0, 0.001), (0.001, 4.0), (4.0, 4.0)] {
        let sampler = PreExitSampler::new(1.0, big_t, t, EnvelopeKind::Adaptive).unwrap();
        for _ in 0..200 {
            let up = sampler.sample(&mut s1, Side::Top).unwrap();
            let down = sampler.sample(&mut s2, Side::Bottom).unwrap();
            assert!(up.abs() < 1.0);
            assert_eq!(up, -down);
        }
    }
}

#[test]
fn extreme_time_splits() {
    let mut s = RandomStream::new(13, 0);
    // undershoot times reach ~1e-32 h from the arcsine draw, remaining times
    // are at least one ulp of h
    for &big_t in &[1e-40, 1e-25, 1e-12, 1e-6, 1.0, 30.0] {
        for &t in &[1e-18, 1e-12, 1e-6, 1.0, 30.0] {
            let sampler = PreExitSampler::new(1.0, big_t, t, EnvelopeKind::Adaptive)
                .unwrap_or_else(|e| panic!("T={big_t} t={t}: {e}"));
            assert!(sampler.acceptance_rate() > 0.05, "T={big_t} t={t}: {}", sampler.acceptance_rate());
            for _ in 0..20 {
                let x = sampler.sample(&mut s, Side::Top).unwrap();
                assert!(x.abs() <= 1.0, "T={big_t} t={t}: {x}");
            }
        }
    }
}
