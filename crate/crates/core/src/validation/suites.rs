//! The nine acceptance criteria as runnable checks, grouped into suites.

use std::f64::consts::PI;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::oracles::{
    arcsine_cdf, cauchy_exit_cdf, discretized_process_oracle, discretized_subordinator_oracle, exit_time_cdf,
    simpson,
};
use super::{chi_square, ks_distance, ks_two_sample, mean, Check, Direction, GofReport, GofTest, MAJORITY_SEEDS};
use crate::densities::{
    boundary_derivatives, exit_side_density, exit_side_density_with, exit_time_density, exit_time_density_with,
    exit_time_survival, pre_exit_density, pre_exit_density_with, Representation, Side,
};
use crate::engine::{sample_passage_event_with, EngineOptions, ExitProblem, ProcessSpec, StopReason};
use crate::error::{Error, Result};
use crate::exit_time::{constants, sample_exit_time, sample_exit_time_counted, BranchCounts};
use crate::pre_exit::{
    p_star, q_star, ratio_r, ratio_s, term_p_scaled, term_q_scaled, EnvelopeKind, PreExitSampler, QBound,
};
use crate::densities::envelope_constant_cf;
use crate::stream::RandomStream;
use crate::subordinator::{PassageKind, StableHalfParams, Subordinator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Series,
    BmExit,
    PreExit,
    Subordinator,
    Engine,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Series => &[1, 2],
            Suite::BmExit => &[3],
            Suite::PreExit => &[4],
            Suite::Subordinator => &[5],
            Suite::Engine => &[6, 7, 8, 9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "series" => Suite::Series,
            "bm-exit" => Suite::BmExit,
            "pre-exit" => Suite::PreExit,
            "subordinator" => Suite::Subordinator,
            "engine" => Suite::Engine,
            "all" => Suite::All,
            other => return Err(Error::Parameter(format!("unknown suite {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub criterion: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Set when a sampler failed before the checks could finish.
    pub error: Option<String>,
    pub seconds: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

pub fn title(criterion: u8) -> &'static str {
    match criterion {
        1 => "dual-series agreement",
        2 => "density identities",
        3 => "exit time sampler",
        4 => "pre-exit location sampler",
        5 => "stable subordinator triplet",
        6 => "engine, creeping subordinator",
        7 => "engine, Cauchy process",
        8 => "engine, truncated jumps",
        9 => "engine termination",
        _ => "unknown",
    }
}

/// Runs one criterion, turning sampler errors into a failed report.
pub fn run_criterion(criterion: u8, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let result = match criterion {
        1 => dual_series(),
        2 => identities(),
        3 => exit_time_sampler(seed),
        4 => pre_exit_sampler(seed),
        5 => subordinator_triplet(seed),
        6 => engine_creep(seed),
        7 => engine_cauchy(seed),
        8 => engine_truncated(seed),
        9 => engine_termination(seed),
        _ => Err(Error::Parameter(format!("no criterion {criterion}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(checks) => {
            let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
            CriterionReport {
                criterion,
                title: title(criterion),
                checks,
                error: None,
                seconds,
                pass,
            }
        }
        Err(e) => CriterionReport {
            criterion,
            title: title(criterion),
            checks: Vec::new(),
            error: Some(e.to_string()),
            seconds,
            pass: false,
        },
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    let criteria: Vec<_> = suite.criteria().iter().map(|&c| run_criterion(c, seed)).collect();
    let pass = criteria.iter().all(|c| c.pass);
    SuiteReport {
        suite,
        seed,
        criteria,
        pass,
    }
}

const GRID_A: [f64; 3] = [0.5, 1.0, 2.0];
const GRID_TIME: [f64; 4] = [0.05, 0.2, 1.0, 5.0];
const GRID_X: [f64; 5] = [0.0, 0.3, -0.3, 0.9, -0.9];
const SERIES_TOL: f64 = 1e-12;

fn bound(criterion: u8, name: &str, statistic: f64, n: usize, threshold: f64) -> Check {
    Check::single(
        criterion,
        name,
        GofReport::new(GofTest::Bound, statistic, n, threshold, Direction::AtMost, 0),
    )
}

fn seeds(seed: u64) -> impl Iterator<Item = u64> {
    (0..MAJORITY_SEEDS as u64).map(move |i| seed.wrapping_add(i))
}

fn sqrt_n_ks(samples: &[f64], cdf: impl Fn(f64) -> f64, seed: u64) -> GofReport {
    let d = ks_distance(samples, cdf);
    let n = samples.len();
    GofReport::new(GofTest::Ks, d * (n as f64).sqrt(), n, super::KS_SQRT_N_THRESHOLD, Direction::AtMost, seed)
}

fn within(test: GofTest, value: f64, target: f64, tol: f64, n: usize, seed: u64) -> GofReport {
    GofReport::new(test, (value - target).abs(), n, tol, Direction::AtMost, seed)
}

/// Criterion 1.
pub fn dual_series() -> Result<Vec<Check>> {
    let mut worst = [0.0f64; 3];
    let mut disjoint = 0usize;
    let mut points = 0usize;
    for &a in &GRID_A {
        for &r in &GRID_TIME {
            for &xr in &GRID_X {
                let (t, x) = (r * a * a, xr * a);
                let pairs = [
                    (
                        exit_time_density_with(a, t, x, SERIES_TOL, Representation::Hitting)?,
                        exit_time_density_with(a, t, x, SERIES_TOL, Representation::Eigen)?,
                    ),
                    (
                        exit_side_density_with(a, t, x, Side::Top, SERIES_TOL, Representation::Hitting)?,
                        exit_side_density_with(a, t, x, Side::Top, SERIES_TOL, Representation::Eigen)?,
                    ),
                    (
                        pre_exit_density_with(a, t, x, SERIES_TOL, Representation::Hitting)?,
                        pre_exit_density_with(a, t, x, SERIES_TOL, Representation::Eigen)?,
                    ),
                ];
                for (i, (h, e)) in pairs.iter().enumerate() {
                    points += 1;
                    let diff = (h.value - e.value).abs();
                    worst[i] = worst[i].max(diff);
                    if !h.agrees_with(e, 1e-14 * h.value.abs().max(1.0)) {
                        disjoint += 1;
                    }
                }
            }
        }
    }
    Ok(vec![
        bound(1, "exit time density, hitting vs eigen max |diff|", worst[0], points / 3, 1e-9),
        bound(1, "exit side density, hitting vs eigen max |diff|", worst[1], points / 3, 1e-9),
        bound(1, "pre-exit density, image vs eigen max |diff|", worst[2], points / 3, 1e-9),
        bound(1, "certified intervals that fail to intersect", disjoint as f64, points, 0.0),
    ])
}

/// `-g(a - eps) / eps` extrapolated twice; exact for odd functions vanishing
/// at `a` up to `O(eps^6)`.
fn edge_slope(g: impl Fn(f64) -> Result<f64>, eps: f64) -> Result<f64> {
    let d = |e: f64| -> Result<f64> { Ok(-g(e)? / e) };
    let (d1, d2, d4) = (d(eps)?, d(eps / 2.0)?, d(eps / 4.0)?);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Criterion 2.
pub fn identities() -> Result<Vec<Check>> {
    let mut sides: f64 = 0.0;
    let mut mass: f64 = 0.0;
    let mut flux: f64 = 0.0;
    let mut deriv: f64 = 0.0;
    let mut n = 0;
    for &a in &GRID_A {
        for &r in &GRID_TIME {
            let t = r * a * a;
            n += 1;
            for &xr in &GRID_X {
                let x = xr * a;
                let up = exit_side_density(a, t, x, Side::Top, 1e-14)?.value;
                let down = exit_side_density(a, t, -x, Side::Top, 1e-14)?.value;
                let f = exit_time_density(a, t, x, 1e-14)?.value;
                sides = sides.max((up + down - f).abs());
            }
            let q = |x: f64| pre_exit_density(a, t, x, 1e-15).map(|v| v.value).unwrap_or(f64::NAN);
            let integral = simpson(q, -a, a, 4000);
            mass = mass.max((integral - exit_time_survival(a, t, 1e-15)?.value).abs());

            let eps = 1e-2 * a.min(t.sqrt());
            let slope_q = edge_slope(|e| Ok(pre_exit_density(a, t, a - e, 1e-16)?.value), eps)?;
            let f0 = exit_time_density(a, t, 0.0, 1e-15)?.value;
            flux = flux.max((slope_q + f0).abs());

            let bd = boundary_derivatives(a, t)?;
            let (s_top, s_bottom) = (bd.exit_top_at_top.value, bd.exit_top_at_bottom.value);
            // density values near the edge are about slope * e; ask for 1e-13 of that
            let top = edge_slope(|e| Ok(exit_side_density(a, t, a - e, Side::Top, (1e-13 * s_top.abs() * e).max(1e-300))?.value), eps)?;
            let bottom = -edge_slope(
                |e| Ok(exit_side_density(a, t, -a + e, Side::Top, (1e-13 * s_bottom.abs() * e).max(1e-300))?.value),
                eps,
            )?;
            for (series, fd) in [(s_top, top), (s_bottom, bottom)] {
                if series.abs() > 1e-280 {
                    deriv = deriv.max((series - fd).abs() / series.abs());
                }
            }
        }
    }
    Ok(vec![
        bound(2, "max |f+(x) + f+(-x) - f(x)|", sides, n * GRID_X.len(), 1e-10),
        bound(2, "max |int q dx - survival|", mass, n, 1e-8),
        bound(2, "max |d/dx q(t, a) + f(t, 0)|", flux, n, 1e-8),
        bound(2, "boundary derivative series vs finite differences, max rel", deriv, 2 * n, 1e-6),
    ])
}

/// Criterion 3.
pub fn exit_time_sampler(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 100_000;
    let p_large = constants().large_branch_probability();
    let (mut m1, mut m2, mut ks, mut freq) = (vec![], vec![], vec![], vec![]);
    for s in seeds(seed) {
        let mut stream = RandomStream::new(s, 3);
        let xs: Vec<f64> = (0..N).map(|_| sample_exit_time(&mut stream, 1.0)).collect::<Result<_>>()?;
        m1.push(within(GofTest::Moment, mean(&xs), 1.0, 0.008, N, s));
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        m2.push(within(GofTest::Moment, mean(&sq), 5.0 / 3.0, 0.05, N, s));
        ks.push(sqrt_n_ks(&xs, |t| exit_time_cdf(1.0, t), s));

        let mut counts = BranchCounts::default();
        let mut branch_stream = RandomStream::new(s, 30);
        while counts.iterations() < N as u64 {
            sample_exit_time_counted(&mut branch_stream, 1.0, &mut counts)?;
        }
        let f = counts.large_iterations as f64 / counts.iterations() as f64;
        freq.push(within(GofTest::Frequency, f, p_large, 0.005, counts.iterations() as usize, s));
    }
    Ok(vec![
        Check::new(3, "|mean - 1|", m1, true),
        Check::new(3, "|second moment - 5/3|", m2, true),
        Check::new(3, "sqrt(n) KS vs series CDF", ks, true),
        Check::new(3, "|large-branch frequency - A/(A+B)|", freq, true),
    ])
}

/// Bin probabilities of `f_1^+(0.3, x) q_1(0.5, x)` over equal bins of `(-a, a)`.
fn pre_exit_bin_probs(a: f64, big_t: f64, t: f64, bins: usize) -> Result<(Vec<f64>, f64)> {
    let g = |x: f64| {
        if x.abs() >= a {
            return 0.0;
        }
        let f = exit_side_density(a, t, x, Side::Top, 1e-15).map(|v| v.value).unwrap_or(f64::NAN);
        let q = pre_exit_density(a, big_t, x, 1e-15).map(|v| v.value).unwrap_or(f64::NAN);
        f * q
    };
    let w = 2.0 * a / bins as f64;
    let masses: Vec<f64> = (0..bins)
        .map(|i| simpson(g, -a + i as f64 * w, -a + (i + 1) as f64 * w, 64))
        .collect();
    let total: f64 = masses.iter().sum();
    if !total.is_finite() {
        return Err(Error::internal("pre-exit quadrature produced a non-finite mass"));
    }
    Ok((masses.iter().map(|m| m / total).collect(), total))
}

fn underflows(exponent: f64) -> bool {
    exponent < -700.0
}

/// Criterion 4.
pub fn pre_exit_sampler(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 100_000;
    const BINS: usize = 50;
    let (a, big_t, t) = (1.0, 0.5, 0.3);
    let (probs, total) = pre_exit_bin_probs(a, big_t, t, BINS)?;
    // Chapman-Kolmogorov: int q(T, x) f+(t, x) dx = f+(T + t, 0) = f(T + t, 0) / 2
    let want = 0.5 * exit_time_density(a, big_t + t, 0.0, 1e-15)?.value;
    let mut checks = vec![bound(4, "|int q f+ dx - f(T+t, 0)/2|", (total - want).abs(), 1, 1e-9)];
    // the paper envelope accepts about 1e-4 of proposals here, so it gets a
    // smaller sample to stay inside the runtime budget
    for (kind, n) in [(EnvelopeKind::Adaptive, N), (EnvelopeKind::Paper, N / 10)] {
        let sampler = PreExitSampler::new(a, big_t, t, kind)?;
        let mut reports = vec![];
        for s in seeds(seed) {
            let mut stream = RandomStream::new(s, 4);
            let mut counts = vec![0u64; BINS];
            for _ in 0..n {
                let x = sampler.sample(&mut stream, Side::Top)?;
                let b = ((x + a) / (2.0 * a) * BINS as f64) as usize;
                counts[b.min(BINS - 1)] += 1;
            }
            let (_, p) = chi_square(&counts, &probs);
            reports.push(GofReport::new(GofTest::Chi2, p, n, 1e-3, Direction::AtLeast, s));
        }
        let name = match kind {
            EnvelopeKind::Adaptive => "chi2 p-value, adaptive envelope",
            EnvelopeKind::Paper => "chi2 p-value, paper envelope (n = 10^4)",
        };
        checks.push(Check::new(4, name, reports, true));
    }

    let mut stream = RandomStream::new(seed, 40);
    let (mut bad_ratio, mut bad_sharp, mut bad_terms) = (0usize, 0usize, 0usize);
    const POINTS: usize = 10_000;
    for _ in 0..POINTS {
        let a = 0.1 + 3.0 * stream.uniform();
        let t = a * a * (0.002 + 4.0 * stream.uniform());
        let big_t = a * a * (0.002 + 4.0 * stream.uniform());
        let x = a * (2.0 * stream.uniform() - 1.0) * (1.0 - 1e-9);
        let k = (stream.uniform() * 6.0) as usize;
        let p = p_star(x, a, t)?;
        let q = q_star(x, a, big_t)?;
        let cf = envelope_constant_cf(a, t)?;
        let j = k + q.saturating_sub(2);
        let r = ratio_r(k, x, p, a, t, cf)?;
        let s = ratio_s(j, x, q, a, big_t, QBound::Paper)?;
        if !(0.0..1.0).contains(&r) || !(0.0..1.0).contains(&s) {
            bad_ratio += 1;
        }
        let r = ratio_r(k, x, p, a, t, 1.0 / t)?;
        let s = ratio_s(j, x, q, a, big_t, QBound::Capped)?;
        if !(0.0..=1.0 + 1e-12).contains(&r) || !(0.0..=1.0 + 1e-12).contains(&s) {
            bad_sharp += 1;
        }
        for i in 1..=5 {
            let kp = (p + i) as f64;
            let vp = term_p_scaled(p + i, x, a, t);
            if !(vp > 0.0 || vp == 0.0 && underflows(-4.0 * kp * a * (2.0 * kp * a + a - x) / t)) {
                bad_terms += 1;
            }
            let kq = (q + i) as f64;
            let vq = term_q_scaled(q + i, x, a, big_t);
            if !(vq > 0.0 || vq == 0.0 && underflows(-4.0 * kq * a * (2.0 * kq * a + x.abs()) / big_t)) {
                bad_terms += 1;
            }
        }
    }
    checks.push(bound(4, "points with r_k or s_k outside [0, 1), paper constants", bad_ratio as f64, POINTS, 0.0));
    checks.push(bound(4, "points with r_k or s_k above 1, sharp constants", bad_sharp as f64, POINTS, 0.0));
    checks.push(bound(4, "nonpositive P_{p*+k} or Q_{q*+k}, k = 1..5", bad_terms as f64, 10 * POINTS, 0.0));
    Ok(checks)
}

/// Criterion 5.
pub fn subordinator_triplet(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 100_000;
    const N_ORACLE: usize = 10_000;
    const DELTA: f64 = 1e-4;
    let h = 1.0f64;
    let params = StableHalfParams::new(1.0)?;
    let mut under = vec![];
    let mut mean_under = vec![];
    let mut mean_time = vec![];
    let mut oracle = [vec![], vec![], vec![]];
    let mut horizon = [vec![], vec![]];
    let quartile = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.75);
    let horizons = [quartile * h.sqrt() / params.sigma, 1.0];
    for s in seeds(seed) {
        let mut stream = RandomStream::new(s, 5);
        let exact: Vec<_> = (0..N).map(|_| params.sample_first_passage(&mut stream, h)).collect::<Result<_>>()?;
        let s_minus: Vec<f64> = exact.iter().map(|tr| tr.s_minus).collect();
        let times: Vec<f64> = exact.iter().map(|tr| tr.t).collect();
        let s_plus: Vec<f64> = exact.iter().map(|tr| tr.s_plus).collect();
        under.push(sqrt_n_ks(&s_minus, |y| arcsine_cdf(y, h), s));
        mean_under.push(within(GofTest::Moment, mean(&s_minus), 0.5, 0.01, N, s));
        mean_time.push(within(GofTest::Moment, mean(&times), (2.0 / PI).sqrt(), 0.01, N, s));

        let mut oracle_stream = RandomStream::new(s, 50);
        let grid: Vec<_> = (0..N_ORACLE)
            .map(|_| discretized_subordinator_oracle(&mut oracle_stream, &params, h, DELTA))
            .collect::<Result<_>>()?;
        let comps: [(&[f64], Vec<f64>); 3] = [
            (&times, grid.iter().map(|g| g.t).collect()),
            (&s_minus, grid.iter().map(|g| g.s_minus).collect()),
            (&s_plus, grid.iter().map(|g| g.s_plus).collect()),
        ];
        for (i, (ex, gr)) in comps.iter().enumerate() {
            let d = ks_two_sample(ex, gr);
            oracle[i].push(GofReport::new(GofTest::Ks, d, N_ORACLE, 0.02, Direction::AtMost, s));
        }

        for (i, &u) in horizons.iter().enumerate() {
            let mut hs = RandomStream::new(s, 51 + i as u64);
            let mut hits = 0usize;
            for _ in 0..N {
                let tr = params.sample_first_passage_with_horizon(&mut hs, h, u)?;
                if tr.kind == PassageKind::Horizon {
                    hits += 1;
                }
            }
            let p = params.prob_below(u, h);
            let tol = 3.0 * (p * (1.0 - p) / N as f64).sqrt();
            horizon[i].push(within(GofTest::Frequency, hits as f64 / N as f64, p, tol, N, s));
        }
    }
    let [ot, om, op] = oracle;
    let [h0, h1] = horizon;
    Ok(vec![
        Check::new(5, "sqrt(n) KS undershoot vs arcsine", under, true),
        Check::new(5, "|mean undershoot - 1/2|", mean_under, true),
        Check::new(5, "|mean passage time - sqrt(2/pi)|", mean_time, true),
        Check::new(5, "KS passage time vs grid oracle", ot, true),
        Check::new(5, "KS undershoot vs grid oracle", om, true),
        Check::new(5, "KS overshoot vs grid oracle", op, true),
        Check::new(5, "|horizon frequency - 1/2| at sigma u / sqrt(h) = z_0.75", h0, true),
        Check::new(5, "|horizon frequency - erfc(sigma u / sqrt(2h))| at u = 1", h1, true),
    ])
}

fn events(
    spec: &ProcessSpec,
    problem: &ExitProblem,
    n: usize,
    stream: &mut RandomStream,
) -> Result<Vec<crate::engine::PassageEvent>> {
    let options = EngineOptions::default();
    (0..n)
        .map(|_| sample_passage_event_with(spec, problem, &options, stream, |_| {}))
        .collect()
}

/// Linear interpolation of `x -> int_{-a}^x q(T, y) dy / survival(T)`.
fn horizon_position_cdf(a: f64, big_t: f64) -> Result<impl Fn(f64) -> f64> {
    const M: usize = 4000;
    let w = 2.0 * a / M as f64;
    let q = |x: f64| pre_exit_density(a, big_t, x, 1e-15).map(|v| v.value).unwrap_or(f64::NAN);
    let mut cum = vec![0.0; M + 1];
    for i in 0..M {
        let lo = -a + i as f64 * w;
        cum[i + 1] = cum[i] + simpson(q, lo, lo + w, 4);
    }
    let total = cum[M];
    if !total.is_finite() {
        return Err(Error::internal("horizon position quadrature failed"));
    }
    Ok(move |x: f64| {
        let u = ((x + a) / w).clamp(0.0, M as f64);
        let i = (u as usize).min(M - 1);
        let frac = u - i as f64;
        (cum[i] + frac * (cum[i + 1] - cum[i])) / total
    })
}

/// Criterion 6.
pub fn engine_creep(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 10_000;
    let drift = Subordinator::drift(1.0)?;
    let open = ExitProblem::new(-1.0, 1.0, f64::INFINITY)?;
    let t0 = 0.5;
    let capped = ExitProblem::new(-1.0, 1.0, t0)?;
    let survival = exit_time_survival(1.0, t0, 1e-15)?.value;
    let position_cdf = horizon_position_cdf(1.0, t0)?;
    let (mut single, mut walk, mut stopped, mut position) = (vec![], vec![], vec![], vec![]);
    let mut exits_ok = true;
    for s in seeds(seed) {
        let mut stream = RandomStream::new(s, 6);
        for (r, out) in [(f64::INFINITY, &mut single), (1.0, &mut walk)] {
            let spec = ProcessSpec::new(r, drift)?;
            let ev = events(&spec, &open, N, &mut stream)?;
            exits_ok &= ev.iter().all(|e| e.stopped_by == StopReason::Exit && e.value.abs() == 1.0);
            let times: Vec<f64> = ev.iter().map(|e| e.time).collect();
            out.push(sqrt_n_ks(&times, |t| exit_time_cdf(1.0, t), s));
        }
        let spec = ProcessSpec::new(1.0, drift)?;
        let ev = events(&spec, &capped, N, &mut stream)?;
        let at_horizon: Vec<f64> = ev
            .iter()
            .filter(|e| e.stopped_by == StopReason::Horizon)
            .map(|e| e.value)
            .collect();
        let f = at_horizon.len() as f64 / N as f64;
        let tol = 3.0 * (survival * (1.0 - survival) / N as f64).sqrt();
        stopped.push(within(GofTest::Frequency, f, survival, tol, N, s));
        position.push(sqrt_n_ks(&at_horizon, &position_cdf, s));
    }
    Ok(vec![
        Check::new(6, "sqrt(n) KS event time vs fet_1, r = inf", single, true),
        Check::new(6, "sqrt(n) KS event time vs fet_1, r = 1 (multi-step)", walk, true),
        Check::new(6, "|P{horizon} - survival(0.5)|, r = 1, t0 = 0.5", stopped, true),
        Check::new(6, "sqrt(n) KS position at horizon vs q_1(0.5, .)", position, true),
        bound(6, "creep exits not landing on +-1", if exits_ok { 0.0 } else { 1.0 }, 6 * N, 0.0),
    ])
}

/// Criterion 7.
pub fn engine_cauchy(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 10_000;
    let spec = ProcessSpec::new(f64::INFINITY, Subordinator::stable_half(1.0 / PI)?)?;
    let problem = ExitProblem::new(-1.0, 1.0, f64::INFINITY)?;
    let (mut ks, mut top) = (vec![], vec![]);
    let mut outside = 0usize;
    for s in seeds(seed) {
        let mut stream = RandomStream::new(s, 7);
        let ev = events(&spec, &problem, N, &mut stream)?;
        let mags: Vec<f64> = ev.iter().map(|e| e.value.abs()).collect();
        ks.push(GofReport::new(GofTest::Ks, ks_distance(&mags, cauchy_exit_cdf), N, 0.02, Direction::AtMost, s));
        let f = ev.iter().filter(|e| e.side == Some(Side::Top)).count() as f64 / N as f64;
        top.push(within(GofTest::Frequency, f, 0.5, 0.015, N, s));
        outside += ev.iter().filter(|e| !(e.pre_value.abs() <= 1.0)).count();
    }
    Ok(vec![
        Check::new(7, "KS |X| vs (2/pi) arcsec", ks, true),
        Check::new(7, "|P{top exit} - 1/2|", top, true),
        bound(7, "events with pre-exit value outside [-1, 1]", outside as f64, 3 * N, 0.0),
    ])
}

/// Criterion 8.
pub fn engine_truncated(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 5_000;
    const DELTA: f64 = 1e-4;
    let r = 0.5;
    let sub = Subordinator::stable_half(1.0)?;
    let Subordinator::StableHalf(params) = sub else {
        unreachable!()
    };
    let spec = ProcessSpec::new(r, sub)?;
    let problem = ExitProblem::new(-1.0, 1.0, f64::INFINITY)?;
    let mut ks = vec![];
    let mut violations = 0usize;
    let mut discarded = 0u64;
    for s in seeds(seed) {
        let mut stream = RandomStream::new(s, 8);
        let ev = events(&spec, &problem, N, &mut stream)?;
        for e in &ev {
            discarded += e.discarded_jumps;
            if e.max_retained_jump > r || e.min_discarded_jump <= r || (e.value - e.pre_value).abs() > r {
                violations += 1;
            }
        }
        let values: Vec<f64> = ev.iter().map(|e| e.value).collect();
        let mut oracle_stream = RandomStream::new(s, 80);
        let grid: Vec<f64> = (0..N)
            .map(|_| discretized_process_oracle(&mut oracle_stream, &params, r, -1.0, 1.0, DELTA, 1 << 32).map(|g| g.value))
            .collect::<Result<_>>()?;
        ks.push(GofReport::new(GofTest::Ks, ks_two_sample(&values, &grid), N, 0.05, Direction::AtMost, s));
    }
    Ok(vec![
        Check::new(8, "KS X at exit vs grid oracle", ks, true),
        bound(8, "events breaking |D| <= r < |discarded d|", violations as f64, 3 * N, 0.0),
        Check::single(
            8,
            "discarded jumps seen",
            GofReport::new(GofTest::Bound, discarded as f64, 3 * N, 1.0, Direction::AtLeast, seed),
        ),
    ])
}

/// Increases in the iteration-count histogram past its mode, after pooling
/// counts into blocks of `width` consecutive values, over the blocks holding
/// at least `floor` runs. Returns the increases and the blocks inspected.
pub fn tail_block_increases(iterations: &[u64], width: usize, floor: u64) -> (usize, usize) {
    let max = iterations.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; max + 1];
    for &k in iterations {
        hist[k as usize] += 1;
    }
    let mode = (0..hist.len()).max_by_key(|&k| (hist[k], std::cmp::Reverse(k))).unwrap_or(0);
    let blocks: Vec<u64> = hist[mode..].chunks(width).map(|c| c.iter().sum()).collect();
    let mut increases = 0;
    let mut inspected = 0;
    for w in blocks.windows(2) {
        if w[1] < floor {
            break;
        }
        inspected += 1;
        if w[1] > w[0] {
            increases += 1;
        }
    }
    (increases, inspected)
}

/// Criterion 9.
pub fn engine_termination(seed: u64) -> Result<Vec<Check>> {
    const N: usize = 100_000;
    let spec = ProcessSpec::new(0.5, Subordinator::stable_half(1.0)?)?;
    let problem = ExitProblem::new(-1.0, 1.0, f64::INFINITY)?;
    let options = EngineOptions::default();
    let mut stream = RandomStream::new(seed, 9);
    let mut iterations = Vec::with_capacity(N);
    let mut capped = 0usize;
    for _ in 0..N {
        match sample_passage_event_with(&spec, &problem, &options, &mut stream, |_| {}) {
            Ok(e) => iterations.push(e.iterations),
            Err(Error::Internal(_)) => capped += 1,
            Err(e) => return Err(e),
        }
    }
    let (increases, blocks) = tail_block_increases(&iterations, 10, 100);
    let max = iterations.iter().copied().max().unwrap_or(0);
    Ok(vec![
        bound(9, "runs hitting the iteration cap", capped as f64, N, 0.0),
        bound(9, &format!("largest iteration count (cap {})", options.iteration_cap), max as f64, N, options.iteration_cap as f64 - 1.0),
        bound(9, &format!("increases past the mode, blocks of 10 iterations ({blocks} blocks with >= 100 runs)"), increases as f64, N, 0.0),
    ])
}
