//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! `ACCEPTANCE_ONLY=1,4` runs a subset; `ACCEPTANCE_SCALE=0.1` shrinks every
//! ensemble for quick local runs (the verdicts are then only indicative).

use std::env;
use std::error::Error;
use std::f64::consts::LN_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use etn_core::appendix::{appendix_a_step, contraction, expected_g, MixedFlagRow};
use etn_core::circuit::{layer_pairs, run_trajectory, Boundary, CircuitParams, Observables, Parity};
use etn_core::dp::{haar_pc_estimate, run_dp, DpParams, PairDistribution, STANDARD_PC};
use etn_core::etn::{build_etn, min_cut_series};
use etn_core::scaling::{
    bootstrap_points, chord_coordinate, collapse_quality, cross_section_at_eta, fit_conformal, fit_line, fit_power_law,
    fit_steady_state, interval_means, parabola_minimum, regime_report, rescale_dp, rescale_entropy_dp, self_noise_baseline,
    slope_drift, CollapseCurve, ConformalReference, Curve, ExponentSet, Point, RescaledCurve, ScalingDataset, CONFORMAL_WINDOW,
};
use etn_core::seed::trajectory_seed;
use etn_core::{InitKind, PrimeField, QubitTableau, StabilizerTableau};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[allow(dead_code, unused_imports)]
#[path = "../../core/tests/dense_oracle.rs"]
mod dense_oracle;

type Outcome = Result<Verdict, Box<dyn Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Ok(Verdict { pass, detail })
}

fn scale() -> f64 {
    env::var("ACCEPTANCE_SCALE").ok().and_then(|s| s.parse().ok()).unwrap_or(1.0)
}

/// Ensemble size after scaling.
fn n(base: usize) -> usize {
    ((base as f64 * scale()).ceil() as usize).max(8)
}

/// `f` run once per trajectory seed of `master`, in index order.
fn ensemble<T: Send>(count: usize, master: u64, f: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| f(&mut ChaCha8Rng::seed_from_u64(trajectory_seed(master, i))))
        .collect()
}

fn mean_se(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = v.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Column means: `samples[i][k]` is trajectory `i` at `times[k]`.
fn column_points(samples: &[Vec<f64>], times: &[f64]) -> Vec<Point> {
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (value, stderr) = mean_se(samples.iter().map(|s| s[k]));
            Point { t, value, stderr, n: samples.len() as u64 }
        })
        .collect()
}

fn triples(points: &[Point]) -> Vec<(f64, f64, f64)> {
    points.iter().map(|p| (p.t, p.value, p.stderr)).collect()
}

/// About `count` integer times, log-spaced over `[lo, hi]`.
fn log_times(lo: f64, hi: f64, count: usize) -> Vec<usize> {
    let mut ts: Vec<usize> = (0..count)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    ts.dedup();
    ts
}

fn pick(series: &[f64], times: &[usize]) -> Vec<f64> {
    times.iter().map(|&t| series[t]).collect()
}

fn as_f64(times: &[usize]) -> Vec<f64> {
    times.iter().map(|&t| t as f64).collect()
}

fn one_curve(observable: &str, q_plus_1: u32, len: usize, rate: f64, points: Vec<Point>) -> Result<ScalingDataset, Box<dyn Error>> {
    Ok(ScalingDataset::new(observable, q_plus_1, "purification", vec![Curve { len, rate, points }])?)
}

fn dp_params(len: usize, depth: usize, dist: PairDistribution, record: bool) -> DpParams {
    DpParams { len, depth, boundary: Boundary::Periodic, dist, record }
}

fn clifford(q_plus_1: u32, len: usize, depth: usize, rate: f64, init: InitKind, obs: Observables) -> CircuitParams {
    CircuitParams {
        field: PrimeField::new(q_plus_1).expect("prime"),
        len,
        depth,
        rate,
        boundary: Boundary::Periodic,
        init,
        observables: obs,
    }
}

fn entropy_only() -> Observables {
    Observables { entropy: true, ..Default::default() }
}

// ---------------------------------------------------------------- criteria

fn dp_decay() -> Outcome {
    let (len, depth) = (2048, 10_000);
    let times = log_times(100.0, depth as f64, 40);
    let params = dp_params(len, depth, PairDistribution::standard(STANDARD_PC)?, false);
    let runs = ensemble(n(200), 101, |rng| pick(&run_dp(&params, rng).expect("valid").density, &times));
    let fit = fit_power_law(&triples(&column_points(&runs, &as_f64(&times))))?;
    let alpha = -fit.exponent;
    verdict(
        (alpha - 0.159).abs() <= 0.010,
        format!("alpha = {alpha:.4} ± {:.4} from {} samples, t in [100, 1e4] (want 0.159 ± 0.010)", fit.exponent_err, runs.len()),
    )
}

struct DpEnsemble {
    len: usize,
    rate: f64,
    times: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl DpEnsemble {
    fn rescaled(&self, points: Vec<Point>, exps: &ExponentSet) -> Result<RescaledCurve, Box<dyn Error>> {
        let d = one_curve("n_classical", 2, self.len, self.rate, points)?;
        Ok(rescale_dp(&d, exps)?.remove(0))
    }
}

fn dp_collapse() -> Outcome {
    let exps = ExponentSet::dp();
    let (z, nu_perp) = (exps.z()?, exps.nu_perp()?);
    let xs = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let (eta_lo, eta_hi, eta_cut) = (0.1, 4.4, 4.0);
    let mut ens = Vec::new();
    for (k, len) in [32usize, 64, 128, 256].into_iter().enumerate() {
        let lz = (len as f64).powf(z);
        let mut times = log_times(eta_lo * lz, eta_hi * lz, 48);
        times.extend([(eta_cut * lz).floor() as usize, (eta_cut * lz).ceil() as usize]);
        times.sort_unstable();
        times.dedup();
        let depth = *times.last().unwrap();
        for (j, x) in xs.iter().enumerate() {
            let rate = STANDARD_PC + x * (len as f64).powf(-1.0 / nu_perp);
            let params = dp_params(len, depth, PairDistribution::standard(rate)?, false);
            let samples = ensemble(n(1000), 200 + 10 * k as u64 + j as u64, |rng| pick(&run_dp(&params, rng).expect("valid").density, &times));
            ens.push(DpEnsemble { len, rate, times: as_f64(&times), samples });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rounds = 8;

    // cross section at x = 0
    let center: Vec<&DpEnsemble> = ens.iter().filter(|e| e.rate == STANDARD_PC).collect();
    let curves: Vec<CollapseCurve> = center
        .iter()
        .map(|e| e.rescaled(column_points(&e.samples, &e.times), &exps).map(|c| CollapseCurve::from(&c)))
        .collect::<Result<_, _>>()?;
    let q_center = collapse_quality(&curves)?;
    let mut base_center = 0.0;
    for e in &center {
        for _ in 0..rounds {
            let a = CollapseCurve::from(&e.rescaled(bootstrap_points(&e.samples, &e.times, &mut rng), &exps)?);
            let b = CollapseCurve::from(&e.rescaled(bootstrap_points(&e.samples, &e.times, &mut rng), &exps)?);
            base_center += collapse_quality(&[a, b])?;
        }
    }
    base_center /= (center.len() * rounds) as f64;

    // cross section at eta = 4
    let section = |draw: &mut dyn FnMut(&DpEnsemble) -> Vec<Point>, only: Option<usize>| -> Result<Vec<CollapseCurve>, Box<dyn Error>> {
        let mut rescaled = Vec::new();
        for e in ens.iter().filter(|e| only.is_none_or(|l| l == e.len)) {
            rescaled.push(e.rescaled(draw(e), &exps)?);
        }
        Ok(cross_section_at_eta(&rescaled, eta_cut).into_iter().map(|(_, c)| c).collect())
    };
    let q_eta = collapse_quality(&section(&mut |e| column_points(&e.samples, &e.times), None)?)?;
    let mut base_eta = 0.0;
    let lens = [32usize, 64, 128, 256];
    for &len in &lens {
        for _ in 0..rounds {
            let mut a = section(&mut |e| bootstrap_points(&e.samples, &e.times, &mut rng), Some(len))?;
            let mut b = section(&mut |e| bootstrap_points(&e.samples, &e.times, &mut rng), Some(len))?;
            base_eta += collapse_quality(&[a.remove(0), b.remove(0)])?;
        }
    }
    base_eta /= (lens.len() * rounds) as f64;
    verdict(
        q_center <= 3.0 * base_center && q_eta <= 3.0 * base_eta,
        format!(
            "x = 0: quality {q_center:.3} vs baseline {base_center:.3}; eta = 4: quality {q_eta:.3} vs baseline {base_eta:.3} (want each <= 3x)"
        ),
    )
}

/// Root of the slope drift in `p`, from a line through the drifts at
/// `center + offsets`.
fn drift_root(dist: impl Fn(f64) -> PairDistribution, center: f64, offsets: &[f64], master: u64) -> Result<(f64, f64), Box<dyn Error>> {
    let (len, depth) = (1024, 4000);
    let (early, late) = ((40.0, 400.0), (400.0, 4000.0));
    let times = log_times(early.0, late.1, 60);
    let mut drifts = Vec::new();
    for (k, &dp) in offsets.iter().enumerate() {
        let params = dp_params(len, depth, dist(center + dp), false);
        let runs = ensemble(n(400), master + k as u64, |rng| pick(&run_dp(&params, rng).expect("valid").density, &times));
        let (d, err) = slope_drift(&triples(&column_points(&runs, &as_f64(&times))), early, late)?;
        drifts.push((dp, d, err));
    }
    // offsets are centred, so the intercept and slope errors are nearly independent
    let line = fit_line(&drifts)?;
    let root = line.root();
    let err = (line.intercept_err / line.slope).abs().hypot(root * line.slope_err / line.slope);
    Ok((center + root, err))
}

fn haar_critical_point() -> Outcome {
    let q = 100u64;
    let est = haar_pc_estimate(q as f64)?;
    let offsets = [-0.003, -0.0015, 0.0, 0.0015, 0.003];
    // the same procedure on the standard process exposes its bias
    let (control, control_err) = drift_root(|p| PairDistribution::standard(p).expect("rate"), STANDARD_PC, &offsets, 300)?;
    let (root, err) = drift_root(|p| PairDistribution::haar(p, q).expect("rate"), est, &offsets, 310)?;
    verdict(
        (root - est).abs() <= 0.002,
        format!(
            "simulated p_c = {root:.5} ± {err:.5}, estimate {est:.5} (want within 0.002); same method on standard DP gives {control:.5} ± {control_err:.5}"
        ),
    )
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q_KS(λ) = 2 Σ (-1)^{k-1} exp(-2 k² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = 2.0 * sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

fn flag_dp_equivalence() -> Outcome {
    let (len, depth) = (64, 200);
    let checkpoints = [10usize, 50, 200];
    let mut pass = true;
    let mut notes = Vec::new();
    for (k, &p) in [0.1, 0.3, 0.5].iter().enumerate() {
        let obs = Observables { n_quantum: true, n_classical: true, ..Default::default() };
        let params = clifford(2, len, depth, p, InitKind::MaximallyMixed, obs);
        let quantum = ensemble(n(1500), 400 + k as u64, |rng| {
            let r = run_trajectory(&params, rng).expect("valid");
            (pick(&r.n_classical, &checkpoints), pick(&r.n_quantum, &checkpoints))
        });
        let dp = dp_params(len, depth, PairDistribution::standard(p)?, false);
        let classical = ensemble(n(1500), 410 + k as u64, |rng| pick(&run_dp(&dp, rng).expect("valid").density, &checkpoints));
        let mut worst_p = 1.0f64;
        let mut worst_z = 0.0f64;
        for (c, _) in checkpoints.iter().enumerate() {
            let a: Vec<f64> = quantum.iter().map(|s| s.0[c]).collect();
            let b: Vec<f64> = classical.iter().map(|s| s[c]).collect();
            worst_p = worst_p.min(ks_two_sample(&a, &b).1);
            // paired difference within each trajectory
            let (m, se) = mean_se(quantum.iter().map(|s| s.1[c] - 0.5 * s.0[c]));
            let z = if se > 0.0 { m / se } else if m == 0.0 { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z.abs());
        }
        pass &= worst_p > 0.01 && worst_z <= 3.0;
        notes.push(format!("p = {p}: min KS p-value {worst_p:.3}, max |z| {worst_z:.2}"));
    }
    verdict(pass, format!("{} (want KS p > 0.01, |z| <= 3)", notes.join("; ")))
}

struct SteadyEnsemble {
    len: usize,
    points: Vec<(f64, f64, f64)>,
    excluded: usize,
}

/// Interval entropies of pure steady states, lengths `1..=L/2` from site 0.
fn steady_state(len: usize, rate: f64, count: usize, master: u64) -> SteadyEnsemble {
    let obs = Observables { intervals: (1..=len / 2).map(|x| (0, x)).collect(), ..Default::default() };
    let params = clifford(2, len, 4 * len, rate, InitKind::AllZero, obs);
    let runs = ensemble(count, master, |rng| {
        let r = run_trajectory(&params, rng).expect("valid");
        (r.final_pure, r.intervals)
    });
    let samples: Vec<(bool, &[(usize, usize, usize)])> = runs.iter().map(|(p, i)| (*p, i.as_slice())).collect();
    let (points, excluded) = interval_means(&samples);
    SteadyEnsemble { len, points, excluded }
}

/// Shortest intervals left out of the chord-law fits.
const MIN_INTERVAL: f64 = 4.0;

fn chord_curves(ens: &[SteadyEnsemble]) -> Vec<CollapseCurve> {
    ens.iter()
        .map(|e| {
            CollapseCurve::new(
                e.points.iter().filter(|p| p.0 >= MIN_INTERVAL).map(|&(x, s, err)| (chord_coordinate(e.len, x), s, err)).collect(),
            )
        })
        .collect()
}

fn mipt() -> Outcome {
    let lens = [64usize, 128, 256];
    let grid = [0.146, 0.151, 0.156, 0.161, 0.166];
    let mut qualities = Vec::new();
    for (k, &p) in grid.iter().enumerate() {
        let ens: Vec<SteadyEnsemble> =
            lens.iter().enumerate().map(|(j, &len)| steady_state(len, p, n(1000), 500 + 10 * k as u64 + j as u64)).collect();
        qualities.push((p, collapse_quality(&chord_curves(&ens))?));
    }
    let pc = parabola_minimum(&qualities.iter().map(|&(p, q)| (p, q.ln())).collect::<Vec<_>>())?;

    // steady state at the located point
    let at_pc = steady_state(256, pc, n(1000), 560);
    let pts: Vec<(f64, f64, f64)> =
        at_pc.points.iter().filter(|p| p.0 >= MIN_INTERVAL).map(|&(x, s, e)| (x, s * LN_2, e * LN_2)).collect();
    let steady = fit_steady_state(256, &pts)?;

    // purification at the located point
    let mut curves = Vec::new();
    for (j, &len) in lens.iter().enumerate() {
        let depth = len;
        let params = clifford(2, len, depth, pc, InitKind::MaximallyMixed, entropy_only());
        let times: Vec<usize> = (1..=depth).collect();
        let runs = ensemble(n(1000), 570 + j as u64, |rng| pick(&run_trajectory(&params, rng).expect("valid").entropy, &times));
        curves.push(Curve { len, rate: pc, points: column_points(&runs, &as_f64(&times)) });
    }
    let d = ScalingDataset::new("entropy_Q", 2, "purification", curves)?;
    let short = fit_conformal(&d, ConformalReference::Velocity(0.59), CONFORMAL_WINDOW)?;
    let tau = fit_conformal(&d, ConformalReference::Exponent(steady.h_ab), CONFORMAL_WINDOW)?;

    let grid_text: Vec<String> = qualities.iter().map(|(p, q)| format!("{p}:{q:.2}")).collect();
    verdict(
        (pc - 0.156).abs() <= 0.005 && (steady.h_ab - 0.52).abs() <= 0.05 && (short.h_ab - 0.52).abs() <= 0.05 && (tau.v - 0.59).abs() <= 0.05,
        format!(
            "p_c = {pc:.4} from chord-law qualities [{}]; steady-state h = {:.3} ± {:.3} ({} mixed runs dropped); small-tau h = {:.3} at v = 0.59; v = {:.3} at the steady-state h (want 0.156 ± 0.005, 0.52 ± 0.05, 0.59 ± 0.05)",
            grid_text.join(" "),
            steady.h_ab,
            steady.h_err,
            at_pc.excluded,
            short.h_ab,
            tau.v
        ),
    )
}

struct EntropyEnsemble {
    len: usize,
    times: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

fn entropy_ensembles(q_plus_1: u32, rate: f64, runs: &[(usize, usize, usize)], times: impl Fn(usize, usize) -> Vec<usize>, master: u64) -> Vec<EntropyEnsemble> {
    runs.iter()
        .enumerate()
        .map(|(j, &(len, depth, count))| {
            let params = clifford(q_plus_1, len, depth, rate, InitKind::MaximallyMixed, entropy_only());
            let ts = times(len, depth);
            let samples = ensemble(count, master + j as u64, |rng| pick(&run_trajectory(&params, rng).expect("valid").entropy, &ts));
            EntropyEnsemble { len, times: as_f64(&ts), samples }
        })
        .collect()
}

fn large_q_collapse() -> Outcome {
    let q_plus_1 = 997;
    let exps = ExponentSet::dp();
    let z = exps.z()?;
    let (eta_lo, eta_hi) = (0.05, 2.0);
    let runs: Vec<(usize, usize, usize)> =
        [16usize, 32, 64].iter().map(|&l| (l, (eta_hi * (l as f64).powf(z)).ceil() as usize, n(600))).collect();
    let ens = entropy_ensembles(q_plus_1, STANDARD_PC, &runs, |l, _| log_times(eta_lo * (l as f64).powf(z), eta_hi * (l as f64).powf(z), 40), 600);
    let transform = |len: usize, pts: &[Point]| -> CollapseCurve {
        let d = one_curve("entropy_Q", q_plus_1, len, STANDARD_PC, pts.to_vec()).expect("curve");
        CollapseCurve::from(&rescale_entropy_dp(&d, &exps).expect("rescale")[0])
    };
    let curves: Vec<CollapseCurve> = ens.iter().map(|e| transform(e.len, &column_points(&e.samples, &e.times))).collect();
    let quality = collapse_quality(&curves)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let views: Vec<(usize, &[Vec<f64>])> = ens.iter().map(|e| (e.len, e.samples.as_slice())).collect();
    // all sizes share one eta grid only approximately, so bootstrap per size
    let mut base = 0.0;
    for (e, v) in ens.iter().zip(&views) {
        base += self_noise_baseline(&[*v], &e.times, transform, 8, &mut rng)?;
    }
    base /= ens.len() as f64;
    verdict(quality <= 3.0 * base, format!("quality {quality:.3} vs baseline {base:.3} (want <= 3x)"))
}

fn crossover() -> Outcome {
    let (q_plus_1, rate, z) = (11u32, 0.350, 1.581);
    let small = [16usize, 32, 64];
    let large = [128usize, 256];
    // short regime: t L^{-z} in [0.05, 1]; long regime: t / L in [0.5, 2]
    let short_keep = move |len: usize, t: f64| {
        let eta = t / (len as f64).powf(z);
        (0.05..=1.0).contains(&eta)
    };
    let long_keep = |len: usize, t: f64| (0.5..=2.0).contains(&(t / len as f64));
    let mut runs: Vec<(usize, usize, usize)> = small.iter().map(|&l| (l, (l as f64).powf(z).ceil() as usize, n(800))).collect();
    runs.extend(large.iter().map(|&l| (l, 2 * l, n(300))));
    let ens = entropy_ensembles(q_plus_1, rate, &runs, |_, depth| (1..=depth).collect(), 700);
    let curves: Vec<Curve> = ens.iter().map(|e| Curve { len: e.len, rate, points: column_points(&e.samples, &e.times) }).collect();
    let d = ScalingDataset::new("entropy_Q", q_plus_1, "purification", curves)?;
    let short = regime_report(&d, &small, z, short_keep)?;
    let long = regime_report(&d, &large, z, long_keep)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let baseline = |lens: &[usize], a: f64, keep: &dyn Fn(usize, f64) -> bool, rng: &mut ChaCha8Rng| -> Result<f64, Box<dyn Error>> {
        let mut total = 0.0;
        let mut count = 0;
        for e in ens.iter().filter(|e| lens.contains(&e.len)) {
            let transform = |len: usize, pts: &[Point]| {
                let l = len as f64;
                CollapseCurve::new(pts.iter().filter(|p| keep(len, p.t)).map(|p| (p.t * l.powf(-a), p.value, p.stderr)).collect())
            };
            total += self_noise_baseline(&[(e.len, e.samples.as_slice())], &e.times, transform, 8, rng)?;
            count += 1;
        }
        Ok(total / count as f64)
    };
    let short_base = baseline(&small, z, &short_keep, &mut rng)?;
    let long_base = baseline(&large, 1.0, &long_keep, &mut rng)?;
    let pass = short.dynamic <= 3.0 * short_base
        && long.ballistic <= 3.0 * long_base
        && short.ballistic >= 5.0 * short.dynamic
        && long.dynamic >= 5.0 * long.ballistic;
    verdict(
        pass,
        format!(
            "short L {small:?}: t L^-z {:.3}, t/L {:.3}, baseline {short_base:.3}; long L {large:?}: t/L {:.3}, t L^-z {:.3}, baseline {long_base:.3} (want right <= 3x baseline, wrong >= 5x right)",
            short.dynamic, short.ballistic, long.ballistic, long.dynamic
        ),
    )
}

fn min_cut_bound() -> Outcome {
    let (len, depth) = (32, 64);
    let mut violations = 0usize;
    let mut checked = 0usize;
    let mut trajectories = 0usize;
    for (k, &p) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
        let obs = Observables { entropy: true, spacetime: true, ..Default::default() };
        let params = clifford(2, len, depth, p, InitKind::MaximallyMixed, obs);
        let counts = ensemble(n(250), 800 + k as u64, |rng| {
            let r = run_trajectory(&params, rng).expect("valid");
            let cuts = min_cut_series(r.spacetime.as_ref().expect("recorded"), Boundary::Periodic);
            let bad = r.entropy.iter().zip(&cuts).filter(|(s, &c)| **s > c as f64).count();
            (bad, cuts.len())
        });
        trajectories += counts.len();
        violations += counts.iter().map(|c| c.0).sum::<usize>();
        checked += counts.iter().map(|c| c.1).sum::<usize>();
    }
    verdict(violations == 0, format!("{violations} violations in {checked} time steps over {trajectories} trajectories (want 0)"))
}

fn red_bonds() -> Outcome {
    let z = ExponentSet::dp().z()?;
    let dist = PairDistribution::standard(STANDARD_PC)?;
    let want = n(2000);
    let mut points = Vec::new();
    let mut notes = Vec::new();
    for (k, tau) in [64usize, 128, 256, 512, 1024, 2048].into_iter().enumerate() {
        let len = 2 * ((tau as f64).powf(1.0 / z)).round() as usize;
        let params = dp_params(len, tau, dist, true);
        let mut counts = Vec::new();
        let mut tried = 0u64;
        while counts.len() < want {
            let batch = ensemble(want, 900 + 1000 * k as u64 + tried, |rng| {
                let rec = run_dp(&params, rng).expect("valid").spacetime.expect("recorded");
                let g = build_etn(&rec, Boundary::Periodic);
                g.connected().then(|| g.red_bonds().count as f64)
            });
            tried += 1;
            counts.extend(batch.into_iter().flatten());
        }
        counts.truncate(want);
        let (mean, se) = mean_se(counts.iter().copied());
        points.push((tau as f64, mean, se));
        notes.push(format!("{tau}:{mean:.1}"));
    }
    let fit = fit_power_law(&points)?;
    verdict(
        (fit.exponent - 0.577).abs() <= 0.06,
        format!("exponent {:.3} ± {:.3}, mean red bonds [{}] (want 0.577 ± 0.06)", fit.exponent, fit.exponent_err, notes.join(" ")),
    )
}

fn stabilizer_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    for (p, len, seed, qubit) in [(2, 2, 12, false), (2, 3, 13, false), (3, 2, 15, false), (3, 3, 16, false), (2, 2, 17, true), (2, 3, 18, true)] {
        let sequences = n(1000);
        let run = catch_unwind(AssertUnwindSafe(|| {
            if qubit {
                dense_oracle::run_oracle::<QubitTableau>(p, len, sequences, seed)
            } else {
                dense_oracle::run_oracle::<StabilizerTableau>(p, len, sequences, seed)
            }
        }));
        let Ok(t) = run else {
            return verdict(false, format!("p = {p}, L = {len}: engine diverged from the dense oracle"));
        };
        for b in 0..t.observed.len() {
            let z = (t.observed[b] - t.expected[b]) / t.variance[b].sqrt().max(1e-12);
            worst = worst.max(z.abs());
        }
        cases.push(format!("{}{p}/L{len}", if qubit { "qubit " } else { "" }));
    }
    verdict(worst <= 3.0, format!("{} cases x {} sequences, entropies exact, worst outcome |z| = {worst:.2} (want <= 3)", cases.len(), n(1000)))
}

fn appendix_contractions() -> Outcome {
    let mut worst = 0.0f64;
    for q in [1.0, 2.0, 4.0, 10.0, 100.0, 996.0] {
        let c = contraction(q);
        for pi in 0..=10 {
            let p = pi as f64 / 10.0;
            for gi in 0..=64 {
                let g = gi as f64 / 64.0;
                worst = worst.max((expected_g(false, g, p, q) - c * g).abs());
                worst = worst.max((expected_g(true, g, p, q) - c).abs());
            }
        }
    }
    let exact = worst <= 4.0 * f64::EPSILON;

    // branch-averaged g carried along sampled flag histories
    let (len, depth, rate, q) = (64usize, 200usize, 0.3, 2.0);
    let c = contraction(q);
    let results = ensemble(n(400), 1100, |rng| {
        let mut row = MixedFlagRow::initial(len);
        let mut mean_g = vec![1.0f64; len];
        let mut held = vec![0usize; len];
        let mut worst_ratio = 0.0f64;
        let mut longest = 0usize;
        for t in 1..=depth {
            let parity = Parity::of_layer(t);
            // pairs are disjoint, so the flags before the layer are its inputs
            let inputs: Vec<(usize, bool)> = layer_pairs(len, parity, Boundary::Periodic)
                .map(|(j, k)| if j % 2 == 0 { (k, row.flag(j)) } else { (j, row.flag(k)) })
                .collect();
            appendix_a_step(&mut row, rate, q, parity, Boundary::Periodic, rng);
            for (u, f) in inputs {
                mean_g[u] = expected_g(f, mean_g[u], rate, q);
                held[u] = if f { 0 } else { held[u] + 1 };
                longest = longest.max(held[u]);
                worst_ratio = worst_ratio.max(mean_g[u] / c.powi(held[u] as i32));
            }
        }
        (worst_ratio, longest)
    });
    let ratio = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let longest = results.iter().map(|r| r.1).max().unwrap_or(0);
    verdict(
        exact && ratio <= 1.0 + 1e-12,
        format!(
            "largest deviation from the exact contractions {worst:.1e}; max g/((q+1)/(q+2))^tau = {ratio:.6} over {} samples, holds up to tau = {longest} (want <= 1)",
            results.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("dp-critical-decay", dp_decay),
        ("dp-finite-size-collapse", dp_collapse),
        ("haar-critical-point", haar_critical_point),
        ("flag-dp-equivalence", flag_dp_equivalence),
        ("mipt-location-and-exponents", mipt),
        ("large-q-entropy-collapse", large_q_collapse),
        ("dynamic-crossover", crossover),
        ("min-cut-bound", min_cut_bound),
        ("red-bond-scaling", red_bonds),
        ("stabilizer-oracle", stabilizer_oracle),
        ("appendix-contractions", appendix_contractions),
    ];
    let only: Option<Vec<usize>> =
        env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    if scale() != 1.0 {
        println!("note: ensembles scaled by {}", scale());
    }
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(v) => {
                failed += usize::from(!v.pass);
                println!("{} {id:>2} {name}: {} [{secs:.0}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: error: {e} [{secs:.0}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
