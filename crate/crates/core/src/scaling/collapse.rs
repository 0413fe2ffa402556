//! The collapse objective and the diagnostics built on it.

use alloc::vec::Vec;

use libm::{pow, sqrt};
use rand::Rng;

use super::{Point, RescaledCurve, ScalingDataset};
use crate::Error;

/// Points `(x, y, σ)` sorted by `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseCurve {
    pub points: Vec<(f64, f64, f64)>,
}

impl CollapseCurve {
    pub fn new(mut points: Vec<(f64, f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { points }
    }

    /// Linear interpolation of value and error at `x`, if `x` is inside the range.
    pub fn interpolate(&self, x: f64) -> Option<(f64, f64)> {
        let pts = &self.points;
        let (first, last) = (pts.first()?, pts.last()?);
        if x < first.0 || x > last.0 {
            return None;
        }
        let k = pts.partition_point(|p| p.0 < x);
        if pts[k].0 == x {
            return Some((pts[k].1, pts[k].2));
        }
        let (a, b) = (pts[k - 1], pts[k]);
        let w = (x - a.0) / (b.0 - a.0);
        let s = sqrt((1.0 - w) * (1.0 - w) * a.2 * a.2 + w * w * b.2 * b.2);
        Some(((1.0 - w) * a.1 + w * b.1, s))
    }
}

impl From<&RescaledCurve> for CollapseCurve {
    fn from(c: &RescaledCurve) -> Self {
        Self::new(c.points.clone())
    }
}

/// Mean over every point and every other curve covering its abscissa of
/// `(y - ŷ)² / (σ² + σ̂²)`, where `ŷ, σ̂` interpolate the other curve.
///
/// Identical curves give 0 and two curves offset by `k` standard errors give
/// `k²/2`. Terms with zero deviation count as 0 even without errors.
pub fn collapse_quality(curves: &[CollapseCurve]) -> Result<f64, Error> {
    if curves.len() < 2 {
        return Err(Error::Underdetermined("a collapse needs at least two curves"));
    }
    let (mut sum, mut terms) = (0.0, 0usize);
    for (i, c) in curves.iter().enumerate() {
        for &(x, y, s) in &c.points {
            for (j, other) in curves.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some((yi, si)) = other.interpolate(x) {
                    let d = y - yi;
                    let var = s * s + si * si;
                    sum += if d == 0.0 { 0.0 } else { d * d / var };
                    terms += 1;
                }
            }
        }
    }
    if terms == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(sum / terms as f64)
}

/// Per system size, the curve `x ↦ y(η)` across rates at fixed `η`,
/// interpolated linearly in `η`. Sizes are returned in increasing order.
pub fn cross_section_at_eta(curves: &[RescaledCurve], eta: f64) -> Vec<(usize, CollapseCurve)> {
    let mut out: Vec<(usize, Vec<(f64, f64, f64)>)> = Vec::new();
    for c in curves {
        let Some((y, s)) = CollapseCurve::new(c.points.clone()).interpolate(eta) else {
            continue;
        };
        match out.iter_mut().find(|o| o.0 == c.len) {
            Some(o) => o.1.push((c.x, y, s)),
            None => out.push((c.len, alloc::vec![(c.x, y, s)])),
        }
    }
    out.sort_by_key(|o| o.0);
    out.into_iter().map(|(l, pts)| (l, CollapseCurve::new(pts))).collect()
}

/// Bootstrap replica of an ensemble: `samples[i][k]` is trajectory `i` at
/// time index `k`.
pub fn bootstrap_points<R: Rng + ?Sized>(samples: &[Vec<f64>], times: &[f64], rng: &mut R) -> Vec<Point> {
    let n = samples.len();
    let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (mut s, mut sq) = (0.0, 0.0);
            for &i in &picks {
                let v = samples[i][k];
                s += v;
                sq += v * v;
            }
            let nf = n as f64;
            let mean = s / nf;
            let var = if n > 1 { (sq - nf * mean * mean).max(0.0) / (nf - 1.0) } else { 0.0 };
            Point { t, value: mean, stderr: sqrt(var / nf), n: n as u64 }
        })
        .collect()
}

/// Self-noise baseline: the collapse quality of pairs of bootstrap replicas
/// of the same single-size ensemble, averaged over sizes and `rounds`.
/// `transform` maps a size and its points to scaling coordinates.
pub fn self_noise_baseline<R: Rng + ?Sized>(
    ensembles: &[(usize, &[Vec<f64>])],
    times: &[f64],
    transform: impl Fn(usize, &[Point]) -> CollapseCurve,
    rounds: usize,
    rng: &mut R,
) -> Result<f64, Error> {
    if ensembles.is_empty() || rounds == 0 {
        return Err(Error::Underdetermined("baseline needs data"));
    }
    let mut total = 0.0;
    for &(len, samples) in ensembles {
        for _ in 0..rounds {
            let a = transform(len, &bootstrap_points(samples, times, rng));
            let b = transform(len, &bootstrap_points(samples, times, rng));
            total += collapse_quality(&[a, b])?;
        }
    }
    Ok(total / (ensembles.len() * rounds) as f64)
}

/// Collapse qualities of one regime in the two candidate time variables.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeReport {
    pub lens: Vec<usize>,
    /// Against `t L^{-z}`.
    pub dynamic: f64,
    /// Against `t / L`.
    pub ballistic: f64,
}

impl RegimeReport {
    pub fn prefers_dynamic(&self) -> bool {
        self.dynamic < self.ballistic
    }
}

/// Both qualities for the curves of `lens`, using only the points where
/// `keep(len, t)` holds.
pub fn regime_report(d: &ScalingDataset, lens: &[usize], z: f64, keep: impl Fn(usize, f64) -> bool) -> Result<RegimeReport, Error> {
    let norm = super::entropy_norm(d)?;
    let build = |a: f64| -> Vec<CollapseCurve> {
        d.curves
            .iter()
            .filter(|c| lens.contains(&c.len))
            .map(|c| {
                let l = c.len as f64;
                CollapseCurve::new(
                    c.points
                        .iter()
                        .filter(|p| keep(c.len, p.t))
                        .map(|p| (p.t * pow(l, -a), p.value / norm, p.stderr / norm))
                        .collect(),
                )
            })
            .collect()
    };
    Ok(RegimeReport { lens: lens.to_vec(), dynamic: collapse_quality(&build(z))?, ballistic: collapse_quality(&build(1.0))? })
}

/// The two limits of the crossover: curves with `η_x < 1` at `η_t < 1`
/// should collapse in `t L^{-z}`, curves with `η_x > 1` at `η_t > 1` in `t / L`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossoverReport {
    pub short: RegimeReport,
    pub long: RegimeReport,
    pub short_collapses_dynamic: bool,
    pub long_collapses_ballistic: bool,
}

pub fn crossover_report(d: &ScalingDataset, xi_perp: f64, xi_par: f64, z: f64) -> Result<CrossoverReport, Error> {
    let mut small: Vec<usize> = d.curves.iter().map(|c| c.len).filter(|&l| (l as f64) < xi_perp).collect();
    let mut large: Vec<usize> = d.curves.iter().map(|c| c.len).filter(|&l| (l as f64) > xi_perp).collect();
    for v in [&mut small, &mut large] {
        v.sort_unstable();
        v.dedup();
    }
    let short = regime_report(d, &small, z, |_, t| t < xi_par)?;
    let long = regime_report(d, &large, z, |_, t| t > xi_par)?;
    Ok(CrossoverReport {
        short_collapses_dynamic: short.prefers_dynamic(),
        long_collapses_ballistic: !long.prefers_dynamic(),
        short,
        long,
    })
}
