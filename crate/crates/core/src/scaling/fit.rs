//! Least-squares fits.

use alloc::vec::Vec;

use libm::{exp, fabs, log, sin, sqrt};

use super::{collapse_quality, CollapseCurve, ScalingDataset};
use crate::Error;

const PI: f64 = core::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    pub chi2: f64,
}

impl LinearFit {
    /// Where the fitted line crosses zero.
    pub fn root(&self) -> f64 {
        -self.intercept / self.slope
    }
}

/// Weighted least squares `y = a + b x`. Points are `(x, y, σ)`; if every
/// σ is zero the fit is unweighted and the errors come from the residuals.
pub fn fit_line(points: &[(f64, f64, f64)]) -> Result<LinearFit, Error> {
    if points.len() < 2 {
        return Err(Error::Underdetermined("a line needs at least two points"));
    }
    let weighted = points.iter().all(|p| p.2 > 0.0);
    if !weighted && points.iter().any(|p| p.2 > 0.0) {
        return Err(Error::InvalidArgument("either all or no points may carry errors"));
    }
    let w = |p: &(f64, f64, f64)| if weighted { 1.0 / (p.2 * p.2) } else { 1.0 };
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let wi = w(p);
        s += wi;
        sx += wi * p.0;
        sy += wi * p.1;
        sxx += wi * p.0 * p.0;
        sxy += wi * p.0 * p.1;
    }
    let delta = s * sxx - sx * sx;
    if !(fabs(delta) > 1e-300) {
        return Err(Error::Underdetermined("abscissae must not all coincide"));
    }
    let slope = (s * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let chi2: f64 = points.iter().map(|p| w(p) * (p.1 - intercept - slope * p.0) * (p.1 - intercept - slope * p.0)).sum();
    // unweighted fits estimate the noise from the residuals
    let scale = if weighted || points.len() < 3 { 1.0 } else { chi2 / (points.len() - 2) as f64 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_err: sqrt(scale * s / delta),
        intercept_err: sqrt(scale * sxx / delta),
        chi2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub exponent_err: f64,
    pub amplitude_err: f64,
    pub chi2: f64,
}

/// `y = A x^b` by weighted least squares on `(ln x, ln y)` with
/// `σ_{ln y} = σ / y`.
pub fn fit_power_law(points: &[(f64, f64, f64)]) -> Result<PowerFit, Error> {
    if points.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidArgument("power-law fits need positive data"));
    }
    let logs: Vec<(f64, f64, f64)> = points.iter().map(|p| (log(p.0), log(p.1), p.2 / p.1)).collect();
    let f = fit_line(&logs)?;
    let amplitude = exp(f.intercept);
    Ok(PowerFit {
        exponent: f.slope,
        amplitude,
        exponent_err: f.slope_err,
        amplitude_err: amplitude * f.intercept_err,
        chi2: f.chi2,
    })
}

/// Jackknife over `blocks` contiguous blocks: the full-sample estimate and
/// the jackknife standard error.
pub fn jackknife<T>(samples: &[T], blocks: usize, estimator: impl Fn(&[&T]) -> f64) -> Result<(f64, f64), Error> {
    if blocks < 2 || samples.len() < blocks {
        return Err(Error::Underdetermined("jackknife needs at least two nonempty blocks"));
    }
    let all: Vec<&T> = samples.iter().collect();
    let full = estimator(&all);
    let n = samples.len();
    let mut leave_out = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
        let rest: Vec<&T> = all[..lo].iter().chain(&all[hi..]).copied().collect();
        leave_out.push(estimator(&rest));
    }
    let mean = leave_out.iter().sum::<f64>() / blocks as f64;
    let var = leave_out.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() * (blocks - 1) as f64 / blocks as f64;
    Ok((full, sqrt(var)))
}

/// Default number of jackknife blocks.
pub const JACKKNIFE_BLOCKS: usize = 20;

/// `ln((L/π) sin(π x / L))`, the chord coordinate of an interval of length
/// `x` on a ring of `L` sites.
pub fn chord_coordinate(len: usize, x12: f64) -> f64 {
    let l = len as f64;
    log(l / PI * sin(PI * x12 / l))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateFit {
    pub h_ab: f64,
    pub h_err: f64,
    /// Not universal.
    pub intercept: f64,
    pub chi2: f64,
    /// Trajectories left out because their final state was not pure.
    pub excluded: usize,
}

/// `S_A = 2 h ln((L/π) sin(π x₁₂ / L)) + c`, points `(x₁₂, S_A, σ)` with
/// `S_A` in nats.
pub fn fit_steady_state(len: usize, points: &[(f64, f64, f64)]) -> Result<SteadyStateFit, Error> {
    let chord: Vec<(f64, f64, f64)> = points.iter().map(|&(x, s, e)| (chord_coordinate(len, x), s, e)).collect();
    let f = fit_line(&chord)?;
    Ok(SteadyStateFit { h_ab: f.slope / 2.0, h_err: f.slope_err / 2.0, intercept: f.intercept, chi2: f.chi2, excluded: 0 })
}

/// Interval entropies of one trajectory: whether its final state is pure and
/// `(start, length, S)` per interval.
pub type IntervalSample<'a> = (bool, &'a [(usize, usize, usize)]);

/// Mean and standard error of `S_A` per interval length over the pure
/// trajectories, plus the number of trajectories excluded as not pure.
pub fn interval_means(samples: &[IntervalSample<'_>]) -> (Vec<(f64, f64, f64)>, usize) {
    let mut acc: Vec<(usize, f64, f64, u64)> = Vec::new();
    let mut excluded = 0;
    for &(pure, ints) in samples {
        if !pure {
            excluded += 1;
            continue;
        }
        for &(_, l, s) in ints {
            let s = s as f64;
            match acc.iter_mut().find(|a| a.0 == l) {
                Some(a) => {
                    a.1 += s;
                    a.2 += s * s;
                    a.3 += 1;
                }
                None => acc.push((l, s, s * s, 1)),
            }
        }
    }
    acc.sort_by_key(|a| a.0);
    let points = acc
        .into_iter()
        .map(|(l, sum, sq, n)| {
            let n = n as f64;
            let mean = sum / n;
            let var = if n > 1.0 { (sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
            (l as f64, mean, sqrt(var / n))
        })
        .collect();
    (points, excluded)
}

/// What pins the scale of the aspect ratio `τ = v t / L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConformalReference {
    /// `h_{a|b}` known (from the steady state): solve for `v`.
    Exponent(f64),
    /// `v` known: solve for `h_{a|b}`.
    Velocity(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalFit {
    pub h_ab: f64,
    pub v: f64,
    /// `A = π h / v` in `S_Q ≈ A L / t + c`, `S_Q` in nats.
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub intercept: f64,
    /// Collapse quality of `S_Q` against `v t / L` across sizes, inside the window.
    pub quality: f64,
    pub window: (f64, f64),
}

/// Default small-aspect-ratio window for the `τ⁻¹` law.
pub const CONFORMAL_WINDOW: (f64, f64) = (0.05, 0.3);

/// Fit the small-`τ` law `S_Q = π h / τ` with `τ = v t / L` across sizes.
///
/// At small `τ` only the ratio `h / v` is visible, and a common rescaling of
/// the abscissa does not change a collapse, so one of `h` and `v` has to be
/// supplied.
pub fn fit_conformal(d: &ScalingDataset, reference: ConformalReference, window: (f64, f64)) -> Result<ConformalFit, Error> {
    let mut lens: Vec<usize> = d.curves.iter().map(|c| c.len).collect();
    lens.sort_unstable();
    lens.dedup();
    if lens.len() < 3 {
        return Err(Error::Underdetermined("conformal fits need at least three system sizes"));
    }
    // h is quoted for entropies in nats
    let nats = log(d.q_plus_1 as f64) / super::entropy_norm(d)?;
    let fit_window = |v: f64| -> Result<LinearFit, Error> {
        let pts: Vec<(f64, f64, f64)> = d
            .curves
            .iter()
            .flat_map(|c| c.points.iter().map(move |p| (c.len as f64, p)))
            .filter(|(l, p)| {
                let tau = v * p.t / l;
                tau >= window.0 && tau <= window.1
            })
            .map(|(l, p)| (l / p.t, p.value * nats, p.stderr * nats))
            .collect();
        fit_line(&pts)
    };
    let (fit, h, v) = match reference {
        ConformalReference::Velocity(v) => {
            let f = fit_window(v)?;
            (f, f.slope * v / PI, v)
        }
        ConformalReference::Exponent(h) => {
            // the window depends on v, so iterate to a fixed point
            let mut v = 1.0;
            let mut f = fit_window(v)?;
            for _ in 0..100 {
                let next = PI * h / f.slope;
                if !(next > 0.0) {
                    return Err(Error::InvalidArgument("fitted amplitude must be positive"));
                }
                let done = fabs(next - v) < 1e-12 * v;
                v = next;
                f = fit_window(v)?;
                if done {
                    break;
                }
            }
            (f, h, v)
        }
    };
    let curves: Vec<CollapseCurve> = d
        .curves
        .iter()
        .map(|c| CollapseCurve {
            points: c
                .points
                .iter()
                .map(|p| (v * p.t / c.len as f64, p.value * nats, p.stderr * nats))
                .filter(|q| q.0 >= window.0 && q.0 <= window.1)
                .collect(),
        })
        .collect();
    let quality = collapse_quality(&curves)?;
    Ok(ConformalFit { h_ab: h, v, amplitude: fit.slope, amplitude_err: fit.slope_err, intercept: fit.intercept, quality, window })
}

/// Late minus early effective exponent of a decay `n(t)`, from power-law
/// fits on two windows of points `(t, n, σ)`. Positive when the decay slows
/// down (active side), negative when it speeds up (absorbing side).
pub fn slope_drift(points: &[(f64, f64, f64)], early: (f64, f64), late: (f64, f64)) -> Result<(f64, f64), Error> {
    let window = |w: (f64, f64)| -> Vec<(f64, f64, f64)> {
        points.iter().copied().filter(|p| p.0 >= w.0 && p.0 <= w.1 && p.1 > 0.0).collect()
    };
    let e = fit_power_law(&window(early))?;
    let l = fit_power_law(&window(late))?;
    Ok((l.exponent - e.exponent, sqrt(l.exponent_err * l.exponent_err + e.exponent_err * e.exponent_err)))
}

/// Minimum of the least-squares parabola through `(x, y)`.
pub fn parabola_minimum(points: &[(f64, f64)]) -> Result<f64, Error> {
    if points.len() < 3 {
        return Err(Error::Underdetermined("a parabola needs at least three points"));
    }
    // center for conditioning
    let x0 = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let mut m = [[0.0f64; 4]; 3];
    for &(x, y) in points {
        let u = x - x0;
        let row = [1.0, u, u * u];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * y;
        }
    }
    for c in 0..3 {
        let piv = (c..3).max_by(|&a, &b| fabs(m[a][c]).total_cmp(&fabs(m[b][c]))).unwrap_or(c);
        m.swap(c, piv);
        if fabs(m[c][c]) < 1e-300 {
            return Err(Error::Underdetermined("abscissae are degenerate"));
        }
        for r in 0..3 {
            if r != c {
                let k = m[r][c] / m[c][c];
                for j in c..4 {
                    m[r][j] -= k * m[c][j];
                }
            }
        }
    }
    let (b, a2) = (m[1][3] / m[1][1], m[2][3] / m[2][2]);
    if !(a2 > 0.0) {
        return Err(Error::InvalidArgument("fitted parabola has no minimum"));
    }
    Ok(x0 - b / (2.0 * a2))
}
