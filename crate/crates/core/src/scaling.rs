//! Finite-size scaling: datasets, exponent sets, rescaling transforms, fits
//! and the collapse objective.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::{log, pow};

use crate::Error;

mod collapse;
mod fit;

pub use collapse::*;
pub use fit::*;

/// One ensemble average at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub len: usize,
    pub rate: f64,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingDataset {
    pub observable: String,
    pub q_plus_1: u32,
    pub protocol: String,
    pub curves: Vec<Curve>,
}

impl ScalingDataset {
    pub fn new(observable: &str, q_plus_1: u32, protocol: &str, curves: Vec<Curve>) -> Result<Self, Error> {
        let d = Self { observable: observable.to_string(), q_plus_1, protocol: protocol.to_string(), curves };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), Error> {
        for c in &self.curves {
            if c.points.windows(2).any(|w| !(w[0].t < w[1].t)) {
                return Err(Error::InvalidArgument("times within a curve must be strictly increasing"));
            }
            if c.points.iter().any(|p| !(p.stderr >= 0.0)) {
                return Err(Error::InvalidArgument("standard errors must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// A critical exponent with an optional uncertainty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: Option<f64>,
}

impl From<f64> for Estimate {
    fn from(value: f64) -> Self {
        Self { value, uncertainty: None }
    }
}

/// Largest tolerated `|z - ν∥/ν⊥|` when no uncertainties are given. The
/// reference values themselves differ by 1.3e-3.
pub const CONSISTENCY_TOLERANCE: f64 = 5e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentSet {
    alpha: Option<Estimate>,
    nu_perp: Option<Estimate>,
    nu_par: Option<Estimate>,
    z: Option<Estimate>,
    p_c: Option<Estimate>,
}

impl ExponentSet {
    pub fn new(
        alpha: Option<Estimate>,
        nu_perp: Option<Estimate>,
        nu_par: Option<Estimate>,
        z: Option<Estimate>,
        p_c: Option<Estimate>,
    ) -> Result<Self, Error> {
        let all = [alpha, nu_perp, nu_par, z, p_c];
        if all.iter().flatten().any(|e| !e.value.is_finite() || e.uncertainty.is_some_and(|u| !(u >= 0.0))) {
            return Err(Error::InvalidArgument("exponents must be finite with nonnegative uncertainties"));
        }
        if let (Some(np), Some(nl), Some(z)) = (nu_perp, nu_par, z) {
            let ratio = nl.value / np.value;
            // propagated uncertainty of the ratio plus that of z
            let rel = |e: Estimate| e.uncertainty.unwrap_or(0.0) / libm::fabs(e.value);
            let err = libm::fabs(ratio) * libm::sqrt(rel(np) * rel(np) + rel(nl) * rel(nl));
            let tol = CONSISTENCY_TOLERANCE.max(2.0 * libm::sqrt(err * err + z.uncertainty.unwrap_or(0.0) * z.uncertainty.unwrap_or(0.0)));
            if libm::fabs(z.value - ratio) > tol {
                return Err(Error::InvalidArgument("z must equal nu_parallel / nu_perp"));
            }
        }
        Ok(Self { alpha, nu_perp, nu_par, z, p_c })
    }

    /// Directed percolation in 1+1 dimensions at the standard bond critical point.
    pub fn dp() -> Self {
        Self::new(
            Some(0.159.into()),
            Some(1.097.into()),
            Some(1.733.into()),
            Some(1.581.into()),
            Some(crate::dp::STANDARD_PC.into()),
        )
        .expect("reference exponents are consistent")
    }

    pub fn with_p_c(mut self, p_c: f64) -> Self {
        self.p_c = Some(p_c.into());
        self
    }

    fn get(e: Option<Estimate>, name: &'static str) -> Result<f64, Error> {
        e.map(|e| e.value).ok_or(Error::InvalidArgument(name))
    }

    pub fn alpha(&self) -> Result<f64, Error> {
        Self::get(self.alpha, "alpha is not set")
    }

    pub fn nu_perp(&self) -> Result<f64, Error> {
        Self::get(self.nu_perp, "nu_perp is not set")
    }

    pub fn nu_par(&self) -> Result<f64, Error> {
        Self::get(self.nu_par, "nu_parallel is not set")
    }

    pub fn z(&self) -> Result<f64, Error> {
        Self::get(self.z, "z is not set")
    }

    pub fn p_c(&self) -> Result<f64, Error> {
        Self::get(self.p_c, "p_c is not set")
    }

    pub fn estimates(&self) -> [Option<Estimate>; 5] {
        [self.alpha, self.nu_perp, self.nu_par, self.z, self.p_c]
    }
}

/// A curve in scaling coordinates: `x` labels the whole curve, each point is
/// `(η, y, σ_y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledCurve {
    pub len: usize,
    pub rate: f64,
    pub x: f64,
    pub points: Vec<(f64, f64, f64)>,
}

const DP_OBSERVABLES: [&str; 3] = ["n_classical", "n_quantum", "density"];
const ENTROPY_OBSERVABLES: [&str; 2] = ["entropy_Q", "min_cut"];
/// Entropy in nats rather than qudit units.
pub const ENTROPY_NATS: &str = "entropy_Q_nats";

fn check_observable(d: &ScalingDataset, allowed: &[&str]) -> Result<(), Error> {
    if allowed.contains(&d.observable.as_str()) {
        Ok(())
    } else {
        Err(Error::ObservableMismatch(d.observable.clone()))
    }
}

/// `(x, η, y) = ((p - p_c) L^{1/ν⊥}, t L^{-a}, L^{b} value)`.
fn rescale(d: &ScalingDataset, p_c: f64, nu_perp: f64, a: f64, b: f64, norm: f64) -> Vec<RescaledCurve> {
    d.curves
        .iter()
        .map(|c| {
            let l = c.len as f64;
            let (lt, ly) = (pow(l, -a), pow(l, b) / norm);
            RescaledCurve {
                len: c.len,
                rate: c.rate,
                x: (c.rate - p_c) * pow(l, 1.0 / nu_perp),
                points: c.points.iter().map(|p| (p.t * lt, p.value * ly, p.stderr * ly)).collect(),
            }
        })
        .collect()
}

fn unrescale(curves: &[RescaledCurve], a: f64, b: f64, norm: f64) -> Vec<Curve> {
    curves
        .iter()
        .map(|c| {
            let l = c.len as f64;
            let (lt, ly) = (pow(l, a), pow(l, -b) * norm);
            Curve {
                len: c.len,
                rate: c.rate,
                points: c.points.iter().map(|&(e, y, s)| Point { t: e * lt, value: y * ly, stderr: s * ly, n: 0 }).collect(),
            }
        })
        .collect()
}

/// DP order parameter: `y = L^{zα} n` against `η = t L^{-z}`.
pub fn rescale_dp(d: &ScalingDataset, exps: &ExponentSet) -> Result<Vec<RescaledCurve>, Error> {
    check_observable(d, &DP_OBSERVABLES)?;
    let z = exps.z()?;
    Ok(rescale(d, exps.p_c()?, exps.nu_perp()?, z, z * exps.alpha()?, 1.0))
}

/// Inverse of [`rescale_dp`] (sample counts are not carried).
pub fn unrescale_dp(curves: &[RescaledCurve], exps: &ExponentSet) -> Result<Vec<Curve>, Error> {
    let z = exps.z()?;
    Ok(unrescale(curves, z, z * exps.alpha()?, 1.0))
}

fn entropy_norm(d: &ScalingDataset) -> Result<f64, Error> {
    if d.observable == ENTROPY_NATS {
        Ok(log(d.q_plus_1 as f64))
    } else {
        check_observable(d, &ENTROPY_OBSERVABLES)?;
        Ok(1.0)
    }
}

/// Entropy in qudit units, `S_Q / ln(q+1)`, against `η = t L^{-z}`.
pub fn rescale_entropy_dp(d: &ScalingDataset, exps: &ExponentSet) -> Result<Vec<RescaledCurve>, Error> {
    let norm = entropy_norm(d)?;
    Ok(rescale(d, exps.p_c()?, exps.nu_perp()?, exps.z()?, 0.0, norm))
}

pub fn unrescale_entropy_dp(curves: &[RescaledCurve], exps: &ExponentSet, norm: f64) -> Result<Vec<Curve>, Error> {
    Ok(unrescale(curves, exps.z()?, 0.0, norm))
}

/// Entropy in qudit units against `t L^{-a}`, for any time exponent `a`
/// (`a = 1` is the aspect ratio of an isotropic transition).
pub fn rescale_time(d: &ScalingDataset, a: f64) -> Result<Vec<RescaledCurve>, Error> {
    let norm = entropy_norm(d)?;
    Ok(rescale(d, 0.0, 1.0, a, 0.0, norm).into_iter().map(|c| RescaledCurve { x: 0.0, ..c }).collect())
}

/// Crossover coordinates `η_t = t / ξ∥*` and `η_x = L / ξ⊥*`; the curve
/// label `x` carries `η_x`.
pub fn crossover_rescale(d: &ScalingDataset, xi_perp: f64, xi_par: f64) -> Result<Vec<RescaledCurve>, Error> {
    if !(xi_perp > 0.0 && xi_par > 0.0) {
        return Err(Error::InvalidArgument("crossover scales must be positive"));
    }
    let norm = entropy_norm(d)?;
    Ok(d
        .curves
        .iter()
        .map(|c| RescaledCurve {
            len: c.len,
            rate: c.rate,
            x: c.len as f64 / xi_perp,
            points: c.points.iter().map(|p| (p.t / xi_par, p.value / norm, p.stderr / norm)).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn planted(lens: &[usize], f: impl Fn(f64, f64) -> f64) -> ScalingDataset {
        let curves = lens
            .iter()
            .map(|&len| Curve {
                len,
                rate: 0.3,
                points: (1..50).map(|t| t as f64).map(|t| Point { t, value: f(t, len as f64), stderr: 0.01, n: 10 }).collect(),
            })
            .collect();
        ScalingDataset::new("n_classical", 2, "purification", curves).unwrap()
    }

    #[test]
    fn exponent_consistency() {
        let dp = ExponentSet::dp();
        assert_eq!(dp.z().unwrap(), 1.581);
        let bad = ExponentSet::new(None, Some(1.0.into()), Some(2.0.into()), Some(1.5.into()), None);
        assert!(bad.is_err());
        let partial = ExponentSet::new(Some(0.2.into()), None, None, Some(1.0.into()), None).unwrap();
        assert!(partial.nu_perp().is_err());
    }

    #[test]
    fn pure_power_law_collapses_exactly() {
        let exps = ExponentSet::dp().with_p_c(0.3);
        let d = planted(&[16, 32, 64], |t, _| pow(t, -0.159));
        let r = rescale_dp(&d, &exps).unwrap();
        // y = L^{zα} t^{-α} = η^{-α} for every L
        for c in &r {
            for &(eta, y, _) in &c.points {
                assert!((y - pow(eta, -0.159)).abs() < 1e-12 * y);
            }
            assert_eq!(c.x, 0.0);
        }
    }

    #[test]
    fn identity_exponents() {
        let exps = ExponentSet::new(Some(0.0.into()), Some(1e300.into()), None, Some(1.0.into()), Some(0.3.into())).unwrap();
        let d = planted(&[10], |t, _| t);
        let r = rescale_dp(&d, &exps).unwrap();
        for (p, &(eta, y, _)) in d.curves[0].points.iter().zip(&r[0].points) {
            assert!((eta - p.t / 10.0).abs() < 1e-15);
            assert_eq!(y, p.value);
        }
    }

    #[test]
    fn observable_checks() {
        let d = planted(&[8], |t, _| t);
        assert!(rescale_entropy_dp(&d, &ExponentSet::dp()).is_err());
        assert!(rescale_dp(&d, &ExponentSet::dp()).is_ok());
        let mut s = d.clone();
        s.observable = "entropy_Q".to_string();
        assert!(rescale_dp(&s, &ExponentSet::dp()).is_err());
        s.curves[0].points[0].value = 0.0;
        let zero = ScalingDataset { curves: vec![Curve { len: 8, rate: 0.1, points: vec![Point { t: 1.0, value: 0.0, stderr: 0.0, n: 1 }] }], ..s };
        assert_eq!(rescale_entropy_dp(&zero, &ExponentSet::dp()).unwrap()[0].points[0].1, 0.0);
    }

    #[test]
    fn crossover_degenerates_for_huge_scales() {
        let mut d = planted(&[8, 16], |t, _| t);
        d.observable = "entropy_Q".to_string();
        let r = crossover_rescale(&d, 1e300, 1e300).unwrap();
        for c in &r {
            assert!(c.x < 1e-290);
            assert!(c.points.iter().all(|p| p.0 < 1e-290));
        }
        assert!(crossover_rescale(&d, 0.0, 1.0).is_err());
    }
}
