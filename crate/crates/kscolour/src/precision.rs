//! Finite-precision measurement statistics: simulate a measurement aimed at a
//! target direction `k` with alignment uncertainty `epsilon` against a
//! colouring, estimate the probability that the outcome reveals the target's
//! own colour, and classify how that probability behaves as the precision
//! improves.
//!
//! A measurement draws an actually-measured direction from the colouring's
//! domain inside `Cap(k, epsilon)` and reports that direction's colour. On a
//! locally constant colouring the target colour is recovered with certainty
//! once `epsilon` is below the distance to the nearest boundary; on a dense
//! everywhere-discontinuous colouring both colours occur in every cap and the
//! probability stays bounded away from 1.

use crate::colouring::{Colour, Colouring, Ray};
use crate::error::{KsError, Result};
use crate::sphere::{
    mc_mean_stderr, pairwise_sum, strata_plan, uniform_point, Cap, RandomStream, Rotation,
    UnitVec,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// 97.5th percentile of the standard normal; Wilson 95% intervals.
const WILSON_Z: f64 = 1.959963984540054;

/// How the instrument's misalignment is drawn inside the precision cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MisalignmentLaw {
    /// Uniform over the colouring's domain within the cap (default).
    UniformCap,
    /// Angular offset `|N(0, epsilon/3)|` truncated at `epsilon`, uniform
    /// azimuth; the domain is sampled in a small cap around the offset point.
    GaussianTruncated,
}

impl std::str::FromStr for MisalignmentLaw {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "uniform-cap" => Ok(MisalignmentLaw::UniformCap),
            "gaussian" | "gaussian-truncated" => Ok(MisalignmentLaw::GaussianTruncated),
            other => Err(KsError::Parse(format!(
                "unknown misalignment law '{other}' (uniform or gaussian)"
            ))),
        }
    }
}

/// A finite-precision instrument aimed against a colouring.
pub struct MeasurementModel {
    colouring: Arc<dyn Colouring>,
    law: MisalignmentLaw,
}

impl MeasurementModel {
    pub fn new(colouring: Arc<dyn Colouring>, law: MisalignmentLaw) -> Self {
        Self { colouring, law }
    }

    pub fn colouring(&self) -> &dyn Colouring {
        self.colouring.as_ref()
    }

    pub fn law(&self) -> MisalignmentLaw {
        self.law
    }

    /// The target's own colour; targets outside the domain are rejected
    /// rather than silently projected onto it.
    pub fn true_colour(&self, target: &Ray) -> Result<Colour> {
        self.colouring.query(target).ok_or_else(|| {
            KsError::Domain(format!(
                "target {} is outside the domain of '{}'",
                target.describe(),
                self.colouring.name()
            ))
        })
    }

    /// One simulated measurement outcome: the colour of a domain point within
    /// `epsilon` of the target.
    pub fn simulate(&self, target: &Ray, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Colour> {
        self.true_colour(target)?;
        if !(epsilon > 0.0 && epsilon <= std::f64::consts::PI) {
            return Err(KsError::Domain(format!(
                "epsilon {epsilon} outside (0, pi]"
            )));
        }
        let k = target.unit_vec();
        for _ in 0..64 {
            let drawn = match self.law {
                MisalignmentLaw::UniformCap => {
                    let cap = Cap::new(k, epsilon)?;
                    self.colouring.sample_in_domain(&cap, rng, 8)
                }
                MisalignmentLaw::GaussianTruncated => {
                    let offset = gaussian_offset_point(&k, epsilon, rng);
                    let inner = Cap::new(offset, (epsilon / 20.0).max(1e-7))?;
                    let mut s = self.colouring.sample_in_domain(&inner, rng, 8);
                    s.retain(|(ray, _)| k.line_angle_to(&ray.unit_vec()) <= epsilon);
                    s
                }
            };
            if let Some((_, colour)) = drawn.into_iter().next() {
                return Ok(colour);
            }
        }
        Err(KsError::Inconsistency(format!(
            "no domain point of '{}' found within {epsilon} of {}",
            self.colouring.name(),
            target.describe()
        )))
    }

    /// Fraction of `trials` measurements that reveal the target's colour,
    /// with a Wilson 95% interval.
    pub fn estimate_p(
        &self,
        target: &Ray,
        epsilon: f64,
        trials: usize,
        stream: &RandomStream,
    ) -> Result<PEstimate> {
        if trials < 100 {
            return Err(KsError::Domain("trials must be >= 100".into()));
        }
        let truth = self.true_colour(target)?;
        let plan = strata_plan(trials);
        let parts: Vec<Result<(f64, f64, usize)>> = plan
            .par_iter()
            .map(|&(k, n)| {
                let mut rng = stream.substream(stream.stream_id + k).rng();
                let mut hits = 0.0;
                for _ in 0..n {
                    if self.simulate(target, epsilon, &mut rng)? == truth {
                        hits += 1.0;
                    }
                }
                Ok((hits, hits, n))
            })
            .collect();
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        let (p_hat, _) = mc_mean_stderr(&parts);
        let successes = pairwise_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>()) as u64;
        let (lo, hi) = wilson_interval(successes, trials as u64);
        let minority = p_hat.min(1.0 - p_hat);
        Ok(PEstimate {
            epsilon,
            trials,
            successes,
            p_hat,
            wilson_low: lo,
            wilson_high: hi,
            minority_fraction: minority,
        })
    }

    /// Per-target profile of `p_hat` across strictly decreasing epsilons,
    /// with a trend verdict.
    pub fn probe(
        &self,
        targets: &[Ray],
        epsilons: &[f64],
        trials: usize,
        stream: &RandomStream,
    ) -> Result<Vec<KnowabilityReport>> {
        if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(KsError::Domain(
                "epsilons must be strictly decreasing".into(),
            ));
        }
        targets
            .iter()
            .enumerate()
            .map(|(ti, target)| {
                let estimates = epsilons
                    .iter()
                    .enumerate()
                    .map(|(ei, &eps)| {
                        let cell = (ti * epsilons.len() + ei) as u64 * 4096;
                        self.estimate_p(
                            target,
                            eps,
                            trials,
                            &stream.substream(stream.stream_id + cell),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let verdict = classify_trend(&estimates);
                Ok(KnowabilityReport {
                    target: target.describe(),
                    law: self.law,
                    trials,
                    estimates,
                    verdict,
                })
            })
            .collect()
    }
}

/// Point at a truncated-Gaussian angular offset from `k`.
fn gaussian_offset_point(k: &UnitVec, epsilon: f64, rng: &mut ChaCha8Rng) -> UnitVec {
    let sigma = epsilon / 3.0;
    let offset = loop {
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let g = (-2.0 * u1.ln()).sqrt() * u2.cos();
        let t = (g * sigma).abs();
        if t <= epsilon {
            break t;
        }
    };
    let (t1, _) = k.tangent_frame();
    let axis = UnitVec::new(t1[0], t1[1], t1[2]).unwrap();
    let tilted = Rotation::new(axis, offset).apply(k);
    let spin = Rotation::new(*k, rng.gen_range(0.0..std::f64::consts::TAU));
    spin.apply(&tilted)
}

/// Wilson score interval; exact endpoints at the degenerate counts.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { center - half };
    let hi = if successes == trials {
        1.0
    } else {
        center + half
    };
    (lo.max(0.0), hi.min(1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PEstimate {
    pub epsilon: f64,
    pub trials: usize,
    pub successes: u64,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Fraction of outcomes showing the rarer of the two colours.
    pub minority_fraction: f64,
}

/// Finite-probe stand-in for the unobservable precision limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// Smallest-epsilon interval contains 1 and `p_hat` never decreased.
    ConvergesTo1,
    /// Every interval excludes 1.
    BoundedAway,
    Inconclusive,
}

fn classify_trend(estimates: &[PEstimate]) -> Verdict {
    let nondecreasing = estimates.windows(2).all(|w| w[1].p_hat >= w[0].p_hat);
    let last_contains_one = estimates.last().map_or(false, |e| e.wilson_high >= 1.0);
    if last_contains_one && nondecreasing {
        Verdict::ConvergesTo1
    } else if estimates.iter().all(|e| e.wilson_high < 1.0) {
        Verdict::BoundedAway
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowabilityReport {
    pub target: String,
    pub law: MisalignmentLaw,
    pub trials: usize,
    pub estimates: Vec<PEstimate>,
    pub verdict: Verdict,
}

/// Random rational targets: one domain point near each of `count` random
/// directions.
pub fn random_rational_targets(count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Ray>> {
    (0..count)
        .map(|_| {
            let p = uniform_point(rng);
            let rays = crate::rational::sample_near(&p, 0.05, rng, 1)?;
            Ok(Ray::Rational(rays.into_iter().next().expect("one sample")))
        })
        .collect()
}

/// Random targets in the interior of the polar-cap domain: defined points
/// whose distance to every region boundary circle exceeds `margin`.
pub fn random_polar_interior_targets(
    count: usize,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Ray>> {
    if margin <= 0.0 || margin > 0.08 {
        return Err(KsError::Domain(
            "margin must be in (0, 0.08] to leave interior room".into(),
        ));
    }
    // boundary circles at colatitudes 45 deg (z^2 = 1/2) and ~54.74 deg
    // (z^2 = 1/3), mirrored on the southern hemisphere
    let cap_edge = std::f64::consts::FRAC_PI_4;
    let band_edge = (1.0 / 3.0_f64.sqrt()).acos();
    let mut out = Vec::with_capacity(count);
    let mut guard = 0usize;
    while out.len() < count {
        guard += 1;
        if guard > count * 1000 {
            return Err(KsError::Internal(
                "interior target generation failed to converge".into(),
            ));
        }
        let p = uniform_point(rng);
        let theta = p.z().clamp(-1.0, 1.0).acos();
        let colat = theta.min(std::f64::consts::PI - theta);
        let defined = p.z() * p.z() > 0.5 || p.z() * p.z() < 1.0 / 3.0;
        if defined && (colat - cap_edge).abs() > margin && (colat - band_edge).abs() > margin {
            out.push(Ray::Real(p));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colouring::{builtin_colouring, MeyerColouring, PolarCapColouring};
    use crate::rational::{ParityClass, RationalRay};

    fn polar_model() -> MeasurementModel {
        MeasurementModel::new(Arc::new(PolarCapColouring), MisalignmentLaw::UniformCap)
    }

    fn meyer_model() -> MeasurementModel {
        MeasurementModel::new(
            Arc::new(MeyerColouring::default()),
            MisalignmentLaw::UniformCap,
        )
    }

    #[test]
    fn wilson_endpoints() {
        let (lo, hi) = wilson_interval(1000, 1000);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.99);
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.01);
        let (lo, hi) = wilson_interval(500, 1000);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi < 1.0);
    }

    #[test]
    fn polar_interior_is_locally_constant() {
        let model = polar_model();
        let pole = Ray::Real(UnitVec::new(0.0, 0.0, 1.0).unwrap());
        let est = model
            .estimate_p(&pole, 1e-2, 500, &RandomStream::new(3))
            .unwrap();
        assert_eq!(est.p_hat, 1.0);
        assert_eq!(est.wilson_high, 1.0);
        assert_eq!(est.minority_fraction, 0.0);
    }

    #[test]
    fn out_of_domain_target_is_rejected() {
        let model = polar_model();
        // polar angle 50 degrees: in the undefined band
        let t = 50.0f64.to_radians();
        let band = Ray::Real(UnitVec::new(t.sin(), 0.0, t.cos()).unwrap());
        assert!(model.true_colour(&band).is_err());
        assert!(model
            .estimate_p(&band, 1e-2, 200, &RandomStream::new(4))
            .is_err());
    }

    #[test]
    fn meyer_measurement_reaches_both_colours() {
        let model = meyer_model();
        let k = Ray::Rational(RationalRay::from_i64(2, -2, 1).unwrap());
        assert_eq!(model.true_colour(&k).unwrap(), Colour::Zero);
        let mut rng = RandomStream::new(5).rng();
        let mut saw = [false; 2];
        for _ in 0..200 {
            let c = model.simulate(&k, 1e-3, &mut rng).unwrap();
            saw[c.value() as usize] = true;
        }
        assert!(saw[0] && saw[1]);
    }

    #[test]
    fn meyer_intervals_exclude_one() {
        let model = meyer_model();
        let k = Ray::Rational(RationalRay::from_i64(2, -2, 1).unwrap());
        for eps in [1e-2, 1e-3, 1e-4] {
            let est = model
                .estimate_p(&k, eps, 2000, &RandomStream::new(6))
                .unwrap();
            assert!(est.wilson_high < 1.0, "eps {eps}: {est:?}");
            assert!(est.minority_fraction > 0.0);
        }
    }

    #[test]
    fn whole_sphere_precision_matches_global_colour_law() {
        // with the cap covering the whole sphere, the outcome distribution is
        // the sampler's global colour distribution: for polar-cap, caps vs
        // band conditioned on being defined
        let model = polar_model();
        let pole = Ray::Real(UnitVec::new(0.0, 0.0, 1.0).unwrap());
        let mut rng = RandomStream::new(15).rng();
        let trials = 20_000;
        let mut zeros = 0usize;
        for _ in 0..trials {
            if model
                .simulate(&pole, std::f64::consts::PI, &mut rng)
                .unwrap()
                == Colour::Zero
            {
                zeros += 1;
            }
        }
        let p0 = zeros as f64 / trials as f64;
        let caps = 1.0 - 1.0 / 2.0_f64.sqrt();
        let expected = caps / crate::colouring::POLAR_CAP_DOMAIN_MEASURE;
        let se = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!(
            (p0 - expected).abs() < 4.0 * se,
            "{p0} vs {expected} (se {se})"
        );
    }

    #[test]
    fn probe_verdicts() {
        let polar = polar_model();
        let mut rng = RandomStream::new(7).rng();
        let interior = random_polar_interior_targets(5, 0.02, &mut rng).unwrap();
        let reports = polar
            .probe(&interior, &[1e-2, 1e-3], 200, &RandomStream::new(8))
            .unwrap();
        for r in &reports {
            assert_eq!(r.verdict, Verdict::ConvergesTo1);
            assert!(r.estimates.iter().all(|e| e.p_hat == 1.0));
        }
        let meyer = meyer_model();
        let targets = {
            let mut rng = RandomStream::new(9).rng();
            random_rational_targets(5, &mut rng).unwrap()
        };
        let reports = meyer
            .probe(&targets, &[1e-2, 1e-3], 2000, &RandomStream::new(10))
            .unwrap();
        for r in &reports {
            assert_ne!(r.verdict, Verdict::ConvergesTo1, "{r:?}");
        }
    }

    #[test]
    fn hybrid_band_targets_bounded_away() {
        let hybrid = builtin_colouring("hybrid", ParityClass::Z).unwrap();
        let model = MeasurementModel::new(hybrid, MisalignmentLaw::UniformCap);
        // (1,2,2)/3 lies in the band: parity colouring rules there
        let band = Ray::Rational(RationalRay::from_i64(1, 2, 2).unwrap());
        let reports = model
            .probe(
                std::slice::from_ref(&band),
                &[1e-2, 1e-3],
                2000,
                &RandomStream::new(11),
            )
            .unwrap();
        assert_eq!(reports[0].verdict, Verdict::BoundedAway);
        // interior-of-polar-cap rational target: locally constant
        let pole = Ray::Rational(RationalRay::from_i64(0, 0, 1).unwrap());
        let reports = model
            .probe(
                std::slice::from_ref(&pole),
                &[1e-2, 1e-3],
                300,
                &RandomStream::new(12),
            )
            .unwrap();
        assert_eq!(reports[0].verdict, Verdict::ConvergesTo1);
    }

    #[test]
    fn gaussian_law_runs() {
        let model = MeasurementModel::new(
            Arc::new(PolarCapColouring),
            MisalignmentLaw::GaussianTruncated,
        );
        let pole = Ray::Real(UnitVec::new(0.0, 0.0, 1.0).unwrap());
        let est = model
            .estimate_p(&pole, 1e-2, 200, &RandomStream::new(13))
            .unwrap();
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn epsilons_must_decrease() {
        let model = polar_model();
        let pole = Ray::Real(UnitVec::new(0.0, 0.0, 1.0).unwrap());
        assert!(model
            .probe(
                std::slice::from_ref(&pole),
                &[1e-3, 1e-2],
                200,
                &RandomStream::new(14)
            )
            .is_err());
    }
}
