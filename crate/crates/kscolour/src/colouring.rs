//! The colouring abstraction and the built-in colourings: the explicit
//! regular polar-cap colouring, the parity colouring of the rational sphere,
//! constant colourings for calibration, and first-defined-wins hybrids.
//!
//! A colouring is a partial two-valued function on the sphere, identified
//! antipodally, together with a sampler that produces coloured points of its
//! domain inside a given cap. Queries must be pure and thread-safe.

use crate::error::{KsError, Result};
use crate::rational::{self, ParityClass, RationalRay};
use crate::sphere::{
    mc_mean_stderr, strata_plan, uniform_cap_point, uniform_point, Cap, RandomStream, UnitVec,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One of the two colours a defined point can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Colour {
    Zero,
    One,
}

impl Colour {
    pub fn value(&self) -> u8 {
        match self {
            Colour::Zero => 0,
            Colour::One => 1,
        }
    }
}

/// A projective direction, in floating or exact-rational representation.
#[derive(Debug, Clone)]
pub enum Ray {
    Real(UnitVec),
    Rational(RationalRay),
}

impl Ray {
    pub fn unit_vec(&self) -> UnitVec {
        match self {
            Ray::Real(v) => *v,
            Ray::Rational(r) => r.unit_vec(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Ray::Real(v) => format!("({:.12},{:.12},{:.12})", v.x(), v.y(), v.z()),
            Ray::Rational(r) => r.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColouringKind {
    Regular,
    Pseudo,
    User,
}

/// A queryable partial two-valued function on the sphere.
///
/// Contract: `query(-n) = query(n)` (rays are lines), and the sampler returns
/// only rays with a defined colour whose lines meet the cap.
pub trait Colouring: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> ColouringKind;

    fn query(&self, ray: &Ray) -> Option<Colour>;

    /// Up to `count` coloured domain points inside `cap`. May return fewer
    /// (or none) when the domain misses the cap.
    fn sample_in_domain(
        &self,
        cap: &Cap,
        rng: &mut ChaCha8Rng,
        count: usize,
    ) -> Vec<(Ray, Colour)>;

    /// Exact domain measure when one is known analytically.
    fn closed_form_domain_measure(&self) -> Option<f64> {
        None
    }
}

/// The explicit regular colouring: 0 on the two open polar caps `z^2 > 1/2`,
/// 1 on the open equatorial band `z^2 < 1/3`, undefined on the closed band
/// between them. Covers measure `1 - 1/sqrt(2) + 1/sqrt(3)`.
///
/// On any triad the squared `z` components sum to 1, so exactly one member
/// can exceed 1/2 and the other two defined members sit below 1/3; defined
/// triads always sum to 2 and defined orthogonal pairs never double up on 0.
#[derive(Debug, Clone, Default)]
pub struct PolarCapColouring;

/// `1 - 1/sqrt(2) + 1/sqrt(3)`, the measure of the polar-cap domain.
pub const POLAR_CAP_DOMAIN_MEASURE: f64 = 0.8702434880030784;

impl PolarCapColouring {
    fn query_z2(z2_num: f64, z2_den: f64) -> Option<Colour> {
        // z^2 > 1/2 resp. z^2 < 1/3, written cross-multiplied so the exact
        // integer path shares it
        if 2.0 * z2_num > z2_den {
            Some(Colour::Zero)
        } else if 3.0 * z2_num < z2_den {
            Some(Colour::One)
        } else {
            None
        }
    }
}

impl Colouring for PolarCapColouring {
    fn name(&self) -> &str {
        "polar-cap"
    }

    fn kind(&self) -> ColouringKind {
        ColouringKind::Regular
    }

    fn query(&self, ray: &Ray) -> Option<Colour> {
        match ray {
            Ray::Real(v) => Self::query_z2(v.z() * v.z(), 1.0),
            Ray::Rational(r) => {
                // exact integer comparison: 2 z^2 > n^2 resp. 3 z^2 < n^2;
                // equality is impossible since sqrt(2), sqrt(3) are irrational
                let z2 = r.z() * r.z();
                let n2 = r.n() * r.n();
                if 2 * z2.clone() > n2 {
                    Some(Colour::Zero)
                } else if 3 * z2 < n2 {
                    Some(Colour::One)
                } else {
                    None
                }
            }
        }
    }

    fn sample_in_domain(
        &self,
        cap: &Cap,
        rng: &mut ChaCha8Rng,
        count: usize,
    ) -> Vec<(Ray, Colour)> {
        (0..count)
            .filter_map(|_| {
                let p = uniform_cap_point(cap, rng);
                let ray = Ray::Real(p);
                self.query(&ray).map(|c| (ray, c))
            })
            .collect()
    }

    fn closed_form_domain_measure(&self) -> Option<f64> {
        Some(POLAR_CAP_DOMAIN_MEASURE)
    }
}

/// The two-valued colouring of the rational sphere via parity classes:
/// colour 0 on one class (Z by default), colour 1 on the others. Defined on
/// a dense, measure-zero subset; discontinuous at every point of its domain.
#[derive(Debug, Clone)]
pub struct MeyerColouring {
    zero_class: ParityClass,
}

impl MeyerColouring {
    pub fn new(zero_class: ParityClass) -> Self {
        Self { zero_class }
    }

    pub fn zero_class(&self) -> ParityClass {
        self.zero_class
    }
}

impl Default for MeyerColouring {
    fn default() -> Self {
        Self::new(ParityClass::Z)
    }
}

impl Colouring for MeyerColouring {
    fn name(&self) -> &str {
        "meyer"
    }

    fn kind(&self) -> ColouringKind {
        ColouringKind::Pseudo
    }

    fn query(&self, ray: &Ray) -> Option<Colour> {
        match ray {
            // a floating point carries no rationality certificate
            Ray::Real(_) => None,
            Ray::Rational(r) => Some(rational::meyer_colour(r, self.zero_class)),
        }
    }

    fn sample_in_domain(
        &self,
        cap: &Cap,
        rng: &mut ChaCha8Rng,
        count: usize,
    ) -> Vec<(Ray, Colour)> {
        match rational::sample_near(&cap.center, cap.radius, rng, count) {
            Ok(rays) => rays
                .into_iter()
                .map(|r| {
                    let c = rational::meyer_colour(&r, self.zero_class);
                    (Ray::Rational(r), c)
                })
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    fn closed_form_domain_measure(&self) -> Option<f64> {
        // countable dense domain: measure zero
        Some(0.0)
    }
}

/// Everywhere-defined constant colouring; violates the triad or pair
/// condition by construction. Used to calibrate the validators.
#[derive(Debug, Clone)]
pub struct ConstantColouring {
    value: Colour,
    name: String,
}

impl ConstantColouring {
    pub fn new(value: Colour) -> Self {
        let name = match value {
            Colour::Zero => "constant-0",
            Colour::One => "constant-1",
        };
        Self {
            value,
            name: name.into(),
        }
    }
}

impl Colouring for ConstantColouring {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ColouringKind {
        ColouringKind::User
    }

    fn query(&self, _ray: &Ray) -> Option<Colour> {
        Some(self.value)
    }

    fn sample_in_domain(
        &self,
        cap: &Cap,
        rng: &mut ChaCha8Rng,
        count: usize,
    ) -> Vec<(Ray, Colour)> {
        (0..count)
            .map(|_| (Ray::Real(uniform_cap_point(cap, rng)), self.value))
            .collect()
    }

    fn closed_form_domain_measure(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Ordered composition: the first component defining a point wins. Sampling
/// draws from every component's domain and re-colours through the composite
/// query.
pub struct HybridColouring {
    name: String,
    parts: Vec<Arc<dyn Colouring>>,
}

impl HybridColouring {
    pub fn new(name: impl Into<String>, parts: Vec<Arc<dyn Colouring>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(KsError::Domain("hybrid needs at least one part".into()));
        }
        Ok(Self {
            name: name.into(),
            parts,
        })
    }

    /// Polar caps and equatorial band coloured regularly, the leftover band
    /// filled with the rational-parity colouring.
    pub fn polar_over_meyer(zero_class: ParityClass) -> Self {
        Self {
            name: "hybrid".into(),
            parts: vec![
                Arc::new(PolarCapColouring),
                Arc::new(MeyerColouring::new(zero_class)),
            ],
        }
    }
}

impl Colouring for HybridColouring {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ColouringKind {
        ColouringKind::User
    }

    fn query(&self, ray: &Ray) -> Option<Colour> {
        self.parts.iter().find_map(|p| p.query(ray))
    }

    fn sample_in_domain(
        &self,
        cap: &Cap,
        rng: &mut ChaCha8Rng,
        count: usize,
    ) -> Vec<(Ray, Colour)> {
        let per_part = count.div_ceil(self.parts.len());
        let mut out = Vec::with_capacity(count);
        for part in &self.parts {
            for (ray, _) in part.sample_in_domain(cap, rng, per_part) {
                if let Some(c) = self.query(&ray) {
                    out.push((ray, c));
                    if out.len() == count {
                        return out;
                    }
                }
            }
        }
        out
    }
}

/// Builds a colouring by CLI name.
pub fn builtin_colouring(name: &str, zero_class: ParityClass) -> Result<Arc<dyn Colouring>> {
    match name {
        "polar-cap" => Ok(Arc::new(PolarCapColouring)),
        "meyer" => Ok(Arc::new(MeyerColouring::new(zero_class))),
        "hybrid" => Ok(Arc::new(HybridColouring::polar_over_meyer(zero_class))),
        "constant-0" => Ok(Arc::new(ConstantColouring::new(Colour::Zero))),
        "constant-1" => Ok(Arc::new(ConstantColouring::new(Colour::One))),
        other => Err(KsError::Parse(format!(
            "unknown colouring '{other}' (expected polar-cap, meyer, hybrid, constant-0 or constant-1)"
        ))),
    }
}

/// Domain measure of a colouring: closed form when available, plus a Monte
/// Carlo estimate of the fraction of uniform (floating) sphere points with a
/// defined colour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainMeasure {
    pub colouring: String,
    pub closed_form: Option<f64>,
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    pub samples: usize,
}

pub fn domain_measure(
    colouring: &dyn Colouring,
    stream: &RandomStream,
    samples: usize,
) -> DomainMeasure {
    let plan = strata_plan(samples);
    let parts: Vec<(f64, f64, usize)> = plan
        .par_iter()
        .map(|&(k, n)| {
            let mut rng = stream.substream(stream.stream_id + k).rng();
            let mut sum = 0.0;
            for _ in 0..n {
                let p = uniform_point(&mut rng);
                if colouring.query(&Ray::Real(p)).is_some() {
                    sum += 1.0;
                }
            }
            (sum, sum, n) // indicator: x^2 = x
        })
        .collect();
    let (mean, se) = mc_mean_stderr(&parts);
    DomainMeasure {
        colouring: colouring.name().into(),
        closed_form: colouring.closed_form_domain_measure(),
        mc_estimate: mean,
        mc_std_error: se,
        samples,
    }
}

/// A uniformly random orthonormal triad (rows of a uniform rotation, drawn
/// via a uniform unit quaternion).
pub fn random_triad(rng: &mut ChaCha8Rng) -> [UnitVec; 3] {
    let u1: f64 = rng.gen_range(0.0..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos()];
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let rows = [
        [
            w * w + x * x - y * y - z * z,
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            w * w - x * x + y * y - z * z,
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            w * w - x * x - y * y + z * z,
        ],
    ];
    rows.map(|r| UnitVec::new(r[0], r[1], r[2]).expect("rotation rows are unit"))
}

/// Result of sampling the two defining conditions on random real triads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsConditionReport {
    pub colouring: String,
    pub triads_sampled: usize,
    pub fully_defined_triads: usize,
    pub triad_violations: usize,
    pub pairs_checked: usize,
    pub pair_violations: usize,
    /// Up to five violating triads, as coordinates with their colours.
    pub exemplars: Vec<Vec<([f64; 3], Option<u8>)>>,
}

/// Samples `triad_count` uniformly random triads. Triads with all three
/// members defined must sum to 2; orthogonal pairs with both members defined
/// must sum to at least 1.
pub fn validate_ks_conditions(
    colouring: &dyn Colouring,
    stream: &RandomStream,
    triad_count: usize,
) -> Result<KsConditionReport> {
    if triad_count < 1 {
        return Err(KsError::Domain("triad count must be >= 1".into()));
    }
    struct Part {
        defined: usize,
        triad_viol: usize,
        pairs: usize,
        pair_viol: usize,
        exemplars: Vec<Vec<([f64; 3], Option<u8>)>>,
    }
    let plan = strata_plan(triad_count);
    let parts: Vec<Part> = plan
        .par_iter()
        .map(|&(k, n)| {
            let mut rng = stream.substream(stream.stream_id + k).rng();
            let mut part = Part {
                defined: 0,
                triad_viol: 0,
                pairs: 0,
                pair_viol: 0,
                exemplars: Vec::new(),
            };
            for _ in 0..n {
                let triad = random_triad(&mut rng);
                let cols: Vec<Option<Colour>> = triad
                    .iter()
                    .map(|v| colouring.query(&Ray::Real(*v)))
                    .collect();
                let mut violated = false;
                if cols.iter().all(|c| c.is_some()) {
                    part.defined += 1;
                    let sum: u8 = cols.iter().map(|c| c.unwrap().value()).sum();
                    if sum != 2 {
                        part.triad_viol += 1;
                        violated = true;
                    }
                }
                for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
                    if let (Some(a), Some(b)) = (cols[i], cols[j]) {
                        part.pairs += 1;
                        if a.value() + b.value() < 1 {
                            part.pair_viol += 1;
                            violated = true;
                        }
                    }
                }
                if violated && part.exemplars.len() < 2 {
                    part.exemplars.push(
                        triad
                            .iter()
                            .zip(&cols)
                            .map(|(v, c)| (v.to_array(), c.map(|c| c.value())))
                            .collect(),
                    );
                }
            }
            part
        })
        .collect();
    let mut report = KsConditionReport {
        colouring: colouring.name().into(),
        triads_sampled: triad_count,
        fully_defined_triads: 0,
        triad_violations: 0,
        pairs_checked: 0,
        pair_violations: 0,
        exemplars: Vec::new(),
    };
    for p in parts {
        report.fully_defined_triads += p.defined;
        report.triad_violations += p.triad_viol;
        report.pairs_checked += p.pairs;
        report.pair_violations += p.pair_viol;
        for e in p.exemplars {
            if report.exemplars.len() < 5 {
                report.exemplars.push(e);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real(x: f64, y: f64, z: f64) -> Ray {
        Ray::Real(UnitVec::new(x, y, z).unwrap())
    }

    #[test]
    fn polar_cap_query_examples() {
        let c = PolarCapColouring;
        assert_eq!(c.query(&real(0.0, 0.0, 1.0)), Some(Colour::Zero));
        assert_eq!(c.query(&real(1.0, 0.0, 0.0)), Some(Colour::One));
        // polar angle 50 degrees: z^2 ~ 0.413, inside the undefined band
        let t = 50.0_f64.to_radians();
        assert_eq!(c.query(&real(t.sin(), 0.0, t.cos())), None);
    }

    #[test]
    fn polar_cap_rational_band_point() {
        // (1,2,2)/3: z^2/n^2 = 4/9 in (1/3, 1/2): undefined band
        let c = PolarCapColouring;
        let r = Ray::Rational(RationalRay::from_i64(1, 2, 2).unwrap());
        assert_eq!(c.query(&r), None);
        // (0,0,1): polar
        let p = Ray::Rational(RationalRay::from_i64(0, 0, 1).unwrap());
        assert_eq!(c.query(&p), Some(Colour::Zero));
        // (1,1,0)-like equatorial: (3,4,0)/5
        let e = Ray::Rational(RationalRay::from_i64(3, 4, 0).unwrap());
        assert_eq!(c.query(&e), Some(Colour::One));
    }

    #[test]
    fn antipodal_symmetry_of_builtins() {
        let stream = RandomStream::new(31);
        let mut rng = stream.rng();
        let colourings: Vec<Arc<dyn Colouring>> = vec![
            Arc::new(PolarCapColouring),
            Arc::new(MeyerColouring::default()),
            Arc::new(HybridColouring::polar_over_meyer(ParityClass::Z)),
        ];
        for _ in 0..100_000 {
            let p = uniform_point(&mut rng);
            let q = p.neg();
            for c in &colourings {
                assert_eq!(c.query(&Ray::Real(p)), c.query(&Ray::Real(q)));
            }
        }
        // rational rays canonicalize antipodes away; check via explicit flips
        let m = MeyerColouring::default();
        let a = Ray::Rational(RationalRay::from_i64(2, -2, 1).unwrap());
        let b = Ray::Rational(RationalRay::from_i64(-2, 2, -1).unwrap());
        assert_eq!(m.query(&a), m.query(&b));
    }

    #[test]
    fn domain_measures() {
        let stream = RandomStream::new(5);
        let polar = domain_measure(&PolarCapColouring, &stream, 200_000);
        assert_eq!(polar.closed_form, Some(POLAR_CAP_DOMAIN_MEASURE));
        assert!(
            (polar.mc_estimate - POLAR_CAP_DOMAIN_MEASURE).abs() <= 3.0 * polar.mc_std_error,
            "{} vs {}",
            polar.mc_estimate,
            POLAR_CAP_DOMAIN_MEASURE
        );
        let meyer = domain_measure(&MeyerColouring::default(), &stream, 50_000);
        assert_eq!(meyer.mc_estimate, 0.0);
        let constant = domain_measure(&ConstantColouring::new(Colour::One), &stream, 50_000);
        assert_eq!(constant.mc_estimate, 1.0);
        assert_eq!(constant.closed_form, Some(1.0));
    }

    #[test]
    fn meyer_sampler_returns_rational_rays_in_cap() {
        let m = MeyerColouring::default();
        let cap = Cap::new(UnitVec::new(1.0, 2.0, 2.0).unwrap(), 1e-2).unwrap();
        let mut rng = RandomStream::new(8).rng();
        let samples = m.sample_in_domain(&cap, &mut rng, 100);
        assert_eq!(samples.len(), 100);
        for (ray, colour) in &samples {
            assert!(cap.contains_line(&ray.unit_vec()));
            match ray {
                Ray::Rational(r) => {
                    assert_eq!(rational::meyer_colour(r, ParityClass::Z), *colour)
                }
                Ray::Real(_) => panic!("meyer sampler must return rational rays"),
            }
        }
    }

    #[test]
    fn polar_cap_validates_clean() {
        let stream = RandomStream::new(2);
        let report = validate_ks_conditions(&PolarCapColouring, &stream, 100_000).unwrap();
        assert_eq!(report.triad_violations, 0);
        assert_eq!(report.pair_violations, 0);
        assert!(report.fully_defined_triads > 0);
    }

    #[test]
    fn constant_colourings_violate_at_rate_one() {
        let stream = RandomStream::new(3);
        let ones = validate_ks_conditions(&ConstantColouring::new(Colour::One), &stream, 20_000)
            .unwrap();
        assert_eq!(ones.fully_defined_triads, 20_000);
        assert_eq!(ones.triad_violations, 20_000);
        assert_eq!(ones.pair_violations, 0);
        let zeros = validate_ks_conditions(&ConstantColouring::new(Colour::Zero), &stream, 20_000)
            .unwrap();
        assert_eq!(zeros.pair_violations, zeros.pairs_checked);
    }

    #[test]
    fn hybrid_first_defined_wins() {
        let h = HybridColouring::polar_over_meyer(ParityClass::Z);
        // rational point inside a polar cap: polar colour wins over parity
        let pole = Ray::Rational(RationalRay::from_i64(0, 0, 1).unwrap());
        assert_eq!(h.query(&pole), Some(Colour::Zero));
        // rational point in the band: polar undefined, parity decides
        let band = Ray::Rational(RationalRay::from_i64(1, 2, 2).unwrap());
        assert_eq!(h.query(&band), Some(Colour::One));
        // float in the band: still undefined
        let t = 50.0_f64.to_radians();
        assert_eq!(
            h.query(&Ray::Real(UnitVec::new(t.sin(), 0.0, t.cos()).unwrap())),
            None
        );
    }

    #[test]
    fn random_triads_are_orthonormal() {
        let mut rng = RandomStream::new(10).rng();
        for _ in 0..1000 {
            let t = random_triad(&mut rng);
            for i in 0..3 {
                assert_abs_diff_eq!(t[i].dot(&t[i]), 1.0, epsilon = 1e-12);
                for j in (i + 1)..3 {
                    assert!(t[i].dot(&t[j]).abs() < 1e-12);
                }
            }
        }
    }
}
