//! Geometric primitives on the unit 2-sphere: unit vectors, caps, axis-angle
//! rotations, the normalized invariant measure (`mu(S^2) = 1`), deterministic
//! sampling streams and low-discrepancy grids.
//!
//! Every randomized operation is a pure function of a [`RandomStream`], so a
//! fixed `(seed, stream id)` replays bit-identically regardless of how many
//! worker threads are in use.

use crate::error::{KsError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tolerance for floating-point orthogonality and unit-norm checks, in the
/// natural units of the quantity checked (dot products, radians).
pub const ANGLE_TOL: f64 = 1e-9;

/// Number of sample strata used by deterministic parallel Monte Carlo.
/// Fixed independently of the worker count so that results never depend on
/// how the work was scheduled.
pub const MC_STRATA: usize = 256;

/// A point of the unit sphere. The constructor normalizes, so the invariant
/// `x^2 + y^2 + z^2 = 1` holds to within 1e-12 from then on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec {
    /// Builds a unit vector from arbitrary (non-zero, finite) coordinates.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(KsError::Domain("non-finite vector component".into()));
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if norm == 0.0 {
            return Err(KsError::Domain("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVec) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> UnitVec {
        UnitVec {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Angle to `other` in `[0, pi]`.
    pub fn angle_to(&self, other: &UnitVec) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    /// Angle between the *lines* spanned by `self` and `other`, in `[0, pi/2]`.
    pub fn line_angle_to(&self, other: &UnitVec) -> f64 {
        self.dot(other).abs().clamp(0.0, 1.0).acos()
    }

    /// An orthonormal tangent frame at this point, chosen deterministically:
    /// Gram-Schmidt of the coordinate axis with the smallest-magnitude
    /// component (lowest index on ties), then the cross product.
    pub fn tangent_frame(&self) -> ([f64; 3], [f64; 3]) {
        let v = self.to_array();
        let a = [v[0].abs(), v[1].abs(), v[2].abs()];
        let mut k = 0;
        if a[1] < a[k] {
            k = 1;
        }
        if a[2] < a[k] {
            k = 2;
        }
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let d = dot3(&e, &v);
        let t1 = normalize3(&[e[0] - d * v[0], e[1] - d * v[1], e[2] - d * v[2]]);
        let t2 = cross3(&v, &t1);
        (t1, t2)
    }
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn normalize3(a: &[f64; 3]) -> [f64; 3] {
    let n = dot3(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// A closed spherical cap: all points within angular radius `radius` of
/// `center`. Under the normalized measure, `measure = (1 - cos radius) / 2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Cap {
    pub center: UnitVec,
    pub radius: f64,
}

impl Cap {
    /// `radius` must lie in `(0, pi]`.
    pub fn new(center: UnitVec, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= std::f64::consts::PI) {
            return Err(KsError::Domain(format!(
                "cap radius {radius} outside (0, pi]"
            )));
        }
        Ok(Self { center, radius })
    }

    /// Normalized measure of the cap, in `[0, 1]`.
    pub fn measure(&self) -> f64 {
        cap_measure(self.radius).expect("radius validated at construction")
    }

    pub fn contains(&self, p: &UnitVec) -> bool {
        self.center.angle_to(p) <= self.radius
    }

    /// Whether the *line* through `p` meets the double cap `self U -self`.
    pub fn contains_line(&self, p: &UnitVec) -> bool {
        self.center.line_angle_to(p) <= self.radius
    }
}

/// Normalized measure of a cap of the given angular radius.
pub fn cap_measure(radius: f64) -> Result<f64> {
    if !(radius > 0.0 && radius <= std::f64::consts::PI) {
        return Err(KsError::Domain(format!(
            "cap radius {radius} outside (0, pi]"
        )));
    }
    if radius == std::f64::consts::PI {
        return Ok(1.0);
    }
    Ok((1.0 - radius.cos()) / 2.0)
}

/// An axis-angle rotation of the sphere (Rodrigues form).
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    pub axis: UnitVec,
    pub angle: f64,
}

impl Rotation {
    pub fn new(axis: UnitVec, angle: f64) -> Self {
        Self { axis, angle }
    }

    pub fn apply(&self, v: &UnitVec) -> UnitVec {
        let r = self.apply_raw(&v.to_array());
        UnitVec::new(r[0], r[1], r[2]).expect("rotation of a unit vector is non-zero")
    }

    pub(crate) fn apply_raw(&self, v: &[f64; 3]) -> [f64; 3] {
        let k = self.axis.to_array();
        let (s, c) = self.angle.sin_cos();
        let kxv = cross3(&k, v);
        let kd = dot3(&k, v) * (1.0 - c);
        [
            v[0] * c + kxv[0] * s + k[0] * kd,
            v[1] * c + kxv[1] * s + k[1] * kd,
            v[2] * c + kxv[2] * s + k[2] * kd,
        ]
    }

    /// The rotation taking the north pole `(0,0,1)` to `target`.
    pub fn pole_to(target: &UnitVec) -> Rotation {
        let z = [0.0, 0.0, 1.0];
        let t = target.to_array();
        let c = dot3(&z, &t);
        if c > 1.0 - 1e-14 {
            // identity; any axis works
            return Rotation::new(UnitVec::new(1.0, 0.0, 0.0).unwrap(), 0.0);
        }
        if c < -1.0 + 1e-14 {
            return Rotation::new(
                UnitVec::new(1.0, 0.0, 0.0).unwrap(),
                std::f64::consts::PI,
            );
        }
        let ax = cross3(&z, &t);
        let axis = UnitVec::new(ax[0], ax[1], ax[2]).expect("non-degenerate axis");
        Rotation::new(axis, c.clamp(-1.0, 1.0).acos())
    }
}

/// A reproducible randomness source. The pair `(seed, stream id)` fully
/// determines the sample sequence; derived substreams let parallel workers
/// draw independently without coordination.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn substream(&self, id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// One uniform point of the sphere under the normalized measure.
pub fn uniform_point(rng: &mut ChaCha8Rng) -> UnitVec {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    UnitVec {
        x: r * phi.cos(),
        y: r * phi.sin(),
        z,
    }
}

/// `count` i.i.d. uniform points, deterministic in the stream.
pub fn sample_uniform_sphere(stream: &RandomStream, count: usize) -> Result<Vec<UnitVec>> {
    if count == 0 {
        return Err(KsError::Domain("sample count must be >= 1".into()));
    }
    let mut rng = stream.rng();
    Ok((0..count).map(|_| uniform_point(&mut rng)).collect())
}

/// One uniform point of `cap` (inverse-CDF on the colatitude cosine plus a
/// uniform azimuth, then rotation of the pole onto the cap center; exact and
/// rejection-free).
pub fn uniform_cap_point(cap: &Cap, rng: &mut ChaCha8Rng) -> UnitVec {
    let cos_r = cap.radius.cos();
    let u: f64 = rng.gen_range(0.0..=1.0);
    let ct = 1.0 - u * (1.0 - cos_r);
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let local = UnitVec {
        x: st * phi.cos(),
        y: st * phi.sin(),
        z: ct,
    };
    Rotation::pole_to(&cap.center).apply(&local)
}

/// `count` uniform points of the cap, deterministic in the stream.
pub fn sample_uniform_cap(stream: &RandomStream, cap: &Cap, count: usize) -> Result<Vec<UnitVec>> {
    if count == 0 {
        return Err(KsError::Domain("sample count must be >= 1".into()));
    }
    let mut rng = stream.rng();
    Ok((0..count).map(|_| uniform_cap_point(cap, &mut rng)).collect())
}

/// Deterministic low-discrepancy spherical point set (golden-angle Fibonacci
/// lattice).
pub fn fibonacci_grid(count: usize) -> Result<Vec<UnitVec>> {
    if count == 0 {
        return Err(KsError::Domain("grid size must be >= 1".into()));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    Ok((0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            UnitVec {
                x: r * phi.cos(),
                y: r * phi.sin(),
                z,
            }
        })
        .collect())
}

/// Splits `count` over [`MC_STRATA`] fixed strata: `(substream id offset,
/// samples in stratum)` for each non-empty stratum. The split depends only on
/// `count`, never on the worker count.
pub fn strata_plan(count: usize) -> Vec<(u64, usize)> {
    let strata = MC_STRATA.min(count.max(1));
    let base = count / strata;
    let rem = count % strata;
    (0..strata)
        .map(|k| (k as u64, base + usize::from(k < rem)))
        .filter(|&(_, n)| n > 0)
        .collect()
}

/// Sums in a fixed pairwise (binary-tree) order, independent of how the
/// addends were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Mean and standard error of `n` Monte Carlo draws summarized per stratum as
/// `(sum, sum of squares, count)`, reduced in fixed stratum order.
pub fn mc_mean_stderr(parts: &[(f64, f64, usize)]) -> (f64, f64) {
    let sums: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let sqs: Vec<f64> = parts.iter().map(|p| p.1).collect();
    let n: usize = parts.iter().map(|p| p.2).sum();
    let total = pairwise_sum(&sums);
    let total_sq = pairwise_sum(&sqs);
    let nf = n as f64;
    let mean = total / nf;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = ((total_sq - total * total / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // angle between the lines (0,1,2) and (0,2,2): arccos(3/sqrt(10))
    const THETA0: f64 = 0.321_750_554_396_642_3;

    #[test]
    fn unit_vec_normalizes() {
        let v = UnitVec::new(3.0, 4.0, 0.0).unwrap();
        assert_abs_diff_eq!(v.dot(&v), 1.0, epsilon = 1e-12);
        assert!(UnitVec::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cap_measure_values() {
        assert_eq!(cap_measure(std::f64::consts::PI).unwrap(), 1.0);
        assert_abs_diff_eq!(
            cap_measure(std::f64::consts::FRAC_PI_2).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        // radius theta0/2 -> sin^2(theta0/4); frozen from the half-angle identity
        assert_abs_diff_eq!(
            cap_measure(THETA0 / 2.0).unwrap(),
            0.006456271181251639,
            epsilon = 1e-14
        );
        assert!(cap_measure(0.0).is_err());
        assert!(cap_measure(4.0).is_err());
    }

    #[test]
    fn cap_measure_monotone() {
        let mut prev = 0.0;
        for k in 1..=100 {
            let m = cap_measure(std::f64::consts::PI * k as f64 / 100.0).unwrap();
            assert!(m > prev);
            prev = m;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn rotate_quarter_turn() {
        let r = Rotation::new(
            UnitVec::new(0.0, 0.0, 1.0).unwrap(),
            std::f64::consts::FRAC_PI_2,
        );
        let v = r.apply(&UnitVec::new(1.0, 0.0, 0.0).unwrap());
        assert_abs_diff_eq!(v.x(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.y(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotate_fixes_axis() {
        let axis = UnitVec::new(0.3, -0.5, 0.81).unwrap();
        let r = Rotation::new(axis, 1.234);
        let v = r.apply(&axis);
        assert_abs_diff_eq!(v.dot(&axis), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotate_about_pole_moves_skew_vector_by_less_than_the_angle() {
        // axis (0,0,1), angle theta0/2 applied to (0,1,2)/sqrt(5); the
        // resulting displacement satisfies cos(d) = 4/5 + cos(theta0/2)/5
        // (axis at latitude, not perpendicular), frozen from that identity.
        let r = Rotation::new(UnitVec::new(0.0, 0.0, 1.0).unwrap(), THETA0 / 2.0);
        let v = UnitVec::new(0.0, 1.0, 2.0).unwrap();
        let moved = r.apply(&v);
        let expected_dot = 4.0 / 5.0 + (THETA0 / 2.0).cos() / 5.0;
        assert_abs_diff_eq!(moved.dot(&v), expected_dot, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_dot, 0.9974174915274994, epsilon = 1e-12);
        // rotation about a perpendicular axis moves by the full angle
        let perp = Rotation::new(UnitVec::new(1.0, 0.0, 0.0).unwrap(), THETA0 / 2.0);
        let pole = UnitVec::new(0.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            perp.apply(&pole).angle_to(&pole),
            THETA0 / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotation_preserves_dot_products() {
        let stream = RandomStream::new(99);
        let mut rng = stream.rng();
        for _ in 0..200 {
            let axis = uniform_point(&mut rng);
            let angle = rng.gen_range(-6.0..6.0);
            let r = Rotation::new(axis, angle);
            let u = uniform_point(&mut rng);
            let v = uniform_point(&mut rng);
            let before = u.dot(&v);
            let after = r.apply(&u).dot(&r.apply(&v));
            assert!((before - after).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_sampling_is_deterministic_and_symmetric() {
        let s = RandomStream::new(42);
        let a = sample_uniform_sphere(&s, 100_000).unwrap();
        let b = sample_uniform_sphere(&s, 100_000).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.to_array(), q.to_array());
        }
        // distinct substream differs
        let c = sample_uniform_sphere(&s.substream(1), 100_000).unwrap();
        assert_ne!(a[0].to_array(), c[0].to_array());
        let mean_z: f64 = a.iter().map(|p| p.z()).sum::<f64>() / a.len() as f64;
        assert!(mean_z.abs() < 4.0 / (a.len() as f64).sqrt());
    }

    #[test]
    fn hemisphere_fraction() {
        let s = RandomStream::new(7);
        let pts = sample_uniform_sphere(&s, 1_000_000).unwrap();
        let n = UnitVec::new(0.2, -0.4, 0.89).unwrap();
        let cap = Cap::new(n, std::f64::consts::FRAC_PI_2).unwrap();
        let frac =
            pts.iter().filter(|p| cap.contains(p)).count() as f64 / pts.len() as f64;
        assert!((frac - 0.5).abs() < 0.002);
    }

    #[test]
    fn cap_sampling_contained_and_uniform() {
        let s = RandomStream::new(11);
        let center = UnitVec::new(0.0, 0.0, 1.0).unwrap();
        let cap = Cap::new(center, 0.1).unwrap();
        let pts = sample_uniform_cap(&s, &cap, 100_000).unwrap();
        let mut mean_angle = 0.0;
        for p in &pts {
            let a = p.angle_to(&center);
            assert!(a <= cap.radius + 1e-12);
            mean_angle += a;
        }
        mean_angle /= pts.len() as f64;
        // 1-d quadrature oracle: mean of t under density sin(t) on [0, 0.1]
        assert_abs_diff_eq!(mean_angle, 0.06665555158597843, epsilon = 5e-4);
    }

    #[test]
    fn full_cap_sampling_matches_sphere_law() {
        let s = RandomStream::new(13);
        let cap = Cap::new(
            UnitVec::new(0.0, 1.0, 0.0).unwrap(),
            std::f64::consts::PI,
        )
        .unwrap();
        let pts = sample_uniform_cap(&s, &cap, 100_000).unwrap();
        let hemi = Cap::new(
            UnitVec::new(1.0, 0.0, 0.0).unwrap(),
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        let frac =
            pts.iter().filter(|p| hemi.contains(p)).count() as f64 / pts.len() as f64;
        assert!((frac - 0.5).abs() < 0.01);
    }

    #[test]
    fn fibonacci_grid_basic() {
        assert_eq!(fibonacci_grid(1).unwrap().len(), 1);
        let g1 = fibonacci_grid(5000).unwrap();
        let g2 = fibonacci_grid(5000).unwrap();
        for (p, q) in g1.iter().zip(&g2) {
            assert_eq!(p.to_array(), q.to_array());
        }
        assert!(fibonacci_grid(0).is_err());
    }

    #[test]
    fn strata_plan_covers_count() {
        for count in [1usize, 5, 255, 256, 257, 1_000_003] {
            let plan = strata_plan(count);
            assert_eq!(plan.iter().map(|p| p.1).sum::<usize>(), count);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_abs_diff_eq!(pairwise_sum(&xs), naive, epsilon = 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = UnitVec> {
            (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
                .prop_filter("not near zero", |(x, y, z)| {
                    x * x + y * y + z * z > 1e-4
                })
                .prop_map(|(x, y, z)| UnitVec::new(x, y, z).unwrap())
        }

        proptest! {
            #[test]
            fn rotation_preserves_dots(
                axis in vec3(),
                angle in -10.0..10.0f64,
                u in vec3(),
                v in vec3(),
            ) {
                let r = Rotation::new(axis, angle);
                let before = u.dot(&v);
                let after = r.apply(&u).dot(&r.apply(&v));
                prop_assert!((before - after).abs() < 1e-10);
            }

            #[test]
            fn cap_measure_monotone_in_radius(
                a in 1e-6..std::f64::consts::PI,
                b in 1e-6..std::f64::consts::PI,
            ) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assume!(hi - lo > 1e-12);
                prop_assert!(cap_measure(lo).unwrap() < cap_measure(hi).unwrap());
            }
        }
    }
}
