//! The deficit lower bound, made computable. Around each ray of an
//! uncolourable set, the map `g_i(m) = R(m, theta0/2) n_i` (rotate `n_i` by
//! the half minimum separation about the variable axis `m`) covers the patch
//! of radius `theta0/2` twice as `m` ranges over the sphere, so each Jacobian
//! integrates to exactly twice the patch measure, `2 sin^2(theta0/4)` — the
//! per-patch oracle that gates the finite-difference Jacobian. The integral
//! of the pointwise minimum of the Jacobians is the quantity of interest: a
//! positive lower bound on the measure that any colourable Borel set must
//! leave uncovered.
//!
//! Antipodal partners satisfy `g(m) = -g_i(m)` with identical Jacobians (the
//! identity is re-verified numerically on every run), so the minimum runs
//! over one ray per line.

use crate::error::{KsError, Result};
use crate::sets::RaySet;
use crate::sphere::{
    dot3, mc_mean_stderr, strata_plan, uniform_point, RandomStream, Rotation, UnitVec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Central finite-difference step for tangent derivatives. Gated by the
/// covering-identity check rather than trusted blindly.
pub const FD_STEP: f64 = 1e-5;

/// Stream-id layout inside one deficit run.
const STREAM_ANTIPODAL: u64 = 0;
const STREAM_MIN: u64 = 1024;
const STREAM_PATCH_BASE: u64 = 2048;
const STREAM_PATCH_SPACING: u64 = 1024;

/// A ray set prepared for deficit integration: one representative per line,
/// the minimum line separation, and the patch radius (half of it).
#[derive(Debug, Clone)]
pub struct DeficitProblem {
    set_name: String,
    rays_int: Vec<[i64; 3]>,
    rays: Vec<UnitVec>,
    theta0: f64,
    patch_radius: f64,
}

impl DeficitProblem {
    /// The set is treated as antipodally closed; a single line gets
    /// `theta0 = pi` (its only pair is the antipodal one).
    pub fn new(set: &RaySet) -> Result<Self> {
        if set.is_empty() {
            return Err(KsError::Domain(
                "deficit problem needs a non-empty ray set".into(),
            ));
        }
        let theta0 = if set.len() == 1 {
            std::f64::consts::PI
        } else {
            set.min_angle()?
        };
        Ok(Self {
            set_name: set.name().into(),
            rays_int: set.rays().to_vec(),
            rays: set.unit_vecs(),
            theta0,
            patch_radius: theta0 / 2.0,
        })
    }

    pub fn num_patches(&self) -> usize {
        self.rays.len()
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn patch_radius(&self) -> f64 {
        self.patch_radius
    }

    /// Exact value of each patch integral: `2 sin^2(theta0/4)`, i.e. twice
    /// the patch measure.
    pub fn covering_ceiling(&self) -> f64 {
        2.0 * (self.theta0 / 4.0).sin().powi(2)
    }

    /// Rotates ray `i` by the fixed angle `theta0/2` about the axis `m`; the
    /// image lies in the patch of radius `theta0/2` around the ray.
    pub fn g_map(&self, i: usize, m: &UnitVec) -> UnitVec {
        Rotation::new(*m, self.patch_radius).apply(&self.rays[i])
    }

    fn g_map_of(&self, ray: &UnitVec, m: &UnitVec) -> [f64; 3] {
        Rotation::new(*m, self.patch_radius).apply_raw(&ray.to_array())
    }

    /// `|det Dg_i(m)|` with respect to orthonormal tangent frames, by central
    /// finite differences along two geodesic tangent directions at `m`.
    pub fn jacobian(&self, i: usize, m: &UnitVec) -> f64 {
        self.jacobian_of(&self.rays[i], m)
    }

    fn jacobian_of(&self, ray: &UnitVec, m: &UnitVec) -> f64 {
        let (t1, t2) = m.tangent_frame();
        let marr = m.to_array();
        let h = FD_STEP;
        let (sh, ch) = (h.sin(), h.cos());
        let mut cols = [[0.0f64; 3]; 2];
        for (slot, t) in cols.iter_mut().zip([t1, t2]) {
            let plus = [
                ch * marr[0] + sh * t[0],
                ch * marr[1] + sh * t[1],
                ch * marr[2] + sh * t[2],
            ];
            let minus = [
                ch * marr[0] - sh * t[0],
                ch * marr[1] - sh * t[1],
                ch * marr[2] - sh * t[2],
            ];
            let gp = self.g_map_of(ray, &UnitVec::new(plus[0], plus[1], plus[2]).unwrap());
            let gm = self.g_map_of(ray, &UnitVec::new(minus[0], minus[1], minus[2]).unwrap());
            *slot = [
                (gp[0] - gm[0]) / (2.0 * h),
                (gp[1] - gm[1]) / (2.0 * h),
                (gp[2] - gm[2]) / (2.0 * h),
            ];
        }
        let image = self.g_map_of(ray, m);
        let p = UnitVec::new(image[0], image[1], image[2]).unwrap();
        let (u1, u2) = p.tangent_frame();
        let a = dot3(&cols[0], &u1);
        let b = dot3(&cols[1], &u1);
        let c = dot3(&cols[0], &u2);
        let d = dot3(&cols[1], &u2);
        (a * d - b * c).abs()
    }

    /// Pointwise minimum of the patch Jacobians at `m` (one per line).
    pub fn j_min(&self, m: &UnitVec) -> f64 {
        (0..self.rays.len())
            .map(|i| self.jacobian(i, m))
            .fold(f64::INFINITY, f64::min)
    }

    /// Max over `count` random points of `|J_i(m) - J_i'(m)|` where `J_i'`
    /// uses the antipodal partner ray; must be numerically zero.
    pub fn antipodal_identity_max_diff(&self, stream: &RandomStream, count: usize) -> f64 {
        let mut rng = stream.substream(stream.stream_id + STREAM_ANTIPODAL).rng();
        let mut max_diff = 0.0f64;
        for k in 0..count {
            let m = uniform_point(&mut rng);
            let i = k % self.rays.len();
            let anti = self.rays[i].neg();
            let diff = (self.jacobian(i, &m) - self.jacobian_of(&anti, &m)).abs();
            max_diff = max_diff.max(diff);
        }
        max_diff
    }

    /// Stratified Monte Carlo of one patch integral.
    pub fn patch_integral(
        &self,
        i: usize,
        samples: usize,
        stream: &RandomStream,
    ) -> (f64, f64) {
        let base = stream.stream_id + STREAM_PATCH_BASE + i as u64 * STREAM_PATCH_SPACING;
        let plan = strata_plan(samples);
        let parts: Vec<(f64, f64, usize)> = plan
            .par_iter()
            .map(|&(k, n)| {
                let mut rng = stream.substream(base + k).rng();
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for _ in 0..n {
                    let m = uniform_point(&mut rng);
                    let j = self.jacobian(i, &m);
                    sum += j;
                    sumsq += j * j;
                }
                (sum, sumsq, n)
            })
            .collect();
        mc_mean_stderr(&parts)
    }

    /// Full run: the antipodal identity gate, one covering-identity check per
    /// patch, and the Monte Carlo integral of the pointwise minimum.
    pub fn estimate(&self, samples: usize, stream: &RandomStream) -> Result<DeficitReport> {
        if samples < 10_000 {
            return Err(KsError::Domain(
                "deficit estimation needs at least 10^4 samples".into(),
            ));
        }
        let antipodal_max_diff = self.antipodal_identity_max_diff(stream, 128);
        if antipodal_max_diff > 1e-6 {
            return Err(KsError::Internal(format!(
                "antipodal Jacobian identity violated: max diff {antipodal_max_diff}"
            )));
        }
        let per_patch: Vec<PatchCheck> = (0..self.rays.len())
            .map(|i| {
                let (integral, se) = self.patch_integral(i, samples, stream);
                let ceiling = self.covering_ceiling();
                PatchCheck {
                    index: i,
                    ray: self.rays_int[i],
                    integral,
                    std_error: se,
                    rel_err_vs_identity: (integral - ceiling).abs() / ceiling,
                }
            })
            .collect();
        let plan = strata_plan(samples);
        let base = stream.stream_id + STREAM_MIN;
        let parts: Vec<(f64, f64, usize)> = plan
            .par_iter()
            .map(|&(k, n)| {
                let mut rng = stream.substream(base + k).rng();
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for _ in 0..n {
                    let m = uniform_point(&mut rng);
                    let j = self.j_min(&m);
                    sum += j;
                    sumsq += j * j;
                }
                (sum, sumsq, n)
            })
            .collect();
        let (estimate, std_error) = mc_mean_stderr(&parts);
        let min_patch = per_patch
            .iter()
            .map(|p| p.integral)
            .fold(f64::INFINITY, f64::min);
        let consistent = estimate >= 0.0 && estimate <= min_patch + 3.0 * std_error;
        Ok(DeficitReport {
            set_name: self.set_name.clone(),
            num_lines: self.rays.len(),
            theta0_rad: self.theta0,
            theta0_deg: self.theta0.to_degrees(),
            patch_radius_rad: self.patch_radius,
            samples,
            seed: stream.seed,
            estimate,
            std_error,
            estimate_minus_3se: estimate - 3.0 * std_error,
            covering_ceiling: self.covering_ceiling(),
            antipodal_max_diff,
            per_patch,
            consistent,
        })
    }
}

/// Per-patch covering-identity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchCheck {
    pub index: usize,
    pub ray: [i64; 3],
    pub integral: f64,
    pub std_error: f64,
    pub rel_err_vs_identity: f64,
}

/// Monte Carlo estimate of the integral of the minimum Jacobian, with the
/// analytic cross-checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeficitReport {
    pub set_name: String,
    pub num_lines: usize,
    pub theta0_rad: f64,
    pub theta0_deg: f64,
    pub patch_radius_rad: f64,
    pub samples: usize,
    pub seed: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub estimate_minus_3se: f64,
    /// `2 sin^2(theta0/4)`: the exact value of every single-patch integral
    /// and an upper bound for the minimum's integral.
    pub covering_ceiling: f64,
    pub antipodal_max_diff: f64,
    pub per_patch: Vec<PatchCheck>,
    pub consistent: bool,
}

/// The deficit bracket: the Monte Carlo lower bound against the upper bound
/// left by a regular colouring's covered measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub set_name: String,
    pub lower_bound_estimate: f64,
    pub lower_bound_std_error: f64,
    pub lower_minus_3se: f64,
    pub regular_domain_measure: f64,
    pub upper_bound: f64,
    pub consistent: bool,
}

/// Builds the bounds table from a deficit report and a regular colouring's
/// covered measure; bounds that cross signal a numerical bug.
pub fn deficit_summary(report: &DeficitReport, regular_measure: f64) -> Result<BoundsSummary> {
    if !(0.0..=1.0).contains(&regular_measure) {
        return Err(KsError::Domain(format!(
            "regular colouring measure {regular_measure} outside [0,1]"
        )));
    }
    let upper = 1.0 - regular_measure;
    let summary = BoundsSummary {
        set_name: report.set_name.clone(),
        lower_bound_estimate: report.estimate,
        lower_bound_std_error: report.std_error,
        lower_minus_3se: report.estimate_minus_3se,
        regular_domain_measure: regular_measure,
        upper_bound: upper,
        consistent: report.estimate < upper && report.consistent,
    };
    if !summary.consistent {
        return Err(KsError::Internal(format!(
            "deficit bounds inconsistent: lower {} vs upper {}",
            report.estimate, upper
        )));
    }
    Ok(summary)
}
