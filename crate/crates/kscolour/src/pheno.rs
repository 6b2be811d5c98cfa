//! Resolution-indexed phenomenological classification: each grid point is
//! classed by the colours its cap contains (`U0` all-zero, `U1` all-one, `D`
//! both, `Undefined` when the colouring's domain missed the cap entirely),
//! plus the downstream consumers of a classified map — the continuity-region
//! triad check and cap density profiles of the `D` region.
//!
//! The classes are a `delta`-approximation of the topological partition into
//! the two open continuity regions and the closed discontinuity region; they
//! converge as `delta -> 0` and samples grow, and every map records its
//! `delta`.

use crate::colouring::{random_triad, Colouring};
use crate::error::{KsError, Result};
use crate::sphere::{fibonacci_grid, uniform_cap_point, Cap, RandomStream, UnitVec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhenoClass {
    U0,
    U1,
    D,
    Undefined,
}

impl PhenoClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhenoClass::U0 => "U0",
            PhenoClass::U1 => "U1",
            PhenoClass::D => "D",
            PhenoClass::Undefined => "UNDEFINED",
        }
    }
}

/// Estimated measures of the classified regions (cell-count fractions).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhenoMeasures {
    pub u0: f64,
    pub u1: f64,
    pub d: f64,
    pub undefined: f64,
}

/// A classified grid at resolution `delta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhenoMap {
    pub colouring: String,
    pub delta: f64,
    pub samples_per_cap: usize,
    pub grid: Vec<[f64; 3]>,
    pub classes: Vec<PhenoClass>,
    pub measures: PhenoMeasures,
    /// Set when a dense (pseudo) colouring produced an empty cap, which its
    /// density contract forbids.
    pub density_inconsistency: bool,
    /// Chance that a cap whose minority colour has true fraction p was
    /// misclassified as pure: (1-p)^samples_per_cap.
    pub false_u_risk_at_1_percent: f64,
}

impl PhenoMap {
    pub fn points(&self) -> Vec<UnitVec> {
        self.grid
            .iter()
            .map(|p| UnitVec::new(p[0], p[1], p[2]).expect("grid points are unit"))
            .collect()
    }

    /// Long-format CSV: `x,y,z,class`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,class\n");
        for (p, c) in self.grid.iter().zip(&self.classes) {
            out.push_str(&format!("{},{},{},{}\n", p[0], p[1], p[2], c.as_str()));
        }
        out
    }
}

/// Classifies a deterministic Fibonacci grid of `grid_size` points: samples
/// `samples_per_cap` domain points of `colouring` in `Cap(n, delta)` for each
/// grid point `n` and records which colours showed up. Grid points are
/// processed in parallel, each on its own substream.
pub fn classify_phenomenological(
    colouring: &dyn Colouring,
    delta: f64,
    grid_size: usize,
    samples_per_cap: usize,
    stream: &RandomStream,
) -> Result<PhenoMap> {
    if !(delta > 0.0 && delta <= std::f64::consts::PI) {
        return Err(KsError::Domain(format!("delta {delta} outside (0, pi]")));
    }
    if samples_per_cap < 1 {
        return Err(KsError::Domain("samples_per_cap must be >= 1".into()));
    }
    let grid = fibonacci_grid(grid_size)?;
    let classes: Vec<PhenoClass> = grid
        .par_iter()
        .enumerate()
        .map(|(i, point)| {
            let cap = Cap::new(*point, delta).expect("delta validated");
            let mut rng = stream.substream(stream.stream_id + i as u64).rng();
            let samples = colouring.sample_in_domain(&cap, &mut rng, samples_per_cap);
            let mut saw = [false; 2];
            for (_, colour) in &samples {
                saw[colour.value() as usize] = true;
            }
            match (saw[0], saw[1]) {
                (true, true) => PhenoClass::D,
                (true, false) => PhenoClass::U0,
                (false, true) => PhenoClass::U1,
                (false, false) => PhenoClass::Undefined,
            }
        })
        .collect();
    let total = grid_size as f64;
    let count = |cl: PhenoClass| classes.iter().filter(|&&c| c == cl).count() as f64 / total;
    let measures = PhenoMeasures {
        u0: count(PhenoClass::U0),
        u1: count(PhenoClass::U1),
        d: count(PhenoClass::D),
        undefined: count(PhenoClass::Undefined),
    };
    let density_inconsistency = colouring.kind() == crate::colouring::ColouringKind::Pseudo
        && classes.iter().any(|&c| c == PhenoClass::Undefined);
    Ok(PhenoMap {
        colouring: colouring.name().into(),
        delta,
        samples_per_cap,
        grid: grid.iter().map(|p| p.to_array()).collect(),
        classes,
        measures,
        density_inconsistency,
        false_u_risk_at_1_percent: (1.0 - 0.01_f64).powi(samples_per_cap as i32),
    })
}

/// Bucketed spherical index over a classified grid, for nearest-cell and
/// radius queries.
pub struct SphereIndex {
    points: Vec<UnitVec>,
    classes: Vec<PhenoClass>,
    cell: f64,
    rows: Vec<Vec<Vec<u32>>>,
}

impl SphereIndex {
    pub fn new(map: &PhenoMap) -> Self {
        let points = map.points();
        let n = points.len();
        let cell = (4.0 * std::f64::consts::PI / n as f64).sqrt().max(1e-3);
        let n_rows = (std::f64::consts::PI / cell).ceil() as usize;
        let mut rows: Vec<Vec<Vec<u32>>> = (0..n_rows)
            .map(|r| {
                let theta_mid = (r as f64 + 0.5) * std::f64::consts::PI / n_rows as f64;
                let m = ((std::f64::consts::TAU * theta_mid.sin() / cell).ceil() as usize).max(1);
                vec![Vec::new(); m]
            })
            .collect();
        for (i, p) in points.iter().enumerate() {
            let (r, b) = Self::bucket_of(&rows, p);
            rows[r][b].push(i as u32);
        }
        Self {
            points,
            classes: map.classes.clone(),
            cell,
            rows,
        }
    }

    fn bucket_of(rows: &[Vec<Vec<u32>>], p: &UnitVec) -> (usize, usize) {
        let n_rows = rows.len();
        let theta = p.z().clamp(-1.0, 1.0).acos();
        let r = ((theta / std::f64::consts::PI * n_rows as f64) as usize).min(n_rows - 1);
        let m = rows[r].len();
        let phi = p.y().atan2(p.x()).rem_euclid(std::f64::consts::TAU);
        let b = ((phi / std::f64::consts::TAU * m as f64) as usize).min(m - 1);
        (r, b)
    }

    /// Visits every stored index within `radius` of `p` until `visit` returns
    /// true; returns whether it did.
    fn any_within(&self, p: &UnitVec, radius: f64, mut visit: impl FnMut(u32) -> bool) -> bool {
        let n_rows = self.rows.len();
        let theta = p.z().clamp(-1.0, 1.0).acos();
        let row_lo = (((theta - radius) / std::f64::consts::PI * n_rows as f64).floor() as i64)
            .max(0) as usize;
        let row_hi = (((theta + radius) / std::f64::consts::PI * n_rows as f64).ceil() as i64)
            .min(n_rows as i64 - 1) as usize;
        let cos_r = radius.cos();
        let phi = p.y().atan2(p.x()).rem_euclid(std::f64::consts::TAU);
        for r in row_lo..=row_hi {
            let m = self.rows[r].len();
            // azimuth half-width needed at this row's extreme colatitudes
            let row_theta_lo = r as f64 * std::f64::consts::PI / n_rows as f64;
            let row_theta_hi = (r as f64 + 1.0) * std::f64::consts::PI / n_rows as f64;
            let mut dphi = 0.0f64;
            let mut all = false;
            for rt in [row_theta_lo, row_theta_hi] {
                let (st, ct) = (rt.sin(), rt.cos());
                let (sp, cp) = (theta.sin(), theta.cos());
                let denom = st * sp;
                if denom < 1e-12 {
                    // a polar row: every azimuth is nearby
                    all = true;
                    break;
                }
                let x = (cos_r - ct * cp) / denom;
                if x <= -1.0 {
                    all = true;
                } else if x < 1.0 {
                    dphi = dphi.max(x.acos());
                }
                // x >= 1: this extreme contributes nothing
            }
            let buckets: Vec<usize> = if all || m == 1 {
                (0..m).collect()
            } else {
                let width = dphi + std::f64::consts::TAU / m as f64;
                let lo = ((phi - width) / std::f64::consts::TAU * m as f64).floor() as i64;
                let hi = ((phi + width) / std::f64::consts::TAU * m as f64).ceil() as i64;
                if (hi - lo) as usize >= m {
                    (0..m).collect()
                } else {
                    (lo..=hi).map(|b| b.rem_euclid(m as i64) as usize).collect()
                }
            };
            for b in buckets {
                for &i in &self.rows[r][b] {
                    if self.points[i as usize].angle_to(p) <= radius && visit(i) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Index of the nearest grid point.
    pub fn nearest(&self, p: &UnitVec) -> usize {
        let mut radius = 2.0 * self.cell;
        loop {
            let mut best: Option<(f64, u32)> = None;
            self.any_within(p, radius, |i| {
                let d = self.points[i as usize].angle_to(p);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, i));
                }
                false
            });
            if let Some((_, i)) = best {
                return i as usize;
            }
            radius *= 2.0;
            if radius > std::f64::consts::PI {
                // brute force fallback; unreachable for sane grids
                return (0..self.points.len())
                    .min_by(|&a, &b| {
                        self.points[a]
                            .angle_to(p)
                            .total_cmp(&self.points[b].angle_to(p))
                    })
                    .expect("non-empty grid");
            }
        }
    }

    pub fn class_of_nearest(&self, p: &UnitVec) -> PhenoClass {
        self.classes[self.nearest(p)]
    }

    /// Whether any cell of class `cl` lies within `radius` of `p`.
    pub fn class_within(&self, p: &UnitVec, radius: f64, cl: PhenoClass) -> bool {
        self.any_within(p, radius, |i| self.classes[i as usize] == cl)
    }
}

/// Result of checking the two conditions on triads confined to classified
/// continuity cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityTriadReport {
    pub colouring: String,
    pub delta: f64,
    pub triads_attempted: usize,
    pub qualifying_triads: usize,
    pub triad_violations: usize,
    pub pair_violations: usize,
}

/// Samples random triads and keeps those whose members are confined to the
/// classified continuity cells: around each member, every grid cell within
/// `2 * (grid gap) + delta` must carry one unanimous `U0` or `U1` class. The
/// unanimity radius exceeds the grid's covering gap, so a qualifying member
/// provably sits inside its true open region (a nearby region boundary would
/// put a differently-classed cell inside the radius); nearest-cell lookups
/// alone would miscolour members lying within a grid gap of a boundary.
/// Qualifying cell colours must sum to 2 on the triad and to at least 1 on
/// each pair.
///
/// Runs deterministic batches until `target_triads` qualify or the attempt
/// budget (64x the target) is spent; a map with no continuity cells (e.g. a
/// fully dense discontinuous colouring) yields zero qualifying triads and
/// passes vacuously.
pub fn check_continuity_triads(
    map: &PhenoMap,
    stream: &RandomStream,
    target_triads: usize,
) -> Result<ContinuityTriadReport> {
    if target_triads < 1 {
        return Err(KsError::Domain("target triad count must be >= 1".into()));
    }
    let index = SphereIndex::new(map);
    // conservative covering gap of the Fibonacci grid
    let grid_gap = 2.0 * (4.0 * std::f64::consts::PI / map.grid.len() as f64).sqrt();
    let unanimity_radius = 2.0 * grid_gap + map.delta;
    let has_u = map
        .classes
        .iter()
        .any(|&c| c == PhenoClass::U0 || c == PhenoClass::U1);
    let mut report = ContinuityTriadReport {
        colouring: map.colouring.clone(),
        delta: map.delta,
        triads_attempted: 0,
        qualifying_triads: 0,
        triad_violations: 0,
        pair_violations: 0,
    };
    if !has_u {
        return Ok(report);
    }
    let batch = target_triads.max(1024);
    let max_rounds = 64usize;
    for round in 0..max_rounds {
        if report.qualifying_triads >= target_triads {
            break;
        }
        let plan = crate::sphere::strata_plan(batch);
        let parts: Vec<(usize, usize, usize, usize)> = plan
            .par_iter()
            .map(|&(k, n)| {
                let id = stream.stream_id + (round as u64) * 1024 + k;
                let mut rng = stream.substream(id).rng();
                let (mut attempted, mut qualifying, mut tv, mut pv) = (0, 0, 0, 0);
                for _ in 0..n {
                    attempted += 1;
                    let triad = random_triad(&mut rng);
                    let mut colours = [0u8; 3];
                    let mut ok = true;
                    for (slot, v) in colours.iter_mut().zip(triad.iter()) {
                        let cls = index.class_of_nearest(v);
                        match cls {
                            PhenoClass::U0 => *slot = 0,
                            PhenoClass::U1 => *slot = 1,
                            _ => {
                                ok = false;
                                break;
                            }
                        }
                        if index.any_within(v, unanimity_radius, |i| {
                            index.classes[i as usize] != cls
                        }) {
                            ok = false;
                            break;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    qualifying += 1;
                    if colours.iter().map(|&c| c as u32).sum::<u32>() != 2 {
                        tv += 1;
                    }
                    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                        if colours[i] + colours[j] < 1 {
                            pv += 1;
                        }
                    }
                }
                (attempted, qualifying, tv, pv)
            })
            .collect();
        for (a, q, tv, pv) in parts {
            report.triads_attempted += a;
            report.qualifying_triads += q;
            report.triad_violations += tv;
            report.pair_violations += pv;
        }
        if report.qualifying_triads == 0 && round >= 2 {
            // continuity cells exist but qualifying triads are vanishingly
            // rare; stop burning attempts
            break;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DensityVerdict {
    CoreLike,
    CrustLike,
}

/// Per-radius estimates of the `D`-cell fraction of caps around a center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    pub colouring: String,
    pub center: [f64; 3],
    pub radii: Vec<f64>,
    pub fractions: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples_per_radius: usize,
    pub verdict: DensityVerdict,
}

/// Fraction of the map classed `D` (by nearest cell) in `Cap(center, radius)`
/// for each radius, with binomial standard errors. `CoreLike` when every
/// fraction is at least 0.9.
pub fn density_profile(
    map: &PhenoMap,
    center: &UnitVec,
    radii: &[f64],
    samples: usize,
    stream: &RandomStream,
) -> Result<DensityProfile> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| r <= 0.0)
    {
        return Err(KsError::Domain(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    if samples < 1 {
        return Err(KsError::Domain("samples must be >= 1".into()));
    }
    let index = SphereIndex::new(map);
    let mut fractions = Vec::with_capacity(radii.len());
    let mut errors = Vec::with_capacity(radii.len());
    for (ri, &radius) in radii.iter().enumerate() {
        let cap = Cap::new(*center, radius)?;
        let plan = crate::sphere::strata_plan(samples);
        let hits: Vec<usize> = plan
            .par_iter()
            .map(|&(k, n)| {
                let id = stream.stream_id + (ri as u64) * 1024 + k;
                let mut rng = stream.substream(id).rng();
                (0..n)
                    .filter(|_| {
                        let p = uniform_cap_point(&cap, &mut rng);
                        index.class_of_nearest(&p) == PhenoClass::D
                    })
                    .count()
            })
            .collect();
        let hit: usize = hits.iter().sum();
        let p = hit as f64 / samples as f64;
        fractions.push(p);
        errors.push((p * (1.0 - p) / samples as f64).sqrt());
    }
    let verdict = if fractions.iter().all(|&f| f >= 0.9) {
        DensityVerdict::CoreLike
    } else {
        DensityVerdict::CrustLike
    };
    Ok(DensityProfile {
        colouring: map.colouring.clone(),
        center: center.to_array(),
        radii: radii.to_vec(),
        fractions,
        std_errors: errors,
        samples_per_radius: samples,
        verdict,
    })
}
