//! Finite ray sets, their exact orthogonality graphs, and a complete
//! colourability decision procedure.
//!
//! A set is *colourable* when some assignment `f: rays -> {0,1}` satisfies
//! both constraint families induced by exact integer orthogonality:
//!
//! * every mutually-orthogonal triple sums to exactly 2,
//! * every orthogonal pair sums to at least 1.
//!
//! Nothing else is assumed — in particular no rule about linear combinations
//! of rays. `Uncolourable` is returned only after the backtracking search has
//! exhausted the whole assignment space.

use crate::error::{KsError, Result};
use crate::sphere::UnitVec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

/// A named finite collection of integer rays, antipodally canonicalized
/// (gcd-reduced, first non-zero coordinate positive), duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RaySetFile", into = "RaySetFile")]
pub struct RaySet {
    name: String,
    source: String,
    rays: Vec<[i64; 3]>,
}

/// The on-disk JSON schema: `{"name", "source", "rays": [[x,y,z], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RaySetFile {
    name: String,
    source: String,
    rays: Vec<[i64; 3]>,
}

impl TryFrom<RaySetFile> for RaySet {
    type Error = KsError;

    fn try_from(f: RaySetFile) -> Result<Self> {
        RaySet::new(f.name, f.source, f.rays)
    }
}

impl From<RaySet> for RaySetFile {
    fn from(s: RaySet) -> Self {
        RaySetFile {
            name: s.name,
            source: s.source,
            rays: s.rays,
        }
    }
}

fn gcd3(a: i64, b: i64, c: i64) -> i64 {
    num_integer::gcd(num_integer::gcd(a.abs(), b.abs()), c.abs())
}

/// Canonical line representative of a non-zero integer triple.
pub fn canonical_ray(r: [i64; 3]) -> Result<[i64; 3]> {
    if r == [0, 0, 0] {
        return Err(KsError::Parse("ray (0,0,0) is not a direction".into()));
    }
    let g = gcd3(r[0], r[1], r[2]);
    let mut r = [r[0] / g, r[1] / g, r[2] / g];
    let lead = r.iter().copied().find(|&c| c != 0).unwrap();
    if lead < 0 {
        r = [-r[0], -r[1], -r[2]];
    }
    Ok(r)
}

impl RaySet {
    /// Canonicalizes every ray; rejects zero rays and rays that collide after
    /// canonicalization.
    pub fn new(
        name: impl Into<String>,
        source: impl Into<String>,
        rays: Vec<[i64; 3]>,
    ) -> Result<Self> {
        let mut canon = Vec::with_capacity(rays.len());
        let mut seen = BTreeSet::new();
        for r in rays {
            let c = canonical_ray(r)?;
            if !seen.insert(c) {
                return Err(KsError::Parse(format!(
                    "duplicate ray ({},{},{}) after canonicalization",
                    c[0], c[1], c[2]
                )));
            }
            canon.push(c);
        }
        Ok(Self {
            name: name.into(),
            source: source.into(),
            rays: canon,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn rays(&self) -> &[[i64; 3]] {
        &self.rays
    }

    pub fn unit_vecs(&self) -> Vec<UnitVec> {
        self.rays
            .iter()
            .map(|r| {
                UnitVec::new(r[0] as f64, r[1] as f64, r[2] as f64)
                    .expect("rays are non-zero")
            })
            .collect()
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ray set serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    /// Subset by index, preserving name metadata.
    pub fn subset(&self, indices: &[usize]) -> Result<RaySet> {
        let rays = indices.iter().map(|&i| self.rays[i]).collect();
        RaySet::new(format!("{}-subset", self.name), self.source.clone(), rays)
    }

    /// Exact image under the rotation of an integer quaternion; the graph
    /// and the colourability verdict are invariant under this.
    pub fn rotated_by_quaternion(&self, a: i64, b: i64, c: i64, d: i64) -> Result<RaySet> {
        if (a, b, c, d) == (0, 0, 0, 0) {
            return Err(KsError::Domain("zero quaternion".into()));
        }
        let (a, b, c, d) = (a as i128, b as i128, c as i128, d as i128);
        let m: [[i128; 3]; 3] = [
            [
                a * a + b * b - c * c - d * d,
                2 * (b * c - a * d),
                2 * (b * d + a * c),
            ],
            [
                2 * (b * c + a * d),
                a * a - b * b + c * c - d * d,
                2 * (c * d - a * b),
            ],
            [
                2 * (b * d - a * c),
                2 * (c * d + a * b),
                a * a - b * b - c * c + d * d,
            ],
        ];
        let rays = self
            .rays
            .iter()
            .map(|r| {
                let v = [r[0] as i128, r[1] as i128, r[2] as i128];
                let w = [
                    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
                    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
                    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
                ];
                let g = {
                    let gg = |x: i128, y: i128| num_integer::gcd(x.abs(), y.abs());
                    gg(gg(w[0], w[1]), w[2])
                };
                let w = [w[0] / g, w[1] / g, w[2] / g];
                for &comp in &w {
                    if comp > i64::MAX as i128 || comp < i64::MIN as i128 {
                        return Err(KsError::Domain(
                            "rotated ray exceeds 64-bit coordinates".into(),
                        ));
                    }
                }
                Ok([w[0] as i64, w[1] as i64, w[2] as i64])
            })
            .collect::<Result<Vec<_>>>()?;
        RaySet::new(
            format!("{}-rotated", self.name),
            self.source.clone(),
            rays,
        )
    }

    /// Minimum angle between distinct ray lines, in radians.
    pub fn min_angle(&self) -> Result<f64> {
        Ok(self.min_angle_attained()?.0)
    }

    /// Minimum line angle together with the first attaining index pair.
    pub fn min_angle_attained(&self) -> Result<(f64, (usize, usize))> {
        if self.rays.len() < 2 {
            return Err(KsError::Domain(
                "min_angle requires at least 2 rays".into(),
            ));
        }
        let mut best = f64::INFINITY;
        let mut arg = (0, 0);
        for i in 0..self.rays.len() {
            for j in (i + 1)..self.rays.len() {
                let a = line_angle(self.rays[i], self.rays[j]);
                if a < best {
                    best = a;
                    arg = (i, j);
                }
            }
        }
        Ok((best, arg))
    }

    /// Exact pair and triad lists, triads enumerated from pairs by
    /// mutual-orthogonality closure.
    pub fn build_graph(&self) -> OrthogonalityGraph {
        let n = self.rays.len();
        let mut pairs = Vec::new();
        let mut orth = vec![vec![false; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if dot_i128(self.rays[i], self.rays[j]) == 0 {
                    pairs.push((i, j));
                    orth[i][j] = true;
                }
            }
        }
        let mut triads = Vec::new();
        for &(i, j) in &pairs {
            for k in (j + 1)..n {
                if orth[i][k] && orth[j][k] {
                    triads.push((i, j, k));
                }
            }
        }
        OrthogonalityGraph { n, pairs, triads }
    }
}

fn dot_i128(a: [i64; 3], b: [i64; 3]) -> i128 {
    a[0] as i128 * b[0] as i128 + a[1] as i128 * b[1] as i128 + a[2] as i128 * b[2] as i128
}

/// Acute angle between the lines of two integer rays.
pub fn line_angle(a: [i64; 3], b: [i64; 3]) -> f64 {
    let d = dot_i128(a, b) as f64;
    let na = (dot_i128(a, a) as f64).sqrt();
    let nb = (dot_i128(b, b) as f64).sqrt();
    (d.abs() / (na * nb)).clamp(0.0, 1.0).acos()
}

/// Exact orthogonality structure of a ray set.
#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityGraph {
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
    pub triads: Vec<(usize, usize, usize)>,
}

/// Verdict of the complete search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Colourability {
    Colourable,
    Uncolourable,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub propagations: u64,
    #[serde(skip)]
    pub wall: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColourabilityResult {
    pub status: Colourability,
    /// One satisfying assignment (colour per ray index), when colourable.
    pub witness: Option<Vec<u8>>,
    /// Number of satisfying assignments (capped), when enumeration was asked.
    pub witness_count: Option<u64>,
    pub stats: SearchStats,
}

/// Cap on enumeration counting, to bound pathological outputs.
pub const ENUMERATION_CAP: u64 = 1 << 32;

struct Searcher<'g> {
    graph: &'g OrthogonalityGraph,
    pair_nb: Vec<Vec<usize>>,
    tri_of: Vec<Vec<usize>>,
    order: Vec<usize>,
    asg: Vec<Option<u8>>,
    nodes: u64,
    propagations: u64,
    count: u64,
    cap: u64,
    witness: Option<Vec<u8>>,
    enumerate: bool,
}

impl<'g> Searcher<'g> {
    fn new(graph: &'g OrthogonalityGraph, enumerate: bool) -> Self {
        let n = graph.n;
        let mut pair_nb = vec![Vec::new(); n];
        for &(i, j) in &graph.pairs {
            pair_nb[i].push(j);
            pair_nb[j].push(i);
        }
        let mut tri_of = vec![Vec::new(); n];
        for (t, &(i, j, k)) in graph.triads.iter().enumerate() {
            tri_of[i].push(t);
            tri_of[j].push(t);
            tri_of[k].push(t);
        }
        // most-constrained-first: descending triad degree, ties by index
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(tri_of[v].len()), v));
        Self {
            graph,
            pair_nb,
            tri_of,
            order,
            asg: vec![None; n],
            nodes: 0,
            propagations: 0,
            count: 0,
            cap: ENUMERATION_CAP,
            witness: None,
            enumerate,
        }
    }

    /// Unit propagation from the assignments queued on `trail`; extends the
    /// trail with forced assignments. Returns false on conflict.
    fn propagate(&mut self, trail: &mut Vec<usize>) -> bool {
        let mut qi = 0;
        while qi < trail.len() {
            let v = trail[qi];
            qi += 1;
            if self.asg[v] == Some(0) {
                for idx in 0..self.pair_nb[v].len() {
                    let w = self.pair_nb[v][idx];
                    match self.asg[w] {
                        Some(0) => return false,
                        None => {
                            self.asg[w] = Some(1);
                            self.propagations += 1;
                            trail.push(w);
                        }
                        Some(_) => {}
                    }
                }
            }
            for ti in 0..self.tri_of[v].len() {
                let t = self.tri_of[v][ti];
                let (i, j, k) = self.graph.triads[t];
                let vals = [self.asg[i], self.asg[j], self.asg[k]];
                let zeros = vals.iter().filter(|x| **x == Some(0)).count();
                let ones = vals.iter().filter(|x| **x == Some(1)).count();
                if zeros > 1 || ones > 2 {
                    return false;
                }
                let force = if zeros == 1 {
                    Some(1)
                } else if ones == 2 {
                    Some(0)
                } else {
                    None
                };
                if let Some(val) = force {
                    for u in [i, j, k] {
                        if self.asg[u].is_none() {
                            self.asg[u] = Some(val);
                            self.propagations += 1;
                            trail.push(u);
                        }
                    }
                }
            }
        }
        true
    }

    fn verify_complete(&self) -> bool {
        let asg: Vec<u8> = self.asg.iter().map(|a| a.unwrap()).collect();
        verify_assignment(self.graph, &asg)
    }

    /// Returns true when the search should stop early (first witness found
    /// in decide mode, or the enumeration cap was hit).
    fn search(&mut self) -> bool {
        self.nodes += 1;
        let next = self.order.iter().copied().find(|&u| self.asg[u].is_none());
        let v = match next {
            Some(v) => v,
            None => {
                if self.verify_complete() {
                    self.count += 1;
                    if self.witness.is_none() {
                        self.witness = Some(self.asg.iter().map(|a| a.unwrap()).collect());
                    }
                    return !self.enumerate || self.count >= self.cap;
                }
                return false;
            }
        };
        for val in [0u8, 1u8] {
            let mut trail = vec![v];
            self.asg[v] = Some(val);
            if self.propagate(&mut trail) && self.search() {
                return true;
            }
            for &u in &trail {
                self.asg[u] = None;
            }
        }
        false
    }
}

/// Complete backtracking search with unit propagation. `Uncolourable` is
/// returned only after the search space has been exhausted.
pub fn decide_colourability(graph: &OrthogonalityGraph) -> ColourabilityResult {
    run_search(graph, false)
}

/// Like [`decide_colourability`], but counts every satisfying assignment
/// (capped at [`ENUMERATION_CAP`]).
pub fn enumerate_colourings(graph: &OrthogonalityGraph) -> ColourabilityResult {
    run_search(graph, true)
}

fn run_search(graph: &OrthogonalityGraph, enumerate: bool) -> ColourabilityResult {
    let start = Instant::now();
    let mut s = Searcher::new(graph, enumerate);
    s.search();
    let status = if s.witness.is_some() {
        Colourability::Colourable
    } else {
        Colourability::Uncolourable
    };
    debug_assert!(
        s.witness
            .as_ref()
            .map_or(true, |w| verify_assignment(graph, w)),
        "witness failed independent re-check"
    );
    ColourabilityResult {
        status,
        witness: s.witness,
        witness_count: enumerate.then_some(s.count),
        stats: SearchStats {
            nodes: s.nodes,
            propagations: s.propagations,
            wall: start.elapsed(),
        },
    }
}

/// Independent constraint re-check of a complete assignment.
pub fn verify_assignment(graph: &OrthogonalityGraph, asg: &[u8]) -> bool {
    if asg.len() != graph.n || asg.iter().any(|&v| v > 1) {
        return false;
    }
    graph
        .pairs
        .iter()
        .all(|&(i, j)| asg[i] as u32 + asg[j] as u32 >= 1)
        && graph
            .triads
            .iter()
            .all(|&(i, j, k)| asg[i] as u32 + asg[j] as u32 + asg[k] as u32 == 2)
}

/// Plain exhaustive oracle over all `2^n` assignments; usable for `n <= 25`.
/// Returns the verdict and the exact number of satisfying assignments.
pub fn brute_force_colourability(graph: &OrthogonalityGraph) -> Result<(Colourability, u64)> {
    if graph.n > 25 {
        return Err(KsError::Domain(format!(
            "brute-force oracle limited to 25 rays, got {}",
            graph.n
        )));
    }
    let mut count = 0u64;
    'mask: for mask in 0u64..(1u64 << graph.n) {
        for &(i, j) in &graph.pairs {
            if mask >> i & 1 == 0 && mask >> j & 1 == 0 {
                continue 'mask;
            }
        }
        for &(i, j, k) in &graph.triads {
            if (mask >> i & 1) + (mask >> j & 1) + (mask >> k & 1) != 2 {
                continue 'mask;
            }
        }
        count += 1;
    }
    let status = if count > 0 {
        Colourability::Colourable
    } else {
        Colourability::Uncolourable
    };
    Ok((status, count))
}
