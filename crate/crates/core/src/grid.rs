//! Antipodal point sets on the unit sphere.
//!
//! A [`SphericalGrid`] is an immutable set of `N` unit vectors in which every
//! point has an exact antipodal partner. Grids are read from plain-text files
//! (one `x y z` triple per line, `#` comments) or generated as an antipodal
//! Fibonacci lattice when no published design is at hand.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Tolerance for `|p + q|` when matching a point with its antipode.
pub const ANTIPODE_TOLERANCE: f64 = 1e-9;
/// Points further than this from unit norm are rejected on load.
pub const NORM_REJECT_TOLERANCE: f64 = 1e-6;
const PAIRING_QUANTUM: f64 = 1e-6;

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn neg(a: &Vec3) -> Vec3 {
    [-a[0], -a[1], -a[2]]
}

/// Spherical angle between two unit vectors, `2 asin(|u - v| / 2)`.
///
/// The chord form is well conditioned at both small and near-antipodal
/// separations; the argument is clamped so rounding never produces NaN.
pub fn geodesic_angle(u: &Vec3, v: &Vec3) -> f64 {
    let d = [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
    let half_chord = (0.5 * norm(&d)).clamp(0.0, 1.0);
    2.0 * half_chord.asin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGrid {
    points: Vec<Vec3>,
    antipode: Vec<usize>,
    /// Pair index of each site.
    pair_of: Vec<usize>,
    /// Whether the site is its pair's representative (lexicographically larger triple).
    is_representative: Vec<bool>,
    /// `(representative, partner)` per pair, ordered by the smaller site index.
    pairs: Vec<(usize, usize)>,
    spacing_h: f64,
    source_tag: String,
    fingerprint: [u8; 32],
}

impl SphericalGrid {
    /// Validates `points`, renormalizes near-unit vectors, and computes the
    /// antipodal pairing.
    pub fn from_points(mut points: Vec<Vec3>, source_tag: impl Into<String>) -> Result<Self> {
        let n = points.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "grid must have a positive even number of points, got {n}"
            )));
        }
        for (index, p) in points.iter_mut().enumerate() {
            let len = norm(p);
            if !len.is_finite() || (len - 1.0).abs() > NORM_REJECT_TOLERANCE {
                return Err(Error::NotUnitNorm { index, norm: len });
            }
            // Leave points that are unit to rounding untouched so files round-trip.
            if (len - 1.0).abs() > 4.0 * f64::EPSILON {
                for c in p.iter_mut() {
                    *c /= len;
                }
            }
        }

        let antipode = pair_antipodes(&points)?;
        let mut pair_of = vec![usize::MAX; n];
        let mut is_representative = vec![false; n];
        let mut pairs = Vec::with_capacity(n / 2);
        for i in 0..n {
            let j = antipode[i];
            if i < j {
                let rep = if lexicographic_gt(&points[i], &points[j]) {
                    i
                } else {
                    j
                };
                let other = if rep == i { j } else { i };
                pair_of[i] = pairs.len();
                pair_of[j] = pairs.len();
                is_representative[rep] = true;
                pairs.push((rep, other));
            }
        }

        let fingerprint = fingerprint(&points);
        Ok(SphericalGrid {
            spacing_h: (4.0 * PI / n as f64).sqrt(),
            points,
            antipode,
            pair_of,
            is_representative,
            pairs,
            source_tag: source_tag.into(),
            fingerprint,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.points[i]
    }

    /// Index of the antipodal partner of site `i`.
    pub fn antipode(&self, i: usize) -> usize {
        self.antipode[i]
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_of(&self, i: usize) -> usize {
        self.pair_of[i]
    }

    pub fn is_representative(&self, i: usize) -> bool {
        self.is_representative[i]
    }

    /// Mean lattice spacing `h = sqrt(4 pi / N)` in radians.
    pub fn spacing_h(&self) -> f64 {
        self.spacing_h
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    /// SHA-256 over the point coordinates in file order.
    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn content_hash(&self) -> String {
        hex::encode(self.fingerprint)
    }

    /// Reads a grid file: one whitespace-separated `x y z` triple per line.
    /// A `# source: <tag>` comment sets the source tag.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut tag = String::from("file");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(t) = comment.trim().strip_prefix("source:") {
                    tag = t.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let coords: Vec<&str> = line.split_whitespace().collect();
            if coords.len() != 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 3 coordinates, found {}", coords.len()),
                });
            }
            let mut p = [0.0; 3];
            for (c, s) in p.iter_mut().zip(&coords) {
                *c = s.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("not a number: {s:?}"),
                })?;
            }
            points.push(p);
        }
        Self::from_points(points, tag)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        let _ = writeln!(out, "# source: {}", self.source_tag);
        let _ = writeln!(out, "# N: {}", self.len());
        for p in &self.points {
            let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Antipodal Fibonacci lattice with `N = 2 * n_pairs` points.
///
/// `n_pairs` golden-angle spiral points are placed on the open upper
/// hemisphere at heights `z_k = (k + 1/2) / n_pairs` (never on the equator),
/// and each is followed by its exact negation, so `a(2k) = 2k + 1`.
pub fn generate_fibonacci_antipodal(n_pairs: usize) -> Result<SphericalGrid> {
    if n_pairs < 3 {
        return Err(Error::InvalidArgument(format!(
            "fibonacci grid needs at least 3 pairs, got {n_pairs}"
        )));
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let mut points = Vec::with_capacity(2 * n_pairs);
    for k in 0..n_pairs {
        let z = (k as f64 + 0.5) / n_pairs as f64;
        let r = (1.0 - z * z).sqrt();
        let lon = golden_angle * k as f64;
        let p = [r * lon.cos(), r * lon.sin(), z];
        points.push(p);
        points.push(neg(&p));
    }
    SphericalGrid::from_points(points, "fibonacci-antipodal")
}

fn lexicographic_gt(a: &Vec3, b: &Vec3) -> bool {
    for k in 0..3 {
        if a[k] != b[k] {
            return a[k] > b[k];
        }
    }
    false
}

fn quantize(p: &Vec3) -> [i64; 3] {
    [
        (p[0] / PAIRING_QUANTUM).round() as i64,
        (p[1] / PAIRING_QUANTUM).round() as i64,
        (p[2] / PAIRING_QUANTUM).round() as i64,
    ]
}

fn pair_antipodes(points: &[Vec3]) -> Result<Vec<usize>> {
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        buckets.entry(quantize(p)).or_default().push(i);
    }

    let mut antipode = vec![usize::MAX; points.len()];
    for (i, p) in points.iter().enumerate() {
        let target = neg(p);
        let key = quantize(&target);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let k = [key[0] + dx, key[1] + dy, key[2] + dz];
                    let Some(cands) = buckets.get(&k) else {
                        continue;
                    };
                    for &j in cands {
                        let q = &points[j];
                        let err = norm(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]);
                        if j != i && err < ANTIPODE_TOLERANCE && best.is_none_or(|(_, e)| err < e) {
                            best = Some((j, err));
                        }
                    }
                }
            }
        }
        match best {
            Some((j, _)) => antipode[i] = j,
            None => return Err(Error::NotAntipodal { index: i }),
        }
    }

    // Duplicate points can break the involution.
    for i in 0..points.len() {
        if antipode[antipode[i]] != i {
            return Err(Error::NotAntipodal { index: i });
        }
    }
    Ok(antipode)
}

fn fingerprint(points: &[Vec3]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((points.len() as u64).to_le_bytes());
    for p in points {
        for c in p {
            hasher.update(c.to_bits().to_le_bytes());
        }
    }
    hasher.finalize().into()
}

/// The six axis directions `+-x, +-y, +-z` in that order.
pub fn octahedron() -> SphericalGrid {
    let pts = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    SphericalGrid::from_points(pts, "octahedron").expect("octahedron is antipodal")
}
