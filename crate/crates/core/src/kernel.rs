//! Discrete delta-function kernels and the fixed-range interaction table.
//!
//! For a jump angle `theta` every ordered site pair `(i, j)` whose geodesic
//! separation lies within `w * h` of `theta` interacts with weight
//! `phi((theta_ij - theta) / h)`. The table stores those pairs as sparse
//! rows together with the prefactor `4 / (sin(theta) N^2 h)` that turns a
//! weighted pair count into a success probability.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{geodesic_angle, SphericalGrid};
use crate::spatial::LatitudeBins;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelShape {
    /// `(1 / 2w) (1 + cos(pi x / w))` on `|x| < w`.
    Cosine,
    /// `(1 / w) (1 - |x| / w)` on `|x| < w`.
    Hat,
}

impl KernelShape {
    fn code(self) -> u8 {
        match self {
            KernelShape::Cosine => 0,
            KernelShape::Hat => 1,
        }
    }
}

/// Even, nonnegative, unit-mass bump with support `|x| < half_width`
/// (in units of the grid spacing `h`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaKernel {
    pub shape: KernelShape,
    pub half_width: f64,
}

impl Default for DeltaKernel {
    fn default() -> Self {
        DeltaKernel {
            shape: KernelShape::Cosine,
            half_width: 2.0,
        }
    }
}

impl DeltaKernel {
    pub fn new(shape: KernelShape, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel half-width must be positive, got {half_width}"
            )));
        }
        Ok(DeltaKernel { shape, half_width })
    }

    pub fn phi(&self, x: f64) -> f64 {
        let w = self.half_width;
        let ax = x.abs();
        if ax >= w {
            return 0.0;
        }
        match self.shape {
            KernelShape::Cosine => (1.0 + (PI * x / w).cos()) / (2.0 * w),
            KernelShape::Hat => (1.0 - ax / w) / w,
        }
    }
}

/// The default kernel `phi(x) = (1/4)(1 + cos(pi x / 2))` for `|x| <= 2`.
pub fn phi(x: f64) -> f64 {
    DeltaKernel::default().phi(x)
}

/// Admissible jump angles for a grid and kernel: `[theta_min, pi - theta_min]`.
///
/// `theta_min = max(4h, 0.01)`, raised to just above `w h` for wide kernels
/// so the annulus never reaches a site itself or its antipode.
pub fn admissible_range(grid: &SphericalGrid, kernel: &DeltaKernel) -> (f64, f64) {
    let h = grid.spacing_h();
    let wh = kernel.half_width * h;
    let mut min = (4.0 * h).max(0.01);
    if min <= wh {
        min = wh * (1.0 + 1e-9);
    }
    (min, PI - min)
}

pub fn check_theta(grid: &SphericalGrid, kernel: &DeltaKernel, theta: f64) -> Result<()> {
    let (min, max) = admissible_range(grid, kernel);
    if theta.is_finite() && theta >= min && theta <= max {
        Ok(())
    } else {
        Err(Error::ThetaUnresolved { theta, min, max })
    }
}

#[derive(Debug, Clone)]
pub struct InteractionTable {
    grid: Arc<SphericalGrid>,
    theta: f64,
    kernel: DeltaKernel,
    prefactor: f64,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl PartialEq for InteractionTable {
    fn eq(&self, other: &Self) -> bool {
        self.grid.fingerprint() == other.grid.fingerprint()
            && self.theta.to_bits() == other.theta.to_bits()
            && self.kernel == other.kernel
            && self.prefactor.to_bits() == other.prefactor.to_bits()
            && self.offsets == other.offsets
            && self.cols == other.cols
            && self
                .weights
                .iter()
                .map(|w| w.to_bits())
                .eq(other.weights.iter().map(|w| w.to_bits()))
    }
}

type Row = Vec<(u32, f64)>;

fn pair_weight(
    grid: &SphericalGrid,
    kernel: &DeltaKernel,
    theta: f64,
    i: usize,
    j: usize,
) -> Option<f64> {
    // A site never interacts with itself or its antipode; on admissible grids
    // both lie outside the annulus anyway.
    if i == j || j == grid.antipode(i) {
        return None;
    }
    let h = grid.spacing_h();
    let x = (geodesic_angle(grid.point(i), grid.point(j)) - theta) / h;
    if x.abs() >= kernel.half_width {
        return None;
    }
    let w = kernel.phi(x);
    (w > 0.0).then_some(w)
}

/// Builds the table with latitude-band binning, parallel over sites.
pub fn build_interaction(
    grid: Arc<SphericalGrid>,
    theta: f64,
    kernel: DeltaKernel,
) -> Result<InteractionTable> {
    check_theta(&grid, &kernel, theta)?;
    Ok(build_interaction_unchecked(grid, theta, kernel))
}

/// [`build_interaction`] without the admissible-angle check, for hand-sized
/// grids such as the octahedron where `4h` exceeds every angle. Self and
/// antipodal pairs are still excluded.
pub fn build_interaction_unchecked(
    grid: Arc<SphericalGrid>,
    theta: f64,
    kernel: DeltaKernel,
) -> InteractionTable {
    let h = grid.spacing_h();
    let reach = kernel.half_width * h;
    let bins = LatitudeBins::new(grid.points(), h);
    let rows: Vec<Row> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            bins.for_each_candidate(grid.point(i), theta - reach, theta + reach, |j| {
                if let Some(w) = pair_weight(&grid, &kernel, theta, i, j) {
                    row.push((j as u32, w));
                }
            });
            row.sort_unstable_by_key(|e| e.0);
            row
        })
        .collect();
    InteractionTable::from_rows(grid, theta, kernel, rows)
}

/// Reference `O(N^2)` construction scanning every ordered pair.
pub fn build_interaction_brute_force(
    grid: Arc<SphericalGrid>,
    theta: f64,
    kernel: DeltaKernel,
) -> Result<InteractionTable> {
    check_theta(&grid, &kernel, theta)?;
    let rows: Vec<Row> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            (0..grid.len())
                .filter_map(|j| pair_weight(&grid, &kernel, theta, i, j).map(|w| (j as u32, w)))
                .collect()
        })
        .collect();
    Ok(InteractionTable::from_rows(grid, theta, kernel, rows))
}

impl InteractionTable {
    fn from_rows(
        grid: Arc<SphericalGrid>,
        theta: f64,
        kernel: DeltaKernel,
        rows: Vec<Row>,
    ) -> Self {
        let n = grid.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for row in rows {
            for (j, w) in row {
                cols.push(j);
                weights.push(w);
            }
            offsets.push(cols.len());
        }
        let prefactor = 4.0 / (theta.sin() * (n as f64).powi(2) * grid.spacing_h());
        InteractionTable {
            grid,
            theta,
            kernel,
            prefactor,
            offsets,
            cols,
            weights,
        }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kernel(&self) -> &DeltaKernel {
        &self.kernel
    }

    /// `4 / (sin(theta) N^2 h)`.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[a..b], &self.weights[a..b])
    }

    pub fn neighbor_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Number of stored ordered pairs.
    pub fn n_entries(&self) -> usize {
        self.cols.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_j s_j w_ij` over row `i`.
    #[inline]
    pub fn weighted_sum(&self, i: usize, s: &[u8]) -> f64 {
        let (cols, ws) = self.row(i);
        cols.iter()
            .zip(ws)
            .map(|(&j, &w)| w * f64::from(s[j as usize]))
            .sum()
    }

    /// `sum_j (1 - s_j) w_ij` over row `i`.
    #[inline]
    pub fn weighted_complement_sum(&self, i: usize, s: &[u8]) -> f64 {
        let (cols, ws) = self.row(i);
        cols.iter()
            .zip(ws)
            .map(|(&j, &w)| w * f64::from(1 - s[j as usize]))
            .sum()
    }

    pub fn same_grid(&self, grid: &SphericalGrid) -> bool {
        self.grid.fingerprint() == grid.fingerprint()
    }
}

const CACHE_MAGIC: &[u8; 8] = b"GHITABLE";
const CACHE_VERSION: u32 = 1;

fn cache_key(grid: &SphericalGrid, theta: f64, kernel: &DeltaKernel) -> String {
    let mut hasher = Sha256::new();
    hasher.update(grid.fingerprint());
    hasher.update(theta.to_bits().to_le_bytes());
    hasher.update([kernel.shape.code()]);
    hasher.update(kernel.half_width.to_bits().to_le_bytes());
    hex::encode(&hasher.finalize()[..12])
}

pub fn cache_path(dir: &Path, grid: &SphericalGrid, theta: f64, kernel: &DeltaKernel) -> PathBuf {
    dir.join(format!(
        "table-v{CACHE_VERSION}-{}.bin",
        cache_key(grid, theta, kernel)
    ))
}

/// Loads the table from `dir` when a matching cache file exists, otherwise
/// builds it and writes the cache.
pub fn build_interaction_cached(
    grid: Arc<SphericalGrid>,
    theta: f64,
    kernel: DeltaKernel,
    dir: &Path,
) -> Result<InteractionTable> {
    check_theta(&grid, &kernel, theta)?;
    let path = cache_path(dir, &grid, theta, &kernel);
    if let Ok(table) = InteractionTable::read_cache(&path, grid.clone(), theta, kernel) {
        return Ok(table);
    }
    let table = build_interaction(grid, theta, kernel)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    table.write_cache(&path)?;
    Ok(table)
}

impl InteractionTable {
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.cols.len() * 12 + self.offsets.len() * 8);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(self.grid.fingerprint());
        buf.extend_from_slice(&self.theta.to_bits().to_le_bytes());
        buf.push(self.kernel.shape.code());
        buf.extend_from_slice(&self.kernel.half_width.to_bits().to_le_bytes());
        buf.extend_from_slice(&(self.grid.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.cols.len() as u64).to_le_bytes());
        for &o in &self.offsets {
            buf.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &c in &self.cols {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        for &w in &self.weights {
            buf.extend_from_slice(&w.to_bits().to_le_bytes());
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_cache(
        path: &Path,
        grid: Arc<SphericalGrid>,
        theta: f64,
        kernel: DeltaKernel,
    ) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader {
            bytes: &bytes,
            pos: 0,
            path,
        };
        if r.take(8)? != CACHE_MAGIC {
            return Err(Error::format(path, "bad magic"));
        }
        if r.u32()? != CACHE_VERSION {
            return Err(Error::format(path, "unsupported cache version"));
        }
        if r.take(32)? != grid.fingerprint() {
            return Err(Error::format(path, "cache built for a different grid"));
        }
        if r.u64()? != theta.to_bits()
            || r.take(1)?[0] != kernel.shape.code()
            || r.u64()? != kernel.half_width.to_bits()
        {
            return Err(Error::format(path, "cache key mismatch"));
        }
        let n = r.u64()? as usize;
        let entries = r.u64()? as usize;
        if n != grid.len() {
            return Err(Error::format(path, "site count mismatch"));
        }
        let offsets = (0..=n)
            .map(|_| r.u64().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let cols = (0..entries).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let weights = (0..entries)
            .map(|_| r.u64().map(f64::from_bits))
            .collect::<Result<Vec<_>>>()?;
        if offsets.last() != Some(&entries) || r.pos != bytes.len() {
            return Err(Error::format(path, "truncated or oversized cache"));
        }
        let prefactor = 4.0 / (theta.sin() * (n as f64).powi(2) * grid.spacing_h());
        Ok(InteractionTable {
            grid,
            theta,
            kernel,
            prefactor,
            offsets,
            cols,
            weights,
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::format(self.path, "unexpected end of cache file"));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
