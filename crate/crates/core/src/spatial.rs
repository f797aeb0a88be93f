//! Latitude-band binning for annulus queries on the unit sphere.
//!
//! Sites are bucketed into colatitude bands and sorted by longitude inside
//! each band. A query for all sites at geodesic distance `[d_min, d_max]`
//! from a center visits only the bands whose colatitude range can reach the
//! annulus, and inside each band only the (at most two) longitude arcs that
//! can intersect it. The candidate set is a superset of the true annulus;
//! callers filter with the exact geodesic angle.

use std::f64::consts::PI;

use crate::grid::Vec3;

const TWO_PI: f64 = 2.0 * PI;
/// Slack added to every window bound, far above the rounding in the bounds.
const WINDOW_MARGIN: f64 = 1e-9;
const POLE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Band {
    colat_min: f64,
    colat_max: f64,
    lons: Vec<f64>,
    sites: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LatitudeBins {
    band_height: f64,
    bands: Vec<Band>,
}

pub fn colatitude(p: &Vec3) -> f64 {
    p[0].hypot(p[1]).atan2(p[2])
}

pub fn longitude(p: &Vec3) -> f64 {
    p[1].atan2(p[0]).rem_euclid(TWO_PI)
}

impl LatitudeBins {
    pub fn new(points: &[Vec3], band_height: f64) -> Self {
        assert!(band_height > 0.0, "band height must be positive");
        let n_bands = ((PI / band_height).ceil() as usize).max(1);
        let mut members: Vec<Vec<(f64, usize, f64)>> = vec![Vec::new(); n_bands];
        for (i, p) in points.iter().enumerate() {
            let c = colatitude(p);
            let k = ((c / band_height) as usize).min(n_bands - 1);
            members[k].push((longitude(p), i, c));
        }
        let bands = members
            .into_iter()
            .map(|mut m| {
                m.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let colat_min = m.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
                let colat_max = m.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
                Band {
                    colat_min,
                    colat_max,
                    lons: m.iter().map(|e| e.0).collect(),
                    sites: m.iter().map(|e| e.1).collect(),
                }
            })
            .collect();
        LatitudeBins { band_height, bands }
    }

    /// Calls `visit` once for every site that may lie at geodesic distance
    /// in `[d_min, d_max]` from `center`. Every site that does is visited
    /// exactly once.
    pub fn for_each_candidate(
        &self,
        center: &Vec3,
        d_min: f64,
        d_max: f64,
        mut visit: impl FnMut(usize),
    ) {
        let ci = colatitude(center);
        let li = longitude(center);
        let lo_c = ci - d_max - WINDOW_MARGIN;
        let hi_c = ci + d_max + WINDOW_MARGIN;
        let top = self.bands.len() - 1;
        let first = ((lo_c.max(0.0) / self.band_height) as usize).min(top);
        let last = ((hi_c.min(PI) / self.band_height) as usize).min(top);

        for band in &self.bands[first..=last] {
            if band.sites.is_empty() || band.colat_max < lo_c || band.colat_min > hi_c {
                continue;
            }
            let (lo, hi) = azimuth_window(ci, band.colat_min, band.colat_max, d_min, d_max);
            if hi < lo {
                continue;
            }
            // Positive side: delta in [lo, hi].
            visit_arc(band, li + lo, li + hi, li, true, &mut visit);
            // Negative side: delta in [-hi, -lo].
            visit_arc(band, li - hi, li - lo, li, false, &mut visit);
        }
    }
}

/// Bounds `[lo, hi]` on `|delta longitude|` for any site of the band that
/// lies in the annulus. Conservative by `WINDOW_MARGIN`.
fn azimuth_window(ci: f64, c0: f64, c1: f64, d_min: f64, d_max: f64) -> (f64, f64) {
    let si = ci.sin();
    if si < POLE_GUARD || c0 < POLE_GUARD || c1 > PI - POLE_GUARD {
        return (0.0, PI);
    }
    let hi = if d_max >= PI {
        PI
    } else {
        let g_min = extreme_of_g(ci, c0, c1, d_max, f64::min, f64::INFINITY);
        if g_min <= -1.0 {
            PI
        } else {
            (g_min.min(1.0).acos() + WINDOW_MARGIN).min(PI)
        }
    };
    let lo = if d_min <= 0.0 {
        0.0
    } else {
        let g_max = extreme_of_g(ci, c0, c1, d_min, f64::max, f64::NEG_INFINITY);
        if g_max >= 1.0 {
            0.0
        } else {
            (g_max.max(-1.0).acos() - WINDOW_MARGIN).max(0.0)
        }
    };
    (lo, hi)
}

/// Extreme value over `c in [c0, c1]` of
/// `g(c) = (cos d - cos ci cos c) / (sin ci sin c)`, the cosine of the
/// longitude offset at which a point of colatitude `c` sits at distance `d`.
/// Its derivative vanishes only where `cos c = cos ci / cos d`.
fn extreme_of_g(ci: f64, c0: f64, c1: f64, d: f64, pick: fn(f64, f64) -> f64, init: f64) -> f64 {
    let (a, b, s) = (d.cos(), ci.cos(), ci.sin());
    let g = |c: f64| (a - b * c.cos()) / (s * c.sin());
    let mut best = pick(init, pick(g(c0), g(c1)));
    if a.abs() > 1e-15 {
        let r = b / a;
        if r.abs() <= 1.0 {
            let c = r.acos();
            if c > c0 && c < c1 {
                best = pick(best, g(c));
            }
        }
    }
    best
}

fn wrap_delta(delta: f64) -> f64 {
    // Into (-pi, pi].
    let d = (delta + PI).rem_euclid(TWO_PI) - PI;
    if d == -PI {
        PI
    } else {
        d
    }
}

fn visit_arc(
    band: &Band,
    start: f64,
    end: f64,
    center_lon: f64,
    positive: bool,
    visit: &mut impl FnMut(usize),
) {
    let start = start - WINDOW_MARGIN;
    let end = end + WINDOW_MARGIN;
    let len = end - start;
    let s = start.rem_euclid(TWO_PI);
    let e = s + len;
    let mut scan = |from: f64, to: f64| {
        let a = band.lons.partition_point(|&l| l < from);
        let b = band.lons.partition_point(|&l| l <= to);
        for k in a..b {
            let delta = wrap_delta(band.lons[k] - center_lon);
            if (delta >= 0.0) == positive {
                visit(band.sites[k]);
            }
        }
    };
    if e < TWO_PI {
        scan(s, e);
    } else {
        scan(s, TWO_PI);
        scan(0.0, e - TWO_PI);
    }
}
