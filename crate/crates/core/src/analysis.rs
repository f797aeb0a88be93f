//! Comparison with the quantum singlet value, cog counting, reflection
//! checks and theta sweeps.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{best_of, replica_search_all, AnnealResult, CheckpointPolicy, SearchOptions};
use crate::error::{Error, Result};
use crate::format::LawnFile;
use crate::grid::{dot, norm, SphericalGrid, Vec3};
use crate::kernel::{
    admissible_range, build_interaction, build_interaction_cached, DeltaKernel, InteractionTable,
};
use crate::lawn::{
    cogwheel_lawn, hemisphere_lawn, random_lawn, Lawn, LawnState, Setup, TwoLawnConfig,
};
use crate::spatial::LatitudeBins;

/// Cog counts with a power fraction below this are reported as "no cog
/// structure".
pub const COG_CONFIDENCE_THRESHOLD: f64 = 0.5;

/// Highest azimuthal harmonic examined by [`count_cogs`].
const MAX_HARMONIC: usize = 64;

/// `Q = cos^2(theta/2)`.
pub fn quantum_probability(theta: f64) -> f64 {
    let c = (theta / 2.0).cos();
    c * c
}

/// `1 - theta/pi`.
pub fn hemisphere_probability(theta: f64) -> f64 {
    1.0 - theta / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialAngle {
    pub q: usize,
    pub theta: f64,
    pub one_lawn_hemisphere_optimal: bool,
    pub two_lawn_hemisphere_optimal: bool,
}

/// `theta_q = pi/q` for `q = 2..=q_max`.
pub fn special_angles(q_max: usize) -> Result<Vec<SpecialAngle>> {
    if q_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "q_max must be at least 2, got {q_max}"
        )));
    }
    Ok((2..=q_max)
        .map(|q| SpecialAngle {
            q,
            theta: PI / q as f64,
            one_lawn_hemisphere_optimal: true,
            two_lawn_hemisphere_optimal: q % 2 == 0,
        })
        .collect())
}

/// Odd integer nearest to `mode * 2pi/theta` (one lawn) or `mode * pi/theta`
/// (two lawns). Ties go up.
pub fn predicted_cogs(theta: f64, setup: Setup, mode: usize) -> Result<usize> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in (0, pi), got {theta}"
        )));
    }
    if mode == 0 {
        return Err(Error::InvalidArgument("mode must be positive".into()));
    }
    let x = match setup {
        Setup::One => 2.0 * PI / theta,
        Setup::Two => PI / theta,
    } * mode as f64;
    let k = ((x - 1.0) / 2.0 + 0.5 + 1e-9).floor().max(0.0);
    Ok(2 * k as usize + 1)
}

/// The `theta` maximizing `Q(theta) - (1 - theta/pi)`: `asin(2/pi)`.
pub fn gap_maximizer_landmark() -> f64 {
    (2.0 / PI).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CogCount {
    pub n_cogs: usize,
    /// Power of the winning harmonic over the total power of harmonics
    /// `1..=64`.
    pub confidence: f64,
}

impl CogCount {
    const NONE: CogCount = CogCount {
        n_cogs: 0,
        confidence: 0.0,
    };

    pub fn is_confident(&self) -> bool {
        self.n_cogs > 0 && self.confidence >= COG_CONFIDENCE_THRESHOLD
    }

    /// `n_cogs` when confident, else 0.
    pub fn classified(&self) -> usize {
        if self.is_confident() {
            self.n_cogs
        } else {
            0
        }
    }
}

/// Counts the lobes of a cogwheel-shaped lawn.
///
/// The symmetry axis is the direction of the lawn's centroid. Boundary sites
/// are those with a site of the other color within `2h`. Their height along
/// the axis, as a function of azimuth, is Fourier analyzed and the odd
/// harmonic with the most power wins. Lawns with no measurable boundary
/// modulation return `n_cogs = 0`.
pub fn count_cogs(lawn: &Lawn) -> CogCount {
    let grid = lawn.grid();
    let s = lawn.sites();
    let h = grid.spacing_h();

    let mut c = [0.0; 3];
    for (p, _) in grid.points().iter().zip(s).filter(|(_, &b)| b == 1) {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let cn = norm(&c);
    if cn < 1e-3 * grid.n_pairs() as f64 {
        return CogCount::NONE;
    }
    let axis = [c[0] / cn, c[1] / cn, c[2] / cn];
    let (e1, e2) = frame(&axis);

    let bins = LatitudeBins::new(grid.points(), h);
    let mut height = Vec::new();
    let mut azimuth = Vec::new();
    for (i, p) in grid.points().iter().enumerate() {
        let mut mixed = false;
        bins.for_each_candidate(p, 0.0, 2.0 * h, |j| {
            mixed |= s[j] != s[i] && dot(p, grid.point(j)) >= (2.0 * h).cos();
        });
        if mixed {
            height.push(dot(p, &axis));
            azimuth.push(dot(p, &e2).atan2(dot(p, &e1)));
        }
    }
    if height.is_empty() {
        return CogCount::NONE;
    }

    let count = height.len() as f64;
    let mut power = vec![0.0; MAX_HARMONIC + 1];
    for (m, pw) in power.iter_mut().enumerate().skip(1) {
        let (mut re, mut im) = (0.0, 0.0);
        for (z, phi) in height.iter().zip(&azimuth) {
            let a = m as f64 * phi;
            re += z * a.cos();
            im += z * a.sin();
        }
        *pw = (re * re + im * im) / (count * count);
    }
    let total: f64 = power.iter().sum();
    let (best, best_power) =
        power
            .iter()
            .enumerate()
            .skip(1)
            .step_by(2)
            .fold(
                (0, 0.0),
                |acc, (m, &p)| if p > acc.1 { (m, p) } else { acc },
            );
    // Amplitude of the winning harmonic, in radians of boundary height.
    let amplitude = 2.0 * best_power.sqrt();
    if best == 0 || total <= 0.0 || amplitude < h {
        return CogCount::NONE;
    }
    CogCount {
        n_cogs: best,
        confidence: best_power / total,
    }
}

fn frame(axis: &Vec3) -> (Vec3, Vec3) {
    let helper = if axis[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = cross(axis, &helper);
    let n = norm(&e1);
    let e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    (e1, cross(axis, &e1))
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub theta: f64,
    /// `P_two({L1, L2}, theta)`.
    pub p_theta: f64,
    /// `P_two({L1, complement(L2)}, pi - theta)`.
    pub p_reflected: f64,
    pub difference: f64,
}

/// Evaluates both sides of `P({L1, L2}, theta) = P({L1, ~L2}, pi - theta)`.
/// `reflected_table` must be built at `pi - theta` on the same grid.
pub fn verify_reflection_symmetry(
    config: &TwoLawnConfig,
    table: &InteractionTable,
    reflected_table: &InteractionTable,
) -> Result<ReflectionReport> {
    let theta = table.theta();
    if ((PI - theta) - reflected_table.theta()).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "reflected table is at {}, expected pi - {theta}",
            reflected_table.theta()
        )));
    }
    let p_theta = LawnState::Two(config.clone()).probability(table)?;
    let p_reflected = LawnState::Two(config.reflected()).probability(reflected_table)?;
    Ok(ReflectionReport {
        theta,
        p_theta,
        p_reflected,
        difference: (p_theta - p_reflected).abs(),
    })
}

/// Builds both tables and calls [`verify_reflection_symmetry`].
pub fn verify_reflection_symmetry_at(
    config: &TwoLawnConfig,
    theta: f64,
    kernel: DeltaKernel,
) -> Result<ReflectionReport> {
    let grid = config.lawn1().grid().clone();
    let t = build_interaction(grid.clone(), theta, kernel)?;
    let r = build_interaction(grid, PI - theta, kernel)?;
    verify_reflection_symmetry(config, &t, &r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initializer {
    Random,
    Hemisphere,
    /// Cogwheel with the predicted number of cogs and half-depth lobes.
    Cogwheel,
}

pub const ALL_INITIALIZERS: [Initializer; 3] = [
    Initializer::Random,
    Initializer::Hemisphere,
    Initializer::Cogwheel,
];

/// Starting states for a replica search, in the order of `kinds`.
///
/// Two-lawn hemispheres use opposite axes and two-lawn cogwheels pair
/// `cog(n, phase 0)` with the complement of `cog(n, phase pi/n)`. Two-lawn
/// starts above `pi/2` are the reflections of those for `pi - theta`.
pub fn initializers(
    grid: &Arc<SphericalGrid>,
    theta: f64,
    setup: Setup,
    seed: u64,
    kinds: &[Initializer],
) -> Result<Vec<LawnState>> {
    let north = [0.0, 0.0, 1.0];
    let reflect = setup == Setup::Two && theta > PI / 2.0;
    let base = if reflect { PI - theta } else { theta };
    let n = predicted_cogs(base, setup, 1)?;
    kinds
        .iter()
        .map(|kind| {
            let state: LawnState = match (setup, kind) {
                (Setup::One, Initializer::Random) => random_lawn(grid.clone(), seed).into(),
                (Setup::One, Initializer::Hemisphere) => {
                    hemisphere_lawn(grid.clone(), north)?.into()
                }
                (Setup::One, Initializer::Cogwheel) => {
                    cogwheel_lawn(grid.clone(), n, 0.5, 0.0)?.into()
                }
                (Setup::Two, kind) => {
                    let cfg = match kind {
                        Initializer::Random => TwoLawnConfig::new(
                            random_lawn(grid.clone(), seed),
                            random_lawn(grid.clone(), seed.wrapping_add(1)),
                        )?,
                        Initializer::Hemisphere => TwoLawnConfig::new(
                            hemisphere_lawn(grid.clone(), north)?,
                            hemisphere_lawn(grid.clone(), [0.0, 0.0, -1.0])?,
                        )?,
                        Initializer::Cogwheel => TwoLawnConfig::new(
                            cogwheel_lawn(grid.clone(), n, 0.5, 0.0)?,
                            cogwheel_lawn(grid.clone(), n, 0.5, PI / n as f64)?.complement(),
                        )?,
                    };
                    if reflect { cfg.reflected() } else { cfg }.into()
                }
            };
            Ok(state)
        })
        .collect()
}

/// [`initializers`] with all three kinds.
pub fn default_initializers(
    grid: &Arc<SphericalGrid>,
    theta: f64,
    setup: Setup,
    seed: u64,
) -> Result<Vec<LawnState>> {
    initializers(grid, theta, setup, seed, &ALL_INITIALIZERS)
}

/// Cogs of an annealed state: per lawn, in lawn order.
pub fn count_state_cogs(state: &LawnState) -> Vec<CogCount> {
    state.lawns().into_iter().map(count_cogs).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub theta: f64,
    pub p_one: Option<f64>,
    pub p_two: Option<f64>,
    pub q: f64,
    pub hemisphere: f64,
    pub gap_one: Option<f64>,
    pub gap_two: Option<f64>,
    pub n_cogs_one: Option<usize>,
    pub n_cogs_two: Option<usize>,
    pub seed: u64,
}

impl CurveRow {
    fn new(theta: f64, seed: u64) -> Self {
        CurveRow {
            theta,
            p_one: None,
            p_two: None,
            q: quantum_probability(theta),
            hemisphere: hemisphere_probability(theta),
            gap_one: None,
            gap_two: None,
            n_cogs_one: None,
            n_cogs_two: None,
            seed,
        }
    }

    fn record(&mut self, setup: Setup, p: f64, cogs: usize) {
        match setup {
            Setup::One => {
                self.p_one = Some(p);
                self.gap_one = Some(self.q - p);
                self.n_cogs_one = Some(cogs);
            }
            Setup::Two => {
                self.p_two = Some(p);
                self.gap_two = Some(self.q - p);
                self.n_cogs_two = Some(cogs);
            }
        }
    }
}

pub const CSV_HEADER: &str =
    "theta,p_one,p_two,q,hemisphere,gap_one,gap_two,n_cogs_one,n_cogs_two,seed";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityCurve {
    pub rows: Vec<CurveRow>,
}

impl ProbabilityCurve {
    /// CSV text; values missing for a setup are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let real = |x: Option<f64>| x.map(sig12).unwrap_or_default();
        let int = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let fields = [
                sig12(r.theta),
                real(r.p_one),
                real(r.p_two),
                sig12(r.q),
                sig12(r.hemisphere),
                real(r.gap_one),
                real(r.gap_two),
                int(r.n_cogs_one),
                int(r.n_cogs_two),
                r.seed.to_string(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `x` with 12 significant digits, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..15).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    };
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (&s[..], ""),
    };
    if !mantissa.contains('.') {
        return s;
    }
    let m = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{m}{exp}")
}

/// The default theta grid: 64 evenly spaced interior points of
/// `(0.05 pi, 0.95 pi)` clipped to the admissible range, plus `pi/q` for
/// `q = 2..=10` where admissible, sorted.
pub fn default_thetas(grid: &SphericalGrid, kernel: &DeltaKernel) -> Vec<f64> {
    let (min, max) = admissible_range(grid, kernel);
    let lo = (0.05 * PI).max(min);
    let hi = (0.95 * PI).min(max);
    let mut out: Vec<f64> = (1..=64).map(|k| lo + (hi - lo) * k as f64 / 65.0).collect();
    out.extend(
        (2..=10)
            .map(|q| PI / q as f64)
            .filter(|t| (min..=max).contains(t)),
    );
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepSetups {
    One,
    Two,
    Both,
}

impl SweepSetups {
    pub fn setups(&self) -> &'static [Setup] {
        match self {
            SweepSetups::One => &[Setup::One],
            SweepSetups::Two => &[Setup::Two],
            SweepSetups::Both => &[Setup::One, Setup::Two],
        }
    }
}

/// Where a sweep keeps its per-row records, best lawns, table cache and
/// replica checkpoints. Rows whose record already exists are not recomputed.
#[derive(Debug, Clone)]
pub struct SweepStore {
    pub dir: PathBuf,
    pub table_cache: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub halt_after_stages: Option<usize>,
}

impl SweepStore {
    fn row_path(&self, index: usize) -> PathBuf {
        self.dir.join("rows").join(format!("row-{index:03}.json"))
    }

    fn lawn_path(&self, index: usize, setup: Setup) -> PathBuf {
        self.dir
            .join("lawns")
            .join(format!("row-{index:03}-{setup}.json"))
    }

    fn checkpoints(&self, index: usize, setup: Setup) -> CheckpointPolicy {
        CheckpointPolicy {
            dir: self.dir.join("checkpoints"),
            tag: format!("row-{index:03}-{setup}"),
            every_stages: self.checkpoint_every,
            halt_after_stages: self.halt_after_stages,
        }
    }
}

/// One row per theta; each setup is a replica search over
/// [`default_initializers`]. Rows run concurrently and are assembled in
/// input order.
pub fn sweep(
    grid: &Arc<SphericalGrid>,
    thetas: &[f64],
    setups: SweepSetups,
    kernel: DeltaKernel,
    kinds: &[Initializer],
    options: &SearchOptions,
    store: Option<&SweepStore>,
) -> Result<ProbabilityCurve> {
    if thetas.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one theta".into(),
        ));
    }
    for &t in thetas {
        crate::kernel::check_theta(grid, &kernel, t)?;
    }
    if let Some(st) = store {
        for sub in ["rows", "lawns"] {
            let d = st.dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let rows = thetas
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| sweep_row(grid, i, theta, setups, kernel, kinds, options, store))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityCurve { rows })
}

#[allow(clippy::too_many_arguments)]
fn sweep_row(
    grid: &Arc<SphericalGrid>,
    index: usize,
    theta: f64,
    setups: SweepSetups,
    kernel: DeltaKernel,
    kinds: &[Initializer],
    options: &SearchOptions,
    store: Option<&SweepStore>,
) -> Result<CurveRow> {
    if let Some(st) = store {
        let path = st.row_path(index);
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let row: CurveRow =
                serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
            if row.theta.to_bits() == theta.to_bits() && row.seed == options.base_seed {
                return Ok(row);
            }
        }
    }
    let table = match store.and_then(|s| s.table_cache.as_deref()) {
        Some(dir) => build_interaction_cached(grid.clone(), theta, kernel, dir)?,
        None => build_interaction(grid.clone(), theta, kernel)?,
    };
    let mut row = CurveRow::new(theta, options.base_seed);
    for &setup in setups.setups() {
        let inits = initializers(grid, theta, setup, options.base_seed, kinds)?;
        let policy = store.map(|s| s.checkpoints(index, setup));
        let best = best_of(replica_search_all(
            &inits,
            &table,
            options,
            policy.as_ref(),
        )?);
        let cogs = count_cogs(best.best_state.lawns()[0]).classified();
        row.record(setup, best.best_probability, cogs);
        if let Some(st) = store {
            save_best(&best, &table, &st.lawn_path(index, setup))?;
        }
    }
    if let Some(st) = store {
        let path = st.row_path(index);
        let text = serde_json::to_string_pretty(&row)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(row)
}

fn save_best(best: &AnnealResult, table: &InteractionTable, path: &Path) -> Result<()> {
    LawnFile::from_state(
        &best.best_state,
        table.theta(),
        *table.kernel(),
        best.best_probability,
    )
    .save(path)
}
