//! Antipodal lawn colorings and the discrete success probability.
//!
//! A [`Lawn`] stores one bit per antipodal pair: the color of the pair's
//! representative site. Its partner always carries the opposite color, so the
//! antipodal condition `s_i + s_a(i) = 1` (and with it `sum s_i = N/2`) cannot
//! be violated. The per-site vector is kept alongside as a derived cache for
//! fast evaluation.
//!
//! Probabilities are ordered-pair sums over an [`InteractionTable`]:
//!
//! * one lawn: `P = c * sum_ij s_i s_j w_ij`
//! * two lawns: `P = c * sum_ij s1_i (1 - s2_j) w_ij`
//!
//! where `c` is the table prefactor. The only move is a pair toggle,
//! `s_i <-> s_a(i)` in one lawn, whose effect on `P` depends on two table
//! rows only.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, norm, SphericalGrid, Vec3};
use crate::kernel::InteractionTable;
use crate::spatial::longitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    /// Complementary colorings: the grasshopper must land on the same lawn.
    One,
    /// Independent colorings: jump from `L1` onto the complement of `L2`.
    Two,
}

impl std::fmt::Display for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Setup::One => "one",
            Setup::Two => "two",
        })
    }
}

impl std::str::FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Setup::One),
            "two" => Ok(Setup::Two),
            other => Err(Error::InvalidArgument(format!(
                "setup must be \"one\" or \"two\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    First,
    Second,
}

#[derive(Debug, Clone)]
pub struct Lawn {
    grid: Arc<SphericalGrid>,
    pair_bits: Vec<bool>,
    sites: Vec<u8>,
}

impl PartialEq for Lawn {
    fn eq(&self, other: &Self) -> bool {
        self.grid.fingerprint() == other.grid.fingerprint() && self.pair_bits == other.pair_bits
    }
}

impl Eq for Lawn {}

impl Lawn {
    /// `bits[p]` is the color of the representative site of pair `p`.
    pub fn from_pair_bits(grid: Arc<SphericalGrid>, pair_bits: Vec<bool>) -> Result<Self> {
        if pair_bits.len() != grid.n_pairs() {
            return Err(Error::InvalidArgument(format!(
                "expected {} pair bits, got {}",
                grid.n_pairs(),
                pair_bits.len()
            )));
        }
        let mut sites = vec![0u8; grid.len()];
        for (&(rep, other), &bit) in grid.pairs().iter().zip(&pair_bits) {
            sites[rep] = u8::from(bit);
            sites[other] = u8::from(!bit);
        }
        Ok(Lawn {
            grid,
            pair_bits,
            sites,
        })
    }

    /// Builds a lawn from a full per-site 0/1 vector, rejecting any vector
    /// that breaks the antipodal condition.
    pub fn from_sites(grid: Arc<SphericalGrid>, sites: &[u8]) -> Result<Self> {
        if sites.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} site bits, got {}",
                grid.len(),
                sites.len()
            )));
        }
        let mut bits = Vec::with_capacity(grid.n_pairs());
        for &(rep, other) in grid.pairs() {
            let (a, b) = (sites[rep], sites[other]);
            if a > 1 || b > 1 || a + b != 1 {
                return Err(Error::InvalidArgument(format!(
                    "sites {rep} and {other} violate the antipodal condition ({a}, {b})"
                )));
            }
            bits.push(a == 1);
        }
        Self::from_pair_bits(grid, bits)
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    /// Per-site colors `s_i` in grid order.
    pub fn sites(&self) -> &[u8] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> u8 {
        self.sites[i]
    }

    pub fn pair_bits(&self) -> &[bool] {
        &self.pair_bits
    }

    pub fn count_ones(&self) -> usize {
        self.sites.iter().map(|&s| s as usize).sum()
    }

    pub fn complement(&self) -> Lawn {
        let pair_bits = self.pair_bits.iter().map(|b| !b).collect();
        let sites = self.sites.iter().map(|s| 1 - s).collect();
        Lawn {
            grid: self.grid.clone(),
            pair_bits,
            sites,
        }
    }

    /// Swaps `s_i <-> s_a(i)` for the pair containing `site`.
    pub fn toggle_pair(&mut self, site: usize) -> Result<()> {
        check_index(&self.grid, site)?;
        self.toggle_unchecked(site);
        Ok(())
    }

    #[inline]
    pub(crate) fn toggle_unchecked(&mut self, site: usize) {
        let p = self.grid.pair_of(site);
        let bit = !self.pair_bits[p];
        self.pair_bits[p] = bit;
        let (rep, other) = self.grid.pairs()[p];
        self.sites[rep] = u8::from(bit);
        self.sites[other] = u8::from(!bit);
    }
}

fn check_index(grid: &SphericalGrid, site: usize) -> Result<()> {
    if site < grid.len() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index: site,
            len: grid.len(),
        })
    }
}

fn check_unit(axis: &Vec3) -> Result<()> {
    let n = norm(axis);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "axis must be a unit vector, |axis| = {n}"
        )));
    }
    Ok(())
}

/// Colors each pair by evaluating `inside` on its representative; ties
/// (`inside` returning `None`) go to the representative.
fn lawn_from_rule(grid: Arc<SphericalGrid>, inside: impl Fn(&Vec3) -> Option<bool>) -> Lawn {
    let bits = grid
        .pairs()
        .iter()
        .map(|&(rep, _)| inside(grid.point(rep)).unwrap_or(true))
        .collect();
    Lawn::from_pair_bits(grid, bits).expect("one bit per pair")
}

/// Hemisphere `{ r : r . axis > 0 }`; sites exactly on the boundary great
/// circle go to the pair representative.
pub fn hemisphere_lawn(grid: Arc<SphericalGrid>, axis: Vec3) -> Result<Lawn> {
    check_unit(&axis)?;
    Ok(lawn_from_rule(grid, |p| {
        let d = dot(p, &axis);
        if d == 0.0 {
            None
        } else {
            Some(d > 0.0)
        }
    }))
}

/// Northern cap with a square-wave boundary of `n_cogs` lobes.
///
/// Site `i` is on the lawn iff its colatitude is below `pi/2 + A(lon_i)`,
/// where `A = d * sign(cos(n_cogs (lon - phase)))` and the lobe depth is
/// `d = cog_fraction * pi / n_cogs`. Odd `n_cogs` makes `A(lon + pi) = -A(lon)`,
/// which is what the antipodal condition requires.
pub fn cogwheel_lawn(
    grid: Arc<SphericalGrid>,
    n_cogs: usize,
    cog_fraction: f64,
    phase: f64,
) -> Result<Lawn> {
    if n_cogs == 0 || n_cogs.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "number of cogs must be odd, got {n_cogs}"
        )));
    }
    if !(0.0..=1.0).contains(&cog_fraction) {
        return Err(Error::InvalidArgument(format!(
            "cog fraction must lie in [0, 1], got {cog_fraction}"
        )));
    }
    let depth = cog_fraction * std::f64::consts::PI / n_cogs as f64;
    let n = n_cogs as f64;
    Ok(lawn_from_rule(grid, |p| {
        let amp = if depth == 0.0 {
            0.0
        } else if (n * (longitude(p) - phase)).cos() >= 0.0 {
            depth
        } else {
            -depth
        };
        // colat < pi/2 + A  <=>  z > -sin(A)
        let threshold = -amp.sin();
        if p[2] == threshold {
            None
        } else {
            Some(p[2] > threshold)
        }
    }))
}

/// Each pair colors a uniformly random member; deterministic in `seed`.
pub fn random_lawn(grid: Arc<SphericalGrid>, seed: u64) -> Lawn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..grid.n_pairs()).map(|_| rng.gen::<bool>()).collect();
    Lawn::from_pair_bits(grid, bits).expect("one bit per pair")
}

pub fn complement(lawn: &Lawn) -> Lawn {
    lawn.complement()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoLawnConfig {
    pub(crate) lawn1: Lawn,
    pub(crate) lawn2: Lawn,
}

impl TwoLawnConfig {
    pub fn new(lawn1: Lawn, lawn2: Lawn) -> Result<Self> {
        if lawn1.grid.fingerprint() != lawn2.grid.fingerprint() {
            return Err(Error::GridMismatch {
                expected: lawn1.grid.content_hash(),
                found: lawn2.grid.content_hash(),
            });
        }
        Ok(TwoLawnConfig { lawn1, lawn2 })
    }

    pub fn lawn1(&self) -> &Lawn {
        &self.lawn1
    }

    pub fn lawn2(&self) -> &Lawn {
        &self.lawn2
    }

    /// `{L1, complement(L2)}`: the configuration whose value at `pi - theta`
    /// equals this one's at `theta`.
    pub fn reflected(&self) -> TwoLawnConfig {
        TwoLawnConfig {
            lawn1: self.lawn1.clone(),
            lawn2: self.lawn2.complement(),
        }
    }
}

fn check_grid(table: &InteractionTable, lawn: &Lawn) -> Result<()> {
    if table.same_grid(&lawn.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            expected: table.grid().content_hash(),
            found: lawn.grid.content_hash(),
        })
    }
}

/// `P = c * sum_ij s_i s_j w_ij` over ordered pairs.
pub fn success_probability_one(lawn: &Lawn, table: &InteractionTable) -> Result<f64> {
    check_grid(table, lawn)?;
    Ok(probability_one(lawn, table))
}

/// `P = c * sum_ij s1_i (1 - s2_j) w_ij` over ordered pairs.
pub fn success_probability_two(config: &TwoLawnConfig, table: &InteractionTable) -> Result<f64> {
    check_grid(table, &config.lawn1)?;
    check_grid(table, &config.lawn2)?;
    Ok(probability_two(config, table))
}

fn probability_one(lawn: &Lawn, table: &InteractionTable) -> f64 {
    let s = lawn.sites();
    let sum: f64 = (0..s.len())
        .filter(|&i| s[i] == 1)
        .map(|i| table.weighted_sum(i, s))
        .sum();
    table.prefactor() * sum
}

fn probability_two(config: &TwoLawnConfig, table: &InteractionTable) -> f64 {
    let s1 = config.lawn1.sites();
    let s2 = config.lawn2.sites();
    let sum: f64 = (0..s1.len())
        .filter(|&i| s1[i] == 1)
        .map(|i| table.weighted_complement_sum(i, s2))
        .sum();
    table.prefactor() * sum
}

/// Annealing state: a single lawn or an independent pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LawnState {
    One(Lawn),
    Two(TwoLawnConfig),
}

impl From<Lawn> for LawnState {
    fn from(l: Lawn) -> Self {
        LawnState::One(l)
    }
}

impl From<TwoLawnConfig> for LawnState {
    fn from(c: TwoLawnConfig) -> Self {
        LawnState::Two(c)
    }
}

impl LawnState {
    pub fn setup(&self) -> Setup {
        match self {
            LawnState::One(_) => Setup::One,
            LawnState::Two(_) => Setup::Two,
        }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        match self {
            LawnState::One(l) => &l.grid,
            LawnState::Two(c) => &c.lawn1.grid,
        }
    }

    pub fn lawns(&self) -> Vec<&Lawn> {
        match self {
            LawnState::One(l) => vec![l],
            LawnState::Two(c) => vec![&c.lawn1, &c.lawn2],
        }
    }

    pub fn n_lawns(&self) -> usize {
        match self {
            LawnState::One(_) => 1,
            LawnState::Two(_) => 2,
        }
    }

    pub fn check_grid(&self, table: &InteractionTable) -> Result<()> {
        self.lawns()
            .into_iter()
            .try_for_each(|l| check_grid(table, l))
    }

    pub fn probability(&self, table: &InteractionTable) -> Result<f64> {
        match self {
            LawnState::One(l) => success_probability_one(l, table),
            LawnState::Two(c) => success_probability_two(c, table),
        }
    }

    pub(crate) fn probability_unchecked(&self, table: &InteractionTable) -> f64 {
        match self {
            LawnState::One(l) => probability_one(l, table),
            LawnState::Two(c) => probability_two(c, table),
        }
    }

    fn check_which(&self, which: Which) -> Result<()> {
        if matches!((self, which), (LawnState::One(_), Which::Second)) {
            return Err(Error::InvalidArgument(
                "a one-lawn state has no second lawn".into(),
            ));
        }
        Ok(())
    }

    /// `P(after) - P(before)` for toggling the pair of `site` in lawn `which`.
    #[inline]
    pub(crate) fn delta_unchecked(
        &self,
        table: &InteractionTable,
        which: Which,
        site: usize,
    ) -> f64 {
        let c = table.prefactor();
        let a = table.grid().antipode(site);
        match (self, which) {
            (LawnState::One(l), _) => {
                let s = l.sites();
                let d = 1.0 - 2.0 * f64::from(s[site]);
                2.0 * c * d * (table.weighted_sum(site, s) - table.weighted_sum(a, s))
            }
            (LawnState::Two(cfg), Which::First) => {
                let s2 = cfg.lawn2.sites();
                let d = 1.0 - 2.0 * f64::from(cfg.lawn1.sites[site]);
                c * d
                    * (table.weighted_complement_sum(site, s2)
                        - table.weighted_complement_sum(a, s2))
            }
            (LawnState::Two(cfg), Which::Second) => {
                let s1 = cfg.lawn1.sites();
                let d = 1.0 - 2.0 * f64::from(cfg.lawn2.sites[site]);
                -c * d * (table.weighted_sum(site, s1) - table.weighted_sum(a, s1))
            }
        }
    }

    #[inline]
    pub(crate) fn toggle_unchecked(&mut self, which: Which, site: usize) {
        match (self, which) {
            (LawnState::One(l), _) => l.toggle_unchecked(site),
            (LawnState::Two(c), Which::First) => c.lawn1.toggle_unchecked(site),
            (LawnState::Two(c), Which::Second) => c.lawn2.toggle_unchecked(site),
        }
    }
}

/// Change in success probability from toggling the pair of `site` in lawn
/// `which`, computed from two table rows without mutating the state.
pub fn delta_pair_toggle(
    state: &LawnState,
    table: &InteractionTable,
    which: Which,
    site: usize,
) -> Result<f64> {
    state.check_grid(table)?;
    state.check_which(which)?;
    check_index(state.grid(), site)?;
    Ok(state.delta_unchecked(table, which, site))
}

/// Swaps `s_i <-> s_a(i)` for the pair of `site` in lawn `which`.
pub fn apply_pair_toggle(state: &mut LawnState, which: Which, site: usize) -> Result<()> {
    state.check_which(which)?;
    check_index(state.grid(), site)?;
    state.toggle_unchecked(which, site);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_fibonacci_antipodal;
    use crate::grid::octahedron;
    use crate::kernel::{build_interaction, build_interaction_unchecked, DeltaKernel};
    use crate::oracle::{brute_force_one, brute_force_two};
    use std::f64::consts::PI;

    fn grid(n_pairs: usize) -> Arc<SphericalGrid> {
        Arc::new(generate_fibonacci_antipodal(n_pairs).unwrap())
    }

    #[test]
    fn hemisphere_on_octahedron() {
        let g = Arc::new(octahedron());
        let l = hemisphere_lawn(g.clone(), [0.0, 0.0, 1.0]).unwrap();
        // +z on the lawn; equatorial ties go to the representatives +x and +y.
        assert_eq!(l.sites(), &[1, 0, 1, 0, 1, 0]);
        let south = hemisphere_lawn(g, [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(south.sites(), &[1, 0, 1, 0, 0, 1]);
        assert!(hemisphere_lawn(Arc::new(octahedron()), [0.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn hemisphere_halves_the_grid() {
        let g = grid(3000);
        let up = hemisphere_lawn(g.clone(), [0.0, 0.0, 1.0]).unwrap();
        let down = hemisphere_lawn(g, [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(up.count_ones(), 3000);
        assert_eq!(down, up.complement());
    }

    #[test]
    fn cogwheel_initializer() {
        let g = grid(1000);
        let flat = cogwheel_lawn(g.clone(), 7, 0.0, 0.3).unwrap();
        assert_eq!(flat, hemisphere_lawn(g.clone(), [0.0, 0.0, 1.0]).unwrap());
        assert!(cogwheel_lawn(g.clone(), 4, 0.5, 0.0).is_err());
        assert!(cogwheel_lawn(g.clone(), 0, 0.5, 0.0).is_err());
        assert!(cogwheel_lawn(g.clone(), 7, 1.5, 0.0).is_err());
        let cog = cogwheel_lawn(g, 7, 0.5, 0.0).unwrap();
        assert_eq!(cog.count_ones(), 1000);
        assert_ne!(cog, flat);
    }

    #[test]
    fn random_lawns() {
        let g = grid(3000);
        let a = random_lawn(g.clone(), 42);
        assert_eq!(a, random_lawn(g.clone(), 42));
        assert_eq!(a.count_ones(), 3000);
        let lawns: Vec<Lawn> = (0..10).map(|s| random_lawn(g.clone(), s)).collect();
        for i in 0..lawns.len() {
            for j in 0..i {
                assert_ne!(lawns[i], lawns[j]);
            }
        }
    }

    #[test]
    fn from_sites_validates() {
        let g = Arc::new(octahedron());
        assert!(Lawn::from_sites(g.clone(), &[1, 0, 1, 0, 1, 0]).is_ok());
        assert!(Lawn::from_sites(g.clone(), &[1, 1, 1, 0, 1, 0]).is_err());
        assert!(Lawn::from_sites(g.clone(), &[2, 0, 1, 0, 1, 0]).is_err());
        assert!(Lawn::from_sites(g, &[1, 0]).is_err());
    }

    #[test]
    fn octahedron_matches_explicit_pair_list() {
        let g = Arc::new(octahedron());
        let t = build_interaction_unchecked(g.clone(), PI / 2.0, DeltaKernel::default());
        let l = hemisphere_lawn(g.clone(), [0.0, 0.0, 1.0]).unwrap();
        // Lawn sites {+x, +y, +z} are mutually orthogonal: 6 ordered pairs at phi(0).
        let expected = t.prefactor() * 6.0 * 0.5;
        let p = success_probability_one(&l, &t).unwrap();
        assert!((p - expected).abs() < 1e-15);
        assert!((p - brute_force_one(&l, PI / 2.0, &DeltaKernel::default())).abs() < 1e-12);
    }

    #[test]
    fn two_lawn_reduces_to_one_lawn() {
        let g = grid(1000);
        let t = build_interaction(g.clone(), 0.3 * PI, DeltaKernel::default()).unwrap();
        let l = random_lawn(g, 5);
        let cfg = TwoLawnConfig::new(l.clone(), l.complement()).unwrap();
        let p1 = success_probability_one(&l, &t).unwrap();
        let p2 = success_probability_two(&cfg, &t).unwrap();
        assert!((p1 - p2).abs() < 1e-14, "{p1} vs {p2}");
    }

    #[test]
    fn grid_mismatch_detected() {
        let t = build_interaction(grid(500), 1.0, DeltaKernel::default()).unwrap();
        let other = random_lawn(grid(501), 1);
        assert!(matches!(
            success_probability_one(&other, &t),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn toggle_errors() {
        let g = grid(300);
        let t = build_interaction(g.clone(), 1.0, DeltaKernel::default()).unwrap();
        let mut st = LawnState::One(random_lawn(g.clone(), 1));
        assert!(matches!(
            delta_pair_toggle(&st, &t, Which::First, 600),
            Err(Error::IndexOutOfRange {
                index: 600,
                len: 600
            })
        ));
        assert!(apply_pair_toggle(&mut st, Which::First, 999).is_err());
        assert!(delta_pair_toggle(&st, &t, Which::Second, 3).is_err());
    }

    #[test]
    fn apply_twice_restores_state() {
        let g = grid(300);
        let mut st = LawnState::Two(
            TwoLawnConfig::new(random_lawn(g.clone(), 1), random_lawn(g.clone(), 2)).unwrap(),
        );
        let orig = st.clone();
        for (which, site) in [(Which::First, 17), (Which::Second, 451)] {
            apply_pair_toggle(&mut st, which, site).unwrap();
            assert_ne!(st, orig);
            for l in st.lawns() {
                assert_eq!(l.count_ones(), 300);
                assert_eq!(l.site(site) + l.site(g.antipode(site)), 1);
            }
            apply_pair_toggle(&mut st, which, site).unwrap();
            assert_eq!(st, orig);
        }
    }

    #[test]
    fn evaluators_match_brute_force_double_sum() {
        let g = grid(900);
        let kernel = DeltaKernel::default();
        for theta in [0.2 * PI, 0.45 * PI, 0.7 * PI] {
            let t = build_interaction(g.clone(), theta, kernel).unwrap();
            let l1 = random_lawn(g.clone(), 11);
            let l2 = random_lawn(g.clone(), 12);
            let p1 = success_probability_one(&l1, &t).unwrap();
            assert!((p1 - brute_force_one(&l1, theta, &kernel)).abs() < 1e-12);
            let cfg = TwoLawnConfig::new(l1, l2).unwrap();
            let p2 = success_probability_two(&cfg, &t).unwrap();
            assert!((p2 - brute_force_two(&cfg, theta, &kernel)).abs() < 1e-12);
        }
    }

    #[test]
    fn complement_preserves_one_lawn_probability() {
        let g = grid(1000);
        let t = build_interaction(g.clone(), 0.27 * PI, DeltaKernel::default()).unwrap();
        for seed in 0..5 {
            let l = random_lawn(g.clone(), seed);
            assert_eq!(l.complement().complement(), l);
            let a = success_probability_one(&l, &t).unwrap();
            let b = success_probability_one(&l.complement(), &t).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
