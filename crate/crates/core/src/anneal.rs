//! Simulated annealing for the lawn Hamiltonian `H = -P`.
//!
//! The only move toggles one antipodal pair in one lawn, which keeps every
//! visited state antipodal and spin-conserving. Moves are accepted with the
//! Metropolis rule on `dH = -dP` under geometric cooling, and the best state
//! ever visited (not the final one) is returned.
//!
//! Every replica owns a ChaCha8 stream seeded from its own seed, so runs are
//! bit-reproducible regardless of how replicas are spread over threads. An
//! [`Annealer`] can be checkpointed at temperature-stage boundaries and
//! resumed to the identical result.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{decode_state, encode_bits, GridRef};
use crate::kernel::InteractionTable;
use crate::lawn::{LawnState, Setup, Which};

/// Full recompute of the running probability every this many sweeps.
pub const RECOMPUTE_INTERVAL: u64 = 100;
const PROBE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_initial: f64,
    pub t_final: f64,
    pub cooling_ratio: f64,
    /// One sweep is `N/2` proposed pair toggles.
    pub sweeps_per_temperature: usize,
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_initial.is_finite()
            && self.t_initial > 0.0
            && self.t_final > 0.0
            && self.t_final <= self.t_initial
            && self.cooling_ratio > 0.0
            && self.cooling_ratio < 1.0
            && self.sweeps_per_temperature > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid anneal schedule {self:?}"
            )))
        }
    }

    pub fn n_stages(&self) -> usize {
        let mut t = self.t_initial;
        let mut n = 0;
        while !self.finished_at(t) {
            n += 1;
            t *= self.cooling_ratio;
        }
        n
    }

    fn finished_at(&self, temperature: f64) -> bool {
        temperature < self.t_final * (1.0 - 1e-12)
    }
}

/// Schedule settings before the start temperature is known. When
/// `t_initial` is unset it is taken as `t_initial_scale` times the standard
/// deviation of `dP` over `probes` random toggles of the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleOptions {
    pub t_initial: Option<f64>,
    pub t_initial_scale: f64,
    pub t_final_ratio: f64,
    pub cooling_ratio: f64,
    pub sweeps_per_temperature: usize,
    pub probes: usize,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            t_initial: None,
            t_initial_scale: 2.0,
            t_final_ratio: 1e-4,
            cooling_ratio: 0.95,
            sweeps_per_temperature: 20,
            probes: 1000,
        }
    }
}

impl ScheduleOptions {
    pub fn resolve(
        &self,
        initial: &LawnState,
        table: &InteractionTable,
        seed: u64,
    ) -> Result<AnnealSchedule> {
        initial.check_grid(table)?;
        let t_initial = match self.t_initial {
            Some(t) => t,
            None => {
                self.t_initial_scale * probe_delta_std(initial, table, seed, self.probes.max(2))
            }
        };
        // Degenerate landscapes (theta = pi/2) have dP == 0 to rounding.
        let t_initial = if t_initial > 0.0 {
            t_initial
        } else {
            f64::MIN_POSITIVE.sqrt()
        };
        let schedule = AnnealSchedule {
            t_initial,
            t_final: t_initial * self.t_final_ratio,
            cooling_ratio: self.cooling_ratio,
            sweeps_per_temperature: self.sweeps_per_temperature,
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

fn probe_delta_std(state: &LawnState, table: &InteractionTable, seed: u64, probes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROBE_STREAM);
    let n = table.grid().len();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..probes {
        let which = pick_lawn(&mut rng, state.setup());
        let site = rng.gen_range(0..n);
        let d = state.delta_unchecked(table, which, site);
        sum += d;
        sum_sq += d * d;
    }
    let mean = sum / probes as f64;
    ((sum_sq / probes as f64) - mean * mean).max(0.0).sqrt()
}

#[inline]
fn pick_lawn(rng: &mut ChaCha8Rng, setup: Setup) -> Which {
    match setup {
        Setup::One => Which::First,
        Setup::Two => {
            if rng.gen::<bool>() {
                Which::First
            } else {
                Which::Second
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub temperature: f64,
    /// Running probability averaged over the end of each sweep in the stage.
    pub mean_probability: f64,
    pub acceptance_rate: f64,
    pub best_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub best_state: LawnState,
    /// Fresh full evaluation of `best_state`.
    pub best_probability: f64,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
    pub replica_id: usize,
}

/// Resumable annealing run.
pub struct Annealer<'t> {
    table: &'t InteractionTable,
    schedule: AnnealSchedule,
    seed: u64,
    replica_id: usize,
    rng: ChaCha8Rng,
    state: LawnState,
    current: f64,
    best_state: LawnState,
    best: f64,
    /// Toggles applied to `state` since `best_state` was last synchronized.
    pending: Vec<(Which, usize)>,
    stage: usize,
    temperature: f64,
    sweeps_done: u64,
    trace: Vec<TraceEntry>,
}

impl<'t> Annealer<'t> {
    pub fn new(
        initial: LawnState,
        table: &'t InteractionTable,
        schedule: AnnealSchedule,
        seed: u64,
        replica_id: usize,
    ) -> Result<Self> {
        initial.check_grid(table)?;
        schedule.validate()?;
        let current = initial.probability_unchecked(table);
        Ok(Annealer {
            table,
            schedule,
            seed,
            replica_id,
            rng: ChaCha8Rng::seed_from_u64(seed),
            best_state: initial.clone(),
            state: initial,
            current,
            best: current,
            pending: Vec::new(),
            stage: 0,
            temperature: schedule.t_initial,
            sweeps_done: 0,
            trace: Vec::new(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.schedule.finished_at(self.temperature)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn state(&self) -> &LawnState {
        &self.state
    }

    pub fn current_probability(&self) -> f64 {
        self.current
    }

    pub fn best_probability(&self) -> f64 {
        self.best
    }

    /// Runs all sweeps of the current temperature stage and cools.
    pub fn run_stage(&mut self) {
        if self.is_done() {
            return;
        }
        let t = self.temperature;
        let n_sites = self.table.grid().len();
        let proposals = self.table.grid().n_pairs();
        let setup = self.state.setup();
        let mut accepted = 0u64;
        let mut p_sum = 0.0;
        for _ in 0..self.schedule.sweeps_per_temperature {
            for _ in 0..proposals {
                let which = pick_lawn(&mut self.rng, setup);
                let site = self.rng.gen_range(0..n_sites);
                let dp = self.state.delta_unchecked(self.table, which, site);
                if dp >= 0.0 || self.rng.gen::<f64>() < (dp / t).exp() {
                    self.state.toggle_unchecked(which, site);
                    self.current += dp;
                    self.pending.push((which, site));
                    accepted += 1;
                    if self.current > self.best {
                        self.best = self.current;
                        self.sync_best();
                    } else if self.pending.len() > 4 * proposals {
                        self.compact_pending();
                    }
                }
            }
            self.sweeps_done += 1;
            if self.sweeps_done.is_multiple_of(RECOMPUTE_INTERVAL) {
                self.current = self.state.probability_unchecked(self.table);
            }
            p_sum += self.current;
        }
        let sweeps = self.schedule.sweeps_per_temperature as f64;
        self.trace.push(TraceEntry {
            temperature: t,
            mean_probability: p_sum / sweeps,
            acceptance_rate: accepted as f64 / (sweeps * proposals as f64),
            best_probability: self.best,
        });
        self.stage += 1;
        self.temperature *= self.schedule.cooling_ratio;
    }

    fn sync_best(&mut self) {
        for &(which, site) in &self.pending {
            self.best_state.toggle_unchecked(which, site);
        }
        self.pending.clear();
    }

    /// Replaces the toggle log by the pairwise difference between the
    /// current and best states.
    fn compact_pending(&mut self) {
        self.pending.clear();
        let grid = self.table.grid().clone();
        let whiches = [Which::First, Which::Second];
        for (k, (now, best)) in self
            .state
            .lawns()
            .into_iter()
            .zip(self.best_state.lawns())
            .enumerate()
        {
            for (p, (a, b)) in now.pair_bits().iter().zip(best.pair_bits()).enumerate() {
                if a != b {
                    self.pending.push((whiches[k], grid.pairs()[p].0));
                }
            }
        }
    }

    pub fn run_to_end(&mut self) {
        while !self.is_done() {
            self.run_stage();
        }
    }

    pub fn finish(mut self) -> AnnealResult {
        self.sync_best();
        let best_probability = self.best_state.probability_unchecked(self.table);
        AnnealResult {
            best_state: self.best_state,
            best_probability,
            trace: self.trace,
            seed: self.seed,
            replica_id: self.replica_id,
        }
    }

    pub fn checkpoint(&mut self) -> Checkpoint {
        self.sync_best();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            grid: GridRef::of(self.table.grid()),
            theta: self.table.theta(),
            setup: self.state.setup(),
            seed: self.seed,
            replica_id: self.replica_id,
            schedule: self.schedule,
            stage: self.stage,
            temperature: self.temperature,
            sweeps_done: self.sweeps_done,
            rng_word_pos: self.rng.get_word_pos().to_string(),
            current_probability: self.current,
            best_probability: self.best,
            current_bits: self
                .state
                .lawns()
                .iter()
                .map(|l| encode_bits(l.sites()))
                .collect(),
            best_bits: self
                .best_state
                .lawns()
                .iter()
                .map(|l| encode_bits(l.sites()))
                .collect(),
            trace: self.trace.clone(),
        }
    }

    pub fn resume(checkpoint: &Checkpoint, table: &'t InteractionTable) -> Result<Self> {
        let ck = checkpoint;
        let bad = |m: String| Error::format("<checkpoint>", m);
        if ck.version != CHECKPOINT_VERSION {
            return Err(bad(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        ck.grid.check(table.grid())?;
        if ck.theta.to_bits() != table.theta().to_bits() {
            return Err(bad(
                "checkpoint was written for a different jump angle".into()
            ));
        }
        let grid = table.grid();
        let state = decode_state(grid, ck.setup, &ck.current_bits).map_err(bad)?;
        let best_state = decode_state(grid, ck.setup, &ck.best_bits).map_err(bad)?;
        let word_pos: u128 = ck
            .rng_word_pos
            .parse()
            .map_err(|_| bad("bad rng position".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(ck.seed);
        rng.set_word_pos(word_pos);
        Ok(Annealer {
            table,
            schedule: ck.schedule,
            seed: ck.seed,
            replica_id: ck.replica_id,
            rng,
            state,
            current: ck.current_probability,
            best_state,
            best: ck.best_probability,
            pending: Vec::new(),
            stage: ck.stage,
            temperature: ck.temperature,
            sweeps_done: ck.sweeps_done,
            trace: ck.trace.clone(),
        })
    }
}

const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue an [`Annealer`] bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub grid: GridRef,
    pub theta: f64,
    pub setup: Setup,
    pub seed: u64,
    pub replica_id: usize,
    pub schedule: AnnealSchedule,
    pub stage: usize,
    pub temperature: f64,
    pub sweeps_done: u64,
    /// ChaCha8 word position, as a decimal string (u128).
    pub rng_word_pos: String,
    pub current_probability: f64,
    pub best_probability: f64,
    pub current_bits: Vec<String>,
    pub best_bits: Vec<String>,
    pub trace: Vec<TraceEntry>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string(self)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Anneals `initial` to the end of `schedule`.
pub fn anneal(
    initial: &LawnState,
    table: &InteractionTable,
    schedule: AnnealSchedule,
    seed: u64,
) -> Result<AnnealResult> {
    let mut a = Annealer::new(initial.clone(), table, schedule, seed, 0)?;
    a.run_to_end();
    Ok(a.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub schedule: ScheduleOptions,
    pub n_replicas: usize,
    pub base_seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            schedule: ScheduleOptions::default(),
            n_replicas: 3,
            base_seed: 0,
        }
    }
}

/// Where and how often replicas write checkpoints.
#[derive(Debug, Clone)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    /// File-name prefix distinguishing independent searches in one directory.
    pub tag: String,
    pub every_stages: usize,
    /// Stop each replica with [`Error::Interrupted`] after this many stages
    /// in the current process (simulates a killed run).
    pub halt_after_stages: Option<usize>,
}

impl CheckpointPolicy {
    fn path(&self, replica: usize) -> PathBuf {
        self.dir
            .join(format!("{}-r{replica:03}.ckpt.json", self.tag))
    }
}

/// Runs `n_replicas` independent anneals, replica `k` starting from
/// `initializers[k % len]` with seed `base_seed + k`, and returns all results
/// in replica order.
pub fn replica_search_all(
    initializers: &[LawnState],
    table: &InteractionTable,
    options: &SearchOptions,
    checkpoints: Option<&CheckpointPolicy>,
) -> Result<Vec<AnnealResult>> {
    if initializers.is_empty() {
        return Err(Error::InvalidArgument(
            "replica search needs at least one initializer".into(),
        ));
    }
    if options.n_replicas == 0 {
        return Err(Error::InvalidArgument(
            "replica search needs n_replicas >= 1".into(),
        ));
    }
    for init in initializers {
        init.check_grid(table)?;
    }
    if let Some(policy) = checkpoints {
        std::fs::create_dir_all(&policy.dir).map_err(|e| Error::io(&policy.dir, e))?;
    }
    (0..options.n_replicas)
        .into_par_iter()
        .map(|k| {
            let init = &initializers[k % initializers.len()];
            let seed = options.base_seed.wrapping_add(k as u64);
            run_replica(init, table, &options.schedule, seed, k, checkpoints)
        })
        .collect()
}

/// Best result of [`replica_search_all`]; ties go to the lowest replica id.
pub fn replica_search(
    initializers: &[LawnState],
    table: &InteractionTable,
    options: &SearchOptions,
) -> Result<AnnealResult> {
    Ok(best_of(replica_search_all(
        initializers,
        table,
        options,
        None,
    )?))
}

pub fn best_of(results: Vec<AnnealResult>) -> AnnealResult {
    results
        .into_iter()
        .reduce(|best, r| {
            if r.best_probability > best.best_probability {
                r
            } else {
                best
            }
        })
        .expect("at least one replica")
}

fn run_replica(
    init: &LawnState,
    table: &InteractionTable,
    schedule: &ScheduleOptions,
    seed: u64,
    replica_id: usize,
    checkpoints: Option<&CheckpointPolicy>,
) -> Result<AnnealResult> {
    let Some(policy) = checkpoints else {
        let mut a = Annealer::new(
            init.clone(),
            table,
            schedule.resolve(init, table, seed)?,
            seed,
            replica_id,
        )?;
        a.run_to_end();
        return Ok(a.finish());
    };

    let path = policy.path(replica_id);
    let fresh_schedule = schedule.resolve(init, table, seed)?;
    let saved = if path.exists() {
        Some(Checkpoint::load(&path)?)
    } else {
        None
    };
    let mut annealer = match saved {
        // Checkpoints left by a run with other settings are ignored.
        Some(ck)
            if ck.seed == seed
                && ck.replica_id == replica_id
                && ck.schedule == fresh_schedule
                && ck.setup == init.setup()
                && ck.theta.to_bits() == table.theta().to_bits()
                && ck.grid.check(table.grid()).is_ok() =>
        {
            Annealer::resume(&ck, table)?
        }
        _ => Annealer::new(init.clone(), table, fresh_schedule, seed, replica_id)?,
    };
    let every = policy.every_stages.max(1);
    let mut ran = 0usize;
    while !annealer.is_done() {
        annealer.run_stage();
        ran += 1;
        let halt = policy.halt_after_stages.is_some_and(|h| ran >= h);
        if annealer.is_done() || ran.is_multiple_of(every) || halt {
            annealer.checkpoint().save(&path)?;
        }
        if halt && !annealer.is_done() {
            return Err(Error::Interrupted);
        }
    }
    Ok(annealer.finish())
}
