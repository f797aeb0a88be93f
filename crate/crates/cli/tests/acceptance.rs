//! Acceptance suite at desk scale: Fibonacci-antipodal grid with N = 6000,
//! default kernel, default annealing schedule. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use grasshopper_core::analysis::{
    count_state_cogs, default_initializers, gap_maximizer_landmark, hemisphere_probability,
    quantum_probability, verify_reflection_symmetry,
};
use grasshopper_core::anneal::{best_of, replica_search_all, AnnealResult, SearchOptions};
use grasshopper_core::grid::{generate_fibonacci_antipodal, octahedron, SphericalGrid};
use grasshopper_core::kernel::{
    build_interaction, build_interaction_unchecked, DeltaKernel, InteractionTable,
};
use grasshopper_core::lawn::{
    apply_pair_toggle, delta_pair_toggle, hemisphere_lawn, random_lawn, success_probability_one,
    success_probability_two, LawnState, Setup, TwoLawnConfig, Which,
};
use grasshopper_core::oracle::{brute_force_one, brute_force_two};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DESK_PAIRS: usize = 3000;

struct Desk {
    grid: Arc<SphericalGrid>,
    tables: Mutex<HashMap<u64, Arc<InteractionTable>>>,
    optima: Mutex<HashMap<(u64, Setup), AnnealResult>>,
}

impl Desk {
    fn new() -> Self {
        Desk {
            grid: Arc::new(generate_fibonacci_antipodal(DESK_PAIRS).unwrap()),
            tables: Mutex::new(HashMap::new()),
            optima: Mutex::new(HashMap::new()),
        }
    }

    fn table(&self, theta: f64) -> Arc<InteractionTable> {
        let mut tables = self.tables.lock().unwrap();
        tables
            .entry(theta.to_bits())
            .or_insert_with(|| {
                Arc::new(
                    build_interaction(self.grid.clone(), theta, DeltaKernel::default()).unwrap(),
                )
            })
            .clone()
    }

    /// All replicas of a default-schedule search over the default
    /// initializers.
    fn search(&self, theta: f64, setup: Setup, n_replicas: usize) -> Vec<AnnealResult> {
        let t = self.table(theta);
        let inits = default_initializers(&self.grid, theta, setup, 0).unwrap();
        let opts = SearchOptions {
            n_replicas,
            base_seed: 0,
            ..Default::default()
        };
        replica_search_all(&inits, &t, &opts, None).unwrap()
    }

    /// Best of three replicas (one per initializer), memoized.
    fn optimum(&self, theta: f64, setup: Setup) -> AnnealResult {
        if let Some(r) = self.optima.lock().unwrap().get(&(theta.to_bits(), setup)) {
            return r.clone();
        }
        let r = best_of(self.search(theta, setup, 3));
        self.optima
            .lock()
            .unwrap()
            .insert((theta.to_bits(), setup), r.clone());
        r
    }
}

type Outcome = (bool, String);
type Check = fn(&Desk) -> Outcome;

fn hemisphere_baseline(d: &Desk) -> Outcome {
    let lawn = hemisphere_lawn(d.grid.clone(), [0.0, 0.0, 1.0]).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for q in [6.0, 5.0, 4.0, 3.0] {
        let theta = PI / q;
        let p = success_probability_one(&lawn, &d.table(theta)).unwrap();
        let err = (p - hemisphere_probability(theta)).abs();
        worst = worst.max(err);
        parts.push(format!("pi/{q}: {p:.5}"));
    }
    (
        worst <= 0.01,
        format!("{} (max error {worst:.5}, tol 0.01)", parts.join(", ")),
    )
}

fn right_angle_universality(d: &Desk) -> Outcome {
    let t = d.table(PI / 2.0);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let p = success_probability_one(&random_lawn(d.grid.clone(), seed), &t).unwrap();
        worst = worst.max((p - 0.5).abs());
    }
    let opt = d.optimum(PI / 2.0, Setup::One).best_probability;
    let ok = worst <= 0.005 && (opt - 0.5).abs() <= 0.005;
    (
        ok,
        format!("10 random lawns max |P-1/2| = {worst:.2e}; annealed optimum {opt:.6} (tol 0.005)"),
    )
}

fn reflection_identity(d: &Desk) -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, f) in [0.2, 0.3, 0.45].into_iter().enumerate() {
        let theta = f * PI;
        let (t, r) = (d.table(theta), d.table(PI - theta));
        for seed in 0..5u64 {
            let s = 100 * k as u64 + 2 * seed;
            let cfg = TwoLawnConfig::new(
                random_lawn(d.grid.clone(), s),
                random_lawn(d.grid.clone(), s + 1),
            )
            .unwrap();
            worst = worst.max(verify_reflection_symmetry(&cfg, &t, &r).unwrap().difference);
        }
    }
    (
        worst < 1e-12,
        format!("max difference {worst:.2e} over 15 random configs (tol 1e-12)"),
    )
}

fn oracle_equivalence(_: &Desk) -> Outcome {
    let k = DeltaKernel::default();
    let mut worst: f64 = 0.0;
    let octa = Arc::new(octahedron());
    let t = build_interaction_unchecked(octa.clone(), PI / 2.0, k);
    for seed in 0..8 {
        let cfg = TwoLawnConfig::new(
            random_lawn(octa.clone(), seed),
            random_lawn(octa.clone(), seed + 50),
        )
        .unwrap();
        worst = worst.max(
            (success_probability_one(cfg.lawn1(), &t).unwrap()
                - brute_force_one(cfg.lawn1(), PI / 2.0, &k))
            .abs(),
        );
        worst = worst.max(
            (success_probability_two(&cfg, &t).unwrap() - brute_force_two(&cfg, PI / 2.0, &k))
                .abs(),
        );
    }
    let g = Arc::new(generate_fibonacci_antipodal(1000).unwrap());
    for theta in [0.2 * PI, 0.3 * PI, PI / 2.0, 0.8 * PI] {
        let t = build_interaction(g.clone(), theta, k).unwrap();
        let cfg = TwoLawnConfig::new(random_lawn(g.clone(), 1), random_lawn(g.clone(), 2)).unwrap();
        worst = worst.max(
            (success_probability_one(cfg.lawn1(), &t).unwrap()
                - brute_force_one(cfg.lawn1(), theta, &k))
            .abs(),
        );
        worst = worst.max(
            (success_probability_two(&cfg, &t).unwrap() - brute_force_two(&cfg, theta, &k)).abs(),
        );
    }

    let t = build_interaction(g.clone(), 0.3 * PI, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut delta_worst: f64 = 0.0;
    for mut s in [
        LawnState::One(random_lawn(g.clone(), 5)),
        LawnState::Two(
            TwoLawnConfig::new(random_lawn(g.clone(), 6), random_lawn(g.clone(), 7)).unwrap(),
        ),
    ] {
        let mut p = s.probability(&t).unwrap();
        for _ in 0..1000 {
            let which = if s.n_lawns() == 2 && rng.gen::<bool>() {
                Which::Second
            } else {
                Which::First
            };
            let site = rng.gen_range(0..g.len());
            let dp = delta_pair_toggle(&s, &t, which, site).unwrap();
            apply_pair_toggle(&mut s, which, site).unwrap();
            let q = s.probability(&t).unwrap();
            delta_worst = delta_worst.max((q - p - dp).abs());
            p = q;
        }
    }
    let ok = worst < 1e-12 && delta_worst < 1e-12;
    (ok, format!("evaluator vs brute force {worst:.2e}; delta vs recompute {delta_worst:.2e} over 2x1000 moves (tol 1e-12)"))
}

fn incremental_drift(d: &Desk) -> Outcome {
    let t = d.table(0.3 * PI);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut s = LawnState::Two(
        TwoLawnConfig::new(
            random_lawn(d.grid.clone(), 1),
            random_lawn(d.grid.clone(), 2),
        )
        .unwrap(),
    );
    let mut running = s.probability(&t).unwrap();
    for _ in 0..10_000 {
        let which = if rng.gen::<bool>() {
            Which::First
        } else {
            Which::Second
        };
        let site = rng.gen_range(0..d.grid.len());
        running += delta_pair_toggle(&s, &t, which, site).unwrap();
        apply_pair_toggle(&mut s, which, site).unwrap();
    }
    let drift = (running - s.probability(&t).unwrap()).abs();
    (
        drift < 1e-9,
        format!("drift after 10^4 toggles {drift:.2e} (tol 1e-9)"),
    )
}

fn cogwheel_advantage(d: &Desk) -> Outcome {
    let theta = 0.3 * PI;
    let replicas = d.search(theta, Setup::One, 10);
    let cogs: Vec<usize> = replicas
        .iter()
        .map(|r| count_state_cogs(&r.best_state)[0].classified())
        .collect();
    let sevens = cogs.iter().filter(|&&n| n == 7).count();
    let best = best_of(replicas).best_probability;
    let bar = hemisphere_probability(theta) + 0.005;
    let two = d.optimum(theta, Setup::Two);
    let two_cogs: Vec<usize> = count_state_cogs(&two.best_state)
        .iter()
        .map(|c| c.classified())
        .collect();
    let ok = best > bar && sevens >= 8 && two_cogs == [3, 3];
    (
        ok,
        format!(
            "one-lawn P = {best:.5} (> {bar:.3}), cogs per replica {cogs:?} ({sevens}/10 = 7); two-lawn P = {:.5}, cogs {two_cogs:?}",
            two.best_probability
        ),
    )
}

fn gap_reproduction(d: &Desk) -> Outcome {
    let t4 = PI / 4.0;
    let t5 = PI / 5.0;
    let gap_two = quantum_probability(t4) - d.optimum(t4, Setup::Two).best_probability;
    let gap_one = quantum_probability(t5) - d.optimum(t5, Setup::One).best_probability;
    let ok = (gap_two - 0.10355).abs() <= 0.002
        && (gap_one - 0.10451).abs() <= 0.002
        && gap_one > gap_two;
    (ok, format!("gap_two(pi/4) = {gap_two:.5} (0.10355 +/- 0.002), gap_one(pi/5) = {gap_one:.5} (0.10451 +/- 0.002), ordering {}", gap_one > gap_two))
}

fn hemisphere_near_optimality(d: &Desk) -> Outcome {
    let one = d.optimum(PI / 5.0, Setup::One).best_probability;
    let two = d.optimum(PI / 10.0, Setup::Two).best_probability;
    let ok = (one - 0.8).abs() <= 0.005 && (two - 0.9).abs() <= 0.005;
    (ok, format!("one-lawn pi/5 P = {one:.5} (4/5 +/- 0.005), two-lawn pi/10 P = {two:.5} (9/10 +/- 0.005)"))
}

fn odd_q_strictness(d: &Desk) -> Outcome {
    let p = d.optimum(PI / 5.0, Setup::Two).best_probability;
    (p >= 0.802, format!("two-lawn pi/5 P = {p:.5} (>= 0.802)"))
}

fn landmark(_: &Desk) -> Outcome {
    let n = PI / gap_maximizer_landmark();
    (
        (n - 4.5523).abs() <= 1e-3,
        format!("pi / landmark = {n:.6} (4.5523 +/- 1e-3)"),
    )
}

fn grasshopper(dir: &Path, threads: &str, args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_grasshopper"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads)
        .args(args)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn determinism(_: &Desk) -> Outcome {
    let d = tempfile::tempdir().unwrap();
    let fast = [
        "--sweeps",
        "5",
        "--cooling-ratio",
        "0.8",
        "--t-final-ratio",
        "1e-3",
        "--seed",
        "11",
        "--pairs",
        "3000",
    ];
    let runs = [("a", "1"), ("b", "1"), ("c", "4")];
    for (out, threads) in runs {
        let mut opt = vec!["optimize", "--setup", "two", "--theta", "0.3pi", "--out"];
        let dir = format!("opt-{out}");
        opt.push(&dir);
        opt.extend(fast);
        grasshopper(d.path(), threads, &opt);
        let mut sw = vec!["sweep", "--thetas", "pi/5,pi/2", "--out"];
        let dir = format!("sweep-{out}");
        sw.push(&dir);
        sw.extend(fast);
        grasshopper(d.path(), threads, &sw);
    }
    let files = [
        "opt-{}/best-two.json",
        "opt-{}/replicas.csv",
        "opt-{}/trace.csv",
        "sweep-{}/curve.csv",
        "sweep-{}/lawns/row-000-one.json",
        "sweep-{}/lawns/row-000-two.json",
        "sweep-{}/lawns/row-001-one.json",
        "sweep-{}/lawns/row-001-two.json",
    ];
    let mut differing = Vec::new();
    for f in files {
        let read = |run: &str| std::fs::read(d.path().join(f.replace("{}", run))).unwrap();
        let a = read("a");
        if a != read("b") || a != read("c") {
            differing.push(f);
        }
    }
    (
        differing.is_empty(),
        format!(
            "{} files compared across 2 runs x threads {{1, 4}}; differing: {differing:?}",
            files.len()
        ),
    )
}

fn main() {
    let desk = Desk::new();
    let criteria: [(&str, Check); 11] = [
        ("hemisphere baseline", hemisphere_baseline),
        ("pi/2 universality", right_angle_universality),
        ("exact reflection identity", reflection_identity),
        ("oracle equivalence", oracle_equivalence),
        ("incremental drift", incremental_drift),
        ("cogwheel advantage", cogwheel_advantage),
        ("gap reproduction", gap_reproduction),
        ("hemisphere near-optimality", hemisphere_near_optimality),
        ("odd-q two-lawn strictness", odd_q_strictness),
        ("landmark constant", landmark),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check(&desk);
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
