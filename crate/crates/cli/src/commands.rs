use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use grasshopper_core::analysis::{
    count_cogs, count_state_cogs, default_thetas, hemisphere_probability, initializers,
    quantum_probability, sig12, sweep as run_sweep, verify_reflection_symmetry_at, SweepSetups,
    SweepStore,
};
use grasshopper_core::anneal::{best_of, replica_search_all, CheckpointPolicy, SearchOptions};
use grasshopper_core::format::LawnFile;
use grasshopper_core::grid::{generate_fibonacci_antipodal, SphericalGrid};
use grasshopper_core::kernel::{
    admissible_range, build_interaction, build_interaction_cached, DeltaKernel, InteractionTable,
};
use grasshopper_core::lawn::{LawnState, Setup, TwoLawnConfig};

use crate::config::{parse_theta, Angle, GridSource, RunConfig};
use crate::{Failure, LawnArgs, RunArgs};

pub fn gridgen(pairs: usize, out: &Path) -> Result<(), Failure> {
    let grid = generate_fibonacci_antipodal(pairs)?;
    grid.save(out)?;
    println!("N = {}", grid.len());
    println!("h = {}", sig12(grid.spacing_h()));
    println!("content_hash = {}", grid.content_hash());
    Ok(())
}

fn merge(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.grid {
        cfg.grid = Some(GridSource::Path(p.clone()));
    }
    if let Some(n) = args.pairs {
        cfg.grid = Some(GridSource::Fibonacci { n_pairs: n });
    }
    if let Some(s) = &args.setup {
        cfg.setup = Some(s.clone());
    }
    if let Some(t) = &args.theta {
        cfg.theta = Some(Angle::Expr(t.clone()));
    }
    if let Some(list) = &args.thetas {
        cfg.theta_list = Some(list.iter().map(|t| Angle::Expr(t.clone())).collect());
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(n) = args.replicas {
        cfg.n_replicas = n;
    }
    if let Some(t) = args.t_initial {
        cfg.schedule.t_initial = Some(t);
    }
    if let Some(r) = args.t_final_ratio {
        cfg.schedule.t_final_ratio = r;
    }
    if let Some(r) = args.cooling_ratio {
        cfg.schedule.cooling_ratio = r;
    }
    if let Some(s) = args.sweeps {
        cfg.schedule.sweeps_per_temperature = s;
    }
    if let Some(d) = &args.table_cache {
        cfg.table_cache = Some(d.clone());
    }
    if let Some(n) = args.checkpoint_every {
        cfg.checkpoint_every = n;
    }
    if let Some(d) = &args.out {
        cfg.output_dir = Some(d.clone());
    }
    cfg.normalize_angles()?;
    Ok(cfg)
}

fn checked_kernel(cfg: &RunConfig) -> Result<DeltaKernel, Failure> {
    Ok(DeltaKernel::new(cfg.kernel.shape, cfg.kernel.half_width)?)
}

fn parse_setup(text: Option<&str>, default: &str) -> Result<SweepSetups, Failure> {
    match text.unwrap_or(default) {
        "one" => Ok(SweepSetups::One),
        "two" => Ok(SweepSetups::Two),
        "both" => Ok(SweepSetups::Both),
        other => Err(Failure::invalid(format!(
            "setup must be one, two or both, got {other:?}"
        ))),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn table_for(
    grid: &Arc<SphericalGrid>,
    theta: f64,
    kernel: DeltaKernel,
    cache: Option<&Path>,
) -> Result<InteractionTable, Failure> {
    Ok(match cache {
        Some(dir) => build_interaction_cached(grid.clone(), theta, kernel, dir)?,
        None => build_interaction(grid.clone(), theta, kernel)?,
    })
}

fn search_options(cfg: &RunConfig, seed: u64) -> SearchOptions {
    SearchOptions {
        schedule: cfg.schedule,
        n_replicas: cfg.n_replicas,
        base_seed: seed,
    }
}

pub fn optimize(args: &RunArgs) -> Result<(), Failure> {
    let cfg = merge(args)?;
    let setup = match parse_setup(cfg.setup.as_deref(), "one")? {
        SweepSetups::One => Setup::One,
        SweepSetups::Two => Setup::Two,
        SweepSetups::Both => return Err(Failure::invalid("optimize takes setup one or two")),
    };
    let theta = cfg
        .theta
        .as_ref()
        .ok_or_else(|| Failure::invalid("no jump angle given (--theta or \"theta\")"))?
        .radians()?;
    let kernel = checked_kernel(&cfg)?;
    let seed = cfg.require_seed()?;
    cfg.check_replicas()?;
    let out = cfg.require_output_dir()?.to_path_buf();
    let grid = cfg.require_grid()?.load()?;
    grasshopper_core::kernel::check_theta(&grid, &kernel, theta)?;

    create_dir(&out)?;
    cfg.write_effective(&out)?;
    let table = table_for(&grid, theta, kernel, cfg.table_cache.as_deref())?;
    let inits = initializers(&grid, theta, setup, seed, &cfg.initializers)?;
    let policy = CheckpointPolicy {
        dir: out.join("checkpoints"),
        tag: format!("optimize-{setup}"),
        every_stages: cfg.checkpoint_every,
        halt_after_stages: args.halt_after_stages,
    };
    let results = replica_search_all(&inits, &table, &search_options(&cfg, seed), Some(&policy))?;

    let mut replicas = String::from("replica_id,seed,initializer,best_probability,n_cogs\n");
    for r in &results {
        let cogs: Vec<String> = count_state_cogs(&r.best_state)
            .iter()
            .map(|c| c.classified().to_string())
            .collect();
        let init = cfg.initializers[r.replica_id % cfg.initializers.len()];
        let init = serde_json::to_value(init).map_err(|e| Failure::runtime(e.to_string()))?;
        let _ = writeln!(
            replicas,
            "{},{},{},{},{}",
            r.replica_id,
            r.seed,
            init.as_str().unwrap_or_default(),
            sig12(r.best_probability),
            cogs.join(";")
        );
    }
    write_file(&out.join("replicas.csv"), &replicas)?;

    let best = best_of(results);
    let mut trace =
        String::from("stage,temperature,mean_probability,acceptance_rate,best_probability\n");
    for (k, e) in best.trace.iter().enumerate() {
        let _ = writeln!(
            trace,
            "{k},{},{},{},{}",
            sig12(e.temperature),
            sig12(e.mean_probability),
            sig12(e.acceptance_rate),
            sig12(e.best_probability)
        );
    }
    write_file(&out.join("trace.csv"), &trace)?;
    let lawn_path = out.join(format!("best-{setup}.json"));
    LawnFile::from_state(&best.best_state, theta, kernel, best.best_probability)
        .save(&lawn_path)?;

    let q = quantum_probability(theta);
    let cogs = count_state_cogs(&best.best_state);
    println!("setup = {setup}");
    println!("theta = {}", sig12(theta));
    println!("P = {}", sig12(best.best_probability));
    println!("Q = {}", sig12(q));
    println!("hemisphere = {}", sig12(hemisphere_probability(theta)));
    println!("gap = {}", sig12(q - best.best_probability));
    for (k, c) in cogs.iter().enumerate() {
        println!(
            "cogs_lawn{} = {} (confidence {})",
            k + 1,
            c.classified(),
            sig12(c.confidence)
        );
    }
    println!("best_replica = {} (seed {})", best.replica_id, best.seed);
    println!("lawn = {}", lawn_path.display());
    Ok(())
}

pub fn sweep(args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = merge(args)?;
    let setups = parse_setup(cfg.setup.as_deref(), "both")?;
    let kernel = checked_kernel(&cfg)?;
    let seed = cfg.require_seed()?;
    cfg.check_replicas()?;
    let out = cfg.require_output_dir()?.to_path_buf();
    let grid = cfg.require_grid()?.load()?;

    let mut thetas = match (&cfg.theta_list, &cfg.theta) {
        (Some(list), _) => list
            .iter()
            .map(Angle::radians)
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(t)) => vec![t.radians()?],
        (None, None) => default_thetas(&grid, &kernel),
    };
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    for &t in &thetas {
        grasshopper_core::kernel::check_theta(&grid, &kernel, t)?;
    }
    cfg.theta_list = Some(thetas.iter().map(|&t| Angle::Radians(t)).collect());
    cfg.theta = None;

    create_dir(&out)?;
    cfg.write_effective(&out)?;
    let store = SweepStore {
        dir: out.clone(),
        table_cache: cfg.table_cache.clone(),
        checkpoint_every: cfg.checkpoint_every,
        halt_after_stages: args.halt_after_stages,
    };
    let curve = run_sweep(
        &grid,
        &thetas,
        setups,
        kernel,
        &cfg.initializers,
        &search_options(&cfg, seed),
        Some(&store),
    )?;
    let csv_path = out.join("curve.csv");
    curve.write_csv(&csv_path)?;
    let show = |x: Option<f64>| x.map(sig12).unwrap_or_else(|| "-".into());
    for r in &curve.rows {
        println!(
            "theta = {}  p_one = {}  p_two = {}  q = {}",
            sig12(r.theta),
            show(r.p_one),
            show(r.p_two),
            sig12(r.q)
        );
    }
    println!("curve = {}", csv_path.display());
    Ok(())
}

fn load_lawn(args: &LawnArgs) -> Result<(LawnFile, LawnState), Failure> {
    let file = LawnFile::load(&args.lawn)?;
    let source = match (&args.grid, args.pairs) {
        (Some(p), _) => GridSource::Path(p.clone()),
        (None, Some(n)) => GridSource::Fibonacci { n_pairs: n },
        (None, None) => return Err(Failure::invalid("no grid given (--grid or --pairs)")),
    };
    let cfg = RunConfig {
        grid: Some(source),
        ..RunConfig::default()
    };
    let grid = cfg.require_grid()?.load()?;
    let state = file.to_state(grid)?;
    Ok((file, state))
}

fn lawn_theta(args: &LawnArgs, file: &LawnFile) -> Result<f64, Failure> {
    match &args.theta {
        Some(t) => parse_theta(t),
        None => Ok(file.theta),
    }
}

pub fn eval(args: &LawnArgs) -> Result<(), Failure> {
    let (file, state) = load_lawn(args)?;
    let theta = lawn_theta(args, &file)?;
    let table = build_interaction(state.grid().clone(), theta, file.kernel)?;
    let p = state.probability(&table)?;
    let q = quantum_probability(theta);
    println!("setup = {}", state.setup());
    println!("theta = {}", sig12(theta));
    println!("P = {}", sig12(p));
    if theta.to_bits() == file.theta.to_bits() {
        println!("stored_P = {}", sig12(file.probability));
        println!("difference = {}", sig12((p - file.probability).abs()));
    }
    println!("Q = {}", sig12(q));
    println!("hemisphere = {}", sig12(hemisphere_probability(theta)));
    println!("gap = {}", sig12(q - p));
    Ok(())
}

pub fn analyze(args: &LawnArgs) -> Result<(), Failure> {
    let (file, state) = load_lawn(args)?;
    let theta = lawn_theta(args, &file)?;
    println!("setup = {}", state.setup());
    println!("theta = {}", sig12(theta));
    for (k, lawn) in state.lawns().into_iter().enumerate() {
        let c = count_cogs(lawn);
        println!(
            "cogs_lawn{} = {} (dominant harmonic {}, confidence {})",
            k + 1,
            c.classified(),
            c.n_cogs,
            sig12(c.confidence)
        );
    }
    // A single lawn L is the two-lawn configuration {L, complement(L)}.
    let config = match &state {
        LawnState::One(l) => TwoLawnConfig::new(l.clone(), l.complement())?,
        LawnState::Two(c) => c.clone(),
    };
    let (min, max) = admissible_range(state.grid(), &file.kernel);
    let reflected = PI - theta;
    if (min..=max).contains(&theta) && (min..=max).contains(&reflected) {
        let r = verify_reflection_symmetry_at(&config, theta, file.kernel)?;
        println!("P(theta) = {}", sig12(r.p_theta));
        println!("P_reflected(pi - theta) = {}", sig12(r.p_reflected));
        println!("reflection_difference = {}", sig12(r.difference));
    } else {
        println!("reflection check skipped: pi - theta is outside the admissible range");
    }
    Ok(())
}
