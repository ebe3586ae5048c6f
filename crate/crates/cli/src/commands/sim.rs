use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use fasctl_core::design::DesignFile;
use fasctl_core::sim::{simulate, SimSummary};
use fasctl_core::{augment, ControllerDesign, ObserverDesign};
use rayon::prelude::*;

use super::synth::synthesize;
use super::{output_dir, read_file, to_json, write_file, PlantArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, Scenario};

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    /// Design file from `synth`; synthesized on the fly when omitted.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Built-in scenario to run (repeatable): scenario1, scenario2, none.
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    /// Drop the estimated-fault term from the control law.
    #[arg(long)]
    pub no_compensation: bool,
    /// Hold the input at zero and run the observer only.
    #[arg(long)]
    pub open_loop: bool,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Record every N-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Worker threads for independent scenarios.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn resolve(args: &SimArgs) -> CliResult<RunManifest> {
    let mut m = args.plant.resolve()?;
    if args.design.is_some() {
        m.design = args.design.clone();
    }
    if !args.scenarios.is_empty() {
        m.scenarios = args.scenarios.iter().map(|n| Scenario::named(n)).collect();
    }
    let mut list = m.scenario_list();
    for sc in &mut list {
        if args.no_compensation {
            sc.compensation = false;
        }
        if args.open_loop {
            sc.open_loop = true;
        }
    }
    m.scenarios = list;
    if args.t_end.is_some() || args.dt.is_some() || args.stride.is_some() {
        // materialize the base config so the overrides have something to edit
        let mut base = m.sim_config(&Scenario::named("none"), 0)?;
        base.fault = m.sim.as_ref().map(|s| s.fault.clone()).unwrap_or_default();
        if let Some(v) = args.t_end {
            base.t_end = v;
        }
        if let Some(v) = args.dt {
            base.dt = v;
        }
        if let Some(v) = args.stride {
            base.stride = v;
        }
        m.sim = Some(base);
    }
    let mut seen = BTreeSet::new();
    for sc in &m.scenarios {
        let valid = !sc.name.is_empty() && sc.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid {
            return Err(CliError::Usage(format!(
                "scenario name '{}' must be non-empty ASCII letters, digits, '-' or '_'",
                sc.name
            )));
        }
        if !seen.insert(sc.name.clone()) {
            return Err(CliError::Usage(format!("scenario '{}' listed twice", sc.name)));
        }
    }
    Ok(m)
}

fn load_design(path: &Path, plant: &str) -> CliResult<(ObserverDesign, Option<ControllerDesign>)> {
    let file = DesignFile::from_json(&read_file(path)?).map_err(|e| CliError::parse(path, e))?;
    if file.plant != plant {
        return Err(CliError::Usage(format!(
            "{} was designed for '{}', not '{plant}'",
            path.display(),
            file.plant
        )));
    }
    let observer = file
        .observer
        .ok_or_else(|| CliError::parse(path, "design file has no observer"))?;
    Ok((observer, file.controller))
}

pub struct ScenarioResult {
    pub name: String,
    pub summary: SimSummary,
    pub csv: String,
}

/// Runs every scenario of a resolved manifest.
pub fn run_manifest(m: &RunManifest, jobs: usize) -> CliResult<Vec<ScenarioResult>> {
    let model = m.plant.build()?;
    let (aug, observer, controller) = match &m.design {
        Some(path) => {
            let (o, c) = load_design(path, &m.plant.name)?;
            (augment(&model)?, o, c)
        }
        None => {
            let s = synthesize(m)?;
            (s.aug, s.observer, Some(s.controller))
        }
    };
    let configs = m
        .scenarios
        .iter()
        .map(|sc| m.sim_config(sc, model.q()).map(|cfg| (sc, cfg)))
        .collect::<CliResult<Vec<_>>>()?;
    for (sc, cfg) in &configs {
        cfg.validate(&model).map_err(|e| CliError::Usage(format!("scenario '{}': {e}", sc.name)))?;
        if !sc.open_loop && controller.is_none() {
            return Err(CliError::Usage("design file has no controller; use --open-loop".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Check(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|(sc, cfg)| {
                let ctrl = if sc.open_loop { None } else { controller.as_ref() };
                let traj = simulate(&model, &aug, &observer, ctrl, cfg, sc.compensation)?;
                let summary = SimSummary::new(&m.plant.name, cfg, &traj, sc.open_loop, sc.compensation)?;
                Ok(ScenarioResult { name: sc.name.clone(), summary, csv: traj.to_csv() })
            })
            .collect()
    })
}

pub fn run(args: &SimArgs) -> CliResult<()> {
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let m = resolve(args)?;
    let dir = output_dir(&m)?;
    let results = run_manifest(&m, args.jobs)?;
    write_file(&dir.join("manifest.toml"), &m.to_toml()?)?;
    for r in &results {
        write_file(&dir.join(format!("{}.csv", r.name)), &r.csv)?;
        write_file(&dir.join(format!("{}.summary.json", r.name)), &to_json(&r.summary)?)?;
        let abort_path = dir.join(format!("{}.abort.json", r.name));
        match &r.summary.abort {
            Some(a) => {
                write_file(&abort_path, &to_json(a)?)?;
                println!(
                    "{}: aborted at t = {:.4} ({}): {}; {} samples written",
                    r.name, a.t, a.kind, a.reason, r.summary.samples
                );
            }
            None => {
                // a stale abort file from an earlier run would be misleading
                if abort_path.exists() {
                    std::fs::remove_file(&abort_path).map_err(|e| CliError::io(&abort_path, e))?;
                }
                let itae = r.summary.metrics.state("x1").map_or(f64::NAN, |s| s.itae);
                println!(
                    "{}: {} samples to t = {}, |x| = {:.3e}, |e| = {:.3e}, ITAE(x1) = {itae:.6}",
                    r.name, r.summary.samples, r.summary.final_time, r.summary.final_state_norm, r.summary.final_error_norm
                );
            }
        }
    }
    Ok(())
}
