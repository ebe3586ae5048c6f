use std::path::{Path, PathBuf};

use clap::Args;
use fasctl_core::design::DesignFile;
use fasctl_core::lmi::{self, LmiProblem, LmiSolution};
use fasctl_core::matcore::{self, max_abs};
use fasctl_core::model::build_phi_e_closed;
use fasctl_core::observer::{self, SynthOptions};
use fasctl_core::plants::{self, PlantSpec, REGISTRY};
use fasctl_core::{augment, ControllerDesign, DescriptorAug, FasModel, Mat, ObserverDesign, Vector};
use serde::{Deserialize, Serialize};

use super::{fault_bound_check, read_file, to_json, PlantArgs};
use crate::error::{CliError, CliResult};

/// Tolerance on `TE + NC̃ − I` for synthesized designs.
const CONSTRAINT_TOL: f64 = 1e-8;
/// Published gains are printed to four decimals.
const FIXTURE_TOL: f64 = 5e-3;
const POLE_SLACK: f64 = 1e-6;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    /// Design file to check (repeatable).
    #[arg(long = "design")]
    pub designs: Vec<PathBuf>,
    /// Bundled published gains to check: electromech, ballbeam or all.
    #[arg(long = "fixture")]
    pub fixtures: Vec<String>,
    /// LMI problem and candidate solution as JSON.
    #[arg(long)]
    pub lmi: Option<PathBuf>,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub target: String,
    pub check: String,
    pub pass: bool,
    pub value: f64,
    /// `<` or `>`: the relation `value` must have to `limit`.
    pub relation: &'static str,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub failed: usize,
}

/// File layout accepted by `--lmi`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmiFile {
    pub problem: LmiProblem,
    pub solution: LmiSolution,
    #[serde(default = "default_margin")]
    pub min_margin: f64,
}

fn default_margin() -> f64 {
    1e-6
}

struct Checks {
    target: String,
    out: Vec<CheckResult>,
}

impl Checks {
    fn new(target: impl Into<String>) -> Self {
        Self { target: target.into(), out: Vec::new() }
    }

    fn push(&mut self, check: &str, value: f64, relation: &'static str, limit: f64, detail: String) {
        let pass = if relation == "<" { value < limit } else { value > limit };
        self.out.push(CheckResult { target: self.target.clone(), check: check.into(), pass, value, relation, limit, detail });
    }

    fn below(&mut self, check: &str, value: f64, limit: f64, detail: String) {
        self.push(check, value, "<", limit, detail);
    }

    fn above(&mut self, check: &str, value: f64, limit: f64, detail: String) {
        self.push(check, value, ">", limit, detail);
    }
}

fn observer_checks(c: &mut Checks, obs: &ObserverDesign, aug: &DescriptorAug, tol: f64, mu_e: f64) -> CliResult<()> {
    let residual = observer::check_constraint(&obs.t, &obs.n, aug)?;
    c.below("constraint", residual, tol, "max |TE + NC - I|".into());
    let max_re = observer::observer_poles(obs, aug)?.max_real;
    c.below("observer_poles", max_re, -mu_e + POLE_SLACK, "max Re eig(TP - LC) against -mu_e".into());
    Ok(())
}

fn lmi_checks(c: &mut Checks, obs: &ObserverDesign, aug: &DescriptorAug) -> CliResult<()> {
    if max_abs(&obs.p_e) == 0.0 {
        return Ok(());
    }
    let eps = SynthOptions::default().epsilon;
    let y_op = Vector::from_column_slice(&obs.y_op);
    let problem = lmi::assemble_theorem1(aug, obs.mu_e, obs.gamma_f, &y_op, eps)?;
    let x = problem.pack(&[obs.p_e.clone(), &obs.p_e * &obs.l, &obs.p_e * &obs.s, Mat::from_element(1, 1, obs.eta)])?;
    let report = lmi::verify(&problem, &LmiSolution { x, margin: obs.margin, iterations: 0 }, eps)?;
    c.above("lmi_margin", report.margin, eps, "recomputed -max eig over all blocks".into());
    Ok(())
}

fn controller_checks(c: &mut Checks, ctrl: &ControllerDesign, model: &FasModel) -> CliResult<()> {
    let closed = matcore::spectrum(&build_phi_e_closed(&model.sig, &ctrl.k)?)?;
    let blocks: Vec<Mat> = ctrl.blocks.iter().map(|b| b.f.clone()).collect();
    let want = matcore::spectrum(&matcore::block_diag(&blocks))?;
    let mut gap = 0.0_f64;
    let mut used = vec![false; want.eigenvalues.len()];
    for z in &closed.eigenvalues {
        let best = (0..want.eigenvalues.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| {
                (want.eigenvalues[i] - z).norm().total_cmp(&(want.eigenvalues[j] - z).norm())
            });
        match best {
            Some(j) => {
                used[j] = true;
                gap = gap.max((want.eigenvalues[j] - z).norm() / z.norm().max(1.0));
            }
            None => gap = f64::INFINITY,
        }
    }
    c.below("closed_loop_poles", gap, 1e-8, "relative gap between eig(Phi(A)) and eig(F)".into());
    c.below("closed_loop_stable", closed.max_real, 0.0, "max Re eig(Phi(A))".into());
    Ok(())
}

fn bound_check(c: &mut Checks, model: &FasModel, seed: u64) -> CliResult<()> {
    let b = fault_bound_check(model, seed, 2000)?;
    let ratio = if b.bound > 0.0 { b.worst_norm / b.bound } else { f64::INFINITY };
    c.below(
        "fault_bound",
        ratio,
        1.0 + 1e-12,
        format!("max |D1(y)| / bound over {} samples, bound {:.6e}", b.samples, b.bound),
    );
    Ok(())
}

fn plant_for(name: &str, override_spec: Option<&PlantSpec>) -> CliResult<FasModel> {
    match override_spec {
        Some(spec) if spec.name == name => Ok(spec.build()?),
        Some(spec) => Err(CliError::Usage(format!(
            "design is for '{name}' but the selected plant is '{}'",
            spec.name
        ))),
        None => Ok(PlantSpec::named(name).build()?),
    }
}

fn check_design(path: &Path, spec: Option<&PlantSpec>, mu_override: Option<f64>, seed: u64) -> CliResult<Vec<CheckResult>> {
    let file = DesignFile::from_json(&read_file(path)?).map_err(|e| CliError::parse(path, e))?;
    let model = plant_for(&file.plant, spec)?;
    let aug = augment(&model)?;
    let mut c = Checks::new(path.display().to_string());
    if let Some(obs) = &file.observer {
        let expect = (model.s() + model.q(), model.s() + model.q());
        if obs.t.shape() != expect || obs.l.shape() != (expect.0, model.p()) {
            return Err(CliError::parse(path, "observer matrices do not match the plant dimensions"));
        }
        observer_checks(&mut c, obs, &aug, CONSTRAINT_TOL, mu_override.unwrap_or(obs.mu_e))?;
        lmi_checks(&mut c, obs, &aug)?;
    }
    if let Some(ctrl) = &file.controller {
        controller_checks(&mut c, ctrl, &model)?;
    }
    bound_check(&mut c, &model, seed)?;
    Ok(c.out)
}

fn check_fixture(name: &str, seed: u64) -> CliResult<Vec<CheckResult>> {
    let model = plants::by_name(name)?;
    let aug = augment(&model)?;
    let g = plants::published_gains(name)?;
    let obs = ObserverDesign {
        t: g.t,
        n: g.n,
        l: g.l,
        s: Mat::zeros(aug.n(), aug.n() + aug.p),
        p_e: Mat::zeros(aug.n(), aug.n()),
        eta: g.eta,
        mu_e: g.mu_e,
        gamma_f: model.gamma_f,
        c1: 0.0,
        margin: 0.0,
        y_op: vec![0.0; aug.p],
    };
    let mut c = Checks::new(format!("fixture:{name}"));
    observer_checks(&mut c, &obs, &aug, FIXTURE_TOL, g.mu_e)?;
    bound_check(&mut c, &model, seed)?;
    Ok(c.out)
}

fn check_lmi(path: &Path) -> CliResult<Vec<CheckResult>> {
    let file: LmiFile = serde_json::from_str(&read_file(path)?).map_err(|e| CliError::parse(path, e))?;
    let report = lmi::verify(&file.problem, &file.solution, file.min_margin)?;
    let mut c = Checks::new(path.display().to_string());
    for b in &report.blocks {
        c.below(&format!("block:{}", b.name), b.max_eigenvalue, -file.min_margin + f64::EPSILON, "max eigenvalue".into());
    }
    c.above("lmi_margin", report.margin, file.min_margin, "-max eig over all blocks".into());
    Ok(c.out)
}

pub fn render(r: &VerifyReport) -> String {
    let mut out = String::new();
    for c in &r.checks {
        out.push_str(&format!(
            "{} {} {}: {:.6e} {} {:.3e} ({})\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.target,
            c.check,
            c.value,
            c.relation,
            c.limit,
            c.detail
        ));
    }
    out.push_str(&format!("{} passed, {} failed\n", r.passed, r.failed));
    out
}

pub fn run(args: &VerifyArgs) -> CliResult<()> {
    if args.designs.is_empty() && args.fixtures.is_empty() && args.lmi.is_none() {
        return Err(CliError::Usage("nothing to verify: give --design, --fixture or --lmi".into()));
    }
    let selected = args.plant.manifest.is_some() || args.plant.plant.is_some();
    let manifest = if selected { Some(args.plant.resolve()?) } else { None };
    let spec = manifest.as_ref().map(|m| &m.plant);
    let seed = manifest.as_ref().map_or(args.plant.seed.unwrap_or(0), |m| m.seed);
    let mu = manifest.as_ref().and_then(|m| m.synthesis.mu_e);

    let mut checks = Vec::new();
    for path in &args.designs {
        checks.extend(check_design(path, spec, mu, seed)?);
    }
    for name in &args.fixtures {
        let names: Vec<&str> = if name == "all" { REGISTRY.to_vec() } else { vec![name.as_str()] };
        for n in names {
            if !REGISTRY.contains(&n) {
                return Err(CliError::Usage(format!("no fixture for '{n}' (have: {})", REGISTRY.join(", "))));
            }
            checks.extend(check_fixture(n, seed)?);
        }
    }
    if let Some(path) = &args.lmi {
        checks.extend(check_lmi(path)?);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = VerifyReport { schema_version: 1, passed: checks.len() - failed, failed, checks };
    if args.json {
        print!("{}", to_json(&report)?);
    } else {
        print!("{}", render(&report));
    }
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} of {} checks failed", report.checks.len())));
    }
    Ok(())
}
