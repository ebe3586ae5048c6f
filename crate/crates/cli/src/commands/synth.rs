use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use fasctl_core::controller::{self, ControllerDesign};
use fasctl_core::design::DesignFile;
use fasctl_core::matcore::{self, serde_mat};
use fasctl_core::model::build_phi_e_closed;
use fasctl_core::observer::{self, SynthOptions};
use fasctl_core::{augment, DescriptorAug, FasModel, ObserverDesign, Vector};
use serde::Serialize;

use super::{complex_pairs, fault_bound_check, output_dir, to_json, write_file, z_matrix, FaultBoundCheck, PlantArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub plant: PlantArgs,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

pub struct Synthesized {
    pub model: FasModel,
    pub aug: DescriptorAug,
    pub observer: ObserverDesign,
    pub controller: ControllerDesign,
}

pub fn synthesize(m: &RunManifest) -> CliResult<Synthesized> {
    let model = m.plant.build()?;
    let aug = augment(&model)?;
    let y_op = match &m.synthesis.y_op {
        Some(v) => Vector::from_column_slice(v),
        None => Vector::zeros(model.p()),
    };
    let mut opts = SynthOptions::default();
    if let Some(eps) = m.synthesis.epsilon {
        opts.epsilon = eps;
    }
    let observer = observer::synthesize(&aug, m.mu_e()?, m.gamma_f()?, &y_op, &opts)?;
    if model.sig.xi() != 1 {
        return Err(CliError::Usage(format!(
            "plant has {} control blocks; manifests describe a single block",
            model.sig.xi()
        )));
    }
    let z = match &m.synthesis.z {
        Some(rows) => Some(z_matrix(rows, model.s())?),
        None => None,
    };
    let controller = controller::design_from_poles(&model.sig, &[m.poles()?], z.as_ref().map(std::slice::from_ref))?;
    Ok(Synthesized { model, aug, observer, controller })
}

#[derive(Debug, Serialize)]
pub struct SynthReport {
    pub plant: String,
    pub mu_e: f64,
    pub gamma_f: f64,
    pub constraint_residual: f64,
    pub lmi_margin: f64,
    pub eta: f64,
    pub c1: f64,
    pub decay_certified: bool,
    pub observer_poles: Vec<[f64; 2]>,
    #[serde(with = "serde_mat")]
    pub gain: fasctl_core::Mat,
    pub closed_loop_poles: Vec<[f64; 2]>,
    pub fault_bound: FaultBoundCheck,
    pub design_file: PathBuf,
}

pub fn report(m: &RunManifest, s: &Synthesized, design_file: PathBuf) -> CliResult<SynthReport> {
    let cert = observer::decay_certificate(&s.observer, &s.aug)?;
    let closed = matcore::spectrum(&build_phi_e_closed(&s.model.sig, &s.controller.k)?)?;
    Ok(SynthReport {
        plant: m.plant.name.clone(),
        mu_e: s.observer.mu_e,
        gamma_f: s.observer.gamma_f,
        constraint_residual: observer::check_constraint(&s.observer.t, &s.observer.n, &s.aug)?,
        lmi_margin: s.observer.margin,
        eta: s.observer.eta,
        c1: cert.c1,
        decay_certified: cert.is_decaying(),
        observer_poles: complex_pairs(&observer::observer_poles(&s.observer, &s.aug)?.eigenvalues),
        gain: s.controller.k.clone(),
        closed_loop_poles: complex_pairs(&closed.eigenvalues),
        fault_bound: fault_bound_check(&s.model, m.seed, 2000)?,
        design_file,
    })
}

fn fmt_pole([re, im]: [f64; 2]) -> String {
    if im == 0.0 {
        format!("{re:.6}")
    } else {
        format!("{re:.6} {} {:.6}i", if im < 0.0 { '-' } else { '+' }, im.abs())
    }
}

pub fn render(r: &SynthReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "plant              {}", r.plant);
    let _ = writeln!(out, "mu_e, gamma_f      {}, {}", r.mu_e, r.gamma_f);
    let _ = writeln!(out, "TE + NC - I        {:.3e}", r.constraint_residual);
    let _ = writeln!(out, "LMI margin         {:.6e}", r.lmi_margin);
    let _ = writeln!(out, "eta                {:.6e}", r.eta);
    let cert = if r.decay_certified { "certified" } else { "no envelope (c1 <= 0)" };
    let _ = writeln!(out, "c1                 {:.6}, {cert}", r.c1);
    let rows: Vec<String> = serde_mat::to_rows(&r.gain)
        .iter()
        .map(|row| row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", "))
        .collect();
    let _ = writeln!(out, "K                  [{}]", rows.join("; "));
    let _ = writeln!(
        out,
        "D1 bound           {:.6e} <= {:.6e} over {} samples: {}",
        r.fault_bound.worst_norm,
        r.fault_bound.bound,
        r.fault_bound.samples,
        if r.fault_bound.pass { "ok" } else { "VIOLATED" }
    );
    let _ = writeln!(out, "observer poles     closed-loop poles");
    for i in 0..r.observer_poles.len().max(r.closed_loop_poles.len()) {
        let a = r.observer_poles.get(i).map(|&p| fmt_pole(p)).unwrap_or_default();
        let b = r.closed_loop_poles.get(i).map(|&p| fmt_pole(p)).unwrap_or_default();
        let _ = writeln!(out, "  {a:<24} {b}");
    }
    let _ = writeln!(out, "design written to  {}", r.design_file.display());
    out
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let m = args.plant.resolve()?;
    let s = synthesize(&m)?;
    let dir = output_dir(&m)?;
    let path = dir.join("design.json");
    let file = DesignFile::new(m.plant.name.clone(), Some(s.observer.clone()), Some(s.controller.clone()));
    write_file(&path, &(file.to_json()? + "\n"))?;
    let r = report(&m, &s, path)?;
    if args.json {
        print!("{}", to_json(&r)?);
    } else {
        print!("{}", render(&r));
    }
    Ok(())
}
