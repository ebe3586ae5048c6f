pub mod metrics;
pub mod sim;
pub mod synth;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::Args;
use fasctl_core::matcore::serde_mat;
use fasctl_core::{Mat, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::manifest::{Pole, RunManifest};

/// Plant and synthesis selection shared by `synth`, `sim` and `verify`.
#[derive(Debug, Clone, Args)]
pub struct PlantArgs {
    /// Run manifest (TOML, or JSON by `.json` extension).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Registry plant: electromech or ballbeam.
    #[arg(long)]
    pub plant: Option<String>,
    /// Observer decay rate.
    #[arg(long)]
    pub mu_e: Option<f64>,
    /// Lipschitz constant used in the observer LMI.
    #[arg(long)]
    pub gamma_f: Option<f64>,
    /// Closed-loop poles, e.g. -2,-3,-4 or -1+2i,-1-2i.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = Pole::parse)]
    pub poles: Option<Vec<Pole>>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Seed for the sampled fault-matrix bound check.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PlantArgs {
    /// Manifest from file (if any) with command-line overrides applied.
    pub fn resolve(&self) -> CliResult<RunManifest> {
        let mut m = match (&self.manifest, &self.plant) {
            (Some(path), _) => RunManifest::load(path)?,
            (None, Some(name)) => RunManifest::for_plant(name),
            (None, None) => return Err(CliError::Usage("either --plant or --manifest is required".into())),
        };
        if let (Some(path), Some(name)) = (&self.manifest, &self.plant) {
            if *name != m.plant.name {
                return Err(CliError::Usage(format!(
                    "--plant {name} contradicts plant '{}' in {}",
                    m.plant.name,
                    path.display()
                )));
            }
        }
        if self.mu_e.is_some() {
            m.synthesis.mu_e = self.mu_e;
        }
        if self.gamma_f.is_some() {
            m.synthesis.gamma_f = self.gamma_f;
        }
        if self.poles.is_some() {
            m.synthesis.poles = self.poles.clone();
        }
        if self.out.is_some() {
            m.output_dir = self.out.clone();
        }
        if let Some(seed) = self.seed {
            m.seed = seed;
        }
        Ok(m)
    }
}

pub fn output_dir(m: &RunManifest) -> CliResult<PathBuf> {
    let dir = m.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Check(format!("cannot serialize output: {e}")))
}

pub fn z_matrix(rows: &[Vec<f64>], cols: usize) -> CliResult<Mat> {
    serde_mat::from_nested(rows, cols).map_err(|e| CliError::Usage(format!("synthesis.z: {e}")))
}

/// Sampled check of `‖D1(y)‖₂ ≤ D̄1` over states in the operating region.
#[derive(Debug, Clone, Serialize)]
pub struct FaultBoundCheck {
    pub samples: usize,
    pub worst_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn fault_bound_check(model: &fasctl_core::FasModel, seed: u64, samples: usize) -> CliResult<FaultBoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut taken = 0;
    for _ in 0..samples * 20 {
        if taken == samples {
            break;
        }
        let x = Vector::from_fn(model.s(), |_, _| rng.random_range(-1.0..1.0));
        if model.dynamics.region_violation(&x).is_some() {
            continue;
        }
        let y = model.output(&x, &Vector::zeros(model.q()));
        worst = worst.max(fasctl_core::matcore::norm2(&model.dynamics.fault_matrix(&y)));
        taken += 1;
    }
    if taken == 0 {
        return Err(CliError::Check("no samples landed inside the operating region".into()));
    }
    Ok(FaultBoundCheck {
        samples: taken,
        worst_norm: worst,
        bound: model.d1_bound,
        pass: worst <= model.d1_bound * (1.0 + 1e-12),
    })
}

/// `[re, im]` pairs for JSON output.
pub fn complex_pairs(values: &[fasctl_core::Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}
