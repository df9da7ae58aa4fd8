use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use sensorlab::dataset::write_records;
use sensorlab::synth::{self, VarSystem};
use serde::Deserialize;
use serde_json::json;

use super::{output_dir, DEFAULT_SEED};
use crate::config::{pick, pick_required, FileConfig};
use crate::report::{envelope, sha256_file};
use crate::Common;

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// separable, schedule or var_system.
    #[arg(long)]
    pub profile: Option<String>,
    /// Number of rows, at least 10.
    #[arg(long)]
    pub size: Option<usize>,
    /// Destination CSV file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Multiplies the var_system noise scales; 0 gives a noiseless system.
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// JSON file with `coefficients`, `mean` and `noise_sigma` for var_system.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSpec {
    coefficients: Vec<Vec<Vec<f64>>>,
    mean: Vec<f64>,
    noise_sigma: Vec<f64>,
}

/// Ground-truth file written next to a var_system dataset.
pub fn sidecar_path(output: &std::path::Path) -> PathBuf {
    output.with_extension("truth.json")
}

pub fn run(args: GenerateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let profile = pick_required(args.profile, &file.profile, "profile")?;
    let size = pick(args.size, &file.size, 1000);
    let seed = pick(args.common.seed, &file.seed, DEFAULT_SEED);
    let output = pick_required(args.output, &file.output, "output")?;
    let noise_scale = pick(args.noise_scale, &file.noise_scale, 1.0);
    let system_path = args.system.or_else(|| file.system.clone());
    let mut echo = FileConfig {
        profile: Some(profile.clone()),
        size: Some(size),
        seed: Some(seed),
        output: Some(output.clone()),
        ..Default::default()
    };

    let mut system_digest = None;
    let mut truth = None;
    let records = match profile.as_str() {
        "separable" => synth::separable(size, seed)?,
        "schedule" => synth::schedule(size, seed)?,
        "var_system" => {
            if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
                bail!("noise scale must be finite and non-negative, got {noise_scale}");
            }
            let system = match &system_path {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let spec: SystemSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                    system_digest = Some(sha256_file(path)?);
                    VarSystem::with_mean(spec.coefficients, spec.mean, spec.noise_sigma)?
                }
                None => VarSystem::default_system(),
            }
            .scaled_noise(noise_scale);
            echo.noise_scale = Some(noise_scale);
            echo.system = system_path.clone();
            let records = system.records(size, seed)?;
            truth = Some(system);
            records
        }
        other => bail!("unknown profile `{other}`; expected separable, schedule or var_system"),
    };

    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    write_records(&mut buf, &records)?;
    std::fs::write(&output, &buf).with_context(|| format!("writing {}", output.display()))?;
    let mut sidecar = None;
    if let Some(system) = &truth {
        let path = sidecar_path(&output);
        let mut text = serde_json::to_string_pretty(&json!({
            "order": system.order(),
            "spectral_radius": system.spectral_radius(),
            "system": system,
            "seed": seed,
        }))?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        sidecar = Some(path);
    }
    println!("wrote {} rows to {}", records.len(), output.display());

    if args.common.output_dir.is_some() {
        let out = output_dir(&args.common)?;
        let report = envelope(
            "generate",
            system_digest,
            Some(seed),
            json!({
                "profile": profile,
                "rows": records.len(),
                "output_sha256": sha256_file(&output)?,
                "sidecar": sidecar,
            }),
        )?;
        out.write_report("generate", &report)?;
        out.write_config("generate", &echo)?;
    }
    Ok(())
}
