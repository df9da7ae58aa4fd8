use std::fs::File;

use anyhow::Context;
use clap::Args;
use sensorlab::dataset::parse_records;
use serde_json::json;

use super::{input_path, output_dir};
use crate::config::FileConfig;
use crate::report::{envelope, sha256_file};
use crate::Common;

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
}

pub fn run(args: ValidateArgs, file: &FileConfig) -> anyhow::Result<()> {
    let path = input_path(&args.common, file)?;
    let reader = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let records = parse_records(reader).with_context(|| format!("validating {}", path.display()))?;
    if records.is_empty() {
        log::warn!("{} has a header but no data rows", path.display());
        eprintln!("warning: no data rows");
    }
    println!("rows: {}, errors: 0", records.len());
    if args.common.output_dir.is_some() {
        let out = output_dir(&args.common)?;
        let echo = FileConfig {
            input: Some(path.clone()),
            ..Default::default()
        };
        let report = envelope(
            "validate",
            Some(sha256_file(&path)?),
            None,
            json!({ "rows": records.len(), "errors": 0 }),
        )?;
        out.write_report("validate", &report)?;
        out.write_config("validate", &echo)?;
    }
    Ok(())
}
