use std::fmt::Write as _;

use clap::Args;
use sensorlab::timeseries::{
    adf_test, chrono_split, fit_var, forecast, granger_all_pairs, select_order, ForecastMode, SignificanceLevel, TimeSeriesFrame,
};
use serde_json::{json, Value};

use super::{base_echo, input_path, load, missing_policy, output_dir};
use crate::config::{pick, switch, FileConfig};
use crate::report::envelope;
use crate::Common;

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: Common,
    /// VAR order; ignored when --select is given.
    #[arg(long)]
    pub order: Option<usize>,
    /// Choose the order by AIC over 1..=PMAX.
    #[arg(long, value_name = "PMAX")]
    pub select: Option<usize>,
    /// Trailing observations held out for the forecast.
    #[arg(long)]
    pub n_test: Option<usize>,
    /// one_step_with_actuals or recursive.
    #[arg(long)]
    pub mode: Option<String>,
    /// Significance level for the ADF and Granger tests: 0.01, 0.05 or 0.10.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub adf_max_lag: Option<usize>,
    /// Lag for the Granger tests; defaults to the VAR order.
    #[arg(long)]
    pub granger_lag: Option<usize>,
    /// Model first differences instead of levels.
    #[arg(long)]
    pub difference: bool,
}

fn entry<T: serde::Serialize, E: std::fmt::Display>(result: Result<T, E>) -> anyhow::Result<Value> {
    Ok(match result {
        Ok(v) => json!({ "result": serde_json::to_value(v)? }),
        Err(e) => json!({ "error": e.to_string() }),
    })
}

fn adf_section(frame: &TimeSeriesFrame, max_lag: Option<usize>, level: SignificanceLevel) -> anyhow::Result<Value> {
    let mut out = serde_json::Map::new();
    for (j, name) in frame.names().iter().enumerate() {
        let result = adf_test(&frame.column(j), max_lag, level);
        if let Err(e) = &result {
            log::warn!("ADF on {name}: {e}");
        }
        out.insert(name.clone(), entry(result)?);
    }
    Ok(Value::Object(out))
}

pub fn run(args: ForecastArgs, file: &FileConfig) -> anyhow::Result<()> {
    let policy = missing_policy(&args.common, file)?;
    let loaded = load(&input_path(&args.common, file)?, policy)?;
    let n_test = pick(args.n_test, &file.n_test, 5);
    let mode_name = pick(args.mode, &file.mode, "one_step_with_actuals".into());
    let mode: ForecastMode = mode_name.parse()?;
    let level = pick(args.level, &file.level, 0.05);
    let adf_level: SignificanceLevel = format!("{level}").parse()?;
    let adf_max_lag = args.adf_max_lag.or(file.adf_max_lag);
    let difference = switch(args.difference, &file.difference);
    let select = args.select.or(file.select);

    let mut frame = TimeSeriesFrame::from_records(&loaded.records)?;
    if difference {
        frame = frame.difference()?;
    }
    let (train, test) = chrono_split(&frame, n_test)?;

    let (order, lag_selection) = match select {
        Some(p_max) => {
            let selection = select_order(&train, p_max)?;
            (selection.chosen, Some(selection))
        }
        None => (pick(args.order, &file.order, 3), None),
    };
    let model = fit_var(&train, order)?;
    let result = forecast(&model, &train, Some(&test), n_test, mode)?;
    let granger_lag = pick(args.granger_lag, &file.granger_lag, order);

    let adf = adf_section(&train, adf_max_lag, adf_level)?;
    let granger = match granger_all_pairs(&train, granger_lag, level) {
        Ok(pairs) => json!({ "result": pairs }),
        Err(e) => {
            log::warn!("Granger tests: {e}");
            json!({ "error": e.to_string() })
        }
    };

    let names = result.names.clone();
    let rmse = result.rmse.clone().unwrap_or_default();
    for (name, r) in names.iter().zip(&rmse) {
        println!("{name:>5} RMSE {r:.6}");
    }

    let out = output_dir(&args.common)?;
    let mut table = String::from("step_index,series,actual,predicted\n");
    for step in 0..n_test {
        for (j, name) in names.iter().enumerate() {
            let actual = result.actual.as_ref().map(|a| a[(step, j)]).unwrap_or(f64::NAN);
            writeln!(table, "{},{name},{actual},{}", step + 1, result.predicted[(step, j)])?;
        }
    }
    out.write("forecast.csv", &table)?;

    let mut echo = base_echo(&loaded, None, policy);
    echo.order = Some(order);
    echo.select = select;
    echo.n_test = Some(n_test);
    echo.mode = Some(mode_name);
    echo.level = Some(level);
    echo.adf_max_lag = adf_max_lag;
    echo.granger_lag = Some(granger_lag);
    echo.difference = Some(difference);

    let rmse_by_series: serde_json::Map<_, _> = names.iter().cloned().zip(rmse.iter().map(|&r| json!(r))).collect();
    let report = envelope(
        "forecast",
        Some(loaded.sha256.clone()),
        None,
        json!({
            "series": names,
            "differenced": difference,
            "n_obs": frame.n_obs(),
            "n_train": train.n_obs(),
            "n_test": n_test,
            "order": order,
            "lag_selection": lag_selection,
            "mode": mode,
            "rmse": rmse_by_series,
            "adf": adf,
            "granger": granger,
            "model": {
                "intercept": model.intercept,
                "coefficients": model.coefficients,
                "sigma": model.sigma,
                "t_effective": model.t_effective,
            },
        }),
    )?;
    out.write_report("forecast", &report)?;
    out.write_config("forecast", &echo)?;
    Ok(())
}
