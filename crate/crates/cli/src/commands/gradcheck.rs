use tsr_core::gradcheck::{run_gradcheck, GradcheckConfig};

use crate::io::write_bytes;
use crate::{CliError, GradcheckArgs, RunConfig};

pub fn run(args: &GradcheckArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let gc = GradcheckConfig {
        trials: args.trials.unwrap_or(cfg.gradcheck_trials),
        seed: cfg.seed(),
        ..Default::default()
    };
    let results = run_gradcheck(&gc)?;
    println!(
        "{:<22} {:>6} {:>14} {:>9} {:>10}",
        "check", "trials", "max_rel_error", "failures", "time_ms"
    );
    for r in &results {
        println!(
            "{:<22} {:>6} {:>14.3e} {:>9} {:>10.1}  {}",
            r.name,
            r.trials,
            r.max_rel_error,
            r.failures,
            r.elapsed_ms,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&results).expect("results serialise");
        json.push('\n');
        write_bytes(path, json.as_bytes())?;
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "gradient mismatch above {:e} in: {}",
            gc.tolerance,
            failed.join(", ")
        )))
    }
}
