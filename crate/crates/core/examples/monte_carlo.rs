//! Run a small RMSE sweep from code and print the table as CSV.

use tbdoa::bench::report::format_csv;
use tbdoa::bench::{preset, run_monte_carlo, Method};

fn main() -> tbdoa::error::Result<()> {
    let mut cfg = preset("exp1")?;
    cfg.trials = 10;
    cfg.seed = 42;
    cfg.snr_db = vec![Some(-5.0), Some(5.0), Some(15.0)];
    cfg.methods = vec![Method::Proposed, Method::Als, Method::Esprit];
    let out = run_monte_carlo(&cfg, 1)?;
    print!("{}", format_csv(&out.table)?);
    println!("failure fraction {:.3}", out.table.failure_fraction());
    Ok(())
}
