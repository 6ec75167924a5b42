//! Runs every acceptance criterion and prints one verdict line each.
//!
//! `ACCEPTANCE_ONLY=1,6` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, run) in qspe_learn_suite::all() {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        match run() {
            Ok(o) => {
                println!("{o} ({:.1}s)", start.elapsed().as_secs_f64());
                if !o.pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("criterion {id:>2} [FAIL] error: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
