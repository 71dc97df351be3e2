//! `gradcheck`: finite-difference verification across kernel families.

use potconv::gradcheck::{run_family, FamilyReport};
use potconv::model::KernelFamily;

use crate::{worker_threads, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Kernel family to check, or `all`.
    #[arg(long, default_value = "all")]
    pub kernel: String,
    /// Random seeds per family.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Maximum allowed relative error per parameter group.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Test hook: flip the analytic sign of groups whose key contains this
    /// substring, which must make the check fail.
    #[arg(long, hide = true)]
    pub sabotage: Option<String>,
}

pub fn run(args: Args) -> CmdResult {
    if args.trials == 0 {
        return Err(Failure::config("gradcheck needs at least one trial"));
    }
    if !(args.tolerance > 0.0) {
        return Err(Failure::config("tolerance must be positive"));
    }
    let families: Vec<KernelFamily> = if args.kernel == "all" {
        KernelFamily::ALL.to_vec()
    } else {
        vec![crate::commands::parse_kernel(&args.kernel)?]
    };

    // Families are independent; run them on capped worker threads and
    // report in family order.
    let workers = worker_threads().min(families.len()).max(1);
    let chunk_size = families.len().div_ceil(workers);
    let sabotage = args.sabotage.as_deref();
    let reports: Vec<Result<FamilyReport, potconv::Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = families
            .chunks(chunk_size)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&family| run_family(family, args.trials, sabotage))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("gradcheck worker"))
            .collect()
    });

    let mut failed: Option<String> = None;
    for report in reports {
        let report = report.map_err(Failure::from)?;
        eprintln!("family {}:", report.family.as_str());
        let mut groups = report.groups.clone();
        groups.sort_by(|a, b| a.key.cmp(&b.key));
        for g in &groups {
            eprintln!("  {:<24} max rel error {:.3e}", g.key, g.rel_error);
        }
        if report.passed(args.tolerance) {
            eprintln!(
                "  PASS (worst {:.3e} <= {:.1e})",
                report.max_error(),
                args.tolerance
            );
        } else {
            let worst = report.worst_group().expect("non-empty report");
            eprintln!(
                "  FAIL: group {} rel error {:.3e} > {:.1e}",
                worst.key, worst.rel_error, args.tolerance
            );
            failed.get_or_insert(format!(
                "{} group {} exceeds tolerance ({:.3e})",
                report.family.as_str(),
                worst.key,
                worst.rel_error
            ));
        }
    }
    match failed {
        Some(msg) => Err(Failure::check(msg)),
        None => Ok(()),
    }
}
