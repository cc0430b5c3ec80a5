use clap::Args;
use trajgan::gradcheck::{composite_check, op_suite, Precision};
use trajgan::{Error, Result};

#[derive(Args)]
pub struct GradcheckArgs {
    /// Random instances per operation and per composite check
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Check every differentiable operation, then the full plugin ->
/// generator -> critic -> video-discriminator composite, at both
/// precisions, against central finite differences evaluated in f64.
pub fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let mut total = 0usize;
    let mut failed = 0usize;
    for prec in [Precision::Single, Precision::Double] {
        let label = match prec {
            Precision::Single => "single precision (f32 values, tolerance 1e-4)",
            Precision::Double => "double precision (f64 values, tolerance 1e-6)",
        };
        println!("== {label} ==");
        for rep in op_suite(prec, args.instances, args.seed)? {
            println!("{rep}");
            total += 1;
            failed += usize::from(!rep.passed);
        }
        for i in 0..args.instances {
            let rep = composite_check(prec, 2, args.seed.wrapping_add(i as u64))?;
            println!("{rep}");
            total += 1;
            failed += usize::from(!rep.passed);
        }
    }
    if failed > 0 {
        return Err(Error::Numeric(format!("{failed} of {total} gradient checks failed")));
    }
    println!("all {total} gradient checks passed");
    Ok(())
}
