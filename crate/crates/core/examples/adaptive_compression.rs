//! Adaptive compression of a smooth function tensor at several tolerances.

use rtsms::gallery::{function_tensor, runge};
use rtsms::rtsms::{rtsms, RtsmsConfig};
use rtsms::sketching::RandomStream;
use rtsms::tensor::relative_residual;

fn main() -> rtsms::Result<()> {
    let a = function_tensor(runge, 120, 120, 120)?;
    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>9}",
        "tol", "ranks", "raw", "residual", "seconds"
    );
    for tol in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
        let (dec, report) = rtsms(&a, &RtsmsConfig::hosvd(tol), &mut RandomStream::new(0))?;
        println!(
            "{:>8.0e} {:>12} {:>12} {:>12.3e} {:>9.4}",
            tol,
            format!("{:?}", dec.ranks()),
            format!("{:?}", report.ranks_raw),
            relative_residual(&a, &dec)?,
            report.seconds.total
        );
    }
    Ok(())
}
