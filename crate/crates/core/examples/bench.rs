//! A small benchmark sweep with per-configuration aggregates.

use rtsms::cli::report::AggregateRecord;
use rtsms::cli::{finish_report, run_algorithm, Algorithm, RunOptions, Target};
use rtsms::gallery::{GalleryName, GallerySpec};
use rtsms::sketching::RandomStream;
use rtsms::tensor::DEFAULT_RESIDUAL_CAP;

fn main() -> rtsms::Result<()> {
    let a = GallerySpec::new(GalleryName::Octant, vec![100; 3]).build()?;
    for alg in [
        Algorithm::Rhosvdsms,
        Algorithm::Sthosvd,
        Algorithm::AdaptiveRsthosvd,
    ] {
        for tol in [1e-2, 1e-3, 1e-4] {
            let mut runs = Vec::new();
            for seed in 0..5 {
                let (dec, mut report) = run_algorithm(
                    alg,
                    &a,
                    &Target::Tol(tol),
                    &RunOptions::default(),
                    &mut RandomStream::new(seed),
                )?;
                finish_report(&a, &dec, &mut report, DEFAULT_RESIDUAL_CAP)?;
                runs.push(report);
            }
            let agg = AggregateRecord::from_records("octant", a.dims(), &runs);
            println!("{}", serde_json::to_string(&agg).expect("serializable"));
        }
    }
    Ok(())
}
