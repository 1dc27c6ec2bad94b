//! Writing and reading tensor and Tucker files.

use rtsms::cli::format::{load_tensor, load_tucker, read_file_header, save_tensor, save_tucker};
use rtsms::gallery::{function_tensor, runge};
use rtsms::rtsms::{rtsms, RtsmsConfig};
use rtsms::sketching::RandomStream;
use rtsms::tensor::relative_residual;

fn main() -> rtsms::Result<()> {
    let dir = std::env::temp_dir().join(format!("rtsms-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let a = function_tensor(runge, 64, 64, 64)?;
    let tensor_path = dir.join("runge.rten");
    save_tensor(&tensor_path, &a)?;
    assert_eq!(load_tensor(&tensor_path)?, a);

    let (dec, _) = rtsms(&a, &RtsmsConfig::hosvd(1e-8), &mut RandomStream::new(0))?;
    let tucker_path = dir.join("runge.rtuk");
    save_tucker(&tucker_path, &dec)?;
    let back = load_tucker(&tucker_path)?;

    let size = |p: &std::path::Path| std::fs::metadata(p).map(|m| m.len());
    println!(
        "{:?}: {} bytes",
        read_file_header(&tensor_path)?,
        size(&tensor_path)?
    );
    println!(
        "{:?}: {} bytes",
        read_file_header(&tucker_path)?,
        size(&tucker_path)?
    );
    println!(
        "residual after reload: {:.3e}",
        relative_residual(&a, &back)?
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
