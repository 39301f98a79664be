//! Persist a synthetic dataset to JSON and reload it bit for bit.

use cp_rlct::{draw_true_params, sample_dataset, Dataset, ModelSpec};

fn main() -> cp_rlct::Result<()> {
    let spec = ModelSpec::new((2, 3, 2), 2, 2, 25)?;
    let truth = draw_true_params(&spec, 31)?;
    let data = sample_dataset(&spec, &truth, 32)?;

    let dir = std::env::temp_dir();
    let path = dir.join("cp_rlct_dataset.json");
    data.save_json(&path)?;
    println!("wrote {} tensors to {}", data.tensors.len(), path.display());

    let reloaded = Dataset::load_json(&path)?;
    assert_eq!(reloaded.spec, data.spec);
    assert_eq!(reloaded.seed, data.seed);
    let exact = data
        .tensors
        .iter()
        .zip(&reloaded.tensors)
        .all(|(a, b)| a.values() == b.values());
    println!("reload exact: {exact}");

    // First tensor, row-major, as stored on disk.
    println!("tensor[0] = {:?}", data.tensors[0].values());
    Ok(())
}
