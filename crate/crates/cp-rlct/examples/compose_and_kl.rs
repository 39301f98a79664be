//! Build two CP parameterizations by hand, compose them, and compare the
//! models they induce.

use cp_rlct::{kl_divergence, CpParams, Matrix, Tensor3};

fn main() -> cp_rlct::Result<()> {
    // Rank-2 parameters for a 2x2x3 tensor.
    let a = Matrix::new(2, 2, vec![1.0, 0.5, -1.0, 2.0])?;
    let b = Matrix::new(2, 2, vec![1.0, 1.0, 0.0, -1.0])?;
    let c = Matrix::new(3, 2, vec![2.0, 0.0, 1.0, 1.0, 0.0, 3.0])?;
    let w = CpParams::new(a, b.clone(), c)?;

    let t: Tensor3 = w.compose();
    let (i_dim, j_dim, k_dim) = t.dims();
    println!("composed {i_dim}x{j_dim}x{k_dim} tensor:");
    for i in 0..i_dim {
        for j in 0..j_dim {
            let row: Vec<f64> = (0..k_dim).map(|k| t.get(i, j, k)).collect();
            println!("  [{i},{j},:] = {row:?}");
        }
    }

    // Scaling column h of A by s and column h of C by 1/s leaves the
    // composition unchanged: distinct parameters, same model.
    let a2 = Matrix::new(2, 2, vec![2.0, 0.5, -2.0, 2.0])?;
    let c2 = Matrix::new(3, 2, vec![1.0, 0.0, 0.5, 1.0, 0.0, 3.0])?;
    let w2 = CpParams::new(a2, b.clone(), c2)?;
    println!(
        "KL between the two parameterizations: {:.3e} (same model)",
        kl_divergence(&w, &w2)?
    );

    // Perturbing one entry moves the model.
    let a3 = Matrix::new(2, 2, vec![1.1, 0.5, -1.0, 2.0])?;
    let w3 = CpParams::new(a3, b, Matrix::new(3, 2, vec![2.0, 0.0, 1.0, 1.0, 0.0, 3.0])?)?;
    println!(
        "KL after perturbing A[0,0] by 0.1:     {:.4} (different model)",
        kl_divergence(&w, &w3)?
    );
    Ok(())
}
