//! Fixture systems shared by the benchmarks.

use affinity_core::{AffineIfs, AffineMap, CylinderFunction, Matrix};

/// Two non-commuting 2×2 maps with operator norm below 1/2.
pub fn generic_pair() -> AffineIfs {
    AffineIfs::new(
        "bench-pair",
        vec![
            AffineMap::new(Matrix::from_rows(&[vec![0.42, 0.11], vec![-0.07, 0.28]]).unwrap(), vec![0.0, 0.0]),
            AffineMap::new(Matrix::from_rows(&[vec![0.31, -0.15], vec![0.12, 0.36]]).unwrap(), vec![1.0, 0.5]),
        ],
    )
    .expect("fixture is well formed")
}

/// Three-map 3-D system for the Jacobi path.
pub fn generic_triple_3d() -> AffineIfs {
    let rows = |r: [[f64; 3]; 3]| r.iter().map(|x| x.to_vec()).collect::<Vec<_>>();
    let maps = [
        [[0.4, 0.1, 0.0], [0.0, 0.3, 0.1], [0.05, 0.0, 0.2]],
        [[0.3, -0.1, 0.05], [0.1, 0.35, 0.0], [0.0, 0.1, 0.25]],
        [[0.2, 0.0, 0.1], [0.05, 0.4, 0.0], [0.0, -0.1, 0.3]],
    ]
    .iter()
    .enumerate()
    .map(|(i, m)| AffineMap::new(Matrix::from_rows(&rows(*m)).unwrap(), vec![i as f64, 0.0, 0.0]))
    .collect();
    AffineIfs::new("bench-3d", maps).expect("fixture is well formed")
}

pub fn natural(ifs: AffineIfs) -> CylinderFunction {
    CylinderFunction::natural(ifs).expect("fixture maps are invertible")
}
