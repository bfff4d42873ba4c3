#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use affinity_cli::{run, Cli, Outcome, RunConfig};
use affinity_core::io::ifs_to_json;
use affinity_core::{AffineIfs, AffineMap, Matrix};
use clap::Parser;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rotation(scale: f64, angle: f64) -> Matrix {
    let (s, c) = angle.sin_cos();
    Matrix::from_rows(&[vec![scale * c, -scale * s], vec![scale * s, scale * c]]).unwrap()
}

pub fn conformal_pair() -> AffineIfs {
    let a = rotation(0.5, PI / 5.0);
    AffineIfs::new("conformal", vec![AffineMap::new(a, vec![0.0, 0.0]), AffineMap::new(a, vec![0.5, 0.5])]).unwrap()
}

pub fn diagonal_triple() -> AffineIfs {
    let a = Matrix::diag(&[0.5, 0.25]);
    let t = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.75]];
    AffineIfs::new("diagonal", t.iter().map(|t| AffineMap::new(a, t.to_vec())).collect()).unwrap()
}

pub fn clamp_triple() -> AffineIfs {
    let a = Matrix::diag(&[0.6]);
    AffineIfs::new("clamp", (0..3).map(|i| AffineMap::new(a, vec![0.2 * i as f64])).collect()).unwrap()
}

/// Two maps exchanged by the coordinate swap.
pub fn swap_pair() -> AffineIfs {
    AffineIfs::new(
        "swap",
        vec![
            AffineMap::new(Matrix::diag(&[0.5, 0.25]), vec![0.0, 0.0]),
            AffineMap::new(Matrix::diag(&[0.25, 0.5]), vec![1.0, 1.0]),
        ],
    )
    .unwrap()
}

pub fn generic_pair() -> AffineIfs {
    AffineIfs::new(
        "generic",
        vec![
            AffineMap::new(Matrix::from_rows(&[vec![0.42, 0.11], vec![-0.07, 0.28]]).unwrap(), vec![0.0, 0.0]),
            AffineMap::new(Matrix::from_rows(&[vec![0.31, -0.15], vec![0.12, 0.36]]).unwrap(), vec![1.0, 0.5]),
        ],
    )
    .unwrap()
}

/// Random invertible 2×2 maps with operator norm below `max_norm`.
pub fn random_ifs(rng: &mut ChaCha8Rng, maps: usize, max_norm: f64) -> AffineIfs {
    let maps = (0..maps)
        .map(|i| loop {
            let rows: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.gen_range(-0.6..0.6)).collect()).collect();
            let m = Matrix::from_rows(&rows).unwrap();
            let s = affinity_core::singular_values(&m).unwrap();
            if s.largest() < max_norm && s.smallest() > 0.02 {
                break AffineMap::new(m, vec![i as f64, 0.0]);
            }
        })
        .collect();
    AffineIfs::new("random", maps).unwrap()
}

pub fn write_ifs(dir: &Path, ifs: &AffineIfs) -> PathBuf {
    let path = dir.join(format!("{}.json", ifs.name()));
    std::fs::write(&path, ifs_to_json(ifs)).unwrap();
    path
}

pub fn config(args: &[&str]) -> RunConfig {
    let mut argv = vec!["affinity"];
    argv.extend_from_slice(args);
    RunConfig::from_cli(Cli::try_parse_from(argv).unwrap()).unwrap()
}

pub fn run_args(args: &[&str]) -> Outcome {
    run(&config(args)).unwrap()
}
