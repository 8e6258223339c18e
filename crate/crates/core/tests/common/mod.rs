#![allow(dead_code)]

use std::path::{Path, PathBuf};

use embedot::io::{save_embedding, ManifestEntry, PairManifest};
use embedot::{Matrix, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix<f64> {
    let data = (0..n * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::new(n, d, data).unwrap()
}

pub fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud<f64> {
    embedot::matrix_to_cloud(&gaussian_matrix(rng, n, d))
}

pub fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    PointCloud::from_rows(&rows).unwrap()
}

/// Writes `pairs` random `n x d` embedding pairs plus `manifest.json`
/// under `dir`. Similarities cycle through the ten groups.
pub fn synthetic_manifest(dir: &Path, pairs: usize, n: usize, d: usize, seed: u64) -> PathBuf {
    let mut r = rng(seed);
    let emb = dir.join("emb");
    std::fs::create_dir_all(&emb).unwrap();
    let mut entries = Vec::new();
    for i in 0..pairs {
        let id = format!("pair{i:03}");
        let a = format!("emb/{id}_a.epc");
        let b = format!("emb/{id}_b.epc");
        save_embedding(dir.join(&a), &gaussian_matrix(&mut r, n, d)).unwrap();
        save_embedding(dir.join(&b), &gaussian_matrix(&mut r, n, d)).unwrap();
        entries.push(ManifestEntry {
            pair_id: id,
            embedding_a: a.into(),
            embedding_b: b.into(),
            similarity: 0.5 * (i % 10) as f64 + 0.25,
            group: None,
            generation_seed: Some(1000 + i as u64),
        });
    }
    let path = dir.join("manifest.json");
    PairManifest::save(&entries, &path).unwrap();
    path
}
