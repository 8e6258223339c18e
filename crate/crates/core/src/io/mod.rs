//! On-disk formats: embedding files, pair manifests, score and report CSVs.

pub mod epc;
pub mod manifest;
pub mod scores;

pub use epc::{decode_embedding, encode_embedding, load_embedding, save_embedding, EPC_MAGIC};
pub use manifest::{similarity_group, ManifestEntry, PairManifest};
pub use scores::{load_scores, write_scores, ScoreRow};

/// Floats in CSV output: 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-joined indices, as stored in `couplings.csv`.
pub fn fmt_sigma(sigma: &[usize]) -> String {
    let parts: Vec<String> = sigma.iter().map(usize::to_string).collect();
    parts.join(",")
}

pub fn parse_sigma(s: &str) -> crate::Result<crate::cloud::Permutation> {
    let indices = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| crate::Error::Invalid(format!("bad sigma entry {t:?}: {e}")))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    crate::cloud::Permutation::from_vec(indices)
}
