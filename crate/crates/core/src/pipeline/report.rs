use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EpochRecord, Metrics};
use crate::{Result, NUM_SCORES};

/// Hex SHA-256 of the JSON encoding of `config`.
pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(config)?)))
}

/// Row label used in result tables.
pub fn display_name(kind: &str) -> String {
    match kind {
        "mean" => "word2vec mean".into(),
        "cnn" => "CNN-based".into(),
        "lstm" => "LSTM-based".into(),
        other => other.into(),
    }
}

/// Metrics file written by evaluation commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub config_digest: String,
    pub encoder: String,
    pub metrics: Metrics,
    pub excluded_pairs: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<EpochRecord>,
}

/// Left-aligned columns separated by two spaces.
pub(crate) fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s}{}", " ".repeat(widths[c] - s.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// One row per system: weighted F1, the four per-score F1 values, accuracy.
pub fn results_table(rows: &[(String, &Metrics)]) -> String {
    let mut header = vec!["method".to_owned(), "Weighted F1 Score".to_owned()];
    header.extend((0..NUM_SCORES).map(|s| format!("Score {s} F1 Score")));
    header.push("Accuracy".into());
    let mut table = vec![header];
    for (name, m) in rows {
        let mut row = vec![display_name(name), format!("{:.4}", m.weighted_f1)];
        row.extend(m.per_class_f1.iter().map(|f| format!("{f:.4}")));
        row.push(format!("{:.4}", m.accuracy));
        table.push(row);
    }
    align(&table)
}
