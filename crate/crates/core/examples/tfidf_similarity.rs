//! Pairwise cosine similarity of three short texts under TF-IDF.
//!
//! Expected (to three places):
//! ```text
//! 1.000 0.452 0.424
//! 0.452 1.000 0.138
//! 0.424 0.138 1.000
//! ```

use engagement_core::embed::{Vocabulary, VocabularyConfig};

fn main() -> engagement_core::Result<()> {
    let texts = [
        "Why the sky is blue?",
        "Why the space is dark?",
        "The sky is blue due to a phenomenon called Raleigh scattering.",
    ];
    let vocab = Vocabulary::fit(texts, VocabularyConfig::default())?;
    let rows: Vec<Vec<f64>> = texts.iter().map(|t| vocab.transform(t).to_dense(vocab.len())).collect();
    for a in &rows {
        let line: Vec<String> = rows
            .iter()
            .map(|b| format!("{:.3}", a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()))
            .collect();
        println!("{}", line.join(" "));
    }
    Ok(())
}
