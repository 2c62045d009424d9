//! Split an integer amount across classes by their engagement shares.
//! Largest remainders make the parts sum to the total exactly.

use std::collections::BTreeMap;

use engagement_core::allocate::{allocate_scores, apportion, verify_csv, Basis};

fn main() -> engagement_core::Result<()> {
    let shares: BTreeMap<String, f64> = [("cooking", 0.2), ("hockey", 0.3), ("space", 0.5)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

    let thirds: BTreeMap<String, f64> = ["a", "b", "c"].iter().map(|k| (k.to_string(), 1.0)).collect();
    println!("100 in thirds: {:?}", apportion(100, &thirds)?);

    let allocation = allocate_scores(1_000_001, shares, Basis::Probability)?;
    let csv = allocation.to_csv();
    print!("{csv}");
    assert!(verify_csv(&csv));
    Ok(())
}
