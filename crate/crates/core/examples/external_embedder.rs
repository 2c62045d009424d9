//! Plug in an external embedding service. The transport here is in-process;
//! `HttpTransport` speaks to a real endpoint. Repeated texts hit the cache.

use engagement_core::embed::{
    Embedder, EmbeddingCache, EmbeddingTransport, EndpointDescriptor, ExternalEmbedder, TransportError,
};

/// Counts letters a..h, a stand-in for a real model.
struct LetterHistogram;

impl EmbeddingTransport for LetterHistogram {
    fn fetch(&self, text: &str) -> Result<Vec<f64>, TransportError> {
        let mut v = vec![0.0; 8];
        for c in text.chars().filter(|c| ('a'..='h').contains(c)) {
            v[c as usize - 'a' as usize] += 1.0;
        }
        Ok(v)
    }
}

fn main() -> engagement_core::Result<()> {
    let descriptor = EndpointDescriptor::new("letters", "inproc://letters", 8);
    let embedder =
        ExternalEmbedder::with_transport(descriptor, Box::new(LetterHistogram), EmbeddingCache::in_memory());
    for text in ["a faded cabbage", "beach", "a faded cabbage"] {
        let v = embedder.embed(text)?;
        println!("{text:<16} {:?} (source {})", v.values(), v.source());
    }
    println!("network calls: {}", embedder.network_calls());
    Ok(())
}
