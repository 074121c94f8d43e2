//! Parse throughput at default dimensions: `cargo run --release --example throughput -- 100000`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uniparser::corpus::synthetic_corpus;
use uniparser::model::{Architecture, ModelParameters};
use uniparser::runtime::{parse_batch, BatchOptions};

fn main() {
    let n: usize = std::env::args().nth(1).map(|a| a.parse().unwrap()).unwrap_or(10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = ModelParameters::init(Architecture::default(), &mut rng);
    let msgs: Vec<String> = synthetic_corpus(&mut rng, n).into_iter().map(|r| r.content).collect();
    let (_, rep) = parse_batch(&model, &msgs, BatchOptions { batch_size: 512, workers: 4 }).unwrap();
    println!("{rep}");
}
