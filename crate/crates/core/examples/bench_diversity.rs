//! Times `select_diversity` on a random corpus.
//!
//! cargo run --release --example bench_diversity -- --records 100000 --dim 1024 --picks 1000

use std::time::Instant;

use clap::Parser;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tts_coreset::{select_diversity, FeatureMatrix, Manifest, SelectionBudget, UtteranceRecord};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 100_000)]
    records: usize,
    #[arg(long, default_value_t = 1024)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    picks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() {
    let args = Args::parse();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let u = Uniform::new(-1.0f32, 1.0).unwrap();

    let t0 = Instant::now();
    let data: Vec<f32> = (0..args.records * args.dim)
        .map(|_| u.sample(&mut rng))
        .collect();
    let features = FeatureMatrix::new(args.records, args.dim, data).unwrap();
    let records = (0..args.records)
        .map(|i| UtteranceRecord {
            id: format!("u{i}"),
            speaker: "s".into(),
            duration_sec: 1.0,
            phonemes: Vec::new(),
            text: None,
        })
        .collect();
    let manifest = Manifest::from_records(records).unwrap();
    println!(
        "generated {} x {} in {:.1} s",
        args.records,
        args.dim,
        t0.elapsed().as_secs_f64()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .unwrap();
    let budget = SelectionBudget::seconds(args.picks as f64).unwrap();
    let t1 = Instant::now();
    let result = pool
        .install(|| select_diversity(&features, &manifest, budget, args.seed))
        .unwrap();
    let secs = t1.elapsed().as_secs_f64();
    println!(
        "selected {} items with {} threads in {:.1} s ({:.1} ms/step)",
        result.indices.len(),
        pool.current_num_threads(),
        secs,
        1e3 * secs / result.indices.len().max(1) as f64
    );
}
