use std::time::Instant;

use saw_sle::{Chain, ChainConfig, Domain};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let iters: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let domain: Domain = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(Domain::HalfPlane);
    let mut chain = Chain::new(ChainConfig::new(n, domain, 1)).unwrap();
    let start = Instant::now();
    for _ in 0..iters {
        chain.step();
    }
    let secs = start.elapsed().as_secs_f64();
    println!(
        "n={n} {domain} iterations={iters} accept={:.4} {:.2} us/iter",
        chain.acceptance_rate(),
        secs * 1e6 / iters as f64
    );
}
