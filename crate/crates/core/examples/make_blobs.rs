//! Writes a two-class Gaussian blob dataset as CSV to stdout.
//!
//! usage: make_blobs [PATTERNS] [DIM] [SEPARATION] [SEED]

use oscomb::bench::two_blobs;

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    match args.get(i) {
        Some(s) => s.parse().unwrap_or_else(|_| {
            eprintln!("bad argument {s:?}");
            std::process::exit(2)
        }),
        None => default,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ds = two_blobs(
        arg(&args, 0, 800),
        arg(&args, 1, 2),
        arg(&args, 2, 2.0),
        arg(&args, 3, 2024),
    );
    print!("{}", ds.to_csv());
}
