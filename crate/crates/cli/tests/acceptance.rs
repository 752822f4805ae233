//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! `MFLQ_ACCEPT_ONLY=1,4` restricts the run.

use mflq_cli::acceptance::{self, Context};

fn main() {
    let only: Vec<u8> = std::env::var("MFLQ_ACCEPT_ONLY")
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    // `cargo test -- --list` and friends expect a fast, silent exit
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let dir = tempfile::tempdir().expect("scratch directory");
    let ctx = Context { root: dir.path().to_path_buf(), seed: 1 };
    let mut failed = 0;
    for outcome in acceptance::run(&ctx, &only) {
        println!("{}", outcome.line());
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
