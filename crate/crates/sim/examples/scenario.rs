//! Runs a scenario file and prints its metrics.

use gcf_sim::{compute_metrics, run_scenario, ScenarioConfig};

fn main() {
    let path = std::env::args()
        .nth(1)
        .expect("usage: scenario <config.json>");
    let text = std::fs::read_to_string(&path).expect("readable config");
    let cfg = ScenarioConfig::from_json(&text).expect("valid config");
    let start = std::time::Instant::now();
    let log = run_scenario(&cfg).expect("scenario runs");
    let metrics = compute_metrics(&log).expect("non-empty log");
    println!("{}", serde_json::to_string_pretty(&metrics).unwrap());
    eprintln!(
        "{:?} {} records in {:.2?}",
        log.termination,
        log.records.len(),
        start.elapsed()
    );
}
