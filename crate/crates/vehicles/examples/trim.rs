//! Prints the trim of the default fixed-wing aircraft as JSON.

use gcf_vehicles::{find_trim, FwParams};

fn main() {
    let speed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(15.0);
    match find_trim(&FwParams::default(), speed) {
        Ok(trim) => println!(
            "{}",
            serde_json::to_string_pretty(&trim).expect("serializable")
        ),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
