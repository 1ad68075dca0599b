//! Writes the six-state example process to JSON, reads it back, and shows
//! what the validator says about a damaged copy.
//!
//! cargo run --example elp_file_io -- [out.json]

use std::path::PathBuf;

use qlagrange::bellman::solve_q_star;
use qlagrange::io::{elp_to_json, load_elp, load_elp_raw, q_to_csv, write_atomic, ElpDocument};
use qlagrange::lagrangian::fig3_elp;

fn main() -> qlagrange::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fig3.json"));
    let p = fig3_elp();
    write_atomic(&out, elp_to_json(&p).as_bytes())?;
    let back = load_elp(out.to_str().expect("utf-8 path"))?;
    assert_eq!(back, p);
    println!("wrote {} and read back an identical process", out.display());

    print!("{}", q_to_csv(&solve_q_star(&back)?, &back));

    // Send state 1 nowhere under action "2": the row no longer sums to one.
    let mut doc = ElpDocument::from_process(&p);
    doc.transitions["1"]["2"].clear();
    let broken = std::env::temp_dir().join("fig3_broken.json");
    write_atomic(&broken, serde_json::to_string_pretty(&doc).unwrap().as_bytes())?;
    match load_elp(broken.to_str().unwrap()) {
        Ok(_) => println!("unexpectedly loaded"),
        Err(e) => println!("strict load: {e}"),
    }
    print!("{}", load_elp_raw(broken.to_str().unwrap())?.validate());
    Ok(())
}
