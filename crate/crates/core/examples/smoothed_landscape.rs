//! Scans the Boltzmann-smoothed Lagrangian of a one-state, two-action process
//! where the demonstrator takes action 1, and locates its minimum over Q2.
//!
//! cargo run --example smoothed_landscape

use qlagrange::lamin::{golden_section_min, smoothed_lagrangian_1state};

fn main() {
    for beta in [0.5, 1.0, 2.0, 10.0] {
        let f = |q2: f64| smoothed_lagrangian_1state(0.0, q2, beta, 0.0);
        // the minimizer scales with beta
        let (x, fx) = golden_section_min(f, -5.0 * beta, 5.0, 1e-10);
        let scan: Vec<String> = [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|q| format!("{:+.3}", f(*q)))
            .collect();
        println!(
            "beta {beta:>4}: min {fx:+.5} at Q2 = {x:+.4}; L at Q2 = -4,-2,-1,0,1,2: {}",
            scan.join(" ")
        );
    }
}
