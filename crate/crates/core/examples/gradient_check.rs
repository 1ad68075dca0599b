//! Compares analytic parameter gradients with finite differences for the
//! tabular, linear and MLP Q-models.
//!
//! cargo run --example gradient_check

use qlagrange::lamin::{gradient_check, LinearQModel, MlpQModel, TabularQModel};

fn main() {
    let probes = 50;
    let tab = gradient_check(&mut TabularQModel::zeros(7, 3), probes, 1);
    let lin = gradient_check(&mut LinearQModel::per_action(5, 3), probes, 2);
    let mlp = gradient_check(&mut MlpQModel::new(6, 12, 4, 0), probes, 3);
    println!("{:<8} {:>14} {:>14}", "model", "grad Q", "grad V_beta");
    for (name, r) in [("tabular", tab), ("linear", lin), ("mlp", mlp)] {
        println!("{name:<8} {:>14.2e} {:>14.2e}", r.value, r.boltzmann);
    }
}
