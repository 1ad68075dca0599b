//! Central finite-difference checks of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::boltzmann::{boltzmann_value, boltzmann_value_gradient};
use super::model::{randomize_params, QModel};

pub const FD_STEP: f64 = 1e-6;

/// `||a - b|| / max(||a||, ||b||, 1e-8)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / norm(a).max(norm(b)).max(1e-8)
}

/// Central differences of `f(w)` in every coordinate, dividing by the step
/// actually taken after rounding.
pub fn finite_difference<M: QModel + ?Sized>(model: &mut M, h: f64, f: impl Fn(&M) -> f64) -> Vec<f64> {
    let n = model.n_params();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let w = model.params()[i];
        let (wp, wm) = (w + h, w - h);
        model.params_mut()[i] = wp;
        let fp = f(model);
        model.params_mut()[i] = wm;
        let fm = f(model);
        model.params_mut()[i] = w;
        out.push((fp - fm) / (wp - wm));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    /// Worst relative error of `grad Q(x, a)`.
    pub value: f64,
    /// Worst relative error of the Boltzmann-value gradient.
    pub boltzmann: f64,
}

impl GradCheckReport {
    pub fn max(&self) -> f64 {
        self.value.max(self.boltzmann)
    }
}

/// Probes the model at `n_probes` random parameter vectors and inputs. Parameters
/// are restored afterwards.
pub fn gradient_check<M: QModel + ?Sized>(model: &mut M, n_probes: usize, seed: u64) -> GradCheckReport {
    let saved = model.params().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    for _ in 0..n_probes {
        randomize_params(model, 1.0, &mut rng);
        let x = model.random_input(&mut rng);
        let a = rng.random_range(0..model.n_actions());
        let beta = 0.1 + 1.9 * rng.random::<f64>();

        let g = model.gradient(&x, a);
        let fd = finite_difference(model, FD_STEP, |m| m.value(&x, a));
        report.value = report.value.max(relative_error(&g, &fd));

        let g = boltzmann_value_gradient(model, &x, beta);
        let fd = finite_difference(model, FD_STEP, |m| boltzmann_value(&m.q_values(&x), beta));
        report.boltzmann = report.boltzmann.max(relative_error(&g, &fd));
    }
    model.params_mut().copy_from_slice(&saved);
    report
}
