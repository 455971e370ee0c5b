//! Minimal dense reverse-mode differentiation.
//!
//! A [`Tape`] records matrix operations in execution order. Parameters live in
//! a [`ParameterStore`]; [`Tape::backward`] accumulates their gradients, and
//! [`Adam`] applies the update. [`grad_check`] compares every gradient entry
//! against central finite differences.

mod params;
mod tape;
mod tensor;

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

pub use params::{ParamId, Parameter, ParameterStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: [usize; 2], right: [usize; 2] },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: index {index} out of range for {len} rows")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NotScalar([usize; 2]),
    #[error("parameter {0:?} already exists")]
    DuplicateParameter(String),
    #[error("parameter {0:?} has a non-finite gradient")]
    NonFiniteGradient(String),
}

/// Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// `fan_in x fan_out` tensor drawn uniformly from `[-b, b]`, `b` the Glorot
/// bound. Deterministic in `seed`.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: u64) -> Tensor {
    let b = xavier_bound(fan_in.max(1), fan_out.max(1));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-b..=b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moments persist across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParameterStore) -> Self {
        let zeros = || store.iter().map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }

    /// Restores saved state; moment shapes must match the store.
    pub fn from_state(
        config: AdamConfig,
        step: u64,
        m: Vec<Tensor>,
        v: Vec<Tensor>,
        store: &ParameterStore,
    ) -> Result<Self, AutodiffError> {
        if m.len() != store.len() || v.len() != store.len() {
            return Err(AutodiffError::ShapeMismatch { op: "adam_state", left: [store.len(), 0], right: [m.len(), v.len()] });
        }
        for ((_, p), (mt, vt)) in store.iter().zip(m.iter().zip(&v)) {
            for t in [mt, vt] {
                if t.shape() != p.value.shape() {
                    return Err(AutodiffError::ShapeMismatch { op: "adam_state", left: p.value.shape(), right: t.shape() });
                }
            }
        }
        Ok(Self { config, step, m, v })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// Applies one update from the stored gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParameterStore) -> Result<(), AutodiffError> {
        for (_, p) in store.iter() {
            if !p.grad.is_finite() {
                return Err(AutodiffError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - libm::pow(beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(beta2, self.step as f64);
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            let i = id.index();
            let grad = store.grad(id).clone();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let value = store.value_mut(id);
            for (((x, g), mm), vv) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mm = beta1 * *mm + (1.0 - beta1) * g;
                *vv = beta2 * *vv + (1.0 - beta2) * g * g;
                let m_hat = *mm / c1;
                let v_hat = *vv / c2;
                *x -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        store.zero_grad();
        Ok(())
    }
}

/// Outcome of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Denominator floor: below this magnitude errors are effectively absolute.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

const KINK_TOLERANCE: f64 = 5e-5;

/// Relative rounding error assumed for one evaluation of the scalar.
const EVAL_NOISE: f64 = 64.0 * f64::EPSILON;

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences with step `eps`, coordinate by coordinate.
///
/// If the estimate at `eps` disagrees with the one at `eps / 10` by more
/// than rounding can explain, the difference straddles a kink (relu) and the
/// step keeps shrinking tenfold, at most three times.
pub fn grad_check<F>(mut f: F, store: &mut ParameterStore, eps: f64) -> Result<GradCheckReport, AutodiffError>
where
    F: FnMut(&mut Tape, &ParameterStore) -> Result<Var, AutodiffError>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<Tensor> = store.iter().map(|(_, p)| p.grad.clone()).collect();
    store.zero_grad();

    let mut eval = |store: &ParameterStore| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        Ok(tape.value(out).item())
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        for k in 0..store.value(id).len() {
            let a = analytic[id.index()].data()[k];
            let original = store.value(id).data()[k];
            // estimate and its rounding-error bound
            let mut central = |h: f64, store: &mut ParameterStore| -> Result<(f64, f64), AutodiffError> {
                store.value_mut(id).data_mut()[k] = original + h;
                let plus = eval(store)?;
                store.value_mut(id).data_mut()[k] = original - h;
                let minus = eval(store)?;
                store.value_mut(id).data_mut()[k] = original;
                Ok(((plus - minus) / (2.0 * h), EVAL_NOISE * (plus.abs() + minus.abs()) / (2.0 * h)))
            };
            let mut h = eps;
            let (mut numeric, _) = central(h, store)?;
            for _ in 0..3 {
                let (finer, noise) = central(h / 10.0, store)?;
                let scale = finer.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
                if (finer - numeric).abs() < KINK_TOLERANCE * scale + noise {
                    break;
                }
                h /= 10.0;
                numeric = finer;
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((String::from(store.name(id)), k));
            }
        }
    }
    Ok(report)
}
