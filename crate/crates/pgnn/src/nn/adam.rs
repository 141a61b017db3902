//! Bias-corrected Adam.

use super::param::{ParamStore, SlotKind};
use super::Scalar;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub hyper: AdamHyper,
    step: u64,
    moments: HashMap<String, (Vec<S>, Vec<S>)>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(hyper: AdamHyper) -> Self {
        AdamState {
            hyper,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update over every trainable entry of the store.
///
/// Stats entries (running statistics) are untouched. Gradient slots must
/// match their values elementwise in length; a mismatch is a contract error.
pub fn adam_step<S: Scalar>(store: &mut ParamStore<S>, state: &mut AdamState<S>) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let h = state.hyper;
    // Fold the bias corrections into the step size.
    let lr_t = h.lr * (1.0 - h.beta2.powi(t)).sqrt() / (1.0 - h.beta1.powi(t));
    let (b1, b2) = (S::from_f64(h.beta1), S::from_f64(h.beta2));
    let (one_m_b1, one_m_b2) = (S::from_f64(1.0 - h.beta1), S::from_f64(1.0 - h.beta2));
    let lr_t_s = S::from_f64(lr_t);
    let eps = S::from_f64(h.eps);

    for (name, kind, value, grad) in store.iter_entries() {
        if kind != SlotKind::Trainable {
            continue;
        }
        if grad.len() != value.len() {
            return Err(Error::Contract(format!(
                "parameter {name}: gradient slot missing or mis-sized \
                 ({} vs {})",
                grad.len(),
                value.len()
            )));
        }
        let (m, v) = state
            .moments
            .entry(name.to_string())
            .or_insert_with(|| (vec![S::ZERO; value.len()], vec![S::ZERO; value.len()]));
        if m.len() != value.len() {
            return Err(Error::Contract(format!(
                "parameter {name}: moment shape drifted"
            )));
        }
        for i in 0..value.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + one_m_b1 * g;
            v[i] = b2 * v[i] + one_m_b2 * g * g;
            value[i] = value[i] - lr_t_s * m[i] / (v[i].sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(value: Vec<f64>, grad: Vec<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let dims = vec![value.len()];
        s.insert("w", SlotKind::Trainable, dims, value, grad)
            .unwrap();
        s
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut store = store_with(vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 0.0]);
        let mut state = AdamState::new(AdamHyper::with_lr(0.01));
        adam_step(&mut store, &mut state).unwrap();
        let (_, v) = store.get("w").unwrap();
        assert_eq!(v, &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Hand evaluation: m_hat = g, v_hat = g^2, so the first update is
        // lr * g / (|g| + eps) ~ lr for g = 1.
        let mut store = store_with(vec![0.5], vec![1.0]);
        let mut state = AdamState::new(AdamHyper::with_lr(0.001));
        adam_step(&mut store, &mut state).unwrap();
        let (_, v) = store.get("w").unwrap();
        let moved = 0.5 - v[0];
        assert!(
            (moved - 0.001).abs() < 1e-6,
            "first step moved {moved}, expected ~0.001"
        );
    }

    #[test]
    fn repeated_steps_are_deterministic() {
        let run = || {
            let mut store = store_with(vec![0.1, 0.2], vec![0.3, -0.4]);
            let mut state = AdamState::new(AdamHyper::with_lr(0.01));
            for _ in 0..10 {
                adam_step(&mut store, &mut state).unwrap();
            }
            store.get("w").unwrap().1.to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        // Bypass the insert guard by using a stats slot then mislabeling:
        // simplest honest path is a mis-sized grad via direct construction.
        let mut s = ParamStore::<f64>::new();
        s.insert("ok", SlotKind::Trainable, vec![1], vec![1.0], vec![0.5])
            .unwrap();
        let mut state = AdamState::new(AdamHyper::with_lr(0.01));
        adam_step(&mut s, &mut state).unwrap();
        // Store insert already rejects mis-sized slots.
        assert!(s
            .insert(
                "bad",
                SlotKind::Trainable,
                vec![2],
                vec![1.0, 2.0],
                vec![0.0]
            )
            .is_err());
    }
}
