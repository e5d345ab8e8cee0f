use serde::{Deserialize, Serialize};

use crate::architectures::Model;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Adam hyperparameters with inverse-time learning-rate decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            decay: 5e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl AdamConfig {
    /// `lr / (1 + decay * t)`.
    pub fn learning_rate(&self, t: u64) -> f64 {
        self.lr / (1.0 + self.decay * t as f64)
    }
}

struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
    shape: Vec<usize>,
}

/// Optimizer state: one moment pair per trainable slot, none for frozen
/// slots.
pub struct AdamState<T: Element> {
    config: AdamConfig,
    t: u64,
    slots: Vec<Option<Moments<T>>>,
}

impl<T: Element> AdamState<T> {
    /// `shapes[i]` is `None` for a frozen slot.
    pub fn new<'a>(
        config: AdamConfig,
        shapes: impl IntoIterator<Item = Option<&'a [usize]>>,
    ) -> Self {
        let slots = shapes
            .into_iter()
            .map(|s| {
                s.map(|shape| {
                    let n = shape.iter().product();
                    Moments {
                        m: vec![T::zero(); n],
                        v: vec![T::zero(); n],
                        shape: shape.to_vec(),
                    }
                })
            })
            .collect();
        AdamState {
            config,
            t: 0,
            slots,
        }
    }

    pub fn for_model(config: AdamConfig, model: &Model<T>) -> Self {
        AdamState::new(
            config,
            model
                .param_specs()
                .map(|(_, p)| p.trainable.then_some(p.shape.as_slice())),
        )
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn has_state(&self, slot: usize) -> bool {
        matches!(self.slots.get(slot), Some(Some(_)))
    }

    /// Applies one update. `grads[i]` of `None` leaves slot `i` unchanged;
    /// a gradient for a frozen slot is a contract violation.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[Option<Tensor<T>>],
    ) -> Result<()> {
        if params.len() != self.slots.len() {
            return Err(Error::shape(format!(
                "{} parameters for {} optimizer slots",
                params.len(),
                self.slots.len()
            )));
        }
        self.begin(grads)?;
        for (i, grad) in grads.iter().enumerate() {
            if let Some(g) = grad {
                self.update(i, params[i], g);
            }
        }
        Ok(())
    }

    /// Validates `grads` and advances the step counter.
    fn begin(&mut self, grads: &[Option<Tensor<T>>]) -> Result<()> {
        if grads.len() != self.slots.len() {
            return Err(Error::shape(format!(
                "{} gradients for {} optimizer slots",
                grads.len(),
                self.slots.len()
            )));
        }
        self.validate(grads)?;
        self.t += 1;
        Ok(())
    }

    fn update(&mut self, slot: usize, param: &mut Tensor<T>, grad: &Tensor<T>) {
        let c = self.config;
        let t = self.t as f64;
        let lr = c.learning_rate(self.t);
        let correct1 = 1.0 - c.beta1.powf(t);
        let correct2 = 1.0 - c.beta2.powf(t);
        let state = self.slots[slot].as_mut().expect("validated trainable slot");
        let p = param.data_mut();
        for (i, gv) in grad.data().iter().enumerate() {
            let g = gv.as_f64();
            let m = c.beta1 * state.m[i].as_f64() + (1.0 - c.beta1) * g;
            let v = c.beta2 * state.v[i].as_f64() + (1.0 - c.beta2) * g * g;
            state.m[i] = T::of(m);
            state.v[i] = T::of(v);
            let update = lr * (m / correct1) / ((v / correct2).sqrt() + c.epsilon);
            p[i] = T::of(p[i].as_f64() - update);
        }
    }

    fn validate(&self, grads: &[Option<Tensor<T>>]) -> Result<()> {
        for (i, (slot, grad)) in self.slots.iter().zip(grads).enumerate() {
            match (slot, grad) {
                (None, Some(_)) => {
                    return Err(Error::Contract(format!(
                        "gradient supplied for frozen parameter {i}"
                    )))
                }
                (Some(s), Some(g)) if g.shape() != s.shape.as_slice() => {
                    return Err(Error::shape(format!(
                        "gradient {i} has shape {:?}, parameter {:?}",
                        g.shape(),
                        s.shape
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One Adam update of every trainable model parameter. Frozen parameters
/// are never touched, so their storage is never copied.
pub fn adam_step<T: Element>(
    model: &mut Model<T>,
    grads: &[Option<Tensor<T>>],
    state: &mut AdamState<T>,
) -> Result<()> {
    state.begin(grads)?;
    for (i, grad) in grads.iter().enumerate() {
        if let Some(g) = grad {
            state.update(i, model.parameter_mut(i), g);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Tensor::<f64>::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let shape = [3usize];
        let mut s = AdamState::<f64>::new(AdamConfig::default(), [Some(&shape[..])]);
        for _ in 0..5 {
            s.step(&mut [&mut p], &[Some(Tensor::zeros(&[3]))]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 5);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let mut p = Tensor::<f64>::scalar(0.0).reshape(&[1]).unwrap();
        let shape = [1usize];
        let cfg = AdamConfig::default();
        let mut s = AdamState::<f64>::new(cfg, [Some(&shape[..])]);
        s.step(
            &mut [&mut p],
            &[Some(Tensor::from_f64(&[1], &[1.0]).unwrap())],
        )
        .unwrap();
        let expected = -(3e-4 / (1.0 + 5e-6)) / (1.0 + 1e-7);
        assert!((p.data()[0] - expected).abs() < 1e-15, "{}", p.data()[0]);
    }

    #[test]
    fn decay_schedule() {
        let cfg = AdamConfig::default();
        assert!((cfg.learning_rate(1_000_000) - 5e-5).abs() < 1e-18);
        assert_eq!(cfg.learning_rate(0), 3e-4);
    }

    #[test]
    fn frozen_slot_rejects_gradients() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let mut s = AdamState::<f64>::new(AdamConfig::default(), [None]);
        let err = s.step(&mut [&mut p], &[Some(Tensor::zeros(&[2]))]);
        assert!(matches!(err, Err(Error::Contract(_))));
        s.step(&mut [&mut p], &[None]).unwrap();
        assert_eq!(p, Tensor::zeros(&[2]));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let shape = [2usize];
        let mut s = AdamState::<f64>::new(AdamConfig::default(), [Some(&shape[..])]);
        assert!(s.step(&mut [&mut p], &[Some(Tensor::zeros(&[3]))]).is_err());
    }
}
