//! Elementwise activations and dropout.

use super::{Mode, Module, ParamVisit, Scalar, Tensor4};
use crate::error::{Error, Result};
use crate::rng::Prng;
use rand::Rng;

#[derive(Debug, Clone, Default)]
pub struct Relu<S> {
    cached_input: Option<Tensor4<S>>,
}

impl<S: Scalar> Relu<S> {
    pub fn new() -> Self {
        Relu { cached_input: None }
    }
}

impl<S: Scalar> Module<S> for Relu<S> {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        let mut y = x.clone();
        for v in y.data_mut() {
            if *v < S::ZERO {
                *v = S::ZERO;
            }
        }
        self.cached_input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let x = self
            .cached_input
            .take()
            .expect("relu backward before forward");
        let mut g = grad_out.clone();
        for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
            if *xv < S::ZERO {
                *gv = S::ZERO;
            }
        }
        g
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(ParamVisit<'_, S>)) {}
}

/// LeakyReLU with the fixed slope 0.01 on the negative half-line.
#[derive(Debug, Clone, Default)]
pub struct LeakyRelu<S> {
    cached_input: Option<Tensor4<S>>,
}

pub(crate) const LEAKY_SLOPE: f64 = 0.01;

impl<S: Scalar> LeakyRelu<S> {
    pub fn new() -> Self {
        LeakyRelu { cached_input: None }
    }
}

impl<S: Scalar> Module<S> for LeakyRelu<S> {
    fn forward(&mut self, x: &Tensor4<S>, _mode: Mode) -> Result<Tensor4<S>> {
        let slope = S::from_f64(LEAKY_SLOPE);
        let mut y = x.clone();
        for v in y.data_mut() {
            if *v < S::ZERO {
                *v = *v * slope;
            }
        }
        self.cached_input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let x = self
            .cached_input
            .take()
            .expect("leaky_relu backward before forward");
        let slope = S::from_f64(LEAKY_SLOPE);
        let mut g = grad_out.clone();
        for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
            if *xv < S::ZERO {
                *gv = *gv * slope;
            }
        }
        g
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(ParamVisit<'_, S>)) {}
}

/// Inverted dropout: in training, elements are zeroed with probability `p`
/// and survivors scaled by `1/(1-p)`; in eval mode the layer is the
/// identity, so train-time expectations match eval activations.
#[derive(Debug, Clone)]
pub struct Dropout<S> {
    p: f64,
    rng: Prng,
    mask: Option<Vec<S>>,
}

impl<S: Scalar> Dropout<S> {
    pub fn new(p: f64, rng: Prng) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(format!("dropout p must be in [0,1), got {p}")));
        }
        Ok(Dropout { p, rng, mask: None })
    }

    pub fn probability(&self) -> f64 {
        self.p
    }
}

impl<S: Scalar> Module<S> for Dropout<S> {
    fn forward(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>> {
        if mode == Mode::Eval || self.p == 0.0 {
            self.mask = None;
            return Ok(x.clone());
        }
        let scale = S::from_f64(1.0 / (1.0 - self.p));
        // One u32 draw per element against a fixed threshold.
        let threshold = (self.p * 4294967296.0) as u32;
        let mut y = x.clone();
        let mask: Vec<S> = y
            .data_mut()
            .iter_mut()
            .map(|v| {
                if self.rng.random::<u32>() < threshold {
                    *v = S::ZERO;
                    S::ZERO
                } else {
                    *v = *v * scale;
                    scale
                }
            })
            .collect();
        self.mask = Some(mask);
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        match self.mask.take() {
            None => grad_out.clone(),
            Some(mask) => {
                let mut g = grad_out.clone();
                for (gv, m) in g.data_mut().iter_mut().zip(&mask) {
                    *gv = *gv * *m;
                }
                g
            }
        }
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut dyn FnMut(ParamVisit<'_, S>)) {}
}
