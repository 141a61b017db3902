//! The inverse transformation network: 3-channel image in, 3-channel
//! moisture estimate out, spatial size preserved throughout.

use crate::error::Result;
use crate::nn::{
    BatchNorm2d, Conv2d, ConvTranspose2d, Dropout, LeakyRelu, Mode, Module, ParamVisit, Scalar,
    Tensor4,
};
use crate::rng::{derive_seed, Prng};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Channel plan 3 -> 16 -> 32 -> 16 -> 3; every layer is kernel 3, stride 1,
/// padding 1, so spatial dimensions never change. Each conv is followed by
/// LeakyReLU, batch norm, and dropout; the final transposed conv is linear
/// (no activation) and its output is deliberately unbounded — consumers clip
/// to the moisture range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseNetConfig {
    pub dropout: f64,
}

impl Default for InverseNetConfig {
    fn default() -> Self {
        InverseNetConfig { dropout: 0.2 }
    }
}

const CHANNELS: [usize; 5] = [3, 16, 32, 16, 3];

#[derive(Debug, Clone)]
pub struct InverseNet<S: Scalar> {
    conv1: Conv2d<S>,
    act1: LeakyRelu<S>,
    bn1: BatchNorm2d<S>,
    drop1: Dropout<S>,
    conv2: Conv2d<S>,
    act2: LeakyRelu<S>,
    bn2: BatchNorm2d<S>,
    drop2: Dropout<S>,
    conv3: Conv2d<S>,
    act3: LeakyRelu<S>,
    bn3: BatchNorm2d<S>,
    drop3: Dropout<S>,
    deconv: ConvTranspose2d<S>,
}

impl<S: Scalar> InverseNet<S> {
    /// Builds with He-uniform conv weights and unit/zero norm parameters,
    /// fully determined by `seed`.
    pub fn build(cfg: &InverseNetConfig, seed: u64) -> Result<Self> {
        let mut rng = Prng::seed_from_u64(derive_seed(seed, 0x1c0));
        let drop_rng = |i: u64| Prng::seed_from_u64(derive_seed(seed, 0x1d0 + i));
        Ok(InverseNet {
            conv1: Conv2d::new(CHANNELS[0], CHANNELS[1], 3, 1, 1, &mut rng),
            act1: LeakyRelu::new(),
            bn1: BatchNorm2d::new(CHANNELS[1]),
            drop1: Dropout::new(cfg.dropout, drop_rng(0))?,
            conv2: Conv2d::new(CHANNELS[1], CHANNELS[2], 3, 1, 1, &mut rng),
            act2: LeakyRelu::new(),
            bn2: BatchNorm2d::new(CHANNELS[2]),
            drop2: Dropout::new(cfg.dropout, drop_rng(1))?,
            conv3: Conv2d::new(CHANNELS[2], CHANNELS[3], 3, 1, 1, &mut rng),
            act3: LeakyRelu::new(),
            bn3: BatchNorm2d::new(CHANNELS[3]),
            drop3: Dropout::new(cfg.dropout, drop_rng(2))?,
            deconv: ConvTranspose2d::new(CHANNELS[3], CHANNELS[4], 3, 1, 1, &mut rng),
        })
    }
}

impl<S: Scalar> Module<S> for InverseNet<S> {
    fn forward(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>> {
        let mut t = self.conv1.forward(x, mode)?;
        t = self.act1.forward(&t, mode)?;
        t = self.bn1.forward(&t, mode)?;
        t = self.drop1.forward(&t, mode)?;
        t = self.conv2.forward(&t, mode)?;
        t = self.act2.forward(&t, mode)?;
        t = self.bn2.forward(&t, mode)?;
        t = self.drop2.forward(&t, mode)?;
        t = self.conv3.forward(&t, mode)?;
        t = self.act3.forward(&t, mode)?;
        t = self.bn3.forward(&t, mode)?;
        t = self.drop3.forward(&t, mode)?;
        self.deconv.forward(&t, mode)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let mut g = self.deconv.backward(grad_out);
        g = self.drop3.backward(&g);
        g = self.bn3.backward(&g);
        g = self.act3.backward(&g);
        g = self.conv3.backward(&g);
        g = self.drop2.backward(&g);
        g = self.bn2.backward(&g);
        g = self.act2.backward(&g);
        g = self.conv2.backward(&g);
        g = self.drop1.backward(&g);
        g = self.bn1.backward(&g);
        g = self.act1.backward(&g);
        self.conv1.backward(&g)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        self.conv1.visit_params(&format!("{prefix}conv1."), f);
        self.bn1.visit_params(&format!("{prefix}bn1."), f);
        self.conv2.visit_params(&format!("{prefix}conv2."), f);
        self.bn2.visit_params(&format!("{prefix}bn2."), f);
        self.conv3.visit_params(&format!("{prefix}conv3."), f);
        self.bn3.visit_params(&format!("{prefix}bn3."), f);
        self.deconv.visit_params(&format!("{prefix}deconv."), f);
    }

    fn visit_state(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        self.bn1.visit_state(&format!("{prefix}bn1."), f);
        self.bn2.visit_state(&format!("{prefix}bn2."), f);
        self.bn3.visit_state(&format!("{prefix}bn3."), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamStore;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn forward_preserves_shape() {
        let mut net: InverseNet<f32> = InverseNet::build(&InverseNetConfig::default(), 1).unwrap();
        let x = Tensor4::<f32>::zeros([4, 3, 64, 64]);
        let y = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.dims(), [4, 3, 64, 64]);
        // Other spatial sizes too (>= 8 per the shape contract).
        for hw in [8usize, 17, 33] {
            let x = Tensor4::<f32>::zeros([1, 3, hw, hw]);
            let y = net.forward(&x, Mode::Eval).unwrap();
            assert_eq!(y.dims(), [1, 3, hw, hw]);
        }
    }

    #[test]
    fn builds_are_deterministic_per_seed() {
        let mut a: InverseNet<f32> = InverseNet::build(&InverseNetConfig::default(), 7).unwrap();
        let mut b: InverseNet<f32> = InverseNet::build(&InverseNetConfig::default(), 7).unwrap();
        let sa = ParamStore::export(&mut a).unwrap();
        let sb = ParamStore::export(&mut b).unwrap();
        for (na, nb) in sa.names().zip(sb.names()) {
            assert_eq!(na, nb);
            assert_eq!(sa.get(na).unwrap().1, sb.get(nb).unwrap().1);
        }
    }

    #[test]
    fn parameter_count_matches_layer_formulas() {
        // Convolution weights+biases, recomputed from the layer formulas:
        //   3*16*9+16 = 448, 16*32*9+32 = 4640, 32*16*9+16 = 4624,
        //   16*3*9+3 = 435; total 10147.
        // Norm affine parameters add 2*(16+32+16) = 128.
        let mut net: InverseNet<f32> = InverseNet::build(&InverseNetConfig::default(), 1).unwrap();
        let store = ParamStore::export(&mut net).unwrap();
        let names: Vec<String> = store.names().map(String::from).collect();
        let mut conv_params = 0usize;
        let mut norm_params = 0usize;
        for name in &names {
            if store.kind(name) != Some(crate::nn::SlotKind::Trainable) {
                continue;
            }
            let len = store.get(name).unwrap().1.len();
            if name.contains("bn") {
                norm_params += len;
            } else {
                conv_params += len;
            }
        }
        assert_eq!(conv_params, 10_147);
        assert_eq!(norm_params, 128);
        assert_eq!(store.trainable_len(), 10_275);
    }

    #[test]
    fn eval_forward_is_deterministic_and_batch_independent() {
        let mut net: InverseNet<f32> = InverseNet::build(&InverseNetConfig::default(), 3).unwrap();
        let mut rng = seeded(4, 0);
        let batch = Tensor4::from_fn([8, 3, 16, 16], |_, _, _, _| rng.random_range(0.0..1.0f32));
        let y1 = net.forward(&batch, Mode::Eval).unwrap();
        let y2 = net.forward(&batch, Mode::Eval).unwrap();
        assert_eq!(y1, y2);

        // Row 0 alone vs row 0 inside the batch.
        let single = Tensor4::new([1, 3, 16, 16], batch.sample(0).to_vec()).unwrap();
        let ys = net.forward(&single, Mode::Eval).unwrap();
        for (a, b) in ys.data().iter().zip(&y1.data()[..ys.len()]) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn untrained_output_is_finite() {
        let mut net: InverseNet<f32> = InverseNet::build(&InverseNetConfig::default(), 5).unwrap();
        let mut rng = seeded(6, 0);
        let x = Tensor4::from_fn([2, 3, 24, 24], |_, _, _, _| rng.random_range(0.0..1.0f32));
        let y = net.forward(&x, Mode::Train).unwrap();
        assert!(y.is_finite());
    }
}
