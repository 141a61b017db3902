//! Residual regression network: a ResNet backbone plus a two-layer fusion
//! head producing one scalar per sample.
//!
//! Two backbones share the code path: the standard 18-layer topology
//! (512 features) and a desk-scale variant (`resnet-small`, 64 features)
//! sized for CPU-bound benchmark runs.

use crate::error::{Error, Result};
use crate::nn::{
    BatchNorm2d, Conv2d, GlobalAvgPool, Linear, MaxPool2d, Mode, Module, ParamVisit, Relu, Scalar,
    Tensor4,
};
use crate::rng::{derive_seed, Prng};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Backbone selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressorVariant {
    #[serde(rename = "resnet18")]
    ResNet18,
    #[serde(rename = "resnet-small")]
    ResNetSmall,
}

impl RegressorVariant {
    pub fn feature_width(self) -> usize {
        match self {
            RegressorVariant::ResNet18 => 512,
            RegressorVariant::ResNetSmall => 64,
        }
    }

    pub fn fusion_hidden(self) -> usize {
        match self {
            RegressorVariant::ResNet18 => 128,
            RegressorVariant::ResNetSmall => 32,
        }
    }
}

impl std::str::FromStr for RegressorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resnet18" => Ok(RegressorVariant::ResNet18),
            "resnet-small" => Ok(RegressorVariant::ResNetSmall),
            other => Err(Error::param(format!(
                "unknown regressor variant {other:?} (expected resnet18 or resnet-small)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub variant: RegressorVariant,
    /// Reserved: initialized-from-pretrained backbones are not bundled, and
    /// every benchmark in this crate trains from scratch.
    #[serde(default)]
    pub pretrained: bool,
}

impl RegressorConfig {
    pub fn small() -> Self {
        RegressorConfig {
            variant: RegressorVariant::ResNetSmall,
            pretrained: false,
        }
    }

    pub fn resnet18() -> Self {
        RegressorConfig {
            variant: RegressorVariant::ResNet18,
            pretrained: false,
        }
    }
}

/// Standard residual basic block; the projection shortcut appears whenever
/// stride or channel count changes.
#[derive(Debug, Clone)]
struct BasicBlock<S: Scalar> {
    conv1: Conv2d<S>,
    bn1: BatchNorm2d<S>,
    relu1: Relu<S>,
    conv2: Conv2d<S>,
    bn2: BatchNorm2d<S>,
    down: Option<(Conv2d<S>, BatchNorm2d<S>)>,
    relu_out: Relu<S>,
}

impl<S: Scalar> BasicBlock<S> {
    fn new(in_c: usize, out_c: usize, stride: usize, rng: &mut Prng) -> Self {
        let down = if stride != 1 || in_c != out_c {
            Some((
                Conv2d::new(in_c, out_c, 1, stride, 0, rng),
                BatchNorm2d::new(out_c),
            ))
        } else {
            None
        };
        BasicBlock {
            conv1: Conv2d::new(in_c, out_c, 3, stride, 1, rng),
            bn1: BatchNorm2d::new(out_c),
            relu1: Relu::new(),
            conv2: Conv2d::new(out_c, out_c, 3, 1, 1, rng),
            bn2: BatchNorm2d::new(out_c),
            down,
            relu_out: Relu::new(),
        }
    }

    fn forward(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>> {
        let mut main = self.conv1.forward(x, mode)?;
        main = self.bn1.forward(&main, mode)?;
        main = self.relu1.forward(&main, mode)?;
        main = self.conv2.forward(&main, mode)?;
        main = self.bn2.forward(&main, mode)?;
        let skip = match &mut self.down {
            Some((conv, bn)) => {
                let s = conv.forward(x, mode)?;
                bn.forward(&s, mode)?
            }
            None => x.clone(),
        };
        let mut sum = main;
        for (a, b) in sum.data_mut().iter_mut().zip(skip.data()) {
            *a += *b;
        }
        self.relu_out.forward(&sum, mode)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let g = self.relu_out.backward(grad_out);
        let mut g_main = self.bn2.backward(&g);
        g_main = self.conv2.backward(&g_main);
        g_main = self.relu1.backward(&g_main);
        g_main = self.bn1.backward(&g_main);
        let mut g_in = self.conv1.backward(&g_main);
        match &mut self.down {
            Some((conv, bn)) => {
                let g_skip = bn.backward(&g);
                let g_skip = conv.backward(&g_skip);
                for (a, b) in g_in.data_mut().iter_mut().zip(g_skip.data()) {
                    *a += *b;
                }
            }
            None => {
                for (a, b) in g_in.data_mut().iter_mut().zip(g.data()) {
                    *a += *b;
                }
            }
        }
        g_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        self.conv1.visit_params(&format!("{prefix}conv1."), f);
        self.bn1.visit_params(&format!("{prefix}bn1."), f);
        self.conv2.visit_params(&format!("{prefix}conv2."), f);
        self.bn2.visit_params(&format!("{prefix}bn2."), f);
        if let Some((conv, bn)) = &mut self.down {
            conv.visit_params(&format!("{prefix}down."), f);
            bn.visit_params(&format!("{prefix}down_bn."), f);
        }
    }

    fn visit_state(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        self.bn1.visit_state(&format!("{prefix}bn1."), f);
        self.bn2.visit_state(&format!("{prefix}bn2."), f);
        if let Some((_, bn)) = &mut self.down {
            bn.visit_state(&format!("{prefix}down_bn."), f);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressorNet<S: Scalar> {
    variant: RegressorVariant,
    stem: Conv2d<S>,
    stem_bn: BatchNorm2d<S>,
    stem_relu: Relu<S>,
    stem_pool: Option<MaxPool2d>,
    stages: Vec<Vec<BasicBlock<S>>>,
    gap: GlobalAvgPool,
    fc1: Linear<S>,
    fc_relu: Relu<S>,
    fc2: Linear<S>,
}

impl<S: Scalar> RegressorNet<S> {
    pub fn build(cfg: &RegressorConfig, seed: u64) -> Result<Self> {
        if cfg.pretrained {
            return Err(Error::param(
                "pretrained backbones are not bundled; train from scratch",
            ));
        }
        let mut rng = Prng::seed_from_u64(derive_seed(seed, 0x2e0));
        let variant = cfg.variant;
        let (stem, stem_bn, stem_pool, stages) = match variant {
            RegressorVariant::ResNet18 => {
                let stem = Conv2d::new(3, 64, 7, 2, 3, &mut rng);
                let bn = BatchNorm2d::new(64);
                let pool = Some(MaxPool2d::new(3, 2, 1));
                let plan: [(usize, usize, usize); 4] =
                    [(64, 64, 1), (64, 128, 2), (128, 256, 2), (256, 512, 2)];
                let stages = plan
                    .iter()
                    .map(|&(in_c, out_c, stride)| {
                        vec![
                            BasicBlock::new(in_c, out_c, stride, &mut rng),
                            BasicBlock::new(out_c, out_c, 1, &mut rng),
                        ]
                    })
                    .collect();
                (stem, bn, pool, stages)
            }
            RegressorVariant::ResNetSmall => {
                let stem = Conv2d::new(3, 16, 3, 1, 1, &mut rng);
                let bn = BatchNorm2d::new(16);
                let plan: [(usize, usize, usize); 3] = [(16, 16, 1), (16, 32, 2), (32, 64, 2)];
                let stages = plan
                    .iter()
                    .map(|&(in_c, out_c, stride)| {
                        vec![
                            BasicBlock::new(in_c, out_c, stride, &mut rng),
                            BasicBlock::new(out_c, out_c, 1, &mut rng),
                        ]
                    })
                    .collect();
                (stem, bn, None, stages)
            }
        };
        let features = variant.feature_width();
        let hidden = variant.fusion_hidden();
        Ok(RegressorNet {
            variant,
            stem,
            stem_bn,
            stem_relu: Relu::new(),
            stem_pool,
            stages,
            gap: GlobalAvgPool::new(),
            fc1: Linear::new(features, hidden, &mut rng),
            fc_relu: Relu::new(),
            fc2: Linear::new(hidden, 1, &mut rng),
        })
    }

    pub fn variant(&self) -> RegressorVariant {
        self.variant
    }

    /// Backbone features before the fusion head, `[n, features, 1, 1]`.
    pub fn features(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>> {
        let mut t = self.stem.forward(x, mode)?;
        t = self.stem_bn.forward(&t, mode)?;
        t = self.stem_relu.forward(&t, mode)?;
        if let Some(pool) = &mut self.stem_pool {
            t = pool.forward(&t, mode)?;
        }
        for stage in &mut self.stages {
            for block in stage {
                t = block.forward(&t, mode)?;
            }
        }
        self.gap.forward(&t, mode)
    }
}

impl<S: Scalar> Module<S> for RegressorNet<S> {
    fn forward(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>> {
        let feats = self.features(x, mode)?;
        let mut t = self.fc1.forward(&feats, mode)?;
        t = self.fc_relu.forward(&t, mode)?;
        self.fc2.forward(&t, mode)
    }

    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S> {
        let mut g = self.fc2.backward(grad_out);
        g = self.fc_relu.backward(&g);
        g = self.fc1.backward(&g);
        g = <GlobalAvgPool as Module<S>>::backward(&mut self.gap, &g);
        for stage in self.stages.iter_mut().rev() {
            for block in stage.iter_mut().rev() {
                g = block.backward(&g);
            }
        }
        if let Some(pool) = &mut self.stem_pool {
            g = <MaxPool2d as Module<S>>::backward(pool, &g);
        }
        g = self.stem_relu.backward(&g);
        g = self.stem_bn.backward(&g);
        self.stem.backward(&g)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        self.stem.visit_params(&format!("{prefix}stem."), f);
        self.stem_bn.visit_params(&format!("{prefix}stem_bn."), f);
        for (si, stage) in self.stages.iter_mut().enumerate() {
            for (bi, block) in stage.iter_mut().enumerate() {
                block.visit_params(&format!("{prefix}stage{}.block{bi}.", si + 1), f);
            }
        }
        self.fc1.visit_params(&format!("{prefix}fusion.fc1."), f);
        self.fc2.visit_params(&format!("{prefix}fusion.fc2."), f);
    }

    fn visit_state(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        self.stem_bn.visit_state(&format!("{prefix}stem_bn."), f);
        for (si, stage) in self.stages.iter_mut().enumerate() {
            for (bi, block) in stage.iter_mut().enumerate() {
                block.visit_state(&format!("{prefix}stage{}.block{bi}.", si + 1), f);
            }
        }
    }
}
