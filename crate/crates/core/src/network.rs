//! The cascaded dehazing network: a shared convolutional trunk feeding a
//! light airlight head and a densely-concatenated transmission head, plus
//! weight initialization and the joint training loop.
//!
//! Wiring: every trunk and in-block layer is conv+ReLU; both heads end in
//! a linear conv that emits a single-channel map. Inside the transmission
//! head, each block of `trans_block_size` layers runs sequentially and the
//! block's layer outputs are channel-concatenated to feed whatever comes
//! after the block (the next block's first layer, or the final conv).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adam::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::losses::{mse_loss, ssim_loss, ssim_map, total_loss, SsimParams};
use crate::ops::{
    concat_backward, concat_channels, conv2d_backward_weights_with, conv2d_backward_with,
    conv2d_forward_with, relu, relu_backward, ConvParams, ConvScratch,
};
use crate::seed::subseed;
use crate::synth::HazeSample;
use crate::tensor::{Real, Tensor};

/// Architecture knobs. The defaults are the basic setting: a 4-layer
/// 16-filter trunk, a 4-layer 8-filter airlight head, and a transmission
/// head of 2 concat blocks of 3 layers plus the final 1-channel conv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub trunk_depth: usize,
    pub trunk_filters: usize,
    pub kernel_size: usize,
    pub airlight_depth: usize,
    pub airlight_filters: usize,
    pub trans_block_size: usize,
    pub concat_blocks: usize,
    pub init_std: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            trunk_depth: 4,
            trunk_filters: 16,
            kernel_size: 3,
            airlight_depth: 4,
            airlight_filters: 8,
            trans_block_size: 3,
            concat_blocks: 2,
            init_std: 0.15,
        }
    }
}

/// Shape and activation of one conv layer, fully determined by the config.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trunk_depth", self.trunk_depth),
            ("trunk_filters", self.trunk_filters),
            ("airlight_depth", self.airlight_depth),
            ("airlight_filters", self.airlight_filters),
            ("trans_block_size", self.trans_block_size),
            ("concat_blocks", self.concat_blocks),
        ] {
            if v == 0 {
                return Err(Error::InvalidParam {
                    name,
                    value: 0.0,
                    constraint: ">= 1",
                });
            }
        }
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            return Err(Error::InvalidParam {
                name: "kernel_size",
                value: self.kernel_size as f64,
                constraint: "odd and >= 1",
            });
        }
        if !(self.init_std > 0.0) {
            return Err(Error::InvalidParam {
                name: "init_std",
                value: self.init_std,
                constraint: "> 0",
            });
        }
        Ok(())
    }

    /// Transmission head layer count: concat_blocks * trans_block_size + 1.
    pub fn trans_layer_count(&self) -> usize {
        self.concat_blocks * self.trans_block_size + 1
    }

    /// All conv layers in storage order: trunk, airlight head,
    /// transmission head.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        for i in 0..self.trunk_depth {
            specs.push(LayerSpec {
                name: format!("trunk.{i}"),
                in_channels: if i == 0 { 3 } else { self.trunk_filters },
                out_channels: self.trunk_filters,
                relu: true,
            });
        }
        for i in 0..self.airlight_depth {
            let last = i == self.airlight_depth - 1;
            specs.push(LayerSpec {
                name: format!("air.{i}"),
                in_channels: if i == 0 {
                    self.trunk_filters
                } else {
                    self.airlight_filters
                },
                out_channels: if last { 1 } else { self.airlight_filters },
                relu: !last,
            });
        }
        let concat_width = self.trans_block_size * self.trunk_filters;
        for b in 0..self.concat_blocks {
            for l in 0..self.trans_block_size {
                let idx = b * self.trans_block_size + l;
                specs.push(LayerSpec {
                    name: format!("trans.{idx}"),
                    in_channels: if l == 0 {
                        if b == 0 {
                            self.trunk_filters
                        } else {
                            concat_width
                        }
                    } else {
                        self.trunk_filters
                    },
                    out_channels: self.trunk_filters,
                    relu: true,
                });
            }
        }
        specs.push(LayerSpec {
            name: format!("trans.{}", self.trans_layer_count() - 1),
            in_channels: concat_width,
            out_channels: 1,
            relu: false,
        });
        specs
    }
}

/// Named, ordered parameter collection for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore<T: Real> {
    layers: Vec<(String, ConvParams<T>)>,
}

impl<T: Real> WeightStore<T> {
    pub fn from_layers(layers: Vec<(String, ConvParams<T>)>) -> Self {
        WeightStore { layers }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.layers[idx].0
    }

    pub fn params(&self, idx: usize) -> &ConvParams<T> {
        &self.layers[idx].1
    }

    pub fn params_mut(&mut self, idx: usize) -> &mut ConvParams<T> {
        &mut self.layers[idx].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, ConvParams<T>)> {
        self.layers.iter()
    }

    pub fn cast<U: Real>(&self) -> WeightStore<U> {
        WeightStore {
            layers: self
                .layers
                .iter()
                .map(|(n, p)| {
                    (
                        n.clone(),
                        ConvParams::new(
                            p.kernel().cast::<U>(),
                            p.bias().iter().map(|b| U::from_f64(b.to_f64_lossy())).collect(),
                        )
                        .expect("cast preserves validity"),
                    )
                })
                .collect(),
        }
    }

    /// Check that layer names and dims match the config exactly; the first
    /// offending layer is named in the error.
    pub fn validate_against(&self, config: &NetworkConfig) -> Result<()> {
        let specs = config.layer_specs();
        if specs.len() != self.layers.len() {
            return Err(Error::LayerMismatch {
                layer: "<store>".to_string(),
                detail: format!(
                    "config expects {} layers, store has {}",
                    specs.len(),
                    self.layers.len()
                ),
            });
        }
        let f = config.kernel_size;
        for (spec, (name, params)) in specs.iter().zip(self.layers.iter()) {
            if *name != spec.name {
                return Err(Error::LayerMismatch {
                    layer: spec.name.clone(),
                    detail: format!("found layer named {name}"),
                });
            }
            let want = (spec.out_channels, spec.in_channels, f, f);
            if params.kernel().shape() != want {
                return Err(Error::LayerMismatch {
                    layer: spec.name.clone(),
                    detail: format!(
                        "kernel dims {:?} do not match config {:?}",
                        params.kernel().shape(),
                        want
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Gaussian-initialized weights: kernels ~ N(0, init_std^2) from a seeded
/// generator, biases exactly zero. Draws are rounded through f32 so a
/// fresh store survives the 32-bit weight file bit-for-bit.
pub fn init_weights<T: Real>(config: &NetworkConfig, seed: u64) -> Result<WeightStore<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, config.init_std).expect("validated init_std");
    let f = config.kernel_size;
    let mut layers = Vec::new();
    for spec in config.layer_specs() {
        let count = spec.out_channels * spec.in_channels * f * f;
        let data: Vec<T> = (0..count)
            .map(|_| T::from_f64(normal.sample(&mut rng) as f32 as f64))
            .collect();
        let kernel = Tensor::from_vec(spec.out_channels, spec.in_channels, f, f, data)?;
        let bias = vec![T::zero(); spec.out_channels];
        layers.push((spec.name, ConvParams::new(kernel, bias)?));
    }
    Ok(WeightStore { layers })
}

/// The two predicted maps, both at the input's spatial resolution.
#[derive(Debug, Clone)]
pub struct CascadeOutput<T: Real> {
    pub transmission: Tensor<T>,
    pub airlight: Tensor<T>,
}

struct Tape<T: Real> {
    input: Tensor<T>,
    preact: Tensor<T>,
}

fn run_forward<T: Real>(
    input: &Tensor<T>,
    store: &WeightStore<T>,
    config: &NetworkConfig,
    want_tape: bool,
    scratch: &mut ConvScratch<T>,
) -> Result<(CascadeOutput<T>, Vec<Tape<T>>)> {
    store.validate_against(config)?;
    if input.channels() != 3 {
        return Err(Error::ShapeMismatch {
            context: "forward_cascade: RGB input required",
            expected: crate::tensor::shape_str((input.batch(), 3, input.height(), input.width())),
            got: crate::tensor::shape_str(input.shape()),
        });
    }
    let mut tapes = Vec::new();
    let mut record = |input: &Tensor<T>, preact: &Tensor<T>| {
        if want_tape {
            tapes.push(Tape {
                input: input.clone(),
                preact: preact.clone(),
            });
        }
    };

    let mut idx = 0;
    let mut x = input.clone();
    for _ in 0..config.trunk_depth {
        let pre = conv2d_forward_with(&x, store.params(idx), scratch)?;
        record(&x, &pre);
        x = relu(&pre);
        idx += 1;
    }
    let shared = x;

    let mut a = shared.clone();
    for i in 0..config.airlight_depth {
        let pre = conv2d_forward_with(&a, store.params(idx), scratch)?;
        record(&a, &pre);
        a = if i + 1 < config.airlight_depth {
            relu(&pre)
        } else {
            pre
        };
        idx += 1;
    }
    let airlight = a;

    let mut block_in = shared;
    for _ in 0..config.concat_blocks {
        let mut outs = Vec::with_capacity(config.trans_block_size);
        let mut cur = block_in;
        for _ in 0..config.trans_block_size {
            let pre = conv2d_forward_with(&cur, store.params(idx), scratch)?;
            record(&cur, &pre);
            cur = relu(&pre);
            outs.push(cur.clone());
            idx += 1;
        }
        let refs: Vec<&Tensor<T>> = outs.iter().collect();
        block_in = concat_channels(&refs)?;
    }
    let pre = conv2d_forward_with(&block_in, store.params(idx), scratch)?;
    record(&block_in, &pre);

    Ok((
        CascadeOutput {
            transmission: pre,
            airlight,
        },
        tapes,
    ))
}

/// Run the cascade on an RGB batch in [0, 1].
pub fn forward_cascade<T: Real>(
    input: &Tensor<T>,
    store: &WeightStore<T>,
    config: &NetworkConfig,
) -> Result<CascadeOutput<T>> {
    Ok(run_forward(input, store, config, false, &mut ConvScratch::new())?.0)
}

/// Per-layer kernel and bias gradients, indexed like the layer specs.
pub struct LayerGrads<T: Real> {
    pub grads: Vec<(Tensor<T>, Vec<T>)>,
}

impl<T: Real> LayerGrads<T> {
    fn zeros_like(store: &WeightStore<T>) -> Self {
        LayerGrads {
            grads: store
                .iter()
                .map(|(_, p)| {
                    let (o, i, f, _) = p.kernel().shape();
                    (Tensor::zeros(o, i, f, f), vec![T::zero(); o])
                })
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &LayerGrads<T>) {
        for ((k, b), (ok, ob)) in self.grads.iter_mut().zip(other.grads.iter()) {
            for (a, v) in k.data_mut().iter_mut().zip(ok.data().iter()) {
                *a = *a + *v;
            }
            for (a, v) in b.iter_mut().zip(ob.iter()) {
                *a = *a + *v;
            }
        }
    }
}

/// Backpropagate both head gradients through the cascade. Trunk gradients
/// are the sum of what flows back from each head.
fn backward<T: Real>(
    store: &WeightStore<T>,
    config: &NetworkConfig,
    tapes: &[Tape<T>],
    grad_trans: &Tensor<T>,
    grad_air: &Tensor<T>,
    scratch: &mut ConvScratch<T>,
) -> Result<LayerGrads<T>> {
    let td = config.trunk_depth;
    let ad = config.airlight_depth;
    let bs = config.trans_block_size;
    let trans_start = td + ad;
    let mut out = LayerGrads::zeros_like(store);

    // Transmission head, final layer first (linear).
    let last = trans_start + config.trans_layer_count() - 1;
    let (g_in, gk, gb) =
        conv2d_backward_with(&tapes[last].input, store.params(last), grad_trans, scratch)?;
    out.grads[last] = (gk, gb);
    let mut block_grad = g_in;
    for b in (0..config.concat_blocks).rev() {
        let parts = concat_backward(&block_grad, &vec![config.trunk_filters; bs])?;
        let mut carry: Option<Tensor<T>> = None;
        for l in (0..bs).rev() {
            let idx = trans_start + b * bs + l;
            let g_out = match carry.take() {
                Some(c) => parts[l].add(&c)?,
                None => parts[l].clone(),
            };
            let g_pre = relu_backward(&tapes[idx].preact, &g_out)?;
            let (g_in, gk, gb) =
                conv2d_backward_with(&tapes[idx].input, store.params(idx), &g_pre, scratch)?;
            out.grads[idx] = (gk, gb);
            carry = Some(g_in);
        }
        block_grad = carry.expect("trans_block_size >= 1");
    }
    let trunk_from_trans = block_grad;

    // Airlight head (last layer linear, earlier layers ReLU).
    let mut g = grad_air.clone();
    for i in (0..ad).rev() {
        let idx = td + i;
        if i + 1 < ad {
            g = relu_backward(&tapes[idx].preact, &g)?;
        }
        let (g_in, gk, gb) =
            conv2d_backward_with(&tapes[idx].input, store.params(idx), &g, scratch)?;
        out.grads[idx] = (gk, gb);
        g = g_in;
    }
    let trunk_from_air = g;

    // Shared trunk: joint optimization sums both heads' gradients.
    let mut g = trunk_from_trans.add(&trunk_from_air)?;
    for i in (0..td).rev() {
        g = relu_backward(&tapes[i].preact, &g)?;
        if i == 0 {
            // The first layer reads the image; its input gradient has no
            // consumer.
            let (gk, gb) =
                conv2d_backward_weights_with(&tapes[i].input, store.params(i), &g, scratch)?;
            out.grads[i] = (gk, gb);
        } else {
            let (g_in, gk, gb) =
                conv2d_backward_with(&tapes[i].input, store.params(i), &g, scratch)?;
            out.grads[i] = (gk, gb);
            g = g_in;
        }
    }
    Ok(out)
}

/// Gradients of L_total = L_SSIM(airlight) + L_MSE(transmission) for a
/// single sample, plus the two loss parts. Exposed for gradient checking.
pub fn loss_and_gradients<T: Real>(
    input: &Tensor<T>,
    t_target: &Tensor<T>,
    b_target: &Tensor<T>,
    store: &WeightStore<T>,
    config: &NetworkConfig,
    ssim_params: &SsimParams,
) -> Result<(f64, f64, LayerGrads<T>)> {
    let mut scratch = ConvScratch::new();
    let (out, tapes) = run_forward(input, store, config, true, &mut scratch)?;
    let (ssim_part, grad_air) = ssim_loss(&out.airlight, b_target, ssim_params)?;
    let (mse_part, grad_trans) = mse_loss(&out.transmission, t_target)?;
    let grads = backward(store, config, &tapes, &grad_trans, &grad_air, &mut scratch)?;
    Ok((ssim_part, mse_part, grads))
}

/// Reduce a predicted airlight map to the scalar B: the median of the map,
/// clipped to [0, 1]. The median shrugs off the few outlier pixels a nearly
/// constant map still carries.
pub fn estimate_scalar_airlight<T: Real>(airlight_map: &Tensor<T>) -> f64 {
    let mut values: Vec<f64> = airlight_map.data().iter().map(|v| v.to_f64_lossy()).collect();
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    };
    median.clamp(0.0, 1.0)
}

/// Optimizer and loop hyperparameters. Defaults: Adam at lr 0.001 with
/// beta1 0.9, batches of 32.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 0.001,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub ssim: f64,
    pub mse: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_total: f64,
    pub val: LossParts,
}

/// Loss history of one training run. `initial_val` is measured on the
/// freshly initialized weights, before the first optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_val: LossParts,
    pub epochs: Vec<EpochRecord>,
    pub optimizer_steps: u64,
}

struct Prepared<T: Real> {
    input: Tensor<T>,
    t_target: Tensor<T>,
    b_target: Tensor<T>,
}

fn prepare<T: Real>(samples: &[HazeSample<T>]) -> Result<Vec<Prepared<T>>> {
    if samples.is_empty() {
        return Err(Error::DegenerateInput {
            context: "train: empty sample set",
        });
    }
    let (h, w) = (samples[0].hazy.height(), samples[0].hazy.width());
    samples
        .iter()
        .map(|s| {
            if (s.hazy.height(), s.hazy.width()) != (h, w) {
                return Err(Error::ShapeMismatch {
                    context: "train: samples must share dims",
                    expected: crate::tensor::shape_str((1, 3, h, w)),
                    got: crate::tensor::shape_str(s.hazy.shape()),
                });
            }
            Ok(Prepared {
                input: s.hazy.clone(),
                t_target: s.transmission.clone(),
                b_target: Tensor::filled(1, 1, h, w, T::from_f64(s.airlight)),
            })
        })
        .collect()
}

fn validation_loss<T: Real>(
    val: &[Prepared<T>],
    store: &WeightStore<T>,
    config: &NetworkConfig,
    ssim_params: &SsimParams,
    scratch: &mut ConvScratch<T>,
) -> Result<LossParts> {
    let mut ssim_sum = 0.0;
    let mut mse_sum = 0.0;
    for sample in val {
        let out = run_forward(&sample.input, store, config, false, scratch)?.0;
        let smap = ssim_map(&out.airlight, &sample.b_target, ssim_params)?;
        ssim_sum += 1.0 - smap.sum_f64() / smap.len() as f64;
        let (mse, _) = mse_loss(&out.transmission, &sample.t_target)?;
        mse_sum += mse;
    }
    let n = val.len() as f64;
    let ssim = ssim_sum / n;
    let mse = mse_sum / n;
    Ok(LossParts {
        ssim,
        mse,
        total: total_loss(ssim, mse)?,
    })
}

/// Train the cascade: seeded init, seeded shuffling into mini-batches,
/// joint backward through both heads, Adam on every parameter. The run is
/// strictly sequential, so a fixed seed reproduces it exactly.
pub fn train<T: Real>(
    train_set: &[HazeSample<T>],
    val_set: &[HazeSample<T>],
    config: &NetworkConfig,
    hyper: &TrainHyper,
) -> Result<(WeightStore<T>, TrainReport)> {
    config.validate()?;
    if hyper.batch_size == 0 || hyper.epochs == 0 {
        return Err(Error::InvalidParam {
            name: "batch_size/epochs",
            value: 0.0,
            constraint: ">= 1",
        });
    }
    let train_p = prepare(train_set)?;
    let val_p = prepare(val_set)?;
    let ssim_params = SsimParams::default();

    let mut store = init_weights::<T>(config, subseed(hyper.seed, "init", 0))?;
    let mut adam: Vec<(AdamState<T>, AdamState<T>)> = store
        .iter()
        .map(|(_, p)| {
            let make = |len| {
                AdamState::new(
                    len,
                    T::from_f64(hyper.lr),
                    T::from_f64(hyper.beta1),
                    T::from_f64(hyper.beta2),
                    T::from_f64(hyper.eps),
                )
            };
            (make(p.kernel().len()), make(p.bias().len()))
        })
        .collect();

    let mut scratch = ConvScratch::new();
    let initial_val = validation_loss(&val_p, &store, config, &ssim_params, &mut scratch)?;
    let mut report = TrainReport {
        initial_val,
        epochs: Vec::with_capacity(hyper.epochs),
        optimizer_steps: 0,
    };

    let mut order: Vec<usize> = (0..train_p.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(subseed(hyper.seed, "shuffle", 0));
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let batch_n = chunk.len() as f64;
            let inv_n = T::from_f64(1.0 / batch_n);
            let mut acc = LayerGrads::zeros_like(&store);
            for &si in chunk {
                let sample = &train_p[si];
                let (out, tapes) = run_forward(&sample.input, &store, config, true, &mut scratch)?;
                let (ssim_part, grad_air) =
                    ssim_loss(&out.airlight, &sample.b_target, &ssim_params)?;
                let (mse_part, grad_trans) = mse_loss(&out.transmission, &sample.t_target)?;
                let sample_loss = total_loss(ssim_part, mse_part).map_err(|_| {
                    Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                    }
                })?;
                epoch_loss_sum += sample_loss;
                let grads = backward(
                    &store,
                    config,
                    &tapes,
                    &grad_trans.scale(inv_n),
                    &grad_air.scale(inv_n),
                    &mut scratch,
                )?;
                acc.add_assign(&grads);
            }
            for idx in 0..store.len() {
                let name = store.name(idx).to_string();
                let (k_state, b_state) = &mut adam[idx];
                let (gk, gb) = &acc.grads[idx];
                let params = store.params_mut(idx);
                adam_step(
                    &format!("{name}.kernel"),
                    params.kernel_mut().data_mut(),
                    gk.data(),
                    k_state,
                )?;
                adam_step(&format!("{name}.bias"), params.bias_mut(), gb, b_state)?;
            }
            report.optimizer_steps += 1;
        }
        let val = validation_loss(&val_p, &store, config, &ssim_params, &mut scratch)?;
        report.epochs.push(EpochRecord {
            epoch,
            train_total: epoch_loss_sum / train_p.len() as f64,
            val,
        });
    }
    Ok((store, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{procedural_scene, expand_image, SampleRanges};

    #[test]
    fn default_config_layer_shapes() {
        let config = NetworkConfig::default();
        let specs = config.layer_specs();
        assert_eq!(specs.len(), 4 + 4 + 7);
        for i in 0..4 {
            assert_eq!(specs[i].name, format!("trunk.{i}"));
            assert_eq!(specs[i].out_channels, 16);
            assert_eq!(specs[i].in_channels, if i == 0 { 3 } else { 16 });
            assert!(specs[i].relu);
        }
        for i in 0..4 {
            let s = &specs[4 + i];
            assert_eq!(s.out_channels, if i == 3 { 1 } else { 8 });
            assert_eq!(s.relu, i != 3);
        }
        let trans = &specs[8..];
        assert_eq!(trans.len(), 7);
        assert_eq!(trans[0].in_channels, 16);
        assert_eq!(trans[3].in_channels, 48, "block 2 reads the concat");
        assert_eq!(trans[6].in_channels, 48);
        assert_eq!(trans[6].out_channels, 1);
        assert!(!trans[6].relu);
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let config = NetworkConfig::default();
        let a = init_weights::<f64>(&config, 9).unwrap();
        let b = init_weights::<f64>(&config, 9).unwrap();
        assert_eq!(a, b);
        let c = init_weights::<f64>(&config, 10).unwrap();
        assert_ne!(a, c);

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        for (_, p) in a.iter() {
            assert!(p.bias().iter().all(|&v| v == 0.0));
            for &v in p.kernel().data() {
                sum += v;
                sum_sq += v * v;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let std = (sum_sq / count - mean * mean).sqrt();
        assert!(
            (0.009..=0.011).contains(&std),
            "sample std {std} outside init_std * [0.9, 1.1]"
        );
    }

    #[test]
    fn forward_shapes_and_zero_weights() {
        let config = NetworkConfig::default();
        let store = init_weights::<f64>(&config, 1).unwrap();
        let input = Tensor::filled(1, 3, 48, 64, 0.5);
        let out = forward_cascade(&input, &store, &config).unwrap();
        assert_eq!(out.transmission.shape(), (1, 1, 48, 64));
        assert_eq!(out.airlight.shape(), (1, 1, 48, 64));

        // Zero weights, zero biases: both outputs identically zero.
        let zero = WeightStore::from_layers(
            config
                .layer_specs()
                .into_iter()
                .map(|s| {
                    let k = Tensor::zeros(s.out_channels, s.in_channels, 3, 3);
                    (s.name, ConvParams::new(k, vec![0.0; s.out_channels]).unwrap())
                })
                .collect(),
        );
        let out = forward_cascade(&input, &zero, &config).unwrap();
        assert!(out.transmission.data().iter().all(|&v| v == 0.0));
        assert!(out.airlight.data().iter().all(|&v| v == 0.0));

        // Fully convolutional: doubled input dims double the output dims.
        let big = Tensor::filled(1, 3, 96, 128, 0.5);
        let out = forward_cascade(&big, &store, &config).unwrap();
        assert_eq!(out.transmission.shape(), (1, 1, 96, 128));
    }

    #[test]
    fn store_config_mismatch_names_layer() {
        let config = NetworkConfig::default();
        let store = init_weights::<f64>(&config, 1).unwrap();
        let wider = NetworkConfig {
            trunk_filters: 32,
            ..config
        };
        let err = store.validate_against(&wider).unwrap_err();
        match err {
            Error::LayerMismatch { layer, .. } => assert_eq!(layer, "trunk.0"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn airlight_median_examples() {
        let constant = Tensor::<f64>::filled(1, 1, 4, 4, 0.85);
        assert!((estimate_scalar_airlight(&constant) - 0.85).abs() < 1e-12);

        let mut with_outlier = Tensor::<f64>::filled(1, 1, 4, 4, 0.9);
        *with_outlier.at_mut(0, 0, 2, 2) = 0.1;
        assert!((estimate_scalar_airlight(&with_outlier) - 0.9).abs() < 1e-12);

        let mut thirds = Tensor::<f64>::zeros(1, 1, 1, 9);
        for (i, v) in thirds.data_mut().iter_mut().enumerate() {
            *v = match i / 3 {
                0 => 0.7,
                1 => 0.8,
                _ => 0.9,
            };
        }
        assert!((estimate_scalar_airlight(&thirds) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn table_variants_construct_and_forward() {
        let base = NetworkConfig::default();
        let variants = [
            NetworkConfig { trunk_filters: 8, ..base },
            NetworkConfig { trunk_filters: 32, ..base },
            NetworkConfig { trunk_filters: 64, ..base },
            NetworkConfig { kernel_size: 5, ..base },
            NetworkConfig { kernel_size: 7, ..base },
            NetworkConfig { trunk_depth: 3, ..base },
            NetworkConfig { trunk_depth: 7, ..base },
            NetworkConfig { trunk_depth: 9, ..base },
            NetworkConfig { concat_blocks: 3, ..base },
            NetworkConfig { concat_blocks: 5, ..base },
        ];
        let input = Tensor::<f64>::filled(1, 3, 10, 12, 0.4);
        for config in variants {
            let store = init_weights::<f64>(&config, 3).unwrap();
            let out = forward_cascade(&input, &store, &config).unwrap();
            assert_eq!(out.transmission.shape(), (1, 1, 10, 12));
            assert_eq!(
                store.len(),
                config.trunk_depth + config.airlight_depth + config.trans_layer_count()
            );
        }
    }

    fn tiny_samples(count: usize, seed: u64) -> alloc::vec::Vec<HazeSample<f64>> {
        let mut out = alloc::vec::Vec::new();
        for i in 0..count {
            let (clean, depth) = procedural_scene::<f64>(16, 16, seed + i as u64);
            let mut s = expand_image(
                &format!("s{i}"),
                &clean,
                &depth,
                1,
                &SampleRanges::default(),
                seed,
                16,
                16,
            )
            .unwrap();
            out.append(&mut s);
        }
        out
    }

    #[test]
    fn train_step_count_and_determinism() {
        let config = NetworkConfig {
            trunk_depth: 2,
            trunk_filters: 4,
            airlight_depth: 2,
            airlight_filters: 4,
            trans_block_size: 2,
            concat_blocks: 1,
            ..NetworkConfig::default()
        };
        let train_set = tiny_samples(8, 100);
        let val_set = tiny_samples(2, 900);
        let hyper = TrainHyper {
            epochs: 2,
            batch_size: 4,
            seed: 5,
            ..TrainHyper::default()
        };
        let (store_a, report_a) = train(&train_set, &val_set, &config, &hyper).unwrap();
        // 8 samples / batch 4 = 2 optimizer steps per epoch, 2 epochs.
        assert_eq!(report_a.optimizer_steps, 4);
        assert_eq!(report_a.epochs.len(), 2);

        let (store_b, report_b) = train(&train_set, &val_set, &config, &hyper).unwrap();
        assert_eq!(store_a, store_b);
        assert_eq!(report_a, report_b);
    }

    #[test]
    fn partial_final_batch_still_steps() {
        let config = NetworkConfig {
            trunk_depth: 1,
            trunk_filters: 2,
            airlight_depth: 1,
            airlight_filters: 2,
            trans_block_size: 1,
            concat_blocks: 1,
            ..NetworkConfig::default()
        };
        let train_set = tiny_samples(5, 10);
        let val_set = tiny_samples(1, 99);
        let hyper = TrainHyper {
            epochs: 1,
            batch_size: 4,
            seed: 5,
            ..TrainHyper::default()
        };
        let (_, report) = train(&train_set, &val_set, &config, &hyper).unwrap();
        // 5 samples with batch 4: one full batch plus the remainder.
        assert_eq!(report.optimizer_steps, 2);
    }
}
