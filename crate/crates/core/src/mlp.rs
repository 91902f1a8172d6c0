//! Fully connected softmax classifier, written out by hand: forward pass,
//! cross-entropy, backpropagation, mini-batch SGD with inverted dropout,
//! and a line-oriented text persistence format.
//!
//! Hidden layers use ReLU. Inputs are clamped to `[-input_clamp, +input_clamp]`
//! (default 20) so saturated LLRs keep activations bounded; the clamp is a
//! runtime setting, not part of the persisted model.

use crate::dataset::WindowSample;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Default input clamp magnitude, matching the decoder's pad LLR value.
pub const DEFAULT_INPUT_CLAMP: f64 = 20.0;

/// The trained decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<R: Real> {
    dims: Vec<usize>,
    /// `weights[i]` has shape `(dims[i], dims[i+1])`.
    weights: Vec<Array2<R>>,
    biases: Vec<Array1<R>>,
    pub dropout_rate: f64,
    pub input_clamp: R,
}

/// Per-layer parameter gradients, shaped like the model.
#[derive(Debug, Clone)]
pub struct Gradients<R> {
    pub weights: Vec<Array2<R>>,
    pub biases: Vec<Array1<R>>,
}

/// Activations recorded by a single-input forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<R> {
    /// Post-activation (and, in train mode, post-dropout) hidden layers.
    pub hidden: Vec<Vec<R>>,
    /// Softmax output, sums to 1.
    pub probs: Vec<R>,
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Halve the learning rate every 2500 steps.
    pub lr_step_decay: bool,
    /// Return the parameter average over the final 20% of steps instead of
    /// the best validation checkpoint.
    pub polyak_tail: bool,
    /// Validation-accuracy checkpoint interval, steps.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            iterations: 10_000,
            batch_size: 128,
            dropout_rate: 0.1,
            seed: 0,
            lr_step_decay: false,
            polyak_tail: false,
            checkpoint_every: 500,
        }
    }
}

/// One training step's record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    /// Present on checkpoint steps.
    pub val_accuracy: Option<f64>,
}

/// Loss trace and checkpoint accuracies from a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
}

impl TrainHistory {
    /// Final recorded validation accuracy, if any checkpoint ran.
    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.steps.iter().rev().find_map(|s| s.val_accuracy)
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::DimMismatch(format!(
            "need at least input and output widths, got {dims:?}"
        )));
    }
    if dims.iter().any(|&d| d < 1) {
        return Err(Error::DimMismatch(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

/// He-initialized model: weights from N(0, 2/fan_in), biases zero,
/// deterministic per seed.
pub fn init_model<R: Real>(dims: &[usize], init_seed: u64) -> Result<MlpModel<R>> {
    validate_dims(dims)?;
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for (layer, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = R::from_f64_c((2.0 / fan_in as f64).sqrt());
        let mut rng = seed::stream(init_seed, "init", layer as u64);
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| R::standard_normal(&mut rng) * std);
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(MlpModel {
        dims: dims.to_vec(),
        weights,
        biases,
        dropout_rate: 0.1,
        input_clamp: R::from_f64_c(DEFAULT_INPUT_CLAMP),
    })
}

struct BatchCache<R> {
    /// Clamped inputs, then post-dropout hidden activations.
    acts: Vec<Array2<R>>,
    /// Pre-activations per non-input layer.
    zs: Vec<Array2<R>>,
    /// Dropout scale masks per hidden layer (empty in infer mode / p = 0).
    masks: Vec<Array2<R>>,
    probs: Array2<R>,
}

fn softmax_rows<R: Real>(logits: &mut Array2<R>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().cloned().fold(R::neg_infinity(), R::max);
        let mut sum = R::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

impl<R: Real> MlpModel<R> {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_width(&self) -> usize {
        self.dims[0]
    }

    pub fn class_count(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<R>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<R>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<R>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<R>] {
        &mut self.biases
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_width() {
            return Err(Error::DimMismatch(format!(
                "input width {len} does not match model input {}",
                self.input_width()
            )));
        }
        Ok(())
    }

    fn clamp_input(&self, x: R) -> R {
        x.max(-self.input_clamp).min(self.input_clamp)
    }

    /// Batched forward pass. `dropout_rng` enables train mode: each hidden
    /// activation is zeroed with probability `dropout_rate` and survivors
    /// are scaled by `1/(1-p)`, so inference needs no rescaling.
    fn forward_batch<G: Rng + ?Sized>(
        &self,
        x: ArrayView2<R>,
        mut dropout_rng: Option<&mut G>,
    ) -> BatchCache<R> {
        let layer_count = self.weights.len();
        let mut acts: Vec<Array2<R>> = Vec::with_capacity(layer_count);
        let mut zs = Vec::with_capacity(layer_count);
        let mut masks = Vec::new();
        acts.push(x.mapv(|v| self.clamp_input(v)));

        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[i].dot(w);
            for mut row in z.rows_mut() {
                row += b;
            }
            if i + 1 < layer_count {
                let mut a = z.mapv(|v| v.max(R::zero()));
                if let Some(rng) = dropout_rng.as_deref_mut() {
                    let p = self.dropout_rate;
                    if p > 0.0 {
                        let keep = R::from_f64_c(1.0 / (1.0 - p));
                        let mask =
                            Array2::from_shape_fn(a.raw_dim(), |_| {
                                if rng.gen::<f64>() < p {
                                    R::zero()
                                } else {
                                    keep
                                }
                            });
                        a = a * &mask;
                        masks.push(mask);
                    }
                }
                zs.push(z);
                acts.push(a);
            } else {
                softmax_rows(&mut z);
                return BatchCache {
                    acts,
                    zs,
                    masks,
                    probs: z,
                };
            }
        }
        unreachable!("model has at least one layer");
    }

    /// Batched inference: one row of class probabilities per input row.
    pub fn forward_batch_infer(&self, x: ArrayView2<R>) -> Result<Array2<R>> {
        self.check_input(x.ncols())?;
        Ok(self.forward_batch::<seed::StreamRng>(x, None).probs)
    }

    /// Inference forward pass for one input.
    pub fn forward_infer(&self, input: &[R]) -> Result<ForwardPass<R>> {
        self.check_input(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let cache = self.forward_batch::<seed::StreamRng>(x, None);
        Ok(ForwardPass {
            hidden: cache.acts[1..].iter().map(|a| a.row(0).to_vec()).collect(),
            probs: cache.probs.row(0).to_vec(),
        })
    }

    /// Train-mode forward pass for one input, sampling dropout from `rng`.
    pub fn forward_train<G: Rng + ?Sized>(&self, input: &[R], rng: &mut G) -> Result<ForwardPass<R>> {
        self.check_input(input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let cache = self.forward_batch(x, Some(rng));
        Ok(ForwardPass {
            hidden: cache.acts[1..].iter().map(|a| a.row(0).to_vec()).collect(),
            probs: cache.probs.row(0).to_vec(),
        })
    }

    /// Most probable class for `input` and the full probability vector.
    /// Ties break toward the smaller class index.
    pub fn predict_class(&self, input: &[R]) -> Result<(u32, Vec<R>)> {
        let pass = self.forward_infer(input)?;
        Ok((argmax(&pass.probs), pass.probs))
    }

    /// Mean cross-entropy of `batch` and the exact gradients of that loss,
    /// with dropout masks sampled from `rng` and held fixed.
    pub fn loss_and_grad<G: Rng + ?Sized>(
        &self,
        batch: &[WindowSample<R>],
        rng: &mut G,
    ) -> Result<(R, Gradients<R>)> {
        if batch.is_empty() {
            return Err(Error::DimMismatch("empty batch".into()));
        }
        let (x, labels) = self.batch_matrix(batch)?;
        let cache = self.forward_batch(x.view(), Some(rng));
        let b = batch.len();
        let inv_b = R::from_f64_c(1.0 / b as f64);

        let mut loss = R::zero();
        for (row, &label) in cache.probs.rows().into_iter().zip(&labels) {
            loss -= row[label as usize].max(R::min_positive_value()).ln();
        }
        loss = loss * inv_b;

        // dL/dlogits = (P - Y) / B
        let mut delta = cache.probs;
        for (mut row, &label) in delta.rows_mut().into_iter().zip(&labels) {
            row[label as usize] -= R::one();
        }
        delta.mapv_inplace(|v| v * inv_b);

        let layer_count = self.weights.len();
        let mut grad_w = vec![Array2::zeros((0, 0)); layer_count];
        let mut grad_b = vec![Array1::zeros(0); layer_count];
        for layer in (0..layer_count).rev() {
            grad_w[layer] = cache.acts[layer].t().dot(&delta);
            grad_b[layer] = delta.sum_axis(Axis(0));
            if layer > 0 {
                let mut upstream = delta.dot(&self.weights[layer].t());
                if !cache.masks.is_empty() {
                    upstream = upstream * &cache.masks[layer - 1];
                }
                // ReLU gradient: pass where the pre-activation was positive
                upstream.zip_mut_with(&cache.zs[layer - 1], |u, &z| {
                    if z <= R::zero() {
                        *u = R::zero();
                    }
                });
                delta = upstream;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
        ))
    }

    fn batch_matrix(&self, batch: &[WindowSample<R>]) -> Result<(Array2<R>, Vec<u32>)> {
        let w = self.input_width();
        let classes = self.class_count() as u32;
        let mut x = Array2::zeros((batch.len(), w));
        let mut labels = Vec::with_capacity(batch.len());
        for (i, sample) in batch.iter().enumerate() {
            self.check_input(sample.features.len())?;
            if sample.label >= classes {
                return Err(Error::DimMismatch(format!(
                    "label {} out of range for {} classes",
                    sample.label, classes
                )));
            }
            for (j, &v) in sample.features.iter().enumerate() {
                x[(i, j)] = v;
            }
            labels.push(sample.label);
        }
        Ok((x, labels))
    }

    /// Fraction of samples whose argmax matches the label.
    pub fn accuracy(&self, samples: &[WindowSample<R>]) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for chunk in samples.chunks(1024) {
            let (x, labels) = self.batch_matrix(chunk)?;
            let probs = self.forward_batch_infer(x.view())?;
            for (row, &label) in probs.rows().into_iter().zip(&labels) {
                let mut best = 0usize;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                if best as u32 == label {
                    correct += 1;
                }
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}

fn argmax<R: Real>(probs: &[R]) -> u32 {
    let mut best = 0usize;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best as u32
}

/// Deterministic index stream: a seed-shuffled order, reshuffled each time
/// the deck is exhausted.
struct BatchCycler {
    order: Vec<usize>,
    cursor: usize,
    rng: seed::StreamRng,
}

impl BatchCycler {
    fn new(n: usize, train_seed: u64) -> Self {
        let mut cycler = BatchCycler {
            order: (0..n).collect(),
            cursor: 0,
            rng: seed::stream(train_seed, "batch-order", 0),
        };
        cycler.order.shuffle(&mut cycler.rng);
        cycler
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }
}

/// Mini-batch SGD: `param <- param - lr * grad` for `cfg.iterations` steps.
///
/// Validation accuracy is measured every `cfg.checkpoint_every` steps (and
/// at the final step); the returned model carries the best-scoring
/// checkpoint's parameters, or the tail Polyak average when
/// `cfg.polyak_tail` is set. Fully deterministic per seed.
pub fn train<R: Real>(
    mut model: MlpModel<R>,
    train_set: &[WindowSample<R>],
    val_set: &[WindowSample<R>],
    cfg: &TrainConfig,
) -> Result<(MlpModel<R>, TrainHistory)> {
    if train_set.is_empty() {
        return Err(Error::DimMismatch("empty training set".into()));
    }
    if cfg.batch_size < 1 || cfg.iterations < 1 || cfg.learning_rate < 0.0 {
        return Err(Error::InvalidConfig(
            "batch_size and iterations must be >= 1, learning_rate >= 0".into(),
        ));
    }
    model.dropout_rate = cfg.dropout_rate;

    let mut cycler = BatchCycler::new(train_set.len(), cfg.seed);
    let mut dropout_rng = seed::stream(cfg.seed, "dropout", 0);
    let mut history = TrainHistory::default();

    let mut best: Option<(f64, MlpModel<R>)> = None;
    let tail_start = cfg.iterations - (cfg.iterations / 5).max(1);
    let mut tail_sum: Option<Gradients<R>> = None;
    let mut tail_count = 0usize;

    let mut batch = Vec::with_capacity(cfg.batch_size);
    for step in 1..=cfg.iterations {
        let mut lr = cfg.learning_rate;
        if cfg.lr_step_decay {
            lr *= 0.5f64.powi(((step - 1) / 2500) as i32);
        }
        batch.clear();
        batch.extend(
            cycler
                .next_batch(cfg.batch_size)
                .into_iter()
                .map(|i| train_set[i].clone()),
        );
        let (loss, grads) = model.loss_and_grad(&batch, &mut dropout_rng)?;
        let lr_r = R::from_f64_c(lr);
        for (w, gw) in model.weights.iter_mut().zip(&grads.weights) {
            w.zip_mut_with(gw, |p, &g| *p = *p - lr_r * g);
        }
        for (b, gb) in model.biases.iter_mut().zip(&grads.biases) {
            b.zip_mut_with(gb, |p, &g| *p = *p - lr_r * g);
        }

        if cfg.polyak_tail && step > tail_start {
            match tail_sum.as_mut() {
                None => {
                    tail_sum = Some(Gradients {
                        weights: model.weights.clone(),
                        biases: model.biases.clone(),
                    })
                }
                Some(sum) => {
                    for (acc, w) in sum.weights.iter_mut().zip(&model.weights) {
                        *acc += w;
                    }
                    for (acc, b) in sum.biases.iter_mut().zip(&model.biases) {
                        *acc += b;
                    }
                }
            }
            tail_count += 1;
        }

        let mut record = StepRecord {
            step,
            loss: loss.to_f64_c(),
            val_accuracy: None,
        };
        if !val_set.is_empty() && (step % cfg.checkpoint_every == 0 || step == cfg.iterations) {
            let acc = model.accuracy(val_set)?;
            record.val_accuracy = Some(acc);
            let improved = best.as_ref().map_or(true, |(b, _)| acc > *b);
            if improved {
                best = Some((acc, model.clone()));
            }
        }
        history.steps.push(record);
    }

    let final_model = if cfg.polyak_tail {
        let sum = tail_sum.expect("tail average covers at least the last step");
        let scale = R::from_f64_c(1.0 / tail_count as f64);
        let mut avg = model;
        for (w, s) in avg.weights.iter_mut().zip(&sum.weights) {
            *w = s.mapv(|v| v * scale);
        }
        for (b, s) in avg.biases.iter_mut().zip(&sum.biases) {
            *b = s.mapv(|v| v * scale);
        }
        avg
    } else {
        best.map(|(_, m)| m).unwrap_or(model)
    };
    Ok((final_model, history))
}

const MODEL_MAGIC: &str = "CONVDEC-MLP v1";

/// Persist the model in the text format:
/// magic line, dims line, `dropout=<rate>` line, then per layer a
/// `W <i> <rows> <cols>` block of weight rows and a `b <i> <len>` bias line.
pub fn save_model<R: Real>(model: &MlpModel<R>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{MODEL_MAGIC}")?;
    let dims: Vec<String> = model.dims.iter().map(|d| d.to_string()).collect();
    writeln!(out, "{}", dims.join(" "))?;
    writeln!(out, "dropout={}", model.dropout_rate)?;
    for (i, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
        writeln!(out, "W {} {} {}", i, w.nrows(), w.ncols())?;
        for row in w.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    write!(out, " ")?;
                }
                write!(out, "{}", v.fmt_precise())?;
                first = false;
            }
            writeln!(out)?;
        }
        writeln!(out, "b {} {}", i, b.len())?;
        let mut first = true;
        for v in b {
            if !first {
                write!(out, " ")?;
            }
            write!(out, "{}", v.fmt_precise())?;
            first = false;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

struct LineSource<B> {
    lines: B,
    line_no: usize,
}

impl<B: Iterator<Item = std::io::Result<String>>> LineSource<B> {
    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.lines.next() {
            Some(line) => Ok(line?),
            None => Err(Error::Parse {
                line: self.line_no,
                msg: "unexpected end of file".into(),
            }),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn parse_values<R: Real>(&mut self, expected: usize) -> Result<Vec<R>> {
        let line = self.next_line()?;
        let values: Vec<R> = line
            .split_whitespace()
            .map(|f| R::parse_decimal(f).ok_or_else(|| self.err(format!("invalid number {f:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", values.len())));
        }
        Ok(values)
    }
}

/// Load a model saved by [`save_model`]; every parameter is recovered to its
/// exact bit pattern. Malformed files fail with the offending line number
/// and no partial model is returned.
pub fn load_model<R: Real>(path: &Path) -> Result<MlpModel<R>> {
    let reader = BufReader::new(File::open(path)?);
    let mut src = LineSource {
        lines: reader.lines(),
        line_no: 0,
    };

    if src.next_line()?.trim_end() != MODEL_MAGIC {
        return Err(Error::NotAModelFile);
    }
    let dims: Vec<usize> = src
        .next_line()?
        .split_whitespace()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| src.err(format!("invalid dimension {f:?}")))
        })
        .collect::<Result<_>>()?;
    validate_dims(&dims).map_err(|e| src.err(e.to_string()))?;

    let dropout_line = src.next_line()?;
    let dropout_rate: f64 = dropout_line
        .strip_prefix("dropout=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| src.err("expected dropout=<rate>"))?;
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(src.err(format!("dropout rate {dropout_rate} outside [0, 1)")));
    }

    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for i in 0..dims.len() - 1 {
        let header = src.next_line()?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let expected = [dims[i], dims[i + 1]];
        match fields.as_slice() {
            ["W", idx, rows, cols] => {
                let ok = idx.parse() == Ok(i)
                    && rows.parse() == Ok(expected[0])
                    && cols.parse() == Ok(expected[1]);
                if !ok {
                    return Err(src.err(format!(
                        "expected 'W {i} {} {}', found {header:?}",
                        expected[0], expected[1]
                    )));
                }
            }
            _ => return Err(src.err(format!("expected weight header, found {header:?}"))),
        }
        let mut w = Array2::zeros((dims[i], dims[i + 1]));
        for r in 0..dims[i] {
            let row = src.parse_values::<R>(dims[i + 1])?;
            for (c, v) in row.into_iter().enumerate() {
                w[(r, c)] = v;
            }
        }
        weights.push(w);

        let header = src.next_line()?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        match fields.as_slice() {
            ["b", idx, len] if idx.parse() == Ok(i) && len.parse() == Ok(dims[i + 1]) => {}
            _ => {
                return Err(src.err(format!(
                    "expected 'b {i} {}', found {header:?}",
                    dims[i + 1]
                )))
            }
        }
        biases.push(Array1::from_vec(src.parse_values::<R>(dims[i + 1])?));
    }

    Ok(MlpModel {
        dims,
        weights,
        biases,
        dropout_rate,
        input_clamp: R::from_f64_c(DEFAULT_INPUT_CLAMP),
    })
}
