//! Mask-estimation models: the feedforward network over context-expanded
//! features and the recurrent network over per-utterance sequences.
//!
//! Both predict a 64-channel mask per frame. The feedforward net sees
//! 896-dim rows (128 base features × 7 context frames), all layers sigmoid.
//! The recurrent net sees 128-dim rows, runs batch normalization on each
//! layer input (statistics over every valid frame in the batch), two tanh
//! LSTM layers, and a 64-cell output LSTM layer whose cell activation is
//! sigmoid so the mask lands in (0, 1).

use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::batchnorm::{BatchNorm, BatchNormCache};
use crate::nnet::dense::{DenseCache, DenseLayer};
use crate::nnet::dropout::{Dropout, DropoutCache};
use crate::nnet::lstm::{LstmCache, LstmLayer, GATE_NAMES};
use crate::nnet::tensor::Tensor2;
use crate::nnet::Activation;

/// Mask channels, equal to the filterbank channel count.
pub const MASK_DIM: usize = 64;
/// Base feature width (log energies + deltas).
pub const LSTM_INPUT_DIM: usize = 128;
/// Context-expanded feature width for the feedforward net.
pub const MLP_INPUT_DIM: usize = 896;

/// A serializable view of one parameter block.
pub struct NamedBlock<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

/// Mutable counterpart used when loading a checkpoint.
pub struct NamedBlockMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
}

// ---------------------------------------------------------------- MLP

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub dropout: Dropout,
    dims: Vec<usize>,
}

pub struct MlpCache {
    dense: Vec<DenseCache>,
    drops: Vec<DropoutCache>,
}

impl MlpModel {
    /// 896 → hidden ×3 → 64, every layer sigmoid.
    pub fn new(hidden: usize, keep_prob: f64, rng: &mut impl Rng) -> Result<Self> {
        Self::with_dims(
            &[MLP_INPUT_DIM, hidden, hidden, hidden, MASK_DIM],
            keep_prob,
            rng,
        )
    }

    pub fn with_dims(dims: &[usize], keep_prob: f64, rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParams(format!("bad mlp dims {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::new(w[0], w[1], Activation::Sigmoid, rng))
            .collect();
        Ok(Self { layers, dropout: Dropout::new(keep_prob)?, dims: dims.to_vec() })
    }

    /// Zero-weight shell used by the checkpoint loader.
    pub fn zeros_with_dims(dims: &[usize]) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::with_dims(dims, 1.0, &mut rng)?;
        for l in &mut model.layers {
            l.w.data_mut().fill(0.0);
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn arch_string(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        format!("mlp:{}", dims.join("-"))
    }

    /// Training forward with dropout after each hidden layer.
    pub fn forward_train(
        &self,
        x: &Tensor2,
        rng: &mut impl Rng,
    ) -> Result<(Tensor2, MlpCache)> {
        let mut dense = Vec::with_capacity(self.layers.len());
        let mut drops = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut cur = x.clone();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (mut y, cache) = layer.forward(&cur)?;
            dense.push(cache);
            if k < last {
                drops.push(self.dropout.forward(&mut y, true, rng));
            }
            cur = y;
        }
        Ok((cur, MlpCache { dense, drops }))
    }

    /// Inference: no dropout, no caches.
    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.infer(&cur)?;
        }
        Ok(cur)
    }

    /// Accumulates parameter gradients from dL/d(output).
    pub fn backward(&mut self, cache: &MlpCache, d_out: &Tensor2) -> Result<()> {
        let mut d = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            d = self.layers[k].backward(&cache.dense[k], &d)?;
            if k > 0 {
                self.dropout.backward(&cache.drops[k - 1], &mut d);
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for l in &mut self.layers {
            l.zero_grads();
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for l in &mut self.layers {
            l.visit_params(f);
        }
    }

    pub fn named_blocks(&self) -> Vec<NamedBlock<'_>> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            out.push(NamedBlock {
                name: format!("l{k}.w"),
                rows: l.w.rows(),
                cols: l.w.cols(),
                data: l.w.data(),
            });
            out.push(NamedBlock {
                name: format!("l{k}.b"),
                rows: 1,
                cols: l.b.cols(),
                data: l.b.data(),
            });
        }
        out
    }

    pub fn named_blocks_mut(&mut self) -> Vec<NamedBlockMut<'_>> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter_mut().enumerate() {
            let DenseLayer { w, b, .. } = l;
            out.push(NamedBlockMut {
                name: format!("l{k}.w"),
                rows: w.rows(),
                cols: w.cols(),
                data: w.data_mut(),
            });
            out.push(NamedBlockMut {
                name: format!("l{k}.b"),
                rows: 1,
                cols: b.cols(),
                data: b.data_mut(),
            });
        }
        out
    }
}

// ---------------------------------------------------------------- LSTM

#[derive(Debug, Clone)]
pub struct LstmModel {
    pub bn: Vec<BatchNorm>,
    pub layers: Vec<LstmLayer>,
    dims: Vec<usize>,
}

pub struct LstmModelCache {
    bn: Vec<BatchNormCache>,
    /// Outer index: layer; inner: sequence.
    lstm: Vec<Vec<LstmCache>>,
    seq_rows: Vec<usize>,
}

impl LstmModel {
    /// 128 → cells → cells → 64, output layer with sigmoid cell activation.
    pub fn new(cells: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::with_dims(&[LSTM_INPUT_DIM, cells, cells, MASK_DIM], rng)
    }

    pub fn with_dims(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParams(format!("bad lstm dims {dims:?}")));
        }
        let n_layers = dims.len() - 1;
        let mut bn = Vec::with_capacity(n_layers);
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let act = if k == n_layers - 1 { Activation::Sigmoid } else { Activation::Tanh };
            bn.push(BatchNorm::new(dims[k]));
            layers.push(LstmLayer::new(dims[k], dims[k + 1], act, rng));
        }
        Ok(Self { bn, layers, dims: dims.to_vec() })
    }

    pub fn zeros_with_dims(dims: &[usize]) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::with_dims(dims, &mut rng)?;
        for l in &mut model.layers {
            for g in 0..4 {
                l.w[g].data_mut().fill(0.0);
                l.u[g].data_mut().fill(0.0);
                l.b[g].data_mut().fill(0.0);
            }
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn arch_string(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        format!("lstm:{}", dims.join("-"))
    }

    fn concat_rows(mats: &[Tensor2]) -> Tensor2 {
        let cols = mats[0].cols();
        let total: usize = mats.iter().map(|m| m.rows()).sum();
        let mut out = Tensor2::zeros(total, cols);
        let mut r = 0;
        for m in mats {
            for t in 0..m.rows() {
                let src: Vec<f64> = m.row(t).to_vec();
                out.row_mut(r).copy_from_slice(&src);
                r += 1;
            }
        }
        out
    }

    fn split_rows(big: &Tensor2, sizes: &[usize]) -> Vec<Tensor2> {
        let mut out = Vec::with_capacity(sizes.len());
        let mut lo = 0;
        for &s in sizes {
            out.push(big.slice_rows(lo, lo + s));
            lo += s;
        }
        out
    }

    /// Training forward over a batch of full-length sequences (each row
    /// valid; padding never enters the trainer). Batch-norm statistics are
    /// taken over the concatenated frames of the whole batch.
    pub fn forward_train(&mut self, batch: &[Tensor2]) -> Result<(Vec<Tensor2>, LstmModelCache)> {
        if batch.is_empty() {
            return Err(Error::ShapeMismatch("empty sequence batch".into()));
        }
        let seq_rows: Vec<usize> = batch.iter().map(|s| s.rows()).collect();
        let mut bn_caches = Vec::with_capacity(self.bn.len());
        let mut lstm_caches: Vec<Vec<LstmCache>> = Vec::with_capacity(self.layers.len());
        let mut seqs: Vec<Tensor2> = batch.to_vec();
        for k in 0..self.layers.len() {
            let (normed, bnc) = self.bn[k].forward_train(&Self::concat_rows(&seqs))?;
            bn_caches.push(bnc);
            let normed_seqs = Self::split_rows(&normed, &seq_rows);
            let mut outs = Vec::with_capacity(seqs.len());
            let mut caches = Vec::with_capacity(seqs.len());
            for s in &normed_seqs {
                let (h, cache) = self.layers[k].forward(s, s.rows())?;
                outs.push(h);
                caches.push(cache);
            }
            lstm_caches.push(caches);
            seqs = outs;
        }
        Ok((seqs, LstmModelCache { bn: bn_caches, lstm: lstm_caches, seq_rows }))
    }

    /// Inference on one sequence with running batch-norm statistics.
    pub fn infer(&self, seq: &Tensor2) -> Result<Tensor2> {
        let mut cur = seq.clone();
        for k in 0..self.layers.len() {
            let normed = self.bn[k].infer(&cur)?;
            let (h, _) = self.layers[k].forward(&normed, normed.rows())?;
            cur = h;
        }
        Ok(cur)
    }

    /// Accumulates gradients from per-sequence dL/d(prediction).
    pub fn backward(&mut self, cache: &LstmModelCache, d_preds: &[Tensor2]) -> Result<()> {
        let mut d_seqs: Vec<Tensor2> = d_preds.to_vec();
        for k in (0..self.layers.len()).rev() {
            let mut d_normed = Vec::with_capacity(d_seqs.len());
            for (s, d) in d_seqs.iter().enumerate() {
                d_normed.push(self.layers[k].backward(&cache.lstm[k][s], d)?);
            }
            let d_big = self.bn[k].backward(&cache.bn[k], &Self::concat_rows(&d_normed))?;
            d_seqs = Self::split_rows(&d_big, &cache.seq_rows);
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for b in &mut self.bn {
            b.zero_grads();
        }
        for l in &mut self.layers {
            l.zero_grads();
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for k in 0..self.layers.len() {
            self.bn[k].visit_params(f);
            self.layers[k].visit_params(f);
        }
    }

    fn layer_prefix(&self, k: usize) -> String {
        if k == self.layers.len() - 1 {
            "out".to_string()
        } else {
            format!("lstm{}", k + 1)
        }
    }

    pub fn named_blocks(&self) -> Vec<NamedBlock<'_>> {
        let mut out = Vec::new();
        for k in 0..self.layers.len() {
            let bn = &self.bn[k];
            let p = format!("bn{}", k + 1);
            for (suffix, v) in [
                ("gamma", &bn.gamma),
                ("beta", &bn.beta),
                ("running_mean", &bn.running_mean),
                ("running_var", &bn.running_var),
            ] {
                out.push(NamedBlock {
                    name: format!("{p}.{suffix}"),
                    rows: 1,
                    cols: v.len(),
                    data: v,
                });
            }
            let l = &self.layers[k];
            let p = self.layer_prefix(k);
            for g in 0..4 {
                for (kind, t) in [("w", &l.w[g]), ("u", &l.u[g]), ("b", &l.b[g])] {
                    out.push(NamedBlock {
                        name: format!("{p}.{kind}_{}", GATE_NAMES[g]),
                        rows: t.rows(),
                        cols: t.cols(),
                        data: t.data(),
                    });
                }
            }
        }
        out
    }

    pub fn named_blocks_mut(&mut self) -> Vec<NamedBlockMut<'_>> {
        let n_layers = self.layers.len();
        let mut out = Vec::new();
        for (k, (bn, l)) in self.bn.iter_mut().zip(self.layers.iter_mut()).enumerate() {
            let p = format!("bn{}", k + 1);
            let BatchNorm { gamma, beta, running_mean, running_var, .. } = bn;
            for (suffix, v) in [
                ("gamma", gamma),
                ("beta", beta),
                ("running_mean", running_mean),
                ("running_var", running_var),
            ] {
                let cols = v.len();
                out.push(NamedBlockMut {
                    name: format!("{p}.{suffix}"),
                    rows: 1,
                    cols,
                    data: v,
                });
            }
            let p = if k == n_layers - 1 { "out".to_string() } else { format!("lstm{}", k + 1) };
            let LstmLayer { w, u, b, .. } = l;
            for (g, ((wg, ug), bg)) in
                w.iter_mut().zip(u.iter_mut()).zip(b.iter_mut()).enumerate()
            {
                for (kind, t) in [("w", wg), ("u", ug), ("b", bg)] {
                    let (rows, cols) = (t.rows(), t.cols());
                    out.push(NamedBlockMut {
                        name: format!("{p}.{kind}_{}", GATE_NAMES[g]),
                        rows,
                        cols,
                        data: t.data_mut(),
                    });
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------- enum

#[derive(Debug, Clone)]
pub enum Model {
    Mlp(MlpModel),
    Lstm(LstmModel),
}

impl Model {
    pub fn arch_string(&self) -> String {
        match self {
            Model::Mlp(m) => m.arch_string(),
            Model::Lstm(m) => m.arch_string(),
        }
    }

    /// Zero-weight shell matching an architecture descriptor like
    /// "mlp:896-128-128-128-64" or "lstm:128-64-64-64".
    pub fn from_arch(arch: &str) -> Result<Model> {
        let (kind, dims_s) = arch
            .split_once(':')
            .ok_or_else(|| Error::CheckpointCorrupt(format!("bad arch '{arch}'")))?;
        let dims: Vec<usize> = dims_s
            .split('-')
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| Error::CheckpointCorrupt(format!("bad arch dims '{arch}'")))
            })
            .collect::<Result<_>>()?;
        match kind {
            "mlp" => Ok(Model::Mlp(MlpModel::zeros_with_dims(&dims)?)),
            "lstm" => Ok(Model::Lstm(LstmModel::zeros_with_dims(&dims)?)),
            other => Err(Error::CheckpointCorrupt(format!("unknown arch kind '{other}'"))),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Mlp(m) => m.input_dim(),
            Model::Lstm(m) => m.input_dim(),
        }
    }

    /// Frame-major mask prediction for one utterance. The MLP expects
    /// context-expanded rows; the LSTM expects base rows.
    pub fn predict(&self, features: &Tensor2) -> Result<Tensor2> {
        match self {
            Model::Mlp(m) => m.infer(features),
            Model::Lstm(m) => m.infer(features),
        }
    }

    pub fn named_blocks(&self) -> Vec<NamedBlock<'_>> {
        match self {
            Model::Mlp(m) => m.named_blocks(),
            Model::Lstm(m) => m.named_blocks(),
        }
    }

    pub fn named_blocks_mut(&mut self) -> Vec<NamedBlockMut<'_>> {
        match self {
            Model::Mlp(m) => m.named_blocks_mut(),
            Model::Lstm(m) => m.named_blocks_mut(),
        }
    }
}
