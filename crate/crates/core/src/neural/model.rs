use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::features::{EmbeddingStore, IndexSequence, Vocabulary, DEFAULT_MAXLEN, PAD};
use crate::numkit::{argmax, l2_norm, log_sum_exp, sigmoid, sigmoid_bce, softmax_in_place, ParamBlock, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingInit {
    Random,
    /// Rows copied from an [`EmbeddingStore`] where the token is present.
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub maxlen: usize,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub bidirectional: bool,
    pub dense_units: usize,
    pub head: Head,
    pub n_classes: usize,
    pub embedding_init: EmbeddingInit,
}

impl ArchSpec {
    pub fn lstm(n_classes: usize, head: Head) -> Self {
        ArchSpec {
            maxlen: DEFAULT_MAXLEN,
            embed_dim: 300,
            lstm_units: 300,
            bidirectional: false,
            dense_units: 300,
            head,
            n_classes,
            embedding_init: EmbeddingInit::Random,
        }
    }

    pub fn bilstm(n_classes: usize, head: Head) -> Self {
        ArchSpec { lstm_units: 64, bidirectional: true, ..Self::lstm(n_classes, head) }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let dims = [
            ("maxlen", self.maxlen),
            ("embed_dim", self.embed_dim),
            ("lstm_units", self.lstm_units),
            ("dense_units", self.dense_units),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(NeuralError::BadArch(format!("{name} must be positive")));
        }
        if self.n_classes < 2 {
            return Err(NeuralError::BadArch(format!("need at least 2 classes, got {}", self.n_classes)));
        }
        Ok(())
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of the recurrent readout fed to the dense layer.
    pub fn readout_dim(&self) -> usize {
        self.directions() * self.lstm_units
    }
}

/// Training target: a class index, or a 0/1 vector for the sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Class(usize),
    Binary(Vec<f64>),
}

impl From<usize> for Target {
    fn from(c: usize) -> Self {
        Target::Class(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DirLayout {
    wx: Range<usize>,
    wh: Range<usize>,
    b: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    emb: Range<usize>,
    dirs: Vec<DirLayout>,
    dense_w: Range<usize>,
    dense_b: Range<usize>,
    head_w: Range<usize>,
    head_b: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(arch: &ArchSpec, vocab_size: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let (e, h) = (arch.embed_dim, arch.lstm_units);
        let emb = take(vocab_size * e);
        let dirs = (0..arch.directions())
            .map(|_| DirLayout { wx: take(4 * h * e), wh: take(4 * h * h), b: take(4 * h) })
            .collect();
        let dense_w = take(arch.dense_units * arch.readout_dim());
        let dense_b = take(arch.dense_units);
        let head_w = take(arch.n_classes * arch.dense_units);
        let head_b = take(arch.n_classes);
        Layout { emb, dirs, dense_w, dense_b, head_w, head_b, total: at }
    }
}

#[derive(Serialize, Deserialize)]
struct RawClassifier {
    arch: ArchSpec,
    vocab_size: usize,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassifier", into = "RawClassifier")]
pub struct SeqClassifier {
    arch: ArchSpec,
    vocab_size: usize,
    params: Vec<f64>,
    layout: Layout,
}

impl TryFrom<RawClassifier> for SeqClassifier {
    type Error = NeuralError;

    fn try_from(raw: RawClassifier) -> Result<Self, NeuralError> {
        let mut m = SeqClassifier::zeros(raw.arch, raw.vocab_size)?;
        m.set_flat(&raw.params)?;
        Ok(m)
    }
}

impl From<SeqClassifier> for RawClassifier {
    fn from(m: SeqClassifier) -> Self {
        RawClassifier { arch: m.arch, vocab_size: m.vocab_size, params: m.params }
    }
}

struct DirCache {
    tokens: Vec<usize>,
    /// Post-activation gates per step, `4H` each.
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

struct Cache {
    dirs: Vec<DirCache>,
    readout: Vec<f64>,
    dense_pre: Vec<f64>,
    dense_out: Vec<f64>,
    logits: Vec<f64>,
    output: Vec<f64>,
}

#[inline]
fn gemv_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

#[inline]
fn gemv_t_acc(w: &[f64], cols: usize, dy: &[f64], out: &mut [f64]) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += d * a;
        }
    }
}

#[inline]
fn outer_acc(g: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (o, a) in row.iter_mut().zip(x) {
            *o += d * a;
        }
    }
}

impl SeqClassifier {
    /// A model with every parameter set to zero.
    pub fn zeros(arch: ArchSpec, vocab_size: usize) -> Result<Self, NeuralError> {
        arch.validate()?;
        if vocab_size < 2 {
            return Err(NeuralError::BadArch(format!("vocabulary of {vocab_size} rows cannot hold PAD and UNK")));
        }
        let layout = Layout::new(&arch, vocab_size);
        Ok(SeqClassifier { arch, vocab_size, params: vec![0.0; layout.total], layout })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.params.len() {
            return Err(NeuralError::ParamCount { expected: self.params.len(), actual: flat.len() });
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    pub fn param_blocks(&self) -> Vec<ParamBlock> {
        let l = &self.layout;
        let block = |name: &str, r: &Range<usize>| ParamBlock::new(name, r.start, r.len());
        let mut out = vec![block("embedding", &l.emb)];
        for (d, dl) in l.dirs.iter().enumerate() {
            let dir = if d == 0 { "lstm_fwd" } else { "lstm_bwd" };
            out.push(block(&format!("{dir}.w_x"), &dl.wx));
            out.push(block(&format!("{dir}.w_h"), &dl.wh));
            out.push(block(&format!("{dir}.b"), &dl.b));
        }
        out.push(block("dense.w", &l.dense_w));
        out.push(block("dense.b", &l.dense_b));
        out.push(block("head.w", &l.head_w));
        out.push(block("head.b", &l.head_b));
        out
    }

    pub fn embedding_row(&self, id: usize) -> &[f64] {
        let e = self.arch.embed_dim;
        &self.params[self.layout.emb.start + id * e..self.layout.emb.start + (id + 1) * e]
    }

    fn embedding_row_mut(&mut self, id: usize) -> &mut [f64] {
        let e = self.arch.embed_dim;
        let start = self.layout.emb.start + id * e;
        &mut self.params[start..start + e]
    }

    fn check_seq(&self, seq: &IndexSequence) -> Result<(), NeuralError> {
        if seq.len() != self.arch.maxlen {
            return Err(NeuralError::LengthMismatch { expected: self.arch.maxlen, actual: seq.len() });
        }
        if let Some(&index) = seq.as_slice().iter().find(|&&i| i >= self.vocab_size) {
            return Err(NeuralError::IndexOutOfRange { index, vocab: self.vocab_size });
        }
        Ok(())
    }

    fn target_vector(&self, target: &Target) -> Result<Vec<f64>, NeuralError> {
        let k = self.arch.n_classes;
        match (self.arch.head, target) {
            (_, Target::Class(c)) if *c >= k => Err(NeuralError::InvalidTarget(format!("class {c} with {k} classes"))),
            (_, Target::Class(c)) => {
                let mut t = vec![0.0; k];
                t[*c] = 1.0;
                Ok(t)
            }
            (Head::Softmax, Target::Binary(_)) => {
                Err(NeuralError::InvalidTarget("softmax head takes class indices".into()))
            }
            (Head::Sigmoid, Target::Binary(v)) => {
                if v.len() != k {
                    return Err(NeuralError::InvalidTarget(format!("{} target values for {k} classes", v.len())));
                }
                if v.iter().any(|&x| x != 0.0 && x != 1.0) {
                    return Err(NeuralError::InvalidTarget("binary targets must be 0 or 1".into()));
                }
                Ok(v.clone())
            }
        }
    }

    fn run_direction(&self, p: &[f64], dl: &DirLayout, tokens: Vec<usize>) -> DirCache {
        let (e, h) = (self.arch.embed_dim, self.arch.lstm_units);
        let (wx, wh, b) = (&p[dl.wx.clone()], &p[dl.wh.clone()], &p[dl.b.clone()]);
        let emb = &p[self.layout.emb.clone()];
        let n = tokens.len();
        let mut gates = vec![0.0; n * 4 * h];
        let mut cs = vec![0.0; n * h];
        let mut hs = vec![0.0; n * h];
        let zero = vec![0.0; h];
        for (s, &tok) in tokens.iter().enumerate() {
            let x = &emb[tok * e..(tok + 1) * e];
            let z = &mut gates[s * 4 * h..(s + 1) * 4 * h];
            z.copy_from_slice(b);
            gemv_acc(wx, e, x, z);
            let (h_prev, c_prev) = if s == 0 {
                (&zero[..], &zero[..])
            } else {
                (&hs[(s - 1) * h..s * h], &cs[(s - 1) * h..s * h])
            };
            gemv_acc(wh, h, h_prev, z);
            let mut c_new = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for k in 0..h {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[h + k]);
                let g = z[2 * h + k].tanh();
                let o = sigmoid(z[3 * h + k]);
                z[k] = i;
                z[h + k] = f;
                z[2 * h + k] = g;
                z[3 * h + k] = o;
                c_new[k] = f * c_prev[k] + i * g;
                h_new[k] = o * c_new[k].tanh();
            }
            cs[s * h..(s + 1) * h].copy_from_slice(&c_new);
            hs[s * h..(s + 1) * h].copy_from_slice(&h_new);
        }
        DirCache { tokens, gates, c: cs, h: hs }
    }

    fn forward_cache(&self, p: &[f64], seq: &[usize]) -> Result<Cache, NeuralError> {
        let h = self.arch.lstm_units;
        let len = seq.iter().rposition(|&i| i != PAD).map_or(0, |q| q + 1);
        let mut readout = vec![0.0; self.arch.readout_dim()];
        let mut dirs = Vec::with_capacity(self.layout.dirs.len());
        for (d, dl) in self.layout.dirs.iter().enumerate() {
            let tokens: Vec<usize> = if d == 0 {
                seq[..len].to_vec()
            } else {
                seq[..len].iter().rev().copied().collect()
            };
            let cache = self.run_direction(p, dl, tokens);
            if len > 0 {
                readout[d * h..(d + 1) * h].copy_from_slice(&cache.h[(len - 1) * h..len * h]);
            }
            dirs.push(cache);
        }
        let r = readout.len();
        let mut dense_pre = p[self.layout.dense_b.clone()].to_vec();
        gemv_acc(&p[self.layout.dense_w.clone()], r, &readout, &mut dense_pre);
        let dense_out: Vec<f64> = dense_pre.iter().map(|&a| a.max(0.0)).collect();
        let mut logits = p[self.layout.head_b.clone()].to_vec();
        gemv_acc(&p[self.layout.head_w.clone()], self.arch.dense_units, &dense_out, &mut logits);
        let output = match self.arch.head {
            Head::Softmax => {
                let mut q = logits.clone();
                softmax_in_place(&mut q)?;
                q
            }
            Head::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        Ok(Cache { dirs, readout, dense_pre, dense_out, logits, output })
    }

    /// Class probabilities for one sequence.
    pub fn forward(&self, seq: &IndexSequence) -> Result<Vec<f64>, NeuralError> {
        self.check_seq(seq)?;
        Ok(self.forward_cache(&self.params, seq.as_slice())?.output)
    }

    pub fn forward_batch(&self, seqs: &[IndexSequence]) -> Result<Vec<Vec<f64>>, NeuralError> {
        seqs.par_iter().map(|s| self.forward(s)).collect()
    }

    pub fn predict(&self, seq: &IndexSequence) -> Result<usize, NeuralError> {
        Ok(argmax(&self.forward(seq)?))
    }

    /// Returns the example loss and `d loss / d logits`.
    fn example_loss(&self, cache: &Cache, t: &[f64]) -> (f64, Vec<f64>) {
        match self.arch.head {
            Head::Softmax => {
                let c = argmax(t);
                let loss = log_sum_exp(&cache.logits) - cache.logits[c];
                let d = cache.output.iter().zip(t).map(|(p, y)| p - y).collect();
                (loss, d)
            }
            Head::Sigmoid => {
                let k = t.len() as f64;
                let mut loss = 0.0;
                let mut d = Vec::with_capacity(t.len());
                for (&z, &y) in cache.logits.iter().zip(t) {
                    let b = sigmoid_bce(z, y);
                    loss += b.loss;
                    d.push(b.grad / k);
                }
                (loss / k, d)
            }
        }
    }

    fn backward(&self, p: &[f64], cache: &Cache, dlogits: &[f64], scale: f64, g: &mut [f64]) {
        let l = &self.layout;
        let (e, h, du) = (self.arch.embed_dim, self.arch.lstm_units, self.arch.dense_units);
        let r = cache.readout.len();
        let dz: Vec<f64> = dlogits.iter().map(|v| v * scale).collect();

        for (gb, d) in g[l.head_b.clone()].iter_mut().zip(&dz) {
            *gb += d;
        }
        outer_acc(&mut g[l.head_w.clone()], du, &dz, &cache.dense_out);
        let mut d_out = vec![0.0; du];
        gemv_t_acc(&p[l.head_w.clone()], du, &dz, &mut d_out);
        let da: Vec<f64> = d_out.iter().zip(&cache.dense_pre).map(|(d, &a)| if a > 0.0 { *d } else { 0.0 }).collect();
        for (gb, d) in g[l.dense_b.clone()].iter_mut().zip(&da) {
            *gb += d;
        }
        outer_acc(&mut g[l.dense_w.clone()], r, &da, &cache.readout);
        let mut dr = vec![0.0; r];
        gemv_t_acc(&p[l.dense_w.clone()], r, &da, &mut dr);

        for (d, (dl, dc)) in l.dirs.iter().zip(&cache.dirs).enumerate() {
            let n = dc.tokens.len();
            if n == 0 {
                continue;
            }
            let wx = &p[dl.wx.clone()];
            let wh = &p[dl.wh.clone()];
            let mut dh = dr[d * h..(d + 1) * h].to_vec();
            let mut dcell = vec![0.0; h];
            let mut dzg = vec![0.0; 4 * h];
            let mut dx = vec![0.0; e];
            let zero = vec![0.0; h];
            for s in (0..n).rev() {
                let gates = &dc.gates[s * 4 * h..(s + 1) * 4 * h];
                let c = &dc.c[s * h..(s + 1) * h];
                let (h_prev, c_prev) = if s == 0 {
                    (&zero[..], &zero[..])
                } else {
                    (&dc.h[(s - 1) * h..s * h], &dc.c[(s - 1) * h..s * h])
                };
                for k in 0..h {
                    let (i, f, gg, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let tc = c[k].tanh();
                    let d_o = dh[k] * tc;
                    dcell[k] += dh[k] * o * (1.0 - tc * tc);
                    let dct = dcell[k];
                    dzg[k] = dct * gg * i * (1.0 - i);
                    dzg[h + k] = dct * c_prev[k] * f * (1.0 - f);
                    dzg[2 * h + k] = dct * i * (1.0 - gg * gg);
                    dzg[3 * h + k] = d_o * o * (1.0 - o);
                    dcell[k] = dct * f;
                }
                for (gb, v) in g[dl.b.clone()].iter_mut().zip(&dzg) {
                    *gb += v;
                }
                let tok = dc.tokens[s];
                let x = &p[l.emb.start + tok * e..l.emb.start + (tok + 1) * e];
                outer_acc(&mut g[dl.wx.clone()], e, &dzg, x);
                outer_acc(&mut g[dl.wh.clone()], h, &dzg, h_prev);
                if tok != PAD {
                    dx.fill(0.0);
                    gemv_t_acc(wx, e, &dzg, &mut dx);
                    let start = l.emb.start + tok * e;
                    for (ge, v) in g[start..start + e].iter_mut().zip(&dx) {
                        *ge += v;
                    }
                }
                dh.fill(0.0);
                gemv_t_acc(wh, h, &dzg, &mut dh);
            }
        }
    }

    fn check_batch(&self, seqs: &[IndexSequence], targets: &[Target]) -> Result<Vec<Vec<f64>>, NeuralError> {
        if seqs.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        if seqs.len() != targets.len() {
            return Err(NeuralError::InvalidTarget(format!("{} sequences but {} targets", seqs.len(), targets.len())));
        }
        for s in seqs {
            self.check_seq(s)?;
        }
        targets.iter().map(|t| self.target_vector(t)).collect()
    }

    /// Mean loss over a batch evaluated at `params` instead of the model's own.
    pub fn loss_at(&self, params: &[f64], seqs: &[IndexSequence], targets: &[Target]) -> Result<f64, NeuralError> {
        if params.len() != self.params.len() {
            return Err(NeuralError::ParamCount { expected: self.params.len(), actual: params.len() });
        }
        let tv = self.check_batch(seqs, targets)?;
        let mut total = 0.0;
        for (s, t) in seqs.iter().zip(&tv) {
            let cache = self.forward_cache(params, s.as_slice())?;
            total += self.example_loss(&cache, t).0;
        }
        Ok(total / seqs.len() as f64)
    }

    pub fn loss(&self, seqs: &[IndexSequence], targets: &[Target]) -> Result<f64, NeuralError> {
        self.loss_at(&self.params, seqs, targets)
    }

    /// Mean batch loss and its gradient (same layout as [`Self::to_flat`]).
    /// When `clip_norm` is set the gradient is rescaled to at most that
    /// global L2 norm.
    pub fn loss_and_grads(
        &self,
        seqs: &[IndexSequence],
        targets: &[Target],
        clip_norm: Option<f64>,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        let tv = self.check_batch(seqs, targets)?;
        let scale = 1.0 / seqs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for (s, t) in seqs.iter().zip(&tv) {
            let cache = self.forward_cache(&self.params, s.as_slice())?;
            let (loss, dlogits) = self.example_loss(&cache, t);
            total += loss;
            self.backward(&self.params, &cache, &dlogits, scale, &mut grad);
        }
        if let Some(max) = clip_norm {
            let norm = l2_norm(&grad);
            if norm > max {
                let k = max / norm;
                grad.iter_mut().for_each(|v| *v *= k);
            }
        }
        Ok((total * scale, grad))
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

fn glorot(rng: &mut RngState, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.uniform(-limit, limit);
    }
}

/// Seeded initialization.
///
/// Embedding rows are uniform in ±0.05 (PAD stays zero); with
/// [`EmbeddingInit::Store`], rows of tokens found in `store` are copied from
/// it. Weight matrices use Glorot-uniform bounds, biases start at zero except
/// the LSTM forget gate, which starts at one.
pub fn init_model(
    arch: ArchSpec,
    seed: u64,
    store: Option<&EmbeddingStore>,
    vocab: &Vocabulary,
) -> Result<SeqClassifier, NeuralError> {
    let store = match arch.embedding_init {
        EmbeddingInit::Random => None,
        EmbeddingInit::Store => {
            let s = store.ok_or(NeuralError::MissingStore)?;
            if s.dim() != arch.embed_dim {
                return Err(NeuralError::EmbeddingDim { store: s.dim(), arch: arch.embed_dim });
            }
            Some(s)
        }
    };
    let mut m = SeqClassifier::zeros(arch, vocab.sequence_size())?;
    let mut rng = RngState::new(seed);
    let (e, h) = (arch.embed_dim, arch.lstm_units);

    for id in 1..m.vocab_size {
        let row = m.embedding_row_mut(id);
        for v in row.iter_mut() {
            *v = rng.uniform(-0.05, 0.05);
        }
        if let Some(vec) = store.and_then(|s| vocab.sequence_token(id).and_then(|t| s.get(t))) {
            m.embedding_row_mut(id).copy_from_slice(vec);
        }
    }
    let layout = m.layout.clone();
    let p = m.params_mut();
    for dl in &layout.dirs {
        glorot(&mut rng, &mut p[dl.wx.clone()], e, 4 * h);
        glorot(&mut rng, &mut p[dl.wh.clone()], h, 4 * h);
        p[dl.b.start + h..dl.b.start + 2 * h].fill(1.0);
    }
    glorot(&mut rng, &mut p[layout.dense_w.clone()], arch.readout_dim(), arch.dense_units);
    glorot(&mut rng, &mut p[layout.head_w.clone()], arch.dense_units, arch.n_classes);
    Ok(m)
}
