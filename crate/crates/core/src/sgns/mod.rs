//! Word2vec-style training over walk corpora: skip-gram and CBOW with
//! negative sampling, plain SGD with linear learning-rate decay.

mod vocab;

use rand::Rng;

pub use vocab::{build_vocab, negative_sampling_distribution, Vocabulary};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::Discrete;
use crate::walk_gen::{context_window, WalkCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    SkipGram,
    Cbow,
}

/// How the effective window is chosen for each center token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Uniform in `1..=window`, redrawn per center token.
    Dynamic,
    Fixed,
}

/// Which weights become the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extraction {
    InputOnly,
    /// Elementwise mean of the input and output matrices.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub window: usize,
    pub window_mode: WindowMode,
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    pub extraction: Extraction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::SkipGram,
            window: 5,
            window_mode: WindowMode::Dynamic,
            dim: 16,
            epochs: 5,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            seed: 0,
            extraction: Extraction::Average,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.window < 1 {
            return fail("window must be >= 1");
        }
        if self.dim < 1 {
            return fail("dim must be >= 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be >= 1");
        }
        if !(self.lr_start > 0.0 && self.lr_start.is_finite()) {
            return fail("initial learning rate must be positive");
        }
        if !(self.lr_end >= 0.0 && self.lr_end <= self.lr_start) {
            return fail("final learning rate must lie in [0, initial]");
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(x)`, stable for large `|x|`.
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients of one negative-sampling term.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `L = -ln σ(u_ctx · v_c) - Σ ln σ(-u_neg · v_c)` and its exact partials
/// with respect to `v_c`, `u_ctx` and each `u_neg`.
pub fn sgns_step_loss_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGrad {
    let dim = center.len();
    assert_eq!(context.len(), dim, "context dimension mismatch");
    let pos = dot(context, center);
    let mut loss = neg_log_sigmoid(pos);
    let g_pos = sigmoid(pos) - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let grad_context = center.iter().map(|v| g_pos * v).collect();
    let grad_negatives = negatives
        .iter()
        .map(|u| {
            assert_eq!(u.len(), dim, "negative dimension mismatch");
            let s = dot(u, center);
            loss += neg_log_sigmoid(-s);
            let g = sigmoid(s);
            for (gc, x) in grad_center.iter_mut().zip(u.iter()) {
                *gc += g * x;
            }
            center.iter().map(|v| g * v).collect()
        })
        .collect();
    SgnsGrad {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negatives,
    }
}

/// Input and output weight matrices, both `vocab.len() x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsModel {
    pub vocab: Vocabulary,
    pub dim: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl SgnsModel {
    /// Input weights uniform in `(-0.5/dim, 0.5/dim)`, output weights zero.
    pub fn init(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[0]);
        let n = vocab.len();
        let half = 0.5 / dim as f64;
        let input = (0..n * dim)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * half)
            .collect();
        Self {
            vocab,
            dim,
            input,
            output: vec![0.0; n * dim],
        }
    }

    pub fn extract(&self, rule: Extraction) -> EmbeddingMatrix {
        let data = match rule {
            Extraction::InputOnly => self.input.clone(),
            Extraction::Average => self
                .input
                .iter()
                .zip(&self.output)
                .map(|(a, b)| (a + b) / 2.0)
                .collect(),
        };
        EmbeddingMatrix::new(self.vocab.tokens().to_vec(), self.dim, data)
            .expect("model weights are finite")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SgnsModel,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub embedding: EmbeddingMatrix,
}

/// Trains and returns the extracted embedding.
pub fn train(corpus: &WalkCorpus, config: &TrainConfig) -> Result<EmbeddingMatrix> {
    train_with_report(corpus, config).map(|o| o.embedding)
}

/// Single-threaded, deterministic training.
pub fn train_with_report(corpus: &WalkCorpus, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let vocab = build_vocab(corpus)?;
    let noise = negative_sampling_distribution(&vocab);
    let walks = vocab.encode(corpus);
    let mut model = SgnsModel::init(vocab, config.dim, config.seed);

    let mut trainer = Trainer {
        dim: config.dim,
        input: &mut model.input,
        output: &mut model.output,
        noise: &noise,
        negatives: config.negatives,
        grad: vec![0.0; config.dim],
        hidden: vec![0.0; config.dim],
    };
    let mut rng = rng::stream(config.seed, &[1]);
    let total = (corpus.token_count() * config.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut ctx_buf = Vec::with_capacity(2 * config.window);

    for _ in 0..config.epochs {
        let (mut loss_sum, mut pairs) = (0.0, 0usize);
        for walk in &walks {
            for pos in 0..walk.len() {
                let lr = config.lr_start
                    - (config.lr_start - config.lr_end) * (processed as f64 / total);
                processed += 1;
                let span = match config.window_mode {
                    WindowMode::Dynamic => rng.random_range(1..=config.window),
                    WindowMode::Fixed => config.window,
                };
                ctx_buf.clear();
                ctx_buf.extend(context_window(walk, pos, span).map(|t| t as usize));
                if ctx_buf.is_empty() {
                    continue;
                }
                let center = walk[pos] as usize;
                match config.architecture {
                    Architecture::SkipGram => {
                        for &ctx in &ctx_buf {
                            loss_sum += trainer.skipgram_pair(center, ctx, lr, &mut rng);
                            pairs += 1;
                        }
                    }
                    Architecture::Cbow => {
                        loss_sum += trainer.cbow_step(&ctx_buf, center, lr, &mut rng);
                        pairs += 1;
                    }
                }
            }
        }
        epoch_losses.push(if pairs == 0 {
            0.0
        } else {
            loss_sum / pairs as f64
        });
    }

    let embedding = model.extract(config.extraction);
    Ok(TrainOutcome {
        model,
        epoch_losses,
        embedding,
    })
}

struct Trainer<'a> {
    dim: usize,
    input: &'a mut [f64],
    output: &'a mut [f64],
    noise: &'a Discrete,
    negatives: usize,
    grad: Vec<f64>,
    hidden: Vec<f64>,
}

impl Trainer<'_> {
    /// One SGD step on the positive target and `negatives` noise draws
    /// against the predictor in `self.hidden`. Accumulates the predictor's
    /// gradient step into `self.grad` and returns the loss.
    fn contrast<R: Rng>(&mut self, positive: usize, lr: f64, rng: &mut R) -> f64 {
        let dim = self.dim;
        self.grad.fill(0.0);
        let mut loss = 0.0;
        for k in 0..=self.negatives {
            let (target, label) = if k == 0 {
                (positive, 1.0)
            } else {
                let t = self.noise.sample(rng);
                if t == positive {
                    continue;
                }
                (t, 0.0)
            };
            let out = &mut self.output[target * dim..(target + 1) * dim];
            let f = dot(&self.hidden, out);
            loss += if label > 0.0 {
                neg_log_sigmoid(f)
            } else {
                neg_log_sigmoid(-f)
            };
            let g = (label - sigmoid(f)) * lr;
            for ((acc, o), h) in self.grad.iter_mut().zip(out.iter_mut()).zip(&self.hidden) {
                *acc += g * *o;
                *o += g * h;
            }
        }
        loss
    }

    fn skipgram_pair<R: Rng>(
        &mut self,
        center: usize,
        context: usize,
        lr: f64,
        rng: &mut R,
    ) -> f64 {
        let dim = self.dim;
        self.hidden
            .copy_from_slice(&self.input[center * dim..(center + 1) * dim]);
        let loss = self.contrast(context, lr, rng);
        for (v, g) in self.input[center * dim..(center + 1) * dim]
            .iter_mut()
            .zip(&self.grad)
        {
            *v += g;
        }
        loss
    }

    fn cbow_step<R: Rng>(&mut self, context: &[usize], center: usize, lr: f64, rng: &mut R) -> f64 {
        let dim = self.dim;
        let inv = 1.0 / context.len() as f64;
        self.hidden.fill(0.0);
        for &c in context {
            for (h, v) in self
                .hidden
                .iter_mut()
                .zip(&self.input[c * dim..(c + 1) * dim])
            {
                *h += v * inv;
            }
        }
        let loss = self.contrast(center, lr, rng);
        // d hidden / d v_c = 1/|context| for every context row.
        for &c in context {
            for (v, g) in self.input[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&self.grad)
            {
                *v += g * inv;
            }
        }
        loss
    }
}
