use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fully connected network with ReLU hidden layers and a linear output, plus the input
/// normalization fitted on its training set.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    pub sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input_mean: Array1<f64>,
    pub input_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { hidden: vec![128, 64], learning_rate: 0.01, momentum: 0.9, epochs: 30, batch_size: 64, seed: 0 }
    }
}

/// Gradients in the layout of the policy's parameters.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpPolicy {
    /// He-uniform weights, zero biases, identity normalization.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound)));
            biases.push(Array1::zeros(w[1]));
        }
        MlpPolicy { sizes: sizes.to_vec(), weights, biases, input_mean: Array1::zeros(sizes[0]), input_scale: 1.0 }
    }

    /// A policy whose output is always zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        let mut p = Self::new(sizes, 0);
        p.weights.iter_mut().for_each(|w| w.fill(0.0));
        p
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn normalize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.input_mean) * self.input_scale
    }

    /// Activations of every layer, input first.
    fn forward_all(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![self.normalize(x)];
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[i].dot(w) + b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Batched forward pass; one row per sample.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_all(x).pop().expect("at least one layer")
    }

    pub fn act(&self, features: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, features.len()), features).expect("one row");
        self.forward(x).row(0).to_vec()
    }

    /// Mean squared error over samples and outputs, and its gradient.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Gradients) {
        let acts = self.forward_all(x);
        let out = acts.last().expect("output layer");
        let diff = out - &y;
        let n = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
        let mut delta = diff * (2.0 / n);
        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for i in (0..layers).rev() {
            gw[i] = acts[i].t().dot(&delta);
            gb[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.weights[i].t());
                back.zip_mut_with(&acts[i], |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, Gradients { weights: gw, biases: gb })
    }

    pub fn loss(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let diff = self.forward(x) - &y;
        diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64
    }

    /// All parameters, weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend(w.iter());
            p.extend(b.iter());
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = it.next().expect("enough parameters"));
        }
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut g = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            g.extend(w.iter());
            g.extend(b.iter());
        }
        g
    }
}

/// Fits a policy to `(x, y)` by mini-batch SGD with momentum. Returns the policy and the loss
/// on the whole training set after the last epoch.
pub fn train_bc(x: &Array2<f64>, y: &Array2<f64>, cfg: &TrainConfig) -> (MlpPolicy, f64) {
    assert_eq!(x.nrows(), y.nrows(), "one target row per input row");
    let mut sizes = vec![x.ncols()];
    sizes.extend(&cfg.hidden);
    sizes.push(y.ncols());
    let mut policy = MlpPolicy::new(&sizes, cfg.seed);
    if x.nrows() == 0 {
        return (policy, 0.0);
    }
    policy.input_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let var = x.iter().zip(policy.input_mean.iter().cycle()).map(|(v, m)| (v - m) * (v - m)).sum::<f64>() / x.len() as f64;
    policy.input_scale = 1.0 / var.sqrt().max(1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut vel_w: Vec<Array2<f64>> = policy.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
    let mut vel_b: Vec<Array1<f64>> = policy.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
    let batch = cfg.batch_size.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (_, g) = policy.loss_and_gradients(xb.view(), yb.view());
            for i in 0..policy.weights.len() {
                vel_w[i] = &vel_w[i] * cfg.momentum - &g.weights[i] * cfg.learning_rate;
                vel_b[i] = &vel_b[i] * cfg.momentum - &g.biases[i] * cfg.learning_rate;
                policy.weights[i] += &vel_w[i];
                policy.biases[i] += &vel_b[i];
            }
        }
    }
    let loss = policy.loss(x.view(), y.view());
    (policy, loss)
}

/// Row-major `(rows, cols)` view helper for tests and callers holding flat buffers.
pub fn rows(data: &[f64], cols: usize) -> Array2<f64> {
    Array2::from_shape_vec((data.len() / cols, cols), data.to_vec()).expect("whole rows")
}

