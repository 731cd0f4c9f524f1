//! From-scratch fully connected network with analytic backpropagation.

use super::{input_width, output_width, PredictionType, Role, Samples};
use crate::num::Real;
use crate::Error;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Hidden layer widths of the standard predictor.
pub const HIDDEN_WIDTHS: [usize; 4] = [64, 128, 128, 64];

/// Fully connected net: tanh on hidden layers, identity output head.
/// Weights are row-major `out x in` per layer.
#[derive(Clone, Debug)]
pub struct Mlp<R> {
    widths: Vec<usize>,
    weights: Vec<Vec<R>>,
    biases: Vec<Vec<R>>,
    variant: PredictionType,
    role: Role,
    scratch: Workspace<R>,
}

/// Reusable forward/backward buffers so hot loops never allocate.
#[derive(Clone, Debug, Default)]
pub struct Workspace<R> {
    activations: Vec<Vec<R>>,
    deltas: Vec<Vec<R>>,
}

impl<R: Real> Workspace<R> {
    pub fn new() -> Self {
        Self {
            activations: Vec::new(),
            deltas: Vec::new(),
        }
    }

    fn prepare(&mut self, widths: &[usize]) {
        let layers = widths.len() - 1;
        self.activations.resize_with(layers, Vec::new);
        self.deltas.resize_with(layers, Vec::new);
        for l in 0..layers {
            self.activations[l].resize(widths[l + 1], R::zero());
            self.deltas[l].resize(widths[l + 1], R::zero());
        }
    }
}

/// Per-parameter gradient accumulator shaped like a net.
#[derive(Clone, Debug)]
pub struct Gradients<R> {
    weights: Vec<Vec<R>>,
    biases: Vec<Vec<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn zeroed(net: &Mlp<R>) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![R::zero(); w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![R::zero(); b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.fill(R::zero());
        }
        for b in &mut self.biases {
            b.fill(R::zero());
        }
    }

    pub fn scale(&mut self, factor: R) {
        for w in &mut self.weights {
            for v in w {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= factor;
            }
        }
    }

    fn param(&self, mut idx: usize) -> R {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if idx < w.len() {
                return w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }
}

impl<R: Real> Mlp<R> {
    /// Builds a net with seeded uniform init scaled by fan-in.
    pub fn new(
        input: usize,
        hidden: &[usize],
        output: usize,
        variant: PredictionType,
        role: Role,
        seed: u64,
    ) -> Self {
        assert!(input > 0 && output > 0, "layer widths must be positive");
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in * fan_out {
                w.push(R::of(rng.random_range(-bound..bound)));
            }
            let mut b = Vec::with_capacity(fan_out);
            for _ in 0..fan_out {
                b.push(R::of(rng.random_range(-bound..bound)));
            }
            weights.push(w);
            biases.push(b);
        }
        Self {
            widths,
            weights,
            biases,
            variant,
            role,
            scratch: Workspace::new(),
        }
    }

    /// The standard predictor shape for `n_rays` beams and `history` frames.
    pub fn standard(
        n_rays: usize,
        history: usize,
        variant: PredictionType,
        role: Role,
        seed: u64,
    ) -> Self {
        Self::new(
            input_width(history, n_rays),
            &HIDDEN_WIDTHS,
            output_width(n_rays),
            variant,
            role,
            seed,
        )
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn variant(&self) -> PredictionType {
        self.variant
    }

    pub fn role(&self) -> &Role {
        &self.role
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn param_mut(&mut self, mut idx: usize) -> &mut R {
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            if idx < w.len() {
                return &mut w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return &mut b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Runs the net, storing activations in `ws`, and returns the output.
    pub fn forward<'w>(&self, input: &[R], ws: &'w mut Workspace<R>) -> &'w [R] {
        assert_eq!(
            input.len(),
            self.widths[0],
            "input width {} does not match the net's {}",
            input.len(),
            self.widths[0]
        );
        ws.prepare(&self.widths);
        let layers = self.weights.len();
        for l in 0..layers {
            let (done, rest) = ws.activations.split_at_mut(l);
            let prev: &[R] = if l == 0 { input } else { &done[l - 1] };
            let act = &mut rest[0];
            let in_w = self.widths[l];
            let last = l == layers - 1;
            let w = &self.weights[l];
            let b = &self.biases[l];
            for o in 0..self.widths[l + 1] {
                let row = &w[o * in_w..(o + 1) * in_w];
                let mut z = b[o];
                for (wv, xv) in row.iter().zip(prev) {
                    z += *wv * *xv;
                }
                act[o] = if last { z } else { z.tanh() };
            }
        }
        ws.activations.last().unwrap()
    }

    /// Allocating convenience wrapper around [`Mlp::forward`].
    pub fn predict(&self, input: &[R]) -> Vec<R> {
        let mut ws = Workspace::new();
        self.forward(input, &mut ws).to_vec()
    }

    /// Mean squared error of one example, averaged over output dimensions.
    pub fn loss(&self, input: &[R], target: &[R], ws: &mut Workspace<R>) -> R {
        let out = self.forward(input, ws);
        assert_eq!(out.len(), target.len(), "target width mismatch");
        let mut sum = R::zero();
        for (&y, &t) in out.iter().zip(target) {
            let e = y - t;
            sum += e * e;
        }
        sum / R::from_usize(target.len()).unwrap()
    }

    /// Forward plus analytic backprop of the per-example MSE; gradients are
    /// accumulated into `grads`. Returns the example loss.
    pub fn backward(
        &self,
        input: &[R],
        target: &[R],
        ws: &mut Workspace<R>,
        grads: &mut Gradients<R>,
    ) -> R {
        self.forward(input, ws);
        let layers = self.weights.len();
        let out_w = self.output_width();
        assert_eq!(target.len(), out_w, "target width mismatch");

        let mut loss = R::zero();
        {
            let out = &ws.activations[layers - 1];
            let d = &mut ws.deltas[layers - 1];
            let scale = R::of(2.0) / R::from_usize(out_w).unwrap();
            for o in 0..out_w {
                let e = out[o] - target[o];
                loss += e * e;
                d[o] = scale * e;
            }
            loss /= R::from_usize(out_w).unwrap();
        }

        for l in (0..layers).rev() {
            let in_w = self.widths[l];
            let out_l = self.widths[l + 1];
            let prev: &[R] = if l == 0 {
                input
            } else {
                &ws.activations[l - 1]
            };
            {
                let d = &ws.deltas[l];
                let gw = &mut grads.weights[l];
                let gb = &mut grads.biases[l];
                for o in 0..out_l {
                    let dv = d[o];
                    gb[o] += dv;
                    let row = &mut gw[o * in_w..(o + 1) * in_w];
                    for (g, xv) in row.iter_mut().zip(prev) {
                        *g += dv * *xv;
                    }
                }
            }
            if l > 0 {
                let (head, tail) = ws.deltas.split_at_mut(l);
                let d = &tail[0];
                let dprev = &mut head[l - 1];
                dprev.fill(R::zero());
                let w = &self.weights[l];
                for o in 0..out_l {
                    let dv = d[o];
                    let row = &w[o * in_w..(o + 1) * in_w];
                    for (dp, wv) in dprev.iter_mut().zip(row) {
                        *dp += *wv * dv;
                    }
                }
                let a = &ws.activations[l - 1];
                for (dp, &av) in dprev.iter_mut().zip(a) {
                    *dp *= R::one() - av * av;
                }
            }
        }
        loss
    }

    /// Writes a text header (shape, activation, variant, role) followed by
    /// the parameters as little-endian f64, row-major, weights then biases
    /// per layer.
    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        writeln!(
            f,
            "predictor-net v1 activation=tanh variant={} role={} widths={}",
            self.variant,
            self.role.tag(),
            widths.join(",")
        )?;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for v in w {
                f.write_all(&v.as_f64().to_le_bytes())?;
            }
            for v in b {
                f.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    /// Inverse of [`Mlp::save`]. The payload length must match the header's
    /// shape exactly.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let bytes = fs::read(path)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "missing header line".into(),
            })?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Parse {
            line: 1,
            message: "header is not UTF-8".into(),
        })?;
        let parse_err = |message: &str| Error::Parse {
            line: 1,
            message: message.into(),
        };

        let mut magic = None;
        let mut version = None;
        let mut activation = None;
        let mut variant = None;
        let mut role = None;
        let mut widths: Option<Vec<usize>> = None;
        for (i, tok) in header.split_whitespace().enumerate() {
            match i {
                0 => magic = Some(tok),
                1 => version = Some(tok),
                _ => {
                    let (key, value) = tok
                        .split_once('=')
                        .ok_or_else(|| parse_err("expected key=value header fields"))?;
                    match key {
                        "activation" => activation = Some(value.to_string()),
                        "variant" => variant = Some(value.parse::<PredictionType>()?),
                        "role" => role = Some(Role::parse(value)?),
                        "widths" => {
                            let parsed: Result<Vec<usize>, _> =
                                value.split(',').map(str::parse).collect();
                            widths = Some(parsed.map_err(|_| parse_err("bad widths list"))?);
                        }
                        _ => return Err(parse_err(&format!("unknown header field '{key}'"))),
                    }
                }
            }
        }
        if magic != Some("predictor-net") || version != Some("v1") {
            return Err(parse_err("not a v1 predictor-net file"));
        }
        if activation.as_deref() != Some("tanh") {
            return Err(parse_err("unsupported activation"));
        }
        let variant = variant.ok_or_else(|| parse_err("missing variant"))?;
        let role = role.ok_or_else(|| parse_err("missing role"))?;
        let widths = widths.ok_or_else(|| parse_err("missing widths"))?;
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(parse_err("widths must list at least input and output"));
        }

        let mut expected = 0usize;
        for l in 0..widths.len() - 1 {
            expected += widths[l] * widths[l + 1] + widths[l + 1];
        }
        let body = &bytes[nl + 1..];
        if body.len() != expected * 8 {
            return Err(Error::ShapeMismatch(format!(
                "weight payload holds {} bytes, header shape needs {}",
                body.len(),
                expected * 8
            )));
        }

        let mut cursor = 0usize;
        let mut next = || {
            let raw: [u8; 8] = body[cursor..cursor + 8].try_into().unwrap();
            cursor += 8;
            R::of(f64::from_le_bytes(raw))
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            weights.push((0..fan_in * fan_out).map(|_| next()).collect());
            biases.push((0..fan_out).map(|_| next()).collect());
        }
        Ok(Self {
            widths,
            weights,
            biases,
            variant,
            role,
            scratch: Workspace::new(),
        })
    }
}

impl<R: Real> super::PredictorModel<R> for Mlp<R> {
    fn variant(&self) -> PredictionType {
        self.variant
    }

    fn input_width(&self) -> usize {
        self.widths[0]
    }

    fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn predict_into(&mut self, input: &[R], out: &mut Vec<R>) {
        let mut ws = std::mem::take(&mut self.scratch);
        let y = self.forward(input, &mut ws);
        out.clear();
        out.extend_from_slice(y);
        self.scratch = ws;
    }
}

/// Gradient step rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions<R> {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: R,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl<R: Real> Default for TrainOptions<R> {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 500,
            learning_rate: R::of(1e-3),
            optimizer: Optimizer::default(),
            seed: 0,
        }
    }
}

/// Mini-batch MSE training with seeded shuffling. Returns the per-epoch
/// mean training loss. Aborts if the loss stops being finite.
pub fn train<R: Real>(
    net: &mut Mlp<R>,
    data: &impl Samples<R>,
    opts: &TrainOptions<R>,
) -> Result<Vec<R>, Error> {
    train_with(net, data, opts, |_, _| {})
}

/// [`train`] with a callback invoked after each completed epoch (1-based),
/// e.g. to track held-out error along the way.
pub fn train_with<R: Real>(
    net: &mut Mlp<R>,
    data: &impl Samples<R>,
    opts: &TrainOptions<R>,
    mut after_epoch: impl FnMut(usize, &Mlp<R>),
) -> Result<Vec<R>, Error> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }
    if data.input_width() != net.input_width() || data.target_width() != net.output_width() {
        return Err(Error::ShapeMismatch(format!(
            "dataset example shape {}->{} does not fit net {}->{}",
            data.input_width(),
            data.target_width(),
            net.input_width(),
            net.output_width()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut ws = Workspace::new();
    let mut grads = Gradients::zeroed(net);
    let mut m = Gradients::zeroed(net);
    let mut v = Gradients::zeroed(net);
    let mut input = Vec::new();
    let mut target = Vec::new();
    let mut step = 0usize;
    let mut curve = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for batch in order.chunks(opts.batch_size.max(1)) {
            grads.zero();
            for &i in batch {
                data.fill(i, &mut input, &mut target);
                total += net.backward(&input, &target, &mut ws, &mut grads).as_f64();
            }
            grads.scale(R::of(1.0 / batch.len() as f64));
            step += 1;
            apply_step(net, &grads, opts, &mut m, &mut v, step);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        curve.push(R::of(mean));
        after_epoch(epoch + 1, net);
    }
    Ok(curve)
}

fn apply_step<R: Real>(
    net: &mut Mlp<R>,
    grads: &Gradients<R>,
    opts: &TrainOptions<R>,
    m: &mut Gradients<R>,
    v: &mut Gradients<R>,
    step: usize,
) {
    let lr = opts.learning_rate;
    match opts.optimizer {
        Optimizer::Sgd => {
            for l in 0..net.weights.len() {
                for (w, &g) in net.weights[l].iter_mut().zip(&grads.weights[l]) {
                    *w -= lr * g;
                }
                for (b, &g) in net.biases[l].iter_mut().zip(&grads.biases[l]) {
                    *b -= lr * g;
                }
            }
        }
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            let b1 = R::of(beta1);
            let b2 = R::of(beta2);
            let eps = R::of(epsilon);
            let c1 = R::of(1.0 - beta1.powi(step as i32));
            let c2 = R::of(1.0 - beta2.powi(step as i32));
            let one = R::one();
            for l in 0..net.weights.len() {
                let update = |p: &mut [R], g: &[R], m: &mut [R], v: &mut [R]| {
                    for i in 0..p.len() {
                        m[i] = b1 * m[i] + (one - b1) * g[i];
                        v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                        let mhat = m[i] / c1;
                        let vhat = v[i] / c2;
                        p[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                };
                update(
                    &mut net.weights[l],
                    &grads.weights[l],
                    &mut m.weights[l],
                    &mut v.weights[l],
                );
                update(
                    &mut net.biases[l],
                    &grads.biases[l],
                    &mut m.biases[l],
                    &mut v.biases[l],
                );
            }
        }
    }
}

/// Compares analytic gradients against central finite differences
/// (step 1e-5) on `n_coords` randomly chosen parameters and returns the
/// worst relative error. Meaningful in f64.
pub fn gradient_check<R: Real>(
    net: &Mlp<R>,
    input: &[R],
    target: &[R],
    n_coords: usize,
    seed: u64,
) -> R {
    let mut ws = Workspace::new();
    let mut grads = Gradients::zeroed(net);
    net.backward(input, target, &mut ws, &mut grads);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = R::of(1e-5);
    let mut probe = net.clone();
    let mut worst = R::zero();
    for _ in 0..n_coords {
        let c = rng.random_range(0..net.param_count());
        let orig = *probe.param_mut(c);
        *probe.param_mut(c) = orig + step;
        let plus = probe.loss(input, target, &mut ws);
        *probe.param_mut(c) = orig - step;
        let minus = probe.loss(input, target, &mut ws);
        *probe.param_mut(c) = orig;
        let numeric = (plus - minus) / (step + step);
        let analytic = grads.param(c);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(R::of(1e-6));
        worst = worst.max(rel);
    }
    worst
}
