use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// Fully connected layer, weights row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out.push(acc);
        }
    }
}

/// Multi-layer perceptron: ReLU on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub layers: Vec<Layer>,
}

/// Parameter-shaped gradient (or optimizer moment) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self { layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }
}

impl QNetwork {
    /// He-uniform weights and zero biases; `sizes` = [input, hidden.., output].
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::domain(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                let mut l = Layer::zeros(w[0], w[1]);
                for v in &mut l.weights {
                    *v = rng.random_range(-bound..bound);
                }
                l
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::domain(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_input(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::domain(format!(
                "state has {} features, network expects {}",
                state.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_input(state)?;
        let mut x = state.to_vec();
        let mut y = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.affine(&x, &mut y);
            if i < last {
                for v in &mut y {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut x, &mut y);
        }
        Ok(x)
    }

    /// Activations of every layer, input first.
    fn forward_trace(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(state.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = Vec::with_capacity(l.outputs);
            l.affine(acts.last().unwrap(), &mut y);
            if i < last {
                for v in &mut y {
                    *v = v.max(0.0);
                }
            }
            acts.push(y);
        }
        acts
    }

    /// Mean squared error on the chosen action and its gradient:
    /// `L = (1/B) * sum_i (Q(s_i)[a_i] - y_i)^2`.
    pub fn loss_and_gradients(&self, states: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<(f64, Gradients)> {
        if states.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if states.len() != actions.len() || states.len() != targets.len() {
            return Err(Error::domain("batch arrays differ in length"));
        }
        let n = states.len() as f64;
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for ((s, &a), &y) in states.iter().zip(actions).zip(targets) {
            self.check_input(s)?;
            if a >= self.output_dim() {
                return Err(Error::domain(format!("action {a} outside {} outputs", self.output_dim())));
            }
            let acts = self.forward_trace(s);
            let q = acts[last + 1][a];
            let err = q - y;
            loss += err * err;
            let mut delta = vec![0.0; self.output_dim()];
            delta[a] = 2.0 * err / n;
            for li in (0..=last).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grads.layers[li];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // ReLU derivative from the stored post-activation.
                for (p, x) in prev.iter_mut().zip(input) {
                    if *x <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss / n, grads))
    }

    /// Plain-text checkpoint: a header, the layer sizes, then per layer the
    /// row-major weights and the biases. Floats use shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::from("qnetwork v1\n");
        let sizes: Vec<String> = self.sizes().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "sizes {}", sizes.join(" "));
        for l in &self.layers {
            let w: Vec<String> = l.weights.iter().map(|v| format!("{v:?}")).collect();
            let b: Vec<String> = l.bias.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "w {}", w.join(" "));
            let _ = writeln!(s, "b {}", b.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("qnetwork v1") {
            return Err(bad("missing 'qnetwork v1' header"));
        }
        let sizes: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("sizes "))
            .ok_or_else(|| bad("missing sizes line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad layer size")))
            .collect::<Result<_>>()?;
        let mut net = QNetwork::zeros(&sizes)?;
        let parse_row = |line: Option<&str>, tag: &str, len: usize| -> Result<Vec<f64>> {
            let body = line
                .and_then(|l| l.strip_prefix(tag))
                .ok_or_else(|| bad(&format!("expected '{}' row", tag.trim())))?;
            let v: Vec<f64> = body
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(&format!("bad number {t}"))))
                .collect::<Result<_>>()?;
            if v.len() != len {
                return Err(bad(&format!("row has {} values, expected {len}", v.len())));
            }
            Ok(v)
        };
        for l in &mut net.layers {
            l.weights = parse_row(lines.next(), "w ", l.inputs * l.outputs)?;
            l.bias = parse_row(lines.next(), "b ", l.outputs)?;
        }
        if net.params().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(net)
    }
}
