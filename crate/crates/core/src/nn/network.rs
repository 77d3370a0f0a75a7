//! Batched forward and reverse passes over a planned network.
//!
//! Activations are flat row-major buffers of shape `(batch, features)`, where
//! a conv feature map `[c, h, w]` is stored channel-major.

use super::spec::{LayerPlan, LayerSpec, NetworkSpec};
use super::state::ModelState;
use crate::error::{Error, Result};

/// Row-major `rows x cols` matrix of logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer size");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    /// `inputs[j]` is the input to layer `j`.
    inputs: Vec<Vec<f64>>,
    /// For max-pool layers, the flat input index chosen for each output.
    argmax: Vec<Option<Vec<usize>>>,
    pub logits: Matrix,
}

/// A validated network description, ready to run.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    plans: Vec<LayerPlan>,
    hash: u64,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let plans = spec.plan()?;
        let hash = spec.hash();
        Ok(Self { spec, plans, hash })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn plans(&self) -> &[LayerPlan] {
        &self.plans
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn class_count(&self) -> usize {
        self.spec.class_count
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    fn check_state(&self, state: &ModelState) -> Result<()> {
        if state.spec_hash != self.hash {
            return Err(Error::SpecMismatch {
                expected: self.hash,
                found: state.spec_hash,
            });
        }
        if state.params.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "state holds {} params, network needs {}",
                state.params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn batch_size(&self, inputs: &[f64]) -> Result<usize> {
        let width = self.input_len();
        if !inputs.len().is_multiple_of(width) {
            return Err(Error::Shape {
                layer: 0,
                kind: self.plans[0].layer.kind(),
                detail: format!(
                    "input buffer of {} values is not a multiple of sample size {width}",
                    inputs.len()
                ),
            });
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("in network input at position {pos}"),
            });
        }
        Ok(inputs.len() / width)
    }

    /// Raw logits for a flat batch of inputs. Never applies softmax.
    pub fn forward_logits(&self, state: &ModelState, inputs: &[f64]) -> Result<Matrix> {
        Ok(self.forward(state, inputs)?.logits)
    }

    /// Forward pass that records what the backward pass needs.
    pub fn forward(&self, state: &ModelState, inputs: &[f64]) -> Result<Tape> {
        self.check_state(state)?;
        let batch = self.batch_size(inputs)?;
        let mut recorded = Vec::with_capacity(self.plans.len());
        let mut argmax = Vec::with_capacity(self.plans.len());
        let mut current = inputs.to_vec();
        for (idx, plan) in self.plans.iter().enumerate() {
            let params = &state.params[plan.param_range()];
            let (out, choice) = layer_forward(plan, params, &current, batch);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("in output of layer {idx} ({})", plan.layer.kind()),
                });
            }
            recorded.push(std::mem::replace(&mut current, out));
            argmax.push(choice);
        }
        Ok(Tape {
            batch,
            inputs: recorded,
            argmax,
            logits: Matrix::new(batch, self.class_count(), current),
        })
    }

    /// Gradient of a scalar objective with respect to all parameters, given
    /// the objective's gradient with respect to the taped logits.
    pub fn backward(&self, state: &ModelState, tape: &Tape, dlogits: &Matrix) -> Result<Vec<f64>> {
        self.check_state(state)?;
        if dlogits.rows != tape.batch || dlogits.cols != self.class_count() {
            return Err(Error::InvalidArgument(format!(
                "logit gradient is {}x{}, tape is {}x{}",
                dlogits.rows,
                dlogits.cols,
                tape.batch,
                self.class_count()
            )));
        }
        let mut grad = vec![0.0; self.param_count()];
        let mut upstream = dlogits.data.clone();
        for (idx, plan) in self.plans.iter().enumerate().rev() {
            let range = plan.param_range();
            let params = &state.params[range.clone()];
            upstream = layer_backward(
                plan,
                params,
                &tape.inputs[idx],
                tape.argmax[idx].as_deref(),
                &upstream,
                tape.batch,
                &mut grad[range],
                idx > 0,
            );
        }
        if let Some(pos) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("in gradient at parameter {pos}"),
            });
        }
        Ok(grad)
    }

    /// Smallest distance of the taped forward pass from a non-differentiable
    /// point: the minimum `|x|` over ReLU inputs and the minimum gap between
    /// the two largest entries of every pooling window.
    pub fn kink_distance(&self, tape: &Tape) -> f64 {
        let mut nearest = f64::INFINITY;
        for (idx, plan) in self.plans.iter().enumerate() {
            let input = &tape.inputs[idx];
            match plan.layer {
                LayerSpec::Relu => {
                    for v in input {
                        nearest = nearest.min(v.abs());
                    }
                }
                LayerSpec::MaxPool { kernel } => {
                    let (c, h, w) = chw(&plan.input_shape);
                    let (oh, ow) = (h / kernel, w / kernel);
                    for b in 0..tape.batch {
                        let base = b * c * h * w;
                        for ch in 0..c {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let mut top = [f64::NEG_INFINITY; 2];
                                    for ky in 0..kernel {
                                        for kx in 0..kernel {
                                            let v =
                                                input[base + ch * h * w + (oy * kernel + ky) * w + ox * kernel + kx];
                                            if v > top[0] {
                                                top = [v, top[0]];
                                            } else if v > top[1] {
                                                top[1] = v;
                                            }
                                        }
                                    }
                                    nearest = nearest.min(top[0] - top[1]);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        nearest
    }
}

fn chw(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [c, h, w] => (c, h, w),
        _ => unreachable!("planned conv/pool layers have 3-d shapes"),
    }
}

fn layer_forward(plan: &LayerPlan, params: &[f64], input: &[f64], batch: usize) -> (Vec<f64>, Option<Vec<usize>>) {
    let in_len = plan.input_len();
    let out_len = plan.output_len();
    match plan.layer {
        LayerSpec::Dense { inputs, outputs } => {
            let (weights, bias) = params.split_at(inputs * outputs);
            let mut out = vec![0.0; batch * outputs];
            for b in 0..batch {
                let x = &input[b * inputs..(b + 1) * inputs];
                for (o, y) in out[b * outputs..(b + 1) * outputs].iter_mut().enumerate() {
                    let row = &weights[o * inputs..(o + 1) * inputs];
                    *y = bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                }
            }
            (out, None)
        }
        LayerSpec::Relu => (input.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(), None),
        LayerSpec::Flatten => (input.to_vec(), None),
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
        } => {
            let (_, h, w) = chw(&plan.input_shape);
            let (_, oh, ow) = chw(&plan.output_shape);
            let (weights, bias) = params.split_at(out_channels * in_channels * kernel * kernel);
            let mut out = vec![0.0; batch * out_len];
            for b in 0..batch {
                let x = &input[b * in_len..(b + 1) * in_len];
                let y = &mut out[b * out_len..(b + 1) * out_len];
                for oc in 0..out_channels {
                    let plane = &mut y[oc * oh * ow..(oc + 1) * oh * ow];
                    plane.iter_mut().for_each(|v| *v = bias[oc]);
                    for ic in 0..in_channels {
                        let src = &x[ic * h * w..(ic + 1) * h * w];
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let wv = weights[((oc * in_channels + ic) * kernel + ky) * kernel + kx];
                                for oy in 0..oh {
                                    let srow = &src[(oy + ky) * w + kx..(oy + ky) * w + kx + ow];
                                    let drow = &mut plane[oy * ow..(oy + 1) * ow];
                                    for (d, s) in drow.iter_mut().zip(srow) {
                                        *d += wv * s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            (out, None)
        }
        LayerSpec::MaxPool { kernel } => {
            let (c, h, w) = chw(&plan.input_shape);
            let (_, oh, ow) = chw(&plan.output_shape);
            let mut out = vec![0.0; batch * out_len];
            let mut choice = vec![0usize; batch * out_len];
            for b in 0..batch {
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            // Strict comparison keeps the first maximum in
                            // row-major window order.
                            let mut best_idx = 0;
                            let mut best = f64::NEG_INFINITY;
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let idx = b * in_len + ch * h * w + (oy * kernel + ky) * w + ox * kernel + kx;
                                    if input[idx] > best {
                                        best = input[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            let o = b * out_len + ch * oh * ow + oy * ow + ox;
                            out[o] = best;
                            choice[o] = best_idx;
                        }
                    }
                }
            }
            (out, Some(choice))
        }
    }
}

/// Accumulates parameter gradients into `grad` and returns the gradient with
/// respect to the layer input (empty when `need_input_grad` is false).
#[allow(clippy::too_many_arguments)]
fn layer_backward(
    plan: &LayerPlan,
    params: &[f64],
    input: &[f64],
    argmax: Option<&[usize]>,
    upstream: &[f64],
    batch: usize,
    grad: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    let in_len = plan.input_len();
    let out_len = plan.output_len();
    match plan.layer {
        LayerSpec::Dense { inputs, outputs } => {
            let (weights, _) = params.split_at(inputs * outputs);
            let (gw, gb) = grad.split_at_mut(inputs * outputs);
            let mut dx = if need_input_grad {
                vec![0.0; batch * inputs]
            } else {
                Vec::new()
            };
            for b in 0..batch {
                let x = &input[b * inputs..(b + 1) * inputs];
                let dy = &upstream[b * outputs..(b + 1) * outputs];
                for (o, &g) in dy.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    for (gwv, &v) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                        *gwv += g * v;
                    }
                    if need_input_grad {
                        let row = &weights[o * inputs..(o + 1) * inputs];
                        for (d, &wv) in dx[b * inputs..(b + 1) * inputs].iter_mut().zip(row) {
                            *d += g * wv;
                        }
                    }
                }
            }
            dx
        }
        // Subgradient at zero is zero.
        LayerSpec::Relu => input
            .iter()
            .zip(upstream)
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
        LayerSpec::Flatten => upstream.to_vec(),
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
        } => {
            let (_, h, w) = chw(&plan.input_shape);
            let (_, oh, ow) = chw(&plan.output_shape);
            let wlen = out_channels * in_channels * kernel * kernel;
            let (weights, _) = params.split_at(wlen);
            let (gw, gb) = grad.split_at_mut(wlen);
            let mut dx = if need_input_grad {
                vec![0.0; batch * in_len]
            } else {
                Vec::new()
            };
            for b in 0..batch {
                let x = &input[b * in_len..(b + 1) * in_len];
                let dy = &upstream[b * out_len..(b + 1) * out_len];
                for oc in 0..out_channels {
                    let plane = &dy[oc * oh * ow..(oc + 1) * oh * ow];
                    gb[oc] += plane.iter().sum::<f64>();
                    for ic in 0..in_channels {
                        let src = &x[ic * h * w..(ic + 1) * h * w];
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let widx = ((oc * in_channels + ic) * kernel + ky) * kernel + kx;
                                let mut acc = 0.0;
                                for oy in 0..oh {
                                    let srow = &src[(oy + ky) * w + kx..(oy + ky) * w + kx + ow];
                                    let grow = &plane[oy * ow..(oy + 1) * ow];
                                    acc += srow.iter().zip(grow).map(|(s, g)| s * g).sum::<f64>();
                                }
                                gw[widx] += acc;
                                if need_input_grad {
                                    let wv = weights[widx];
                                    let dst = &mut dx[b * in_len + ic * h * w..b * in_len + (ic + 1) * h * w];
                                    for oy in 0..oh {
                                        let grow = &plane[oy * ow..(oy + 1) * ow];
                                        let drow = &mut dst[(oy + ky) * w + kx..(oy + ky) * w + kx + ow];
                                        for (d, g) in drow.iter_mut().zip(grow) {
                                            *d += wv * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            dx
        }
        LayerSpec::MaxPool { .. } => {
            let choice = argmax.expect("max-pool tape records argmax");
            let mut dx = vec![0.0; batch * in_len];
            for (&src, &g) in choice.iter().zip(upstream) {
                dx[src] += g;
            }
            dx
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net(k: usize) -> (Network, ModelState) {
        let spec = NetworkSpec::mlp(k, &[], k);
        let net = Network::new(spec.clone()).unwrap();
        let mut params = vec![0.0; k * k + k];
        for i in 0..k {
            params[i * k + i] = 1.0;
        }
        (net, ModelState::from_params(&spec, params).unwrap())
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let spec = NetworkSpec::mlp(4, &[6], 3);
        let net = Network::new(spec.clone()).unwrap();
        let logits = net
            .forward_logits(&ModelState::zeros(&spec), &[0.3, -2.0, 5.0, 1.0, 7.0, 7.0, 7.0, 7.0])
            .unwrap();
        assert_eq!(logits.rows, 2);
        assert!(logits.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_dense_layer_passes_input_through() {
        let (net, state) = identity_net(3);
        let logits = net.forward_logits(&state, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(logits.data, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn t_cnn_emits_class_width_logits() {
        let spec = NetworkSpec::t_cnn(3, 32, 32, 10);
        let net = Network::new(spec.clone()).unwrap();
        let state = ModelState::init(&spec, &mut crate::rng::stream(0, "init", &[]));
        let input: Vec<f64> = (0..3 * 32 * 32).map(|i| ((i % 17) as f64) / 17.0).collect();
        let logits = net.forward_logits(&state, &input).unwrap();
        assert_eq!((logits.rows, logits.cols), (1, 10));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (net, state) = identity_net(3);
        assert!(matches!(
            net.forward_logits(&state, &[1.0, 2.0]),
            Err(Error::Shape { layer: 0, .. })
        ));
        assert!(matches!(
            net.forward_logits(&state, &[1.0, f64::NAN, 3.0]),
            Err(Error::NonFinite { .. })
        ));
        let other = ModelState::zeros(&NetworkSpec::mlp(3, &[2], 3));
        assert!(matches!(
            net.forward_logits(&other, &[1.0, 2.0, 3.0]),
            Err(Error::SpecMismatch { .. })
        ));
    }

    #[test]
    fn maxpool_ties_pick_first_index() {
        let spec = NetworkSpec {
            input_shape: vec![1, 2, 2],
            class_count: 2,
            layers: vec![
                LayerSpec::MaxPool { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 1, outputs: 2 },
            ],
        };
        let net = Network::new(spec.clone()).unwrap();
        let state = ModelState::from_params(&spec, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let tape = net.forward(&state, &[0.5, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(tape.argmax[0].as_deref(), Some(&[1usize][..]));
        let grad = net.backward(&state, &tape, &Matrix::new(1, 2, vec![1.0, 0.0])).unwrap();
        assert_eq!(grad, vec![2.0, 0.0, 1.0, 0.0]);
    }
}
