//! Stacked LSTM with an affine action-value head, flat parameters and
//! hand-written backpropagation through time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Gate blocks inside each layer's weight rows, in this order.
pub const GATES: usize = 4;
const F: usize = 0;
const I: usize = 1;
const O: usize = 2;
const G: usize = 3;

/// Network dimensions. A state vector holds `seq_len` observations of
/// `step_inputs` each, newest first, followed by `extra_inputs` scalars
/// that are appended to every step's input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub seq_len: usize,
    pub step_inputs: usize,
    pub extra_inputs: usize,
    pub hidden: usize,
    pub layers: usize,
    pub actions: usize,
}

impl NetShape {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.step_inputs + self.extra_inputs == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config(format!("degenerate network shape {self:?}")));
        }
        if self.actions < 2 {
            return Err(Error::Config("the network needs at least two actions".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.step_inputs + self.extra_inputs
    }

    pub fn state_dim(&self) -> usize {
        self.seq_len * self.step_inputs + self.extra_inputs
    }

    fn layer_inputs(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim()
        } else {
            self.hidden
        }
    }

    fn layer_len(&self, layer: usize) -> usize {
        let h = self.hidden;
        GATES * h * (h + self.layer_inputs(layer)) + GATES * h
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_len(l)).sum()
    }

    fn head_offset(&self) -> usize {
        self.layer_offset(self.layers)
    }

    pub fn param_count(&self) -> usize {
        self.head_offset() + self.actions * self.hidden + self.actions
    }

    /// `(rows, cols)` of every stored matrix in storage order: per layer
    /// the gate weights and the gate biases, then the head weights and
    /// head bias.
    pub fn matrices(&self) -> Vec<(usize, usize)> {
        let h = self.hidden;
        let mut m = Vec::with_capacity(2 * self.layers + 2);
        for l in 0..self.layers {
            m.push((GATES * h, h + self.layer_inputs(l)));
            m.push((GATES * h, 1));
        }
        m.push((self.actions, h));
        m.push((self.actions, 1));
        m
    }
}

/// Borrowed weights of one layer: `w` is `4H x (H + inputs)` row-major
/// acting on `[h_prev, x]`, `b` is `4H`; gate blocks are `[f, i, o, C~]`.
#[derive(Clone, Copy, Debug)]
pub struct LayerParams<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub hidden: usize,
    pub inputs: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gate pre-activations `W [h, x] + b` into `z`.
fn preactivations(p: &LayerParams, h: &[f64], x: &[f64], z: &mut [f64]) {
    let cols = p.hidden + p.inputs;
    for (r, zr) in z.iter_mut().enumerate() {
        let row = &p.w[r * cols..(r + 1) * cols];
        let mut acc = p.b[r];
        for (w, v) in row[..p.hidden].iter().zip(h) {
            acc += w * v;
        }
        for (w, v) in row[p.hidden..].iter().zip(x) {
            acc += w * v;
        }
        *zr = acc;
    }
}

/// One LSTM step: `f, i, o` logistic, `C~` tanh, `C' = f C + i C~`,
/// `h' = o tanh(C')`.
pub fn lstm_cell(x: &[f64], h: &[f64], c: &[f64], p: &LayerParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.hidden;
    if x.len() != p.inputs || h.len() != n || c.len() != n || p.w.len() != GATES * n * (n + p.inputs) || p.b.len() != GATES * n {
        return Err(Error::Shape(format!(
            "lstm cell: x {}, h {}, C {}, W {}, b {} for hidden {n} and {} inputs",
            x.len(),
            h.len(),
            c.len(),
            p.w.len(),
            p.b.len(),
            p.inputs
        )));
    }
    let mut z = vec![0.0; GATES * n];
    preactivations(p, h, x, &mut z);
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for k in 0..n {
        let f = sigmoid(z[F * n + k]);
        let i = sigmoid(z[I * n + k]);
        let o = sigmoid(z[O * n + k]);
        let g = z[G * n + k].tanh();
        c2[k] = f * c[k] + i * g;
        h2[k] = o * c2[k].tanh();
    }
    Ok((h2, c2))
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug, Default)]
struct LayerTrace {
    /// `[h_prev, x]` per step.
    inputs: Vec<Vec<f64>>,
    /// Activated gates `[f, i, o, C~]` per step.
    gates: Vec<Vec<f64>>,
    c_prev: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
}

/// Forward-pass record of one state.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    layers: Vec<LayerTrace>,
    top: Vec<f64>,
}

/// The value network (and, as a second instance, the target network).
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    pub shape: NetShape,
    pub params: Vec<f64>,
}

impl QNetwork {
    pub fn zeros(shape: NetShape) -> Result<Self> {
        shape.validate()?;
        let n = shape.param_count();
        Ok(QNetwork {
            shape,
            params: vec![0.0; n],
        })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, forget-gate bias 1, other
    /// biases 0.
    pub fn init(shape: NetShape, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = net.shape.clone();
        let h = s.hidden;
        for l in 0..s.layers {
            let cols = h + s.layer_inputs(l);
            let off = s.layer_offset(l);
            let bound = 1.0 / (cols as f64).sqrt();
            for w in &mut net.params[off..off + GATES * h * cols] {
                *w = rng.gen_range(-bound..bound);
            }
            let b = off + GATES * h * cols;
            for v in &mut net.params[b + F * h..b + (F + 1) * h] {
                *v = 1.0;
            }
        }
        let off = s.head_offset();
        let bound = 1.0 / (h as f64).sqrt();
        for w in &mut net.params[off..off + s.actions * h] {
            *w = rng.gen_range(-bound..bound);
        }
        Ok(net)
    }

    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters for a network that needs {}",
                params.len(),
                shape.param_count()
            )));
        }
        Ok(QNetwork { shape, params })
    }

    pub fn layer(&self, l: usize) -> LayerParams<'_> {
        let s = &self.shape;
        let h = s.hidden;
        let inputs = s.layer_inputs(l);
        let off = s.layer_offset(l);
        let wl = GATES * h * (h + inputs);
        LayerParams {
            w: &self.params[off..off + wl],
            b: &self.params[off + wl..off + wl + GATES * h],
            hidden: h,
            inputs,
        }
    }

    fn head(&self) -> (&[f64], &[f64]) {
        let s = &self.shape;
        let off = s.head_offset();
        let n = s.actions * s.hidden;
        (&self.params[off..off + n], &self.params[off + n..off + n + s.actions])
    }

    /// Step inputs in time order (oldest first), each with the extras
    /// appended.
    pub fn sequence(&self, state: &[f64]) -> Result<Vec<Vec<f64>>> {
        let s = &self.shape;
        if state.len() != s.state_dim() {
            return Err(Error::Shape(format!("state has {} entries, network expects {}", state.len(), s.state_dim())));
        }
        let extras = &state[s.seq_len * s.step_inputs..];
        Ok((0..s.seq_len)
            .map(|t| {
                let slot = s.seq_len - 1 - t;
                let mut x = state[slot * s.step_inputs..(slot + 1) * s.step_inputs].to_vec();
                x.extend_from_slice(extras);
                x
            })
            .collect())
    }

    fn forward_traced(&self, state: &[f64]) -> Result<(Vec<f64>, Trace)> {
        let s = &self.shape;
        let h = s.hidden;
        let mut xs = self.sequence(state)?;
        let mut trace = Trace::default();
        let mut z = vec![0.0; GATES * h];
        for l in 0..s.layers {
            let p = self.layer(l);
            let mut hs = vec![0.0; h];
            let mut cs = vec![0.0; h];
            let mut lt = LayerTrace::default();
            let mut outs = Vec::with_capacity(xs.len());
            for x in &xs {
                preactivations(&p, &hs, x, &mut z);
                let mut gates = vec![0.0; GATES * h];
                let mut c2 = vec![0.0; h];
                let mut tc = vec![0.0; h];
                let mut h2 = vec![0.0; h];
                for k in 0..h {
                    let f = sigmoid(z[F * h + k]);
                    let i = sigmoid(z[I * h + k]);
                    let o = sigmoid(z[O * h + k]);
                    let g = z[G * h + k].tanh();
                    gates[F * h + k] = f;
                    gates[I * h + k] = i;
                    gates[O * h + k] = o;
                    gates[G * h + k] = g;
                    c2[k] = f * cs[k] + i * g;
                    tc[k] = c2[k].tanh();
                    h2[k] = o * tc[k];
                }
                let mut input = hs.clone();
                input.extend_from_slice(x);
                lt.inputs.push(input);
                lt.gates.push(gates);
                lt.c_prev.push(cs);
                lt.tanh_c.push(tc);
                outs.push(h2.clone());
                hs = h2;
                cs = c2;
            }
            trace.layers.push(lt);
            xs = outs;
        }
        let top = xs.pop().unwrap_or_default();
        let (w, b) = self.head();
        let q = (0..s.actions)
            .map(|a| b[a] + w[a * h..(a + 1) * h].iter().zip(&top).map(|(u, v)| u * v).sum::<f64>())
            .collect();
        trace.top = top;
        Ok((q, trace))
    }

    /// Action values of `state`.
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.forward_traced(state).map(|(q, _)| q)
    }

    /// Adds `d(sum_a dq_a Q_a) / d params` for the traced state to `grad`.
    fn backward(&self, trace: &Trace, dq: &[f64], grad: &mut [f64]) {
        let s = &self.shape;
        let h = s.hidden;
        let off = s.head_offset();
        let (w, _) = self.head();
        let mut dh_top = vec![0.0; h];
        for a in 0..s.actions {
            if dq[a] == 0.0 {
                continue;
            }
            for k in 0..h {
                grad[off + a * h + k] += dq[a] * trace.top[k];
                dh_top[k] += dq[a] * w[a * h + k];
            }
            grad[off + s.actions * h + a] += dq[a];
        }
        // gradient reaching each step's output from the layer above
        let steps = s.seq_len;
        let mut dh_out = vec![vec![0.0; h]; steps];
        dh_out[steps - 1] = dh_top;
        for l in (0..s.layers).rev() {
            let p = self.layer(l);
            let cols = h + p.inputs;
            let lt = &trace.layers[l];
            let wo = s.layer_offset(l);
            let bo = wo + GATES * h * cols;
            let mut dh_rec = vec![0.0; h];
            let mut dc_rec = vec![0.0; h];
            let mut dx_all = vec![vec![0.0; p.inputs]; steps];
            let mut dz = vec![0.0; GATES * h];
            for t in (0..steps).rev() {
                let g = &lt.gates[t];
                let tc = &lt.tanh_c[t];
                let cp = &lt.c_prev[t];
                for k in 0..h {
                    let dh = dh_out[t][k] + dh_rec[k];
                    let (f, i, o, gg) = (g[F * h + k], g[I * h + k], g[O * h + k], g[G * h + k]);
                    let dc = dc_rec[k] + dh * o * (1.0 - tc[k] * tc[k]);
                    dz[F * h + k] = dc * cp[k] * f * (1.0 - f);
                    dz[I * h + k] = dc * gg * i * (1.0 - i);
                    dz[O * h + k] = dh * tc[k] * o * (1.0 - o);
                    dz[G * h + k] = dc * i * (1.0 - gg * gg);
                    dc_rec[k] = dc * f;
                }
                let input = &lt.inputs[t];
                let mut dinput = vec![0.0; cols];
                for (r, dzr) in dz.iter().enumerate() {
                    if *dzr == 0.0 {
                        continue;
                    }
                    let row = &p.w[r * cols..(r + 1) * cols];
                    let grow = &mut grad[wo + r * cols..wo + (r + 1) * cols];
                    for c in 0..cols {
                        grow[c] += dzr * input[c];
                        dinput[c] += dzr * row[c];
                    }
                    grad[bo + r] += dzr;
                }
                dh_rec.copy_from_slice(&dinput[..h]);
                dx_all[t].copy_from_slice(&dinput[h..]);
            }
            dh_out = dx_all;
        }
    }

    /// Gradient of `sum_a dq_a Q_a(state)` with respect to the parameters.
    pub fn gradient(&self, state: &[f64], dq: &[f64]) -> Result<Vec<f64>> {
        let (_, trace) = self.forward_traced(state)?;
        let mut g = vec![0.0; self.params.len()];
        self.backward(&trace, dq, &mut g);
        Ok(g)
    }

    /// Mean squared TD error on the chosen actions and its gradient.
    pub fn loss_and_gradient(&self, states: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = states.len();
        if n == 0 || actions.len() != n || targets.len() != n {
            return Err(Error::Shape(format!(
                "batch of {n} states, {} actions, {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut dq = vec![0.0; self.shape.actions];
        for k in 0..n {
            let a = actions[k];
            if a >= self.shape.actions {
                return Err(Error::ActionOutOfRange {
                    index: a,
                    count: self.shape.actions,
                });
            }
            let (q, trace) = self.forward_traced(states[k])?;
            let err = targets[k] - q[a];
            loss += err * err;
            dq.fill(0.0);
            dq[a] = -2.0 * err / n as f64;
            self.backward(&trace, &dq, &mut grad);
        }
        let loss = loss / n as f64;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged(format!("non-finite loss {loss}")));
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(layers: usize, hidden: usize) -> NetShape {
        NetShape {
            seq_len: 3,
            step_inputs: 2,
            extra_inputs: 1,
            hidden,
            layers,
            actions: 3,
        }
    }

    fn zero_layer(h: usize, inputs: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; GATES * h * (h + inputs)], vec![0.0; GATES * h])
    }

    #[test]
    fn zero_cell_from_rest() {
        let (w, b) = zero_layer(3, 2);
        let p = LayerParams { w: &w, b: &b, hidden: 3, inputs: 2 };
        let (h, c) = lstm_cell(&[0.7, -1.0], &[0.1, 0.2, 0.3], &[0.0; 3], &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn zero_cell_halves_the_memory() {
        let (w, b) = zero_layer(2, 2);
        let p = LayerParams { w: &w, b: &b, hidden: 2, inputs: 2 };
        let c0 = [0.8, -2.0];
        let (h, c) = lstm_cell(&[1.0, 1.0], &[0.0; 2], &c0, &p).unwrap();
        for k in 0..2 {
            assert!((c[k] - 0.5 * c0[k]).abs() < 1e-15);
            assert!((h[k] - 0.5 * (0.5 * c0[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_forget_gate_keeps_the_memory() {
        let (w, mut b) = zero_layer(2, 1);
        b[0] = 20.0;
        b[1] = 20.0;
        let p = LayerParams { w: &w, b: &b, hidden: 2, inputs: 1 };
        let c0 = [0.3, -0.9];
        let (_, c) = lstm_cell(&[0.5], &[0.0; 2], &c0, &p).unwrap();
        for k in 0..2 {
            assert!((c[k] - c0[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn cell_rejects_bad_shapes() {
        let (w, b) = zero_layer(2, 1);
        let p = LayerParams { w: &w, b: &b, hidden: 2, inputs: 1 };
        assert!(matches!(lstm_cell(&[0.5, 0.1], &[0.0; 2], &[0.0; 2], &p), Err(Error::Shape(_))));
    }

    #[test]
    fn forward_agrees_with_stacked_cells() {
        let net = QNetwork::init(shape(2, 4), 5).unwrap();
        let state = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, -1.0];
        let mut xs = net.sequence(&state).unwrap();
        assert_eq!(xs[0], vec![0.5, 0.6, -1.0]);
        assert_eq!(xs[2], vec![0.1, 0.2, -1.0]);
        for l in 0..2 {
            let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
            let mut outs = vec![];
            for x in &xs {
                let r = lstm_cell(x, &h, &c, &net.layer(l)).unwrap();
                h = r.0;
                c = r.1;
                outs.push(h.clone());
            }
            xs = outs;
        }
        let (w, b) = net.head();
        let q = net.q_values(&state).unwrap();
        for a in 0..3 {
            let expect = b[a] + (0..4).map(|k| w[a * 4 + k] * xs[2][k]).sum::<f64>();
            assert!((q[a] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_network_outputs_the_head_bias() {
        let net = QNetwork::zeros(shape(3, 4)).unwrap();
        assert_eq!(net.q_values(&[1.0, -2.0, 3.0, 0.5, 9.0, 1.0, 0.2]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn permuting_head_rows_permutes_values() {
        let net = QNetwork::init(shape(1, 4), 9).unwrap();
        let state = [0.3, -0.1, 0.2, 0.0, 0.5, 0.6, 0.1];
        let q = net.q_values(&state).unwrap();
        let mut p = net.clone();
        let off = net.shape.head_offset();
        let h = 4;
        let perm = [2, 0, 1];
        for (a, src) in perm.iter().enumerate() {
            for k in 0..h {
                p.params[off + a * h + k] = net.params[off + src * h + k];
            }
            p.params[off + 3 * h + a] = net.params[off + 3 * h + src];
        }
        let qp = p.q_values(&state).unwrap();
        for a in 0..3 {
            assert_eq!(qp[a], q[perm[a]]);
        }
    }

    #[test]
    fn parameter_count_matches_manifest() {
        let s = NetShape {
            seq_len: 9,
            step_inputs: 6,
            extra_inputs: 1,
            hidden: 64,
            layers: 3,
            actions: 5,
        };
        let total: usize = s.matrices().iter().map(|(r, c)| r * c).sum();
        assert_eq!(total, s.param_count());
        assert_eq!(s.matrices()[0], (256, 71));
        assert_eq!(s.state_dim(), 55);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = QNetwork::init(shape(2, 3), 1).unwrap();
        let states: Vec<Vec<f64>> = vec![vec![0.3, -0.2, 0.9, 0.1, -0.4, 0.5, 0.25], vec![-0.6, 0.7, 0.2, -0.3, 0.8, 0.05, -0.5]];
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let actions = [2, 0];
        let targets = [0.4, -1.3];
        let (_, g) = net.loss_and_gradient(&refs, &actions, &targets).unwrap();
        let h = 1e-6;
        for k in 0..net.params.len() {
            let mut p = net.clone();
            p.params[k] += h;
            let up = p.loss_and_gradient(&refs, &actions, &targets).unwrap().0;
            p.params[k] -= 2.0 * h;
            let down = p.loss_and_gradient(&refs, &actions, &targets).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            // central differences carry about eps * loss / h = 1e-10 of rounding
            let scale = fd.abs().max(g[k].abs());
            assert!((fd - g[k]).abs() < 1e-5 * scale + 1e-9, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let net = QNetwork::init(shape(1, 3), 2).unwrap();
        let s = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let q = net.q_values(&s).unwrap();
        let (loss, g) = net.loss_and_gradient(&[&s], &[1], &[q[1]]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicated_batch_gives_the_same_loss_and_gradient() {
        let net = QNetwork::init(shape(2, 3), 4).unwrap();
        let a = vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7];
        let b = vec![-0.3, 0.2, 0.1, 0.0, 0.5, -0.6, 0.2];
        let (l1, g1) = net.loss_and_gradient(&[&a, &b], &[0, 2], &[1.0, -1.0]).unwrap();
        let (l2, g2) = net.loss_and_gradient(&[&a, &b, &a, &b], &[0, 2, 0, 2], &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_targets_are_reported() {
        let net = QNetwork::init(shape(1, 3), 2).unwrap();
        let s = vec![0.0; 7];
        assert!(matches!(net.loss_and_gradient(&[&s], &[0], &[f64::NAN]), Err(Error::TrainingDiverged(_))));
    }
}
