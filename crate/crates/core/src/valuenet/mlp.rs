use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetConfig, NetError};
use crate::Scalar;

const LN_EPS: f64 = 1e-5;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// `1 / sqrt(2 pi)`
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GeLU, `x * Phi(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Pointwise Huber loss with transition `delta`.
#[inline]
pub fn huber(d: f64, delta: f64) -> f64 {
    if d.abs() <= delta {
        0.5 * d * d
    } else {
        delta * (d.abs() - 0.5 * delta)
    }
}

#[inline]
pub fn huber_grad(d: f64, delta: f64) -> f64 {
    d.clamp(-delta, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    /// `out x in`
    pub w: Array2<S>,
    pub b: Array1<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<S> {
    pub gamma: Array1<S>,
    pub beta: Array1<S>,
}

/// Linear -> LayerNorm -> GeLU blocks followed by a linear read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    pub config: NetConfig,
    pub hidden: Vec<(Dense<S>, LayerNorm<S>)>,
    pub out: Dense<S>,
}

/// Activations kept from the forward pass for backpropagation.
struct Trace<S> {
    /// Input of each dense layer, hidden layers then the read-out.
    inputs: Vec<Array2<S>>,
    xhat: Vec<Array2<S>>,
    inv_std: Vec<Array1<S>>,
    /// Post-affine, pre-activation values.
    pre: Vec<Array2<S>>,
}

fn dense_init<S: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Dense<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Dense {
        w: Array2::from_shape_fn((fan_out, fan_in), |_| S::c(rng.random_range(-bound..bound))),
        b: Array1::from_shape_fn(fan_out, |_| S::c(rng.random_range(-bound..bound))),
    }
}

impl<S: Scalar> Mlp<S> {
    /// Random initialization (uniform in `+-1/sqrt(fan_in)`), unit
    /// LayerNorm gains.
    pub fn new(config: &NetConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hidden = Vec::new();
        let mut fan_in = config.input;
        for &h in &config.hidden {
            hidden.push((
                dense_init(&mut rng, fan_in, h),
                LayerNorm {
                    gamma: Array1::from_elem(h, S::one()),
                    beta: Array1::zeros(h),
                },
            ));
            fan_in = h;
        }
        let out = dense_init(&mut rng, fan_in, config.output);
        Ok(Self {
            config: config.clone(),
            hidden,
            out,
        })
    }

    /// All parameters set to zero (gains included).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(S::zero());
        }
        z
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter tensors in checkpoint order: for each hidden layer `w`,
    /// `b`, `gamma`, `beta`; then the read-out `w`, `b`. Matrices are
    /// row-major `out x in`.
    pub fn tensors(&self) -> Vec<&[S]> {
        let mut v: Vec<&[S]> = Vec::new();
        for (d, n) in &self.hidden {
            v.push(d.w.as_slice().expect("standard layout"));
            v.push(d.b.as_slice().expect("standard layout"));
            v.push(n.gamma.as_slice().expect("standard layout"));
            v.push(n.beta.as_slice().expect("standard layout"));
        }
        v.push(self.out.w.as_slice().expect("standard layout"));
        v.push(self.out.b.as_slice().expect("standard layout"));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut v: Vec<&mut [S]> = Vec::new();
        for (d, n) in &mut self.hidden {
            v.push(d.w.as_slice_mut().expect("standard layout"));
            v.push(d.b.as_slice_mut().expect("standard layout"));
            v.push(n.gamma.as_slice_mut().expect("standard layout"));
            v.push(n.beta.as_slice_mut().expect("standard layout"));
        }
        v.push(self.out.w.as_slice_mut().expect("standard layout"));
        v.push(self.out.b.as_slice_mut().expect("standard layout"));
        v
    }

    fn check_width(&self, x: &Array2<S>) -> Result<(), NetError> {
        if x.ncols() != self.config.input {
            return Err(NetError::Width {
                expected: self.config.input,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Outputs for a batch of rows.
    pub fn forward(&self, x: &Array2<S>) -> Result<Array2<S>, NetError> {
        self.check_width(x)?;
        Ok(self.forward_traced(x).0)
    }

    fn forward_traced(&self, x: &Array2<S>) -> (Array2<S>, Trace<S>) {
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.hidden.len() + 1),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            pre: Vec::new(),
        };
        let mut a = x.clone();
        for (d, n) in &self.hidden {
            let z = a.dot(&d.w.t()) + &d.b;
            let width = S::c(z.ncols() as f64);
            let mean = z.sum_axis(Axis(1)) / width;
            let centered = &z - &mean.view().insert_axis(Axis(1));
            let var = centered.mapv(|c| c * c).sum_axis(Axis(1)) / width;
            let inv_std = var.mapv(|v| S::one() / (v + S::c(LN_EPS)).sqrt());
            let xhat = centered * &inv_std.view().insert_axis(Axis(1));
            let pre = &xhat * &n.gamma + &n.beta;
            let next = pre.mapv(|v| S::c(gelu(v.as_f64())));
            trace.inputs.push(a);
            trace.xhat.push(xhat);
            trace.inv_std.push(inv_std);
            trace.pre.push(pre);
            a = next;
        }
        let y = a.dot(&self.out.w.t()) + &self.out.b;
        trace.inputs.push(a);
        (y, trace)
    }

    /// Mean pointwise Huber loss and its gradient with respect to every
    /// parameter.
    pub fn loss_and_grad(&self, x: &Array2<S>, target: &Array2<S>) -> Result<(f64, Mlp<S>), NetError> {
        self.check_width(x)?;
        if target.dim() != (x.nrows(), self.config.output) {
            return Err(NetError::Width {
                expected: self.config.output,
                got: target.ncols(),
            });
        }
        let (y, trace) = self.forward_traced(x);
        let delta = self.config.huber_delta;
        let count = (y.len().max(1)) as f64;
        let diff = &y - target;
        let loss = diff.iter().map(|&d| huber(d.as_f64(), delta)).sum::<f64>() / count;
        let dy = diff.mapv(|d| S::c(huber_grad(d.as_f64(), delta) / count));

        let mut grad = self.zeros_like();
        let last = trace.inputs.last().expect("read-out input");
        grad.out.w = dy.t().dot(last);
        grad.out.b = dy.sum_axis(Axis(0));
        let mut da = dy.dot(&self.out.w);
        for i in (0..self.hidden.len()).rev() {
            let (d, n) = &self.hidden[i];
            let pre = &trace.pre[i];
            let xhat = &trace.xhat[i];
            let dpre = &da * &pre.mapv(|v| S::c(gelu_grad(v.as_f64())));
            grad.hidden[i].1.gamma = (&dpre * xhat).sum_axis(Axis(0));
            grad.hidden[i].1.beta = dpre.sum_axis(Axis(0));
            let dxhat = &dpre * &n.gamma;
            let width = S::c(xhat.ncols() as f64);
            let s1 = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
            let s2 = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
            let inv = trace.inv_std[i].view().insert_axis(Axis(1)).to_owned();
            let dz = (&dxhat * width - &s1 - &(xhat * &s2)) * &inv / width;
            grad.hidden[i].0.w = dz.t().dot(&trace.inputs[i]);
            grad.hidden[i].0.b = dz.sum_axis(Axis(0));
            da = dz.dot(&d.w);
        }
        Ok((loss, grad))
    }

    pub fn cast<T: Scalar>(&self) -> Mlp<T> {
        let conv1 = |a: &Array1<S>| a.mapv(|x| T::c(x.as_f64()));
        let conv2 = |a: &Array2<S>| a.mapv(|x| T::c(x.as_f64()));
        Mlp {
            config: self.config.clone(),
            hidden: self
                .hidden
                .iter()
                .map(|(d, n)| {
                    (
                        Dense {
                            w: conv2(&d.w),
                            b: conv1(&d.b),
                        },
                        LayerNorm {
                            gamma: conv1(&n.gamma),
                            beta: conv1(&n.beta),
                        },
                    )
                })
                .collect(),
            out: Dense {
                w: conv2(&self.out.w),
                b: conv1(&self.out.b),
            },
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            tensors: self
                .tensors()
                .iter()
                .map(|t| t.iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NetError> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(NetError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let mut net = Self::new(&ck.config, 0)?;
        let mut slots = net.tensors_mut();
        if slots.len() != ck.tensors.len() {
            return Err(NetError::Checkpoint(format!(
                "expected {} tensors, found {}",
                slots.len(),
                ck.tensors.len()
            )));
        }
        for (i, (dst, src)) in slots.iter_mut().zip(&ck.tensors).enumerate() {
            if dst.len() != src.len() {
                return Err(NetError::Checkpoint(format!(
                    "tensor {i} has {} values, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = S::c(s);
            }
        }
        Ok(net)
    }
}

pub const CHECKPOINT_FORMAT: &str = "rebel-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized weights: config echo plus flat tensors in `Mlp::tensors`
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: NetConfig,
    pub tensors: Vec<Vec<f64>>,
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    m: Mlp<S>,
    v: Mlp<S>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(net: &Mlp<S>) -> Self {
        Self {
            m: net.zeros_like(),
            v: net.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn update(&mut self, net: &mut Mlp<S>, grad: &Mlp<S>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (S::c(self.beta1), S::c(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let step = S::c(lr * c2.sqrt() / c1);
        let eps = S::c(self.eps * c2.sqrt());
        let grads = grad.tensors();
        for (((p, g), m), v) in net
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (S::one() - b1) * g[i];
                v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
                p[i] = p[i] - step * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}

/// One optimizer step on a batch. Returns the loss before the update.
pub fn train_step<S: Scalar>(
    net: &mut Mlp<S>,
    opt: &mut Adam<S>,
    x: &Array2<S>,
    target: &Array2<S>,
    lr: f64,
) -> Result<f64, NetError> {
    let (loss, grad) = net.loss_and_grad(x, target)?;
    if !loss.is_finite() {
        return Err(NetError::NonFiniteLoss { step: opt.step, loss });
    }
    opt.update(net, &grad, lr);
    Ok(loss)
}

/// Largest relative difference between analytic gradients and central
/// finite differences with step `h`, over all parameters. Pairs where both
/// magnitudes fall below `floor` are skipped.
pub fn gradient_check(
    net: &Mlp<f64>,
    x: &Array2<f64>,
    target: &Array2<f64>,
    h: f64,
    floor: f64,
) -> Result<f64, NetError> {
    let (_, grad) = net.loss_and_grad(x, target)?;
    let analytic: Vec<f64> = grad.tensors().concat();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut index = 0;
    let n_tensors = probe.tensors().len();
    for t in 0..n_tensors {
        let len = probe.tensors()[t].len();
        for j in 0..len {
            let orig = probe.tensors()[t][j];
            probe.tensors_mut()[t][j] = orig + h;
            let (up, _) = probe.loss_and_grad(x, target)?;
            probe.tensors_mut()[t][j] = orig - h;
            let (down, _) = probe.loss_and_grad(x, target)?;
            probe.tensors_mut()[t][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[index];
            index += 1;
            let scale = a.abs().max(numeric.abs());
            if scale < floor {
                continue;
            }
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    Ok(worst)
}
