//! The trainable head: a hidden fully connected layer producing the
//! clustering feature `h`, and an output layer producing one activation per
//! cluster. Both layers are ReLU-activated and trained with a sum of squared
//! errors against one-hot pseudo-labels.
//!
//! The head remembers the raw gradients of its most recent SGD step so that
//! the pre-step weights can be reconstructed as `W + eta * dW`.

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{matvec_into, DenseMatrix, DenseVector};

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub x: DenseVector,
    pub u_hidden: DenseVector,
    /// Post-ReLU hidden activation; this is the clustering feature.
    pub h: DenseVector,
    pub u_out: DenseVector,
    pub y: DenseVector,
}

/// Loss gradients with the same shapes as the head's weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub fc9: DenseMatrix,
    pub out: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHead {
    w_fc9: DenseMatrix,
    w_out: DenseMatrix,
    eta: f64,
    last_delta: Option<Gradients>,
}

#[inline]
fn relu_prime(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "learning rate must be finite and >= 0, got {eta}"
        )))
    }
}

impl FeatureHead {
    /// `w_fc9` is `hidden x input`, `w_out` is `k x hidden`.
    pub fn new(w_fc9: DenseMatrix, w_out: DenseMatrix, eta: f64) -> Result<Self> {
        check_dim("head hidden width", w_fc9.rows(), w_out.cols())?;
        check_eta(eta)?;
        Ok(Self {
            w_fc9,
            w_out,
            eta,
            last_delta: None,
        })
    }

    /// Rebuilds a head including its gradient history (used by checkpoints).
    pub fn from_parts(
        w_fc9: DenseMatrix,
        w_out: DenseMatrix,
        eta: f64,
        last_delta: Option<Gradients>,
    ) -> Result<Self> {
        let mut head = Self::new(w_fc9, w_out, eta)?;
        if let Some(d) = &last_delta {
            head.check_grad_shapes(d)?;
        }
        head.last_delta = last_delta;
        Ok(head)
    }

    pub fn input_dim(&self) -> usize {
        self.w_fc9.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_fc9.rows()
    }

    pub fn k(&self) -> usize {
        self.w_out.rows()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn w_fc9(&self) -> &DenseMatrix {
        &self.w_fc9
    }

    pub fn w_out(&self) -> &DenseMatrix {
        &self.w_out
    }

    pub fn last_delta(&self) -> Option<&Gradients> {
        self.last_delta.as_ref()
    }

    pub fn forward(&self, x: &DenseVector) -> Result<ForwardTrace> {
        check_dim("head input", self.input_dim(), x.dim())?;
        let mut u_hidden = vec![0.0; self.hidden_dim()];
        matvec_into(&self.w_fc9, x.as_slice(), &mut u_hidden);
        let h: Vec<f64> = u_hidden.iter().map(|&u| u.max(0.0)).collect();
        let mut u_out = vec![0.0; self.k()];
        matvec_into(&self.w_out, &h, &mut u_out);
        let y: Vec<f64> = u_out.iter().map(|&u| u.max(0.0)).collect();
        let trace = ForwardTrace {
            x: x.clone(),
            u_hidden: DenseVector::new(u_hidden)?,
            h: DenseVector::from_vec_unchecked(h),
            u_out: DenseVector::new(u_out)?,
            y: DenseVector::from_vec_unchecked(y),
        };
        Ok(trace)
    }

    /// The clustering feature `h` alone (skips the output layer).
    pub fn features(&self, x: &DenseVector) -> Result<DenseVector> {
        hidden_features(&self.w_fc9, x)
    }

    pub fn backward(&self, trace: &ForwardTrace, target: &DenseVector) -> Result<Gradients> {
        check_dim("trace input", self.input_dim(), trace.x.dim())?;
        check_dim("trace hidden", self.hidden_dim(), trace.h.dim())?;
        check_dim(
            "trace hidden pre-activation",
            self.hidden_dim(),
            trace.u_hidden.dim(),
        )?;
        check_dim("trace output", self.k(), trace.y.dim())?;
        check_dim("trace output pre-activation", self.k(), trace.u_out.dim())?;
        check_one_hot(target, self.k())?;

        // dE/du_out_j = (y_j - t_j) * relu'(u_out_j)
        let delta_out: Vec<f64> = (0..self.k())
            .map(|j| (trace.y[j] - target[j]) * relu_prime(trace.u_out[j]))
            .collect();
        let h = trace.h.as_slice();
        let grad_out =
            DenseMatrix::from_fn(self.k(), self.hidden_dim(), |j, i| delta_out[j] * h[i]);

        // dE/du_hidden_i = sum_j delta_out_j * w_ji * relu'(u_hidden_i)
        let delta_hidden: Vec<f64> = (0..self.hidden_dim())
            .map(|i| {
                let back: f64 = (0..self.k())
                    .map(|j| delta_out[j] * self.w_out.get(j, i))
                    .sum();
                back * relu_prime(trace.u_hidden[i])
            })
            .collect();
        let x = trace.x.as_slice();
        let grad_fc9 = DenseMatrix::from_fn(self.hidden_dim(), self.input_dim(), |i, m| {
            delta_hidden[i] * x[m]
        });

        Ok(Gradients {
            fc9: grad_fc9,
            out: grad_out,
        })
    }

    /// `W <- W - eta * grad` on both layers; the gradients are kept as the
    /// step history consumed by [`FeatureHead::rollback_features`].
    pub fn sgd_step(&mut self, grads: Gradients) -> Result<()> {
        self.check_grad_shapes(&grads)?;
        let eta = self.eta;
        let step = |w: &mut DenseMatrix, g: &DenseMatrix| {
            for (wv, gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wv -= eta * gv;
            }
        };
        step(&mut self.w_fc9, &grads.fc9);
        step(&mut self.w_out, &grads.out);
        if !(self.w_fc9.is_finite() && self.w_out.is_finite()) {
            return Err(Error::NonFinite("head weights after sgd step"));
        }
        self.last_delta = Some(grads);
        Ok(())
    }

    /// Forward + backward + step on a single pseudo-labelled example.
    /// Returns the loss measured before the step.
    pub fn train_example(&mut self, x: &DenseVector, label: usize) -> Result<f64> {
        let target = one_hot(self.k(), label)?;
        let trace = self.forward(x)?;
        let loss = sse_loss(&trace.y, &target)?;
        let grads = self.backward(&trace, &target)?;
        self.sgd_step(grads)?;
        Ok(loss)
    }

    /// The head as it was before the most recent SGD step: `W + eta * dW` on
    /// both layers. The history itself is not carried over.
    pub fn rolled_back(&self) -> Result<FeatureHead> {
        let delta = self.last_delta.as_ref().ok_or(Error::NoHistory)?;
        Ok(FeatureHead {
            w_fc9: self.w_fc9.add_scaled(&delta.fc9, self.eta)?,
            w_out: self.w_out.add_scaled(&delta.out, self.eta)?,
            eta: self.eta,
            last_delta: None,
        })
    }

    /// Hidden feature of `x` under the rolled-back weights; `self` is unchanged.
    pub fn rollback_features(&self, x: &DenseVector) -> Result<DenseVector> {
        self.rolled_back()?.features(x)
    }

    /// Output activations normalized to sum to one, for reporting only.
    /// Falls back to uniform when every output is zero.
    pub fn probabilities(trace: &ForwardTrace) -> Vec<f64> {
        let total: f64 = trace.y.iter().sum();
        let k = trace.y.dim();
        if total > 0.0 {
            trace.y.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / k as f64; k]
        }
    }

    fn check_grad_shapes(&self, g: &Gradients) -> Result<()> {
        check_dim("fc9 gradient rows", self.w_fc9.rows(), g.fc9.rows())?;
        check_dim("fc9 gradient cols", self.w_fc9.cols(), g.fc9.cols())?;
        check_dim("output gradient rows", self.w_out.rows(), g.out.rows())?;
        check_dim("output gradient cols", self.w_out.cols(), g.out.cols())
    }
}

pub(crate) fn hidden_features(w_fc9: &DenseMatrix, x: &DenseVector) -> Result<DenseVector> {
    check_dim("head input", w_fc9.cols(), x.dim())?;
    let mut h = vec![0.0; w_fc9.rows()];
    matvec_into(w_fc9, x.as_slice(), &mut h);
    h.iter_mut().for_each(|v| *v = v.max(0.0));
    DenseVector::new(h)
}

/// Glorot-uniform initialization, `s = sqrt(6 / (fan_in + fan_out))` per layer.
pub fn init_head(
    input_dim: usize,
    hidden_dim: usize,
    k: usize,
    eta: f64,
    rng: &mut SeededRng,
) -> Result<FeatureHead> {
    if input_dim == 0 || hidden_dim == 0 || k == 0 {
        return Err(Error::invalid("head dimensions must be positive"));
    }
    let mut layer = |rows: usize, cols: usize| {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform(-s, s))
    };
    let w_fc9 = layer(hidden_dim, input_dim);
    let w_out = layer(k, hidden_dim);
    FeatureHead::new(w_fc9, w_out, eta)
}

pub fn one_hot(k: usize, label: usize) -> Result<DenseVector> {
    if label >= k {
        return Err(Error::invalid(format!(
            "label {label} out of range for k = {k}"
        )));
    }
    let mut v = DenseVector::zeros(k);
    v.as_mut_slice()[label] = 1.0;
    Ok(v)
}

fn check_one_hot(t: &DenseVector, k: usize) -> Result<()> {
    check_dim("target", k, t.dim())?;
    let ones = t.iter().filter(|&&v| v == 1.0).count();
    let zeros = t.iter().filter(|&&v| v == 0.0).count();
    if ones == 1 && zeros == k - 1 {
        Ok(())
    } else {
        Err(Error::invalid("target is not one-hot"))
    }
}

/// `0.5 * sum_j (y_j - t_j)^2` against a one-hot target.
pub fn sse_loss(y: &DenseVector, t: &DenseVector) -> Result<f64> {
    check_one_hot(t, y.dim())?;
    Ok(0.5
        * y.iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
}
