use super::graph::{Gradients, ParamStore};
use super::tensor::{Scalar, Tensor};

/// Gradient-descent update rule. Adam is the default; plain SGD is
/// available by configuration.
#[derive(Clone, Debug)]
pub enum Optimizer<S> {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: u64,
        m: Vec<Tensor<S>>,
        v: Vec<Tensor<S>>,
    },
}

impl<S: Scalar> Optimizer<S> {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<S>, grads: &Gradients<S>) {
        match self {
            Optimizer::Sgd { lr } => {
                let lr = S::from_f64(*lr);
                for (i, g) in grads.iter().enumerate() {
                    let p = store.get_mut(super::graph::ParamId(i));
                    for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w = *w - lr * d;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                if m.is_empty() {
                    for g in grads.iter() {
                        m.push(Tensor::zeros(g.shape()));
                        v.push(Tensor::zeros(g.shape()));
                    }
                }
                *step += 1;
                let t = *step as f64;
                let b1 = S::from_f64(*beta1);
                let b2 = S::from_f64(*beta2);
                let one = S::one();
                // bias-corrected step size
                let alpha = S::from_f64(*lr * (1.0 - beta2.powf(t)).sqrt() / (1.0 - beta1.powf(t)));
                let eps = S::from_f64(*eps);
                for (i, g) in grads.iter().enumerate() {
                    let mi = &mut m[i];
                    let vi = &mut v[i];
                    let p = store.get_mut(super::graph::ParamId(i));
                    for j in 0..g.data().len() {
                        let gj = g.data()[j];
                        mi.data_mut()[j] = b1 * mi.data()[j] + (one - b1) * gj;
                        vi.data_mut()[j] = b2 * vi.data()[j] + (one - b2) * gj * gj;
                        let w = &mut p.data_mut()[j];
                        *w = *w - alpha * mi.data()[j] / (vi.data()[j].sqrt() + eps);
                    }
                }
            }
        }
    }
}
