use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{dot, l2_norm, Activation, Dense, Matrix, Parameters, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub visual_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.visual_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::Config(format!(
                "discriminator dims must be at least 1: {self:?}"
            )));
        }
        Ok(())
    }
}

/// A relu trunk feeding a scalar critic head and a class-logit head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    trunk: Dense,
    critic: Dense,
    classifier: Dense,
}

/// Critic scores, class logits and what backward needs.
pub struct DiscriminatorOutput {
    pub critic: Vec<f64>,
    pub logits: Matrix,
    input: Matrix,
    pre: Matrix,
    hidden: Matrix,
}

impl Discriminator {
    pub fn new(config: &DiscriminatorConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            trunk: Dense::glorot(config.visual_dim, config.hidden_dim, Activation::Relu, rng),
            critic: Dense::glorot(config.hidden_dim, 1, Activation::Identity, rng),
            classifier: Dense::glorot(config.hidden_dim, config.num_classes, Activation::Identity, rng),
        })
    }

    pub fn from_layers(trunk: Dense, critic: Dense, classifier: Dense) -> Result<Self> {
        let ok = trunk.activation == Activation::Relu
            && critic.activation == Activation::Identity
            && classifier.activation == Activation::Identity
            && critic.in_dim() == trunk.out_dim()
            && critic.out_dim() == 1
            && classifier.in_dim() == trunk.out_dim();
        if !ok {
            return Err(Error::Config(
                "discriminator needs a relu trunk and identity heads of matching width".into(),
            ));
        }
        Ok(Self {
            trunk,
            critic,
            classifier,
        })
    }

    pub fn config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            visual_dim: self.trunk.in_dim(),
            hidden_dim: self.trunk.out_dim(),
            num_classes: self.classifier.out_dim(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    pub fn forward(&self, x: &Matrix) -> Result<DiscriminatorOutput> {
        if x.cols() != self.trunk.in_dim() {
            return Err(Error::Usage(format!(
                "discriminator expects {} features, got {}",
                self.trunk.in_dim(),
                x.cols()
            )));
        }
        let (pre, hidden) = self.trunk.forward(x);
        let critic = self.critic.forward(&hidden).1.into_vec();
        let logits = self.classifier.forward(&hidden).1;
        Ok(DiscriminatorOutput {
            critic,
            logits,
            input: x.clone(),
            pre,
            hidden,
        })
    }

    /// Parameter gradients and `dL/dx` given `dL/d(critic)` per row and
    /// `dL/d(logits)`.
    pub fn backward(
        &self,
        out: &DiscriminatorOutput,
        d_critic: &[f64],
        d_logits: &Matrix,
    ) -> Result<(Discriminator, Matrix)> {
        let n = out.input.rows();
        if d_critic.len() != n || d_logits.shape() != out.logits.shape() {
            return Err(Error::Usage("upstream gradients do not match the forward batch".into()));
        }
        let dc = Matrix::from_vec(n, 1, d_critic.to_vec())?;
        let critic_pre = out.hidden.matmul_t(&self.critic.weight);
        let (critic_grad, mut hidden_grad) = self.critic.backward(&out.hidden, &critic_pre, &dc);
        let cls_pre = out.logits.clone();
        let (cls_grad, h2) = self.classifier.backward(&out.hidden, &cls_pre, d_logits);
        hidden_grad.add_assign(&h2);
        let (trunk_grad, input_grad) = self.trunk.backward(&out.input, &out.pre, &hidden_grad);
        Ok((
            Discriminator {
                trunk: trunk_grad,
                critic: critic_grad,
                classifier: cls_grad,
            },
            input_grad,
        ))
    }

    /// Row-wise `∇ₓ critic(x)`.
    pub fn critic_input_gradients(&self, x: &Matrix) -> Result<Matrix> {
        let out = self.forward(x)?;
        let ones = vec![1.0; x.rows()];
        let zeros = Matrix::zeros(x.rows(), self.num_classes());
        Ok(self.backward(&out, &ones, &zeros)?.1)
    }

    /// Mean over rows of `(‖∇ₓ critic(x)‖ − 1)²` and its exact parameter
    /// gradient.
    ///
    /// With a relu trunk, `∇ₓ critic = W₁ᵀ (relu′(W₁x + b₁) ⊙ w₂)` where the
    /// relu derivative is locally constant, so the penalty only depends on
    /// `W₁` and `w₂` and its gradient has a closed form.
    pub fn gradient_penalty(&self, x: &Matrix) -> Result<(f64, Discriminator)> {
        if x.rows() == 0 {
            return Err(Error::Usage("gradient penalty over an empty batch".into()));
        }
        let out = self.forward(x)?;
        let w1 = &self.trunk.weight;
        let w2 = self.critic.weight.row(0);
        let hidden = w1.rows();
        let dim = w1.cols();
        let m = x.rows() as f64;

        let mut grad = self.zeros_like();
        let mut value = 0.0;
        let mut u = vec![0.0; hidden];
        let mut g = vec![0.0; dim];
        for r in 0..x.rows() {
            let pre = out.pre.row(r);
            for h in 0..hidden {
                u[h] = Activation::Relu.derivative(pre[h]) * w2[h];
            }
            g.fill(0.0);
            for (h, &uh) in u.iter().enumerate() {
                if uh != 0.0 {
                    for (gd, &w) in g.iter_mut().zip(w1.row(h)) {
                        *gd += uh * w;
                    }
                }
            }
            let norm = l2_norm(&g);
            value += (norm - 1.0).powi(2);
            if norm == 0.0 {
                continue;
            }
            // a = dP/dg for this row
            let coef = 2.0 * (norm - 1.0) / norm / m;
            for gd in g.iter_mut() {
                *gd *= coef;
            }
            let a = &g;
            for h in 0..hidden {
                let mask = Activation::Relu.derivative(pre[h]);
                if u[h] != 0.0 {
                    for (dw, &ad) in grad.trunk.weight.row_mut(h).iter_mut().zip(a) {
                        *dw += u[h] * ad;
                    }
                }
                if mask != 0.0 {
                    grad.critic.weight[(0, h)] += mask * dot(w1.row(h), a);
                }
            }
        }
        Ok((value / m, grad))
    }

    /// Widens the class head to `new_count` classes; existing rows untouched.
    pub fn expand_classes(&mut self, new_count: usize, rng: &mut Rng) -> Result<()> {
        let current = self.num_classes();
        if new_count < current {
            return Err(Error::Usage(format!(
                "cannot shrink the class head from {current} to {new_count}"
            )));
        }
        self.classifier.grow_output(new_count - current, rng);
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense| Dense::zeros(d.in_dim(), d.out_dim(), d.activation);
        Self {
            trunk: z(&self.trunk),
            critic: z(&self.critic),
            classifier: z(&self.classifier),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

impl Parameters for Discriminator {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.trunk.param_slices();
        v.extend(self.critic.param_slices());
        v.extend(self.classifier.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.trunk.param_slices_mut();
        v.extend(self.critic.param_slices_mut());
        v.extend(self.classifier.param_slices_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gaussian_matrix, gradient_check, seeded_rng, FD_STEP};

    fn disc(seed: u64) -> (Discriminator, Rng) {
        let mut rng = seeded_rng(seed);
        let cfg = DiscriminatorConfig {
            visual_dim: 4,
            hidden_dim: 7,
            num_classes: 3,
        };
        (Discriminator::new(&cfg, &mut rng).unwrap(), rng)
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let (d, mut rng) = disc(5);
        let x = gaussian_matrix(3, 4, 1.0, &mut rng);
        let g = d.critic_input_gradients(&x).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                let mut xp = x.clone();
                xp[(r, c)] += FD_STEP;
                let mut xm = x.clone();
                xm[(r, c)] -= FD_STEP;
                let num = (d.forward(&xp).unwrap().critic[r] - d.forward(&xm).unwrap().critic[r]) / (2.0 * FD_STEP);
                assert!((num - g[(r, c)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (d, mut rng) = disc(seed);
            let x = gaussian_matrix(4, 4, 1.0, &mut rng);
            let (_, analytic) = d.gradient_penalty(&x).unwrap();
            let err = gradient_check(&d, &analytic, |p| p.gradient_penalty(&x).unwrap().0, FD_STEP);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn constant_critic_has_unit_penalty() {
        let (mut d, mut rng) = disc(9);
        d.critic.weight = Matrix::zeros(1, 7);
        let x = gaussian_matrix(5, 4, 1.0, &mut rng);
        let (gp, _) = d.gradient_penalty(&x).unwrap();
        assert_eq!(gp, 1.0);
    }

    #[test]
    fn expanding_keeps_old_logits() {
        let (mut d, mut rng) = disc(11);
        let x = gaussian_matrix(3, 4, 1.0, &mut rng);
        let before = d.forward(&x).unwrap().logits;
        d.expand_classes(3, &mut rng).unwrap();
        assert_eq!(d.forward(&x).unwrap().logits, before);
        d.expand_classes(5, &mut rng).unwrap();
        let after = d.forward(&x).unwrap().logits;
        assert_eq!(after.columns(0, 3), before);
        assert!(matches!(d.expand_classes(2, &mut rng), Err(Error::Usage(_))));
    }
}
