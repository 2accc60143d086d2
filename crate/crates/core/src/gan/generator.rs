use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{gaussian_matrix, Activation, Dense, Matrix, Mlp, MlpCache, Parameters, Rng};

/// How the noise vector enters the generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Added element-wise to the reduced semantic vector.
    #[default]
    Additive,
    /// Appended to the reduced semantic vector.
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub semantic_dim: usize,
    pub reduce_dim: usize,
    pub noise_dim: usize,
    pub hidden_dim: usize,
    pub visual_dim: usize,
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    pub leaky_slope: f64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("semantic_dim", self.semantic_dim),
            ("reduce_dim", self.reduce_dim),
            ("noise_dim", self.noise_dim),
            ("hidden_dim", self.hidden_dim),
            ("visual_dim", self.visual_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("generator {name} must be at least 1")));
        }
        if self.noise_mode == NoiseMode::Additive && self.noise_dim != self.reduce_dim {
            return Err(Error::Config(format!(
                "additive noise needs noise_dim == reduce_dim, got {} and {}",
                self.noise_dim, self.reduce_dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }

    fn body_input_dim(&self) -> usize {
        match self.noise_mode {
            NoiseMode::Additive => self.reduce_dim,
            NoiseMode::Concat => self.reduce_dim + self.noise_dim,
        }
    }
}

/// Semantic vector plus noise to a visual feature in `(−1, 1)`:
/// linear reduction, noise injection, a leaky-relu layer and a tanh layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    config: GeneratorConfig,
    reduce: Mlp,
    body: Mlp,
}

pub struct GeneratorCache {
    reduce: MlpCache,
    body: MlpCache,
}

impl Generator {
    pub fn new(config: GeneratorConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let reduce = Mlp::glorot(&[config.semantic_dim, config.reduce_dim], &[Activation::Identity], rng)?;
        let body = Mlp::glorot(
            &[config.body_input_dim(), config.hidden_dim, config.visual_dim],
            &[
                Activation::LeakyRelu {
                    slope: config.leaky_slope,
                },
                Activation::Tanh,
            ],
            rng,
        )?;
        Ok(Self { config, reduce, body })
    }

    /// Assembles a generator from explicit layers: `reduce` is the single
    /// linear reduction, `body` the two layers after noise injection.
    pub fn from_layers(config: GeneratorConfig, reduce: Dense, body: [Dense; 2]) -> Result<Self> {
        config.validate()?;
        let reduce = Mlp::new(vec![reduce])?;
        let body = Mlp::new(body.to_vec())?;
        let ok = reduce.input_dim() == config.semantic_dim
            && reduce.output_dim() == config.reduce_dim
            && body.input_dim() == config.body_input_dim()
            && body.layers()[0].out_dim() == config.hidden_dim
            && body.output_dim() == config.visual_dim;
        if !ok {
            return Err(Error::Config("generator layers do not match the configuration".into()));
        }
        Ok(Self { config, reduce, body })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn sample_noise(&self, rows: usize, rng: &mut Rng) -> Matrix {
        gaussian_matrix(rows, self.config.noise_dim, self.config.noise_sigma, rng)
    }

    pub fn forward(&self, semantics: &Matrix, noise: &Matrix) -> Result<(Matrix, GeneratorCache)> {
        if semantics.rows() != noise.rows() {
            return Err(Error::Usage(format!(
                "{} semantic rows but {} noise rows",
                semantics.rows(),
                noise.rows()
            )));
        }
        if semantics.cols() != self.config.semantic_dim || noise.cols() != self.config.noise_dim {
            return Err(Error::Usage(format!(
                "generator expects semantic dim {} and noise dim {}, got {} and {}",
                self.config.semantic_dim,
                self.config.noise_dim,
                semantics.cols(),
                noise.cols()
            )));
        }
        let (reduced, reduce_cache) = self.reduce.forward(semantics)?;
        let hidden = match self.config.noise_mode {
            NoiseMode::Additive => reduced.zip_map(noise, |a, b| a + b),
            NoiseMode::Concat => reduced.hstack(noise)?,
        };
        let (out, body_cache) = self.body.forward(&hidden)?;
        Ok((
            out,
            GeneratorCache {
                reduce: reduce_cache,
                body: body_cache,
            },
        ))
    }

    pub fn generate(&self, semantics: &Matrix, noise: &Matrix) -> Result<Matrix> {
        Ok(self.forward(semantics, noise)?.0)
    }

    /// Parameter gradients for `upstream = dL/d(output)`.
    pub fn backward(&self, cache: &GeneratorCache, upstream: &Matrix) -> Result<Generator> {
        let (body_grad, hidden_grad) = self.body.backward(&cache.body, upstream)?;
        let reduced_grad = match self.config.noise_mode {
            NoiseMode::Additive => hidden_grad,
            NoiseMode::Concat => hidden_grad.columns(0, self.config.reduce_dim),
        };
        let (reduce_grad, _) = self.reduce.backward(&cache.reduce, &reduced_grad)?;
        Ok(Generator {
            config: self.config.clone(),
            reduce: reduce_grad,
            body: body_grad,
        })
    }

    /// `per_class` generated features for each class in `classes`, grouped by
    /// class in the given order. `semantics` is indexed by class id.
    pub fn synthesize(
        &self,
        semantics: &Matrix,
        classes: &[usize],
        per_class: usize,
        rng: &mut Rng,
    ) -> Result<(Matrix, Vec<usize>)> {
        let mut rows = Vec::with_capacity(classes.len() * per_class);
        let mut labels = Vec::with_capacity(classes.len() * per_class);
        for &c in classes {
            if c >= semantics.rows() {
                return Err(Error::Usage(format!("class {c} has no semantic vector")));
            }
            rows.extend(std::iter::repeat_n(c, per_class));
            labels.extend(std::iter::repeat_n(c, per_class));
        }
        let sem = semantics.select_rows(&rows);
        let noise = self.sample_noise(rows.len(), rng);
        Ok((self.generate(&sem, &noise)?, labels))
    }

    pub fn is_finite(&self) -> bool {
        self.reduce.is_finite() && self.body.is_finite()
    }
}

impl Parameters for Generator {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.reduce.param_slices();
        v.extend(self.body.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.reduce.param_slices_mut();
        v.extend(self.body.param_slices_mut());
        v
    }
}
