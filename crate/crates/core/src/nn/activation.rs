use serde::{Deserialize, Serialize};

/// Default negative-side slope for [`Activation::LeakyRelu`].
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Element-wise activation applied after a dense layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
}

impl Activation {
    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation value.
    ///
    /// Kinks (`x == 0` for the rectifiers) take the left derivative.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    /// True when the derivative is locally constant away from kinks, so the
    /// second derivative vanishes almost everywhere.
    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }

    pub fn has_kink(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu { .. })
    }
}
