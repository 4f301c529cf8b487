use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::Error;

pub const LEAKY_RELU_SLOPE: f64 = 0.2;
pub const ELU_ALPHA: f64 = 1.0;

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    LeakyReLU,
    ELU,
    Sigmoid,
    Tanh,
    None,
}

impl Activation {
    /// The set genes may draw from (everything except `None`).
    pub const EVOLVABLE: [Activation; 5] = [
        Activation::ReLU,
        Activation::LeakyReLU,
        Activation::ELU,
        Activation::Sigmoid,
        Activation::Tanh,
    ];

    pub const ALL: [Activation; 6] = [
        Activation::ReLU,
        Activation::LeakyReLU,
        Activation::ELU,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::None,
    ];

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::LeakyReLU => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::ELU => {
                if z > 0.0 {
                    z
                } else {
                    ELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::None => z,
        }
    }

    /// Derivative at pre-activation `z`, given the already computed output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::ELU => {
                if z > 0.0 {
                    1.0
                } else {
                    a + ELU_ALPHA
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::None => 1.0,
        }
    }

    /// True if the derivative is discontinuous somewhere (at zero).
    pub fn has_kink(self) -> bool {
        matches!(self, Activation::ReLU | Activation::LeakyReLU | Activation::ELU)
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Apply `kind` elementwise.
pub fn apply_activation(kind: Activation, input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = kind.eval(*v);
    }
    out
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::ReLU => "relu",
            Activation::LeakyReLU => "leakyrelu",
            Activation::ELU => "elu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::None => "none",
        };
        f.write_str(s)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::ReLU),
            "leakyrelu" | "leaky_relu" => Ok(Activation::LeakyReLU),
            "elu" => Ok(Activation::ELU),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "none" => Ok(Activation::None),
            other => Err(Error::Usage(format!("unknown activation '{other}'"))),
        }
    }
}
