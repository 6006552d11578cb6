//! The five supported non-linearities, their derivatives, region boundaries,
//! and fan-in-scaled initialization standard deviations.
//!
//! Each activation partitions the real line into linear (or, for Tanh,
//! nominal) pieces separated by its `boundaries`; a neuron's region code is
//! the index of the half-open interval `[bᵢ, bᵢ₊₁)` holding its preactivation,
//! so a boundary value belongs to the upper piece. The derivative at a kink
//! follows the same convention and uses the upper piece.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Activation function applied to every hidden layer of an [`super::Mlp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Relu6,
    Tanh,
    HardTanh,
    HardSigmoid,
}

impl Activation {
    /// Every supported activation, in a stable order.
    pub const ALL: [Activation; 5] = [
        Activation::Relu,
        Activation::Relu6,
        Activation::Tanh,
        Activation::HardTanh,
        Activation::HardSigmoid,
    ];

    /// Evaluates the activation at `v`.
    pub fn eval<F: Scalar>(self, v: F) -> F {
        match self {
            Activation::Relu => v.max(F::zero()),
            Activation::Relu6 => v.max(F::zero()).min(F::of(6.0)),
            Activation::Tanh => v.tanh(),
            Activation::HardTanh => v.max(-F::one()).min(F::one()),
            Activation::HardSigmoid => (v + F::of(0.5)).max(F::zero()).min(F::one()),
        }
    }

    /// Derivative at `v`; at a kink this is the derivative of the upper piece,
    /// matching the half-open region convention.
    pub fn derivative<F: Scalar>(self, v: F) -> F {
        let one_if = |active: bool| if active { F::one() } else { F::zero() };
        match self {
            Activation::Relu => one_if(v >= F::zero()),
            Activation::Relu6 => one_if(v >= F::zero() && v < F::of(6.0)),
            Activation::Tanh => {
                let t = v.tanh();
                F::one() - t * t
            }
            Activation::HardTanh => one_if(v >= -F::one() && v < F::one()),
            Activation::HardSigmoid => one_if(v >= F::of(-0.5) && v < F::of(0.5)),
        }
    }

    /// Region boundaries in increasing order; `boundaries().len() + 1` linear
    /// pieces make up the code alphabet. Tanh gets a nominal binary code
    /// split at 0.
    pub fn boundaries(self) -> &'static [f64] {
        match self {
            Activation::Relu | Activation::Tanh => &[0.0],
            Activation::Relu6 => &[0.0, 6.0],
            Activation::HardTanh => &[-1.0, 1.0],
            Activation::HardSigmoid => &[-0.5, 0.5],
        }
    }

    /// Number of distinct codes a neuron with this activation can take.
    pub fn alphabet_size(self) -> usize {
        self.boundaries().len() + 1
    }

    /// Region code of a preactivation: the count of boundaries ≤ `v`, i.e. the
    /// index of the half-open interval `[bᵢ, bᵢ₊₁)` containing it.
    pub fn code<F: Scalar>(self, v: F) -> Result<u8> {
        if !v.is_finite() {
            return Err(Error::NonFinite("non-finite preactivation has no region code".into()));
        }
        let code = self.boundaries().iter().filter(|&&b| F::of(b) <= v).count();
        Ok(code as u8)
    }

    /// True for every activation whose pieces are exactly affine.
    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }

    /// Initialization standard deviation for a layer with the given fan-in:
    /// `multiplier × √(2/fan_in)` for ReLU/ReLU6/HardSigmoid and
    /// `multiplier × √(1/fan_in)` for Tanh/HardTanh.
    pub fn init_std(self, fan_in: usize, multiplier: f64) -> f64 {
        let gain = match self {
            Activation::Relu | Activation::Relu6 | Activation::HardSigmoid => 2.0,
            Activation::Tanh | Activation::HardTanh => 1.0,
        };
        multiplier * (gain / fan_in as f64).sqrt()
    }

    /// Stable tag used in checkpoint files.
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Relu6 => 1,
            Activation::Tanh => 2,
            Activation::HardTanh => 3,
            Activation::HardSigmoid => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.tag() == tag)
            .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {tag}")))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Activation::Relu => "relu",
            Activation::Relu6 => "relu6",
            Activation::Tanh => "tanh",
            Activation::HardTanh => "hard_tanh",
            Activation::HardSigmoid => "hard_sigmoid",
        };
        f.write_str(name)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "relu6" => Ok(Activation::Relu6),
            "tanh" => Ok(Activation::Tanh),
            "hard_tanh" => Ok(Activation::HardTanh),
            "hard_sigmoid" => Ok(Activation::HardSigmoid),
            other => Err(Error::Parameter(format!("unknown activation '{other}'"))),
        }
    }
}
