use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::RngStream;
use crate::tensor::{Element, Init, Tensor};

/// Range of the uniform initializer used for embedding tables.
pub const EMBEDDING_INIT_RANGE: f64 = 0.05;

/// How a parameter tensor is filled at model initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamInit {
    Zeros,
    Ones,
    Uniform {
        range: f64,
    },
    GlorotUniform,
    /// Packed LSTM bias `[4h]`: forget-gate slice set to one, the rest zero.
    ForgetGateBias {
        units: usize,
    },
}

impl ParamInit {
    pub fn sample<T: Element>(&self, shape: &[usize], rng: &mut RngStream) -> Result<Tensor<T>> {
        match *self {
            ParamInit::Zeros => Tensor::init(shape, &Init::Zeros, rng),
            ParamInit::Ones => Tensor::init(shape, &Init::Constant(1.0), rng),
            ParamInit::Uniform { range } => Tensor::init(
                shape,
                &Init::Uniform {
                    low: -range,
                    high: range,
                },
                rng,
            ),
            ParamInit::GlorotUniform => Tensor::init(shape, &Init::GlorotUniform, rng),
            ParamInit::ForgetGateBias { units } => {
                let mut t = Tensor::init(shape, &Init::Zeros, rng)?;
                for v in &mut t.data_mut()[units..2 * units] {
                    *v = T::one();
                }
                Ok(t)
            }
        }
    }
}

/// Declared parameter of a layer: role name, shape, and trainability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub role: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub init: ParamInit,
}

impl ParamSpec {
    pub fn new(role: impl Into<String>, shape: Vec<usize>, init: ParamInit) -> Self {
        ParamSpec {
            role: role.into(),
            shape,
            trainable: true,
            init,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameters of one layer, in a fixed per-kind order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterBundle {
    pub params: Vec<ParamSpec>,
}

impl ParameterBundle {
    pub fn push(&mut self, spec: ParamSpec) {
        self.params.push(spec);
    }

    /// Tally of the declared tensor extents.
    pub fn count(&self) -> ParamCount {
        self.params.iter().fold(ParamCount::default(), |acc, p| {
            acc + ParamCount::of(p.len() as u64, p.trainable)
        })
    }

    pub fn position(&self, role: &str) -> Option<usize> {
        self.params.iter().position(|p| p.role == role)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub total: u64,
    pub trainable: u64,
    pub non_trainable: u64,
}

impl ParamCount {
    pub fn of(n: u64, trainable: bool) -> Self {
        if trainable {
            ParamCount {
                total: n,
                trainable: n,
                non_trainable: 0,
            }
        } else {
            ParamCount {
                total: n,
                trainable: 0,
                non_trainable: n,
            }
        }
    }
}

impl Add for ParamCount {
    type Output = ParamCount;

    fn add(self, rhs: ParamCount) -> ParamCount {
        ParamCount {
            total: self.total + rhs.total,
            trainable: self.trainable + rhs.trainable,
            non_trainable: self.non_trainable + rhs.non_trainable,
        }
    }
}

impl AddAssign for ParamCount {
    fn add_assign(&mut self, rhs: ParamCount) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ParamCount {
    fn sum<I: Iterator<Item = ParamCount>>(iter: I) -> Self {
        iter.fold(ParamCount::default(), Add::add)
    }
}
