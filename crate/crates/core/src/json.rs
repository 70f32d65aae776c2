//! JSON interchange formats for operators, channels, states and ensembles.
//!
//! Matrices are row-major `re`/`im` arrays of arrays. Every document may carry
//! an optional `"schema"` string; only major version 1 is accepted.

use serde::{Deserialize, Serialize};

use crate::channel::{ChoiPositivity, QuantumChannel};
use crate::coding::MessageEnsemble;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};
use crate::operator::{Operator, PureState};
use crate::types::Ensemble;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA: &str = "1.0";

/// `{"dims": [...], "re": [[...]], "im": [[...]]}`; `im` may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl OperatorJson {
    pub fn from_matrix(m: &CMatrix, dims: Option<Vec<usize>>) -> Self {
        let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
        Self { schema: None, dims, re, im: Some(im) }
    }

    pub fn from_operator(op: &Operator) -> Self {
        Self::from_matrix(op.mat(), Some(op.dims().to_vec()))
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || self.re.iter().any(|r| r.len() != cols) {
            return Err(Error::Format("matrix rows must be nonempty and of equal length".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(Error::Format("`im` does not match the shape of `re`".into()));
            }
        }
        let values = self.re.iter().chain(self.im.iter().flatten()).flatten();
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("matrix entries must be finite".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            c(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }

    pub fn to_operator(&self) -> Result<Operator> {
        check_schema(self.schema.as_deref())?;
        let m = self.to_matrix()?;
        if m.nrows() != m.ncols() {
            return Err(Error::Format(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let dims = self.dims.clone().unwrap_or_else(|| vec![m.nrows()]);
        Operator::new(dims, m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelPayload {
    Cq {
        outputs: Vec<OperatorJson>,
    },
    Kraus {
        kraus: Vec<OperatorJson>,
        #[serde(default)]
        out_dims: Option<Vec<usize>>,
    },
    Choi {
        choi: OperatorJson,
        #[serde(default)]
        out_dims: Option<Vec<usize>>,
    },
}

/// `{"type": "cq"|"kraus"|"choi", "in_dim": n, "out_dim": m, ...}`. With
/// `"complementary": true` the described channel is replaced by its
/// complementary channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub in_dim: usize,
    pub out_dim: usize,
    #[serde(default)]
    pub complementary: bool,
    #[serde(flatten)]
    pub payload: ChannelPayload,
}

impl ChannelJson {
    pub fn to_channel(&self) -> Result<QuantumChannel> {
        check_schema(self.schema.as_deref())?;
        let base = match &self.payload {
            ChannelPayload::Cq { outputs } => {
                let ops = outputs.iter().map(OperatorJson::to_operator).collect::<Result<Vec<_>>>()?;
                QuantumChannel::cq(ops)?
            }
            ChannelPayload::Kraus { kraus, out_dims } => {
                let ks = kraus.iter().map(OperatorJson::to_matrix).collect::<Result<Vec<_>>>()?;
                QuantumChannel::from_kraus(ks, self.in_dim, out_dims.clone().unwrap_or_else(|| vec![self.out_dim]))?
            }
            ChannelPayload::Choi { choi, out_dims } => {
                let omega = choi.to_operator()?.flattened();
                let dims = out_dims.clone().unwrap_or_else(|| vec![self.out_dim]);
                QuantumChannel::from_choi(&omega, self.in_dim, dims, ChoiPositivity::Psd)?
            }
        };
        if base.in_dim() != self.in_dim || base.out_dim() != self.out_dim {
            return Err(Error::Format(format!(
                "declared {}->{} but payload describes {}->{}",
                self.in_dim,
                self.out_dim,
                base.in_dim(),
                base.out_dim()
            )));
        }
        if self.complementary {
            base.complementary()
        } else {
            Ok(base)
        }
    }

    pub fn cq(outputs: &[Operator]) -> Self {
        Self {
            schema: Some(SCHEMA.into()),
            in_dim: outputs.len(),
            out_dim: outputs.first().map_or(0, Operator::dim),
            complementary: false,
            payload: ChannelPayload::Cq { outputs: outputs.iter().map(OperatorJson::from_operator).collect() },
        }
    }
}

/// Either Schmidt weights of a Schmidt-aligned state on `A ⊗ R`, or an
/// explicit ket with `dims = [d_A, d_R]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateJson {
    Schmidt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schema: Option<String>,
        schmidt_weights: Vec<f64>,
    },
    Ket {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schema: Option<String>,
        dims: Vec<usize>,
        re: Vec<f64>,
        #[serde(default)]
        im: Option<Vec<f64>>,
    },
}

impl StateJson {
    pub fn to_state(&self) -> Result<PureState> {
        match self {
            Self::Schmidt { schema, schmidt_weights } => {
                check_schema(schema.as_deref())?;
                PureState::schmidt_aligned(schmidt_weights.len(), schmidt_weights)
            }
            Self::Ket { schema, dims, re, im } => {
                check_schema(schema.as_deref())?;
                if im.as_ref().is_some_and(|im| im.len() != re.len()) {
                    return Err(Error::Format("`im` does not match the length of `re`".into()));
                }
                let amps = CVector::from_fn(re.len(), |i, _| c(re[i], im.as_ref().map_or(0.0, |im| im[i])));
                let s = PureState::new(dims.clone(), amps)?;
                if (s.norm_sq() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidState(format!("ket has squared norm {}", s.norm_sq())));
                }
                Ok(s)
            }
        }
    }
}

/// `{"probs": [...], "outputs": [operator, ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub probs: Vec<f64>,
    pub outputs: Vec<OperatorJson>,
}

impl EnsembleJson {
    pub fn to_ensemble(&self) -> Result<Ensemble> {
        check_schema(self.schema.as_deref())?;
        let outs = self.outputs.iter().map(OperatorJson::to_operator).collect::<Result<Vec<_>>>()?;
        Ensemble::new(self.probs.clone(), outs)
    }
}

/// `{"weights": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub weights: Vec<f64>,
}

impl DistributionJson {
    pub fn to_messages(&self) -> Result<MessageEnsemble> {
        check_schema(self.schema.as_deref())?;
        MessageEnsemble::new(self.weights.clone())
    }
}

/// Accept a missing schema or any `1.x`.
pub fn check_schema(schema: Option<&str>) -> Result<()> {
    let Some(s) = schema else { return Ok(()) };
    let major = s.split('.').next().and_then(|m| m.trim().parse::<u32>().ok());
    match major {
        Some(SCHEMA_MAJOR) => Ok(()),
        _ => Err(Error::Format(format!("unsupported schema version {s:?}"))),
    }
}

/// Parse with a `line L, column C` diagnostic on failure.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))
}
