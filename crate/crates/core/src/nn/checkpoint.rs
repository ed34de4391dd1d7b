//! JSON parameter checkpoints.
//!
//! Layout (`format = "hddpg-mlp"`, `version = 1`):
//!
//! ```json
//! { "format": "hddpg-mlp", "version": 1, "input_dim": 16, "output_dim": 2,
//!   "layers": [ { "n_in": 16, "n_out": 256,
//!                 "activations": [ { "len": 256, "activation": "relu" } ],
//!                 "weights": [ /* n_out * n_in values, row-major */ ],
//!                 "biases":  [ /* n_out values */ ] } ] }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every parameter bit for bit.

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::mlp::{ActSpan, Layer, MlpNet};
use super::NnError;

pub const NET_FORMAT: &str = "hddpg-mlp";
pub const NET_VERSION: u32 = 1;
pub const OPT_FORMAT: &str = "hddpg-adam";
pub const OPT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerCheckpoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub n_in: usize,
    pub n_out: usize,
    pub activations: Vec<ActSpan>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl From<&MlpNet> for NetCheckpoint {
    fn from(net: &MlpNet) -> Self {
        Self {
            format: NET_FORMAT.to_string(),
            version: NET_VERSION,
            input_dim: net.input_dim(),
            output_dim: net.output_dim(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerCheckpoint {
                    n_in: l.n_in(),
                    n_out: l.n_out(),
                    activations: l.spans().to_vec(),
                    weights: l.weights().to_vec(),
                    biases: l.biases().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetCheckpoint> for MlpNet {
    type Error = NnError;

    fn try_from(ck: NetCheckpoint) -> Result<Self, NnError> {
        if ck.format != NET_FORMAT || ck.version != NET_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported network checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let layers = ck
            .layers
            .into_iter()
            .map(|l| Layer::new(l.n_in, l.n_out, l.weights, l.biases, l.activations))
            .collect::<Result<Vec<_>, _>>()?;
        let net = MlpNet::from_layers(layers)?;
        if net.input_dim() != ck.input_dim || net.output_dim() != ck.output_dim {
            return Err(NnError::Checkpoint(
                "declared dims disagree with layers".into(),
            ));
        }
        if !net.is_finite() {
            return Err(NnError::Checkpoint("non-finite parameter".into()));
        }
        Ok(net)
    }
}

impl MlpNet {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&NetCheckpoint::from(self)).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<MlpNet, NnError> {
        let ck: NetCheckpoint =
            serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        MlpNet::try_from(ck)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl From<&Adam> for AdamCheckpoint {
    fn from(opt: &Adam) -> Self {
        Self {
            format: OPT_FORMAT.to_string(),
            version: OPT_VERSION,
            config: opt.config,
            step: opt.step,
            first: opt.first.clone(),
            second: opt.second.clone(),
        }
    }
}

impl AdamCheckpoint {
    pub fn restore(self, net: &MlpNet) -> Result<Adam, NnError> {
        if self.format != OPT_FORMAT || self.version != OPT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported optimizer checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let n = net.num_params();
        if self.first.len() != n || self.second.len() != n {
            return Err(NnError::Checkpoint(
                "optimizer moments do not match network".into(),
            ));
        }
        let mut opt = Adam::new(net, self.config)?;
        opt.first = self.first;
        opt.second = self.second;
        opt.step = self.step;
        Ok(opt)
    }
}
