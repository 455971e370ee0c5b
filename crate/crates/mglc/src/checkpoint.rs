//! JSON checkpoints: model layout, parameter values, optimizer state and the
//! motif dictionary the model was trained with. Floats are written with
//! shortest round-trip formatting, so save and load are bit-exact.

use std::fs;
use std::path::Path;

use mglc_core::autodiff::{Adam, AdamConfig, ParameterStore, Tensor};
use mglc_core::encoders::{Model, ModelConfig};
use mglc_core::motif::{DictionaryEntry, MotifCode, MotifDictionary};
use serde::{Deserialize, Serialize};

use crate::config::{parse_mode, parse_property_init, parse_readout, parse_scheme};
use crate::error::{Error, Result};

pub const FORMAT: &str = "mglc-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden_dim: usize,
    pub global_layers: usize,
    pub inter_layer_transform: bool,
    pub head_hidden: usize,
    pub readout: String,
    pub mode: String,
    pub scheme: String,
    pub property_init: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRecord {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// First and second moments, in parameter order.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub frequency: u64,
    pub code: String,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub properties: Vec<String>,
    pub model: ModelSpec,
    pub dictionary_capacity: usize,
    pub dictionary: Vec<EntryRecord>,
    pub parameters: Vec<TensorRecord>,
    pub optimizer: OptimizerRecord,
}

/// Everything needed to resume training or evaluate.
#[derive(Debug, Clone)]
pub struct Restored {
    pub model: Model,
    pub store: ParameterStore,
    pub adam: Adam,
    pub dictionary: MotifDictionary,
}

impl Checkpoint {
    pub fn capture(
        model: &Model,
        store: &ParameterStore,
        adam: &Adam,
        dictionary: &MotifDictionary,
        properties: &[String],
        seed: u64,
    ) -> Self {
        let c = model.config();
        let (m, v) = adam.moments();
        let flat = |ts: &[Tensor]| ts.iter().map(|t| t.data().to_vec()).collect();
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            seed,
            properties: properties.to_vec(),
            model: ModelSpec {
                hidden_dim: c.hidden_dim,
                global_layers: c.global_layers,
                inter_layer_transform: c.inter_layer_transform,
                head_hidden: c.head_hidden,
                readout: c.readout.name().to_string(),
                mode: c.mode.name().to_string(),
                scheme: c.scheme.name().to_string(),
                property_init: c.property_init.name().to_string(),
            },
            dictionary_capacity: dictionary.capacity(),
            dictionary: dictionary
                .entries()
                .iter()
                .map(|e| EntryRecord { frequency: e.frequency, code: e.code.to_hex(), example: e.example_smiles.clone() })
                .collect(),
            parameters: store
                .iter()
                .map(|(_, p)| TensorRecord { name: p.name.clone(), shape: p.value.shape(), values: p.value.data().to_vec() })
                .collect(),
            optimizer: OptimizerRecord {
                lr: adam.config.lr,
                beta1: adam.config.beta1,
                beta2: adam.config.beta2,
                eps: adam.config.eps,
                step: adam.steps(),
                m: flat(m),
                v: flat(v),
            },
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let bad = |field: &str, value: &str| Error::Data(format!("checkpoint: invalid {field} {value:?}"));
        let s = &self.model;
        Ok(ModelConfig {
            hidden_dim: s.hidden_dim,
            global_layers: s.global_layers,
            inter_layer_transform: s.inter_layer_transform,
            head_hidden: s.head_hidden,
            readout: parse_readout(&s.readout).ok_or_else(|| bad("readout", &s.readout))?,
            mode: parse_mode(&s.mode).ok_or_else(|| bad("mode", &s.mode))?,
            scheme: parse_scheme(&s.scheme).ok_or_else(|| bad("scheme", &s.scheme))?,
            property_init: parse_property_init(&s.property_init).ok_or_else(|| bad("property_init", &s.property_init))?,
        })
    }

    pub fn restore(&self) -> Result<Restored> {
        let data = |msg: String| Error::Data(format!("checkpoint: {msg}"));
        if self.format != FORMAT || self.version != VERSION {
            return Err(data(format!("unsupported format {} v{}", self.format, self.version)));
        }
        let tensor = |shape: [usize; 2], values: &[f64]| Tensor::new(shape[0], shape[1], values.to_vec());
        let mut store = ParameterStore::new();
        for p in &self.parameters {
            let t = tensor(p.shape, &p.values).map_err(|e| data(format!("{}: {e}", p.name)))?;
            store.add(&p.name, t).map_err(|e| data(e.to_string()))?;
        }
        let entries = self
            .dictionary
            .iter()
            .map(|e| {
                let code = MotifCode::from_hex(&e.code).ok_or_else(|| data(format!("malformed motif code {:?}", e.code)))?;
                Ok(DictionaryEntry { code, frequency: e.frequency, example_smiles: e.example.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let dictionary = MotifDictionary::from_entries(entries, self.dictionary_capacity).map_err(|e| data(e.to_string()))?;
        let model = Model::bind(self.model_config()?, self.properties.len(), dictionary.len(), &store)
            .map_err(|e| data(e.to_string()))?;
        let o = &self.optimizer;
        let moments = |list: &[Vec<f64>]| -> Result<Vec<Tensor>> {
            if list.len() != store.len() {
                return Err(data("optimizer moments do not match the parameters".into()));
            }
            list.iter()
                .zip(store.iter())
                .map(|(vals, (_, p))| tensor(p.value.shape(), vals).map_err(|e| data(format!("optimizer {}: {e}", p.name))))
                .collect()
        };
        let config = AdamConfig { lr: o.lr, beta1: o.beta1, beta2: o.beta2, eps: o.eps };
        let adam = Adam::from_state(config, o.step, moments(&o.m)?, moments(&o.v)?, &store).map_err(|e| data(e.to_string()))?;
        Ok(Restored { model, store, adam, dictionary })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}
