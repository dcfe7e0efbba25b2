use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::continuous::{ContinuousModel, LinearDynamics};
use super::discrete::{DiscreteModel, DiscreteModelBuilder, StateSet};
use super::region::{AxisBox, Region};
use crate::error::{PcisError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ModelDoc {
    Discrete(DiscreteDoc),
    Continuous(ContinuousDoc),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    states: Vec<String>,
    actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    admissible: Option<BTreeMap<String, Vec<String>>>,
    kernel: Vec<KernelRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    safe_set: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRecord {
    x: String,
    u: String,
    y: String,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuousDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    state_dim: usize,
    control_dim: usize,
    dynamics: LinearDynamics,
    #[serde(rename = "lipschitz_L")]
    lipschitz_l: f64,
    control_box: AxisBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region: Option<Vec<AxisBox>>,
}

/// A parsed model file.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Discrete {
        model: DiscreteModel,
        safe_set: Option<StateSet>,
    },
    Continuous {
        model: ContinuousModel,
        region: Option<Region>,
    },
}

fn field_err(field: String, err: PcisError) -> PcisError {
    match err {
        PcisError::MissingRow { .. } | PcisError::InvalidModel(_) => err,
        other => PcisError::Field {
            field,
            message: other.to_string(),
        },
    }
}

fn discrete_from_doc(doc: DiscreteDoc) -> Result<LoadedModel> {
    let mut builder = DiscreteModelBuilder::new(&doc.states, &doc.actions);
    if let Some(adm) = &doc.admissible {
        for (state, actions) in adm {
            builder
                .admissible(state, actions)
                .map_err(|e| field_err(format!("admissible.{state}"), e))?;
        }
    }
    for (i, r) in doc.kernel.iter().enumerate() {
        builder
            .transition(&r.x, &r.u, &r.y, r.p)
            .map_err(|e| field_err(format!("kernel[{i}]"), e))?;
    }
    let model = builder.build()?;
    let safe_set = doc
        .safe_set
        .map(|names| model.state_set(&names))
        .transpose()
        .map_err(|e| field_err("safe_set".into(), e))?;
    Ok(LoadedModel::Discrete { model, safe_set })
}

fn continuous_from_doc(doc: ContinuousDoc) -> Result<LoadedModel> {
    if doc.dynamics.state_dim() != doc.state_dim {
        return Err(PcisError::Field {
            field: "dynamics.A".into(),
            message: format!("has {} rows, state_dim is {}", doc.dynamics.state_dim(), doc.state_dim),
        });
    }
    if doc.dynamics.control_dim() != doc.control_dim {
        return Err(PcisError::Field {
            field: "dynamics.B".into(),
            message: format!(
                "has {} columns, control_dim is {}",
                doc.dynamics.control_dim(),
                doc.control_dim
            ),
        });
    }
    let model = ContinuousModel::linear(doc.dynamics, Some(doc.lipschitz_l), doc.control_box)?;
    let region = doc
        .region
        .map(Region::new)
        .transpose()
        .map_err(|e| field_err("region".into(), e))?;
    if let Some(r) = &region {
        if r.dim() != doc.state_dim {
            return Err(PcisError::Field {
                field: "region".into(),
                message: format!("has dimension {}, state_dim is {}", r.dim(), doc.state_dim),
            });
        }
    }
    Ok(LoadedModel::Continuous { model, region })
}

/// Parses a model document from JSON text.
pub fn parse_model(text: &str) -> Result<LoadedModel> {
    match serde_json::from_str::<ModelDoc>(text)? {
        ModelDoc::Discrete(doc) => discrete_from_doc(doc),
        ModelDoc::Continuous(doc) => continuous_from_doc(doc),
    }
}

/// Reads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

/// Serializes a discrete model; probabilities are written with full
/// round-trip precision.
pub fn discrete_to_json(
    model: &DiscreteModel,
    safe_set: Option<&StateSet>,
    description: Option<&str>,
) -> Result<String> {
    let all = model.num_actions();
    let mut admissible = BTreeMap::new();
    let mut kernel = Vec::with_capacity(model.num_nonzeros());
    for x in 0..model.num_states() {
        let acts = model.actions_of(x);
        if acts.len() != all || acts.iter().enumerate().any(|(i, &a)| i != a) {
            admissible.insert(
                model.state_name(x).to_string(),
                acts.iter().map(|&a| model.action_name(a).to_string()).collect(),
            );
        }
        for (a, row) in model.rows_of(x) {
            for (y, p) in row.iter() {
                kernel.push(KernelRecord {
                    x: model.state_name(x).to_string(),
                    u: model.action_name(a).to_string(),
                    y: model.state_name(y).to_string(),
                    p,
                });
            }
        }
    }
    let doc = ModelDoc::Discrete(DiscreteDoc {
        description: description.map(str::to_string),
        states: model.states().to_vec(),
        actions: model.actions().to_vec(),
        admissible: (!admissible.is_empty()).then_some(admissible),
        kernel,
        safe_set: safe_set.map(|s| s.iter().map(|x| model.state_name(x).to_string()).collect()),
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Serializes a continuous model built from linear dynamics.
pub fn continuous_to_json(
    model: &ContinuousModel,
    region: Option<&Region>,
    description: Option<&str>,
) -> Result<String> {
    let dynamics = model.linear_dynamics().cloned().ok_or_else(|| {
        PcisError::NotSerializable("only built-in linear dynamics have a file form".into())
    })?;
    let doc = ModelDoc::Continuous(ContinuousDoc {
        description: description.map(str::to_string),
        state_dim: model.state_dim(),
        control_dim: model.control_dim(),
        dynamics,
        lipschitz_l: model.lipschitz(),
        control_box: model.control_box().clone(),
        region: region.map(|r| r.boxes().to_vec()),
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}
