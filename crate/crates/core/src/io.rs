//! JSON problem documents.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::jrp::JrpInstance;
use crate::problem::{CostModel, TourProblem, Variant};

/// A masked entry: an edge when `from`/`to` are set, a node otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForbiddenDoc {
    #[serde(default)]
    pub step: Option<usize>,
    #[serde(default)]
    pub from: Option<usize>,
    #[serde(default)]
    pub to: Option<usize>,
    #[serde(default)]
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_step: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<Vec<f64>>>,
    /// Flat memory table over `(t, i, j_0, ..., j_{K-1})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden: Vec<ForbiddenDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub n_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returning: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_end: Option<usize>,
    pub costs: CostsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub precedence: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pins: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_depth: Option<usize>,
}

impl ProblemDoc {
    pub fn to_problem(&self) -> Result<TourProblem, ModelError> {
        let n = self.n_nodes;
        let steps = self.n_steps.unwrap_or(match (self.variant, &self.groups) {
            (Variant::Ptsp, Some(g)) => g.len(),
            _ => n,
        });
        let c = &self.costs;
        let mut cm = CostModel::new(n, steps);
        match (&c.step, &c.per_step) {
            (Some(_), Some(_)) => return Err(ModelError::Config("give either step or per_step costs".into())),
            (Some(m), None) => cm = cm.with_step_matrix(m)?,
            (None, Some(t)) => cm = cm.with_per_step(t)?,
            (None, None) => {}
        }
        if let Some(l) = &c.linear {
            cm = cm.with_linear(l)?;
        }
        if let Some(m) = &c.memory {
            let depth = self
                .memory_depth
                .ok_or_else(|| ModelError::Config("memory costs need memory_depth".into()))?;
            cm = cm.with_memory(depth, m.clone())?;
        }
        if self.variant.is_bottleneck() {
            for (k, v) in c.step.iter().flatten().flatten().chain(c.per_step.iter().flatten().flatten().flatten()).enumerate() {
                if v.fract() != 0.0 {
                    return Err(ModelError::Config(format!("bottleneck costs must be integers (entry {k} = {v})")));
                }
            }
        }
        for f in &c.forbidden {
            cm = match (f.from, f.to, f.node) {
                (Some(i), Some(j), None) => cm.forbid_edge(f.step, i, j)?,
                (None, None, Some(a)) => {
                    let t = f
                        .step
                        .ok_or_else(|| ModelError::Config("forbidden node needs a step".into()))?;
                    cm.forbid_node(t, a)?
                }
                _ => return Err(ModelError::Config("forbidden entry needs from/to or node".into())),
            };
        }
        let mut p = TourProblem::new(self.variant, cm);
        if let Some(r) = self.returning {
            p = p.with_returning(r);
        }
        if let Some(s) = self.fixed_start {
            p = p.with_fixed_start(s);
        }
        if let Some(e) = self.fixed_end {
            p = p.with_fixed_end(e);
        }
        if let Some(b) = &self.bounds {
            p = p.with_visit_bounds(b.clone());
        }
        if let Some(g) = &self.groups {
            p = p.with_groups(g.clone());
        }
        if !self.precedence.is_empty() {
            p = p.with_precedence(self.precedence.clone());
        }
        for &(t, a) in &self.pins {
            p = p.with_pin(t, a);
        }
        p.memory_depth = self.memory_depth;
        p.validate()?;
        Ok(p)
    }
}

/// Parses a problem document.
pub fn parse_problem(json: &str) -> Result<TourProblem, ModelError> {
    let doc: ProblemDoc = serde_json::from_str(json).map_err(|e| ModelError::Config(format!("bad problem JSON: {e}")))?;
    doc.to_problem()
}

/// JRP document: the instance fields, validated.
pub fn parse_jrp(json: &str) -> Result<JrpInstance, ModelError> {
    let inst: JrpInstance = serde_json::from_str(json).map_err(|e| ModelError::Config(format!("bad JRP JSON: {e}")))?;
    inst.validate()?;
    Ok(inst)
}
