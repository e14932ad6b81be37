//! Problem instances, cost evaluation and feasibility checking.
//!
//! A route is a vector `x` of node ids, `x[t]` being the node visited at step
//! `t`. Every variant shares the same [`CostModel`]; the [`Variant`] decides
//! which cost tables the objective reads and which constraints apply.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Problem family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Classic TSP (possibly time-dependent costs, linear costs, forbidden edges).
    Tsp,
    /// Different number of steps than nodes; node `i` visited between
    /// `visit_bounds[i].0` and `visit_bounds[i].1` times.
    Dnsnn,
    /// Non-markovian TSP: the step cost depends on the last `memory_depth` nodes.
    Nmtsp,
    /// Bottleneck TSP, minimise the most expensive traversed edge.
    BtspMinmax,
    /// Bottleneck TSP, maximise the cheapest traversed edge.
    BtspMaxmin,
    /// Politician TSP: exactly one node of every group.
    Ptsp,
    /// TSP with precedence rules.
    Tspp,
    /// Only per-step node costs, no edges (job reassignment form).
    LinearOnly,
}

impl Variant {
    /// Variants in which every node appears exactly once.
    pub fn is_permutation(self) -> bool {
        matches!(
            self,
            Variant::Tsp | Variant::Nmtsp | Variant::BtspMinmax | Variant::BtspMaxmin | Variant::Tspp
        )
    }

    pub fn is_bottleneck(self) -> bool {
        matches!(self, Variant::BtspMinmax | Variant::BtspMaxmin)
    }

    /// Whether the objective reads the pairwise step table.
    pub fn uses_step_costs(self) -> bool {
        !matches!(self, Variant::Nmtsp | Variant::LinearOnly)
    }

    pub(crate) fn default_returning(self) -> bool {
        !matches!(self, Variant::Dnsnn | Variant::LinearOnly)
    }
}

/// A table that is either shared by every step or given per step.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Grid<T> {
    Constant(Vec<T>),
    PerStep(Vec<T>),
}

impl<T: Copy> Grid<T> {
    fn get(&self, n: usize, t: usize, i: usize, j: usize) -> T {
        match self {
            Grid::Constant(d) => d[i * n + j],
            Grid::PerStep(d) => d[(t * n + i) * n + j],
        }
    }

    fn to_per_step(&self, n: usize, steps: usize) -> Vec<T> {
        match self {
            Grid::Constant(d) => (0..steps).flat_map(|_| d.iter().copied()).collect(),
            Grid::PerStep(d) => {
                debug_assert_eq!(d.len(), steps * n * n);
                d.clone()
            }
        }
    }
}

/// Higher-order step costs `C[t][i][j_0]...[j_{K-1}]`: the cost of arriving at
/// `i` from `j_0` when the `K - 1` nodes before `j_0` were `j_1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryCosts {
    depth: usize,
    data: Vec<f64>,
    forbidden: Vec<bool>,
}

impl MemoryCosts {
    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Cost tables of an instance.
///
/// Forbidden ("infinite") entries live in boolean masks, never as float
/// infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    n_nodes: usize,
    n_steps: usize,
    step: Option<Grid<f64>>,
    step_forbidden: Option<Grid<bool>>,
    linear: Option<Vec<f64>>,
    linear_forbidden: Option<Vec<bool>>,
    memory: Option<MemoryCosts>,
}

fn check_finite(value: f64, location: impl FnOnce() -> String) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite {
            location: location(),
            value,
        })
    }
}

impl CostModel {
    /// An empty model: every cost is zero and nothing is forbidden.
    pub fn new(n_nodes: usize, n_steps: usize) -> Self {
        Self {
            n_nodes,
            n_steps,
            step: None,
            step_forbidden: None,
            linear: None,
            linear_forbidden: None,
            memory: None,
        }
    }

    /// Time-constant step costs `C[i][j]`, stored once.
    pub fn with_step_matrix(mut self, matrix: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = self.n_nodes;
        if matrix.len() != n {
            return Err(ModelError::Shape {
                what: "step matrix rows",
                expected: n,
                got: matrix.len(),
            });
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::Shape {
                    what: "step matrix columns",
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                check_finite(v, || format!("step[{i}][{j}]"))?;
                data.push(v);
            }
        }
        self.step = Some(Grid::Constant(data));
        Ok(self)
    }

    /// Time-dependent step costs `C[t][i][j]`.
    pub fn with_per_step(mut self, tables: &[Vec<Vec<f64>>]) -> Result<Self, ModelError> {
        let n = self.n_nodes;
        if tables.len() != self.n_steps {
            return Err(ModelError::Shape {
                what: "per-step tables",
                expected: self.n_steps,
                got: tables.len(),
            });
        }
        let mut data = Vec::with_capacity(self.n_steps * n * n);
        for (t, m) in tables.iter().enumerate() {
            if m.len() != n {
                return Err(ModelError::Shape {
                    what: "per-step rows",
                    expected: n,
                    got: m.len(),
                });
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != n {
                    return Err(ModelError::Shape {
                        what: "per-step columns",
                        expected: n,
                        got: row.len(),
                    });
                }
                for (j, &v) in row.iter().enumerate() {
                    check_finite(v, || format!("per_step[{t}][{i}][{j}]"))?;
                    data.push(v);
                }
            }
        }
        self.step = Some(Grid::PerStep(data));
        Ok(self)
    }

    /// Linear costs `C0[t][i]` of being at node `i` at step `t`.
    pub fn with_linear(mut self, table: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = self.n_nodes;
        if table.len() != self.n_steps {
            return Err(ModelError::Shape {
                what: "linear rows",
                expected: self.n_steps,
                got: table.len(),
            });
        }
        let mut data = Vec::with_capacity(self.n_steps * n);
        for (t, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::Shape {
                    what: "linear columns",
                    expected: n,
                    got: row.len(),
                });
            }
            for (i, &v) in row.iter().enumerate() {
                check_finite(v, || format!("linear[{t}][{i}]"))?;
                data.push(v);
            }
        }
        self.linear = Some(data);
        Ok(self)
    }

    /// Memory costs for the non-markovian variant, flat in row-major order
    /// over `(t, i, j_0, ..., j_{K-1})`.
    pub fn with_memory(mut self, depth: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if depth == 0 {
            return Err(ModelError::Config("memory depth must be at least 1".into()));
        }
        let expected = self.n_steps * self.n_nodes.pow(depth as u32 + 1);
        if data.len() != expected {
            return Err(ModelError::Shape {
                what: "memory costs",
                expected,
                got: data.len(),
            });
        }
        for (k, &v) in data.iter().enumerate() {
            check_finite(v, || format!("memory[{k}]"))?;
        }
        let forbidden = vec![false; data.len()];
        self.memory = Some(MemoryCosts {
            depth,
            data,
            forbidden,
        });
        Ok(self)
    }

    /// Forbid the edge `i -> j`, at every step (`step = None`) or at one step.
    pub fn forbid_edge(mut self, step: Option<usize>, i: usize, j: usize) -> Result<Self, ModelError> {
        let n = self.n_nodes;
        for node in [i, j] {
            if node >= n {
                return Err(ModelError::NodeOutOfRange { node, n_nodes: n });
            }
        }
        let grid = self
            .step_forbidden
            .take()
            .unwrap_or_else(|| Grid::Constant(vec![false; n * n]));
        let grid = match (grid, step) {
            (Grid::Constant(mut d), None) => {
                d[i * n + j] = true;
                Grid::Constant(d)
            }
            (g, Some(t)) => {
                if t >= self.n_steps {
                    return Err(ModelError::Config(format!("forbidden step {t} out of range")));
                }
                let mut d = g.to_per_step(n, self.n_steps);
                d[(t * n + i) * n + j] = true;
                Grid::PerStep(d)
            }
            (Grid::PerStep(mut d), None) => {
                for t in 0..self.n_steps {
                    d[(t * n + i) * n + j] = true;
                }
                Grid::PerStep(d)
            }
        };
        self.step_forbidden = Some(grid);
        Ok(self)
    }

    /// Forbid visiting node `i` at step `t`.
    pub fn forbid_node(mut self, t: usize, i: usize) -> Result<Self, ModelError> {
        if i >= self.n_nodes {
            return Err(ModelError::NodeOutOfRange {
                node: i,
                n_nodes: self.n_nodes,
            });
        }
        if t >= self.n_steps {
            return Err(ModelError::Config(format!("forbidden step {t} out of range")));
        }
        let mask = self
            .linear_forbidden
            .get_or_insert_with(|| vec![false; self.n_steps * self.n_nodes]);
        mask[t * self.n_nodes + i] = true;
        Ok(self)
    }

    /// Forbid one memory entry, addressed by `(t, i, j_0..j_{K-1})`.
    pub fn forbid_memory(mut self, t: usize, i: usize, history: &[usize]) -> Result<Self, ModelError> {
        let n = self.n_nodes;
        let offset = self.memory_offset(t, i, history)?;
        let mem = self
            .memory
            .as_mut()
            .ok_or_else(|| ModelError::Config("no memory costs to forbid".into()))?;
        debug_assert!(history.iter().all(|&j| j < n));
        mem.forbidden[offset] = true;
        Ok(self)
    }

    fn memory_offset(&self, t: usize, i: usize, history: &[usize]) -> Result<usize, ModelError> {
        let n = self.n_nodes;
        let mem = self
            .memory
            .as_ref()
            .ok_or_else(|| ModelError::Config("no memory costs".into()))?;
        if history.len() != mem.depth {
            return Err(ModelError::Shape {
                what: "memory history",
                expected: mem.depth,
                got: history.len(),
            });
        }
        let mut off = t * n + i;
        for &j in history {
            if j >= n {
                return Err(ModelError::NodeOutOfRange { node: j, n_nodes: n });
            }
            off = off * n + j;
        }
        Ok(off)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn has_step_costs(&self) -> bool {
        self.step.is_some()
    }

    pub fn has_linear_costs(&self) -> bool {
        self.linear.is_some() || self.linear_forbidden.is_some()
    }

    pub fn memory(&self) -> Option<&MemoryCosts> {
        self.memory.as_ref()
    }

    /// Step cost of `i -> j` at step `t`; `None` when forbidden.
    pub fn step_cost(&self, t: usize, i: usize, j: usize) -> Option<f64> {
        let n = self.n_nodes;
        if let Some(f) = &self.step_forbidden {
            if f.get(n, t, i, j) {
                return None;
            }
        }
        Some(self.step.as_ref().map_or(0.0, |g| g.get(n, t, i, j)))
    }

    /// Linear cost of node `i` at step `t`; `None` when forbidden.
    pub fn linear_cost(&self, t: usize, i: usize) -> Option<f64> {
        let k = t * self.n_nodes + i;
        if self.linear_forbidden.as_ref().is_some_and(|m| m[k]) {
            return None;
        }
        Some(self.linear.as_ref().map_or(0.0, |l| l[k]))
    }

    /// Memory cost; `None` when forbidden or absent.
    pub fn memory_cost(&self, t: usize, i: usize, history: &[usize]) -> Option<f64> {
        let off = self.memory_offset(t, i, history).ok()?;
        let mem = self.memory.as_ref()?;
        if mem.forbidden[off] {
            None
        } else {
            Some(mem.data[off])
        }
    }

    /// True when the step table (and its mask) is shared by all steps and
    /// there is no linear term.
    pub fn is_time_constant(&self) -> bool {
        let step_ok = !matches!(self.step, Some(Grid::PerStep(_)));
        let mask_ok = !matches!(self.step_forbidden, Some(Grid::PerStep(_)));
        step_ok && mask_ok && !self.has_linear_costs()
    }

    pub(crate) fn finite_linear_costs(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in 0..self.n_steps {
            for i in 0..self.n_nodes {
                if let Some(c) = self.linear_cost(t, i) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub(crate) fn finite_memory_costs(&self) -> Vec<f64> {
        self.memory
            .as_ref()
            .map(|m| {
                m.data
                    .iter()
                    .zip(&m.forbidden)
                    .filter(|(_, &f)| !f)
                    .map(|(&v, _)| v)
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Moves the linear term `C0[t][i]` into the step table.
///
/// Every position `t` that has an outgoing edge (all positions when the
/// route returns, all but the last otherwise) adds `C0[t][x_t]` to that edge;
/// the last position of an open route adds its term to the incoming edge.
/// Any edge touching a forbidden node is forbidden. The total of every route
/// is unchanged because each linear term lands on exactly one traversed edge.
pub fn absorb_linear(model: &CostModel, problem: &TourProblem) -> Result<CostModel, ModelError> {
    let n = model.n_nodes;
    let steps = problem.n_steps;
    if model.n_steps != steps || model.n_nodes != problem.n_nodes {
        return Err(ModelError::Shape {
            what: "cost model steps",
            expected: steps,
            got: model.n_steps,
        });
    }
    if !model.has_linear_costs() {
        return Ok(model.clone());
    }
    let returning = problem.returning;
    if steps == 1 && !returning {
        return Err(ModelError::Config(
            "a single-step open route has no edge to absorb the linear term into".into(),
        ));
    }
    let mut data = vec![0.0; steps * n * n];
    let mut forbidden = vec![false; steps * n * n];
    let edge_steps = if returning { steps } else { steps - 1 };
    for t in 0..edge_steps {
        let next = (t + 1) % steps;
        for i in 0..n {
            for j in 0..n {
                let k = (t * n + i) * n + j;
                let base = model.step_cost(t, i, j);
                let own = model.linear_cost(t, i);
                let tail = if !returning && next == steps - 1 {
                    model.linear_cost(next, j)
                } else {
                    Some(0.0)
                };
                // forbidding the target node as well keeps the mask symmetric
                let target_ok = model.linear_cost(next, j).is_some();
                match (base, own, tail, target_ok) {
                    (Some(c), Some(l), Some(tl), true) => data[k] = c + l + tl,
                    _ => forbidden[k] = true,
                }
            }
        }
    }
    Ok(CostModel {
        n_nodes: n,
        n_steps: steps,
        step: Some(Grid::PerStep(data)),
        step_forbidden: Some(Grid::PerStep(forbidden)),
        linear: None,
        linear_forbidden: None,
        memory: model.memory.clone(),
    })
}

/// Positions touched by memory term `t`: `(i, [j_0, ..., j_{K-1}])`.
///
/// For an open route only `t <= T - 2` exist and history before `x_0` is
/// padded with `x_0`; a returning route wraps indexes modulo `T`.
pub fn memory_window(t: usize, steps: usize, depth: usize, returning: bool) -> Option<(usize, Vec<usize>)> {
    if returning {
        if t >= steps {
            return None;
        }
        let i = (t + 1) % steps;
        let js = (0..depth)
            .map(|m| (t as isize - m as isize).rem_euclid(steps as isize) as usize)
            .collect();
        Some((i, js))
    } else {
        if t + 1 >= steps {
            return None;
        }
        let js = (0..depth).map(|m| t.saturating_sub(m)).collect();
        Some((t + 1, js))
    }
}

/// A full problem instance. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct TourProblem {
    pub variant: Variant,
    pub n_nodes: usize,
    pub n_steps: usize,
    pub returning: bool,
    pub fixed_start: Option<usize>,
    pub fixed_end: Option<usize>,
    /// Per-node `(min, max)` visit counts.
    pub visit_bounds: Option<Vec<(usize, usize)>>,
    /// Partition of the nodes into classes.
    pub groups: Option<Vec<Vec<usize>>>,
    /// `(before, after)` pairs.
    pub precedence: Vec<(usize, usize)>,
    pub memory_depth: Option<usize>,
    /// `(step, node)`: node forced at that step.
    pub pins: Vec<(usize, usize)>,
    pub cost_model: CostModel,
}

impl TourProblem {
    pub fn new(variant: Variant, cost_model: CostModel) -> Self {
        Self {
            variant,
            n_nodes: cost_model.n_nodes,
            n_steps: cost_model.n_steps,
            returning: variant.default_returning(),
            fixed_start: None,
            fixed_end: None,
            visit_bounds: None,
            groups: None,
            precedence: Vec::new(),
            memory_depth: cost_model.memory.as_ref().map(|m| m.depth),
            pins: Vec::new(),
            cost_model,
        }
    }

    /// Closed-tour TSP over a time-constant cost matrix.
    pub fn tsp(matrix: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = matrix.len();
        let model = CostModel::new(n, n).with_step_matrix(matrix)?;
        let p = Self::new(Variant::Tsp, model);
        p.validate()?;
        Ok(p)
    }

    pub fn with_returning(mut self, returning: bool) -> Self {
        self.returning = returning;
        self
    }

    pub fn with_fixed_start(mut self, node: usize) -> Self {
        self.fixed_start = Some(node);
        self
    }

    pub fn with_fixed_end(mut self, node: usize) -> Self {
        self.fixed_end = Some(node);
        self
    }

    pub fn with_visit_bounds(mut self, bounds: Vec<(usize, usize)>) -> Self {
        self.visit_bounds = Some(bounds);
        self
    }

    pub fn with_groups(mut self, groups: Vec<Vec<usize>>) -> Self {
        self.groups = Some(groups);
        self
    }

    pub fn with_precedence(mut self, rules: Vec<(usize, usize)>) -> Self {
        self.precedence = rules;
        self
    }

    pub fn with_pin(mut self, step: usize, node: usize) -> Self {
        self.pins.push((step, node));
        self
    }

    /// Bottleneck cost bound `M`: the largest admissible step cost.
    pub fn max_step_cost(&self) -> usize {
        self.usable_step_costs().into_iter().fold(1.0f64, f64::max) as usize
    }

    /// Finite step costs a route can traverse; permutation variants never
    /// use the diagonal.
    pub(crate) fn usable_step_costs(&self) -> Vec<f64> {
        let cm = &self.cost_model;
        let n = self.n_nodes;
        let skip_diag = self.variant.is_permutation();
        let steps = if cm.is_time_constant() { 1 } else { self.n_steps };
        let mut out = Vec::new();
        for t in 0..steps {
            for i in 0..n {
                for j in 0..n {
                    if !(skip_diag && i == j) {
                        out.extend(cm.step_cost(t, i, j));
                    }
                }
            }
        }
        out
    }

    fn check_node(&self, node: usize) -> Result<(), ModelError> {
        if node < self.n_nodes {
            Ok(())
        } else {
            Err(ModelError::NodeOutOfRange {
                node,
                n_nodes: self.n_nodes,
            })
        }
    }

    /// Checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_nodes;
        let steps = self.n_steps;
        let cfg = |m: &str| Err(ModelError::Config(m.to_string()));
        if n == 0 || steps == 0 {
            return cfg("n_nodes and n_steps must be positive");
        }
        if self.cost_model.n_nodes != n || self.cost_model.n_steps != steps {
            return Err(ModelError::Shape {
                what: "cost model",
                expected: n,
                got: self.cost_model.n_nodes,
            });
        }
        if self.variant.is_permutation() && steps != n {
            return cfg("permutation variants need n_steps == n_nodes");
        }
        for node in self.fixed_start.iter().chain(self.fixed_end.iter()) {
            self.check_node(*node)?;
        }
        if self.variant.is_permutation() && steps > 1 && self.fixed_start.is_some() && self.fixed_start == self.fixed_end {
            return cfg("fixed_start and fixed_end coincide in a permutation variant");
        }
        for &(t, a) in &self.pins {
            self.check_node(a)?;
            if t >= steps {
                return cfg("pin step out of range");
            }
        }
        if let Some(bounds) = &self.visit_bounds {
            if bounds.len() != n {
                return Err(ModelError::Shape {
                    what: "visit bounds",
                    expected: n,
                    got: bounds.len(),
                });
            }
            if bounds.iter().any(|&(lo, hi)| lo > hi) {
                return cfg("visit bounds need min <= max");
            }
        }
        if let Some(groups) = &self.groups {
            let mut seen = vec![false; n];
            for g in groups {
                if g.is_empty() {
                    return cfg("empty group");
                }
                for &a in g {
                    self.check_node(a)?;
                    if seen[a] {
                        return cfg("groups overlap");
                    }
                    seen[a] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return cfg("groups must partition the node set");
            }
        }
        for &(a, b) in &self.precedence {
            self.check_node(a)?;
            self.check_node(b)?;
            if a == b {
                return cfg("precedence pair references the same node twice");
            }
        }
        if precedence_has_cycle(n, &self.precedence) {
            return cfg("precedence rules are cyclic");
        }
        match self.variant {
            Variant::Dnsnn if self.visit_bounds.is_none() => return cfg("DNSNN needs visit_bounds"),
            Variant::Ptsp => {
                let Some(groups) = &self.groups else {
                    return cfg("PTSP needs groups");
                };
                if groups.len() != steps {
                    return cfg("PTSP needs one step per group");
                }
            }
            Variant::Nmtsp => {
                let Some(mem) = &self.cost_model.memory else {
                    return cfg("NMTSP needs memory costs");
                };
                if self.memory_depth != Some(mem.depth) {
                    return cfg("memory_depth disagrees with the memory cost table");
                }
                if mem.depth >= steps {
                    return cfg("memory depth must be shorter than the route");
                }
                if self.cost_model.has_linear_costs() {
                    return cfg("NMTSP takes no linear costs");
                }
            }
            Variant::LinearOnly => {
                if self.cost_model.linear.is_none() {
                    return cfg("LINEAR_ONLY needs linear costs");
                }
            }
            _ => {}
        }
        if self.variant.uses_step_costs() && !self.cost_model.has_step_costs() {
            return cfg("this variant needs step costs");
        }
        if self.variant.is_bottleneck() {
            if self.cost_model.has_linear_costs() {
                return cfg("bottleneck variants take no linear costs");
            }
            for c in self.usable_step_costs() {
                if c < 1.0 || c.fract() != 0.0 {
                    return Err(ModelError::Config(format!(
                        "bottleneck costs must be positive integers, found {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Node set implied by the constraints of the variant (domain of one step).
    pub(crate) fn constraint_kind(&self) -> Constraints {
        Constraints {
            permutation: self.variant.is_permutation(),
            groups: self.variant == Variant::Ptsp || self.groups.is_some(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Constraints {
    pub permutation: bool,
    pub groups: bool,
}

fn precedence_has_cycle(n: usize, rules: &[(usize, usize)]) -> bool {
    // Kahn's algorithm
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in rules {
        if a < n && b < n {
            adj[a].push(b);
            indeg[b] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut visited = 0;
    while let Some(v) = stack.pop() {
        visited += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                stack.push(w);
            }
        }
    }
    visited != n
}

/// Objective value of a route, or `Forbidden` when it uses a masked entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RouteCost {
    Finite(f64),
    Forbidden,
}

impl RouteCost {
    pub fn value(self) -> Option<f64> {
        match self {
            RouteCost::Finite(v) => Some(v),
            RouteCost::Forbidden => None,
        }
    }
}

/// Edges `(step, from_pos, to_pos)` traversed by a route of `steps` positions.
pub(crate) fn traversed_edges(steps: usize, returning: bool) -> impl Iterator<Item = (usize, usize, usize)> {
    let count = if returning { steps } else { steps.saturating_sub(1) };
    (0..count).map(move |t| (t, t, (t + 1) % steps))
}

/// Evaluates the objective of `route` under the variant's semantics.
pub fn route_cost(problem: &TourProblem, route: &[usize]) -> Result<RouteCost, ModelError> {
    let n = problem.n_nodes;
    let steps = problem.n_steps;
    if route.len() != steps {
        return Err(ModelError::Shape {
            what: "route length",
            expected: steps,
            got: route.len(),
        });
    }
    if let Some(&node) = route.iter().find(|&&x| x >= n) {
        return Err(ModelError::NodeOutOfRange { node, n_nodes: n });
    }
    let cm = &problem.cost_model;
    let mut linear = 0.0;
    for (t, &x) in route.iter().enumerate() {
        match cm.linear_cost(t, x) {
            Some(c) => linear += c,
            None => return Ok(RouteCost::Forbidden),
        }
    }
    let edges = traversed_edges(steps, problem.returning);
    let cost = match problem.variant {
        Variant::LinearOnly => linear,
        Variant::Nmtsp => {
            let depth = problem.memory_depth.unwrap_or(1);
            let mut total = linear;
            for t in 0..steps {
                let Some((i, js)) = memory_window(t, steps, depth, problem.returning) else {
                    continue;
                };
                let hist: Vec<usize> = js.iter().map(|&p| route[p]).collect();
                match cm.memory_cost(t, route[i], &hist) {
                    Some(c) => total += c,
                    None => return Ok(RouteCost::Forbidden),
                }
            }
            total
        }
        Variant::BtspMinmax | Variant::BtspMaxmin => {
            let maximize_min = problem.variant == Variant::BtspMaxmin;
            let mut agg: Option<f64> = None;
            for (t, a, b) in edges {
                let Some(c) = cm.step_cost(t, route[a], route[b]) else {
                    return Ok(RouteCost::Forbidden);
                };
                agg = Some(match agg {
                    None => c,
                    Some(v) if maximize_min => v.min(c),
                    Some(v) => v.max(c),
                });
            }
            agg.unwrap_or(0.0)
        }
        _ => {
            let mut total = linear;
            for (t, a, b) in edges {
                match cm.step_cost(t, route[a], route[b]) {
                    Some(c) => total += c,
                    None => return Ok(RouteCost::Forbidden),
                }
            }
            total
        }
    };
    Ok(RouteCost::Finite(cost))
}

/// One broken constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Length { expected: usize, got: usize },
    NodeOutOfRange { step: usize, node: usize },
    Repetition { node: usize, count: usize },
    Missing { node: usize },
    Bound { node: usize, count: usize, min: usize, max: usize },
    Group { group: usize, count: usize },
    Precedence { before: usize, after: usize },
    ForbiddenEdge { step: usize, from: usize, to: usize },
    ForbiddenNode { step: usize, node: usize },
    Pin { step: usize, expected: usize, found: usize },
    FixedStart { expected: usize, found: usize },
    FixedEnd { expected: usize, found: usize },
}

impl Violation {
    /// Nodes implicated by the violation.
    pub fn nodes(&self) -> Vec<usize> {
        match *self {
            Violation::Repetition { node, .. }
            | Violation::Missing { node }
            | Violation::Bound { node, .. }
            | Violation::NodeOutOfRange { node, .. }
            | Violation::ForbiddenNode { node, .. } => vec![node],
            Violation::Precedence { before, after } => vec![before, after],
            Violation::ForbiddenEdge { from, to, .. } => vec![from, to],
            Violation::Pin { expected, found, .. }
            | Violation::FixedStart { expected, found }
            | Violation::FixedEnd { expected, found } => vec![expected, found],
            Violation::Group { .. } | Violation::Length { .. } => vec![],
        }
    }
}

/// Result of [`check_feasible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Classifies a route against every constraint of the instance.
pub fn check_feasible(problem: &TourProblem, route: &[usize]) -> Feasibility {
    let n = problem.n_nodes;
    let steps = problem.n_steps;
    let mut v = Vec::new();
    if route.len() != steps {
        v.push(Violation::Length {
            expected: steps,
            got: route.len(),
        });
        return Feasibility {
            feasible: false,
            violations: v,
        };
    }
    for (t, &x) in route.iter().enumerate() {
        if x >= n {
            v.push(Violation::NodeOutOfRange { step: t, node: x });
        }
    }
    if !v.is_empty() {
        return Feasibility {
            feasible: false,
            violations: v,
        };
    }
    let mut counts = vec![0usize; n];
    for &x in route {
        counts[x] += 1;
    }
    let kind = problem.constraint_kind();
    if kind.permutation {
        for (node, &c) in counts.iter().enumerate() {
            if c > 1 {
                v.push(Violation::Repetition { node, count: c });
            } else if c == 0 {
                v.push(Violation::Missing { node });
            }
        }
    }
    if let Some(bounds) = &problem.visit_bounds {
        for (node, (&c, &(lo, hi))) in counts.iter().zip(bounds).enumerate() {
            if c < lo || c > hi {
                v.push(Violation::Bound {
                    node,
                    count: c,
                    min: lo,
                    max: hi,
                });
            }
        }
    }
    if kind.groups {
        if let Some(groups) = &problem.groups {
            for (gi, g) in groups.iter().enumerate() {
                let c: usize = g.iter().map(|&a| counts[a]).sum();
                if c != 1 {
                    v.push(Violation::Group { group: gi, count: c });
                }
            }
            if !kind.permutation {
                for (node, &c) in counts.iter().enumerate() {
                    if c > 1 {
                        v.push(Violation::Repetition { node, count: c });
                    }
                }
            }
        }
    }
    for &(a, b) in &problem.precedence {
        // every visit of `b` must follow some visit of `a`
        let first_a = route.iter().position(|&x| x == a);
        let first_b = route.iter().position(|&x| x == b);
        if let Some(pb) = first_b {
            if first_a.is_none_or(|pa| pa > pb) {
                v.push(Violation::Precedence { before: a, after: b });
            }
        }
    }
    let cm = &problem.cost_model;
    for (t, &x) in route.iter().enumerate() {
        if cm.linear_cost(t, x).is_none() {
            v.push(Violation::ForbiddenNode { step: t, node: x });
        }
    }
    match problem.variant {
        Variant::LinearOnly => {}
        Variant::Nmtsp => {
            let depth = problem.memory_depth.unwrap_or(1);
            for t in 0..steps {
                if let Some((i, js)) = memory_window(t, steps, depth, problem.returning) {
                    let hist: Vec<usize> = js.iter().map(|&p| route[p]).collect();
                    if cm.memory_cost(t, route[i], &hist).is_none() {
                        v.push(Violation::ForbiddenEdge {
                            step: t,
                            from: route[js[0]],
                            to: route[i],
                        });
                    }
                }
            }
        }
        _ => {
            for (t, a, b) in traversed_edges(steps, problem.returning) {
                if cm.step_cost(t, route[a], route[b]).is_none() {
                    v.push(Violation::ForbiddenEdge {
                        step: t,
                        from: route[a],
                        to: route[b],
                    });
                }
            }
        }
    }
    for &(t, a) in &problem.pins {
        if route[t] != a {
            v.push(Violation::Pin {
                step: t,
                expected: a,
                found: route[t],
            });
        }
    }
    if let Some(s) = problem.fixed_start {
        if route[0] != s {
            v.push(Violation::FixedStart {
                expected: s,
                found: route[0],
            });
        }
    }
    if let Some(e) = problem.fixed_end {
        if route[steps - 1] != e {
            v.push(Violation::FixedEnd {
                expected: e,
                found: route[steps - 1],
            });
        }
    }
    Feasibility {
        feasible: v.is_empty(),
        violations: v,
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub route: Vec<usize>,
    /// `None` when the route traverses a forbidden entry.
    pub cost: Option<f64>,
    pub feasible: bool,
    pub violations: Vec<Violation>,
    /// Number of argmax decisions resolved by a random tie-break.
    pub degenerate_choices: usize,
    pub tau_used: f64,
    /// Set when the damping factor adaptation ran out of retries.
    pub tau_unconverged: bool,
}

impl Solution {
    pub(crate) fn assemble(problem: &TourProblem, route: Vec<usize>, degenerate_choices: usize, tau_used: f64, tau_unconverged: bool) -> Self {
        let cost = route_cost(problem, &route).ok().and_then(RouteCost::value);
        let f = check_feasible(problem, &route);
        Self {
            route,
            cost,
            feasible: f.feasible,
            violations: f.violations,
            degenerate_choices,
            tau_used,
            tau_unconverged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, c: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { c }).collect())
            .collect()
    }

    #[test]
    fn uniform_tour_costs_three() {
        let p = TourProblem::tsp(&uniform(3, 1.0)).unwrap();
        assert_eq!(route_cost(&p, &[0, 1, 2]).unwrap(), RouteCost::Finite(3.0));
    }

    #[test]
    fn bottleneck_takes_max_edge() {
        // edges 0->1 = 2, 1->2 = 5, 2->0 = 3
        let mut m = uniform(3, 9.0);
        m[0][1] = 2.0;
        m[1][2] = 5.0;
        m[2][0] = 3.0;
        let model = CostModel::new(3, 3).with_step_matrix(&m).unwrap();
        let p = TourProblem::new(Variant::BtspMinmax, model.clone());
        assert_eq!(route_cost(&p, &[0, 1, 2]).unwrap(), RouteCost::Finite(5.0));
        let p = TourProblem::new(Variant::BtspMaxmin, model);
        assert_eq!(route_cost(&p, &[0, 1, 2]).unwrap(), RouteCost::Finite(2.0));
    }

    #[test]
    fn out_of_range_node_is_an_error() {
        let p = TourProblem::tsp(&uniform(3, 1.0)).unwrap();
        assert!(matches!(
            route_cost(&p, &[0, 1, 7]),
            Err(ModelError::NodeOutOfRange { node: 7, .. })
        ));
    }

    #[test]
    fn forbidden_edge_reported() {
        let model = CostModel::new(3, 3)
            .with_step_matrix(&uniform(3, 1.0))
            .unwrap()
            .forbid_edge(None, 1, 2)
            .unwrap();
        let p = TourProblem::new(Variant::Tsp, model);
        assert_eq!(route_cost(&p, &[0, 1, 2]).unwrap(), RouteCost::Forbidden);
        let f = check_feasible(&p, &[0, 1, 2]);
        assert!(!f.feasible);
        assert_eq!(
            f.violations,
            vec![Violation::ForbiddenEdge { step: 1, from: 1, to: 2 }]
        );
        assert!(check_feasible(&p, &[0, 2, 1]).feasible);
    }

    #[test]
    fn repetition_detected() {
        let p = TourProblem::tsp(&uniform(4, 1.0)).unwrap();
        assert!(check_feasible(&p, &[0, 1, 2, 3]).feasible);
        let f = check_feasible(&p, &[0, 1, 1, 3]);
        assert!(!f.feasible);
        assert!(f.violations.contains(&Violation::Repetition { node: 1, count: 2 }));
    }

    #[test]
    fn precedence_violation() {
        let model = CostModel::new(8, 8).with_step_matrix(&uniform(8, 1.0)).unwrap();
        let p = TourProblem::new(Variant::Tspp, model).with_precedence(vec![(4, 7)]);
        p.validate().unwrap();
        assert!(check_feasible(&p, &[0, 1, 2, 3, 4, 5, 6, 7]).feasible);
        let f = check_feasible(&p, &[0, 1, 2, 7, 4, 5, 6, 3]);
        assert_eq!(f.violations, vec![Violation::Precedence { before: 4, after: 7 }]);
    }

    #[test]
    fn linear_identity_absorption() {
        let m = vec![vec![0.0, 2.0, 3.0], vec![4.0, 0.0, 5.0], vec![6.0, 7.0, 0.0]];
        let model = CostModel::new(3, 3).with_step_matrix(&m).unwrap();
        let p = TourProblem::new(Variant::Tsp, model.clone());
        let absorbed = absorb_linear(&model, &p).unwrap();
        assert_eq!(absorbed, model);
    }

    #[test]
    fn linear_only_symmetry_case() {
        // C = 0, C0[t][i] = i: every closed route costs 0 + 1 + 2
        let model = CostModel::new(3, 3)
            .with_step_matrix(&vec![vec![0.0; 3]; 3])
            .unwrap()
            .with_linear(&vec![vec![0.0, 1.0, 2.0]; 3])
            .unwrap();
        let p = TourProblem::new(Variant::Tsp, model.clone());
        let absorbed = absorb_linear(&model, &p).unwrap();
        let mut q = p.clone();
        q.cost_model = absorbed;
        for r in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [2, 1, 0]] {
            assert_eq!(route_cost(&p, &r).unwrap(), RouteCost::Finite(3.0));
            assert_eq!(route_cost(&q, &r).unwrap(), RouteCost::Finite(3.0));
        }
    }

    #[test]
    fn memory_window_pads_and_wraps() {
        assert_eq!(memory_window(0, 5, 2, false), Some((1, vec![0, 0])));
        assert_eq!(memory_window(3, 5, 2, false), Some((4, vec![3, 2])));
        assert_eq!(memory_window(4, 5, 2, false), None);
        assert_eq!(memory_window(0, 5, 2, true), Some((1, vec![0, 4])));
        assert_eq!(memory_window(4, 5, 2, true), Some((0, vec![4, 3])));
    }

    #[test]
    fn validation_rejects_bad_groups_and_cycles() {
        let model = CostModel::new(4, 2).with_step_matrix(&uniform(4, 1.0)).unwrap();
        let p = TourProblem::new(Variant::Ptsp, model.clone()).with_groups(vec![vec![0, 1], vec![1, 2, 3]]);
        assert!(p.validate().is_err());
        let p = TourProblem::new(Variant::Ptsp, model).with_groups(vec![vec![0, 1], vec![2, 3]]);
        p.validate().unwrap();
        let model = CostModel::new(3, 3).with_step_matrix(&uniform(3, 1.0)).unwrap();
        let p = TourProblem::new(Variant::Tspp, model).with_precedence(vec![(0, 1), (1, 2), (2, 0)]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn bottleneck_requires_integers() {
        let mut m = uniform(3, 2.0);
        m[0][1] = 1.5;
        let model = CostModel::new(3, 3).with_step_matrix(&m).unwrap();
        assert!(TourProblem::new(Variant::BtspMinmax, model).validate().is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = uniform(2, 1.0);
        m[0][1] = f64::INFINITY;
        assert!(matches!(
            CostModel::new(2, 2).with_step_matrix(&m),
            Err(ModelError::NonFinite { .. })
        ));
    }
}
