//! Right-to-left sweep, iterative resolution and the `W` reuse path.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::approx::{select_layers, ApproxConfig, Strategy};
use crate::condition::precondition;
use crate::error::{ModelError, SolveError, TensorError};
use crate::layers::{
    effective_tau, evolution_tensor, exponentiate, ChainIn, ChainOut, ChainSpec, ChainTag, Labels, Layout, Model,
    Objective,
};
use crate::mps::mps_truncate;
use crate::problem::{Solution, TourProblem, Variant};
use crate::tensor::{argmax_with_ties, contract_counted, IndexPairing, Tensor};

type Result<T> = std::result::Result<T, SolveError>;

/// Damping factor choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    /// Chosen from the cost scale, then adapted on ties and underflow.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: Tau,
    pub seed: u64,
    /// Reuse the `W` tensors of one full sweep across iterations.
    pub reuse: bool,
    /// Relative tolerance of the argmax tie detection.
    pub rel_tol: f64,
    pub max_tau_retries: usize,
    /// Apply exact cost shifts (and pruning above a heuristic tour bound)
    /// before building layers. Never changes the optimal set. Only used with
    /// [`Tau::Auto`]; a fixed `tau` always damps the costs as given.
    pub precondition: bool,
    pub approx: ApproxConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: Tau::Auto,
            seed: 0,
            reuse: false,
            rel_tol: 1e-12,
            max_tau_retries: 8,
            precondition: true,
            approx: ApproxConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Tau::Fixed(tau);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reuse(mut self, reuse: bool) -> Self {
        self.reuse = reuse;
        self
    }

    pub fn with_approx(mut self, approx: ApproxConfig) -> Self {
        self.approx = approx;
        self
    }
}

/// Per-site layer stack. Physical label `x`; the evolution bond leaving
/// position `p` is `e{p}` and the bond of chain `c` is `c{c}_{p}`.
#[derive(Debug, Clone)]
pub struct SiteStack {
    pub position: usize,
    pub plus: Tensor,
    pub evolution: Option<Tensor>,
    pub filters: Vec<(ChainTag, Tensor)>,
}

/// Ordered layer stacks of one sweep.
#[derive(Debug, Clone)]
pub struct NetworkPlan {
    pub sites: Vec<SiteStack>,
    pub tau: f64,
    pub active: Vec<ChainTag>,
    /// Node id of every domain index.
    pub domain: Vec<usize>,
}

impl NetworkPlan {
    /// Plan of the first iteration with unshifted factors `exp(-tau * cost)`.
    pub fn build(problem: &TourProblem, tau: f64) -> Result<Self> {
        Self::build_model(&Model::compile(problem, None)?, tau)
    }

    /// Like [`NetworkPlan::build`] but without fixing the last node of a
    /// closed tour, so that all rotations are represented.
    pub fn build_unanchored(problem: &TourProblem, tau: f64) -> Result<Self> {
        Self::build_model(&Model::compile_with(problem, None, false)?, tau)
    }

    fn build_model(model: &Model, tau: f64) -> Result<Self> {
        let problem = &model.problem;
        let layout = Layout::new(model, model.start, model.base_known.clone());
        let chains: Vec<(usize, ChainSpec)> = model.chains.iter().cloned().enumerate().collect();
        let kill = vec![false; model.d()];
        build_plan(model, &layout, &chains, &kill, effective_tau(problem, tau), false)
    }

    /// Drops every filter chain.
    pub fn without_filters(mut self) -> Self {
        for s in &mut self.sites {
            s.filters.clear();
        }
        self.active.clear();
        self
    }

    /// One-hot `+` vectors selecting `route` on the free positions.
    fn pinned_to(mut self, route: &[usize]) -> Self {
        for s in &mut self.sites {
            let d = s.plus.len();
            let mut v = s.plus.to_vec();
            let want = self.domain.iter().position(|&a| a == route[s.position]);
            for (k, e) in v.iter_mut().enumerate() {
                if Some(k) != want {
                    *e = 0.0;
                }
            }
            debug_assert_eq!(v.len(), d);
            s.plus = Tensor::vector("x", v);
        }
        self
    }
}

fn chain_labels(id: usize, p: usize) -> (String, String) {
    (format!("c{id}_{}", p.wrapping_sub(1)), format!("c{id}_{p}"))
}

fn evo_labels(p: usize) -> (String, String) {
    (format!("e{}", p.wrapping_sub(1)), format!("e{p}"))
}

/// Candidates of one position before filters: domain minus kills, pins.
fn allowed_at(model: &Model, kill: &[bool], p: usize) -> Vec<bool> {
    (0..model.d())
        .map(|k| !model.kill[k] && !kill[k] && model.pins[p].is_none_or(|pin| pin == k))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn site_stack(
    model: &Model,
    layout: &Layout,
    p: usize,
    fixed_in: bool,
    chains: &[(usize, ChainSpec, ChainIn)],
    allowed: &[bool],
    tau: f64,
    shift: bool,
) -> Result<SiteStack> {
    let last = p + 1 == layout.end;
    let mut plus: Vec<f64> = allowed.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let evolution = if layout.foldable(model) {
        let entries = layout.evolution_entries(model, p, fixed_in, last);
        let costs: Vec<f64> = entries.iter().map(|e| e.3).collect();
        let f = exponentiate(&costs, tau, shift).map_err(|_| SolveError::Underflow { iteration: 0, tau })?;
        let mut factor = vec![0.0; model.d()];
        for (e, v) in entries.iter().zip(f) {
            factor[e.1] = v;
        }
        plus.iter_mut().zip(factor).for_each(|(a, b)| *a *= b);
        None
    } else {
        let (bi, bo) = evo_labels(p);
        let labels = Labels {
            phys_in: "x",
            phys_out: "x_",
            bond_in: &bi,
            bond_out: &bo,
        };
        Some(evolution_tensor(model, layout, p, fixed_in, tau, shift, &labels)?)
    };
    let mut filters = Vec::with_capacity(chains.len());
    for (id, spec, input) in chains {
        let (bi, bo) = chain_labels(*id, p);
        let labels = Labels {
            phys_in: "x",
            phys_out: "x_",
            bond_in: &bi,
            bond_out: &bo,
        };
        let out = if last { ChainOut::Accept } else { ChainOut::Open };
        filters.push((spec.tag, spec.tensor(*input, out, &labels)));
    }
    Ok(SiteStack {
        position: p,
        plus: Tensor::vector("x", plus),
        evolution,
        filters,
    })
}

fn build_plan(
    model: &Model,
    layout: &Layout,
    chains: &[(usize, ChainSpec)],
    kill: &[bool],
    tau: f64,
    shift: bool,
) -> Result<NetworkPlan> {
    let mut sites = Vec::with_capacity(layout.end - layout.start);
    for p in layout.start..layout.end {
        let input = if p == layout.start { ChainIn::Fixed(0) } else { ChainIn::Open };
        let with_in: Vec<(usize, ChainSpec, ChainIn)> =
            chains.iter().map(|(id, c)| (*id, c.clone(), input)).collect();
        let allowed = allowed_at(model, kill, p);
        sites.push(site_stack(model, layout, p, p == layout.start, &with_in, &allowed, tau, shift)?);
    }
    Ok(NetworkPlan {
        sites,
        tau,
        active: chains.iter().map(|c| c.1.tag).collect(),
        domain: model.domain.clone(),
    })
}

/// `W` tensors of one sweep, keyed by the position whose stack produced them.
#[derive(Debug, Clone, Default)]
pub struct WCache {
    pub tensors: Vec<(usize, Tensor)>,
}

impl WCache {
    pub fn get(&self, position: usize) -> Option<&Tensor> {
        self.tensors.iter().find(|(p, _)| *p == position).map(|(_, t)| t)
    }
}

/// Result of [`sweep`]. The true marginal is `p * exp(log_scale)`.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub p: Tensor,
    pub log_scale: f64,
    pub cache: WCache,
    pub ops: u64,
    /// Largest `W` by dense element count.
    pub peak_w_len: usize,
    /// Largest `W` by nonzero element count.
    pub peak_w_nnz: usize,
    pub truncation_errors: Vec<f64>,
}

fn absorb_site(stack: &SiteStack, w: Option<&Tensor>, ops: &mut u64) -> Result<Tensor> {
    let mut a = stack.plus.to_sparse();
    if let Some(evo) = &stack.evolution {
        a = contract_counted(&a, evo, &IndexPairing::new(&[("x", "x")]), ops)?.relabel("x_", "x")?;
    }
    if let Some(w) = w {
        let pairing = IndexPairing::shared(&a, w);
        a = contract_counted(&a, w, &pairing, ops)?;
    }
    for (_, f) in &stack.filters {
        let mut pairs = vec![("x".to_string(), "x".to_string())];
        for l in f.labels() {
            if l != "x" && l != "x_" && a.labels().contains(l) {
                pairs.push((l.clone(), l.clone()));
            }
        }
        a = contract_counted(&a, f, &IndexPairing(pairs), ops)?.relabel("x_", "x")?;
    }
    Ok(a)
}

fn sweep_impl(plan: &NetworkPlan, keep: bool, mps_cap: Option<usize>) -> Result<SweepOutput> {
    let mut ops = 0;
    let mut w: Option<Tensor> = None;
    let mut log_scale = 0.0;
    let mut cache = WCache::default();
    let (mut peak_len, mut peak_nnz) = (0, 0);
    let mut truncation_errors = Vec::new();
    let n = plan.sites.len();
    if n == 0 {
        return Err(SolveError::Layer("plan has no sites".into()));
    }
    for (k, stack) in plan.sites.iter().enumerate().rev() {
        let a = absorb_site(stack, w.as_ref(), &mut ops)?;
        if k == 0 {
            let p = a.to_dense();
            if p.rank() != 1 {
                return Err(TensorError::NotAVector(p.rank()).into());
            }
            return Ok(SweepOutput {
                p,
                log_scale,
                cache,
                ops,
                peak_w_len: peak_len,
                peak_w_nnz: peak_nnz,
                truncation_errors,
            });
        }
        let mut t = a.trace_index("x")?.to_dense();
        let m = t.max();
        if !(m > 0.0) {
            return Err(SolveError::NoSurvivingState { iteration: 0 });
        }
        t = t.scale(1.0 / m);
        log_scale += m.ln();
        if let Some(chi) = mps_cap {
            if t.rank() >= 2 {
                let chain = mps_truncate(&t, Some(chi))?;
                truncation_errors.push(chain.total_error());
                let mut r = chain.to_tensor()?;
                // amplitudes are nonnegative; truncation noise is clipped
                r = Tensor::dense_owned(
                    r.labels().to_vec(),
                    r.dims().to_vec(),
                    r.to_vec().into_iter().map(|v| v.max(0.0)).collect(),
                )?;
                t = r;
            }
        }
        peak_len = peak_len.max(t.len());
        peak_nnz = peak_nnz.max(t.nnz());
        if keep {
            cache.tensors.push((stack.position, t.clone()));
        }
        w = Some(t);
    }
    unreachable!("first site returns")
}

/// Contracts `plan` from the last site leftward and returns the marginal
/// vector `P` of the first site together with the cached `W` tensors.
pub fn sweep(plan: &NetworkPlan) -> Result<SweepOutput> {
    sweep_impl(plan, true, None)
}

/// `P` over the first free position with unshifted factors: entry `i` is
/// `sum over feasible routes with that node of exp(-tau * cost)`, returned
/// as node-indexed pairs `(node, amplitude)`.
pub fn first_marginal(problem: &TourProblem, tau: f64) -> Result<Vec<(usize, f64)>> {
    let plan = NetworkPlan::build(problem, tau)?;
    let out = sweep(&plan)?;
    let s = out.log_scale.exp();
    Ok(plan
        .domain
        .iter()
        .zip(out.p.to_vec())
        .map(|(&a, v)| (a, v * s))
        .collect())
}

/// Network amplitude of one route: `exp(-tau * objective)` when the route
/// satisfies every filter, 0 otherwise.
pub fn network_amplitude(problem: &TourProblem, tau: f64, route: &[usize]) -> Result<f64> {
    if route.len() != problem.n_steps {
        return Err(ModelError::Shape {
            what: "route length",
            expected: problem.n_steps,
            got: route.len(),
        }
        .into());
    }
    let model = Model::compile_with(problem, None, false)?;
    for (t, known) in model.base_known.iter().enumerate() {
        if known.is_some_and(|a| a != route[t]) {
            return Ok(0.0);
        }
    }
    if route.iter().any(|&a| a >= problem.n_nodes) {
        return Ok(0.0);
    }
    let plan = NetworkPlan::build_model(&model, tau)?.pinned_to(route);
    if plan.sites.is_empty() {
        return Ok(1.0);
    }
    match sweep(&plan) {
        Ok(out) => Ok(out.p.to_vec().iter().sum::<f64>() * out.log_scale.exp()),
        Err(SolveError::NoSurvivingState { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Diagnostics of one resolved position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub position: usize,
    pub node: usize,
    pub tie_count: usize,
    pub tau: f64,
    pub ops: u64,
    pub peak_w_len: usize,
    pub peak_w_nnz: usize,
    pub micros: u128,
    pub reused: bool,
    pub active_layers: Vec<String>,
    pub truncation_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: Vec<IterationReport>,
    pub tau_trace: Vec<f64>,
    pub total_ops: u64,
    pub peak_w_len: usize,
    pub peak_w_nnz: usize,
    pub preconditioned: bool,
}

impl Diagnostics {
    /// Operations spent after the first resolved position.
    pub fn ops_after_first(&self) -> u64 {
        self.iterations.iter().skip(1).map(|r| r.ops).sum()
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn term_values(model: &Model) -> Vec<f64> {
    let c = &model.costs;
    match model.problem.variant {
        Variant::LinearOnly => return c.finite_linear_costs(),
        Variant::Nmtsp => return c.finite_memory_costs(),
        _ => {}
    }
    let n = model.problem.n_nodes;
    let steps = if c.is_time_constant() { 1 } else { model.n_steps };
    let mut out = Vec::new();
    for t in 0..steps {
        for i in 0..n {
            for j in 0..n {
                if model.permutation && i == j {
                    continue;
                }
                out.extend(c.step_cost(t, i, j));
            }
        }
    }
    out
}

/// Smallest objective gap worth resolving.
fn resolution(values: &[f64]) -> Option<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi - lo <= 0.0 {
        return None;
    }
    if values.iter().all(|v| v.fract() == 0.0 && v.abs() < 1e15) {
        let g = values
            .iter()
            .map(|v| (v - lo) as u64)
            .fold(0, gcd);
        return Some(g as f64);
    }
    let mut s: Vec<f64> = values.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 1e-12 * hi.abs().max(1.0))
        .reduce(f64::min)
}

/// Initial damping factor: `(ln(count) + 1/2) / resolution`, where `count`
/// bounds the completions of one choice and `resolution` is the smallest
/// possible objective gap. A flat cost landscape gets `tau = 1`.
pub fn auto_tau(problem: &TourProblem) -> Result<f64> {
    let model = Model::compile(problem, None)?;
    Ok(auto_tau_model(&model))
}

fn auto_tau_model(model: &Model) -> f64 {
    let sites = model.end.saturating_sub(model.start);
    let ln_count = if sites <= 1 {
        0.0
    } else if model.permutation {
        ln_factorial(sites - 1)
    } else {
        (sites - 1) as f64 * (model.d() as f64).ln()
    };
    match resolution(&term_values(model)) {
        Some(r) => (ln_count + 0.5) / r,
        None => 1.0,
    }
}

/// Chains reduced by the prefix `known[start..m]`, plus extra kills.
fn reduce_chains(model: &Model, known: &[Option<usize>], m: usize) -> (Vec<(usize, ChainSpec)>, Vec<bool>) {
    let d = model.d();
    let mut kill = vec![false; d];
    let mut out = Vec::new();
    let remaining = model.end - m;
    for (id, c) in model.chains.iter().enumerate() {
        let n = (model.start..m)
            .filter_map(|q| known[q].and_then(|a| model.dom_of[a]))
            .filter(|&k| c.members[k])
            .count();
        let succ_active = n == 0 && c.successors.iter().any(|&s| s);
        let hi = c.hi.saturating_sub(n);
        let lo = c.lo.saturating_sub(n);
        if hi == 0 {
            for k in 0..d {
                if c.members[k] || (succ_active && c.successors[k]) {
                    kill[k] = true;
                }
            }
            continue;
        }
        if lo == 0 && hi >= remaining && !succ_active {
            continue;
        }
        let mut r = c.clone();
        r.lo = lo;
        r.hi = hi;
        if !succ_active {
            r.successors = vec![false; d];
        }
        out.push((id, r));
    }
    (out, kill)
}

struct Cache {
    base: usize,
    tau: f64,
    layout: Layout,
    chains: Vec<(usize, ChainSpec)>,
    kill: Vec<bool>,
    w: WCache,
}

struct Marginal {
    p: Vec<f64>,
    ops: u64,
    peak_len: usize,
    peak_nnz: usize,
    reused: bool,
    trunc: f64,
}

fn with_iteration(e: SolveError, iteration: usize) -> SolveError {
    match e {
        SolveError::Underflow { tau, .. } => SolveError::Underflow { iteration, tau },
        SolveError::NoSurvivingState { .. } | SolveError::Tensor(TensorError::NoSurvivingState) => {
            SolveError::NoSurvivingState { iteration }
        }
        other => other,
    }
}

struct Solver<'a> {
    model: Model,
    config: &'a SolverConfig,
    known: Vec<Option<usize>>,
    cache: Option<Cache>,
    select_rng: ChaCha8Rng,
    failures: Vec<usize>,
}

impl Solver<'_> {
    fn exact(&self) -> bool {
        self.config.approx.strategy == Strategy::All && self.config.approx.mps_bond_cap.is_none()
    }

    fn closeness(&self, tag: ChainTag, m: usize) -> f64 {
        let members: Vec<usize> = match tag {
            ChainTag::Node(a) | ChainTag::Precedence(a) => vec![a],
            ChainTag::Group(g) => self.model.problem.groups.as_ref().map(|gs| gs[g].clone()).unwrap_or_default(),
        };
        let prev = if m > 0 { self.known[m - 1] } else { None }
            .or(self.known[self.model.n_steps - 1]);
        let t = m.saturating_sub(1);
        let c = &self.model.problem.cost_model;
        members
            .iter()
            .filter_map(|&b| match prev {
                Some(a) if c.has_step_costs() => c.step_cost(t, a, b),
                Some(_) | None => {
                    let col = (0..self.model.problem.n_nodes).filter_map(|a| c.step_cost(t, a, b));
                    col.reduce(f64::min).or(c.linear_cost(m, b))
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn full_sweep(&mut self, m: usize, tau: f64, keep: bool) -> Result<(Marginal, Option<Cache>)> {
        let model = &self.model;
        let layout = Layout::new(model, m, self.known.clone());
        let (mut chains, kill) = reduce_chains(model, &self.known, m);
        if !self.exact() && self.config.approx.strategy != Strategy::All {
            let tags: Vec<ChainTag> = chains.iter().map(|c| c.1.tag).collect();
            let scores: Vec<f64> = tags.iter().map(|&t| self.closeness(t, m)).collect();
            let n = model.problem.n_nodes;
            let pick = select_layers(&tags, &scores, &self.failures, &self.config.approx, n, &mut self.select_rng);
            chains = pick.into_iter().map(|k| chains[k].clone()).collect();
        }
        let shift = true;
        let plan = build_plan(model, &layout, &chains, &kill, tau, shift)?;
        let out = sweep_impl(&plan, keep, self.config.approx.mps_bond_cap)?;
        let marginal = Marginal {
            p: out.p.to_vec(),
            ops: out.ops,
            peak_len: out.peak_w_len,
            peak_nnz: out.peak_w_nnz,
            reused: false,
            trunc: out.truncation_errors.iter().sum(),
        };
        let cache = keep.then_some(Cache {
            base: m,
            tau,
            layout,
            chains,
            kill,
            w: out.cache,
        });
        Ok((marginal, cache))
    }

    fn reuse_marginal(&self, m: usize) -> Result<Marginal> {
        let model = &self.model;
        let cache = self.cache.as_ref().expect("cache checked by caller");
        let mut layout = cache.layout.clone();
        layout.known = self.known.clone();
        let last = m + 1 == layout.end;
        let (live, kill_m) = reduce_chains(model, &self.known, m);
        let mut allowed = allowed_at(model, &cache.kill, m);
        for (a, k) in allowed.iter_mut().zip(&kill_m) {
            *a &= !k;
        }
        let mut v = if last { None } else { cache.w.get(m + 1).cloned() };
        let mut open = Vec::new();
        for (id, spec) in &cache.chains {
            let n = (cache.base..m)
                .filter_map(|q| self.known[q].and_then(|a| model.dom_of[a]))
                .filter(|&k| spec.members[k])
                .count();
            if !spec.saturate && !live.iter().any(|(l, _)| l == id) {
                // no longer binding: every reachable count sees the same suffix
                if let Some(w) = v.as_mut() {
                    *w = w.slice(&format!("c{id}_{m}"), n)?;
                }
                continue;
            }
            let mut outs: Vec<Option<usize>> = vec![None; model.d()];
            for x in 0..model.d() {
                if allowed[x] {
                    outs[x] = spec.step(n, x).filter(|&o| !last || spec.accepts(o));
                }
            }
            let mut values: Vec<usize> = outs.iter().flatten().copied().collect();
            values.sort_unstable();
            values.dedup();
            if values.len() <= 1 {
                for x in 0..model.d() {
                    if outs[x].is_none() {
                        allowed[x] = false;
                    }
                }
                if let (Some(w), Some(&val)) = (v.as_mut(), values.first()) {
                    *w = w.slice(&format!("c{id}_{m}"), val)?;
                }
            } else {
                open.push((*id, spec.clone(), ChainIn::Fixed(n)));
            }
        }
        let tau = cache.tau;
        let stack = site_stack(model, &layout, m, true, &open, &allowed, tau, true)?;
        let stack = SiteStack {
            position: m,
            ..stack
        };
        let mut ops = 0;
        let a = absorb_site(&stack, v.as_ref(), &mut ops)?;
        let (len, nnz) = v.as_ref().map_or((0, 0), |w| (w.len(), w.nnz()));
        Ok(Marginal {
            p: a.to_vec(),
            ops,
            peak_len: len,
            peak_nnz: nnz,
            reused: true,
            trunc: 0.0,
        })
    }

    fn marginal(&mut self, m: usize, tau: f64) -> Result<Marginal> {
        let reuse = self.config.reuse && self.exact();
        if reuse {
            if let Some(c) = &self.cache {
                if c.tau == tau && c.base < m {
                    return self.reuse_marginal(m);
                }
            }
            let (marg, cache) = self.full_sweep(m, tau, true)?;
            self.cache = cache;
            Ok(marg)
        } else {
            Ok(self.full_sweep(m, tau, false)?.0)
        }
    }
}

fn tie_set(p: &[f64], rel_tol: f64) -> Vec<usize> {
    let max = p.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    (0..p.len()).filter(|&i| p[i] >= (1.0 - rel_tol) * max).collect()
}

/// Runs the iterative solver.
pub fn solve(problem: &TourProblem, config: &SolverConfig) -> Result<Solution> {
    solve_detailed(problem, config).map(|r| r.0)
}

/// Same as [`solve`] with the reuse path forced on.
pub fn solve_with_reuse(problem: &TourProblem, config: &SolverConfig) -> Result<Solution> {
    let mut c = config.clone();
    c.reuse = true;
    solve(problem, &c)
}

/// [`solve`] that also returns per-iteration diagnostics.
pub fn solve_detailed(problem: &TourProblem, config: &SolverConfig) -> Result<(Solution, Diagnostics)> {
    solve_with_failures(problem, config, &[])
}

pub(crate) fn solve_with_failures(
    problem: &TourProblem,
    config: &SolverConfig,
    failures: &[usize],
) -> Result<(Solution, Diagnostics)> {
    problem.validate()?;
    if let Tau::Fixed(t) = config.tau {
        if !t.is_finite() || (t < 0.0 && problem.variant != Variant::BtspMaxmin) {
            return Err(ModelError::Config(format!("invalid tau {t}")).into());
        }
    }
    let conditioned = if config.precondition && config.tau == Tau::Auto {
        precondition(problem)
    } else {
        None
    };
    let mut diag = Diagnostics {
        preconditioned: conditioned.is_some(),
        ..Default::default()
    };
    let model = Model::compile(problem, conditioned)?;
    let auto = config.tau == Tau::Auto;
    let mut tau_mag = match config.tau {
        Tau::Auto => auto_tau_model(&model),
        Tau::Fixed(t) => t.abs(),
    };
    let sign = |t: f64| effective_tau(problem, t);
    let mut retries = config.max_tau_retries;
    let mut unconverged = false;
    let mut degenerate = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut solver = Solver {
        known: model.base_known.clone(),
        select_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_1a7e),
        model,
        config,
        cache: None,
        failures: failures.to_vec(),
    };
    diag.tau_trace.push(tau_mag);
    let (start, end) = (solver.model.start, solver.model.end);
    let mut m = start;
    while m < end {
        let began = Instant::now();
        let (chains_m, kill_m) = reduce_chains(&solver.model, &solver.known, m);
        let candidates: Vec<Vec<usize>> = (m..end)
            .map(|p| {
                let a = allowed_at(&solver.model, &kill_m, p);
                (0..a.len()).filter(|&k| a[k]).collect()
            })
            .collect();
        if chains_m.is_empty() && candidates.iter().all(|c| c.len() == 1) {
            for (off, c) in candidates.iter().enumerate() {
                solver.known[m + off] = Some(solver.model.domain[c[0]]);
            }
            break;
        }
        let mut ops = 0;
        let mut peak = (0, 0);
        let mut reused = false;
        let mut trunc = 0.0;
        let result = loop {
            match solver.marginal(m, sign(tau_mag)) {
                Ok(mg) => {
                    ops += mg.ops;
                    peak = (peak.0.max(mg.peak_len), peak.1.max(mg.peak_nnz));
                    reused = mg.reused;
                    trunc += mg.trunc;
                    break Ok(mg.p);
                }
                Err(e @ (SolveError::Underflow { .. } | SolveError::NoSurvivingState { .. })) if auto && retries > 0 => {
                    let _ = e;
                    retries -= 1;
                    tau_mag /= 2.0;
                    solver.cache = None;
                    diag.tau_trace.push(tau_mag);
                }
                Err(e) => break Err(with_iteration(e, m)),
            }
        };
        let mut p = match result {
            Ok(p) => p,
            Err(SolveError::NoSurvivingState { .. }) if !solver.exact() => vec![0.0; solver.model.d()],
            Err(e) => return Err(e),
        };
        if !solver.exact() && tie_set(&p, config.rel_tol).is_empty() {
            // approximate layers left nothing: fall back to the `+` candidates
            let a = allowed_at(&solver.model, &kill_m, m);
            p = a.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        }
        let mut ties = tie_set(&p, config.rel_tol);
        if ties.is_empty() {
            return Err(SolveError::NoSurvivingState { iteration: m });
        }
        while auto && ties.len() > 1 {
            if retries == 0 {
                unconverged = true;
                break;
            }
            retries -= 1;
            let probe = solver.full_sweep(m, sign(2.0 * tau_mag), false);
            match probe {
                Ok((mg, _)) => {
                    ops += mg.ops;
                    let t2 = tie_set(&mg.p, config.rel_tol);
                    if t2 == ties || t2.is_empty() {
                        break;
                    }
                    tau_mag *= 2.0;
                    diag.tau_trace.push(tau_mag);
                    solver.cache = None;
                    p = mg.p;
                    ties = t2;
                }
                Err(SolveError::Underflow { .. } | SolveError::NoSurvivingState { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        let (pick, count) = argmax_with_ties(&Tensor::vector("x", p), config.rel_tol, &mut rng)?;
        if count > 1 {
            degenerate += 1;
        }
        let node = solver.model.domain[pick];
        solver.known[m] = Some(node);
        let active = if reused {
            solver
                .cache
                .as_ref()
                .map(|c| c.chains.iter().map(|x| x.1.tag.to_string()).collect())
                .unwrap_or_default()
        } else {
            reduce_or_selected(&solver, m, &chains_m)
        };
        diag.total_ops += ops;
        diag.peak_w_len = diag.peak_w_len.max(peak.0);
        diag.peak_w_nnz = diag.peak_w_nnz.max(peak.1);
        diag.iterations.push(IterationReport {
            position: m,
            node,
            tie_count: count,
            tau: tau_mag,
            ops,
            peak_w_len: peak.0,
            peak_w_nnz: peak.1,
            micros: began.elapsed().as_micros(),
            reused,
            active_layers: active,
            truncation_error: trunc,
        });
        m += 1;
    }
    let route: Vec<usize> = solver
        .known
        .iter()
        .map(|k| k.ok_or(SolveError::Layer("unresolved position".into())))
        .collect::<Result<_>>()?;
    let sol = Solution::assemble(problem, route, degenerate, tau_mag, unconverged);
    Ok((sol, diag))
}

fn reduce_or_selected(solver: &Solver, _m: usize, chains: &[(usize, ChainSpec)]) -> Vec<String> {
    if solver.exact() || solver.config.approx.strategy == Strategy::All {
        chains.iter().map(|c| c.1.tag.to_string()).collect()
    } else {
        // the selection is random; report the candidate pool size instead
        vec![format!("{} of {}", solver.config.approx.k_for(solver.model.problem.n_nodes).min(chains.len()), chains.len())]
    }
}

/// Peak `W` sizes of the first sweep, for scaling measurements.
pub fn first_sweep_stats(problem: &TourProblem, tau: f64) -> Result<SweepOutput> {
    let plan = NetworkPlan::build(problem, tau)?;
    sweep_impl(&plan, false, None)
}

#[doc(hidden)]
pub fn objective_is_bottleneck(problem: &TourProblem) -> bool {
    matches!(
        Model::compile(problem, None).map(|m| m.objective),
        Ok(Objective::Bottleneck { .. })
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CostModel;

    fn abs_diff(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect()
    }

    #[test]
    fn counting_with_and_without_filters() {
        // N = 4 closed tour: three free sites after the anchor
        let p = TourProblem::tsp(&abs_diff(4)).unwrap();
        let plan = NetworkPlan::build(&p, 0.0).unwrap();
        let out = sweep(&plan).unwrap();
        let v: Vec<f64> = out.p.to_vec().iter().map(|x| x * out.log_scale.exp()).collect();
        assert_eq!(v, vec![2.0, 2.0, 2.0]);
        let out = sweep(&plan.without_filters()).unwrap();
        let v: Vec<f64> = out.p.to_vec().iter().map(|x| (x * out.log_scale.exp()).round()).collect();
        assert_eq!(v, vec![9.0, 9.0, 9.0]);
    }

    #[test]
    fn abs_diff_three_nodes() {
        let p = TourProblem::tsp(&abs_diff(3)).unwrap();
        let s = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.cost, Some(4.0));
        assert!(s.feasible);
    }

    #[test]
    fn two_node_tour_for_any_tau() {
        let p = TourProblem::tsp(&[vec![0.0, 3.0], vec![5.0, 0.0]]).unwrap();
        for tau in [0.0, 0.1, 10.0] {
            let s = solve(&p, &SolverConfig::default().with_tau(tau)).unwrap();
            assert_eq!(s.cost, Some(8.0));
        }
    }

    #[test]
    fn huge_tau_underflows() {
        let m: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11 + 1) as f64).collect())
            .collect();
        let p = TourProblem::tsp(&m).unwrap();
        let cfg = SolverConfig::default().with_tau(1e6);
        assert!(matches!(solve(&p, &cfg), Err(SolveError::Underflow { .. })));
    }

    #[test]
    fn resolution_of_integers_uses_gcd() {
        assert_eq!(resolution(&[2.0, 4.0, 8.0]), Some(2.0));
        assert_eq!(resolution(&[3.0, 3.0]), None);
        assert_eq!(resolution(&[0.5, 0.75, 1.5]), Some(0.25));
    }

    #[test]
    fn flat_costs_get_unit_tau() {
        let m = vec![vec![1.0; 4]; 4];
        let p = TourProblem::tsp(&m).unwrap();
        assert_eq!(auto_tau(&p).unwrap(), 1.0);
    }

    #[test]
    fn dnsnn_counts_decrease() {
        let n = 2;
        let m = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        let cm = CostModel::new(n, 3).with_step_matrix(&m).unwrap();
        let p = TourProblem::new(Variant::Dnsnn, cm).with_visit_bounds(vec![(1, 2), (1, 2)]);
        let s = solve(&p, &SolverConfig::default()).unwrap();
        assert!(s.feasible);
    }
}
