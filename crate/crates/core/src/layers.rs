//! Layer tensors: `+` vectors, evolution MPOs (`S`, `S(K)`, `Z`) and the
//! 0/1 filter chains (`F(a)`, count bounds, groups, precedence).
//!
//! Every layer is diagonal in the physical index. A layer tensor carries the
//! physical pair `(i, j)` plus, where present, an incoming bond `k` and an
//! outgoing bond `l`.

use crate::error::{ModelError, SolveError};
use crate::problem::{absorb_linear, memory_window, traversed_edges, CostModel, TourProblem, Variant};
use crate::tensor::Tensor;

type Result<T> = std::result::Result<T, SolveError>;

/// Place of a site in a chain of tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SitePosition {
    First,
    Interior,
    Last,
    /// A chain of length one: no bonds at all.
    Only,
}

impl SitePosition {
    pub fn of(site: usize, len: usize) -> Self {
        match (site == 0, site + 1 == len) {
            (true, true) => SitePosition::Only,
            (true, false) => SitePosition::First,
            (false, true) => SitePosition::Last,
            (false, false) => SitePosition::Interior,
        }
    }

    fn bonds(self) -> (ChainIn, ChainOut) {
        match self {
            SitePosition::First => (ChainIn::Fixed(0), ChainOut::Open),
            SitePosition::Interior => (ChainIn::Open, ChainOut::Open),
            SitePosition::Last => (ChainIn::Open, ChainOut::Accept),
            SitePosition::Only => (ChainIn::Fixed(0), ChainOut::Accept),
        }
    }
}

/// What a filter chain constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum ChainTag {
    /// Appearance count of one node.
    Node(usize),
    /// One member of a group.
    Group(usize),
    /// Order rule keyed by its predecessor node.
    Precedence(usize),
}

impl std::fmt::Display for ChainTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChainTag::Node(a) => write!(f, "F({a})"),
            ChainTag::Group(g) => write!(f, "G({g})"),
            ChainTag::Precedence(a) => write!(f, "P({a})"),
        }
    }
}

/// A counting filter over a domain of `members.len()` values.
///
/// The bond carries how many members appeared so far, `0..=hi`. A member
/// pushing the count past `hi` kills the combination (or leaves it at `hi`
/// when `saturate`). A successor arriving while the count is 0 is killed.
/// The last site accepts counts in `lo..=hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub tag: ChainTag,
    pub members: Vec<bool>,
    pub successors: Vec<bool>,
    pub lo: usize,
    pub hi: usize,
    pub saturate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainIn {
    /// Count entering the site is known; no incoming bond index.
    Fixed(usize),
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainOut {
    Open,
    /// No outgoing bond; the final count must lie in `lo..=hi`.
    Accept,
}

pub(crate) struct Labels<'a> {
    pub phys_in: &'a str,
    pub phys_out: &'a str,
    pub bond_in: &'a str,
    pub bond_out: &'a str,
}

const STD_LABELS: Labels<'static> = Labels {
    phys_in: "i",
    phys_out: "j",
    bond_in: "k",
    bond_out: "l",
};

impl ChainSpec {
    pub fn node(a: usize, d: usize, lo: usize, hi: usize) -> Self {
        let mut members = vec![false; d];
        members[a] = true;
        Self {
            tag: ChainTag::Node(a),
            members,
            successors: vec![false; d],
            lo,
            hi,
            saturate: false,
        }
    }

    pub fn bond_dim(&self) -> usize {
        self.hi + 1
    }

    pub fn step(&self, n_in: usize, x: usize) -> Option<usize> {
        if self.successors[x] && n_in == 0 {
            return None;
        }
        let n = n_in + usize::from(self.members[x]);
        if n > self.hi {
            self.saturate.then_some(self.hi)
        } else {
            Some(n)
        }
    }

    pub fn accepts(&self, n: usize) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub(crate) fn tensor(&self, input: ChainIn, output: ChainOut, labels: &Labels) -> Tensor {
        let d = self.members.len();
        let dim = self.bond_dim();
        let mut names = vec![labels.phys_in.to_string(), labels.phys_out.to_string()];
        let mut dims = vec![d, d];
        if input == ChainIn::Open {
            names.push(labels.bond_in.to_string());
            dims.push(dim);
        }
        if output == ChainOut::Open {
            names.push(labels.bond_out.to_string());
            dims.push(dim);
        }
        let ins: Vec<usize> = match input {
            ChainIn::Fixed(n) => vec![n],
            ChainIn::Open => (0..dim).collect(),
        };
        let mut entries = Vec::new();
        for x in 0..d {
            for &n in &ins {
                let Some(m) = self.step(n, x) else { continue };
                let mut c = vec![x, x];
                if input == ChainIn::Open {
                    c.push(n);
                }
                match output {
                    ChainOut::Open => c.push(m),
                    ChainOut::Accept if !self.accepts(m) => continue,
                    ChainOut::Accept => {}
                }
                entries.push((c, 1.0));
            }
        }
        Tensor::sparse_owned(names, dims, entries).expect("chain coordinates are in range")
    }
}

/// `+` vector: 1 on allowed nodes, 0 elsewhere.
pub fn build_plus(allowed: &[bool]) -> Result<Tensor> {
    if !allowed.iter().any(|&a| a) {
        return Err(SolveError::Layer("no candidates: `+` vector would be empty".into()));
    }
    Ok(Tensor::vector(
        "i",
        allowed.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
    ))
}

fn check_site(a: usize, d: usize) -> Result<()> {
    if a >= d {
        Err(ModelError::NodeOutOfRange { node: a, n_nodes: d }.into())
    } else {
        Ok(())
    }
}

/// Non-repetition filter `F(a)` over `n_hat` nodes: node `a` exactly once.
pub fn build_f_layer(a: usize, position: SitePosition, n_hat: usize) -> Result<Tensor> {
    check_site(a, n_hat)?;
    let (i, o) = position.bonds();
    Ok(ChainSpec::node(a, n_hat, 1, 1).tensor(i, o, &STD_LABELS))
}

/// Count filter: node `a` appears between `lo` and `hi` times inclusive.
pub fn build_f_bounds_layer(a: usize, lo: usize, hi: usize, position: SitePosition, n: usize) -> Result<Tensor> {
    check_site(a, n)?;
    if lo > hi {
        return Err(ModelError::Config("visit bounds need min <= max".into()).into());
    }
    if hi == 0 {
        return Err(SolveError::Layer(format!(
            "node {a} has max 0 visits: drop it from the `+` vectors instead"
        )));
    }
    let (i, o) = position.bonds();
    Ok(ChainSpec::node(a, n, lo, hi).tensor(i, o, &STD_LABELS))
}

/// Group filter: exactly one member of `group` appears.
pub fn build_group_filter(group: &[usize], position: SitePosition, n: usize) -> Result<Tensor> {
    if group.is_empty() {
        return Err(ModelError::Config("empty group".into()).into());
    }
    let mut members = vec![false; n];
    for &a in group {
        check_site(a, n)?;
        members[a] = true;
    }
    let spec = ChainSpec {
        tag: ChainTag::Group(group[0]),
        members,
        successors: vec![false; n],
        lo: 1,
        hi: 1,
        saturate: false,
    };
    let (i, o) = position.bonds();
    Ok(spec.tensor(i, o, &STD_LABELS))
}

/// `F(a)` that also blocks every node of `successors` until `a` has appeared.
pub fn build_precedence_filter(a: usize, successors: &[usize], position: SitePosition, n_hat: usize) -> Result<Tensor> {
    check_site(a, n_hat)?;
    let mut spec = ChainSpec::node(a, n_hat, 1, 1);
    spec.tag = ChainTag::Precedence(a);
    for &b in successors {
        check_site(b, n_hat)?;
        spec.successors[b] = true;
    }
    let (i, o) = position.bonds();
    Ok(spec.tensor(i, o, &STD_LABELS))
}

/// How the traversed costs combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    Additive,
    /// Running max (`false`) or min (`true`) carried on a cost bond.
    Bottleneck { maximize_min: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TermKind {
    Unary { t: usize },
    Edge { t: usize },
    Memory { t: usize },
}

/// One cost contribution and the route positions it reads.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Term {
    pub positions: Vec<usize>,
    pub kind: TermKind,
}

/// A compiled instance: domain, cost terms, base filter chains and the
/// positions known before any iteration.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub problem: TourProblem,
    pub costs: CostModel,
    pub n_steps: usize,
    /// Domain index to node id.
    pub domain: Vec<usize>,
    pub dom_of: Vec<Option<usize>>,
    pub objective: Objective,
    pub terms: Vec<Term>,
    pub hist_depth: usize,
    /// Dimension of the cost bond (1 for additive objectives).
    pub cost_dim: usize,
    pub base_known: Vec<Option<usize>>,
    /// Domain index a position is pinned to.
    pub pins: Vec<Option<usize>>,
    pub chains: Vec<ChainSpec>,
    /// Domain entries removed at every site.
    pub kill: Vec<bool>,
    pub start: usize,
    pub end: usize,
    pub permutation: bool,
}

/// True when the tour may be rotated so that node `N-1` comes last.
pub(crate) fn anchor_eligible(p: &TourProblem) -> bool {
    matches!(p.variant, Variant::Tsp | Variant::BtspMinmax | Variant::BtspMaxmin)
        && p.returning
        && p.fixed_start.is_none()
        && p.fixed_end.is_none()
        && p.cost_model.is_time_constant()
        && p.pins.is_empty()
        && p.precedence.is_empty()
        && p.groups.is_none()
        && p.visit_bounds.is_none()
        && p.n_nodes >= 2
}

impl Model {
    /// Compiles `problem`; `costs` overrides the cost tables (used for
    /// conditioned copies with the same objective ordering).
    pub fn compile(problem: &TourProblem, costs: Option<CostModel>) -> Result<Self> {
        Self::compile_with(problem, costs, true)
    }

    /// [`Model::compile`] with the rotation anchor optionally disabled, so
    /// that every rotation of a closed tour stays a distinct state.
    pub fn compile_with(problem: &TourProblem, costs: Option<CostModel>, allow_anchor: bool) -> Result<Self> {
        problem.validate()?;
        let n = problem.n_nodes;
        let steps = problem.n_steps;
        let variant = problem.variant;
        let permutation = variant.is_permutation();
        let mut costs = costs.unwrap_or_else(|| problem.cost_model.clone());

        let objective = match variant {
            Variant::BtspMinmax => Objective::Bottleneck { maximize_min: false },
            Variant::BtspMaxmin => Objective::Bottleneck { maximize_min: true },
            _ => Objective::Additive,
        };

        let mut terms = Vec::new();
        let hist_depth;
        match variant {
            Variant::LinearOnly => {
                hist_depth = 0;
                terms.extend((0..steps).map(|t| Term {
                    positions: vec![t],
                    kind: TermKind::Unary { t },
                }));
            }
            Variant::Nmtsp => {
                let k = problem.memory_depth.unwrap_or(1);
                hist_depth = k;
                for t in 0..steps {
                    if let Some((i, js)) = memory_window(t, steps, k, problem.returning) {
                        let mut positions = vec![i];
                        positions.extend(js);
                        terms.push(Term {
                            positions,
                            kind: TermKind::Memory { t },
                        });
                    }
                }
            }
            _ => {
                let has_edges = problem.returning || steps >= 2;
                if costs.has_linear_costs() && has_edges {
                    costs = absorb_linear(&costs, problem)?;
                }
                if has_edges {
                    hist_depth = 1;
                    for (t, a, b) in traversed_edges(steps, problem.returning) {
                        terms.push(Term {
                            positions: vec![a, b],
                            kind: TermKind::Edge { t },
                        });
                    }
                } else {
                    hist_depth = 0;
                    terms.push(Term {
                        positions: vec![0],
                        kind: TermKind::Unary { t: 0 },
                    });
                }
            }
        }
        let cost_dim = match objective {
            Objective::Additive => 1,
            Objective::Bottleneck { .. } => problem.max_step_cost().max(1),
        };

        let anchored = allow_anchor && anchor_eligible(problem);
        let mut base_known = vec![None; steps];
        base_known[0] = problem.fixed_start;
        if let Some(e) = problem.fixed_end {
            if steps == 1 && base_known[0].is_some_and(|s| s != e) {
                return Err(SolveError::Infeasible);
            }
            base_known[steps - 1] = Some(e);
        }
        if anchored {
            base_known[steps - 1] = Some(n - 1);
        }
        let start = usize::from(base_known[0].is_some());
        let end = if steps > start && base_known[steps - 1].is_some() {
            steps - 1
        } else {
            steps
        };

        let domain: Vec<usize> = if permutation {
            (0..n).filter(|a| !base_known.contains(&Some(*a))).collect()
        } else {
            (0..n).collect()
        };
        let mut dom_of = vec![None; n];
        for (k, &a) in domain.iter().enumerate() {
            dom_of[a] = Some(k);
        }
        let d = domain.len();

        let mut pins = vec![None; steps];
        for &(t, a) in &problem.pins {
            if let Some(b) = base_known[t] {
                if b != a {
                    return Err(SolveError::Infeasible);
                }
                continue;
            }
            match (dom_of[a], pins[t]) {
                (None, _) => return Err(SolveError::Infeasible),
                (Some(k), Some(prev)) if prev != k => return Err(SolveError::Infeasible),
                (Some(k), _) => pins[t] = Some(k),
            }
        }

        let sites = end.saturating_sub(start);
        let known_count = |members: &dyn Fn(usize) -> bool| -> usize {
            base_known.iter().flatten().filter(|&&a| members(a)).count()
        };
        let mut kill = vec![false; d];
        let mut chains: Vec<ChainSpec> = Vec::new();
        let mut push_chain = |mut spec: ChainSpec, known: usize, kill: &mut Vec<bool>| -> Result<()> {
            if known > spec.hi {
                return Err(SolveError::Infeasible);
            }
            spec.hi -= known;
            spec.lo = spec.lo.saturating_sub(known);
            let has_succ = spec.successors.iter().any(|&s| s);
            if spec.hi == 0 {
                for (k, m) in spec.members.iter().enumerate() {
                    if *m {
                        kill[k] = true;
                    }
                }
                if has_succ {
                    for (k, s) in spec.successors.iter().enumerate() {
                        if *s {
                            kill[k] = true;
                        }
                    }
                }
                if spec.lo > 0 {
                    return Err(SolveError::Infeasible);
                }
                return Ok(());
            }
            if spec.lo == 0 && spec.hi >= sites && !has_succ {
                return Ok(());
            }
            chains.push(spec);
            Ok(())
        };

        // successors of each node, active unless the node opens the route
        let mut succ: Vec<Vec<bool>> = vec![vec![false; d]; n];
        for &(a, b) in &problem.precedence {
            if let Some(kb) = dom_of[b] {
                if base_known[0] != Some(a) {
                    succ[a][kb] = true;
                }
            }
        }
        let mut has_chain = vec![false; n];
        if permutation {
            for (k, &a) in domain.iter().enumerate() {
                let mut spec = ChainSpec::node(k, d, 1, 1);
                spec.tag = ChainTag::Node(a);
                spec.successors = succ[a].clone();
                has_chain[a] = true;
                push_chain(spec, 0, &mut kill)?;
            }
        } else {
            if let Some(bounds) = &problem.visit_bounds {
                for (a, &(lo, hi)) in bounds.iter().enumerate() {
                    let mut spec = ChainSpec::node(a, d, lo, hi);
                    spec.successors = succ[a].clone();
                    has_chain[a] = true;
                    push_chain(spec, known_count(&|x| x == a), &mut kill)?;
                }
            }
            if let Some(groups) = &problem.groups {
                for (gi, g) in groups.iter().enumerate() {
                    let mut members = vec![false; d];
                    for &a in g {
                        members[a] = true;
                    }
                    let spec = ChainSpec {
                        tag: ChainTag::Group(gi),
                        members,
                        successors: vec![false; d],
                        lo: 1,
                        hi: 1,
                        saturate: false,
                    };
                    push_chain(spec, known_count(&|x| g.contains(&x)), &mut kill)?;
                }
            }
            for a in 0..n {
                if !has_chain[a] && succ[a].iter().any(|&s| s) {
                    let mut spec = ChainSpec::node(a, d, 0, 1);
                    spec.tag = ChainTag::Precedence(a);
                    spec.successors = succ[a].clone();
                    spec.saturate = true;
                    push_chain(spec, 0, &mut kill)?;
                }
            }
        }

        Ok(Model {
            problem: problem.clone(),
            costs,
            n_steps: steps,
            domain,
            dom_of,
            objective,
            terms,
            hist_depth,
            cost_dim,
            base_known,
            pins,
            chains,
            kill,
            start,
            end,
            permutation,
        })
    }

    pub fn d(&self) -> usize {
        self.domain.len()
    }

    pub fn term_cost(&self, term: &Term, value: &dyn Fn(usize) -> usize) -> Option<f64> {
        let c = &self.costs;
        match term.kind {
            TermKind::Unary { t } => c.linear_cost(t, value(term.positions[0])),
            TermKind::Edge { t } => c.step_cost(t, value(term.positions[0]), value(term.positions[1])),
            TermKind::Memory { t } => {
                let hist: Vec<usize> = term.positions[1..].iter().map(|&p| value(p)).collect();
                c.memory_cost(t, value(term.positions[0]), &hist)
            }
        }
    }
}

/// Source of the values of positions left of the current site.
pub(crate) enum InState<'a> {
    /// Every earlier position is known from the assignment.
    Fixed,
    /// Decoded from an incoming bond state (domain indexes).
    Open { hist: &'a [usize], head: &'a [usize] },
}

/// One evolution entry: `(in state, x, out state, exponent cost)`.
pub(crate) type EvoEntry = (Option<usize>, usize, Option<usize>, f64);

/// Bond structure of one sweep over sites `start..end`.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub start: usize,
    pub end: usize,
    /// Node per position, for every position outside the sweep that is
    /// known and, in fixed mode, for earlier sites.
    pub known: Vec<Option<usize>>,
    pub heads: Vec<usize>,
    pub term_site: Vec<Option<usize>>,
}

impl Layout {
    pub fn new(model: &Model, start: usize, known: Vec<Option<usize>>) -> Self {
        let end = model.end;
        let h = model.hist_depth;
        let free = |q: usize| q >= start && q < end;
        let mut heads = Vec::new();
        let mut term_site = Vec::with_capacity(model.terms.len());
        for term in &model.terms {
            let site = term.positions.iter().copied().filter(|&q| free(q)).max();
            if let Some(e) = site {
                for &q in &term.positions {
                    if free(q) && e - q > h && !heads.contains(&q) {
                        heads.push(q);
                    }
                }
            }
            term_site.push(site);
        }
        heads.sort_unstable();
        Self {
            start,
            end,
            known,
            heads,
            term_site,
        }
    }

    pub fn is_free(&self, q: usize) -> bool {
        q >= self.start && q < self.end
    }

    /// Component dims of the bond leaving site `p`.
    pub fn bond_dims(&self, model: &Model, p: usize) -> Vec<usize> {
        let d = model.d();
        let h = model.hist_depth;
        let mut dims: Vec<usize> = (0..h).map(|s| if p >= self.start + s { d } else { 1 }).collect();
        dims.extend(self.heads.iter().map(|&hd| if p >= hd + h { d } else { 1 }));
        if let Objective::Bottleneck { .. } = model.objective {
            dims.push(model.cost_dim);
        }
        dims
    }

    pub fn bond_size(&self, model: &Model, p: usize) -> usize {
        self.bond_dims(model, p).iter().product()
    }

    /// Component names of a bond, with prefixes for in/out use.
    pub fn component_names(&self, model: &Model, incoming: bool) -> Vec<String> {
        let (b, hd, q) = if incoming { ("k", "kh", "q") } else { ("l", "lh", "p") };
        let mut names: Vec<String> = (0..model.hist_depth).map(|s| format!("{b}{s}")).collect();
        names.extend(self.heads.iter().map(|p| format!("{hd}{p}")));
        if let Objective::Bottleneck { .. } = model.objective {
            names.push(q.to_string());
        }
        if names.len() == 1 && !matches!(model.objective, Objective::Bottleneck { .. }) {
            names[0] = b.to_string();
        }
        names
    }

    fn value_at(&self, model: &Model, q: usize, p: usize, x: usize, input: &InState) -> usize {
        if q == p {
            return model.domain[x];
        }
        if !self.is_free(q) {
            return self.known[q].expect("non-free position is known");
        }
        debug_assert!(q < p);
        match input {
            InState::Fixed => self.known[q].expect("earlier position is known in fixed mode"),
            InState::Open { hist, head, .. } => {
                let back = p - 1 - q;
                let k = if back < model.hist_depth {
                    hist[back]
                } else {
                    let pos = self.heads.binary_search(&q).expect("far position is carried as head");
                    head[pos]
                };
                model.domain[k]
            }
        }
    }

    fn q_neutral(model: &Model) -> usize {
        match model.objective {
            Objective::Bottleneck { maximize_min: true } => model.cost_dim,
            _ => 1,
        }
    }

    fn aggregate(model: &Model, q: usize, c: f64) -> usize {
        // only repeated-node entries fall outside 1..=M; filters remove them
        let c = (c as usize).clamp(1, model.cost_dim);
        match model.objective {
            Objective::Bottleneck { maximize_min: true } => q.min(c),
            _ => q.max(c),
        }
    }

    /// Evolution entries of site `p`. `Fixed` input reads earlier positions
    /// from `known`; `last` drops the outgoing bond.
    pub fn evolution_entries(&self, model: &Model, p: usize, fixed_in: bool, last: bool) -> Vec<EvoEntry> {
        let d = model.d();
        let h = model.hist_depth;
        let bottleneck = matches!(model.objective, Objective::Bottleneck { .. });
        let here: Vec<usize> = (0..model.terms.len())
            .filter(|&k| self.term_site[k] == Some(p))
            .collect();
        let fixed_terms: Vec<usize> = if fixed_in {
            (0..model.terms.len())
                .filter(|&k| match self.term_site[k] {
                    None => bottleneck || p == self.start,
                    Some(s) => bottleneck && s < p,
                })
                .collect()
        } else {
            Vec::new()
        };
        let in_dims = if p > self.start { self.bond_dims(model, p - 1) } else { Vec::new() };
        let out_dims = self.bond_dims(model, p);
        let n_in: usize = if fixed_in { 1 } else { in_dims.iter().product() };
        let mut entries = Vec::new();
        let mut comps = vec![0usize; in_dims.len()];
        for s_in in 0..n_in {
            if !fixed_in {
                let mut r = s_in;
                for k in (0..in_dims.len()).rev() {
                    comps[k] = r % in_dims[k];
                    r /= in_dims[k];
                }
            }
            let (hist, head, q_open) = if fixed_in {
                (&[][..], &[][..], 0)
            } else {
                let nh = self.heads.len();
                (
                    &comps[..h],
                    &comps[h..h + nh],
                    if bottleneck { comps[h + nh] + 1 } else { 0 },
                )
            };
            let input = if fixed_in {
                InState::Fixed
            } else {
                InState::Open { hist, head }
            };
            // contributions fixed by earlier positions only
            let mut base_cost = 0.0;
            let mut q_base = if fixed_in { Self::q_neutral(model) } else { q_open };
            let mut dead = false;
            for &k in &fixed_terms {
                let val = |q: usize| self.value_at(model, q, p, 0, &input);
                match model.term_cost(&model.terms[k], &val) {
                    Some(c) if bottleneck => q_base = Self::aggregate(model, q_base, c),
                    Some(c) => base_cost += c,
                    None => dead = true,
                }
            }
            if dead {
                continue;
            }
            'x: for x in 0..d {
                let val = |q: usize| self.value_at(model, q, p, x, &input);
                let mut cost = base_cost;
                let mut q = q_base;
                for &k in &here {
                    match model.term_cost(&model.terms[k], &val) {
                        Some(c) if bottleneck => q = Self::aggregate(model, q, c),
                        Some(c) => cost += c,
                        None => continue 'x,
                    }
                }
                let out = if last {
                    if bottleneck {
                        cost = q as f64;
                    }
                    None
                } else {
                    let mut idx = 0;
                    let mut k = 0;
                    for s in 0..h {
                        let v = if out_dims[k] == 1 {
                            0
                        } else {
                            model.dom_of[val(p - s)].expect("free value lies in the domain")
                        };
                        idx = idx * out_dims[k] + v;
                        k += 1;
                    }
                    for &hd in &self.heads {
                        let v = if out_dims[k] == 1 {
                            0
                        } else {
                            model.dom_of[val(hd)].expect("free value lies in the domain")
                        };
                        idx = idx * out_dims[k] + v;
                        k += 1;
                    }
                    if bottleneck {
                        idx = idx * out_dims[k] + (q - 1);
                    }
                    Some(idx)
                };
                let inp = (!fixed_in).then_some(s_in);
                entries.push((inp, x, out, cost));
            }
        }
        entries
    }

    /// Whether the evolution needs no bonds (pure per-site factors).
    pub fn foldable(&self, model: &Model) -> bool {
        model.hist_depth == 0 && self.heads.is_empty() && model.objective == Objective::Additive
    }
}

/// Exponentiates entry costs: factor `exp(-tau * cost - shift)`, with the
/// shift chosen so that the largest factor of the site is 1 when `shift` is
/// set. A non-forbidden factor that underflows is an error.
pub(crate) fn exponentiate(costs: &[f64], tau: f64, shift: bool) -> std::result::Result<Vec<f64>, f64> {
    let xs: Vec<f64> = costs.iter().map(|&c| -tau * c).collect();
    let top = if shift && !xs.is_empty() {
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let f = (x - top).exp();
        if !(f >= f64::MIN_POSITIVE) || !f.is_finite() {
            return Err(x - top);
        }
        out.push(f);
    }
    Ok(out)
}

/// Builds the evolution tensor of site `p` with the given labels. Bonds of
/// dimension 1 are still present when the site has them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn evolution_tensor(
    model: &Model,
    layout: &Layout,
    p: usize,
    fixed_in: bool,
    tau: f64,
    shift: bool,
    labels: &Labels,
) -> Result<Tensor> {
    let last = p + 1 == layout.end;
    let entries = layout.evolution_entries(model, p, fixed_in, last);
    let costs: Vec<f64> = entries.iter().map(|e| e.3).collect();
    let factors = exponentiate(&costs, tau, shift).map_err(|_| SolveError::Underflow { iteration: 0, tau })?;
    let d = model.d();
    let mut names = vec![labels.phys_in.to_string(), labels.phys_out.to_string()];
    let mut dims = vec![d, d];
    if !fixed_in {
        names.push(labels.bond_in.to_string());
        dims.push(layout.bond_size(model, p - 1));
    }
    if !last {
        names.push(labels.bond_out.to_string());
        dims.push(layout.bond_size(model, p));
    }
    let data = entries
        .iter()
        .zip(factors)
        .map(|(&(i, x, o, _), f)| {
            let mut c = vec![x, x];
            c.extend(i);
            c.extend(o);
            (c, f)
        })
        .collect();
    Ok(Tensor::sparse_owned(names, dims, data)?)
}

fn evolution_layer(problem: &TourProblem, tau: f64, site: usize) -> Result<(Model, Layout, Tensor)> {
    let model = Model::compile(problem, None)?;
    let layout = Layout::new(&model, model.start, model.base_known.clone());
    let p = model.start + site;
    if p >= model.end {
        return Err(SolveError::Layer(format!("site {site} out of range")));
    }
    let t = evolution_tensor(&model, &layout, p, p == layout.start, tau, false, &STD_LABELS)?;
    Ok((model, layout, t))
}

fn split_bonds(model: &Model, layout: &Layout, p: usize, mut t: Tensor) -> Result<Tensor> {
    if p > layout.start {
        let dims = layout.bond_dims(model, p - 1);
        let names = layout.component_names(model, true);
        let parts: Vec<(&str, usize)> = names.iter().map(|s| s.as_str()).zip(dims).collect();
        t = t.split_label("k", &parts)?;
    }
    if p + 1 < layout.end {
        let dims = layout.bond_dims(model, p);
        let names = layout.component_names(model, false);
        let parts: Vec<(&str, usize)> = names.iter().map(|s| s.as_str()).zip(dims).collect();
        t = t.split_label("l", &parts)?;
    }
    Ok(t)
}

/// Imaginary-time evolution MPO tensor `S` of free site `site` (unshifted
/// factors `exp(-tau * cost)`). The node bond has dimension `N̂`.
pub fn build_s_layer(problem: &TourProblem, tau: f64, site: usize) -> Result<Tensor> {
    if problem.variant.is_bottleneck() || problem.variant == Variant::Nmtsp {
        return Err(ModelError::Config("S layers serve additive pairwise objectives".into()).into());
    }
    if tau < 0.0 {
        return Err(ModelError::Config("tau must be nonnegative for minimisation".into()).into());
    }
    let (model, layout, t) = evolution_layer(problem, tau, site)?;
    split_bonds(&model, &layout, model.start + site, t)
}

/// Memory MPO tensor `S(K)` of free site `site`, with `K` node bonds
/// `k0..k{K-1}` / `l0..l{K-1}`.
pub fn build_sk_layer(problem: &TourProblem, tau: f64, site: usize) -> Result<Tensor> {
    if problem.variant != Variant::Nmtsp {
        return Err(ModelError::Config("S(K) layers serve the memory variant".into()).into());
    }
    let (model, layout, t) = evolution_layer(problem, tau, site)?;
    split_bonds(&model, &layout, model.start + site, t)
}

/// Bottleneck MPO `Z` for every free site. The bond splits into a node part
/// and a running extreme cost `q` of dimension `M`. For the max-min variant
/// `tau` is taken as a magnitude and applied with negative sign.
pub fn build_z_layers(problem: &TourProblem, tau: f64) -> Result<Vec<Tensor>> {
    if !problem.variant.is_bottleneck() {
        return Err(ModelError::Config("Z layers serve the bottleneck variants".into()).into());
    }
    let model = Model::compile(problem, None)?;
    let layout = Layout::new(&model, model.start, model.base_known.clone());
    let tau_eff = effective_tau(problem, tau);
    (model.start..model.end)
        .map(|p| {
            let t = evolution_tensor(&model, &layout, p, p == layout.start, tau_eff, false, &STD_LABELS)?;
            split_bonds(&model, &layout, p, t)
        })
        .collect()
}

/// Sign convention: the max-min objective is maximised.
pub(crate) fn effective_tau(problem: &TourProblem, tau: f64) -> f64 {
    if problem.variant == Variant::BtspMaxmin {
        -tau.abs()
    } else {
        tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CostModel;

    fn contract_chain(tensors: &[Tensor], assignment: &[usize]) -> f64 {
        // evaluates a chain on one basis assignment by explicit bond sums
        let n = tensors.len();
        let mut vec: Vec<f64> = vec![1.0];
        for (s, t) in tensors.iter().enumerate() {
            let x = assignment[s];
            let has_in = t.labels().iter().any(|l| l == "k");
            let has_out = t.labels().iter().any(|l| l == "l");
            let out_dim = if has_out { t.dim_of("l").unwrap() } else { 1 };
            let mut next = vec![0.0; out_dim];
            for (kin, &w) in vec.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (lo, nx) in next.iter_mut().enumerate() {
                    let mut c = vec![x, x];
                    if has_in {
                        c.push(kin);
                    }
                    if has_out {
                        c.push(lo);
                    }
                    *nx += w * t.get(&c).unwrap();
                }
            }
            vec = next;
            let _ = n;
        }
        vec.iter().sum()
    }

    fn assignments(d: usize, len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|a| {
                    (0..d).map(move |x| {
                        let mut b = a.clone();
                        b.push(x);
                        b
                    })
                })
                .collect();
        }
        out
    }

    fn f_chain(a: usize, len: usize, d: usize) -> Vec<Tensor> {
        (0..len)
            .map(|s| build_f_layer(a, SitePosition::of(s, len), d).unwrap())
            .collect()
    }

    #[test]
    fn plus_vectors() {
        assert_eq!(build_plus(&[true; 3]).unwrap().to_vec(), vec![1.0; 3]);
        assert_eq!(build_plus(&[true, false, true]).unwrap().to_vec(), vec![1.0, 0.0, 1.0]);
        assert!(build_plus(&[false, false]).is_err());
    }

    #[test]
    fn interior_filter_has_nineteen_nonzeros() {
        let t = build_f_layer(3, SitePosition::Interior, 10).unwrap();
        assert_eq!(t.len(), 400);
        assert_eq!(t.nnz(), 19);
        assert_eq!(t.dims(), [10, 10, 2, 2]);
    }

    #[test]
    fn first_and_last_filter_tables() {
        let f = build_f_layer(1, SitePosition::First, 3).unwrap();
        assert_eq!(f.dims(), [3, 3, 2]);
        assert_eq!(f.get(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(f.get(&[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(f.get(&[1, 1, 0]).unwrap(), 0.0);
        let l = build_f_layer(1, SitePosition::Last, 3).unwrap();
        assert_eq!(l.get(&[1, 1, 0]).unwrap(), 1.0);
        assert_eq!(l.get(&[1, 1, 1]).unwrap(), 0.0);
        assert_eq!(l.get(&[0, 0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn single_chain_keeps_states_with_a_once() {
        let chain = f_chain(0, 3, 3);
        for x in assignments(3, 3) {
            let once = x.iter().filter(|&&v| v == 0).count() == 1;
            assert_eq!(contract_chain(&chain, &x), if once { 1.0 } else { 0.0 }, "{x:?}");
        }
    }

    #[test]
    fn all_chains_give_levi_civita_squared() {
        let chains: Vec<Vec<Tensor>> = (0..3).map(|a| f_chain(a, 3, 3)).collect();
        let surviving = assignments(3, 3)
            .into_iter()
            .filter(|x| chains.iter().all(|c| contract_chain(c, x) == 1.0))
            .count();
        assert_eq!(surviving, 6);
    }

    #[test]
    fn bounds_with_one_one_equal_plain_filter() {
        for pos in [SitePosition::First, SitePosition::Interior, SitePosition::Last] {
            assert_eq!(
                build_f_bounds_layer(2, 1, 1, pos, 4).unwrap(),
                build_f_layer(2, pos, 4).unwrap()
            );
        }
    }

    #[test]
    fn bounds_one_two_over_three_steps() {
        let chain: Vec<Tensor> = (0..3)
            .map(|s| build_f_bounds_layer(0, 1, 2, SitePosition::of(s, 3), 2).unwrap())
            .collect();
        for x in assignments(2, 3) {
            let zeros = x.iter().filter(|&&v| v == 0).count();
            let want = (1..=2).contains(&zeros);
            assert_eq!(contract_chain(&chain, &x) == 1.0, want, "{x:?}");
        }
        assert!(build_f_bounds_layer(0, 0, 0, SitePosition::First, 2).is_err());
    }

    #[test]
    fn unconstrained_bounds_pass_everything() {
        let chain: Vec<Tensor> = (0..3)
            .map(|s| build_f_bounds_layer(0, 0, 3, SitePosition::of(s, 3), 2).unwrap())
            .collect();
        assert!(assignments(2, 3).iter().all(|x| contract_chain(&chain, x) == 1.0));
    }

    #[test]
    fn group_filters() {
        assert_eq!(
            build_group_filter(&[2], SitePosition::Interior, 4).unwrap(),
            build_f_layer(2, SitePosition::Interior, 4).unwrap()
        );
        let g0: Vec<Tensor> = (0..2).map(|s| build_group_filter(&[0, 1], SitePosition::of(s, 2), 4).unwrap()).collect();
        let g1: Vec<Tensor> = (0..2).map(|s| build_group_filter(&[2, 3], SitePosition::of(s, 2), 4).unwrap()).collect();
        let n = assignments(4, 2)
            .iter()
            .filter(|x| contract_chain(&g0, x) == 1.0 && contract_chain(&g1, x) == 1.0)
            .count();
        assert_eq!(n, 8);
        let all = build_group_filter(&[0, 1, 2, 3], SitePosition::Only, 4).unwrap();
        assert_eq!(all.nnz(), 4);
    }

    #[test]
    fn precedence_filters() {
        assert_eq!(
            build_precedence_filter(1, &[], SitePosition::Interior, 3).unwrap().nnz(),
            build_f_layer(1, SitePosition::Interior, 3).unwrap().nnz()
        );
        let perms: Vec<Vec<usize>> = assignments(3, 3)
            .into_iter()
            .filter(|x| (0..3).all(|a| contract_chain(&f_chain(a, 3, 3), x) == 1.0))
            .collect();
        let rule: Vec<Tensor> = (0..3)
            .map(|s| build_precedence_filter(0, &[2], SitePosition::of(s, 3), 3).unwrap())
            .collect();
        let ok: Vec<&Vec<usize>> = perms.iter().filter(|x| contract_chain(&rule, x) == 1.0).collect();
        assert_eq!(ok.len(), 3);
        for x in ok {
            let p0 = x.iter().position(|&v| v == 0).unwrap();
            let p2 = x.iter().position(|&v| v == 2).unwrap();
            assert!(p0 < p2);
        }
        let r01: Vec<Tensor> = (0..3).map(|s| build_precedence_filter(0, &[1], SitePosition::of(s, 3), 3).unwrap()).collect();
        let r12: Vec<Tensor> = (0..3).map(|s| build_precedence_filter(1, &[2], SitePosition::of(s, 3), 3).unwrap()).collect();
        let ok: Vec<&Vec<usize>> = perms
            .iter()
            .filter(|x| contract_chain(&r01, x) == 1.0 && contract_chain(&r12, x) == 1.0)
            .collect();
        assert_eq!(ok, vec![&vec![0, 1, 2]]);
    }

    fn tsp4() -> TourProblem {
        let m: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| ((i * 3 + j * 5) % 7) as f64 + 1.0).collect())
            .collect();
        TourProblem::tsp(&m).unwrap()
    }

    #[test]
    fn s_layer_zero_tau_is_all_ones() {
        let p = tsp4();
        for site in 0..3 {
            let s = build_s_layer(&p, 0.0, site).unwrap();
            assert!(s.entries().iter().all(|(_, v)| *v == 0.0 || *v == 1.0));
        }
        let first = build_s_layer(&p, 0.0, 0).unwrap();
        assert_eq!(first.dims(), [3, 3, 3]);
        let mid = build_s_layer(&p, 0.0, 1).unwrap();
        assert_eq!(mid.dims(), [3, 3, 3, 3]);
        assert_eq!(mid.nnz(), 9);
    }

    #[test]
    fn s_layer_interior_value() {
        // edge 0 -> 1 costs 2 at the second step
        let mut m = vec![vec![5.0; 3]; 3];
        m[0][1] = 2.0;
        let cm = CostModel::new(3, 3).with_step_matrix(&m).unwrap();
        let p = TourProblem::new(Variant::Tsp, cm).with_returning(false);
        let s = build_s_layer(&p, 0.5, 1).unwrap();
        assert_eq!(s.labels(), ["i", "j", "k", "l"]);
        let v = s.get(&[1, 1, 0, 1]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn z_layers_shapes() {
        let m: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| ((i + 2 * j) % 5 + 1) as f64).collect())
            .collect();
        let cm = CostModel::new(4, 4).with_step_matrix(&m).unwrap();
        let p = TourProblem::new(Variant::BtspMinmax, cm);
        let zs = build_z_layers(&p, 1.0).unwrap();
        assert_eq!(zs.len(), 3);
        assert_eq!(zs[1].labels(), ["i", "j", "k0", "q", "l0", "p"]);
        assert_eq!(zs[1].dim_of("q"), Some(5));
        let ones = vec![vec![1.0; 3]; 3];
        let cm = CostModel::new(3, 3).with_step_matrix(&ones).unwrap();
        let p = TourProblem::new(Variant::BtspMinmax, cm);
        let zs = build_z_layers(&p, 1.0).unwrap();
        assert_eq!(zs[0].dim_of("p"), Some(1));
    }

    #[test]
    fn sk_layer_has_k_bonds() {
        let n = 4;
        let cm = CostModel::new(n, n)
            .with_memory(2, (0..n * n * n * n).map(|k| (k % 5) as f64).collect())
            .unwrap();
        let mut p = TourProblem::new(Variant::Nmtsp, cm).with_returning(false);
        p.memory_depth = Some(2);
        let t = build_sk_layer(&p, 0.0, 2).unwrap();
        assert_eq!(t.labels(), ["i", "j", "k0", "k1", "l0", "l1"]);
        assert!(t.dims()[2..].iter().all(|&d| d == 4));
        assert!(t.entries().iter().all(|(_, v)| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn anchor_reduces_domain() {
        let m = Model::compile(&tsp4(), None).unwrap();
        assert!(anchor_eligible(&m.problem));
        assert_eq!(m.domain, vec![0, 1, 2]);
        assert_eq!((m.start, m.end), (0, 3));
        assert_eq!(m.chains.len(), 3);
    }
}
