//! The recursive approximation algorithm over a rooted decomposition.
//!
//! Edge-capacitated instances take any tree decomposition; node-capacitated
//! instances require a path decomposition. Each call splits the input into
//! connected pieces and, per piece, computes `ℓ₂` (largest parent adhesion
//! of a bad node) and `ℓ₁` (same over unsafe nodes):
//!
//! - `ℓ₂ = 0`: round once with `S` the root bag;
//! - `ℓ₁ < ℓ₂`: the topmost bad nodes with adhesion size `ℓ₂` are safe; either
//!   their inside flow is large and is rounded towards their adhesions, or
//!   it is dropped and the call repeats with smaller `ℓ₂`;
//! - `ℓ₁ = ℓ₂`: a minimum cut at the lowest unsafe node splits the graph and
//!   both sides recurse.

use std::time::Instant;

use log::{debug, info};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::decomp::{preprocess, RootedDecomposition};
use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::flowkit::{extract_violating_set, is_good, is_safe, levels, prefix_truncate_to, Levels, Safety};
use crate::graph::{normalize_terminals, Instance, Mode, VertexSet};
use crate::relax::{fractional_solution, DEFAULT_EXACT_LIMIT};
use crate::rounding::{route_via_small_cut, RoundingInput, StageReport};
use crate::routing::Routing;
use crate::scalar::{qi, Rational, Scalar};

/// Factor between the audited rounding constant `1/(120·d)` and the
/// end-to-end constant: `c_impl = 4 · 120 · d`.
pub const END_TO_END_FACTOR: u64 = 480;
/// Constant of the edge-capacitated guarantee `|f| / (144 r³)`.
pub const EDP_CONSTANT: u64 = 144;

#[derive(Clone, Debug)]
pub struct RouterConfig {
    /// Width bound: every bag has at most `r` vertices. `None` uses width + 1.
    pub r: Option<usize>,
    pub exact_limit: usize,
    /// Add pairs greedily along residual paths after rounding.
    pub augment: bool,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            r: None,
            exact_limit: DEFAULT_EXACT_LIMIT,
            augment: true,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RecursionStats {
    pub calls: usize,
    pub base_cases: usize,
    pub unequal_steps: usize,
    pub unequal_rounded: usize,
    pub equal_steps: usize,
    pub max_depth: usize,
    /// Largest realized cluster size over all roundings.
    pub d_max: usize,
    pub roundings: Vec<StageReport>,
}

impl RecursionStats {
    /// `c_impl = 480 · d_max` (at least `480 · 3`).
    pub fn c_impl(&self) -> u64 {
        END_TO_END_FACTOR * self.d_max.max(crate::rounding::CLUSTER_SIZE) as u64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub width: usize,
    pub lp_objective: f64,
    pub lp_exact: bool,
    pub lp_variables: usize,
    #[serde(serialize_with = "ser_q")]
    pub flow: Rational,
    pub l1: usize,
    pub l2: usize,
    /// Pairs routed by the recursion, before the final greedy augmentation.
    pub routed_core: usize,
    pub routed: usize,
    /// `|f|(1 - 1/r)^(ℓ₁+ℓ₂) / (C r³)` with `C = 144` for edge capacities and `c_impl` otherwise.
    #[serde(serialize_with = "ser_q")]
    pub bound: Rational,
    pub constant: u64,
    pub c_impl: u64,
    /// The same bound with `c_impl`.
    #[serde(serialize_with = "ser_q")]
    pub impl_bound: Rational,
    pub stats: RecursionStats,
    pub ms: f64,
}

fn ser_q<S: serde::Serializer>(v: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl SolveReport {
    pub fn bound_holds(&self) -> bool {
        qi(self.routed_core as u64) >= self.bound && qi(self.routed_core as u64) >= self.impl_bound
    }
}

/// `|f| (1 - 1/r)^ℓ / (c r³)`.
pub fn guarantee_bound(flow: &Rational, r: usize, l: usize, c: u64) -> Rational {
    let r = r.max(1) as u64;
    let mut decay = Rational::one();
    let step = qi(r - 1) / qi(r);
    for _ in 0..l {
        decay *= step.clone();
    }
    flow.clone() * decay / (qi(c) * qi(r * r * r))
}

struct Ctx {
    r: usize,
    mode: Mode,
    depth_limit: usize,
    stats: RecursionStats,
}

impl Ctx {
    fn round(
        &mut self,
        inst: &Instance,
        f: &PathFlow<Rational>,
        g: &PathFlow<Rational>,
        s: &VertexSet,
        alpha: Rational,
    ) -> Result<Routing> {
        let input = RoundingInput {
            instance: inst,
            f,
            g,
            s,
            alpha,
            augment: false,
        };
        let (routing, report) = route_via_small_cut(&input)?;
        self.stats.d_max = self.stats.d_max.max(report.d_real);
        self.stats.roundings.push(report);
        Ok(routing)
    }

    fn solve(&mut self, inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, depth: usize) -> Result<Routing> {
        self.stats.calls += 1;
        self.stats.max_depth = self.stats.max_depth.max(depth);
        if depth > self.depth_limit {
            return Err(Error::Contract(format!("recursion deeper than {}", self.depth_limit)));
        }
        let mut routing = Routing::new();
        if f.is_empty() {
            return Ok(routing);
        }
        for piece in preprocess(inst, d, f) {
            if piece.flow.is_empty() {
                continue;
            }
            let part = self.solve_piece(&piece.instance, &piece.decomposition, &piece.flow, depth)?;
            routing.merge(part)?;
        }
        routing.audit(inst)?;
        Ok(routing)
    }

    fn solve_piece(
        &mut self,
        inst: &Instance,
        d: &RootedDecomposition,
        f: &PathFlow<Rational>,
        depth: usize,
    ) -> Result<Routing> {
        let lv = levels(inst, d, f, self.r);
        if lv.l1 > lv.l2 {
            return Err(Error::Contract(format!("l1 = {} exceeds l2 = {}", lv.l1, lv.l2)));
        }
        debug!("depth {depth}: |V|={} |f|={} l1={} l2={}", inst.graph.num_vertices(), f.value(), lv.l1, lv.l2);
        if lv.l2 == 0 {
            self.base_case(inst, d, f)
        } else if lv.l1 < lv.l2 {
            self.step_unequal(inst, d, f, lv, depth)
        } else {
            self.step_equal(inst, d, f, lv, depth)
        }
    }

    fn base_case(&mut self, inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>) -> Result<Routing> {
        self.stats.base_cases += 1;
        let s = d.bag(d.root()).clone();
        let all = inst.graph.vertex_set();
        let g = prefix_truncate_to(f, &all, &s)?;
        let (g, alpha) = match self.mode {
            Mode::Edp => (g, Rational::one()),
            Mode::Ndp => (g.scale(&Rational::from_ratio(1, 2)), qi(2)),
        };
        self.round(inst, f, &g, &s, alpha)
    }

    fn step_unequal(
        &mut self,
        inst: &Instance,
        d: &RootedDecomposition,
        f: &PathFlow<Rational>,
        lv: Levels,
        depth: usize,
    ) -> Result<Routing> {
        self.stats.unequal_steps += 1;
        let tops = topmost_bad(d, f, lv.l2);
        if self.mode == Mode::Ndp && tops.len() > 1 {
            return Err(Error::Contract("several topmost bad nodes in a path decomposition".into()));
        }
        let mut inside: Vec<PathFlow<Rational>> = Vec::with_capacity(tops.len());
        let mut total = Rational::zero();
        for &t in &tops {
            let fi = f.restrict_to_vertices(&d.alpha(t));
            total += fi.value();
            inside.push(fi);
        }
        let threshold = f.value() / qi(self.r as u64);
        if total > threshold {
            self.stats.unequal_rounded += 1;
            let mut routing = Routing::new();
            for (&t, fi) in tops.iter().zip(&inside) {
                if fi.is_empty() {
                    continue;
                }
                let g = match is_safe(inst, d, t, f, self.r) {
                    Safety::Safe(g) => g,
                    Safety::Unsafe { achieved, required } => {
                        return Err(Error::Contract(format!(
                            "topmost bad node {} is unsafe ({achieved} < {required})",
                            d.label(t)
                        )))
                    }
                };
                let sub = inst.with_graph(d.cone_graph(&inst.graph, t));
                let part = self.round(&sub, fi, &g, d.sigma(t), qi(4 * self.r as u64))?;
                routing.merge(part)?;
            }
            routing.audit(inst)?;
            return Ok(routing);
        }
        let mut dropped = PathFlow::new();
        for fi in inside {
            dropped = dropped.add(&fi);
        }
        let rest = f.subtract(&dropped)?;
        self.solve(inst, d, &rest, depth + 1)
    }

    fn step_equal(
        &mut self,
        inst: &Instance,
        d: &RootedDecomposition,
        f: &PathFlow<Rational>,
        lv: Levels,
        depth: usize,
    ) -> Result<Routing> {
        self.stats.equal_steps += 1;
        let sp = split_at_unsafe(inst, d, f, self.r, lv.l1)?;
        let mut routing = self.solve(&sp.inner.0, &sp.inner.1, &sp.inner.2, depth + 1)?;
        let r2 = self.solve(&sp.outer.0, &sp.outer.1, &sp.outer.2, depth + 1)?;
        routing.merge(r2)?;
        routing.audit(inst)?;
        Ok(routing)
    }
}

/// A sub-instance with its restricted decomposition and flow.
pub type Part = (Instance, RootedDecomposition, PathFlow<Rational>);

/// The two sides of a minimum cut at the lowest unsafe node.
#[derive(Clone, Debug)]
pub struct Split {
    pub node: usize,
    /// `G[U]`.
    pub inner: Part,
    /// `G - U` for edge capacities, `G - N[U]` for node capacities.
    pub outer: Part,
    pub lost: Rational,
}

/// Splits at the lowest unsafe node with adhesion size `l1`. Fails if the
/// flow cut by the split exceeds `|f₁|/r`.
pub fn split_at_unsafe(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
    l1: usize,
) -> Result<Split> {
    let t0 = lowest_unsafe(inst, d, f, r, l1)
        .ok_or_else(|| Error::Contract(format!("no unsafe node with adhesion size {l1}")))?;
    let vs = extract_violating_set::<Rational>(inst, d, t0, f, r)?;
    let g = &inst.graph;
    let side1 = vs.u.clone();
    let removed: VertexSet = match inst.mode {
        Mode::Edp => vs.u.clone(),
        Mode::Ndp => vs.u.union(&vs.boundary).copied().collect(),
    };
    let side2: VertexSet = g.vertices().filter(|v| !removed.contains(v)).collect();
    let f1 = f.restrict_to_vertices(&side1);
    let f2 = f.restrict_to_vertices(&side2);
    let lost = f.value() - f1.value() - f2.value();
    let allowed = f1.value() / qi(r as u64);
    if lost > allowed {
        return Err(Error::Contract(format!("split loses {lost} > |f1|/r = {allowed}")));
    }
    let i1 = inst.with_graph(g.induced_subgraph(&side1)?);
    let i2 = inst.with_graph(g.induced_subgraph(&side2)?);
    Ok(Split {
        node: t0,
        inner: (i1, d.restrict(&side1), f1),
        outer: (i2, d.restrict(&side2), f2),
        lost,
    })
}

/// Topmost bad non-root nodes with parent adhesion of size `l2`, found by a
/// root-down search that stops at the first such node on every branch.
pub fn topmost_bad(d: &RootedDecomposition, f: &PathFlow<Rational>, l2: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = d.children(d.root()).iter().rev().copied().collect();
    while let Some(t) = stack.pop() {
        if d.sigma(t).len() == l2 && !is_good(t, f, d) {
            out.push(t);
            continue;
        }
        stack.extend(d.children(t).iter().rev().copied());
    }
    out
}

/// Deepest unsafe node with adhesion size `l1`; ties go to the smallest label.
pub fn lowest_unsafe(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
    l1: usize,
) -> Option<usize> {
    d.nodes()
        .filter(|&t| d.sigma(t).len() == l1 && !is_good(t, f, d))
        .filter(|&t| !is_safe(inst, d, t, f, r).is_safe())
        .max_by_key(|&t| (d.depth(t), std::cmp::Reverse(d.label(t))))
}

/// Largest `(ℓ₁, ℓ₂)` over the connected pieces of the input.
pub fn input_levels(inst: &Instance, d: &RootedDecomposition, f: &PathFlow<Rational>, r: usize) -> Levels {
    let mut out = Levels::default();
    for piece in preprocess(inst, d, f) {
        if piece.flow.is_empty() {
            continue;
        }
        let lv = levels(&piece.instance, &piece.decomposition, &piece.flow, r);
        out.l1 = out.l1.max(lv.l1);
        out.l2 = out.l2.max(lv.l2);
    }
    out
}

/// Runs the recursion for a given feasible flow. Pairs must form a matching.
pub fn route_flow(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
) -> Result<(Routing, RecursionStats)> {
    let width = d.validate(&inst.graph)?;
    if r <= width {
        return Err(Error::WidthExceeded {
            node: 0,
            size: width + 1,
            bound: r,
        });
    }
    if inst.mode == Mode::Ndp && !d.is_path() {
        return Err(Error::NotPath);
    }
    if !inst.pairs.is_matching() {
        return Err(Error::Input("terminal pairs do not form a matching".into()));
    }
    f.check_feasible(&inst.graph, inst.mode)
        .map_err(|v| Error::Input(format!("flow is infeasible: {v}")))?;
    f.flow_value()?;
    let mut ctx = Ctx {
        r,
        mode: inst.mode,
        depth_limit: 4 * (inst.graph.num_vertices() + 2 * r) + 64,
        stats: RecursionStats::default(),
    };
    let routing = ctx.solve(inst, d, f, 0)?;
    routing.audit(inst)?;
    Ok((routing, ctx.stats))
}

fn report_for(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
    routing_core: usize,
    routing: usize,
    stats: RecursionStats,
) -> SolveReport {
    let lv = input_levels(inst, d, f, r);
    let flow = f.value();
    let c_impl = stats.c_impl();
    let constant = match inst.mode {
        Mode::Edp => EDP_CONSTANT,
        Mode::Ndp => c_impl,
    };
    SolveReport {
        mode: inst.mode,
        n: inst.graph.num_vertices(),
        m: inst.graph.num_edges(),
        k: inst.k(),
        r,
        width: d.width(),
        lp_objective: flow.approx(),
        lp_exact: true,
        lp_variables: 0,
        bound: guarantee_bound(&flow, r, lv.l1 + lv.l2, constant),
        impl_bound: guarantee_bound(&flow, r, lv.l1 + lv.l2, c_impl),
        flow,
        l1: lv.l1,
        l2: lv.l2,
        routed_core: routing_core,
        routed: routing,
        constant,
        c_impl,
        stats,
        ms: 0.0,
    }
}

fn solve_with_flow(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
    augment: bool,
) -> Result<(Routing, SolveReport)> {
    let (mut routing, stats) = route_flow(inst, d, f, r)?;
    let core = routing.len();
    if augment {
        let all: Vec<usize> = (0..inst.k()).collect();
        routing.augment_greedily(inst, &all);
        routing.audit(inst)?;
    }
    let report = report_for(inst, d, f, r, core, routing.len(), stats);
    Ok((routing, report))
}

/// Edge-capacitated routing from a given flow on a tree decomposition.
pub fn solve_edp(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
) -> Result<(Routing, SolveReport)> {
    if inst.mode != Mode::Edp {
        return Err(Error::Input("instance is node-capacitated".into()));
    }
    solve_with_flow(inst, d, f, r, true)
}

/// Node-capacitated routing from a given flow on a path decomposition.
pub fn solve_ndp(
    inst: &Instance,
    d: &RootedDecomposition,
    f: &PathFlow<Rational>,
    r: usize,
) -> Result<(Routing, SolveReport)> {
    if inst.mode != Mode::Ndp {
        return Err(Error::Input("instance is edge-capacitated".into()));
    }
    solve_with_flow(inst, d, f, r, true)
}

/// A normalized instance with its decomposition and fractional solution.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub norm: crate::graph::Normalized,
    pub decomposition: RootedDecomposition,
    /// Width of the input decomposition.
    pub width: usize,
    pub r: usize,
    pub fractional: crate::relax::Fractional,
}

/// Validates the input, replaces shared terminals by leaves (extending the
/// decomposition) and solves the relaxation. `r` is raised to the width of
/// the extended decomposition plus one if necessary.
pub fn prepare(inst: &Instance, d: &RootedDecomposition, r: Option<usize>, exact_limit: usize) -> Result<Prepared> {
    let width = d.validate(&inst.graph)?;
    if inst.mode == Mode::Ndp && !d.is_path() {
        return Err(Error::NotPath);
    }
    let norm = normalize_terminals(inst);
    let mut dn = d.clone();
    for &(leaf, host) in &norm.leaves {
        dn = dn.attach_leaf(leaf, host)?;
    }
    let width_n = dn.validate(&norm.instance.graph)?;
    let r = r.unwrap_or(width + 1).max(width_n + 1);
    let fractional = fractional_solution(&norm.instance, exact_limit)?;
    Ok(Prepared {
        norm,
        decomposition: dn,
        width,
        r,
        fractional,
    })
}

/// End to end: normalize terminals, solve the relaxation, round, and map the
/// routing back to the input instance.
pub fn solve(inst: &Instance, d: &RootedDecomposition, cfg: &RouterConfig) -> Result<(Routing, SolveReport)> {
    let start = Instant::now();
    let p = prepare(inst, d, cfg.r, cfg.exact_limit)?;
    let frac = &p.fractional;
    let (routing_n, mut report) = solve_with_flow(&p.norm.instance, &p.decomposition, &frac.flow, p.r, cfg.augment)?;
    let routing = routing_n.denormalize(&p.norm);
    routing.audit(inst)?;
    report.n = inst.graph.num_vertices();
    report.m = inst.graph.num_edges();
    report.width = p.width;
    report.lp_objective = frac.objective;
    report.lp_exact = frac.exact;
    report.lp_variables = frac.variables;
    report.ms = start.elapsed().as_secs_f64() * 1e3;
    info!(
        "solved: lp={:.4} |f|={} r={} l1={} l2={} routed={} (core {}) c_impl={}",
        report.lp_objective, report.flow, p.r, report.l1, report.l2, report.routed, report.routed_core, report.c_impl
    );
    Ok((routing, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CapGraph;
    use crate::scalar::q;

    #[test]
    fn bound_formula() {
        assert_eq!(guarantee_bound(&qi(1), 2, 0, 144), q(1, 144 * 8));
        assert_eq!(guarantee_bound(&qi(8), 2, 2, 1), q(1, 4));
    }

    #[test]
    fn single_pair_path() {
        let mut g = CapGraph::new(4);
        for v in 0..3 {
            g.add_edge(v, v + 1, 1).unwrap();
        }
        let inst = Instance::new(g, vec![(0, 3)], Mode::Edp).unwrap();
        let d = RootedDecomposition::path((0..3).map(|i| [i, i + 1].into_iter().collect()).collect()).unwrap();
        let (r, rep) = solve(&inst, &d, &RouterConfig::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(rep.routed_core, 1);
        assert!(rep.bound_holds());
    }

    #[test]
    fn empty_flow_routes_only_by_augmentation() {
        let mut g = CapGraph::new(2);
        g.add_edge(0, 1, 1).unwrap();
        let inst = Instance::new(g, vec![(0, 1)], Mode::Edp).unwrap();
        let d = RootedDecomposition::path(vec![[0, 1].into_iter().collect()]).unwrap();
        let (r, rep) = solve_edp(&inst, &d, &PathFlow::new(), 2).unwrap();
        assert_eq!(rep.routed_core, 0);
        assert_eq!(r.len(), 1);
        assert_eq!(rep.routed, 1);
    }

    #[test]
    fn ndp_requires_path_decomposition() {
        let mut g = CapGraph::with_node_caps(4, 1);
        for v in 1..4 {
            g.add_edge(0, v, 1).unwrap();
        }
        let inst = Instance::new(g, vec![(1, 2)], Mode::Ndp).unwrap();
        let bags: Vec<VertexSet> = vec![[0].into(), [0, 1].into(), [0, 2].into(), [0, 3].into()];
        let d = RootedDecomposition::new(bags, vec![None, Some(0), Some(0), Some(0)]).unwrap();
        assert!(matches!(solve(&inst, &d, &RouterConfig::default()), Err(Error::NotPath)));
    }

    #[test]
    fn ndp_star_routes_two_pairs() {
        let mut g = CapGraph::with_node_caps(5, 1);
        g.set_node_cap(0, 2).unwrap();
        for v in 1..5 {
            g.add_edge(0, v, 1).unwrap();
        }
        let inst = Instance::new(g, vec![(1, 2), (3, 4)], Mode::Ndp).unwrap();
        let bags: Vec<VertexSet> = (1..5).map(|v| [0, v].into()).collect();
        let d = RootedDecomposition::path(bags).unwrap();
        let (r, rep) = solve(&inst, &d, &RouterConfig::default()).unwrap();
        assert_eq!(r.len(), 2);
        assert!(rep.routed_core >= 1);
        assert!(rep.bound_holds());
    }

    #[test]
    fn grid_routes_one_pair() {
        let inst = crate::gen::gen_grid_gap(3);
        let d = crate::decomp::heuristic_decomposition(&inst.graph, false);
        let cfg = RouterConfig {
            augment: false,
            ..RouterConfig::default()
        };
        let (r, rep) = solve(&inst, &d, &cfg).unwrap();
        assert!(rep.flow >= q(3, 2));
        assert!(!r.is_empty());
        assert!(rep.bound_holds());
    }
}
