//! Time-varying communication graphs and the consensus weights built on them.
//!
//! A [`Digraph`] stores in-neighborhoods: `j` is an in-neighbor of `i` when
//! agent `j` can send to agent `i`. Every node is its own in-neighbor.
//! Schedules are periodic; round `nu` uses `graphs[nu % period]`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use petgraph::algo::kosaraju_scc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default lower bound on the nonzero consensus weights.
pub const THETA_MIN: f64 = 0.01;
/// Tolerance on the row and column sums of a weight matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    in_nbrs: Vec<Vec<usize>>,
}

impl Digraph {
    /// Graph with `n` nodes and only self-loops.
    pub fn empty(n: usize) -> Self {
        Self {
            in_nbrs: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.in_nbrs.len()
    }

    /// Add the link `from -> to`.
    pub fn add_edge(&mut self, from: usize, to: usize) {
        let nbrs = &mut self.in_nbrs[to];
        if let Err(pos) = nbrs.binary_search(&from) {
            nbrs.insert(pos, from);
        }
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        self.add_edge(a, b);
        self.add_edge(b, a);
    }

    /// Sorted in-neighborhood of `i`, including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_nbrs[i]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.in_nbrs[to].binary_search(&from).is_ok()
    }

    /// Number of neighbors other than the node itself.
    pub fn degree(&self, i: usize) -> usize {
        self.in_nbrs[i].len() - 1
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes()).all(|i| self.in_nbrs[i].iter().all(|&j| self.has_edge(i, j)))
    }

    pub fn union(&self, other: &Digraph) -> Digraph {
        let mut out = self.clone();
        for (to, nbrs) in other.in_nbrs.iter().enumerate() {
            for &from in nbrs {
                out.add_edge(from, to);
            }
        }
        out
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_nbrs
            .iter()
            .enumerate()
            .flat_map(|(to, nbrs)| nbrs.iter().map(move |&from| (from, to)))
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.num_nodes();
        if n <= 1 {
            return true;
        }
        let mut g = petgraph::graph::DiGraph::<(), ()>::with_capacity(n, n);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for (from, to) in self.edges() {
            if from != to {
                g.add_edge(nodes[from], nodes[to], ());
            }
        }
        kosaraju_scc(&g).len() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    StaticPath,
    StaticRing,
    StaticRandomGeometric,
    /// Undirected ring whose edges are dealt round-robin over `period` rounds.
    TvRingPartition,
    /// Directed cycle `0 -> 1 -> ... -> 0` present in the first round of every
    /// period; remaining rounds carry only self-loops.
    DirectedRing,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::StaticPath => "static_path",
            Self::StaticRing => "static_ring",
            Self::StaticRandomGeometric => "static_random_geometric",
            Self::TvRingPartition => "tv_ring_partition",
            Self::DirectedRing => "directed_ring",
        }
    }

    pub const ALL: [ScheduleKind; 5] = [
        Self::StaticPath,
        Self::StaticRing,
        Self::StaticRandomGeometric,
        Self::TvRingPartition,
        Self::DirectedRing,
    ];
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown graph kind `{s}`")))
    }
}

/// Parameters from which a schedule is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub agents: usize,
    /// Declared connectivity window B.
    pub window: usize,
    /// Number of distinct graphs in one period (only used by time-varying kinds).
    pub period: usize,
    pub seed: u64,
}

impl ScheduleSpec {
    pub fn new(kind: ScheduleKind, agents: usize) -> Self {
        Self {
            kind,
            agents,
            window: 1,
            period: 1,
            seed: 0,
        }
    }

    /// Default period and window for `kind`: two phases for the time-varying
    /// kinds, a single graph otherwise.
    pub fn preset(kind: ScheduleKind, agents: usize) -> Self {
        let phases = match kind {
            ScheduleKind::TvRingPartition | ScheduleKind::DirectedRing => 2,
            _ => 1,
        };
        Self {
            window: phases,
            period: phases,
            ..Self::new(kind, agents)
        }
    }
}

/// Every schedule configuration the tools offer for `agents` nodes.
pub fn shipped_schedules(agents: usize) -> Vec<ScheduleSpec> {
    let mut specs: Vec<ScheduleSpec> = ScheduleKind::ALL
        .iter()
        .map(|&k| ScheduleSpec::preset(k, agents))
        .collect();
    for kind in [ScheduleKind::TvRingPartition, ScheduleKind::DirectedRing] {
        specs.push(ScheduleSpec {
            window: 3,
            period: 3,
            ..ScheduleSpec::new(kind, agents)
        });
    }
    specs
}

/// How the consensus weights of a schedule are derived from its graphs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    Metropolis,
    /// `theta` on each permutation-cycle edge, the remainder on the self-loop.
    Cycle {
        theta: f64,
    },
}

#[derive(Debug, Clone)]
pub struct GraphSchedule {
    pub kind: ScheduleKind,
    pub window: usize,
    graphs: Vec<Digraph>,
    weighting: Weighting,
}

impl GraphSchedule {
    /// Wrap an explicit list of graphs; all must have the same node count.
    pub fn from_graphs(
        kind: ScheduleKind,
        graphs: Vec<Digraph>,
        window: usize,
        weighting: Weighting,
    ) -> Result<Self> {
        let n = graphs
            .first()
            .map(Digraph::num_nodes)
            .ok_or_else(|| Error::Schedule("schedule needs at least one graph".into()))?;
        if n == 0 || graphs.iter().any(|g| g.num_nodes() != n) {
            return Err(Error::Schedule(
                "graphs must share a positive node count".into(),
            ));
        }
        if window == 0 {
            return Err(Error::Schedule(
                "connectivity window must be at least 1".into(),
            ));
        }
        Ok(Self {
            kind,
            window,
            graphs,
            weighting,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.graphs[0].num_nodes()
    }

    pub fn period(&self) -> usize {
        self.graphs.len()
    }

    pub fn graphs(&self) -> &[Digraph] {
        &self.graphs
    }

    pub fn graph_at(&self, nu: usize) -> &Digraph {
        &self.graphs[nu % self.graphs.len()]
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    /// Weight matrices for one period, each checked against its graph.
    pub fn weights(&self, theta_min: f64) -> Result<Vec<WeightMatrix>> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(p, g)| {
                let w = match self.weighting {
                    Weighting::Metropolis => metropolis_weights(g)?,
                    Weighting::Cycle { theta } => cycle_weights(g, theta)?,
                };
                if !validate_weights(&w, g, theta_min) {
                    return Err(Error::Weights(format!(
                        "weights of phase {p} violate the pattern/stochasticity conditions"
                    )));
                }
                Ok(w)
            })
            .collect()
    }
}

fn ring(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => vec![],
        2 => vec![(0, 1)],
        _ => (0..n).map(|k| (k, (k + 1) % n)).collect(),
    }
}

fn random_geometric(n: usize, seed: u64) -> Digraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let nf = n.max(2) as f64;
    let mut radius = (2.0 * nf.ln() / nf).sqrt();
    loop {
        let mut g = Digraph::empty(n);
        for a in 0..n {
            for b in a + 1..n {
                let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
                if dx * dx + dy * dy <= radius * radius {
                    g.add_undirected(a, b);
                }
            }
        }
        // radius sqrt(2) covers the unit square, so this terminates
        if g.is_strongly_connected() {
            return g;
        }
        radius *= 1.1;
    }
}

/// Generate a periodic schedule that satisfies B-strong connectivity.
pub fn build_schedule(spec: &ScheduleSpec) -> Result<GraphSchedule> {
    let n = spec.agents;
    if n == 0 {
        return Err(Error::Schedule("need at least one agent".into()));
    }
    if spec.window == 0 || spec.period == 0 {
        return Err(Error::Schedule(
            "window and period must be at least 1".into(),
        ));
    }
    let (graphs, weighting) = match spec.kind {
        ScheduleKind::StaticPath => {
            let mut g = Digraph::empty(n);
            for k in 1..n {
                g.add_undirected(k - 1, k);
            }
            (vec![g], Weighting::Metropolis)
        }
        ScheduleKind::StaticRing => {
            let mut g = Digraph::empty(n);
            for (a, b) in ring(n) {
                g.add_undirected(a, b);
            }
            (vec![g], Weighting::Metropolis)
        }
        ScheduleKind::StaticRandomGeometric => {
            (vec![random_geometric(n, spec.seed)], Weighting::Metropolis)
        }
        ScheduleKind::TvRingPartition => {
            let mut graphs = vec![Digraph::empty(n); spec.period];
            for (k, (a, b)) in ring(n).into_iter().enumerate() {
                graphs[k % spec.period].add_undirected(a, b);
            }
            (graphs, Weighting::Metropolis)
        }
        ScheduleKind::DirectedRing => {
            let mut graphs = vec![Digraph::empty(n); spec.period];
            if n >= 2 {
                for k in 0..n {
                    graphs[0].add_edge(k, (k + 1) % n);
                }
            }
            (graphs, Weighting::Cycle { theta: 0.5 })
        }
    };
    let schedule = GraphSchedule::from_graphs(spec.kind, graphs, spec.window, weighting)?;
    if !check_b_strong_connectivity(&schedule, spec.window) {
        return Err(Error::Schedule(format!(
            "{} with {} agents and period {} is not {}-strongly connected",
            spec.kind, n, spec.period, spec.window
        )));
    }
    Ok(schedule)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// True iff the union over every window `[kB, (k+1)B - 1]` is strongly connected.
///
/// Window start phases repeat after `lcm(P, B) / B` windows, so only those are checked.
pub fn check_b_strong_connectivity(schedule: &GraphSchedule, window: usize) -> bool {
    if window == 0 {
        return false;
    }
    let period = schedule.period();
    let windows = period / gcd(period, window);
    (0..windows).all(|k| {
        let start = k * window;
        let mut union = schedule.graph_at(start).clone();
        for t in 1..window {
            union = union.union(schedule.graph_at(start + t));
        }
        union.is_strongly_connected()
    })
}

/// Per-round consensus weights `W[i][j]`, nonzero only for in-neighbors `j` of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub w: Array2<f64>,
}

impl WeightMatrix {
    pub fn identity(n: usize) -> Self {
        Self { w: Array2::eye(n) }
    }

    pub fn num_agents(&self) -> usize {
        self.w.nrows()
    }

    /// Smallest strictly positive entry.
    pub fn min_positive(&self) -> f64 {
        self.w
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Metropolis–Hastings weights of an undirected graph:
/// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, remainder on the diagonal.
pub fn metropolis_weights(g: &Digraph) -> Result<WeightMatrix> {
    if !g.is_symmetric() {
        return Err(Error::Weights(
            "Metropolis weights need an undirected graph".into(),
        ));
    }
    let n = g.num_nodes();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let mut off = 0.0;
        for &j in g.in_neighbors(i) {
            if j != i {
                let v = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
                w[[i, j]] = v;
                off += v;
            }
        }
        w[[i, i]] = 1.0 - off;
    }
    Ok(WeightMatrix { w })
}

/// Weights `(1 - theta) I + theta P` for a graph whose non-loop edges form
/// disjoint directed cycles (a partial permutation `P`).
pub fn cycle_weights(g: &Digraph, theta: f64) -> Result<WeightMatrix> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Weights(format!(
            "cycle weight {theta} must lie in (0, 1)"
        )));
    }
    let n = g.num_nodes();
    let mut out_deg = vec![0usize; n];
    for (from, to) in g.edges() {
        if from != to {
            out_deg[from] += 1;
        }
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let in_deg = g.degree(i);
        if in_deg > 1 || out_deg[i] > 1 || in_deg != out_deg[i] {
            return Err(Error::Weights(format!(
                "node {i} is not on a single directed cycle (in {in_deg}, out {})",
                out_deg[i]
            )));
        }
        if in_deg == 0 {
            w[[i, i]] = 1.0;
        } else {
            w[[i, i]] = 1.0 - theta;
            let j = *g
                .in_neighbors(i)
                .iter()
                .find(|&&j| j != i)
                .expect("degree 1");
            w[[i, j]] = theta;
        }
    }
    Ok(WeightMatrix { w })
}

/// Pattern, lower-bound and double-stochasticity check against one graph.
pub fn validate_weights(w: &WeightMatrix, g: &Digraph, theta_min: f64) -> bool {
    let n = g.num_nodes();
    if w.w.dim() != (n, n) {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            let v = w.w[[i, j]];
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return false;
            }
            let linked = g.has_edge(j, i);
            if linked != (v > 0.0) {
                return false;
            }
            if linked && v < theta_min {
                return false;
            }
        }
    }
    let rows_ok =
        w.w.rows()
            .into_iter()
            .all(|r| (r.sum() - 1.0).abs() <= STOCHASTIC_TOL);
    let cols_ok =
        w.w.columns()
            .into_iter()
            .all(|c| (c.sum() - 1.0).abs() <= STOCHASTIC_TOL);
    rows_ok && cols_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Boolean transitive closure by repeated relaxation; independent of petgraph.
    fn reach_all(g: &Digraph) -> bool {
        let n = g.num_nodes();
        let mut r = vec![vec![false; n]; n];
        for (from, to) in g.edges() {
            r[from][to] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        (0..n).all(|i| (0..n).all(|j| i == j || r[i][j]))
    }

    #[test]
    fn static_ring_is_cycle_plus_loops() {
        let s = build_schedule(&ScheduleSpec::new(ScheduleKind::StaticRing, 4)).unwrap();
        assert_eq!(s.period(), 1);
        let g = s.graph_at(7);
        for i in 0..4 {
            assert_eq!(g.in_neighbors(i).len(), 3);
            assert!(g.has_edge(i, i));
            assert!(g.has_edge((i + 1) % 4, i) && g.has_edge(i, (i + 1) % 4));
        }
        assert!(reach_all(g));
    }

    #[test]
    fn single_agent_is_trivially_connected() {
        for kind in ScheduleKind::ALL {
            let s = build_schedule(&ScheduleSpec::new(kind, 1)).unwrap();
            assert_eq!(s.graph_at(0).in_neighbors(0), &[0]);
            let w = s.weights(THETA_MIN).unwrap();
            assert_eq!(w[0].w, array![[1.0]]);
        }
    }

    #[test]
    fn ring_partition_six_three() {
        let spec = ScheduleSpec {
            kind: ScheduleKind::TvRingPartition,
            agents: 6,
            window: 3,
            period: 3,
            seed: 0,
        };
        let s = build_schedule(&spec).unwrap();
        for g in s.graphs() {
            let undirected = g.edges().filter(|(a, b)| a < b).count();
            assert_eq!(undirected, 2);
            assert!(!reach_all(g));
        }
        let union = s.graphs()[0].union(&s.graphs()[1]).union(&s.graphs()[2]);
        assert!(reach_all(&union));
        assert!(check_b_strong_connectivity(&s, 3));
        assert!(!check_b_strong_connectivity(&s, 2));
        // B smaller than the period cannot cover every phase
        assert!(build_schedule(&ScheduleSpec { window: 2, ..spec }).is_err());
    }

    #[test]
    fn alternating_pair_needs_window_two() {
        // phase 0: 0<->1, phase 1: 1<->2. Each alone is disconnected.
        let mut a = Digraph::empty(3);
        a.add_undirected(0, 1);
        let mut b = Digraph::empty(3);
        b.add_undirected(1, 2);
        let s = GraphSchedule::from_graphs(
            ScheduleKind::TvRingPartition,
            vec![a.clone(), b.clone()],
            2,
            Weighting::Metropolis,
        )
        .unwrap();
        assert!(!reach_all(&a) && !reach_all(&b) && reach_all(&a.union(&b)));
        assert!(check_b_strong_connectivity(&s, 2));
        assert!(!check_b_strong_connectivity(&s, 1));
        // odd window over an even period still sees both phases
        assert!(check_b_strong_connectivity(&s, 3));
    }

    #[test]
    fn disconnected_components_fail() {
        let mut g = Digraph::empty(4);
        g.add_undirected(0, 1);
        g.add_undirected(2, 3);
        let s =
            GraphSchedule::from_graphs(ScheduleKind::StaticPath, vec![g], 1, Weighting::Metropolis)
                .unwrap();
        for b in 1..5 {
            assert!(!check_b_strong_connectivity(&s, b));
        }
    }

    #[test]
    fn metropolis_small_graphs() {
        let mut two = Digraph::empty(2);
        two.add_undirected(0, 1);
        assert_eq!(
            metropolis_weights(&two).unwrap().w,
            array![[0.5, 0.5], [0.5, 0.5]]
        );

        let mut path = Digraph::empty(3);
        path.add_undirected(0, 1);
        path.add_undirected(1, 2);
        let w = metropolis_weights(&path).unwrap().w;
        let third = 1.0 / 3.0;
        assert!((w[[0, 1]] - third).abs() < 1e-15 && (w[[1, 2]] - third).abs() < 1e-15);
        assert!((w[[0, 0]] - 2.0 * third).abs() < 1e-15 && (w[[2, 2]] - 2.0 * third).abs() < 1e-15);
        assert!((w[[1, 1]] - third).abs() < 1e-15);
        assert_eq!(w[[0, 2]], 0.0);
        for r in w.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-15);
        }
        for c in w.columns() {
            assert!((c.sum() - 1.0).abs() < 1e-15);
        }

        let lone = Digraph::empty(1);
        assert_eq!(metropolis_weights(&lone).unwrap().w, array![[1.0]]);
    }

    #[test]
    fn metropolis_rejects_directed() {
        let mut g = Digraph::empty(2);
        g.add_edge(0, 1);
        assert!(metropolis_weights(&g).is_err());
    }

    #[test]
    fn validate_catches_violations() {
        let mut g = Digraph::empty(2);
        g.add_undirected(0, 1);
        let row_only = WeightMatrix {
            w: array![[1.0, 0.0], [0.5, 0.5]],
        };
        assert!(!validate_weights(&row_only, &g, THETA_MIN));

        let mut path = Digraph::empty(3);
        path.add_undirected(0, 1);
        path.add_undirected(1, 2);
        let mut w = metropolis_weights(&path).unwrap();
        assert!(validate_weights(&w, &path, THETA_MIN));
        w.w[[0, 1]] += 1e-6;
        assert!(!validate_weights(&w, &path, THETA_MIN));

        // pattern mismatch: weight on a non-edge
        let w = WeightMatrix {
            w: Array2::from_elem((3, 3), 1.0 / 3.0),
        };
        assert!(!validate_weights(&w, &path, THETA_MIN));
        // below the lower bound
        let w = WeightMatrix {
            w: array![[0.995, 0.005], [0.005, 0.995]],
        };
        assert!(!validate_weights(&w, &g, THETA_MIN));
        assert!(validate_weights(&w, &g, 0.001));
    }

    #[test]
    fn directed_ring_weights_are_doubly_stochastic() {
        let spec = ScheduleSpec {
            kind: ScheduleKind::DirectedRing,
            agents: 5,
            window: 2,
            period: 2,
            seed: 0,
        };
        let s = build_schedule(&spec).unwrap();
        assert!(!s.graph_at(0).is_symmetric());
        let ws = s.weights(THETA_MIN).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(ws[1].w, Array2::eye(5));
        assert_eq!(ws[0].w[[1, 0]], 0.5);
        assert_eq!(ws[0].w[[0, 1]], 0.0);
    }

    #[test]
    fn cycle_weights_reject_non_cycles() {
        let mut g = Digraph::empty(3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        assert!(cycle_weights(&g, 0.5).is_err());
    }

    #[test]
    fn random_geometric_deterministic_and_connected() {
        let spec = ScheduleSpec {
            seed: 42,
            ..ScheduleSpec::new(ScheduleKind::StaticRandomGeometric, 12)
        };
        let a = build_schedule(&spec).unwrap();
        let b = build_schedule(&spec).unwrap();
        assert_eq!(a.graphs(), b.graphs());
        assert!(a.graph_at(0).is_symmetric());
        assert!(reach_all(a.graph_at(0)));
    }

    #[test]
    fn metropolis_powers_reach_average() {
        for kind in [
            ScheduleKind::StaticPath,
            ScheduleKind::StaticRing,
            ScheduleKind::StaticRandomGeometric,
        ] {
            for n in 2..8 {
                let s = build_schedule(&ScheduleSpec {
                    seed: n as u64,
                    ..ScheduleSpec::new(kind, n)
                })
                .unwrap();
                let w = &s.weights(THETA_MIN).unwrap()[0].w;
                let mut p = Array2::<f64>::eye(n);
                for _ in 0..1000 {
                    p = p.dot(w);
                }
                let avg = 1.0 / n as f64;
                let err = p.iter().fold(0.0_f64, |m, v| m.max((v - avg).abs()));
                assert!(err <= 1e-8, "{kind} n={n}: {err}");
            }
        }
    }

    #[test]
    fn every_shipped_schedule_passes_its_checks() {
        for kind in ScheduleKind::ALL {
            for n in 1..10 {
                for period in 1..4 {
                    let spec = ScheduleSpec {
                        kind,
                        agents: n,
                        window: period,
                        period,
                        seed: 7,
                    };
                    let s = build_schedule(&spec).unwrap();
                    assert!(check_b_strong_connectivity(&s, spec.window));
                    s.weights(THETA_MIN).unwrap();
                }
            }
        }
    }
}
