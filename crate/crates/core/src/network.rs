//! Follower/influencer social graphs, the discrete-time consensus-style
//! dynamics they induce, and the randomized case-study generator.
//!
//! Nodes `0..n_followers` are followers, the next `n_influencers` ids are
//! influencer nodes. With incidence matrix `D = col(D_F, D_I)` and edge
//! weights `W`, the follower state evolves as
//!
//! ```text
//! x^+ = A_F x + B_F u,   A_F = diag(alpha) - tau L_F,   B_F = -tau D_F W D_I^T
//! ```
//!
//! with `L_F = D_F W D_F^T`. `A_F` is symmetric, and it is Schur whenever
//! `tau < min_i(1 + alpha_i) / lambda_max(L_F)` on a connected graph.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{Coupling, QuadraticGame};
use crate::linalg;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("susceptibility entries must lie in (0, 1]: {0}")]
    BadAlpha(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("requested topology is infeasible: {0}")]
    InfeasibleTopology(String),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
}

/// Weighted undirected edge over the joint node set; the stored endpoint
/// order fixes the (arbitrary) incidence orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Follower/influencer graph.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    n_followers: usize,
    n_influencers: usize,
    edges: Vec<Edge>,
}

impl SocialGraph {
    pub fn new(
        n_followers: usize,
        n_influencers: usize,
        edges: Vec<Edge>,
    ) -> Result<Self, NetworkError> {
        if n_followers == 0 {
            return Err(NetworkError::InvalidGraph("no follower nodes".into()));
        }
        let total = n_followers + n_influencers;
        for e in &edges {
            if e.a >= total || e.b >= total {
                return Err(NetworkError::InvalidGraph(format!(
                    "edge ({}, {}) outside node range 0..{total}",
                    e.a, e.b
                )));
            }
            if e.a == e.b {
                return Err(NetworkError::InvalidGraph(format!("self-loop at {}", e.a)));
            }
            if e.weight <= 0.0 {
                return Err(NetworkError::InvalidGraph(format!(
                    "edge ({}, {}) has weight {}",
                    e.a, e.b, e.weight
                )));
            }
        }
        Ok(Self {
            n_followers,
            n_influencers,
            edges,
        })
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    pub fn n_influencers(&self) -> usize {
        self.n_influencers
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_follower(&self, node: usize) -> bool {
        node < self.n_followers
    }

    /// True when every node lies in one component.
    pub fn is_connected(&self) -> bool {
        let total = self.n_followers + self.n_influencers;
        let mut uf = UnionFind::new(total);
        for e in &self.edges {
            uf.union(e.a, e.b);
        }
        let root = uf.find(0);
        (1..total).all(|i| uf.find(i) == root)
    }

    /// Weighted Laplacian `D W D^T` over the full node set, assembled by
    /// edge iteration.
    pub fn full_laplacian(&self) -> DMatrix<f64> {
        let total = self.n_followers + self.n_influencers;
        let mut l = DMatrix::zeros(total, total);
        for e in &self.edges {
            l[(e.a, e.a)] += e.weight;
            l[(e.b, e.b)] += e.weight;
            l[(e.a, e.b)] -= e.weight;
            l[(e.b, e.a)] -= e.weight;
        }
        l
    }

    /// Follower block `L_F = D_F W D_F^T`.
    pub fn follower_laplacian(&self) -> DMatrix<f64> {
        self.full_laplacian()
            .view((0, 0), (self.n_followers, self.n_followers))
            .into_owned()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Plain state-space pair `x^+ = A x + B u`.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl Dynamics {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }
}

/// Follower dynamics induced by a graph at sampling time `tau`.
#[derive(Debug, Clone)]
pub struct LtiNetwork {
    pub a_f: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub tau: f64,
    pub alpha: DVector<f64>,
}

impl LtiNetwork {
    pub fn n_followers(&self) -> usize {
        self.a_f.nrows()
    }

    pub fn n_influencers(&self) -> usize {
        self.b_f.ncols()
    }

    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            a: self.a_f.clone(),
            b: self.b_f.clone(),
        }
    }

    /// `tau * L_F`, recovered as `diag(alpha) - A_F`.
    pub fn tau_follower_laplacian(&self) -> DMatrix<f64> {
        let mut m = -self.a_f.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += self.alpha[i];
        }
        m
    }
}

/// Assembles `A_F`, `B_F` from the graph. `tau = 0` degenerates to
/// `A_F = diag(alpha)`, `B_F = 0`.
pub fn build_lti(
    graph: &SocialGraph,
    alpha: &DVector<f64>,
    tau: f64,
) -> Result<LtiNetwork, NetworkError> {
    if alpha.len() != graph.n_followers() {
        return Err(NetworkError::BadAlpha(format!(
            "{} entries for {} followers",
            alpha.len(),
            graph.n_followers()
        )));
    }
    if alpha.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(NetworkError::BadAlpha("entries outside (0, 1]".into()));
    }
    if tau < 0.0 {
        return Err(NetworkError::InvalidGraph("negative sampling time".into()));
    }
    let n_f = graph.n_followers();
    let m = graph.n_influencers();
    let l = graph.full_laplacian();
    let mut a_f = l.view((0, 0), (n_f, n_f)).into_owned() * (-tau);
    for i in 0..n_f {
        a_f[(i, i)] += alpha[i];
    }
    let b_f = l.view((0, n_f), (n_f, m)).into_owned() * (-tau);
    Ok(LtiNetwork {
        a_f,
        b_f,
        tau,
        alpha: alpha.clone(),
    })
}

/// Open upper bound `min_i(1 + alpha_i) / lambda_max(L_F)` for the sampling
/// time; any `tau` strictly below it keeps `A_F` Schur.
pub fn max_stable_tau(graph: &SocialGraph, alpha: &DVector<f64>) -> Result<f64, NetworkError> {
    if !graph.is_connected() {
        return Err(NetworkError::Disconnected);
    }
    if alpha.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(NetworkError::BadAlpha("entries outside (0, 1]".into()));
    }
    let lf = graph.follower_laplacian();
    let lam_max = linalg::lambda_max_sym(&lf);
    if lam_max <= 0.0 {
        return Err(NetworkError::Disconnected);
    }
    let min_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((1.0 + min_alpha) / lam_max)
}

/// Influencer reach fractions and edge weights, ordered
/// small / regular / rising / macro; influencers take types round-robin.
const INFLUENCER_REACH: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
const INFLUENCER_WEIGHT: [f64; 4] = [1.2, 2.5, 7.5, 12.0];

#[derive(Debug, Clone)]
pub struct CaseStudyConfig {
    pub n_followers: usize,
    pub n_influencers: usize,
    pub n_agents: usize,
    /// Number of follower-follower edges to sample.
    pub ff_edge_budget: usize,
    pub alpha: f64,
    /// Fraction of the open stability bound used as sampling time.
    pub tau_factor: f64,
}

impl CaseStudyConfig {
    pub fn new(n_followers: usize, n_influencers: usize, n_agents: usize) -> Self {
        let pairs = n_followers * n_followers.saturating_sub(1) / 2;
        Self {
            n_followers,
            n_influencers,
            n_agents,
            ff_edge_budget: (4 * n_followers).min(pairs),
            alpha: 0.75,
            tau_factor: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseStudyInstance {
    pub graph: SocialGraph,
    pub game: QuadraticGame,
    pub alpha: f64,
    pub tau_factor: f64,
}

impl CaseStudyInstance {
    pub fn sampling_time(&self) -> Result<f64, NetworkError> {
        let alpha = DVector::from_element(self.graph.n_followers(), self.alpha);
        Ok(self.tau_factor * max_stable_tau(&self.graph, &alpha)?)
    }

    pub fn lti(&self) -> Result<LtiNetwork, NetworkError> {
        let alpha = DVector::from_element(self.graph.n_followers(), self.alpha);
        let tau = self.sampling_time()?;
        build_lti(&self.graph, &alpha, tau)
    }
}

/// Randomized market instance: follower-follower edges sampled uniformly
/// without replacement (resampled until the follower subgraph is connected),
/// influencer links to a random follower subset of the type reach, firm
/// weights `R_i ~ U(1,2) I`, `Q_i ~ U(0.001,0.1) I`, targets from a
/// production power `U(50,500) n_F`, per-component budget caps
/// `p_i * U(1.8,2.25) * U(0.02,0.08)`, one income half-space per influencer
/// with limit `U(400,2000)`, and the shared state bound from the summed
/// first target components. Deterministic for a fixed seed.
pub fn generate_case_study(
    seed: u64,
    cfg: &CaseStudyConfig,
) -> Result<CaseStudyInstance, NetworkError> {
    let n_f = cfg.n_followers;
    let m = cfg.n_influencers;
    let n_agents = cfg.n_agents;
    if n_f < m || m < 1 || n_agents < 1 {
        return Err(NetworkError::InfeasibleTopology(format!(
            "need n_followers >= n_influencers >= 1 and agents >= 1, got ({n_f}, {m}, {n_agents})"
        )));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(NetworkError::BadAlpha(format!("alpha = {}", cfg.alpha)));
    }
    let n_pairs = n_f * n_f.saturating_sub(1) / 2;
    if cfg.ff_edge_budget + 1 < n_f || cfg.ff_edge_budget > n_pairs {
        return Err(NetworkError::InfeasibleTopology(format!(
            "{} follower-follower edges cannot connect {} followers (max {})",
            cfg.ff_edge_budget, n_f, n_pairs
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Follower-follower topology: reject and resample until connected.
    let mut ff_edges = None;
    for _ in 0..1000 {
        let picks = index_sample(&mut rng, n_pairs, cfg.ff_edge_budget);
        let edges: Vec<Edge> = picks
            .iter()
            .map(|idx| {
                let (a, b) = pair_from_index(idx, n_f);
                Edge { a, b, weight: 1.0 }
            })
            .collect();
        let mut uf = UnionFind::new(n_f);
        for e in &edges {
            uf.union(e.a, e.b);
        }
        let root = uf.find(0);
        if (1..n_f).all(|i| uf.find(i) == root) {
            ff_edges = Some(edges);
            break;
        }
    }
    let mut edges = ff_edges.ok_or_else(|| {
        NetworkError::InfeasibleTopology("connectivity resampling cap reached".into())
    })?;

    // Influencer links: a random follower subset of the type's reach.
    for j in 0..m {
        let kind = j % 4;
        let reach = ((INFLUENCER_REACH[kind] * n_f as f64).round() as usize).clamp(1, n_f);
        let followers = index_sample(&mut rng, n_f, reach);
        for f in followers.iter() {
            edges.push(Edge {
                a: n_f + j,
                b: f,
                weight: INFLUENCER_WEIGHT[kind],
            });
        }
    }
    let graph = SocialGraph::new(n_f, m, edges)?;

    // Firms' game data.
    let mut q = Vec::with_capacity(n_agents);
    let mut r = Vec::with_capacity(n_agents);
    let mut targets = Vec::with_capacity(n_agents);
    let mut box_lo = Vec::with_capacity(n_agents);
    let mut box_hi = Vec::with_capacity(n_agents);
    for _ in 0..n_agents {
        let r_scale = rng.random_range(1.0..2.0);
        let q_scale = rng.random_range(0.001..0.1);
        let power = rng.random_range(50.0..500.0) * n_f as f64;
        let unit_price = rng.random_range(1.8..2.25);
        let cut = rng.random_range(0.02..0.08);
        r.push(DMatrix::identity(m, m) * r_scale);
        q.push(DMatrix::identity(n_f, n_f) * q_scale);
        targets.push(DVector::from_element(n_f, power / n_f as f64));
        box_lo.push(DVector::zeros(m));
        box_hi.push(DVector::from_element(m, power * unit_price * cut));
    }
    let income_limits = DVector::from_fn(m, |_, _| rng.random_range(400.0..2000.0));
    let coupling = Coupling {
        blocks: vec![DMatrix::identity(m, m); n_agents],
        rhs: income_limits,
    };
    let state_cap: f64 = targets.iter().map(|t| t[0]).sum();
    let game = QuadraticGame::new(
        q,
        targets,
        r,
        box_lo,
        box_hi,
        Some(coupling),
        DVector::zeros(n_f),
        DVector::from_element(n_f, state_cap),
    )?;

    Ok(CaseStudyInstance {
        graph,
        game,
        alpha: cfg.alpha,
        tau_factor: cfg.tau_factor,
    })
}

/// Unranks a pair index into `(a, b)` with `a < b < n`, row-major over the
/// strict upper triangle.
fn pair_from_index(idx: usize, n: usize) -> (usize, usize) {
    let mut a = 0;
    let mut remaining = idx;
    loop {
        let row = n - 1 - a;
        if remaining < row {
            return (a, a + 1 + remaining);
        }
        remaining -= row;
        a += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_follower_graph() -> SocialGraph {
        // Followers 0, 1; influencer 2. Edges: (0-1, w=1), (2-1, w=2).
        SocialGraph::new(
            2,
            1,
            vec![
                Edge {
                    a: 0,
                    b: 1,
                    weight: 1.0,
                },
                Edge {
                    a: 2,
                    b: 1,
                    weight: 2.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn build_lti_two_follower_example() {
        let graph = two_follower_graph();
        let alpha = DVector::from_element(2, 1.0);
        let net = build_lti(&graph, &alpha, 0.1).unwrap();
        let expect_a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.7]);
        let expect_b = DMatrix::from_column_slice(2, 1, &[0.0, 0.2]);
        assert!((net.a_f.clone() - expect_a).abs().max() <= 1e-14);
        assert!((net.b_f.clone() - expect_b).abs().max() <= 1e-14);
        assert!(
            (graph.follower_laplacian() - DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 3.0]))
                .abs()
                .max()
                <= 1e-14
        );
    }

    #[test]
    fn single_follower_no_influencer_edges() {
        let graph = SocialGraph::new(1, 1, vec![]).unwrap();
        let alpha = DVector::from_element(1, 0.8);
        let net = build_lti(&graph, &alpha, 0.1).unwrap();
        assert_eq!(net.a_f, DMatrix::from_element(1, 1, 0.8));
        assert_eq!(net.b_f, DMatrix::zeros(1, 1));
    }

    #[test]
    fn zero_tau_decouples() {
        let graph = two_follower_graph();
        let alpha = DVector::from_vec(vec![0.9, 0.5]);
        let net = build_lti(&graph, &alpha, 0.0).unwrap();
        assert_eq!(net.a_f, DMatrix::from_diagonal(&alpha));
        assert_eq!(net.b_f, DMatrix::zeros(2, 1));
    }

    #[test]
    fn bad_alpha_rejected() {
        let graph = two_follower_graph();
        assert!(matches!(
            build_lti(&graph, &DVector::from_vec(vec![1.0, 1.2]), 0.1),
            Err(NetworkError::BadAlpha(_))
        ));
        assert!(matches!(
            build_lti(&graph, &DVector::from_vec(vec![0.0, 1.0]), 0.1),
            Err(NetworkError::BadAlpha(_))
        ));
    }

    #[test]
    fn tau_bound_examples() {
        let graph = two_follower_graph();
        let bound = max_stable_tau(&graph, &DVector::from_element(2, 0.75)).unwrap();
        assert_relative_eq!(bound, 1.75 / (2.0 + 2.0_f64.sqrt()), epsilon = 1e-12);
        let bound = max_stable_tau(&graph, &DVector::from_element(2, 1.0)).unwrap();
        assert_relative_eq!(bound, 2.0 / (2.0 + 2.0_f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn tau_bound_requires_connectivity() {
        let graph = SocialGraph::new(2, 0, vec![]).unwrap();
        assert!(matches!(
            max_stable_tau(&graph, &DVector::from_element(2, 0.5)),
            Err(NetworkError::Disconnected)
        ));
    }

    #[test]
    fn stencil_and_symmetry_on_generated_graphs() {
        for seed in 0..10 {
            let cfg = CaseStudyConfig::new(12, 3, 2);
            let inst = generate_case_study(seed, &cfg).unwrap();
            let net = inst.lti().unwrap();
            let asym = (net.a_f.clone() - net.a_f.transpose()).abs().max();
            assert!(asym <= 1e-12);
            // Row stencil: diagonal alpha_i - tau * sum of incident weights,
            // off-diagonal tau * w_ij.
            let n_f = inst.graph.n_followers();
            let mut incident = vec![0.0; n_f];
            let mut off = DMatrix::<f64>::zeros(n_f, n_f);
            for e in inst.graph.edges() {
                if inst.graph.is_follower(e.a) && inst.graph.is_follower(e.b) {
                    incident[e.a] += e.weight;
                    incident[e.b] += e.weight;
                    off[(e.a, e.b)] += e.weight;
                    off[(e.b, e.a)] += e.weight;
                } else if inst.graph.is_follower(e.b) {
                    incident[e.b] += e.weight;
                } else if inst.graph.is_follower(e.a) {
                    incident[e.a] += e.weight;
                }
            }
            for i in 0..n_f {
                assert_relative_eq!(
                    net.a_f[(i, i)],
                    inst.alpha - net.tau * incident[i],
                    epsilon = 1e-10
                );
                for j in 0..n_f {
                    if i != j {
                        assert_relative_eq!(
                            net.a_f[(i, j)],
                            net.tau * off[(i, j)],
                            epsilon = 1e-12
                        );
                    }
                }
            }
            // Connected with positive weights: L_F is positive definite.
            assert!(linalg::lambda_min_sym(&inst.graph.follower_laplacian()) > 0.0);
            // Just inside the bound: Schur.
            assert!(linalg::spectral_radius(&net.a_f) < 1.0);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = CaseStudyConfig::new(20, 4, 3);
        let a = generate_case_study(42, &cfg).unwrap();
        let b = generate_case_study(42, &cfg).unwrap();
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert_eq!(a.game.targets(), b.game.targets());
        assert_eq!(a.game.weights_q()[0], b.game.weights_q()[0]);
        assert_eq!(
            a.game.coupling().unwrap().rhs,
            b.game.coupling().unwrap().rhs
        );
        let c = generate_case_study(43, &cfg).unwrap();
        assert_ne!(a.graph.edges(), c.graph.edges());
    }

    #[test]
    fn macro_influencer_reaches_everyone() {
        let cfg = CaseStudyConfig::new(16, 4, 2);
        let inst = generate_case_study(5, &cfg).unwrap();
        // Fourth influencer (index 3) is the macro type.
        let macro_id = 16 + 3;
        let degree = inst
            .graph
            .edges()
            .iter()
            .filter(|e| e.a == macro_id || e.b == macro_id)
            .count();
        assert_eq!(degree, 16);
    }

    #[test]
    fn paper_shape_edge_count() {
        let mut cfg = CaseStudyConfig::new(100, 5, 10);
        cfg.ff_edge_budget = 392;
        let inst = generate_case_study(1, &cfg).unwrap();
        // 392 follower edges plus reaches 10 + 20 + 50 + 100 + 10.
        assert_eq!(inst.graph.edges().len(), 582);
        assert!(inst.graph.is_connected());
    }

    #[test]
    fn infeasible_budgets_rejected() {
        let mut cfg = CaseStudyConfig::new(10, 2, 2);
        cfg.ff_edge_budget = 8;
        assert!(matches!(
            generate_case_study(0, &cfg),
            Err(NetworkError::InfeasibleTopology(_))
        ));
        cfg.ff_edge_budget = 46;
        assert!(matches!(
            generate_case_study(0, &cfg),
            Err(NetworkError::InfeasibleTopology(_))
        ));
    }

    #[test]
    fn pair_unranking_is_bijective() {
        let n = 7;
        let mut seen = std::collections::BTreeSet::new();
        for idx in 0..(n * (n - 1) / 2) {
            let (a, b) = pair_from_index(idx, n);
            assert!(a < b && b < n);
            assert!(seen.insert((a, b)));
        }
    }
}
