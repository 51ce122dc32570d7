//! Dense linear matrix inequality kernel in scalar decision coordinates.
//!
//! A system is `F(x) = F0 + sum_i x_i * A_i` with symmetric `F0`, `A_i` and a
//! required margin `eps`; "feasible" means some `x` within the coordinate
//! bounds achieves `lambda_max(F(x)) <= -eps`. Feasibility is decided by a
//! phase-I path-following method: minimize `t` subject to `F(x) <= t*I` with
//! a log-determinant barrier on the slab and logarithmic barriers on finite
//! coordinate bounds, driving the barrier weight down geometrically and
//! stopping as soon as the slab level crosses `-eps`.
//!
//! A reported `Feasible` is always backed by an explicit point that passes
//! [`LmiSystem::check_feasible_point`]; `NotFound` only means the search
//! stalled and carries the best slack seen, it is not an infeasibility proof.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Absolute tolerance under which a matrix is accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default required slack for strict matrix inequalities.
pub const DEFAULT_MARGIN: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LmiError {
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NonSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coordinate {index} = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("Newton system singular beyond regularization")]
    NumericalBreakdown,
    #[error("predicate is false at the lower end of the bracket")]
    NoFeasiblePoint,
}

/// Symmetric dense matrix; the constructor enforces symmetry to `SYMMETRY_TOL`
/// and stores the exactly symmetrized copy.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self, LmiError> {
        if data.nrows() != data.ncols() {
            return Err(LmiError::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                data.nrows(),
                data.ncols()
            )));
        }
        let asym = linalg::max_asymmetry(&data);
        if asym > SYMMETRY_TOL {
            return Err(LmiError::NonSymmetric(asym));
        }
        Ok(Self {
            data: linalg::symmetric_part(&data),
        })
    }

    /// Builds from the exact symmetrization of `data` without tolerance checks.
    pub fn symmetrize(data: &DMatrix<f64>) -> Self {
        Self {
            data: linalg::symmetric_part(data),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self {
            data: DMatrix::identity(n, n) * c,
        }
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn max_eigenvalue(&self) -> f64 {
        linalg::lambda_max_sym(&self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::lambda_min_sym(&self.data)
    }
}

/// Largest eigenvalue of a raw matrix, rejecting asymmetric input.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64, LmiError> {
    Ok(SymmetricMatrix::new(m.clone())?.max_eigenvalue())
}

/// Elementary symmetric basis `E_ij` (1 at `(i,j)` and `(j,i)`) for all
/// `i <= j` in row-major order of the upper triangle; any symmetric `n x n`
/// matrix is a unique combination of the `n(n+1)/2` returned matrices.
pub fn expand_matrix_variable(n: usize) -> Vec<SymmetricMatrix> {
    assert!(n >= 1, "matrix variable must have positive size");
    let mut basis = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            basis.push(SymmetricMatrix { data: e });
        }
    }
    basis
}

/// Coordinates of a symmetric matrix in the [`expand_matrix_variable`] basis.
pub fn sym_to_coords(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`sym_to_coords`].
pub fn coords_to_sym(n: usize, coords: &[f64]) -> DMatrix<f64> {
    assert_eq!(coords.len(), n * (n + 1) / 2);
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = coords[k];
            m[(j, i)] = coords[k];
            k += 1;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityStatus {
    Feasible,
    NotFound,
}

/// Outcome of a feasibility solve. `NotFound` carries the best slack achieved
/// along the search path; it is not a proof of infeasibility.
#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub point: DVector<f64>,
    pub slack: f64,
    pub iterations: usize,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

/// One diagonal block of the system after splitting along its sparsity
/// structure; `basis` holds only the coordinates touching this block.
struct Block {
    indices: Vec<usize>,
    constant: DMatrix<f64>,
    basis: Vec<(usize, DMatrix<f64>)>,
}

impl Block {
    fn assemble(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.constant.clone();
        for (coord, a) in &self.basis {
            linalg::add_scaled(&mut f, a, x[*coord]);
        }
        f
    }
}

/// Linear matrix inequality `F0 + sum_i x_i A_i <= -margin * I` with optional
/// per-coordinate closed bounds (infinite ends allowed).
pub struct LmiSystem {
    dim: usize,
    constant: SymmetricMatrix,
    basis: Vec<SymmetricMatrix>,
    bounds: Option<Vec<(f64, f64)>>,
    margin: f64,
    blocks: Vec<Block>,
}

impl LmiSystem {
    pub fn new(
        constant: SymmetricMatrix,
        basis: Vec<SymmetricMatrix>,
        bounds: Option<Vec<(f64, f64)>>,
        margin: f64,
    ) -> Result<Self, LmiError> {
        let dim = constant.size();
        if basis.is_empty() {
            return Err(LmiError::DimensionMismatch("empty basis".into()));
        }
        if let Some(a) = basis.iter().find(|a| a.size() != dim) {
            return Err(LmiError::DimensionMismatch(format!(
                "basis matrix is {}x{}, system is {}x{}",
                a.size(),
                a.size(),
                dim,
                dim
            )));
        }
        if let Some(b) = &bounds {
            if b.len() != basis.len() {
                return Err(LmiError::DimensionMismatch(format!(
                    "{} bounds for {} coordinates",
                    b.len(),
                    basis.len()
                )));
            }
            if let Some((lo, hi)) = b.iter().find(|(lo, hi)| lo >= hi) {
                return Err(LmiError::DimensionMismatch(format!(
                    "empty coordinate interval [{lo}, {hi}]"
                )));
            }
        }
        assert!(margin > 0.0, "margin must be positive");
        let blocks = split_blocks(dim, &constant, &basis);
        Ok(Self {
            dim,
            constant,
            basis,
            bounds,
            margin,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_coords(&self) -> usize {
        self.basis.len()
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Assembled `F(x)` as a full matrix.
    pub fn assemble(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.constant.as_matrix().clone();
        for (xi, a) in x.iter().zip(&self.basis) {
            linalg::add_scaled(&mut f, a.as_matrix(), *xi);
        }
        f
    }

    /// Rescaled copy: `F0`, all `A_i` and the margin multiplied by `c > 0`.
    /// Feasibility status is invariant under this operation.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0);
        let constant = SymmetricMatrix {
            data: self.constant.as_matrix() * c,
        };
        let basis = self
            .basis
            .iter()
            .map(|a| SymmetricMatrix {
                data: a.as_matrix() * c,
            })
            .collect::<Vec<_>>();
        let blocks = split_blocks(self.dim, &constant, &basis);
        Self {
            dim: self.dim,
            constant,
            basis,
            bounds: self.bounds.clone(),
            margin: self.margin * c,
            blocks,
        }
    }

    fn check_bounds(&self, x: &DVector<f64>) -> Result<(), LmiError> {
        if let Some(bounds) = &self.bounds {
            for (i, ((lo, hi), xi)) in bounds.iter().zip(x.iter()).enumerate() {
                if xi < lo || xi > hi {
                    return Err(LmiError::OutOfBounds {
                        index: i,
                        value: *xi,
                        lo: *lo,
                        hi: *hi,
                    });
                }
            }
        }
        Ok(())
    }

    /// Independent validation of a candidate point: returns
    /// `(slack <= -margin, slack)` with `slack = lambda_max(F(x))`.
    pub fn check_feasible_point(&self, x: &DVector<f64>) -> Result<(bool, f64), LmiError> {
        if x.len() != self.basis.len() {
            return Err(LmiError::DimensionMismatch(format!(
                "point has {} coordinates, system has {}",
                x.len(),
                self.basis.len()
            )));
        }
        self.check_bounds(x)?;
        let slack = self.slack_at(x);
        Ok((slack <= -self.margin, slack))
    }

    /// `lambda_max(F(x))`, evaluated blockwise.
    pub fn slack_at(&self, x: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| linalg::lambda_max_sym(&b.assemble(x)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Strictly interior starting point: bound midpoints (zero clamped
    /// inward for very wide boxes), one-off offsets for half-bounded
    /// coordinates, zero for free ones.
    fn initial_point(&self) -> DVector<f64> {
        let v = self.basis.len();
        let mut x = DVector::zeros(v);
        if let Some(bounds) = &self.bounds {
            for (i, (lo, hi)) in bounds.iter().enumerate() {
                x[i] = match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => {
                        if hi - lo <= 1e3 {
                            0.5 * (lo + hi)
                        } else {
                            0.0_f64.clamp(lo + 1.0, hi - 1.0)
                        }
                    }
                    (true, false) => lo + 1.0,
                    (false, true) => hi - 1.0,
                    (false, false) => 0.0,
                };
            }
        }
        x
    }

    /// Phase-I feasibility search; see the module docs for the scheme.
    pub fn solve_feasibility(
        &self,
        tol: f64,
        max_iter: usize,
    ) -> Result<FeasibilityResult, LmiError> {
        assert!(tol > 0.0);
        let solver = PhaseOne::new(self);
        solver.run(tol, max_iter)
    }
}

/// Connected-component split of the index set under the joint sparsity
/// pattern of the constant and all basis matrices.
fn split_blocks(dim: usize, constant: &SymmetricMatrix, basis: &[SymmetricMatrix]) -> Vec<Block> {
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let union = |parent: &mut [usize], a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    };
    let scan = |m: &DMatrix<f64>, parent: &mut [usize]| {
        for i in 0..dim {
            for j in (i + 1)..dim {
                if m[(i, j)] != 0.0 {
                    union(parent, i, j);
                }
            }
        }
    };
    scan(constant.as_matrix(), &mut parent);
    for a in basis {
        scan(a.as_matrix(), &mut parent);
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; dim];
    for i in 0..dim {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }

    groups
        .into_iter()
        .map(|indices| {
            let take = |m: &DMatrix<f64>| {
                DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
                    m[(indices[r], indices[c])]
                })
            };
            let constant = take(constant.as_matrix());
            let basis_sub = basis
                .iter()
                .enumerate()
                .filter_map(|(k, a)| {
                    let sub = take(a.as_matrix());
                    if sub.iter().any(|&e| e != 0.0) {
                        Some((k, sub))
                    } else {
                        None
                    }
                })
                .collect();
            Block {
                indices,
                constant,
                basis: basis_sub,
            }
        })
        .collect()
}

const BARRIER_SHRINK: f64 = 0.2;
const NEWTON_REG: f64 = 1e-12;
const INNER_CAP: usize = 30;
const MIN_BARRIER_WEIGHT: f64 = 1e-14;

struct PhaseOne<'a> {
    sys: &'a LmiSystem,
}

struct BarrierEval {
    value: f64,
    chols: Vec<Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> PhaseOne<'a> {
    fn new(sys: &'a LmiSystem) -> Self {
        Self { sys }
    }

    /// Barrier value at `(x, t)` if strictly inside the domain.
    fn eval(&self, x: &DVector<f64>, t: f64, mu: f64) -> Option<BarrierEval> {
        let mut value = t / mu;
        let mut chols = Vec::with_capacity(self.sys.blocks.len());
        for block in &self.sys.blocks {
            let mut s = -block.assemble(x);
            for d in 0..s.nrows() {
                s[(d, d)] += t;
            }
            let chol = Cholesky::new(s)?;
            let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
            value -= 2.0 * logdet;
            chols.push(chol);
        }
        if let Some(bounds) = &self.sys.bounds {
            for ((lo, hi), xi) in bounds.iter().zip(x.iter()) {
                if lo.is_finite() {
                    let gap = xi - lo;
                    if gap <= 0.0 {
                        return None;
                    }
                    value -= gap.ln();
                }
                if hi.is_finite() {
                    let gap = hi - xi;
                    if gap <= 0.0 {
                        return None;
                    }
                    value -= gap.ln();
                }
            }
        }
        if !value.is_finite() {
            return None;
        }
        Some(BarrierEval { value, chols })
    }

    /// Gradient and Hessian of the barrier at the current point, in the
    /// stacked coordinates `(x_1..x_v, t)`.
    fn derivatives(
        &self,
        x: &DVector<f64>,
        mu: f64,
        eval: &BarrierEval,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let v = self.sys.basis.len();
        let mut g = DVector::zeros(v + 1);
        let mut h = DMatrix::zeros(v + 1, v + 1);
        g[v] = 1.0 / mu;

        for (block, chol) in self.sys.blocks.iter().zip(&eval.chols) {
            let s = block.indices.len();
            let sinv = chol.inverse();
            // B_k = S^{-1} A_k per block coordinate; one shared transpose
            // buffer keeps the pairwise trace products contiguous.
            let mut prods: Vec<(usize, DMatrix<f64>)> = Vec::with_capacity(block.basis.len());
            for (coord, a) in &block.basis {
                prods.push((*coord, &sinv * a));
            }
            let tr_sinv: f64 = sinv.diagonal().sum();
            g[v] -= tr_sinv;
            h[(v, v)] += sinv.dot(&sinv);
            let mut buf = DMatrix::zeros(s, s);
            for (k, (ci, bi)) in prods.iter().enumerate() {
                g[*ci] += bi.diagonal().sum();
                let hit = -sinv.dot(bi);
                h[(*ci, v)] += hit;
                h[(v, *ci)] += hit;
                bi.transpose_to(&mut buf);
                for (cj, bj) in prods.iter().take(k + 1) {
                    let val = buf.dot(bj);
                    h[(*ci, *cj)] += val;
                    if ci != cj {
                        h[(*cj, *ci)] += val;
                    }
                }
            }
        }

        if let Some(bounds) = &self.sys.bounds {
            for (i, ((lo, hi), xi)) in bounds.iter().zip(x.iter()).enumerate() {
                if lo.is_finite() {
                    let gap = xi - lo;
                    g[i] -= 1.0 / gap;
                    h[(i, i)] += 1.0 / (gap * gap);
                }
                if hi.is_finite() {
                    let gap = hi - xi;
                    g[i] += 1.0 / gap;
                    h[(i, i)] += 1.0 / (gap * gap);
                }
            }
        }
        (g, h)
    }

    /// True slack check without eigenvalues: `lambda_max(F(x)) <= -margin`
    /// iff `-F(x) - margin I` admits a Cholesky factorization on every block.
    fn strictly_feasible_at(&self, x: &DVector<f64>) -> bool {
        for block in &self.sys.blocks {
            let mut m = -block.assemble(x);
            for d in 0..m.nrows() {
                m[(d, d)] -= self.sys.margin;
            }
            if Cholesky::new(m).is_none() {
                return false;
            }
        }
        true
    }

    fn run(&self, tol: f64, max_iter: usize) -> Result<FeasibilityResult, LmiError> {
        let sys = self.sys;
        let v = sys.basis.len();
        let mut x = sys.initial_point();
        if self.strictly_feasible_at(&x) {
            return finish(sys, x, 0);
        }
        let mut t = sys.slack_at(&x) + 1.0;
        let mut mu = t.abs().max(1.0);
        let mut iterations = 0usize;

        // Barrier complexity: log-det terms count their block dimension,
        // each finite bound side one log term. The path point at weight mu
        // is within mu * nu of the optimal slab level once centered.
        let nu = sys.dim as f64
            + sys
                .bounds
                .iter()
                .flatten()
                .map(|(lo, hi)| lo.is_finite() as usize + hi.is_finite() as usize)
                .sum::<usize>() as f64;

        let mut best_x = x.clone();
        let mut best_t = t;

        loop {
            let t_stage_start = t;
            let mut stage_moved = false;
            let mut centered = false;
            for _ in 0..INNER_CAP {
                if iterations >= max_iter {
                    return finish(sys, best_x, iterations);
                }
                iterations += 1;

                let eval = self.eval(&x, t, mu).ok_or(LmiError::NumericalBreakdown)?;
                let (g, h) = self.derivatives(&x, mu, &eval);
                // A Newton system that stays singular through the
                // regularization ladder ends the search as a stall.
                let Some(step) = solve_newton_step(&h, &g) else {
                    return finish(sys, best_x, iterations);
                };

                // Backtrack into the domain with sufficient decrease.
                let slope = g.dot(&step);
                let mut alpha = 1.0;
                let mut accepted = None;
                while alpha >= 1e-13 {
                    let xn = &x + step.rows(0, v) * alpha;
                    let tn = t + step[v] * alpha;
                    if let Some(en) = self.eval(&xn, tn, mu) {
                        if en.value <= eval.value + 1e-4 * alpha * slope {
                            accepted = Some((xn, tn));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                let Some((xn, tn)) = accepted else {
                    break;
                };
                x = xn;
                t = tn;
                stage_moved = true;
                if t < best_t {
                    best_t = t;
                    best_x = x.clone();
                }
                if t < -sys.margin || self.strictly_feasible_at(&x) {
                    // With S = tI - F(x) positive definite, t < -margin
                    // already implies lambda_max(F(x)) < -margin.
                    return finish(sys, x, iterations);
                }
                // Loose centering is enough: the stage cushion below uses
                // twice the barrier complexity.
                let decrement = -g.dot(&step);
                if decrement < 0.1 {
                    centered = true;
                    break;
                }
            }
            // Once centered, the slab level is within ~mu*nu of optimal;
            // a level that cannot reach -margin ends the search early.
            if centered && t - 2.0 * mu * nu > -sys.margin {
                return finish(sys, best_x, iterations);
            }
            if !stage_moved || (t_stage_start - t).abs() < tol {
                return finish(sys, best_x, iterations);
            }
            mu *= BARRIER_SHRINK;
            if mu < MIN_BARRIER_WEIGHT {
                return finish(sys, best_x, iterations);
            }
        }
    }
}

fn finish(
    sys: &LmiSystem,
    point: DVector<f64>,
    iterations: usize,
) -> Result<FeasibilityResult, LmiError> {
    let slack = sys.slack_at(&point);
    let status = if slack <= -sys.margin {
        FeasibilityStatus::Feasible
    } else {
        FeasibilityStatus::NotFound
    };
    Ok(FeasibilityResult {
        status,
        point,
        slack,
        iterations,
    })
}

/// Solves `(H + reg I) d = -g`, escalating the regularization from the
/// baseline when the factorization fails; `None` when it stays singular.
fn solve_newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let mut reg = NEWTON_REG;
    while reg <= 1e-4 {
        let mut hr = h.clone();
        for d in 0..n {
            hr[(d, d)] += reg;
        }
        if let Some(chol) = Cholesky::new(hr) {
            let step = chol.solve(&(-g));
            if step.iter().all(|e| e.is_finite()) {
                return Some(step);
            }
        }
        reg *= 100.0;
    }
    None
}

/// Largest `v` in `[lo, hi]` with `predicate(v)` true, to within `precision`,
/// assuming the predicate is true-then-false on the bracket.
pub fn bisect_scalar(
    mut predicate: impl FnMut(f64) -> bool,
    lo: f64,
    hi: f64,
    precision: f64,
) -> Result<f64, LmiError> {
    assert!(lo < hi, "bisection bracket must satisfy lo < hi");
    assert!(precision > 0.0, "bisection precision must be positive");
    if !predicate(lo) {
        return Err(LmiError::NoFeasiblePoint);
    }
    if predicate(hi) {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > precision {
        let mid = 0.5 * (a + b);
        if predicate(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_system(margin: f64) -> LmiSystem {
        // F(x) = diag(x - 1, -x): feasible for x in [margin, 1 - margin].
        let constant =
            SymmetricMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0])))
                .unwrap();
        let basis = vec![SymmetricMatrix::new(DMatrix::from_diagonal(
            &DVector::from_vec(vec![1.0, -1.0]),
        ))
        .unwrap()];
        LmiSystem::new(constant, basis, Some(vec![(-2.0, 2.0)]), margin).unwrap()
    }

    fn infeasible_system(margin: f64) -> LmiSystem {
        // F(x) = diag(x, -x): lambda_max >= 0 everywhere.
        let constant = SymmetricMatrix::zeros(2);
        let basis = vec![SymmetricMatrix::new(DMatrix::from_diagonal(
            &DVector::from_vec(vec![1.0, -1.0]),
        ))
        .unwrap()];
        LmiSystem::new(constant, basis, Some(vec![(-2.0, 2.0)]), margin).unwrap()
    }

    #[test]
    fn max_eigenvalue_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0]));
        assert_relative_eq!(max_eigenvalue(&d).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            max_eigenvalue(&DMatrix::zeros(3, 3)).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 3.0]);
        assert_relative_eq!(
            max_eigenvalue(&m).unwrap(),
            2.0 + 2.0_f64.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn max_eigenvalue_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(max_eigenvalue(&m), Err(LmiError::NonSymmetric(_))));
    }

    #[test]
    fn expand_sizes_and_roundtrip() {
        assert_eq!(expand_matrix_variable(1).len(), 1);
        assert_eq!(expand_matrix_variable(2).len(), 3);
        let basis = expand_matrix_variable(3);
        assert_eq!(basis.len(), 6);
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[1.5, -0.25, 2.0, -0.25, 0.75, -1.0, 2.0, -1.0, 3.25],
        );
        let coords = sym_to_coords(&m);
        let mut rebuilt = DMatrix::zeros(3, 3);
        for (c, e) in coords.iter().zip(&basis) {
            rebuilt += e.as_matrix() * *c;
        }
        assert!((rebuilt - &m).abs().max() <= 1e-14);
        assert_eq!(coords_to_sym(3, &coords), m);
    }

    #[test]
    fn check_point_examples() {
        let sys = diag_system(0.1);
        let (ok, slack) = sys
            .check_feasible_point(&DVector::from_vec(vec![0.5]))
            .unwrap();
        assert!(ok);
        assert_relative_eq!(slack, -0.5, epsilon = 1e-14);

        let sys = infeasible_system(0.1);
        let (ok, slack) = sys
            .check_feasible_point(&DVector::from_vec(vec![0.0]))
            .unwrap();
        assert!(!ok);
        assert_relative_eq!(slack, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn check_point_errors() {
        let sys = diag_system(0.1);
        assert!(matches!(
            sys.check_feasible_point(&DVector::from_vec(vec![0.5, 0.5])),
            Err(LmiError::DimensionMismatch(_))
        ));
        assert!(matches!(
            sys.check_feasible_point(&DVector::from_vec(vec![3.0])),
            Err(LmiError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn solve_finds_interval_intersection() {
        let sys = diag_system(0.1);
        let res = sys.solve_feasibility(1e-9, 5000).unwrap();
        assert!(res.is_feasible());
        let x = res.point[0];
        assert!((0.1..=0.9).contains(&x), "x = {x}");
        let (ok, slack) = sys.check_feasible_point(&res.point).unwrap();
        assert!(ok);
        assert!(slack <= -0.1);
        assert_relative_eq!(slack, res.slack, epsilon = 1e-12);
    }

    #[test]
    fn solve_reports_not_found() {
        let sys = infeasible_system(0.1);
        let res = sys.solve_feasibility(1e-9, 5000).unwrap();
        assert_eq!(res.status, FeasibilityStatus::NotFound);
        assert!(res.slack >= -1e-9, "best slack {}", res.slack);
    }

    #[test]
    fn scaling_preserves_status() {
        for scale in [10.0, 0.1] {
            let sys = diag_system(0.1).scaled(scale);
            assert!(sys.solve_feasibility(1e-9, 5000).unwrap().is_feasible());
            let sys = infeasible_system(0.1).scaled(scale);
            assert_eq!(
                sys.solve_feasibility(1e-9, 5000).unwrap().status,
                FeasibilityStatus::NotFound
            );
        }
    }

    #[test]
    fn blocks_split_on_sparsity() {
        let sys = diag_system(0.1);
        assert_eq!(sys.blocks.len(), 2);
    }

    #[test]
    fn bisect_examples() {
        let v = bisect_scalar(|v| v <= 0.7, 0.0, 1.0, 1e-4).unwrap();
        assert!((v - 0.7).abs() <= 1e-4);
        let v = bisect_scalar(|_| true, 0.0, 1.0, 1e-4).unwrap();
        assert_relative_eq!(v, 1.0);
        assert!(matches!(
            bisect_scalar(|_| false, 0.0, 1.0, 1e-4),
            Err(LmiError::NoFeasiblePoint)
        ));
    }
}
