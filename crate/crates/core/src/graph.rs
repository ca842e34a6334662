//! Pose-graph optimization over odometry and loop-closure factors.
//!
//! Damped Gauss-Newton on SE(2) nodes with the first node fixed as gauge.
//! The normal equations keep their chain-plus-loops block sparsity and are
//! solved by a block Cholesky factorization; loop residuals optionally go
//! through a Huber kernel so one bad registration cannot hijack the
//! trajectory.

use crate::geom::{Mat2, Mat3, Se2, Vec3};
use crate::scalar::{wrap_angle, Real};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    /// The normal equations are singular (gauge not fixed or graph
    /// disconnected).
    #[error("singular system: gauge not fixed or graph disconnected")]
    SingularSystem,
    #[error("edge references node {0} but the graph has {1} nodes")]
    NodeOutOfRange(usize, usize),
}

#[derive(Debug, Clone, Copy)]
pub struct PoseNode<T> {
    pub index: usize,
    pub estimate: Se2<T>,
    pub stamp: f64,
}

/// Relative-pose measurement between two nodes.
#[derive(Debug, Clone, Copy)]
pub struct PoseEdge<T> {
    pub from: usize,
    pub to: usize,
    /// Pose `to` expressed in pose `from`'s frame.
    pub z: Se2<T>,
    pub information: Mat3<T>,
}

impl<T: Real> PoseEdge<T> {
    pub fn odometry(t: usize, z: Se2<T>, information: Mat3<T>) -> Self {
        Self { from: t, to: t + 1, z, information }
    }
}

#[derive(Debug, Clone)]
pub struct GraphSolution<T> {
    pub poses: Vec<Se2<T>>,
    pub final_cost: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions<T> {
    pub max_iterations: usize,
    /// Converged when the relative cost decrease drops below this.
    pub rel_cost_tol: T,
    /// Converged outright when the cost itself drops below this.
    pub abs_cost_tol: T,
    pub init_lambda: T,
    /// Huber kernel scale applied to loop edges; `None` disables it.
    pub huber_delta: Option<T>,
    /// Fix node 0 as the gauge. Disabling this makes the system singular.
    pub fix_gauge: bool,
}

impl<T: Real> Default for OptimizeOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_cost_tol: T::of(1e-9),
            abs_cost_tol: T::of(1e-16),
            init_lambda: T::of(1e-4),
            huber_delta: Some(T::one()),
            fix_gauge: true,
        }
    }
}

/// Measurement residual of an edge: the coordinates of
/// `z^-1 * (x_a^-1 * x_b)` with the yaw wrapped into `(-pi, pi]`.
pub fn residual<T: Real>(z: &Se2<T>, x_a: &Se2<T>, x_b: &Se2<T>) -> Vec3<T> {
    let rel = x_a.between(x_b);
    let delta = z.inverse().compose(&rel);
    Vec3::new(delta.t.x, delta.t.y, wrap_angle(delta.yaw))
}

/// Analytic Jacobians of [`residual`] with respect to the `(x, y, yaw)`
/// parameters of `x_a` and `x_b`.
pub fn residual_jacobians<T: Real>(
    z: &Se2<T>,
    x_a: &Se2<T>,
    x_b: &Se2<T>,
) -> (Mat3<T>, Mat3<T>) {
    let rz_t = Mat2::rotation(z.yaw).transpose();
    let ra_t = Mat2::rotation(x_a.yaw).transpose();
    let d = x_b.t - x_a.t;
    let rel_t = ra_t.apply(d);

    // d(Ra^T d)/dyaw_a = -J * (Ra^T d), J the 90-degree rotation generator
    let j_rel = crate::geom::Point2::new(-rel_t.y, rel_t.x);
    let dtheta_a = rz_t.apply(crate::geom::Point2::new(-j_rel.x, -j_rel.y));

    let m = rz_t.m;
    let a = ra_t.m;
    // -Rz^T Ra^T
    let rzra = Mat2 {
        m: [
            [
                m[0][0] * a[0][0] + m[0][1] * a[1][0],
                m[0][0] * a[0][1] + m[0][1] * a[1][1],
            ],
            [
                m[1][0] * a[0][0] + m[1][1] * a[1][0],
                m[1][0] * a[0][1] + m[1][1] * a[1][1],
            ],
        ],
    };

    let mut ja = Mat3::zero();
    let mut jb = Mat3::zero();
    for r in 0..2 {
        for c in 0..2 {
            ja.m[r][c] = -rzra.m[r][c];
            jb.m[r][c] = rzra.m[r][c];
        }
    }
    ja.m[0][2] = dtheta_a.x;
    ja.m[1][2] = dtheta_a.y;
    ja.m[2][2] = -T::one();
    jb.m[2][2] = T::one();
    (ja, jb)
}

/// Integrate a stream of relative poses into absolute initial estimates,
/// starting from `start`.
pub fn chain_integrate<T: Real>(start: Se2<T>, relative: &[Se2<T>]) -> Vec<Se2<T>> {
    let mut out = Vec::with_capacity(relative.len() + 1);
    out.push(start);
    let mut cur = start;
    for z in relative {
        cur = cur.compose(z);
        out.push(cur);
    }
    out
}

struct EdgeTerm<T> {
    edge: PoseEdge<T>,
    robust: bool,
}

fn edge_cost<T: Real>(term: &EdgeTerm<T>, poses: &[Se2<T>], huber: Option<T>) -> T {
    let e = residual(&term.edge.z, &poses[term.edge.from], &poses[term.edge.to]);
    let s2 = e.dot(term.edge.information.mul_vec(e));
    match (term.robust, huber) {
        (true, Some(delta)) => {
            let s = s2.sqrt();
            if s <= delta {
                s2
            } else {
                T::of(2.0) * delta * s - delta * delta
            }
        }
        _ => s2,
    }
}

fn total_cost<T: Real>(terms: &[EdgeTerm<T>], poses: &[Se2<T>], huber: Option<T>) -> T {
    terms.iter().map(|t| edge_cost(t, poses, huber)).sum()
}

/// Minimize the weighted squared residuals of all odometry and loop edges
/// by damped Gauss-Newton with the first node held fixed.
pub fn optimize<T: Real>(
    nodes: &[PoseNode<T>],
    odometry: &[PoseEdge<T>],
    loops: &[PoseEdge<T>],
    opts: &OptimizeOptions<T>,
) -> Result<GraphSolution<T>, GraphError> {
    let n = nodes.len();
    let mut poses: Vec<Se2<T>> = nodes.iter().map(|p| p.estimate).collect();
    if n == 0 {
        return Ok(GraphSolution { poses, final_cost: T::zero(), iterations: 0, converged: true });
    }
    let mut terms: Vec<EdgeTerm<T>> = Vec::with_capacity(odometry.len() + loops.len());
    for e in odometry {
        terms.push(EdgeTerm { edge: *e, robust: false });
    }
    for e in loops {
        terms.push(EdgeTerm { edge: *e, robust: true });
    }
    for t in &terms {
        let hi = t.edge.from.max(t.edge.to);
        if hi >= n {
            return Err(GraphError::NodeOutOfRange(hi, n));
        }
    }

    // free-variable indexing: node 0 is the gauge unless unfixed
    let offset = if opts.fix_gauge { 1 } else { 0 };
    let free = n - offset;
    if free == 0 {
        let final_cost = total_cost(&terms, &poses, opts.huber_delta);
        return Ok(GraphSolution { poses, final_cost, iterations: 0, converged: true });
    }

    let mut cost = total_cost(&terms, &poses, opts.huber_delta);
    let mut lambda = opts.init_lambda;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        if cost <= opts.abs_cost_tol {
            converged = true;
            break;
        }
        // linearize
        let mut h = BlockSparse::new(free);
        let mut g = vec![Vec3::<T>::zero(); free];
        for term in &terms {
            let e = &term.edge;
            let r = residual(&e.z, &poses[e.from], &poses[e.to]);
            let (ja, jb) = residual_jacobians(&e.z, &poses[e.from], &poses[e.to]);
            // robust reweighting (Huber): scale the information matrix
            let mut info = e.information;
            if term.robust {
                if let Some(delta) = opts.huber_delta {
                    let s = r.dot(info.mul_vec(r)).sqrt();
                    if s > delta {
                        info = info.scale(delta / s);
                    }
                }
            }
            let fa = e.from as isize - offset as isize;
            let fb = e.to as isize - offset as isize;
            let ja_t_info = ja.transpose().mul(&info);
            let jb_t_info = jb.transpose().mul(&info);
            if fa >= 0 {
                let fa = fa as usize;
                h.add(fa, fa, &ja_t_info.mul(&ja));
                g[fa] = g[fa].add(ja_t_info.mul_vec(r));
            }
            if fb >= 0 {
                let fb = fb as usize;
                h.add(fb, fb, &jb_t_info.mul(&jb));
                g[fb] = g[fb].add(jb_t_info.mul_vec(r));
            }
            if fa >= 0 && fb >= 0 {
                let (fa, fb) = (fa as usize, fb as usize);
                // store the lower-triangle block: H[row][col] = Jrow^T info Jcol
                if fa > fb {
                    h.add(fa, fb, &ja_t_info.mul(&jb));
                } else {
                    h.add(fb, fa, &jb_t_info.mul(&ja));
                }
            }
        }

        // an unfixed gauge leaves the undamped system rank deficient
        if !opts.fix_gauge && h.clone().factorize().is_none() {
            return Err(GraphError::SingularSystem);
        }

        // solve (H + lambda I) dx = -g, retrying with more damping on
        // rejected steps
        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = h.clone();
            damped.add_lambda(lambda);
            let Some(factor) = damped.factorize() else {
                lambda = lambda * T::of(10.0);
                continue;
            };
            let neg_g: Vec<Vec3<T>> = g.iter().map(|v| v.scale(-T::one())).collect();
            let dx = factor.solve(&neg_g);

            let mut candidate = poses.clone();
            for (k, d) in dx.iter().enumerate() {
                let p = &mut candidate[k + offset];
                *p = Se2::new(p.t.x + d.v[0], p.t.y + d.v[1], p.yaw + d.v[2]);
            }
            let cand_cost = total_cost(&terms, &candidate, opts.huber_delta);
            if cand_cost <= cost {
                let rel_drop = if cost > T::zero() {
                    (cost - cand_cost) / cost
                } else {
                    T::zero()
                };
                poses = candidate;
                cost = cand_cost;
                lambda = (lambda / T::of(10.0)).max(T::of(1e-12));
                accepted = true;
                if rel_drop < opts.rel_cost_tol {
                    converged = true;
                }
                break;
            }
            lambda = lambda * T::of(10.0);
        }
        iterations += 1;
        if converged || !accepted {
            if !accepted && lambda > T::of(1e8) {
                // cannot improve: accept the current state as converged
                converged = true;
            }
            if converged {
                break;
            }
        }
    }

    Ok(GraphSolution { poses, final_cost: cost, iterations, converged })
}

/// Symmetric block-sparse matrix of 3x3 blocks, lower triangle stored
/// column-wise. Fill-in during the Cholesky factorization is created on
/// demand, so the chain-plus-loops structure stays cheap.
#[derive(Clone)]
struct BlockSparse<T> {
    n: usize,
    cols: Vec<BTreeMap<usize, Mat3<T>>>,
}

struct BlockFactor<T> {
    n: usize,
    cols: Vec<BTreeMap<usize, Mat3<T>>>,
}

impl<T: Real> BlockSparse<T> {
    fn new(n: usize) -> Self {
        Self { n, cols: vec![BTreeMap::new(); n] }
    }

    /// Accumulate into block (row, col), row >= col.
    fn add(&mut self, row: usize, col: usize, block: &Mat3<T>) {
        debug_assert!(row >= col);
        let e = self.cols[col].entry(row).or_insert_with(Mat3::zero);
        *e = e.add(block);
    }

    fn add_lambda(&mut self, lambda: T) {
        let scaled = Mat3::diag(lambda, lambda, lambda);
        for j in 0..self.n {
            let e = self.cols[j].entry(j).or_insert_with(Mat3::zero);
            *e = e.add(&scaled);
        }
    }

    /// In-place block Cholesky; `None` when a pivot is not positive
    /// definite. Pivots below a relative floor count as singular so an
    /// exactly rank-deficient system is not "factored" through rounding
    /// noise.
    fn factorize(mut self) -> Option<BlockFactor<T>> {
        let mut scale = T::zero();
        for j in 0..self.n {
            if let Some(d) = self.cols[j].get(&j) {
                for i in 0..3 {
                    scale = scale.max(d.m[i][i].abs());
                }
            }
        }
        let pivot_floor = scale * T::of(1e-12);
        for k in 0..self.n {
            let diag = self.cols[k].get(&k)?;
            let l_kk = diag.cholesky()?;
            for i in 0..3 {
                if l_kk.m[i][i] * l_kk.m[i][i] <= pivot_floor {
                    return None;
                }
            }
            // L_ik = A_ik L_kk^{-T}  (solve L_kk X^T = A_ik^T)
            let rows: Vec<usize> = self.cols[k].keys().copied().filter(|&i| i > k).collect();
            let mut l_col: Vec<(usize, Mat3<T>)> = Vec::with_capacity(rows.len());
            for i in &rows {
                let a_ik = self.cols[k][i];
                let mut x = Mat3::zero();
                let at = a_ik.transpose();
                for c in 0..3 {
                    let col = Vec3::new(at.m[0][c], at.m[1][c], at.m[2][c]);
                    let sol = l_kk.solve_lower(col);
                    for r in 0..3 {
                        x.m[r][c] = sol.v[r];
                    }
                }
                l_col.push((*i, x.transpose()));
            }
            // submatrix update: A_ij -= L_ik L_jk^T for i >= j > k
            for (jj, (j, l_jk)) in l_col.iter().enumerate() {
                let l_jk_t = l_jk.transpose();
                for (i, l_ik) in l_col.iter().skip(jj) {
                    let upd = l_ik.mul(&l_jk_t);
                    let e = self.cols[*j].entry(*i).or_insert_with(Mat3::zero);
                    *e = e.sub(&upd);
                }
            }
            // store factor column
            self.cols[k].insert(k, l_kk);
            for (i, l) in l_col {
                self.cols[k].insert(i, l);
            }
        }
        Some(BlockFactor { n: self.n, cols: self.cols })
    }
}

impl<T: Real> BlockFactor<T> {
    /// Solve `L L^T x = b`.
    fn solve(&self, b: &[Vec3<T>]) -> Vec<Vec3<T>> {
        let mut y: Vec<Vec3<T>> = b.to_vec();
        // forward: L y = b
        for k in 0..self.n {
            let l_kk = &self.cols[k][&k];
            let yk = l_kk.solve_lower(y[k]);
            y[k] = yk;
            for (&i, l_ik) in self.cols[k].range(k + 1..) {
                y[i] = y[i].sub(l_ik.mul_vec(yk));
            }
        }
        // backward: L^T x = y
        let mut x = y;
        for k in (0..self.n).rev() {
            let mut s = x[k];
            for (&i, l_ik) in self.cols[k].range(k + 1..) {
                s = s.sub(l_ik.transpose().mul_vec(x[i]));
            }
            x[k] = self.cols[k][&k].solve_lower_transpose(s);
        }
        x
    }
}
