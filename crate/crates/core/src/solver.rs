//! Stress minimization: find coordinates whose pairwise Euclidean distances
//! match a sparse table of target distances.
//!
//! The objective `f = Σ (‖X_i − X_j‖ − d_ij)²` is minimized by a trust-region
//! Newton method. Each step approximately minimizes the quadratic model
//! `2gᵀs + sᵀHs`, with `g = Jᵀr` and `H = JᵀJ + Σ r_e ∇²r_e`, using
//! Steihaug's truncated conjugate gradients: matrix-free Hessian products, a
//! block-Jacobi preconditioner with one d×d block per point, and a trust
//! region measured in the preconditioner's norm. `H` is indefinite away from
//! a minimum (entries whose embedded distance is too short contribute
//! negative curvature); Steihaug-CG follows such directions to the trust
//! region boundary. A step is accepted only if it strictly lowers the stress.
//!
//! Memory is linear in the number of table entries.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::DistanceTable;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, norm_inf};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers stress by less than this fraction.
    pub rel_tolerance: f64,
    /// Stop once the largest gradient component falls below this.
    pub grad_tolerance: f64,
    pub restarts: usize,
    /// Floor on pair distances when forming unit directions.
    pub epsilon: f64,
    /// Half-width of the random init box; `None` uses the mean target distance.
    pub init_scale: Option<f64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 500,
            rel_tolerance: 1e-9,
            grad_tolerance: 1e-12,
            restarts: 1,
            epsilon: 1e-12,
            init_scale: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.rel_tolerance > 0.0 && self.grad_tolerance > 0.0 && self.epsilon > 0.0) {
            return bad("tolerances must be positive");
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad("init_scale must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Tolerance,
    Gradient,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub initial_stress: f64,
    pub final_stress: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_time_secs: f64,
    /// Index of the restart whose result was kept.
    pub restart: usize,
    /// Universe ids with no incident distance; they keep their initial coordinates.
    pub isolated: Vec<String>,
    /// How each start ended, in start order.
    pub restart_terminations: Vec<Termination>,
    /// Stress after each accepted step of the kept restart, starting with the
    /// initial value.
    #[serde(skip)]
    pub stress_history: Vec<f64>,
}

impl SolveReport {
    /// Whether at least one start stopped on a tolerance rather than the
    /// iteration cap.
    pub fn converged(&self) -> bool {
        self.restart_terminations
            .iter()
            .any(|t| *t != Termination::MaxIterations)
    }
}

/// Indexed view of a distance table against an ordered id list.
#[derive(Clone, Debug)]
struct Problem {
    dim: usize,
    points: usize,
    pairs: Vec<(usize, usize)>,
    targets: Vec<f64>,
}

impl Problem {
    fn against(embedding: &Embedding, table: &DistanceTable) -> Result<Self> {
        let mut pairs = Vec::with_capacity(table.len());
        let mut targets = Vec::with_capacity(table.len());
        for (i, j, d) in table.iter() {
            let pi = embedding
                .position(i)
                .ok_or_else(|| Error::UnknownId(i.to_string()))?;
            let pj = embedding
                .position(j)
                .ok_or_else(|| Error::UnknownId(j.to_string()))?;
            pairs.push((pi, pj));
            targets.push(d);
        }
        Ok(Problem {
            dim: embedding.dim(),
            points: embedding.len(),
            pairs,
            targets,
        })
    }

    fn vars(&self) -> usize {
        self.points * self.dim
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            out[e] = pair_distance(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d])
                - self.targets[e];
        }
    }

    /// Unit directions `(X_i − X_j) / max(‖X_i − X_j‖, ε)`, one d-vector per
    /// entry; exactly coincident points get the first axis.
    fn directions(&self, x: &[f64], epsilon: f64, out: &mut [f64]) {
        let d = self.dim;
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            let row = &mut out[e * d..(e + 1) * d];
            let (xi, xj) = (&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            let len = pair_distance(xi, xj);
            if len == 0.0 {
                row.fill(0.0);
                row[0] = 1.0;
            } else {
                let scale = len.max(epsilon);
                for k in 0..d {
                    row[k] = (xi[k] - xj[k]) / scale;
                }
            }
        }
    }

    /// Curvature weights `r_e / ‖X_i − X_j‖`: the residual Hessian is
    /// `(I − uuᵀ) / ‖X_i − X_j‖` on the pair's blocks. Coincident pairs get 0.
    fn curvature(&self, x: &[f64], r: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            let len = pair_distance(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            out[e] = if len > 0.0 { r[e] / len } else { 0.0 };
        }
    }

    /// `out = Jᵀ w`
    fn jac_t_mul(&self, dirs: &[f64], w: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            let u = &dirs[e * d..(e + 1) * d];
            for k in 0..d {
                let t = w[e] * u[k];
                out[i * d + k] += t;
                out[j * d + k] -= t;
            }
        }
    }

    /// `out = H v` with `H = JᵀJ + Σ c_e (I − u_e u_eᵀ)`; returns `vᵀHv`.
    fn hess_mul(&self, dirs: &[f64], curv: &[f64], v: &[f64], out: &mut [f64]) -> f64 {
        let d = self.dim;
        out.fill(0.0);
        let mut quad = 0.0;
        let mut w = vec![0.0; d];
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            let u = &dirs[e * d..(e + 1) * d];
            let c = curv[e];
            let mut along = 0.0;
            let mut ww = 0.0;
            for k in 0..d {
                w[k] = v[i * d + k] - v[j * d + k];
                along += u[k] * w[k];
                ww += w[k] * w[k];
            }
            for k in 0..d {
                let t = along * u[k] + c * (w[k] - along * u[k]);
                out[i * d + k] += t;
                out[j * d + k] -= t;
            }
            quad += along * along + c * (ww - along * along);
        }
        quad
    }

    /// Per-point d×d diagonal blocks of `JᵀJ + Σ max(c_e, 0)(I − u_e u_eᵀ)`,
    /// the positive semidefinite part of `H`.
    fn precond_blocks(&self, dirs: &[f64], curv: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let dd = d * d;
        out.fill(0.0);
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            let u = &dirs[e * d..(e + 1) * d];
            let c = curv[e].max(0.0);
            for a in 0..d {
                for b in 0..d {
                    let mut t = (1.0 - c) * u[a] * u[b];
                    if a == b {
                        t += c;
                    }
                    out[i * dd + a * d + b] += t;
                    out[j * dd + a * d + b] += t;
                }
            }
        }
    }
}

fn pair_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// `Σ (‖X_i − X_j‖ − d_ij)²` over the table entries.
pub fn stress(embedding: &Embedding, table: &DistanceTable) -> Result<f64> {
    let problem = Problem::against(embedding, table)?;
    let mut r = vec![0.0; problem.pairs.len()];
    problem.residuals(embedding.coords(), &mut r);
    Ok(sum_sq(&r))
}

/// Jacobian of the residual vector: row `e` holds `+u_e` in the columns of
/// point `i` and `−u_e` in those of point `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseJacobian {
    dim: usize,
    cols: usize,
    pairs: Vec<(usize, usize)>,
    directions: Vec<f64>,
}

impl SparseJacobian {
    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Non-zero `(column, value)` pairs of one row, at most `2d` of them.
    pub fn row(&self, row: usize) -> Vec<(usize, f64)> {
        let d = self.dim;
        let (i, j) = self.pairs[row];
        let u = &self.directions[row * d..(row + 1) * d];
        let mut out = Vec::with_capacity(2 * d);
        out.extend((0..d).map(|k| (i * d + k, u[k])));
        out.extend((0..d).map(|k| (j * d + k, -u[k])));
        out
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.row(row)
            .into_iter()
            .filter(|&(c, _)| c == col)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|r| (0..self.cols).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

/// Residuals `‖X_i − X_j‖ − d_ij` in table order and their Jacobian with
/// respect to the embedding's coordinates (row-major, point by point).
pub fn residuals_and_jacobian(
    embedding: &Embedding,
    table: &DistanceTable,
    epsilon: f64,
) -> Result<(Vec<f64>, SparseJacobian)> {
    let problem = Problem::against(embedding, table)?;
    let x = embedding.coords();
    let mut r = vec![0.0; problem.pairs.len()];
    problem.residuals(x, &mut r);
    let mut dirs = vec![0.0; problem.pairs.len() * problem.dim];
    problem.directions(x, epsilon, &mut dirs);
    let jac = SparseJacobian {
        dim: problem.dim,
        cols: problem.vars(),
        pairs: problem.pairs,
        directions: dirs,
    };
    Ok((r, jac))
}

struct Run {
    x: Vec<f64>,
    initial: f64,
    final_stress: f64,
    iterations: usize,
    termination: Termination,
    history: Vec<f64>,
}

const CG_MAX_ITERS: usize = 400;
const ACCEPT_RATIO: f64 = 1e-4;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e32;

/// Block-diagonal preconditioner: the PSD blocks (shifted to be definite)
/// and their Cholesky factors.
struct Preconditioner {
    dim: usize,
    blocks: Vec<f64>,
    factors: Vec<f64>,
}

impl Preconditioner {
    fn new(points: usize, dim: usize) -> Self {
        Preconditioner {
            dim,
            blocks: vec![0.0; points * dim * dim],
            factors: vec![0.0; points * dim * dim],
        }
    }

    fn update(&mut self, problem: &Problem, dirs: &[f64], curv: &[f64]) {
        let d = self.dim;
        let dd = d * d;
        problem.precond_blocks(dirs, curv, &mut self.blocks);
        let max_diag = self
            .blocks
            .chunks(dd)
            .flat_map(|b| (0..d).map(move |a| b[a * d + a]))
            .fold(0.0f64, f64::max);
        // isolated points and rank-deficient blocks need a positive floor
        let shift = 1e-10 * if max_diag > 0.0 { max_diag } else { 1.0 };
        for block in self.blocks.chunks_mut(dd) {
            for a in 0..d {
                block[a * d + a] += shift;
            }
        }
        self.factors.copy_from_slice(&self.blocks);
        for (p, factor) in self.factors.chunks_mut(dd).enumerate() {
            if !cholesky(factor, d) {
                // rounding broke definiteness: fall back to the diagonal
                factor.fill(0.0);
                for a in 0..d {
                    factor[a * d + a] = self.blocks[p * dd + a * d + a].max(shift).sqrt();
                }
            }
        }
    }

    /// `out = M v`
    fn mul(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let dd = d * d;
        for (p, block) in self.blocks.chunks(dd).enumerate() {
            for a in 0..d {
                let mut s = 0.0;
                for b in 0..d {
                    s += block[a * d + b] * v[p * d + b];
                }
                out[p * d + a] = s;
            }
        }
    }

    /// `out = M⁻¹ v`
    fn solve(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let dd = d * d;
        out.copy_from_slice(v);
        for (p, factor) in self.factors.chunks(dd).enumerate() {
            cholesky_solve(factor, d, &mut out[p * d..(p + 1) * d]);
        }
    }

    fn norm_sq(&self, v: &[f64], scratch: &mut [f64]) -> f64 {
        self.mul(v, scratch);
        dot(v, scratch)
    }
}

/// Scratch space for Steihaug's truncated CG.
struct Steihaug {
    res: Vec<f64>,
    y: Vec<f64>,
    p: Vec<f64>,
    hp: Vec<f64>,
    mz: Vec<f64>,
    mp: Vec<f64>,
}

impl Steihaug {
    fn new(n: usize) -> Self {
        Steihaug {
            res: vec![0.0; n],
            y: vec![0.0; n],
            p: vec![0.0; n],
            hp: vec![0.0; n],
            mz: vec![0.0; n],
            mp: vec![0.0; n],
        }
    }

    /// Approximately minimizes `gᵀs + ½ sᵀHs` subject to `‖s‖_M ≤ radius`,
    /// stopping once the model gradient shrinks by `forcing`. Returns whether
    /// the step ends on the trust region boundary.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &mut self,
        problem: &Problem,
        dirs: &[f64],
        curv: &[f64],
        precond: &Preconditioner,
        grad: &[f64],
        radius: f64,
        forcing: f64,
        s: &mut [f64],
    ) -> bool {
        let n = problem.vars();
        s.fill(0.0);
        self.res.copy_from_slice(grad);
        let tol = forcing * dot(&self.res, &self.res).sqrt();
        precond.solve(&self.res, &mut self.y);
        for k in 0..n {
            self.p[k] = -self.y[k];
        }
        let mut ry = dot(&self.res, &self.y);

        for _ in 0..CG_MAX_ITERS.min(n.max(1)) {
            let kappa = problem.hess_mul(dirs, curv, &self.p, &mut self.hp);
            if kappa <= 0.0 || !kappa.is_finite() {
                self.to_boundary(precond, radius, s);
                return true;
            }
            let alpha = ry / kappa;
            precond.mul(s, &mut self.mz);
            precond.mul(&self.p, &mut self.mp);
            let ss = dot(s, &self.mz);
            let sp = dot(s, &self.mp);
            let pp = dot(&self.p, &self.mp);
            if ss + 2.0 * alpha * sp + alpha * alpha * pp >= radius * radius {
                self.to_boundary(precond, radius, s);
                return true;
            }
            for k in 0..n {
                s[k] += alpha * self.p[k];
                self.res[k] += alpha * self.hp[k];
            }
            if dot(&self.res, &self.res).sqrt() <= tol {
                break;
            }
            precond.solve(&self.res, &mut self.y);
            let ry_new = dot(&self.res, &self.y);
            let beta = ry_new / ry;
            ry = ry_new;
            for k in 0..n {
                self.p[k] = -self.y[k] + beta * self.p[k];
            }
        }
        false
    }

    /// Moves `s` along the current direction to `‖s‖_M = radius`.
    fn to_boundary(&mut self, precond: &Preconditioner, radius: f64, s: &mut [f64]) {
        precond.mul(s, &mut self.mz);
        precond.mul(&self.p, &mut self.mp);
        let a = dot(&self.p, &self.mp);
        let b = 2.0 * dot(s, &self.mp);
        let c = dot(s, &self.mz) - radius * radius;
        if a <= 0.0 {
            return;
        }
        let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
        for (sk, pk) in s.iter_mut().zip(&self.p) {
            *sk += tau * pk;
        }
    }
}

/// One trust-region Newton run from `x`.
fn minimize(problem: &Problem, mut x: Vec<f64>, config: &SolverConfig) -> Run {
    let n = problem.vars();
    let m = problem.pairs.len();
    let d = problem.dim;

    let mut r = vec![0.0; m];
    problem.residuals(&x, &mut r);
    let mut f = sum_sq(&r);
    let initial = f;
    let mut history = vec![f];

    let mut dirs = vec![0.0; m * d];
    let mut curv = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let linearize = |x: &[f64], r: &[f64], dirs: &mut [f64], curv: &mut [f64], grad: &mut [f64]| {
        problem.directions(x, config.epsilon, dirs);
        problem.curvature(x, r, curv);
        problem.jac_t_mul(dirs, r, grad);
    };
    linearize(&x, &r, &mut dirs, &mut curv, &mut grad);
    let grad0 = norm_inf(&grad).max(f64::MIN_POSITIVE);

    let mut precond = Preconditioner::new(problem.points, d);
    let mut cg = Steihaug::new(n);
    let mut step = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut r_new = vec![0.0; m];
    let mut scratch = vec![0.0; n];

    let mut radius = f64::NAN;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < config.max_iterations {
        let gnorm = norm_inf(&grad);
        if gnorm <= config.grad_tolerance {
            termination = Termination::Gradient;
            break;
        }
        iterations += 1;

        precond.update(problem, &dirs, &curv);
        if radius.is_nan() {
            // a tenth of the starting configuration's own size
            radius = 0.1 * precond.norm_sq(&x, &mut scratch).sqrt();
            if !(radius > 0.0 && radius.is_finite()) {
                radius = 1.0;
            }
        }

        let forcing = (gnorm / grad0).sqrt().clamp(1e-8, 0.1);
        let on_boundary = cg.solve(problem, &dirs, &curv, &precond, &grad, radius, forcing, &mut step);

        for k in 0..n {
            x_new[k] = x[k] + step[k];
        }
        problem.residuals(&x_new, &mut r_new);
        let f_new = sum_sq(&r_new);
        let quad = problem.hess_mul(&dirs, &curv, &step, &mut scratch);
        let predicted = -(2.0 * dot(&step, &grad) + quad);
        let rho = if predicted > 0.0 {
            (f - f_new) / predicted
        } else {
            -1.0
        };

        if rho < 0.25 {
            radius *= 0.25;
        } else if rho > 0.75 && on_boundary {
            radius *= 2.0;
        }

        if f_new < f && rho > ACCEPT_RATIO {
            let rel = (f - f_new) / f;
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut r, &mut r_new);
            f = f_new;
            history.push(f);
            linearize(&x, &r, &mut dirs, &mut curv, &mut grad);
            if rel < config.rel_tolerance {
                termination = Termination::Tolerance;
                break;
            }
        } else if !(radius > f64::MIN_POSITIVE) {
            // no representable step lowers stress any further
            termination = Termination::Tolerance;
            break;
        }
    }
    if termination == Termination::MaxIterations && norm_inf(&grad) <= config.grad_tolerance {
        termination = Termination::Gradient;
    }

    Run {
        x,
        initial,
        final_stress: f,
        iterations,
        termination,
        history,
    }
}

/// Places every id of the table's universe in `dim` dimensions.
///
/// Runs `config.restarts` independent random starts (seeds `seed`,
/// `seed + 1`, …) and keeps the lowest final stress; ties keep the earlier
/// restart.
pub fn solve_embedding(
    table: &DistanceTable,
    dim: usize,
    config: &SolverConfig,
) -> Result<(Embedding, SolveReport)> {
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if let Some((i, j, _)) = table.iter().find(|(_, _, d)| !d.is_finite()) {
        return Err(Error::NonFinite(i.to_string(), j.to_string()));
    }
    let started = Instant::now();

    let ids: Vec<String> = table.universe().iter().cloned().collect();
    let template = Embedding::from_parts(dim, config.seed, ids.clone(), vec![0.0; ids.len() * dim])?;
    let problem = Problem::against(&template, table)?;

    let mut touched = vec![false; ids.len()];
    for &(i, j) in &problem.pairs {
        touched[i] = true;
        touched[j] = true;
    }
    let isolated: Vec<String> = ids
        .iter()
        .zip(&touched)
        .filter(|(_, &t)| !t)
        .map(|(id, _)| id.clone())
        .collect();

    let half_width = config.init_scale.unwrap_or_else(|| table.mean_distance());
    let half_width = if half_width > 0.0 { half_width } else { 1.0 };

    let mut best: Option<(usize, Run)> = None;
    let mut terminations = Vec::with_capacity(config.restarts);
    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart as u64));
        let x0: Vec<f64> = (0..problem.vars())
            .map(|_| rng.gen_range(-half_width..=half_width))
            .collect();
        let run = minimize(&problem, x0, config);
        terminations.push(run.termination);
        let better = match &best {
            None => true,
            Some((_, b)) => run.final_stress < b.final_stress,
        };
        if better {
            best = Some((restart, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");

    let embedding = Embedding::from_parts(dim, config.seed, ids, run.x)?;
    let report = SolveReport {
        initial_stress: run.initial,
        final_stress: run.final_stress,
        iterations: run.iterations,
        termination: run.termination,
        wall_time_secs: started.elapsed().as_secs_f64(),
        restart,
        isolated,
        restart_terminations: terminations,
        stress_history: run.history,
    };
    Ok((embedding, report))
}

/// Solves for one new point with every existing coordinate held fixed.
///
/// Starts from the centroid of the referenced anchors, then from
/// `config.restarts` random points in their bounding box; keeps the lowest
/// stress (earliest start on ties). `embedding` is never modified.
pub fn insert_point(
    embedding: &Embedding,
    new_distances: &BTreeMap<String, f64>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    config.validate()?;
    if new_distances.is_empty() {
        return Err(Error::NoAnchors);
    }
    let started = Instant::now();
    let d = embedding.dim();
    let mut anchors = Vec::with_capacity(new_distances.len() * d);
    let mut targets = Vec::with_capacity(new_distances.len());
    for (id, &dist) in new_distances {
        let coord = embedding
            .get(id)
            .ok_or_else(|| Error::UnknownId(id.clone()))?;
        if !dist.is_finite() || dist < 0.0 {
            return Err(Error::NonFinite(id.clone(), "<new>".into()));
        }
        anchors.extend_from_slice(coord);
        targets.push(dist);
    }
    let anchored = Anchored {
        dim: d,
        anchors: &anchors,
        targets: &targets,
    };

    let count = targets.len() as f64;
    let mut centroid = vec![0.0; d];
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for a in anchors.chunks(d) {
        for k in 0..d {
            centroid[k] += a[k] / count;
            lo[k] = lo[k].min(a[k]);
            hi[k] = hi[k].max(a[k]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![centroid];
    for _ in 0..config.restarts {
        starts.push(
            (0..d)
                .map(|k| if hi[k] > lo[k] { rng.gen_range(lo[k]..=hi[k]) } else { lo[k] })
                .collect(),
        );
    }

    let mut best: Option<(usize, Run)> = None;
    let mut terminations = Vec::new();
    for (k, start) in starts.into_iter().enumerate() {
        let run = anchored.minimize(start, config);
        terminations.push(run.termination);
        let better = match &best {
            None => true,
            Some((_, b)) => run.final_stress < b.final_stress,
        };
        if better {
            best = Some((k, run));
        }
    }
    let (restart, run) = best.expect("centroid start");
    let report = SolveReport {
        initial_stress: run.initial,
        final_stress: run.final_stress,
        iterations: run.iterations,
        termination: run.termination,
        wall_time_secs: started.elapsed().as_secs_f64(),
        restart,
        isolated: Vec::new(),
        restart_terminations: terminations,
        stress_history: run.history,
    };
    Ok((run.x, report))
}

/// One free point against fixed anchors; dense d×d normal equations.
struct Anchored<'a> {
    dim: usize,
    anchors: &'a [f64],
    targets: &'a [f64],
}

impl Anchored<'_> {
    fn stress(&self, x: &[f64]) -> f64 {
        self.anchors
            .chunks(self.dim)
            .zip(self.targets)
            .map(|(a, t)| {
                let r = pair_distance(x, a) - t;
                r * r
            })
            .sum()
    }

    /// Returns gradient `Jᵀr` and normal matrix `JᵀJ`.
    fn linearize(&self, x: &[f64], epsilon: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut u = vec![0.0; d];
        for (a, t) in self.anchors.chunks(d).zip(self.targets) {
            let len = pair_distance(x, a);
            if len == 0.0 {
                u.fill(0.0);
                u[0] = 1.0;
            } else {
                let s = len.max(epsilon);
                for k in 0..d {
                    u[k] = (x[k] - a[k]) / s;
                }
            }
            let r = len - t;
            for p in 0..d {
                g[p] += u[p] * r;
                for q in 0..d {
                    h[p * d + q] += u[p] * u[q];
                }
            }
        }
        (g, h)
    }

    fn minimize(&self, mut x: Vec<f64>, config: &SolverConfig) -> Run {
        let d = self.dim;
        let mut f = self.stress(&x);
        let initial = f;
        let mut history = vec![f];
        let (mut g, mut h) = self.linearize(&x, config.epsilon);
        let mut lambda = LAMBDA_INIT;
        let mut nu = 2.0;
        let mut iterations = 0;
        let mut termination = Termination::MaxIterations;

        while iterations < config.max_iterations {
            if norm_inf(&g) <= config.grad_tolerance {
                termination = Termination::Gradient;
                break;
            }
            iterations += 1;
            let max_diag = (0..d).map(|k| h[k * d + k]).fold(0.0f64, f64::max);
            let floor = 1e-12 * max_diag.max(1.0);
            let mut a = h.clone();
            for k in 0..d {
                a[k * d + k] += lambda * h[k * d + k].max(floor);
            }
            let mut step: Vec<f64> = g.iter().map(|v| -v).collect();
            if cholesky(&mut a, d) {
                cholesky_solve(&a, d, &mut step);
            } else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            }
            let x_new: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let f_new = self.stress(&x_new);
            let mut hs = 0.0;
            for p in 0..d {
                for q in 0..d {
                    hs += step[p] * h[p * d + q] * step[q];
                }
            }
            let predicted = -(2.0 * dot(&step, &g) + hs);
            if f_new < f && predicted > 0.0 {
                let rho = (f - f_new) / predicted;
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let rel = (f - f_new) / f;
                x = x_new;
                f = f_new;
                history.push(f);
                (g, h) = self.linearize(&x, config.epsilon);
                if rel < config.rel_tolerance {
                    termination = Termination::Tolerance;
                    break;
                }
            } else {
                lambda *= nu;
                nu *= 2.0;
                if !(lambda < LAMBDA_MAX) {
                    termination = Termination::Tolerance;
                    break;
                }
            }
        }
        if termination == Termination::MaxIterations && norm_inf(&g) <= config.grad_tolerance {
            termination = Termination::Gradient;
        }
        Run {
            x,
            initial,
            final_stress: f,
            iterations,
            termination,
            history,
        }
    }
}
