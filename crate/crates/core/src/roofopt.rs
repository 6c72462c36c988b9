//! One-sided optimizers for convex-roof quantities and for one-way
//! unlocalizable entanglement.
//!
//! Every ensemble of a rank-`r` state `rho = sum_k lambda_k |e_k><e_k|` with
//! `m` members is `sqrt(p_j)|psi_j> = sum_k V_jk sqrt(lambda_k) |e_k>` for an
//! `m x r` isometry `V` (the first `r` columns of an `m x m` unitary).
//! Rank-one measurements with `N` outcomes on a `d`-dimensional system are
//! likewise the rows of an `N x d` isometry. Both searches therefore run over
//! the same manifold: the engine keeps the current isometry `V` and moves by
//! left-multiplying with `exp(i H)`, `H` Hermitian with `m^2` real coordinates.
//!
//! The objective is a sum of per-row terms, and a single coordinate of `H`
//! only mixes two rows, so a central-difference gradient costs `O(m^2)`
//! row evaluations.
//!
//! Results are one-sided: a maximizer reports a value no larger than the
//! true maximum, a minimizer one no smaller than the true minimum.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::densemath::{self, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::measures;
use crate::par;
use crate::qstate::{Bipartition, CutLayout, DensityMatrix, DimVector, PureState, RANK_TOL};
use crate::rng;

/// Ensemble members and measurement outcomes with smaller weight are dropped.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
const MAX_CARDINALITY: usize = 16;
const MAX_HALVINGS: usize = 30;
const ARMIJO: f64 = 1e-4;
const QUIET_ITERATIONS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Central-difference step in generator coordinates.
    pub gradient_step: f64,
    pub objective_tolerance: f64,
    /// Ensemble size; `None` means `r^2` capped at 16 (never below `r`).
    pub ensemble_cardinality: Option<usize>,
    /// Measurement outcome count; `None` means `d^2` for a `d`-dimensional system.
    pub measurement_outcomes: Option<usize>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iterations: 300,
            gradient_step: 1e-4,
            objective_tolerance: 1e-7,
            ensemble_cardinality: None,
            measurement_outcomes: None,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("optimizer {what} must be positive")));
        if self.restarts == 0 {
            return bad("restarts");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations");
        }
        if !self.gradient_step.is_finite() || self.gradient_step <= 0.0 {
            return bad("gradient_step");
        }
        if !self.objective_tolerance.is_finite() || self.objective_tolerance <= 0.0 {
            return bad("objective_tolerance");
        }
        if self.ensemble_cardinality == Some(0) {
            return bad("ensemble_cardinality");
        }
        if self.measurement_outcomes == Some(0) {
            return bad("measurement_outcomes");
        }
        Ok(())
    }

    fn cardinality_for(&self, rank: usize) -> Result<usize> {
        match self.ensemble_cardinality {
            Some(m) if m < rank => Err(Error::InvalidArgument(format!(
                "ensemble cardinality {m} is below the state rank {rank}"
            ))),
            Some(m) => Ok(m),
            None => Ok((rank * rank).min(MAX_CARDINALITY).max(rank)),
        }
    }

    fn outcomes_for(&self, dim: usize) -> Result<usize> {
        match self.measurement_outcomes {
            Some(n) if n < dim => Err(Error::InvalidArgument(format!(
                "measurement outcome count {n} is below the measured dimension {dim}"
            ))),
            Some(n) => Ok(n),
            None => Ok(dim * dim),
        }
    }

    /// Same schedule with twice the restarts; the first half of the restarts
    /// are identical to the original run's.
    pub fn escalated(&self) -> Self {
        Self { restarts: self.restarts * 2, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    /// The reported value is at most the true value (maximizers).
    LowerBoundOfTrue,
    /// The reported value is at least the true value (minimizers).
    UpperBoundOfTrue,
}

impl BoundDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundDirection::LowerBoundOfTrue => "lower_bound_of_true",
            BoundDirection::UpperBoundOfTrue => "upper_bound_of_true",
        }
    }
}

/// Pure-state decomposition of a density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub members: Vec<(f64, PureState)>,
    pub target_dims: DimVector,
}

impl Ensemble {
    /// `sum_j p_j |psi_j><psi_j|`.
    pub fn mixture(&self) -> ComplexMatrix {
        let d = self.target_dims.total();
        let mut out = ComplexMatrix::zeros(d, d);
        for (p, psi) in &self.members {
            let a = psi.amplitudes();
            for i in 0..d {
                let ai = a[i] * *p;
                for j in 0..d {
                    out[(i, j)] += ai * a[j].conj();
                }
            }
        }
        out
    }

    pub fn total_probability(&self) -> f64 {
        self.members.iter().map(|(p, _)| p).sum()
    }

    /// `sum_j p_j E(psi_j)` with `E` the entanglement entropy across `cut`.
    pub fn average_entropy(&self, cut: &Bipartition) -> Result<f64> {
        self.members
            .iter()
            .map(|(p, psi)| Ok(p * measures::entropy_of_entanglement(psi, cut)?))
            .sum()
    }

    /// `sum_j p_j tau(psi_j)` for two-qubit members.
    pub fn average_tangle(&self) -> Result<f64> {
        let cut = Bipartition::new(&[0], 2)?;
        self.members
            .iter()
            .map(|(p, psi)| Ok(p * measures::tangle_pure_cut(psi, &cut)?))
            .sum()
    }
}

/// Rank-one POVM `M_x = |v_x><v_x|` on one subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Measurement {
    pub dim: usize,
    pub outcome_vectors: Vec<Vec<C64>>,
}

impl Rank1Measurement {
    /// `max |sum_x |v_x><v_x| - I|` entrywise.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
        for v in &self.outcome_vectors {
            sum = &sum + &ComplexMatrix::outer(v);
        }
        sum.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    pub fn computational_basis(dim: usize) -> Self {
        let outcome_vectors = (0..dim)
            .map(|x| {
                let mut v = vec![C64::new(0.0, 0.0); dim];
                v[x] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Self { dim, outcome_vectors }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Ensemble(Ensemble),
    Measurement(Rank1Measurement),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub value: f64,
    pub bound_direction: BoundDirection,
    pub witness: Witness,
    /// Iterations of the winning restart.
    pub iterations_used: usize,
    pub converged: bool,
    /// True when no search was needed (pure-state fast paths).
    pub exact: bool,
}

/// Hermitian matrix from `m^2` real coordinates: the diagonal first, then
/// `(re, im)` of each upper-triangular entry in row-major order.
pub fn hermitian_from_params(m: usize, params: &[f64]) -> Result<ComplexMatrix> {
    if params.len() != m * m {
        return Err(Error::InvalidArgument(format!(
            "{} parameters for a {m}x{m} generator (expected {})",
            params.len(),
            m * m
        )));
    }
    let mut h = ComplexMatrix::zeros(m, m);
    for j in 0..m {
        h[(j, j)] = C64::new(params[j], 0.0);
    }
    let mut idx = m;
    for j in 0..m {
        for k in (j + 1)..m {
            let z = C64::new(params[idx], params[idx + 1]);
            h[(j, k)] = z;
            h[(k, j)] = z.conj();
            idx += 2;
        }
    }
    Ok(h)
}

/// Leading eigenpairs of `rho` above the rank threshold, largest first:
/// returns the `d x r` matrix with columns `sqrt(lambda_k) e_k`.
fn weighted_eigenbasis(rho: &DensityMatrix) -> ComplexMatrix {
    let eig = densemath::eig_hermitian(rho.matrix()).expect("density matrices are Hermitian");
    let d = rho.dim();
    let kept: Vec<usize> = (0..d).rev().filter(|&k| eig.values[k] > RANK_TOL).collect();
    let r = kept.len().max(1);
    let mut w = ComplexMatrix::zeros(d, r);
    for (slot, &k) in kept.iter().enumerate() {
        let s = eig.values[k].sqrt();
        for i in 0..d {
            w[(i, slot)] = eig.vectors[(i, k)] * s;
        }
    }
    w
}

fn isometry_from_params(m: usize, cols: usize, params: &[f64]) -> Result<ComplexMatrix> {
    let u = densemath::unitary_from_generator(&hermitian_from_params(m, params)?)?;
    let mut v = ComplexMatrix::zeros(m, cols);
    for j in 0..m {
        for k in 0..cols {
            v[(j, k)] = u[(j, k)];
        }
    }
    Ok(v)
}

fn ensemble_from_rows(rho: &DensityMatrix, weighted: &ComplexMatrix, v: &ComplexMatrix) -> Ensemble {
    let d = rho.dim();
    let r = weighted.cols();
    let mut members = Vec::new();
    for j in 0..v.rows() {
        let row = v.row(j);
        let amps: Vec<C64> = (0..d)
            .map(|i| (0..r).map(|k| weighted[(i, k)] * row[k]).sum())
            .collect();
        let p: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if p < PROBABILITY_FLOOR {
            continue;
        }
        let psi = PureState::normalized(rho.dims().clone(), amps).expect("nonzero member");
        members.push((p, psi));
    }
    Ensemble { members, target_dims: rho.dims().clone() }
}

/// Ensemble of `rho` generated by the first `rank(rho)` columns of
/// `exp(i H(params))`, `H` an `m x m` Hermitian generator.
pub fn ensemble_from_isometry(rho: &DensityMatrix, params: &[f64], m: usize) -> Result<Ensemble> {
    let weighted = weighted_eigenbasis(rho);
    let r = weighted.cols();
    if m < r {
        return Err(Error::InvalidArgument(format!(
            "cardinality {m} is below the state rank {r}"
        )));
    }
    let v = isometry_from_params(m, r, params)?;
    Ok(ensemble_from_rows(rho, &weighted, &v))
}

/// Rank-one measurement whose outcome vectors are the rows of the first
/// `dim` columns of `exp(i H(params))`, `H` an `outcomes x outcomes` generator.
pub fn measurement_from_isometry(dim: usize, outcomes: usize, params: &[f64]) -> Result<Rank1Measurement> {
    if outcomes < dim {
        return Err(Error::InvalidArgument(format!(
            "{outcomes} outcomes cannot resolve a {dim}-dimensional system"
        )));
    }
    let v = isometry_from_params(outcomes, dim, params)?;
    Ok(measurement_from_rows(&v))
}

fn measurement_from_rows(v: &ComplexMatrix) -> Rank1Measurement {
    Rank1Measurement {
        dim: v.cols(),
        outcome_vectors: (0..v.rows()).map(|x| v.row(x).to_vec()).collect(),
    }
}

/// `S(rho_A) - sum_x p_x S(rho_A^x)` for a measurement on subsystem 1 of a
/// two-subsystem state.
pub fn measurement_objective(rho_ab: &DensityMatrix, meas: &Rank1Measurement) -> Result<f64> {
    let term = UeTerms::new(rho_ab)?;
    if meas.dim != term.db {
        return Err(Error::Dimension(format!(
            "measurement on dimension {} applied to a subsystem of dimension {}",
            meas.dim, term.db
        )));
    }
    let mut scratch = Scratch::default();
    let sum: f64 = meas
        .outcome_vectors
        .iter()
        .map(|w| term.term(w, &mut scratch))
        .sum();
    Ok(term.offset - sum)
}

// ---------------------------------------------------------------------------
// Objectives

#[derive(Default)]
struct Scratch {
    v: Vec<C64>,
    sigma: Vec<C64>,
}

/// Objective of the form `offset + sign * sum_rows term(row)`.
trait RowObjective: Sync {
    fn term(&self, row: &[C64], scratch: &mut Scratch) -> f64;
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PureMeasure {
    Entropy,
    Tangle,
}

/// Ensemble-average objective: each row maps to an unnormalized member.
struct RoofTerms {
    weighted: ComplexMatrix,
    layout: CutLayout,
    measure: PureMeasure,
}

impl RowObjective for RoofTerms {
    fn term(&self, row: &[C64], s: &mut Scratch) -> f64 {
        let d = self.weighted.rows();
        let r = self.weighted.cols();
        s.v.clear();
        let w = self.weighted.as_slice();
        for i in 0..d {
            let wi = &w[i * r..(i + 1) * r];
            s.v.push(wi.iter().zip(row).map(|(a, b)| a * b).sum());
        }
        let dk = self.layout.dim_keep;
        s.sigma.resize(dk * dk, C64::new(0.0, 0.0));
        self.layout.reduce_vector_into(&s.v, &mut s.sigma);
        let p: f64 = (0..dk).map(|i| s.sigma[i * dk + i].re).sum();
        if p < PROBABILITY_FLOOR {
            return 0.0;
        }
        match self.measure {
            PureMeasure::Entropy => p * measures::entropy_of_unnormalized(dk, &s.sigma, p),
            PureMeasure::Tangle => measures::tangle_of_unnormalized_qubit(&s.sigma, p),
        }
    }
}

/// Conditional-entropy terms `p_x S(rho_A^x)` for outcome vectors on B.
struct UeTerms {
    da: usize,
    db: usize,
    /// `blocks[a * da + a']` is the `db x db` block `<a| rho |a'>`, row-major.
    blocks: Vec<Vec<C64>>,
    offset: f64,
}

impl UeTerms {
    fn new(rho_ab: &DensityMatrix) -> Result<Self> {
        if rho_ab.n_parties() != 2 {
            return Err(Error::InvalidArgument(format!(
                "unlocalizable entanglement needs a two-subsystem state (got {})",
                rho_ab.n_parties()
            )));
        }
        let (da, db) = (rho_ab.dims().as_slice()[0], rho_ab.dims().as_slice()[1]);
        let m = rho_ab.matrix();
        let mut blocks = Vec::with_capacity(da * da);
        for a in 0..da {
            for a2 in 0..da {
                let mut blk = Vec::with_capacity(db * db);
                for b in 0..db {
                    for b2 in 0..db {
                        blk.push(m[(a * db + b, a2 * db + b2)]);
                    }
                }
                blocks.push(blk);
            }
        }
        let offset = measures::von_neumann_entropy(&rho_ab.partial_trace(&[0])?);
        Ok(Self { da, db, blocks, offset })
    }
}

impl RowObjective for UeTerms {
    fn term(&self, w: &[C64], s: &mut Scratch) -> f64 {
        let (da, db) = (self.da, self.db);
        s.sigma.resize(da * da, C64::new(0.0, 0.0));
        for a in 0..da {
            for a2 in a..da {
                let blk = &self.blocks[a * da + a2];
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..db {
                    let mut inner = C64::new(0.0, 0.0);
                    for b2 in 0..db {
                        inner += blk[b * db + b2] * w[b2];
                    }
                    acc += w[b].conj() * inner;
                }
                s.sigma[a * da + a2] = acc;
                s.sigma[a2 * da + a] = acc.conj();
            }
        }
        let p: f64 = (0..da).map(|i| s.sigma[i * da + i].re).sum();
        if p < PROBABILITY_FLOOR {
            return 0.0;
        }
        p * measures::entropy_of_unnormalized(da, &s.sigma, p)
    }
}

// ---------------------------------------------------------------------------
// Engine

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sense {
    /// Maximize the sum of row terms.
    MaximizeTerms,
    /// Minimize the sum of row terms.
    MinimizeTerms,
}

struct RestartOutcome {
    v: ComplexMatrix,
    iterations: usize,
    converged: bool,
}

struct Engine<'a, O: RowObjective> {
    obj: &'a O,
    rows: usize,
    cols: usize,
    /// Loss = weight * sum of terms; always minimized.
    weight: f64,
    cfg: &'a OptimizerConfig,
}

fn random_isometry(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut g = rng::generator(seed);
    let mut v = ComplexMatrix::zeros(rows, cols);
    for z in v.as_mut_slice() {
        let re: f64 = StandardNormal.sample(&mut g);
        let im: f64 = StandardNormal.sample(&mut g);
        *z = C64::new(re, im);
    }
    densemath::orthonormalize_columns(&mut v);
    v
}

impl<'a, O: RowObjective> Engine<'a, O> {
    fn new(obj: &'a O, rows: usize, cols: usize, sense: Sense, cfg: &'a OptimizerConfig) -> Self {
        let weight = match sense {
            Sense::MaximizeTerms => -1.0,
            Sense::MinimizeTerms => 1.0,
        };
        Self { obj, rows, cols, weight, cfg }
    }

    fn terms(&self, v: &ComplexMatrix, s: &mut Scratch) -> Vec<f64> {
        (0..self.rows).map(|j| self.obj.term(v.row(j), s)).collect()
    }

    fn loss(&self, terms: &[f64]) -> f64 {
        self.weight * terms.iter().sum::<f64>()
    }

    /// Central differences of the loss along each generator coordinate of
    /// `exp(i t H) V`. Diagonal generators only rephase rows, which no
    /// objective sees, so their entries are zero.
    fn gradient(&self, v: &ComplexMatrix, s: &mut Scratch, grad: &mut [f64]) {
        let (m, r) = (self.rows, self.cols);
        let h = self.cfg.gradient_step;
        let (c, sn) = (h.cos(), h.sin());
        let mut rj = vec![C64::new(0.0, 0.0); r];
        let mut rk = vec![C64::new(0.0, 0.0); r];
        grad[..m].iter_mut().for_each(|g| *g = 0.0);
        let mut idx = m;
        let i = C64::new(0.0, 1.0);
        for j in 0..m {
            for k in (j + 1)..m {
                let (vj, vk) = (v.row(j), v.row(k));
                // Real part: rows mix with [[c, i s], [i s, c]]; imaginary part
                // with [[c, -s], [s, c]]. `t = -h` flips the sign of s.
                for (slot, imag) in [(0usize, false), (1, true)] {
                    let mut diff = 0.0;
                    for sign in [1.0, -1.0] {
                        let s_ = sn * sign;
                        for q in 0..r {
                            if imag {
                                rj[q] = vj[q] * c - vk[q] * s_;
                                rk[q] = vj[q] * s_ + vk[q] * c;
                            } else {
                                rj[q] = vj[q] * c + i * vk[q] * s_;
                                rk[q] = i * vj[q] * s_ + vk[q] * c;
                            }
                        }
                        let t = self.obj.term(&rj, s) + self.obj.term(&rk, s);
                        diff += sign * t;
                    }
                    grad[idx + slot] = self.weight * diff / (2.0 * h);
                }
                idx += 2;
            }
        }
    }

    fn run(&self, seed: u64) -> RestartOutcome {
        let (m, r) = (self.rows, self.cols);
        let mut s = Scratch::default();
        let mut v = random_isometry(m, r, seed);
        let mut terms = self.terms(&v, &mut s);
        let mut loss = self.loss(&terms);
        let mut grad = vec![0.0; m * m];
        let mut step: f64 = 1.0;
        let mut quiet = 0;
        let mut iterations = 0;
        let mut converged = false;

        for _ in 0..self.cfg.max_iterations {
            iterations += 1;
            self.gradient(&v, &mut s, &mut grad);
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2 < 1e-28 {
                converged = true;
                break;
            }
            let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
            let h = hermitian_from_params(m, &dir).expect("generator size");
            let eig = densemath::eig_hermitian(&h).expect("generator is Hermitian");
            let qv = eig.vectors.adjoint().matmul(&v).expect("shapes");
            let spread = eig.values.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
            let mut t = (2.0 * step).min(PI / spread);

            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial = rotate(&eig.vectors, &eig.values, &qv, t);
                let trial_terms = self.terms(&trial, &mut s);
                let trial_loss = self.loss(&trial_terms);
                if trial_loss <= loss - ARMIJO * t * gnorm2 {
                    accepted = Some((trial, trial_loss));
                    break;
                }
                t *= 0.5;
            }
            let Some((mut next, next_loss)) = accepted else {
                converged = true;
                break;
            };
            densemath::orthonormalize_columns(&mut next);
            v = next;
            terms = self.terms(&v, &mut s);
            let new_loss = self.loss(&terms);
            debug_assert!((new_loss - next_loss).abs() < 1e-9);
            let delta = loss - new_loss;
            loss = new_loss;
            step = t;
            if delta.abs() < self.cfg.objective_tolerance {
                quiet += 1;
                if quiet >= QUIET_ITERATIONS {
                    converged = true;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        RestartOutcome { v, iterations, converged }
    }
}

/// `Q diag(exp(i t eta)) (Q^dagger V)`.
fn rotate(q: &ComplexMatrix, eta: &[f64], qv: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let m = q.rows();
    let cols = qv.cols();
    let mut scaled = qv.clone();
    for (l, &e) in eta.iter().enumerate() {
        let ph = C64::from_polar(1.0, t * e);
        for z in scaled.row_mut(l) {
            *z *= ph;
        }
    }
    let mut out = ComplexMatrix::zeros(m, cols);
    for j in 0..m {
        for l in 0..m {
            let a = q[(j, l)];
            let src = scaled.row(l);
            let dst = out.row_mut(j);
            for (d, &b) in dst.iter_mut().zip(src) {
                *d += a * b;
            }
        }
    }
    out
}

/// Runs all restarts and keeps the best by `better(candidate, incumbent)`,
/// scanning in restart order so ties go to the lowest index.
fn best_of_restarts<O, W>(
    engine: &Engine<'_, O>,
    cfg: &OptimizerConfig,
    score: W,
    maximize: bool,
) -> (ComplexMatrix, f64, usize, bool)
where
    O: RowObjective,
    W: Fn(&ComplexMatrix) -> f64 + Sync,
{
    let outcomes = par::map_indices(cfg.restarts, |k| {
        let out = engine.run(rng::mix(cfg.seed, k as u64));
        let value = score(&out.v);
        (out, value)
    });
    let mut best: Option<(RestartOutcome, f64)> = None;
    for (out, value) in outcomes {
        let better = match &best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    value > *b
                } else {
                    value < *b
                }
            }
        };
        if better {
            best = Some((out, value));
        }
    }
    let (out, value) = best.expect("at least one restart");
    (out.v, value, out.iterations, out.converged)
}

fn check_cut(rho: &DensityMatrix, cut: &Bipartition) -> Result<()> {
    if cut.n_parties() != rho.n_parties() {
        return Err(Error::InvalidArgument(format!(
            "bipartition {cut} does not cover the {} subsystems of the state",
            rho.n_parties()
        )));
    }
    Ok(())
}

fn smaller_side(dims: &DimVector, cut: &Bipartition) -> Vec<usize> {
    if dims.total_of(cut.side_a()) <= dims.total_of(cut.side_b()) {
        cut.side_a().to_vec()
    } else {
        cut.side_b().to_vec()
    }
}

fn roof(
    rho: &DensityMatrix,
    cut: &Bipartition,
    cfg: &OptimizerConfig,
    measure: PureMeasure,
    maximize: bool,
) -> Result<OptResult> {
    cfg.validate()?;
    check_cut(rho, cut)?;
    let direction = if maximize {
        BoundDirection::LowerBoundOfTrue
    } else {
        BoundDirection::UpperBoundOfTrue
    };
    let weighted = weighted_eigenbasis(rho);
    let r = weighted.cols();
    let recompute = |e: &Ensemble| -> f64 {
        match measure {
            PureMeasure::Entropy => e.average_entropy(cut).expect("cut checked"),
            PureMeasure::Tangle => e.average_tangle().expect("two qubits checked"),
        }
    };

    if r == 1 {
        let v = ComplexMatrix::identity(1);
        let ensemble = ensemble_from_rows(rho, &weighted, &v);
        let value = recompute(&ensemble);
        return Ok(OptResult {
            value,
            bound_direction: direction,
            witness: Witness::Ensemble(ensemble),
            iterations_used: 0,
            converged: true,
            exact: true,
        });
    }

    let m = cfg.cardinality_for(r)?;
    let keep = match measure {
        PureMeasure::Entropy => smaller_side(rho.dims(), cut),
        PureMeasure::Tangle => cut.side_a().to_vec(),
    };
    let obj = RoofTerms {
        layout: CutLayout::new(rho.dims(), &keep),
        weighted: weighted.clone(),
        measure,
    };
    let sense = if maximize { Sense::MaximizeTerms } else { Sense::MinimizeTerms };
    let engine = Engine::new(&obj, m, r, sense, cfg);
    let score = |v: &ComplexMatrix| recompute(&ensemble_from_rows(rho, &weighted, v));
    let (v, value, iterations_used, converged) = best_of_restarts(&engine, cfg, score, maximize);
    Ok(OptResult {
        value,
        bound_direction: direction,
        witness: Witness::Ensemble(ensemble_from_rows(rho, &weighted, &v)),
        iterations_used,
        converged,
        exact: false,
    })
}

/// Entanglement of assistance: the largest average entanglement entropy
/// across `cut` over pure-state decompositions of `rho`. Lower bound.
pub fn maximize_roof(rho: &DensityMatrix, cut: &Bipartition, cfg: &OptimizerConfig) -> Result<OptResult> {
    roof(rho, cut, cfg, PureMeasure::Entropy, true)
}

/// Entanglement of formation: the smallest average entanglement entropy
/// across `cut` over pure-state decompositions of `rho`. Upper bound.
pub fn minimize_roof(rho: &DensityMatrix, cut: &Bipartition, cfg: &OptimizerConfig) -> Result<OptResult> {
    roof(rho, cut, cfg, PureMeasure::Entropy, false)
}

/// Tangle of assistance of a two-qubit state: the largest average squared
/// concurrence over decompositions. Lower bound.
pub fn tangle_of_assistance_2q(rho: &DensityMatrix, cfg: &OptimizerConfig) -> Result<OptResult> {
    if rho.dims().as_slice() != [2, 2] {
        return Err(Error::Unsupported(format!(
            "tangle of assistance is defined here for two-qubit states (dims 2,2); got dims [{}]",
            rho.dims()
        )));
    }
    roof(rho, &Bipartition::new(&[0], 2)?, cfg, PureMeasure::Tangle, true)
}

/// One-way unlocalizable entanglement of `rho_ab`: the minimum over rank-one
/// measurements on B of `S(rho_A) - sum_x p_x S(rho_A^x)`. Upper bound.
pub fn unlocalizable_entanglement(rho_ab: &DensityMatrix, cfg: &OptimizerConfig) -> Result<OptResult> {
    cfg.validate()?;
    let terms = UeTerms::new(rho_ab)?;
    let db = terms.db;

    if rho_ab.rank() == 1 {
        // Any rank-one measurement on B leaves A pure.
        let meas = Rank1Measurement::computational_basis(db);
        let value = measurement_objective(rho_ab, &meas)?.max(0.0);
        return Ok(OptResult {
            value,
            bound_direction: BoundDirection::UpperBoundOfTrue,
            witness: Witness::Measurement(meas),
            iterations_used: 0,
            converged: true,
            exact: true,
        });
    }

    let n = cfg.outcomes_for(db)?;
    let engine = Engine::new(&terms, n, db, Sense::MaximizeTerms, cfg);
    let score = |v: &ComplexMatrix| {
        measurement_objective(rho_ab, &measurement_from_rows(v)).expect("dims checked")
    };
    let (v, value, iterations_used, converged) = best_of_restarts(&engine, cfg, score, false);
    Ok(OptResult {
        value,
        bound_direction: BoundDirection::UpperBoundOfTrue,
        witness: Witness::Measurement(measurement_from_rows(&v)),
        iterations_used,
        converged,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{self, DimVector};

    fn dims(v: &[usize]) -> DimVector {
        DimVector::new(v.to_vec()).unwrap()
    }

    fn classical_pair() -> DensityMatrix {
        DensityMatrix::new(dims(&[2, 2]), ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5])).unwrap()
    }

    fn cut01() -> Bipartition {
        Bipartition::new(&[0], 2).unwrap()
    }

    fn ensemble_of(res: &OptResult) -> &Ensemble {
        match &res.witness {
            Witness::Ensemble(e) => e,
            _ => panic!("expected an ensemble"),
        }
    }

    #[test]
    fn generator_layout() {
        let h = hermitian_from_params(2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(h[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(h[(1, 1)], C64::new(2.0, 0.0));
        assert_eq!(h[(0, 1)], C64::new(3.0, 4.0));
        assert_eq!(h[(1, 0)], C64::new(3.0, -4.0));
        assert!(hermitian_from_params(3, &[0.0; 4]).is_err());
    }

    #[test]
    fn zero_params_give_eigen_ensemble() {
        let rho = qstate::random_mixed(&dims(&[2, 2]), 3, 5).unwrap();
        let e = ensemble_from_isometry(&rho, &[0.0; 16], 4).unwrap();
        assert_eq!(e.members.len(), 3);
        let mut probs: Vec<f64> = e.members.iter().map(|(p, _)| *p).collect();
        probs.sort_by(f64::total_cmp);
        let vals = rho.eigenvalues();
        for (p, l) in probs.iter().zip(&vals[1..]) {
            assert!((p - l).abs() < 1e-12);
        }
        assert!(ensemble_from_isometry(&rho, &[0.0; 4], 2).is_err());
    }

    #[test]
    fn any_params_reconstruct_target() {
        let rho = qstate::random_mixed(&dims(&[2, 3]), 4, 6).unwrap();
        let params: Vec<f64> = (0..49).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let e = ensemble_from_isometry(&rho, &params, 7).unwrap();
        assert!(e.mixture().max_abs_diff(rho.matrix()) <= 1e-9);
        assert!((e.total_probability() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn hadamard_mixing_gives_bell_pair() {
        // exp(i pi/4 (E01 + E10)) = [[1, i], [i, 1]]/sqrt2. Rows applied to
        // (|00>, |11>)/sqrt2 give (|00> + i|11>)/2 and (i|00> + |11>)/2,
        // both maximally entangled with weight 1/2.
        let rho = classical_pair();
        let e = ensemble_from_isometry(&rho, &[0.0, 0.0, PI / 4.0, 0.0], 2).unwrap();
        assert_eq!(e.members.len(), 2);
        for (p, psi) in &e.members {
            assert!((p - 0.5).abs() < 1e-12);
            let s = measures::entropy_of_entanglement(psi, &cut01()).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measurement_construction() {
        let m = measurement_from_isometry(3, 3, &[0.0; 9]).unwrap();
        assert_eq!(m, Rank1Measurement::computational_basis(3));
        let params: Vec<f64> = (0..16).map(|k| (k as f64 * 0.7).sin()).collect();
        let m = measurement_from_isometry(2, 4, &params).unwrap();
        assert_eq!(m.outcome_vectors.len(), 4);
        assert!(m.completeness_defect() <= 1e-10);
        assert!(measurement_from_isometry(3, 2, &[0.0; 4]).is_err());
    }

    #[test]
    fn engine_gradient_matches_exponential_map() {
        let rho = qstate::random_mixed(&dims(&[2, 2]), 3, 17).unwrap();
        let cfg = OptimizerConfig::default();
        let weighted = weighted_eigenbasis(&rho);
        let obj = RoofTerms {
            layout: CutLayout::new(rho.dims(), &[0]),
            weighted: weighted.clone(),
            measure: PureMeasure::Entropy,
        };
        let m = 4;
        let engine = Engine::new(&obj, m, 3, Sense::MinimizeTerms, &cfg);
        let v = random_isometry(m, 3, 3);
        let mut s = Scratch::default();
        let mut grad = vec![0.0; m * m];
        engine.gradient(&v, &mut s, &mut grad);
        let loss_at = |params: &[f64]| {
            let u = densemath::unitary_from_generator(&hermitian_from_params(m, params).unwrap()).unwrap();
            let moved = u.matmul(&v).unwrap();
            engine.loss(&engine.terms(&moved, &mut Scratch::default()))
        };
        let h = 1e-5;
        for k in 0..m * m {
            let mut plus = vec![0.0; m * m];
            let mut minus = vec![0.0; m * m];
            plus[k] = h;
            minus[k] = -h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-5, "coordinate {k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn pure_inputs_take_the_fast_path() {
        let psi = qstate::haar_pure(&dims(&[2, 3]), 4);
        let rho = psi.to_density();
        let cut = cut01();
        let exact = measures::entropy_of_entanglement(&psi, &cut).unwrap();
        let cfg = OptimizerConfig::default();
        for res in [maximize_roof(&rho, &cut, &cfg).unwrap(), minimize_roof(&rho, &cut, &cfg).unwrap()] {
            assert!(res.exact);
            assert!((res.value - exact).abs() < 1e-10);
            assert_eq!(ensemble_of(&res).members.len(), 1);
        }
    }

    #[test]
    fn eoa_of_classical_pair_is_one() {
        let res = maximize_roof(&classical_pair(), &cut01(), &OptimizerConfig::default()).unwrap();
        assert_eq!(res.bound_direction, BoundDirection::LowerBoundOfTrue);
        assert!(res.value >= 1.0 - 1e-4, "{}", res.value);
        assert!(res.value <= 1.0 + 1e-9);
    }

    #[test]
    fn eof_of_separable_diagonal_is_zero() {
        let rho = DensityMatrix::new(dims(&[2, 2]), ComplexMatrix::from_diag(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let res = minimize_roof(&rho, &cut01(), &OptimizerConfig::default()).unwrap();
        assert_eq!(res.bound_direction, BoundDirection::UpperBoundOfTrue);
        assert!(res.value <= 1e-6, "{}", res.value);
    }

    #[test]
    fn eof_matches_wootters_on_random_rank_four() {
        for seed in [1u64, 2] {
            let rho = qstate::random_mixed(&dims(&[2, 2]), 4, seed).unwrap();
            let res = minimize_roof(&rho, &cut01(), &OptimizerConfig::with_seed(seed)).unwrap();
            let closed = measures::eof_2q_closed(&rho).unwrap();
            assert!(res.value >= closed - 1e-9);
            assert!((res.value - closed).abs() <= 1e-3, "{} vs {closed}", res.value);
        }
    }

    #[test]
    fn werner_eof_matches_closed_form() {
        let rho = qstate::werner(0.8).unwrap();
        let res = minimize_roof(&rho, &cut01(), &OptimizerConfig::default()).unwrap();
        let closed = measures::eof_2q_closed(&rho).unwrap();
        assert!((res.value - closed).abs() <= 1e-3, "{} vs {closed}", res.value);
    }

    #[test]
    fn witnesses_reproduce_values() {
        let rho = qstate::random_mixed(&dims(&[2, 2]), 3, 8).unwrap();
        let cfg = OptimizerConfig { restarts: 2, ..OptimizerConfig::default() };
        let cut = cut01();
        for res in [maximize_roof(&rho, &cut, &cfg).unwrap(), minimize_roof(&rho, &cut, &cfg).unwrap()] {
            let e = ensemble_of(&res);
            assert!((e.average_entropy(&cut).unwrap() - res.value).abs() <= 1e-10);
            assert!(e.mixture().max_abs_diff(rho.matrix()) <= 1e-9);
            assert!((e.total_probability() - 1.0).abs() <= 1e-10);
        }
        let ue = unlocalizable_entanglement(&rho, &cfg).unwrap();
        match &ue.witness {
            Witness::Measurement(meas) => {
                assert!(meas.completeness_defect() <= 1e-9);
                assert!((measurement_objective(&rho, meas).unwrap() - ue.value).abs() <= 1e-10);
            }
            _ => panic!("expected a measurement"),
        }
    }

    #[test]
    fn results_are_deterministic() {
        let rho = qstate::random_mixed(&dims(&[2, 2]), 2, 9).unwrap();
        let cfg = OptimizerConfig { restarts: 3, seed: 5, ..OptimizerConfig::default() };
        let a = maximize_roof(&rho, &cut01(), &cfg).unwrap();
        let b = maximize_roof(&rho, &cut01(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tangle_of_assistance_cases() {
        let cfg = OptimizerConfig::default();
        let bell = qstate::bell().to_density();
        assert!((tangle_of_assistance_2q(&bell, &cfg).unwrap().value - 1.0).abs() < 1e-9);
        let res = tangle_of_assistance_2q(&classical_pair(), &cfg).unwrap();
        assert!(res.value >= 1.0 - 1e-4 && res.value <= 1.0 + 1e-9, "{}", res.value);
        let ghz_ab = qstate::ghz(3, 2).unwrap().marginal(&[0, 1]).unwrap();
        let res = tangle_of_assistance_2q(&ghz_ab, &cfg).unwrap();
        assert!(res.value >= 1.0 - 1e-4, "{}", res.value);
        let qutrit = qstate::random_mixed(&dims(&[2, 3]), 2, 1).unwrap();
        assert!(tangle_of_assistance_2q(&qutrit, &cfg).is_err());
    }

    #[test]
    fn ue_cases() {
        let cfg = OptimizerConfig::default();
        let a = qstate::random_mixed(&dims(&[2]), 2, 1).unwrap();
        let b = qstate::random_mixed(&dims(&[2]), 2, 2).unwrap();
        let res = unlocalizable_entanglement(&a.tensor(&b), &cfg).unwrap();
        assert!(res.value.abs() <= 1e-6, "{}", res.value);

        let ghz_ab = qstate::ghz(3, 2).unwrap().marginal(&[0, 1]).unwrap();
        let res = unlocalizable_entanglement(&ghz_ab, &cfg).unwrap();
        assert!(res.value.abs() <= 1e-3, "{}", res.value);

        let rho = qstate::random_mixed(&dims(&[2, 3]), 3, 4).unwrap();
        let res = unlocalizable_entanglement(&rho, &cfg).unwrap();
        let sa = measures::von_neumann_entropy(&rho.partial_trace(&[0]).unwrap());
        let sab = measures::von_neumann_entropy(&rho);
        assert!(res.value >= -1e-9);
        assert!(res.value >= sa - sab - 1e-6);

        let tri = qstate::ghz(3, 2).unwrap().to_density();
        assert!(unlocalizable_entanglement(&tri, &cfg).is_err());
    }

    #[test]
    fn cardinality_and_outcome_defaults() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cfg.cardinality_for(2).unwrap(), 4);
        assert_eq!(cfg.cardinality_for(4).unwrap(), 16);
        assert_eq!(cfg.cardinality_for(6).unwrap(), 16);
        assert_eq!(cfg.cardinality_for(20).unwrap(), 20);
        assert_eq!(cfg.outcomes_for(3).unwrap(), 9);
        let tight = OptimizerConfig { ensemble_cardinality: Some(2), ..cfg.clone() };
        assert!(tight.cardinality_for(3).is_err());
        let zero = OptimizerConfig { restarts: 0, ..cfg };
        assert!(zero.validate().is_err());
    }
}
