//! Multipartite pure and mixed states.
//!
//! Subsystem 0 is the leftmost tensor factor. A basis index `g` decomposes as
//! `g = sum_k i_k * stride_k` with `stride_k = prod_{l > k} d_l`. Partial traces
//! keep the surviving factors in their original relative order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densemath::{self, ComplexMatrix, C64, HERMITIAN_TOL, PSD_TOL};
use crate::error::{Error, Result};
use crate::rng;

/// Numerical rank threshold for eigenvalues.
pub const RANK_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;
const FILE_TOL: f64 = 1e-8;

/// Local dimensions of each subsystem.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimVector(Vec<usize>);

impl DimVector {
    /// Local dimensions must be at least 1; a dimension of 1 only shows up as
    /// the ancilla of a rank-one purification.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Dimension("dimension vector is empty".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Dimension(format!("dims[{pos}] is zero")));
        }
        Ok(Self(dims))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Product of the dimensions of the listed subsystems.
    pub fn total_of(&self, parties: &[usize]) -> usize {
        parties.iter().map(|&p| self.0[p]).product()
    }

    pub fn select(&self, parties: &[usize]) -> DimVector {
        DimVector(parties.iter().map(|&p| self.0[p]).collect())
    }

    pub fn with_appended(&self, d: usize) -> DimVector {
        let mut v = self.0.clone();
        v.push(d);
        DimVector(v)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }
}

impl TryFrom<Vec<usize>> for DimVector {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DimVector> for Vec<usize> {
    fn from(d: DimVector) -> Self {
        d.0
    }
}

impl fmt::Display for DimVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Split of the subsystems into two nonempty complementary groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bipartition {
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

impl Bipartition {
    /// `side_a` against everything else among `n_parties` subsystems.
    pub fn new(side_a: &[usize], n_parties: usize) -> Result<Self> {
        let mut a: Vec<usize> = side_a.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.len() != side_a.len() {
            return Err(Error::InvalidArgument(format!(
                "bipartition side {side_a:?} repeats an index"
            )));
        }
        if let Some(&bad) = a.iter().find(|&&i| i >= n_parties) {
            return Err(Error::InvalidArgument(format!(
                "bipartition index {bad} out of range for {n_parties} subsystems"
            )));
        }
        let b: Vec<usize> = (0..n_parties).filter(|i| !a.contains(i)).collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "bipartition {side_a:?} of {n_parties} subsystems leaves a side empty"
            )));
        }
        Ok(Self { side_a: a, side_b: b })
    }

    /// Both sides given explicitly; they must be disjoint and cover `0..n_parties`.
    pub fn from_sides(side_a: &[usize], side_b: &[usize], n_parties: usize) -> Result<Self> {
        let cut = Self::new(side_a, n_parties)?;
        let mut b = side_b.to_vec();
        b.sort_unstable();
        if b != cut.side_b {
            return Err(Error::InvalidArgument(format!(
                "sides {side_a:?} and {side_b:?} are not complementary over {n_parties} subsystems"
            )));
        }
        Ok(cut)
    }

    /// Parses `"i,j:k,l"` (0-based). An empty right side means "the rest":
    /// `"0:"` is `{0}` against all other subsystems.
    pub fn parse(text: &str, n_parties: usize) -> Result<Self> {
        let (left, right) = text.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("bipartition '{text}' must contain ':'"))
        })?;
        let parse_side = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>().map_err(|_| {
                        Error::InvalidArgument(format!("bipartition index '{t}' is not an integer"))
                    })
                })
                .collect()
        };
        let a = parse_side(left)?;
        let b = parse_side(right)?;
        match (a.is_empty(), b.is_empty()) {
            (false, true) => Self::new(&a, n_parties),
            (true, false) => {
                let cut = Self::new(&b, n_parties)?;
                Ok(Self { side_a: cut.side_b, side_b: cut.side_a })
            }
            (false, false) => Self::from_sides(&a, &b, n_parties),
            (true, true) => Err(Error::InvalidArgument(format!(
                "bipartition '{text}' names no subsystem"
            ))),
        }
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.side_b
    }

    pub fn n_parties(&self) -> usize {
        self.side_a.len() + self.side_b.len()
    }

    pub fn swapped(&self) -> Self {
        Self { side_a: self.side_b.clone(), side_b: self.side_a.clone() }
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{}:{}", join(&self.side_a), join(&self.side_b))
    }
}

/// Index bookkeeping for reshaping a vector on `dims` into a
/// `dim(keep) x dim(rest)` matrix.
#[derive(Clone, Debug)]
pub struct CutLayout {
    pub dim_keep: usize,
    pub dim_rest: usize,
    /// `perm[k * dim_rest + t]` is the global index of (kept index k, traced index t).
    perm: Vec<usize>,
}

impl CutLayout {
    pub fn new(dims: &DimVector, keep: &[usize]) -> Self {
        let n = dims.len();
        let rest: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let strides = dims.strides();
        let dim_keep = dims.total_of(keep);
        let dim_rest = dims.total_of(&rest);
        let offsets = |parties: &[usize], count: usize| -> Vec<usize> {
            (0..count)
                .map(|mut idx| {
                    let mut g = 0;
                    for &p in parties.iter().rev() {
                        let d = dims.as_slice()[p];
                        g += (idx % d) * strides[p];
                        idx /= d;
                    }
                    g
                })
                .collect()
        };
        let keep_off = offsets(keep, dim_keep);
        let rest_off = offsets(&rest, dim_rest);
        let mut perm = Vec::with_capacity(dim_keep * dim_rest);
        for &k in &keep_off {
            for &t in &rest_off {
                perm.push(k + t);
            }
        }
        Self { dim_keep, dim_rest, perm }
    }

    #[inline]
    pub fn global(&self, kept: usize, rest: usize) -> usize {
        self.perm[kept * self.dim_rest + rest]
    }

    /// Unnormalized reduced operator `M M^dagger` on the kept side of `v`,
    /// written row-major into `out` (length `dim_keep^2`).
    pub fn reduce_vector_into(&self, v: &[C64], out: &mut [C64]) {
        let (dk, dr) = (self.dim_keep, self.dim_rest);
        for i in 0..dk {
            for j in i..dk {
                let mut acc = C64::new(0.0, 0.0);
                let ri = &self.perm[i * dr..(i + 1) * dr];
                let rj = &self.perm[j * dr..(j + 1) * dr];
                for (&gi, &gj) in ri.iter().zip(rj) {
                    acc += v[gi] * v[gj].conj();
                }
                out[i * dk + j] = acc;
                out[j * dk + i] = acc.conj();
            }
        }
    }

    /// Partial trace of an operator on the full space down to the kept side.
    pub fn reduce_operator(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let (dk, dr) = (self.dim_keep, self.dim_rest);
        let mut out = ComplexMatrix::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dr {
                    acc += m[(self.global(i, t), self.global(j, t))];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

fn sorted_parties(keep: &[usize], n: usize) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set is empty".into()));
    }
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.len() != keep.len() {
        return Err(Error::InvalidArgument(format!("keep set {keep:?} repeats an index")));
    }
    if let Some(&bad) = k.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!(
            "keep index {bad} out of range for {n} subsystems"
        )));
    }
    Ok(k)
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: DimVector,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(dims: DimVector, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for dims [{dims}] (expected {})",
                amplitudes.len(),
                dims.total()
            )));
        }
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(Self { dims, amplitudes })
    }

    /// Normalizes `amplitudes` first; fails on a zero vector.
    pub fn normalized(dims: DimVector, mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for a in &mut amplitudes {
            *a /= n;
        }
        Self::new(dims, amplitudes)
    }

    /// Computational basis state `|i_0 i_1 ...>`.
    pub fn basis(dims: DimVector, digits: &[usize]) -> Result<Self> {
        if digits.len() != dims.len() {
            return Err(Error::Dimension("basis digits do not match dims".into()));
        }
        let strides = dims.strides();
        let mut g = 0;
        for (k, (&i, &d)) in digits.iter().zip(dims.as_slice()).enumerate() {
            if i >= d {
                return Err(Error::InvalidArgument(format!("digit {i} exceeds dims[{k}]={d}")));
            }
            g += i * strides[k];
        }
        let mut amps = vec![C64::new(0.0, 0.0); dims.total()];
        amps[g] = C64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    pub fn dims(&self) -> &DimVector {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.0.clone();
        dims.extend_from_slice(other.dims.as_slice());
        PureState {
            dims: DimVector(dims),
            amplitudes: densemath::kron_vec(&self.amplitudes, &other.amplitudes),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            dims: self.dims.clone(),
            matrix: ComplexMatrix::outer(&self.amplitudes),
        }
    }

    /// Reduced state on `keep`, computed directly from the amplitudes.
    pub fn marginal(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let keep = sorted_parties(keep, self.n_parties())?;
        let layout = CutLayout::new(&self.dims, &keep);
        let dk = layout.dim_keep;
        let mut m = ComplexMatrix::zeros(dk, dk);
        layout.reduce_vector_into(&self.amplitudes, m.as_mut_slice());
        Ok(DensityMatrix { dims: self.dims.select(&keep), matrix: m })
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Density operator tagged with subsystem dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: DimVector,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates shape, Hermiticity, unit trace and positivity.
    pub fn new(dims: DimVector, matrix: ComplexMatrix) -> Result<Self> {
        let d = dims.total();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for dims [{dims}] (expected {d}x{d})",
                matrix.rows(),
                matrix.cols()
            )));
        }
        matrix.ensure_hermitian()?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let mut vals = densemath::eigvals_hermitian(&matrix)?;
        densemath::clamp_psd_spectrum(&mut vals)?;
        Ok(Self { dims, matrix })
    }

    /// Convex mixture `sum_i w_i rho_i`; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let dims = first.1.dims.clone();
        let mut total = ComplexMatrix::zeros(dims.total(), dims.total());
        let mut wsum = 0.0;
        for (w, rho) in parts {
            if rho.dims != dims {
                return Err(Error::Dimension("mixture components have different dims".into()));
            }
            if *w < 0.0 {
                return Err(Error::InvalidArgument(format!("negative mixture weight {w}")));
            }
            wsum += w;
            total = &total + &rho.matrix.scale(C64::new(*w, 0.0));
        }
        if (wsum - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {wsum}")));
        }
        Self::new(dims, total)
    }

    pub fn maximally_mixed(dims: DimVector) -> Self {
        let d = dims.total();
        let matrix = ComplexMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0));
        Self { dims, matrix }
    }

    pub fn dims(&self) -> &DimVector {
        &self.dims
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.0.clone();
        dims.extend_from_slice(other.dims.as_slice());
        DensityMatrix {
            dims: DimVector(dims),
            matrix: densemath::kron(&self.matrix, &other.matrix),
        }
    }

    /// Clamped spectrum, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals = densemath::eigvals_hermitian_unchecked(self.dim(), self.matrix.as_slice());
        for v in &mut vals {
            if *v < 0.0 && *v >= -PSD_TOL {
                *v = 0.0;
            }
        }
        vals
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > RANK_TOL).count()
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let keep = sorted_parties(keep, self.n_parties())?;
        let layout = CutLayout::new(&self.dims, &keep);
        Ok(DensityMatrix {
            dims: self.dims.select(&keep),
            matrix: layout.reduce_operator(&self.matrix),
        })
    }

    /// `U rho U^dagger` for a unitary on the full space.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        let m = u.matmul(&self.matrix)?.matmul(&u.adjoint())?;
        Ok(DensityMatrix { dims: self.dims.clone(), matrix: m })
    }

    /// Returns the state vector when the rank is one.
    pub fn as_pure(&self) -> Option<PureState> {
        let eig = densemath::eig_hermitian(&self.matrix).ok()?;
        let n = eig.values.len();
        if eig.values[..n - 1].iter().any(|&v| v > RANK_TOL) {
            return None;
        }
        PureState::normalized(self.dims.clone(), eig.vectors.column(n - 1)).ok()
    }
}

/// A state of either kind, as read from or written to a state file.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dims(&self) -> &DimVector {
        match self {
            State::Pure(p) => p.dims(),
            State::Mixed(m) => m.dims(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(p) => p.to_density(),
            State::Mixed(m) => m.clone(),
        }
    }

    /// The state vector if the state is pure (a rank-one density matrix counts).
    pub fn as_pure(&self) -> Option<PureState> {
        match self {
            State::Pure(p) => Some(p.clone()),
            State::Mixed(m) => m.as_pure(),
        }
    }
}

/// Purification onto `dims ⊗ ancilla` with ancilla dimension equal to the
/// numerical rank of `rho`.
pub fn purify(rho: &DensityMatrix) -> PureState {
    let eig = densemath::eig_hermitian(&rho.matrix).expect("density matrices are Hermitian");
    let kept: Vec<usize> = (0..eig.values.len())
        .rev()
        .filter(|&k| eig.values[k] > RANK_TOL)
        .collect();
    let r = kept.len().max(1);
    let d = rho.dim();
    let mut amps = vec![C64::new(0.0, 0.0); d * r];
    for (slot, &k) in kept.iter().enumerate() {
        let s = eig.values[k].sqrt();
        for i in 0..d {
            amps[i * r + slot] = eig.vectors[(i, k)] * s;
        }
    }
    PureState::normalized(rho.dims.with_appended(r), amps).expect("purification has nonzero norm")
}

/// Haar-random pure state: i.i.d. standard complex Gaussians, normalized.
pub fn haar_pure(dims: &DimVector, seed: u64) -> PureState {
    let mut g = rng::generator(seed);
    let amps: Vec<C64> = (0..dims.total())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut g);
            let im: f64 = StandardNormal.sample(&mut g);
            C64::new(re, im)
        })
        .collect();
    PureState::normalized(dims.clone(), amps).expect("Gaussian vector is nonzero")
}

/// Random mixed state of rank at most `rank`: the marginal of a Haar pure
/// state on `dims ⊗ C^rank`.
pub fn random_mixed(dims: &DimVector, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let d = dims.total();
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..={d}")));
    }
    let psi = haar_pure(&dims.with_appended(rank), seed);
    let keep: Vec<usize> = (0..dims.len()).collect();
    psi.marginal(&keep)
}

/// Named fixtures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamedState {
    /// `(|00> + |11>)/sqrt(2)`
    Bell,
    /// `sum_k |k...k>/sqrt(d)` on `n` parties of dimension `d`.
    Ghz { n: usize, d: usize },
    /// Equal superposition of single excitations on `n` qubits.
    W { n: usize },
    /// `p |Phi+><Phi+| + (1-p) I/4`.
    Werner { p: f64 },
}

impl NamedState {
    /// Builds a fixture from its name and a parameter map (`n`, `d`, `p`).
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let int = |key: &str, default: Option<usize>| -> Result<usize> {
            match params.get(key) {
                None => default.ok_or_else(|| {
                    Error::InvalidArgument(format!("state '{name}' needs parameter --{key}"))
                }),
                Some(&v) if v.fract() == 0.0 && v >= 0.0 => Ok(v as usize),
                Some(v) => Err(Error::InvalidArgument(format!(
                    "parameter --{key}={v} must be a nonnegative integer"
                ))),
            }
        };
        match name {
            "bell" => Ok(NamedState::Bell),
            "ghz" => Ok(NamedState::Ghz { n: int("n", Some(3))?, d: int("d", Some(2))? }),
            "w" => Ok(NamedState::W { n: int("n", Some(3))? }),
            "werner" => {
                let p = *params.get("p").ok_or_else(|| {
                    Error::InvalidArgument("state 'werner' needs parameter --p".into())
                })?;
                Ok(NamedState::Werner { p })
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown state name '{other}' (expected bell, ghz, w or werner)"
            ))),
        }
    }

    pub fn build(self) -> Result<State> {
        match self {
            NamedState::Bell => Ok(State::Pure(bell())),
            NamedState::Ghz { n, d } => ghz(n, d).map(State::Pure),
            NamedState::W { n } => w_state(n).map(State::Pure),
            NamedState::Werner { p } => werner(p).map(State::Mixed),
        }
    }
}

pub fn named_state(name: &str, params: &BTreeMap<String, f64>) -> Result<State> {
    NamedState::from_params(name, params)?.build()
}

pub fn bell() -> PureState {
    ghz(2, 2).expect("valid parameters")
}

pub fn ghz(n: usize, d: usize) -> Result<PureState> {
    if n < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "ghz needs n >= 2 and d >= 2 (got n={n}, d={d})"
        )));
    }
    let dims = DimVector::new(vec![d; n])?;
    let total = dims.total();
    if total > 4096 {
        return Err(Error::InvalidArgument(format!("ghz({n},{d}) is too large")));
    }
    let step: usize = dims.strides().iter().sum();
    let mut amps = vec![C64::new(0.0, 0.0); total];
    let a = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        amps[k * step] = C64::new(a, 0.0);
    }
    PureState::new(dims, amps)
}

pub fn w_state(n: usize) -> Result<PureState> {
    if !(2..=12).contains(&n) {
        return Err(Error::InvalidArgument(format!("w needs 2 <= n <= 12 (got {n})")));
    }
    let dims = DimVector::new(vec![2; n])?;
    let mut amps = vec![C64::new(0.0, 0.0); dims.total()];
    let a = 1.0 / (n as f64).sqrt();
    for k in 0..n {
        amps[1 << (n - 1 - k)] = C64::new(a, 0.0);
    }
    PureState::new(dims, amps)
}

pub fn werner(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("werner needs p in [0,1] (got {p})")));
    }
    let dims = DimVector::new(vec![2, 2])?;
    let phi = bell().to_density();
    let noise = DensityMatrix::maximally_mixed(dims);
    DensityMatrix::mixture(&[(p, &phi), (1.0 - p, &noise)])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    kind: String,
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::StateFile { field: field.into(), message: message.into() }
}

fn to_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// JSON text of a state in the state-file schema.
pub fn state_to_json(state: &State) -> Result<String> {
    let file = match state {
        State::Pure(p) => StateFile {
            kind: "pure".into(),
            dims: p.dims.0.clone(),
            amplitudes: Some(p.amplitudes.iter().copied().map(to_pair).collect()),
            matrix: None,
        },
        State::Mixed(m) => StateFile {
            kind: "mixed".into(),
            dims: m.dims.0.clone(),
            amplitudes: None,
            matrix: Some(
                (0..m.dim())
                    .map(|r| m.matrix.row(r).iter().copied().map(to_pair).collect())
                    .collect(),
            ),
        },
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

/// Parses and validates a state file's JSON text.
pub fn state_from_json(text: &str) -> Result<State> {
    let file: StateFile = serde_json::from_str(text)?;
    let dims = DimVector::new(file.dims.clone()).map_err(|e| field_err("dims", e.to_string()))?;
    let d = dims.total();
    match file.kind.as_str() {
        "pure" => {
            if file.matrix.is_some() {
                return Err(field_err("matrix", "not allowed for kind \"pure\""));
            }
            let amps = file.amplitudes.ok_or_else(|| field_err("amplitudes", "missing"))?;
            if amps.len() != d {
                return Err(field_err(
                    "amplitudes",
                    format!("{} entries for dims {:?} (expected {d})", amps.len(), file.dims),
                ));
            }
            let mut amps: Vec<C64> = amps.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            let n = norm(&amps);
            if (n - 1.0).abs() > FILE_TOL {
                return Err(field_err("amplitudes", format!("norm {n} differs from 1 by more than 1e-8")));
            }
            if (n - 1.0).abs() > NORM_TOL {
                amps.iter_mut().for_each(|a| *a /= n);
            }
            PureState::new(dims, amps)
                .map(State::Pure)
                .map_err(|e| field_err("amplitudes", e.to_string()))
        }
        "mixed" => {
            if file.amplitudes.is_some() {
                return Err(field_err("amplitudes", "not allowed for kind \"mixed\""));
            }
            let rows = file.matrix.ok_or_else(|| field_err("matrix", "missing"))?;
            if rows.len() != d {
                return Err(field_err("matrix", format!("{} rows (expected {d})", rows.len())));
            }
            let mut data = Vec::with_capacity(d * d);
            for (r, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(field_err(
                        format!("matrix[{r}]"),
                        format!("{} entries (expected {d})", row.len()),
                    ));
                }
                data.extend(row.iter().map(|[re, im]| C64::new(*re, *im)));
            }
            let mut m = ComplexMatrix::from_vec(d, d, data)?;
            let defect = m.hermitian_defect();
            if defect > FILE_TOL {
                return Err(field_err("matrix", format!("not Hermitian (defect {defect:e})")));
            }
            if defect > HERMITIAN_TOL {
                m = (&m + &m.adjoint()).scale(C64::new(0.5, 0.0));
            }
            let tr = m.trace();
            if (tr.re - 1.0).abs() > FILE_TOL || tr.im.abs() > FILE_TOL {
                return Err(field_err("matrix", format!("trace {tr} differs from 1 by more than 1e-8")));
            }
            if (tr.re - 1.0).abs() > NORM_TOL {
                m = m.scale(C64::new(1.0 / tr.re, 0.0));
            }
            DensityMatrix::new(dims, m)
                .map(State::Mixed)
                .map_err(|e| field_err("matrix", e.to_string()))
        }
        other => Err(field_err("kind", format!("'{other}' is neither \"pure\" nor \"mixed\""))),
    }
}

pub fn save_state(state: &State, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, state_to_json(state)?)?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<State> {
    state_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dims(v: &[usize]) -> DimVector {
        DimVector::new(v.to_vec()).unwrap()
    }

    /// Direct index-summation partial trace, written independently of `CutLayout`.
    fn brute_partial_trace(rho: &DensityMatrix, keep: &[usize]) -> ComplexMatrix {
        let d = rho.dims().as_slice();
        let n = d.len();
        let digits = |mut g: usize| -> Vec<usize> {
            let mut out = vec![0; n];
            for k in (0..n).rev() {
                out[k] = g % d[k];
                g /= d[k];
            }
            out
        };
        let dk: usize = keep.iter().map(|&k| d[k]).product();
        let key = |dig: &[usize]| keep.iter().fold(0, |acc, &k| acc * d[k] + dig[k]);
        let mut out = ComplexMatrix::zeros(dk, dk);
        let total = rho.dim();
        for g in 0..total {
            for h in 0..total {
                let (dg, dh) = (digits(g), digits(h));
                let traced_equal = (0..n).filter(|k| !keep.contains(k)).all(|k| dg[k] == dh[k]);
                if traced_equal {
                    out[(key(&dg), key(&dh))] += rho.matrix()[(g, h)];
                }
            }
        }
        out
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let m = bell().to_density().partial_trace(&[0]).unwrap();
        assert!(m.matrix().max_abs_diff(&ComplexMatrix::from_diag(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn product_marginal_recovers_factor() {
        let rho = random_mixed(&dims(&[2]), 2, 3).unwrap();
        let sigma = random_mixed(&dims(&[3]), 2, 4).unwrap();
        let joint = rho.tensor(&sigma);
        let back = joint.partial_trace(&[0]).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-14);
        let back = joint.partial_trace(&[1]).unwrap();
        assert!(back.matrix().max_abs_diff(sigma.matrix()) < 1e-14);
    }

    #[test]
    fn ghz_two_party_marginal() {
        let rho = ghz(3, 2).unwrap().to_density();
        let m = rho.partial_trace(&[0, 1]).unwrap();
        let expect = ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5]);
        assert!(m.matrix().max_abs_diff(&expect) < 1e-15);
        assert!(brute_partial_trace(&rho, &[0, 1]).max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_brute_force() {
        let rho = random_mixed(&dims(&[2, 3, 2]), 4, 9).unwrap();
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2], vec![0, 1]] {
            let fast = rho.partial_trace(&keep).unwrap();
            assert!(fast.matrix().max_abs_diff(&brute_partial_trace(&rho, &keep)) < 1e-14);
        }
        // Unsorted keep sets keep factors in original order.
        let a = rho.partial_trace(&[2, 0]).unwrap();
        let b = rho.partial_trace(&[0, 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_marginal_matches_density_partial_trace() {
        let psi = haar_pure(&dims(&[2, 3, 2]), 5);
        let via_vec = psi.marginal(&[0, 2]).unwrap();
        let via_rho = psi.to_density().partial_trace(&[0, 2]).unwrap();
        assert!(via_vec.matrix().max_abs_diff(via_rho.matrix()) < 1e-14);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = bell().to_density();
        assert!(rho.partial_trace(&[]).is_err());
        assert!(rho.partial_trace(&[2]).is_err());
        assert!(rho.partial_trace(&[0, 0]).is_err());
    }

    #[test]
    fn partial_trace_composes() {
        let rho = random_mixed(&dims(&[2, 2, 3]), 5, 12).unwrap();
        let two_step = rho.partial_trace(&[0, 2]).unwrap().partial_trace(&[0]).unwrap();
        let one_step = rho.partial_trace(&[0]).unwrap();
        assert!(two_step.matrix().max_abs_diff(one_step.matrix()) <= 1e-12);
    }

    #[test]
    fn purify_pure_input_has_unit_ancilla() {
        let phi = haar_pure(&dims(&[2, 2]), 1);
        let p = purify(&phi.to_density());
        assert_eq!(p.dims().as_slice(), &[2, 2, 1]);
        let back = p.marginal(&[0, 1]).unwrap();
        assert!(back.matrix().max_abs_diff(phi.to_density().matrix()) < 1e-12);
    }

    #[test]
    fn purify_maximally_mixed_qubit() {
        let rho = DensityMatrix::maximally_mixed(dims(&[2]));
        let p = purify(&rho);
        assert_eq!(p.dims().as_slice(), &[2, 2]);
        let m = p.marginal(&[0]).unwrap();
        assert!(m.matrix().max_abs_diff(rho.matrix()) < 1e-14);
    }

    #[test]
    fn purify_round_trip_rank_three_qutrit() {
        let rho = random_mixed(&dims(&[3]), 3, 21).unwrap();
        let p = purify(&rho);
        assert_eq!(p.dims().as_slice(), &[3, 3]);
        assert!(p.marginal(&[0]).unwrap().matrix().max_abs_diff(rho.matrix()) <= 1e-9);
    }

    #[test]
    fn haar_is_deterministic_and_normalized() {
        let a = haar_pure(&dims(&[2, 2, 2]), 42);
        let b = haar_pure(&dims(&[2, 2, 2]), 42);
        assert_eq!(a, b);
        assert!((norm(a.amplitudes()) - 1.0).abs() < 1e-12);
        assert_ne!(a, haar_pure(&dims(&[2, 2, 2]), 43));
    }

    #[test]
    fn haar_basis_projector_mean_is_uniform() {
        // <|<0|psi>|^2> = 1/d for the unitarily invariant measure; the
        // variance of |<0|psi>|^2 is (d-1)/(d^2 (d+1)).
        let d = 6usize;
        let n = 10_000;
        let dv = dims(&[2, 3]);
        let mean: f64 = (0..n)
            .map(|k| haar_pure(&dv, rng::mix(99, k as u64)).amplitudes()[0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        let df = d as f64;
        let sigma = ((df - 1.0) / (df * df * (df + 1.0)) / n as f64).sqrt();
        assert!((mean - 1.0 / df).abs() <= 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn random_mixed_rank_and_validity() {
        let dv = dims(&[2, 3]);
        let pure = random_mixed(&dv, 1, 3).unwrap();
        assert_eq!(pure.rank(), 1);
        assert!(pure.as_pure().is_some());
        for rank in 1..=6 {
            let rho = random_mixed(&dv, rank, 100 + rank as u64).unwrap();
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
            let vals = rho.eigenvalues();
            assert!(vals.iter().all(|&v| v >= 0.0));
            assert!(vals.iter().filter(|&&v| v > 1e-8).count() <= rank);
            DensityMatrix::new(dv.clone(), rho.matrix().clone()).unwrap();
        }
        assert!(random_mixed(&dv, 0, 1).is_err());
        assert!(random_mixed(&dv, 7, 1).is_err());
    }

    #[test]
    fn named_states() {
        let g = ghz(3, 2).unwrap();
        let m = g.marginal(&[0]).unwrap();
        assert!(m.matrix().max_abs_diff(&ComplexMatrix::from_diag(&[0.5, 0.5])) < 1e-15);

        let w = w_state(3).unwrap();
        let vals = w.marginal(&[0]).unwrap().eigenvalues();
        assert!((vals[0] - 1.0 / 3.0).abs() < 1e-14 && (vals[1] - 2.0 / 3.0).abs() < 1e-14);

        let w1 = werner(1.0).unwrap();
        assert!(w1.matrix().max_abs_diff(bell().to_density().matrix()) < 1e-15);
        assert!(werner(1.5).is_err());
        assert!(ghz(1, 2).is_err());

        let qutrit = ghz(2, 3).unwrap();
        assert_eq!(qutrit.amplitudes()[4], C64::new(1.0 / 3f64.sqrt(), 0.0));
    }

    #[test]
    fn named_state_from_params() {
        let mut p = BTreeMap::new();
        p.insert("n".to_string(), 4.0);
        let s = named_state("w", &p).unwrap();
        assert_eq!(s.dims().as_slice(), &[2, 2, 2, 2]);
        assert!(named_state("nope", &p).is_err());
        assert!(named_state("werner", &p).is_err());
        p.insert("n".to_string(), 2.5);
        assert!(named_state("ghz", &p).is_err());
    }

    #[test]
    fn bipartition_parsing() {
        let cut = Bipartition::parse("0:", 3).unwrap();
        assert_eq!((cut.side_a(), cut.side_b()), (&[0][..], &[1, 2][..]));
        let cut = Bipartition::parse("0,2:1", 3).unwrap();
        assert_eq!((cut.side_a(), cut.side_b()), (&[0, 2][..], &[1][..]));
        let cut = Bipartition::parse(":2", 3).unwrap();
        assert_eq!((cut.side_a(), cut.side_b()), (&[0, 1][..], &[2][..]));
        assert!(Bipartition::parse("0,1,2:", 3).is_err());
        assert!(Bipartition::parse("0:1", 3).is_err());
        assert!(Bipartition::parse("0", 2).is_err());
        assert!(Bipartition::parse("x:", 2).is_err());
        assert!(Bipartition::parse("5:", 2).is_err());
    }

    #[test]
    fn state_file_round_trips() {
        let s = State::Pure(bell());
        let back = state_from_json(&state_to_json(&s).unwrap()).unwrap();
        assert_eq!(back, s);

        let rho = random_mixed(&dims(&[2, 3]), 3, 8).unwrap();
        let s = State::Mixed(rho.clone());
        let back = state_from_json(&state_to_json(&s).unwrap()).unwrap();
        match back {
            State::Mixed(m) => assert_eq!(m.matrix(), rho.matrix()),
            _ => panic!("kind changed"),
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let w = State::Pure(w_state(4).unwrap());
        save_state(&w, &path).unwrap();
        assert_eq!(load_state(&path).unwrap(), w);
    }

    #[test]
    fn state_file_validation() {
        let five = r#"{"kind":"pure","dims":[2,2],"amplitudes":[[1,0],[0,0],[0,0],[0,0],[0,0]]}"#;
        let err = state_from_json(five).unwrap_err().to_string();
        assert!(err.contains("amplitudes"), "{err}");

        let unnormalized = r#"{"kind":"pure","dims":[2],"amplitudes":[[1,0],[1,0]]}"#;
        assert!(state_from_json(unnormalized).unwrap_err().to_string().contains("norm"));

        let bad_row = r#"{"kind":"mixed","dims":[2],"matrix":[[[1,0],[0,0]],[[0,0]]]}"#;
        assert!(state_from_json(bad_row).unwrap_err().to_string().contains("matrix[1]"));

        let bad_trace = r#"{"kind":"mixed","dims":[2],"matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#;
        assert!(state_from_json(bad_trace).unwrap_err().to_string().contains("trace"));

        let bad_kind = r#"{"kind":"other","dims":[2],"amplitudes":[[1,0],[0,0]]}"#;
        assert!(state_from_json(bad_kind).unwrap_err().to_string().contains("kind"));

        let not_psd = r#"{"kind":"mixed","dims":[2],"matrix":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}"#;
        assert!(state_from_json(not_psd).is_err());
    }

    proptest! {
        #[test]
        fn purify_round_trip_property(d0 in 2usize..=3, d1 in 2usize..=3, rank_seed in any::<u64>()) {
            let dv = dims(&[d0, d1]);
            let mut g = rng::generator(rank_seed);
            let rank = g.random_range(1..=d0 * d1);
            let rho = random_mixed(&dv, rank, rank_seed).unwrap();
            let p = purify(&rho);
            let back = p.marginal(&[0, 1]).unwrap();
            prop_assert!(back.matrix().max_abs_diff(rho.matrix()) <= 1e-9);
        }

        #[test]
        fn random_constructors_are_valid_states(seed in any::<u64>(), rank in 1usize..=8) {
            let dv = dims(&[2, 2, 2]);
            let rho = random_mixed(&dv, rank, seed).unwrap();
            prop_assert!(DensityMatrix::new(dv.clone(), rho.matrix().clone()).is_ok());
            let psi = haar_pure(&dv, seed);
            prop_assert!(PureState::new(dv, psi.amplitudes().to_vec()).is_ok());
        }
    }
}
