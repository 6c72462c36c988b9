//! Inequality checks with certification semantics, and seeded batches.
//!
//! Slack is oriented so that `slack >= 0` means the inequality holds:
//! `lhs - rhs_sum` for monogamy-type checks, `rhs_sum - lhs` for
//! polygamy-type checks and `|lhs - rhs_sum|` for identities.
//!
//! A report may only be `ViolatedCertified` when every quantity entering it
//! is a closed form. Optimized estimates are one-sided bounds, so a failed
//! comparison involving one is `Inconclusive`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures;
use crate::par;
use crate::qstate::{self, Bipartition, DensityMatrix, DimVector, PureState};
use crate::rng;
use crate::roofopt::{self, OptimizerConfig, Witness};

/// Tolerance for exact-vs-exact checks.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance for exact-vs-estimate checks.
pub const ESTIMATE_TOL: f64 = 1e-6;
/// Tolerance for estimate-vs-estimate identities.
pub const IDENTITY_TOL: f64 = 5e-3;

const MAX_TOTAL_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// `tau(A|BC) >= tau(AB) + tau(AC)` on three qubits.
    Ckw,
    /// `tau(A|BC) <= tau_a(AB) + tau_a(AC)` on three qubits.
    DualTangle,
    /// `S(A) = E_u(AB) + E_a(AC)` on tripartite pure states.
    Tradeoff,
    /// `E_u(AB) <= I(A:B)/2`.
    UeMutual,
    /// `S(A_1) <= sum_k E_a(A_1 A_k)` on pure states.
    Poly,
    /// `E_a(A|BC) <= E_a(AB) + E_a(AC)` on tripartite mixed states.
    PolyMixed,
    /// `Poly` with the peel-one-party-at-a-time chain recorded.
    Npoly,
}

impl InequalityId {
    pub const ALL: [InequalityId; 7] = [
        InequalityId::Ckw,
        InequalityId::DualTangle,
        InequalityId::Tradeoff,
        InequalityId::UeMutual,
        InequalityId::Poly,
        InequalityId::PolyMixed,
        InequalityId::Npoly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::Ckw => "ckw",
            InequalityId::DualTangle => "dual_tangle",
            InequalityId::Tradeoff => "tradeoff",
            InequalityId::UeMutual => "ue_mutual",
            InequalityId::Poly => "poly",
            InequalityId::PolyMixed => "poly_mixed",
            InequalityId::Npoly => "npoly",
        }
    }

    /// Whether batches of this check sample pure states.
    pub fn takes_pure_states(self) -> bool {
        !matches!(self, InequalityId::UeMutual | InequalityId::PolyMixed)
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|i| i.as_str()).collect();
                Error::InvalidArgument(format!(
                    "unknown inequality '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Confirmed,
    Inconclusive,
    ViolatedCertified,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Confirmed => "confirmed",
            Status::Inconclusive => "inconclusive",
            Status::ViolatedCertified => "violated_certified",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One intermediate comparison of a derivation chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub label: String,
    /// Which subsystems the step compares, e.g. `"0|1,2,3 <= 0|1 + 0|2,3"`.
    pub parties: String,
    pub lhs: f64,
    pub lhs_exact: bool,
    pub rhs_terms: Vec<f64>,
    pub slack: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlackReport {
    pub inequality_id: InequalityId,
    pub lhs: f64,
    pub rhs_terms: Vec<f64>,
    pub slack: f64,
    pub status: Status,
    /// Exactness of the lhs followed by each rhs term.
    pub exact_flags: Vec<bool>,
    /// Set when both sides are estimates, so the status is not a certificate
    /// in either direction.
    pub heuristic: bool,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceStep>,
}

impl SlackReport {
    pub fn rhs_sum(&self) -> f64 {
        self.rhs_terms.iter().sum()
    }

    pub fn exact_lhs(&self) -> bool {
        self.exact_flags.first().copied().unwrap_or(false)
    }

    pub fn all_exact(&self) -> bool {
        self.exact_flags.iter().all(|&e| e)
    }

    /// Slack recomputed from `lhs` and `rhs_terms` with the family's sign.
    pub fn recomputed_slack(&self) -> f64 {
        slack_for(self.inequality_id, self.lhs, self.rhs_sum())
    }
}

fn slack_for(id: InequalityId, lhs: f64, rhs_sum: f64) -> f64 {
    match id {
        InequalityId::Ckw => lhs - rhs_sum,
        InequalityId::Tradeoff => (lhs - rhs_sum).abs(),
        InequalityId::DualTangle
        | InequalityId::UeMutual
        | InequalityId::Poly
        | InequalityId::PolyMixed
        | InequalityId::Npoly => rhs_sum - lhs,
    }
}

struct Draft {
    id: InequalityId,
    lhs: f64,
    lhs_exact: bool,
    rhs: Vec<(f64, bool)>,
    heuristic: bool,
    trace: Vec<TraceStep>,
}

impl Draft {
    /// Status rule: confirmed within `tol`; otherwise violated only if every
    /// term is exact, else inconclusive.
    fn finish(self, cfg: &OptimizerConfig, tol: f64) -> SlackReport {
        let rhs_terms: Vec<f64> = self.rhs.iter().map(|(v, _)| *v).collect();
        let rhs_sum: f64 = rhs_terms.iter().sum();
        let slack = slack_for(self.id, self.lhs, rhs_sum);
        let mut exact_flags = vec![self.lhs_exact];
        exact_flags.extend(self.rhs.iter().map(|(_, e)| *e));
        let holds = match self.id {
            InequalityId::Tradeoff => slack <= tol,
            _ => slack >= -tol,
        };
        let status = if holds {
            Status::Confirmed
        } else if exact_flags.iter().all(|&e| e) && !self.heuristic {
            Status::ViolatedCertified
        } else {
            Status::Inconclusive
        };
        SlackReport {
            inequality_id: self.id,
            lhs: self.lhs,
            rhs_terms,
            slack,
            status,
            exact_flags,
            heuristic: self.heuristic,
            seed: cfg.seed,
            restarts: cfg.restarts,
            max_iterations: cfg.max_iterations,
            trace: self.trace,
        }
    }
}

fn require_dims(psi_dims: &DimVector, want: &[usize], what: &str) -> Result<()> {
    if psi_dims.as_slice() != want {
        return Err(Error::Unsupported(format!(
            "{what} needs dims {want:?}; got [{psi_dims}]"
        )));
    }
    Ok(())
}

fn require_parties(dims: &DimVector, n: usize, what: &str) -> Result<()> {
    if dims.len() != n {
        return Err(Error::Unsupported(format!(
            "{what} needs {n} subsystems; got dims [{dims}]"
        )));
    }
    Ok(())
}

fn require_total(dims: &DimVector, max: usize, what: &str) -> Result<()> {
    if dims.total() > max {
        return Err(Error::Unsupported(format!(
            "{what} supports total dimension <= {max}; got dims [{dims}]"
        )));
    }
    Ok(())
}

/// Entanglement of assistance of the marginal on `{focus} ∪ group`, across
/// `focus | group`.
fn eoa_on(psi: &PureState, focus: usize, group: &[usize], cfg: &OptimizerConfig) -> Result<f64> {
    let mut keep: Vec<usize> = group.to_vec();
    keep.push(focus);
    keep.sort_unstable();
    let rho = psi.marginal(&keep)?;
    let pos = keep.iter().position(|&p| p == focus).expect("focus kept");
    let cut = Bipartition::new(&[pos], keep.len())?;
    Ok(roofopt::maximize_roof(&rho, &cut, cfg)?.value)
}

/// CKW monogamy on a three-qubit pure state. All terms are closed forms.
pub fn check_ckw(psi: &PureState) -> Result<SlackReport> {
    require_dims(psi.dims(), &[2, 2, 2], "ckw")?;
    let lhs = measures::tangle_pure_cut(psi, &Bipartition::new(&[0], 3)?)?;
    let ab = measures::tangle_2q(&psi.marginal(&[0, 1])?)?;
    let ac = measures::tangle_2q(&psi.marginal(&[0, 2])?)?;
    let draft = Draft {
        id: InequalityId::Ckw,
        lhs,
        lhs_exact: true,
        rhs: vec![(ab, true), (ac, true)],
        heuristic: false,
        trace: vec![],
    };
    Ok(draft.finish(&OptimizerConfig { restarts: 0, max_iterations: 0, ..OptimizerConfig::default() }, EXACT_TOL))
}

/// Dual (polygamy) tangle inequality with tangle-of-assistance estimates.
pub fn check_tangle_polygamy(psi: &PureState, cfg: &OptimizerConfig) -> Result<SlackReport> {
    require_dims(psi.dims(), &[2, 2, 2], "dual_tangle")?;
    let lhs = measures::tangle_pure_cut(psi, &Bipartition::new(&[0], 3)?)?;
    let ab = roofopt::tangle_of_assistance_2q(&psi.marginal(&[0, 1])?, cfg)?;
    let ac = roofopt::tangle_of_assistance_2q(&psi.marginal(&[0, 2])?, cfg)?;
    let draft = Draft {
        id: InequalityId::DualTangle,
        lhs,
        lhs_exact: true,
        rhs: vec![(ab.value, ab.exact), (ac.value, ac.exact)],
        heuristic: false,
        trace: vec![],
    };
    Ok(draft.finish(cfg, ESTIMATE_TOL))
}

/// `S(A) = E_u(AB) + E_a(AC)` on a tripartite pure state.
pub fn check_tradeoff_identity(psi: &PureState, cfg: &OptimizerConfig) -> Result<SlackReport> {
    require_parties(psi.dims(), 3, "tradeoff")?;
    require_total(psi.dims(), 24, "tradeoff")?;
    let lhs = measures::von_neumann_entropy(&psi.marginal(&[0])?);
    let ue = roofopt::unlocalizable_entanglement(&psi.marginal(&[0, 1])?, cfg)?;
    let eoa = roofopt::maximize_roof(&psi.marginal(&[0, 2])?, &Bipartition::new(&[0], 2)?, cfg)?;
    let draft = Draft {
        id: InequalityId::Tradeoff,
        lhs,
        lhs_exact: true,
        rhs: vec![(ue.value, ue.exact), (eoa.value, eoa.exact)],
        heuristic: false,
        trace: vec![],
    };
    Ok(draft.finish(cfg, IDENTITY_TOL))
}

/// `E_u(AB) <= I(A:B)/2` with the UE estimate on the left.
pub fn check_ue_mutual(rho_ab: &DensityMatrix, cfg: &OptimizerConfig) -> Result<SlackReport> {
    require_parties(rho_ab.dims(), 2, "ue_mutual")?;
    let ue = roofopt::unlocalizable_entanglement(rho_ab, cfg)?;
    let half_mi = measures::mutual_information(rho_ab)? / 2.0;
    let draft = Draft {
        id: InequalityId::UeMutual,
        lhs: ue.value,
        lhs_exact: ue.exact,
        rhs: vec![(half_mi, true)],
        heuristic: false,
        trace: vec![],
    };
    Ok(draft.finish(cfg, ESTIMATE_TOL))
}

fn check_focus(psi_dims: &DimVector, focus: usize, what: &str) -> Result<()> {
    let n = psi_dims.len();
    if n < 3 {
        return Err(Error::Unsupported(format!("{what} needs at least 3 subsystems; got dims [{psi_dims}]")));
    }
    if focus >= n {
        return Err(Error::InvalidArgument(format!(
            "focus {focus} out of range for {n} subsystems"
        )));
    }
    require_total(psi_dims, MAX_TOTAL_DIM, what)?;
    let d = psi_dims.as_slice();
    if let Some(k) = (0..n).find(|&k| k != focus && d[focus] * d[k] > 9) {
        return Err(Error::Unsupported(format!(
            "{what} supports pairwise marginals up to dimension 9; pair ({focus},{k}) has {}",
            d[focus] * d[k]
        )));
    }
    Ok(())
}

/// `S(A_focus) <= sum_k E_a(A_focus A_k)` on a pure state.
pub fn check_polygamy_pure(psi: &PureState, focus: usize, cfg: &OptimizerConfig) -> Result<SlackReport> {
    check_focus(psi.dims(), focus, "poly")?;
    let lhs = measures::von_neumann_entropy(&psi.marginal(&[focus])?);
    let rhs = (0..psi.n_parties())
        .filter(|&k| k != focus)
        .map(|k| Ok((eoa_on(psi, focus, &[k], cfg)?, false)))
        .collect::<Result<Vec<_>>>()?;
    let draft = Draft {
        id: InequalityId::Poly,
        lhs,
        lhs_exact: true,
        rhs,
        heuristic: false,
        trace: vec![],
    };
    Ok(draft.finish(cfg, ESTIMATE_TOL))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Polygamy with the peel chain: at step k the group `A_{k+1}..A_n` is split
/// into the pair term `A_{k+1}` and the residual group `A_{k+2}..A_n`, and the
/// three-party inequality is checked on estimates of each term.
pub fn check_npolygamy(psi: &PureState, focus: usize, cfg: &OptimizerConfig) -> Result<SlackReport> {
    check_focus(psi.dims(), focus, "npoly")?;
    let others: Vec<usize> = (0..psi.n_parties()).filter(|&k| k != focus).collect();
    let entropy = measures::von_neumann_entropy(&psi.marginal(&[focus])?);

    let mut trace = Vec::new();
    let mut pair_terms = Vec::new();
    let mut group_value = entropy;
    let mut group_exact = true;
    for k in 0..others.len() - 1 {
        let group = &others[k..];
        let residual = &others[k + 1..];
        let pair = eoa_on(psi, focus, &others[k..=k], cfg)?;
        let rest = eoa_on(psi, focus, residual, cfg)?;
        let rhs_sum = pair + rest;
        let slack = rhs_sum - group_value;
        let status = if slack >= -ESTIMATE_TOL { Status::Confirmed } else { Status::Inconclusive };
        trace.push(TraceStep {
            label: format!("peel-{}", k + 1),
            parties: format!(
                "{focus}|{} <= {focus}|{} + {focus}|{}",
                join(group),
                others[k],
                join(residual)
            ),
            lhs: group_value,
            lhs_exact: group_exact,
            rhs_terms: vec![pair, rest],
            slack,
            status,
        });
        pair_terms.push(pair);
        group_value = rest;
        group_exact = false;
    }
    // The last residual group is a single party: its term is the last pair term.
    pair_terms.push(group_value);

    let draft = Draft {
        id: InequalityId::Npoly,
        lhs: entropy,
        lhs_exact: true,
        rhs: pair_terms.into_iter().map(|v| (v, false)).collect(),
        heuristic: false,
        trace,
    };
    Ok(draft.finish(cfg, ESTIMATE_TOL))
}

/// `E_a(A|BC) <= E_a(AB) + E_a(AC)` on a tripartite mixed state.
///
/// Both sides are estimates, so the report is heuristic. The trace follows
/// the derivation through the lhs witness ensemble `{p_j, psi_j}`:
/// `member-polygamy` checks the pure-state inequality averaged over members,
/// `linearity` the reconstruction `sum_j p_j rho^j_AB = rho_AB` (and AC), and
/// `eoa-averaging` the bound `sum_j p_j E_a(rho^j_X) <= E_a(rho_X)`.
pub fn check_polygamy_mixed(rho: &DensityMatrix, cfg: &OptimizerConfig) -> Result<SlackReport> {
    require_parties(rho.dims(), 3, "poly_mixed")?;
    require_total(rho.dims(), 12, "poly_mixed")?;
    if let Some(psi) = rho.as_pure() {
        let mut report = check_polygamy_pure(&psi, 0, cfg)?;
        report.inequality_id = InequalityId::PolyMixed;
        return Ok(report);
    }
    let a_bc = Bipartition::new(&[0], 3)?;
    let lhs = roofopt::maximize_roof(rho, &a_bc, cfg)?;
    let cut2 = Bipartition::new(&[0], 2)?;
    let rho_ab = rho.partial_trace(&[0, 1])?;
    let rho_ac = rho.partial_trace(&[0, 2])?;
    let ab = roofopt::maximize_roof(&rho_ab, &cut2, cfg)?.value;
    let ac = roofopt::maximize_roof(&rho_ac, &cut2, cfg)?.value;

    let Witness::Ensemble(ens) = &lhs.witness else {
        unreachable!("roof optimizers return ensembles")
    };
    let mut avg_ab = 0.0;
    let mut avg_ac = 0.0;
    let mut recon_ab = crate::densemath::ComplexMatrix::zeros(rho_ab.dim(), rho_ab.dim());
    let mut recon_ac = crate::densemath::ComplexMatrix::zeros(rho_ac.dim(), rho_ac.dim());
    for (p, psi) in &ens.members {
        let m_ab = psi.marginal(&[0, 1])?;
        let m_ac = psi.marginal(&[0, 2])?;
        let w = crate::densemath::C64::new(*p, 0.0);
        recon_ab = &recon_ab + &m_ab.matrix().scale(w);
        recon_ac = &recon_ac + &m_ac.matrix().scale(w);
        avg_ab += p * roofopt::maximize_roof(&m_ab, &cut2, cfg)?.value;
        avg_ac += p * roofopt::maximize_roof(&m_ac, &cut2, cfg)?.value;
    }
    let linearity_err = recon_ab
        .max_abs_diff(rho_ab.matrix())
        .max(recon_ac.max_abs_diff(rho_ac.matrix()));
    let step = |label: &str, parties: &str, lhs: f64, rhs_terms: Vec<f64>, tol: f64| {
        let slack = rhs_terms.iter().sum::<f64>() - lhs;
        TraceStep {
            label: label.into(),
            parties: parties.into(),
            lhs,
            lhs_exact: false,
            rhs_terms,
            slack,
            status: if slack >= -tol { Status::Confirmed } else { Status::Inconclusive },
        }
    };
    let trace = vec![
        step(
            "member-polygamy",
            "sum_j p_j S(A)_j <= sum_j p_j [E_a(AB)_j + E_a(AC)_j]",
            lhs.value,
            vec![avg_ab, avg_ac],
            ESTIMATE_TOL,
        ),
        TraceStep {
            label: "linearity".into(),
            parties: "sum_j p_j rho^j_AB = rho_AB, sum_j p_j rho^j_AC = rho_AC".into(),
            lhs: linearity_err,
            lhs_exact: true,
            rhs_terms: vec![],
            slack: -linearity_err,
            status: if linearity_err <= 1e-9 { Status::Confirmed } else { Status::Inconclusive },
        },
        step(
            "eoa-averaging",
            "sum_j p_j [E_a(AB)_j + E_a(AC)_j] <= E_a(AB) + E_a(AC)",
            avg_ab + avg_ac,
            vec![ab, ac],
            ESTIMATE_TOL,
        ),
    ];
    let draft = Draft {
        id: InequalityId::PolyMixed,
        lhs: lhs.value,
        lhs_exact: false,
        rhs: vec![(ab, false), (ac, false)],
        heuristic: true,
        trace,
    };
    Ok(draft.finish(cfg, ESTIMATE_TOL))
}

/// How batch states are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Haar-random pure states.
    HaarPure,
    /// Random mixed states; `None` draws the rank uniformly from `1..=d`.
    RandomMixed { rank: Option<usize> },
}

#[derive(Clone, Debug)]
pub struct BatchSpec {
    pub inequality: InequalityId,
    pub dims: DimVector,
    pub n_samples: usize,
    pub master_seed: u64,
    pub cfg: OptimizerConfig,
    pub sampler: Sampler,
    /// Focus subsystem for the polygamy checks.
    pub focus: usize,
    /// Re-run inconclusive samples once with doubled restarts.
    pub escalate: bool,
}

impl BatchSpec {
    pub fn new(inequality: InequalityId, dims: DimVector, n_samples: usize, master_seed: u64) -> Self {
        let sampler = if inequality.takes_pure_states() {
            Sampler::HaarPure
        } else {
            Sampler::RandomMixed { rank: None }
        };
        Self {
            inequality,
            dims,
            n_samples,
            master_seed,
            cfg: OptimizerConfig::default(),
            sampler,
            focus: 0,
            escalate: false,
        }
    }

    /// Rejects unsupported inequality/dims/sampler combinations up front.
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        let dims = &self.dims;
        let supported = || {
            "supported: ckw and dual_tangle on dims 2,2,2 (pure); tradeoff on 3 subsystems with \
             total dim <= 24 (pure); poly and npoly on >= 3 subsystems with pair dims <= 9 and total \
             dim <= 64 (pure); ue_mutual on 2 subsystems (mixed); poly_mixed on 3 subsystems with \
             total dim <= 12 (mixed)"
        };
        let fail = |why: String| Err(Error::Unsupported(format!("{why}; {}", supported())));
        let pure_needed = self.inequality.takes_pure_states();
        match (pure_needed, self.sampler) {
            (true, Sampler::RandomMixed { .. }) => {
                return fail(format!("{} checks pure states", self.inequality))
            }
            (false, Sampler::HaarPure) if self.inequality == InequalityId::UeMutual => {}
            _ => {}
        }
        if let Sampler::RandomMixed { rank: Some(r) } = self.sampler {
            if r == 0 || r > dims.total() {
                return Err(Error::InvalidArgument(format!(
                    "rank {r} outside 1..={} for dims [{dims}]",
                    dims.total()
                )));
            }
        }
        let ok = match self.inequality {
            InequalityId::Ckw | InequalityId::DualTangle => dims.as_slice() == [2, 2, 2],
            InequalityId::Tradeoff => dims.len() == 3 && dims.total() <= 24,
            InequalityId::Poly | InequalityId::Npoly => {
                check_focus(dims, self.focus, "poly").is_ok()
            }
            InequalityId::UeMutual => dims.len() == 2 && dims.total() <= MAX_TOTAL_DIM,
            InequalityId::PolyMixed => dims.len() == 3 && dims.total() <= 12,
        };
        if !ok {
            return fail(format!("{} is not supported on dims [{dims}]", self.inequality));
        }
        if dims.as_slice().iter().any(|&d| d < 2) {
            return fail(format!("dims [{dims}] contain a trivial subsystem"));
        }
        Ok(())
    }

    fn sample_seed(&self, k: usize) -> u64 {
        rng::mix(self.master_seed, k as u64)
    }

    fn draw_mixed(&self, seed: u64) -> Result<DensityMatrix> {
        let d = self.dims.total();
        let rank = match self.sampler {
            Sampler::RandomMixed { rank: Some(r) } => r,
            _ => {
                use rand::Rng;
                rng::generator(rng::mix(seed, 0xA11CE)).random_range(1..=d)
            }
        };
        qstate::random_mixed(&self.dims, rank, seed)
    }

    /// Runs one check on an explicit state with the given optimizer config.
    fn check_state(&self, state: &qstate::State, cfg: &OptimizerConfig) -> Result<SlackReport> {
        check_state(self.inequality, state, self.focus, cfg)
    }

    fn run_sample(&self, k: usize) -> Result<SampleReport> {
        let started = Instant::now();
        let seed = self.sample_seed(k);
        let state = match self.sampler {
            Sampler::HaarPure => qstate::State::Pure(qstate::haar_pure(&self.dims, seed)),
            Sampler::RandomMixed { .. } => qstate::State::Mixed(self.draw_mixed(seed)?),
        };
        let cfg = OptimizerConfig { seed, ..self.cfg.clone() };
        let mut report = self.check_state(&state, &cfg)?;
        let mut escalated = false;
        if self.escalate && report.status == Status::Inconclusive {
            report = self.check_state(&state, &cfg.escalated())?;
            escalated = true;
        }
        Ok(SampleReport {
            sample_id: k,
            seed,
            report,
            escalated,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Dispatches `id` on a state.
pub fn check_state(
    id: InequalityId,
    state: &qstate::State,
    focus: usize,
    cfg: &OptimizerConfig,
) -> Result<SlackReport> {
    let pure = || {
        state.as_pure().ok_or_else(|| {
            Error::Unsupported(format!("{id} checks pure states; the given state is mixed"))
        })
    };
    match id {
        InequalityId::Ckw => check_ckw(&pure()?),
        InequalityId::DualTangle => check_tangle_polygamy(&pure()?, cfg),
        InequalityId::Tradeoff => check_tradeoff_identity(&pure()?, cfg),
        InequalityId::Poly => check_polygamy_pure(&pure()?, focus, cfg),
        InequalityId::Npoly => check_npolygamy(&pure()?, focus, cfg),
        InequalityId::UeMutual => check_ue_mutual(&state.to_density(), cfg),
        InequalityId::PolyMixed => check_polygamy_mixed(&state.to_density(), cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub sample_id: usize,
    /// Seed the sample was drawn with; the nested report carries the
    /// optimizer seed.
    #[serde(rename = "sample_seed")]
    pub seed: u64,
    #[serde(flatten)]
    pub report: SlackReport,
    pub escalated: bool,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BatchSummary {
    pub n_samples: usize,
    pub confirmed: usize,
    pub inconclusive: usize,
    pub violated_certified: usize,
    pub min_slack: f64,
    pub mean_slack: f64,
}

impl BatchSummary {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a SlackReport>) -> Self {
        let mut s = BatchSummary::default();
        let mut total = 0.0;
        let mut min = f64::INFINITY;
        for r in reports {
            s.n_samples += 1;
            match r.status {
                Status::Confirmed => s.confirmed += 1,
                Status::Inconclusive => s.inconclusive += 1,
                Status::ViolatedCertified => s.violated_certified += 1,
            }
            total += r.slack;
            min = min.min(r.slack);
        }
        if s.n_samples > 0 {
            s.min_slack = min;
            s.mean_slack = total / s.n_samples as f64;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchResult {
    pub reports: Vec<SampleReport>,
    pub summary: BatchSummary,
}

/// Runs every sample of `spec`; reports come back in sample order.
pub fn batch_run(spec: &BatchSpec) -> Result<BatchResult> {
    let mut reports = Vec::with_capacity(spec.n_samples);
    batch_run_streaming(spec, |r| {
        reports.push(r.clone());
        Ok(())
    })?;
    let summary = BatchSummary::from_reports(reports.iter().map(|r| &r.report));
    Ok(BatchResult { reports, summary })
}

/// Like [`batch_run`] but hands each report to `sink` in sample order as soon
/// as its chunk completes. Samples inside a chunk run concurrently.
pub fn batch_run_streaming<F>(spec: &BatchSpec, mut sink: F) -> Result<BatchSummary>
where
    F: FnMut(&SampleReport) -> Result<()>,
{
    spec.validate()?;
    let chunk = if par::is_parallel() { 64 } else { 1 };
    let mut summary_input = Vec::with_capacity(spec.n_samples);
    let mut start = 0;
    while start < spec.n_samples {
        let len = chunk.min(spec.n_samples - start);
        let results = par::map_indices(len, |i| spec.run_sample(start + i));
        for r in results {
            let r = r?;
            sink(&r)?;
            summary_input.push(r.report);
        }
        start += len;
    }
    Ok(BatchSummary::from_reports(summary_input.iter()))
}

/// Sequential reference path; same output as [`batch_run`].
pub fn batch_run_sequential(spec: &BatchSpec) -> Result<BatchResult> {
    spec.validate()?;
    let reports = par::map_indices_seq(spec.n_samples, |k| spec.run_sample(k))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summary = BatchSummary::from_reports(reports.iter().map(|r| &r.report));
    Ok(BatchResult { reports, summary })
}
