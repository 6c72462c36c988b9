//! Closed-form entanglement quantities. All entropies are in bits (ebits).

use serde::Serialize;

use crate::densemath::{self, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::qstate::{Bipartition, DensityMatrix, PureState, RANK_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Entropy,
    Eof,
    Eoa,
    Ue,
    Tangle,
    TangleAssist,
    MutualInfo,
    Concurrence,
    ConcurrenceAssist,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 9] = [
        MeasureKind::Entropy,
        MeasureKind::Eof,
        MeasureKind::Eoa,
        MeasureKind::Ue,
        MeasureKind::Tangle,
        MeasureKind::TangleAssist,
        MeasureKind::MutualInfo,
        MeasureKind::Concurrence,
        MeasureKind::ConcurrenceAssist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::Entropy => "entropy",
            MeasureKind::Eof => "eof",
            MeasureKind::Eoa => "eoa",
            MeasureKind::Ue => "ue",
            MeasureKind::Tangle => "tangle",
            MeasureKind::TangleAssist => "tangle_assist",
            MeasureKind::MutualInfo => "mutual_info",
            MeasureKind::Concurrence => "concurrence",
            MeasureKind::ConcurrenceAssist => "concurrence_assist",
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
            Error::InvalidArgument(format!("unknown measure '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// A labeled numeric result; `exact` is false for optimized estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureValue {
    pub value: f64,
    pub kind: MeasureKind,
    pub exact: bool,
}

/// `-sum p log2 p` with `0 log 0 = 0`; negative noise is treated as zero.
pub fn shannon_bits(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn binary_entropy(x: f64) -> f64 {
    shannon_bits(&[x, 1.0 - x])
}

/// Entropy of the normalized operator `sigma / tr(sigma)` for a Hermitian PSD
/// `sigma` given row-major. Hot path for the optimizers.
pub(crate) fn entropy_of_unnormalized(n: usize, sigma: &[C64], trace: f64) -> f64 {
    let vals = densemath::eigvals_hermitian_unchecked(n, sigma);
    let probs: Vec<f64> = vals.iter().map(|v| v / trace).collect();
    shannon_bits(&probs)
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_bits(&rho.eigenvalues())
}

/// Entropy of the marginal on `cut.side_a()`.
pub fn entropy_of_entanglement(psi: &PureState, cut: &Bipartition) -> Result<f64> {
    check_cut(psi.n_parties(), cut)?;
    Ok(von_neumann_entropy(&psi.marginal(cut.side_a())?))
}

fn check_cut(n: usize, cut: &Bipartition) -> Result<()> {
    if cut.n_parties() != n {
        return Err(Error::InvalidArgument(format!(
            "bipartition {cut} does not cover the {n} subsystems of the state"
        )));
    }
    Ok(())
}

/// `S(A) + S(B) - S(AB)` for a two-subsystem state.
pub fn mutual_information(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_parties() != 2 {
        return Err(Error::InvalidArgument(format!(
            "mutual information needs exactly 2 subsystems (got {})",
            rho.n_parties()
        )));
    }
    mutual_information_cut(rho, &Bipartition::new(&[0], 2)?)
}

/// Mutual information across an arbitrary bipartition.
pub fn mutual_information_cut(rho: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    check_cut(rho.n_parties(), cut)?;
    let sa = von_neumann_entropy(&rho.partial_trace(cut.side_a())?);
    let sb = von_neumann_entropy(&rho.partial_trace(cut.side_b())?);
    Ok(sa + sb - von_neumann_entropy(rho))
}

fn require_two_qubits(rho: &DensityMatrix, what: &str) -> Result<()> {
    if rho.dims().as_slice() != [2, 2] {
        return Err(Error::Unsupported(format!(
            "{what} is defined for two-qubit states (dims 2,2); got dims [{}]",
            rho.dims()
        )));
    }
    Ok(())
}

/// `sigma_y ⊗ sigma_y` in the computational basis.
#[cfg(test)]
fn spin_flip() -> ComplexMatrix {
    let mut yy = ComplexMatrix::zeros(4, 4);
    // sigma_y ⊗ sigma_y = antidiag(-1, 1, 1, -1)
    yy[(0, 3)] = C64::new(-1.0, 0.0);
    yy[(1, 2)] = C64::new(1.0, 0.0);
    yy[(2, 1)] = C64::new(1.0, 0.0);
    yy[(3, 0)] = C64::new(-1.0, 0.0);
    yy
}

/// Square roots of the eigenvalues of `rho (Y⊗Y) rho* (Y⊗Y)`, descending.
///
/// Computed as the singular values of the `r x r` symmetric matrix
/// `tau_ij = v_i^T (Y⊗Y) v_j`, `v_i = sqrt(lambda_i) e_i` over the eigenpairs of
/// `rho` above the rank threshold. Missing entries (rank < 4) are zero.
pub fn wootters_lambdas(rho: &DensityMatrix) -> Result<[f64; 4]> {
    require_two_qubits(rho, "the spin-flip spectrum")?;
    let eig = densemath::eig_hermitian(rho.matrix())?;
    let vs: Vec<Vec<C64>> = (0..4)
        .rev()
        .filter(|&k| eig.values[k] > RANK_TOL)
        .map(|k| {
            let s = eig.values[k].sqrt();
            eig.vectors.column(k).into_iter().map(|z| z * s).collect()
        })
        .collect();
    let r = vs.len();
    // (Y⊗Y) v = (-v3, v2, v1, -v0)
    let flip = |v: &[C64]| [-v[3], v[2], v[1], -v[0]];
    let mut tau = ComplexMatrix::zeros(r.max(1), r.max(1));
    for i in 0..r {
        for j in 0..r {
            let fj = flip(&vs[j]);
            tau[(i, j)] = vs[i].iter().zip(&fj).map(|(a, b)| a * b).sum();
        }
    }
    let mut sv: Vec<f64> = match r {
        0 => vec![],
        1 => vec![tau[(0, 0)].norm()],
        2 => {
            // s1^2 + s2^2 = |tau|_F^2 and s1 s2 = |det tau|; the small value
            // comes from the product to avoid cancellation.
            let fro2 = tau.frobenius_norm().powi(2);
            let det = (tau[(0, 0)] * tau[(1, 1)] - tau[(0, 1)] * tau[(1, 0)]).norm();
            let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
            let s1 = (0.5 * (fro2 + disc)).sqrt();
            let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
            vec![s1, s2]
        }
        _ => {
            let gram = tau.adjoint().matmul(&tau)?;
            let gram = (&gram + &gram.adjoint()).scale(C64::new(0.5, 0.0));
            densemath::eigvals_hermitian(&gram)?
                .into_iter()
                .map(|v| v.max(0.0).sqrt())
                .collect()
        }
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let mut lam = [0.0; 4];
    for (slot, v) in lam.iter_mut().zip(sv) {
        *slot = v;
    }
    Ok(lam)
}

pub fn concurrence_2q(rho: &DensityMatrix) -> Result<f64> {
    let l = wootters_lambdas(rho)?;
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

pub fn tangle_2q(rho: &DensityMatrix) -> Result<f64> {
    Ok(concurrence_2q(rho)?.powi(2))
}

pub fn concurrence_of_assistance_2q(rho: &DensityMatrix) -> Result<f64> {
    let l = wootters_lambdas(rho)?;
    Ok(l.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Two-qubit entanglement of formation from the concurrence.
pub fn eof_2q_closed(rho: &DensityMatrix) -> Result<f64> {
    let c = concurrence_2q(rho)?;
    Ok(eof_from_concurrence(c))
}

pub fn eof_from_concurrence(c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt()))
}

/// `4 det(rho_A)` for a cut whose `side_a` is a single qubit.
pub fn tangle_pure_cut(psi: &PureState, cut: &Bipartition) -> Result<f64> {
    check_cut(psi.n_parties(), cut)?;
    let side = cut.side_a();
    if side.len() != 1 || psi.dims().as_slice()[side[0]] != 2 {
        return Err(Error::Unsupported(format!(
            "pure-state tangle needs a single qubit on the first side of the cut (got {cut})"
        )));
    }
    let m = psi.marginal(side)?;
    let m = m.matrix();
    let det = m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr();
    Ok((4.0 * det).clamp(0.0, 1.0))
}

/// `4 det(sigma/p) * p` for an unnormalized 2x2 marginal `sigma` of trace `p`.
pub(crate) fn tangle_of_unnormalized_qubit(sigma: &[C64], p: f64) -> f64 {
    let det = sigma[0].re * sigma[3].re - sigma[1].norm_sqr();
    (4.0 * det / p).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{self, DimVector};
    use crate::rng;
    use proptest::prelude::*;

    fn dims(v: &[usize]) -> DimVector {
        DimVector::new(v.to_vec()).unwrap()
    }

    fn classical_pair() -> DensityMatrix {
        DensityMatrix::new(dims(&[2, 2]), ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5])).unwrap()
    }

    #[test]
    fn entropy_values() {
        let pure = qstate::haar_pure(&dims(&[3]), 1).to_density();
        assert!(von_neumann_entropy(&pure).abs() < 1e-12);
        let half = DensityMatrix::maximally_mixed(dims(&[2]));
        assert!((von_neumann_entropy(&half) - 1.0).abs() < 1e-15);
        let thirds =
            DensityMatrix::new(dims(&[2]), ComplexMatrix::from_diag(&[1.0 / 3.0, 2.0 / 3.0])).unwrap();
        let expect = 3f64.log2() - 2.0 / 3.0;
        assert!((von_neumann_entropy(&thirds) - expect).abs() < 1e-12);
        assert!((expect - 0.918296).abs() < 1e-6);
    }

    #[test]
    fn entanglement_entropy_cases() {
        let product = qstate::haar_pure(&dims(&[2]), 1).tensor(&qstate::haar_pure(&dims(&[3]), 2));
        let cut = Bipartition::new(&[0], 2).unwrap();
        assert!(entropy_of_entanglement(&product, &cut).unwrap().abs() < 1e-12);
        let bell = qstate::bell();
        assert!((entropy_of_entanglement(&bell, &cut).unwrap() - 1.0).abs() < 1e-14);
        let ghz = qstate::ghz(3, 2).unwrap();
        let cut3 = Bipartition::new(&[0], 3).unwrap();
        assert!((entropy_of_entanglement(&ghz, &cut3).unwrap() - 1.0).abs() < 1e-14);
        assert!(entropy_of_entanglement(&ghz, &cut).is_err());
    }

    #[test]
    fn mutual_information_cases() {
        let a = qstate::random_mixed(&dims(&[2]), 2, 1).unwrap();
        let b = qstate::random_mixed(&dims(&[3]), 3, 2).unwrap();
        assert!(mutual_information(&a.tensor(&b)).unwrap().abs() < 1e-12);
        let bell = qstate::bell().to_density();
        assert!((mutual_information(&bell).unwrap() - 2.0).abs() < 1e-12);
        assert!((mutual_information(&classical_pair()).unwrap() - 1.0).abs() < 1e-12);
        let ghz = qstate::ghz(3, 2).unwrap().to_density();
        assert!(mutual_information(&ghz).is_err());
    }

    #[test]
    fn concurrence_cases() {
        let bell = qstate::bell().to_density();
        assert!((concurrence_2q(&bell).unwrap() - 1.0).abs() < 1e-9);
        assert!((tangle_2q(&bell).unwrap() - 1.0).abs() < 1e-9);
        assert!(concurrence_2q(&classical_pair()).unwrap() < 1e-9);
        let diag =
            DensityMatrix::new(dims(&[2, 2]), ComplexMatrix::from_diag(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert!(concurrence_2q(&diag).unwrap() < 1e-9);
        let qutrit = qstate::random_mixed(&dims(&[2, 3]), 2, 3).unwrap();
        assert!(matches!(concurrence_2q(&qutrit), Err(Error::Unsupported(_))));
    }

    /// Independent route: spectrum of `sqrt(sqrt(rho) rho~ sqrt(rho))`.
    fn lambdas_via_matrix_sqrt(rho: &DensityMatrix) -> Vec<f64> {
        let yy = spin_flip();
        let flipped = &(&yy * &rho.matrix().conj()) * &yy;
        let root = densemath::matrix_sqrt_psd(rho.matrix()).unwrap();
        let inner = &(&root * &flipped) * &root;
        let inner = (&inner + &inner.adjoint()).scale(C64::new(0.5, 0.0));
        let mut v: Vec<f64> = densemath::eigvals_hermitian(&inner)
            .unwrap()
            .into_iter()
            .map(|x| x.max(0.0).sqrt())
            .collect();
        v.reverse();
        v
    }

    #[test]
    fn lambdas_agree_with_matrix_sqrt_route() {
        for rank in 1..=4 {
            for seed in 0..10u64 {
                let rho = qstate::random_mixed(&dims(&[2, 2]), rank, 1000 * rank as u64 + seed).unwrap();
                let fast = wootters_lambdas(&rho).unwrap();
                let slow = lambdas_via_matrix_sqrt(&rho);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-6, "rank {rank}: {fast:?} vs {slow:?}");
                }
            }
        }
    }

    #[test]
    fn werner_concurrence_matches_spectrum_oracle() {
        // For Werner states the spin flip leaves rho invariant, so the
        // lambdas are just the eigenvalues of rho: (1+3p)/4 and 3 x (1-p)/4.
        for p in [0.2, 1.0 / 3.0, 0.5, 0.8, 1.0] {
            let rho = qstate::werner(p).unwrap();
            let flipped = {
                let yy = spin_flip();
                &(&yy * &rho.matrix().conj()) * &yy
            };
            assert!(flipped.max_abs_diff(rho.matrix()) < 1e-15);
            let ev = rho.eigenvalues();
            let oracle = (ev[3] - ev[0] - ev[1] - ev[2]).max(0.0);
            let c = concurrence_2q(&rho).unwrap();
            assert!((c - oracle).abs() < 1e-9, "p={p}");
            assert!((c - ((3.0 * p - 1.0) / 2.0).max(0.0)).abs() < 1e-9);
        }
        let c = concurrence_2q(&qstate::werner(0.8).unwrap()).unwrap();
        assert!((c - 0.7).abs() < 1e-9);
    }

    /// Grid search over two-member decompositions `U diag(sqrt(lambda)) E^T`
    /// with `U` in SU(2).
    fn brute_force_mean_concurrence(rho: &DensityMatrix, maximize: bool) -> f64 {
        let eig = densemath::eig_hermitian(rho.matrix()).unwrap();
        let (l1, l0) = (eig.values[3], eig.values[2]);
        let (e1, e0) = (eig.vectors.column(3), eig.vectors.column(2));
        let n = 400;
        let mut best: f64 = if maximize { 0.0 } else { f64::INFINITY };
        for a in 0..=n {
            let theta = std::f64::consts::FRAC_PI_2 * a as f64 / n as f64;
            for b in 0..n {
                let phi = std::f64::consts::TAU * b as f64 / n as f64;
                let (c, s) = (theta.cos(), theta.sin());
                let ph = C64::from_polar(1.0, phi);
                let rows = [[C64::new(c, 0.0), -ph * s], [ph.conj() * s, C64::new(c, 0.0)]];
                let mut avg = 0.0;
                for row in rows {
                    let v: Vec<C64> = (0..4)
                        .map(|i| row[0] * l1.sqrt() * e1[i] + row[1] * l0.sqrt() * e0[i])
                        .collect();
                    // p * C(psi) = 2 |ad - bc| on the unnormalized vector.
                    avg += 2.0 * (v[0] * v[3] - v[1] * v[2]).norm();
                }
                best = if maximize { best.max(avg) } else { best.min(avg) };
            }
        }
        best
    }

    #[test]
    fn concurrence_of_assistance_cases() {
        let bell = qstate::bell().to_density();
        assert!((concurrence_of_assistance_2q(&bell).unwrap() - 1.0).abs() < 1e-9);
        assert!((concurrence_of_assistance_2q(&classical_pair()).unwrap() - 1.0).abs() < 1e-9);

        let w_ab = qstate::w_state(3).unwrap().marginal(&[0, 1]).unwrap();
        let ca = concurrence_of_assistance_2q(&w_ab).unwrap();
        assert!((ca - 2.0 / 3.0).abs() < 1e-9);
        let brute = brute_force_mean_concurrence(&w_ab, true);
        assert!((brute - 2.0 / 3.0).abs() < 1e-3, "brute {brute}");
    }

    #[test]
    fn eof_closed_form_cases() {
        let bell = qstate::bell().to_density();
        assert!((eof_2q_closed(&bell).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(eof_2q_closed(&classical_pair()).unwrap(), 0.0);
        let w8 = qstate::werner(0.8).unwrap();
        let expect = binary_entropy((1.0 + 0.51f64.sqrt()) / 2.0);
        assert!((eof_2q_closed(&w8).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn pure_cut_tangles() {
        let cut = Bipartition::new(&[0], 3).unwrap();
        let ghz = qstate::ghz(3, 2).unwrap();
        assert!((tangle_pure_cut(&ghz, &cut).unwrap() - 1.0).abs() < 1e-14);
        let w = qstate::w_state(3).unwrap();
        assert!((tangle_pure_cut(&w, &cut).unwrap() - 8.0 / 9.0).abs() < 1e-14);
        let two = Bipartition::new(&[0, 1], 3).unwrap();
        assert!(tangle_pure_cut(&ghz, &two).is_err());
        let q3 = qstate::ghz(3, 3).unwrap();
        assert!(tangle_pure_cut(&q3, &cut).is_err());
    }

    proptest! {
        #[test]
        fn entropy_is_unitarily_invariant(seed in any::<u64>(), rank in 1usize..=4) {
            let rho = qstate::random_mixed(&dims(&[2, 2]), rank, seed).unwrap();
            let h = {
                let psi = qstate::haar_pure(&dims(&[4, 4]), rng::mix(seed, 1));
                let m = ComplexMatrix::from_vec(4, 4, psi.amplitudes().to_vec()).unwrap();
                (&m + &m.adjoint()).scale(C64::new(3.0, 0.0))
            };
            let u = densemath::unitary_from_generator(&h).unwrap();
            let rotated = rho.conjugated(&u).unwrap();
            prop_assert!((von_neumann_entropy(&rho) - von_neumann_entropy(&rotated)).abs() <= 1e-9);
        }

        #[test]
        fn entanglement_entropy_is_symmetric(seed in any::<u64>()) {
            let psi = qstate::haar_pure(&dims(&[2, 3, 2]), seed);
            let cut = Bipartition::new(&[1], 3).unwrap();
            let a = entropy_of_entanglement(&psi, &cut).unwrap();
            let b = entropy_of_entanglement(&psi, &cut.swapped()).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
            prop_assert!(a <= 3f64.log2() + 1e-12);
        }

        #[test]
        fn concurrence_ordering(seed in any::<u64>(), rank in 1usize..=4) {
            let rho = qstate::random_mixed(&dims(&[2, 2]), rank, seed).unwrap();
            let c = concurrence_2q(&rho).unwrap();
            let ca = concurrence_of_assistance_2q(&rho).unwrap();
            prop_assert!(c >= 0.0 && c <= ca + 1e-12 && ca <= 1.0);
            let e = eof_2q_closed(&rho).unwrap();
            if c == 0.0 {
                prop_assert_eq!(e, 0.0);
            }
            if c > 1e-6 {
                prop_assert!(e > 1e-12);
            }
        }

        #[test]
        fn mutual_information_is_nonnegative(seed in any::<u64>(), rank in 1usize..=6) {
            let rho = qstate::random_mixed(&dims(&[2, 3]), rank, seed).unwrap();
            prop_assert!(mutual_information(&rho).unwrap() >= -1e-9);
        }
    }
}
