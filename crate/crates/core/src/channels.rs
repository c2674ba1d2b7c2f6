//! Decoherence and measurement-degradation models: beam-splitter loss,
//! white-noise mixing, and three-region outcome binning.

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_matrix, apply_local_to_vec_with, DensityOperator, JointDistribution,
    ModeLayout, StateVector,
};
use crate::scalar::{as_f64, lift, rn, rr, CMat, Scalar, C};

/// Extended-space dimension up to which loss uses the ancilla dilation;
/// larger problems switch to the (equally exact) full-rank Kraus sum.
const DILATION_DIM_LIMIT: usize = 512;

fn check_eta<R: Scalar>(eta: R) -> Result<()> {
    let e = as_f64(eta);
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidParameter(format!(
            "transmission must lie in [0,1] (got {e})"
        )));
    }
    Ok(())
}

/// Photon loss with intensity transmission `η` on one mode.
///
/// Realized by coupling the mode to a vacuum ancilla through a beam
/// splitter of transmissivity `√η` and tracing the ancilla out. Small
/// problems do this literally ([`apply_loss_dilation`]); larger ones use
/// the equivalent full-rank Kraus sum ([`apply_loss_kraus`]). Both paths
/// are exact at the truncated dimension.
pub fn apply_loss<R: Scalar>(
    rho: &DensityOperator<R>,
    mode: usize,
    eta: R,
) -> Result<DensityOperator<R>> {
    rho.layout().check_mode(mode)?;
    let extended = rho.layout().dim() * (rho.layout().cutoff(mode) + 1);
    if extended <= DILATION_DIM_LIMIT {
        apply_loss_dilation(rho, mode, eta)
    } else {
        apply_loss_kraus(rho, mode, eta)
    }
}

/// Loss applied to every mode with the same transmission.
pub fn apply_loss_all<R: Scalar>(
    rho: &DensityOperator<R>,
    eta: R,
) -> Result<DensityOperator<R>> {
    let mut out = rho.clone();
    for m in 0..rho.layout().n_modes() {
        out = apply_loss(&out, m, eta)?;
    }
    Ok(out)
}

/// Beam-splitter dilation path of [`apply_loss`]: attach a vacuum ancilla
/// at the mode's own cutoff (photon number is conserved, so this loses
/// nothing), rotate by `exp(θ(ab† − a†b))` with `cos θ = √η`, trace out.
pub fn apply_loss_dilation<R: Scalar>(
    rho: &DensityOperator<R>,
    mode: usize,
    eta: R,
) -> Result<DensityOperator<R>> {
    check_eta(eta)?;
    rho.layout().check_mode(mode)?;
    let c = rho.layout().cutoff(mode);
    let md = c + 1;

    // Two-mode beam splitter on the local (mode, ancilla) space,
    // U = exp(−iθG) with G = i(ab† − a†b) Hermitian.
    let a = annihilation_matrix::<R>(c).kronecker(&CMat::<R>::identity(md, md));
    let b = CMat::<R>::identity(md, md).kronecker(&annihilation_matrix::<R>(c));
    let ab_dag = &a * b.adjoint();
    let g = (&ab_dag - ab_dag.adjoint()).map(|z| z * C::<R>::new(R::zero(), R::one()));
    let theta = eta.sqrt().min(R::one()).acos();
    let eig = g.symmetric_eigen();
    let mut u = CMat::<R>::zeros(md * md, md * md);
    for k in 0..md * md {
        let lam = eig.eigenvalues[k];
        let phase = C::<R>::new((-theta * lam).cos(), (-theta * lam).sin());
        let col = eig.eigenvectors.column(k);
        for j in 0..md * md {
            let vc = col[j].conj() * phase;
            for i in 0..md * md {
                u[(i, j)] += col[i] * vc;
            }
        }
    }

    let vac_anc = StateVector::<R>::vacuum(ModeLayout::new(&[c])?).to_density();
    let ext = rho.tensor(&vac_anc);
    let anc = rho.layout().n_modes();
    let (_, groups) = ext.layout().subindex_tables(&[mode, anc]);
    let half = crate::hilbert::Operator::new(ext.layout().clone(), {
        use crate::hilbert::apply_local_left_with;
        apply_local_left_with(&groups, &u, ext.matrix())
    })?;
    let rotated = {
        use crate::hilbert::apply_local_left_with;
        apply_local_left_with(&groups, &u, &half.mat.adjoint()).adjoint()
    };
    let keep: Vec<usize> = (0..anc).collect();
    DensityOperator::new_unchecked(ext.layout().clone(), rotated)?.partial_trace(&keep)
}

/// Kraus-sum path of [`apply_loss`]: `ρ' = Σ_l K_l ρ K_l†` with
/// `K_l|n⟩ = √(C(n,l) η^{n−l} (1−η)^l) |n−l⟩`, summed over every loss
/// count `l ≤ cutoff` (no rank truncation).
pub fn apply_loss_kraus<R: Scalar>(
    rho: &DensityOperator<R>,
    mode: usize,
    eta: R,
) -> Result<DensityOperator<R>> {
    check_eta(eta)?;
    rho.layout().check_mode(mode)?;
    use crate::hilbert::apply_local_left_with;
    let c = rho.layout().cutoff(mode);
    let d = rho.layout().dim();
    let (_, groups) = rho.layout().subindex_tables(&[mode]);
    let mut out = CMat::<R>::zeros(d, d);
    for l in 0..=c {
        let k = kraus_matrix(c, eta, l);
        let a = apply_local_left_with(&groups, &k, rho.matrix());
        let krk = apply_local_left_with(&groups, &k, &a.adjoint()).adjoint();
        out += krk;
    }
    DensityOperator::new_unchecked(rho.layout().clone(), out)
}

/// `K_l` of the loss channel at the given cutoff: element
/// `√(C(n,l) η^{n−l} (1−η)^l)` at `(n−l, n)`.
fn kraus_matrix<R: Scalar>(cutoff: usize, eta: R, l: usize) -> CMat<R> {
    let d = cutoff + 1;
    let loss = R::one() - eta;
    let mut m = CMat::<R>::zeros(d, d);
    for n in l..=cutoff {
        // binom(n, l) by incremental product, kept in the scalar type.
        let mut binom = R::one();
        for i in 0..l {
            binom = binom * rn::<R>(n - i) / rn::<R>(i + 1);
        }
        let w = binom * eta.powi((n - l) as i32) * loss.powi(l as i32);
        m[(n - l, n)] = lift(w.max(R::zero()).sqrt());
    }
    m
}

/// Which subspace carries the white noise in [`mix_with_noise`].
#[derive(Debug, Clone)]
pub enum NoiseSubspace {
    /// The full truncated space.
    Full,
    /// Basis states with at most one quantum per mode (dimension `2ⁿ`).
    AtMostOnePerMode,
    /// An explicit list of basis occupancies.
    Span(Vec<Vec<usize>>),
}

/// `ρ = ε|ψ⟩⟨ψ| + (1−ε)·𝕀_sub`, with `𝕀_sub` the maximally mixed
/// operator on the chosen subspace.
pub fn mix_with_noise<R: Scalar>(
    psi: &StateVector<R>,
    epsilon: R,
    subspace: NoiseSubspace,
) -> Result<DensityOperator<R>> {
    let e = as_f64(epsilon);
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidParameter(format!(
            "mixing weight must lie in [0,1] (got {e})"
        )));
    }
    let layout = psi.layout();
    let occupancies: Vec<Vec<usize>> = match subspace {
        NoiseSubspace::Full => layout.multi_indices().collect(),
        NoiseSubspace::AtMostOnePerMode => layout
            .multi_indices()
            .filter(|occ| occ.iter().all(|&n| n <= 1))
            .collect(),
        NoiseSubspace::Span(list) => {
            for occ in &list {
                if occ.len() != layout.n_modes() {
                    return Err(Error::LayoutMismatch(format!(
                        "{} occupancies for {} modes",
                        occ.len(),
                        layout.n_modes()
                    )));
                }
            }
            list
        }
    };
    let noise = crate::states::maximally_mixed_on(layout, &occupancies)?;
    DensityOperator::mixture(&[(epsilon, psi.to_density()), (R::one() - epsilon, noise)])
}

/// Probabilities and conditional moments of a real outcome distribution
/// split at `±S/2`. Outcomes strictly below `−S/2` form the minus region,
/// strictly above `S/2` the plus region; boundary outcomes count as
/// central (this enlarges `℘₀`, which only ever weakens a claimed
/// violation).
#[derive(Debug, Clone)]
pub struct BinnedSummary<R: Scalar> {
    pub p_minus: R,
    pub p_zero: R,
    pub p_plus: R,
    /// Conditional mean of the minus region; `None` when the region is
    /// empty (reported undefined, never substituted by zero).
    pub mu_minus: Option<R>,
    pub mu_plus: Option<R>,
    pub var_minus: Option<R>,
    pub var_plus: Option<R>,
    /// The bin separation used.
    pub s: R,
}

impl<R: Scalar> BinnedSummary<R> {
    /// `Δ²_ave x = ℘₊Δ²₊x + ℘₋Δ²₋x`; `None` when an occupied outer region
    /// has undefined moments.
    pub fn ave_var(&self) -> Option<R> {
        let plus = if as_f64(self.p_plus) > 0.0 { self.var_plus? } else { R::zero() };
        let minus = if as_f64(self.p_minus) > 0.0 { self.var_minus? } else { R::zero() };
        Some(self.p_plus * plus + self.p_minus * minus)
    }

    /// The spread bound
    /// `δ = (μ₊+S/2)² + (μ₋−S/2)² + S²/2 + Δ²₊x + Δ²₋x`;
    /// `None` when either outer region is empty.
    pub fn delta(&self) -> Option<R> {
        let (mp, mm) = (self.mu_plus?, self.mu_minus?);
        let (vp, vm) = (self.var_plus?, self.var_minus?);
        let half_s = self.s / rr::<R>(2.0);
        let tp = mp + half_s;
        let tm = mm - half_s;
        Some(tp * tp + tm * tm + self.s * self.s / rr::<R>(2.0) + vp + vm)
    }
}

/// Split a one-axis outcome distribution into the three regions around
/// `±S/2` and return region probabilities with the outer regions'
/// conditional means and variances.
pub fn bin<R: Scalar>(dist: &JointDistribution<R>, s: R) -> Result<BinnedSummary<R>> {
    if dist.n_axes() != 1 {
        return Err(Error::MalformedTable(format!(
            "binning needs a one-axis distribution (got {} axes)",
            dist.n_axes()
        )));
    }
    if as_f64(s) <= 0.0 {
        return Err(Error::InvalidParameter("bin separation must be > 0".into()));
    }
    let half = s / rr::<R>(2.0);
    // index 0: minus, 1: zero, 2: plus
    let mut w = [R::zero(); 3];
    let mut m1 = [R::zero(); 3];
    let mut m2 = [R::zero(); 3];
    for (idx, p) in dist.cells() {
        let x = dist.axis(0).outcomes[idx[0]];
        let region = if x < -half {
            0
        } else if x > half {
            2
        } else {
            1
        };
        w[region] += p;
        m1[region] += p * x;
        m2[region] += p * x * x;
    }
    let moments = |k: usize| -> (Option<R>, Option<R>) {
        if as_f64(w[k]) < 1e-12 {
            (None, None)
        } else {
            let mean = m1[k] / w[k];
            let var = (m2[k] / w[k] - mean * mean).max(R::zero());
            (Some(mean), Some(var))
        }
    };
    let (mu_minus, var_minus) = moments(0);
    let (mu_plus, var_plus) = moments(2);
    Ok(BinnedSummary {
        p_minus: w[0],
        p_zero: w[1],
        p_plus: w[2],
        mu_minus,
        mu_plus,
        var_minus,
        var_plus,
        s,
    })
}

/// Loss applied directly to a pure state through the dilation, returning
/// the rotated pure state *before* the ancilla trace. Used internally by
/// tests to cross-check the channel paths.
#[allow(dead_code)]
pub(crate) fn lossy_pure_extended<R: Scalar>(
    psi: &StateVector<R>,
    mode: usize,
    eta: R,
) -> Result<StateVector<R>> {
    check_eta(eta)?;
    psi.layout().check_mode(mode)?;
    let c = psi.layout().cutoff(mode);
    let md = c + 1;
    let a = annihilation_matrix::<R>(c).kronecker(&CMat::<R>::identity(md, md));
    let b = CMat::<R>::identity(md, md).kronecker(&annihilation_matrix::<R>(c));
    let ab_dag = &a * b.adjoint();
    let g = (&ab_dag - ab_dag.adjoint()).map(|z| z * C::<R>::new(R::zero(), R::one()));
    let theta = eta.sqrt().min(R::one()).acos();
    let eig = g.symmetric_eigen();
    let mut u = CMat::<R>::zeros(md * md, md * md);
    for k in 0..md * md {
        let lam = eig.eigenvalues[k];
        let phase = C::<R>::new((-theta * lam).cos(), (-theta * lam).sin());
        let col = eig.eigenvectors.column(k);
        for j in 0..md * md {
            let vc = col[j].conj() * phase;
            for i in 0..md * md {
                u[(i, j)] += col[i] * vc;
            }
        }
    }
    let ext = psi.tensor(&StateVector::vacuum(ModeLayout::new(&[c])?));
    let anc = psi.layout().n_modes();
    let (_, groups) = ext.layout().subindex_tables(&[mode, anc]);
    let amp = apply_local_to_vec_with(&groups, &u, ext.amplitudes());
    StateVector::new(ext.layout().clone(), amp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{joint_distribution_pure, number_matrix, quadrature, Observable};
    use crate::states::{cat, coherent, squeezed};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
        let g = CMat::<f64>::from_fn(dim, dim, |_, _| {
            C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let h = &g * g.adjoint();
        let tr: f64 = (0..dim).map(|i| h[(i, i)].re).sum();
        h.map(|z| z / C::new(tr, 0.0))
    }

    #[test]
    fn loss_endpoints() {
        let psi = coherent::<f64>(C::new(0.8, 0.0), 12).unwrap();
        let rho = psi.to_density();
        let same = apply_loss(&rho, 0, 1.0).unwrap();
        for (a, b) in same.matrix().iter().zip(rho.matrix().iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        let dead = apply_loss(&rho, 0, 0.0).unwrap();
        assert_abs_diff_eq!(dead.matrix()[(0, 0)].re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn coherent_transmission() {
        let alpha = 0.9_f64;
        let eta = 0.6_f64;
        let rho = coherent::<f64>(C::new(alpha, 0.0), 16).unwrap().to_density();
        let out = apply_loss(&rho, 0, eta).unwrap();
        let target = coherent::<f64>(C::new(eta.sqrt() * alpha, 0.0), 16).unwrap();
        // Fidelity ⟨target|ρ'|target⟩.
        let w = out.matrix() * target.amplitudes();
        let f: f64 = target
            .amplitudes()
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        assert!(f > 1.0 - 1e-8, "fidelity {f}");
    }

    #[test]
    fn dilation_and_kraus_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = ModeLayout::new(&[3, 2]).unwrap();
        for _ in 0..5 {
            let rho = DensityOperator::new_unchecked(
                l.clone(),
                random_density(l.dim(), &mut rng),
            )
            .unwrap();
            for mode in 0..2 {
                let a = apply_loss_dilation(&rho, mode, 0.55).unwrap();
                let b = apply_loss_kraus(&rho, mode, 0.55).unwrap();
                for (x, y) in a.matrix().iter().zip(b.matrix().iter()) {
                    assert!((x - y).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn loss_is_cptp_and_scales_photon_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = ModeLayout::new(&[4]).unwrap();
        let n = Observable::from_local(l.clone(), &[0], number_matrix::<f64>(4), "N").unwrap();
        for _ in 0..20 {
            let rho =
                DensityOperator::new_unchecked(l.clone(), random_density(5, &mut rng)).unwrap();
            let eta = rng.gen::<f64>();
            let out = apply_loss(&rho, 0, eta).unwrap();
            out.validate().unwrap();
            assert_abs_diff_eq!(
                out.expectation(&n).unwrap(),
                eta * rho.expectation(&n).unwrap(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn loss_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = ModeLayout::new(&[3]).unwrap();
        let rho = DensityOperator::new_unchecked(l, random_density(4, &mut rng)).unwrap();
        let (e1, e2) = (0.8, 0.65);
        let chained = apply_loss(&apply_loss(&rho, 0, e1).unwrap(), 0, e2).unwrap();
        let direct = apply_loss(&rho, 0, e1 * e2).unwrap();
        for (x, y) in chained.matrix().iter().zip(direct.matrix().iter()) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn noise_mixing_endpoints() {
        let psi = crate::states::cv_bell_state::<f64>(
            4,
            C::new(0.5_f64.sqrt(), 0.0),
            C::new(0.5_f64.sqrt(), 0.0),
        )
        .unwrap();
        let pure = mix_with_noise(&psi, 1.0, NoiseSubspace::AtMostOnePerMode).unwrap();
        assert_abs_diff_eq!(pure.purity(), 1.0, epsilon = 1e-12);
        let flat = mix_with_noise(&psi, 0.0, NoiseSubspace::AtMostOnePerMode).unwrap();
        assert_abs_diff_eq!(flat.purity(), 1.0 / 16.0, epsilon = 1e-12);
        let full = mix_with_noise(&psi, 0.3, NoiseSubspace::Full).unwrap();
        full.validate().unwrap();
    }

    #[test]
    fn binning_symmetric_vacuum() {
        let l = ModeLayout::new(&[10]).unwrap();
        let v = StateVector::<f64>::vacuum(l.clone());
        let x = quadrature::<f64>(&l, 0, 0.0).unwrap();
        let d = joint_distribution_pure(&v, &[&x]).unwrap();
        let b = bin(&d, 2.0).unwrap();
        assert_abs_diff_eq!(b.p_plus, b.p_minus, epsilon = 1e-10);
        assert_abs_diff_eq!(
            b.mu_plus.unwrap(),
            -b.mu_minus.unwrap(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(b.p_minus + b.p_zero + b.p_plus, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn binning_recovers_full_variance_for_small_s() {
        // As S → 0 the central region empties and Δ²_ave x → Δ²x = σ.
        // Odd cutoff: even dimension, so the discrete x spectrum has no
        // outcome at exactly 0 and the S → 0 central region is empty.
        let r = 0.5_f64;
        let v = squeezed::<f64>(r, 25).unwrap();
        let x = quadrature::<f64>(v.layout(), 0, 0.0).unwrap();
        let d = joint_distribution_pure(&v, &[&x]).unwrap();
        let b = bin(&d, 1e-6).unwrap();
        assert!(b.p_zero < 1e-6);
        let sigma = (2.0 * r).exp();
        // Law of total variance: Δ²x = Δ²_ave x + spread of region means.
        let mean = d.mean(0).unwrap();
        let spread = b.p_plus * (b.mu_plus.unwrap() - mean).powi(2)
            + b.p_minus * (b.mu_minus.unwrap() - mean).powi(2);
        assert_abs_diff_eq!(
            b.ave_var().unwrap() + spread,
            d.variance(0).unwrap(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(d.variance(0).unwrap(), sigma, epsilon = 1e-4);
    }

    #[test]
    fn binning_separated_cat() {
        let v = cat::<f64>(2.5, 26).unwrap();
        let x = quadrature::<f64>(v.layout(), 0, 0.0).unwrap();
        let d = joint_distribution_pure(&v, &[&x]).unwrap();
        // Two Gaussian branches at ±2α = ±5. At S = 8 the boundaries sit
        // one standard deviation from the peaks, so a ~16% central weight
        // remains and the conditional means shift slightly outward.
        let b = bin(&d, 8.0).unwrap();
        assert!(b.p_zero < 0.2, "central weight {}", b.p_zero);
        assert_abs_diff_eq!(b.p_plus, b.p_minus, epsilon = 1e-10);
        assert_abs_diff_eq!(b.mu_plus.unwrap(), 5.29, epsilon = 0.05);
        assert_abs_diff_eq!(b.mu_minus.unwrap(), -5.29, epsilon = 0.05);
        // Away from the peaks the regions capture the branches whole.
        let tight = bin(&d, 2.0).unwrap();
        assert!(tight.p_zero < 0.02);
        assert_abs_diff_eq!(tight.mu_plus.unwrap(), 5.0, epsilon = 0.02);
        assert_abs_diff_eq!(tight.mu_minus.unwrap(), -5.0, epsilon = 0.02);
    }

    #[test]
    fn binning_rejects_bad_input() {
        let l = ModeLayout::new(&[4]).unwrap();
        let v = StateVector::<f64>::vacuum(l.clone());
        let x = quadrature::<f64>(&l, 0, 0.0).unwrap();
        let p = quadrature::<f64>(&l, 0, std::f64::consts::FRAC_PI_2).unwrap();
        let d1 = joint_distribution_pure(&v, &[&x]).unwrap();
        assert!(bin(&d1, 0.0).is_err());
        // x and p do not commute, so a two-axis table cannot even be built;
        // binning also rejects multi-axis tables outright.
        assert!(joint_distribution_pure(&v, &[&x, &p]).is_err());
    }
}
