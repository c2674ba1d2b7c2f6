//! Constructors for the states evaluated by the criteria modules.
//!
//! All constructors return normalized states on caller-chosen cutoffs and
//! fail with [`Error::TruncationTail`] when the chosen cutoff discards more
//! than 1e-6 of the untruncated probability weight.
//!
//! Sign convention for squeezing: [`two_mode_squeezed`] uses Schmidt
//! amplitudes `(+tanh r)ⁿ √(1−tanh²r)`, which makes the quadrature
//! correlation `⟨x^A x^B⟩ = +sinh 2r` and squeezes the sum quadrature,
//! `Δ²((p^A+p^B)/√2) = e^{−2r}`.

use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, ModeLayout, StateVector};
use crate::scalar::{as_f64, cc, lift, rn, rr, CMat, CVec, Scalar, C};

/// Maximum untruncated probability weight allowed beyond the cutoff.
const TAIL_LIMIT: f64 = 1e-6;

/// Smallest cutoff for which a thermal occupation distribution with the
/// given mean has tail probability below 1e-8.
///
/// Gaussian states have thermal (geometric) photon-number marginals — mean
/// `sinh²r` for squeezed vacua — so this bounds the per-mode truncation
/// error of every Gaussian constructor in this module.
pub fn recommended_cutoff(mean_occupation: f64) -> usize {
    assert!(
        mean_occupation.is_finite() && mean_occupation >= 0.0,
        "mean occupation must be a finite nonnegative number"
    );
    if mean_occupation == 0.0 {
        return 1;
    }
    let q = mean_occupation / (1.0 + mean_occupation);
    // P(n > N) = q^(N+1) for a geometric distribution with mean n̄.
    let mut n = 1usize;
    while q.powi(n as i32 + 1) >= 1e-8 {
        n += 1;
    }
    n
}

/// Coherent-state amplitudes `e^{−|α|²/2} αⁿ/√n!` up to the cutoff, via the
/// ratio recurrence. Errors when the discarded Poisson tail exceeds 1e-6.
fn coherent_amplitudes<R: Scalar>(alpha: C<R>, cutoff: usize) -> Result<Vec<C<R>>> {
    let n2 = alpha.norm_sqr();
    let mut c = lift((-n2 / rr::<R>(2.0)).exp());
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut captured = R::zero();
    for n in 0..=cutoff {
        amps.push(c);
        captured += c.norm_sqr();
        c = c * alpha / lift(rn::<R>(n + 1).sqrt());
    }
    check_tail(captured)?;
    Ok(amps)
}

fn check_tail<R: Scalar>(captured: R) -> Result<()> {
    let tail = 1.0 - as_f64(captured);
    if tail > TAIL_LIMIT {
        return Err(Error::TruncationTail { tail, limit: TAIL_LIMIT });
    }
    Ok(())
}

/// Coherent state `|α⟩` on a single mode.
pub fn coherent<R: Scalar>(alpha: C<R>, cutoff: usize) -> Result<StateVector<R>> {
    let amps = coherent_amplitudes(alpha, cutoff)?;
    let layout = ModeLayout::new(&[cutoff])?;
    StateVector::new(layout, CVec::from_vec(amps))
}

/// Single-mode squeezed vacuum with `Δ²x = e^{2r}`, `Δ²p = e^{−2r}`.
///
/// Even-photon amplitudes `c_{2m} = (tanh r)^m √((2m)!)/(2^m m!) / √cosh r`,
/// built by the ratio recurrence
/// `c_{2m+2} = c_{2m} · tanh r · √((2m+1)(2m+2)) / (2(m+1))`.
///
/// Photons come in pairs here, so the occupation tail decays with exponent
/// `n/2` rather than `n`; use about twice [`recommended_cutoff`] of
/// `sinh²r` to stay under the tail limit.
pub fn squeezed<R: Scalar>(r: R, cutoff: usize) -> Result<StateVector<R>> {
    if as_f64(r) < 0.0 {
        return Err(Error::InvalidParameter("squeeze parameter must be ≥ 0".into()));
    }
    let t = r.tanh();
    let layout = ModeLayout::new(&[cutoff])?;
    let mut amp = CVec::<R>::zeros(cutoff + 1);
    let mut c = R::one() / r.cosh().sqrt();
    let mut captured = R::zero();
    let mut m = 0usize;
    while 2 * m <= cutoff {
        amp[2 * m] = lift(c);
        captured += c * c;
        let k = rn::<R>(2 * m + 1) * rn::<R>(2 * m + 2);
        c = c * t * k.sqrt() / (rr::<R>(2.0) * rn::<R>(m + 1));
        m += 1;
    }
    check_tail(captured)?;
    StateVector::new(layout, amp)
}

/// Two-mode squeezed vacuum amplitudes with a selectable generator sign:
/// `c_n = (sign·tanh r)ⁿ √(1−tanh²r)` on `|n,n⟩`.
fn two_mode_squeezed_signed<R: Scalar>(
    r: R,
    cutoffs: (usize, usize),
    sign: f64,
) -> Result<StateVector<R>> {
    if as_f64(r) < 0.0 {
        return Err(Error::InvalidParameter("squeeze parameter must be ≥ 0".into()));
    }
    let t = r.tanh() * rr::<R>(sign);
    let layout = ModeLayout::new(&[cutoffs.0, cutoffs.1])?;
    let nmax = cutoffs.0.min(cutoffs.1);
    let mut amp = CVec::<R>::zeros(layout.dim());
    let mut c = (R::one() - t * t).sqrt();
    let mut captured = R::zero();
    for n in 0..=nmax {
        amp[layout.flat(&[n, n])] = lift(c);
        captured += c * c;
        c *= t;
    }
    check_tail(captured)?;
    StateVector::new(layout, amp)
}

/// Two-mode squeezed vacuum `Σₙ (tanh r)ⁿ √(1−tanh²r) |n,n⟩`.
///
/// Marginals are thermal with mean `sinh²r`; `Δ²x^A = cosh 2r`,
/// `⟨x^A x^B⟩ = sinh 2r`, and the sum/difference quadratures satisfy
/// `Δ²((p^A+p^B)/√2) = Δ²((x^A−x^B)/√2) = e^{−2r}`.
pub fn two_mode_squeezed<R: Scalar>(r: R, cutoffs: (usize, usize)) -> Result<StateVector<R>> {
    two_mode_squeezed_signed(r, cutoffs, 1.0)
}

/// Even cat state `(1/√2){e^{iπ/4}|−α⟩ + e^{−iπ/4}|α⟩}` for real `α ≥ 0`,
/// normalized exactly (the branch overlap `⟨−α|α⟩ = e^{−2α²}` cancels for
/// this phase choice).
///
/// Its momentum distribution carries interference fringes and
/// `Δ²p = 1 − 4α²e^{−4α²}`.
pub fn cat<R: Scalar>(alpha: R, cutoff: usize) -> Result<StateVector<R>> {
    if as_f64(alpha) < 0.0 {
        return Err(Error::InvalidParameter("cat amplitude must be ≥ 0".into()));
    }
    let plus = coherent_amplitudes(lift(alpha), cutoff)?;
    let minus = coherent_amplitudes(lift(-alpha), cutoff)?;
    let sqrt_half = rr::<R>(0.5).sqrt();
    let ph_minus = cc::<R>(sqrt_half_f(), sqrt_half_f()); // e^{iπ/4}
    let ph_plus = ph_minus.conj(); // e^{−iπ/4}
    let amp = CVec::<R>::from_iterator(
        cutoff + 1,
        minus
            .iter()
            .zip(plus.iter())
            .map(|(&m, &p)| (ph_minus * m + ph_plus * p) * lift(sqrt_half)),
    );
    let layout = ModeLayout::new(&[cutoff])?;
    StateVector::new(layout, amp)
}

fn sqrt_half_f() -> f64 {
    0.5_f64.sqrt()
}

/// Four-mode singlet of total spin `j = two_j/2` in the two-boson-per-site
/// representation, modes ordered `[a₊, a₋, b₊, b₋]`:
///
/// `(1/(N!√(N+1))) (a₊†b₋† − a₋†b₊†)^N |0⟩
///   = Σ_k (−1)^k/√(N+1) |N−k, k, k, N−k⟩`, with `N = two_j`.
///
/// The binomial expansion makes the quoted prefactor exact, so the state is
/// normalized identically (no truncation loss for `cutoff ≥ N`).
pub fn spin_singlet<R: Scalar>(two_j: usize, cutoff: usize) -> Result<StateVector<R>> {
    if two_j == 0 {
        return Err(Error::InvalidParameter("total spin must be ≥ 1/2".into()));
    }
    if cutoff < two_j {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} cannot hold {two_j} quanta per mode"
        )));
    }
    let n = two_j;
    let layout = ModeLayout::new(&[cutoff; 4])?;
    let mut amp = CVec::<R>::zeros(layout.dim());
    let norm = lift(R::one() / rn::<R>(n + 1).sqrt());
    for k in 0..=n {
        let v = if k % 2 == 0 { norm } else { -norm };
        amp[layout.flat(&[n - k, k, k, n - k])] = v;
    }
    StateVector::new(layout, amp)
}

/// Output of a nondegenerate parametric amplifier on four modes
/// `[a₊, a₋, b₊, b₋]`: a product of two two-mode squeezed vacua on the
/// cross-polarized pairs `(a₊,b₋)` and `(a₋,b₊)` with opposite generator
/// signs.
///
/// `⟨N^B⟩ = 2 sinh²r`, and the restriction to the one-photon-at-B sector is
/// the `j = 1/2` singlet.
pub fn parametric_amp<R: Scalar>(r: R, cutoff: usize) -> Result<StateVector<R>> {
    let pair_plus = two_mode_squeezed_signed(r, (cutoff, cutoff), 1.0)?;
    let pair_minus = two_mode_squeezed_signed(r, (cutoff, cutoff), -1.0)?;
    // Pairs are (a₊,b₋) and (a₋,b₊); interleave into [a₊, a₋, b₊, b₋].
    let layout = ModeLayout::new(&[cutoff; 4])?;
    let mut amp = CVec::<R>::zeros(layout.dim());
    let pl = pair_plus.layout();
    for n in 0..=cutoff {
        let cn = pair_plus.amplitudes()[pl.flat(&[n, n])];
        if cn == C::<R>::new(R::zero(), R::zero()) {
            continue;
        }
        for m in 0..=cutoff {
            let dm = pair_minus.amplitudes()[pl.flat(&[m, m])];
            amp[layout.flat(&[n, m, m, n])] = cn * dm;
        }
    }
    StateVector::new(layout, amp)
}

/// Two-branch state on `n` single-photon-cutoff modes:
/// `c₀|0…0, 1…1⟩ + c₁|1…1, 0…0⟩` (first branch: last `n/2` modes occupied).
pub fn cv_bell_state<R: Scalar>(n: usize, c0: C<R>, c1: C<R>) -> Result<StateVector<R>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "mode count must be even and ≥ 2 (got {n})"
        )));
    }
    let layout = ModeLayout::new(&vec![1usize; n])?;
    let mut occ0 = vec![0usize; n];
    occ0[n / 2..].fill(1);
    let mut occ1 = vec![1usize; n];
    occ1[n / 2..].fill(0);
    let mut amp = CVec::<R>::zeros(layout.dim());
    amp[layout.flat(&occ0)] = c0;
    amp[layout.flat(&occ1)] = c1;
    StateVector::new(layout, amp)
}

/// Generalized GHZ state of `n_photons` photons over `2·n_photons` modes
/// ordered `[H₁…H_k, V₁…V_k]`: `(|H…H⟩ + |V…V⟩)/√2`.
///
/// Relabeling each photon's (H, V) mode pair as two spatially split modes
/// turns this into the balanced [`cv_bell_state`] on `2·n_photons` modes.
pub fn ghz_polarization<R: Scalar>(n_photons: usize) -> Result<StateVector<R>> {
    if n_photons == 0 {
        return Err(Error::InvalidParameter("need at least one photon".into()));
    }
    let c = lift(rr::<R>(0.5).sqrt());
    cv_bell_state(2 * n_photons, c, c)
}

/// Noisy singlet on four single-photon modes `[a₊, a₋, b₊, b₋]`:
/// `p_s |ψ⟩⟨ψ| + (1−p_s)·𝕀/4`, with `𝕀/4` the maximally mixed operator on
/// the one-photon-per-site 4-dimensional span.
pub fn werner<R: Scalar>(p_s: R) -> Result<DensityOperator<R>> {
    let p = as_f64(p_s);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "mixing weight must lie in [0,1] (got {p})"
        )));
    }
    let bell = spin_singlet::<R>(1, 1)?;
    let layout = bell.layout().clone();
    let mut mat = bell.to_density().matrix().clone() * lift(p_s);
    let noise = (R::one() - p_s) / rr::<R>(4.0);
    for occ in [[1, 0, 1, 0], [1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 0, 1]] {
        let i = layout.flat(&occ);
        mat[(i, i)] += lift(noise);
    }
    DensityOperator::new(layout, mat)
}

/// Projector onto the span of the given basis occupancies, normalized to a
/// maximally mixed density operator. Shared by the noise channels.
pub(crate) fn maximally_mixed_on<R: Scalar>(
    layout: &ModeLayout,
    occupancies: &[Vec<usize>],
) -> Result<DensityOperator<R>> {
    if occupancies.is_empty() {
        return Err(Error::InvalidParameter("empty noise subspace".into()));
    }
    let d = layout.dim();
    let w = lift(R::one() / rn::<R>(occupancies.len()));
    let mut mat = CMat::<R>::zeros(d, d);
    for occ in occupancies {
        let i = layout.flat(occ);
        mat[(i, i)] += w;
    }
    DensityOperator::new_unchecked(layout.clone(), mat)
}
