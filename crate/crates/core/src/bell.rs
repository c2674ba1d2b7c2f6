//! Multipartite Bell inequalities built from per-site variance arguments.
//!
//! Two families share one symbolic representation ([`BellFunctional`]):
//!
//! * the dichotomic recursion family (MABK), `F_n = ½(F_{n−1}+F'_{n−1})X_n
//!   + ½(F_{n−1}−F'_{n−1})Y_n` with two ±1 observables per site, whose
//!   local bound is 1 and quantum bound `2^{(n−1)/2}`;
//! * a continuous-variable inequality comparing the modulus-squared of a
//!   product of mode operators against a photon-number moment,
//!   `|2ⁿ⟨∏A_k⟩|² ≤ ⟨∏(4n̂_k+2)⟩`.
//!
//! Both are instances of `|⟨F⟩|² ≤ ⟨|F|²⟩` for a product function `F` of
//! local hidden variables; [`lhv_variance_sampler`] stress-tests that
//! variance statement on random ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_matrix, apply_local_to_vec, number_matrix, product_expectation_mixed,
    product_expectation_pure, DensityOperator, ModeLayout, Operator, StateVector,
};
use crate::report::{CriterionReport, Direction};
use crate::scalar::{as_f64, cc, cre, lift, rn, rr, CMat, Scalar, C};

/// Sites beyond which the `4ⁿ` deterministic-strategy enumeration is skipped.
const LHV_ENUMERATION_LIMIT: usize = 6;
/// Sites beyond which the `2ⁿ`-term expansion is refused outright.
const EXPANSION_LIMIT: usize = 24;
/// Operator-identity and involution tolerance.
const OPERATOR_TOL: f64 = 1e-8;

/// Which product family a [`BellFunctional`] expands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellKind {
    /// Dichotomic ±1 observables, real-valued functional.
    Mabk,
    /// Complex product `∏(X_k + iY_k)` of real-valued local observables.
    Cv,
}

/// Signed expansion of a Bell functional over per-site symbol choices.
///
/// Monomials are indexed by an `n`-bit mask: bit `k` set selects the
/// second symbol (`Y_k`) at site `k`, clear selects the first (`X_k`).
#[derive(Debug, Clone)]
pub struct BellFunctional<R: Scalar> {
    n: usize,
    kind: BellKind,
    coeffs: Vec<C<R>>,
}

impl<R: Scalar> BellFunctional<R> {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> BellKind {
        self.kind
    }

    /// Coefficient of the monomial selected by the Y-mask.
    pub fn coefficient(&self, mask: usize) -> C<R> {
        self.coeffs[mask]
    }

    /// The partner functional with `X_k ↔ Y_k` exchanged at every site.
    ///
    /// Exchanging symbols maps each monomial mask to its complement, so
    /// this is an involution.
    pub fn primed(&self) -> Self {
        let full = (1usize << self.n) - 1;
        let mut coeffs = vec![C::<R>::new(R::zero(), R::zero()); self.coeffs.len()];
        for (mask, &c) in self.coeffs.iter().enumerate() {
            coeffs[mask ^ full] = c;
        }
        Self { n: self.n, kind: self.kind, coeffs }
    }

    /// Evaluate on one real-valued assignment `(x_k, y_k)` per site.
    pub fn evaluate(&self, x: &[R], y: &[R]) -> Result<C<R>> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::LayoutMismatch(format!(
                "assignment covers {} / {} sites, functional has {}",
                x.len(),
                y.len(),
                self.n
            )));
        }
        let zero = C::<R>::new(R::zero(), R::zero());
        let mut acc = zero;
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if c == zero {
                continue;
            }
            let mut prod = R::one();
            for k in 0..self.n {
                prod *= if mask >> k & 1 == 1 { y[k] } else { x[k] };
            }
            acc += c * lift(prod);
        }
        Ok(acc)
    }
}

fn check_site_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one site".into()));
    }
    if n > EXPANSION_LIMIT {
        return Err(Error::TableTooLarge {
            atoms: 1u128 << n,
            limit: 1u128 << EXPANSION_LIMIT,
        });
    }
    Ok(())
}

/// The dichotomic recursion functional on `n` sites.
///
/// `F₁ = X₁`, then `F_n = ½(F_{n−1}+F'_{n−1})X_n + ½(F_{n−1}−F'_{n−1})Y_n`
/// where the prime exchanges `X ↔ Y`. At `n = 2` this is the CHSH
/// combination `½[(X₁+Y₁)X₂ + (X₁−Y₁)Y₂]`. The expansion keeps `2^{n−1}`
/// nonzero monomials with coefficients that are integer multiples of
/// `2^{1−n}`.
pub fn mabk_build<R: Scalar>(n: usize) -> Result<BellFunctional<R>> {
    check_site_count(n)?;
    let zero = C::<R>::new(R::zero(), R::zero());
    let mut coeffs = vec![cre::<R>(1.0), zero];
    for m in 1..n {
        let full = (1usize << m) - 1;
        let half = cre::<R>(0.5);
        let mut next = vec![zero; 1 << (m + 1)];
        for mask in 0..=full {
            let f = coeffs[mask];
            let fp = coeffs[mask ^ full];
            next[mask] = (f + fp) * half;
            next[mask | 1 << m] = (f - fp) * half;
        }
        coeffs = next;
    }
    Ok(BellFunctional { n, kind: BellKind::Mabk, coeffs })
}

/// The complex product functional `C_n = ∏_k (X_k + iY_k)`.
///
/// Its variance statement `|⟨C_n⟩|² ≤ ⟨∏(X_k²+Y_k²)⟩` is the
/// continuous-variable inequality evaluated by [`cv_bell_eval`].
pub fn cv_build<R: Scalar>(n: usize) -> Result<BellFunctional<R>> {
    check_site_count(n)?;
    let i = cc::<R>(0.0, 1.0);
    let coeffs = (0..1usize << n)
        .map(|mask| {
            let mut c = cre::<R>(1.0);
            for _ in 0..mask.count_ones() {
                c *= i;
            }
            c
        })
        .collect();
    Ok(BellFunctional { n, kind: BellKind::Cv, coeffs })
}

/// Local bound of the dichotomic functional.
#[derive(Debug, Clone, Copy)]
pub struct LhvBound {
    /// `max |F|` over deterministic ±1 strategies. Always 1 for the
    /// recursion family.
    pub value: f64,
    /// Whether the value was confirmed by exhaustive enumeration (`4ⁿ`
    /// strategies, feasible for `n ≤ 6`) or only asserted from the
    /// symbolic bound.
    pub enumerated: bool,
}

/// Maximum of `|F_n|` over deterministic local ±1 strategies.
///
/// For `n ≤ 6` all `4ⁿ` assignments are enumerated; beyond that the
/// symbolic bound 1 is returned with `enumerated = false`.
pub fn mabk_lhv_max(n: usize) -> Result<LhvBound> {
    let f = mabk_build::<f64>(n)?;
    if n > LHV_ENUMERATION_LIMIT {
        return Ok(LhvBound { value: 1.0, enumerated: false });
    }
    let mut best = 0.0f64;
    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    for xb in 0..1usize << n {
        for yb in 0..1usize << n {
            for k in 0..n {
                x[k] = if xb >> k & 1 == 1 { -1.0 } else { 1.0 };
                y[k] = if yb >> k & 1 == 1 { -1.0 } else { 1.0 };
            }
            let v = f.evaluate(&x, &y)?.re.abs();
            if v > best {
                best = v;
            }
        }
    }
    Ok(LhvBound { value: best, enumerated: true })
}

/// `2×2` symbol matrix `cos θ σ_x + sin θ σ_y` on a one-quantum mode pair,
/// written on the 4-dimensional two-mode space ordered `|n₁ n₂⟩` with the
/// first mode most significant: the qubit is spanned by `|10⟩` and `|01⟩`.
fn pair_sigma<R: Scalar>(theta: f64) -> CMat<R> {
    let mut m = CMat::<R>::zeros(4, 4);
    m[(2, 1)] = cc::<R>(theta.cos(), -theta.sin());
    m[(1, 2)] = cc::<R>(theta.cos(), theta.sin());
    m
}

/// Maximum of `⟨F_n⟩` over generalized GHZ states with one equatorial
/// measurement angle per site (`X_k` at `φ_k`, `Y_k` at `φ_k + π/2`).
///
/// Found numerically by coordinate ascent (coarse grid then golden-section
/// refinement per angle); attains `2^{(n−1)/2}`.
pub fn mabk_quantum_max(n: usize) -> Result<f64> {
    let functional = mabk_build::<f64>(n)?;
    let psi = crate::states::ghz_polarization::<f64>(n)?;
    let layout = psi.layout().clone();
    let zero = C::<f64>::new(0.0, 0.0);

    let objective = |angles: &[f64]| -> f64 {
        let mut total = 0.0;
        for mask in 0..1usize << n {
            let c = functional.coefficient(mask);
            if c == zero {
                continue;
            }
            let mut w = psi.amplitudes().clone();
            for k in 0..n {
                let theta = angles[k]
                    + if mask >> k & 1 == 1 { std::f64::consts::FRAC_PI_2 } else { 0.0 };
                w = apply_local_to_vec(&layout, &[k, n + k], &pair_sigma::<f64>(theta), &w);
            }
            let term = psi
                .amplitudes()
                .iter()
                .zip(w.iter())
                .map(|(a, b)| a.conj() * b)
                .fold(zero, |acc, z| acc + z);
            total += (c * term).re;
        }
        total
    };

    let mut angles = vec![0.0f64; n];
    let tau = std::f64::consts::TAU;
    const GRID: usize = 96;
    for _sweep in 0..3 {
        for k in 0..n {
            // Coarse grid for a bracket.
            let mut best_i = 0;
            let mut best_v = f64::NEG_INFINITY;
            for i in 0..GRID {
                angles[k] = i as f64 * tau / GRID as f64;
                let v = objective(&angles);
                if v > best_v {
                    best_v = v;
                    best_i = i;
                }
            }
            let center = best_i as f64 * tau / GRID as f64;
            let h = tau / GRID as f64;
            // Golden-section maximization in [center−h, center+h].
            let phi = (5.0f64.sqrt() - 1.0) / 2.0;
            let (mut lo, mut hi) = (center - h, center + h);
            let mut c1 = hi - phi * (hi - lo);
            let mut c2 = lo + phi * (hi - lo);
            angles[k] = c1;
            let mut f1 = objective(&angles);
            angles[k] = c2;
            let mut f2 = objective(&angles);
            for _ in 0..70 {
                if f1 > f2 {
                    hi = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = hi - phi * (hi - lo);
                    angles[k] = c1;
                    f1 = objective(&angles);
                } else {
                    lo = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = lo + phi * (hi - lo);
                    angles[k] = c2;
                    f2 = objective(&angles);
                }
            }
            angles[k] = (lo + hi) / 2.0;
        }
    }
    Ok(objective(&angles))
}

/// One site's two dichotomic observables, given as local matrices on the
/// site's modes.
#[derive(Debug, Clone)]
pub struct MabkSite<R: Scalar> {
    pub modes: Vec<usize>,
    pub x: CMat<R>,
    pub y: CMat<R>,
}

/// Dichotomic operator settings for every site.
#[derive(Debug, Clone)]
pub struct MabkSettings<R: Scalar> {
    pub sites: Vec<MabkSite<R>>,
}

impl<R: Scalar> MabkSettings<R> {
    /// `n` single-mode qubit sites with `X = σ_x`, `Y = σ_y` on the
    /// `{|0⟩, |1⟩}` pair. Returns the layout alongside.
    pub fn pauli_chain(n: usize) -> Result<(ModeLayout, Self)> {
        let layout = ModeLayout::new(&vec![1usize; n])?;
        let mut sx = CMat::<R>::zeros(2, 2);
        sx[(0, 1)] = cre::<R>(1.0);
        sx[(1, 0)] = cre::<R>(1.0);
        let mut sy = CMat::<R>::zeros(2, 2);
        sy[(0, 1)] = cc::<R>(0.0, -1.0);
        sy[(1, 0)] = cc::<R>(0.0, 1.0);
        let sites = (0..n)
            .map(|k| MabkSite { modes: vec![k], x: sx.clone(), y: sy.clone() })
            .collect();
        Ok((layout, Self { sites }))
    }
}

fn site_operator<R: Scalar>(
    layout: &ModeLayout,
    site: &MabkSite<R>,
    primed: bool,
) -> Result<Operator<R>> {
    let m = if primed { &site.y } else { &site.x };
    Operator::embed(layout.clone(), &site.modes, m)
}

/// The operator `F̂` obtained by substituting the settings' site matrices
/// into a functional's expansion.
pub fn mabk_operator<R: Scalar>(
    functional: &BellFunctional<R>,
    layout: &ModeLayout,
    settings: &MabkSettings<R>,
) -> Result<Operator<R>> {
    let n = functional.n_sites();
    if settings.sites.len() != n {
        return Err(Error::LayoutMismatch(format!(
            "{} site settings for a {n}-site functional",
            settings.sites.len()
        )));
    }
    let zero = C::<R>::new(R::zero(), R::zero());
    let mut acc = Operator::new(layout.clone(), CMat::<R>::zeros(layout.dim(), layout.dim()))?;
    for mask in 0..1usize << n {
        let c = functional.coefficient(mask);
        if c == zero {
            continue;
        }
        let mut term = Operator::identity(layout.clone());
        for (k, site) in settings.sites.iter().enumerate() {
            term = term.mul(&site_operator(layout, site, mask >> k & 1 == 1)?)?;
        }
        acc = acc.add(&term.scale(c))?;
    }
    Ok(acc)
}

/// Residual of the operator identity
/// `F̂_n² = F̂_{n−1}² − ¼ [F̂_{n−1}, F̂'_{n−1}] [X̂_n, Ŷ_n]`,
/// which underlies the quantum bound on the recursion family.
///
/// Requires unit-involutive settings (`X̂² = Ŷ² = 1` on each site's
/// modes). Returns the max-norm of the difference of the two sides; for a
/// single site the identity is vacuous and the residual is 0.
pub fn commutator_recursion_check<R: Scalar>(
    layout: &ModeLayout,
    settings: &MabkSettings<R>,
) -> Result<R> {
    let n = settings.sites.len();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one site".into()));
    }
    for site in &settings.sites {
        for m in [&site.x, &site.y] {
            let d = m.nrows();
            let involution = m * m - CMat::<R>::identity(d, d);
            let worst = involution.iter().map(|z| z.norm_sqr()).fold(R::zero(), R::max);
            if as_f64(worst) > OPERATOR_TOL * OPERATOR_TOL {
                return Err(Error::InvalidParameter(
                    "site observables must square to the identity".into(),
                ));
            }
        }
    }
    if n == 1 {
        return Ok(R::zero());
    }
    let f_n = mabk_build::<R>(n)?;
    let f_prev = mabk_build::<R>(n - 1)?;
    let prev_settings = MabkSettings { sites: settings.sites[..n - 1].to_vec() };
    let big = mabk_operator(&f_n, layout, settings)?;
    let small = mabk_operator(&f_prev, layout, &prev_settings)?;
    let small_p = mabk_operator(&f_prev.primed(), layout, &prev_settings)?;
    let x_n = site_operator(layout, &settings.sites[n - 1], false)?;
    let y_n = site_operator(layout, &settings.sites[n - 1], true)?;

    let lhs = big.mul(&big)?;
    let correction = small
        .commutator(&small_p)?
        .mul(&x_n.commutator(&y_n)?)?
        .scale(cre::<R>(0.25));
    let rhs = small.mul(&small)?.sub(&correction)?;
    Ok(lhs.sub(&rhs)?.max_abs_element())
}

/// Per-site phase and operator-ordering choices for the
/// continuous-variable inequality: site `k` measures the pair of
/// quadratures at angle `θ_k`, entering the product as `a e^{−iθ}`
/// (`sign = +1`) or `a† e^{iθ}` (`sign = −1`).
#[derive(Debug, Clone)]
pub struct CvSettings {
    pub theta: Vec<f64>,
    pub sign: Vec<i8>,
}

impl CvSettings {
    pub fn new(theta: Vec<f64>, sign: Vec<i8>) -> Result<Self> {
        if theta.len() != sign.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} phases for {} signs",
                theta.len(),
                sign.len()
            )));
        }
        if sign.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("ordering signs must be ±1".into()));
        }
        Ok(Self { theta, sign })
    }

    /// Zero phases with creation on the first half of the sites and
    /// annihilation on the second — the choice that maximizes the
    /// two-branch state of [`crate::states::cv_bell_state`].
    pub fn balanced(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "site count must be even and ≥ 2 (got {n})"
            )));
        }
        let sign = (0..n).map(|k| if k < n / 2 { -1 } else { 1 }).collect();
        Self::new(vec![0.0; n], sign)
    }
}

fn cv_locals<R: Scalar>(
    layout: &ModeLayout,
    settings: &CvSettings,
) -> Result<(Vec<(usize, CMat<R>)>, Vec<(usize, CMat<R>)>)> {
    let n = layout.n_modes();
    if settings.theta.len() != n {
        return Err(Error::LayoutMismatch(format!(
            "{} site settings for a {n}-mode state",
            settings.theta.len()
        )));
    }
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for k in 0..n {
        let cutoff = layout.cutoff(k);
        let a = annihilation_matrix::<R>(cutoff);
        let theta = settings.theta[k];
        let m = if settings.sign[k] == 1 {
            a.map(|z| z * cc::<R>(theta.cos(), -theta.sin()))
        } else {
            a.adjoint().map(|z| z * cc::<R>(theta.cos(), theta.sin()))
        };
        lhs.push((k, m));
        let d = cutoff + 1;
        let moment = number_matrix::<R>(cutoff).map(|z| z * cre::<R>(4.0))
            + CMat::<R>::identity(d, d).map(|z| z * cre::<R>(2.0));
        rhs.push((k, moment));
    }
    Ok((lhs, rhs))
}

fn cv_report<R: Scalar>(n: usize, corr: C<R>, moment: R) -> CriterionReport<R> {
    let scale = rr::<R>(4.0).powi(n as i32);
    let lhs = corr.norm_sqr() * scale;
    CriterionReport::new(
        "mode product moment inequality",
        lhs,
        moment,
        Direction::ViolatedIfGreater,
        vec![("n".into(), rn::<R>(n)), ("ratio".into(), lhs / moment)],
    )
}

/// Continuous-variable inequality on a pure state: `|2ⁿ⟨∏A_k⟩|²` against
/// `⟨∏(4n̂_k+2)⟩`, one mode per site. Violated when the left side is
/// larger.
pub fn cv_bell_eval_pure<R: Scalar>(
    psi: &StateVector<R>,
    settings: &CvSettings,
) -> Result<CriterionReport<R>> {
    let (lhs_locals, rhs_locals) = cv_locals::<R>(psi.layout(), settings)?;
    let corr = product_expectation_pure(psi, &lhs_locals)?;
    let moment = product_expectation_pure(psi, &rhs_locals)?.re;
    Ok(cv_report(psi.layout().n_modes(), corr, moment))
}

/// Mixed-state version of [`cv_bell_eval_pure`].
pub fn cv_bell_eval<R: Scalar>(
    rho: &DensityOperator<R>,
    settings: &CvSettings,
) -> Result<CriterionReport<R>> {
    let (lhs_locals, rhs_locals) = cv_locals::<R>(rho.layout(), settings)?;
    let corr = product_expectation_mixed(rho, &lhs_locals)?;
    let moment = product_expectation_mixed(rho, &rhs_locals)?.re;
    Ok(cv_report(rho.layout().n_modes(), corr, moment))
}

/// Closed-form left/right ratio of the balanced two-branch state on `n`
/// modes: `(1/4)(4/3)^{n/2}`. Crosses 1 between `n = 8` and `n = 10`.
pub fn cv_balanced_ratio(n: usize) -> f64 {
    0.25 * (4.0 / 3.0_f64).powi(n as i32 / 2)
}

fn check_even_sites(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "site count must be even and ≥ 2 (got {n})"
        )));
    }
    Ok(())
}

/// Minimum detector efficiency for which the balanced `n`-site state still
/// violates the inequality under uniform photon loss:
/// `η_min = (1 + √(1+q))/q` with `q = 4^{1−2/n}`.
///
/// Errors when no `η ≤ 1` works (`n < 10`). Tends to `(1+√5)/4 ≈ 0.80902`
/// as `n → ∞`.
pub fn cv_efficiency_threshold(n: usize) -> Result<f64> {
    check_even_sites(n)?;
    let q = 4.0f64.powf(1.0 - 2.0 / n as f64);
    let eta = (1.0 + (1.0 + q).sqrt()) / q;
    if eta > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "no efficiency threshold exists below 1 for n = {n} sites"
        )));
    }
    Ok(eta)
}

/// Large-`n` limit of [`cv_efficiency_threshold`]: `(1+√5)/4 ≈ 0.80902`.
///
/// Convergence is `O(1/n)`, so finite-`n` thresholds sit visibly above
/// this (e.g. 0.8106 at `n = 1000`); the formula reaches the asymptote
/// within 1e-4 only around `n ≈ 2·10⁴`.
pub fn cv_efficiency_asymptote() -> f64 {
    (1.0 + 5.0f64.sqrt()) / 4.0
}

/// [`cv_efficiency_threshold`] cross-checked numerically: applies the loss
/// channel to every mode of the balanced state and bisects the violation
/// margin's zero crossing in `η`. Feasible for `n ≲ 12`.
pub fn cv_efficiency_threshold_scan(n: usize) -> Result<f64> {
    check_even_sites(n)?;
    let half = rr::<f64>(0.5).sqrt();
    let psi = crate::states::cv_bell_state::<f64>(n, lift(half), lift(half))?;
    let rho = psi.to_density();
    let settings = CvSettings::balanced(n)?;
    let margin = |eta: f64| -> Result<f64> {
        let lossy = crate::channels::apply_loss_all(&rho, eta)?;
        Ok(cv_bell_eval(&lossy, &settings)?.margin)
    };
    bisect_threshold(margin, "loss efficiency")
}

/// Minimum pure-state weight `ε` for which `ε|ψ⟩⟨ψ| + (1−ε)·𝕀_sub` (white
/// noise on the one-quantum-per-mode span) still violates the inequality,
/// from the closed-form moments of the balanced state.
pub fn cv_fidelity_threshold(n: usize) -> Result<f64> {
    check_even_sites(n)?;
    // Margin over 4ⁿ: ε²/4 − ε(3/4)^{n/2} − (1−ε).
    let b = 1.0 - 0.75f64.powi(n as i32 / 2);
    let eps = 2.0 * ((b * b + 1.0).sqrt() - b);
    if eps > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "no noise threshold exists below 1 for n = {n} sites"
        )));
    }
    Ok(eps)
}

/// [`cv_fidelity_threshold`] cross-checked numerically with
/// [`crate::channels::mix_with_noise`] and bisection on `ε`.
pub fn cv_fidelity_threshold_scan(n: usize) -> Result<f64> {
    check_even_sites(n)?;
    let half = rr::<f64>(0.5).sqrt();
    let psi = crate::states::cv_bell_state::<f64>(n, lift(half), lift(half))?;
    let settings = CvSettings::balanced(n)?;
    let margin = |eps: f64| -> Result<f64> {
        let noisy = crate::channels::mix_with_noise(
            &psi,
            eps,
            crate::channels::NoiseSubspace::AtMostOnePerMode,
        )?;
        Ok(cv_bell_eval(&noisy, &settings)?.margin)
    };
    bisect_threshold(margin, "noise weight")
}

/// Bisect the zero crossing of an increasing margin over `[0, 1]`.
fn bisect_threshold<F>(margin: F, what: &str) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if margin(1.0)? <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "margin never becomes positive over the {what} range"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-6 {
        let mid = (lo + hi) / 2.0;
        if margin(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// How [`lhv_variance_sampler`] draws per-site hidden-variable values.
#[derive(Debug, Clone, Copy)]
pub enum StrategySampler {
    /// Each trial is a uniform mixture of `ensemble_size` deterministic ±1
    /// strategies. Bounded, so the denominator is the supremum of `|F|²`
    /// over the ±1 box.
    Signs { ensemble_size: usize },
    /// Real-valued assignments, i.i.d. normal with the given standard
    /// deviation. Unbounded, so the denominator is the empirical `⟨|F|²⟩`.
    Gaussian { ensemble_size: usize, std_dev: f64 },
}

/// Empirical maximum of `|⟨F⟩|² / ⟨|F|²⟩` over random hidden-variable
/// ensembles. The variance statement guarantees this never exceeds 1; any
/// excess beyond round-off is a bug in the functional expansion.
///
/// Trials are independently seeded from `seed`, so the result does not
/// depend on thread count.
pub fn lhv_variance_sampler(
    functional: &BellFunctional<f64>,
    sampler: StrategySampler,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = functional.n_sites();
    // Supremum of |F|² over the ±1 box: attained at a vertex since each
    // monomial is multilinear.
    let sup_sq = match sampler {
        StrategySampler::Signs { .. } => {
            let bound = mabk_lhv_max_of(functional)?;
            Some(bound * bound)
        }
        StrategySampler::Gaussian { .. } => None,
    };
    let ratios: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_add((t as u64).wrapping_mul(0x9E3779B97F4A7C15)));
            let (size, gaussian_std) = match sampler {
                StrategySampler::Signs { ensemble_size } => (ensemble_size, None),
                StrategySampler::Gaussian { ensemble_size, std_dev } => {
                    (ensemble_size, Some(std_dev))
                }
            };
            let mut mean = C::<f64>::new(0.0, 0.0);
            let mut mean_sq = 0.0f64;
            let mut x = vec![0.0f64; n];
            let mut y = vec![0.0f64; n];
            for _ in 0..size.max(1) {
                for k in 0..n {
                    match gaussian_std {
                        Some(s) => {
                            x[k] = s * rng.sample::<f64, _>(StandardNormal);
                            y[k] = s * rng.sample::<f64, _>(StandardNormal);
                        }
                        None => {
                            x[k] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                            y[k] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        }
                    }
                }
                let v = functional.evaluate(&x, &y)?;
                mean += v;
                mean_sq += v.norm_sqr();
            }
            let m = size.max(1) as f64;
            mean /= m;
            mean_sq /= m;
            let denom = sup_sq.unwrap_or(mean_sq);
            if denom < 1e-300 {
                Ok(0.0)
            } else {
                Ok(mean.norm_sqr() / denom)
            }
        })
        .collect();
    Ok(ratios?.into_iter().fold(0.0, f64::max))
}

/// Vertex maximum of `|F|` over the ±1 box for an arbitrary functional
/// (exhaustive for `n ≤ 6`; larger dichotomic functionals fall back to the
/// symbolic bound 1).
fn mabk_lhv_max_of(functional: &BellFunctional<f64>) -> Result<f64> {
    let n = functional.n_sites();
    if n > LHV_ENUMERATION_LIMIT {
        return match functional.kind() {
            BellKind::Mabk => Ok(1.0),
            BellKind::Cv => Ok(2.0f64.powi(n as i32 / 2)),
        };
    }
    let mut best = 0.0f64;
    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    for xb in 0..1usize << n {
        for yb in 0..1usize << n {
            for k in 0..n {
                x[k] = if xb >> k & 1 == 1 { -1.0 } else { 1.0 };
                y[k] = if yb >> k & 1 == 1 { -1.0 } else { 1.0 };
            }
            let v = functional.evaluate(&x, &y)?.norm();
            if v > best {
                best = v;
            }
        }
    }
    Ok(best)
}
