//! Steering criteria built on inference variances: the quadrature product
//! criterion, the two spin criteria, efficiency-threshold scans, and the
//! superposition-size bound they imply.

use crate::error::{Error, Result};
use crate::hilbert::{
    joint_distribution_mixed, quadrature, schwinger_spin, site_number, DensityOperator,
    JointDistribution, Observable, SpinComponent,
};
use crate::report::{CriterionReport, Direction};
use crate::scalar::{as_f64, rr, Scalar};

/// How the inferred value of the target observable is estimated from the
/// pointer outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Exact conditional means: `Δ²_inf = Σ_a P(a) Δ²(B|a)`.
    Conditional,
    /// Best linear estimate `B ≈ −gA`:
    /// `Δ²_est = ⟨B²⟩ − ⟨AB⟩²/⟨A²⟩`, `g = −⟨AB⟩/⟨A²⟩`.
    /// Never smaller than the conditional variance.
    Linear,
}

/// An average inference variance together with how it was estimated.
#[derive(Debug, Clone, Copy)]
pub struct InferenceVariance<R: Scalar> {
    pub value: R,
    pub kind: EstimatorKind,
    /// Linear gain, when the linear estimator was used.
    pub gain: Option<R>,
}

/// Average variance of the `target` axis after inference from the
/// `pointer` axis of a joint outcome distribution.
pub fn inference_variance<R: Scalar>(
    joint: &JointDistribution<R>,
    target: usize,
    pointer: usize,
    kind: EstimatorKind,
) -> Result<InferenceVariance<R>> {
    match kind {
        EstimatorKind::Conditional => {
            let value = joint.average_conditional_variance(target, pointer)?;
            Ok(InferenceVariance { value, kind, gain: None })
        }
        EstimatorKind::Linear => {
            let b2 = joint.moment(&[target, target])?;
            let ab = joint.moment(&[pointer, target])?;
            let a2 = joint.moment(&[pointer, pointer])?;
            if as_f64(a2) < 1e-12 {
                return Err(Error::InvalidParameter(
                    "pointer second moment vanishes; linear estimator undefined".into(),
                ));
            }
            let value = (b2 - ab * ab / a2).max(R::zero());
            Ok(InferenceVariance { value, kind, gain: Some(-(ab / a2)) })
        }
    }
}

/// Quadrature product criterion
/// `Δ_inf(x^B|x^A) · Δ_inf(p^B|p^A) ≥ 1`:
/// violation demonstrates steering of site B by site A.
///
/// `x_pair` and `p_pair` are the (pointer, target) observables for the two
/// conjugate inferences; pointer observables must commute with target ones
/// (enforced when the joint distributions are built).
pub fn reid_criterion<R: Scalar>(
    rho: &DensityOperator<R>,
    x_pair: (&Observable<R>, &Observable<R>),
    p_pair: (&Observable<R>, &Observable<R>),
    kind: EstimatorKind,
) -> Result<CriterionReport<R>> {
    let jx = joint_distribution_mixed(rho, &[x_pair.0, x_pair.1])?;
    let jp = joint_distribution_mixed(rho, &[p_pair.0, p_pair.1])?;
    let vx = inference_variance(&jx, 1, 0, kind)?;
    let vp = inference_variance(&jp, 1, 0, kind)?;
    let lhs = (vx.value * vp.value).sqrt();
    Ok(CriterionReport::new(
        "quadrature inference product",
        lhs,
        R::one(),
        Direction::ViolatedIfLess,
        vec![
            ("inf_var_x".into(), vx.value),
            ("inf_var_p".into(), vp.value),
        ],
    ))
}

/// [`reid_criterion`] on the standard quadratures `x = X(0)`,
/// `p = X(π/2)` of two modes, inferring mode `mode_b` from `mode_a`.
pub fn reid_for_modes<R: Scalar>(
    rho: &DensityOperator<R>,
    mode_a: usize,
    mode_b: usize,
    kind: EstimatorKind,
) -> Result<CriterionReport<R>> {
    let l = rho.layout();
    let xa = quadrature::<R>(l, mode_a, 0.0)?;
    let xb = quadrature::<R>(l, mode_b, 0.0)?;
    let pa = quadrature::<R>(l, mode_a, std::f64::consts::FRAC_PI_2)?;
    let pb = quadrature::<R>(l, mode_b, std::f64::consts::FRAC_PI_2)?;
    reid_criterion(rho, (&xa, &xb), (&pa, &pb), kind)
}

fn spin_inference<R: Scalar>(
    rho: &DensityOperator<R>,
    site_a: (usize, usize),
    site_b: (usize, usize),
    component: SpinComponent,
    kind: EstimatorKind,
) -> Result<InferenceVariance<R>> {
    let ja = schwinger_spin::<R>(rho.layout(), site_a, component)?;
    let jb = schwinger_spin::<R>(rho.layout(), site_b, component)?;
    let joint = joint_distribution_mixed(rho, &[&ja, &jb])?;
    inference_variance(&joint, 1, 0, kind)
}

/// Spin product criterion
/// `Δ_inf(j_x^B|J_x^A) · Δ_inf(j_y^B|J_y^A) ≥ ½ Σ_a P(j_z^A = a) |⟨j_z^B⟩_a|`.
///
/// The right side is the conditional average of the spin uncertainty bound
/// `Δj_x Δj_y ≥ |⟨j_z⟩|/2`; the pre-factor ½ belongs to that bound. The
/// unhalved sum is reported as the `sum_term` parameter.
pub fn bohm_product_criterion<R: Scalar>(
    rho: &DensityOperator<R>,
    site_a: (usize, usize),
    site_b: (usize, usize),
    kind: EstimatorKind,
) -> Result<CriterionReport<R>> {
    let vx = spin_inference(rho, site_a, site_b, SpinComponent::X, kind)?;
    let vy = spin_inference(rho, site_a, site_b, SpinComponent::Y, kind)?;
    let lhs = (vx.value * vy.value).sqrt();

    let jza = schwinger_spin::<R>(rho.layout(), site_a, SpinComponent::Z)?;
    let jzb = schwinger_spin::<R>(rho.layout(), site_b, SpinComponent::Z)?;
    let jz = joint_distribution_mixed(rho, &[&jza, &jzb])?;
    let mut sum_term = R::zero();
    for (p, mean) in jz.conditional_means(1, 0)? {
        if let Some(m) = mean {
            sum_term += p * m.abs();
        }
    }
    let rhs = sum_term / rr::<R>(2.0);
    Ok(CriterionReport::new(
        "spin inference product",
        lhs,
        rhs,
        Direction::ViolatedIfLess,
        vec![
            ("inf_var_jx".into(), vx.value),
            ("inf_var_jy".into(), vy.value),
            ("sum_term".into(), sum_term),
        ],
    ))
}

/// Spin sum criterion
/// `Δ²_inf(j_x^B|J_x^A) + Δ²_inf(j_y^B|J_y^A) + Δ²_inf(j_z^B|J_z^A) ≥ ⟨N^B⟩/2`.
pub fn bohm_sum_criterion<R: Scalar>(
    rho: &DensityOperator<R>,
    site_a: (usize, usize),
    site_b: (usize, usize),
    kind: EstimatorKind,
) -> Result<CriterionReport<R>> {
    let vx = spin_inference(rho, site_a, site_b, SpinComponent::X, kind)?;
    let vy = spin_inference(rho, site_a, site_b, SpinComponent::Y, kind)?;
    let vz = spin_inference(rho, site_a, site_b, SpinComponent::Z, kind)?;
    let lhs = vx.value + vy.value + vz.value;
    let nb = site_number::<R>(rho.layout(), site_b)?;
    let mean_nb = rho.expectation(&nb)?;
    let rhs = mean_nb / rr::<R>(2.0);
    Ok(CriterionReport::new(
        "spin inference sum",
        lhs,
        rhs,
        Direction::ViolatedIfLess,
        vec![
            ("inf_var_jx".into(), vx.value),
            ("inf_var_jy".into(), vy.value),
            ("inf_var_jz".into(), vz.value),
            ("mean_nb".into(), mean_nb),
        ],
    ))
}

/// Size of superposition certified by a spin inference:
/// `S = √max(0, ⟨N^B⟩ − 2Δ²_est)`.
pub fn superposition_size_from_epr<R: Scalar>(mean_nb: R, var_est: R) -> R {
    (mean_nb - rr::<R>(2.0) * var_est).max(R::zero()).sqrt()
}

/// Closed-form linear inference variance `Δ²_est j_θ^B` of the lossy
/// parametric amplifier: `η sinh²r (1 − η² + 2η(1−η) sinh²r) / (2(1 + η sinh²r))`.
pub fn parametric_amp_inference_variance(r: f64, eta: f64) -> f64 {
    let s2 = r.sinh().powi(2);
    eta * s2 * (1.0 - eta * eta + 2.0 * eta * (1.0 - eta) * s2) / (2.0 * (1.0 + eta * s2))
}

/// Closed-form `⟨N^B⟩ = 2η sinh²r` of the lossy parametric amplifier.
pub fn parametric_amp_mean_nb(r: f64, eta: f64) -> f64 {
    2.0 * eta * r.sinh().powi(2)
}

/// Result of scanning a criterion's violation margin over a transmission
/// grid.
#[derive(Debug, Clone)]
pub struct ThresholdScan<R: Scalar> {
    /// `(η, margin)` pairs over the requested grid.
    pub curve: Vec<(R, R)>,
    /// Crossing point refined by bisection to 1e-3, when one exists.
    pub threshold: Option<R>,
    /// Whether the violated grid points form one upper interval in `η`.
    /// When false no threshold is reported.
    pub monotone: bool,
    /// Set when the whole grid is violated: the grid minimum is then only
    /// an upper bound on the true threshold.
    pub upper_bound_only: bool,
}

/// Scan the violation margin of `eval(η)` over an increasing grid and
/// refine the zero crossing by bisection.
pub fn efficiency_threshold_scan<R: Scalar, F>(
    eval: F,
    grid: &[R],
) -> Result<ThresholdScan<R>>
where
    F: Fn(R) -> Result<CriterionReport<R>>,
{
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| as_f64(w[0]) >= as_f64(w[1])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &eta in grid {
        let rep = eval(eta)?;
        curve.push((eta, rep.margin));
    }
    // The margin itself need not be monotone (it typically dips before
    // rising); what a threshold needs is that the violated points form an
    // upper interval of the grid.
    let monotone = curve
        .windows(2)
        .all(|w| !(w[0].1 > R::zero() && w[1].1 <= R::zero()));
    if !monotone {
        return Ok(ThresholdScan { curve, threshold: None, monotone, upper_bound_only: false });
    }
    if curve.last().expect("nonempty grid").1 <= R::zero() {
        // No violation anywhere.
        return Ok(ThresholdScan { curve, threshold: None, monotone, upper_bound_only: false });
    }
    if curve[0].1 > R::zero() {
        // Violated on the whole grid.
        return Ok(ThresholdScan {
            threshold: Some(curve[0].0),
            curve,
            monotone,
            upper_bound_only: true,
        });
    }
    // Bracket the sign change and bisect to 1e-3.
    let k = curve
        .windows(2)
        .position(|w| w[0].1 <= R::zero() && w[1].1 > R::zero())
        .expect("monotone margin with a sign change has a bracket");
    let (mut lo, mut hi) = (curve[k].0, curve[k + 1].0);
    while as_f64(hi - lo) > 1e-3 {
        let mid = (lo + hi) / rr::<R>(2.0);
        if eval(mid)?.margin > R::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let threshold = Some((lo + hi) / rr::<R>(2.0));
    Ok(ThresholdScan { curve, threshold, monotone, upper_bound_only: false })
}
