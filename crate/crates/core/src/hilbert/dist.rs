use super::layout::Odometer;
use super::op::{apply_local_left_with, apply_local_to_vec_with, Observable};
use super::state::{DensityOperator, StateVector};
use crate::error::{Error, Result};
use crate::scalar::{as_f64, rr, CMat, CVec, Scalar, C};

/// Commutator tolerance for joint measurability.
const COMMUTE_TOL: f64 = 1e-8;
/// Round-off window for clamping small negative probabilities.
const NEG_CLAMP: f64 = 1e-10;
/// Normalization tolerance of a freshly built distribution.
const SUM_TOL: f64 = 1e-8;
/// Outcomes with probability below this cannot be conditioned on.
const COND_FLOOR: f64 = 1e-12;

/// One outcome axis of a joint distribution.
#[derive(Debug, Clone)]
pub struct Axis<R: Scalar> {
    pub label: String,
    pub outcomes: Vec<R>,
}

/// Probability table over tuples of outcomes of commuting observables.
///
/// Probabilities are stored row-major with axis 0 most significant.
#[derive(Debug, Clone)]
pub struct JointDistribution<R: Scalar> {
    axes: Vec<Axis<R>>,
    probs: Vec<R>,
}

impl<R: Scalar> JointDistribution<R> {
    /// Build from raw parts; clamps round-off negativity and checks
    /// normalization.
    pub fn from_parts(axes: Vec<Axis<R>>, mut probs: Vec<R>) -> Result<Self> {
        let expected: usize = axes.iter().map(|a| a.outcomes.len()).product();
        if probs.len() != expected {
            return Err(Error::MalformedTable(format!(
                "{} probabilities for a table of {expected} cells",
                probs.len()
            )));
        }
        for p in probs.iter_mut() {
            let v = as_f64(*p);
            if v < 0.0 {
                if v < -NEG_CLAMP {
                    return Err(Error::NegativeProbability { value: v });
                }
                *p = R::zero();
            }
        }
        let total: R = probs.iter().copied().sum();
        if (as_f64(total) - 1.0).abs() > SUM_TOL {
            return Err(Error::ProbabilityNotNormalized { total: as_f64(total) });
        }
        Ok(Self { axes, probs })
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &Axis<R> {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[Axis<R>] {
        &self.axes
    }

    pub fn probabilities(&self) -> &[R] {
        &self.probs
    }

    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.outcomes.len()).collect()
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.axes.len() {
            Err(Error::AxisOutOfRange(axis))
        } else {
            Ok(())
        }
    }

    /// Iterate `(multi_index, probability)` over all cells.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, R)> + '_ {
        Odometer::new(self.shape())
            .zip(self.probs.iter())
            .map(|(idx, &p)| (idx, p))
    }

    /// Marginal probabilities of one axis.
    pub fn marginal(&self, axis: usize) -> Result<Vec<R>> {
        self.check_axis(axis)?;
        let mut out = vec![R::zero(); self.axes[axis].outcomes.len()];
        for (idx, p) in self.cells() {
            out[idx[axis]] += p;
        }
        Ok(out)
    }

    /// Expectation of the product of outcome values over a set of axes.
    /// `moment(&[k])` is the mean of axis `k`; `moment(&[k, k])` its second
    /// moment; `moment(&[j, k])` the cross moment `⟨AB⟩`.
    pub fn moment(&self, axes: &[usize]) -> Result<R> {
        for &a in axes {
            self.check_axis(a)?;
        }
        let mut acc = R::zero();
        for (idx, p) in self.cells() {
            if p == R::zero() {
                continue;
            }
            let v: R = axes
                .iter()
                .map(|&a| self.axes[a].outcomes[idx[a]])
                .product();
            acc += p * v;
        }
        Ok(acc)
    }

    pub fn mean(&self, axis: usize) -> Result<R> {
        self.moment(&[axis])
    }

    pub fn variance(&self, axis: usize) -> Result<R> {
        let m = self.moment(&[axis])?;
        let s = self.moment(&[axis, axis])?;
        Ok((s - m * m).max(R::zero()))
    }

    /// Distribution conditioned on `axis` taking its `outcome_index`-th
    /// value. The axis is removed and the slice renormalized.
    pub fn condition(&self, axis: usize, outcome_index: usize) -> Result<JointDistribution<R>> {
        self.check_axis(axis)?;
        if outcome_index >= self.axes[axis].outcomes.len() {
            return Err(Error::InvalidParameter(format!(
                "outcome index {outcome_index} out of range"
            )));
        }
        let mut slice_total = R::zero();
        let mut probs = Vec::new();
        for (idx, p) in self.cells() {
            if idx[axis] == outcome_index {
                slice_total += p;
                probs.push(p);
            }
        }
        if as_f64(slice_total) < COND_FLOOR {
            return Err(Error::ConditioningOnNullOutcome { value: as_f64(slice_total) });
        }
        let inv = R::one() / slice_total;
        probs.iter_mut().for_each(|p| *p *= inv);
        let axes = self
            .axes
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != axis)
            .map(|(_, a)| a.clone())
            .collect();
        Ok(JointDistribution { axes, probs })
    }

    /// Probability-weighted conditional variance of `target` given each
    /// outcome of `pointer`: `Σ_a P(a) Var(target | a)`. Pointer outcomes
    /// with probability below 1e-12 are skipped.
    pub fn average_conditional_variance(&self, target: usize, pointer: usize) -> Result<R> {
        self.check_axis(target)?;
        self.check_axis(pointer)?;
        if target == pointer {
            return Err(Error::InvalidParameter(
                "target and pointer axes must differ".into(),
            ));
        }
        let np = self.axes[pointer].outcomes.len();
        let mut w = vec![R::zero(); np];
        let mut m1 = vec![R::zero(); np];
        let mut m2 = vec![R::zero(); np];
        for (idx, p) in self.cells() {
            let a = idx[pointer];
            let b = self.axes[target].outcomes[idx[target]];
            w[a] += p;
            m1[a] += p * b;
            m2[a] += p * b * b;
        }
        let mut acc = R::zero();
        for a in 0..np {
            if as_f64(w[a]) < COND_FLOOR {
                continue;
            }
            let mean = m1[a] / w[a];
            let var = (m2[a] / w[a] - mean * mean).max(R::zero());
            acc += w[a] * var;
        }
        Ok(acc)
    }

    /// Conditional mean of `target` per `pointer` outcome, with the pointer
    /// marginal: returns `(P(a), E[target|a])` pairs; the mean is `None`
    /// when `P(a) < 1e-12`.
    pub fn conditional_means(
        &self,
        target: usize,
        pointer: usize,
    ) -> Result<Vec<(R, Option<R>)>> {
        self.check_axis(target)?;
        self.check_axis(pointer)?;
        let np = self.axes[pointer].outcomes.len();
        let mut w = vec![R::zero(); np];
        let mut m1 = vec![R::zero(); np];
        for (idx, p) in self.cells() {
            let a = idx[pointer];
            w[a] += p;
            m1[a] += p * self.axes[target].outcomes[idx[target]];
        }
        Ok((0..np)
            .map(|a| {
                if as_f64(w[a]) < COND_FLOOR {
                    (w[a], None)
                } else {
                    (w[a], Some(m1[a] / w[a]))
                }
            })
            .collect())
    }
}

enum Input<'a, R: Scalar> {
    Pure(&'a StateVector<R>),
    Mixed(&'a DensityOperator<R>),
}

/// Joint outcome distribution of commuting observables on a pure state.
pub fn joint_distribution_pure<R: Scalar>(
    psi: &StateVector<R>,
    observables: &[&Observable<R>],
) -> Result<JointDistribution<R>> {
    build(Input::Pure(psi), observables)
}

/// Joint outcome distribution of commuting observables on a mixed state.
pub fn joint_distribution_mixed<R: Scalar>(
    rho: &DensityOperator<R>,
    observables: &[&Observable<R>],
) -> Result<JointDistribution<R>> {
    build(Input::Mixed(rho), observables)
}

fn build<R: Scalar>(
    state: Input<'_, R>,
    observables: &[&Observable<R>],
) -> Result<JointDistribution<R>> {
    if observables.is_empty() {
        return Err(Error::InvalidParameter("need at least one observable".into()));
    }
    let layout = match &state {
        Input::Pure(psi) => psi.layout(),
        Input::Mixed(rho) => rho.layout(),
    };
    for o in observables {
        layout.check_same(o.layout())?;
    }

    let disjoint = observables.iter().all(|o| o.local_matrix().is_some())
        && pairwise_disjoint(observables);
    if disjoint {
        build_disjoint(state, observables)
    } else {
        build_general(state, observables)
    }
}

fn pairwise_disjoint<R: Scalar>(observables: &[&Observable<R>]) -> bool {
    for (i, a) in observables.iter().enumerate() {
        for b in &observables[i + 1..] {
            if a.support().iter().any(|m| b.support().contains(m)) {
                return false;
            }
        }
    }
    true
}

/// Fast path: observables act on pairwise disjoint mode sets. Each local
/// matrix is eigendecomposed; the state is rotated into the joint
/// eigenbasis mode-set by mode-set, and basis weights are accumulated per
/// outcome tuple.
fn build_disjoint<R: Scalar>(
    state: Input<'_, R>,
    observables: &[&Observable<R>],
) -> Result<JointDistribution<R>> {
    let layout = match &state {
        Input::Pure(psi) => psi.layout().clone(),
        Input::Mixed(rho) => rho.layout().clone(),
    };
    let d = layout.dim();

    struct Group<R: Scalar> {
        axis: Axis<R>,
        /// Outcome-group of each flat basis index after rotation.
        group_of_flat: Vec<usize>,
        /// U† of the local eigenbasis.
        u_adj: CMat<R>,
        index_groups: Vec<Vec<usize>>,
    }

    let mut groups: Vec<Group<R>> = Vec::with_capacity(observables.len());
    for o in observables {
        let local = o.local_matrix().expect("checked by caller").clone();
        let spec_cols = local.clone().symmetric_eigen();
        let sd = local.nrows();
        // Sort columns by eigenvalue, then merge near-degenerate ones.
        let mut order: Vec<usize> = (0..sd).collect();
        order.sort_by(|&a, &b| {
            spec_cols.eigenvalues[a]
                .partial_cmp(&spec_cols.eigenvalues[b])
                .expect("finite eigenvalues")
        });
        let gap = rr::<R>(1e-9);
        let mut group_of_col = vec![0usize; sd];
        let mut outcomes: Vec<R> = Vec::new();
        let mut members: Vec<usize> = Vec::new();
        for (rank, &col) in order.iter().enumerate() {
            let ev = spec_cols.eigenvalues[col];
            let new_group = rank == 0
                || ev - spec_cols.eigenvalues[order[rank - 1]] >= gap;
            if new_group {
                outcomes.push(ev);
                members.push(1);
            } else {
                let k = outcomes.len() - 1;
                let n = members[k];
                outcomes[k] = (outcomes[k] * rr::<R>(n as f64) + ev) / rr::<R>((n + 1) as f64);
                members[k] += 1;
            }
            group_of_col[col] = outcomes.len() - 1;
        }
        // U columns are eigenvectors; rotating the state with U† expresses
        // it in the eigenbasis, so basis index = eigencolumn index.
        let u_adj = spec_cols.eigenvectors.adjoint();
        let (sub_of, index_groups) = layout.subindex_tables(o.support());
        let group_of_flat: Vec<usize> =
            (0..d).map(|i| group_of_col[sub_of[i]]).collect();
        groups.push(Group {
            axis: Axis { label: o.label().to_string(), outcomes },
            group_of_flat,
            u_adj,
            index_groups,
        });
    }

    let shape: Vec<usize> = groups.iter().map(|g| g.axis.outcomes.len()).collect();
    let n_cells: usize = shape.iter().product();
    let mut probs = vec![R::zero(); n_cells];

    let cell_of_flat = |i: usize| -> usize {
        groups
            .iter()
            .zip(shape.iter())
            .fold(0usize, |acc, (g, &s)| acc * s + g.group_of_flat[i])
    };

    match state {
        Input::Pure(psi) => {
            let mut v: CVec<R> = psi.amplitudes().clone();
            for g in &groups {
                v = apply_local_to_vec_with(&g.index_groups, &g.u_adj, &v);
            }
            for i in 0..d {
                probs[cell_of_flat(i)] += v[i].norm_sqr();
            }
        }
        Input::Mixed(rho) => {
            // ρ' = (∏U†) ρ (∏U) via two left-applications and adjoints.
            let mut m: CMat<R> = rho.matrix().clone();
            for g in &groups {
                m = apply_local_left_with(&g.index_groups, &g.u_adj, &m);
            }
            m = m.adjoint();
            for g in &groups {
                m = apply_local_left_with(&g.index_groups, &g.u_adj, &m);
            }
            m = m.adjoint();
            for i in 0..d {
                probs[cell_of_flat(i)] += m[(i, i)].re;
            }
        }
    }

    JointDistribution::from_parts(groups.into_iter().map(|g| g.axis).collect(), probs)
}

/// General path: observables may share support but must commute. Uses the
/// full-space projectors, applied recursively outcome by outcome.
fn build_general<R: Scalar>(
    state: Input<'_, R>,
    observables: &[&Observable<R>],
) -> Result<JointDistribution<R>> {
    // Pairwise commutation check (skipped for disjoint pairs).
    for (i, a) in observables.iter().enumerate() {
        for b in &observables[i + 1..] {
            if a.support().iter().any(|m| b.support().contains(m)) {
                let res = a.commutator_residual(b)?;
                if as_f64(res) > COMMUTE_TOL {
                    return Err(Error::NonCommuting { residual: as_f64(res) });
                }
            }
        }
    }

    let spectra: Vec<_> = observables.iter().map(|o| o.spectral()).collect();
    let axes: Vec<Axis<R>> = observables
        .iter()
        .zip(&spectra)
        .map(|(o, s)| Axis { label: o.label().to_string(), outcomes: s.outcomes.clone() })
        .collect();
    let shape: Vec<usize> = axes.iter().map(|a| a.outcomes.len()).collect();
    let n_cells = shape.iter().product();
    let mut probs = vec![R::zero(); n_cells];

    match state {
        Input::Pure(psi) => {
            rec_pure(&spectra, 0, 0, psi.amplitudes().clone(), &mut probs);
        }
        Input::Mixed(rho) => {
            rec_mixed(&spectra, 0, 0, rho.matrix().clone(), &mut probs);
        }
    }
    JointDistribution::from_parts(axes, probs)
}

fn rec_pure<R: Scalar>(
    spectra: &[&super::op::Spectrum<R>],
    depth: usize,
    cell: usize,
    v: CVec<R>,
    probs: &mut [R],
) {
    if depth == spectra.len() {
        probs[cell] = v.iter().map(|z| z.norm_sqr()).sum();
        return;
    }
    let s = spectra[depth];
    let width: usize = spectra[depth + 1..]
        .iter()
        .map(|s| s.outcomes.len())
        .product();
    for (k, proj) in s.projectors.iter().enumerate() {
        let w = proj * &v;
        let weight: R = w.iter().map(|z| z.norm_sqr()).sum();
        if as_f64(weight) < 1e-30 {
            continue; // zero sub-tree; its cells stay 0
        }
        rec_pure(spectra, depth + 1, cell + k * width, w, probs);
    }
}

fn rec_mixed<R: Scalar>(
    spectra: &[&super::op::Spectrum<R>],
    depth: usize,
    cell: usize,
    m: CMat<R>,
    probs: &mut [R],
) {
    if depth == spectra.len() {
        let mut tr = C::<R>::new(R::zero(), R::zero());
        for i in 0..m.nrows() {
            tr += m[(i, i)];
        }
        probs[cell] = tr.re;
        return;
    }
    let s = spectra[depth];
    let width: usize = spectra[depth + 1..]
        .iter()
        .map(|s| s.outcomes.len())
        .product();
    for (k, proj) in s.projectors.iter().enumerate() {
        let w = proj * &m;
        rec_mixed(spectra, depth + 1, cell + k * width, w, probs);
    }
}
