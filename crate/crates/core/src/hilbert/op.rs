use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::layout::ModeLayout;
use crate::error::{Error, Result};
use crate::scalar::{as_f64, cc, cnorm, lift, rn, rr, CMat, CVec, Scalar, C};

/// Absolute element tolerance for Hermiticity checks.
const HERMITICITY_TOL: f64 = 1e-10;
/// Eigenvalue gap below which spectral outcomes are merged.
const DEGENERACY_GAP: f64 = 1e-9;

/// General dense operator on a truncated multimode space.
#[derive(Debug, Clone)]
pub struct Operator<R: Scalar> {
    pub layout: ModeLayout,
    pub mat: CMat<R>,
}

impl<R: Scalar> Operator<R> {
    pub fn new(layout: ModeLayout, mat: CMat<R>) -> Result<Self> {
        let d = layout.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::LayoutMismatch(format!(
                "matrix is {}×{}, layout dimension is {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { layout, mat })
    }

    pub fn identity(layout: ModeLayout) -> Self {
        let d = layout.dim();
        Self { mat: CMat::<R>::identity(d, d), layout }
    }

    /// Embed a matrix acting on `modes` (in that order) into the full space.
    pub fn embed(layout: ModeLayout, modes: &[usize], small: &CMat<R>) -> Result<Self> {
        check_modes(&layout, modes)?;
        let sub = layout.sublayout(modes)?;
        let sd = sub.dim();
        if small.nrows() != sd || small.ncols() != sd {
            return Err(Error::LayoutMismatch(format!(
                "local matrix is {}×{}, sub-space dimension is {sd}",
                small.nrows(),
                small.ncols()
            )));
        }
        let d = layout.dim();
        let (_, groups) = layout.subindex_tables(modes);
        let mut mat = CMat::<R>::zeros(d, d);
        for g in &groups {
            for (sj, &j) in g.iter().enumerate() {
                for (si, &i) in g.iter().enumerate() {
                    let v = small[(si, sj)];
                    if v != C::<R>::new(R::zero(), R::zero()) {
                        mat[(i, j)] = v;
                    }
                }
            }
        }
        Ok(Self { layout, mat })
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), mat: self.mat.adjoint() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.layout.check_same(&other.layout)?;
        Ok(Self { layout: self.layout.clone(), mat: &self.mat * &other.mat })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.layout.check_same(&other.layout)?;
        Ok(Self { layout: self.layout.clone(), mat: &self.mat + &other.mat })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.layout.check_same(&other.layout)?;
        Ok(Self { layout: self.layout.clone(), mat: &self.mat - &other.mat })
    }

    pub fn scale(&self, z: C<R>) -> Self {
        Self { layout: self.layout.clone(), mat: self.mat.map(|m| m * z) }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.mul(other)?;
        let ba = other.mul(self)?;
        ab.sub(&ba)
    }

    /// Largest absolute element of `M - M†`.
    pub fn hermiticity_residual(&self) -> R {
        let adj = self.mat.adjoint();
        let mut worst = R::zero();
        for (a, b) in self.mat.iter().zip(adj.iter()) {
            let r = cnorm(a - b);
            if r > worst {
                worst = r;
            }
        }
        worst
    }

    pub fn max_abs_element(&self) -> R {
        self.mat.iter().map(|z| cnorm(*z)).fold(R::zero(), |a, b| a.max(b))
    }
}

fn check_modes(layout: &ModeLayout, modes: &[usize]) -> Result<()> {
    for &m in modes {
        layout.check_mode(m)?;
    }
    for (i, &m) in modes.iter().enumerate() {
        if modes[..i].contains(&m) {
            return Err(Error::InvalidParameter(format!("repeated mode index {m}")));
        }
    }
    if modes.is_empty() {
        return Err(Error::InvalidParameter("empty mode set".into()));
    }
    Ok(())
}

/// Spectral decomposition of a Hermitian observable.
///
/// Outcomes are sorted ascending; eigenvalues closer than the merging gap
/// share one outcome and one (summed) projector. `vectors[k]` holds the
/// eigenvector when the outcome is non-degenerate.
#[derive(Debug, Clone)]
pub struct Spectrum<R: Scalar> {
    pub outcomes: Vec<R>,
    pub projectors: Vec<CMat<R>>,
    pub vectors: Vec<Option<CVec<R>>>,
}

/// Hermitian operator with outcome labels and a cached spectral decomposition.
#[derive(Debug, Clone)]
pub struct Observable<R: Scalar> {
    layout: ModeLayout,
    mat: CMat<R>,
    label: String,
    /// Modes the observable acts on non-trivially, in local-matrix order.
    support: Vec<usize>,
    /// Matrix on the support sub-space, when the observable was built
    /// mode-locally. Enables the fast joint-distribution path.
    local: Option<CMat<R>>,
    spectrum: OnceLock<Spectrum<R>>,
}

impl<R: Scalar> Observable<R> {
    /// Observable from a full-space Hermitian matrix.
    pub fn new(layout: ModeLayout, mat: CMat<R>, label: impl Into<String>) -> Result<Self> {
        let op = Operator::new(layout, mat)?;
        let res = op.hermiticity_residual();
        if as_f64(res) > HERMITICITY_TOL {
            return Err(Error::NotHermitian { residual: as_f64(res) });
        }
        let support = (0..op.layout.n_modes()).collect();
        let local =
            if op.layout.n_modes() == 1 { Some(op.mat.clone()) } else { None };
        Ok(Self {
            layout: op.layout,
            mat: op.mat,
            label: label.into(),
            support,
            local,
            spectrum: OnceLock::new(),
        })
    }

    /// Observable acting on a subset of modes, given its local matrix.
    pub fn from_local(
        layout: ModeLayout,
        modes: &[usize],
        local: CMat<R>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let embedded = Operator::embed(layout, modes, &local)?;
        let res = embedded.hermiticity_residual();
        if as_f64(res) > HERMITICITY_TOL {
            return Err(Error::NotHermitian { residual: as_f64(res) });
        }
        Ok(Self {
            layout: embedded.layout,
            mat: embedded.mat,
            label: label.into(),
            support: modes.to_vec(),
            local: Some(local),
            spectrum: OnceLock::new(),
        })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat<R> {
        &self.mat
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn local_matrix(&self) -> Option<&CMat<R>> {
        self.local.as_ref()
    }

    pub fn as_operator(&self) -> Operator<R> {
        Operator { layout: self.layout.clone(), mat: self.mat.clone() }
    }

    /// Largest absolute element of the commutator with another observable.
    pub fn commutator_residual(&self, other: &Self) -> Result<R> {
        let c = self.as_operator().commutator(&other.as_operator())?;
        Ok(c.max_abs_element())
    }

    /// Spectral decomposition (computed once, then cached).
    pub fn spectral(&self) -> &Spectrum<R> {
        self.spectrum.get_or_init(|| decompose(&self.mat))
    }
}

/// Sorted, degeneracy-merged eigendecomposition of a Hermitian matrix.
pub(crate) fn decompose<R: Scalar>(mat: &CMat<R>) -> Spectrum<R> {
    let eig = mat.clone().symmetric_eigen();
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues of a Hermitian matrix are finite reals")
    });

    let gap = rr::<R>(DEGENERACY_GAP);
    let mut outcomes = Vec::new();
    let mut projectors = Vec::new();
    let mut vectors = Vec::new();

    let mut k = 0;
    while k < n {
        let mut group = vec![order[k]];
        let mut j = k + 1;
        while j < n && eig.eigenvalues[order[j]] - eig.eigenvalues[order[j - 1]] < gap {
            group.push(order[j]);
            j += 1;
        }
        let mean = group.iter().map(|&g| eig.eigenvalues[g]).sum::<R>() / rn::<R>(group.len());
        let mut proj = CMat::<R>::zeros(n, n);
        for &g in &group {
            let v = eig.eigenvectors.column(g);
            // proj += v v†
            for col in 0..n {
                let vc = v[col].conj();
                for row in 0..n {
                    proj[(row, col)] += v[row] * vc;
                }
            }
        }
        let vector = if group.len() == 1 {
            Some(CVec::<R>::from_iterator(
                n,
                eig.eigenvectors.column(group[0]).iter().cloned(),
            ))
        } else {
            None
        };
        outcomes.push(mean);
        projectors.push(proj);
        vectors.push(vector);
        k = j;
    }
    Spectrum { outcomes, projectors, vectors }
}

/// Annihilation matrix on a single mode: `⟨n-1|a|n⟩ = √n`, dimension `cutoff+1`.
pub fn annihilation_matrix<R: Scalar>(cutoff: usize) -> CMat<R> {
    let d = cutoff + 1;
    let mut m = CMat::<R>::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = lift(rn::<R>(n).sqrt());
    }
    m
}

/// Number matrix `diag(0..=cutoff)`.
pub fn number_matrix<R: Scalar>(cutoff: usize) -> CMat<R> {
    let d = cutoff + 1;
    CMat::<R>::from_fn(d, d, |i, j| if i == j { lift(rn::<R>(i)) } else { C::<R>::new(R::zero(), R::zero()) })
}

/// Mode annihilation operator embedded into the full layout.
pub fn annihilation<R: Scalar>(layout: &ModeLayout, mode: usize) -> Result<Operator<R>> {
    layout.check_mode(mode)?;
    let small = annihilation_matrix::<R>(layout.cutoff(mode));
    Operator::embed(layout.clone(), &[mode], &small)
}

/// Local quadrature matrix `a e^{-iθ} + a† e^{iθ}` at the given cutoff.
pub fn quadrature_matrix<R: Scalar>(cutoff: usize, theta: f64) -> CMat<R> {
    let a = annihilation_matrix::<R>(cutoff);
    let phase = cc::<R>(theta.cos(), -theta.sin());
    let term = a.map(|z| z * phase);
    &term + term.adjoint()
}

/// Quadrature observable `X(θ) = a e^{-iθ} + a† e^{iθ}` on one mode.
///
/// Convention: `[X(θ), X(θ+π/2)] = 2i`, vacuum variance 1.
pub fn quadrature<R: Scalar>(layout: &ModeLayout, mode: usize, theta: f64) -> Result<Observable<R>> {
    layout.check_mode(mode)?;
    let local = quadrature_matrix::<R>(layout.cutoff(mode), theta);
    Observable::from_local(
        layout.clone(),
        &[mode],
        local,
        format!("X_{mode}({theta:.4})"),
    )
}

/// Spin component label for two-mode Schwinger operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinComponent {
    X,
    Y,
    Z,
}

/// Schwinger spin observable on a pair of modes `(plus, minus)`:
/// `J_x = (a₋a₊† + a₋†a₊)/2`, `J_y = (a₋a₊† − a₋†a₊)/(2i)`,
/// `J_z = (a₊†a₊ − a₋†a₋)/2`.
pub fn schwinger_spin<R: Scalar>(
    layout: &ModeLayout,
    site_modes: (usize, usize),
    component: SpinComponent,
) -> Result<Observable<R>> {
    let (mp, mm) = site_modes;
    if mp == mm {
        return Err(Error::InvalidParameter(format!(
            "Schwinger site needs two distinct modes (got {mp}, {mm})"
        )));
    }
    layout.check_mode(mp)?;
    layout.check_mode(mm)?;
    let dp = layout.mode_dim(mp);
    let dm = layout.mode_dim(mm);
    // Local space ordered (plus, minus), plus most significant.
    let ap = annihilation_matrix::<R>(dp - 1).kronecker(&CMat::<R>::identity(dm, dm));
    let am = CMat::<R>::identity(dp, dp).kronecker(&annihilation_matrix::<R>(dm - 1));
    let half = cc::<R>(0.5, 0.0);
    let local = match component {
        SpinComponent::X => {
            let t = &am * ap.adjoint();
            (&t + t.adjoint()).map(|z| z * half)
        }
        SpinComponent::Y => {
            let t = &am * ap.adjoint();
            let d = &t - t.adjoint();
            d.map(|z| z * cc::<R>(0.0, -0.5))
        }
        SpinComponent::Z => {
            let np = ap.adjoint() * &ap;
            let nm = am.adjoint() * &am;
            (np - nm).map(|z| z * half)
        }
    };
    let name = match component {
        SpinComponent::X => "Jx",
        SpinComponent::Y => "Jy",
        SpinComponent::Z => "Jz",
    };
    Observable::from_local(
        layout.clone(),
        &[mp, mm],
        local,
        format!("{name}({mp},{mm})"),
    )
}

/// Total photon number on a pair of modes: `N = a₊†a₊ + a₋†a₋`.
pub fn site_number<R: Scalar>(
    layout: &ModeLayout,
    site_modes: (usize, usize),
) -> Result<Observable<R>> {
    let (mp, mm) = site_modes;
    if mp == mm {
        return Err(Error::InvalidParameter(format!(
            "site number needs two distinct modes (got {mp}, {mm})"
        )));
    }
    layout.check_mode(mp)?;
    layout.check_mode(mm)?;
    let dp = layout.mode_dim(mp);
    let dm = layout.mode_dim(mm);
    let local = number_matrix::<R>(dp - 1).kronecker(&CMat::<R>::identity(dm, dm))
        + CMat::<R>::identity(dp, dp).kronecker(&number_matrix::<R>(dm - 1));
    Observable::from_local(layout.clone(), &[mp, mm], local, format!("N({mp},{mm})"))
}

/// Apply a mode-local matrix to a state vector: `w = (M on modes) v`.
pub(crate) fn apply_local_to_vec<R: Scalar>(
    layout: &ModeLayout,
    modes: &[usize],
    m: &CMat<R>,
    v: &CVec<R>,
) -> CVec<R> {
    let (_, groups) = layout.subindex_tables(modes);
    apply_local_to_vec_with(&groups, m, v)
}

/// Same as [`apply_local_to_vec`] with precomputed index groups.
pub(crate) fn apply_local_to_vec_with<R: Scalar>(
    groups: &[Vec<usize>],
    m: &CMat<R>,
    v: &CVec<R>,
) -> CVec<R> {
    let sd = m.nrows();
    let mut out = CVec::<R>::zeros(v.len());
    let mut sub = CVec::<R>::zeros(sd);
    for g in groups {
        for (s, &i) in g.iter().enumerate() {
            sub[s] = v[i];
        }
        let res = m * &sub;
        for (s, &i) in g.iter().enumerate() {
            out[i] = res[s];
        }
    }
    out
}

/// Apply a mode-local matrix from the left to every column of `mat`.
pub(crate) fn apply_local_left_with<R: Scalar>(
    groups: &[Vec<usize>],
    m: &CMat<R>,
    mat: &CMat<R>,
) -> CMat<R> {
    let sd = m.nrows();
    let (rows, cols) = mat.shape();
    let mut out = CMat::<R>::zeros(rows, cols);
    let mut sub = DMatrix::<C<R>>::zeros(sd, cols);
    for g in groups {
        for (s, &i) in g.iter().enumerate() {
            for c in 0..cols {
                sub[(s, c)] = mat[(i, c)];
            }
        }
        let res = m * &sub;
        for (s, &i) in g.iter().enumerate() {
            for c in 0..cols {
                out[(i, c)] = res[(s, c)];
            }
        }
    }
    out
}
