use super::layout::ModeLayout;
use super::op::Observable;
use crate::error::{Error, Result};
use crate::scalar::{as_f64, cnorm, lift, CMat, CVec, Scalar, C};

/// Tolerance on state-vector normalization and density-operator invariants.
const STATE_TOL: f64 = 1e-10;
/// Imaginary residue above which an expectation value is rejected.
const IMAG_TOL: f64 = 1e-8;

/// Pure state on a truncated multimode space.
#[derive(Debug, Clone)]
pub struct StateVector<R: Scalar> {
    layout: ModeLayout,
    amp: CVec<R>,
}

impl<R: Scalar> StateVector<R> {
    /// Build from amplitudes and normalize. Errors when the vector is
    /// (numerically) zero.
    pub fn new(layout: ModeLayout, amp: CVec<R>) -> Result<Self> {
        if amp.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "amplitude vector has length {}, layout dimension is {}",
                amp.len(),
                layout.dim()
            )));
        }
        let mut s = Self { layout, amp };
        s.normalize()?;
        Ok(s)
    }

    /// `|0…0⟩`.
    pub fn vacuum(layout: ModeLayout) -> Self {
        let mut amp = CVec::<R>::zeros(layout.dim());
        amp[0] = C::new(R::one(), R::zero());
        Self { layout, amp }
    }

    /// Basis ket with the given per-mode occupancies.
    pub fn basis(layout: ModeLayout, occ: &[usize]) -> Result<Self> {
        if occ.len() != layout.n_modes() {
            return Err(Error::LayoutMismatch(format!(
                "{} occupancies for {} modes",
                occ.len(),
                layout.n_modes()
            )));
        }
        for (m, &n) in occ.iter().enumerate() {
            if n > layout.cutoff(m) {
                return Err(Error::InvalidParameter(format!(
                    "occupancy {n} exceeds cutoff {} on mode {m}",
                    layout.cutoff(m)
                )));
            }
        }
        let mut amp = CVec::<R>::zeros(layout.dim());
        amp[layout.flat(occ)] = C::new(R::one(), R::zero());
        Ok(Self { layout, amp })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVec<R> {
        &self.amp
    }

    pub fn norm(&self) -> R {
        self.amp.iter().map(|z| z.norm_sqr()).sum::<R>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if as_f64(n) < 1e-300 {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        let inv = lift(R::one() / n);
        self.amp.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<C<R>> {
        self.layout.check_same(&other.layout)?;
        Ok(self
            .amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(R::zero(), R::zero()), |acc, z| acc + z))
    }

    pub fn to_density(&self) -> DensityOperator<R> {
        let d = self.layout.dim();
        let mut mat = CMat::<R>::zeros(d, d);
        for j in 0..d {
            let cj = self.amp[j].conj();
            if cj == C::new(R::zero(), R::zero()) {
                continue;
            }
            for i in 0..d {
                mat[(i, j)] = self.amp[i] * cj;
            }
        }
        DensityOperator { layout: self.layout.clone(), mat }
    }

    /// Tensor product on the concatenated layout.
    pub fn tensor(&self, other: &Self) -> Self {
        let layout = self.layout.concat(&other.layout);
        let (da, db) = (self.amp.len(), other.amp.len());
        let mut amp = CVec::<R>::zeros(da * db);
        for i in 0..da {
            if self.amp[i] == C::new(R::zero(), R::zero()) {
                continue;
            }
            for j in 0..db {
                amp[i * db + j] = self.amp[i] * other.amp[j];
            }
        }
        Self { layout, amp }
    }

    /// `⟨ψ|O|ψ⟩` with imaginary-residue check.
    pub fn expectation(&self, obs: &Observable<R>) -> Result<R> {
        self.layout.check_same(obs.layout())?;
        let w = obs.matrix() * &self.amp;
        let z = self
            .amp
            .iter()
            .zip(w.iter())
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(R::zero(), R::zero()), |acc, v| acc + v);
        real_part(z)
    }

    /// `⟨ψ|O²|ψ⟩ − ⟨ψ|O|ψ⟩²`, clamped at −1e-10 from below.
    pub fn variance(&self, obs: &Observable<R>) -> Result<R> {
        self.layout.check_same(obs.layout())?;
        let w = obs.matrix() * &self.amp;
        let mean = {
            let z = self
                .amp
                .iter()
                .zip(w.iter())
                .map(|(a, b)| a.conj() * b)
                .fold(C::new(R::zero(), R::zero()), |acc, v| acc + v);
            real_part(z)?
        };
        let second: R = w.iter().map(|z| z.norm_sqr()).sum();
        Ok((second - mean * mean).max(R::zero()))
    }
}

/// Mixed state: Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone)]
pub struct DensityOperator<R: Scalar> {
    pub(crate) layout: ModeLayout,
    pub(crate) mat: CMat<R>,
}

impl<R: Scalar> DensityOperator<R> {
    /// Build with full validation (Hermiticity, trace, positivity).
    pub fn new(layout: ModeLayout, mat: CMat<R>) -> Result<Self> {
        let s = Self::new_unchecked(layout, mat)?;
        s.validate()?;
        Ok(s)
    }

    /// Build checking only the dimension. For internal composition of
    /// steps that preserve the invariants.
    pub fn new_unchecked(layout: ModeLayout, mat: CMat<R>) -> Result<Self> {
        if mat.nrows() != layout.dim() || mat.ncols() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "matrix is {}×{}, layout dimension is {}",
                mat.nrows(),
                mat.ncols(),
                layout.dim()
            )));
        }
        Ok(Self { layout, mat })
    }

    pub fn from_pure(psi: &StateVector<R>) -> Self {
        psi.to_density()
    }

    /// Weighted mixture `Σ wᵢ ρᵢ`. Weights must be nonnegative and sum to 1
    /// within 1e-9.
    pub fn mixture(parts: &[(R, DensityOperator<R>)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("mixture of zero parts".into()))?;
        let layout = first.1.layout.clone();
        let d = layout.dim();
        let mut mat = CMat::<R>::zeros(d, d);
        let mut total = R::zero();
        for (w, rho) in parts {
            layout.check_same(&rho.layout)?;
            if as_f64(*w) < -1e-12 {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            total += *w;
            let wl = lift(*w);
            mat.iter_mut().zip(rho.mat.iter()).for_each(|(o, r)| *o += wl * r);
        }
        if (as_f64(total) - 1.0).abs() > 1e-9 {
            return Err(Error::ProbabilityNotNormalized { total: as_f64(total) });
        }
        Ok(Self { layout, mat })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat<R> {
        &self.mat
    }

    pub fn trace(&self) -> R {
        (0..self.mat.nrows()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn purity(&self) -> R {
        // Tr[ρ²] = Σ |ρ_ij|² for Hermitian ρ.
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Check Hermiticity (1e-10), unit trace (1e-10) and eigenvalue
    /// positivity (≥ −1e-10).
    pub fn validate(&self) -> Result<()> {
        let adj = self.mat.adjoint();
        let mut worst = R::zero();
        for (a, b) in self.mat.iter().zip(adj.iter()) {
            worst = worst.max(cnorm(a - b));
        }
        if as_f64(worst) > STATE_TOL {
            return Err(Error::NotHermitian { residual: as_f64(worst) });
        }
        let tr = self.trace();
        if (as_f64(tr) - 1.0).abs() > STATE_TOL {
            return Err(Error::ProbabilityNotNormalized { total: as_f64(tr) });
        }
        let eig = self.mat.clone().symmetric_eigen();
        let min = eig
            .eigenvalues
            .iter()
            .fold(R::zero(), |acc: R, &e| acc.min(e));
        if as_f64(min) < -STATE_TOL {
            return Err(Error::NegativeProbability { value: as_f64(min) });
        }
        Ok(())
    }

    /// Tensor product with another density operator.
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            layout: self.layout.concat(&other.layout),
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Partial trace keeping `keep_modes` (strictly increasing order).
    pub fn partial_trace(&self, keep_modes: &[usize]) -> Result<Self> {
        if keep_modes.is_empty() {
            return Err(Error::InvalidParameter("keep set must be non-empty".into()));
        }
        if keep_modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "keep_modes must be strictly increasing".into(),
            ));
        }
        for &m in keep_modes {
            self.layout.check_mode(m)?;
        }
        let keep_layout = self.layout.sublayout(keep_modes)?;
        let (_, groups) = self.layout.subindex_tables(keep_modes);
        let kd = keep_layout.dim();
        let mut mat = CMat::<R>::zeros(kd, kd);
        // Sum the (kept,kept) blocks over every traced configuration.
        for g in &groups {
            for (sj, &j) in g.iter().enumerate() {
                for (si, &i) in g.iter().enumerate() {
                    mat[(si, sj)] += self.mat[(i, j)];
                }
            }
        }
        Ok(Self { layout: keep_layout, mat })
    }

    /// `Tr[ρO]` with imaginary-residue check.
    pub fn expectation(&self, obs: &Observable<R>) -> Result<R> {
        self.layout.check_same(obs.layout())?;
        let o = obs.matrix();
        let mut z = C::new(R::zero(), R::zero());
        for j in 0..self.mat.ncols() {
            for i in 0..self.mat.nrows() {
                z += self.mat[(i, j)] * o[(j, i)];
            }
        }
        real_part(z)
    }

    /// `Tr[ρO²] − Tr[ρO]²`, clamped at 0 from below.
    pub fn variance(&self, obs: &Observable<R>) -> Result<R> {
        self.layout.check_same(obs.layout())?;
        let o = obs.matrix();
        let rho_o = &self.mat * o;
        let mut mean = C::new(R::zero(), R::zero());
        for i in 0..rho_o.nrows() {
            mean += rho_o[(i, i)];
        }
        let mean = real_part(mean)?;
        // Tr[ρO·O] = Σ_{ij} (ρO)_{ij} O_{ji}
        let mut second = C::new(R::zero(), R::zero());
        for j in 0..rho_o.ncols() {
            for i in 0..rho_o.nrows() {
                second += rho_o[(i, j)] * o[(j, i)];
            }
        }
        let second = real_part(second)?;
        Ok((second - mean * mean).max(R::zero()))
    }
}

fn real_part<R: Scalar>(z: C<R>) -> Result<R> {
    if as_f64(z.im).abs() > IMAG_TOL * (1.0 + as_f64(z.re).abs()) {
        Err(Error::ImaginaryResidue { imag: as_f64(z.im) })
    } else {
        Ok(z.re)
    }
}

/// `Tr[ρO]` — free-function form.
pub fn expectation<R: Scalar>(rho: &DensityOperator<R>, obs: &Observable<R>) -> Result<R> {
    rho.expectation(obs)
}

/// `Tr[ρO²] − Tr[ρO]²` — free-function form.
pub fn variance<R: Scalar>(rho: &DensityOperator<R>, obs: &Observable<R>) -> Result<R> {
    rho.variance(obs)
}

/// Expectation of a product of mode-local (possibly non-Hermitian)
/// operators, `⟨∏_k M_k⟩`, evaluated without building the product matrix.
///
/// `locals` pairs each mode with its local matrix; modes must be distinct.
/// Returns the complex expectation value.
pub(crate) fn product_expectation_pure<R: Scalar>(
    psi: &StateVector<R>,
    locals: &[(usize, CMat<R>)],
) -> Result<C<R>> {
    let mut w = psi.amp.clone();
    for (mode, m) in locals {
        psi.layout.check_mode(*mode)?;
        w = super::op::apply_local_to_vec(&psi.layout, &[*mode], m, &w);
    }
    Ok(psi
        .amp
        .iter()
        .zip(w.iter())
        .map(|(a, b)| a.conj() * b)
        .fold(C::new(R::zero(), R::zero()), |acc, z| acc + z))
}

/// Mixed-state version of [`product_expectation_pure`]: `Tr[ρ ∏_k M_k]`.
///
/// Uses `M[j,i] = ∏ M_k[j_k, i_k]` elementwise; cost O(d²·n) without any
/// large intermediate.
pub(crate) fn product_expectation_mixed<R: Scalar>(
    rho: &DensityOperator<R>,
    locals: &[(usize, CMat<R>)],
) -> Result<C<R>> {
    for (mode, _) in locals {
        rho.layout.check_mode(*mode)?;
    }
    let d = rho.layout.dim();
    // Precompute per-factor occupancy of each flat index.
    let occ_tables: Vec<(usize, &CMat<R>, Vec<usize>)> = locals
        .iter()
        .map(|(mode, m)| {
            let occ: Vec<usize> = (0..d).map(|i| rho.layout.occupancy(i, *mode)).collect();
            (*mode, m, occ)
        })
        .collect();
    let zero = C::<R>::new(R::zero(), R::zero());
    let mut acc = zero;
    for j in 0..d {
        for i in 0..d {
            let r = rho.mat[(i, j)];
            if r == zero {
                continue;
            }
            // M[j,i]: product over factors; off-support modes must agree.
            let mut elem = C::<R>::new(R::one(), R::zero());
            let mut ok = true;
            // modes not covered by `locals` act as identity: occupancies
            // must match there. Check via flat reconstruction: replace the
            // local occupancies of j by those of i and compare.
            let mut jj = j;
            for (mode, m, occ) in &occ_tables {
                let (oj, oi) = (occ[j], occ[i]);
                elem *= m[(oj, oi)];
                if elem == zero {
                    ok = false;
                    break;
                }
                // Rewrite occupancy of `mode` in jj from oj to oi.
                let trailing: usize = rho.layout.cutoffs()[mode + 1..]
                    .iter()
                    .map(|c| c + 1)
                    .product();
                jj = jj - oj * trailing + oi * trailing;
            }
            if ok && jj == i {
                acc += r * elem;
            }
        }
    }
    Ok(acc)
}
