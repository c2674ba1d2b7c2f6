use crate::error::{Error, Result};

/// Per-mode Fock cutoffs of a truncated multimode space.
///
/// Mode `k` carries the basis `|0⟩ … |N_k⟩` where `N_k = cutoffs[k] ≥ 1`.
/// Flat indices enumerate the tensor basis with mode 0 most significant
/// (Kronecker order), so `flat = ((n_0·d_1 + n_1)·d_2 + n_2)…` with
/// `d_k = N_k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    cutoffs: Vec<usize>,
}

impl ModeLayout {
    /// Layout from per-mode cutoffs. Every cutoff must be ≥ 1.
    pub fn new(cutoffs: &[usize]) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::InvalidParameter("layout needs at least one mode".into()));
        }
        if let Some(&bad) = cutoffs.iter().find(|&&c| c < 1) {
            return Err(Error::InvalidParameter(format!(
                "every cutoff must be ≥ 1 (got {bad})"
            )));
        }
        Ok(Self { cutoffs: cutoffs.to_vec() })
    }

    /// Uniform cutoff over `n_modes` modes.
    pub fn uniform(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::new(&vec![cutoff; n_modes])
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.cutoffs[mode]
    }

    /// Basis dimension of mode `k` (`cutoff + 1`).
    pub fn mode_dim(&self, mode: usize) -> usize {
        self.cutoffs[mode] + 1
    }

    /// Total dimension `∏ (N_k + 1)`.
    pub fn dim(&self) -> usize {
        self.cutoffs.iter().map(|c| c + 1).product()
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            Err(Error::ModeOutOfRange { mode, n_modes: self.n_modes() })
        } else {
            Ok(())
        }
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.cutoffs, other.cutoffs
            )))
        }
    }

    /// Flat index of a multi-index (mode 0 most significant).
    pub fn flat(&self, occ: &[usize]) -> usize {
        debug_assert_eq!(occ.len(), self.n_modes());
        occ.iter()
            .zip(&self.cutoffs)
            .fold(0, |acc, (&n, &c)| acc * (c + 1) + n)
    }

    /// Multi-index of a flat index.
    pub fn unflat(&self, mut i: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes()];
        for k in (0..self.n_modes()).rev() {
            let d = self.cutoffs[k] + 1;
            occ[k] = i % d;
            i /= d;
        }
        occ
    }

    /// Occupancy of one mode at a flat index (no full decomposition).
    pub fn occupancy(&self, flat: usize, mode: usize) -> usize {
        let trailing: usize = self.cutoffs[mode + 1..].iter().map(|c| c + 1).product();
        (flat / trailing) % (self.cutoffs[mode] + 1)
    }

    /// Concatenation with another layout (tensor-product space).
    pub fn concat(&self, other: &Self) -> Self {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        Self { cutoffs }
    }

    /// Layout restricted to a subset of modes, in the given order.
    pub fn sublayout(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        Self::new(&modes.iter().map(|&m| self.cutoffs[m]).collect::<Vec<_>>())
    }

    /// Iterator over all multi-indices in flat order.
    pub fn multi_indices(&self) -> Odometer {
        Odometer::new(self.cutoffs.iter().map(|c| c + 1).collect())
    }

    /// For a subset of modes (in a given order), the map from each flat
    /// index of the full space to the flat index of the sub-space, and the
    /// grouping of full indices by the configuration of the *other* modes.
    ///
    /// Returns `(sub_of, groups)` where `sub_of[i]` is the sub-index and
    /// `groups[r]` lists, for each rest-configuration `r`, the full flat
    /// indices ordered by sub-index. Used for applying mode-local matrices
    /// without materializing their full-space embedding.
    pub fn subindex_tables(&self, modes: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
        let sub = self.sublayout(modes).expect("modes validated by caller");
        let sub_dim = sub.dim();
        let dim = self.dim();
        let rest_modes: Vec<usize> =
            (0..self.n_modes()).filter(|m| !modes.contains(m)).collect();
        let rest_dim: usize = rest_modes.iter().map(|&m| self.mode_dim(m)).product();

        let mut sub_of = vec![0usize; dim];
        let mut rest_of = vec![0usize; dim];
        for (i, occ) in self.multi_indices().enumerate() {
            let s = modes
                .iter()
                .fold(0usize, |acc, &m| acc * self.mode_dim(m) + occ[m]);
            let r = rest_modes
                .iter()
                .fold(0usize, |acc, &m| acc * self.mode_dim(m) + occ[m]);
            sub_of[i] = s;
            rest_of[i] = r;
        }
        let mut groups = vec![vec![0usize; sub_dim]; rest_dim];
        for i in 0..dim {
            groups[rest_of[i]][sub_of[i]] = i;
        }
        (sub_of, groups)
    }
}

/// Odometer over mixed-radix multi-indices (first position most significant).
pub struct Odometer {
    dims: Vec<usize>,
    cur: Vec<usize>,
    started: bool,
    done: bool,
}

impl Odometer {
    pub fn new(dims: Vec<usize>) -> Self {
        let n = dims.len();
        let done = dims.iter().any(|&d| d == 0);
        Self { dims, cur: vec![0; n], started: false, done }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.cur.clone());
        }
        for k in (0..self.dims.len()).rev() {
            self.cur[k] += 1;
            if self.cur[k] < self.dims[k] {
                return Some(self.cur.clone());
            }
            self.cur[k] = 0;
        }
        self.done = true;
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_unflat_roundtrip() {
        let l = ModeLayout::new(&[2, 1, 3]).unwrap();
        assert_eq!(l.dim(), 3 * 2 * 4);
        for i in 0..l.dim() {
            let occ = l.unflat(i);
            assert_eq!(l.flat(&occ), i);
            for (m, &n) in occ.iter().enumerate() {
                assert_eq!(l.occupancy(i, m), n);
            }
        }
    }

    #[test]
    fn rejects_zero_cutoff() {
        assert!(ModeLayout::new(&[1, 0]).is_err());
        assert!(ModeLayout::new(&[]).is_err());
    }

    #[test]
    fn odometer_counts_in_flat_order() {
        let l = ModeLayout::new(&[1, 2]).unwrap();
        let idx: Vec<_> = l.multi_indices().map(|occ| l.flat(&occ)).collect();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn subindex_tables_cover_space() {
        let l = ModeLayout::new(&[1, 2, 1]).unwrap();
        let (sub_of, groups) = l.subindex_tables(&[2, 0]);
        assert_eq!(groups.len(), 3); // rest = mode 1
        let mut seen = vec![false; l.dim()];
        for g in &groups {
            assert_eq!(g.len(), 4);
            for (s, &i) in g.iter().enumerate() {
                assert_eq!(sub_of[i], s);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }
}
