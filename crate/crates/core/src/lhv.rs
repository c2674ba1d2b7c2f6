//! Constructive hidden-variable machinery.
//!
//! A [`Phenomenon`] is a finite table of relative frequencies
//! `f(A, B | a, b)` for a fixed preparation. On top of it the module
//! provides:
//!
//! * [`signal_locality_check`] — does either side's marginal depend on
//!   the remote setting?
//! * [`deterministic_model`] — a deterministic (but nonlocal,
//!   setting-indexed) ensemble reproducing any phenomenon exactly,
//! * [`fine_construction`] — expansion of a stochastic locally-causal
//!   model into a locally *deterministic* ensemble over extended
//!   variables `(λ, λ_A, λ_B)` with identical frequencies,
//! * [`first_moment_model`] — an ensemble of real-valued assignments
//!   matching all n-site first-moment correlations and all single-site
//!   means exactly, showing first moments alone can never witness
//!   nonlocality. The construction is generic over the value ring, so a
//!   rational instantiation gives exact arithmetic.
//!
//! Hidden variables are always represented extensionally as finite atom
//! lists; [`lhv_frequencies`] turns a two-site ensemble back into a
//! `Phenomenon` for the inequality checkers.

use std::io::{Read, Write};
use std::ops::Neg;

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{joint_distribution_mixed, DensityOperator, Observable};

/// Tolerance for frequency-table normalization (each `(a, b)` slice).
const FREQ_TOL: f64 = 1e-9;
/// Tolerance for ensemble weight normalization.
const WEIGHT_TOL: f64 = 1e-12;
/// Largest number of explicit atoms any construction will materialize.
const ATOM_LIMIT: u128 = 4_000_000;

/// Relative frequencies `f(A, B | a, b)` of a bipartite experiment with
/// finitely many settings and real outcomes, for one preparation.
///
/// Outcome lists are per setting: `outcomes_a[a]` are the values Alice
/// can observe under setting `a`, independent of Bob's setting. The
/// table is indexed `freq[a][b][ia][ib]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenomenon {
    pub preparation: String,
    pub settings_a: Vec<String>,
    pub settings_b: Vec<String>,
    outcomes_a: Vec<Vec<f64>>,
    outcomes_b: Vec<Vec<f64>>,
    freq: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Phenomenon {
    /// Validate and build a frequency table. Each `(a, b)` slice must be
    /// nonnegative and sum to 1 within 1e-9; negative entries within
    /// round-off (−1e-12) are clamped to 0.
    pub fn new(
        preparation: impl Into<String>,
        settings_a: Vec<String>,
        settings_b: Vec<String>,
        outcomes_a: Vec<Vec<f64>>,
        outcomes_b: Vec<Vec<f64>>,
        mut freq: Vec<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self> {
        if settings_a.is_empty() || settings_b.is_empty() {
            return Err(Error::MalformedTable("need at least one setting per side".into()));
        }
        if outcomes_a.len() != settings_a.len() || outcomes_b.len() != settings_b.len() {
            return Err(Error::MalformedTable(
                "outcome lists must match the setting lists".into(),
            ));
        }
        if freq.len() != settings_a.len() {
            return Err(Error::MalformedTable("frequency table has wrong a-extent".into()));
        }
        for (a, row) in freq.iter_mut().enumerate() {
            if row.len() != settings_b.len() {
                return Err(Error::MalformedTable("frequency table has wrong b-extent".into()));
            }
            for (b, slice) in row.iter_mut().enumerate() {
                if slice.len() != outcomes_a[a].len()
                    || slice.iter().any(|r| r.len() != outcomes_b[b].len())
                {
                    return Err(Error::MalformedTable(format!(
                        "slice ({a}, {b}) does not match the outcome lists"
                    )));
                }
                let mut total = 0.0;
                for r in slice.iter_mut() {
                    for v in r.iter_mut() {
                        if *v < -1e-12 {
                            return Err(Error::NegativeProbability { value: *v });
                        }
                        *v = v.max(0.0);
                        total += *v;
                    }
                }
                if (total - 1.0).abs() > FREQ_TOL {
                    return Err(Error::ProbabilityNotNormalized { total });
                }
            }
        }
        Ok(Self {
            preparation: preparation.into(),
            settings_a,
            settings_b,
            outcomes_a,
            outcomes_b,
            freq,
        })
    }

    pub fn outcomes_a(&self, a: usize) -> &[f64] {
        &self.outcomes_a[a]
    }

    pub fn outcomes_b(&self, b: usize) -> &[f64] {
        &self.outcomes_b[b]
    }

    /// `f(A = outcomes_a[a][ia], B = outcomes_b[b][ib] | a, b)`.
    pub fn frequency(&self, a: usize, b: usize, ia: usize, ib: usize) -> f64 {
        self.freq[a][b][ia][ib]
    }

    /// Alice's marginal `f(A | a, b)` over her outcome list.
    pub fn marginal_a(&self, a: usize, b: usize) -> Vec<f64> {
        self.freq[a][b]
            .iter()
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Bob's marginal `f(B | a, b)` over his outcome list.
    pub fn marginal_b(&self, a: usize, b: usize) -> Vec<f64> {
        let nb = self.outcomes_b[b].len();
        (0..nb)
            .map(|ib| self.freq[a][b].iter().map(|row| row[ib]).sum())
            .collect()
    }

    /// The correlation `⟨A·B⟩` under settings `(a, b)`.
    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        let mut total = 0.0;
        for (ia, va) in self.outcomes_a[a].iter().enumerate() {
            for (ib, vb) in self.outcomes_b[b].iter().enumerate() {
                total += self.freq[a][b][ia][ib] * va * vb;
            }
        }
        total
    }

    /// Largest entrywise difference to another table of identical shape.
    pub fn max_difference(&self, other: &Phenomenon) -> Result<f64> {
        if self.settings_a.len() != other.settings_a.len()
            || self.settings_b.len() != other.settings_b.len()
            || self.outcomes_a != other.outcomes_a
            || self.outcomes_b != other.outcomes_b
        {
            return Err(Error::MalformedTable("tables have different shapes".into()));
        }
        let mut worst = 0.0f64;
        for (ra, oa) in self.freq.iter().zip(&other.freq) {
            for (rb, ob) in ra.iter().zip(oa) {
                for (rr, or) in rb.iter().zip(ob) {
                    for (v, w) in rr.iter().zip(or) {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Serialize as CSV with columns `a, b, A, B, f` (zero rows omitted).
    pub fn to_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for (a, la) in self.settings_a.iter().enumerate() {
            for (b, lb) in self.settings_b.iter().enumerate() {
                for (ia, va) in self.outcomes_a[a].iter().enumerate() {
                    for (ib, vb) in self.outcomes_b[b].iter().enumerate() {
                        let f = self.freq[a][b][ia][ib];
                        if f == 0.0 {
                            continue;
                        }
                        w.serialize(CsvRow {
                            a: la.clone(),
                            b: lb.clone(),
                            outcome_a: *va,
                            outcome_b: *vb,
                            f,
                        })?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a table written by [`Phenomenon::to_csv`]. Settings are
    /// ordered lexicographically, outcomes ascending; omitted
    /// combinations get frequency 0.
    pub fn from_csv<R: Read>(source: R, preparation: impl Into<String>) -> Result<Self> {
        let mut rows: Vec<CsvRow> = Vec::new();
        for record in csv::Reader::from_reader(source).deserialize() {
            rows.push(record?);
        }
        if rows.is_empty() {
            return Err(Error::MalformedTable("empty phenomenon table".into()));
        }
        let mut settings_a: Vec<String> = rows.iter().map(|r| r.a.clone()).collect();
        settings_a.sort();
        settings_a.dedup();
        let mut settings_b: Vec<String> = rows.iter().map(|r| r.b.clone()).collect();
        settings_b.sort();
        settings_b.dedup();
        let collect_outcomes = |labels: &[String], of: &dyn Fn(&CsvRow) -> (&str, f64)| {
            labels
                .iter()
                .map(|l| {
                    let mut vals: Vec<f64> = rows
                        .iter()
                        .map(|r| of(r))
                        .filter(|(lab, _)| lab == l)
                        .map(|(_, v)| v)
                        .collect();
                    vals.sort_by(|x, y| x.total_cmp(y));
                    vals.dedup();
                    vals
                })
                .collect::<Vec<_>>()
        };
        let outcomes_a = collect_outcomes(&settings_a, &|r| (r.a.as_str(), r.outcome_a));
        let outcomes_b = collect_outcomes(&settings_b, &|r| (r.b.as_str(), r.outcome_b));
        let mut freq = vec![Vec::new(); settings_a.len()];
        for (a, row) in freq.iter_mut().enumerate() {
            *row = (0..settings_b.len())
                .map(|b| vec![vec![0.0; outcomes_b[b].len()]; outcomes_a[a].len()])
                .collect();
        }
        let index = |labels: &[String], l: &str| labels.iter().position(|x| x == l).unwrap();
        for r in &rows {
            let a = index(&settings_a, &r.a);
            let b = index(&settings_b, &r.b);
            let ia = outcomes_a[a].iter().position(|v| *v == r.outcome_a).unwrap();
            let ib = outcomes_b[b].iter().position(|v| *v == r.outcome_b).unwrap();
            freq[a][b][ia][ib] += r.f;
        }
        Self::new(preparation, settings_a, settings_b, outcomes_a, outcomes_b, freq)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    a: String,
    b: String,
    #[serde(rename = "A")]
    outcome_a: f64,
    #[serde(rename = "B")]
    outcome_b: f64,
    f: f64,
}

/// Measure a density operator with every pair of local observables and
/// tabulate the outcome frequencies. Observables in `obs_a` must act on
/// different modes from those in `obs_b`, so every cross pair commutes.
pub fn quantum_phenomenon(
    rho: &DensityOperator<f64>,
    obs_a: &[&Observable<f64>],
    obs_b: &[&Observable<f64>],
    preparation: impl Into<String>,
) -> Result<Phenomenon> {
    let mut outcomes_a: Vec<Vec<f64>> = Vec::new();
    let mut outcomes_b: Vec<Vec<f64>> = Vec::new();
    let mut freq = Vec::new();
    for (a, oa) in obs_a.iter().enumerate() {
        let mut row = Vec::new();
        for (b, ob) in obs_b.iter().enumerate() {
            let d = joint_distribution_mixed(rho, &[oa, ob])?;
            let na = d.axis(0).outcomes.len();
            let nb = d.axis(1).outcomes.len();
            if a == 0 && outcomes_b.len() <= b {
                outcomes_b.push(d.axis(1).outcomes.clone());
            }
            if b == 0 && outcomes_a.len() <= a {
                outcomes_a.push(d.axis(0).outcomes.clone());
            }
            let probs = d.probabilities();
            let mut slice = vec![vec![0.0; nb]; na];
            for ia in 0..na {
                for ib in 0..nb {
                    slice[ia][ib] = probs[ia * nb + ib];
                }
            }
            row.push(slice);
        }
        freq.push(row);
    }
    Phenomenon::new(
        preparation,
        obs_a.iter().map(|o| o.label().to_string()).collect(),
        obs_b.iter().map(|o| o.label().to_string()).collect(),
        outcomes_a,
        outcomes_b,
        freq,
    )
}

/// Result of [`signal_locality_check`]: the largest shift either side's
/// marginal suffers when only the remote setting changes.
#[derive(Debug, Clone, Copy)]
pub struct SignalLocalityReport {
    /// max over `a, A, (b, b')` of `|f(A|a,b) − f(A|a,b')|`.
    pub a_side: f64,
    /// The mirrored quantity for Bob's marginals.
    pub b_side: f64,
    pub satisfied: bool,
}

impl SignalLocalityReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.a_side.max(self.b_side)
    }
}

/// Check that each side's outcome marginals are independent of the
/// remote setting (satisfied ⇔ max discrepancy < 1e-9).
pub fn signal_locality_check(ph: &Phenomenon) -> SignalLocalityReport {
    let mut a_side = 0.0f64;
    for a in 0..ph.settings_a.len() {
        let marginals: Vec<Vec<f64>> =
            (0..ph.settings_b.len()).map(|b| ph.marginal_a(a, b)).collect();
        for m in &marginals[1..] {
            for (v, w) in m.iter().zip(&marginals[0]) {
                a_side = a_side.max((v - w).abs());
            }
        }
    }
    let mut b_side = 0.0f64;
    for b in 0..ph.settings_b.len() {
        let marginals: Vec<Vec<f64>> =
            (0..ph.settings_a.len()).map(|a| ph.marginal_b(a, b)).collect();
        for m in &marginals[1..] {
            for (v, w) in m.iter().zip(&marginals[0]) {
                b_side = b_side.max((v - w).abs());
            }
        }
    }
    let satisfied = a_side.max(b_side) < FREQ_TOL;
    SignalLocalityReport { a_side, b_side, satisfied }
}

/// Deterministic but nonlocal hidden-variable model: under settings
/// `(a, b)` an atom `(weight, ia, ib)` is drawn with probability equal
/// to the observed frequency and responds with its fixed outcome pair.
/// Both the response and the atom distribution depend on the settings.
#[derive(Debug, Clone)]
pub struct DeterministicEnsemble {
    /// `atoms[a][b]` lists `(weight, ia, ib)` with weights summing to 1.
    pub atoms: Vec<Vec<Vec<(f64, usize, usize)>>>,
}

impl DeterministicEnsemble {
    /// Rebuild the frequency table the model induces, on the shape of a
    /// template phenomenon.
    pub fn induced(&self, template: &Phenomenon) -> Result<Phenomenon> {
        let mut freq = Vec::with_capacity(self.atoms.len());
        for (a, row) in self.atoms.iter().enumerate() {
            let mut out_row = Vec::with_capacity(row.len());
            for (b, atoms) in row.iter().enumerate() {
                let na = template.outcomes_a[a].len();
                let nb = template.outcomes_b[b].len();
                let mut slice = vec![vec![0.0; nb]; na];
                for &(w, ia, ib) in atoms {
                    slice[ia][ib] += w;
                }
                out_row.push(slice);
            }
            freq.push(out_row);
        }
        Phenomenon::new(
            template.preparation.clone(),
            template.settings_a.clone(),
            template.settings_b.clone(),
            template.outcomes_a.clone(),
            template.outcomes_b.clone(),
            freq,
        )
    }
}

/// Build the universal deterministic model of a phenomenon: one atom
/// per observed outcome pair per setting pair, weighted by its
/// frequency (zero-frequency pairs are dropped). Every phenomenon —
/// signalling or not — is reproduced exactly; determinism alone
/// excludes nothing.
pub fn deterministic_model(ph: &Phenomenon) -> DeterministicEnsemble {
    let atoms = ph
        .freq
        .iter()
        .map(|row| {
            row.iter()
                .map(|slice| {
                    let mut list = Vec::new();
                    for (ia, r) in slice.iter().enumerate() {
                        for (ib, &w) in r.iter().enumerate() {
                            if w > 0.0 {
                                list.push((w, ia, ib));
                            }
                        }
                    }
                    list
                })
                .collect()
        })
        .collect();
    DeterministicEnsemble { atoms }
}

/// A stochastic locally-causal model: finitely many hidden states `λ`
/// with local response distributions `P(A | a, λ)` and `P(B | b, λ)`.
#[derive(Debug, Clone)]
pub struct StochasticLocalModel {
    /// `P(λ)`, nonnegative, summing to 1 within 1e-12.
    pub weights: Vec<f64>,
    /// Outcome values per setting on each side.
    pub outcomes_a: Vec<Vec<f64>>,
    pub outcomes_b: Vec<Vec<f64>>,
    /// `response_a[λ][a][ia] = P(A = outcomes_a[a][ia] | a, λ)`.
    pub response_a: Vec<Vec<Vec<f64>>>,
    pub response_b: Vec<Vec<Vec<f64>>>,
}

impl StochasticLocalModel {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::NegativeProbability {
                value: self.weights.iter().cloned().fold(f64::INFINITY, f64::min),
            });
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::ProbabilityNotNormalized { total });
        }
        if self.response_a.len() != self.weights.len()
            || self.response_b.len() != self.weights.len()
        {
            return Err(Error::MalformedTable("one response table per λ per side".into()));
        }
        let check_side = |resp: &[Vec<Vec<f64>>], outs: &[Vec<f64>], side: &str| -> Result<()> {
            for per_lambda in resp {
                if per_lambda.len() != outs.len() {
                    return Err(Error::MalformedTable(format!(
                        "{side}-side response table must cover every setting"
                    )));
                }
                for (s, dist) in per_lambda.iter().enumerate() {
                    if dist.len() != outs[s].len() {
                        return Err(Error::MalformedTable(format!(
                            "{side}-side response for setting {s} does not match its outcomes"
                        )));
                    }
                    if dist.iter().any(|p| *p < 0.0) {
                        return Err(Error::NegativeProbability {
                            value: dist.iter().cloned().fold(f64::INFINITY, f64::min),
                        });
                    }
                    let t: f64 = dist.iter().sum();
                    if (t - 1.0).abs() > WEIGHT_TOL {
                        return Err(Error::ProbabilityNotNormalized { total: t });
                    }
                }
            }
            Ok(())
        };
        check_side(&self.response_a, &self.outcomes_a, "a")?;
        check_side(&self.response_b, &self.outcomes_b, "b")
    }

    /// The frequency table the model predicts:
    /// `f(A, B | a, b) = Σ_λ P(λ) P(A | a, λ) P(B | b, λ)`.
    pub fn frequencies(&self, preparation: impl Into<String>) -> Result<Phenomenon> {
        self.validate()?;
        let ma = self.outcomes_a.len();
        let mb = self.outcomes_b.len();
        let mut freq = Vec::with_capacity(ma);
        for a in 0..ma {
            let mut row = Vec::with_capacity(mb);
            for b in 0..mb {
                let na = self.outcomes_a[a].len();
                let nb = self.outcomes_b[b].len();
                let mut slice = vec![vec![0.0; nb]; na];
                for (l, &w) in self.weights.iter().enumerate() {
                    for ia in 0..na {
                        for ib in 0..nb {
                            slice[ia][ib] +=
                                w * self.response_a[l][a][ia] * self.response_b[l][b][ib];
                        }
                    }
                }
                row.push(slice);
            }
            freq.push(row);
        }
        Phenomenon::new(
            preparation,
            (0..ma).map(|a| format!("a{a}")).collect(),
            (0..mb).map(|b| format!("b{b}")).collect(),
            self.outcomes_a.clone(),
            self.outcomes_b.clone(),
            freq,
        )
    }
}

/// One hidden state of an [`LhvEnsemble`]: a weight and a deterministic
/// local assignment `values[site][setting]` of a real outcome to every
/// setting of every site.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvAtom<T> {
    pub weight: T,
    pub values: Vec<Vec<T>>,
}

/// A locally deterministic hidden-variable ensemble: a finite mixture
/// of atoms, each fixing one outcome per (site, setting). Locality is
/// structural — an atom's response at a site depends on that site's
/// setting alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvEnsemble<T> {
    pub atoms: Vec<LhvAtom<T>>,
}

impl<T: Clone + Num> LhvEnsemble<T> {
    pub fn n_sites(&self) -> usize {
        self.atoms.first().map_or(0, |a| a.values.len())
    }

    pub fn n_settings(&self, site: usize) -> usize {
        self.atoms.first().map_or(0, |a| a.values[site].len())
    }

    /// Every atom must assign one outcome per (site, setting), with a
    /// common shape.
    pub fn check_shape(&self) -> Result<()> {
        let first = self
            .atoms
            .first()
            .ok_or_else(|| Error::MissingAssignment("empty ensemble".into()))?;
        let shape: Vec<usize> = first.values.iter().map(Vec::len).collect();
        for (k, atom) in self.atoms.iter().enumerate() {
            let this: Vec<usize> = atom.values.iter().map(Vec::len).collect();
            if this != shape {
                return Err(Error::MissingAssignment(format!(
                    "atom {k} assigns {this:?} outcomes per site, expected {shape:?}"
                )));
            }
        }
        Ok(())
    }

    /// `⟨∏_site X_site^{settings[site]}⟩` over the ensemble.
    pub fn correlation(&self, settings: &[usize]) -> Result<T> {
        self.check_shape()?;
        if settings.len() != self.n_sites() {
            return Err(Error::MissingAssignment(format!(
                "need one setting per site ({} given, {} sites)",
                settings.len(),
                self.n_sites()
            )));
        }
        let mut total = T::zero();
        for atom in &self.atoms {
            let mut prod = atom.weight.clone();
            for (site, &s) in settings.iter().enumerate() {
                prod = prod * atom.values[site][s].clone();
            }
            total = total + prod;
        }
        Ok(total)
    }

    /// `⟨X_site^setting⟩` over the ensemble.
    pub fn single_moment(&self, site: usize, setting: usize) -> Result<T> {
        self.check_shape()?;
        let mut total = T::zero();
        for atom in &self.atoms {
            total = total + atom.weight.clone() * atom.values[site][setting].clone();
        }
        Ok(total)
    }
}

impl LhvEnsemble<f64> {
    /// Weights must be nonnegative and sum to 1 within 1e-12.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if let Some(w) = self.atoms.iter().map(|a| a.weight).find(|w| *w < 0.0) {
            return Err(Error::NegativeProbability { value: w });
        }
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::ProbabilityNotNormalized { total });
        }
        Ok(())
    }
}

/// Expand a stochastic locally-causal model into a locally
/// deterministic ensemble over `λ' = (λ, λ_A, λ_B)`, where `λ_A` and
/// `λ_B` run over all deterministic response functions and carry weight
/// `P(λ)·∏_a P(λ_A(a)|a,λ)·∏_b P(λ_B(b)|b,λ)`. The induced frequencies
/// equal the input model's exactly; zero-weight branches are dropped.
pub fn fine_construction(model: &StochasticLocalModel) -> Result<LhvEnsemble<f64>> {
    model.validate()?;
    let branch_count = |outs: &[Vec<f64>]| -> u128 {
        outs.iter().map(|o| o.len() as u128).product()
    };
    let atoms_needed = model.weights.len() as u128
        * branch_count(&model.outcomes_a)
        * branch_count(&model.outcomes_b);
    if atoms_needed > ATOM_LIMIT {
        return Err(Error::TableTooLarge { atoms: atoms_needed, limit: ATOM_LIMIT });
    }
    // All deterministic response functions setting → outcome index on
    // one side, with the probability each draws under a fixed λ.
    let branches = |resp: &[Vec<f64>], outs: &[Vec<f64>]| -> Vec<(f64, Vec<usize>)> {
        let mut list = vec![(1.0, Vec::new())];
        for (s, dist) in resp.iter().enumerate() {
            let mut next = Vec::with_capacity(list.len() * outs[s].len());
            for (prob, prefix) in &list {
                for (i, p) in dist.iter().enumerate() {
                    let w = prob * p;
                    if w > 0.0 {
                        let mut choice = prefix.clone();
                        choice.push(i);
                        next.push((w, choice));
                    }
                }
            }
            list = next;
        }
        list
    };
    let mut atoms = Vec::new();
    for (l, &wl) in model.weights.iter().enumerate() {
        if wl == 0.0 {
            continue;
        }
        let branches_a = branches(&model.response_a[l], &model.outcomes_a);
        let branches_b = branches(&model.response_b[l], &model.outcomes_b);
        for (wa, fa) in &branches_a {
            for (wb, fb) in &branches_b {
                let values_a: Vec<f64> =
                    fa.iter().enumerate().map(|(a, &i)| model.outcomes_a[a][i]).collect();
                let values_b: Vec<f64> =
                    fb.iter().enumerate().map(|(b, &i)| model.outcomes_b[b][i]).collect();
                atoms.push(LhvAtom {
                    weight: wl * wa * wb,
                    values: vec![values_a, values_b],
                });
            }
        }
    }
    let ens = LhvEnsemble { atoms };
    ens.validate()?;
    Ok(ens)
}

/// Tabulate the frequencies a two-site ensemble induces for every
/// setting pair. Outcome lists are the distinct assigned values per
/// (site, setting) in ascending order; the result always passes
/// [`signal_locality_check`] because each atom's response is local.
pub fn lhv_frequencies(ens: &LhvEnsemble<f64>, preparation: impl Into<String>) -> Result<Phenomenon> {
    ens.validate()?;
    if ens.n_sites() != 2 {
        return Err(Error::MalformedTable(format!(
            "frequency tables are bipartite; the ensemble has {} sites",
            ens.n_sites()
        )));
    }
    let outcome_list = |site: usize, setting: usize| -> Vec<f64> {
        let mut vals: Vec<f64> =
            ens.atoms.iter().map(|a| a.values[site][setting]).collect();
        vals.sort_by(|x, y| x.total_cmp(y));
        vals.dedup();
        vals
    };
    let ma = ens.n_settings(0);
    let mb = ens.n_settings(1);
    let outcomes_a: Vec<Vec<f64>> = (0..ma).map(|a| outcome_list(0, a)).collect();
    let outcomes_b: Vec<Vec<f64>> = (0..mb).map(|b| outcome_list(1, b)).collect();
    let mut freq = Vec::with_capacity(ma);
    for a in 0..ma {
        let mut row = Vec::with_capacity(mb);
        for b in 0..mb {
            let mut slice = vec![vec![0.0; outcomes_b[b].len()]; outcomes_a[a].len()];
            for atom in &ens.atoms {
                let ia = outcomes_a[a]
                    .iter()
                    .position(|v| *v == atom.values[0][a])
                    .expect("assigned value is in its own outcome list");
                let ib = outcomes_b[b]
                    .iter()
                    .position(|v| *v == atom.values[1][b])
                    .expect("assigned value is in its own outcome list");
                slice[ia][ib] += atom.weight;
            }
            row.push(slice);
        }
        freq.push(row);
    }
    Phenomenon::new(
        preparation,
        (0..ma).map(|a| format!("a{a}")).collect(),
        (0..mb).map(|b| format!("b{b}")).collect(),
        outcomes_a,
        outcomes_b,
        freq,
    )
}

/// Target moments for [`first_moment_model`]: every full n-site
/// first-moment correlation plus every single-site mean.
#[derive(Debug, Clone)]
pub struct FirstMomentTargets<T> {
    /// Number of settings per site.
    pub site_settings: Vec<usize>,
    /// `⟨∏_i X_i^{j_i}⟩` for every setting combination, row-major (the
    /// last site's setting varies fastest); length `∏ m_i`.
    pub joint: Vec<T>,
    /// `⟨X_i^j⟩` per site and setting.
    pub single: Vec<Vec<T>>,
}

impl<T> FirstMomentTargets<T> {
    fn combos(&self) -> usize {
        self.site_settings.iter().product()
    }

    fn check(&self) -> Result<()> {
        if self.site_settings.is_empty() || self.site_settings.contains(&0) {
            return Err(Error::MalformedTable("every site needs at least one setting".into()));
        }
        if self.joint.len() != self.combos() {
            return Err(Error::MalformedTable(format!(
                "joint table has {} entries, expected {}",
                self.joint.len(),
                self.combos()
            )));
        }
        if self.single.len() != self.site_settings.len()
            || self
                .single
                .iter()
                .zip(&self.site_settings)
                .any(|(s, m)| s.len() != *m)
        {
            return Err(Error::MalformedTable(
                "single-site table must list one mean per (site, setting)".into(),
            ));
        }
        Ok(())
    }
}

/// Build an ensemble of real-valued local assignments whose n-site
/// correlations and single-site means equal the targets exactly.
///
/// For each setting combination `(j_1, …, j_n)` one base atom assigns 1
/// to `X_i^{j_i}` on all sites but the last and `K·target` on the last
/// (K = number of atoms), zero elsewhere, so only that combination's
/// correlation picks it up. One correction atom per (site, setting)
/// then absorbs the base atoms' stray contribution to the single-site
/// mean; carrying a single nonzero value, it cannot touch any multi-site
/// correlation. All atoms share weight 1/K, so with a rational value
/// type the reproduction is exact.
pub fn first_moment_model<T>(targets: &FirstMomentTargets<T>) -> Result<LhvEnsemble<T>>
where
    T: Clone + Num + Neg<Output = T>,
{
    targets.check()?;
    let n = targets.site_settings.len();
    let combos = targets.combos();
    let corrections: usize = targets.site_settings.iter().sum();
    let count = combos as u128 + corrections as u128;
    if count > ATOM_LIMIT {
        return Err(Error::TableTooLarge { atoms: count, limit: ATOM_LIMIT });
    }
    let k = combos + corrections;
    let from_usize = |u: usize| -> T {
        let mut acc = T::zero();
        for _ in 0..u {
            acc = acc + T::one();
        }
        acc
    };
    let k_t = from_usize(k);
    let weight = T::one() / k_t.clone();
    let zero_values = || -> Vec<Vec<T>> {
        targets
            .site_settings
            .iter()
            .map(|m| vec![T::zero(); *m])
            .collect()
    };
    let mut atoms = Vec::with_capacity(k);
    // Base atoms, one per setting combination.
    let mut combo = vec![0usize; n];
    for flat in 0..combos {
        let mut values = zero_values();
        for site in 0..n - 1 {
            values[site][combo[site]] = T::one();
        }
        values[n - 1][combo[n - 1]] = k_t.clone() * targets.joint[flat].clone();
        atoms.push(LhvAtom { weight: weight.clone(), values });
        for site in (0..n).rev() {
            combo[site] += 1;
            if combo[site] < targets.site_settings[site] {
                break;
            }
            combo[site] = 0;
        }
    }
    // Stray single-site means the base atoms already produce.
    let mut stray: Vec<Vec<T>> = zero_values();
    for atom in &atoms {
        for (site, per_site) in atom.values.iter().enumerate() {
            for (setting, v) in per_site.iter().enumerate() {
                stray[site][setting] =
                    stray[site][setting].clone() + weight.clone() * v.clone();
            }
        }
    }
    // Correction atoms, one per (site, setting).
    for site in 0..n {
        for setting in 0..targets.site_settings[site] {
            let mut values = zero_values();
            values[site][setting] = k_t.clone()
                * (targets.single[site][setting].clone() - stray[site][setting].clone());
            atoms.push(LhvAtom { weight: weight.clone(), values });
        }
    }
    Ok(LhvEnsemble { atoms })
}
