//! Chain and ring Heisenberg Hamiltonians with two attached qubits.
//!
//! The total operator is H = H_bus + H_qubit-bus, where the bus couples
//! nearest neighbors (periodically for rings) and each qubit couples to one
//! bus site. Spin operators are s = σ/2, so a bond J s_i·s_j contributes
//! ±J/4 on the diagonal and J/2 on the spin-flip off-diagonal. Everything
//! commutes with total Sz, so operators never connect different sectors.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{SiteLayout, SpinBasis};
use crate::{Error, Result};

/// Reference intra-bus coupling; all energies are measured in these units.
pub const J0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Chain,
    Ring,
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Geometry::Chain => write!(f, "chain"),
            Geometry::Ring => write!(f, "ring"),
        }
    }
}

/// Full description of a bus-plus-qubits model.
///
/// `bus_couplings` holds one entry per bond: N-1 for a chain, N for a ring
/// (the wrap-around bond last). Attachment sites are 1-based, matching the
/// convention used in every user-facing interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub geometry: Geometry,
    pub n_bus: usize,
    pub bus_couplings: Vec<f64>,
    /// 1-based bus sites the qubits attach to: (i for A, j for B).
    pub attach: (usize, usize),
    /// (J_A, J_B) in units of J0.
    pub qubit_couplings: (f64, f64),
}

impl ModelSpec {
    /// Uniform bus with equal qubit couplings J_A = J_B = `lambda`·J0.
    pub fn uniform(
        geometry: Geometry,
        n_bus: usize,
        lambda: f64,
        attach: (usize, usize),
    ) -> Result<Self> {
        let n_bonds = match geometry {
            Geometry::Chain => n_bus.saturating_sub(1),
            Geometry::Ring => n_bus,
        };
        let spec = ModelSpec {
            geometry,
            n_bus,
            bus_couplings: vec![J0; n_bonds],
            attach,
            qubit_couplings: (lambda, lambda),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.geometry {
            Geometry::Chain => {
                if self.n_bus < 2 {
                    return Err(Error::InvalidModel("chain needs at least 2 bus sites".into()));
                }
            }
            Geometry::Ring => {
                if self.n_bus < 4 || !self.n_bus.is_multiple_of(2) {
                    return Err(Error::InvalidModel(format!(
                        "ring size must be even and >= 4, got {}",
                        self.n_bus
                    )));
                }
            }
        }
        if self.bus_couplings.len() != self.n_bonds() {
            return Err(Error::InvalidModel(format!(
                "expected {} bus couplings, got {}",
                self.n_bonds(),
                self.bus_couplings.len()
            )));
        }
        if self.bus_couplings.iter().any(|&j| j.is_nan() || j <= 0.0) {
            return Err(Error::InvalidModel(
                "bus couplings must be positive (antiferromagnetic)".into(),
            ));
        }
        if self.qubit_couplings.0 < 0.0 || self.qubit_couplings.1 < 0.0 {
            return Err(Error::InvalidModel("qubit couplings must be >= 0".into()));
        }
        self.layout()?;
        Ok(())
    }

    pub fn n_bonds(&self) -> usize {
        match self.geometry {
            Geometry::Chain => self.n_bus - 1,
            Geometry::Ring => self.n_bus,
        }
    }

    /// Perturbation ratios (λ_A, λ_B) = (J_A, J_B)/J0.
    pub fn lambda(&self) -> (f64, f64) {
        (self.qubit_couplings.0 / J0, self.qubit_couplings.1 / J0)
    }

    pub fn layout(&self) -> Result<SiteLayout> {
        SiteLayout::new(self.n_bus, self.attach.0, self.attach.1)
    }

    /// Bus bonds as 0-based `(site, site, J)` triples.
    pub fn bus_bonds(&self) -> Vec<(usize, usize, f64)> {
        let mut bonds: Vec<(usize, usize, f64)> = (0..self.n_bus - 1)
            .map(|i| (i, i + 1, self.bus_couplings[i]))
            .collect();
        if self.geometry == Geometry::Ring {
            bonds.push((self.n_bus - 1, 0, self.bus_couplings[self.n_bus - 1]));
        }
        bonds
    }

    /// True when the attachment sites have the same 1-based parity
    /// (both even nodes or both odd nodes).
    pub fn same_parity_attachment(&self) -> bool {
        (self.attach.0 % 2) == (self.attach.1 % 2)
    }

    /// SHA-256 of the canonical serialized spec; identifies a model in
    /// every output row and manifest.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(2 * digest.len());
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Real symmetric sparse operator attached to the basis it acts on.
///
/// Entries are stored as explicit (row, col, value) triples covering both
/// symmetric halves; duplicates are allowed and sum on application.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: Arc<SpinBasis>,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseOperator {
    pub fn basis(&self) -> &Arc<SpinBasis> {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    /// Zero operator on `basis`.
    pub fn zero(basis: Arc<SpinBasis>) -> Self {
        SparseOperator {
            basis,
            entries: Vec::new(),
        }
    }

    /// y = H x for complex amplitudes.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dimension());
        assert_eq!(y.len(), self.dimension());
        y.fill(Complex64::ZERO);
        for &(r, c, v) in &self.entries {
            y[r as usize] += v * x[c as usize];
        }
    }

    /// y = H x for real vectors.
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dimension());
        assert_eq!(y.len(), self.dimension());
        y.fill(0.0);
        for &(r, c, v) in &self.entries {
            y[r as usize] += v * x[c as usize];
        }
    }

    /// ⟨x|H|x⟩ (real for Hermitian H).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut acc = Complex64::ZERO;
        for &(r, c, v) in &self.entries {
            acc += x[r as usize].conj() * v * x[c as usize];
        }
        acc.re
    }

    /// Dense copy, summing duplicate entries.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let mut m = DMatrix::zeros(d, d);
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    /// Infinity norm (max absolute row sum); used to scale residual checks.
    pub fn norm_inf(&self) -> f64 {
        let mut row_sums = vec![0.0_f64; self.dimension()];
        for &(r, _, v) in &self.entries {
            row_sums[r as usize] += v.abs();
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest |H[r,c] - H[c,r]| over all pairs (test diagnostic).
    pub fn symmetry_error(&self) -> f64 {
        let dense = self.to_dense();
        let mut worst: f64 = 0.0;
        for r in 0..dense.nrows() {
            for c in 0..r {
                worst = worst.max((dense[(r, c)] - dense[(c, r)]).abs());
            }
        }
        worst
    }
}

/// Σ_bonds J s_i·s_j assembled over an arbitrary basis (full or sector).
///
/// Spin-flip terms preserve the total Sz, so on a sector basis every
/// generated configuration stays inside the basis.
pub fn heisenberg_bonds(
    basis: Arc<SpinBasis>,
    bonds: &[(usize, usize, f64)],
) -> Result<SparseOperator> {
    let n = basis.n_sites();
    for &(i, j, _) in bonds {
        if i >= n || j >= n {
            return Err(Error::SiteOutOfRange {
                site: i.max(j),
                n_sites: n,
            });
        }
        if i == j {
            return Err(Error::InvalidModel("bond endpoints must differ".into()));
        }
    }
    let mut entries = Vec::with_capacity(basis.dimension() * (bonds.len() + 1));
    for (row, &config) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        for &(i, j, coupling) in bonds {
            let bi = (config >> i) & 1;
            let bj = (config >> j) & 1;
            if bi == bj {
                diag += coupling / 4.0;
            } else {
                diag -= coupling / 4.0;
                let flipped = config ^ (1 << i) ^ (1 << j);
                let col = basis
                    .index_of(flipped)
                    .expect("spin flip conserves the sector");
                entries.push((row as u32, col as u32, coupling / 2.0));
            }
        }
        if diag != 0.0 {
            entries.push((row as u32, row as u32, diag));
        }
    }
    Ok(SparseOperator { basis, entries })
}

/// Isolated-bus Hamiltonian on a bus-only basis or on the full register.
pub fn build_bus_hamiltonian(spec: &ModelSpec, basis: Arc<SpinBasis>) -> Result<SparseOperator> {
    spec.validate()?;
    let n = basis.n_sites();
    if n != spec.n_bus && n != spec.n_bus + 2 {
        return Err(Error::BasisMismatch);
    }
    heisenberg_bonds(basis, &spec.bus_bonds())
}

/// Total Hamiltonian (bus plus both qubit couplings) on the full register.
pub fn build_total_hamiltonian(spec: &ModelSpec, basis: Arc<SpinBasis>) -> Result<SparseOperator> {
    spec.validate()?;
    let layout = spec.layout()?;
    if basis.n_sites() != layout.n_total() {
        return Err(Error::BasisMismatch);
    }
    let mut bonds = spec.bus_bonds();
    bonds.push((layout.attach_a(), layout.qubit_a_site(), spec.qubit_couplings.0));
    bonds.push((layout.attach_b(), layout.qubit_b_site(), spec.qubit_couplings.1));
    heisenberg_bonds(basis, &bonds)
}

/// Draw a disordered copy of `base`: each bus coupling is sampled from a
/// Gaussian centered on its target value with standard deviation `sigma_j`.
/// Non-positive draws are rejected and resampled so the bus stays
/// antiferromagnetic. Deterministic for a fixed seed.
pub fn sample_disordered_spec(base: &ModelSpec, sigma_j: f64, seed: u64) -> Result<ModelSpec> {
    sample_disordered_spec_with(base, sigma_j, seed, false)
}

/// Like [`sample_disordered_spec`], optionally disordering the qubit-bus
/// couplings as well.
pub fn sample_disordered_spec_with(
    base: &ModelSpec,
    sigma_j: f64,
    seed: u64,
    disorder_qubit_couplings: bool,
) -> Result<ModelSpec> {
    if sigma_j < 0.0 {
        return Err(Error::InvalidModel("sigma_j must be >= 0".into()));
    }
    if sigma_j == 0.0 {
        return Ok(base.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = base.clone();
    for j in spec.bus_couplings.iter_mut() {
        *j = positive_gaussian(*j, sigma_j, &mut rng);
    }
    if disorder_qubit_couplings {
        spec.qubit_couplings.0 = positive_gaussian(spec.qubit_couplings.0, sigma_j, &mut rng);
        spec.qubit_couplings.1 = positive_gaussian(spec.qubit_couplings.1, sigma_j, &mut rng);
    }
    Ok(spec)
}

fn positive_gaussian(mean: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let normal = Normal::new(mean, sigma).expect("finite gaussian parameters");
    loop {
        let draw = normal.sample(rng);
        if draw > 0.0 {
            return draw;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_site_chain() -> ModelSpec {
        ModelSpec::uniform(Geometry::Chain, 2, 0.0, (1, 2)).unwrap()
    }

    #[test]
    fn two_spin_bond_matrix() {
        let basis = Arc::new(SpinBasis::full(2).unwrap());
        let h = build_bus_hamiltonian(&two_site_chain(), basis).unwrap();
        let dense = h.to_dense();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.25, 0.0, 0.0, 0.0, //
                0.0, -0.25, 0.5, 0.0, //
                0.0, 0.5, -0.25, 0.0, //
                0.0, 0.0, 0.0, 0.25,
            ],
        );
        assert!((dense - expected).abs().max() < 1e-15);
    }

    #[test]
    fn total_hamiltonian_conserves_sz() {
        let spec = ModelSpec::uniform(Geometry::Chain, 5, 0.1, (1, 5)).unwrap();
        let basis = Arc::new(SpinBasis::full(7).unwrap());
        let h = build_total_hamiltonian(&spec, basis.clone()).unwrap();
        assert_eq!(h.dimension(), 128);
        for &(r, c, _) in h.entries() {
            assert_eq!(
                basis.config(r as usize).count_ones(),
                basis.config(c as usize).count_ones(),
                "entry crosses Sz sectors"
            );
        }
        assert!(h.symmetry_error() < 1e-15);
    }

    #[test]
    fn sector_block_dimension() {
        let spec = ModelSpec::uniform(Geometry::Chain, 5, 0.1, (1, 5)).unwrap();
        let basis = Arc::new(SpinBasis::with_sector(7, 1).unwrap());
        let h = build_total_hamiltonian(&spec, basis).unwrap();
        assert_eq!(h.dimension(), 35);
    }

    #[test]
    fn odd_ring_rejected() {
        assert!(ModelSpec::uniform(Geometry::Ring, 5, 0.1, (1, 3)).is_err());
        assert!(ModelSpec::uniform(Geometry::Ring, 6, 0.1, (1, 4)).is_ok());
    }

    #[test]
    fn attach_out_of_range_rejected() {
        assert!(ModelSpec::uniform(Geometry::Chain, 4, 0.1, (1, 5)).is_err());
        assert!(ModelSpec::uniform(Geometry::Chain, 4, 0.1, (0, 4)).is_err());
    }

    #[test]
    fn zero_disorder_is_identity() {
        let base = ModelSpec::uniform(Geometry::Chain, 5, 0.1, (1, 5)).unwrap();
        let sampled = sample_disordered_spec(&base, 0.0, 7).unwrap();
        assert_eq!(base, sampled);
    }

    #[test]
    fn disorder_is_deterministic_per_seed() {
        let base = ModelSpec::uniform(Geometry::Chain, 5, 0.1, (1, 5)).unwrap();
        let a = sample_disordered_spec(&base, 0.05, 42).unwrap();
        let b = sample_disordered_spec(&base, 0.05, 42).unwrap();
        let c = sample_disordered_spec(&base, 0.05, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.bus_couplings.iter().all(|&j| j > 0.0));
    }

    #[test]
    fn disorder_resampling_keeps_couplings_positive() {
        // A huge variance forces many rejected draws.
        let base = ModelSpec::uniform(Geometry::Chain, 8, 0.1, (1, 8)).unwrap();
        for seed in 0..20 {
            let s = sample_disordered_spec(&base, 10.0, seed).unwrap();
            assert!(s.bus_couplings.iter().all(|&j| j > 0.0));
        }
    }

    #[test]
    fn qubit_coupling_disorder_behind_flag() {
        let base = ModelSpec::uniform(Geometry::Chain, 4, 0.1, (1, 4)).unwrap();
        let plain = sample_disordered_spec(&base, 0.02, 9).unwrap();
        assert_eq!(plain.qubit_couplings, base.qubit_couplings);
        let full = sample_disordered_spec_with(&base, 0.02, 9, true).unwrap();
        assert_ne!(full.qubit_couplings, base.qubit_couplings);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ModelSpec::uniform(Geometry::Chain, 5, 0.1, (1, 5)).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.qubit_couplings.0 = 0.2;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn ring_bonds_close_the_loop() {
        let spec = ModelSpec::uniform(Geometry::Ring, 6, 0.1, (1, 4)).unwrap();
        let bonds = spec.bus_bonds();
        assert_eq!(bonds.len(), 6);
        assert_eq!(bonds[5], (5, 0, 1.0));
    }
}
