//! Spin-1/2 product bases, total-Sz sectors, and partial traces.
//!
//! Configurations are stored as integer bitstrings: bit `k` set means site
//! `k` is "up" (Sz contribution +1/2), which doubles as qubit logical |0⟩.
//! A basis is either the full 2^n product space or the slice with fixed
//! total Sz; states are kept sorted by integer value so index lookup is a
//! binary search (O(1) for the full basis).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::PureState;
use crate::{Error, Result};

/// Largest register the crate supports (keeps configurations in `u32`).
pub const MAX_SITES: usize = 24;

/// Norm deviation beyond which a state is rejected as input.
pub const NORM_TOL: f64 = 1e-8;

/// Enumerated computational basis of an n-site spin-1/2 register,
/// optionally restricted to one total-Sz sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinBasis {
    n_sites: usize,
    /// Twice the total Sz of the sector (kept integral), `None` for the
    /// full product space.
    twice_sz: Option<i32>,
    /// Configurations in strictly ascending integer order.
    states: Vec<u32>,
}

impl SpinBasis {
    /// Full 2^n product basis.
    pub fn full(n_sites: usize) -> Result<Self> {
        check_site_count(n_sites)?;
        Ok(SpinBasis {
            n_sites,
            twice_sz: None,
            states: (0..1u32 << n_sites).collect(),
        })
    }

    /// Basis of the sector with total Sz = `twice_sz`/2.
    ///
    /// The sector holds configurations with n_sites/2 + Sz up-spins; a
    /// `twice_sz` that does not yield an integer in 0..=n_sites is rejected.
    pub fn with_sector(n_sites: usize, twice_sz: i32) -> Result<Self> {
        check_site_count(n_sites)?;
        let doubled = n_sites as i32 + twice_sz;
        if doubled < 0 || doubled % 2 != 0 || doubled / 2 > n_sites as i32 {
            return Err(Error::InvalidSector { n_sites, twice_sz });
        }
        let n_up = (doubled / 2) as u32;
        Ok(SpinBasis {
            n_sites,
            twice_sz: Some(twice_sz),
            states: enumerate_fixed_popcount(n_sites as u32, n_up),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Twice the total Sz of the sector, or `None` for the full space.
    pub fn twice_sz(&self) -> Option<i32> {
        self.twice_sz
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    /// Configurations in ascending order.
    pub fn states(&self) -> &[u32] {
        &self.states
    }

    /// Configuration at ordinal `index`.
    pub fn config(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Ordinal of `config`, if it belongs to this basis.
    pub fn index_of(&self, config: u32) -> Option<usize> {
        match self.twice_sz {
            // Full basis: states[i] == i.
            None => ((config as usize) < self.states.len()).then_some(config as usize),
            Some(_) => self.states.binary_search(&config).ok(),
        }
    }

    /// True if the two bases span the same space.
    pub fn same_space(&self, other: &SpinBasis) -> bool {
        self.n_sites == other.n_sites && self.twice_sz == other.twice_sz
    }
}

fn check_site_count(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::SiteCount { n_sites });
    }
    Ok(())
}

/// All n-bit words with exactly `n_up` bits set, ascending (Gosper's hack).
fn enumerate_fixed_popcount(n_bits: u32, n_up: u32) -> Vec<u32> {
    if n_up == 0 {
        return vec![0];
    }
    let limit = 1u64 << n_bits;
    let mut states = Vec::with_capacity(binomial(n_bits as usize, n_up as usize));
    let mut v = (1u64 << n_up) - 1;
    while v < limit {
        states.push(v as u32);
        let t = v | (v - 1);
        v = (t + 1) | (((!t & t.wrapping_add(1)) - 1) >> (v.trailing_zeros() + 1));
    }
    states
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Register layout for a bus of `n_bus` sites with two attached qubits.
///
/// Bus sites occupy register positions 0..n_bus; qubit A sits at `n_bus`,
/// qubit B at `n_bus + 1`. Attachment sites follow the 1-based convention
/// in user-facing interfaces and are stored 0-based here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteLayout {
    n_bus: usize,
    attach_a: usize,
    attach_b: usize,
}

impl SiteLayout {
    /// Build from 1-based attachment sites.
    pub fn new(n_bus: usize, attach_a_1based: usize, attach_b_1based: usize) -> Result<Self> {
        for site in [attach_a_1based, attach_b_1based] {
            if site == 0 || site > n_bus {
                return Err(Error::SiteOutOfRange {
                    site,
                    n_sites: n_bus,
                });
            }
        }
        Ok(SiteLayout {
            n_bus,
            attach_a: attach_a_1based - 1,
            attach_b: attach_b_1based - 1,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    /// Total register size (bus + two qubits).
    pub fn n_total(&self) -> usize {
        self.n_bus + 2
    }

    pub fn qubit_a_site(&self) -> usize {
        self.n_bus
    }

    pub fn qubit_b_site(&self) -> usize {
        self.n_bus + 1
    }

    /// 0-based bus site qubit A couples to.
    pub fn attach_a(&self) -> usize {
        self.attach_a
    }

    /// 0-based bus site qubit B couples to.
    pub fn attach_b(&self) -> usize {
        self.attach_b
    }
}

/// Hermitian, trace-one matrix over a subset of sites.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    data: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub(crate) fn from_matrix(data: DMatrix<Complex64>) -> Self {
        DensityMatrix { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    /// Largest entrywise deviation from ρ = ρ†.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let d = (self.data[(r, c)] - self.data[(c, r)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue (negative values flag a positivity violation).
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.data.clone().symmetric_eigen();
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ⟨φ|ρ|φ⟩ for a pure target |φ⟩ given by its amplitudes.
    pub fn expectation(&self, phi: &[Complex64]) -> f64 {
        assert_eq!(phi.len(), self.dim(), "target dimension mismatch");
        let mut acc = Complex64::ZERO;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                acc += phi[r].conj() * self.data[(r, c)] * phi[c];
            }
        }
        acc.re
    }
}

/// Reduced density matrix of the sites in `keep`, tracing out the rest.
///
/// Bit `b` of the reduced index corresponds to site `keep[b]`. The reduction
/// works on full or sector bases; no density matrix of the whole register is
/// ever materialized.
pub fn partial_trace(state: &PureState, keep: &[usize]) -> Result<DensityMatrix> {
    let basis = state.basis();
    let n = basis.n_sites();
    if keep.is_empty() {
        return Err(Error::InvalidDensityMatrix("empty keep set".into()));
    }
    for &site in keep {
        if site >= n {
            return Err(Error::SiteOutOfRange { site, n_sites: n });
        }
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(Error::InvalidDensityMatrix("duplicate site in keep set".into()));
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }

    if keep.len() == 1 {
        return Ok(single_site_reduction(state, keep[0]));
    }

    let n_keep = keep.len();
    let dim_keep = 1usize << n_keep;
    let env: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
    let dim_env = 1usize << env.len();

    // Reshape amplitudes into (environment, kept) blocks, then contract
    // over the environment index.
    let mut blocks = vec![Complex64::ZERO; dim_env * dim_keep];
    for (idx, &config) in basis.states().iter().enumerate() {
        let k = gather_bits(config, keep);
        let e = gather_bits(config, &env);
        blocks[e * dim_keep + k] += state.amplitude(idx);
    }

    let mut rho = DMatrix::zeros(dim_keep, dim_keep);
    for e in 0..dim_env {
        let row = &blocks[e * dim_keep..(e + 1) * dim_keep];
        for r in 0..dim_keep {
            if row[r] == Complex64::ZERO {
                continue;
            }
            for c in 0..dim_keep {
                rho[(r, c)] += row[r] * row[c].conj();
            }
        }
    }
    Ok(DensityMatrix::from_matrix(rho))
}

/// One-pass 2x2 reduction onto a single site; allocation-free apart from
/// the returned matrix.
fn single_site_reduction(state: &PureState, site: usize) -> DensityMatrix {
    let basis = state.basis();
    let mask = 1u32 << site;
    // Index 0 of the reduced matrix is "up" (logical |0⟩).
    let mut p_up = 0.0_f64;
    let mut p_dn = 0.0_f64;
    let mut coh = Complex64::ZERO;
    for (idx, &config) in basis.states().iter().enumerate() {
        let amp = state.amplitude(idx);
        if config & mask != 0 {
            p_up += amp.norm_sqr();
            // Coherence pairs an up-configuration with its bit-flipped
            // partner; in a fixed-Sz basis the partner is absent and the
            // off-diagonal vanishes.
            if let Some(partner) = basis.index_of(config ^ mask) {
                coh += amp * state.amplitude(partner).conj();
            }
        } else {
            p_dn += amp.norm_sqr();
        }
    }
    let rho = DMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(p_up, 0.0), coh, coh.conj(), Complex64::new(p_dn, 0.0)],
    );
    DensityMatrix::from_matrix(rho)
}

/// Compress the bits of `config` at `sites` into a dense little-endian index.
fn gather_bits(config: u32, sites: &[usize]) -> usize {
    let mut out = 0usize;
    for (b, &site) in sites.iter().enumerate() {
        out |= (((config >> site) & 1) as usize) << b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PureState;
    use std::sync::Arc;

    #[test]
    fn sector_basis_two_sites() {
        let b = SpinBasis::with_sector(2, 0).unwrap();
        assert_eq!(b.dimension(), 2);
        assert_eq!(b.states(), &[0b01, 0b10]);
        assert_eq!(b.index_of(0b10), Some(1));
        assert_eq!(b.index_of(0b11), None);
    }

    #[test]
    fn full_basis_dimension() {
        let b = SpinBasis::full(7).unwrap();
        assert_eq!(b.dimension(), 128);
        assert_eq!(b.index_of(127), Some(127));
    }

    #[test]
    fn sector_dimension_binomial() {
        // 7 sites, Sz = +1/2 -> 4 up-spins.
        let b = SpinBasis::with_sector(7, 1).unwrap();
        assert_eq!(b.dimension(), 35);
        for &s in b.states() {
            assert_eq!(s.count_ones(), 4);
        }
    }

    #[test]
    fn sector_dimensions_sum_to_full() {
        for n in 1..=10usize {
            let total: usize = (-(n as i32)..=n as i32)
                .step_by(2)
                .map(|tsz| SpinBasis::with_sector(n, tsz).unwrap().dimension())
                .sum();
            assert_eq!(total, 1 << n);
        }
    }

    #[test]
    fn unreachable_sector_rejected() {
        assert!(SpinBasis::with_sector(2, 1).is_err());
        assert!(SpinBasis::with_sector(3, 5).is_err());
        assert!(SpinBasis::with_sector(3, -5).is_err());
    }

    #[test]
    fn site_count_limits() {
        assert!(SpinBasis::full(0).is_err());
        assert!(SpinBasis::full(25).is_err());
        assert!(SpinBasis::full(24).is_ok());
    }

    #[test]
    fn layout_one_based_attachment() {
        let l = SiteLayout::new(5, 1, 5).unwrap();
        assert_eq!(l.attach_a(), 0);
        assert_eq!(l.attach_b(), 4);
        assert_eq!(l.qubit_a_site(), 5);
        assert_eq!(l.qubit_b_site(), 6);
        assert!(SiteLayout::new(5, 0, 5).is_err());
        assert!(SiteLayout::new(5, 1, 6).is_err());
    }

    fn state_from(basis: SpinBasis, pairs: &[(u32, Complex64)]) -> PureState {
        let basis = Arc::new(basis);
        let mut amps = vec![Complex64::ZERO; basis.dimension()];
        for &(config, a) in pairs {
            amps[basis.index_of(config).unwrap()] = a;
        }
        PureState::new(basis, amps).unwrap()
    }

    #[test]
    fn product_state_reduces_to_projector() {
        // |↑⟩ on site 2 of |↑↓↑⟩: reduction is the pure |0⟩⟨0| projector.
        let st = state_from(
            SpinBasis::full(3).unwrap(),
            &[(0b101, Complex64::ONE)],
        );
        let rho = partial_trace(&st, &[2]).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(rho.matrix()[(1, 1)].norm() < 1e-14);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn singlet_reduces_to_maximally_mixed() {
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let st = state_from(
            SpinBasis::full(2).unwrap(),
            &[(0b01, inv), (0b10, -inv)],
        );
        let rho = partial_trace(&st, &[0]).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((rho.matrix()[(1, 1)].re - 0.5).abs() < 1e-14);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-14);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn keep_everything_recovers_projector() {
        let a = Complex64::new(0.6, 0.0);
        let b = Complex64::new(0.0, 0.8);
        let st = state_from(SpinBasis::full(2).unwrap(), &[(0b00, a), (0b11, b)]);
        let rho = partial_trace(&st, &[0, 1]).unwrap();
        // |ψ⟩⟨ψ| entry between configs 00 and 11.
        assert!((rho.matrix()[(0, 3)] - a * b.conj()).norm() < 1e-14);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        assert!(rho.hermiticity_error() < 1e-14);
    }

    #[test]
    fn partial_trace_rejects_bad_input() {
        let st = state_from(SpinBasis::full(2).unwrap(), &[(0, Complex64::ONE)]);
        assert!(matches!(
            partial_trace(&st, &[]),
            Err(Error::InvalidDensityMatrix(_))
        ));
        assert!(matches!(
            partial_trace(&st, &[5]),
            Err(Error::SiteOutOfRange { .. })
        ));
        let basis = Arc::new(SpinBasis::full(2).unwrap());
        let unnorm = PureState::new_unchecked(
            basis,
            vec![Complex64::new(0.6, 0.0); 4],
        );
        assert!(matches!(
            partial_trace(&unnorm, &[0]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(7, 4), 35);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }
}
