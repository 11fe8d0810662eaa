//! Dense symmetric eigendecomposition per Sz block, degeneracy grouping,
//! and ground-state selection.
//!
//! Every spectrum the crate consumes (time evolution, effective couplings,
//! degeneracy checks) comes through here. Blocks are solved densely: the
//! largest block of a 12-site register is 924-dimensional, and exact
//! long-time propagation needs the full spectrum anyway. A Lanczos path
//! exists for sizes beyond the dense cap.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::SpinBasis;
use crate::dynamics::PureState;
use crate::model::SparseOperator;
use crate::{Error, Result, TOL_DEG};

/// Largest block the dense solver accepts.
pub const DENSE_DIM_CAP: usize = 16384;

/// Eigenvalues (ascending) and orthonormal eigenvectors of one symmetric
/// block.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    /// Column k is the eigenvector of `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    fn from_dense(mat: DMatrix<f64>) -> Self {
        let dim = mat.nrows();
        let eig = mat.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut eigenvectors = DMatrix::zeros(dim, dim);
        for (col, &src) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(src));
        }
        EigenSystem {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// Indices partitioned into groups of mutually degenerate levels
    /// (|e_a - e_b| <= tol between neighbors in the sorted spectrum).
    pub fn degeneracy_groups(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some(group) if (e - self.eigenvalues[*group.last().unwrap()]).abs() <= tol => {
                    group.push(k)
                }
                _ => groups.push(vec![k]),
            }
        }
        groups
    }

    /// max_k ||H v_k - e_k v_k|| (diagnostic).
    pub fn max_residual(&self, op: &SparseOperator) -> f64 {
        let dim = self.dimension();
        let mut worst: f64 = 0.0;
        let mut x = vec![0.0_f64; dim];
        let mut y = vec![0.0_f64; dim];
        for k in 0..dim {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = self.eigenvectors[(i, k)];
            }
            op.apply_real(&x, &mut y);
            let res: f64 = y
                .iter()
                .zip(&x)
                .map(|(hy, xi)| (hy - self.eigenvalues[k] * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(res);
        }
        worst
    }

    /// max |(VᵀV - I)_{ab}| (diagnostic).
    pub fn gram_error(&self) -> f64 {
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        let dim = self.dimension();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram[(r, c)] - target).abs());
            }
        }
        worst
    }
}

/// Dense eigendecomposition of a symmetric operator on its own basis.
pub fn eigendecompose(op: &SparseOperator) -> Result<EigenSystem> {
    let dim = op.dimension();
    if dim > DENSE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: DENSE_DIM_CAP,
        });
    }
    Ok(EigenSystem::from_dense(op.to_dense()))
}

/// Lowest `k` eigenpairs via Lanczos; the escape hatch for blocks beyond
/// [`DENSE_DIM_CAP`]. Partial spectrum only, so it cannot feed spectral
/// propagation.
pub fn lanczos_lowest(
    op: &SparseOperator,
    k: usize,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let out = crate::krylov::lanczos_lowest(op, k, max_iter, tol);
    (out.values, out.vectors)
}

/// One diagonalized Sz block of an operator.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub twice_sz: i32,
    pub basis: Arc<SpinBasis>,
    pub eig: EigenSystem,
}

/// Spectra of every Sz sector of an n-site register.
#[derive(Debug, Clone)]
pub struct SectorSpectra {
    n_sites: usize,
    sectors: Vec<SectorSpectrum>,
}

impl SectorSpectra {
    /// Diagonalize `build(basis)` on every sector, in parallel.
    pub fn compute<F>(n_sites: usize, build: F) -> Result<Self>
    where
        F: Fn(Arc<SpinBasis>) -> Result<SparseOperator> + Sync,
    {
        let twice_sz_values: Vec<i32> = (-(n_sites as i32)..=n_sites as i32)
            .step_by(2)
            .collect();
        let sectors: Result<Vec<SectorSpectrum>> = twice_sz_values
            .par_iter()
            .map(|&twice_sz| {
                let basis = Arc::new(SpinBasis::with_sector(n_sites, twice_sz)?);
                let op = build(basis.clone())?;
                let eig = eigendecompose(&op)?;
                Ok(SectorSpectrum {
                    twice_sz,
                    basis,
                    eig,
                })
            })
            .collect();
        Ok(SectorSpectra {
            n_sites,
            sectors: sectors?,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sectors(&self) -> &[SectorSpectrum] {
        &self.sectors
    }

    pub fn sector(&self, twice_sz: i32) -> Option<&SectorSpectrum> {
        self.sectors.iter().find(|s| s.twice_sz == twice_sz)
    }

    /// Global ground-state energy across all sectors.
    pub fn ground_energy(&self) -> f64 {
        self.sectors
            .iter()
            .map(|s| s.eig.eigenvalues()[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// All (twice_sz, level index, energy) rows, sectors in ascending Sz.
    pub fn energy_table(&self) -> Vec<(i32, usize, f64)> {
        let mut rows = Vec::new();
        for s in &self.sectors {
            for (k, &e) in s.eig.eigenvalues().iter().enumerate() {
                rows.push((s.twice_sz, k, e));
            }
        }
        rows
    }

    /// Full spectrum across sectors, sorted ascending.
    pub fn sorted_energies(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .sectors
            .iter()
            .flat_map(|s| s.eig.eigenvalues().iter().copied())
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all
    }
}

/// Ground state of a bus, with its degeneracy resolved across sectors.
///
/// For even buses this is the unique singlet; for odd buses the doublet,
/// with |0_C⟩ fixed to the Sz = +1/2 member whose largest-magnitude
/// amplitude is made real positive.
#[derive(Debug, Clone)]
pub struct GroundStateInfo {
    pub energy: f64,
    pub degeneracy: usize,
    /// twice_sz of each degenerate member.
    pub sector_labels: Vec<i32>,
    /// |0_C⟩ on its sector basis.
    pub zero_c: PureState,
    /// |1_C⟩ (Sz = -1/2 member) for odd buses.
    pub one_c: Option<PureState>,
}

/// Select the bus ground state and check its degeneracy against the
/// even/odd expectation (1 for even site counts, 2 for odd).
pub fn ground_state(spectra: &SectorSpectra) -> Result<GroundStateInfo> {
    let e0 = spectra.ground_energy();
    let mut members: Vec<(i32, usize)> = Vec::new();
    for s in spectra.sectors() {
        for (k, &e) in s.eig.eigenvalues().iter().enumerate() {
            if e - e0 <= TOL_DEG {
                members.push((s.twice_sz, k));
            } else {
                break;
            }
        }
    }
    let degeneracy = members.len();
    let expected = if spectra.n_sites().is_multiple_of(2) { 1 } else { 2 };
    if degeneracy != expected {
        return Err(Error::ModelAnomaly(format!(
            "ground degeneracy {} for {} sites, expected {}",
            degeneracy,
            spectra.n_sites(),
            expected
        )));
    }
    let sector_labels: Vec<i32> = members.iter().map(|&(tsz, _)| tsz).collect();

    let pick = |twice_sz: i32| -> Result<PureState> {
        let (tsz, k) = members
            .iter()
            .copied()
            .find(|&(tsz, _)| tsz == twice_sz)
            .ok_or_else(|| {
                Error::ModelAnomaly(format!(
                    "no ground member in sector 2Sz = {twice_sz} (sectors: {sector_labels:?})"
                ))
            })?;
        let sector = spectra.sector(tsz).expect("sector exists");
        Ok(gauge_fixed_state(sector.basis.clone(), &sector.eig.eigenvector(k)))
    };

    if expected == 1 {
        let zero_c = pick(0)?;
        Ok(GroundStateInfo {
            energy: e0,
            degeneracy,
            sector_labels,
            zero_c,
            one_c: None,
        })
    } else {
        let zero_c = pick(1)?;
        let one_c = pick(-1)?;
        Ok(GroundStateInfo {
            energy: e0,
            degeneracy,
            sector_labels,
            zero_c,
            one_c: Some(one_c),
        })
    }
}

/// Real vector -> PureState with the sign gauge fixed: the entry of
/// largest magnitude is made positive.
fn gauge_fixed_state(basis: Arc<SpinBasis>, vector: &[f64]) -> PureState {
    let mut sign = 1.0;
    let mut best = 0.0_f64;
    for &v in vector {
        if v.abs() > best {
            best = v.abs();
            sign = if v < 0.0 { -1.0 } else { 1.0 };
        }
    }
    let amps: Vec<Complex64> = vector
        .iter()
        .map(|&v| Complex64::new(sign * v, 0.0))
        .collect();
    PureState::new_unchecked(basis, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bus_hamiltonian, Geometry, ModelSpec};

    fn bus_spectra(geometry: Geometry, n: usize) -> SectorSpectra {
        let attach = (1, 2.min(n));
        let spec = ModelSpec::uniform(geometry, n, 0.0, attach).unwrap();
        SectorSpectra::compute(n, |basis| build_bus_hamiltonian(&spec, basis)).unwrap()
    }

    #[test]
    fn two_site_spectrum_is_singlet_triplet() {
        let spectra = bus_spectra(Geometry::Chain, 2);
        let energies = spectra.sorted_energies();
        let expected = [-0.75, 0.25, 0.25, 0.25];
        for (got, want) in energies.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{energies:?}");
        }
    }

    #[test]
    fn three_site_chain_spectrum() {
        // Analytic levels of s2·(s1+s3): {-1 (x2), 0 (x2), 1/2 (x4)}.
        let spectra = bus_spectra(Geometry::Chain, 3);
        let energies = spectra.sorted_energies();
        let expected = [-1.0, -1.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5];
        for (got, want) in energies.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{energies:?}");
        }
    }

    #[test]
    fn ground_degeneracy_follows_parity() {
        for n in 2..=8 {
            let spectra = bus_spectra(Geometry::Chain, n);
            let info = ground_state(&spectra).unwrap();
            let expected = if n % 2 == 0 { 1 } else { 2 };
            assert_eq!(info.degeneracy, expected, "N = {n}");
            if n % 2 == 1 {
                assert_eq!(info.sector_labels.len(), 2);
                assert!(info.sector_labels.contains(&1));
                assert!(info.sector_labels.contains(&-1));
                assert!(info.one_c.is_some());
            } else {
                assert_eq!(info.sector_labels, vec![0]);
            }
        }
    }

    #[test]
    fn three_site_ground_energy() {
        let spectra = bus_spectra(Geometry::Chain, 3);
        let info = ground_state(&spectra).unwrap();
        assert!((info.energy - (-1.0)).abs() < 1e-12);
        assert_eq!(info.degeneracy, 2);
    }

    #[test]
    fn eigen_residuals_small() {
        let spec = ModelSpec::uniform(Geometry::Chain, 6, 0.0, (1, 6)).unwrap();
        let basis = Arc::new(SpinBasis::with_sector(6, 0).unwrap());
        let op = build_bus_hamiltonian(&spec, basis).unwrap();
        let eig = eigendecompose(&op).unwrap();
        let scale = op.norm_inf();
        assert!(eig.max_residual(&op) <= 1e-10 * scale);
        assert!(eig.gram_error() <= 1e-12);
        for pair in eig.eigenvalues().windows(2) {
            assert!(pair[0] <= pair[1] + 1e-15);
        }
    }

    #[test]
    fn dimension_cap_enforced() {
        // 15 sites full space (32768) exceeds the cap; use a zero operator
        // to avoid building a real Hamiltonian.
        let basis = Arc::new(SpinBasis::full(15).unwrap());
        let op = SparseOperator::zero(basis);
        assert!(matches!(
            eigendecompose(&op),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn gauge_fixing_makes_dominant_amplitude_positive() {
        let basis = Arc::new(SpinBasis::with_sector(2, 0).unwrap());
        let st = gauge_fixed_state(basis, &[-0.8, 0.6]);
        assert!(st.amplitude(0).re > 0.0);
        assert!((st.amplitude(0).re - 0.8).abs() < 1e-15);
        assert!((st.amplitude(1).re + 0.6).abs() < 1e-15);
    }

    #[test]
    fn lanczos_matches_dense_ground_state() {
        let spec = ModelSpec::uniform(Geometry::Chain, 8, 0.0, (1, 8)).unwrap();
        let basis = Arc::new(SpinBasis::with_sector(8, 0).unwrap());
        let op = build_bus_hamiltonian(&spec, basis).unwrap();
        let dense = eigendecompose(&op).unwrap();
        let (vals, vecs) = lanczos_lowest(&op, 3, 200, 1e-12);
        assert!((vals[0] - dense.eigenvalues()[0]).abs() < 1e-9);
        // Ground vector agrees up to sign.
        let overlap: f64 = vecs[0]
            .iter()
            .zip(dense.eigenvector(0))
            .map(|(a, b)| a * b)
            .sum();
        assert!(overlap.abs() > 1.0 - 1e-8);
    }

    #[test]
    fn degeneracy_grouping() {
        let spectra = bus_spectra(Geometry::Chain, 3);
        let sector = spectra.sector(1).unwrap();
        let groups = sector.eig.degeneracy_groups(TOL_DEG);
        // Sz=+1/2 sector of N=3: energies {-1, 0, 1/2}.
        assert_eq!(groups.len(), 3);
    }
}
