//! Shared test oracles, independent of the library's bit-flip operator
//! construction: Hamiltonians are assembled from explicit Kronecker
//! products of Pauli matrices.

use nalgebra::DMatrix;

fn pauli_x() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

/// i·σ_y is real; (iσ_y)⊗(iσ_y) = −σ_y⊗σ_y keeps the oracle in real
/// arithmetic.
fn pauli_iy() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

fn pauli_z() -> DMatrix<f64> {
    // Bit convention: index 0 = spin down, index 1 = spin up,
    // σ_z |up⟩ = +|up⟩.
    DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])
}

/// Single-site operator embedded in the n-site register. Site 0 is the
/// lowest bit, so it is the last Kronecker factor.
pub fn embed_single(n: usize, site: usize, op: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::identity(1, 1);
    for s in (0..n).rev() {
        let factor = if s == site {
            op.clone()
        } else {
            DMatrix::identity(2, 2)
        };
        m = m.kronecker(&factor);
    }
    m
}

fn embed_pair(n: usize, i: usize, j: usize, op: &DMatrix<f64>) -> DMatrix<f64> {
    embed_single(n, i, op) * embed_single(n, j, op)
}

/// Σ_bonds J s_i·s_j with s = σ/2, via explicit tensor products.
pub fn dense_heisenberg(n: usize, bonds: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for &(i, j, coupling) in bonds {
        let xx = embed_pair(n, i, j, &pauli_x());
        let yy = -embed_pair(n, i, j, &pauli_iy());
        let zz = embed_pair(n, i, j, &pauli_z());
        h += (xx + yy + zz) * (coupling / 4.0);
    }
    h
}

/// Total z-magnetization 2·Sz = Σ σ_iz.
pub fn dense_twice_sz(n: usize) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for site in 0..n {
        m += embed_single(n, site, &pauli_z());
    }
    m
}

/// Sorted eigenvalues of a dense symmetric matrix.
pub fn sorted_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut evs: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    evs
}
