//! Protocol state preparation and exact unitary time evolution.
//!
//! The initial state puts qubit A at a chosen Bloch point while the bus and
//! qubit B sit in their ground states; "ground" for an uncoupled qubit is a
//! gauge choice fixed here as |0⟩ ≡ spin up. Evolution is spectral: the
//! total Hamiltonian conserves Sz, each occupied sector block is rotated to
//! its eigenbasis once, and any later time costs one phase sweep — exact at
//! arbitrary t, with no step-size error. A Krylov propagator covers
//! operators too large to diagonalize.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::SpinBasis;
use crate::eigen::{EigenSystem, SectorSpectra};
use crate::model::{build_total_hamiltonian, ModelSpec, SparseOperator};
use crate::{Error, Result};

/// Complex amplitude vector over a [`SpinBasis`], unit norm.
#[derive(Debug, Clone)]
pub struct PureState {
    basis: Arc<SpinBasis>,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Build a state, rejecting amplitude vectors that are not normalized.
    pub fn new(basis: Arc<SpinBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        assert_eq!(amplitudes.len(), basis.dimension(), "amplitude count");
        let state = PureState { basis, amplitudes };
        let norm = state.norm();
        if (norm - 1.0).abs() > crate::basis::NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(state)
    }

    /// Internal constructor for amplitudes known to be normalized (or
    /// deliberately not, in tests).
    pub(crate) fn new_unchecked(basis: Arc<SpinBasis>, amplitudes: Vec<Complex64>) -> Self {
        assert_eq!(amplitudes.len(), basis.dimension(), "amplitude count");
        PureState { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<SpinBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        assert!(self.basis.same_space(&other.basis), "basis mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// ‖self − other‖.
    pub fn distance(&self, other: &PureState) -> f64 {
        assert!(self.basis.same_space(&other.basis), "basis mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Real parts of the amplitudes; panics if any imaginary part is
    /// non-negligible. Eigenvectors of real symmetric blocks land here.
    pub fn real_amplitudes(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .map(|a| {
                assert!(a.im.abs() < 1e-12, "state has complex amplitudes");
                a.re
            })
            .collect()
    }
}

/// Bloch-sphere angles of qubit A's initial state:
/// a = cos(θ/2), b = sin(θ/2) e^{iφ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidModel(format!("theta {theta} outside [0, pi]")));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::InvalidModel(format!("phi {phi} outside [0, 2pi)")));
        }
        Ok(BlochAngles { theta, phi })
    }

    /// (a, b) amplitudes on (|0⟩, |1⟩).
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        let a = Complex64::new((self.theta / 2.0).cos(), 0.0);
        let b = Complex64::from_polar((self.theta / 2.0).sin(), self.phi);
        (a, b)
    }
}

/// |Ψ(0)⟩ = (a|0_A⟩ + b|1_A⟩) ⊗ |0_C⟩ ⊗ |0_B⟩ on the full register.
///
/// `bus_ground` supplies |0_C⟩ on its sector basis (see
/// [`crate::eigen::ground_state`] for the doublet gauge).
pub fn prepare_initial_state(
    angles: &BlochAngles,
    spec: &ModelSpec,
    bus_ground: &PureState,
) -> Result<PureState> {
    let layout = spec.layout()?;
    if bus_ground.basis().n_sites() != layout.n_bus() {
        return Err(Error::BasisMismatch);
    }
    let full = Arc::new(SpinBasis::full(layout.n_total())?);
    let (a, b) = angles.amplitudes();
    let a_up = 1u32 << layout.qubit_a_site();
    let b_up = 1u32 << layout.qubit_b_site();
    let mut amps = vec![Complex64::ZERO; full.dimension()];
    for (idx, &bus_config) in bus_ground.basis().states().iter().enumerate() {
        let amp = bus_ground.amplitude(idx);
        // Qubit B starts in |0⟩ ≡ up; qubit A superposes up (a) and down (b).
        amps[(bus_config | a_up | b_up) as usize] = a * amp;
        amps[(bus_config | b_up) as usize] = b * amp;
    }
    PureState::new(full, amps)
}

struct PropagatorBlock {
    twice_sz: i32,
    /// Full-basis index of each block basis state.
    global: Vec<usize>,
    eig: EigenSystem,
}

/// Spectral propagator: exp(-iHt) applied block-by-block over Sz sectors.
pub struct SpectralPropagator {
    basis: Arc<SpinBasis>,
    blocks: Vec<PropagatorBlock>,
}

impl SpectralPropagator {
    /// Diagonalize the total Hamiltonian of `spec` sector by sector.
    pub fn for_model(spec: &ModelSpec) -> Result<Self> {
        let layout = spec.layout()?;
        let n = layout.n_total();
        let spectra = SectorSpectra::compute(n, |basis| build_total_hamiltonian(spec, basis))?;
        Self::from_spectra(&spectra)
    }

    /// Wrap already-computed sector spectra (full basis is rebuilt).
    pub fn from_spectra(spectra: &SectorSpectra) -> Result<Self> {
        let basis = Arc::new(SpinBasis::full(spectra.n_sites())?);
        let blocks = spectra
            .sectors()
            .iter()
            .map(|s| {
                let global = s
                    .basis
                    .states()
                    .iter()
                    .map(|&c| basis.index_of(c).expect("sector state in full basis"))
                    .collect();
                PropagatorBlock {
                    twice_sz: s.twice_sz,
                    global,
                    eig: s.eig.clone(),
                }
            })
            .collect();
        Ok(SpectralPropagator { basis, blocks })
    }

    /// Treat one operator as a single block (no sector splitting); used for
    /// small effective models and tests.
    pub fn for_operator(op: &SparseOperator) -> Result<Self> {
        let eig = crate::eigen::eigendecompose(op)?;
        let basis = op.basis().clone();
        let global = (0..basis.dimension()).collect();
        Ok(SpectralPropagator {
            basis,
            blocks: vec![PropagatorBlock {
                twice_sz: 0,
                global,
                eig,
            }],
        })
    }

    pub fn basis(&self) -> &Arc<SpinBasis> {
        &self.basis
    }

    /// Project a state onto every block eigenbasis once, so each later
    /// time evaluation is a single phase sweep.
    pub fn project(&self, state: &PureState) -> Result<EvolvingState<'_>> {
        if !state.basis().same_space(&self.basis) {
            return Err(Error::BasisMismatch);
        }
        let mut coefficients = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let dim = block.global.len();
            let mut gathered = vec![Complex64::ZERO; dim];
            let mut occupied = false;
            for (local, &g) in block.global.iter().enumerate() {
                let a = state.amplitude(g);
                occupied |= a != Complex64::ZERO;
                gathered[local] = a;
            }
            if !occupied {
                coefficients.push(Vec::new());
                continue;
            }
            let v = block.eig.eigenvectors();
            let mut coeff = vec![Complex64::ZERO; dim];
            for (k, ck) in coeff.iter_mut().enumerate() {
                let mut acc = Complex64::ZERO;
                for (i, &gi) in gathered.iter().enumerate() {
                    acc += v[(i, k)] * gi;
                }
                *ck = acc;
            }
            coefficients.push(coeff);
        }
        Ok(EvolvingState {
            propagator: self,
            coefficients,
        })
    }

    /// ψ(t) = Σ_k e^{-i e_k t} v_k ⟨v_k|ψ(0)⟩.
    pub fn evolve(&self, state: &PureState, t: f64) -> Result<PureState> {
        Ok(self.project(state)?.at(t))
    }

    /// Spectral width (e_max - e_min) over the sectors the state occupies.
    pub fn occupied_energy_range(&self, state: &PureState) -> Result<f64> {
        if !state.basis().same_space(&self.basis) {
            return Err(Error::BasisMismatch);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for block in &self.blocks {
            let weight: f64 = block
                .global
                .iter()
                .map(|&g| state.amplitude(g).norm_sqr())
                .sum();
            if weight > 1e-14 {
                let evs = block.eig.eigenvalues();
                lo = lo.min(evs[0]);
                hi = hi.max(evs[evs.len() - 1]);
            }
        }
        if lo > hi {
            return Err(Error::InvalidModel("state has no occupied sector".into()));
        }
        Ok(hi - lo)
    }

    /// ⟨ψ|H|ψ⟩ evaluated in the eigenbasis.
    pub fn energy_expectation(&self, state: &PureState) -> Result<f64> {
        let evolving = self.project(state)?;
        Ok(evolving.energy())
    }

    /// (twice_sz, eigensystem) pairs, for diagnostics.
    pub fn blocks(&self) -> impl Iterator<Item = (i32, &EigenSystem)> {
        self.blocks.iter().map(|b| (b.twice_sz, &b.eig))
    }
}

/// A state pre-projected onto the propagator's eigenbases; evaluating it at
/// any time is O(dim²) per occupied block with no further diagonalization.
pub struct EvolvingState<'a> {
    propagator: &'a SpectralPropagator,
    /// Per block: eigenbasis coefficients (empty when unoccupied).
    coefficients: Vec<Vec<Complex64>>,
}

impl EvolvingState<'_> {
    pub fn at(&self, t: f64) -> PureState {
        let basis = self.propagator.basis.clone();
        let mut amps = vec![Complex64::ZERO; basis.dimension()];
        for (block, coeff) in self.propagator.blocks.iter().zip(&self.coefficients) {
            if coeff.is_empty() {
                continue;
            }
            let v = block.eig.eigenvectors();
            let evs = block.eig.eigenvalues();
            for (k, &ck) in coeff.iter().enumerate() {
                let rotated = Complex64::from_polar(1.0, -evs[k] * t) * ck;
                if rotated.norm_sqr() < 1e-60 {
                    continue;
                }
                for (i, &g) in block.global.iter().enumerate() {
                    amps[g] += v[(i, k)] * rotated;
                }
            }
        }
        PureState::new_unchecked(basis, amps)
    }

    /// Conserved energy of the projected state.
    pub fn energy(&self) -> f64 {
        let mut acc = 0.0;
        for (block, coeff) in self.propagator.blocks.iter().zip(&self.coefficients) {
            for (k, c) in coeff.iter().enumerate() {
                acc += block.eig.eigenvalues()[k] * c.norm_sqr();
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.coefficients
            .iter()
            .flatten()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Krylov propagation of exp(-iHt)|ψ⟩; agrees with the spectral route
/// within `tol` and re-checks the norm after every accepted substep.
pub fn evolve_krylov(
    state: &PureState,
    op: &SparseOperator,
    t: f64,
    max_dim: usize,
    tol: f64,
) -> Result<PureState> {
    if t < 0.0 || tol <= 0.0 {
        return Err(Error::InvalidModel(
            "Krylov propagation needs t >= 0 and tol > 0".into(),
        ));
    }
    if !state.basis().same_space(op.basis()) {
        return Err(Error::BasisMismatch);
    }
    let amps = crate::krylov::expm_multiply(op, state.amplitudes(), t, max_dim, tol)?;
    Ok(PureState::new_unchecked(state.basis().clone(), amps))
}

/// Uniform time grid, Nyquist-safe against the fastest occupied frequency:
/// dt ≤ π/(factor · E_range) with factor ≥ 8 by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    /// Grid over `[t_start, t_end]` from a spectral width and oversampling
    /// factor. The step is shrunk so the end point lands exactly.
    pub fn nyquist(t_start: f64, t_end: f64, energy_range: f64, factor: f64) -> Result<TimeGrid> {
        let valid = t_end > t_start && factor > 0.0;
        if !valid {
            return Err(Error::InvalidModel("empty or inverted time window".into()));
        }
        let dt_max = if energy_range > 0.0 {
            std::f64::consts::PI / (factor * energy_range)
        } else {
            (t_end - t_start) / 16.0
        };
        let span = t_end - t_start;
        let intervals = (span / dt_max).ceil().max(2.0) as usize;
        if intervals > 50_000_000 {
            return Err(Error::InvalidModel(format!(
                "time grid would need {intervals} samples; narrow the window"
            )));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            dt: span / intervals as f64,
            n_samples: intervals + 1,
        })
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|i| self.t_start + i as f64 * self.dt)
    }
}
