//! Entanglement fidelity, teleportation fidelity and the fully entangled fraction.

use std::sync::Arc;

use nalgebra::{Matrix4, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::registry::{Registry, Strategy};
use crate::states::{
    haar_ket_from_rng, haar_unitary, max_entangled, seeded_rng, DensityOperator, QuantumChannelChoi,
};
use crate::tensor::{c, polar_unitary, CMatrix, CVector, C64};

/// `(d F + 1) / (d + 1)`, the Haar-averaged fidelity implied by an entanglement fidelity.
pub fn teleportation_fidelity_from_f(f: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::param("F", f, "must lie in [0, 1]"));
    }
    let d = d as f64;
    Ok((d * f + 1.0) / (d + 1.0))
}

/// Classical-strategy ceiling on the teleportation fidelity, `2 / (d + 1)`.
pub fn classical_teleportation_threshold(d: usize) -> f64 {
    2.0 / (d as f64 + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub entanglement_fidelity: f64,
    pub teleportation_fidelity: f64,
    pub d: usize,
}

impl FidelityReport {
    pub fn from_entanglement_fidelity(f: f64, d: usize) -> Result<Self> {
        Ok(Self {
            entanglement_fidelity: f,
            teleportation_fidelity: teleportation_fidelity_from_f(f, d)?,
            d,
        })
    }
}

/// `<Phi+| J |Phi+>` for the channel's Choi state, clamped to `[0, 1]`.
pub fn entanglement_fidelity(ch: &QuantumChannelChoi) -> f64 {
    let phi = max_entangled(ch.d()).expect("channel dimension is at least 2");
    ch.choi().expectation(&phi).clamp(0.0, 1.0)
}

pub fn fidelity_report(ch: &QuantumChannelChoi) -> FidelityReport {
    let f = entanglement_fidelity(ch);
    FidelityReport::from_entanglement_fidelity(f, ch.d()).expect("clamped fidelity is in range")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Monte Carlo average of `<psi| Lambda(psi) |psi>` over Haar-random inputs.
///
/// Uses `<psi|Lambda(psi)|psi> = d <psi, psi*| J |psi, psi*>`.
pub fn mc_teleportation_fidelity(
    ch: &QuantumChannelChoi,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::param("samples", 0.0, "must be at least 1"));
    }
    let d = ch.d();
    let j = ch.choi().op().matrix();
    let mut rng = seeded_rng(seed);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let psi = haar_ket_from_rng(d, &mut rng)?;
        let a = psi.amplitudes();
        let v = a.kronecker(&a.map(|z| z.conj()));
        let x = (v.adjoint() * j * &v)[(0, 0)].re * d as f64;
        sum += x;
        sum2 += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        stderr: (var / n).sqrt(),
        samples,
    })
}

/// Fully entangled fraction together with a local unitary `U` such that
/// `(U (x) 1)|Phi+>` attains it.
#[derive(Clone, Debug, PartialEq)]
pub struct FefResult {
    pub value: f64,
    pub maximizer: CMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub starts: usize,
}

/// A method for computing the fully entangled fraction of a `d x d` state.
pub trait FefSolver: Strategy {
    fn solve(&self, rho: &DensityOperator) -> Result<FefResult>;
}

/// Overlap of `rho` with `(U (x) 1)|Phi+>`; equals `u^dagger rho u / d` for the row-major vectorization `u` of `U`.
pub fn fef_value_at(rho: &DensityOperator, u: &CMatrix) -> f64 {
    let d = u.nrows();
    let v = vectorize(u);
    (v.adjoint() * rho.op().matrix() * &v)[(0, 0)].re / d as f64
}

fn vectorize(u: &CMatrix) -> CVector {
    let d = u.nrows();
    CVector::from_fn(d * d, |k, _| u[(k / d, k % d)])
}

fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// Magic basis as columns: `(|00>+|11>)/sqrt2, i(|00>-|11>)/sqrt2, i(|01>+|10>)/sqrt2, (|01>-|10>)/sqrt2`.
fn magic_basis() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    #[rustfmt::skip]
    let rows = [
        c(s, 0.0), c(0.0, s),  z,          z,
        z,         z,          c(0.0, s),  c(s, 0.0),
        z,         z,          c(0.0, s),  c(-s, 0.0),
        c(s, 0.0), c(0.0, -s), z,          z,
    ];
    CMatrix::from_row_slice(4, 4, &rows)
}

/// Two-qubit closed form: the top eigenvalue of the real part of `rho` in the magic basis.
pub fn fef_qubit_magic(rho: &DensityOperator) -> Result<FefResult> {
    if rho.shape().dims() != [2, 2] {
        return Err(Error::InvalidShape(format!(
            "magic-basis fully entangled fraction needs a two-qubit state, got {}",
            rho.shape()
        )));
    }
    let m = magic_basis();
    let in_magic = m.adjoint() * rho.op().matrix() * &m;
    let real = Matrix4::from_fn(|i, j| in_magic[(i, j)].re);
    let eig = SymmetricEigen::new(real);
    let (top, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            });
    let x = eig.eigenvectors.column(top);
    let e = &m * CVector::from_fn(4, |k, _| c(x[k], 0.0));
    let u = polar_unitary(&(unvectorize(&e, 2) * c(2f64.sqrt(), 0.0)));
    Ok(FefResult {
        value: eig.eigenvalues[top].clamp(0.0, 1.0),
        maximizer: u,
        converged: true,
        iterations: 0,
        starts: 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FefOptions {
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FefOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            tol: 1e-10,
            max_iter: 500,
            seed: 0,
        }
    }
}

struct Ascent {
    value: f64,
    u: CMatrix,
    iterations: usize,
    converged: bool,
}

/// Fixed-point ascent `U <- polar(reshape(rho vec(U)))`. The objective is a
/// convex quadratic in `vec(U)` and each step maximizes its linearization
/// over the unitary group, so the value never decreases.
fn ascend(rho: &CMatrix, d: usize, start: CMatrix, opts: &FefOptions) -> Ascent {
    let quad = |u: &CMatrix| {
        let v = vectorize(u);
        (v.adjoint() * rho * &v)[(0, 0)].re / d as f64
    };
    let mut u = start;
    let mut value = quad(&u);
    for it in 1..=opts.max_iter {
        let g = rho * vectorize(&u);
        let next = polar_unitary(&unvectorize(&g, d));
        let next_value = quad(&next);
        let gain = next_value - value;
        if next_value >= value {
            u = next;
            value = next_value;
        }
        if gain.abs() <= opts.tol {
            return Ascent {
                value,
                u,
                iterations: it,
                converged: true,
            };
        }
    }
    Ascent {
        value,
        u,
        iterations: opts.max_iter,
        converged: false,
    }
}

/// Multi-start ascent on the unitary group. Start 0 is the identity, the rest
/// are Haar unitaries drawn from `opts.seed`; the best value wins and ties go
/// to the lowest start index.
pub fn fef_iterative(rho: &DensityOperator, opts: &FefOptions) -> Result<FefResult> {
    let d = rho.bipartite_dim()?;
    if opts.starts == 0 {
        return Err(Error::param("starts", 0.0, "must be at least 1"));
    }
    let mut rng = seeded_rng(opts.seed);
    let starts: Vec<CMatrix> = (0..opts.starts)
        .map(|k| {
            if k == 0 {
                CMatrix::identity(d, d)
            } else {
                haar_unitary(d, &mut rng)
            }
        })
        .collect();
    let mat = rho.op().matrix();
    let runs: Vec<Ascent> = starts
        .into_par_iter()
        .map(|s| ascend(mat, d, s, opts))
        .collect();
    let converged = runs.iter().any(|r| r.converged);
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.value > best.value { r } else { best })
        .expect("at least one start");
    Ok(FefResult {
        value: best.value.clamp(0.0, 1.0),
        maximizer: best.u,
        converged,
        iterations,
        starts: opts.starts,
    })
}

/// `f(rho) > 1/d`: the resource beats every classical strategy.
pub fn is_meaningful(rho: &DensityOperator) -> Result<bool> {
    is_meaningful_with(rho, default_fef_solver().as_ref())
}

pub fn is_meaningful_with(rho: &DensityOperator, solver: &dyn FefSolver) -> Result<bool> {
    let d = rho.bipartite_dim()?;
    Ok(solver.solve(rho)?.value > 1.0 / d as f64 + 1e-12)
}

pub struct MagicBasisFef;

impl Strategy for MagicBasisFef {
    fn name(&self) -> &'static str {
        "magic"
    }

    fn summary(&self) -> &'static str {
        "two-qubit closed form via the magic basis"
    }
}

impl FefSolver for MagicBasisFef {
    fn solve(&self, rho: &DensityOperator) -> Result<FefResult> {
        fef_qubit_magic(rho)
    }
}

#[derive(Default)]
pub struct IterativeFef {
    pub options: FefOptions,
}

impl Strategy for IterativeFef {
    fn name(&self) -> &'static str {
        "iterative"
    }

    fn summary(&self) -> &'static str {
        "multi-start polar ascent over local unitaries, any d"
    }
}

impl FefSolver for IterativeFef {
    fn solve(&self, rho: &DensityOperator) -> Result<FefResult> {
        fef_iterative(rho, &self.options)
    }
}

/// Closed form for qubits, ascent otherwise.
#[derive(Default)]
pub struct AutoFef {
    pub options: FefOptions,
}

impl Strategy for AutoFef {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn summary(&self) -> &'static str {
        "magic basis when d = 2, iterative ascent otherwise"
    }
}

impl FefSolver for AutoFef {
    fn solve(&self, rho: &DensityOperator) -> Result<FefResult> {
        if rho.shape().dims() == [2, 2] {
            fef_qubit_magic(rho)
        } else {
            fef_iterative(rho, &self.options)
        }
    }
}

pub fn default_fef_solver() -> Arc<dyn FefSolver> {
    Arc::new(AutoFef::default())
}

pub fn fef_registry(options: FefOptions) -> Registry<dyn FefSolver> {
    Registry::new()
        .with(Arc::new(AutoFef { options }) as Arc<dyn FefSolver>)
        .with(Arc::new(MagicBasisFef))
        .with(Arc::new(IterativeFef { options }))
}

/// `<k| rho |k>` for an arbitrary probe vector.
pub fn probe_value(rho: &DensityOperator, ket: &CVector) -> f64 {
    let z: C64 = (ket.adjoint() * rho.op().matrix() * ket)[(0, 0)];
    z.re
}
