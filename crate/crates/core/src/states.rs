//! Constructors for the states and channels used throughout the crate.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fidelity::{default_fef_solver, FefSolver};
use crate::tensor::{
    c, eigh, partial_trace, tensor, CMatrix, CVector, Ket, Operator, SubsystemShape, C64,
    HERMITIAN_TOL, PSD_TOL,
};

/// Unit-trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-10;

/// Trace-preservation tolerance for Choi states.
pub const CHOI_TP_TOL: f64 = 1e-9;

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: Operator,
}

impl DensityOperator {
    /// Validates every density-operator invariant and names the first one violated.
    pub fn new(op: Operator) -> Result<Self> {
        let deviation = op.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |a - a^dagger| = {deviation:e} > {HERMITIAN_TOL:e}"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {:.3e}{:+.3e}i, expected 1 within {TRACE_TOL:e}",
                tr.re, tr.im
            )));
        }
        let min = eigh(&op)?.values[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite: min eigenvalue {min:e} < -{PSD_TOL:e}"
            )));
        }
        Ok(Self {
            op: op.symmetrized(),
        })
    }

    /// For operators that are valid by construction.
    pub(crate) fn from_trusted(op: Operator) -> Self {
        Self { op }
    }

    pub fn pure(ket: &Ket) -> Result<Self> {
        let k = ket.normalized()?;
        Ok(Self {
            op: Operator::projector(&k),
        })
    }

    /// `I / dim` on the given shape.
    pub fn maximally_mixed(shape: SubsystemShape) -> Self {
        let n = shape.dim() as f64;
        Self {
            op: Operator::identity(shape).scale(1.0 / n),
        }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn shape(&self) -> &SubsystemShape {
        self.op.shape()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Local dimension of a `d x d` bipartite state.
    pub fn bipartite_dim(&self) -> Result<usize> {
        match self.shape().dims() {
            [a, b] if a == b => Ok(*a),
            dims => Err(Error::InvalidShape(format!(
                "expected a d x d bipartite state, got {dims:?}"
            ))),
        }
    }

    pub fn expectation(&self, ket: &Ket) -> f64 {
        (ket.amplitudes().adjoint() * self.op.matrix() * ket.amplitudes())[(0, 0)].re
    }
}

/// A channel stored as its normalized Choi state on (output, reference).
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannelChoi {
    choi: DensityOperator,
    d: usize,
}

impl QuantumChannelChoi {
    pub fn new(choi: DensityOperator) -> Result<Self> {
        let d = choi.bipartite_dim()?;
        let reference = partial_trace(choi.op(), &[1])?;
        let target = Operator::identity(reference.shape().clone()).scale(1.0 / d as f64);
        let err = reference.max_abs_diff(&target);
        if err > CHOI_TP_TOL {
            return Err(Error::InvalidState(format!(
                "Choi state is not trace preserving: |Tr_out J - I/d| = {err:e}"
            )));
        }
        Ok(Self { choi, d })
    }

    /// Builds the Choi state `(1/d) sum_ij Lambda(|i><j|) (x) |i><j|` from the
    /// action of a `d`-dimensional channel on matrix units.
    pub fn from_matrix_units<F>(d: usize, mut action: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<CMatrix>,
    {
        let mut j = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for k in 0..d {
                let out = action(i, k)?;
                if out.nrows() != d || out.ncols() != d {
                    return Err(Error::InvalidShape(format!(
                        "channel output is {}x{}, expected {d}x{d}",
                        out.nrows(),
                        out.ncols()
                    )));
                }
                for b in 0..d {
                    for bp in 0..d {
                        j[(b * d + i, bp * d + k)] = out[(b, bp)] / d as f64;
                    }
                }
            }
        }
        let shape = SubsystemShape::uniform(d, 2)?;
        Self::new(DensityOperator::new(Operator::new(shape, j)?)?)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Ok(Self {
            choi: max_entangled_state(d)?,
            d,
        })
    }

    pub fn fully_depolarizing(d: usize) -> Result<Self> {
        Ok(Self {
            choi: DensityOperator::maximally_mixed(SubsystemShape::uniform(d, 2)?),
            d,
        })
    }

    pub fn choi(&self) -> &DensityOperator {
        &self.choi
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `Lambda(X) = d * Tr_ref[J (1 (x) X^T)]`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let d = self.d;
        let j = self.choi.op().matrix();
        let mut out = CMatrix::zeros(d, d);
        for b in 0..d {
            for bp in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..d {
                    for rp in 0..d {
                        acc += j[(b * d + r, bp * d + rp)] * x[(r, rp)];
                    }
                }
                out[(b, bp)] = acc * d as f64;
            }
        }
        out
    }
}

/// Isotropic mixing weight `p` for a `d`-dimensional pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicParam {
    p: f64,
    d: usize,
}

impl IsotropicParam {
    pub fn new(p: f64, d: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", p, "must lie in [0, 1]"));
        }
        if d < 2 {
            return Err(Error::param("d", d as f64, "must be at least 2"));
        }
        Ok(Self { p, d })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Fully entangled fraction of the isotropic state, `(1 + (d^2 - 1) p) / d^2`.
    pub fn fully_entangled_fraction(&self) -> f64 {
        let d2 = (self.d * self.d) as f64;
        (1.0 + (d2 - 1.0) * self.p) / d2
    }
}

/// `(1/sqrt d) sum_i |ii>`.
pub fn max_entangled(d: usize) -> Result<Ket> {
    if d < 2 {
        return Err(Error::param("d", d as f64, "must be at least 2"));
    }
    let mut amps = CVector::zeros(d * d);
    let a = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        amps[i * d + i] = c(a, 0.0);
    }
    Ket::new(SubsystemShape::uniform(d, 2)?, amps)
}

pub fn max_entangled_state(d: usize) -> Result<DensityOperator> {
    Ok(DensityOperator::from_trusted(Operator::projector(
        &max_entangled(d)?,
    )))
}

/// `D_p(rho) = (1 - p) I/d + p rho` on a single qudit.
pub fn depolarizing_apply(rho: &DensityOperator, p: f64) -> Result<DensityOperator> {
    if rho.shape().len() != 1 {
        return Err(Error::InvalidShape(format!(
            "depolarizing channel acts on one subsystem, got {}",
            rho.shape()
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", p, "must lie in [0, 1]"));
    }
    let d = rho.dim() as f64;
    let mixed = Operator::identity(rho.shape().clone()).scale((1.0 - p) / d);
    Ok(DensityOperator::from_trusted(&mixed + &rho.op().scale(p)))
}

/// `(D_p (x) id)` applied to a bipartite state: depolarizes the first subsystem.
pub fn depolarize_first(rho: &DensityOperator, p: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", p, "must lie in [0, 1]"));
    }
    let dims = rho.shape().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidShape(format!(
            "expected a bipartite state, got {}",
            rho.shape()
        )));
    }
    let first = SubsystemShape::new(vec![dims[0]])?;
    let reduced_b = partial_trace(rho.op(), &[1])?;
    let mixed = tensor(
        &Operator::identity(first).scale(1.0 / dims[0] as f64),
        &reduced_b,
    );
    Ok(DensityOperator::from_trusted(
        &mixed.scale(1.0 - p) + &rho.op().scale(p),
    ))
}

/// `p Phi+ + (1 - p) I / d^2`.
pub fn isotropic_state(param: IsotropicParam) -> Result<DensityOperator> {
    let d = param.d;
    let phi = max_entangled_state(d)?;
    let mixed = Operator::identity(phi.shape().clone()).scale((1.0 - param.p) / (d * d) as f64);
    Ok(DensityOperator::from_trusted(
        &phi.op().scale(param.p) + &mixed,
    ))
}

/// The same isotropic state, built as one-sided depolarizing noise on `Phi+`.
pub fn isotropic_state_via_channel(param: IsotropicParam) -> Result<DensityOperator> {
    depolarize_first(&max_entangled_state(param.d)?, param.p)
}

/// Isotropic parameter with the same fully entangled fraction as `rho`:
/// `p = (d^2 f - 1) / (d^2 - 1)`.
pub fn twirl_to_isotropic(rho: &DensityOperator) -> Result<IsotropicParam> {
    twirl_to_isotropic_with(rho, default_fef_solver().as_ref())
}

pub fn twirl_to_isotropic_with(
    rho: &DensityOperator,
    solver: &dyn FefSolver,
) -> Result<IsotropicParam> {
    let d = rho.bipartite_dim()?;
    let f = solver.solve(rho)?.value;
    isotropic_param_from_fef(f, d)
}

pub fn isotropic_param_from_fef(f: f64, d: usize) -> Result<IsotropicParam> {
    let d2 = (d * d) as f64;
    if f < 1.0 / d2 - 1e-9 {
        return Err(Error::Inconsistent(format!(
            "fully entangled fraction {f} is below the floor 1/d^2 = {}",
            1.0 / d2
        )));
    }
    let p = ((d2 * f - 1.0) / (d2 - 1.0)).clamp(0.0, 1.0);
    IsotropicParam::new(p, d)
}

/// The twirl as a map on states: the isotropic state with matching fully entangled fraction.
pub fn twirl(rho: &DensityOperator) -> Result<DensityOperator> {
    isotropic_state(twirl_to_isotropic(rho)?)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

/// Haar-random unit vector from a normalized complex Gaussian.
pub fn haar_ket_from_rng<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Ket> {
    let shape = SubsystemShape::new(vec![d])?;
    loop {
        let amps = CVector::from_fn(d, |_, _| gaussian_complex(rng));
        if amps.norm() > 1e-300 {
            return Ket::new(shape, amps)?.normalized();
        }
    }
}

pub fn haar_ket(d: usize, seed: u64) -> Result<Ket> {
    haar_ket_from_rng(d, &mut seeded_rng(seed))
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase of `R`'s diagonal removed.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_complex(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            c(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Hilbert-Schmidt random density operator, `G G^dagger / Tr(G G^dagger)`.
pub fn random_density<R: Rng + ?Sized>(shape: SubsystemShape, rng: &mut R) -> DensityOperator {
    let n = shape.dim();
    let g = CMatrix::from_fn(n, n, |_, _| gaussian_complex(rng));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= c(tr, 0.0);
    m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityOperator::from_trusted(Operator::from_parts(shape, m))
}

/// Generalized Pauli operator `X^m Z^n`, with `X|j> = |j+1>` and `Z|j> = w^j |j>`.
pub fn weyl(d: usize, m: usize, n: usize) -> CMatrix {
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let mut w = CMatrix::zeros(d, d);
    for j in 0..d {
        let phase = C64::from_polar(1.0, omega * ((n * j) % d) as f64);
        w[((j + m) % d, j)] = phase;
    }
    w
}

/// Standard teleportation over `rho`: Alice's half is first rotated by the
/// adjoint of the fully-entangled-fraction maximizer so that `Phi+` is the
/// best-aligned maximally entangled state, then Alice measures the input and
/// her half in the generalized Bell basis `(W_k (x) 1)|Phi+>` and Bob applies
/// `W_k`.
pub fn standard_teleportation_choi(rho: &DensityOperator) -> Result<QuantumChannelChoi> {
    standard_teleportation_choi_with(rho, default_fef_solver().as_ref())
}

pub fn standard_teleportation_choi_with(
    rho: &DensityOperator,
    solver: &dyn FefSolver,
) -> Result<QuantumChannelChoi> {
    let d = rho.bipartite_dim()?;
    let fef = solver.solve(rho)?;
    let align = fef.maximizer.adjoint().kronecker(&CMatrix::identity(d, d));
    let aligned = rho.op().conjugate_by(&align);
    teleportation_choi_unaligned(&aligned, d)
}

/// Bell-measurement teleportation over a resource already in the desired frame.
pub(crate) fn teleportation_choi_unaligned(
    resource: &Operator,
    d: usize,
) -> Result<QuantumChannelChoi> {
    let phi = max_entangled(d)?;
    let id = CMatrix::identity(d, d);
    let outcomes: Vec<(CMatrix, CVector)> = (0..d)
        .flat_map(|m| (0..d).map(move |n| (m, n)))
        .map(|(m, n)| {
            let w = weyl(d, m, n);
            let bell = w.kronecker(&id) * phi.amplitudes();
            (w, bell)
        })
        .collect();
    let r = resource.matrix();
    QuantumChannelChoi::from_matrix_units(d, |i, j| {
        // (|i><j|_T (x) rho_AB) with T, A forming the measured pair
        let mut out = CMatrix::zeros(d, d);
        for (w, bell) in &outcomes {
            let mut bob = CMatrix::zeros(d, d);
            for b in 0..d {
                for bp in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..d {
                        let x = i * d + a;
                        let bx = bell[x].conj();
                        if bx == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for ap in 0..d {
                            let y = j * d + ap;
                            acc += bx * r[(a * d + b, ap * d + bp)] * bell[y];
                        }
                    }
                    bob[(b, bp)] = acc;
                }
            }
            out += w * bob * w.adjoint();
        }
        Ok(out)
    })
}

/// Generic `d x d` complex matrix from row-major `(re, im)` pairs.
pub fn matrix_from_pairs(n: usize, pairs: &[[f64; 2]]) -> Result<CMatrix> {
    if pairs.len() != n * n {
        return Err(Error::Parse(format!(
            "matrix has {} entries, expected {}",
            pairs.len(),
            n * n
        )));
    }
    Ok(DMatrix::from_row_iterator(
        n,
        n,
        pairs.iter().map(|[re, im]| c(*re, *im)),
    ))
}
