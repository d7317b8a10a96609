//! Controlled port-based teleportation over three-qudit pure states.
//!
//! One party (the controller) measures its qudit projectively; the other two
//! use the post-measurement pair as the port resource. The controller's
//! measurement is optimized numerically for qubits.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{
    default_fef_solver, fef_qubit_magic, teleportation_fidelity_from_f, FefSolver,
};
use crate::pbt::{port_scaling_factor, ports_scaled_teleportation_fidelity};
use crate::registry::{Registry, Strategy};
use crate::states::DensityOperator;
use crate::tensor::{c, permute_ket, CMatrix, CVector, Ket, Operator, SubsystemShape, C64};

pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const COEFFICIENT_TOL: f64 = 1e-10;
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Agreement required between the two ways of computing the control power.
pub const SCALING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::A, Party::B, Party::C];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The two remaining parties, in order.
    pub fn others(self) -> [Party; 2] {
        match self {
            Party::A => [Party::B, Party::C],
            Party::B => [Party::A, Party::C],
            Party::C => [Party::A, Party::B],
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Party::A => "A",
            Party::B => "B",
            Party::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Party::A),
            "B" | "b" => Ok(Party::B),
            "C" | "c" => Ok(Party::C),
            other => Err(Error::Parse(format!(
                "unknown party {other:?}, expected A, B or C"
            ))),
        }
    }
}

/// Pure state on three qudits `A B C` of equal dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct TripartiteState {
    ket: Ket,
}

impl TripartiteState {
    pub fn new(ket: Ket) -> Result<Self> {
        let dims = ket.shape().dims();
        if dims.len() != 3 || dims[0] != dims[1] || dims[1] != dims[2] {
            return Err(Error::InvalidShape(format!(
                "tripartite state needs three equal qudits, got {}",
                ket.shape()
            )));
        }
        if (ket.norm() - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidState(format!(
                "ket norm is {}, expected 1 within {NORMALIZATION_TOL:e}",
                ket.norm()
            )));
        }
        Ok(Self { ket })
    }

    pub fn from_amplitudes(d: usize, amps: CVector) -> Result<Self> {
        Self::new(Ket::new(SubsystemShape::uniform(d, 3)?, amps)?)
    }

    pub fn ket(&self) -> &Ket {
        &self.ket
    }

    pub fn d(&self) -> usize {
        self.ket.shape().dims()[0]
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let amps = self.ket.amplitudes() * C64::from_polar(1.0, phase);
        Self {
            ket: Ket::new(self.ket.shape().clone(), amps).expect("same shape"),
        }
    }

    /// Relabels parties: new position `q` holds old party `perm[q]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Result<Self> {
        Ok(Self {
            ket: permute_ket(&self.ket, &perm)?,
        })
    }

    /// Amplitudes as a `d x d^2` matrix with the controller's index first.
    fn controller_matrix(&self, party: Party) -> CMatrix {
        let [b, g] = party.others();
        let moved = permute_ket(&self.ket, &[party.index(), b.index(), g.index()])
            .expect("valid permutation");
        let d = self.d();
        CMatrix::from_fn(d, d * d, |i, r| moved.amplitudes()[i * d * d + r])
    }

    /// State of the two non-controller parties when the controller is ignored.
    pub fn reduced_pair(&self, party: Party) -> DensityOperator {
        let m = self.controller_matrix(party);
        let rho = m.transpose() * m.map(|z| z.conj());
        let d = self.d();
        DensityOperator::from_trusted(Operator::from_parts(
            SubsystemShape::uniform(d, 2).expect("valid dimension"),
            rho,
        ))
    }
}

fn check_coefficients(name: &str, coeffs: &[f64]) -> Result<()> {
    if let Some(x) = coeffs.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidState(format!(
            "{name} coefficients must be finite and non-negative, got {x}"
        )));
    }
    let norm: f64 = coeffs.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > COEFFICIENT_TOL {
        return Err(Error::InvalidState(format!(
            "{name} coefficients must have squares summing to 1 within {COEFFICIENT_TOL:e}, got {norm}"
        )));
    }
    Ok(())
}

/// `a|000> + b|111>`.
pub fn ghz_extended(a: f64, b: f64) -> Result<TripartiteState> {
    check_coefficients("GHZ", &[a, b])?;
    let mut amps = CVector::zeros(8);
    amps[0b000] = c(a, 0.0);
    amps[0b111] = c(b, 0.0);
    TripartiteState::from_amplitudes(2, amps)
}

/// `w0|000> + w1|100> + w2|101> + w3|110>`.
pub fn w_class(w0: f64, w1: f64, w2: f64, w3: f64) -> Result<TripartiteState> {
    check_coefficients("W-class", &[w0, w1, w2, w3])?;
    let mut amps = CVector::zeros(8);
    amps[0b000] = c(w0, 0.0);
    amps[0b100] = c(w1, 0.0);
    amps[0b101] = c(w2, 0.0);
    amps[0b110] = c(w3, 0.0);
    TripartiteState::from_amplitudes(2, amps)
}

/// Rank-one projective measurement on a single qudit.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveMeasurement {
    basis: Vec<CVector>,
}

impl ProjectiveMeasurement {
    pub fn new(basis: Vec<CVector>) -> Result<Self> {
        let d = basis.len();
        if d < 2 || basis.iter().any(|v| v.len() != d) {
            return Err(Error::InvalidShape(format!(
                "projective measurement needs d >= 2 vectors of length d, got {d}"
            )));
        }
        for i in 0..d {
            for j in 0..d {
                let g = basis[i].dotc(&basis[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                if (g - c(expected, 0.0)).norm() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidState(format!(
                        "measurement vectors {i} and {j} are not orthonormal within {ORTHONORMAL_TOL:e}"
                    )));
                }
            }
        }
        Ok(Self { basis })
    }

    pub fn computational(d: usize) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|i| CVector::from_fn(d, |k, _| if k == i { c(1.0, 0.0) } else { c(0.0, 0.0) }))
                .collect(),
        )
    }

    /// `|m0> = cos(t/2)|0> + e^{i p} sin(t/2)|1>`, `|m1> = sin(t/2)|0> - e^{i p} cos(t/2)|1>`.
    pub fn qubit(theta: f64, phi: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        let e = C64::from_polar(1.0, phi);
        let m0 = CVector::from_vec(vec![c(co, 0.0), e * s]);
        let m1 = CVector::from_vec(vec![c(s, 0.0), -e * co]);
        Self {
            basis: vec![m0, m1],
        }
    }

    pub fn basis(&self) -> &[CVector] {
        &self.basis
    }

    pub fn outcomes(&self) -> usize {
        self.basis.len()
    }
}

/// Outcome probability and normalized pair state on the two remaining
/// parties; zero-probability outcomes yield `(0, 1/d^2)`.
pub fn post_measurement_pair(
    state: &TripartiteState,
    party: Party,
    m: &ProjectiveMeasurement,
    outcome: usize,
) -> Result<(f64, DensityOperator)> {
    let d = state.d();
    if m.outcomes() != d {
        return Err(Error::InvalidShape(format!(
            "measurement has {} outcomes for qudits of dimension {d}",
            m.outcomes()
        )));
    }
    let vec = m.basis().get(outcome).ok_or(Error::IndexOutOfRange {
        index: outcome,
        len: d,
    })?;
    Ok(project(&state.controller_matrix(party), vec, d))
}

fn project(amps: &CMatrix, vec: &CVector, d: usize) -> (f64, DensityOperator) {
    let v = amps.transpose() * vec.map(|z| z.conj());
    let prob = v.norm_squared();
    let shape = SubsystemShape::uniform(d, 2).expect("valid dimension");
    if prob <= f64::MIN_POSITIVE {
        return (0.0, DensityOperator::maximally_mixed(shape));
    }
    let rho = (&v * v.adjoint()) / c(prob, 0.0);
    (
        prob,
        DensityOperator::from_trusted(Operator::from_parts(shape, rho)),
    )
}

/// Qubit controller objective `sum_i p_i (2 f_i + 1) / 3` at Bloch angles `(theta, phi)`.
fn qubit_objective(amps: &CMatrix, theta: f64, phi: f64) -> f64 {
    let m = ProjectiveMeasurement::qubit(theta, phi);
    m.basis()
        .iter()
        .map(|v| {
            let (p, pair) = project(amps, v, 2);
            if p == 0.0 {
                return 0.0;
            }
            let f = fef_qubit_magic(&pair).map(|r| r.value).unwrap_or(0.0);
            p * (2.0 * f + 1.0) / 3.0
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerOptions {
    pub theta_points: usize,
    pub phi_points: usize,
    /// Number of best grid cells refined by the simplex search.
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        Self {
            theta_points: 181,
            phi_points: 361,
            restarts: 10,
            tol: 1e-9,
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub optimizer: String,
    pub grid: [usize; 2],
    pub starts: usize,
    pub iterations: usize,
    pub converged: bool,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Clone, Debug)]
pub struct CtOptimum {
    pub value: f64,
    pub best: ProjectiveMeasurement,
    pub trace: OptimizerTrace,
}

/// Maximizes the controlled teleportation fidelity over the controller's measurement.
pub trait ControllerOptimizer: Strategy {
    fn optimize(&self, state: &TripartiteState, party: Party) -> Result<CtOptimum>;
}

fn require_qubits(state: &TripartiteState) -> Result<()> {
    if state.d() != 2 {
        return Err(Error::param(
            "d",
            state.d() as f64,
            "controller optimization supports qubits only",
        ));
    }
    Ok(())
}

fn grid_values(amps: &CMatrix, nt: usize, np: usize) -> Vec<(f64, f64, f64)> {
    let nt = nt.max(2);
    let np = np.max(2);
    let thetas: Vec<f64> = (0..nt)
        .map(|i| std::f64::consts::PI * i as f64 / (nt - 1) as f64)
        .collect();
    let phis: Vec<f64> = (0..np)
        .map(|j| std::f64::consts::TAU * j as f64 / (np - 1) as f64)
        .collect();
    thetas
        .par_iter()
        .flat_map_iter(|&t| phis.iter().map(move |&p| (t, p)))
        .map(|(t, p)| (qubit_objective(amps, t, p), t, p))
        .collect()
}

/// Maximum with ties broken toward the earliest grid cell.
fn grid_best(values: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    values
        .iter()
        .copied()
        .fold((f64::NEG_INFINITY, 0.0, 0.0), |acc, v| {
            if v.0 > acc.0 {
                v
            } else {
                acc
            }
        })
}

struct SimplexResult {
    point: [f64; 2],
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder-Mead maximization in two variables.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> SimplexResult {
    let mut pts = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut vals = pts.map(|p| -f(p));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        let spread = vals[2] - vals[0];
        let size = pts
            .iter()
            .map(|p| (p[0] - pts[0][0]).abs().max((p[1] - pts[0][1]).abs()))
            .fold(0.0, f64::max);
        if spread <= tol && size <= tol.sqrt() * 1e-2 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |t: f64| {
            [
                centroid[0] + t * (pts[2][0] - centroid[0]),
                centroid[1] + t * (pts[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = -f(reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = -f(expanded);
            (pts[2], vals[2]) = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (reflected, fr);
        } else {
            let contracted = if fr < vals[2] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = -f(contracted);
            if fc < vals[2].min(fr) {
                (pts[2], vals[2]) = (contracted, fc);
            } else {
                for k in 1..3 {
                    pts[k] = [
                        pts[0][0] + 0.5 * (pts[k][0] - pts[0][0]),
                        pts[0][1] + 0.5 * (pts[k][1] - pts[0][1]),
                    ];
                    vals[k] = -f(pts[k]);
                }
            }
        }
    }
    let best = (0..3)
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .expect("three vertices");
    SimplexResult {
        point: pts[best],
        value: -vals[best],
        iterations,
        converged,
    }
}

/// Dense Bloch-sphere grid followed by simplex refinement of the best cells.
pub struct GridSimplex {
    pub options: ControllerOptions,
}

impl Strategy for GridSimplex {
    fn name(&self) -> &'static str {
        "grid-simplex"
    }

    fn summary(&self) -> &'static str {
        "angular grid over the controller's basis, refined by Nelder-Mead restarts"
    }
}

impl ControllerOptimizer for GridSimplex {
    fn optimize(&self, state: &TripartiteState, party: Party) -> Result<CtOptimum> {
        require_qubits(state)?;
        let o = &self.options;
        let amps = state.controller_matrix(party);
        let mut values = grid_values(&amps, o.theta_points, o.phi_points);
        let (mut best, mut theta, mut phi) = grid_best(&values);
        values.sort_by(|a, b| b.0.total_cmp(&a.0));
        let step = std::f64::consts::PI / (o.theta_points.max(2) - 1) as f64;
        let runs: Vec<SimplexResult> = values
            .iter()
            .take(o.restarts)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&(_, t, p)| {
                nelder_mead(
                    |x| qubit_objective(&amps, x[0], x[1]),
                    [t, p],
                    step,
                    o.tol,
                    o.max_iter,
                )
            })
            .collect();
        let mut iterations = 0;
        let mut converged = true;
        for r in &runs {
            iterations += r.iterations;
            converged &= r.converged;
            if r.value > best {
                best = r.value;
                [theta, phi] = r.point;
            }
        }
        Ok(CtOptimum {
            value: best.clamp(0.0, 1.0),
            best: ProjectiveMeasurement::qubit(theta, phi),
            trace: OptimizerTrace {
                optimizer: self.name().into(),
                grid: [o.theta_points, o.phi_points],
                starts: runs.len(),
                iterations,
                converged,
                theta,
                phi,
            },
        })
    }
}

/// Grid search alone; with the default 721 x 1441 grid this is the slow reference.
pub struct DenseGrid {
    pub theta_points: usize,
    pub phi_points: usize,
}

impl Default for DenseGrid {
    fn default() -> Self {
        Self {
            theta_points: 721,
            phi_points: 1441,
        }
    }
}

impl Strategy for DenseGrid {
    fn name(&self) -> &'static str {
        "grid"
    }

    fn summary(&self) -> &'static str {
        "dense angular grid without refinement"
    }
}

impl ControllerOptimizer for DenseGrid {
    fn optimize(&self, state: &TripartiteState, party: Party) -> Result<CtOptimum> {
        require_qubits(state)?;
        let amps = state.controller_matrix(party);
        let values = grid_values(&amps, self.theta_points, self.phi_points);
        let (value, theta, phi) = grid_best(&values);
        Ok(CtOptimum {
            value: value.clamp(0.0, 1.0),
            best: ProjectiveMeasurement::qubit(theta, phi),
            trace: OptimizerTrace {
                optimizer: self.name().into(),
                grid: [self.theta_points, self.phi_points],
                starts: 0,
                iterations: 0,
                converged: true,
                theta,
                phi,
            },
        })
    }
}

pub fn default_controller_optimizer() -> Arc<dyn ControllerOptimizer> {
    Arc::new(GridSimplex {
        options: ControllerOptions::default(),
    })
}

pub fn controller_registry(options: ControllerOptions) -> Registry<dyn ControllerOptimizer> {
    Registry::new()
        .with(Arc::new(GridSimplex { options }) as Arc<dyn ControllerOptimizer>)
        .with(Arc::new(DenseGrid::default()))
}

/// Maximal controlled teleportation fidelity
/// `max_{M_i} sum_i Tr(M_i rho_party) F_T(rho^[i])`.
pub fn max_ct_fidelity(state: &TripartiteState, party: Party) -> Result<CtOptimum> {
    default_controller_optimizer().optimize(state, party)
}

/// Teleportation fidelity of the pair left after tracing out the controller.
pub fn uncontrolled_fidelity(
    state: &TripartiteState,
    party: Party,
    solver: &dyn FefSolver,
) -> Result<f64> {
    let f = solver.solve(&state.reduced_pair(party))?.value;
    teleportation_fidelity_from_f(f.clamp(0.0, 1.0), state.d())
}

/// `F_CT (1 - d^2 / 4M) + d / 4M`.
pub fn cpbt_fidelity_from_ct(f_ct: f64, m: usize, d: usize) -> Result<f64> {
    ports_scaled_teleportation_fidelity(f_ct, m, d)
}

pub fn cpbt_fidelity(state: &TripartiteState, party: Party, m: usize) -> Result<f64> {
    cpbt_fidelity_from_ct(max_ct_fidelity(state, party)?.value, m, state.d())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPowerReport {
    pub party: Party,
    #[serde(rename = "M")]
    pub m: usize,
    pub d: usize,
    /// Maximal CT fidelity.
    pub f_ct: f64,
    /// Maximal CPBT fidelity at `M` ports.
    pub f_ct_m: f64,
    /// Teleportation fidelity of the reduced pair, without ports.
    pub f_nc: f64,
    /// Uncontrolled fidelity at `M` ports.
    pub f_nc_m: f64,
    /// `f_ct - f_nc`.
    pub power_ct: f64,
    /// `f_ct_m - f_nc_m`.
    pub power_m: f64,
    /// `power_ct (1 - d^2 / 4M)`.
    pub power_m_scaled: f64,
    pub optimizer_trace: OptimizerTrace,
}

pub fn control_power(
    state: &TripartiteState,
    party: Party,
    m: usize,
) -> Result<ControlPowerReport> {
    control_power_with(
        state,
        party,
        m,
        &*default_controller_optimizer(),
        &*default_fef_solver(),
    )
}

pub fn control_power_with(
    state: &TripartiteState,
    party: Party,
    m: usize,
    optimizer: &dyn ControllerOptimizer,
    solver: &dyn FefSolver,
) -> Result<ControlPowerReport> {
    let d = state.d();
    let scale = port_scaling_factor(m, d)?;
    let opt = optimizer.optimize(state, party)?;
    let f_nc = uncontrolled_fidelity(state, party, solver)?;
    let f_ct_m = cpbt_fidelity_from_ct(opt.value, m, d)?;
    let f_nc_m = ports_scaled_teleportation_fidelity(f_nc, m, d)?;
    let power_m = f_ct_m - f_nc_m;
    let power_ct = opt.value - f_nc;
    let power_m_scaled = power_ct * scale;
    if (power_m - power_m_scaled).abs() > SCALING_TOL {
        return Err(Error::Inconsistent(format!(
            "control power {power_m} differs from scaled form {power_m_scaled}"
        )));
    }
    Ok(ControlPowerReport {
        party,
        m,
        d,
        f_ct: opt.value,
        f_ct_m,
        f_nc,
        f_nc_m,
        power_ct,
        power_m,
        power_m_scaled,
        optimizer_trace: opt.trace,
    })
}

pub fn control_power_all(state: &TripartiteState, m: usize) -> Result<Vec<ControlPowerReport>> {
    control_power_all_with(
        state,
        m,
        &*default_controller_optimizer(),
        &*default_fef_solver(),
    )
}

pub fn control_power_all_with(
    state: &TripartiteState,
    m: usize,
    optimizer: &dyn ControllerOptimizer,
    solver: &dyn FefSolver,
) -> Result<Vec<ControlPowerReport>> {
    Party::ALL
        .iter()
        .map(|&p| control_power_with(state, p, m, optimizer, solver))
        .collect()
}

/// Smallest per-party report; ties resolve toward A, then B, then C.
pub fn minimal_of(reports: &[ControlPowerReport]) -> Option<&ControlPowerReport> {
    reports
        .iter()
        .fold(None, |acc: Option<&ControlPowerReport>, r| match acc {
            Some(best) if best.power_m <= r.power_m => Some(best),
            _ => Some(r),
        })
}

pub fn minimal_control_power(state: &TripartiteState, m: usize) -> Result<ControlPowerReport> {
    let reports = control_power_all(state, m)?;
    Ok(minimal_of(&reports).expect("three parties").clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{max_entangled_state, seeded_rng};
    use crate::tensor::partial_trace;

    // Frozen from tools/oracles/cpbt_golden.py (721 x 1441 grid with scipy
    // Nelder-Mead polishing) for w_class(0, 1/sqrt3, 1/sqrt3, 1/sqrt3).
    const W_UNCONTROLLED_BC: f64 = 0.624_225_998_749_988_4;
    const W_CT_BC: f64 = 0.666_666_666_666_667_5;
    const W_CT_A: f64 = 0.888_888_888_888_890_1;

    fn w3() -> TripartiteState {
        let s = 1.0 / 3f64.sqrt();
        w_class(0.0, s, s, s).unwrap()
    }

    #[test]
    fn constructors_validate() {
        assert!(ghz_extended(0.6, 0.8).is_ok());
        assert!(ghz_extended(0.6, 0.6).is_err());
        assert!(ghz_extended(-0.6, 0.8).is_err());
        assert!(w_class(0.5, 0.5, 0.5, 0.5).is_ok());
        assert!(w_class(1.0, 0.1, 0.0, 0.0).is_err());
        let product = ghz_extended(1.0, 0.0).unwrap();
        assert_eq!(product.ket().amplitudes()[0], c(1.0, 0.0));
        let w = w_class(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(w.ket().amplitudes()[0b100], c(1.0, 0.0));
        assert!((w3().ket().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn measurement_validates() {
        assert!(ProjectiveMeasurement::new(vec![
            CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
            2
        ])
        .is_err());
        for (t, p) in [(0.3, 1.1), (2.0, 5.0)] {
            let m = ProjectiveMeasurement::qubit(t, p);
            assert!(ProjectiveMeasurement::new(m.basis().to_vec()).is_ok());
        }
    }

    #[test]
    fn reduced_pair_matches_partial_trace() {
        let g = ghz_extended(1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()).unwrap();
        let rho = Operator::projector(g.ket());
        for party in Party::ALL {
            let keep: Vec<usize> = party.others().iter().map(|p| p.index()).collect();
            let expected = partial_trace(&rho, &keep).unwrap();
            assert!(g.reduced_pair(party).op().max_abs_diff(&expected) < 1e-15);
        }
        let bc = g.reduced_pair(Party::A);
        assert!((bc.op().matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((bc.op().matrix()[(3, 3)].re - 0.5).abs() < 1e-15);
        assert!(bc.op().matrix()[(0, 3)].norm() < 1e-15);
    }

    #[test]
    fn ghz_measurements() {
        let g = ghz_extended(1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()).unwrap();
        let (p, pair) = post_measurement_pair(
            &g,
            Party::C,
            &ProjectiveMeasurement::computational(2).unwrap(),
            0,
        )
        .unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((pair.op().matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        let x = ProjectiveMeasurement::qubit(std::f64::consts::FRAC_PI_2, 0.0);
        let phi = max_entangled_state(2).unwrap();
        for k in 0..2 {
            let (p, pair) = post_measurement_pair(&g, Party::C, &x, k).unwrap();
            assert!((p - 0.5).abs() < 1e-14);
            assert!((fef_qubit_magic(&pair).unwrap().value - 1.0).abs() < 1e-12);
            if k == 0 {
                assert!(pair.op().max_abs_diff(phi.op()) < 1e-14);
            }
        }
        assert!(post_measurement_pair(&g, Party::C, &x, 2).is_err());
    }

    #[test]
    fn product_state_and_zero_probability() {
        let prod = ghz_extended(1.0, 0.0).unwrap();
        let comp = ProjectiveMeasurement::computational(2).unwrap();
        let (p1, pair1) = post_measurement_pair(&prod, Party::B, &comp, 1).unwrap();
        assert_eq!(p1, 0.0);
        assert!(
            pair1.op().max_abs_diff(
                &DensityOperator::maximally_mixed(SubsystemShape::uniform(2, 2).unwrap())
                    .into_operator()
            ) < 1e-15
        );
        let m = ProjectiveMeasurement::qubit(1.0, 0.4);
        let mut total = 0.0;
        for k in 0..2 {
            let (p, pair) = post_measurement_pair(&prod, Party::A, &m, k).unwrap();
            total += p;
            assert!((pair.op().matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = seeded_rng(4);
        for _ in 0..20 {
            let k = crate::states::haar_ket_from_rng(8, &mut rng).unwrap();
            let s = TripartiteState::from_amplitudes(2, k.amplitudes().clone()).unwrap();
            let u = crate::states::haar_unitary(2, &mut rng);
            let m = ProjectiveMeasurement::new(vec![
                u.column(0).into_owned(),
                u.column(1).into_owned(),
            ])
            .unwrap();
            for party in Party::ALL {
                let total: f64 = (0..2)
                    .map(|i| post_measurement_pair(&s, party, &m, i).unwrap().0)
                    .sum();
                assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn simplex_finds_quadratic_peak() {
        let r = nelder_mead(
            |x| 1.0 - (x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.7).powi(2),
            [0.0, 0.0],
            0.1,
            1e-12,
            5000,
        );
        assert!(r.converged);
        assert!((r.point[0] - 0.3).abs() < 1e-5 && (r.point[1] + 0.7).abs() < 1e-5);
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn max_ct_examples() {
        let h = 1.0 / 2f64.sqrt();
        let g = ghz_extended(h, h).unwrap();
        assert!((max_ct_fidelity(&g, Party::C).unwrap().value - 1.0).abs() < 1e-9);
        let prod = ghz_extended(1.0, 0.0).unwrap();
        assert!((max_ct_fidelity(&prod, Party::A).unwrap().value - 2.0 / 3.0).abs() < 1e-12);
        let g = ghz_extended(0.6, 0.8).unwrap();
        let r = control_power(&g, Party::B, 4).unwrap();
        assert!((r.power_ct - 0.32).abs() < 1e-6);
        assert!((r.power_m - 0.24).abs() < 1e-6);
    }

    #[test]
    fn cpbt_examples() {
        assert!((cpbt_fidelity_from_ct(1.0, 10, 2).unwrap() - 0.95).abs() < 1e-15);
        assert!((cpbt_fidelity_from_ct(2.0 / 3.0, 10, 2).unwrap() - 0.65).abs() < 1e-15);
        let prod = ghz_extended(1.0, 0.0).unwrap();
        assert!((cpbt_fidelity(&prod, Party::A, 10).unwrap() - 0.65).abs() < 1e-12);
        for m in [2, 5] {
            let r = control_power(&prod, Party::C, m).unwrap();
            assert!(r.power_m.abs() < 1e-8);
        }
        let h = 1.0 / 2f64.sqrt();
        let g = ghz_extended(h, h).unwrap();
        let min = minimal_control_power(&g, 10).unwrap();
        assert!((min.power_m - 0.3).abs() < 1e-6);
    }

    #[test]
    fn w_class_matches_oracle() {
        let w = w3();
        let reports = control_power_all(&w, 10).unwrap();
        assert!((reports[0].f_ct - W_CT_A).abs() < 1e-9);
        assert!(reports[0].power_m.abs() < 1e-9);
        for r in &reports[1..] {
            assert!((r.f_ct - W_CT_BC).abs() < 1e-9);
            assert!((r.f_nc - W_UNCONTROLLED_BC).abs() < 1e-12);
            assert!((r.power_m - (3.0 - 5f64.sqrt()) / 20.0).abs() < 1e-9);
        }
        assert_eq!(minimal_of(&reports).unwrap().party, Party::A);
    }

    #[test]
    fn minimal_prefers_first_on_ties() {
        let h = 1.0 / 2f64.sqrt();
        let g = ghz_extended(h, h).unwrap();
        let mut reports = control_power_all(&g, 10).unwrap();
        for r in &mut reports {
            r.power_m = 0.3;
        }
        assert_eq!(minimal_of(&reports).unwrap().party, Party::A);
    }

    #[test]
    fn invariant_under_phase_and_relabeling() {
        let w = w3();
        let base = max_ct_fidelity(&w, Party::B).unwrap().value;
        let phased = max_ct_fidelity(&w.with_global_phase(0.9), Party::B)
            .unwrap()
            .value;
        assert!((base - phased).abs() < 1e-6);
        // swapping A and C leaves party B's problem unchanged
        let swapped = w.permuted([2, 1, 0]).unwrap();
        assert!((max_ct_fidelity(&swapped, Party::B).unwrap().value - base).abs() < 1e-6);
    }

    #[test]
    fn optimizer_needs_qubits() {
        let amps = CVector::from_fn(27, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let s = TripartiteState::from_amplitudes(3, amps).unwrap();
        assert!(max_ct_fidelity(&s, Party::A).is_err());
        assert!(uncontrolled_fidelity(&s, Party::A, &*default_fef_solver()).is_ok());
    }

    #[test]
    fn party_parsing() {
        assert_eq!("b".parse::<Party>().unwrap(), Party::B);
        assert!("D".parse::<Party>().is_err());
        assert_eq!(Party::C.to_string(), "C");
    }
}
