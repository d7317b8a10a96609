//! Port-based teleportation over `M` copies of an arbitrary bipartite resource.
//!
//! Subsystem layout: Alice's ports `A_1..A_M` come first, followed by Bob's
//! kept port (relabeled `B`) or the input system `T`. Port states and the
//! ensemble live on `A_1..A_M B`; measurement elements live on `A_1..A_M T`.

mod asymptotics;
mod measurement;

pub use asymptotics::*;
pub use measurement::*;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fidelity::teleportation_fidelity_from_f;
use crate::states::{
    isotropic_state, max_entangled_state, DensityOperator, IsotropicParam, QuantumChannelChoi,
};
use crate::tensor::{
    ambient_dimension, c, op_sqrt, partial_trace, permute_subsystems, tensor, CMatrix, Operator,
    SubsystemShape, C64, DEFAULT_DIM_CAP,
};

/// Allowed deviation of the conjugated resource's trace from 1.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// The state shared on every port.
#[derive(Clone, Debug, PartialEq)]
pub enum Resource {
    MaxEntangled,
    Isotropic(f64),
    Custom(DensityOperator),
}

impl Resource {
    pub fn label(&self) -> &'static str {
        match self {
            Resource::MaxEntangled => "maxent",
            Resource::Isotropic(_) => "isotropic",
            Resource::Custom(_) => "custom",
        }
    }

    /// Port symmetric under swapping any two ports; true for every product resource.
    pub fn is_symmetric(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbtSetup {
    d: usize,
    ports: usize,
    resource: Resource,
    alice_op: Option<Operator>,
    cap: usize,
}

impl PbtSetup {
    pub fn new(d: usize, ports: usize, resource: Resource) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", d as f64, "must be at least 2"));
        }
        if ports == 0 {
            return Err(Error::param("M", 0.0, "must be at least 1"));
        }
        match &resource {
            Resource::Isotropic(p) if !(0.0..=1.0).contains(p) => {
                return Err(Error::param("p", *p, "must lie in [0, 1]"));
            }
            Resource::Custom(rho) if rho.shape().dims() != [d, d] => {
                return Err(Error::InvalidShape(format!(
                    "custom resource has shape {}, expected [{d}x{d}]",
                    rho.shape()
                )));
            }
            _ => {}
        }
        Ok(Self {
            d,
            ports,
            resource,
            alice_op: None,
            cap: DEFAULT_DIM_CAP,
        })
    }

    pub fn max_entangled(d: usize, ports: usize) -> Result<Self> {
        Self::new(d, ports, Resource::MaxEntangled)
    }

    pub fn isotropic(d: usize, ports: usize, p: f64) -> Result<Self> {
        Self::new(d, ports, Resource::Isotropic(p))
    }

    /// Alice's operation `O` on her `M` qudits; requires `Tr[O O^dagger] = d^M`.
    pub fn with_alice_op(mut self, op: Operator) -> Result<Self> {
        let expected = vec![self.d; self.ports];
        if op.shape().dims() != expected.as_slice() {
            return Err(Error::InvalidShape(format!(
                "Alice's operation has shape {}, expected {} qudits of dimension {}",
                op.shape(),
                self.ports,
                self.d
            )));
        }
        let norm = (op.matrix() * op.matrix().adjoint()).trace().re;
        let target = ambient_dimension(self.d, self.ports) as f64;
        if (norm - target).abs() > 1e-6 * target {
            return Err(Error::param(
                "Tr[O O^dagger]",
                norm,
                "must equal d^M within 1e-6 d^M",
            ));
        }
        self.alice_op = Some(op);
        self.check_normalization()?;
        Ok(self)
    }

    /// `Tr[(O (x) 1) rho^{(x)M} (O^dagger (x) 1)] = Tr[O^dagger O rho_A^{(x)M}]`; equals 1 for
    /// every normalized `O` when Alice's marginal is maximally mixed, and for unitary `O` always.
    pub fn resource_normalization(&self) -> Result<f64> {
        let Some(o) = &self.alice_op else {
            return Ok(1.0);
        };
        let marginal = partial_trace(self.resource_state()?.op(), &[0])?;
        let power = tensor_power(&marginal, self.ports).expect("at least one port");
        let gram = o.matrix().adjoint() * o.matrix();
        Ok((gram * power.matrix()).trace().re)
    }

    fn check_normalization(&self) -> Result<()> {
        let norm = self.resource_normalization()?;
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Inconsistent(format!(
                "Alice's operation leaves the {} resource with trace {norm}; \
                 a non-unitary operation needs maximally mixed marginals on Alice's side",
                self.resource.label()
            )));
        }
        Ok(())
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn resource(&self) -> &Resource {
        &self.resource
    }

    pub fn alice_op(&self) -> Option<&Operator> {
        self.alice_op.as_ref()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Same ports, dimension and Alice operation, with maximally entangled ports.
    pub fn ideal(&self) -> PbtSetup {
        PbtSetup {
            resource: Resource::MaxEntangled,
            ..self.clone()
        }
    }

    pub fn with_resource(&self, resource: Resource) -> Result<PbtSetup> {
        let mut s = PbtSetup::new(self.d, self.ports, resource)?;
        s.alice_op = self.alice_op.clone();
        s.cap = self.cap;
        s.check_normalization()?;
        Ok(s)
    }

    pub fn resource_state(&self) -> Result<DensityOperator> {
        match &self.resource {
            Resource::MaxEntangled => max_entangled_state(self.d),
            Resource::Isotropic(p) => isotropic_state(IsotropicParam::new(*p, self.d)?),
            Resource::Custom(rho) => Ok(rho.clone()),
        }
    }

    fn check(&self, exponent: usize) -> Result<()> {
        let requested = ambient_dimension(self.d, exponent);
        if requested > self.cap as u128 {
            return Err(Error::CapExceeded {
                requested,
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Port states and measurement elements: `d^(M+1)`.
    pub fn check_fidelity_cap(&self) -> Result<()> {
        self.check(self.ports + 1)
    }

    /// Full Choi construction, counting every port pair, the input and a reference: `d^(2M+2)`.
    pub fn check_choi_cap(&self) -> Result<()> {
        self.check(2 * self.ports + 2)
    }

    /// The full `2M`-qudit resource: `d^(2M)`.
    pub fn check_resource_cap(&self) -> Result<()> {
        self.check(2 * self.ports)
    }
}

/// Seeded random Alice operation, a Ginibre matrix rescaled to `Tr[O O^dagger] = d^M`.
pub fn random_alice_operation<R: Rng + ?Sized>(
    d: usize,
    ports: usize,
    rng: &mut R,
) -> Result<Operator> {
    let shape = SubsystemShape::uniform(d, ports)?;
    let n = shape.dim();
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        c(re, im)
    });
    let norm = (&g * g.adjoint()).trace().re;
    let scale = (n as f64 / norm).sqrt();
    Operator::new(shape, g * c(scale, 0.0))
}

/// Per-port states `sigma^(t)` on `A_1..A_M B`.
#[derive(Clone, Debug)]
pub struct PortStates {
    sigmas: Vec<Operator>,
}

impl PortStates {
    pub fn sigmas(&self) -> &[Operator] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }
}

/// Reorders an operator laid out as `(A_t, B, A_others ascending)` into `(A_1..A_M, B)`.
fn place_port_pair(op: &Operator, t: usize, ports: usize) -> Result<Operator> {
    let others: Vec<usize> = (0..ports).filter(|&s| s != t).collect();
    let mut perm = Vec::with_capacity(ports + 1);
    for q in 0..ports {
        if q == t {
            perm.push(0);
        } else {
            let k = others.iter().position(|&s| s == q).expect("other port");
            perm.push(2 + k);
        }
    }
    perm.push(1);
    permute_subsystems(op, &perm)
}

fn tensor_power(op: &Operator, n: usize) -> Option<Operator> {
    let mut acc: Option<Operator> = None;
    for _ in 0..n {
        acc = Some(match acc {
            None => op.clone(),
            Some(a) => tensor(&a, op),
        });
    }
    acc
}

/// `sigma^(t) = [Tr_{B_others} rho^{(x)M}]_{B_t -> B}`.
///
/// The partial trace factorizes over the product resource, so each spectator
/// pair is reduced to Alice's marginal before the tensor product is formed.
pub fn port_states(setup: &PbtSetup) -> Result<PortStates> {
    setup.check_fidelity_cap()?;
    let pair = setup.resource_state()?;
    let marginal = partial_trace(pair.op(), &[0])?;
    let spectators = tensor_power(&marginal, setup.ports - 1);
    let sigmas = (0..setup.ports)
        .map(|t| {
            let laid_out = match &spectators {
                Some(s) => tensor(pair.op(), s),
                None => pair.op().clone(),
            };
            place_port_pair(&laid_out, t, setup.ports)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PortStates { sigmas })
}

/// The resource `rho^{(x)M}` on `A_1..A_M B_1..B_M`, conjugated by Alice's operation.
pub fn full_resource(setup: &PbtSetup) -> Result<Operator> {
    setup.check_resource_cap()?;
    let pair = setup.resource_state()?;
    let interleaved = tensor_power(pair.op(), setup.ports).expect("at least one port");
    let m = setup.ports;
    let perm: Vec<usize> = (0..2 * m)
        .map(|q| if q < m { 2 * q } else { 2 * (q - m) + 1 })
        .collect();
    let grouped = permute_subsystems(&interleaved, &perm)?;
    Ok(match &setup.alice_op {
        Some(o) => grouped.conjugate_by(&o.matrix().kronecker(&CMatrix::identity(
            grouped.dim() / o.dim(),
            grouped.dim() / o.dim(),
        ))),
        None => grouped,
    })
}

/// Port states by brute force: build all `2M` qudits, trace out every other
/// `B_s`. Limited by the resource cap `d^(2M)`.
pub fn port_states_brute_force(setup: &PbtSetup) -> Result<PortStates> {
    let bare = PbtSetup {
        alice_op: None,
        ..setup.clone()
    };
    let full = full_resource(&bare)?;
    let m = setup.ports;
    let sigmas = (0..m)
        .map(|t| {
            let keep: Vec<usize> = (0..m).chain(std::iter::once(m + t)).collect();
            partial_trace(&full, &keep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PortStates { sigmas })
}

fn binomial(n: usize, k: isize) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = k as usize;
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Port state over isotropic copies written as the binomial sum over how many
/// spectator pairs are depolarized:
/// `sum_r p^(M-r) (1-p)^r [C(M-1, r) Phi+_{A_t B} (x) 1 / d^(M-1) + C(M-1, r-1) 1 / d^(M+1)]`.
pub fn isotropic_port_state_binomial(d: usize, ports: usize, t: usize, p: f64) -> Result<Operator> {
    if t >= ports {
        return Err(Error::IndexOutOfRange {
            index: t,
            len: ports,
        });
    }
    IsotropicParam::new(p, d)?;
    let phi = max_entangled_state(d)?;
    let pair_term = match ports {
        1 => phi.op().clone(),
        _ => tensor(
            phi.op(),
            &Operator::identity(SubsystemShape::uniform(d, ports - 1)?),
        ),
    };
    let pair_term = place_port_pair(&pair_term, t, ports)?;
    let shape = pair_term.shape().clone();
    let mut coeff_pair = 0.0;
    let mut coeff_id = 0.0;
    for r in 0..=ports {
        let w = p.powi((ports - r) as i32) * (1.0 - p).powi(r as i32);
        coeff_pair += w * binomial(ports - 1, r as isize);
        coeff_id += w * binomial(ports - 1, r as isize - 1);
    }
    let d_f = d as f64;
    let pair_scale = coeff_pair / d_f.powi(ports as i32 - 1);
    let id_scale = coeff_id / d_f.powi(ports as i32 + 1);
    Ok(&pair_term.scale(pair_scale) + &Operator::identity(shape).scale(id_scale))
}

/// `eta_t = (O (x) 1) sigma^(t) (O^dagger (x) 1)`; `O` defaults to the identity.
pub fn port_ensemble(setup: &PbtSetup) -> Result<Vec<Operator>> {
    let states = port_states(setup)?;
    Ok(match &setup.alice_op {
        None => states.sigmas,
        Some(o) => {
            let lifted = o.matrix().kronecker(&CMatrix::identity(setup.d, setup.d));
            states
                .sigmas
                .iter()
                .map(|s| s.conjugate_by(&lifted))
                .collect()
        }
    })
}

/// `Tr[Pi_t eta_t] / d^2` for every port, with elements on `A T` read on `A B`.
pub fn port_contributions(setup: &PbtSetup, povm: &Povm) -> Result<Vec<f64>> {
    let etas = port_ensemble(setup)?;
    if povm.len() != etas.len() {
        return Err(Error::InvalidShape(format!(
            "measurement has {} elements for {} ports",
            povm.len(),
            etas.len()
        )));
    }
    let d2 = (setup.d * setup.d) as f64;
    Ok(povm
        .elements()
        .iter()
        .zip(&etas)
        .map(|(pi, eta)| pi.trace_product(eta).re / d2)
        .collect())
}

pub fn fidelity_with_povm(setup: &PbtSetup, povm: &Povm) -> Result<f64> {
    Ok(port_contributions(setup, povm)?
        .iter()
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// Entanglement fidelity of the standard protocol:
/// `F = (1/d^2) sum_t Tr[Pi_t (O (x) 1) sigma^(t) (O^dagger (x) 1)]`.
pub fn pbt_entanglement_fidelity(setup: &PbtSetup) -> Result<f64> {
    pbt_entanglement_fidelity_with(setup, &StandardPgm)
}

pub fn pbt_entanglement_fidelity_with(
    setup: &PbtSetup,
    measurement: &dyn PortMeasurement,
) -> Result<f64> {
    let povm = measurement.build(setup)?;
    fidelity_with_povm(setup, &povm)
}

pub fn pbt_teleportation_fidelity(setup: &PbtSetup) -> Result<f64> {
    teleportation_fidelity_from_f(pbt_entanglement_fidelity(setup)?, setup.d)
}

/// Choi state of the PBT channel, from
/// `Lambda(X) = sum_t Tr_{A T}[(Pi_t (x) 1_B)(eta_t (x) X_T)]`.
pub fn pbt_channel_choi(setup: &PbtSetup) -> Result<QuantumChannelChoi> {
    pbt_channel_choi_with(setup, &StandardPgm)
}

pub fn pbt_channel_choi_with(
    setup: &PbtSetup,
    measurement: &dyn PortMeasurement,
) -> Result<QuantumChannelChoi> {
    setup.check_choi_cap()?;
    let povm = measurement.build(setup)?;
    let etas = port_ensemble(setup)?;
    let d = setup.d;
    let na = ambient_dimension(d, setup.ports) as usize;
    QuantumChannelChoi::from_matrix_units(d, |i, j| {
        let mut out = CMatrix::zeros(d, d);
        for (pi, eta) in povm.elements().iter().zip(&etas) {
            let pm = pi.matrix();
            let em = eta.matrix();
            for b in 0..d {
                for bp in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..na {
                        for ap in 0..na {
                            acc += pm[(a * d + j, ap * d + i)] * em[(ap * d + b, a * d + bp)];
                        }
                    }
                    out[(b, bp)] += acc;
                }
            }
        }
        Ok(out)
    })
}

/// The same channel evaluated literally on the full `A B T` space:
/// `Lambda(X) = sum_t [Tr_{A, B_others, T} sqrt(Pi_t)(phi (x) X)sqrt(Pi_t)]_{B_t -> B}`.
/// Limited by `d^(2M+1) <= cap`; intended for cross-checking small setups.
pub fn pbt_channel_choi_literal(
    setup: &PbtSetup,
    measurement: &dyn PortMeasurement,
) -> Result<QuantumChannelChoi> {
    setup.check(2 * setup.ports + 1)?;
    let povm = measurement.build(setup)?;
    let phi = full_resource(setup)?;
    let d = setup.d;
    let m = setup.ports;
    let bob = Operator::identity(SubsystemShape::uniform(d, m)?);
    // (A, T, B_1..B_M) -> (A, B_1..B_M, T)
    let perm: Vec<usize> = (0..m)
        .chain((0..m).map(|k| m + 1 + k))
        .chain(std::iter::once(m))
        .collect();
    let roots = povm
        .elements()
        .iter()
        .map(|pi| permute_subsystems(&tensor(&op_sqrt(pi)?, &bob), &perm))
        .collect::<Result<Vec<_>>>()?;
    let input_shape = SubsystemShape::new(vec![d])?;
    QuantumChannelChoi::from_matrix_units(d, |i, j| {
        let mut unit = CMatrix::zeros(d, d);
        unit[(i, j)] = c(1.0, 0.0);
        let joint = tensor(&phi, &Operator::new(input_shape.clone(), unit)?);
        let mut out = CMatrix::zeros(d, d);
        for (t, k) in roots.iter().enumerate() {
            let measured = &(k * &joint) * &k.adjoint();
            out += partial_trace(&measured, &[m + t])?.matrix();
        }
        Ok(out)
    })
}
