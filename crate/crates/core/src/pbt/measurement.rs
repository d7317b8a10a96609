use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::{Registry, Strategy};
use crate::tensor::{eigh, pinv_sqrt_with_support, Operator};

use super::{port_ensemble, PbtSetup};

/// Completeness tolerance for measurement elements.
pub const COMPLETENESS_TOL: f64 = 1e-8;

/// Finite list of positive operators on Alice's ports and the input system.
#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<Operator>,
    support_rank: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PovmDiagnostics {
    /// Largest entry of `|sum_t Pi_t - 1|`.
    pub completeness_error: f64,
    /// Smallest eigenvalue over all elements.
    pub min_eigenvalue: f64,
}

impl Povm {
    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Rank of the ensemble average the measurement was built from.
    pub fn support_rank(&self) -> usize {
        self.support_rank
    }

    pub fn diagnostics(&self) -> Result<PovmDiagnostics> {
        let first = self
            .elements
            .first()
            .ok_or_else(|| Error::InvalidShape("empty measurement".into()))?;
        let mut total = Operator::zeros(first.shape().clone());
        let mut min_eigenvalue = f64::INFINITY;
        for e in &self.elements {
            total = &total + e;
            min_eigenvalue = min_eigenvalue.min(eigh(e)?.values[0]);
        }
        let id = Operator::identity(first.shape().clone());
        Ok(PovmDiagnostics {
            completeness_error: total.max_abs_diff(&id),
            min_eigenvalue,
        })
    }

    /// Checks completeness and positivity.
    pub fn validate(&self) -> Result<PovmDiagnostics> {
        let diag = self.diagnostics()?;
        if diag.completeness_error > COMPLETENESS_TOL {
            return Err(Error::Inconsistent(format!(
                "measurement elements sum to identity only within {:e}",
                diag.completeness_error
            )));
        }
        if diag.min_eigenvalue < -crate::tensor::PSD_TOL {
            return Err(Error::NotPositive {
                min_eigenvalue: diag.min_eigenvalue,
            });
        }
        Ok(diag)
    }
}

/// `Pi_t = S^{-1/2} eta_t S^{-1/2} + (1 - P_supp(S)) / M` with `S = sum_t eta_t`.
///
/// The kernel of `S` is shared equally between the elements so the result is
/// complete and symmetric under port relabeling.
pub fn pretty_good_measurement(ensemble: &[Operator]) -> Result<Povm> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidShape("empty ensemble".into()))?;
    let mut s = Operator::zeros(first.shape().clone());
    for eta in ensemble {
        s = &s + eta;
    }
    let root = pinv_sqrt_with_support(&s, None)?;
    let m = ensemble.len() as f64;
    let kernel = (&Operator::identity(s.shape().clone()) - &root.support).scale(1.0 / m);
    let elements = ensemble
        .iter()
        .map(|eta| {
            let core = &(&root.inv_sqrt * eta) * &root.inv_sqrt;
            (&core + &kernel).symmetrized()
        })
        .collect();
    Ok(Povm {
        elements,
        support_rank: root.rank,
    })
}

/// How Alice's joint measurement over the ports and the input is chosen.
pub trait PortMeasurement: Strategy {
    fn build(&self, setup: &PbtSetup) -> Result<Povm>;

    /// Whether the measurement changes with the resource (as opposed to only
    /// with `d`, `M` and Alice's operation).
    fn depends_on_resource(&self) -> bool;
}

/// The standard protocol: the pretty good measurement of the ideal,
/// maximally entangled port ensemble, conjugated by Alice's operation.
pub struct StandardPgm;

impl Strategy for StandardPgm {
    fn name(&self) -> &'static str {
        "pgm"
    }

    fn summary(&self) -> &'static str {
        "pretty good measurement of the ideal maximally entangled port ensemble"
    }
}

impl PortMeasurement for StandardPgm {
    fn build(&self, setup: &PbtSetup) -> Result<Povm> {
        setup.check_fidelity_cap()?;
        pretty_good_measurement(&port_ensemble(&setup.ideal())?)
    }

    fn depends_on_resource(&self) -> bool {
        false
    }
}

/// Pretty good measurement of the actual (possibly noisy) port ensemble.
pub struct AdaptedPgm;

impl Strategy for AdaptedPgm {
    fn name(&self) -> &'static str {
        "pgm-adapted"
    }

    fn summary(&self) -> &'static str {
        "pretty good measurement rebuilt from the actual resource's port ensemble"
    }
}

impl PortMeasurement for AdaptedPgm {
    fn build(&self, setup: &PbtSetup) -> Result<Povm> {
        setup.check_fidelity_cap()?;
        pretty_good_measurement(&port_ensemble(setup)?)
    }

    fn depends_on_resource(&self) -> bool {
        true
    }
}

pub fn default_measurement() -> Arc<dyn PortMeasurement> {
    Arc::new(StandardPgm)
}

pub fn measurement_registry() -> Registry<dyn PortMeasurement> {
    Registry::new()
        .with(Arc::new(StandardPgm) as Arc<dyn PortMeasurement>)
        .with(Arc::new(AdaptedPgm))
}

/// The standard protocol's measurement for `setup`.
pub fn pgm(setup: &PbtSetup) -> Result<Povm> {
    StandardPgm.build(setup)
}
