//! Leading-order large-`M` expressions and the exact depolarized-resource identity.
//!
//! Every estimate keeps the leading value and the `1/M` correction separate;
//! the `O(M^{-3/2+eps})` remainder is never evaluated.

use serde::Serialize;

use crate::error::{Error, Result};

pub const REMAINDER_NOTE: &str = "remainder O(M^(-3/2+eps)) not evaluated";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticEstimate {
    pub leading_value: f64,
    pub correction: f64,
    #[serde(skip)]
    pub order_note: &'static str,
}

impl AsymptoticEstimate {
    fn new(leading_value: f64, correction: f64) -> Self {
        Self {
            leading_value,
            correction,
            order_note: REMAINDER_NOTE,
        }
    }

    /// `leading + correction` without clamping; can leave `[0, 1]` for small `M`.
    pub fn raw_value(&self) -> f64 {
        self.leading_value + self.correction
    }

    /// `leading + correction` clamped to the physical range.
    pub fn value(&self) -> f64 {
        self.raw_value().clamp(0.0, 1.0)
    }
}

fn check_ports(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("M", 0.0, "must be at least 1"));
    }
    Ok(m as f64)
}

fn check_dim(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::param("d", d as f64, "must be at least 2"));
    }
    Ok(d as f64)
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", p, "must lie in [0, 1]"));
    }
    Ok(())
}

fn check_fef(f: f64, d: f64) -> Result<()> {
    if !(1.0 / (d * d) - 1e-12..=1.0 + 1e-12).contains(&f) {
        return Err(Error::param("f", f, "must lie in [1/d^2, 1]"));
    }
    Ok(())
}

/// Standard protocol: `F(M) = 1 - (d^2 - 1) / 4M`.
pub fn asymptotic_entanglement_fidelity(m: usize, d: usize) -> Result<AsymptoticEstimate> {
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    Ok(AsymptoticEstimate::new(1.0, -(d * d - 1.0) / (4.0 * m)))
}

/// Standard protocol: `F_T(M) = 1 - d(d - 1) / 4M`.
pub fn asymptotic_teleportation_fidelity(m: usize, d: usize) -> Result<AsymptoticEstimate> {
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    Ok(AsymptoticEstimate::new(1.0, -d * (d - 1.0) / (4.0 * m)))
}

/// Exact entanglement fidelity over isotropic copies for a fixed measurement:
/// `p F_ideal + (1 - p) / d^2`.
pub fn depolarized_fidelity(p: f64, f_ideal: f64, d: usize) -> Result<f64> {
    check_p(p)?;
    let d = check_dim(d)?;
    if !(0.0..=1.0).contains(&f_ideal) {
        return Err(Error::param("F", f_ideal, "must lie in [0, 1]"));
    }
    Ok(p * f_ideal + (1.0 - p) / (d * d))
}

/// Teleportation fidelity over isotropic copies: `(d^2 p F + d + 1 - p) / (d (d + 1))`.
pub fn depolarized_teleportation_fidelity(p: f64, f_ideal: f64, d: usize) -> Result<f64> {
    check_p(p)?;
    let df = check_dim(d)?;
    if !(0.0..=1.0).contains(&f_ideal) {
        return Err(Error::param("F", f_ideal, "must lie in [0, 1]"));
    }
    Ok((df * df * p * f_ideal + df + 1.0 - p) / (df * (df + 1.0)))
}

/// The same quantity written through the ideal teleportation fidelity:
/// `p F_T + (1 - p) / d`.
pub fn depolarized_teleportation_fidelity_from_ft(p: f64, ft_ideal: f64, d: usize) -> Result<f64> {
    check_p(p)?;
    let d = check_dim(d)?;
    Ok(p * ft_ideal + (1.0 - p) / d)
}

/// Isotropic copies: `F(M) = f(rho_p) - p (d^2 - 1) / 4M` with `f(rho_p) = (1 + (d^2 - 1) p) / d^2`.
pub fn asymptotic_isotropic_fidelity(p: f64, m: usize, d: usize) -> Result<AsymptoticEstimate> {
    check_p(p)?;
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    let d2 = d * d;
    Ok(AsymptoticEstimate::new(
        (1.0 + (d2 - 1.0) * p) / d2,
        -p * (d2 - 1.0) / (4.0 * m),
    ))
}

/// Isotropic copies: `F_T(M) = F_T(Lambda_{rho_p}) - p d (d - 1) / 4M`.
pub fn asymptotic_isotropic_teleportation_fidelity(
    p: f64,
    m: usize,
    d: usize,
) -> Result<AsymptoticEstimate> {
    check_p(p)?;
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    let d2 = d * d;
    let f = (1.0 + (d2 - 1.0) * p) / d2;
    Ok(AsymptoticEstimate::new(
        (d * f + 1.0) / (d + 1.0),
        -p * d * (d - 1.0) / (4.0 * m),
    ))
}

/// Arbitrary resource with fully entangled fraction `f`:
/// `F(M) = f (1 - d^2 / 4M) + 1 / 4M`.
pub fn asymptotic_mixed_fidelity(f: f64, m: usize, d: usize) -> Result<AsymptoticEstimate> {
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    check_fef(f, d)?;
    Ok(AsymptoticEstimate::new(f, (1.0 - d * d * f) / (4.0 * m)))
}

/// Arbitrary resource: `F_T(M) = F_T(Lambda_rho) (1 - d^2 / 4M) + d / 4M`,
/// with `F_T(Lambda_rho) = (d f + 1) / (d + 1)`.
pub fn asymptotic_mixed_teleportation_fidelity(
    f: f64,
    m: usize,
    d: usize,
) -> Result<AsymptoticEstimate> {
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    check_fef(f, d)?;
    let ft = (d * f + 1.0) / (d + 1.0);
    Ok(AsymptoticEstimate::new(ft, (d - d * d * ft) / (4.0 * m)))
}

/// Leading-order CPBT form: `F_T (1 - d^2 / 4M) + d / 4M` applied to any
/// teleportation fidelity `F_T`.
pub fn ports_scaled_teleportation_fidelity(ft: f64, m: usize, d: usize) -> Result<f64> {
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    Ok(ft * (1.0 - d * d / (4.0 * m)) + d / (4.0 * m))
}

/// `1 - d^2 / 4M`, the factor multiplying control powers at `M` ports.
pub fn port_scaling_factor(m: usize, d: usize) -> Result<f64> {
    let m = check_ports(m)?;
    let d = check_dim(d)?;
    Ok(1.0 - d * d / (4.0 * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::teleportation_fidelity_from_f;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn standard_expansion_arithmetic() {
        assert!(close(
            asymptotic_entanglement_fidelity(10, 2).unwrap().value(),
            0.925,
            1e-15
        ));
        assert!(close(
            asymptotic_entanglement_fidelity(10, 3).unwrap().value(),
            0.8,
            1e-15
        ));
        assert!(close(
            asymptotic_entanglement_fidelity(1_000_000, 2)
                .unwrap()
                .value(),
            1.0 - 7.5e-7,
            1e-15
        ));
        assert!(close(
            asymptotic_teleportation_fidelity(10, 2).unwrap().value(),
            0.95,
            1e-15
        ));
        assert!(close(
            asymptotic_teleportation_fidelity(1, 2).unwrap().value(),
            0.5,
            1e-15
        ));
        assert!(asymptotic_entanglement_fidelity(0, 2).is_err());
    }

    #[test]
    fn standard_expansions_are_related() {
        for d in 2..6 {
            for m in 1..50 {
                let f = asymptotic_entanglement_fidelity(m, d).unwrap().raw_value();
                let ft = asymptotic_teleportation_fidelity(m, d).unwrap().raw_value();
                let df = d as f64;
                assert!(close((df * f + 1.0) / (df + 1.0), ft, 1e-12));
            }
        }
    }

    #[test]
    fn small_m_estimates_are_clamped() {
        let e = asymptotic_entanglement_fidelity(1, 3).unwrap();
        assert!(e.raw_value() < 0.0);
        assert_eq!(e.value(), 0.0);
        assert_eq!(e.order_note, REMAINDER_NOTE);
    }

    #[test]
    fn depolarized_identity_endpoints() {
        assert_eq!(depolarized_fidelity(1.0, 0.6, 2).unwrap(), 0.6);
        assert!(close(
            depolarized_fidelity(0.0, 0.6, 3).unwrap(),
            1.0 / 9.0,
            1e-15
        ));
        assert!(depolarized_fidelity(1.1, 0.6, 2).is_err());
        assert!(depolarized_fidelity(0.5, -0.1, 2).is_err());
    }

    #[test]
    fn depolarized_teleportation_forms_agree() {
        for d in 2..5 {
            for i in 0..=10 {
                for j in 0..=10 {
                    let p = i as f64 / 10.0;
                    let f = j as f64 / 10.0;
                    let first = depolarized_teleportation_fidelity(p, f, d).unwrap();
                    let via_ft = depolarized_teleportation_fidelity_from_ft(
                        p,
                        teleportation_fidelity_from_f(f, d).unwrap(),
                        d,
                    )
                    .unwrap();
                    let via_relation =
                        teleportation_fidelity_from_f(depolarized_fidelity(p, f, d).unwrap(), d)
                            .unwrap();
                    assert!(close(first, via_ft, 1e-12));
                    assert!(close(first, via_relation, 1e-12));
                }
            }
        }
    }

    #[test]
    fn isotropic_expansion_examples() {
        assert!(close(
            asymptotic_isotropic_fidelity(0.5, 10, 2).unwrap().value(),
            0.5875,
            1e-15
        ));
        for m in [1, 5, 100] {
            assert!(close(
                asymptotic_isotropic_fidelity(0.0, m, 3).unwrap().value(),
                1.0 / 9.0,
                1e-15
            ));
            let a = asymptotic_isotropic_fidelity(1.0, m, 2).unwrap();
            let b = asymptotic_entanglement_fidelity(m, 2).unwrap();
            assert!(close(a.raw_value(), b.raw_value(), 1e-15));
        }
    }

    #[test]
    fn mixed_expansion_examples() {
        assert!(close(
            asymptotic_mixed_fidelity(0.625, 10, 2).unwrap().value(),
            0.5875,
            1e-15
        ));
        assert!(close(
            asymptotic_mixed_teleportation_fidelity(0.625, 10, 2)
                .unwrap()
                .value(),
            0.725,
            1e-15
        ));
        assert!(close(
            asymptotic_mixed_teleportation_fidelity(1.0, 10, 2)
                .unwrap()
                .value(),
            0.95,
            1e-15
        ));
        for m in [1, 3, 40] {
            for d in 2..5 {
                let floor = 1.0 / (d * d) as f64;
                assert_eq!(
                    asymptotic_mixed_fidelity(floor, m, d).unwrap().raw_value(),
                    floor
                );
                let ft = asymptotic_mixed_teleportation_fidelity(floor, m, d)
                    .unwrap()
                    .raw_value();
                assert!(close(ft, 1.0 / d as f64, 1e-15));
                let a = asymptotic_mixed_fidelity(1.0, m, d).unwrap().raw_value();
                let b = asymptotic_entanglement_fidelity(m, d).unwrap().raw_value();
                assert!(close(a, b, 1e-15));
            }
        }
        assert!(asymptotic_mixed_fidelity(0.1, 10, 2).is_err());
    }

    #[test]
    fn mixed_teleportation_matches_relation() {
        for m in 1..20 {
            for k in 0..=12 {
                let f = 0.25 + 0.75 * k as f64 / 12.0;
                let ent = asymptotic_mixed_fidelity(f, m, 2).unwrap().raw_value();
                let tel = asymptotic_mixed_teleportation_fidelity(f, m, 2)
                    .unwrap()
                    .raw_value();
                assert!(close((2.0 * ent + 1.0) / 3.0, tel, 1e-12));
            }
        }
    }
}
