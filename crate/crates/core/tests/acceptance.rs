//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p pbtlab --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use pbtlab::cpbt::{
    control_power_all, cpbt_fidelity_from_ct, ghz_extended, max_ct_fidelity, minimal_of,
    post_measurement_pair, uncontrolled_fidelity, Party, ProjectiveMeasurement, TripartiteState,
};
use pbtlab::fidelity::{
    default_fef_solver, entanglement_fidelity, fef_iterative, fef_qubit_magic,
    mc_teleportation_fidelity, FefOptions,
};
use pbtlab::pbt::{
    asymptotic_isotropic_fidelity, asymptotic_mixed_fidelity, isotropic_port_state_binomial,
    pbt_channel_choi, pbt_entanglement_fidelity, port_states_brute_force, random_alice_operation,
    AdaptedPgm, PbtSetup, PortMeasurement, Resource, StandardPgm,
};
use pbtlab::states::{
    haar_ket_from_rng, haar_unitary, isotropic_state, random_density, seeded_rng,
    standard_teleportation_choi, IsotropicParam,
};
use pbtlab::sweep::{run_sweep, to_csv, SweepSpec};
use pbtlab::tensor::{partial_trace, CMatrix, Operator, SubsystemShape};
use pbtlab::Result;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn depolarized_resource_identity() -> Result<Verdict> {
    let mut rng = seeded_rng(2024);
    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        let random_o = random_alice_operation(2, m, &mut rng)?;
        for op in [None, Some(random_o)] {
            let with_op = |s: PbtSetup| match &op {
                Some(o) => s.with_alice_op(o.clone()),
                None => Ok(s),
            };
            let f_max = pbt_entanglement_fidelity(&with_op(PbtSetup::max_entangled(2, m)?)?)?;
            for p in [0.0, 0.3, 0.7, 1.0] {
                let f = pbt_entanglement_fidelity(&with_op(PbtSetup::isotropic(2, m, p)?)?)?;
                worst = worst.max((f - (p * f_max + (1.0 - p) / 4.0)).abs());
            }
        }
    }
    verdict(
        worst <= 1e-9,
        format!("max deviation {worst:.2e} (tol 1e-9) over 24 cases"),
    )
}

fn fef_isotropic_identity() -> Result<Verdict> {
    let mut magic: f64 = 0.0;
    let mut iterative: f64 = 0.0;
    for k in 0..=10 {
        let p = k as f64 / 10.0;
        let rho = isotropic_state(IsotropicParam::new(p, 2)?)?;
        let expected = (1.0 + 3.0 * p) / 4.0;
        let fm = fef_qubit_magic(&rho)?.value;
        let fi = fef_iterative(&rho, &FefOptions::default())?.value;
        magic = magic.max((fm - expected).abs());
        iterative = iterative.max((fi - fm).abs());
    }
    verdict(
        magic <= 1e-10 && iterative <= 1e-8,
        format!("magic deviation {magic:.2e} (tol 1e-10), iterative vs magic {iterative:.2e} (tol 1e-8)"),
    )
}

fn teleportation_closure() -> Result<Verdict> {
    let mut rng = seeded_rng(7);
    let shape = SubsystemShape::uniform(2, 2)?;
    let mut worst_f: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    for i in 0..20 {
        let rho = random_density(shape.clone(), &mut rng);
        let ch = standard_teleportation_choi(&rho)?;
        let f = entanglement_fidelity(&ch);
        worst_f = worst_f.max((f - fef_qubit_magic(&rho)?.value).abs());
        let mc = mc_teleportation_fidelity(&ch, 10_000, 100 + i)?;
        worst_sigma = worst_sigma.max((mc.estimate - (2.0 * f + 1.0) / 3.0).abs() / mc.stderr);
    }
    verdict(
        worst_f <= 1e-8 && worst_sigma <= 3.0,
        format!(
            "|F - f| max {worst_f:.2e} (tol 1e-8), Monte Carlo max {worst_sigma:.2} stderr (tol 3)"
        ),
    )
}

fn port_state_closed_form() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for m in 2..=4 {
        for p in [0.25, 0.75] {
            let brute = port_states_brute_force(&PbtSetup::isotropic(2, m, p)?)?;
            for (t, sigma) in brute.sigmas().iter().enumerate() {
                let closed = isotropic_port_state_binomial(2, m, t, p)?;
                worst = worst.max(sigma.max_abs_diff(&closed));
            }
        }
    }
    verdict(
        worst <= 1e-12,
        format!("max entrywise deviation {worst:.2e} (tol 1e-12)"),
    )
}

fn asymptotic_trend() -> Result<Verdict> {
    let gap = |m: usize| -> Result<f64> {
        let f = pbt_entanglement_fidelity(&PbtSetup::max_entangled(2, m)?)?;
        Ok((f - (1.0 - 3.0 / (4.0 * m as f64))).abs())
    };
    let (g4, g8) = (gap(4)?, gap(8)?);
    let mut worst: f64 = 0.0;
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let f = IsotropicParam::new(p, 2)?.fully_entangled_fraction();
        for m in [1, 2, 5, 10, 100] {
            let a = asymptotic_isotropic_fidelity(p, m, 2)?.raw_value();
            let b = asymptotic_mixed_fidelity(f, m, 2)?.raw_value();
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        g8 < g4 && worst <= 1e-12,
        format!("gap M=4 {g4:.4e}, M=8 {g8:.4e}; expansion consistency {worst:.2e} (tol 1e-12)"),
    )
}

fn ghz_control_power() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut worst_min: f64 = 0.0;
    for a in [0.3, std::f64::consts::FRAC_1_SQRT_2, 0.8] {
        let b = (1.0 - a * a).sqrt();
        let state = ghz_extended(a, b)?;
        for m in [2, 10, 100] {
            let expected = 2.0 * a * b / 3.0 * (1.0 - 1.0 / m as f64);
            let reports = control_power_all(&state, m)?;
            for r in &reports {
                worst = worst.max((r.power_m - expected).abs());
            }
            let min = minimal_of(&reports).expect("three parties");
            for r in &reports {
                worst_min = worst_min.max((min.power_m - r.power_m).abs());
            }
        }
    }
    verdict(
        worst <= 1e-6 && worst_min <= 1e-8,
        format!(
            "closed-form deviation {worst:.2e} (tol 1e-6), party spread {worst_min:.2e} (tol 1e-8)"
        ),
    )
}

fn random_tripartite<R: Rng>(rng: &mut R) -> Result<TripartiteState> {
    TripartiteState::from_amplitudes(2, haar_ket_from_rng(8, rng)?.amplitudes().clone())
}

fn random_measurement<R: Rng>(rng: &mut R) -> Result<ProjectiveMeasurement> {
    let u: CMatrix = haar_unitary(2, rng);
    ProjectiveMeasurement::new(vec![u.column(0).into_owned(), u.column(1).into_owned()])
}

fn structural_invariants() -> Result<Verdict> {
    let mut rng = seeded_rng(99);
    let mut failures = Vec::new();
    let solver = default_fef_solver();
    let mut worst_completeness: f64 = 0.0;
    let mut worst_tp: f64 = 0.0;
    for i in 0..50 {
        let m = 1 + i % 3;
        let d = 2;
        let rho = random_density(SubsystemShape::uniform(d, 2)?, &mut rng);
        // a non-unitary Alice operation is only normalized on maximally mixed marginals
        let setup = if i % 2 == 0 {
            let n = d.pow(m as u32);
            let u = Operator::new(SubsystemShape::uniform(d, m)?, haar_unitary(n, &mut rng))?;
            PbtSetup::new(d, m, Resource::Custom(rho.clone()))?.with_alice_op(u)?
        } else {
            let o = random_alice_operation(d, m, &mut rng)?;
            PbtSetup::isotropic(d, m, rng.random::<f64>())?.with_alice_op(o)?
        };

        for meas in [&StandardPgm as &dyn PortMeasurement, &AdaptedPgm] {
            match meas.build(&setup)?.validate() {
                Ok(diag) => worst_completeness = worst_completeness.max(diag.completeness_error),
                Err(e) => failures.push(format!("instance {i} {}: {e}", meas.name())),
            }
        }

        let ch = pbt_channel_choi(&setup)?;
        let out_marginal = partial_trace(ch.choi().op(), &[1])?;
        let target = Operator::identity(SubsystemShape::uniform(d, 1)?).scale(1.0 / d as f64);
        worst_tp = worst_tp.max(out_marginal.max_abs_diff(&target));

        let f = solver.solve(&rho)?.value;
        let overlap = rho.expectation(&pbtlab::states::max_entangled(d)?);
        if !(f >= 1.0 / (d * d) as f64 - 1e-12 && f <= 1.0 + 1e-12 && f >= overlap - 1e-12) {
            failures.push(format!(
                "instance {i}: fully entangled fraction {f} out of bounds"
            ));
        }
        let rho3 = random_density(SubsystemShape::uniform(3, 2)?, &mut rng);
        let f3 = fef_iterative(&rho3, &FefOptions::default())?.value;
        if !(1.0 / 9.0 - 1e-12..=1.0 + 1e-12).contains(&f3) {
            failures.push(format!(
                "instance {i}: qutrit fully entangled fraction {f3} out of bounds"
            ));
        }

        let state = random_tripartite(&mut rng)?;
        let party = Party::ALL[i % 3];
        let meas = random_measurement(&mut rng)?;
        let total: f64 = (0..2)
            .map(|k| post_measurement_pair(&state, party, &meas, k).map(|r| r.0))
            .sum::<Result<f64>>()?;
        if (total - 1.0).abs() > 1e-10 {
            failures.push(format!(
                "instance {i}: outcome probabilities sum to {total}"
            ));
        }

        let ports = [1, 4, 25][i % 3];
        let f_ct = max_ct_fidelity(&state, party)?.value;
        let controlled = cpbt_fidelity_from_ct(f_ct, ports, 2)?;
        let uncontrolled = pbtlab::pbt::ports_scaled_teleportation_fidelity(
            uncontrolled_fidelity(&state, party, &*solver)?,
            ports,
            2,
        )?;
        if controlled < uncontrolled - 1e-8 {
            failures.push(format!(
                "instance {i}: control lowered the fidelity ({controlled} < {uncontrolled})"
            ));
        }
    }
    if worst_tp > 1e-9 {
        failures.push(format!("Choi trace preservation off by {worst_tp:.2e}"));
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "50 instances; completeness {worst_completeness:.2e} (tol 1e-8), trace preservation {worst_tp:.2e} (tol 1e-9)"
        )
    } else {
        failures.join("; ")
    };
    verdict(pass, detail)
}

fn sweep_determinism() -> Result<Verdict> {
    let spec = SweepSpec::new(2, 1, 3, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let first = to_csv(&spec, &run_sweep(&spec)?);
    let second = to_csv(&spec, &run_sweep(&spec)?);
    verdict(
        first == second && first.lines().count() == 16,
        format!(
            "{} bytes, {} rows, identical={}",
            first.len(),
            first.lines().count() - 1,
            first == second
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "depolarized-resource identity",
            depolarized_resource_identity,
        ),
        ("isotropic fully entangled fraction", fef_isotropic_identity),
        ("teleportation fidelity closure", teleportation_closure),
        ("port-state closed form", port_state_closed_form),
        ("asymptotic trend", asymptotic_trend),
        ("GHZ control power", ghz_control_power),
        ("structural invariants", structural_invariants),
        ("sweep determinism", sweep_determinism),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "criterion {} {} {name}: {detail} [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
