//! `(M, p)` sweeps over isotropic resources, written as CSV.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::teleportation_fidelity_from_f;
use crate::pbt::{
    asymptotic_isotropic_fidelity, asymptotic_isotropic_teleportation_fidelity,
    asymptotic_mixed_fidelity, depolarized_fidelity, fidelity_with_povm, measurement_registry,
    PbtSetup, Povm, Resource,
};
use crate::states::IsotropicParam;
use crate::tensor::DEFAULT_DIM_CAP;

pub const COLUMNS: [&str; 13] = [
    "d", "M", "p", "F_exact", "F_thm1", "F_thm2", "F_thm3", "FT_exact", "FT_asym", "gap_thm1",
    "gap_thm2", "gap_thm3", "warning",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub d: usize,
    pub m_start: usize,
    pub m_end: usize,
    pub m_step: usize,
    pub p_grid: Vec<f64>,
    pub measurement: String,
    pub cap: usize,
    pub asymptotic_only: bool,
    /// Output columns; empty means all of [`COLUMNS`].
    #[serde(default)]
    pub columns: Vec<String>,
}

impl SweepSpec {
    pub fn new(d: usize, m_start: usize, m_end: usize, p_grid: Vec<f64>) -> Self {
        Self {
            d,
            m_start,
            m_end,
            m_step: 1,
            p_grid,
            measurement: "pgm".into(),
            cap: DEFAULT_DIM_CAP,
            asymptotic_only: false,
            columns: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::param("d", self.d as f64, "must be at least 2"));
        }
        if self.m_start == 0 {
            return Err(Error::param("M", 0.0, "must be at least 1"));
        }
        if self.m_step == 0 {
            return Err(Error::param("M step", 0.0, "must be positive"));
        }
        if self.m_end < self.m_start {
            return Err(Error::InvalidShape(format!(
                "empty M range {}..={}",
                self.m_start, self.m_end
            )));
        }
        if self.p_grid.is_empty() {
            return Err(Error::InvalidShape("empty p grid".into()));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param("p", *p, "must lie in [0, 1]"));
        }
        measurement_registry().get(&self.measurement)?;
        for col in &self.columns {
            if !COLUMNS.contains(&col.as_str()) {
                return Err(Error::Parse(format!("unknown column {col:?}")));
            }
        }
        Ok(())
    }

    pub fn ports(&self) -> Vec<usize> {
        (self.m_start..=self.m_end).step_by(self.m_step).collect()
    }

    fn selected(&self) -> Vec<&str> {
        if self.columns.is_empty() {
            COLUMNS.to_vec()
        } else {
            COLUMNS
                .iter()
                .copied()
                .filter(|c| self.columns.iter().any(|s| s == c))
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub p: f64,
    pub f_exact: Option<f64>,
    pub f_thm1: Option<f64>,
    pub f_thm2: f64,
    pub f_thm3: f64,
    pub ft_exact: Option<f64>,
    pub ft_asym: f64,
    pub warnings: Vec<String>,
}

impl SweepRow {
    fn gap(&self, other: Option<f64>) -> Option<f64> {
        Some((self.f_exact? - other?).abs())
    }

    pub fn gap_thm1(&self) -> Option<f64> {
        self.gap(self.f_thm1)
    }

    pub fn gap_thm2(&self) -> Option<f64> {
        self.gap(Some(self.f_thm2))
    }

    pub fn gap_thm3(&self) -> Option<f64> {
        self.gap(Some(self.f_thm3))
    }

    fn field(&self, column: &str) -> String {
        let opt = |x: Option<f64>| x.map(format_g12).unwrap_or_default();
        match column {
            "d" => self.d.to_string(),
            "M" => self.m.to_string(),
            "p" => format_g12(self.p),
            "F_exact" => opt(self.f_exact),
            "F_thm1" => opt(self.f_thm1),
            "F_thm2" => format_g12(self.f_thm2),
            "F_thm3" => format_g12(self.f_thm3),
            "FT_exact" => opt(self.ft_exact),
            "FT_asym" => format_g12(self.ft_asym),
            "gap_thm1" => opt(self.gap_thm1()),
            "gap_thm2" => opt(self.gap_thm2()),
            "gap_thm3" => opt(self.gap_thm3()),
            "warning" => self.warnings.join(";"),
            _ => String::new(),
        }
    }
}

/// `%.12g`: 12 significant digits, trailing zeros removed, exponent form
/// outside `[1e-4, 1e12)`.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{x:.*}", (11 - exp) as usize))
    }
}

struct PortsContext {
    m: usize,
    f_maxent: Option<f64>,
    shared_povm: Option<Povm>,
}

fn ports_context(spec: &SweepSpec, m: usize) -> Result<PortsContext> {
    let setup = PbtSetup::max_entangled(spec.d, m)?.with_cap(spec.cap);
    if spec.asymptotic_only || setup.check_fidelity_cap().is_err() {
        return Ok(PortsContext {
            m,
            f_maxent: None,
            shared_povm: None,
        });
    }
    let measurement = measurement_registry().get(&spec.measurement)?;
    let povm = measurement.build(&setup)?;
    let f_maxent = fidelity_with_povm(&setup, &povm)?;
    Ok(PortsContext {
        m,
        f_maxent: Some(f_maxent),
        shared_povm: (!measurement.depends_on_resource()).then_some(povm),
    })
}

fn row(spec: &SweepSpec, ctx: &PortsContext, p: f64) -> Result<SweepRow> {
    let d = spec.d;
    let m = ctx.m;
    let mut warnings = Vec::new();
    let f_exact = match ctx.f_maxent {
        None => {
            if !spec.asymptotic_only {
                warnings.push("above-cap".to_string());
            }
            None
        }
        Some(_) => {
            let setup = PbtSetup::new(d, m, Resource::Isotropic(p))?.with_cap(spec.cap);
            let built;
            let povm = match &ctx.shared_povm {
                Some(povm) => povm,
                None => {
                    built = measurement_registry()
                        .get(&spec.measurement)?
                        .build(&setup)?;
                    &built
                }
            };
            Some(fidelity_with_povm(&setup, povm)?)
        }
    };
    let f_thm1 = ctx
        .f_maxent
        .map(|f| depolarized_fidelity(p, f, d))
        .transpose()?;
    let thm2 = asymptotic_isotropic_fidelity(p, m, d)?;
    let fef = IsotropicParam::new(p, d)?.fully_entangled_fraction();
    let thm3 = asymptotic_mixed_fidelity(fef.max(1.0 / (d * d) as f64), m, d)?;
    let ft_asym = asymptotic_isotropic_teleportation_fidelity(p, m, d)?;
    if [thm2.raw_value(), thm3.raw_value(), ft_asym.raw_value()]
        .iter()
        .any(|v| !(0.0..=1.0).contains(v))
    {
        warnings.push("asymptotic-clamped".to_string());
    }
    Ok(SweepRow {
        d,
        m,
        p,
        f_exact,
        f_thm1,
        f_thm2: thm2.value(),
        f_thm3: thm3.value(),
        ft_exact: f_exact
            .map(|f| teleportation_fidelity_from_f(f, d))
            .transpose()?,
        ft_asym: ft_asym.value(),
        warnings,
    })
}

/// Rows ordered `M` outer, `p` inner; computed in parallel.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let contexts = spec
        .ports()
        .into_par_iter()
        .map(|m| ports_context(spec, m))
        .collect::<Result<Vec<_>>>()?;
    let rows = contexts
        .par_iter()
        .flat_map_iter(|ctx| spec.p_grid.iter().map(move |&p| (ctx, p)))
        .map(|(ctx, p)| row(spec, ctx, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows)
}

pub fn to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let cols = spec.selected();
    let mut out = cols.join(",");
    out.push('\n');
    for r in rows {
        let fields: Vec<String> = cols.iter().map(|c| r.field(c)).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord<I, V> {
    pub command: String,
    pub inputs: I,
    pub values: V,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_seconds: f64,
}

impl<I, V> RunRecord<I, V> {
    pub fn new(command: &str, inputs: I, values: V, seed: Option<u64>, started: Instant) -> Self {
        Self {
            command: command.into(),
            inputs,
            values,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(0.25), "0.25");
        assert_eq!(format_g12(1.0), "1");
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_g12(0.466_506_350_946_109_76), "0.466506350946");
        assert_eq!(format_g12(1e-7), "1e-07");
        assert_eq!(format_g12(1.5e-5), "1.5e-05");
        assert_eq!(format_g12(0.000123456789012345), "0.000123456789012");
        assert_eq!(format_g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_g12(-0.125), "-0.125");
        assert_eq!(format_g12(0.99999999999999), "1");
        assert_eq!(format_g12(12.0), "12");
    }

    #[test]
    fn small_sweep_rows() {
        let spec = SweepSpec::new(2, 1, 3, vec![0.0, 1.0]);
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[1].m, rows[1].p), (1, 1.0));
        assert!((rows[1].f_exact.unwrap() - 0.25).abs() < 1e-12);
        for r in &rows {
            let f = r.f_exact.unwrap();
            assert!((r.ft_exact.unwrap() - (2.0 * f + 1.0) / 3.0).abs() < 1e-12);
            assert!(r.gap_thm1().unwrap() < 1e-9);
            assert!((r.f_thm2 - r.f_thm3).abs() < 1e-12);
        }
        let csv = to_csv(&spec, &rows);
        assert!(csv.starts_with("d,M,p,F_exact,F_thm1,F_thm2,F_thm3,FT_exact,FT_asym,gap_thm1,gap_thm2,gap_thm3,warning\n"));
        assert_eq!(csv.lines().count(), 7);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn above_cap_fields_are_empty() {
        let mut spec = SweepSpec::new(2, 2, 3, vec![0.5]);
        spec.cap = 8;
        let rows = run_sweep(&spec).unwrap();
        assert!(rows[0].f_exact.is_some());
        assert!(rows[1].f_exact.is_none());
        assert_eq!(rows[1].warnings, vec!["above-cap"]);
        let csv = to_csv(&spec, &rows);
        assert!(csv.lines().nth(2).unwrap().starts_with("2,3,0.5,,,"));
    }

    #[test]
    fn column_selection_and_validation() {
        let mut spec = SweepSpec::new(2, 1, 2, vec![0.5]);
        spec.columns = vec!["FT_asym".into(), "M".into()];
        let csv = to_csv(&spec, &run_sweep(&spec).unwrap());
        assert_eq!(csv.lines().next().unwrap(), "M,FT_asym");
        spec.columns = vec!["nope".into()];
        assert!(spec.validate().is_err());
        assert!(SweepSpec::new(2, 3, 2, vec![0.5]).validate().is_err());
        assert!(SweepSpec::new(2, 1, 2, vec![]).validate().is_err());
        assert!(SweepSpec::new(2, 1, 2, vec![1.2]).validate().is_err());
        let mut bad = SweepSpec::new(2, 1, 2, vec![0.5]);
        bad.measurement = "magic".into();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn adapted_measurement_breaks_linearity() {
        let mut spec = SweepSpec::new(2, 2, 2, vec![0.3]);
        spec.measurement = "pgm-adapted".into();
        let rows = run_sweep(&spec).unwrap();
        assert!(rows[0].gap_thm1().unwrap() > 1e-2);
    }
}
