//! Aggregation of evaluation reports into a variant × condition table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::env::Scenario;
use crate::error::{CuraError, Result};

use super::eval::{EvalCell, EvalReport, EVAL_SIZES};
use super::variants::Variant;

/// Success-rate statistics of one (variant, scenario, size) condition over
/// independently trained seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    cells: BTreeMap<(usize, usize, usize), Vec<f64>>,
}

fn size_index(size: f64) -> Option<usize> {
    EVAL_SIZES.iter().position(|s| (s - size).abs() < 1e-9)
}

fn scenario_index(s: Scenario) -> Option<usize> {
    Scenario::ALL.iter().position(|x| *x == s)
}

fn variant_index(v: Variant) -> usize {
    Variant::ALL.iter().position(|x| *x == v).expect("every variant is listed")
}

impl SummaryTable {
    /// Adds one evaluated run. Cells outside the table's grid are ignored.
    pub fn add(&mut self, cells: &[EvalCell]) {
        for c in cells {
            if let (Some(s), Some(z)) = (scenario_index(c.scenario), size_index(c.object_size)) {
                self.cells
                    .entry((variant_index(c.variant), s, z))
                    .or_default()
                    .push(c.success_rate);
            }
        }
    }

    /// Loads every `eval_report.csv` given.
    pub fn from_files(paths: &[impl AsRef<Path>]) -> Result<Self> {
        let mut t = SummaryTable::default();
        for p in paths {
            let p = p.as_ref();
            let text = std::fs::read_to_string(p).map_err(|e| CuraError::io(p, e))?;
            t.add(&EvalReport::parse_csv(&text)?);
        }
        Ok(t)
    }

    pub fn get(&self, variant: Variant, scenario: Scenario, size: f64) -> Option<Aggregate> {
        let key = (variant_index(variant), scenario_index(scenario)?, size_index(size)?);
        let v = self.cells.get(&key)?;
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Aggregate {
            mean,
            std,
            seeds: v.len(),
        })
    }

    fn variants(&self) -> Vec<Variant> {
        Variant::ALL
            .iter()
            .copied()
            .filter(|v| self.cells.keys().any(|k| k.0 == variant_index(*v)))
            .collect()
    }

    fn columns() -> Vec<(Scenario, f64)> {
        Scenario::ALL
            .iter()
            .flat_map(|s| EVAL_SIZES.iter().map(move |z| (*s, *z)))
            .collect()
    }

    /// Fixed-width text table of success rates in percent (mean ± std over
    /// seeds, seed count in brackets); `-` marks missing conditions.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write!(out, "{:<22}", "variant").unwrap();
        for (s, z) in Self::columns() {
            write!(out, " {:>18}", format!("{s} {z}")).unwrap();
        }
        out.push('\n');
        for v in self.variants() {
            write!(out, "{:<22}", v.name()).unwrap();
            for (s, z) in Self::columns() {
                let cell = match self.get(v, s, z) {
                    Some(a) => format!("{:.1}±{:.1} [{}]", 100.0 * a.mean, 100.0 * a.std, a.seeds),
                    None => "-".to_string(),
                };
                write!(out, " {cell:>18}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable form: one row per (variant, scenario, size).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,scenario,object_size,seeds,success_mean,success_std\n");
        for v in self.variants() {
            for (s, z) in Self::columns() {
                if let Some(a) = self.get(v, s, z) {
                    writeln!(out, "{},{},{},{},{},{}", v, s, z, a.seeds, a.mean, a.std).unwrap();
                }
            }
        }
        out
    }
}
