//! CSV series extracted from run records.

use std::io::Write;

use super::record::RunRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotSeries {
    /// Coexact and curl eigenvalues per scenario.
    Spectrum,
    /// λ* against the longest mesh edge, for refinement studies.
    SpectrumVsH,
    /// c on the finite covers.
    Cover,
    /// Comass estimates against speed.
    Comass,
    /// Bump/hypercycle measurements against their bounds.
    Bump,
    Verdicts,
}

impl std::str::FromStr for PlotSeries {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spectrum" => PlotSeries::Spectrum,
            "spectrum-vs-h" => PlotSeries::SpectrumVsH,
            "cover" => PlotSeries::Cover,
            "comass" => PlotSeries::Comass,
            "bump" => PlotSeries::Bump,
            "verdicts" => PlotSeries::Verdicts,
            _ => {
                return Err(Error::Unsupported(format!(
                    "unknown series `{s}` (spectrum, spectrum-vs-h, cover, comass, bump, verdicts)"
                )))
            }
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes one CSV table with a header row.
pub fn plot_data<W: Write>(records: &[RunRecord], series: PlotSeries, mut w: W) -> Result<()> {
    match series {
        PlotSeries::Spectrum => {
            writeln!(w, "scenario,kind,index,value,residual")?;
            for r in records {
                if let Some(s) = &r.spectrum {
                    for (kind, list) in [("coexact", &s.coexact), ("curl", &s.curl)] {
                        for (i, p) in list.iter().enumerate() {
                            writeln!(w, "{},{kind},{i},{},{}", r.scenario, p.value, p.residual)?;
                        }
                    }
                }
            }
        }
        PlotSeries::SpectrumVsH => {
            writeln!(w, "scenario,max_edge,lambda_star")?;
            for r in records {
                let h = r.geometry.as_ref().and_then(|g| g.mesh.as_ref()).map(|m| m.max_edge);
                if let (Some(h), Some(l)) = (h, r.spectrum.as_ref().and_then(|s| s.lambda_star)) {
                    writeln!(w, "{},{h},{l}", r.scenario)?;
                }
            }
        }
        PlotSeries::Cover => {
            writeln!(w, "scenario,order,c")?;
            for r in records {
                for (k, c) in r.mane.iter().flat_map(|m| &m.cover) {
                    writeln!(w, "{},{k},{c}", r.scenario)?;
                }
            }
        }
        PlotSeries::Comass => {
            writeln!(w, "scenario,speed,multiple,value,median,q90,s0")?;
            for r in records {
                if let Some(f) = &r.flow {
                    for c in &f.comass {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{}",
                            r.scenario,
                            c.speed,
                            opt(c.multiple),
                            c.value,
                            c.median,
                            c.q90,
                            opt(f.s0)
                        )?;
                    }
                }
            }
        }
        PlotSeries::Bump => {
            writeln!(w, "scenario,pair,kappa,measured,bound,quadrature_error")?;
            for r in records {
                if let Some(b) = r.shadow.as_ref().and_then(|s| s.bump.as_ref()) {
                    for (i, row) in b.rows.iter().enumerate() {
                        writeln!(
                            w,
                            "{},{i},{},{},{},{}",
                            r.scenario, row.kappa, row.measured, row.bound, row.quadrature_error
                        )?;
                    }
                }
            }
        }
        PlotSeries::Verdicts => {
            writeln!(w, "scenario,claim,status,left,right,tol,slack")?;
            for r in records {
                for v in r.verify.iter().flatten() {
                    writeln!(
                        w,
                        "{},\"{}\",{},{},{},{},{}",
                        r.scenario,
                        v.claim,
                        v.status,
                        opt(v.left),
                        opt(v.right),
                        v.tol,
                        opt(v.slack)
                    )?;
                }
            }
        }
    }
    Ok(())
}
