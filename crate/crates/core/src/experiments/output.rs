use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::experiments::{EnsembleSummary, RatioReport};

/// One JSON document per line.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Table-shaped summary: one row per category.
pub fn write_summary_csv<W: Write>(rows: &[EnsembleSummary], mut w: W) -> Result<()> {
    writeln!(w, "State,Count,Simulated Ratio,Simulated Std,Predicted Ratio,Predicted Std")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.2},{},{:.2},{}",
            r.category,
            r.count,
            r.simulated_mean,
            r.simulated_std.map(|s| format!("{s:.2}")).unwrap_or_default(),
            r.predicted_mean,
            r.predicted_std.map(|s| format!("{s:.2}")).unwrap_or_default(),
        )?;
    }
    Ok(())
}

/// Full-precision per-report rows for plotting.
pub fn write_reports_csv<W: Write>(reports: &[RatioReport], mut w: W) -> Result<()> {
    writeln!(
        w,
        "state,model_a,model_b,target_fidelity,t_a,t_b,Simulated Ratio,Predicted Ratio,Predicted Ratio (second order)"
    )?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{}",
            r.state,
            r.model_a,
            r.model_b,
            r.target_fidelity,
            r.t_a,
            r.t_b,
            r.simulated_ratio,
            r.predicted.first_order,
            opt(r.predicted.second_order),
        )?;
    }
    Ok(())
}
