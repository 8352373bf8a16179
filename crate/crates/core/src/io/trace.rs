use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::metrics::ConvergenceTrace;

pub const TRACE_HEADER: &str = "iter,eps_a,eps_fq,eps_afq,eps_0,eps_delta";

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

/// CSV text for a trace; `comments` become leading `# ` lines.
pub fn trace_csv(trace: &ConvergenceTrace, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{},{}",
            r.iter,
            r.eps_a,
            r.eps_fq,
            r.eps_afq,
            cell(r.eps_0),
            cell(r.eps_delta)
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &ConvergenceTrace, comments: &[String]) -> Result<()> {
    super::write_atomic(path, trace_csv(trace, comments).as_bytes())
}
