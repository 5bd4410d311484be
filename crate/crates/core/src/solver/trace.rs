use std::fmt::Write as _;

/// One row per iteration; row 0 is the initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub zeta: Option<f64>,
    pub eta: Option<f64>,
    pub residual_rel: f64,
    pub rel_err: Option<f64>,
    /// Milliseconds since the solve started (cumulative).
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Per-iteration wall time in milliseconds, initialization excluded.
    pub fn iteration_times(&self) -> Vec<f64> {
        self.records.windows(2).map(|w| w[1].wall_ms - w[0].wall_ms).collect()
    }

    /// CSV `iter,zeta,eta,residual_rel,rel_err,wall_ms`. Missing values are
    /// empty fields. With `timings` off the time column is written as 0 so
    /// the file depends only on the inputs.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("iter,zeta,eta,residual_rel,rel_err,wall_ms\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{:.16e},{},{:.3}",
                r.iter,
                opt(r.zeta),
                opt(r.eta),
                r.residual_rel,
                opt(r.rel_err),
                if timings { r.wall_ms } else { 0.0 }
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}
