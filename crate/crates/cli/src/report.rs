//! Run reports and convergence histories.

use std::collections::BTreeMap;
use std::time::Instant;

use nepv::resinv::HistoryEntry;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct RunReport<T: Serialize> {
    pub solver: String,
    pub version: String,
    pub config: Value,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub result: T,
}

impl<T: Serialize> RunReport<T> {
    pub fn new(solver: &str, config: Value, timings: Timings, result: T) -> Self {
        Self {
            solver: solver.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            timings: timings.0,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports hold finite-or-null data");
        text.push('\n');
        text
    }
}

#[derive(Debug, Default)]
pub struct Timings(BTreeMap<String, f64>);

impl Timings {
    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn time<R>(&mut self, phase: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        *self.0.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

/// CSV with columns `iter,residual,lambda_re,lambda_im,mu1_re,mu1_im,…`.
pub fn history_csv(history: &[HistoryEntry], m: usize) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iter".to_string(), "residual".into(), "lambda_re".into(), "lambda_im".into()];
    for j in 1..=m {
        header.push(format!("mu{j}_re"));
        header.push(format!("mu{j}_im"));
    }
    w.write_record(&header)?;
    for h in history {
        let mut row = vec![
            h.iter.to_string(),
            h.residual.to_string(),
            h.lambda.re.to_string(),
            h.lambda.im.to_string(),
        ];
        for j in 0..m {
            let mu = h.mu.get(j).copied().unwrap_or(nepv::C64::new(f64::NAN, f64::NAN));
            row.push(mu.re.to_string());
            row.push(mu.im.to_string());
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV of numbers is ASCII"))
}
