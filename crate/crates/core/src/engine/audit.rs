use crate::error::{AcdError, Result};

use super::Trace;

/// Per-coordinate extremes of update counts over all windows of `r` consecutive commits.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAudit {
    pub r: u64,
    pub windows_checked: u64,
    pub min_count: u64,
    pub max_count: u64,
    pub per_coordinate_min: Vec<u64>,
    pub per_coordinate_max: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceReport {
    /// Max of `t - 1 - started_snapshot` over audited commits.
    pub q_observed: u64,
    /// Same, including the shutdown phase.
    pub q_observed_all: u64,
    pub audited: u64,
    /// `None` when fewer than `r` commits were audited.
    pub window: Option<WindowAudit>,
}

/// Interference and window counts over the commits before the drain phase.
pub fn measure_interference(trace: &Trace) -> Result<InterferenceReport> {
    if trace.is_empty() {
        return Err(AcdError::invalid("empty trace"));
    }
    trace.check_dense()?;
    let end = trace.audit_end() as usize;
    let audited = &trace.records[..end];
    let q_observed = audited.iter().map(|r| r.interference()).max().unwrap_or(0);
    let q_observed_all = trace.records.iter().map(|r| r.interference()).max().unwrap_or(0);

    let n = trace.x0.len();
    let r = trace.config.r.max(1) as usize;
    let window = (audited.len() >= r).then(|| {
        let mut counts = vec![0u64; n];
        for rec in &audited[..r] {
            counts[rec.k] += 1;
        }
        let mut lo = counts.clone();
        let mut hi = counts.clone();
        // Only the entering and leaving coordinates change per slide.
        for i in r..audited.len() {
            let (enter, leave) = (audited[i].k, audited[i - r].k);
            counts[enter] += 1;
            counts[leave] -= 1;
            for k in [enter, leave] {
                lo[k] = lo[k].min(counts[k]);
                hi[k] = hi[k].max(counts[k]);
            }
        }
        WindowAudit {
            r: r as u64,
            windows_checked: (audited.len() - r + 1) as u64,
            min_count: lo.iter().copied().min().unwrap_or(0),
            max_count: hi.iter().copied().max().unwrap_or(0),
            per_coordinate_min: lo,
            per_coordinate_max: hi,
        }
    });
    Ok(InterferenceReport { q_observed, q_observed_all, audited: end as u64, window })
}
