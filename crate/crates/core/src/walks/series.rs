use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ledger::LedgerView;
use super::run::WalkRun;
use crate::error::Result;

/// What [`simulate`] records at each checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probes {
    /// Sites whose local times and `Y±` are recorded.
    pub sites: Vec<i64>,
    /// Checkpoints per doubling of time.
    pub per_octave: u32,
    /// Also record the full local-time profile over the visited range.
    pub snapshots: bool,
    /// Record `I_n`, `S_n`, `K_n` from sites 0 to 4.
    pub five_site: bool,
}

impl Default for Probes {
    fn default() -> Self {
        Self {
            sites: vec![-2, -1, 0, 1, 2],
            per_octave: 4,
            snapshots: false,
            five_site: false,
        }
    }
}

/// Local times over `⟦lo, lo + z.len() - 1⟧`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub lo: i64,
    pub z: Vec<u64>,
}

impl Snapshot {
    pub fn z(&self, x: i64) -> u64 {
        x.checked_sub(self.lo)
            .filter(|&i| i >= 0)
            .and_then(|i| self.z.get(i as usize).copied())
            .unwrap_or(0)
    }
}

/// Per-run time series at geometric checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub checkpoints: Vec<u64>,
    pub range_lo: Vec<i64>,
    pub range_hi: Vec<i64>,
    pub probes: Vec<i64>,
    /// `z[c][p]`: local time of probe `p` at checkpoint `c`.
    pub z: Vec<Vec<u64>>,
    pub y_plus: Vec<Vec<f64>>,
    pub y_minus: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub snapshots: Vec<Snapshot>,
    /// `(I_n, S_n, K_n) = (min(Z(0),Z(4)), max(Z(0),Z(4)), max(Z(1),Z(3)))`.
    pub isk: Vec<(u64, u64, u64)>,
}

/// `0`, then `⌈2^(k/per_octave)⌉` up to `n`, then `n`.
pub fn checkpoint_times(n: u64, per_octave: u32) -> Vec<u64> {
    let mut out = vec![0];
    let per = per_octave.max(1) as f64;
    let mut k = 0u32;
    loop {
        let t = 2f64.powf(k as f64 / per).ceil() as u64;
        if t >= n {
            break;
        }
        if t > *out.last().unwrap() {
            out.push(t);
        }
        k += 1;
    }
    if n > 0 {
        out.push(n);
    }
    out
}

impl DiagnosticSeries {
    fn record(&mut self, run: &WalkRun, probes: &Probes) {
        self.checkpoints.push(run.time());
        let (lo, hi) = run.visited_range();
        self.range_lo.push(lo);
        self.range_hi.push(hi);
        self.z
            .push(probes.sites.iter().map(|&x| run.z(x)).collect());
        if run.options().track_y {
            let ys: Vec<(f64, f64)> = probes.sites.iter().map(|&x| run.y(x)).collect();
            self.y_plus.push(ys.iter().map(|v| v.0).collect());
            self.y_minus.push(ys.iter().map(|v| v.1).collect());
            self.m.push(ys.iter().map(|v| v.0 - v.1).collect());
        }
        if probes.snapshots {
            self.snapshots.push(Snapshot {
                lo,
                z: run.counts(lo, hi),
            });
        }
        if probes.five_site {
            let (z0, z4) = (run.z(0), run.z(4));
            self.isk
                .push((z0.min(z4), z0.max(z4), run.z(1).max(run.z(3))));
        }
    }

    /// CSV rows: step, range, then the probe local times, `Y⁺`, `Y⁻` and `M`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["step".to_string(), "range_lo".into(), "range_hi".into()];
        head.extend(self.probes.iter().map(|p| format!("z({p})")));
        if !self.m.is_empty() {
            for tag in ["y+", "y-", "m"] {
                head.extend(self.probes.iter().map(|p| format!("{tag}({p})")));
            }
        }
        if !self.isk.is_empty() {
            head.extend(["I", "S", "K"].map(String::from));
        }
        w.write_record(&head)?;
        for (c, &t) in self.checkpoints.iter().enumerate() {
            let mut row = vec![
                t.to_string(),
                self.range_lo[c].to_string(),
                self.range_hi[c].to_string(),
            ];
            row.extend(self.z[c].iter().map(|v| v.to_string()));
            if !self.m.is_empty() {
                for series in [&self.y_plus, &self.y_minus, &self.m] {
                    row.extend(series[c].iter().map(|v| format!("{v:e}")));
                }
            }
            if let Some(&(i, s, k)) = self.isk.get(c) {
                row.extend([i, s, k].map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `n_steps` further steps, recording probes at geometric checkpoints.
pub fn simulate(run: &mut WalkRun, n_steps: u64, probes: &Probes) -> Result<DiagnosticSeries> {
    let start = run.time();
    let mut series = DiagnosticSeries {
        probes: probes.sites.clone(),
        ..Default::default()
    };
    for t in checkpoint_times(n_steps, probes.per_octave) {
        run.run(start + t - run.time())?;
        series.record(run, probes);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_are_increasing() {
        assert_eq!(checkpoint_times(0, 4), vec![0]);
        assert_eq!(checkpoint_times(1, 4), vec![0, 1]);
        let c = checkpoint_times(1000, 2);
        assert!(c.windows(2).all(|p| p[0] < p[1]));
        assert_eq!((c[0], *c.last().unwrap()), (0, 1000));
    }
}
