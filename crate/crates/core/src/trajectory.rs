//! Per-iteration optimization records and their CSV interchange format.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Parameter flow under the linear-response update rule.
    Flow,
    /// The single coordinate-descent sweep appended after the flow stops.
    Jacobi,
    /// Terminal marker for externally assembled tables; the optimizers here
    /// never emit it themselves.
    Done,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Flow => "flow",
            Phase::Jacobi => "jacobi",
            Phase::Done => "done",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Phase::Flow),
            "jacobi" => Ok(Phase::Jacobi),
            "done" => Ok(Phase::Done),
            other => Err(Error::InvalidInput(format!("unknown phase '{other}'"))),
        }
    }
}

/// Why the flow loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Enough probability mass collected on the best basis states seen.
    SupportReached,
    IterationLimit,
    /// The reachable cost spread collapsed below the working floor.
    SpectrumCollapsed,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::SupportReached => "support_reached",
            StopReason::IterationLimit => "iteration_limit",
            StopReason::SpectrumCollapsed => "spectrum_collapsed",
        })
    }
}

impl std::str::FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support_reached" => Ok(StopReason::SupportReached),
            "iteration_limit" => Ok(StopReason::IterationLimit),
            "spectrum_collapsed" => Ok(StopReason::SpectrumCollapsed),
            other => Err(Error::InvalidInput(format!("unknown stop reason '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub tau: f64,
    pub phase: Phase,
    pub energy: f64,
    /// energy / optimal cost; NaN when the optimum is zero.
    pub ar: f64,
    pub ar_error: f64,
    /// Probability mass on the optimal basis states.
    pub optimal_norm: f64,
    pub active_count: usize,
    /// Filled in by post-run analysis, not by the optimizers.
    pub entropy: Option<f64>,
    /// Angle snapshot; empty after a CSV round trip of the main table.
    pub theta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryMeta {
    pub n_qubits: usize,
    pub edge_count: usize,
    pub seed: u64,
    /// True when the optimal cost is zero, which makes ratios undefined.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub records: Vec<IterationRecord>,
    pub success: bool,
    pub stop: StopReason,
}

const HEADER: &str = "iteration,tau,phase,energy,ar,ar_error,optimal_norm,active_count,entropy";

impl Trajectory {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("a trajectory always has at least one record")
    }

    /// Main table: one row per record, angles omitted. A leading comment line
    /// carries the run metadata.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# n_qubits={} edge_count={} seed={} degenerate={} success={} stop={}\n{HEADER}\n",
            self.meta.n_qubits,
            self.meta.edge_count,
            self.meta.seed,
            self.meta.degenerate,
            self.success,
            self.stop,
        );
        for r in &self.records {
            let entropy = r.entropy.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.iteration, r.tau, r.phase, r.energy, r.ar, r.ar_error, r.optimal_norm,
                r.active_count, entropy
            ));
        }
        out
    }

    /// Angle table: one row per record, one column per parameter.
    pub fn theta_csv(&self) -> String {
        let width = self.records.first().map(|r| r.theta.len()).unwrap_or(0);
        let mut out = String::from("iteration");
        for j in 0..width {
            out.push_str(&format!(",theta_{j}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.iteration.to_string());
            for t in &r.theta {
                out.push_str(&format!(",{t}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = None;
        let mut success = false;
        let mut stop = StopReason::IterationLimit;
        let mut records = Vec::new();
        let mut saw_header = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut fields = std::collections::HashMap::new();
                for kv in rest.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: format!("bad metadata entry '{kv}'"),
                    })?;
                    fields.insert(k, v);
                }
                let get = |k: &str| {
                    fields.get(k).copied().ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: format!("missing metadata key '{k}'"),
                    })
                };
                let bad = |k: &str| Error::Parse { line: line_no, msg: format!("bad value for '{k}'") };
                meta = Some(TrajectoryMeta {
                    n_qubits: get("n_qubits")?.parse().map_err(|_| bad("n_qubits"))?,
                    edge_count: get("edge_count")?.parse().map_err(|_| bad("edge_count"))?,
                    seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
                    degenerate: get("degenerate")?.parse().map_err(|_| bad("degenerate"))?,
                });
                success = get("success")?.parse().map_err(|_| bad("success"))?;
                stop = get("stop")?.parse()?;
                continue;
            }
            if !saw_header {
                if line != HEADER {
                    return Err(Error::Parse { line: line_no, msg: "unexpected column header".into() });
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(Error::Parse { line: line_no, msg: format!("expected 9 columns, found {}", cols.len()) });
            }
            let bad = |what: &str| Error::Parse { line: line_no, msg: format!("bad {what}") };
            records.push(IterationRecord {
                iteration: cols[0].parse().map_err(|_| bad("iteration"))?,
                tau: cols[1].parse().map_err(|_| bad("tau"))?,
                phase: cols[2].parse()?,
                energy: cols[3].parse().map_err(|_| bad("energy"))?,
                ar: cols[4].parse().map_err(|_| bad("ar"))?,
                ar_error: cols[5].parse().map_err(|_| bad("ar_error"))?,
                optimal_norm: cols[6].parse().map_err(|_| bad("optimal_norm"))?,
                active_count: cols[7].parse().map_err(|_| bad("active_count"))?,
                entropy: if cols[8].is_empty() {
                    None
                } else {
                    Some(cols[8].parse().map_err(|_| bad("entropy"))?)
                },
                theta: Vec::new(),
            });
        }
        let meta = meta.ok_or(Error::Parse { line: 0, msg: "missing metadata comment".into() })?;
        if records.is_empty() {
            return Err(Error::Parse { line: 0, msg: "no records".into() });
        }
        Ok(Trajectory { meta, records, success, stop })
    }
}

/// Reads back the angle table written by `theta_csv`.
pub fn parse_theta_csv(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("iteration") {
            continue;
        }
        let mut cols = line.split(',');
        let bad = |what: &str| Error::Parse { line: idx + 1, msg: format!("bad {what}") };
        let iteration: usize =
            cols.next().ok_or_else(|| bad("row"))?.parse().map_err(|_| bad("iteration"))?;
        let theta: Result<Vec<f64>> =
            cols.map(|c| c.parse().map_err(|_| bad("angle"))).collect();
        rows.push((iteration, theta?));
    }
    Ok(rows)
}
