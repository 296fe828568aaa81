//! Run-directory plumbing shared by the generate, run and analyze
//! subcommands: the deterministic file layout, atomic writes, the worker
//! pool, and the summary tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use varqite::analysis::{annotate_entropy, batch_stats, random_bipartition, volume_law_fit, BatchStats, EntropyFit};
use varqite::graph::{gen_complete_uniform, gen_nws, gen_sk, gen_three_regular, WeightedGraph};
use varqite::hamiltonian::{approximation_ratio, energy, exact_imaginary_time_step, CostHamiltonian};
use varqite::statevector::StateVector;
use varqite::trajectory::{parse_theta_csv, Phase, Trajectory};
use varqite::{adam, varit};

use crate::spec::{instance_seed, partition_seed, ExperimentSpec, Family};
use crate::CliError;

pub const SUMMARY_HEADER: &str = "ensemble,n,epsilon,instances,success_fraction,mean_iterations,mean_max_layers,entropy_slope_a,entropy_intercept_b";
pub const CURVES_HEADER: &str = "ensemble,n,epsilon,optimizer,iteration,mean_ar_error,sem_ar_error";

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::bad(format!("missing input file {}", path.display())),
        _ => CliError::io(format!("reading {}: {e}", path.display())),
    })
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written file. Distinct targets get distinct temp
/// names, which keeps parallel writers out of each other's way.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::io(format!("writing {}: {e}", path.display()));
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(format!("creating {}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Opt {
    Varit,
    Adam,
}

impl Opt {
    fn tag(self) -> &'static str {
        match self {
            Opt::Varit => "varit",
            Opt::Adam => "adam",
        }
    }
}

fn graph_rel(family: Family, n: usize, idx: usize) -> String {
    format!("graphs/{family}_n{n}_i{idx:03}.graph")
}

/// Trajectory file stem. The pruning threshold names varit files only; the
/// baseline always runs unpruned, so its files carry no threshold segment.
fn stem(family: Family, n: usize, epsilon: f64, idx: usize, opt: Opt) -> String {
    match opt {
        Opt::Varit => format!("{family}_n{n}_e{epsilon}_i{idx:03}.varit.csv"),
        Opt::Adam => format!("{family}_n{n}_i{idx:03}.adam.csv"),
    }
}

/// One optimizer invocation of the batch, in batch order.
struct Entry {
    family: Family,
    n: usize,
    idx: usize,
    seed: u64,
    epsilon: f64,
    opt: Opt,
}

impl Entry {
    fn traj_rel(&self) -> String {
        format!("traj/{}", stem(self.family, self.n, self.epsilon, self.idx, self.opt))
    }

    fn theta_rel(&self) -> String {
        format!("theta/{}", stem(self.family, self.n, self.epsilon, self.idx, self.opt))
    }

    fn reference_rel(&self) -> String {
        format!("reference/{}_n{}_e{}_i{:03}.csv", self.family, self.n, self.epsilon, self.idx)
    }

    fn graph_rel(&self) -> String {
        graph_rel(self.family, self.n, self.idx)
    }
}

/// Expands an experiment into its invocation list: per instance, one varit run
/// per pruning threshold, then one baseline run.
fn entry_list(spec: &ExperimentSpec) -> Vec<Entry> {
    let mut out = Vec::new();
    for &family in &spec.ensembles {
        for &n in &spec.sizes {
            for idx in 0..spec.instances {
                let seed = instance_seed(spec.master_seed, family, n, idx);
                if spec.optimizer.runs_varit() {
                    for &epsilon in &spec.epsilons {
                        out.push(Entry { family, n, idx, seed, epsilon, opt: Opt::Varit });
                    }
                }
                if spec.optimizer.runs_adam() {
                    out.push(Entry { family, n, idx, seed, epsilon: 0.0, opt: Opt::Adam });
                }
            }
        }
    }
    out
}

fn build_instance(family: Family, n: usize, seed: u64) -> Result<WeightedGraph, CliError> {
    match family {
        Family::ThreeRegular => gen_three_regular(n, seed),
        Family::Nws => gen_nws(n, seed),
        Family::Sk => gen_sk(n, seed),
        Family::Complete => gen_complete_uniform(n, seed),
    }
    .map_err(CliError::from_core)
}

/// Builds every instance of the experiment, writes graph files and the manifest,
/// and returns the graphs keyed by their relative path. With `reuse`, an
/// existing file is loaded instead of regenerated, so hand-edited instances
/// survive a rerun.
fn materialize_instances(
    spec: &ExperimentSpec,
    root: &Path,
    reuse: bool,
) -> Result<BTreeMap<String, WeightedGraph>, CliError> {
    ensure_dir(&root.join("graphs"))?;
    let mut graphs = BTreeMap::new();
    let mut manifest = String::new();
    for &family in &spec.ensembles {
        for &n in &spec.sizes {
            for idx in 0..spec.instances {
                let seed = instance_seed(spec.master_seed, family, n, idx);
                let rel = graph_rel(family, n, idx);
                let path = root.join(&rel);
                let graph = if reuse && path.exists() {
                    let g = WeightedGraph::from_text(&read_file(&path)?)
                        .map_err(|e| CliError::bad(format!("{rel}: {e}")))?;
                    if g.n_vertices() != n {
                        return Err(CliError::bad(format!(
                            "{rel}: expected {n} vertices, found {}",
                            g.n_vertices()
                        )));
                    }
                    g
                } else {
                    let g = build_instance(family, n, seed)?;
                    atomic_write(&path, &g.to_text())?;
                    g
                };
                manifest.push_str(&format!("{family} {n} {idx} {seed} {rel}\n"));
                graphs.insert(rel, graph);
            }
        }
    }
    atomic_write(&root.join("manifest.txt"), &manifest)?;
    Ok(graphs)
}

pub fn generate(spec: &ExperimentSpec, root: &Path) -> Result<(), CliError> {
    spec.validate()?;
    ensure_dir(root)?;
    atomic_write(&root.join("config.txt"), &spec.to_config_text())?;
    materialize_instances(spec, root, false)?;
    Ok(())
}

fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::bad("jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::io(format!("building worker pool: {e}")))
}

pub fn run(spec: &ExperimentSpec, root: &Path, jobs: usize) -> Result<(), CliError> {
    spec.validate()?;
    let pool = worker_pool(jobs)?;
    ensure_dir(root)?;
    atomic_write(&root.join("config.txt"), &spec.to_config_text())?;
    let graphs = materialize_instances(spec, root, true)?;
    ensure_dir(&root.join("traj"))?;
    ensure_dir(&root.join("theta"))?;
    if spec.ite_reference {
        ensure_dir(&root.join("reference"))?;
    }
    let entries = entry_list(spec);
    // Each output file is a pure function of its entry, and the summaries
    // are assembled from results collected back in entry order, so the job
    // count never shows up in the bytes.
    let trajectories: Vec<Trajectory> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| run_entry(spec, root, e, &graphs[&e.graph_rel()]))
            .collect::<Result<_, _>>()
    })?;
    let cells = collect_cells(&entries, &trajectories, &BTreeMap::new());
    write_tables(root, &cells)?;
    Ok(())
}

fn run_entry(
    spec: &ExperimentSpec,
    root: &Path,
    entry: &Entry,
    graph: &WeightedGraph,
) -> Result<Trajectory, CliError> {
    let convention = spec.convention.resolve(entry.family);
    let t = match entry.opt {
        Opt::Varit => {
            let mut cfg = spec.varit;
            cfg.epsilon = entry.epsilon;
            varit::run(graph, convention, &cfg, entry.seed)
        }
        Opt::Adam => adam::run(graph, convention, &spec.adam, entry.seed),
    }
    .map_err(CliError::from_core)?;
    atomic_write(&root.join(entry.traj_rel()), &t.to_csv())?;
    atomic_write(&root.join(entry.theta_rel()), &t.theta_csv())?;
    if spec.ite_reference && entry.opt == Opt::Varit {
        let table = ite_reference_table(graph, spec, entry, &t)?;
        atomic_write(&root.join(entry.reference_rel()), &table)?;
    }
    Ok(t)
}

/// Flow iterations against exact normalized imaginary-time evolution from
/// the same uniform start; both columns are raw energy ratios.
fn ite_reference_table(
    graph: &WeightedGraph,
    spec: &ExperimentSpec,
    entry: &Entry,
    t: &Trajectory,
) -> Result<String, CliError> {
    let convention = spec.convention.resolve(entry.family);
    let h = CostHamiltonian::build(graph, convention).map_err(CliError::from_core)?;
    let mut state = StateVector::plus_state(h.n_qubits).map_err(CliError::from_core)?;
    let mut out = String::from("iteration,tau,ar_flow,ar_ite,difference\n");
    for (k, r) in t.records.iter().filter(|r| r.phase == Phase::Flow).enumerate() {
        if k > 0 {
            exact_imaginary_time_step(&mut state, &h, spec.varit.dtau).map_err(CliError::from_core)?;
        }
        let ar_ite = approximation_ratio(energy(&state, &h).map_err(CliError::from_core)?, &h)
            .map_err(CliError::from_core)?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration,
            r.tau,
            r.ar,
            ar_ite,
            r.ar - ar_ite
        ));
    }
    Ok(out)
}

pub fn analyze(
    spec: &ExperimentSpec,
    root: &Path,
    jobs: usize,
    entropy: bool,
) -> Result<(), CliError> {
    spec.validate()?;
    let pool = worker_pool(jobs)?;
    let entries = entry_list(spec);
    let mut trajectories: Vec<Trajectory> = entries
        .iter()
        .map(|e| load_trajectory(root, e))
        .collect::<Result<_, _>>()?;
    let peaks: Vec<Option<f64>> = if entropy {
        let mut graphs = BTreeMap::new();
        for e in &entries {
            let rel = e.graph_rel();
            if !graphs.contains_key(&rel) {
                let g = WeightedGraph::from_text(&read_file(&root.join(&rel))?)
                    .map_err(|err| CliError::bad(format!("{rel}: {err}")))?;
                graphs.insert(rel, g);
            }
        }
        pool.install(|| {
            entries
                .par_iter()
                .zip(trajectories.par_iter_mut())
                .map(|(e, t)| annotate_entry(spec, root, e, t, &graphs[&e.graph_rel()]))
                .collect::<Result<_, _>>()
        })?
    } else {
        vec![None; entries.len()]
    };
    let fits = entropy_fits(spec, &entries, &peaks);
    let cells = collect_cells(&entries, &trajectories, &fits);
    write_tables(root, &cells)?;
    write_fit_report(root, spec, &entries, &peaks, &fits, entropy)?;
    Ok(())
}

/// Reads a trajectory back with its angle table, which the main table
/// drops; the angles drive the entropy replay.
fn load_trajectory(root: &Path, entry: &Entry) -> Result<Trajectory, CliError> {
    let rel = entry.traj_rel();
    let mut t = Trajectory::from_csv(&read_file(&root.join(&rel))?)
        .map_err(|e| CliError::bad(format!("{rel}: {e}")))?;
    let theta_rel = entry.theta_rel();
    let rows = parse_theta_csv(&read_file(&root.join(&theta_rel))?)
        .map_err(|e| CliError::bad(format!("{theta_rel}: {e}")))?;
    if rows.len() != t.records.len() {
        return Err(CliError::bad(format!(
            "{theta_rel}: {} angle rows for {} records",
            rows.len(),
            t.records.len()
        )));
    }
    for (r, (_, theta)) in t.records.iter_mut().zip(rows) {
        r.theta = theta;
    }
    Ok(t)
}

/// Entropy annotation of one converged varit run: fills the entropy column
/// over the pre-switch window, rewrites the trajectory file, and reports
/// the peak value.
fn annotate_entry(
    spec: &ExperimentSpec,
    root: &Path,
    entry: &Entry,
    t: &mut Trajectory,
    graph: &WeightedGraph,
) -> Result<Option<f64>, CliError> {
    if entry.opt != Opt::Varit || !t.success {
        return Ok(None);
    }
    let subset = random_bipartition(entry.n, partition_seed(entry.seed)).map_err(CliError::from_core)?;
    let peak = annotate_entropy(
        t,
        graph,
        entry.epsilon,
        spec.varit.rank_order,
        &subset,
        spec.varit.switch_threshold,
    )
    .map_err(CliError::from_core)?;
    atomic_write(&root.join(entry.traj_rel()), &t.to_csv())?;
    Ok(peak)
}

/// Key of one summary row.
#[derive(Clone, Copy, PartialEq)]
struct CellKey {
    family: Family,
    n: usize,
    epsilon: f64,
    opt: Opt,
}

struct Cell {
    key: CellKey,
    stats: BatchStats,
    fit: Option<(f64, f64)>,
}

/// Groups trajectories into summary rows, keeping the first-appearance
/// order of the batch (family-major, then size, then threshold).
fn collect_cells(
    entries: &[Entry],
    trajectories: &[Trajectory],
    fits: &BTreeMap<String, EntropyFit>,
) -> Vec<Cell> {
    let mut keys: Vec<CellKey> = Vec::new();
    let mut members: Vec<Vec<&Trajectory>> = Vec::new();
    for (e, t) in entries.iter().zip(trajectories) {
        let key = CellKey { family: e.family, n: e.n, epsilon: e.epsilon, opt: e.opt };
        match keys.iter().position(|k| *k == key) {
            Some(i) => members[i].push(t),
            None => {
                keys.push(key);
                members.push(vec![t]);
            }
        }
    }
    keys.into_iter()
        .zip(members)
        .map(|(key, ts)| {
            let owned: Vec<Trajectory> = ts.into_iter().cloned().collect();
            let fit = fits
                .get(&fit_group(key.family, key.epsilon))
                .map(|f| (f.slope, f.intercept));
            Cell { key, stats: batch_stats(&owned), fit }
        })
        .collect()
}

fn fit_group(family: Family, epsilon: f64) -> String {
    format!("{family} {epsilon}")
}

/// Least-squares entropy scaling per (family, threshold) group: one point
/// per size, the mean peak over the instances that produced one, fitted
/// when at least three sizes contribute.
fn entropy_fits(
    spec: &ExperimentSpec,
    entries: &[Entry],
    peaks: &[Option<f64>],
) -> BTreeMap<String, EntropyFit> {
    let mut fits = BTreeMap::new();
    for &family in &spec.ensembles {
        for &epsilon in &spec.epsilons {
            let points = fit_points(spec, entries, peaks, family, epsilon);
            if points.len() >= 3 {
                if let Ok(fit) = volume_law_fit(&points) {
                    fits.insert(fit_group(family, epsilon), fit);
                }
            }
        }
    }
    fits
}

fn fit_points(
    spec: &ExperimentSpec,
    entries: &[Entry],
    peaks: &[Option<f64>],
    family: Family,
    epsilon: f64,
) -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    for &n in &spec.sizes {
        let vals: Vec<f64> = entries
            .iter()
            .zip(peaks)
            .filter(|(e, _)| {
                e.opt == Opt::Varit && e.family == family && e.n == n && e.epsilon == epsilon
            })
            .filter_map(|(_, p)| *p)
            .collect();
        if !vals.is_empty() {
            points.push((n as f64, vals.iter().sum::<f64>() / vals.len() as f64));
        }
    }
    points
}

fn write_tables(root: &Path, cells: &[Cell]) -> Result<(), CliError> {
    let varit: Vec<&Cell> = cells.iter().filter(|c| c.key.opt == Opt::Varit).collect();
    let adam: Vec<&Cell> = cells.iter().filter(|c| c.key.opt == Opt::Adam).collect();
    let primary = if varit.is_empty() { &adam } else { &varit };
    atomic_write(&root.join("summary.csv"), &summary_table(primary))?;
    if !varit.is_empty() && !adam.is_empty() {
        atomic_write(&root.join("summary_adam.csv"), &summary_table(&adam))?;
    }
    atomic_write(&root.join("curves.csv"), &curves_table(cells))?;
    Ok(())
}

fn summary_table(cells: &[&Cell]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for c in cells {
        let (slope, intercept) = c.fit.unwrap_or((f64::NAN, f64::NAN));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.key.family,
            c.key.n,
            c.key.epsilon,
            c.stats.runs,
            c.stats.success_fraction,
            c.stats.mean_iterations_to_converge,
            c.stats.mean_layer_equivalents,
            slope,
            intercept
        ));
    }
    out
}

/// Long-format per-iteration means, one row per (cell, iteration), for
/// direct plotting.
fn curves_table(cells: &[Cell]) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    for c in cells {
        for (i, (mean, sem)) in
            c.stats.mean_ar_error.iter().zip(&c.stats.sem_ar_error).enumerate()
        {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.key.family, c.key.n, c.key.epsilon, c.key.opt.tag(), i, mean, sem
            ));
        }
    }
    out
}

fn write_fit_report(
    root: &Path,
    spec: &ExperimentSpec,
    entries: &[Entry],
    peaks: &[Option<f64>],
    fits: &BTreeMap<String, EntropyFit>,
    entropy: bool,
) -> Result<(), CliError> {
    let mut out = String::from("# entanglement scaling, one block per (ensemble, threshold) group\n");
    if !entropy {
        out.push_str("entropy annotation disabled; rerun analyze with --entropy true for fits\n");
        return atomic_write(&root.join("fit_report.txt"), &out);
    }
    for &family in &spec.ensembles {
        for &epsilon in &spec.epsilons {
            if !entries.iter().any(|e| e.opt == Opt::Varit && e.family == family && e.epsilon == epsilon) {
                continue;
            }
            out.push_str(&format!("ensemble={family} epsilon={epsilon}\n"));
            let points = fit_points(spec, entries, peaks, family, epsilon);
            for (n, mean) in &points {
                out.push_str(&format!("  n={n} mean_peak_entropy={mean}\n"));
            }
            match fits.get(&fit_group(family, epsilon)) {
                Some(f) => out.push_str(&format!(
                    "  fit: slope={} slope_stderr={} intercept={} intercept_stderr={} points={}\n",
                    f.slope, f.slope_stderr, f.intercept, f.intercept_stderr, f.points
                )),
                None => out.push_str(&format!(
                    "  fit: insufficient data ({} sizes with entropy, need 3)\n",
                    points.len()
                )),
            }
        }
    }
    atomic_write(&root.join("fit_report.txt"), &out)
}

/// True when the directory already carries a config, which run and analyze
/// treat as the baseline spec.
pub fn dir_config(root: &Path) -> Option<PathBuf> {
    let p = root.join("config.txt");
    p.is_file().then_some(p)
}
