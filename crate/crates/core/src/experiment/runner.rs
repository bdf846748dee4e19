use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::dataset::{confusion_from_semantics, stratified_split, Dataset, MinMaxScaler};
use crate::engine::{
    classification_front, nsga2_generation, spea2_generation, Algorithm, Engine, Individual, Method, Nsga2State,
    Spea2State,
};
use crate::error::{Error, Result};
use crate::metrics::{hypervolume_trapezoid, FrontSnapshot};

/// What an observer sees after initialisation (generation 0) and after
/// every generation.
pub struct GenerationView<'a> {
    pub generation: usize,
    /// The working population.
    pub population: &'a [Individual],
    /// The best-so-far set: the population for NSGA-II, the archive for
    /// SPEA2 (the population before the first archive exists).
    pub elite: &'a [Individual],
}

/// Runs `generations` steps of `algorithm` and returns the final elite set.
pub fn evolve<R, F>(
    algorithm: Algorithm,
    engine: &Engine<'_>,
    generations: usize,
    rng: &mut R,
    mut observe: F,
) -> Result<Vec<Individual>>
where
    R: Rng + ?Sized,
    F: FnMut(&GenerationView<'_>) -> Result<()>,
{
    match algorithm {
        Algorithm::Nsga2 => {
            let mut s = Nsga2State::initialize(engine, rng)?;
            observe(&GenerationView {
                generation: 0,
                population: &s.population,
                elite: &s.population,
            })?;
            for _ in 0..generations {
                s = nsga2_generation(s, engine, rng)?;
                observe(&GenerationView {
                    generation: s.generation,
                    population: &s.population,
                    elite: &s.population,
                })?;
            }
            Ok(s.population)
        }
        Algorithm::Spea2 => {
            let mut s = Spea2State::initialize(engine, rng)?;
            observe(&GenerationView {
                generation: 0,
                population: &s.population,
                elite: &s.population,
            })?;
            for _ in 0..generations {
                s = spea2_generation(s, engine, rng)?;
                observe(&GenerationView {
                    generation: s.generation,
                    population: &s.population,
                    elite: &s.archive,
                })?;
            }
            Ok(if s.archive.is_empty() { s.population } else { s.archive })
        }
    }
}

/// TPR/TNR front of `pop` as measured on `data`.
pub fn front_on(pop: &[Individual], data: &Dataset) -> Result<FrontSnapshot> {
    let mut pts = Vec::new();
    for ind in classification_front(pop) {
        let c = confusion_from_semantics(&ind.program.semantics(data)?, data);
        pts.push((c.tpr(), c.tnr()));
    }
    FrontSnapshot::new(pts)
}

fn training_front(pop: &[Individual]) -> Result<FrontSnapshot> {
    FrontSnapshot::new(classification_front(pop).into_iter().map(|i| (i.tpr(), i.tnr())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    /// Training-front hypervolume after initialisation and each generation.
    pub trace: Vec<f64>,
    /// Final front evaluated on the held-out half.
    pub front: FrontSnapshot,
    pub hv: f64,
    pub wall_time: Option<Duration>,
}

/// One independent run: fresh stratified split from the run seed, evolution
/// on the training half, then the final training front re-scored on the
/// test half.
pub fn run_single(cfg: &ExperimentConfig, data: &Dataset, run_index: usize) -> Result<RunResult> {
    let start = Instant::now();
    let seed = cfg.seed(run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = stratified_split(data, &mut rng)?;
    if cfg.dataset.normalize {
        let scaler = MinMaxScaler::fit(&train);
        train = scaler.transform(&train);
        test = scaler.transform(&test);
    }
    let ecfg = cfg.engine_config();
    let engine = Engine::new(&ecfg, &train)?;
    let mut trace = Vec::with_capacity(cfg.generations + 1);
    let finals = evolve(cfg.algorithm, &engine, cfg.generations, &mut rng, |view| {
        trace.push(hypervolume_trapezoid(&training_front(view.elite)?));
        Ok(())
    })?;
    let front = front_on(&finals, &test)?;
    Ok(RunResult {
        run_index,
        seed,
        trace,
        hv: hypervolume_trapezoid(&front),
        front,
        wall_time: Some(start.elapsed()),
    })
}

pub fn result_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(format!("run_{run_index:04}.csv"))
}

pub fn trace_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(format!("run_{run_index:04}_trace.csv"))
}

/// Wall time lives apart from the result files so those stay
/// byte-for-byte reproducible.
pub fn timing_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(format!("run_{run_index:04}.timing.json"))
}

pub fn failure_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(format!("run_{run_index:04}.failed"))
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    run_id: usize,
    seed: u64,
    algorithm: Algorithm,
    method: Method,
    lbss: Option<f64>,
    ubss: Option<f64>,
    dataset: String,
    hv: f64,
    tpr: Option<f64>,
    tnr: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    generation: usize,
    hv: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Timing {
    wall_time_secs: f64,
}

/// Writes `bytes` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Persists one run. The result CSV is written last, so its presence
/// marks the run as complete.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, dataset: &str, r: &RunResult) -> Result<()> {
    let trace = csv_bytes(
        r.trace
            .iter()
            .enumerate()
            .map(|(generation, &hv)| TraceRow { generation, hv }),
    )?;
    write_atomic(&trace_path(dir, r.run_index), &trace)?;
    if let Some(t) = r.wall_time {
        let json = serde_json::to_vec_pretty(&Timing {
            wall_time_secs: t.as_secs_f64(),
        })?;
        write_atomic(&timing_path(dir, r.run_index), &json)?;
    }
    let row = |pt: Option<(f64, f64)>| ResultRow {
        run_id: r.run_index,
        seed: r.seed,
        algorithm: cfg.algorithm,
        method: cfg.method,
        lbss: cfg.bounds.and_then(|b| b.lbss),
        ubss: cfg.bounds.map(|b| b.ubss),
        dataset: dataset.to_string(),
        hv: r.hv,
        tpr: pt.map(|p| p.0),
        tnr: pt.map(|p| p.1),
    };
    let rows: Vec<ResultRow> = if r.front.is_empty() {
        vec![row(None)]
    } else {
        r.front.points().iter().map(|&p| row(Some(p))).collect()
    };
    write_atomic(&result_path(dir, r.run_index), &csv_bytes(rows)?)?;
    let _ = fs::remove_file(failure_path(dir, r.run_index));
    Ok(())
}

/// Reads a run back from its files.
pub fn read_run(dir: &Path, run_index: usize) -> Result<RunResult> {
    let path = result_path(dir, run_index);
    let load_err = |reason: String| Error::Load {
        path: path.clone(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(&path)?;
    let mut seed = None;
    let mut hv = 0.0;
    let mut pts = Vec::new();
    for row in rdr.deserialize() {
        let row: ResultRow = row?;
        if row.run_id != run_index {
            return Err(load_err(format!("run_id {} in file for run {run_index}", row.run_id)));
        }
        seed = Some(row.seed);
        hv = row.hv;
        if let (Some(x), Some(y)) = (row.tpr, row.tnr) {
            pts.push((x, y));
        }
    }
    let seed = seed.ok_or_else(|| load_err("no rows".into()))?;
    let front = FrontSnapshot::new(pts)?;

    let trace = match csv::Reader::from_path(trace_path(dir, run_index)) {
        Ok(mut t) => t
            .deserialize::<TraceRow>()
            .map(|r| r.map(|r| r.hv))
            .collect::<std::result::Result<_, _>>()?,
        Err(_) => Vec::new(),
    };
    let wall_time = fs::read(timing_path(dir, run_index))
        .ok()
        .and_then(|b| serde_json::from_slice::<Timing>(&b).ok())
        .map(|t| Duration::from_secs_f64(t.wall_time_secs));
    Ok(RunResult {
        run_index,
        seed,
        trace,
        front,
        hv,
        wall_time,
    })
}

/// A cell ready to run: validated config plus its loaded dataset.
pub struct PreparedCell {
    pub config: ExperimentConfig,
    pub data: Dataset,
}

impl PreparedCell {
    /// Loads the dataset; failures surface here, before any run starts.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data = config.dataset.load()?;
        Ok(Self { config, data })
    }

    pub fn dir(&self) -> &Path {
        &self.config.output_dir
    }
}

#[derive(Debug, Default)]
pub struct ExecutionSummary {
    /// Runs evolved in this invocation.
    pub executed: usize,
    /// Runs whose result file already existed.
    pub skipped: usize,
    /// Runs that returned an error or panicked.
    pub failures: Vec<Error>,
}

impl ExecutionSummary {
    pub fn all_completed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

enum TaskOutcome {
    Executed,
    Skipped,
    Failed(Error),
}

fn run_task(cell: &PreparedCell, run_index: usize) -> TaskOutcome {
    let dir = cell.dir();
    if result_path(dir, run_index).exists() {
        return TaskOutcome::Skipped;
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let r = run_single(&cell.config, &cell.data, run_index)?;
        write_run(dir, &cell.config, cell.data.name(), &r)
    }));
    let reason = match outcome {
        Ok(Ok(())) => {
            log::info!("{} run {run_index}: done", cell.config.label());
            return TaskOutcome::Executed;
        }
        Ok(Err(e)) => e.to_string(),
        Err(p) => panic_message(p),
    };
    log::error!("{} run {run_index} failed: {reason}", cell.config.label());
    let _ = fs::write(failure_path(dir, run_index), &reason);
    TaskOutcome::Failed(Error::RunFailed {
        cell: cell.config.label(),
        run: run_index,
        reason,
    })
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every (cell, run) pair on `jobs` threads, skipping runs that are
/// already on disk. Results do not depend on `jobs` or on cell order.
pub fn execute(cells: &[PreparedCell], jobs: usize) -> Result<ExecutionSummary> {
    for cell in cells {
        fs::create_dir_all(cell.dir())?;
    }
    let tasks: Vec<(&PreparedCell, usize)> = cells
        .iter()
        .flat_map(|c| (0..c.config.runs).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    let outcomes: Vec<TaskOutcome> = pool.install(|| tasks.par_iter().map(|&(c, r)| run_task(c, r)).collect());
    let mut summary = ExecutionSummary::default();
    for o in outcomes {
        match o {
            TaskOutcome::Executed => summary.executed += 1,
            TaskOutcome::Skipped => summary.skipped += 1,
            TaskOutcome::Failed(e) => summary.failures.push(e),
        }
    }
    Ok(summary)
}

pub struct ExperimentOutcome {
    /// Completed runs in run order.
    pub results: Vec<RunResult>,
    pub summary: ExecutionSummary,
}

/// Runs (or resumes) a single experiment cell.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    let cell = PreparedCell::prepare(cfg.clone())?;
    fs::create_dir_all(cell.dir())?;
    write_atomic(&cell.dir().join("config.json"), &serde_json::to_vec_pretty(cfg)?)?;
    let summary = execute(std::slice::from_ref(&cell), jobs)?;
    let results = (0..cfg.runs)
        .filter(|&r| result_path(cell.dir(), r).exists())
        .map(|r| read_run(cell.dir(), r))
        .collect::<Result<_>>()?;
    Ok(ExperimentOutcome { results, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::DatasetSpec;
    use crate::semantic::SemanticBounds;

    fn data() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64 / 60.0;
                vec![t, (t * 9.0).cos(), t * t - 0.3]
            })
            .collect();
        Dataset::new("toy", rows, (0..60).map(|i| i % 5 == 0).collect()).unwrap()
    }

    fn cfg(algorithm: Algorithm, method: Method) -> ExperimentConfig {
        let bounds = method
            .needs_bounds()
            .then_some(SemanticBounds { lbss: None, ubss: 0.5 });
        let mut c = ExperimentConfig::new(DatasetSpec::default(), algorithm, method, bounds);
        c.population = 20;
        c.generations = 3;
        c.runs = 2;
        c.base_seed = 9;
        c
    }

    #[test]
    fn run_produces_valid_result() {
        let d = data();
        for alg in [Algorithm::Nsga2, Algorithm::Spea2] {
            for m in Method::ALL {
                let r = run_single(&cfg(alg, m), &d, 1).unwrap();
                assert_eq!(r.seed, 10);
                assert_eq!(r.trace.len(), 4);
                assert!(r.trace.iter().all(|h| (0.0..=1.0).contains(h)));
                assert!(!r.front.is_empty());
                assert!((0.0..=1.0).contains(&r.hv));
                assert_eq!(r.hv, hypervolume_trapezoid(&r.front));
            }
        }
    }

    #[test]
    fn nsga2_trace_never_drops_extremes() {
        // The extreme points of the training front survive elitism.
        let d = data();
        let c = cfg(Algorithm::Nsga2, Method::Canonical);
        let (train, _) = stratified_split(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let ecfg = c.engine_config();
        let e = Engine::new(&ecfg, &train).unwrap();
        let mut best = (0.0f64, 0.0f64);
        evolve(Algorithm::Nsga2, &e, 5, &mut ChaCha8Rng::seed_from_u64(3), |v| {
            let tpr = v.population.iter().map(|i| i.tpr()).fold(0.0, f64::max);
            let tnr = v.population.iter().map(|i| i.tnr()).fold(0.0, f64::max);
            assert!(tpr >= best.0 && tnr >= best.1);
            best = (tpr, tnr);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(Algorithm::Spea2, Method::Sdo);
        let r = run_single(&c, &data(), 0).unwrap();
        write_run(dir.path(), &c, "toy", &r).unwrap();
        let back = read_run(dir.path(), 0).unwrap();
        assert_eq!(back.front, r.front);
        assert_eq!(back.hv, r.hv);
        assert_eq!(back.trace, r.trace);
        assert_eq!(back.seed, r.seed);
        let text = fs::read_to_string(result_path(dir.path(), 0)).unwrap();
        assert!(text.starts_with("run_id,seed,algorithm,method,lbss,ubss,dataset,hv,tpr,tnr\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("0,9,spea2,sdo,,0.5,toy,"));
    }
}
