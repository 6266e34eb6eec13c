//! Experiment orchestration behind the command line: run configuration,
//! training runs per seed, evaluation, sweeps, force statistics and replays.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    apply_variation, variation_label, EnvConfig, GraspEnv, Outcome, TaskConfig, Variation,
};
use crate::error::{Error, Result};
use crate::mappo::{
    episode_seed, evaluate, run_episode, train, BaselineVariant, Checkpoint, MetricsRow,
    TrainConfig, METRICS_SCHEMA,
};
use crate::physics::{GeometryProfile, WorldConfig};
use crate::sensing::{SensorConfig, FORCE_DIM};

pub const RESULTS_SCHEMA: &str = "tgrasp-results/1.0";
pub const TRACE_SCHEMA: &str = "tgrasp-trace/1.0";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "checkpoint_final.bin";
/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "TGRASP_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub label: String,
    pub variant: BaselineVariant,
    pub seeds: Vec<u64>,
    /// Output root; falls back to `$TGRASP_OUT`, then `./runs`.
    pub output_dir: Option<PathBuf>,
    pub world: WorldConfig,
    pub sensor: SensorConfig,
    pub task: TaskConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label: "run".into(),
            variant: BaselineVariant::Ours,
            seeds: vec![0],
            output_dir: None,
            world: WorldConfig::default(),
            sensor: SensorConfig::default(),
            task: TaskConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            world: self.world.clone(),
            sensor: self.sensor.clone(),
            task: self.task.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config(format!("seeds must be distinct, got {:?}", self.seeds)));
        }
        if self.label.is_empty() || self.label.contains(['/', '\\']) {
            return Err(Error::config(format!("label '{}' is not a valid directory name", self.label)));
        }
        self.env_config().validate()?;
        self.train.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("cannot render config: {e}")))
    }

    /// Output root: the configured directory, `$TGRASP_OUT`, or `./runs`.
    pub fn output_root(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(default_output_root)
    }
}

pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Set a dotted `key` (e.g. `train.num_envs`) in a TOML table; the value is
/// parsed as TOML and falls back to a plain string.
fn set_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::config(format!("empty override key '{key}'")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override key '{key}': '{p}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parse a run configuration from TOML text with `key=value` overrides.
pub fn parse_run_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| Error::config(format!("invalid TOML: {e}")))?;
    for (k, v) in overrides {
        set_override(&mut table, k, v)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_run_config(&text, overrides).map_err(|e| match e {
        Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Write a CSV table whose first line is `#schema=<schema>`.
fn write_versioned_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let mut buf = format!("#schema={schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_file(path, &buf)
}

/// Check the `#schema=name/MAJOR.MINOR` line against `expected`.
fn check_schema(line: &str, expected: &str, path: &Path) -> Result<()> {
    let found = line.trim().strip_prefix("#schema=").ok_or_else(|| {
        Error::Format(format!("{}: missing schema line", path.display()))
    })?;
    let (name, version) = expected.split_once('/').expect("schema has a version");
    let major = version.split('.').next().unwrap_or("");
    let (f_name, f_version) = found.split_once('/').unwrap_or((found, ""));
    let f_major = f_version.split('.').next().unwrap_or("");
    if f_name != name || f_major != major {
        return Err(Error::Integrity {
            field: format!("{} schema", path.display()),
            expected: format!("{name}/{major}.x"),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn read_versioned_csv<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    check_schema(&first, schema, path)?;
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub mean_position_error: f64,
    pub reward_reach: f64,
    pub reward_grasp: f64,
    pub reward_grasp_team: f64,
    pub reward_lift: f64,
    pub reward_pos: f64,
    pub reward_ori: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_versioned_csv(path, METRICS_SCHEMA, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    read_versioned_csv(path, METRICS_SCHEMA)
}

/// Train one run per seed under `<root>/<label>/seed_<seed>/`; returns the
/// run directory.
pub fn cmd_train(
    cfg: &RunConfig,
    parallel: bool,
    mut progress: impl FnMut(u64, &MetricsRow),
) -> Result<PathBuf> {
    cfg.validate()?;
    let run_dir = cfg.output_root().join(&cfg.label);
    create_dir(&run_dir)?;
    let resolved = cfg.to_toml()?;
    write_file(&run_dir.join(RESOLVED_CONFIG), resolved.as_bytes())?;
    for &seed in &cfg.seeds {
        let dir = run_dir.join(format!("seed_{seed}"));
        create_dir(&dir)?;
        let mut seed_cfg = cfg.clone();
        seed_cfg.seeds = vec![seed];
        write_file(&dir.join(RESOLVED_CONFIG), seed_cfg.to_toml()?.as_bytes())?;
        let metrics_path = dir.join(METRICS_FILE);
        let every = cfg.train.checkpoint_every as u64;
        let mut rows: Vec<MetricsRow> = Vec::new();
        let result = train(
            cfg.env_config(),
            cfg.train.clone(),
            cfg.variant,
            seed,
            parallel,
            |row, trainer| {
                rows.push(row.clone());
                write_metrics(&metrics_path, &rows)?;
                if every > 0 && row.iteration % every == 0 {
                    let ck_dir = dir.join("checkpoints");
                    create_dir(&ck_dir)?;
                    trainer
                        .checkpoint()
                        .save(&ck_dir.join(format!("iter_{:06}.bin", row.iteration)))?;
                }
                progress(seed, row);
                Ok(())
            },
        );
        let (rows, checkpoint) = result?;
        write_metrics(&metrics_path, &rows)?;
        checkpoint.save(&dir.join(FINAL_CHECKPOINT))?;
    }
    Ok(run_dir)
}

/// One evaluated (checkpoint, variation, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variant: BaselineVariant,
    pub variation: String,
    pub success_rate: f64,
    pub position_error_mean: f64,
    /// Sample variance of the final position error.
    pub position_error_sample_variance: f64,
    pub n_episodes: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_versioned_csv(path, RESULTS_SCHEMA, &self.rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Ok(Self {
            rows: read_versioned_csv(path, RESULTS_SCHEMA)?,
        })
    }

    /// Success rates with variations as rows and variants as columns,
    /// averaged over seeds and checkpoints.
    pub fn pivot(&self) -> String {
        let mut variants: Vec<BaselineVariant> = Vec::new();
        let mut variations: Vec<String> = Vec::new();
        let mut cells: BTreeMap<(String, u8), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            if !variants.contains(&r.variant) {
                variants.push(r.variant);
            }
            if !variations.contains(&r.variation) {
                variations.push(r.variation.clone());
            }
            let c = cells.entry((r.variation.clone(), r.variant.code())).or_default();
            c.0 += r.success_rate;
            c.1 += 1;
        }
        let width = variations.iter().map(String::len).max().unwrap_or(9).max(9);
        let mut out = format!("{:width$}", "variation");
        for v in &variants {
            out += &format!(" {:>9}", v.name());
        }
        out.push('\n');
        for var in &variations {
            out += &format!("{var:width$}");
            for v in &variants {
                match cells.get(&(var.clone(), v.code())) {
                    Some((sum, n)) => out += &format!(" {:>8.1}%", 100.0 * sum / *n as f64),
                    None => out += &format!(" {:>9}", "-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate a loaded checkpoint on one variation cell.
pub fn eval_checkpoint(
    checkpoint: &Checkpoint,
    variations: &[Variation],
    n_episodes: usize,
    seed: u64,
    parallel: bool,
) -> Result<ResultRow> {
    let report = evaluate(
        &checkpoint.policy,
        &checkpoint.env_config,
        variations,
        n_episodes,
        seed,
        parallel,
    )?;
    Ok(ResultRow {
        variant: checkpoint.variant(),
        variation: variation_label(variations),
        success_rate: report.success_rate,
        position_error_mean: report.position_error_mean,
        position_error_sample_variance: report.position_error_variance,
        n_episodes: report.n_episodes,
        seed,
    })
}

fn check_expected_variant(ck: &Checkpoint, expected: Option<BaselineVariant>) -> Result<()> {
    match expected {
        Some(v) if v != ck.variant() => Err(Error::config(format!(
            "checkpoint was trained as '{}' but '{}' was requested",
            ck.variant(),
            v
        ))),
        _ => Ok(()),
    }
}

pub fn cmd_eval(
    checkpoint: &Path,
    expected_variant: Option<BaselineVariant>,
    variations: &[Variation],
    n_episodes: usize,
    seed: u64,
    parallel: bool,
) -> Result<ResultRow> {
    let ck = Checkpoint::load(checkpoint)?;
    check_expected_variant(&ck, expected_variant)?;
    eval_checkpoint(&ck, variations, n_episodes, seed, parallel)
}

/// Variation cells of a sweep: the cross product of force scales and
/// geometries, leaving nominal values out of each cell.
pub fn sweep_cells(scales: &[f64], geometries: &[GeometryProfile]) -> Result<Vec<Vec<Variation>>> {
    if scales.is_empty() && geometries.is_empty() {
        return Err(Error::config("sweep needs at least one force scale or geometry"));
    }
    let scales: Vec<f64> = if scales.is_empty() { vec![1.0] } else { scales.to_vec() };
    let geometries = if geometries.is_empty() {
        vec![GeometryProfile::RectangularSlab]
    } else {
        geometries.to_vec()
    };
    let mut cells = Vec::new();
    for &g in &geometries {
        for &s in &scales {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::config(format!("force scale must be > 0, got {s}")));
            }
            let mut cell = Vec::new();
            if s != 1.0 {
                cell.push(Variation::ForceScale(s));
            }
            if g != GeometryProfile::RectangularSlab {
                cell.push(Variation::Geometry(g));
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Evaluate every checkpoint on every cell and eval seed. Rows come out in
/// (checkpoint, cell, seed) order regardless of scheduling.
pub fn cmd_sweep(
    checkpoints: &[PathBuf],
    cells: &[Vec<Variation>],
    seeds: &[u64],
    n_episodes: usize,
    parallel: bool,
) -> Result<ResultsTable> {
    if checkpoints.is_empty() {
        return Err(Error::config("sweep needs at least one checkpoint"));
    }
    if cells.is_empty() || seeds.is_empty() {
        return Err(Error::config("sweep spec is empty"));
    }
    let loaded = checkpoints
        .iter()
        .map(|p| Checkpoint::load(p))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, u64)> = (0..loaded.len())
        .flat_map(|c| (0..cells.len()).flat_map(move |v| seeds.iter().map(move |&s| (c, v, s))))
        .collect();
    let run = |&(c, v, s): &(usize, usize, u64)| eval_checkpoint(&loaded[c], &cells[v], n_episodes, s, false);
    let rows: Vec<Result<ResultRow>> = if parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    Ok(ResultsTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Mean and population variance of each actor force channel over all steps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForceStats {
    pub variant: BaselineVariant,
    pub variation: String,
    pub n_episodes: usize,
    pub n_samples: usize,
    /// `[agent][channel]`.
    pub mean: Vec<[f64; FORCE_DIM]>,
    pub variance: Vec<[f64; FORCE_DIM]>,
    /// Statistics of all channels pooled together.
    pub pooled_mean: f64,
    pub pooled_variance: f64,
}

pub fn force_stats(
    checkpoint: &Checkpoint,
    variations: &[Variation],
    n_episodes: usize,
    seed: u64,
) -> Result<ForceStats> {
    let config = apply_variation(&checkpoint.env_config, variations)?;
    let mut env = GraspEnv::new(config, checkpoint.variant().actor_force())?;
    let mut samples: Vec<[[f64; FORCE_DIM]; 2]> = Vec::new();
    for i in 0..n_episodes {
        run_episode(&checkpoint.policy, &mut env, episode_seed(seed, i as u64), |_, step| {
            let mut s = [[0.0; FORCE_DIM]; 2];
            for (agent, o) in step.observations.iter().enumerate() {
                s[agent].copy_from_slice(o.force());
            }
            samples.push(s);
        })?;
    }
    let n = samples.len();
    let mut mean = vec![[0.0; FORCE_DIM]; 2];
    let mut variance = vec![[0.0; FORCE_DIM]; 2];
    let mut pooled_sum = 0.0;
    if n > 0 {
        for s in &samples {
            for a in 0..2 {
                for k in 0..FORCE_DIM {
                    mean[a][k] += s[a][k] / n as f64;
                    pooled_sum += s[a][k];
                }
            }
        }
        for s in &samples {
            for a in 0..2 {
                for k in 0..FORCE_DIM {
                    variance[a][k] += (s[a][k] - mean[a][k]).powi(2) / n as f64;
                }
            }
        }
    }
    let pooled_n = (n * 2 * FORCE_DIM) as f64;
    let pooled_mean = if n > 0 { pooled_sum / pooled_n } else { 0.0 };
    let pooled_variance = if n > 0 {
        samples
            .iter()
            .flat_map(|s| s.iter().flatten())
            .map(|v| (v - pooled_mean).powi(2))
            .sum::<f64>()
            / pooled_n
    } else {
        0.0
    };
    Ok(ForceStats {
        variant: checkpoint.variant(),
        variation: variation_label(variations),
        n_episodes,
        n_samples: n,
        mean,
        variance,
        pooled_mean,
        pooled_variance,
    })
}

pub fn cmd_force_stats(
    checkpoint: &Path,
    expected_variant: Option<BaselineVariant>,
    variations: &[Variation],
    n_episodes: usize,
    seed: u64,
) -> Result<ForceStats> {
    let ck = Checkpoint::load(checkpoint)?;
    check_expected_variant(&ck, expected_variant)?;
    force_stats(&ck, variations, n_episodes, seed)
}

#[derive(Serialize)]
struct TraceHeader<'a> {
    schema: &'a str,
    variant: BaselineVariant,
    variation: String,
    seed: u64,
    episode_seed: u64,
    target: [f64; 2],
}

#[derive(Serialize)]
struct TraceGripper {
    position: [f64; 2],
    velocity: [f64; 2],
    aperture: f64,
    grasp: bool,
}

#[derive(Serialize)]
struct TraceRecord {
    t: u32,
    sim_time: f64,
    rod: [f64; 3],
    grippers: [TraceGripper; 2],
    sensed: [[f64; FORCE_DIM]; 2],
    delta: [[f64; FORCE_DIM]; 2],
    ternary: [[i8; FORCE_DIM]; 2],
    rewards: [[f64; 7]; 2],
    position_error: f64,
    outcome: Outcome,
}

/// Summary of a replayed episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub outcome: Outcome,
    pub steps: u32,
    pub final_position_error: f64,
}

/// Replay one deterministic episode and write it as line-delimited JSON:
/// a header line, then one record per step.
pub fn cmd_replay(
    checkpoint: &Path,
    seed: u64,
    variations: &[Variation],
    out: &Path,
) -> Result<ReplaySummary> {
    let ck = Checkpoint::load(checkpoint)?;
    let config = apply_variation(&ck.env_config, variations)?;
    let mut env = GraspEnv::new(config, ck.variant().actor_force())?;
    let ep_seed = episode_seed(seed, 0);
    env.reset(ep_seed)?;
    let header = TraceHeader {
        schema: TRACE_SCHEMA,
        variant: ck.variant(),
        variation: variation_label(variations),
        seed,
        episode_seed: ep_seed,
        target: [env.target().x, env.target().z],
    };
    let mut buf = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    let mut err = None;
    let rec = run_episode(&ck.policy, &mut env, ep_seed, |env, step| {
        let s = env.state();
        let record = TraceRecord {
            t: env.t(),
            sim_time: s.sim_time,
            rod: [s.rod.position.x, s.rod.position.z, s.rod.tilt],
            grippers: std::array::from_fn(|a| {
                let g = &s.grippers[a];
                TraceGripper {
                    position: [g.position.x, g.position.z],
                    velocity: [g.velocity.x, g.velocity.z],
                    aperture: g.aperture,
                    grasp: g.grasp_flag,
                }
            }),
            sensed: step.forces.sensed.values,
            delta: step.forces.delta.values,
            ternary: step.forces.ternary.values,
            rewards: std::array::from_fn(|a| {
                let r = &step.rewards[a];
                [r.reach, r.grasp, r.grasp_team, r.lift, r.pos, r.ori, r.total]
            }),
            position_error: step.position_error,
            outcome: step.outcome,
        };
        match serde_json::to_writer(&mut buf, &record) {
            Ok(()) => buf.push(b'\n'),
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(Error::Format(e.to_string()));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut f = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    f.write_all(&buf).map_err(|e| Error::io(out, e))?;
    Ok(ReplaySummary {
        outcome: rec.outcome,
        steps: rec.steps,
        final_position_error: rec.final_position_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_validation() {
        let cfg = parse_run_config(
            "label = \"x\"\nseeds = [1, 2]\n[train]\nnum_envs = 4\n",
            &[("train.rollout_length".into(), "32".into()), ("variant".into(), "raw_force".into())],
        )
        .unwrap();
        assert_eq!(cfg.train.num_envs, 4);
        assert_eq!(cfg.train.rollout_length, 32);
        assert_eq!(cfg.variant, BaselineVariant::RawForce);
        assert_eq!(cfg.seeds, vec![1, 2]);

        let dup = parse_run_config("seeds = [1, 1]", &[]).unwrap_err();
        assert!(dup.to_string().contains("distinct"));
        let unknown = parse_run_config("[train]\nbogus_key = 3\n", &[]).unwrap_err();
        assert!(unknown.to_string().contains("bogus_key"), "{unknown}");
        let empty = parse_run_config("seeds = []", &[]).unwrap_err();
        assert!(matches!(empty, Error::Config(_)));
    }

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(parse_run_config(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn schema_major_version_checked() {
        let p = Path::new("x.csv");
        assert!(check_schema("#schema=tgrasp-results/1.3", RESULTS_SCHEMA, p).is_ok());
        assert!(check_schema("#schema=tgrasp-results/2.0", RESULTS_SCHEMA, p).is_err());
        assert!(check_schema("variant,variation", RESULTS_SCHEMA, p).is_err());
    }

    #[test]
    fn sweep_cell_cross_product() {
        let cells = sweep_cells(&[1.0, 0.5, 2.0], &[]).unwrap();
        let labels: Vec<String> = cells.iter().map(|c| variation_label(c)).collect();
        assert_eq!(labels, vec!["nominal", "force_scale=0.5", "force_scale=2"]);
        let both = sweep_cells(&[2.0], &[GeometryProfile::ThinCylinder]).unwrap();
        assert_eq!(variation_label(&both[0]), "force_scale=2;geometry=cylinder");
        assert!(sweep_cells(&[], &[]).is_err());
    }

    #[test]
    fn pivot_layout() {
        let row = |variant, variation: &str, s| ResultRow {
            variant,
            variation: variation.into(),
            success_rate: s,
            position_error_mean: 0.0,
            position_error_sample_variance: 0.0,
            n_episodes: 10,
            seed: 0,
        };
        let table = ResultsTable {
            rows: vec![
                row(BaselineVariant::Ours, "nominal", 0.8),
                row(BaselineVariant::RawForce, "nominal", 0.9),
                row(BaselineVariant::Ours, "force_scale=2", 0.7),
                row(BaselineVariant::RawForce, "force_scale=2", 0.3),
            ],
        };
        let p = table.pivot();
        let lines: Vec<&str> = p.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("ours") && lines[0].contains("raw"));
        assert!(lines[2].starts_with("force_scale=2") && lines[2].contains("30.0%"));
    }
}
