//! Run configuration, atomic file output and run manifests.
//!
//! Settings are resolved in layers: command-line flags override the JSON
//! config file, which overrides the `QAOA_WS_SEED` environment fallback (seed
//! only), which overrides the documented defaults. The resolved [`RunConfig`]
//! carries every value explicitly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::initializers::{default_dt_grid, InitMethod};
use crate::neuralnet::TrainConfig;
use crate::optimizer::OptimizerConfig;
use crate::pipeline::{sha256_hex, EnsembleSpec};

pub const SEED_ENV: &str = "QAOA_WS_SEED";
pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Writes `bytes` to `path` via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |f| f.write_all(bytes))
}

pub(crate) fn write_atomic_with(path: &Path, fill: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    fill(tmp.as_file_mut()).map_err(|e| Error::io(path, e))?;
    tmp.as_file_mut().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Pretty-printed JSON, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads a JSON artifact; syntax and schema errors carry line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenData,
    Split,
    TrainNn,
    CalibrateTqa,
    FitBatches,
    FitAverage,
    BenchConverge,
    BenchSize,
    DumpPersonalization,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Split => "split",
            Command::TrainNn => "train-nn",
            Command::CalibrateTqa => "calibrate-tqa",
            Command::FitBatches => "fit-batches",
            Command::FitAverage => "fit-average",
            Command::BenchConverge => "bench-converge",
            Command::BenchSize => "bench-size",
            Command::DumpPersonalization => "dump-personalization",
        }
    }

    fn default_count(self) -> usize {
        match self {
            Command::GenData => 1000,
            Command::CalibrateTqa => 50,
            Command::FitBatches => 200,
            Command::FitAverage => 100,
            Command::BenchConverge | Command::BenchSize => 50,
            Command::DumpPersonalization => 3,
            Command::Split | Command::TrainNn => 0,
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::GenData => &["n"],
            Command::Split | Command::TrainNn | Command::CalibrateTqa | Command::FitBatches | Command::FitAverage => {
                &["dataset"]
            }
            Command::BenchConverge | Command::DumpPersonalization => &["dataset"],
            Command::BenchSize => &["setup_dir"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Constant,
    Random,
}

/// Fully resolved settings for one invocation. `count` is the number of
/// graphs or records the subcommand works on (dataset size, calibration
/// graphs, batch size, test graphs, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub p: usize,
    pub ensemble: EnsembleKind,
    pub edge_prob: f64,
    pub prob_range: [f64; 2],
    pub count: usize,
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub batches: Option<PathBuf>,
    pub average: Option<PathBuf>,
    pub setup_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub methods: Vec<InitMethod>,
    pub sizes: Vec<usize>,
    pub train_fraction: f64,
    pub tqa_grid: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub training: TrainConfig,
}

impl RunConfig {
    pub fn defaults_for(command: Command) -> Self {
        RunConfig {
            n: None,
            p: 2,
            ensemble: EnsembleKind::Random,
            edge_prob: 0.5,
            prob_range: [0.3, 0.9],
            count: command.default_count(),
            seed: 0,
            dataset: None,
            model: None,
            calibration: None,
            batches: None,
            average: None,
            setup_dir: None,
            out: PathBuf::from("out"),
            methods: vec![
                InitMethod::Linear,
                InitMethod::Tqa,
                InitMethod::Batches,
                InitMethod::Average,
                InitMethod::NeuralNet,
            ],
            sizes: vec![6, 8, 10],
            train_fraction: 0.8,
            tqa_grid: default_dt_grid(),
            optimizer: OptimizerConfig::default(),
            training: TrainConfig::default(),
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        match self.ensemble {
            EnsembleKind::Constant => EnsembleSpec::Constant {
                edge_prob: self.edge_prob,
            },
            EnsembleKind::Random => EnsembleSpec::Random {
                prob_lo: self.prob_range[0],
                prob_hi: self.prob_range[1],
            },
        }
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.training.clone()
        }
    }
}

fn parse_layer(text: &str, origin: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Error::Usage(format!("{origin}: config must be a JSON object"))),
        Err(e) => Err(Error::Usage(format!(
            "{origin}: malformed config at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))),
    }
}

/// Merges defaults, environment seed, config file and CLI flags (in rising
/// precedence) and checks the result against the subcommand's requirements.
pub fn resolve_config(
    command: Command,
    cli: &Map<String, Value>,
    config_file: Option<&Path>,
    env_seed: Option<&str>,
) -> Result<RunConfig> {
    let defaults = serde_json::to_value(RunConfig::defaults_for(command))?;
    let Value::Object(mut merged) = defaults else {
        unreachable!("config serializes to an object")
    };
    let known: Vec<String> = merged.keys().cloned().collect();
    let check_keys = |layer: &Map<String, Value>, origin: &str| -> Result<()> {
        match layer.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(Error::Usage(format!("{origin}: unknown setting `{k}`"))),
            None => Ok(()),
        }
    };

    if let Some(raw) = env_seed {
        let seed: u64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{SEED_ENV}={raw} is not an unsigned integer")))?;
        merged.insert("seed".into(), seed.into());
    }

    let mut explicit = Map::new();
    if let Some(path) = config_file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let layer = parse_layer(&text, &path.display().to_string())?;
        check_keys(&layer, &path.display().to_string())?;
        explicit.extend(layer);
    }
    check_keys(cli, "command line")?;
    explicit.extend(cli.clone());

    let ensemble = explicit.get("ensemble").and_then(Value::as_str);
    if ensemble == Some("constant") && explicit.contains_key("prob_range") {
        return Err(Error::Usage("--prob-range conflicts with --ensemble constant".into()));
    }
    if ensemble == Some("random") && explicit.contains_key("edge_prob") {
        return Err(Error::Usage("--edge-prob conflicts with --ensemble random".into()));
    }
    merged.extend(explicit);

    let cfg: RunConfig = serde_json::from_value(Value::Object(merged.clone()))
        .map_err(|e| Error::Usage(format!("invalid setting: {e}")))?;
    for key in command.required() {
        if merged.get(*key).is_none_or(Value::is_null) {
            return Err(Error::Usage(format!(
                "`{}` requires --{}",
                command.name(),
                key.replace('_', "-")
            )));
        }
    }
    if cfg.prob_range[0] > cfg.prob_range[1] {
        return Err(Error::Usage(format!(
            "--prob-range {} {} is not an interval",
            cfg.prob_range[0], cfg.prob_range[1]
        )));
    }
    if cfg.p == 0 {
        return Err(Error::Usage("--p must be at least 1".into()));
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub config: RunConfig,
    pub master_seed: u64,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
}

impl RunManifest {
    pub fn start(command: Command, command_line: Vec<String>, config: RunConfig) -> Self {
        RunManifest {
            command: command.name().into(),
            command_line,
            master_seed: config.seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: String::new(),
            status: "running".into(),
        }
    }

    /// Records an input file together with its content hash.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = hash_file(path)?;
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(&mut self, result: &Result<()>) {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        self.status = match result {
            Ok(()) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        };
    }
}

/// Writes `run_manifest.json` into `dir` atomically and returns its path.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn flags(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn flag_beats_file_beats_env() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.json");
        fs::write(&file, r#"{"n": 8, "p": 3, "seed": 5}"#).unwrap();
        let cfg = resolve_config(Command::GenData, &flags(json!({"p": 4})), Some(&file), Some("9")).unwrap();
        assert_eq!((cfg.n, cfg.p, cfg.seed), (Some(8), 4, 5));
        let cfg = resolve_config(Command::GenData, &flags(json!({"n": 6})), None, Some("9")).unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn required_and_unknown_flags() {
        match resolve_config(Command::GenData, &Map::new(), None, None) {
            Err(Error::Usage(msg)) => assert!(msg.contains("--n"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
        assert!(matches!(
            resolve_config(Command::GenData, &flags(json!({"n": 6, "bogus": 1})), None, None),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            resolve_config(Command::GenData, &flags(json!({"n": "six"})), None, None),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn conflicting_ensemble_settings() {
        let f = flags(json!({"n": 6, "ensemble": "constant", "prob_range": [0.2, 0.4]}));
        assert!(matches!(
            resolve_config(Command::GenData, &f, None, None),
            Err(Error::Usage(_))
        ));
        let f = flags(json!({"n": 6, "ensemble": "random", "edge_prob": 0.4}));
        assert!(matches!(
            resolve_config(Command::GenData, &f, None, None),
            Err(Error::Usage(_))
        ));
        let f = flags(json!({"n": 6, "ensemble": "constant", "edge_prob": 0.4}));
        let cfg = resolve_config(Command::GenData, &f, None, None).unwrap();
        assert_eq!(cfg.ensemble_spec(), EnsembleSpec::Constant { edge_prob: 0.4 });
    }

    #[test]
    fn defaults_are_explicit() {
        let cfg = resolve_config(Command::GenData, &flags(json!({"n": 10})), None, None).unwrap();
        let mut expected = RunConfig::defaults_for(Command::GenData);
        expected.n = Some(10);
        assert_eq!(cfg, expected);
        assert_eq!(cfg.count, 1000);
        assert_eq!(cfg.p, 2);
        assert_eq!(
            cfg.ensemble_spec(),
            EnsembleSpec::Random {
                prob_lo: 0.3,
                prob_hi: 0.9
            }
        );
        let bench = RunConfig::defaults_for(Command::FitBatches);
        assert_eq!(bench.count, 200);
    }

    #[test]
    fn malformed_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.json");
        fs::write(&file, "{\"n\": 6,\n \"p\": }").unwrap();
        match resolve_config(Command::GenData, &Map::new(), Some(&file), None) {
            Err(Error::Usage(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
        fs::write(&file, "[1, 2]").unwrap();
        assert!(resolve_config(Command::GenData, &Map::new(), Some(&file), None).is_err());
        assert!(resolve_config(Command::GenData, &flags(json!({"n": 6})), None, Some("abc")).is_err());
    }

    #[test]
    fn manifest_tracks_inputs_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data.jsonl");
        fs::write(&input, "a\n").unwrap();
        let cfg = RunConfig::defaults_for(Command::TrainNn);
        let mut m = RunManifest::start(Command::TrainNn, vec!["qaoa-ws".into()], cfg);
        m.add_input(&input).unwrap();
        m.finish(&Ok(()));
        let path = write_manifest(dir.path(), &m).unwrap();
        let back: RunManifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.inputs.len(), 1);
        assert_eq!(back.status, "ok");
        let before = back.inputs[0].sha256.clone();
        fs::write(&input, "b\n").unwrap();
        assert_ne!(hash_file(&input).unwrap(), before);
    }

    #[test]
    fn interrupted_write_leaves_previous_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        write_atomic(&path, b"{\"complete\": true}").unwrap();
        let err = write_atomic_with(&path, |f| {
            f.write_all(b"{\"compl")?;
            Err(std::io::Error::other("interrupted"))
        });
        assert!(err.is_err());
        assert_eq!(fs::read_to_string(&path).unwrap(), "{\"complete\": true}");
        let leftovers = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
