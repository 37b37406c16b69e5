//! Shared plumbing: deterministic manifests, file helpers, opponent specs,
//! and a small worker pool for independent runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pickpass::agents::{Agent, PriorityAgent, PriorityList, RandomAgent};
use pickpass::cards::{Catalog, GameConfigFile, Menu};
use pickpass::dqn::{Checkpoint, DqnAgent};
use pickpass::{Error, Result};
use serde::{Deserialize, Serialize};

/// FNV-1a over file bytes; good enough to pin outputs in a manifest.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_catalog(cards: &Option<PathBuf>) -> Result<Catalog> {
    match cards {
        Some(path) => Catalog::from_json(&read_text(path)?),
        None => Ok(Catalog::builtin()),
    }
}

/// Menu file: `{"name": "...", "kinds": ["..."]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MenuFile {
    pub name: String,
    pub kinds: Vec<String>,
    #[serde(default = "default_true")]
    pub strict: bool,
}

fn default_true() -> bool {
    true
}

pub fn load_menu(path: &Path, catalog: &Catalog) -> Result<(Menu, String)> {
    let file: MenuFile = load_json(path)?;
    Ok((
        Menu::from_names(catalog, &file.kinds, file.strict)?,
        file.name,
    ))
}

pub fn load_game_config(path: &Path, catalog: &Catalog) -> Result<pickpass::cards::GameConfig> {
    let file: GameConfigFile = load_json(path)?;
    file.resolve(catalog)
}

/// Priority list file: an ordered JSON array of card names, best first
/// (names outside the menu are skipped).
pub fn load_priority(path: &Path, menu: &Menu) -> Result<PriorityList> {
    let names: Vec<String> = load_json(path)?;
    PriorityList::project(&names, menu)
}

/// Opponent spec: `random`, `priority:<list.json>`, or `dqn:<ckpt.json>`.
pub enum OpponentSpec {
    Random,
    Priority(PathBuf),
    Dqn(PathBuf),
}

impl OpponentSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "random" {
            return Ok(OpponentSpec::Random);
        }
        if let Some(path) = s.strip_prefix("priority:") {
            return Ok(OpponentSpec::Priority(PathBuf::from(path)));
        }
        if let Some(path) = s.strip_prefix("dqn:") {
            return Ok(OpponentSpec::Dqn(PathBuf::from(path)));
        }
        Err(Error::Config(format!(
            "unknown agent spec {s:?}; expected random, priority:<list.json>, or dqn:<ckpt.json>"
        )))
    }

    pub fn build(&self, menu: &Menu) -> Result<Box<dyn Agent>> {
        match self {
            OpponentSpec::Random => Ok(Box::new(RandomAgent)),
            OpponentSpec::Priority(path) => {
                Ok(Box::new(PriorityAgent::new(load_priority(path, menu)?)))
            }
            OpponentSpec::Dqn(path) => {
                let ckpt = Checkpoint::load(path)?;
                Ok(Box::new(DqnAgent::from_checkpoint(&ckpt)?))
            }
        }
    }
}

/// Accumulates output files and writes a reproduction manifest. No wall
/// clock anywhere: reruns with the same inputs are byte-identical.
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, u64>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        self.files.insert(rel.to_string(), fnv64(contents.as_bytes()));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, &text)
    }

    /// Writes `manifest.json` recording the command, its resolved inputs,
    /// seeds, and every output file hash.
    pub fn finish(mut self, command: &str, inputs: serde_json::Value, seeds: &[u64]) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            package_version: &'a str,
            inputs: serde_json::Value,
            seeds: &'a [u64],
            outputs: BTreeMap<String, String>,
        }
        let outputs = self
            .files
            .iter()
            .map(|(k, v)| (k.clone(), format!("{v:016x}")))
            .collect();
        let manifest = Manifest {
            command,
            package_version: env!("CARGO_PKG_VERSION"),
            inputs,
            seeds,
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, &text)?;
        self.files.clear();
        Ok(())
    }
}

/// Parses comma-separated seeds (`1,2,3`).
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: std::result::Result<Vec<u64>, _> =
        s.split(',').map(|p| p.trim().parse::<u64>()).collect();
    let seeds = seeds.map_err(|e| Error::Config(format!("bad seed list {s:?}: {e}")))?;
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

/// One float per line (a trailing CSV header or extra columns are tolerated:
/// the first comma-separated field of each line is parsed, non-numeric lines
/// are skipped only if they are the first line).
pub fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(e) => {
                if i == 0 {
                    continue; // header
                }
                return Err(Error::Input(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )));
            }
        }
    }
    Ok(out)
}

/// Runs `f(0..n)` on a small worker pool; results come back in index order.
pub fn run_parallel<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = workers.max(1).min(n.max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<T>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                results.lock().expect("no poisoned lock")[i] = Some(r);
            });
        }
    });
    let collected = results.into_inner().expect("threads joined");
    let mut out = Vec::with_capacity(n);
    for (i, slot) in collected.into_iter().enumerate() {
        out.push(slot.unwrap_or_else(|| panic!("worker skipped index {i}"))?);
    }
    Ok(out)
}
