//! Config-file merging, dataset resolution, and config hashing shared by
//! every subcommand. A config file holds `key = value` lines whose keys are
//! the long flag names; command-line flags win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mga_core::graph::{
    generate_planted_partition, load_edge_list, load_features, load_labels, FeatureMatrix,
    Graph, LabelAssignment,
};
use mga_core::{seeds, Error, Result};

/// Parsed `key = value` config file.
#[derive(Debug, Default)]
pub struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    pub fn load(path: Option<&str>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        require_file(path)?;
        let text = std::fs::read_to_string(path)?;
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: idx + 1,
                    message: "expected 'key = value'".into(),
                });
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("config key '{key}' has invalid value '{raw}'"))
            }),
        }
    }
}

/// Command-line value if present, else the config-file value.
pub fn resolve<T: FromStr>(cli: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>> {
    match cli {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

pub fn require_file(path: &str) -> Result<()> {
    if Path::new(path).is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("file not found: {path}")))
    }
}

/// Where the graph comes from: dataset files or the synthetic generator,
/// never both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub edges: Option<String>,
    pub labels: Option<String>,
    pub features: Option<String>,
    pub nodes: Option<usize>,
    pub gen_n: Option<usize>,
    pub gen_k: Option<usize>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
}

impl DatasetSpec {
    pub fn validate(&self, labels_required: bool) -> Result<()> {
        let file_mode = self.edges.is_some();
        let gen_mode = self.gen_n.is_some()
            || self.gen_k.is_some()
            || self.p_in.is_some()
            || self.p_out.is_some();
        if file_mode && gen_mode {
            return Err(Error::Config(
                "pass either dataset files or generator parameters, not both".into(),
            ));
        }
        if !file_mode && !gen_mode {
            return Err(Error::Config(
                "a dataset is required: --edges/--labels or --gen-n/--gen-k/--p-in/--p-out".into(),
            ));
        }
        if file_mode && labels_required && self.labels.is_none() {
            return Err(Error::Config("--labels is required for this command".into()));
        }
        if gen_mode
            && (self.gen_n.is_none()
                || self.gen_k.is_none()
                || self.p_in.is_none()
                || self.p_out.is_none())
        {
            return Err(Error::Config(
                "the generator needs all of --gen-n, --gen-k, --p-in, --p-out".into(),
            ));
        }
        Ok(())
    }

    /// Load or generate the dataset. Generated graphs are seeded from the
    /// global seed; featureless datasets fall back to one-hot identities.
    pub fn load(
        &self,
        global_seed: u64,
        labels_required: bool,
    ) -> Result<(Graph, Option<LabelAssignment>, FeatureMatrix)> {
        self.validate(labels_required)?;
        if let Some(edges) = &self.edges {
            require_file(edges)?;
            let g = load_edge_list(edges, self.nodes)?;
            let labels = match &self.labels {
                Some(path) => {
                    require_file(path)?;
                    Some(load_labels(path)?)
                }
                None => None,
            };
            let x = match &self.features {
                Some(path) => {
                    require_file(path)?;
                    load_features(path, g.node_count())?
                }
                None => FeatureMatrix::identity(g.node_count()),
            };
            Ok((g, labels, x))
        } else {
            let (g, labels) = generate_planted_partition(
                self.gen_n.expect("validated"),
                self.gen_k.expect("validated"),
                self.p_in.expect("validated"),
                self.p_out.expect("validated"),
                seeds::derive(global_seed, seeds::GENERATOR),
            )?;
            let x = FeatureMatrix::identity(g.node_count());
            Ok((g, Some(labels), x))
        }
    }
}

/// Hex SHA-256 of the canonical JSON encoding of a resolved run config.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("run configs serialize");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Prefix text output with the config hash so every file names the run
/// that produced it.
pub fn with_hash_header(hash: &str, body: &str) -> String {
    format!("# config_hash={hash}\n{body}")
}
