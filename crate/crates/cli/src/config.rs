//! Optional TOML file with the same keys as the command-line flags.
//! A flag given on the command line wins over the file, and the file wins
//! over built-in defaults.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    /// Built-in deterministic toy backbones.
    Toy,
    /// Precomputed semantic and motion feature files.
    Files,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    BeforeZscore,
    AfterZscore,
    Disabled,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub splits: Option<usize>,
    pub ratio: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub dims: Option<String>,
    pub provider: Option<Provider>,
    pub grouped: Option<bool>,
    pub features_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub loss_csv: Option<PathBuf>,
    pub rejection: Option<Rejection>,
    pub media_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub addr: Option<SocketAddr>,
    pub playlist_size: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Hidden widths `h_s,h_d,n_m_out,head1,head2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Widths(pub [usize; 5]);

impl std::str::FromStr for Widths {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("--dims '{s}': expected five comma-separated integers"))?;
        let Ok(w) = <[usize; 5]>::try_from(parts) else {
            bail!("--dims '{s}': expected h_s,h_d,n_m_out,head1,head2");
        };
        if w.contains(&0) {
            bail!("--dims '{s}': widths must be positive");
        }
        Ok(Widths(w))
    }
}

impl Widths {
    pub fn apply(self, dims: &mut mdvqa_core::ModelDims) {
        let [h_s, h_d, n_m_out, head1, head2] = self.0;
        (dims.h_s, dims.h_d, dims.n_m_out, dims.head1, dims.head2) = (h_s, h_d, n_m_out, head1, head2);
    }
}
