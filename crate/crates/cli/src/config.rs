use std::path::{Path, PathBuf};
use std::time::Duration;

use egen::corpus::ClusterConfig;
use egen::egraph::SaturationLimits;
use egen::grammar::EnumerationLimits;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Everything that shapes an output. Resolved from defaults, then the
/// `--config` file, then command-line flags; echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Builtin library name, rule file path, or `<name>.rules` under `EGEN_RULES_DIR`.
    pub rules: String,
    /// `desk` for the shipped templates, `none`, or a template file path.
    pub templates: String,
    /// Instantiations kept per template.
    pub template_cap: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads for the per-seed map; 0 picks the core count.
    pub jobs: usize,
    pub max_iterations: usize,
    pub max_nodes: usize,
    pub saturation_time_ms: u64,
    pub match_limit: usize,
    pub ban_length: usize,
    pub numeric_guard: bool,
    pub token_limit: usize,
    pub max_rewrites: usize,
    pub enumeration_time_ms: u64,
    pub audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sat = SaturationLimits::default();
        let en = EnumerationLimits::default();
        RunConfig {
            rules: "full".into(),
            templates: "desk".into(),
            template_cap: usize::MAX,
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
            max_iterations: sat.max_iterations,
            max_nodes: sat.max_nodes,
            saturation_time_ms: sat.time_budget.as_millis() as u64,
            match_limit: sat.match_limit,
            ban_length: sat.ban_length,
            numeric_guard: sat.numeric_guard,
            token_limit: en.token_limit,
            max_rewrites: en.max_rewrites,
            enumeration_time_ms: en.time_budget.as_millis() as u64,
            audit: true,
        }
    }
}

/// Flags that override config values when given.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Flat `key = value` TOML file with RunConfig keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rules: Option<String>,
    #[arg(long, global = true)]
    pub templates: Option<String>,
    #[arg(long, global = true)]
    pub template_cap: Option<usize>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub max_nodes: Option<usize>,
    #[arg(long, global = true)]
    pub token_limit: Option<usize>,
    #[arg(long, global = true)]
    pub max_rewrites: Option<usize>,
    /// Skip the numeric audit of emitted rewrites.
    #[arg(long, global = true)]
    pub no_audit: bool,
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<RunConfig, CliError> {
        let mut cfg = match &o.config {
            Some(path) => Self::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &o.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        take!(
            seed,
            jobs,
            out,
            rules,
            templates,
            template_cap,
            max_iterations,
            max_nodes,
            token_limit,
            max_rewrites
        );
        if o.no_audit {
            cfg.audit = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("max_iterations", self.max_iterations),
            ("max_nodes", self.max_nodes),
            ("match_limit", self.match_limit),
            ("ban_length", self.ban_length),
            ("token_limit", self.token_limit),
            ("max_rewrites", self.max_rewrites),
            ("template_cap", self.template_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(CliError::Validation(format!("{name} must be positive")));
            }
        }
        if self.rules.trim().is_empty() {
            return Err(CliError::Validation("rules must name a library".into()));
        }
        Ok(())
    }

    pub fn saturation(&self) -> SaturationLimits {
        SaturationLimits {
            max_iterations: self.max_iterations,
            max_nodes: self.max_nodes,
            time_budget: Duration::from_millis(self.saturation_time_ms),
            match_limit: self.match_limit,
            ban_length: self.ban_length,
            numeric_guard: self.numeric_guard,
        }
    }

    pub fn enumeration(&self) -> EnumerationLimits {
        EnumerationLimits {
            token_limit: self.token_limit,
            time_budget: Duration::from_millis(self.enumeration_time_ms),
            max_rewrites: self.max_rewrites,
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            library: self.rules.clone(),
            saturation: self.saturation(),
            enumeration: self.enumeration(),
            audit: self.audit,
            ..ClusterConfig::default()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("egen.toml");
        std::fs::write(&p, "max_nodes = 10000\nmax_rewrites = 100\nseed = 3\n").unwrap();
        let o = Overrides {
            config: Some(p),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!((cfg.max_nodes, cfg.max_rewrites, cfg.seed), (10_000, 100, 9));
        assert_eq!(cfg.rules, "full");
    }

    #[test]
    fn unknown_key_and_zero_limit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "max_nodez = 1\n").unwrap();
        let o = Overrides {
            config: Some(p),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&o), Err(CliError::Validation(_))));
        let o = Overrides {
            max_nodes: Some(0),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&o), Err(CliError::Validation(_))));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_eq!(a.digest(), RunConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
