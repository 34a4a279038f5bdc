//! Run configuration: one TOML section per module, unit suffixes on every
//! physical key.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use relay_core::engine::{EngineConfig, Window};
use relay_core::mc::McConfig;
use relay_core::optics::{LaserModel, PolarizationState, SourceModel, SourceParams};
use relay_core::sweep::SweepSpec;
use serde::{Deserialize, Serialize};

/// File name of the resolved-config echo written next to every output.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; all cores when unset.
    pub threads: Option<usize>,
    /// Input state simulated by `mc` and matched by `compare`.
    pub mc_input: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("relay-out"),
            threads: None,
            mc_input: "D".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunOptions,
    pub source: SourceParams,
    pub laser: LaserModel,
    pub engine: EngineConfig,
    pub window: Window,
    pub mc: McConfig,
    pub sweep: SweepSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub grid_ps: Option<f64>,
    pub window_ps: Option<(f64, f64)>,
}

impl RunConfig {
    /// Parses TOML; errors name the full key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow!("config `{path}`: {}", e.into_inner().message().trim())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.run.out_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.mc.seed = s;
        }
        if let Some(t) = o.threads {
            self.run.threads = Some(t);
        }
        if let Some(g) = o.grid_ps {
            self.engine.tau_step_ps = g;
        }
        if let Some((a, b)) = o.window_ps {
            self.window.first_ps = a;
            self.window.second_ps = b;
        }
    }

    /// Checks every section; the source model is built as part of it.
    pub fn validate(&self) -> Result<SourceModel> {
        if self.run.threads == Some(0) {
            return Err(anyhow!("config `run.threads`: must be at least 1"));
        }
        self.mc_input()?;
        let source = SourceModel::build(&self.source).map_err(keyed("source"))?;
        self.laser.validate().map_err(keyed("laser"))?;
        self.engine.validate(&source).map_err(keyed("engine"))?;
        self.window.validate_for(self.engine.tau_step_ps).map_err(keyed("window"))?;
        self.mc.validate().map_err(keyed("mc"))?;
        self.sweep.validate().map_err(keyed("sweep"))?;
        Ok(source)
    }

    pub fn mc_input(&self) -> Result<PolarizationState> {
        self.run
            .mc_input
            .parse()
            .map_err(|_| anyhow!("config `run.mc_input`: `{}` is not a polarization state", self.run.mc_input))
    }
}

/// Prefixes bare parameter names with their section.
fn keyed(section: &'static str) -> impl Fn(relay_core::RelayError) -> anyhow::Error {
    move |e| match e {
        relay_core::RelayError::InvalidParameter { name, reason } => {
            let key = if name.contains('.') { name.to_string() } else { format!("{section}.{name}") };
            anyhow!("config `{key}`: {reason}")
        }
        other => anyhow!("config section `{section}`: {other}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert!(text.contains("[laser]") && text.contains("fwhm_ps = 950.0"));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_files_keep_defaults() {
        let c = RunConfig::from_toml("[laser]\ndelay_ps = -200.0\n").unwrap();
        assert_eq!(c.laser.delay_ps, -200.0);
        assert_eq!(c.laser.fwhm_ps, LaserModel::default().fwhm_ps);
    }

    #[test]
    fn unknown_and_mistyped_keys_name_their_path() {
        let e = RunConfig::from_toml("[laser]\nfwhm = 3.0\n").unwrap_err().to_string();
        assert!(e.contains("laser.fwhm"), "{e}");
        let e = RunConfig::from_toml("[sweep.width_ps]\nmin = \"wide\"\n").unwrap_err().to_string();
        assert!(e.contains("sweep.width_ps.min"), "{e}");
    }

    #[test]
    fn invalid_values_name_their_path() {
        let mut c = RunConfig::default();
        c.laser.fwhm_ps = -1.0;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("laser.fwhm_ps"), "{e}");
        let mut c = RunConfig::default();
        c.mc.n_cycles = 0;
        assert!(c.validate().unwrap_err().to_string().contains("mc.n_cycles"));
        let mut c = RunConfig::default();
        c.run.mc_input = "Q".into();
        assert!(c.validate().unwrap_err().to_string().contains("run.mc_input"));
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            seed: Some(7),
            grid_ps: Some(8.0),
            window_ps: Some((16.0, 64.0)),
            ..Overrides::default()
        });
        assert_eq!((c.mc.seed, c.engine.tau_step_ps), (7, 8.0));
        assert_eq!((c.window.first_ps, c.window.second_ps), (16.0, 64.0));
    }
}
