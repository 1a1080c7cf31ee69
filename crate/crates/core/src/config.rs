//! JSON configuration shared by the command-line tools.
//!
//! Every section is optional and every field has a default, so `{}` is a
//! valid file. Unknown keys are rejected. Command-line flags are applied
//! on top of the loaded values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::denoise::MergeConfig;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::fusion::{FusionConfig, RestoreConfig};
use crate::synth::SynthConfig;
use crate::trajectory::DeconvOptions;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Capture synthesis, including the ISP used for rendering and for the
    /// linear-light conversion during restoration.
    pub synth: SynthConfig,
    pub flow: FlowConfig,
    /// Deconvolution settings. When absent, `deblur` runs the full
    /// iteration budget and `restore` its shorter early-stopped one.
    pub deconv: Option<DeconvOptions>,
    pub merge: MergeConfig,
    pub fusion: FusionConfig,
    /// Trajectory kernel side; `None` keeps the restoration default.
    pub kernel: Option<usize>,
}

impl CliConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn restore_config(&self) -> RestoreConfig {
        let base = RestoreConfig::default();
        RestoreConfig {
            flow: self.flow.clone(),
            kernel: self.kernel.unwrap_or(base.kernel),
            deconv: self.deconv.clone().unwrap_or(base.deconv),
            merge: self.merge.clone(),
            fusion: self.fusion.clone(),
            isp: self.synth.isp.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        if let Some(d) = &self.deconv {
            d.validate()?;
        }
        self.restore_config().validate()
    }
}
