//! Experiment configuration: presets, the input file schema, and the
//! fully resolved form that runs echo alongside their data.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use swirhc::optimizer::OptimizerOptions;
use swirhc::rhc::RhcConfig;

/// How the actuators are allowed to act.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// No control at all; the free dynamics are simulated.
    Free,
    /// At most one actuator active per time step.
    Switching,
    /// All actuators may act simultaneously.
    Nonswitching,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Free => "free",
            Mode::Switching => "switching",
            Mode::Nonswitching => "nonswitching",
        };
        f.write_str(s)
    }
}

/// Default actuator placements for the supported family sizes. All lie
/// strictly inside the unit square; explicit coordinates in a config file
/// override them and may use any count.
pub fn default_placement(m: usize) -> Result<Vec<[f64; 2]>> {
    let grid = |xs: &[f64], ys: &[f64]| -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(xs.len() * ys.len());
        for &y in ys {
            for &x in xs {
                pts.push([x, y]);
            }
        }
        pts
    };
    match m {
        3 => Ok(vec![[0.25, 0.25], [0.75, 0.25], [0.5, 0.75]]),
        4 => Ok(grid(&[0.25, 0.75], &[0.25, 0.75])),
        9 => Ok(grid(&[1.0 / 6.0, 0.5, 5.0 / 6.0], &[1.0 / 6.0, 0.5, 5.0 / 6.0])),
        12 => Ok(grid(&[0.125, 0.375, 0.625, 0.875], &[1.0 / 6.0, 0.5, 5.0 / 6.0])),
        _ => Err(anyhow!(
            "no default placement for m = {m} (supported: 3, 4, 9, 12); \
             pass explicit coordinates instead"
        )),
    }
}

/// Fully resolved, validated experiment description. This is what runs are
/// driven by and what gets echoed to `config.toml` in the output directory;
/// re-parsing the echo reproduces it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    pub mode: Mode,
    pub mesh_n: usize,
    pub nu: f64,
    pub beta: f64,
    pub dt: f64,
    pub delta: f64,
    pub horizon: f64,
    pub t_infinity: f64,
    pub actuators: Vec<[f64; 2]>,
    pub optimizer: OptimizerOptions,
}

impl RunConfig {
    /// The numeric defaults shared by every preset.
    fn base(label: &str, mode: Mode, actuators: Vec<[f64; 2]>, t_infinity: f64) -> Self {
        Self {
            label: label.to_string(),
            mode,
            mesh_n: 32,
            nu: 0.1,
            beta: 5e-4,
            dt: 5e-3,
            delta: 0.25,
            horizon: 1.0,
            t_infinity,
            actuators,
            optimizer: OptimizerOptions::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "free" => Ok(Self::base("free", Mode::Free, Vec::new(), 5.0)),
            "switch_m3" => Ok(Self::base("switch_m3", Mode::Switching, default_placement(3)?, 5.0)),
            "switch_m4" => Ok(Self::base("switch_m4", Mode::Switching, default_placement(4)?, 5.0)),
            "switch_m9" => Ok(Self::base("switch_m9", Mode::Switching, default_placement(9)?, 5.0)),
            "switch_m12" => {
                Ok(Self::base("switch_m12", Mode::Switching, default_placement(12)?, 5.0))
            }
            "nonswitch_m4" => {
                Ok(Self::base("nonswitch_m4", Mode::Nonswitching, default_placement(4)?, 10.0))
            }
            other => bail!(
                "unknown preset `{other}` (available: free, switch_m3, switch_m4, \
                 switch_m9, switch_m12, nonswitch_m4)"
            ),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["free", "switch_m3", "switch_m4", "switch_m9", "switch_m12", "nonswitch_m4"]
    }

    /// The core receding-horizon config this run drives.
    pub fn rhc_config(&self) -> RhcConfig {
        RhcConfig {
            mesh_n: self.mesh_n,
            nu: self.nu,
            beta: self.beta,
            dt: self.dt,
            delta: self.delta,
            horizon: self.horizon,
            t_infinity: self.t_infinity,
            actuators: self.actuators.clone(),
            optimizer: self.optimizer.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_empty() {
            bail!("label: must not be empty");
        }
        match self.mode {
            Mode::Free => {
                // actuators are permitted but unused
            }
            Mode::Switching | Mode::Nonswitching => {
                if self.actuators.is_empty() {
                    bail!("actuators: {} runs need at least one actuator", self.mode);
                }
            }
        }
        // core validation covers the grid arithmetic and coordinates; for
        // free runs only t_infinity/dt alignment matters
        let core = self.rhc_config();
        match self.mode {
            Mode::Free => {
                swirhc::time::steps_in(self.t_infinity, self.dt)
                    .map_err(|e| anyhow!("t_infinity: {e}"))?;
                if self.mesh_n < 2 {
                    bail!("mesh_n: must be at least 2, got {}", self.mesh_n);
                }
            }
            _ => core.validate().map_err(|e| anyhow!("{e}"))?,
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing config echo")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Input file schema: either a preset name with optional overrides, or a
/// complete custom description. Missing fields fall back to the preset (or
/// to the standard defaults when no preset is named).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub preset: Option<String>,
    pub label: Option<String>,
    pub mode: Option<Mode>,
    pub mesh_n: Option<usize>,
    pub nu: Option<f64>,
    pub beta: Option<f64>,
    pub dt: Option<f64>,
    pub delta: Option<f64>,
    pub horizon: Option<f64>,
    pub t_infinity: Option<f64>,
    /// Explicit actuator coordinates; takes precedence over `placement`.
    pub actuators: Option<Vec<[f64; 2]>>,
    /// Default placement family size (3, 4, 9, or 12).
    pub placement: Option<usize>,
    #[serde(default)]
    pub optimizer: Option<OptimizerOptions>,
}

impl InputConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing config file")
    }

    /// Resolves against the named preset (or the switching defaults).
    pub fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.preset {
            Some(name) => RunConfig::preset(name)?,
            None => {
                let mode = self.mode.unwrap_or(Mode::Switching);
                RunConfig::base("custom", mode, Vec::new(), 5.0)
            }
        };
        if let Some(v) = self.label {
            cfg.label = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.mesh_n {
            cfg.mesh_n = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.t_infinity {
            cfg.t_infinity = v;
        }
        if let Some(v) = self.optimizer {
            cfg.optimizer = v;
        }
        match (self.actuators, self.placement) {
            (Some(pts), _) => cfg.actuators = pts,
            (None, Some(m)) => cfg.actuators = default_placement(m)?,
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
