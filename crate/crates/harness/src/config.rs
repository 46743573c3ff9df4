//! TOML run configuration.
//!
//! Unknown keys are rejected everywhere, so a typo fails loudly instead of
//! silently running with a default. Each block except `[model]` and
//! `[utility]` may be omitted; command-line flags override the corresponding
//! fields after parsing, and the report echoes the fully resolved values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use decomp_core::{RegressionSpec, RiskPriceModel, TimeGrid, Utility};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub utility: UtilityConfig,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub hedging: HedgingConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Constant { theta: f64 },
    Ou { alpha: f64, beta: f64, vol: f64, initial: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityConfig {
    Log,
    Power { p: f64 },
    Exponential { a: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_spot")]
    pub spot: f64,
    #[serde(default = "default_wealth")]
    pub initial_wealth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgingConfig {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_stride")]
    pub anchor_stride: usize,
    /// "off", or a positive multiple of the state tail quantile.
    #[serde(default)]
    pub truncation: TruncationSetting,
    #[serde(default = "default_clip")]
    pub coordinate_clip: f64,
    #[serde(default = "default_winsor")]
    pub target_winsor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruncationSetting {
    Level(f64),
    Word(String),
}

impl Default for TruncationSetting {
    fn default() -> Self {
        TruncationSetting::Word("off".into())
    }
}

impl TruncationSetting {
    pub fn multiple(&self) -> Option<f64> {
        match self {
            TruncationSetting::Level(m) => Some(*m),
            TruncationSetting::Word(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_sigma() -> f64 {
    0.2
}
fn default_spot() -> f64 {
    1.0
}
fn default_wealth() -> f64 {
    1.0
}
fn default_t_final() -> f64 {
    1.0
}
fn default_steps() -> usize {
    512
}
fn default_paths() -> usize {
    20_000
}
fn default_seed() -> u64 {
    42
}
fn default_degree() -> usize {
    3
}
fn default_ridge() -> f64 {
    1e-2
}
fn default_stride() -> usize {
    1
}
fn default_clip() -> f64 {
    4.0
}
fn default_winsor() -> f64 {
    8.0
}
fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self { sigma: default_sigma(), spot: default_spot(), initial_wealth: default_wealth() }
    }
}
impl Default for GridConfig {
    fn default() -> Self {
        Self { t_final: default_t_final(), steps: default_steps() }
    }
}
impl Default for McConfig {
    fn default() -> Self {
        Self { paths: default_paths(), seed: default_seed() }
    }
}
impl Default for HedgingConfig {
    fn default() -> Self {
        Self {
            degree: default_degree(),
            ridge: default_ridge(),
            anchor_stride: default_stride(),
            truncation: TruncationSetting::default(),
            coordinate_clip: default_clip(),
            target_winsor: default_winsor(),
        }
    }
}
impl Default for OutputsConfig {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
}

/// Fully validated run inputs; `echo` keeps the resolved config for reports.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: RiskPriceModel,
    pub utility: Utility,
    pub sigma: f64,
    pub spot: f64,
    pub initial_wealth: f64,
    pub grid: TimeGrid,
    pub paths: usize,
    pub seed: u64,
    pub regression: RegressionSpec,
    pub truncation_multiple: Option<f64>,
    pub out_dir: PathBuf,
    pub write_csv: bool,
    pub write_json: bool,
    pub echo: RunConfig,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn bad(field: &str, msg: String) -> HarnessError {
    HarnessError::Config(format!("{field}: {msg}"))
}

fn require(cond: bool, field: &str, msg: &str, got: f64) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(bad(field, format!("{msg} (got {got})")))
    }
}

impl RunConfig {
    pub fn resolve(mut self, ov: &Overrides) -> Result<Scenario> {
        if let Some(seed) = ov.seed {
            self.mc.seed = seed;
        }
        if let Some(steps) = ov.steps {
            self.grid.steps = steps;
        }
        if let Some(paths) = ov.paths {
            self.mc.paths = paths;
        }
        if let Some(out) = &ov.out {
            self.outputs.directory = out.display().to_string();
        }
        self.validate()
    }

    fn validate(self) -> Result<Scenario> {
        let model = match self.model {
            ModelConfig::Constant { theta } => {
                require(theta.is_finite(), "model.theta", "must be finite", theta)?;
                RiskPriceModel::Constant { theta }
            }
            ModelConfig::Ou { alpha, beta, vol, initial } => {
                require(alpha.is_finite(), "model.alpha", "must be finite", alpha)?;
                require(beta.is_finite() && beta > 0.0, "model.beta", "must be positive", beta)?;
                require(vol.is_finite() && vol > 0.0, "model.vol", "must be positive", vol)?;
                require(initial.is_finite(), "model.initial", "must be finite", initial)?;
                RiskPriceModel::OrnsteinUhlenbeck { alpha, beta, vol, initial }
            }
        };
        let utility = match self.utility {
            UtilityConfig::Log => Utility::Log,
            UtilityConfig::Power { p } => {
                require(
                    p.is_finite() && p < 1.0 && p != 0.0,
                    "utility.p",
                    "must satisfy p<1, p≠0",
                    p,
                )?;
                Utility::Power { p }
            }
            UtilityConfig::Exponential { a } => {
                require(a.is_finite() && a > 0.0, "utility.a", "must be positive", a)?;
                Utility::Exponential { a }
            }
        };

        let m = &self.market;
        require(m.sigma.is_finite() && m.sigma > 0.0, "market.sigma", "must be positive", m.sigma)?;
        require(m.spot.is_finite() && m.spot > 0.0, "market.spot", "must be positive", m.spot)?;
        require(
            m.initial_wealth.is_finite() && m.initial_wealth > 0.0,
            "market.initial_wealth",
            "must be positive",
            m.initial_wealth,
        )?;

        let g = &self.grid;
        require(g.t_final.is_finite() && g.t_final > 0.0, "grid.t_final", "must be positive", g.t_final)?;
        if g.steps == 0 {
            return Err(bad("grid.steps", "must be at least 1".into()));
        }
        let grid = TimeGrid::new(g.t_final, g.steps)
            .map_err(|e| bad("grid", e.to_string()))?;

        if self.mc.paths < 2 {
            return Err(bad("mc.paths", format!("must be at least 2 (got {})", self.mc.paths)));
        }

        let hc = &self.hedging;
        if hc.degree > 8 {
            return Err(bad("hedging.degree", format!("must be at most 8 (got {})", hc.degree)));
        }
        if hc.anchor_stride == 0 {
            return Err(bad("hedging.anchor_stride", "must be at least 1".into()));
        }
        require(hc.ridge.is_finite() && hc.ridge >= 0.0, "hedging.ridge", "must be nonnegative", hc.ridge)?;
        require(
            hc.coordinate_clip.is_finite() && hc.coordinate_clip > 0.0,
            "hedging.coordinate_clip",
            "must be positive",
            hc.coordinate_clip,
        )?;
        require(
            hc.target_winsor.is_finite() && hc.target_winsor > 0.0,
            "hedging.target_winsor",
            "must be positive",
            hc.target_winsor,
        )?;
        let truncation_multiple = match &hc.truncation {
            TruncationSetting::Word(w) if w == "off" => None,
            TruncationSetting::Word(w) => {
                return Err(bad(
                    "hedging.truncation",
                    format!("must be \"off\" or a positive number (got \"{w}\")"),
                ));
            }
            TruncationSetting::Level(m) => {
                require(m.is_finite() && *m > 0.0, "hedging.truncation", "must be positive", *m)?;
                Some(*m)
            }
        };
        let regression = RegressionSpec {
            degree: hc.degree,
            ridge: hc.ridge,
            coordinate_clip: hc.coordinate_clip,
            target_winsor: hc.target_winsor,
            anchor_stride: hc.anchor_stride,
        };

        let mut write_csv = false;
        let mut write_json = false;
        for f in &self.outputs.formats {
            match f.as_str() {
                "csv" => write_csv = true,
                "json" => write_json = true,
                other => {
                    return Err(bad(
                        "outputs.formats",
                        format!("unknown format \"{other}\" (expected \"csv\" or \"json\")"),
                    ));
                }
            }
        }

        Ok(Scenario {
            model,
            utility,
            sigma: m.sigma,
            spot: m.spot,
            initial_wealth: m.initial_wealth,
            grid,
            paths: self.mc.paths,
            seed: self.mc.seed,
            regression,
            truncation_multiple,
            out_dir: PathBuf::from(&self.outputs.directory),
            write_csv,
            write_json,
            echo: self,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("[model]\nkind = \"constant\"\ntheta = 0.4\n[utility]\nkind = \"log\"\n")
            .unwrap();
        let sc = cfg.resolve(&Overrides::default()).unwrap();
        assert_eq!(sc.grid.steps(), 512);
        assert_eq!(sc.paths, 20_000);
        assert_eq!(sc.seed, 42);
        assert_eq!(sc.sigma, 0.2);
        assert_eq!(sc.regression.degree, 3);
        assert!(sc.truncation_multiple.is_none());
        assert!(sc.write_csv && sc.write_json);
        assert!(matches!(sc.utility, Utility::Log));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[modle]\nkind = \"constant\"\n").unwrap_err();
        assert!(err.to_string().contains("modle"), "{err}");
        let err =
            parse_config("[model]\nkind = \"constant\"\ntheta = 0.4\nthetta = 1.0\n[utility]\nkind = \"log\"\n")
                .unwrap_err();
        assert!(err.to_string().contains("thetta"), "{err}");
    }

    #[test]
    fn power_exponent_bounds_are_checked() {
        let text = "[model]\nkind = \"constant\"\ntheta = 0.4\n[utility]\nkind = \"power\"\np = 1.0\n";
        let err = parse_config(text).unwrap().resolve(&Overrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("utility.p") && msg.contains("p<1, p≠0"), "{msg}");
    }

    #[test]
    fn truncation_accepts_off_or_a_level() {
        let base = "[model]\nkind = \"constant\"\ntheta = 0.4\n[utility]\nkind = \"log\"\n[hedging]\n";
        let off = parse_config(&format!("{base}truncation = \"off\"\n")).unwrap();
        assert!(off.resolve(&Overrides::default()).unwrap().truncation_multiple.is_none());
        let lvl = parse_config(&format!("{base}truncation = 8.0\n")).unwrap();
        assert_eq!(lvl.resolve(&Overrides::default()).unwrap().truncation_multiple, Some(8.0));
        let on = parse_config(&format!("{base}truncation = \"on\"\n")).unwrap();
        assert!(on.resolve(&Overrides::default()).is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let cfg = parse_config(
            "[model]\nkind = \"constant\"\ntheta = 0.4\n[utility]\nkind = \"log\"\n[mc]\npaths = 500\nseed = 7\n",
        )
        .unwrap();
        let ov = Overrides {
            out: Some(PathBuf::from("elsewhere")),
            seed: Some(99),
            steps: Some(32),
            paths: Some(1000),
        };
        let sc = cfg.resolve(&ov).unwrap();
        assert_eq!(sc.seed, 99);
        assert_eq!(sc.grid.steps(), 32);
        assert_eq!(sc.paths, 1000);
        assert_eq!(sc.out_dir, PathBuf::from("elsewhere"));
        // the echo carries the resolved values, not the file values
        assert_eq!(sc.echo.mc.seed, 99);
        assert_eq!(sc.echo.mc.paths, 1000);
    }
}
