//! Pipeline configuration, read from TOML. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xpcs_core::fit::{DiffusivityMode, FitOptions, Window};
use xpcs_core::grid::{GridParams, KernelWidth};
use xpcs_core::scatter::{DetectorGeometry, Scattering};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Direct,
    #[default]
    Fft,
    /// Both routes for speckle fields, plus a comparison table; analysis
    /// commands use the FFT route.
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormFactorChoice {
    /// f = 1 for every atom.
    #[default]
    Unit,
    /// Bundled four-Gaussian tables, keyed by species label.
    Tabulated,
}

impl FormFactorChoice {
    pub fn scattering(self) -> Scattering {
        match self {
            FormFactorChoice::Unit => Scattering::Unit,
            FormFactorChoice::Tabulated => Scattering::tabulated(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Xyz {
        path: PathBuf,
    },
    Lammps {
        path: PathBuf,
        /// ps per TIMESTEP unit.
        #[serde(default = "default_timestep")]
        timestep_ps: f64,
        #[serde(default)]
        type_names: BTreeMap<String, String>,
    },
    /// Binary trajectory cache written by `generate`.
    Cache {
        path: PathBuf,
    },
    /// Directory of intensity grid files written by `speckle`.
    Fields {
        path: PathBuf,
    },
    Brownian {
        n_atoms: usize,
        box_length: f64,
        /// Å²/ps.
        diffusivity: f64,
        /// ps.
        dt: f64,
        n_frames: usize,
        /// K; recorded only.
        #[serde(default)]
        temperature: Option<f64>,
    },
    IdealGas {
        n_atoms: usize,
        box_length: f64,
        n_frames: usize,
    },
}

fn default_timestep() -> f64 {
    0.001
}

impl InputSpec {
    pub fn is_generator(&self) -> bool {
        matches!(self, InputSpec::Brownian { .. } | InputSpec::IdealGas { .. })
    }
}

/// Optional narrowing of a trajectory before analysis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    /// Random tracer subset of this size.
    pub tracers: Option<usize>,
    /// Frames `[start, end)`.
    pub frames: Option<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_grid: usize,
    /// Gaussian width in Å; defaults to the grid spacing.
    pub eta: Option<f64>,
    /// Odd kernel extent in grid points; defaults to the auto rule.
    pub kernel_width: Option<usize>,
}

impl GridSpec {
    pub fn params(&self, box_length: f64) -> CliResult<GridParams> {
        let eta = self.eta.unwrap_or(box_length / self.n_grid as f64);
        let width = self.kernel_width.map_or(KernelWidth::Auto, KernelWidth::Fixed);
        GridParams::new(self.n_grid, box_length, eta, width).map_err(|e| CliError::config(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    /// Å⁻¹.
    pub q: f64,
    /// Full shell width, Å⁻¹.
    pub dq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeckleSpec {
    /// Write one grid file per frame.
    pub write_fields: bool,
    /// Also write M-fold superpositions of frames `gap` apart.
    pub superpose: Option<usize>,
}

impl Default for SpeckleSpec {
    fn default() -> Self {
        SpeckleSpec {
            write_fields: true,
            superpose: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// Å.
    pub wavelength: f64,
    #[serde(default = "default_beam")]
    pub beam: [f64; 3],
    /// Degrees.
    pub half_angle_deg: f64,
    pub pixels: usize,
    #[serde(default = "yes")]
    pub per_frame: bool,
    /// Average the images of the first this-many frames.
    #[serde(default)]
    pub average: Option<usize>,
}

fn default_beam() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn yes() -> bool {
    true
}

impl DetectorSpec {
    pub fn geometry(&self) -> DetectorGeometry {
        DetectorGeometry {
            wavelength: self.wavelength,
            beam: self.beam,
            half_angle: self.half_angle_deg.to_radians(),
            pixels: self.pixels,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    #[default]
    Exponential,
    Stretched,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusivityChoice {
    /// Dq² + D₂q⁴ over every ring.
    #[default]
    Quartic,
    /// Dq² over every ring.
    Linear,
    /// Dq² over rings with q ≤ `q_cut`.
    LowQ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSpec {
    pub model: DecayModel,
    /// Normalized-value window of (g2 − 1)/β0.
    pub window: [f64; 2],
    pub free_amplitude: bool,
    pub log_domain: bool,
    pub diffusivity: DiffusivityChoice,
    pub q_cut: Option<f64>,
    /// Lags for an MSD cross-check when unwrapped positions exist.
    pub msd_max_lag: Option<usize>,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec {
            model: DecayModel::Exponential,
            window: [0.05, 0.8],
            free_amplitude: false,
            log_domain: false,
            diffusivity: DiffusivityChoice::Quartic,
            q_cut: None,
            msd_max_lag: None,
        }
    }
}

impl FitSpec {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            window: Window::Values {
                lo: self.window[0],
                hi: self.window[1],
            },
            free_amplitude: self.free_amplitude,
            log_domain: self.log_domain,
        }
    }

    pub fn mode(&self) -> DiffusivityMode {
        match self.diffusivity {
            DiffusivityChoice::Quartic => DiffusivityMode::FullRange { quartic: true },
            DiffusivityChoice::Linear => DiffusivityMode::FullRange { quartic: false },
            DiffusivityChoice::LowQ => DiffusivityMode::LowQ {
                q_cut: self.q_cut.unwrap_or(f64::INFINITY),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastSpec {
    pub histogram_bins: usize,
}

impl Default for ContrastSpec {
    fn default() -> Self {
        ContrastSpec { histogram_bins: 60 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub n_atoms: usize,
    pub box_length: f64,
    pub n_grid: usize,
    pub side: usize,
    pub repeats: usize,
    pub include_cube: bool,
    /// Also time the single-point route at twice the atom count.
    pub scaling: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        let b = xpcs_core::bench::BenchConfig::default();
        BenchSpec {
            n_atoms: b.n_atoms,
            box_length: b.box_length,
            n_grid: b.n_grid,
            side: b.side,
            repeats: b.repeats,
            include_cube: b.include_cube,
            scaling: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSpec {
    /// Å; defaults to L/2.
    pub r_max: Option<f64>,
    pub r_bins: Option<usize>,
    /// Upper S(q) bin edge, Å⁻¹; defaults to the inscribed band radius.
    pub q_max: Option<f64>,
    pub q_bins: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub method: MethodChoice,
    /// Worker threads; all hardware threads when unset.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub input: Option<InputSpec>,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub form_factor: FormFactorChoice,
    #[serde(default)]
    pub rings: Vec<RingSpec>,
    /// Correlation lags in ps; when empty, every lag up to `max_lag`.
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub max_lag: Option<usize>,
    /// Exposure times in ps; when empty, powers of two of the frame interval.
    #[serde(default)]
    pub exposures: Vec<f64>,
    /// Incoherent superposition counts.
    #[serde(default = "default_ms")]
    pub ms: Vec<usize>,
    /// Frames between superposed configurations.
    #[serde(default = "default_gap")]
    pub gap: usize,
    #[serde(default)]
    pub speckle: SpeckleSpec,
    #[serde(default)]
    pub detector: Option<DetectorSpec>,
    #[serde(default)]
    pub contrast: ContrastSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub bench: BenchSpec,
    #[serde(default)]
    pub validate: ValidateSpec,
}

fn default_seed() -> u64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("xpcs-out")
}

fn default_ms() -> Vec<usize> {
    vec![1]
}

fn default_gap() -> usize {
    1
}

impl Default for PipelineConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

/// What a subcommand needs from the configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Needs {
    pub input: bool,
    pub rings: usize,
    pub grid: bool,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self, needs: Needs) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::config(msg));
        if needs.input && self.input.is_none() {
            return bad("an [input] table is required".into());
        }
        if self.rings.len() < needs.rings {
            return bad(format!("at least {} [[rings]] entries are required", needs.rings));
        }
        if needs.grid && self.grid.is_none() && self.method != MethodChoice::Direct {
            return bad("a [grid] table is required for the fft method".into());
        }
        if let Some(input) = &self.input {
            match input {
                InputSpec::Brownian {
                    n_atoms,
                    box_length,
                    diffusivity,
                    dt,
                    n_frames,
                    ..
                } => {
                    if *n_atoms == 0 || *n_frames == 0 || !(*box_length > 0.0) || !(*diffusivity >= 0.0) || !(*dt > 0.0)
                    {
                        return bad(
                            "brownian input needs n_atoms, n_frames ≥ 1, box_length, dt > 0 and diffusivity ≥ 0".into(),
                        );
                    }
                }
                InputSpec::IdealGas {
                    n_atoms,
                    box_length,
                    n_frames,
                } => {
                    if *n_atoms == 0 || *n_frames == 0 || !(*box_length > 0.0) {
                        return bad("ideal_gas input needs n_atoms, n_frames ≥ 1 and box_length > 0".into());
                    }
                }
                InputSpec::Lammps { timestep_ps, .. } if !(*timestep_ps > 0.0) => {
                    return bad("lammps timestep_ps must be positive".into());
                }
                _ => {}
            }
        }
        if let Some(g) = &self.grid {
            if g.n_grid < 4 {
                return bad(format!("grid n_grid = {} is too small", g.n_grid));
            }
            if g.eta.is_some_and(|e| !(e > 0.0)) {
                return bad("grid eta must be positive".into());
            }
        }
        for r in &self.rings {
            if !(r.q > 0.0 && r.dq > 0.0) {
                return bad(format!("ring q = {}, dq = {} must both be positive", r.q, r.dq));
            }
        }
        if self.taus.iter().any(|t| !(*t >= 0.0)) {
            return bad("taus must be non-negative".into());
        }
        if self.exposures.iter().any(|t| !(*t > 0.0)) {
            return bad("exposures must be positive".into());
        }
        if self.ms.is_empty() || self.ms.contains(&0) {
            return bad("ms must list superposition counts ≥ 1".into());
        }
        if self.gap == 0 {
            return bad("gap must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        let [lo, hi] = self.fit.window;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return bad(format!("fit window [{lo}, {hi}] must satisfy 0 < lo < hi ≤ 1"));
        }
        if self.fit.diffusivity == DiffusivityChoice::LowQ && self.fit.q_cut.is_none() {
            return bad("fit.diffusivity = \"low_q\" needs fit.q_cut".into());
        }
        if self.speckle.superpose == Some(0) {
            return bad("speckle.superpose must be at least 1".into());
        }
        if let Some(d) = &self.detector {
            d.geometry()
                .q_map()
                .map_err(|e| CliError::config(format!("detector: {e}")))?;
        }
        if self.contrast.histogram_bins == 0 {
            return bad("contrast.histogram_bins must be positive".into());
        }
        if self.bench.side == 0 || self.bench.repeats == 0 || self.bench.n_atoms == 0 {
            return bad("bench side, repeats and n_atoms must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.method, MethodChoice::Fft);
        assert_eq!(c.fit.window, [0.05, 0.8]);
        assert_eq!(c.ms, vec![1]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("sed = 3").is_err());
        assert!(PipelineConfig::from_toml("[grid]\nn_grid = 8\nsize = 3").is_err());
        let e = PipelineConfig::from_toml("[input]\nkind = \"xyz\"\npath = \"a\"\nextra = 1").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
            seed = 9
            method = "both"
            [input]
            kind = "brownian"
            n_atoms = 10
            box_length = 12.0
            diffusivity = 0.3
            dt = 0.1
            n_frames = 5
            [grid]
            n_grid = 16
            [[rings]]
            q = 1.0
            dq = 0.2
        "#;
        let c = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn validation_catches_bad_windows_and_missing_grid() {
        let mut c = PipelineConfig::default();
        c.fit.window = [0.8, 0.05];
        assert!(c
            .validate(Needs {
                input: false,
                rings: 0,
                grid: false
            })
            .is_err());
        let c = PipelineConfig::default();
        assert!(c
            .validate(Needs {
                input: false,
                rings: 0,
                grid: true
            })
            .is_err());
        assert!(c
            .validate(Needs {
                input: true,
                rings: 0,
                grid: false
            })
            .is_err());
    }
}
