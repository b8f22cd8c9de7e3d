//! TOML run configuration. A file only needs the keys it changes; it is
//! merged over the defaults of the subcommand and then validated strictly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomised diagnostics; the marches themselves are deterministic.
    pub seed: u64,
    pub grid: GridSection,
    pub angular: AngularSection,
    pub solver: SolverSection,
    pub physics: PhysicsSection,
    pub beam: BeamSection,
    pub input: InputSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Cells per direction of the line-source square.
    pub cells: usize,
    /// Pixel size in cm for image-based runs; 0 spreads the image width over 14.5 cm.
    pub cell_size: f64,
    pub origin: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSection {
    pub degree: usize,
    pub quad_order: usize,
    /// Opening half angle of the directed quadrature (beam runs only).
    pub cone_half_angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub levels: usize,
    pub mode: ModeName,
    /// Rank of fixed-rank runs.
    pub rank: usize,
    pub theta: f64,
    pub theta_mode: ThetaMode,
    pub r_min: usize,
    pub r_init: usize,
    pub r_max: usize,
    pub cfl_safety: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    pub record_every: usize,
    pub enforce_stability: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    /// Constant stopping power (MeV cm^2/g), unless `stopping_table` is given.
    pub stopping: f64,
    /// Two-column CSV `E,S(E)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping_table: Option<String>,
    /// Henyey-Greenstein magnitude, equal to the total cross section.
    pub scatter: f64,
    pub anisotropy: f64,
    pub e_max: f64,
    /// Defaults to `1e-3 e_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub amplitude: f64,
    pub x_mean: f64,
    pub y_mean: f64,
    pub omega_mean: f64,
    pub inv_var_x: f64,
    pub inv_var_y: f64,
    pub inv_var_omega: f64,
    pub inv_var_e: f64,
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// PGM (P2) image or density CSV; required for `ct-plan`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    /// Gray values at or below this, connected to the border, count as air.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub air_fill_threshold: Option<f64>,
    /// Density given to air pixels when `air_fill_threshold` is set.
    pub air_fill_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    None,
    Split,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub vtk: bool,
    pub oracle: OracleMode,
    /// Permits setups flagged as slow (hour-long marches).
    pub allow_slow: bool,
}

impl RunConfig {
    /// Desk-scale line source: 100 x 100 cells, degree 7, four levels.
    pub fn linesource_defaults() -> Self {
        Self {
            seed: 0,
            grid: GridSection {
                cells: 100,
                cell_size: 0.0,
                origin: [-1.5, -1.5],
            },
            angular: AngularSection {
                degree: 7,
                quad_order: 16,
                cone_half_angle_deg: 180.0,
            },
            solver: SolverSection {
                levels: 4,
                mode: ModeName::Adaptive,
                rank: 10,
                theta: 0.3,
                theta_mode: ThetaMode::Relative,
                r_min: 1,
                r_init: 10,
                r_max: 64,
                cfl_safety: 1.0,
                t_end: None,
                max_steps: None,
                record_every: 1,
                enforce_stability: false,
            },
            physics: PhysicsSection {
                stopping: 1.0,
                stopping_table: None,
                scatter: 1.0,
                anisotropy: 0.0,
                e_max: 1.0,
                e_cut: Some(0.0),
            },
            beam: BeamSection::reference(),
            input: InputSection {
                image: None,
                air_fill_threshold: None,
                air_fill_density: 1.0,
            },
            output: OutputSection {
                dir: "output".into(),
                vtk: false,
                oracle: OracleMode::None,
                allow_slow: false,
            },
        }
    }

    /// Beam through a CT slice: degree 5, directed quadrature, one level.
    pub fn ct_defaults() -> Self {
        let mut c = Self::linesource_defaults();
        c.grid.origin = [0.0, 0.0];
        c.angular = AngularSection {
            degree: 5,
            quad_order: 22,
            cone_half_angle_deg: 75.0,
        };
        c.solver.levels = 1;
        c.solver.theta = 0.01;
        c.solver.r_init = 5;
        c.solver.r_max = 20;
        c.physics = PhysicsSection {
            stopping: 2.0,
            stopping_table: None,
            scatter: 1.0,
            anisotropy: 0.9,
            e_max: 21.0,
            e_cut: None,
        };
        c
    }

    /// Merges the TOML text over `self` and validates the result. Unknown keys
    /// and malformed values are reported with their location.
    pub fn merged_with(&self, text: &str, source: &str) -> Result<Self, CliError> {
        let original = text;
        let overlay: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
        let mut base = toml::Table::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, overlay);
        let text = toml::to_string(&base).map_err(|e| CliError::Config(e.to_string()))?;
        toml::from_str(&text).map_err(|e| {
            let message = e.message().trim().to_string();
            match key_line(text_of_field(&message), &original) {
                Some(line) => CliError::Config(format!("{source}, line {line}: {message}")),
                None => CliError::Config(format!("{source}: {message}")),
            }
        })
    }

    pub fn load_over(&self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.merged_with(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

impl BeamSection {
    /// 21 MeV beam at (7.25, 14.5) cm travelling in `-y`.
    pub fn reference() -> Self {
        Self {
            amplitude: 1e5,
            x_mean: 7.25,
            y_mean: 14.5,
            omega_mean: 1.0,
            inv_var_x: 20.0,
            inv_var_y: 20.0,
            inv_var_omega: 75.0,
            inv_var_e: 100.0,
            axis: [0.0, -1.0, 0.0],
        }
    }
}

/// First backquoted name in a deserialisation message (`unknown field `x``).
fn text_of_field(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

/// 1-based line of the first assignment to `key` in the original file.
fn key_line(key: Option<&str>, text: &str) -> Option<usize> {
    let key = key?;
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|n| n + 1)
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
