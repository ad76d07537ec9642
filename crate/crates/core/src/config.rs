//! TOML run configuration: one file describes material, grid, scheme,
//! loads, initial data, study ladders, and output policy.  Every table has
//! full defaults, so a minimal config is the empty file; `resolved_toml`
//! renders the fully-populated configuration for reproducible reruns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{Grid, ScalarField, Side, VectorField};
use crate::loading::LoadingProgram;
use crate::material::{MaterialModel, MaterialParams};
use crate::scheme::SchemeConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dirichlet: Vec<Side>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 16,
            ny: 16,
            lx: 1.0,
            ly: 1.0,
            dirichlet: vec![Side::Left],
        }
    }
}

/// Initial data: constants by default, optional snapshot CSVs (written by
/// the snapshot machinery, columns `i,j,x,y,...`) for restarts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// Spatially constant rescaled initial temperature.
    pub mu0: f64,
    /// Snapshot with columns `ux,uy` overriding the zero displacement.
    pub u0_csv: Option<PathBuf>,
    /// Snapshot with a column `mu` overriding the constant.
    pub mu0_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub eps: Vec<f64>,
    pub tau: Vec<f64>,
    pub r: f64,
    pub s: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            eps: vec![0.2, 0.1, 0.05, 0.025],
            tau: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            r: 1.3,
            s: 1.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Run directory; overridable with --out.
    pub dir: PathBuf,
    /// Snapshot cadence in steps; 0 writes only the final state.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    /// Selects the linearized solver for `simulate`.
    pub enabled: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub grid: GridConfig,
    pub scheme: SchemeConfig,
    pub loads: LoadingProgram,
    pub initial: InitialConfig,
    pub study: StudyConfig,
    pub output: OutputConfig,
    pub linear: LinearConfig,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| CoreError::InvalidConfig(format!("config parse error: {e}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Cross-field validation with the referenced modules' rules.
    pub fn validate(&self) -> Result<()> {
        self.build_grid()?;
        self.build_model()?;
        self.scheme.validate()?;
        self.loads.validate(self.scheme.t_end)?;
        if self.initial.mu0 < 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "[initial] mu0 must be nonnegative, got {}",
                self.initial.mu0
            )));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.nx, g.ny, g.lx, g.ly, g.dirichlet.clone())
    }

    pub fn build_model(&self) -> Result<MaterialModel> {
        MaterialModel::new(self.material)
    }

    /// Initial displacement and rescaled temperature on the given grid.
    pub fn initial_fields(&self, grid: &Grid) -> Result<(VectorField, ScalarField)> {
        let u0 = match &self.initial.u0_csv {
            None => VectorField::zeros(grid),
            Some(p) => {
                let cols = read_snapshot_columns(p, grid, &["ux", "uy"])?;
                VectorField(
                    cols[0]
                        .iter()
                        .zip(&cols[1])
                        .map(|(&x, &y)| [x, y])
                        .collect(),
                )
            }
        };
        let mu0 = match &self.initial.mu0_csv {
            None => ScalarField::constant(grid, self.initial.mu0),
            Some(p) => ScalarField(read_snapshot_columns(p, grid, &["mu"])?.remove(0)),
        };
        Ok((u0, mu0))
    }

    /// Fully-populated TOML rendering of this configuration.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

/// Reads named columns from a snapshot CSV (`i,j,x,y,<names...>`) into
/// node-ordered vectors, validating shape against the grid.
fn read_snapshot_columns(path: &Path, grid: &Grid, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::InvalidConfig(format!("{}: empty snapshot", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let mut idx = Vec::with_capacity(names.len());
    for name in names {
        let pos = cols.iter().position(|c| c == name).ok_or_else(|| {
            CoreError::InvalidConfig(format!(
                "{}: missing column {name} in header {header}",
                path.display()
            ))
        })?;
        idx.push(pos);
    }
    let mut out = vec![vec![0.0; grid.nnodes()]; names.len()];
    let mut count = 0;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| CoreError::InvalidConfig(format!("{}: {e}: {s}", path.display())))
        };
        let i = parse(fields[0])? as usize;
        let j = parse(fields[1])? as usize;
        if i >= grid.nx || j >= grid.ny {
            return Err(CoreError::InvalidConfig(format!(
                "{}: node ({i}, {j}) outside {}x{} grid",
                path.display(),
                grid.nx,
                grid.ny
            )));
        }
        let n = grid.node(i, j);
        for (c, &pos) in idx.iter().enumerate() {
            out[c][n] = parse(fields.get(pos).copied().unwrap_or(""))?;
        }
        count += 1;
    }
    if count != grid.nnodes() {
        return Err(CoreError::ShapeMismatch {
            expected: grid.nnodes(),
            got: count,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid_default() {
        let cfg = RunConfig::from_str("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.nx, 16);
        assert_eq!(cfg.scheme.eps, 1.0);
        assert!(!cfg.linear.enabled);
    }

    #[test]
    fn resolved_toml_round_trips() {
        let text = r#"
            [grid]
            nx = 8
            ny = 8
            dirichlet = ["left", "bottom"]

            [scheme]
            eps = 0.5
            alpha = 1.5
            tau = 0.0625
            t_end = 0.25

            [[loads.body]]
            direction = [0.0, -1.0]
            signal = { kind = "constant", value = 1.0 }
            profile = { kind = "uniform" }

            [initial]
            mu0 = 0.25
        "#;
        let cfg = RunConfig::from_str(text).unwrap();
        cfg.validate().unwrap();
        let resolved = cfg.resolved_toml();
        let back = RunConfig::from_str(&resolved).unwrap();
        back.validate().unwrap();
        assert_eq!(back.resolved_toml(), resolved, "resolution is idempotent");
        assert_eq!(back.scheme.alpha, 1.5);
        assert_eq!(back.grid.dirichlet.len(), 2);
    }

    #[test]
    fn parse_errors_cite_location() {
        let err = RunConfig::from_str("[scheme]\neps = \"high\"\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn invalid_cross_field_values_rejected() {
        let cfg = RunConfig::from_str("[scheme]\neps = 2.0\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_str("[material]\nq = 2\n").unwrap();
        assert!(cfg.validate().is_err(), "q below the growth threshold");
        let cfg = RunConfig::from_str("[initial]\nmu0 = -1.0\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn initial_fields_from_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::from_str("[grid]\nnx = 3\nny = 3\n").unwrap();
        let grid = cfg.build_grid().unwrap();
        let u = VectorField::from_fn(&grid, |x, y| [0.1 * x, 0.2 * y]);
        let ux: Vec<f64> = u.0.iter().map(|p| p[0]).collect();
        let uy: Vec<f64> = u.0.iter().map(|p| p[1]).collect();
        let csv = grid.snapshot_csv(&["ux", "uy"], &[&ux, &uy]).unwrap();
        let path = dir.path().join("u0.csv");
        std::fs::write(&path, csv).unwrap();
        cfg.initial.u0_csv = Some(path);
        let (u0, mu0) = cfg.initial_fields(&grid).unwrap();
        assert_eq!(u0.0, u.0);
        assert!(mu0.0.iter().all(|&v| v == 0.0));
    }
}
