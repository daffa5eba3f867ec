use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Rectangle with one central scatterer; walls are part of the boundary.
    Rectangle,
    /// Lattice of scatterers; collisions with scatterers only.
    Torus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub beta: f64,
    pub scatterer_radius: f64,
    pub rect_width: f64,
    pub rect_height: f64,
    pub epsilon0: f64,
    pub k0: u32,
    pub mode: Mode,
    pub newton_tol: f64,
    pub max_flight_cells: u64,
    pub seed: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            beta: 4.0,
            scatterer_radius: 1.0,
            rect_width: 3.0,
            rect_height: 3.0,
            epsilon0: 0.45,
            k0: 8,
            mode: Mode::Torus,
            newton_tol: 1e-13,
            max_flight_cells: 1_000_000,
            seed: 20261016,
        }
    }
}

impl TableConfig {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_rect(mut self, width: f64, height: f64) -> Self {
        self.rect_width = width;
        self.rect_height = height;
        self
    }

    /// `β = 2` is only a circle oracle; the flat-point machinery needs `β > 2`.
    pub fn is_circle(&self) -> bool {
        self.beta == 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.beta.is_finite() || self.beta < 2.0 {
            return bad(format!("beta must be > 2 (or exactly 2 for the circle oracle), got {}", self.beta));
        }
        let a = self.scatterer_radius;
        if !a.is_finite() || a <= 0.0 {
            return bad(format!("scatterer_radius must be positive, got {a}"));
        }
        if !(self.rect_width.is_finite() && self.rect_height.is_finite()) {
            return bad("rect_width and rect_height must be finite".into());
        }
        if self.rect_width <= 2.0 * a || self.rect_height <= 2.0 * a {
            return bad(format!(
                "scatterer of radius {a} does not fit strictly inside a {}x{} cell",
                self.rect_width, self.rect_height
            ));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 0.5) {
            return bad(format!("epsilon0 must lie in (0, 1/2), got {}", self.epsilon0));
        }
        if self.k0 < 2 {
            return bad("k0 must be at least 2".into());
        }
        if !(self.newton_tol > 0.0 && self.newton_tol < 1e-6) {
            return bad(format!("newton_tol must lie in (0, 1e-6), got {}", self.newton_tol));
        }
        if self.max_flight_cells < 1 {
            return bad("max_flight_cells must be at least 1".into());
        }
        Ok(())
    }

    /// Parse a JSON document, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TableConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        };
        let int = |v: &str| -> Result<u64> {
            v.parse::<u64>().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        };
        match key {
            "beta" => self.beta = num(value)?,
            "scatterer_radius" => self.scatterer_radius = num(value)?,
            "rect_width" => self.rect_width = num(value)?,
            "rect_height" => self.rect_height = num(value)?,
            "epsilon0" => self.epsilon0 = num(value)?,
            "k0" => self.k0 = int(value)? as u32,
            "newton_tol" => self.newton_tol = num(value)?,
            "max_flight_cells" => self.max_flight_cells = int(value)?,
            "seed" => self.seed = int(value)?,
            "mode" => {
                self.mode = match value {
                    "rectangle" => Mode::Rectangle,
                    "torus" => Mode::Torus,
                    _ => return Err(Error::Config(format!("mode: unknown value {value:?}"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}
