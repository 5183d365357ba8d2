//! Yee grid bookkeeping.
//!
//! Natural units: lengths in nm, c = ε₀ = μ₀ = 1, so time is also in nm and
//! frequency is 1/λ. Field arrays are flat with z fastest:
//! `idx = (i·ny + j)·nz + k`; slab parallelism splits on x-planes.

use thiserror::Error;

/// Hard cap on total cells (~4 GB of state at 3e7).
const MAX_CELLS: usize = 60_000_000;

pub const COURANT_LIMIT: f64 = 0.99 / 1.732_050_807_568_877_2;

#[derive(Debug, Error, PartialEq)]
pub enum FdtdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("non-finite field detected at timestep {step}")]
    Unstable { step: usize },
    #[error("monitor misplaced: {0}")]
    BadMonitor(String),
    #[error("mismatched wavelength grids between runs")]
    WavelengthMismatch,
}

/// Uniform Yee grid with CPML shells on all six faces.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    /// Cell size Δ (nm).
    pub dx_nm: f64,
    /// Extents in cells.
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Courant number S; Δt = S·Δ/√3.
    pub courant: f64,
    /// CPML thickness in cells on every face.
    pub cpml_cells: usize,
    /// Total leapfrog iterations for a run.
    pub steps: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), FdtdError> {
        if !(self.dx_nm > 0.0) || !self.dx_nm.is_finite() {
            return Err(FdtdError::InvalidGrid(format!(
                "cell size must be positive, got {}",
                self.dx_nm
            )));
        }
        if self.courant <= 0.0 || self.courant > COURANT_LIMIT {
            return Err(FdtdError::InvalidGrid(format!(
                "courant number {} outside (0, {COURANT_LIMIT:.4}]",
                self.courant
            )));
        }
        if self.cpml_cells < 8 {
            return Err(FdtdError::InvalidGrid(format!(
                "CPML thickness {} below the 8-cell minimum",
                self.cpml_cells
            )));
        }
        let min_extent = 2 * self.cpml_cells + 4;
        if self.nx < min_extent || self.ny < min_extent || self.nz < min_extent {
            return Err(FdtdError::InvalidGrid(format!(
                "extents {}x{}x{} cannot accommodate structure + monitors + {} CPML cells",
                self.nx, self.ny, self.nz, self.cpml_cells
            )));
        }
        if self.cells() > MAX_CELLS {
            return Err(FdtdError::InvalidGrid(format!(
                "{} cells exceeds the {MAX_CELLS} resource cap",
                self.cells()
            )));
        }
        if self.steps == 0 {
            return Err(FdtdError::InvalidGrid("zero timesteps".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn dt(&self) -> f64 {
        self.courant * self.dx_nm / 3.0_f64.sqrt()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }

    /// Domain sizes in nm.
    pub fn extent_nm(&self) -> [f64; 3] {
        [
            self.nx as f64 * self.dx_nm,
            self.ny as f64 * self.dx_nm,
            self.nz as f64 * self.dx_nm,
        ]
    }

    /// Nearest integer node to a physical position.
    pub fn node_of(&self, pos_nm: [f64; 3]) -> [usize; 3] {
        let clampi = |x: f64, n: usize| -> usize {
            (x / self.dx_nm).round().clamp(0.0, (n - 1) as f64) as usize
        };
        [
            clampi(pos_nm[0], self.nx),
            clampi(pos_nm[1], self.ny),
            clampi(pos_nm[2], self.nz),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> GridSpec {
        GridSpec {
            dx_nm: 13.0,
            nx: 40,
            ny: 40,
            nz: 40,
            courant: 0.5,
            cpml_cells: 10,
            steps: 100,
        }
    }

    #[test]
    fn accepts_reasonable_grid() {
        assert!(base().validate().is_ok());
    }

    #[test]
    fn rejects_super_courant_and_thin_pml() {
        let mut g = base();
        g.courant = 0.6;
        assert!(g.validate().is_err());
        let mut g = base();
        g.cpml_cells = 5;
        assert!(g.validate().is_err());
        let mut g = base();
        g.nx = 20;
        assert!(g.validate().is_err());
    }

    #[test]
    fn indexing_is_z_fastest() {
        let g = base();
        assert_eq!(g.idx(0, 0, 1), 1);
        assert_eq!(g.idx(0, 1, 0), 40);
        assert_eq!(g.idx(1, 0, 0), 1600);
    }
}
