//! Scene geometry: what sits on the Yee grid.
//!
//! Three structure variants: the nanowire antenna (cylinder on a substrate
//! half-space), the bare substrate (bulk reference) and a homogeneous
//! medium (Purcell calibration / vacuum). Permittivity is sampled at each
//! staggered field position without subpixel smoothing.

use super::grid::{FdtdError, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Structure {
    /// Vertical cylinder of `core` material standing on the substrate.
    Nanowire {
        radius_nm: f64,
        height_nm: f64,
        substrate_index: f64,
    },
    /// Substrate half-space only.
    Bulk { substrate_index: f64 },
    /// Uniform medium everywhere.
    Homogeneous { index: f64 },
}

/// Dipole orientation: s is transverse (x̂, in the wire cross-section),
/// p is axial (ẑ, along the wire).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Polarization {
    S,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scene {
    pub structure: Structure,
    /// Index of the wire material (used by the nanowire variant).
    pub core_index: f64,
    /// z of the substrate-air interface / wire base (nm).
    pub substrate_top_nm: f64,
    /// Wire axis position in the xy plane (nm).
    pub axis_xy_nm: [f64; 2],
    pub dipole_pos_nm: [f64; 3],
    pub polarization: Polarization,
}

impl Scene {
    pub fn validate(&self, grid: &GridSpec) -> Result<(), FdtdError> {
        let ext = grid.extent_nm();
        for (d, e) in self.dipole_pos_nm.iter().zip(ext) {
            if !(*d > 0.0 && *d < e) {
                return Err(FdtdError::InvalidScene(format!(
                    "dipole position {:?} outside domain {:?}",
                    self.dipole_pos_nm, ext
                )));
            }
        }
        let indices_ok = match self.structure {
            Structure::Nanowire {
                radius_nm,
                height_nm,
                substrate_index,
            } => radius_nm > 0.0 && height_nm > 0.0 && substrate_index >= 1.0 && self.core_index >= 1.0,
            Structure::Bulk { substrate_index } => substrate_index >= 1.0,
            Structure::Homogeneous { index } => index >= 1.0,
        };
        if !indices_ok {
            return Err(FdtdError::InvalidScene(
                "all refractive indices must be >= 1 and dimensions positive".into(),
            ));
        }
        // The dipole must sit inside the dielectric for nanowire/bulk.
        if self.eps_at(self.dipole_pos_nm) <= 1.0 {
            if !matches!(self.structure, Structure::Homogeneous { .. }) {
                return Err(FdtdError::InvalidScene(
                    "dipole must sit inside the dielectric structure".into(),
                ));
            }
        }
        Ok(())
    }

    /// Relative permittivity at a physical point.
    pub fn eps_at(&self, pos_nm: [f64; 3]) -> f64 {
        let [x, y, z] = pos_nm;
        match self.structure {
            Structure::Homogeneous { index } => index * index,
            Structure::Bulk { substrate_index } => {
                if z < self.substrate_top_nm {
                    substrate_index * substrate_index
                } else {
                    1.0
                }
            }
            Structure::Nanowire {
                radius_nm,
                height_nm,
                substrate_index,
            } => {
                if z < self.substrate_top_nm {
                    return substrate_index * substrate_index;
                }
                if z <= self.substrate_top_nm + height_nm {
                    let dx = x - self.axis_xy_nm[0];
                    let dy = y - self.axis_xy_nm[1];
                    if dx * dx + dy * dy <= radius_nm * radius_nm {
                        return self.core_index * self.core_index;
                    }
                }
                1.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wire() -> Scene {
        Scene {
            structure: Structure::Nanowire {
                radius_nm: 100.0,
                height_nm: 2000.0,
                substrate_index: 2.4,
            },
            core_index: 2.4,
            substrate_top_nm: 500.0,
            axis_xy_nm: [600.0, 600.0],
            dipole_pos_nm: [600.0, 600.0, 1500.0],
            polarization: Polarization::S,
        }
    }

    #[test]
    fn nanowire_sampling() {
        let s = wire();
        assert_eq!(s.eps_at([600.0, 600.0, 100.0]), 2.4 * 2.4); // substrate
        assert_eq!(s.eps_at([600.0, 600.0, 1500.0]), 2.4 * 2.4); // inside wire
        assert_eq!(s.eps_at([800.0, 600.0, 1500.0]), 1.0); // beside wire
        assert_eq!(s.eps_at([600.0, 600.0, 2600.0]), 1.0); // above wire
    }

    #[test]
    fn dipole_must_be_inside_dielectric() {
        let g = GridSpec {
            dx_nm: 20.0,
            nx: 60,
            ny: 60,
            nz: 150,
            courant: 0.5,
            cpml_cells: 10,
            steps: 10,
        };
        let mut s = wire();
        assert!(s.validate(&g).is_ok());
        s.dipole_pos_nm = [900.0, 600.0, 1500.0];
        assert!(s.validate(&g).is_err());
    }
}
