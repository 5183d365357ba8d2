//! Convolutional PML (stretched-coordinate, Roden–Gedney) coefficient
//! profiles.
//!
//! Polynomial grading of order 3 with σ_max = 0.8·(m+1)/Δ (the standard
//! optimal-σ heuristic at the air boundary, already scaled by 0.8),
//! κ_max = 5, and a linearly graded CFS α that vanishes at the outer wall.
//! Each axis carries profiles at integer (E) and half (H) positions;
//! outside the shells b = 1, c = 0 and κ = 1, so the ψ recursions are
//! inert there.

use super::grid::GridSpec;

const GRADING_ORDER: f64 = 3.0;
const KAPPA_MAX: f64 = 5.0;
/// CFS pole, roughly a tenth of the lowest optical frequency in the band.
const ALPHA_MAX: f64 = 1.0e-4;

/// Per-axis profile set.
#[derive(Debug, Clone)]
pub struct AxisProfile {
    /// 1/κ at integer positions.
    pub kappa_inv_e: Vec<f64>,
    pub b_e: Vec<f64>,
    pub c_e: Vec<f64>,
    /// 1/κ at half positions.
    pub kappa_inv_h: Vec<f64>,
    pub b_h: Vec<f64>,
    pub c_h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CpmlProfiles {
    pub axes: [AxisProfile; 3],
    /// First interior index per axis (== cpml_cells).
    pub inner_lo: usize,
}

fn profile_at(depth_fraction: f64, dx: f64, dt: f64) -> (f64, f64, f64) {
    // Returns (1/kappa, b, c) for a point at the given depth into the PML
    // (0 at the interface, 1 at the outer wall). Negative depth: interior.
    if depth_fraction <= 0.0 {
        return (1.0, 1.0, 0.0);
    }
    let d = depth_fraction.min(1.0);
    let g = d.powf(GRADING_ORDER);
    let sigma_max = 0.8 * (GRADING_ORDER + 1.0) / dx;
    let sigma = sigma_max * g;
    let kappa = 1.0 + (KAPPA_MAX - 1.0) * g;
    let alpha = ALPHA_MAX * (1.0 - d);
    let b = (-(sigma / kappa + alpha) * dt).exp();
    let c = if sigma == 0.0 {
        0.0
    } else {
        sigma * (b - 1.0) / (kappa * (sigma + kappa * alpha))
    };
    (1.0 / kappa, b, c)
}

fn axis_profile(n: usize, npml: usize, dx: f64, dt: f64) -> AxisProfile {
    let mut p = AxisProfile {
        kappa_inv_e: vec![1.0; n],
        b_e: vec![1.0; n],
        c_e: vec![0.0; n],
        kappa_inv_h: vec![1.0; n],
        b_h: vec![1.0; n],
        c_h: vec![0.0; n],
    };
    let np = npml as f64;
    for i in 0..n {
        // Depth measured from the two PML interfaces at npml and n-npml.
        let pos_e = i as f64;
        let pos_h = i as f64 + 0.5;
        for (pos, kv, bv, cv) in [
            (pos_e, 0usize, 0usize, 0usize),
            (pos_h, 1, 1, 1),
        ] {
            let depth_lo = (np - pos) / np;
            let depth_hi = (pos - (n as f64 - np)) / np;
            let depth = depth_lo.max(depth_hi);
            let (ki, b, c) = profile_at(depth, dx, dt);
            if kv == 0 {
                p.kappa_inv_e[i] = ki;
                p.b_e[i] = b;
                p.c_e[i] = c;
            } else {
                p.kappa_inv_h[i] = ki;
                p.b_h[i] = b;
                p.c_h[i] = c;
            }
            let _ = (bv, cv);
        }
    }
    p
}

impl CpmlProfiles {
    pub fn build(grid: &GridSpec) -> Self {
        let dt = grid.dt();
        CpmlProfiles {
            axes: [
                axis_profile(grid.nx, grid.cpml_cells, grid.dx_nm, dt),
                axis_profile(grid.ny, grid.cpml_cells, grid.dx_nm, dt),
                axis_profile(grid.nz, grid.cpml_cells, grid.dx_nm, dt),
            ],
            inner_lo: grid.cpml_cells,
        }
    }
}
