//! Leapfrog Yee updates with CPML and a soft dipole current source.
//!
//! One `step()` advances H to t = (n+½)Δt and then E to (n+1)Δt, injecting
//! the source current at the half step. Updates parallelize over x-planes;
//! every cell is computed with the same expression in the same order, so
//! runs are bit-identical for any worker count. The outer box is PEC
//! (tangential E pinned at zero) behind the CPML shells.

use super::cpml::CpmlProfiles;
use super::grid::{FdtdError, GridSpec};
use super::scene::{Polarization, Scene};
use crate::par;

/// Gaussian-modulated sinusoid current source on a single E node.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DipoleSource {
    pub node: [usize; 3],
    /// 0 = Ex, 1 = Ey, 2 = Ez.
    pub component: usize,
    /// Peak current density amplitude.
    pub amplitude: f64,
    /// Carrier frequency (1/nm).
    pub frequency: f64,
    /// Envelope width τ (nm).
    pub tau: f64,
    /// Envelope delay t₀ (nm), typically several τ.
    pub delay: f64,
}

impl DipoleSource {
    /// Source spanning λ ∈ [lambda_min, lambda_max] (nm): carrier at the
    /// arithmetic mid-frequency, envelope wide enough that the band edges
    /// keep ~20% of the peak spectral amplitude.
    pub fn broadband(node: [usize; 3], polarization: Polarization, lambda_min: f64, lambda_max: f64) -> Self {
        let f_hi = 1.0 / lambda_min;
        let f_lo = 1.0 / lambda_max;
        let f0 = 0.5 * (f_hi + f_lo);
        let sigma_f = (f_hi - f_lo) / 3.5;
        let tau = 1.0 / (2.0 * std::f64::consts::PI * sigma_f);
        DipoleSource {
            node,
            component: match polarization {
                Polarization::S => 0,
                Polarization::P => 2,
            },
            amplitude: 1.0,
            frequency: f0,
            tau,
            delay: 4.5 * tau,
        }
    }

    pub fn waveform(&self, t: f64) -> f64 {
        let u = t - self.delay;
        self.amplitude
            * (-u * u / (2.0 * self.tau * self.tau)).exp()
            * (2.0 * std::f64::consts::PI * self.frequency * u).sin()
    }

    /// DFT of the injected waveform over a run, with the same convention
    /// the field monitors use (injection happens at half steps).
    pub fn spectrum(&self, omega: f64, dt: f64, steps: usize) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for n in 0..steps {
            let t = (n as f64 + 0.5) * dt;
            let v = self.waveform(t);
            re += v * (omega * t).cos() * dt;
            im -= v * (omega * t).sin() * dt;
        }
        (re, im)
    }
}

/// Full simulation state.
pub struct Simulation {
    pub grid: GridSpec,
    pub scene: Scene,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
    pub ez: Vec<f64>,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    pub hz: Vec<f64>,
    /// Δt/ε at each staggered E position.
    ce_x: Vec<f64>,
    ce_y: Vec<f64>,
    ce_z: Vec<f64>,
    // CPML auxiliary fields, one pair per E/H component.
    pxy: Vec<f64>,
    pxz: Vec<f64>,
    pyz: Vec<f64>,
    pyx: Vec<f64>,
    pzx: Vec<f64>,
    pzy: Vec<f64>,
    qxy: Vec<f64>,
    qxz: Vec<f64>,
    qyz: Vec<f64>,
    qyx: Vec<f64>,
    qzx: Vec<f64>,
    qzy: Vec<f64>,
    cpml: CpmlProfiles,
    source: Option<DipoleSource>,
    /// Completed leapfrog iterations.
    pub step_index: usize,
}

impl Simulation {
    pub fn new(grid: GridSpec, scene: Scene) -> Result<Self, FdtdError> {
        grid.validate()?;
        scene.validate(&grid)?;
        Ok(Self::new_unvalidated(grid, scene))
    }

    /// Constructor without the stability/geometry gates; exists so the
    /// non-finite-field detector can be exercised with a super-Courant step.
    pub fn new_unvalidated(grid: GridSpec, scene: Scene) -> Self {
        let n = grid.cells();
        let dt = grid.dt();
        let d = grid.dx_nm;
        let mut ce_x = vec![0.0; n];
        let mut ce_y = vec![0.0; n];
        let mut ce_z = vec![0.0; n];
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                for k in 0..grid.nz {
                    let idx = grid.idx(i, j, k);
                    let (x, y, z) = (i as f64 * d, j as f64 * d, k as f64 * d);
                    ce_x[idx] = dt / scene.eps_at([x + 0.5 * d, y, z]);
                    ce_y[idx] = dt / scene.eps_at([x, y + 0.5 * d, z]);
                    ce_z[idx] = dt / scene.eps_at([x, y, z + 0.5 * d]);
                }
            }
        }
        let cpml = CpmlProfiles::build(&grid);
        let zero = || vec![0.0; n];
        Simulation {
            grid,
            scene,
            ex: zero(),
            ey: zero(),
            ez: zero(),
            hx: zero(),
            hy: zero(),
            hz: zero(),
            ce_x,
            ce_y,
            ce_z,
            pxy: zero(),
            pxz: zero(),
            pyz: zero(),
            pyx: zero(),
            pzx: zero(),
            pzy: zero(),
            qxy: zero(),
            qxz: zero(),
            qyz: zero(),
            qyx: zero(),
            qzx: zero(),
            qzy: zero(),
            cpml,
            source: None,
            step_index: 0,
        }
    }

    pub fn set_source(&mut self, source: DipoleSource) {
        self.source = Some(source);
    }

    pub fn source(&self) -> Option<&DipoleSource> {
        self.source.as_ref()
    }

    /// Time of the current E fields (nm).
    pub fn t_e(&self) -> f64 {
        self.step_index as f64 * self.grid.dt()
    }

    /// Time of the current H fields (nm).
    pub fn t_h(&self) -> f64 {
        (self.step_index as f64 - 0.5) * self.grid.dt()
    }

    fn update_h(&mut self) {
        let (nx, ny, nz) = (self.grid.nx, self.grid.ny, self.grid.nz);
        let plane = ny * nz;
        let dt = self.grid.dt();
        let inv_d = 1.0 / self.grid.dx_nm;
        let [px, py, pz] = &self.cpml.axes;

        // Hx: -dt (dEz/dy - dEy/dz), needs Ez(j+1), Ey(k+1).
        {
            let (ez, ey) = (&self.ez[..], &self.ey[..]);
            par::for_each_chunk_mut3(
                &mut self.hx,
                &mut self.qxy,
                &mut self.qxz,
                plane,
                |i, hxp, qxyp, qxzp| {
                    let base = i * plane;
                    for j in 0..ny - 1 {
                        let (by, cy, kiy) = (py.b_h[j], py.c_h[j], py.kappa_inv_h[j]);
                        for k in 0..nz - 1 {
                            let l = j * nz + k;
                            let g = base + l;
                            let dez_dy = (ez[g + nz] - ez[g]) * inv_d;
                            let dey_dz = (ey[g + 1] - ey[g]) * inv_d;
                            let (bz, cz, kiz) = (pz.b_h[k], pz.c_h[k], pz.kappa_inv_h[k]);
                            qxyp[l] = by * qxyp[l] + cy * dez_dy;
                            qxzp[l] = bz * qxzp[l] + cz * dey_dz;
                            hxp[l] -= dt
                                * (kiy * dez_dy - kiz * dey_dz + qxyp[l] - qxzp[l]);
                        }
                    }
                },
            );
        }
        // Hy: -dt (dEx/dz - dEz/dx), needs Ex(k+1), Ez(i+1).
        {
            let (ex, ez) = (&self.ex[..], &self.ez[..]);
            par::for_each_chunk_mut3(
                &mut self.hy,
                &mut self.qyz,
                &mut self.qyx,
                plane,
                |i, hyp, qyzp, qyxp| {
                    if i >= nx - 1 {
                        return;
                    }
                    let base = i * plane;
                    let (bx, cx, kix) = (px.b_h[i], px.c_h[i], px.kappa_inv_h[i]);
                    for j in 0..ny {
                        for k in 0..nz - 1 {
                            let l = j * nz + k;
                            let g = base + l;
                            let dex_dz = (ex[g + 1] - ex[g]) * inv_d;
                            let dez_dx = (ez[g + plane] - ez[g]) * inv_d;
                            let (bz, cz, kiz) = (pz.b_h[k], pz.c_h[k], pz.kappa_inv_h[k]);
                            qyzp[l] = bz * qyzp[l] + cz * dex_dz;
                            qyxp[l] = bx * qyxp[l] + cx * dez_dx;
                            hyp[l] -= dt
                                * (kiz * dex_dz - kix * dez_dx + qyzp[l] - qyxp[l]);
                        }
                    }
                },
            );
        }
        // Hz: -dt (dEy/dx - dEx/dy), needs Ey(i+1), Ex(j+1).
        {
            let (ey, ex) = (&self.ey[..], &self.ex[..]);
            par::for_each_chunk_mut3(
                &mut self.hz,
                &mut self.qzx,
                &mut self.qzy,
                plane,
                |i, hzp, qzxp, qzyp| {
                    if i >= nx - 1 {
                        return;
                    }
                    let base = i * plane;
                    let (bx, cx, kix) = (px.b_h[i], px.c_h[i], px.kappa_inv_h[i]);
                    for j in 0..ny - 1 {
                        let (by, cy, kiy) = (py.b_h[j], py.c_h[j], py.kappa_inv_h[j]);
                        for k in 0..nz {
                            let l = j * nz + k;
                            let g = base + l;
                            let dey_dx = (ey[g + plane] - ey[g]) * inv_d;
                            let dex_dy = (ex[g + nz] - ex[g]) * inv_d;
                            qzxp[l] = bx * qzxp[l] + cx * dey_dx;
                            qzyp[l] = by * qzyp[l] + cy * dex_dy;
                            hzp[l] -= dt
                                * (kix * dey_dx - kiy * dex_dy + qzxp[l] - qzyp[l]);
                        }
                    }
                },
            );
        }
    }

    fn update_e(&mut self) {
        let (nx, ny, nz) = (self.grid.nx, self.grid.ny, self.grid.nz);
        let plane = ny * nz;
        let inv_d = 1.0 / self.grid.dx_nm;
        let [px, py, pz] = &self.cpml.axes;

        // Ex += ce (dHz/dy - dHy/dz), needs Hz(j-1), Hy(k-1).
        {
            let (hz, hy, ce) = (&self.hz[..], &self.hy[..], &self.ce_x[..]);
            par::for_each_chunk_mut3(
                &mut self.ex,
                &mut self.pxy,
                &mut self.pxz,
                plane,
                |i, exp, pxyp, pxzp| {
                    let base = i * plane;
                    for j in 1..ny - 1 {
                        let (by, cy, kiy) = (py.b_e[j], py.c_e[j], py.kappa_inv_e[j]);
                        for k in 1..nz - 1 {
                            let l = j * nz + k;
                            let g = base + l;
                            let dhz_dy = (hz[g] - hz[g - nz]) * inv_d;
                            let dhy_dz = (hy[g] - hy[g - 1]) * inv_d;
                            let (bz, cz, kiz) = (pz.b_e[k], pz.c_e[k], pz.kappa_inv_e[k]);
                            pxyp[l] = by * pxyp[l] + cy * dhz_dy;
                            pxzp[l] = bz * pxzp[l] + cz * dhy_dz;
                            exp[l] += ce[g]
                                * (kiy * dhz_dy - kiz * dhy_dz + pxyp[l] - pxzp[l]);
                        }
                    }
                },
            );
        }
        // Ey += ce (dHx/dz - dHz/dx), needs Hx(k-1), Hz(i-1).
        {
            let (hx, hz, ce) = (&self.hx[..], &self.hz[..], &self.ce_y[..]);
            par::for_each_chunk_mut3(
                &mut self.ey,
                &mut self.pyz,
                &mut self.pyx,
                plane,
                |i, eyp, pyzp, pyxp| {
                    if i == 0 || i >= nx - 1 {
                        return;
                    }
                    let base = i * plane;
                    let (bx, cx, kix) = (px.b_e[i], px.c_e[i], px.kappa_inv_e[i]);
                    for j in 0..ny {
                        for k in 1..nz - 1 {
                            let l = j * nz + k;
                            let g = base + l;
                            let dhx_dz = (hx[g] - hx[g - 1]) * inv_d;
                            let dhz_dx = (hz[g] - hz[g - plane]) * inv_d;
                            let (bz, cz, kiz) = (pz.b_e[k], pz.c_e[k], pz.kappa_inv_e[k]);
                            pyzp[l] = bz * pyzp[l] + cz * dhx_dz;
                            pyxp[l] = bx * pyxp[l] + cx * dhz_dx;
                            eyp[l] += ce[g]
                                * (kiz * dhx_dz - kix * dhz_dx + pyzp[l] - pyxp[l]);
                        }
                    }
                },
            );
        }
        // Ez += ce (dHy/dx - dHx/dy), needs Hy(i-1), Hx(j-1).
        {
            let (hy, hx, ce) = (&self.hy[..], &self.hx[..], &self.ce_z[..]);
            par::for_each_chunk_mut3(
                &mut self.ez,
                &mut self.pzx,
                &mut self.pzy,
                plane,
                |i, ezp, pzxp, pzyp| {
                    if i == 0 || i >= nx - 1 {
                        return;
                    }
                    let base = i * plane;
                    let (bx, cx, kix) = (px.b_e[i], px.c_e[i], px.kappa_inv_e[i]);
                    for j in 1..ny - 1 {
                        let (by, cy, kiy) = (py.b_e[j], py.c_e[j], py.kappa_inv_e[j]);
                        for k in 0..nz {
                            let l = j * nz + k;
                            let g = base + l;
                            let dhy_dx = (hy[g] - hy[g - plane]) * inv_d;
                            let dhx_dy = (hx[g] - hx[g - nz]) * inv_d;
                            pzxp[l] = bx * pzxp[l] + cx * dhy_dx;
                            pzyp[l] = by * pzyp[l] + cy * dhx_dy;
                            ezp[l] += ce[g]
                                * (kix * dhy_dx - kiy * dhx_dy + pzxp[l] - pzyp[l]);
                        }
                    }
                },
            );
        }
    }

    fn inject_source(&mut self) {
        let Some(src) = self.source.clone() else {
            return;
        };
        let t = (self.step_index as f64 + 0.5) * self.grid.dt();
        let j = src.waveform(t);
        let idx = self.grid.idx(src.node[0], src.node[1], src.node[2]);
        let (field, ce) = match src.component {
            0 => (&mut self.ex, &self.ce_x),
            1 => (&mut self.ey, &self.ce_y),
            _ => (&mut self.ez, &self.ce_z),
        };
        // Soft source: E += -Δt/ε · J.
        field[idx] -= ce[idx] * j;
    }

    /// One leapfrog iteration: H to (n+½)Δt, then E to (n+1)Δt.
    pub fn step(&mut self) {
        self.update_h();
        self.inject_source();
        self.update_e();
        self.step_index += 1;
    }

    /// Detect blow-up. Checks one representative component.
    pub fn fields_finite(&self) -> bool {
        self.ez.iter().all(|v| v.is_finite()) && self.ex.iter().all(|v| v.is_finite())
    }

    /// Total EM field energy ½∫(ε|E|² + |H|²) dV.
    pub fn energy(&self) -> f64 {
        let dt = self.grid.dt();
        let dv = self.grid.dx_nm.powi(3);
        let mut acc = 0.0;
        for idx in 0..self.grid.cells() {
            // ε = Δt/ce.
            acc += dt / self.ce_x[idx] * self.ex[idx] * self.ex[idx];
            acc += dt / self.ce_y[idx] * self.ey[idx] * self.ey[idx];
            acc += dt / self.ce_z[idx] * self.ez[idx] * self.ez[idx];
            acc += self.hx[idx] * self.hx[idx]
                + self.hy[idx] * self.hy[idx]
                + self.hz[idx] * self.hz[idx];
        }
        0.5 * acc * dv
    }

    /// Run `steps` iterations, feeding every enabled monitor, with periodic
    /// stability checks.
    pub fn run(
        &mut self,
        steps: usize,
        monitors: &mut [super::monitor::PlaneMonitor],
    ) -> Result<(), FdtdError> {
        for _ in 0..steps {
            self.step();
            let t_e = self.t_e();
            let t_h = self.t_h();
            for m in monitors.iter_mut() {
                m.accumulate(
                    &self.grid,
                    &self.ex,
                    &self.ey,
                    &self.ez,
                    &self.hx,
                    &self.hy,
                    &self.hz,
                    t_e,
                    t_h,
                );
            }
            if self.step_index % 256 == 0 && !self.fields_finite() {
                return Err(FdtdError::Unstable {
                    step: self.step_index,
                });
            }
        }
        if !self.fields_finite() {
            return Err(FdtdError::Unstable {
                step: self.step_index,
            });
        }
        Ok(())
    }
}
