//! NanoLume: simulation and analysis toolkit for a nanowire-coupled
//! single-photon emitter.
//!
//! The crate models the full measurement chain of an NV-center-in-nanowire
//! single photon source:
//!
//! * [`emitter`] — closed-form photophysics of the three-level
//!   (ground / excited / metastable-shelf) system: steady states, g²(τ),
//!   antibunching decay rates, the saturation law.
//! * [`stream`] — exact kinetic Monte Carlo generation of photon emission
//!   time tags, plus the detection chain (efficiency, background, dark
//!   counts, timing jitter).
//! * [`hbt`] — the Hanbury Brown–Twiss measurement chain: beamsplitter,
//!   detector dead time, cross-correlation histogramming, g² normalization.
//! * [`fit`] — Levenberg–Marquardt least squares and the domain fits
//!   (g² with background dilution, saturation L-L curve, zero-power
//!   lifetime extrapolation).
//! * [`modes`] — analytic step-index cylindrical waveguide solver for the
//!   fundamental HE₁₁ mode, with an internal Bessel kernel.
//! * [`fdtd`] — compact 3D Yee-grid FDTD engine with CPML absorbers, DFT
//!   monitors, far-field projection, Purcell and collection-efficiency
//!   analysis of the nanowire antenna.
//! * [`io`] — time-tag and histogram file formats, CSV/JSON reports,
//!   field snapshots.
//!
//! Units are ns for time (rates in 1/ns), nm for length and µW for optical
//! power throughout. All seeded pipelines are deterministic and
//! bit-identical across worker-thread counts; build with
//! `--no-default-features` for the rayon-free sequential core.

pub mod emitter;
pub mod fdtd;
pub mod fit;
pub mod hbt;
pub mod io;
pub mod modes;
pub(crate) mod par;
pub mod rng;
pub mod stream;
