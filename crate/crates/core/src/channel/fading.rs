//! Large-scale gains and temporally correlated Rayleigh fading.
//!
//! Small-scale fading follows a first-order complex Gauss-Markov process
//! with slot-to-slot correlation rho = J0(2*pi*f_d*T_s); large-scale gains
//! combine log-distance path loss with log-normal shadowing.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::bessel::bessel_j0;
use super::topology::Topology;
use crate::error::{Error, Result};

/// Path loss in dB for the macro-cell model: 120.9 + 37.6 log10(d/1km).
pub fn path_loss_db(distance_m: f64) -> f64 {
    120.9 + 37.6 * (distance_m / 1000.0).log10()
}

/// Slot-to-slot fading correlation for Doppler `f_d` and slot length `T_s`.
pub fn jakes_rho(f_d_hz: f64, t_s_s: f64) -> Result<f64> {
    if !f_d_hz.is_finite() || !t_s_s.is_finite() {
        return Err(Error::NonFinite { op: "jakes_rho" });
    }
    if f_d_hz < 0.0 {
        return Err(Error::domain("jakes_rho", "doppler frequency must be >= 0"));
    }
    if t_s_s <= 0.0 {
        return Err(Error::domain("jakes_rho", "slot duration must be > 0"));
    }
    bessel_j0(2.0 * std::f64::consts::PI * f_d_hz * t_s_s)
}

/// Per-link gain tensor indexed `[tx_bs][cell][user]`, linear scale.
pub type GainTensor = Vec<Vec<Vec<f64>>>;

/// Small-scale fading plus large-scale gains for every BS-to-user link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// Small-scale fading, `h[n][j][k]` from BS n to user k of cell j.
    pub h: Vec<Vec<Vec<Complex64>>>,
    /// Large-scale gain (path loss + shadowing), linear, same indexing.
    pub alpha: GainTensor,
    /// Temporal correlation of consecutive fading samples.
    pub rho: f64,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One circularly symmetric complex Gaussian sample with unit variance.
fn unit_cn(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(
        standard_normal(rng) * std::f64::consts::FRAC_1_SQRT_2,
        standard_normal(rng) * std::f64::consts::FRAC_1_SQRT_2,
    )
}

/// Draws alpha[n][j][k] = 10^(-PL(d)/10) * 10^(X/10), X ~ N(0, sigma^2) dB.
pub fn large_scale_gains(
    topo: &Topology,
    shadowing_sigma_db: f64,
    d_min: f64,
    rng: &mut ChaCha8Rng,
) -> GainTensor {
    (0..topo.n_cells)
        .map(|n| {
            (0..topo.n_cells)
                .map(|j| {
                    (0..topo.users_per_cell[j])
                        .map(|k| {
                            let d = topo.bs_user_distance(n, j, k).max(d_min);
                            let shadow_db = standard_normal(rng) * shadowing_sigma_db;
                            10f64.powf((-path_loss_db(d) + shadow_db) / 10.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Draws i.i.d. unit-variance circularly symmetric fading for every link.
pub fn init_fading(topo: &Topology, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<Complex64>>> {
    (0..topo.n_cells)
        .map(|_| {
            (0..topo.n_cells)
                .map(|j| (0..topo.users_per_cell[j]).map(|_| unit_cn(rng)).collect())
                .collect()
        })
        .collect()
}

impl ChannelState {
    /// Advances every fading entry one slot:
    /// `h' = rho*h + sqrt(1-rho^2)*e`, leaving alpha untouched.
    pub fn step(&mut self, rng: &mut ChaCha8Rng) {
        debug_assert!(self.rho.abs() <= 1.0);
        let innovation_scale = (1.0 - self.rho * self.rho).max(0.0).sqrt();
        for per_cell in &mut self.h {
            for per_user in per_cell {
                for h in per_user {
                    *h = self.rho * *h + innovation_scale * unit_cn(rng);
                }
            }
        }
    }

    /// Effective link gains g = |h|^2 * alpha.
    pub fn gains(&self) -> GainTensor {
        self.h
            .iter()
            .zip(&self.alpha)
            .map(|(hn, an)| {
                hn.iter()
                    .zip(an)
                    .map(|(hj, aj)| hj.iter().zip(aj).map(|(h, a)| h.norm_sqr() * a).collect())
                    .collect()
            })
            .collect()
    }
}
