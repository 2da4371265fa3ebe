//! Cell grid geometry: base station placement, user drops, neighbor sets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and propagation configuration, consumed from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub grid_side: usize,
    pub users_per_cell: usize,
    pub inter_site_distance_m: f64,
    pub neighbor_count: usize,
    pub d_min_m: f64,
    pub shadowing_sigma_db: f64,
    pub doppler_hz: f64,
    pub slot_duration_s: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            grid_side: 3,
            users_per_cell: 2,
            inter_site_distance_m: 500.0,
            neighbor_count: 4,
            d_min_m: 10.0,
            shadowing_sigma_db: 8.0,
            doppler_hz: 10.0,
            slot_duration_s: 0.02,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 1 {
            return Err(Error::config("grid_side", "must be >= 1"));
        }
        if self.users_per_cell < 1 {
            return Err(Error::config("users_per_cell", "must be >= 1"));
        }
        if !self.inter_site_distance_m.is_finite() || self.inter_site_distance_m <= 0.0 {
            return Err(Error::config("inter_site_distance_m", "must be > 0"));
        }
        if !self.d_min_m.is_finite()
            || self.d_min_m < 0.0
            || 2.0 * self.d_min_m >= self.inter_site_distance_m
        {
            return Err(Error::config(
                "d_min_m",
                "must satisfy 0 <= 2*d_min < inter_site_distance",
            ));
        }
        if !self.shadowing_sigma_db.is_finite() || self.shadowing_sigma_db < 0.0 {
            return Err(Error::config("shadowing_sigma_db", "must be >= 0"));
        }
        if !self.doppler_hz.is_finite() || self.doppler_hz < 0.0 {
            return Err(Error::config("doppler_hz", "must be >= 0"));
        }
        if !self.slot_duration_s.is_finite() || self.slot_duration_s <= 0.0 {
            return Err(Error::config("slot_duration_s", "must be > 0"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.grid_side * self.grid_side
    }
}

/// A square grid of cells with one base station at each cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub n_cells: usize,
    pub grid_side: usize,
    /// Users served by each cell (k_i; uniform here, but federation
    /// weights are derived from this per-cell count).
    pub users_per_cell: Vec<usize>,
    pub inter_site_distance: f64,
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<Vec<[f64; 2]>>,
    /// U_n: neighbor cells of each BS, ascending by BS-to-BS distance,
    /// ties broken by ascending cell index. Excludes the cell itself.
    pub neighbor_sets: Vec<Vec<usize>>,
}

impl Topology {
    /// Lays out the grid and draws the initial user positions.
    pub fn build(cfg: &TopologyConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let side = cfg.grid_side;
        let n_cells = side * side;
        let isd = cfg.inter_site_distance_m;

        let bs_positions: Vec<[f64; 2]> = (0..n_cells)
            .map(|n| {
                let row = n / side;
                let col = n % side;
                [(col as f64 + 0.5) * isd, (row as f64 + 0.5) * isd]
            })
            .collect();

        let neighbor_sets = build_neighbor_sets(&bs_positions, cfg.neighbor_count);

        let mut topo = Topology {
            n_cells,
            grid_side: side,
            users_per_cell: vec![cfg.users_per_cell; n_cells],
            inter_site_distance: isd,
            bs_positions,
            user_positions: vec![Vec::new(); n_cells],
            neighbor_sets,
        };
        topo.resample_users(cfg.d_min_m, rng);
        Ok(topo)
    }

    /// Redraws every user position uniformly within its serving cell's
    /// square, excluding a disc of radius `d_min` around the BS.
    pub fn resample_users(&mut self, d_min: f64, rng: &mut ChaCha8Rng) {
        let half = self.inter_site_distance / 2.0;
        for n in 0..self.n_cells {
            let [cx, cy] = self.bs_positions[n];
            self.user_positions[n] = (0..self.users_per_cell[n])
                .map(|_| loop {
                    let x = rng.random_range(cx - half..cx + half);
                    let y = rng.random_range(cy - half..cy + half);
                    if (x - cx).hypot(y - cy) >= d_min {
                        break [x, y];
                    }
                })
                .collect();
        }
    }

    pub fn total_users(&self) -> usize {
        self.users_per_cell.iter().sum()
    }

    /// Distance from BS `n` to user `k` of cell `j`, in meters.
    pub fn bs_user_distance(&self, n: usize, j: usize, k: usize) -> f64 {
        let [bx, by] = self.bs_positions[n];
        let [ux, uy] = self.user_positions[j][k];
        (bx - ux).hypot(by - uy)
    }
}

fn build_neighbor_sets(bs: &[[f64; 2]], neighbor_count: usize) -> Vec<Vec<usize>> {
    let n_cells = bs.len();
    let c = neighbor_count.min(n_cells.saturating_sub(1));
    (0..n_cells)
        .map(|n| {
            let mut others: Vec<(f64, usize)> = (0..n_cells)
                .filter(|&m| m != n)
                .map(|m| {
                    let d = (bs[n][0] - bs[m][0]).hypot(bs[n][1] - bs[m][1]);
                    (d, m)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(c).map(|(_, m)| m).collect()
        })
        .collect()
}
