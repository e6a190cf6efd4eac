use serde::{Deserialize, Serialize};

use super::radio::{db_to_linear, linear_to_db, path_loss, wrap_degrees, AntennaPattern};
use super::{CellState, NetworkConfig};
use crate::num::Scalar;

/// Second-best server within this margin of the serving cell counts as overlap, dB.
pub const OVERLAP_MARGIN_DB: f64 = 6.0;
/// SINR range mapped affinely onto [0, 1], dB.
pub const SINR_FLOOR_DB: f64 = -5.0;
pub const SINR_CEIL_DB: f64 = 25.0;
/// Attach quota per cell, as a multiple of the even share `num_ues / cells`.
pub const CAPACITY_QUOTA_FACTOR: f64 = 1.5;

/// Normalized per-cell KPIs. Coverage, capacity and quality are
/// deficiencies (0 is healthy); `sinr` is good-is-high.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KpiVector<T = f64> {
    pub cov: T,
    pub cap: T,
    pub qual: T,
    pub sinr: T,
    pub ta_os: T,
    pub rrc_cong_rate: T,
}

impl<T: Scalar> KpiVector<T> {
    /// Reported by a cell with no attached UEs.
    pub fn idle() -> Self {
        KpiVector {
            cov: T::zero(),
            cap: T::zero(),
            qual: T::zero(),
            sinr: T::one(),
            ta_os: T::zero(),
            rrc_cong_rate: T::zero(),
        }
    }

    pub fn fields(&self) -> [T; 6] {
        [self.cov, self.cap, self.qual, self.sinr, self.ta_os, self.rrc_cong_rate]
    }

    pub fn is_normalized(&self) -> bool {
        self.fields().iter().all(|v| *v >= T::zero() && *v <= T::one())
    }
}

/// `-ln(1 + cov² + cap² + qual²)`, in `[-ln 4, 0]` for normalized KPIs.
pub fn reward<T: Scalar>(kpi: &KpiVector<T>) -> T {
    -(T::one() + kpi.cov * kpi.cov + kpi.cap * kpi.cap + kpi.qual * kpi.qual).ln()
}

struct Accum<T> {
    attached: usize,
    uncovered: usize,
    overlapping: usize,
    overshooting: usize,
    sinr_sum: T,
}

/// Per-cell KPIs for UEs at `ues` served by `cells`.
///
/// Each UE attaches to the strongest cell by RSRP. All other cells
/// interfere at full load.
pub fn compute_kpis<T: Scalar>(
    cfg: &NetworkConfig,
    pattern: &AntennaPattern,
    cells: &[CellState<T>],
    ues: &[[T; 2]],
) -> Vec<KpiVector<T>> {
    let mut acc: Vec<Accum<T>> = (0..cells.len())
        .map(|_| Accum { attached: 0, uncovered: 0, overlapping: 0, overshooting: 0, sinr_sum: T::zero() })
        .collect();
    let height = T::of(cfg.antenna_height - cfg.ue_height);
    let noise = db_to_linear(T::of(cfg.noise_dbm));
    let tx = T::of(cfg.tx_power_dbm);
    let planned_radius = T::of(cfg.inter_site_distance / 2.0);
    let mut rsrp = vec![T::zero(); cells.len()];

    for ue in ues {
        for (c, cell) in cells.iter().enumerate() {
            let dx = ue[0] - cell.position[0];
            let dy = ue[1] - cell.position[1];
            let d = (dx * dx + dy * dy).sqrt();
            let bearing = dy.atan2(dx).to_degrees();
            let offset = wrap_degrees(bearing - cell.azimuth);
            let elevation = height.atan2(d).to_degrees();
            rsrp[c] = tx - path_loss(d, cfg) + pattern.gain(offset, elevation, cell.tilt);
        }
        let mut best = 0;
        for c in 1..cells.len() {
            if rsrp[c] > rsrp[best] {
                best = c;
            }
        }
        let second = (0..cells.len())
            .filter(|&c| c != best)
            .map(|c| rsrp[c])
            .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.max(v))));
        let interference: T = (0..cells.len()).filter(|&c| c != best).map(|c| db_to_linear(rsrp[c])).sum();
        let sinr = db_to_linear(rsrp[best]) / (interference + noise);

        let cell = &cells[best];
        let a = &mut acc[best];
        a.attached += 1;
        if rsrp[best] < T::of(cfg.rsrp_coverage_threshold) {
            a.uncovered += 1;
        }
        if second.is_some_and(|s| rsrp[best] - s <= T::of(OVERLAP_MARGIN_DB)) {
            a.overlapping += 1;
        }
        let dx = ue[0] - cell.position[0];
        let dy = ue[1] - cell.position[1];
        if (dx * dx + dy * dy).sqrt() > planned_radius {
            a.overshooting += 1;
        }
        a.sinr_sum += sinr;
    }

    let quota = T::of(CAPACITY_QUOTA_FACTOR * cfg.num_ues as f64 / cells.len() as f64);
    acc.into_iter()
        .map(|a| {
            if a.attached == 0 {
                return KpiVector::idle();
            }
            let n = T::of(a.attached as f64);
            let frac = |k: usize| T::of(k as f64) / n;
            let rrc = (n / quota).clamp_unit();
            // mean of the linear ratio, then dB
            let mean_sinr = linear_to_db(a.sinr_sum / n);
            let sinr = ((mean_sinr - T::of(SINR_FLOOR_DB)) / T::of(SINR_CEIL_DB - SINR_FLOOR_DB)).clamp_unit();
            let ta_os = frac(a.overshooting);
            KpiVector {
                cov: frac(a.uncovered),
                cap: rrc,
                qual: (frac(a.overlapping) + ta_os) / T::of(2.0),
                sinr,
                ta_os,
                rrc_cong_rate: rrc,
            }
        })
        .collect()
}
