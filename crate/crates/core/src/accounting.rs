//! Simulated round time and communication volume.
//!
//! Nothing is transmitted; every exchange is accounted. A client's round time
//! is its local compute (`epochs × epoch_time_s`) plus one latency charge for
//! the broadcast/upload exchange. The round finishes with its slowest
//! selected client.

use serde::{Deserialize, Serialize};

use crate::device::DeviceProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommMode {
    /// `(|S_r| + 1) × |w|`: one upload per selected client plus one broadcast.
    UplinkPlusBroadcast,
    /// `2 × |S_r| × |w|`: a download and an upload per selected client.
    #[default]
    Symmetric,
}

/// Per-round transfer volume in the unit of `model_size_mb`.
pub fn comm_cost_round(n_selected: usize, model_size_mb: f64, mode: CommMode) -> f64 {
    debug_assert!(n_selected >= 1);
    let n = n_selected as f64;
    match mode {
        CommMode::UplinkPlusBroadcast => (n + 1.0) * model_size_mb,
        CommMode::Symmetric => 2.0 * n * model_size_mb,
    }
}

/// Scales the latency term of the client time model. The default charges
/// exactly one round trip per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeModel {
    pub latency_exchanges: f64,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self { latency_exchanges: 1.0 }
    }
}

impl TimeModel {
    pub fn client_time(&self, profile: &DeviceProfile, epochs: u32) -> f64 {
        epochs as f64 * profile.epoch_time_s + self.latency_exchanges * profile.latency_ms / 1000.0
    }

    pub fn round_time<'a, I>(&self, selected: I) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a DeviceProfile, u32)>,
    {
        selected
            .into_iter()
            .map(|(p, e)| self.client_time(p, e))
            .reduce(f64::max)
            .ok_or_else(|| Error::Invalid("round time of an empty selection".into()))
    }
}

/// `epochs × epoch_time_s + latency_ms / 1000`, in seconds.
pub fn simulate_client_time(profile: &DeviceProfile, epochs: u32) -> f64 {
    TimeModel::default().client_time(profile, epochs)
}

/// Makespan of a selection: the slowest client's simulated time.
pub fn round_time<'a, I>(selected: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a DeviceProfile, u32)>,
{
    TimeModel::default().round_time(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn profile(id: usize, epoch_time_s: f64, latency_ms: f64) -> DeviceProfile {
        DeviceProfile {
            client_id: id,
            cpu_cores: 4,
            ram_gb: 8.0,
            epoch_time_s,
            latency_ms,
        }
    }

    #[test]
    fn client_time_examples() {
        assert_abs_diff_eq!(simulate_client_time(&profile(0, 2.0, 100.0), 2), 4.1, epsilon = 1e-12);
        assert_abs_diff_eq!(simulate_client_time(&profile(0, 3.0, 200.0), 2), 6.2, epsilon = 1e-12);
        assert_abs_diff_eq!(simulate_client_time(&profile(0, 1.75, 1e-9), 1), 1.75, epsilon = 1e-9);
        let p = profile(0, 2.5, 80.0);
        let slope = simulate_client_time(&p, 5) - simulate_client_time(&p, 4);
        assert_abs_diff_eq!(slope, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn round_time_is_the_straggler() {
        let a = profile(0, 2.0, 100.0);
        let b = profile(1, 3.0, 200.0);
        assert_abs_diff_eq!(round_time([(&a, 2)]).unwrap(), 4.1, epsilon = 1e-12);
        assert_abs_diff_eq!(round_time([(&a, 2), (&b, 2)]).unwrap(), 6.2, epsilon = 1e-12);
        assert!(round_time([(&a, 2)]).unwrap() < round_time([(&a, 2), (&b, 2)]).unwrap());
        assert!(round_time(std::iter::empty()).is_err());
    }

    #[test]
    fn latency_multiplier_scales_only_the_exchange() {
        let model = TimeModel { latency_exchanges: 2.0 };
        assert_abs_diff_eq!(model.client_time(&profile(0, 2.0, 100.0), 2), 4.2, epsilon = 1e-12);
    }

    #[test]
    fn comm_cost_examples() {
        assert_eq!(comm_cost_round(3, 1.0, CommMode::UplinkPlusBroadcast), 4.0);
        for size in [0.01, 0.04762, 1.0, 37.5] {
            let ratio = comm_cost_round(3, size, CommMode::Symmetric) / comm_cost_round(5, size, CommMode::Symmetric);
            assert_abs_diff_eq!(ratio, 0.6, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn comm_mode_ratios(n in 1usize..50, k in 1usize..50, size in 0.001f64..100.0) {
            let sym = comm_cost_round(n, size, CommMode::Symmetric) / comm_cost_round(k, size, CommMode::Symmetric);
            prop_assert!((sym - n as f64 / k as f64).abs() < 1e-12 * sym.max(1.0));
            let ub = comm_cost_round(n, size, CommMode::UplinkPlusBroadcast) / comm_cost_round(k, size, CommMode::UplinkPlusBroadcast);
            prop_assert!((ub - (n + 1) as f64 / (k + 1) as f64).abs() < 1e-12 * ub.max(1.0));
        }

        #[test]
        fn cumulative_comm_has_no_drift(n in 1usize..20, rounds in 1usize..200, size in 0.001f64..10.0) {
            let per_round = comm_cost_round(n, size, CommMode::Symmetric);
            let mut total = 0.0;
            for _ in 0..rounds {
                total += per_round;
            }
            prop_assert!((total - rounds as f64 * per_round).abs() <= 1e-9 * total);
        }

        #[test]
        fn adding_a_client_never_shortens_the_round(
            rows in prop::collection::vec((0.1f64..10.0, 1.0f64..400.0, 1u32..6), 1..8),
            extra in (0.1f64..10.0, 1.0f64..400.0, 1u32..6),
        ) {
            let fleet: Vec<_> = rows.iter().enumerate().map(|(i, &(t, l, _))| profile(i, t, l)).collect();
            let before = round_time(fleet.iter().zip(rows.iter().map(|r| r.2))).unwrap();
            let newcomer = profile(99, extra.0, extra.1);
            let after = round_time(fleet.iter().zip(rows.iter().map(|r| r.2)).chain([(&newcomer, extra.2)])).unwrap();
            prop_assert!(after >= before);
        }
    }
}
