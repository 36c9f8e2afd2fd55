use serde::{Deserialize, Serialize};

use crate::geometry::LaneAssignConfig;
use crate::scene::Size3;

/// Detector thresholds. Speeds in m/s, distances in meters, angles in
/// degrees. Every field may be omitted from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerConfig {
    pub window_frames: usize,
    pub stride: usize,
    pub v_stationary: f64,
    pub v_moving: f64,
    pub dv_accel: f64,
    pub dv_decel: f64,
    pub turn_min: f64,
    pub turn_max: f64,
    pub uturn_min: f64,
    /// Net displacement a turn must cover.
    pub turn_min_displacement: f64,
    pub lc_heading_max: f64,
    pub follow_gap: [f64; 2],
    pub follow_dv: f64,
    pub follow_gap_std: f64,
    /// Lane-chain hops allowed between follower and leader lanes.
    pub follow_max_hops: usize,
    pub adjacent_lateral: [f64; 2],
    pub stationary_gap_long: f64,
    pub stationary_gap_lat: f64,
    /// |y| bound for the in-front/behind relations.
    pub stationary_front_lateral: f64,
    /// |x| bound for the left/right relations.
    pub stationary_side_long: f64,
    /// Perpendicular distance within which a third agent blocks a relation.
    pub between_tolerance: f64,
    pub moving_heading_max: f64,
    pub moving_long_max: f64,
    pub ped_stand: f64,
    pub ped_run: f64,
    /// Consecutive samples at or above `ped_run` needed for running.
    pub ped_run_frames: usize,
    pub pair_heading_alongside: f64,
    pub pair_heading_opposite: f64,
    pub pair_dist: f64,
    pub wait_ped_lookahead: f64,
    pub lane_width: f64,
    /// Consecutive samples needed for reversing.
    pub reverse_frames: usize,
    pub ego_size: Size3,
    pub lane_assign: LaneAssignConfig,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            window_frames: 6,
            stride: 1,
            v_stationary: 0.5,
            v_moving: 1.0,
            dv_accel: 3.0,
            dv_decel: -3.0,
            turn_min: 60.0,
            turn_max: 135.0,
            uturn_min: 150.0,
            turn_min_displacement: 2.0,
            lc_heading_max: 30.0,
            follow_gap: [2.0, 25.0],
            follow_dv: 2.0,
            follow_gap_std: 2.0,
            follow_max_hops: 2,
            adjacent_lateral: [2.0, 6.0],
            stationary_gap_long: 15.0,
            stationary_gap_lat: 5.0,
            stationary_front_lateral: 2.0,
            stationary_side_long: 3.0,
            between_tolerance: 1.0,
            moving_heading_max: 20.0,
            moving_long_max: 5.0,
            ped_stand: 0.3,
            ped_run: 2.5,
            ped_run_frames: 3,
            pair_heading_alongside: 30.0,
            pair_heading_opposite: 150.0,
            pair_dist: 3.0,
            wait_ped_lookahead: 15.0,
            lane_width: 3.5,
            reverse_frames: 3,
            ego_size: Size3 { length: 4.08, width: 1.73, height: 1.56 },
            lane_assign: LaneAssignConfig::default(),
        }
    }
}

impl MinerConfig {
    /// Human-readable invariant violations; empty means usable.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.window_frames < 2 {
            out.push("window_frames must be at least 2".into());
        }
        if self.stride == 0 {
            out.push("stride must be at least 1".into());
        }
        if !(self.v_stationary < self.v_moving) {
            out.push("v_stationary must be below v_moving".into());
        }
        if !(self.turn_min < self.turn_max && self.turn_max < self.uturn_min + 45.0) {
            out.push("need turn_min < turn_max < uturn_min + 45".into());
        }
        if !(self.dv_accel > 0.0 && self.dv_decel < 0.0) {
            out.push("dv_accel must be positive and dv_decel negative".into());
        }
        let positive = [
            ("follow_gap[1]", self.follow_gap[1]),
            ("follow_dv", self.follow_dv),
            ("follow_gap_std", self.follow_gap_std),
            ("adjacent_lateral[1]", self.adjacent_lateral[1]),
            ("stationary_gap_long", self.stationary_gap_long),
            ("stationary_gap_lat", self.stationary_gap_lat),
            ("stationary_front_lateral", self.stationary_front_lateral),
            ("stationary_side_long", self.stationary_side_long),
            ("between_tolerance", self.between_tolerance),
            ("moving_long_max", self.moving_long_max),
            ("pair_dist", self.pair_dist),
            ("wait_ped_lookahead", self.wait_ped_lookahead),
            ("lane_width", self.lane_width),
            ("turn_min_displacement", self.turn_min_displacement),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                out.push(format!("{name} must be > 0"));
            }
        }
        if self.follow_gap[0] > self.follow_gap[1] || self.adjacent_lateral[0] > self.adjacent_lateral[1] {
            out.push("range bounds must be ordered".into());
        }
        if self.ped_stand >= self.ped_run {
            out.push("ped_stand must be below ped_run".into());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_partial_files_fill_in() {
        assert!(MinerConfig::default().validate().is_empty());
        let cfg: MinerConfig = serde_json::from_str(r#"{"window_frames": 8}"#).unwrap();
        assert_eq!(cfg.window_frames, 8);
        assert_eq!(cfg.v_moving, 1.0);
    }

    #[test]
    fn inverted_speeds_rejected() {
        let cfg = MinerConfig { v_stationary: 2.0, ..Default::default() };
        assert!(!cfg.validate().is_empty());
    }
}
