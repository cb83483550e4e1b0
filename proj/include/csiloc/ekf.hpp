// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Extended Kalman filter benchmark: constant-velocity state, range+bearing
// updates from LoS gNBs, prediction-only through NLoS stretches.

#pragma once

#include "csiloc/common.hpp"
#include "csiloc/geometry.hpp"

#include <Eigen/Dense>
#include <vector>

namespace csiloc::ekf {

// State: (x, y, vx, vy); P kept symmetric by re-symmetrization each step.
struct EkfState {
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
};

struct EkfParams {
    double sigma_tof_s = 50e-9;
    double sigma_aoa_rad = deg2rad(15.0);
    double sigma_v_ms = 8.0; // velocity noise std in the process covariance
    double dt_s = 0.1;
};

// Range + azimuth measured at one gNB.
struct RangeBearing {
    Vec2 gnb_pos{0.0, 0.0};
    double range_m = 0.0;
    double azimuth_rad = 0.0;
};

// x <- F x, P <- F P F^T + Q with the constant-velocity transition and the
// white-acceleration process covariance scaled by sigma_v^2.
void ekf_predict(EkfState &state, const EkfParams &params);

// Standard EKF update over stacked range/azimuth rows with the analytic
// Jacobian; azimuth innovations wrapped to (-pi, pi]. Measurements from a
// gNB coincident with the state position are skipped (singular Jacobian).
void ekf_update(EkfState &state, const std::vector<RangeBearing> &measurements,
                const EkfParams &params);

struct TrackStep {
    std::vector<RangeBearing> measurements; // LoS gNBs only; may be empty
};

struct EkfEstimate {
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
    bool evaluated = false; // false until the first LoS update has happened
};

// Runs the filter over an ordered track: perfect-truth initialization,
// predict every step, update only when LoS measurements exist. Samples
// before the first update are excluded from evaluation.
std::vector<EkfEstimate> run_ekf_track(const std::vector<TrackStep> &steps,
                                       const Vec2 &init_pos, const Vec2 &init_vel,
                                       const EkfParams &params);

} // namespace csiloc::ekf
