// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/ekf.hpp"

namespace csiloc::ekf {

namespace {

Eigen::Matrix4d transition(double dt)
{
    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(0, 2) = dt;
    f(1, 3) = dt;
    return f;
}

// Piecewise-constant white-acceleration form, scaled by sigma_v^2 per axis.
Eigen::Matrix4d process_noise(const EkfParams &p)
{
    const double dt = p.dt_s;
    const double s2 = p.sigma_v_ms * p.sigma_v_ms;
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    const double q_pp = 0.25 * dt * dt * dt * dt * s2;
    const double q_pv = 0.5 * dt * dt * dt * s2;
    const double q_vv = dt * dt * s2;
    for (int axis = 0; axis < 2; ++axis) {
        q(axis, axis) = q_pp;
        q(axis, axis + 2) = q_pv;
        q(axis + 2, axis) = q_pv;
        q(axis + 2, axis + 2) = q_vv;
    }
    return q;
}

void symmetrize(Eigen::Matrix4d &p) { p = 0.5 * (p + p.transpose()).eval(); }

} // namespace

void ekf_predict(EkfState &state, const EkfParams &params)
{
    const Eigen::Matrix4d f = transition(params.dt_s);
    state.x = f * state.x;
    state.P = f * state.P * f.transpose() + process_noise(params);
    symmetrize(state.P);
}

void ekf_update(EkfState &state, const std::vector<RangeBearing> &measurements,
                const EkfParams &params)
{
    // Collect usable rows first; gNBs coincident with the state are skipped.
    std::vector<const RangeBearing *> usable;
    for (const auto &m : measurements) {
        const Vec2 d = Vec2(state.x[0], state.x[1]) - m.gnb_pos;
        if (d.norm() > 1e-9)
            usable.push_back(&m);
    }
    if (usable.empty())
        return;

    const int rows = 2 * static_cast<int>(usable.size());
    Eigen::MatrixXd h_jac = Eigen::MatrixXd::Zero(rows, 4);
    Eigen::VectorXd innov(rows);
    Eigen::MatrixXd r_cov = Eigen::MatrixXd::Zero(rows, rows);
    const double sigma_range = params.sigma_tof_s * kSpeedOfLight;

    for (size_t i = 0; i < usable.size(); ++i) {
        const auto &m = *usable[i];
        const Vec2 d = Vec2(state.x[0], state.x[1]) - m.gnb_pos;
        const double rho = d.norm();
        const int r0 = 2 * static_cast<int>(i);

        innov[r0] = m.range_m - rho;
        innov[r0 + 1] = wrap_pi(m.azimuth_rad - std::atan2(d.y(), d.x()));

        h_jac(r0, 0) = d.x() / rho;
        h_jac(r0, 1) = d.y() / rho;
        h_jac(r0 + 1, 0) = -d.y() / (rho * rho);
        h_jac(r0 + 1, 1) = d.x() / (rho * rho);

        r_cov(r0, r0) = sigma_range * sigma_range;
        r_cov(r0 + 1, r0 + 1) = params.sigma_aoa_rad * params.sigma_aoa_rad;
    }

    const Eigen::MatrixXd s = h_jac * state.P * h_jac.transpose() + r_cov;
    const Eigen::MatrixXd k = state.P * h_jac.transpose() * s.inverse();
    state.x += k * innov;
    state.P = (Eigen::Matrix4d::Identity() - k * h_jac) * state.P;
    symmetrize(state.P);
}

std::vector<EkfEstimate> run_ekf_track(const std::vector<TrackStep> &steps,
                                       const Vec2 &init_pos, const Vec2 &init_vel,
                                       const EkfParams &params)
{
    EkfState state;
    state.x << init_pos.x(), init_pos.y(), init_vel.x(), init_vel.y();
    state.P = Eigen::Matrix4d::Zero(); // perfect-truth initialization

    std::vector<EkfEstimate> out;
    out.reserve(steps.size());
    bool had_update = false;
    for (const auto &step : steps) {
        ekf_predict(state, params);
        if (!step.measurements.empty()) {
            ekf_update(state, step.measurements, params);
            had_update = true;
        }
        EkfEstimate est;
        est.position = Vec2(state.x[0], state.x[1]);
        est.velocity = Vec2(state.x[2], state.x[3]);
        est.evaluated = had_update;
        out.push_back(est);
    }
    return out;
}

} // namespace csiloc::ekf
