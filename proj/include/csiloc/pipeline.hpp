// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// End-to-end pipeline stages behind the CLI subcommands: simulate,
// feature extraction, training, evaluation, the EKF benchmark and
// transfer adaptation.

#pragma once

#include "csiloc/ekf.hpp"
#include "csiloc/io.hpp"

#include <string>

namespace csiloc::pipeline {

struct SimulateConfig {
    int n_tracks = 40;
    int samples_per_track = 630;
    uint64_t seed = 1;
    int max_bounces = 2;
    double reflection_loss_db = 6.0;
    double threshold_db = 160.0;
    double tx_power_dbm = 30.0;
    int max_paths = 5;
    double ue_height_m = 1.5;
    channel::OfdmConfig ofdm;
    mobility::KinematicsParams kinematics;
    int workers = 0; // 0: CSILOC_WORKERS env var, else hardware concurrency
    uint64_t config_hash = 0;
};

// Tracks + per-sample channel measurements, split 80/10/10 by whole tracks.
io::Dataset simulate(const scene::SceneMap &scene, const SimulateConfig &cfg);

struct FeatureConfig {
    features::FeatureSpec spec; // layout fields are filled from the dataset
    bool uncertainty = false;
    features::UncertaintyConfig unc;
    double label_noise_std = 0.0; // training labels only
    uint64_t seed = 1;
    uint64_t config_hash = 0;
};

io::Dataset extract(const io::Dataset &csi, const FeatureConfig &cfg);

struct TrainConfig {
    std::string model = "snapshot"; // "snapshot" | "sequence"
    int window = 50;
    int train_stride = 5; // sequence training-window stride
    uint64_t seed = 1;
    nn::TrainSchedule schedule;
    double label_scale = 300.0;
    double speed_scale = 1.0;
    double pos_weight = 0.8; // sequence loss weights
    double speed_weight = 0.1;
    double heading_weight = 0.1;
    double data_fraction = 1.0; // fraction of training samples/windows used
    uint64_t config_hash = 0;
};

io::ModelBundle train(const io::Dataset &feats, const TrainConfig &cfg);

struct EvalConfig {
    mobility::Split split = mobility::Split::Test;
    bool force = false; // skip the lineage hash check
    std::string label;
    uint64_t config_hash = 0;
};

eval::ErrorReport evaluate(io::ModelBundle &model, const io::Dataset &feats,
                           const EvalConfig &cfg);

struct EkfRunConfig {
    ekf::EkfParams params;
    bool uncertainty = true;
    features::UncertaintyConfig unc;
    uint64_t seed = 1; // must match the feature seed for measurement parity
    mobility::Split split = mobility::Split::Test;
    std::string label = "ekf";
    uint64_t config_hash = 0;
};

eval::ErrorReport run_ekf(const io::Dataset &csi, const EkfRunConfig &cfg);

struct TransferConfig {
    posmodels::TransferPlan plan;
    TrainConfig train;
};

// Adapts a source model to a new feature dataset with most layers frozen.
io::ModelBundle transfer(io::ModelBundle &source, const io::Dataset &feats,
                         const TransferConfig &cfg);

// Baseline: constant prediction at the training-split centroid.
eval::ErrorReport centroid_baseline(const io::Dataset &feats, mobility::Split split,
                                    const std::string &label);

int worker_count(int requested);

} // namespace csiloc::pipeline
