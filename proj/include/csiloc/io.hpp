// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Artifact persistence: line-delimited dataset records with a binary
// sidecar for bulk payloads, the versioned model container, and reports.

#pragma once

#include "csiloc/channel.hpp"
#include "csiloc/eval.hpp"
#include "csiloc/features.hpp"
#include "csiloc/mobility.hpp"
#include "csiloc/nn.hpp"
#include "csiloc/posmodels.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace csiloc::io {

// One dataset row. CSI datasets carry the full measurement (grid via the
// binary sidecar, paths inline); feature datasets carry the extracted
// feature vector in the sidecar instead.
struct SampleRecord {
    int track = 0;
    int index = 0;
    double time_s = 0.0;
    Vec2 position{0.0, 0.0};
    double speed_ms = 0.0;
    Vec2 heading{1.0, 0.0};
    mobility::Split split = mobility::Split::Train;
    std::vector<uint8_t> los;  // per gNB
    std::vector<uint8_t> meas; // per gNB: has any path above threshold

    channel::SampleMeasurement measurement; // csi kind
    std::vector<double> features;           // features kind
};

struct Dataset {
    std::string kind = "csi"; // "csi" | "features"
    uint64_t scene_hash = 0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    channel::OfdmConfig ofdm;
    int n_gnbs = 0;
    int n_beams = 0;
    std::vector<Vec3> gnb_positions;

    // features kind only
    std::optional<features::FeatureSpec> feature_spec;
    features::NormStats norm;
    double label_noise_std = 0.0;

    std::vector<SampleRecord> samples; // ordered by (track, time)

    std::vector<const SampleRecord *> split_samples(mobility::Split s) const;
};

// Writes <stem>.jsonl (header line + one record line per sample) and
// <stem>.bin (little-endian float64 payload blocks). Round-trips losslessly.
void save_dataset(const Dataset &ds, const std::string &stem);
Dataset load_dataset(const std::string &stem);

// Trained model plus everything needed to run it: feature pipeline spec,
// normalization constants, label scaling and the training history.
struct ModelBundle {
    std::string kind = "snapshot"; // "snapshot" | "sequence"
    int input_dim = 0;
    int window = 50; // sequence models
    posmodels::SequenceWidths widths;

    features::FeatureSpec feature_spec;
    features::NormStats norm;
    double label_scale = 300.0;
    double speed_scale = 1.0;
    uint64_t config_hash = 0;         // training config
    uint64_t feature_config_hash = 0; // lineage: feature dataset that trained it
    nn::TrainHistory history;

    std::optional<posmodels::SnapshotModel> snapshot;
    std::optional<posmodels::SequenceModel> sequence;

    std::vector<nn::ParamBlock> params();
};

// Versioned binary container: magic "CSLM", u32 version, u64 manifest
// length, JSON manifest (architecture, feature spec, norm stats, history,
// block table), then raw little-endian float64 parameter blocks in manifest
// order.
void save_model(ModelBundle &bundle, const std::string &path);
ModelBundle load_model(const std::string &path);

// Structured per-run report (aggregates + ECDF + per-sample table).
void save_report(const eval::ErrorReport &report, const std::string &path);
eval::ErrorReport load_report(const std::string &path);

// Flat comparison table (TSV) across several saved reports.
void write_report_table(const std::vector<std::string> &report_paths, const std::string &out);

uint64_t config_hash_of(const std::string &canonical_json);

} // namespace csiloc::io
