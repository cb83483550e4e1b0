// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Positioning architectures: the dense snapshot model, the hybrid
// dense+LSTM sequence model, prediction over tracks, and transfer
// adaptation with frozen layers.

#pragma once

#include "csiloc/geometry.hpp"
#include "csiloc/nn.hpp"

#include <memory>
#include <string>
#include <vector>

namespace csiloc::posmodels {

using nn::Matrix;

// 5 hidden GELU layers of uniform width feeding a 2-neuron linear output.
class SnapshotModel {
  public:
    SnapshotModel(int input_dim, int width = 512, int hidden_layers = 5);

    int input_dim() const { return input_dim_; }
    int width() const { return width_; }
    size_t param_count() const;

    void init_weights(uint64_t seed);
    std::vector<nn::ParamBlock> params();

    Matrix forward(const Matrix &x); // (input x B) -> (2 x B)
    void backward(const Matrix &dy);
    void zero_grad();

    std::vector<nn::Dense> &layers() { return layers_; }

  private:
    int input_dim_, width_;
    std::vector<nn::Dense> layers_;
};

struct SequenceWidths {
    std::vector<int> dense = {1024, 512, 512, 256, 256};
    int parallel_hidden = 0;    // 0: constructor search against count_target
    long long count_target = 0; // 0: derived from the published counts
    double count_tolerance = 0.05;
};

// Five per-timestep dense layers; an LSTM running in parallel with the 5th
// dense layer (fed by the 4th layer's output sequence); concatenation into a
// 5-neuron linear-activation LSTM returning sequences. Output rows:
// position (2, linear), speed (1, linear), heading (2, tanh applied on top).
class SequenceModel {
  public:
    explicit SequenceModel(int input_dim, SequenceWidths widths = {});

    int input_dim() const { return input_dim_; }
    int parallel_hidden() const { return parallel_hidden_; }
    size_t param_count() const;

    void init_weights(uint64_t seed);
    std::vector<nn::ParamBlock> params();

    // x: (input x T*B), timestep-major columns. Returns (5 x T*B).
    Matrix forward(const Matrix &x, int batch);
    void backward(const Matrix &dy, int batch);
    void zero_grad();

    std::vector<nn::Dense> &dense_layers() { return dense_; }
    nn::Lstm &parallel_lstm() { return *parallel_; }
    nn::Lstm &head_lstm() { return *head_; }

  private:
    int input_dim_ = 0;
    int parallel_hidden_ = 0;
    std::vector<nn::Dense> dense_;
    std::unique_ptr<nn::Lstm> parallel_;
    std::unique_ptr<nn::Lstm> head_;
    Matrix head_tanh_cache_;
};

SnapshotModel build_snapshot(int input_dim);
SequenceModel build_sequence(int input_dim, SequenceWidths widths = {});

// Expected trainable parameter counts (builders self-check against these).
long long snapshot_param_count(int input_dim, int width = 512, int hidden_layers = 5);
long long sequence_param_target(int input_dim);

// Output row layout of the sequence model and the matching loss weighting.
inline constexpr int kPosRow = 0;   // rows 0..1
inline constexpr int kSpeedRow = 2; // row 2
inline constexpr int kHeadRow = 3;  // rows 3..4
std::vector<nn::RowGroup> sequence_loss_groups(double pos_w = 0.8, double speed_w = 0.1,
                                               double heading_w = 0.1);

// Positions from normalized snapshot features, de-scaled by label_scale.
Matrix predict_positions(SnapshotModel &model, const Matrix &features, double label_scale);

struct SequencePrediction {
    Vec2 position{0.0, 0.0};
    double speed_ms = 0.0;
    Vec2 heading{0.0, 0.0}; // unit vector unless the raw head was zero
    bool padded = false;    // estimate came from a left-padded window
};

// Sliding-window inference over one track (stride 1, last-step output per
// window). Windows shorter than `window` are left-padded with the first
// sample and flagged. features: (input_dim x n_samples), time-ordered.
std::vector<SequencePrediction> predict_track(SequenceModel &model, const Matrix &features,
                                              int window, double label_scale,
                                              double speed_scale = 1.0);

// Transfer adaptation: only blocks whose names start with one of the
// trainable prefixes are updated; everything else stays bit-identical.
struct TransferPlan {
    std::vector<std::string> trainable_prefixes = {"dense1"};
    double data_fraction = 0.1;
};

// Marks blocks trainable/frozen in place according to the plan.
void apply_transfer_mask(std::vector<nn::ParamBlock> &blocks, const TransferPlan &plan);

} // namespace csiloc::posmodels
