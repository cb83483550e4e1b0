// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/posmodels.hpp"

#include <cmath>
#include <stdexcept>

namespace csiloc::posmodels {

using nn::Activation;

// ------------------------------------------------------- SnapshotModel ---

SnapshotModel::SnapshotModel(int input_dim, int width, int hidden_layers)
    : input_dim_(input_dim), width_(width)
{
    if (input_dim < 1 || width < 1 || hidden_layers < 1)
        throw ConfigError("snapshot model dims must be >= 1");
    int in = input_dim;
    for (int i = 0; i < hidden_layers; ++i) {
        layers_.emplace_back(in, width, Activation::Gelu);
        in = width;
    }
    layers_.emplace_back(in, 2, Activation::Linear);

    const long long expected = snapshot_param_count(input_dim, width, hidden_layers);
    if (static_cast<long long>(param_count()) != expected)
        throw std::logic_error("snapshot parameter count self-check failed");
}

size_t SnapshotModel::param_count() const
{
    size_t n = 0;
    for (const auto &l : layers_)
        n += l.param_count();
    return n;
}

void SnapshotModel::init_weights(uint64_t seed)
{
    std::mt19937_64 rng(seed);
    for (auto &l : layers_)
        l.init_weights(rng);
}

std::vector<nn::ParamBlock> SnapshotModel::params()
{
    std::vector<nn::ParamBlock> blocks;
    for (size_t i = 0; i < layers_.size(); ++i)
        for (auto &b : layers_[i].params("dense" + std::to_string(i + 1)))
            blocks.push_back(b);
    return blocks;
}

Matrix SnapshotModel::forward(const Matrix &x)
{
    Matrix h = x;
    for (auto &l : layers_)
        h = l.forward(h);
    return h;
}

void SnapshotModel::backward(const Matrix &dy)
{
    Matrix d = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        d = it->backward(d);
}

void SnapshotModel::zero_grad()
{
    for (auto &l : layers_)
        l.zero_grad();
}

long long snapshot_param_count(int input_dim, int width, int hidden_layers)
{
    long long n = static_cast<long long>(input_dim + 1) * width;
    for (int i = 1; i < hidden_layers; ++i)
        n += static_cast<long long>(width + 1) * width;
    n += static_cast<long long>(width + 1) * 2;
    return n;
}

// ------------------------------------------------------- SequenceModel ---

long long sequence_param_target(int input_dim)
{
    // Published counts: 1,667,192 at input 12, growing by first-layer width
    // (1024) per extra input.
    return 1667192ll + static_cast<long long>(input_dim - 12) * 1024ll;
}

namespace {

long long sequence_count_for(const std::vector<int> &dense, int input_dim, int parallel_hidden)
{
    long long n = 0;
    int in = input_dim;
    for (int w : dense) {
        n += static_cast<long long>(in + 1) * w;
        in = w;
    }
    const int d4 = dense[dense.size() - 2];
    const int d5 = dense.back();
    n += 4ll * (d4 + parallel_hidden + 1) * parallel_hidden;            // parallel LSTM
    n += 4ll * (d5 + parallel_hidden + 5 + 1) * 5;                      // 5-neuron head LSTM
    return n;
}

} // namespace

SequenceModel::SequenceModel(int input_dim, SequenceWidths widths) : input_dim_(input_dim)
{
    if (input_dim < 1)
        throw ConfigError("sequence model input_dim must be >= 1");
    if (widths.dense.size() != 5)
        throw ConfigError("sequence model expects 5 dense widths");

    long long target = widths.count_target;
    if (target == 0)
        target = sequence_param_target(input_dim);

    int hp = widths.parallel_hidden;
    const bool searched = hp == 0;
    if (searched) {
        // Pick the parallel-LSTM width that lands closest to the target count.
        long long best_diff = std::numeric_limits<long long>::max();
        for (int h = 4; h <= 768; ++h) {
            const long long diff =
                std::llabs(sequence_count_for(widths.dense, input_dim, h) - target);
            if (diff < best_diff) {
                best_diff = diff;
                hp = h;
            }
        }
    }
    parallel_hidden_ = hp;

    const long long count = sequence_count_for(widths.dense, input_dim, hp);
    // The tolerance check only applies when the width was chosen against a
    // target (searched or explicitly targeted); fully explicit widths pass.
    if ((searched || widths.count_target != 0) &&
        std::llabs(count - target) > widths.count_tolerance * static_cast<double>(target))
        throw std::logic_error("sequence model parameter count " + std::to_string(count) +
                               " misses target " + std::to_string(target));

    int in = input_dim;
    for (size_t i = 0; i < widths.dense.size(); ++i) {
        dense_.emplace_back(in, widths.dense[i], Activation::Gelu);
        in = widths.dense[i];
    }
    const int d4 = widths.dense[3];
    const int d5 = widths.dense[4];
    parallel_ = std::make_unique<nn::Lstm>(d4, hp, true, Activation::Tanh);
    head_ = std::make_unique<nn::Lstm>(d5 + hp, 5, true, Activation::Linear);

    if (static_cast<long long>(param_count()) != count)
        throw std::logic_error("sequence parameter count self-check failed");
}

size_t SequenceModel::param_count() const
{
    size_t n = 0;
    for (const auto &l : dense_)
        n += l.param_count();
    return n + parallel_->param_count() + head_->param_count();
}

void SequenceModel::init_weights(uint64_t seed)
{
    std::mt19937_64 rng(seed);
    for (auto &l : dense_)
        l.init_weights(rng);
    parallel_->init_weights(rng);
    head_->init_weights(rng);
}

std::vector<nn::ParamBlock> SequenceModel::params()
{
    std::vector<nn::ParamBlock> blocks;
    for (size_t i = 0; i < dense_.size(); ++i)
        for (auto &b : dense_[i].params("dense" + std::to_string(i + 1)))
            blocks.push_back(b);
    for (auto &b : parallel_->params("lstm_par"))
        blocks.push_back(b);
    for (auto &b : head_->params("lstm_head"))
        blocks.push_back(b);
    return blocks;
}

Matrix SequenceModel::forward(const Matrix &x, int batch)
{
    Matrix h = x;
    for (size_t i = 0; i < 4; ++i)
        h = dense_[i].forward(h);
    const Matrix p = parallel_->forward(h, batch); // parallel branch off layer 4
    const Matrix h5 = dense_[4].forward(h);

    Matrix concat(h5.rows() + p.rows(), h5.cols());
    concat.topRows(h5.rows()) = h5;
    concat.bottomRows(p.rows()) = p;

    Matrix y = head_->forward(concat, batch);
    // Heading rows carry an extra tanh on top of the linear-activation LSTM.
    head_tanh_cache_ = y.middleRows(kHeadRow, 2).array().tanh();
    y.middleRows(kHeadRow, 2) = head_tanh_cache_;
    return y;
}

void SequenceModel::backward(const Matrix &dy, int batch)
{
    Matrix d = dy;
    d.middleRows(kHeadRow, 2) = dy.middleRows(kHeadRow, 2).cwiseProduct(
        (1.0 - head_tanh_cache_.array().square()).matrix());
    const Matrix dconcat = head_->backward(d, batch);

    const int d5 = dense_[4].output_dim();
    const Matrix dh5 = dconcat.topRows(d5);
    const Matrix dp = dconcat.bottomRows(parallel_hidden_);

    Matrix dh4 = dense_[4].backward(dh5);
    dh4 += parallel_->backward(dp, batch);
    Matrix d_in = dh4;
    for (int i = 3; i >= 0; --i)
        d_in = dense_[static_cast<size_t>(i)].backward(d_in);
}

void SequenceModel::zero_grad()
{
    for (auto &l : dense_)
        l.zero_grad();
    parallel_->zero_grad();
    head_->zero_grad();
}

// --------------------------------------------------------------- shared ---

SnapshotModel build_snapshot(int input_dim) { return SnapshotModel(input_dim); }

SequenceModel build_sequence(int input_dim, SequenceWidths widths)
{
    return SequenceModel(input_dim, std::move(widths));
}

std::vector<nn::RowGroup> sequence_loss_groups(double pos_w, double speed_w, double heading_w)
{
    return {{kPosRow, 2, pos_w}, {kSpeedRow, 1, speed_w}, {kHeadRow, 2, heading_w}};
}

Matrix predict_positions(SnapshotModel &model, const Matrix &features, double label_scale)
{
    return model.forward(features) * label_scale;
}

std::vector<SequencePrediction> predict_track(SequenceModel &model, const Matrix &features,
                                              int window, double label_scale, double speed_scale)
{
    if (window < 1)
        throw ConfigError("window must be >= 1");
    if (features.rows() != model.input_dim())
        throw std::invalid_argument("predict_track: feature length mismatch");
    const int n = static_cast<int>(features.cols());
    std::vector<SequencePrediction> out(static_cast<size_t>(n));

    // One window per sample, stride 1, left-padded with the first sample
    // while fewer than `window` samples are available. Windows are batched
    // with timestep-major column order.
    constexpr int kChunk = 32;
    for (int t0 = 0; t0 < n; t0 += kChunk) {
        const int batch = std::min(kChunk, n - t0);
        Matrix win(features.rows(), static_cast<Eigen::Index>(window) * batch);
        for (int k = 0; k < window; ++k)
            for (int b = 0; b < batch; ++b) {
                const int t = t0 + b;
                const int src = std::max(0, t - (window - 1) + k);
                win.col(static_cast<Eigen::Index>(k) * batch + b) = features.col(src);
            }
        const Matrix y = model.forward(win, batch);
        for (int b = 0; b < batch; ++b) {
            const Eigen::VectorXd last =
                y.col(static_cast<Eigen::Index>(window - 1) * batch + b);
            SequencePrediction p;
            p.position = Vec2(last[kPosRow], last[kPosRow + 1]) * label_scale;
            p.speed_ms = last[kSpeedRow] * speed_scale;
            Vec2 head(last[kHeadRow], last[kHeadRow + 1]);
            if (head.norm() > 0.0)
                head.normalize();
            p.heading = head;
            p.padded = (t0 + b) < window - 1;
            out[static_cast<size_t>(t0 + b)] = p;
        }
    }
    return out;
}

void apply_transfer_mask(std::vector<nn::ParamBlock> &blocks, const TransferPlan &plan)
{
    for (auto &b : blocks) {
        bool trainable = false;
        for (const auto &p : plan.trainable_prefixes)
            if (b.name.rfind(p, 0) == 0)
                trainable = true;
        b.trainable = trainable;
    }
}

} // namespace csiloc::posmodels
