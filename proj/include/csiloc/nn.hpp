// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Minimal neural-network engine: dense and LSTM layers with exact analytic
// gradients, Adam, and the staged training schedule with early stopping.

#pragma once

#include "csiloc/common.hpp"

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace csiloc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Shaped value container used at serialization boundaries (row-major).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    size_t element_count() const
    {
        size_t n = 1;
        for (int d : shape)
            n *= static_cast<size_t>(d);
        return n;
    }
};

enum class Activation { Linear, Tanh, Gelu };

Activation activation_from_name(const std::string &name);
std::string activation_name(Activation a);

// Exact GELU, x * Phi(x) with the standard-normal CDF.
double gelu(double x);
double gelu_derivative(double x);
// Fast tanh-form approximation, 0.5 x (1 + tanh(sqrt(2/pi) (x + C x^3))),
// C = 0.044715.
double gelu_approx(double x);

double apply_activation(Activation a, double x);
double activation_derivative(Activation a, double x);

// Mutable view over one named parameter block and its gradient buffer.
struct ParamBlock {
    std::string name;
    double *value = nullptr;
    double *grad = nullptr;
    size_t size = 0;
    bool trainable = true;
};

// Fully connected layer, y = act(W x + b). Inputs are column-per-sample
// matrices (in x batch). Parameters are stored flat: W column-major then b.
class Dense {
  public:
    Dense(int in_dim, int out_dim, Activation act);

    int input_dim() const { return in_; }
    int output_dim() const { return out_; }
    Activation activation() const { return act_; }
    size_t param_count() const { return static_cast<size_t>(in_ + 1) * out_; }

    void init_weights(std::mt19937_64 &rng);
    std::vector<ParamBlock> params(const std::string &prefix);
    void zero_grad();

    Matrix forward(const Matrix &x);
    // dy: gradient w.r.t. the layer output; accumulates dW/db, returns dx.
    Matrix backward(const Matrix &dy);

    Eigen::Map<Matrix> weight() { return {store_.data(), out_, in_}; }
    Eigen::Map<Vector> bias() { return {store_.data() + static_cast<size_t>(out_) * in_, out_}; }
    Eigen::Map<const Matrix> weight() const { return {store_.data(), out_, in_}; }

  private:
    int in_, out_;
    Activation act_;
    std::vector<double> store_, grad_;
    Matrix cache_x_, cache_z_;
};

// Standard LSTM cell unrolled over a window: logistic gates, configurable
// candidate/output activation (tanh by default, linear for the 5-neuron
// output head). Sequences are passed as (in x T*B) matrices with timestep-
// major column order; batch width B fixed per call.
class Lstm {
  public:
    Lstm(int in_dim, int hidden, bool return_sequences, Activation cell_act = Activation::Tanh);

    int input_dim() const { return in_; }
    int hidden_dim() const { return hidden_; }
    bool return_sequences() const { return return_seq_; }
    Activation cell_activation() const { return cell_act_; }
    size_t param_count() const
    {
        return 4u * static_cast<size_t>(in_ + hidden_ + 1) * hidden_;
    }

    void init_weights(std::mt19937_64 &rng);
    std::vector<ParamBlock> params(const std::string &prefix);
    void zero_grad();

    // Returns (hidden x T*B) when returning sequences, else (hidden x B).
    Matrix forward(const Matrix &x_seq, int batch);
    // Full backpropagation through time; returns gradient w.r.t. the input
    // sequence (in x T*B).
    Matrix backward(const Matrix &dh, int batch);

  private:
    Eigen::Map<Matrix> wx() { return {store_.data(), 4 * hidden_, in_}; }
    Eigen::Map<Matrix> wh()
    {
        return {store_.data() + static_cast<size_t>(4 * hidden_) * in_, 4 * hidden_, hidden_};
    }
    Eigen::Map<Vector> bias()
    {
        return {store_.data() + static_cast<size_t>(4 * hidden_) * (in_ + hidden_), 4 * hidden_};
    }

    int in_, hidden_;
    bool return_seq_;
    Activation cell_act_;
    std::vector<double> store_, grad_;

    // per-timestep caches from the last forward
    int cached_steps_ = 0, cached_batch_ = 0;
    Matrix cache_x_;
    std::vector<Matrix> gate_i_, gate_f_, gate_g_, gate_o_, cell_, cell_act_val_, hidden_val_;
};

// Plain mean-squared error over all elements. grad receives d(loss)/d(pred).
double mse_loss(const Matrix &pred, const Matrix &target, Matrix *grad = nullptr);

// Weighted multi-output MSE: rows are partitioned into groups, each group
// contributing weight * MSE(group rows). Exactly sum_g w_g * MSE_g.
struct RowGroup {
    int start = 0;
    int count = 0;
    double weight = 1.0;
};
double weighted_mse_loss(const Matrix &pred, const Matrix &target,
                         const std::vector<RowGroup> &groups, Matrix *grad = nullptr);

// Adam with bias correction; keeps first/second moments per parameter block.
class Adam {
  public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    void step(std::vector<ParamBlock> &blocks, double lr);
    void reset() { m_.clear(); v_.clear(); t_ = 0; }

  private:
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

// Staged schedule: a fixed-rate phase followed by early-stopping refinement
// phases at reduced learning rates, restoring the best validation weights
// at every stop.
struct TrainSchedule {
    double phase1_lr = 1e-3;
    int phase1_epochs = 200;
    std::vector<double> refine_lrs = {5e-4, 1e-4};
    int refine_epoch_budget = 500; // total across refinement phases
    int patience = 25;
    int batch_size = 64;
    bool early_stop_phase1 = false; // used by transfer adaptation
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> lr;
    int best_epoch = -1;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int epochs() const { return static_cast<int>(train_loss.size()); }
};

// Generic schedule driver. `train_batch` must run forward/backward for the
// given sample indices (gradients zeroed and refilled) and return the batch
// loss; `val_loss` evaluates the validation set without touching gradients.
TrainHistory run_schedule(std::vector<ParamBlock> blocks, const TrainSchedule &schedule,
                          uint64_t seed, int n_train,
                          const std::function<double(const std::vector<int> &)> &train_batch,
                          const std::function<double()> &val_loss);

} // namespace csiloc::nn
