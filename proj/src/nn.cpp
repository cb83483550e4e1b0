// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace csiloc::nn {

Activation activation_from_name(const std::string &name)
{
    if (name == "linear")
        return Activation::Linear;
    if (name == "tanh")
        return Activation::Tanh;
    if (name == "gelu")
        return Activation::Gelu;
    throw ConfigError("unknown activation: " + name);
}

std::string activation_name(Activation a)
{
    switch (a) {
    case Activation::Linear:
        return "linear";
    case Activation::Tanh:
        return "tanh";
    case Activation::Gelu:
        return "gelu";
    }
    return "?";
}

double gelu(double x) { return 0.5 * x * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double gelu_derivative(double x)
{
    const double phi_cdf = 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
    const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
    return phi_cdf + x * phi_pdf;
}

double gelu_approx(double x)
{
    constexpr double c = 0.044715;
    const double s = std::sqrt(2.0 / kPi);
    return 0.5 * x * (1.0 + std::tanh(s * (x + c * x * x * x)));
}

double apply_activation(Activation a, double x)
{
    switch (a) {
    case Activation::Linear:
        return x;
    case Activation::Tanh:
        return std::tanh(x);
    case Activation::Gelu:
        return gelu(x);
    }
    return x;
}

double activation_derivative(Activation a, double x)
{
    switch (a) {
    case Activation::Linear:
        return 1.0;
    case Activation::Tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::Gelu:
        return gelu_derivative(x);
    }
    return 1.0;
}

namespace {

Matrix activate(Activation a, const Matrix &z)
{
    if (a == Activation::Linear)
        return z;
    return z.unaryExpr([a](double v) { return apply_activation(a, v); });
}

Matrix activate_grad(Activation a, const Matrix &z)
{
    if (a == Activation::Linear)
        return Matrix::Ones(z.rows(), z.cols());
    return z.unaryExpr([a](double v) { return activation_derivative(a, v); });
}

void fill_uniform(double *p, size_t n, double limit, std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (size_t i = 0; i < n; ++i)
        p[i] = dist(rng);
}

} // namespace

// ---------------------------------------------------------------- Dense ---

Dense::Dense(int in_dim, int out_dim, Activation act) : in_(in_dim), out_(out_dim), act_(act)
{
    if (in_ < 1 || out_ < 1)
        throw ConfigError("dense layer dims must be >= 1");
    store_.assign(param_count(), 0.0);
    grad_.assign(param_count(), 0.0);
}

void Dense::init_weights(std::mt19937_64 &rng)
{
    // Fan-in scaled uniform: variance 1/fan_in.
    fill_uniform(store_.data(), static_cast<size_t>(out_) * in_, std::sqrt(3.0 / in_), rng);
    bias().setZero();
}

std::vector<ParamBlock> Dense::params(const std::string &prefix)
{
    const size_t wn = static_cast<size_t>(out_) * in_;
    return {{prefix + ".W", store_.data(), grad_.data(), wn, true},
            {prefix + ".b", store_.data() + wn, grad_.data() + wn, static_cast<size_t>(out_),
             true}};
}

void Dense::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Matrix Dense::forward(const Matrix &x)
{
    if (x.rows() != in_)
        throw std::invalid_argument("dense forward: input has " + std::to_string(x.rows()) +
                                    " rows, expected " + std::to_string(in_));
    cache_x_ = x;
    cache_z_ = (weight() * x).colwise() + Eigen::Map<Vector>(bias().data(), out_);
    return activate(act_, cache_z_);
}

Matrix Dense::backward(const Matrix &dy)
{
    if (dy.rows() != out_ || dy.cols() != cache_z_.cols())
        throw std::invalid_argument("dense backward: gradient shape mismatch");
    const Matrix dz = dy.cwiseProduct(activate_grad(act_, cache_z_));
    const size_t wn = static_cast<size_t>(out_) * in_;
    Eigen::Map<Matrix> dW(grad_.data(), out_, in_);
    Eigen::Map<Vector> db(grad_.data() + wn, out_);
    dW.noalias() += dz * cache_x_.transpose();
    db += dz.rowwise().sum();
    return weight().transpose() * dz;
}

// ----------------------------------------------------------------- Lstm ---

Lstm::Lstm(int in_dim, int hidden, bool return_sequences, Activation cell_act)
    : in_(in_dim), hidden_(hidden), return_seq_(return_sequences), cell_act_(cell_act)
{
    if (in_ < 1 || hidden_ < 1)
        throw ConfigError("lstm layer dims must be >= 1");
    store_.assign(param_count(), 0.0);
    grad_.assign(param_count(), 0.0);
}

void Lstm::init_weights(std::mt19937_64 &rng)
{
    fill_uniform(wx().data(), static_cast<size_t>(4 * hidden_) * in_, std::sqrt(3.0 / in_), rng);
    fill_uniform(wh().data(), static_cast<size_t>(4 * hidden_) * hidden_,
                 std::sqrt(3.0 / hidden_), rng);
    bias().setZero();
    bias().segment(hidden_, hidden_).setOnes(); // forget gate bias +1
}

std::vector<ParamBlock> Lstm::params(const std::string &prefix)
{
    const size_t wxn = static_cast<size_t>(4 * hidden_) * in_;
    const size_t whn = static_cast<size_t>(4 * hidden_) * hidden_;
    return {{prefix + ".Wx", store_.data(), grad_.data(), wxn, true},
            {prefix + ".Wh", store_.data() + wxn, grad_.data() + wxn, whn, true},
            {prefix + ".b", store_.data() + wxn + whn, grad_.data() + wxn + whn,
             static_cast<size_t>(4 * hidden_), true}};
}

void Lstm::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
} // namespace

Matrix Lstm::forward(const Matrix &x_seq, int batch)
{
    if (x_seq.rows() != in_ || batch < 1 || x_seq.cols() % batch != 0)
        throw std::invalid_argument("lstm forward: bad input shape");
    const int steps = static_cast<int>(x_seq.cols()) / batch;
    cached_steps_ = steps;
    cached_batch_ = batch;
    cache_x_ = x_seq;
    gate_i_.assign(static_cast<size_t>(steps), {});
    gate_f_.assign(static_cast<size_t>(steps), {});
    gate_g_.assign(static_cast<size_t>(steps), {});
    gate_o_.assign(static_cast<size_t>(steps), {});
    cell_.assign(static_cast<size_t>(steps), {});
    cell_act_val_.assign(static_cast<size_t>(steps), {});
    hidden_val_.assign(static_cast<size_t>(steps), {});

    Matrix h = Matrix::Zero(hidden_, batch);
    Matrix c = Matrix::Zero(hidden_, batch);
    Matrix out;
    if (return_seq_)
        out.resize(hidden_, static_cast<Eigen::Index>(steps) * batch);

    const auto Wx = wx();
    const auto Wh = wh();
    const auto b = bias();
    for (int t = 0; t < steps; ++t) {
        const auto xt = x_seq.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
        Matrix pre = (Wx * xt + Wh * h).colwise() + Eigen::Map<const Vector>(b.data(), 4 * hidden_);
        auto &ig = gate_i_[static_cast<size_t>(t)];
        auto &fg = gate_f_[static_cast<size_t>(t)];
        auto &gg = gate_g_[static_cast<size_t>(t)];
        auto &og = gate_o_[static_cast<size_t>(t)];
        ig = pre.topRows(hidden_).unaryExpr([](double v) { return sigmoid(v); });
        fg = pre.middleRows(hidden_, hidden_).unaryExpr([](double v) { return sigmoid(v); });
        gg = activate(cell_act_, pre.middleRows(2 * hidden_, hidden_));
        og = pre.bottomRows(hidden_).unaryExpr([](double v) { return sigmoid(v); });

        c = fg.cwiseProduct(c) + ig.cwiseProduct(gg);
        cell_[static_cast<size_t>(t)] = c;
        cell_act_val_[static_cast<size_t>(t)] = activate(cell_act_, c);
        h = og.cwiseProduct(cell_act_val_[static_cast<size_t>(t)]);
        hidden_val_[static_cast<size_t>(t)] = h;
        if (return_seq_)
            out.middleCols(static_cast<Eigen::Index>(t) * batch, batch) = h;
    }
    return return_seq_ ? out : h;
}

Matrix Lstm::backward(const Matrix &dh_in, int batch)
{
    const int steps = cached_steps_;
    if (batch != cached_batch_ || steps == 0)
        throw std::invalid_argument("lstm backward: no matching forward cache");

    const size_t wxn = static_cast<size_t>(4 * hidden_) * in_;
    const size_t whn = static_cast<size_t>(4 * hidden_) * hidden_;
    Eigen::Map<Matrix> dWx(grad_.data(), 4 * hidden_, in_);
    Eigen::Map<Matrix> dWh(grad_.data() + wxn, 4 * hidden_, hidden_);
    Eigen::Map<Vector> db(grad_.data() + wxn + whn, 4 * hidden_);

    Matrix dx(in_, static_cast<Eigen::Index>(steps) * batch);
    Matrix dh_next = Matrix::Zero(hidden_, batch);
    Matrix dc_next = Matrix::Zero(hidden_, batch);
    const auto Wx = wx();
    const auto Wh = wh();

    for (int t = steps - 1; t >= 0; --t) {
        Matrix dh = dh_next;
        if (return_seq_)
            dh += dh_in.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
        else if (t == steps - 1)
            dh += dh_in;

        const auto &ig = gate_i_[static_cast<size_t>(t)];
        const auto &fg = gate_f_[static_cast<size_t>(t)];
        const auto &gg = gate_g_[static_cast<size_t>(t)];
        const auto &og = gate_o_[static_cast<size_t>(t)];
        const auto &ca = cell_act_val_[static_cast<size_t>(t)];

        const Matrix dc_act = dh.cwiseProduct(og);
        Matrix dc = dc_next;
        if (cell_act_ == Activation::Tanh)
            dc += dc_act.cwiseProduct(Matrix::Ones(hidden_, batch) - ca.cwiseProduct(ca));
        else
            dc += dc_act; // linear cell activation

        const Matrix c_prev =
            t > 0 ? cell_[static_cast<size_t>(t - 1)] : Matrix::Zero(hidden_, batch);

        Matrix dpre(4 * hidden_, batch);
        // d(pre_i) = dc*g * i(1-i), d(pre_f) = dc*c_prev * f(1-f),
        // d(pre_g) = dc*i * act'(pre_g), d(pre_o) = dh*act(c) * o(1-o)
        dpre.topRows(hidden_) =
            dc.cwiseProduct(gg).cwiseProduct(ig).cwiseProduct(Matrix::Ones(hidden_, batch) - ig);
        dpre.middleRows(hidden_, hidden_) = dc.cwiseProduct(c_prev).cwiseProduct(fg).cwiseProduct(
            Matrix::Ones(hidden_, batch) - fg);
        if (cell_act_ == Activation::Tanh)
            dpre.middleRows(2 * hidden_, hidden_) = dc.cwiseProduct(ig).cwiseProduct(
                Matrix::Ones(hidden_, batch) - gg.cwiseProduct(gg));
        else
            dpre.middleRows(2 * hidden_, hidden_) = dc.cwiseProduct(ig);
        dpre.bottomRows(hidden_) =
            dh.cwiseProduct(ca).cwiseProduct(og).cwiseProduct(Matrix::Ones(hidden_, batch) - og);

        const auto xt = cache_x_.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
        const Matrix h_prev =
            t > 0 ? hidden_val_[static_cast<size_t>(t - 1)] : Matrix::Zero(hidden_, batch);
        dWx.noalias() += dpre * xt.transpose();
        dWh.noalias() += dpre * h_prev.transpose();
        db += dpre.rowwise().sum();

        dx.middleCols(static_cast<Eigen::Index>(t) * batch, batch) = Wx.transpose() * dpre;
        dh_next = Wh.transpose() * dpre;
        dc_next = dc.cwiseProduct(fg);
    }
    return dx;
}

// --------------------------------------------------------------- losses ---

double mse_loss(const Matrix &pred, const Matrix &target, Matrix *grad)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("mse: shape mismatch");
    const Matrix diff = pred - target;
    const double n = static_cast<double>(pred.size());
    if (grad)
        *grad = 2.0 / n * diff;
    return diff.squaredNorm() / n;
}

double weighted_mse_loss(const Matrix &pred, const Matrix &target,
                         const std::vector<RowGroup> &groups, Matrix *grad)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("weighted mse: shape mismatch");
    if (grad)
        grad->setZero(pred.rows(), pred.cols());
    double total = 0.0;
    for (const auto &g : groups) {
        const Matrix diff =
            pred.middleRows(g.start, g.count) - target.middleRows(g.start, g.count);
        const double n = static_cast<double>(diff.size());
        total += g.weight * diff.squaredNorm() / n;
        if (grad)
            grad->middleRows(g.start, g.count) = 2.0 * g.weight / n * diff;
    }
    return total;
}

// ----------------------------------------------------------------- Adam ---

void Adam::step(std::vector<ParamBlock> &blocks, double lr)
{
    if (m_.size() != blocks.size()) {
        m_.assign(blocks.size(), {});
        v_.assign(blocks.size(), {});
        for (size_t i = 0; i < blocks.size(); ++i) {
            m_[i].assign(blocks[i].size, 0.0);
            v_[i].assign(blocks[i].size, 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (size_t i = 0; i < blocks.size(); ++i) {
        auto &blk = blocks[i];
        if (!blk.trainable)
            continue;
        double *m = m_[i].data();
        double *v = v_[i].data();
        for (size_t k = 0; k < blk.size; ++k) {
            const double g = blk.grad[k];
            m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g;
            v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            blk.value[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

// ------------------------------------------------------------- schedule ---

namespace {

std::vector<double> snapshot_weights(const std::vector<ParamBlock> &blocks)
{
    std::vector<double> w;
    for (const auto &b : blocks)
        w.insert(w.end(), b.value, b.value + b.size);
    return w;
}

void restore_weights(std::vector<ParamBlock> &blocks, const std::vector<double> &w)
{
    size_t off = 0;
    for (auto &b : blocks) {
        std::copy(w.begin() + static_cast<long>(off), w.begin() + static_cast<long>(off + b.size),
                  b.value);
        off += b.size;
    }
}

} // namespace

TrainHistory run_schedule(std::vector<ParamBlock> blocks, const TrainSchedule &schedule,
                          uint64_t seed, int n_train,
                          const std::function<double(const std::vector<int> &)> &train_batch,
                          const std::function<double()> &val_loss)
{
    if (n_train < 1)
        throw ConfigError("empty training set");
    TrainHistory hist;
    Adam adam;
    std::mt19937_64 rng(seed);
    std::vector<int> order(static_cast<size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> best_weights = snapshot_weights(blocks);
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    auto run_epoch = [&](double lr) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (int start = 0; start < n_train; start += schedule.batch_size) {
            const int count = std::min(schedule.batch_size, n_train - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + count);
            loss_sum += train_batch(idx);
            adam.step(blocks, lr);
            ++batches;
        }
        const double train = loss_sum / std::max(1, batches);
        const double val = val_loss();
        if (!std::isfinite(train) || !std::isfinite(val))
            throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                     std::to_string(hist.epochs() + 1));
        hist.train_loss.push_back(train);
        hist.val_loss.push_back(val);
        hist.lr.push_back(lr);
        if (val < best_val) {
            best_val = val;
            best_epoch = hist.epochs() - 1;
            best_weights = snapshot_weights(blocks);
        }
        return val;
    };

    // Phase 1: fixed learning rate.
    {
        int since_best = 0;
        for (int e = 0; e < schedule.phase1_epochs; ++e) {
            const double val = run_epoch(schedule.phase1_lr);
            if (schedule.early_stop_phase1) {
                since_best = (best_epoch == hist.epochs() - 1) ? 0 : since_best + 1;
                (void)val;
                if (since_best >= schedule.patience) {
                    restore_weights(blocks, best_weights);
                    break;
                }
            }
        }
        if (schedule.early_stop_phase1)
            restore_weights(blocks, best_weights);
    }

    // Refinement phases under a shared epoch budget, restoring the best
    // validation weights at every stop.
    int budget = schedule.refine_epoch_budget;
    for (double lr : schedule.refine_lrs) {
        int since_best = 0;
        while (budget > 0) {
            --budget;
            run_epoch(lr);
            since_best = (best_epoch == hist.epochs() - 1) ? 0 : since_best + 1;
            if (since_best >= schedule.patience)
                break;
        }
        restore_weights(blocks, best_weights);
        if (budget <= 0)
            break;
    }

    hist.best_epoch = best_epoch;
    hist.best_val_loss = best_val;
    return hist;
}

} // namespace csiloc::nn
