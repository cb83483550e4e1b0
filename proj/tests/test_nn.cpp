// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csiloc/nn.hpp"

#include <random>

using namespace csiloc;
using nn::Activation;
using nn::Matrix;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64 &rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r)
            m(r, c) = u(rng);
    return m;
}

// Central finite differences over every entry of the block.
double max_rel_error(const std::vector<double> &analytic, const std::vector<double> &numeric)
{
    REQUIRE(analytic.size() == numeric.size());
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

} // namespace

TEST_CASE("gelu exact values and approximation error")
{
    CHECK(nn::gelu(0.0) == 0.0);
    CHECK(nn::gelu(1.0) == doctest::Approx(0.841345).epsilon(1e-6));
    CHECK(nn::gelu(-1.0) == doctest::Approx(-0.158655).epsilon(1e-5));
    for (double x = -5.0; x <= 5.0; x += 0.01)
        CHECK(std::abs(nn::gelu(x) - nn::gelu_approx(x)) < 1e-3);

    // Derivative against central differences.
    for (double x = -4.0; x <= 4.0; x += 0.37) {
        const double h = 1e-6;
        const double num = (nn::gelu(x + h) - nn::gelu(x - h)) / (2.0 * h);
        CHECK(nn::gelu_derivative(x) == doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("dense identity layer passes input through")
{
    nn::Dense d(3, 3, Activation::Linear);
    d.weight().setIdentity();
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(3, 5, rng);
    CHECK((d.forward(x) - x).norm() == 0.0);
    CHECK(d.param_count() == (3 + 1) * 3);
}

TEST_CASE("dense gradients match central finite differences")
{
    std::mt19937_64 rng(42);
    const Activation acts[] = {Activation::Linear, Activation::Tanh, Activation::Gelu};
    int instances = 0;
    for (int trial = 0; trial < 21; ++trial) {
        const int in = 2 + static_cast<int>(rng() % 7);
        const int out = 2 + static_cast<int>(rng() % 7);
        const int batch = 1 + static_cast<int>(rng() % 4);
        nn::Dense layer(in, out, acts[trial % 3]);
        layer.init_weights(rng);
        const Matrix x = random_matrix(in, batch, rng);
        const Matrix target = random_matrix(out, batch, rng);

        auto loss_fn = [&](const Matrix &input) {
            return nn::mse_loss(layer.forward(input), target);
        };

        layer.zero_grad();
        Matrix grad_out;
        nn::mse_loss(layer.forward(x), target, &grad_out);
        const Matrix dx = layer.backward(grad_out);

        auto blocks = layer.params("d");
        std::vector<double> analytic, numeric;
        const double h = 1e-6;
        for (auto &b : blocks)
            for (size_t i = 0; i < b.size; ++i) {
                analytic.push_back(b.grad[i]);
                const double keep = b.value[i];
                b.value[i] = keep + h;
                const double up = loss_fn(x);
                b.value[i] = keep - h;
                const double dn = loss_fn(x);
                b.value[i] = keep;
                numeric.push_back((up - dn) / (2.0 * h));
            }
        // Input gradient too.
        Matrix xp = x;
        for (int c = 0; c < x.cols(); ++c)
            for (int r = 0; r < x.rows(); ++r) {
                analytic.push_back(dx(r, c));
                const double keep = xp(r, c);
                xp(r, c) = keep + h;
                const double up = loss_fn(xp);
                xp(r, c) = keep - h;
                const double dn = loss_fn(xp);
                xp(r, c) = keep;
                numeric.push_back((up - dn) / (2.0 * h));
            }
        CHECK(max_rel_error(analytic, numeric) < 1e-5);
        ++instances;
    }
    CHECK(instances >= 20);
}

TEST_CASE("lstm gradients match central finite differences (full BPTT)")
{
    std::mt19937_64 rng(1234);
    int instances = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 2 + static_cast<int>(rng() % 3);
        const int hidden = 2 + static_cast<int>(rng() % 4);
        const int steps = 2 + static_cast<int>(rng() % 4);
        const int batch = 1 + static_cast<int>(rng() % 2);
        const bool return_seq = trial % 2 == 0;
        const Activation cell = trial % 3 == 0 ? Activation::Linear : Activation::Tanh;

        nn::Lstm layer(in, hidden, return_seq, cell);
        layer.init_weights(rng);
        const Matrix x = random_matrix(in, steps * batch, rng);
        const Matrix target = random_matrix(hidden, return_seq ? steps * batch : batch, rng);

        auto loss_fn = [&](const Matrix &input) {
            return nn::mse_loss(layer.forward(input, batch), target);
        };

        layer.zero_grad();
        Matrix grad_out;
        nn::mse_loss(layer.forward(x, batch), target, &grad_out);
        const Matrix dx = layer.backward(grad_out, batch);

        auto blocks = layer.params("l");
        std::vector<double> analytic, numeric;
        const double h = 1e-6;
        for (auto &b : blocks)
            for (size_t i = 0; i < b.size; ++i) {
                analytic.push_back(b.grad[i]);
                const double keep = b.value[i];
                b.value[i] = keep + h;
                const double up = loss_fn(x);
                b.value[i] = keep - h;
                const double dn = loss_fn(x);
                b.value[i] = keep;
                numeric.push_back((up - dn) / (2.0 * h));
            }
        Matrix xp = x;
        for (int c = 0; c < x.cols(); ++c)
            for (int r = 0; r < x.rows(); ++r) {
                analytic.push_back(dx(r, c));
                const double keep = xp(r, c);
                xp(r, c) = keep + h;
                const double up = loss_fn(xp);
                xp(r, c) = keep - h;
                const double dn = loss_fn(xp);
                xp(r, c) = keep;
                numeric.push_back((up - dn) / (2.0 * h));
            }
        CHECK(max_rel_error(analytic, numeric) < 1e-4);
        ++instances;
    }
    CHECK(instances >= 20);

    SUBCASE("all-zero weights give all-zero outputs")
    {
        nn::Lstm z(3, 4, true);
        const Matrix x = Matrix::Ones(3, 6);
        CHECK(z.forward(x, 2).norm() == 0.0);
    }

    SUBCASE("parameter count formula")
    {
        nn::Lstm l(517, 5, false);
        CHECK(l.param_count() == 10460); // 4 (517 + 5 + 1) 5
    }
}

TEST_CASE("weighted multi-output MSE decomposes exactly")
{
    std::mt19937_64 rng(5);
    const Matrix pred = random_matrix(5, 7, rng);
    const Matrix target = random_matrix(5, 7, rng);
    const std::vector<nn::RowGroup> groups = {{0, 2, 0.8}, {2, 1, 0.1}, {3, 2, 0.1}};

    const double combined = nn::weighted_mse_loss(pred, target, groups);
    const double pos = nn::mse_loss(pred.middleRows(0, 2), target.middleRows(0, 2));
    const double spd = nn::mse_loss(pred.middleRows(2, 1), target.middleRows(2, 1));
    const double head = nn::mse_loss(pred.middleRows(3, 2), target.middleRows(3, 2));
    CHECK(combined == 0.8 * pos + 0.1 * spd + 0.1 * head);

    // Gradient check.
    Matrix grad;
    nn::weighted_mse_loss(pred, target, groups, &grad);
    const double h = 1e-6;
    Matrix p = pred;
    for (int r = 0; r < 5; ++r) {
        const double keep = p(r, 3);
        p(r, 3) = keep + h;
        const double up = nn::weighted_mse_loss(p, target, groups);
        p(r, 3) = keep - h;
        const double dn = nn::weighted_mse_loss(p, target, groups);
        p(r, 3) = keep;
        CHECK(grad(r, 3) == doctest::Approx((up - dn) / (2.0 * h)).epsilon(1e-6));
    }
}

TEST_CASE("adam update behaviour")
{
    SUBCASE("zero gradient leaves parameters unchanged")
    {
        std::vector<double> value{1.0, -2.0, 3.0};
        std::vector<double> grad{0.0, 0.0, 0.0};
        std::vector<nn::ParamBlock> blocks{{"p", value.data(), grad.data(), 3, true}};
        nn::Adam adam;
        adam.step(blocks, 0.01);
        CHECK(value[0] == 1.0);
        CHECK(value[1] == -2.0);
        CHECK(value[2] == 3.0);
    }

    SUBCASE("first step is approximately lr * sign(g)")
    {
        std::vector<double> value{0.0, 0.0};
        std::vector<double> grad{0.5, -3.0};
        std::vector<nn::ParamBlock> blocks{{"p", value.data(), grad.data(), 2, true}};
        nn::Adam adam;
        adam.step(blocks, 0.01);
        CHECK(value[0] == doctest::Approx(-0.01).epsilon(1e-6));
        CHECK(value[1] == doctest::Approx(0.01).epsilon(1e-6));
    }

    SUBCASE("constant gradient drives the step toward lr * sign(g)")
    {
        std::vector<double> value{0.0};
        std::vector<double> grad{0.37};
        std::vector<nn::ParamBlock> blocks{{"p", value.data(), grad.data(), 1, true}};
        nn::Adam adam;
        double prev = value[0];
        double step = 0.0;
        for (int t = 0; t < 500; ++t) {
            adam.step(blocks, 0.01);
            step = prev - value[0];
            prev = value[0];
        }
        CHECK(step == doctest::Approx(0.01).epsilon(1e-4));
    }

    SUBCASE("frozen blocks are skipped bit-exactly")
    {
        std::vector<double> value{1.25};
        std::vector<double> grad{10.0};
        std::vector<nn::ParamBlock> blocks{{"p", value.data(), grad.data(), 1, false}};
        nn::Adam adam;
        adam.step(blocks, 0.1);
        CHECK(value[0] == 1.25);
    }
}

TEST_CASE("training schedule: convex problem, determinism, early stopping")
{
    // Learn y = x with a single linear unit.
    auto make_data = [](int n, uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Matrix x(1, n), y(1, n);
        for (int i = 0; i < n; ++i) {
            x(0, i) = u(rng);
            y(0, i) = x(0, i);
        }
        return std::pair{x, y};
    };
    const auto [x_train, y_train] = make_data(64, 3);
    const auto [x_val, y_val] = make_data(32, 4);

    auto run = [&](uint64_t seed, nn::TrainSchedule schedule, nn::Dense &layer,
                   nn::TrainHistory &hist) {
        std::mt19937_64 rng(seed);
        layer.init_weights(rng);
        auto blocks = layer.params("d");
        auto train_batch = [&](const std::vector<int> &idx) {
            Matrix xb(1, static_cast<Eigen::Index>(idx.size()));
            Matrix yb(1, static_cast<Eigen::Index>(idx.size()));
            for (size_t c = 0; c < idx.size(); ++c) {
                xb(0, static_cast<Eigen::Index>(c)) = x_train(0, idx[c]);
                yb(0, static_cast<Eigen::Index>(c)) = y_train(0, idx[c]);
            }
            layer.zero_grad();
            Matrix g;
            const double loss = nn::mse_loss(layer.forward(xb), yb, &g);
            layer.backward(g);
            return loss;
        };
        auto val_loss = [&]() { return nn::mse_loss(layer.forward(x_val), y_val); };
        hist = nn::run_schedule(blocks, schedule, seed, 64, train_batch, val_loss);
    };

    SUBCASE("validation MSE collapses within phase 1")
    {
        nn::TrainSchedule schedule;
        schedule.phase1_epochs = 200;
        schedule.refine_lrs = {};
        schedule.batch_size = 8;
        nn::Dense layer(1, 1, Activation::Linear);
        nn::TrainHistory hist;
        run(7, schedule, layer, hist);
        CHECK(hist.val_loss.back() < 1e-6);
    }

    SUBCASE("same seed twice gives bit-identical weights")
    {
        nn::TrainSchedule schedule;
        schedule.phase1_epochs = 30;
        schedule.refine_epoch_budget = 20;
        schedule.patience = 5;
        schedule.batch_size = 8;
        nn::Dense a(1, 1, Activation::Linear), b(1, 1, Activation::Linear);
        nn::TrainHistory ha, hb;
        run(99, schedule, a, ha);
        run(99, schedule, b, hb);
        CHECK(a.weight()(0, 0) == b.weight()(0, 0));
        CHECK(a.bias()(0) == b.bias()(0));
        CHECK(ha.train_loss == hb.train_loss);
    }

    SUBCASE("early stop restores the minimum recorded validation loss")
    {
        nn::TrainSchedule schedule;
        schedule.phase1_epochs = 5;
        schedule.refine_epoch_budget = 200;
        schedule.patience = 4;
        schedule.batch_size = 8;
        nn::Dense layer(1, 1, Activation::Linear);
        nn::TrainHistory hist;
        run(21, schedule, layer, hist);
        // Stopped well before exhausting the refinement budget.
        CHECK(hist.epochs() < 5 + 200);
        const double best = *std::min_element(hist.val_loss.begin(), hist.val_loss.end());
        CHECK(hist.best_val_loss == best);
        // Restored weights evaluate exactly to the recorded best.
        CHECK(nn::mse_loss(layer.forward(x_val), y_val) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("forward pass is batch-order invariant")
{
    std::mt19937_64 rng(8);
    nn::Dense layer(6, 4, Activation::Gelu);
    layer.init_weights(rng);
    const Matrix x = random_matrix(6, 5, rng);
    const Matrix y = layer.forward(x);

    Matrix xp(6, 5);
    const int perm[5] = {3, 0, 4, 1, 2};
    for (int c = 0; c < 5; ++c)
        xp.col(c) = x.col(perm[c]);
    const Matrix yp = layer.forward(xp);
    for (int c = 0; c < 5; ++c)
        CHECK((yp.col(c) - y.col(perm[c])).norm() == 0.0);
}

TEST_CASE("training aborts on divergence with a diagnostic")
{
    nn::Dense layer(1, 1, Activation::Linear);
    auto blocks = layer.params("d");
    nn::TrainSchedule schedule;
    schedule.phase1_epochs = 3;
    schedule.refine_lrs = {};
    auto bad_batch = [&](const std::vector<int> &) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    auto val = [&]() { return 1.0; };
    CHECK_THROWS_WITH_AS(nn::run_schedule(blocks, schedule, 1, 8, bad_batch, val),
                         doctest::Contains("diverged"), std::runtime_error);
}
