// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

namespace csiloc::pipeline {

int worker_count(int requested)
{
    if (requested > 0)
        return requested;
    if (const char *env = std::getenv("CSILOC_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ------------------------------------------------------------- simulate ---

io::Dataset simulate(const scene::SceneMap &scene, const SimulateConfig &cfg)
{
    const mobility::TrackDataset tracks = mobility::generate_dataset(
        scene, cfg.n_tracks, cfg.samples_per_track, cfg.seed, cfg.kinematics);

    io::Dataset ds;
    ds.kind = "csi";
    ds.scene_hash = scene.hash();
    ds.config_hash = cfg.config_hash;
    ds.seed = cfg.seed;
    ds.ofdm = cfg.ofdm;
    ds.n_gnbs = static_cast<int>(scene.gnbs.size());
    ds.n_beams =
        scene.gnbs.empty() ? 0 : static_cast<int>(scene.gnbs[0].codebook.beams.size());
    for (const auto &g : scene.gnbs)
        ds.gnb_positions.push_back(g.position);

    // Fan out across tracks; measurement is pure per sample, results are
    // appended in track order afterwards.
    std::vector<std::vector<io::SampleRecord>> per_track(
        static_cast<size_t>(cfg.n_tracks));
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&]() {
        try {
            for (int ti = next.fetch_add(1); ti < cfg.n_tracks; ti = next.fetch_add(1)) {
                const auto &track = tracks.tracks[static_cast<size_t>(ti)];
                auto &records = per_track[static_cast<size_t>(ti)];
                records.reserve(track.samples.size());
                for (size_t si = 0; si < track.samples.size(); ++si) {
                    const auto &ts = track.samples[si];
                    const Vec3 ue(ts.pos.x(), ts.pos.y(), cfg.ue_height_m);
                    io::SampleRecord r;
                    r.track = ti;
                    r.index = static_cast<int>(si);
                    r.time_s = ts.t;
                    r.position = ts.pos;
                    r.speed_ms = ts.speed_ms;
                    r.heading = ts.heading;
                    r.split = tracks.split[static_cast<size_t>(ti)];
                    r.measurement = channel::measure_sample(
                        scene, cfg.ofdm, ue, ts.t, cfg.max_bounces, cfg.reflection_loss_db,
                        cfg.threshold_db, cfg.tx_power_dbm, cfg.max_paths);
                    r.los = r.measurement.grid.los;
                    r.meas.resize(static_cast<size_t>(ds.n_gnbs));
                    for (int g = 0; g < ds.n_gnbs; ++g)
                        r.meas[static_cast<size_t>(g)] =
                            r.measurement.paths_per_gnb[static_cast<size_t>(g)].empty() ? 0 : 1;
                    records.push_back(std::move(r));
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error)
                first_error = std::current_exception();
        }
    };

    const int n_workers = std::min(worker_count(cfg.workers), cfg.n_tracks);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w)
        pool.emplace_back(work);
    for (auto &t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);

    for (auto &records : per_track)
        for (auto &r : records)
            ds.samples.push_back(std::move(r));
    return ds;
}

// -------------------------------------------------------------- features ---

io::Dataset extract(const io::Dataset &csi, const FeatureConfig &cfg)
{
    if (csi.kind != "csi")
        throw ConfigError("feature extraction needs a csi dataset");

    features::FeatureSpec spec = cfg.spec;
    spec.n_gnbs = csi.n_gnbs;
    spec.n_beams = csi.n_beams;
    spec.n_rbs = csi.ofdm.n_rbs;

    // Perturb a copy of every measurement with per-sample seeds, then fit
    // normalization on the (noisy) training split.
    std::vector<channel::SampleMeasurement> noisy;
    noisy.reserve(csi.samples.size());
    for (const auto &r : csi.samples) {
        channel::SampleMeasurement m = r.measurement;
        if (cfg.uncertainty) {
            std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<uint64_t>(r.track),
                                            static_cast<uint64_t>(r.index)));
            features::inject_uncertainty(m, features::UncertaintyKind::All, cfg.unc, rng);
        }
        noisy.push_back(std::move(m));
    }

    std::vector<const channel::SampleMeasurement *> train;
    for (size_t i = 0; i < csi.samples.size(); ++i)
        if (csi.samples[i].split == mobility::Split::Train)
            train.push_back(&noisy[i]);
    if (train.empty())
        throw ConfigError("dataset has no training samples");
    const features::NormStats stats = features::fit_norm_stats(spec, train);

    io::Dataset out;
    out.kind = "features";
    out.scene_hash = csi.scene_hash;
    out.config_hash = cfg.config_hash;
    out.seed = cfg.seed;
    out.ofdm = csi.ofdm;
    out.n_gnbs = csi.n_gnbs;
    out.n_beams = csi.n_beams;
    out.gnb_positions = csi.gnb_positions;
    out.feature_spec = spec;
    out.norm = stats;
    out.label_noise_std = cfg.label_noise_std;

    for (size_t i = 0; i < csi.samples.size(); ++i) {
        io::SampleRecord r = csi.samples[i];
        r.measurement = {};
        r.features = features::extract_features(spec, noisy[i], stats);
        out.samples.push_back(std::move(r));
    }

    // Label noise applies to training labels only, with its own seed stream.
    if (cfg.label_noise_std > 0.0) {
        for (auto &r : out.samples) {
            if (r.split != mobility::Split::Train)
                continue;
            std::mt19937_64 rng(derive_seed(cfg.seed ^ 0x6c61626c5f6e6f69ull,
                                            static_cast<uint64_t>(r.track),
                                            static_cast<uint64_t>(r.index)));
            std::vector<Vec2> p{r.position};
            features::label_noise(p, cfg.label_noise_std, rng);
            r.position = p[0];
        }
    }
    return out;
}

// --------------------------------------------------------------- training ---

namespace {

using nn::Matrix;

std::vector<size_t> split_indices(const io::Dataset &ds, mobility::Split split)
{
    std::vector<size_t> idx;
    for (size_t i = 0; i < ds.samples.size(); ++i)
        if (ds.samples[i].split == split)
            idx.push_back(i);
    return idx;
}

std::vector<size_t> take_fraction(std::vector<size_t> idx, double fraction, uint64_t seed)
{
    if (fraction >= 1.0)
        return idx;
    std::mt19937_64 rng(derive_seed(seed, 0xfaceull));
    std::shuffle(idx.begin(), idx.end(), rng);
    const size_t keep = std::max<size_t>(
        1, static_cast<size_t>(std::ceil(fraction * static_cast<double>(idx.size()))));
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

void snapshot_matrices(const io::Dataset &ds, const std::vector<size_t> &idx,
                       double label_scale, Matrix &x, Matrix &y)
{
    const int d = static_cast<int>(ds.samples[idx[0]].features.size());
    x.resize(d, static_cast<Eigen::Index>(idx.size()));
    y.resize(2, static_cast<Eigen::Index>(idx.size()));
    for (size_t c = 0; c < idx.size(); ++c) {
        const auto &r = ds.samples[idx[c]];
        x.col(static_cast<Eigen::Index>(c)) =
            Eigen::Map<const Eigen::VectorXd>(r.features.data(), d);
        y(0, static_cast<Eigen::Index>(c)) = r.position.x() / label_scale;
        y(1, static_cast<Eigen::Index>(c)) = r.position.y() / label_scale;
    }
}

// Contiguous per-track sample ranges of one split, in dataset order.
std::vector<std::pair<size_t, size_t>> track_ranges(const io::Dataset &ds,
                                                    mobility::Split split)
{
    std::vector<std::pair<size_t, size_t>> ranges;
    size_t i = 0;
    while (i < ds.samples.size()) {
        size_t j = i;
        while (j < ds.samples.size() && ds.samples[j].track == ds.samples[i].track)
            ++j;
        if (ds.samples[i].split == split)
            ranges.emplace_back(i, j);
        i = j;
    }
    return ranges;
}

// Training windows: start offsets at `stride` within each track.
std::vector<size_t> window_starts(const io::Dataset &ds, mobility::Split split, int window,
                                  int stride)
{
    std::vector<size_t> starts;
    for (const auto &[lo, hi] : track_ranges(ds, split))
        for (size_t s = lo; s + static_cast<size_t>(window) <= hi;
             s += static_cast<size_t>(stride))
            starts.push_back(s);
    return starts;
}

void window_matrices(const io::Dataset &ds, const std::vector<size_t> &starts,
                     const std::vector<int> &batch_idx, int window, double label_scale,
                     double speed_scale, Matrix &x, Matrix &y)
{
    const int b = static_cast<int>(batch_idx.size());
    const int d = static_cast<int>(ds.samples[starts[static_cast<size_t>(batch_idx[0])]]
                                        .features.size());
    x.resize(d, static_cast<Eigen::Index>(window) * b);
    y.resize(5, static_cast<Eigen::Index>(window) * b);
    for (int k = 0; k < window; ++k)
        for (int c = 0; c < b; ++c) {
            const auto &r =
                ds.samples[starts[static_cast<size_t>(batch_idx[static_cast<size_t>(c)])] +
                           static_cast<size_t>(k)];
            const Eigen::Index col = static_cast<Eigen::Index>(k) * b + c;
            x.col(col) = Eigen::Map<const Eigen::VectorXd>(r.features.data(), d);
            y(0, col) = r.position.x() / label_scale;
            y(1, col) = r.position.y() / label_scale;
            y(2, col) = r.speed_ms / speed_scale;
            y(3, col) = r.heading.x();
            y(4, col) = r.heading.y();
        }
}

io::ModelBundle train_internal(const io::Dataset &feats, const TrainConfig &cfg,
                               io::ModelBundle *source, const posmodels::TransferPlan *plan)
{
    if (feats.kind != "features" || !feats.feature_spec)
        throw ConfigError("training needs a features dataset");
    const int input_dim = feats.feature_spec->feature_length();

    io::ModelBundle bundle;
    bundle.kind = cfg.model;
    bundle.input_dim = input_dim;
    bundle.window = cfg.window;
    bundle.feature_spec = *feats.feature_spec;
    bundle.norm = feats.norm;
    bundle.label_scale = cfg.label_scale;
    bundle.speed_scale = cfg.speed_scale;
    bundle.config_hash = cfg.config_hash;
    bundle.feature_config_hash = feats.config_hash;

    if (cfg.model == "snapshot")
        bundle.snapshot.emplace(input_dim);
    else if (cfg.model == "sequence") {
        bundle.sequence.emplace(input_dim, bundle.widths);
        bundle.widths.parallel_hidden = bundle.sequence->parallel_hidden();
    } else
        throw ConfigError("unknown model kind: " + cfg.model);

    auto blocks = bundle.params();
    if (source) {
        auto src_blocks = source->params();
        if (source->kind != bundle.kind || source->input_dim != input_dim ||
            src_blocks.size() != blocks.size())
            throw ConfigError("transfer source architecture does not match the target");
        for (size_t i = 0; i < blocks.size(); ++i) {
            if (src_blocks[i].size != blocks[i].size)
                throw ConfigError("transfer source architecture does not match the target");
            std::copy(src_blocks[i].value, src_blocks[i].value + src_blocks[i].size,
                      blocks[i].value);
        }
    } else {
        if (bundle.snapshot)
            bundle.snapshot->init_weights(derive_seed(cfg.seed, 0x1217ull));
        else
            bundle.sequence->init_weights(derive_seed(cfg.seed, 0x1217ull));
    }
    if (plan)
        posmodels::apply_transfer_mask(blocks, *plan);

    if (cfg.model == "snapshot") {
        auto train_idx = take_fraction(split_indices(feats, mobility::Split::Train),
                                       cfg.data_fraction, cfg.seed);
        auto val_idx = split_indices(feats, mobility::Split::Val);
        if (train_idx.empty() || val_idx.empty())
            throw ConfigError("training requires non-empty train and val splits");

        Matrix x_train, y_train, x_val, y_val;
        snapshot_matrices(feats, train_idx, cfg.label_scale, x_train, y_train);
        snapshot_matrices(feats, val_idx, cfg.label_scale, x_val, y_val);
        auto &model = *bundle.snapshot;

        auto train_batch = [&](const std::vector<int> &idx) {
            Matrix xb(x_train.rows(), static_cast<Eigen::Index>(idx.size()));
            Matrix yb(2, static_cast<Eigen::Index>(idx.size()));
            for (size_t c = 0; c < idx.size(); ++c) {
                xb.col(static_cast<Eigen::Index>(c)) = x_train.col(idx[c]);
                yb.col(static_cast<Eigen::Index>(c)) = y_train.col(idx[c]);
            }
            model.zero_grad();
            const Matrix pred = model.forward(xb);
            Matrix grad;
            const double loss = nn::mse_loss(pred, yb, &grad);
            model.backward(grad);
            return loss;
        };
        auto val_loss = [&]() {
            const Matrix pred = model.forward(x_val);
            return nn::mse_loss(pred, y_val);
        };
        bundle.history = nn::run_schedule(blocks, cfg.schedule, derive_seed(cfg.seed, 0x7717ull),
                                          static_cast<int>(train_idx.size()), train_batch,
                                          val_loss);
        return bundle;
    }

    // Sequence model: sliding training windows, loss at every timestep.
    auto train_starts = window_starts(feats, mobility::Split::Train, cfg.window,
                                      cfg.train_stride);
    {
        std::vector<size_t> tmp(train_starts.begin(), train_starts.end());
        tmp = take_fraction(std::move(tmp), cfg.data_fraction, cfg.seed);
        train_starts = std::move(tmp);
    }
    auto val_starts = window_starts(feats, mobility::Split::Val, cfg.window, cfg.train_stride);
    if (train_starts.empty() || val_starts.empty())
        throw ConfigError("not enough samples for the requested window length");

    auto &model = *bundle.sequence;
    const auto groups =
        posmodels::sequence_loss_groups(cfg.pos_weight, cfg.speed_weight, cfg.heading_weight);

    auto train_batch = [&](const std::vector<int> &idx) {
        Matrix x, y;
        window_matrices(feats, train_starts, idx, cfg.window, cfg.label_scale, cfg.speed_scale,
                        x, y);
        model.zero_grad();
        const Matrix pred = model.forward(x, static_cast<int>(idx.size()));
        Matrix grad;
        const double loss = nn::weighted_mse_loss(pred, y, groups, &grad);
        model.backward(grad, static_cast<int>(idx.size()));
        return loss;
    };
    auto val_loss = [&]() {
        double sum = 0.0;
        int count = 0;
        constexpr int kChunk = 32;
        for (size_t s = 0; s < val_starts.size(); s += kChunk) {
            std::vector<int> idx;
            for (size_t k = s; k < std::min(val_starts.size(), s + kChunk); ++k)
                idx.push_back(static_cast<int>(k));
            Matrix x, y;
            window_matrices(feats, val_starts, idx, cfg.window, cfg.label_scale,
                            cfg.speed_scale, x, y);
            const Matrix pred = model.forward(x, static_cast<int>(idx.size()));
            sum += nn::weighted_mse_loss(pred, y, groups) * static_cast<double>(idx.size());
            count += static_cast<int>(idx.size());
        }
        return sum / std::max(1, count);
    };
    bundle.history = nn::run_schedule(blocks, cfg.schedule, derive_seed(cfg.seed, 0x7717ull),
                                      static_cast<int>(train_starts.size()), train_batch,
                                      val_loss);
    return bundle;
}

} // namespace

io::ModelBundle train(const io::Dataset &feats, const TrainConfig &cfg)
{
    return train_internal(feats, cfg, nullptr, nullptr);
}

io::ModelBundle transfer(io::ModelBundle &source, const io::Dataset &feats,
                         const TransferConfig &cfg)
{
    TrainConfig tc = cfg.train;
    tc.model = source.kind;
    tc.window = source.window;
    tc.label_scale = source.label_scale;
    tc.speed_scale = source.speed_scale;
    tc.data_fraction = cfg.plan.data_fraction;
    tc.schedule.early_stop_phase1 = true;
    return train_internal(feats, tc, &source, &cfg.plan);
}

// ------------------------------------------------------------- evaluation ---

eval::ErrorReport evaluate(io::ModelBundle &model, const io::Dataset &feats,
                           const EvalConfig &cfg)
{
    if (feats.kind != "features" || !feats.feature_spec)
        throw ConfigError("evaluation needs a features dataset");
    if (feats.feature_spec->variant_name() != model.feature_spec.variant_name() ||
        feats.feature_spec->feature_length() != model.input_dim)
        throw ConfigError("model expects feature variant " + model.feature_spec.variant_name() +
                          " with width " + std::to_string(model.input_dim) + ", dataset has " +
                          feats.feature_spec->variant_name() + " width " +
                          std::to_string(feats.feature_spec->feature_length()));
    if (!cfg.force && model.feature_config_hash != feats.config_hash)
        throw ConfigError("dataset lineage does not match the model's training data "
                          "(pass force to evaluate anyway)");

    std::vector<eval::SampleError> errors;

    if (model.snapshot) {
        const auto idx = split_indices(feats, cfg.split);
        if (idx.empty())
            throw ConfigError("no samples in the requested split");
        Matrix x, y;
        snapshot_matrices(feats, idx, 1.0, x, y); // y holds raw positions here
        const Matrix pred = posmodels::predict_positions(*model.snapshot, x, model.label_scale);
        for (size_t c = 0; c < idx.size(); ++c) {
            const auto &r = feats.samples[idx[c]];
            eval::SampleError e;
            e.track = r.track;
            e.time_s = r.time_s;
            e.position_err_m = eval::position_error(
                Vec2(pred(0, static_cast<Eigen::Index>(c)), pred(1, static_cast<Eigen::Index>(c))),
                r.position);
            e.los = std::any_of(r.los.begin(), r.los.end(), [](uint8_t v) { return v != 0; });
            errors.push_back(e);
        }
    } else if (model.sequence) {
        for (const auto &[lo, hi] : track_ranges(feats, cfg.split)) {
            const int n = static_cast<int>(hi - lo);
            const int d = model.input_dim;
            Matrix x(d, n);
            for (int c = 0; c < n; ++c)
                x.col(c) = Eigen::Map<const Eigen::VectorXd>(
                    feats.samples[lo + static_cast<size_t>(c)].features.data(), d);
            const auto preds = posmodels::predict_track(*model.sequence, x, model.window,
                                                        model.label_scale, model.speed_scale);
            for (int c = 0; c < n; ++c) {
                const auto &r = feats.samples[lo + static_cast<size_t>(c)];
                const auto &p = preds[static_cast<size_t>(c)];
                eval::SampleError e;
                e.track = r.track;
                e.time_s = r.time_s;
                e.position_err_m = eval::position_error(p.position, r.position);
                e.speed_err_ms = std::abs(p.speed_ms - r.speed_ms);
                e.heading_err_deg = eval::heading_error(p.heading, r.heading).degrees;
                e.los = std::any_of(r.los.begin(), r.los.end(),
                                    [](uint8_t v) { return v != 0; });
                errors.push_back(e);
            }
        }
    } else {
        throw std::logic_error("empty model bundle");
    }

    const std::string label =
        cfg.label.empty() ? model.kind + "+" + model.feature_spec.variant_name() : cfg.label;
    return eval::build_report(label, std::move(errors), cfg.config_hash);
}

eval::ErrorReport run_ekf(const io::Dataset &csi, const EkfRunConfig &cfg)
{
    if (csi.kind != "csi")
        throw ConfigError("the EKF benchmark needs a csi dataset");
    if (csi.gnb_positions.empty())
        throw ConfigError("dataset carries no gNB positions");

    std::vector<eval::SampleError> errors;
    for (const auto &[lo, hi] : track_ranges(csi, cfg.split)) {
        std::vector<ekf::TrackStep> steps;
        steps.reserve(hi - lo);
        for (size_t i = lo; i < hi; ++i) {
            const auto &r = csi.samples[i];
            channel::SampleMeasurement m = r.measurement;
            if (cfg.uncertainty) {
                std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<uint64_t>(r.track),
                                                static_cast<uint64_t>(r.index)));
                features::inject_uncertainty(m, features::UncertaintyKind::All, cfg.unc, rng);
            }
            ekf::TrackStep step;
            for (size_t g = 0; g < r.los.size(); ++g) {
                if (!r.los[g] || m.paths_per_gnb[g].empty())
                    continue;
                const auto &dominant = m.paths_per_gnb[g][0];
                ekf::RangeBearing rb;
                rb.gnb_pos = xy(csi.gnb_positions[g]);
                rb.range_m = dominant.delay_s * kSpeedOfLight;
                rb.azimuth_rad = dominant.aoa_azimuth;
                step.measurements.push_back(rb);
            }
            steps.push_back(std::move(step));
        }

        const auto &first = csi.samples[lo];
        const Vec2 init_vel = first.speed_ms * first.heading;
        const auto estimates = ekf::run_ekf_track(steps, first.position, init_vel, cfg.params);

        for (size_t i = lo; i < hi; ++i) {
            const auto &est = estimates[i - lo];
            if (!est.evaluated)
                continue; // before the first LoS update
            const auto &r = csi.samples[i];
            eval::SampleError e;
            e.track = r.track;
            e.time_s = r.time_s;
            e.position_err_m = eval::position_error(est.position, r.position);
            e.speed_err_ms = std::abs(est.velocity.norm() - r.speed_ms);
            if (est.velocity.norm() > 0.0)
                e.heading_err_deg = eval::heading_error(est.velocity, r.heading).degrees;
            e.los = std::any_of(r.los.begin(), r.los.end(), [](uint8_t v) { return v != 0; });
            errors.push_back(e);
        }
    }
    return eval::build_report(cfg.label, std::move(errors), cfg.config_hash);
}

eval::ErrorReport centroid_baseline(const io::Dataset &feats, mobility::Split split,
                                    const std::string &label)
{
    Vec2 centroid(0.0, 0.0);
    size_t n = 0;
    for (const auto &r : feats.samples)
        if (r.split == mobility::Split::Train) {
            centroid += r.position;
            ++n;
        }
    if (n == 0)
        throw ConfigError("no training samples for the centroid baseline");
    centroid /= static_cast<double>(n);

    std::vector<eval::SampleError> errors;
    for (const auto &r : feats.samples) {
        if (r.split != split)
            continue;
        eval::SampleError e;
        e.track = r.track;
        e.time_s = r.time_s;
        e.position_err_m = eval::position_error(centroid, r.position);
        e.los = std::any_of(r.los.begin(), r.los.end(), [](uint8_t v) { return v != 0; });
        errors.push_back(e);
    }
    return eval::build_report(label, std::move(errors), 0);
}

} // namespace csiloc::pipeline
