// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/io.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace csiloc::io {

using json = nlohmann::ordered_json;

namespace {

std::string hex64(uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << v;
    return os.str();
}

uint64_t parse_hex64(const std::string &s) { return std::stoull(s, nullptr, 16); }

std::string split_name(mobility::Split s)
{
    switch (s) {
    case mobility::Split::Train:
        return "train";
    case mobility::Split::Val:
        return "val";
    case mobility::Split::Test:
        return "test";
    }
    return "?";
}

mobility::Split split_from(const std::string &s)
{
    if (s == "train")
        return mobility::Split::Train;
    if (s == "val")
        return mobility::Split::Val;
    if (s == "test")
        return mobility::Split::Test;
    throw ConfigError("unknown split label: " + s);
}

json feature_spec_to_json(const features::FeatureSpec &fs)
{
    json j;
    j["domain"] = fs.domain == features::FeatureSpec::Domain::Freq ? "freq" : "time";
    j["freq"] = features::freq_variant_name(fs.freq);
    j["granularity"] = fs.granularity == features::Granularity::RbLevel ? "rb" : "bw";
    j["combo"] = {{"tof", fs.combo.tof}, {"rp", fs.combo.rp}, {"aoa", fs.combo.aoa}};
    j["paths"] = fs.path_mode == features::PathMode::Dominant ? "dominant" : "top5";
    j["n_gnbs"] = fs.n_gnbs;
    j["n_beams"] = fs.n_beams;
    j["n_rbs"] = fs.n_rbs;
    return j;
}

features::FeatureSpec feature_spec_from_json(const json &j)
{
    features::FeatureSpec fs;
    fs.domain = j.at("domain") == "freq" ? features::FeatureSpec::Domain::Freq
                                         : features::FeatureSpec::Domain::Time;
    fs.freq = features::freq_variant_from_name(j.at("freq"));
    fs.granularity = j.at("granularity") == "rb" ? features::Granularity::RbLevel
                                                 : features::Granularity::BwLevel;
    fs.combo.tof = j.at("combo").at("tof").get<bool>();
    fs.combo.rp = j.at("combo").at("rp").get<bool>();
    fs.combo.aoa = j.at("combo").at("aoa").get<bool>();
    fs.path_mode = j.at("paths") == "dominant" ? features::PathMode::Dominant
                                               : features::PathMode::Top5;
    fs.n_gnbs = j.at("n_gnbs").get<int>();
    fs.n_beams = j.at("n_beams").get<int>();
    fs.n_rbs = j.at("n_rbs").get<int>();
    return fs;
}

json norm_stats_to_json(const features::NormStats &st)
{
    json slots = json::array();
    for (const auto &s : st.slots)
        slots.push_back({{"k", s.kind == features::SlotStat::Kind::MinMax ? "m" : "p"},
                         {"lo", s.min},
                         {"hi", s.max},
                         {"x", s.missing}});
    return {{"fitted", st.fitted}, {"slots", slots}};
}

features::NormStats norm_stats_from_json(const json &j)
{
    features::NormStats st;
    st.fitted = j.at("fitted").get<bool>();
    for (const auto &sj : j.at("slots")) {
        features::SlotStat s;
        s.kind = sj.at("k") == "m" ? features::SlotStat::Kind::MinMax
                                   : features::SlotStat::Kind::Passthrough;
        s.min = sj.at("lo").get<double>();
        s.max = sj.at("hi").get<double>();
        s.missing = sj.at("x").get<double>();
        st.slots.push_back(s);
    }
    return st;
}

void write_doubles(std::ofstream &out, const double *data, size_t n)
{
    out.write(reinterpret_cast<const char *>(data), static_cast<std::streamsize>(n * 8));
}

} // namespace

uint64_t config_hash_of(const std::string &canonical_json) { return fnv1a(canonical_json); }

std::vector<const SampleRecord *> Dataset::split_samples(mobility::Split s) const
{
    std::vector<const SampleRecord *> out;
    for (const auto &r : samples)
        if (r.split == s)
            out.push_back(&r);
    return out;
}

void save_dataset(const Dataset &ds, const std::string &stem)
{
    std::ofstream txt(stem + ".jsonl");
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!txt || !bin)
        throw std::runtime_error("cannot write dataset: " + stem);

    json header;
    header["schema"] = "csiloc-dataset-v1";
    header["kind"] = ds.kind;
    header["scene_hash"] = hex64(ds.scene_hash);
    header["config_hash"] = hex64(ds.config_hash);
    header["seed"] = ds.seed;
    header["ofdm"] = {{"scs_hz", ds.ofdm.subcarrier_spacing_hz},
                      {"rb_size", ds.ofdm.rb_size},
                      {"n_rbs", ds.ofdm.n_rbs},
                      {"fft_size", ds.ofdm.fft_size}};
    header["n_gnbs"] = ds.n_gnbs;
    header["n_beams"] = ds.n_beams;
    json gpos = json::array();
    for (const auto &p : ds.gnb_positions)
        gpos.push_back({p.x(), p.y(), p.z()});
    header["gnb_positions"] = gpos;
    header["n_samples"] = ds.samples.size();
    if (ds.feature_spec) {
        header["feature"] = feature_spec_to_json(*ds.feature_spec);
        header["norm"] = norm_stats_to_json(ds.norm);
        header["label_noise_std"] = ds.label_noise_std;
    }
    txt << header.dump() << "\n";

    uint64_t offset = 0;
    for (const auto &r : ds.samples) {
        json line;
        line["tr"] = r.track;
        line["i"] = r.index;
        line["t"] = r.time_s;
        line["pos"] = {r.position.x(), r.position.y()};
        line["spd"] = r.speed_ms;
        line["hd"] = {r.heading.x(), r.heading.y()};
        line["split"] = split_name(r.split);
        line["los"] = r.los;
        line["meas"] = r.meas;

        size_t count = 0;
        if (ds.kind == "csi") {
            json paths = json::array();
            for (const auto &list : r.measurement.paths_per_gnb) {
                json glist = json::array();
                for (const auto &p : list)
                    glist.push_back({p.delay_s, p.power_dbm, p.aoa_azimuth, p.aoa_elevation});
                paths.push_back(glist);
            }
            line["paths"] = paths;
            count = r.measurement.grid.values.size() * 2;
            std::vector<double> flat;
            flat.reserve(count);
            for (const auto &h : r.measurement.grid.values) {
                flat.push_back(h.real());
                flat.push_back(h.imag());
            }
            write_doubles(bin, flat.data(), flat.size());
        } else {
            count = r.features.size();
            write_doubles(bin, r.features.data(), r.features.size());
        }
        line["blob"] = {offset, count};
        offset += count;
        txt << line.dump() << "\n";
    }
}

Dataset load_dataset(const std::string &stem)
{
    std::ifstream txt(stem + ".jsonl");
    std::ifstream bin(stem + ".bin", std::ios::binary);
    if (!txt || !bin)
        throw ConfigError("cannot open dataset: " + stem);

    std::string line;
    if (!std::getline(txt, line))
        throw ConfigError("dataset is empty: " + stem);
    json header = json::parse(line);
    if (header.value("schema", "") != "csiloc-dataset-v1")
        throw ConfigError("unsupported dataset schema in " + stem);

    Dataset ds;
    ds.kind = header.at("kind").get<std::string>();
    ds.scene_hash = parse_hex64(header.at("scene_hash"));
    ds.config_hash = parse_hex64(header.at("config_hash"));
    ds.seed = header.at("seed").get<uint64_t>();
    ds.ofdm.subcarrier_spacing_hz = header.at("ofdm").at("scs_hz").get<double>();
    ds.ofdm.rb_size = header.at("ofdm").at("rb_size").get<int>();
    ds.ofdm.n_rbs = header.at("ofdm").at("n_rbs").get<int>();
    ds.ofdm.fft_size = header.at("ofdm").at("fft_size").get<int>();
    ds.n_gnbs = header.at("n_gnbs").get<int>();
    ds.n_beams = header.at("n_beams").get<int>();
    for (const auto &pj : header.value("gnb_positions", json::array()))
        ds.gnb_positions.emplace_back(pj[0].get<double>(), pj[1].get<double>(),
                                      pj[2].get<double>());
    if (header.contains("feature")) {
        ds.feature_spec = feature_spec_from_json(header["feature"]);
        ds.norm = norm_stats_from_json(header.at("norm"));
        ds.label_noise_std = header.value("label_noise_std", 0.0);
    }

    while (std::getline(txt, line)) {
        if (line.empty())
            continue;
        json j = json::parse(line);
        SampleRecord r;
        r.track = j.at("tr").get<int>();
        r.index = j.at("i").get<int>();
        r.time_s = j.at("t").get<double>();
        r.position = Vec2(j.at("pos")[0].get<double>(), j.at("pos")[1].get<double>());
        r.speed_ms = j.at("spd").get<double>();
        r.heading = Vec2(j.at("hd")[0].get<double>(), j.at("hd")[1].get<double>());
        r.split = split_from(j.at("split"));
        r.los = j.at("los").get<std::vector<uint8_t>>();
        r.meas = j.at("meas").get<std::vector<uint8_t>>();

        const uint64_t offset = j.at("blob")[0].get<uint64_t>();
        const size_t count = j.at("blob")[1].get<size_t>();
        std::vector<double> blob(count);
        bin.seekg(static_cast<std::streamoff>(offset * 8));
        bin.read(reinterpret_cast<char *>(blob.data()), static_cast<std::streamsize>(count * 8));
        if (!bin)
            throw ConfigError("dataset sidecar truncated: " + stem);

        if (ds.kind == "csi") {
            auto &mm = r.measurement;
            mm.grid.resize(ds.n_gnbs, ds.n_beams, ds.ofdm.n_rbs);
            mm.grid.ue_pos = r.position;
            mm.grid.time_s = r.time_s;
            mm.grid.los = r.los;
            for (size_t k = 0; k < mm.grid.values.size(); ++k)
                mm.grid.values[k] = {blob[2 * k], blob[2 * k + 1]};
            for (int g = 0; g < ds.n_gnbs; ++g)
                for (int b = 0; b < ds.n_beams; ++b)
                    for (int m = 0; m < ds.ofdm.n_rbs; ++m)
                        mm.grid.mask[mm.grid.idx(g, b, m)] = r.meas[static_cast<size_t>(g)];
            for (const auto &glist : j.at("paths")) {
                std::vector<channel::TimePath> list;
                for (const auto &pj : glist) {
                    channel::TimePath p;
                    p.delay_s = pj[0].get<double>();
                    p.power_dbm = pj[1].get<double>();
                    p.aoa_azimuth = pj[2].get<double>();
                    p.aoa_elevation = pj[3].get<double>();
                    list.push_back(p);
                }
                mm.paths_per_gnb.push_back(std::move(list));
            }
        } else {
            r.features = std::move(blob);
        }
        ds.samples.push_back(std::move(r));
    }
    return ds;
}

// ---------------------------------------------------------------- models ---

std::vector<nn::ParamBlock> ModelBundle::params()
{
    if (snapshot)
        return snapshot->params();
    if (sequence)
        return sequence->params();
    throw std::logic_error("empty model bundle");
}

void save_model(ModelBundle &bundle, const std::string &path)
{
    auto blocks = bundle.params();

    json manifest;
    manifest["schema"] = "csiloc-model-v1";
    manifest["kind"] = bundle.kind;
    manifest["input_dim"] = bundle.input_dim;
    manifest["window"] = bundle.window;
    manifest["widths"] = {{"dense", bundle.widths.dense},
                          {"parallel_hidden", bundle.widths.parallel_hidden},
                          {"count_target", bundle.widths.count_target},
                          {"count_tolerance", bundle.widths.count_tolerance}};
    manifest["feature"] = feature_spec_to_json(bundle.feature_spec);
    manifest["norm"] = norm_stats_to_json(bundle.norm);
    manifest["label_scale"] = bundle.label_scale;
    manifest["speed_scale"] = bundle.speed_scale;
    manifest["config_hash"] = hex64(bundle.config_hash);
    manifest["feature_config_hash"] = hex64(bundle.feature_config_hash);
    manifest["history"] = {{"train", bundle.history.train_loss},
                           {"val", bundle.history.val_loss},
                           {"lr", bundle.history.lr},
                           {"best_epoch", bundle.history.best_epoch},
                           {"best_val_loss", bundle.history.best_val_loss}};
    json table = json::array();
    for (const auto &b : blocks)
        table.push_back({{"name", b.name}, {"size", b.size}});
    manifest["blocks"] = table;

    const std::string mstr = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write model: " + path);
    out.write("CSLM", 4);
    const uint32_t version = 1;
    out.write(reinterpret_cast<const char *>(&version), 4);
    const uint64_t mlen = mstr.size();
    out.write(reinterpret_cast<const char *>(&mlen), 8);
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    for (const auto &b : blocks)
        out.write(reinterpret_cast<const char *>(b.value),
                  static_cast<std::streamsize>(b.size * 8));
}

ModelBundle load_model(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open model: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CSLM", 4) != 0)
        throw ConfigError("not a csiloc model file: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char *>(&version), 4);
    if (version != 1)
        throw ConfigError("unsupported model version in " + path);
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char *>(&mlen), 8);
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    if (!in)
        throw ConfigError("truncated model manifest: " + path);
    json manifest = json::parse(mstr);

    ModelBundle b;
    b.kind = manifest.at("kind").get<std::string>();
    b.input_dim = manifest.at("input_dim").get<int>();
    b.window = manifest.at("window").get<int>();
    b.widths.dense = manifest.at("widths").at("dense").get<std::vector<int>>();
    b.widths.parallel_hidden = manifest.at("widths").at("parallel_hidden").get<int>();
    b.widths.count_target = manifest.at("widths").at("count_target").get<long long>();
    b.widths.count_tolerance = manifest.at("widths").at("count_tolerance").get<double>();
    b.feature_spec = feature_spec_from_json(manifest.at("feature"));
    b.norm = norm_stats_from_json(manifest.at("norm"));
    b.label_scale = manifest.at("label_scale").get<double>();
    b.speed_scale = manifest.at("speed_scale").get<double>();
    b.config_hash = parse_hex64(manifest.at("config_hash"));
    b.feature_config_hash = parse_hex64(manifest.at("feature_config_hash"));
    b.history.train_loss = manifest.at("history").at("train").get<std::vector<double>>();
    b.history.val_loss = manifest.at("history").at("val").get<std::vector<double>>();
    b.history.lr = manifest.at("history").at("lr").get<std::vector<double>>();
    b.history.best_epoch = manifest.at("history").at("best_epoch").get<int>();
    b.history.best_val_loss = manifest.at("history").at("best_val_loss").get<double>();

    if (b.kind == "snapshot")
        b.snapshot.emplace(b.input_dim);
    else if (b.kind == "sequence")
        b.sequence.emplace(b.input_dim, b.widths);
    else
        throw ConfigError("unknown model kind: " + b.kind);

    auto blocks = b.params();
    const auto &table = manifest.at("blocks");
    if (table.size() != blocks.size())
        throw ConfigError("model block table mismatch in " + path);
    for (size_t i = 0; i < blocks.size(); ++i) {
        if (table[i].at("name") != blocks[i].name ||
            table[i].at("size").get<size_t>() != blocks[i].size)
            throw ConfigError("model block layout mismatch in " + path);
        in.read(reinterpret_cast<char *>(blocks[i].value),
                static_cast<std::streamsize>(blocks[i].size * 8));
    }
    if (!in)
        throw ConfigError("truncated model parameters: " + path);
    return b;
}

// --------------------------------------------------------------- reports ---

namespace {

json aggregates_to_json(const eval::Aggregates &a)
{
    return {{"count", a.count}, {"median", a.median}, {"mean", a.mean},   {"p5", a.p5},
            {"p25", a.p25},     {"p75", a.p75},       {"p80", a.p80},     {"p95", a.p95}};
}

eval::Aggregates aggregates_from_json(const json &j)
{
    eval::Aggregates a;
    a.count = j.at("count").get<size_t>();
    a.median = j.at("median").get<double>();
    a.mean = j.at("mean").get<double>();
    a.p5 = j.at("p5").get<double>();
    a.p25 = j.at("p25").get<double>();
    a.p75 = j.at("p75").get<double>();
    a.p80 = j.at("p80").get<double>();
    a.p95 = j.at("p95").get<double>();
    return a;
}

} // namespace

void save_report(const eval::ErrorReport &report, const std::string &path)
{
    json j;
    j["schema"] = "csiloc-report-v1";
    j["label"] = report.label;
    j["config_hash"] = hex64(report.config_hash);
    j["nlos_fraction"] = report.nlos_fraction;
    j["position"] = {{"all", aggregates_to_json(report.position_all)},
                     {"los", aggregates_to_json(report.position_los)},
                     {"nlos", aggregates_to_json(report.position_nlos)}};
    if (report.speed_all)
        j["speed"] = aggregates_to_json(*report.speed_all);
    if (report.heading_all)
        j["heading"] = aggregates_to_json(*report.heading_all);
    json ecdf = json::array();
    for (const auto &[v, f] : report.position_ecdf)
        ecdf.push_back({v, f});
    j["position_ecdf"] = ecdf;
    json table = json::array();
    for (const auto &s : report.samples) {
        json row = {{"tr", s.track},
                    {"t", s.time_s},
                    {"pos_err", s.position_err_m},
                    {"los", s.los}};
        if (s.speed_err_ms)
            row["spd_err"] = *s.speed_err_ms;
        if (s.heading_err_deg)
            row["hd_err"] = *s.heading_err_deg;
        table.push_back(row);
    }
    j["samples"] = table;

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write report: " + path);
    out << j.dump(1) << "\n";
}

eval::ErrorReport load_report(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open report: " + path);
    json j = json::parse(in);
    if (j.value("schema", "") != "csiloc-report-v1")
        throw ConfigError("unsupported report schema in " + path);
    eval::ErrorReport r;
    r.label = j.at("label").get<std::string>();
    r.config_hash = parse_hex64(j.at("config_hash"));
    r.nlos_fraction = j.at("nlos_fraction").get<double>();
    r.position_all = aggregates_from_json(j.at("position").at("all"));
    r.position_los = aggregates_from_json(j.at("position").at("los"));
    r.position_nlos = aggregates_from_json(j.at("position").at("nlos"));
    if (j.contains("speed"))
        r.speed_all = aggregates_from_json(j["speed"]);
    if (j.contains("heading"))
        r.heading_all = aggregates_from_json(j["heading"]);
    for (const auto &e : j.at("position_ecdf"))
        r.position_ecdf.emplace_back(e[0].get<double>(), e[1].get<double>());
    for (const auto &row : j.at("samples")) {
        eval::SampleError s;
        s.track = row.at("tr").get<int>();
        s.time_s = row.at("t").get<double>();
        s.position_err_m = row.at("pos_err").get<double>();
        s.los = row.at("los").get<bool>();
        if (row.contains("spd_err"))
            s.speed_err_ms = row["spd_err"].get<double>();
        if (row.contains("hd_err"))
            s.heading_err_deg = row["hd_err"].get<double>();
        r.samples.push_back(s);
    }
    return r;
}

void write_report_table(const std::vector<std::string> &report_paths, const std::string &out_path)
{
    std::ofstream out(out_path);
    if (!out)
        throw std::runtime_error("cannot write table: " + out_path);
    out << "label\tstratum\tcount\tmedian\tmean\tp80\tp95\n";
    for (const auto &p : report_paths) {
        const eval::ErrorReport r = load_report(p);
        const auto row = [&](const std::string &stratum, const eval::Aggregates &a) {
            out << r.label << "\t" << stratum << "\t" << a.count << "\t" << a.median << "\t"
                << a.mean << "\t" << a.p80 << "\t" << a.p95 << "\n";
        };
        row("all", r.position_all);
        row("los", r.position_los);
        row("nlos", r.position_nlos);
    }
}

} // namespace csiloc::io
