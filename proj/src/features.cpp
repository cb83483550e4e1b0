// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/features.hpp"

#include <algorithm>
#include <cmath>

namespace csiloc::features {

namespace {

constexpr double kPowerFloorDb = -300.0; // guards log of an exact spectral null

// One pre-normalization quantity vector with per-slot availability.
struct RawVector {
    std::vector<double> values;
    std::vector<uint8_t> available;

    void push(double v, bool avail)
    {
        values.push_back(avail ? v : 0.0);
        available.push_back(avail ? 1 : 0);
    }
};

double power_db(const std::complex<double> &h)
{
    const double p = std::norm(h);
    return p > 0.0 ? 10.0 * std::log10(p) : kPowerFloorDb;
}

// Raw builders; slot order is (gnb, beam, rb) ascending.

RawVector raw_fr_c(const channel::CsiGrid &g)
{
    RawVector r;
    for (int gi = 0; gi < g.n_gnbs; ++gi)
        for (int b = 0; b < g.n_beams; ++b)
            for (int m = 0; m < g.n_rbs; ++m) {
                const bool avail = g.mask[g.idx(gi, b, m)] != 0;
                const auto h = g.at(gi, b, m);
                r.push(h.real(), avail);
                r.push(h.imag(), avail);
            }
    return r;
}

RawVector raw_fr_pow(const channel::CsiGrid &g)
{
    RawVector r;
    for (int gi = 0; gi < g.n_gnbs; ++gi)
        for (int b = 0; b < g.n_beams; ++b)
            for (int m = 0; m < g.n_rbs; ++m) {
                const bool avail = g.mask[g.idx(gi, b, m)] != 0;
                r.push(avail ? power_db(g.at(gi, b, m)) : 0.0, avail);
            }
    return r;
}

// Wrapped phase differences between consecutive RBs, extended with 0 at
// m = 0 so each beam contributes n_rbs slots.
RawVector raw_fr_ph(const channel::CsiGrid &g)
{
    RawVector r;
    for (int gi = 0; gi < g.n_gnbs; ++gi)
        for (int b = 0; b < g.n_beams; ++b)
            for (int m = 0; m < g.n_rbs; ++m) {
                const bool avail = m > 0 && g.mask[g.idx(gi, b, m)] != 0 &&
                                   g.mask[g.idx(gi, b, m - 1)] != 0;
                if (m == 0) {
                    r.push(0.0, g.mask[g.idx(gi, b, 0)] != 0);
                    continue;
                }
                const double d =
                    avail ? wrap_pi(std::arg(g.at(gi, b, m)) - std::arg(g.at(gi, b, m - 1)))
                          : 0.0;
                r.push(d, avail);
            }
    return r;
}

RawVector raw_time(const std::vector<std::vector<channel::TimePath>> &paths,
                   const FeatureSpec &spec)
{
    RawVector r;
    static const std::vector<channel::TimePath> kNoPaths;
    for (int gi = 0; gi < spec.n_gnbs; ++gi) {
        const auto &list =
            gi < static_cast<int>(paths.size()) ? paths[static_cast<size_t>(gi)] : kNoPaths;
        for (int k = 0; k < spec.paths_per_gnb(); ++k) {
            const bool has = k < static_cast<int>(list.size());
            const channel::TimePath p = has ? list[static_cast<size_t>(k)] : channel::TimePath{};
            if (spec.combo.tof)
                r.push(p.delay_s * kSpeedOfLight, has);
            if (spec.combo.rp)
                r.push(p.power_dbm, has);
            if (spec.combo.aoa) {
                if (spec.path_mode == PathMode::Dominant) {
                    const Vec3 d = direction_from_angles(p.aoa_azimuth, p.aoa_elevation);
                    r.push(d.x(), has);
                    r.push(d.y(), has);
                    r.push(d.z(), has);
                } else {
                    r.push(wrap_pi(p.aoa_azimuth), has);
                }
            }
        }
    }
    return r;
}

// Slot kinds of the normalization basis for each pipeline.
std::vector<SlotStat> basis_slots(const FeatureSpec &spec)
{
    std::vector<SlotStat> slots;
    auto minmax = [](double missing) {
        return SlotStat{SlotStat::Kind::MinMax, 0.0, 0.0, missing};
    };
    auto pass = [](double missing) {
        return SlotStat{SlotStat::Kind::Passthrough, 0.0, 0.0, missing};
    };

    if (spec.domain == FeatureSpec::Domain::Freq) {
        const int gbm = spec.n_gnbs * spec.n_beams * spec.n_rbs;
        switch (spec.freq) {
        case FreqVariant::FrC:
            slots.assign(static_cast<size_t>(2 * gbm), minmax(0.0));
            break;
        case FreqVariant::FrPow:
        case FreqVariant::FrPP: // basis of FR-PP is the RB power vector
            slots.assign(static_cast<size_t>(gbm), minmax(0.0));
            break;
        case FreqVariant::FrPh:
            slots.assign(static_cast<size_t>(gbm), pass(0.0));
            break;
        case FreqVariant::FrPowPh:
            slots.assign(static_cast<size_t>(gbm), minmax(0.0));
            slots.insert(slots.end(), static_cast<size_t>(gbm), pass(0.0));
            break;
        }
        return slots;
    }

    for (int gi = 0; gi < spec.n_gnbs; ++gi)
        for (int k = 0; k < spec.paths_per_gnb(); ++k) {
            if (spec.combo.tof)
                slots.push_back(minmax(1.0)); // absent path reads as max range
            if (spec.combo.rp)
                slots.push_back(minmax(0.0));
            if (spec.combo.aoa)
                for (int c = 0; c < spec.aoa_components(); ++c)
                    slots.push_back(pass(0.0));
        }
    return slots;
}

RawVector build_basis(const FeatureSpec &spec, const channel::SampleMeasurement &m)
{
    if (spec.domain == FeatureSpec::Domain::Time)
        return raw_time(m.paths_per_gnb, spec);
    switch (spec.freq) {
    case FreqVariant::FrC:
        return raw_fr_c(m.grid);
    case FreqVariant::FrPow:
    case FreqVariant::FrPP:
        return raw_fr_pow(m.grid);
    case FreqVariant::FrPh:
        return raw_fr_ph(m.grid);
    case FreqVariant::FrPowPh: {
        RawVector r = raw_fr_pow(m.grid);
        RawVector ph = raw_fr_ph(m.grid);
        r.values.insert(r.values.end(), ph.values.begin(), ph.values.end());
        r.available.insert(r.available.end(), ph.available.begin(), ph.available.end());
        return r;
    }
    }
    throw std::logic_error("unreachable feature domain");
}

} // namespace

int FeatureSpec::basis_length() const
{
    return static_cast<int>(basis_slots(*this).size());
}

int FeatureSpec::feature_length() const
{
    if (domain == Domain::Time)
        return n_gnbs * paths_per_gnb() * fields_per_path();
    const int gb = n_gnbs * n_beams;
    const int rbs = granularity == Granularity::BwLevel ? 1 : n_rbs;
    switch (freq) {
    case FreqVariant::FrPow:
    case FreqVariant::FrPh:
        return gb * rbs;
    case FreqVariant::FrC:
    case FreqVariant::FrPP:
    case FreqVariant::FrPowPh:
        return 2 * gb * rbs;
    }
    return 0;
}

std::string FeatureSpec::variant_name() const
{
    if (domain == Domain::Time) {
        std::string name = "td";
        if (combo.tof)
            name += "-tof";
        if (combo.rp)
            name += "-rp";
        if (combo.aoa)
            name += "-aoa";
        name += path_mode == PathMode::Dominant ? "-dominant" : "-top5";
        return name;
    }
    std::string name = freq_variant_name(freq);
    if (granularity == Granularity::BwLevel)
        name += "-bw";
    return name;
}

FreqVariant freq_variant_from_name(const std::string &name)
{
    if (name == "fr-c")
        return FreqVariant::FrC;
    if (name == "fr-pow")
        return FreqVariant::FrPow;
    if (name == "fr-ph")
        return FreqVariant::FrPh;
    if (name == "fr-pow-ph")
        return FreqVariant::FrPowPh;
    if (name == "fr-pp")
        return FreqVariant::FrPP;
    throw ConfigError("unknown frequency feature: " + name);
}

std::string freq_variant_name(FreqVariant v)
{
    switch (v) {
    case FreqVariant::FrC:
        return "fr-c";
    case FreqVariant::FrPow:
        return "fr-pow";
    case FreqVariant::FrPh:
        return "fr-ph";
    case FreqVariant::FrPowPh:
        return "fr-pow-ph";
    case FreqVariant::FrPP:
        return "fr-pp";
    }
    return "?";
}

double NormStats::apply(size_t slot, double value, bool available) const
{
    const SlotStat &s = slots[slot];
    if (!available)
        return s.missing;
    if (s.kind == SlotStat::Kind::Passthrough)
        return value;
    const double span = s.max - s.min;
    if (span <= 0.0)
        return 0.0;
    return (value - s.min) / span; // test-split values are not clamped
}

NormStats fit_norm_stats(const FeatureSpec &spec,
                         const std::vector<const channel::SampleMeasurement *> &train)
{
    NormStats st;
    st.slots = basis_slots(spec);
    std::vector<bool> seen(st.slots.size(), false);
    for (const auto *m : train) {
        const RawVector r = build_basis(spec, *m);
        if (r.values.size() != st.slots.size())
            throw std::logic_error("normalization basis length mismatch");
        for (size_t i = 0; i < r.values.size(); ++i) {
            if (!r.available[i] || st.slots[i].kind != SlotStat::Kind::MinMax)
                continue;
            if (!seen[i]) {
                st.slots[i].min = st.slots[i].max = r.values[i];
                seen[i] = true;
            } else {
                st.slots[i].min = std::min(st.slots[i].min, r.values[i]);
                st.slots[i].max = std::max(st.slots[i].max, r.values[i]);
            }
        }
    }
    st.fitted = true;
    return st;
}

namespace {

std::vector<double> normalized_basis(const FeatureSpec &spec,
                                     const channel::SampleMeasurement &m, const NormStats &st)
{
    const RawVector r = build_basis(spec, m);
    if (r.values.size() != st.slots.size())
        throw std::invalid_argument("feature/stats layout mismatch");
    std::vector<double> out(r.values.size());
    for (size_t i = 0; i < r.values.size(); ++i)
        out[i] = st.apply(i, r.values[i], r.available[i] != 0);
    return out;
}

} // namespace

std::vector<double> fr_bw_level(const std::vector<double> &rb_level, int n_gnbs, int n_beams,
                                int n_rbs, int comps)
{
    const size_t expected = static_cast<size_t>(n_gnbs) * n_beams * n_rbs * comps;
    if (rb_level.size() != expected)
        throw std::invalid_argument("fr_bw_level: length mismatch");
    std::vector<double> out(static_cast<size_t>(n_gnbs) * n_beams * comps, 0.0);
    for (int gb = 0; gb < n_gnbs * n_beams; ++gb)
        for (int c = 0; c < comps; ++c) {
            double sum = 0.0;
            for (int m = 0; m < n_rbs; ++m)
                sum += rb_level[(static_cast<size_t>(gb) * n_rbs + m) * comps + c];
            out[static_cast<size_t>(gb) * comps + c] = sum / n_rbs;
        }
    return out;
}

std::vector<double> extract_features(const FeatureSpec &spec,
                                     const channel::SampleMeasurement &m, const NormStats &st)
{
    std::vector<double> values;
    int comps = 1;

    if (spec.domain == FeatureSpec::Domain::Time) {
        return normalized_basis(spec, m, st);
    }

    switch (spec.freq) {
    case FreqVariant::FrC:
        values = normalized_basis(spec, m, st);
        comps = 2;
        break;
    case FreqVariant::FrPow:
    case FreqVariant::FrPh:
        values = normalized_basis(spec, m, st);
        comps = 1;
        break;
    case FreqVariant::FrPowPh: {
        values = normalized_basis(spec, m, st);
        if (spec.granularity == Granularity::BwLevel) {
            // The two halves are independent RB-level blocks.
            const size_t half = values.size() / 2;
            std::vector<double> pow_half(values.begin(), values.begin() + half);
            std::vector<double> ph_half(values.begin() + half, values.end());
            auto a = fr_bw_level(pow_half, spec.n_gnbs, spec.n_beams, spec.n_rbs, 1);
            auto b = fr_bw_level(ph_half, spec.n_gnbs, spec.n_beams, spec.n_rbs, 1);
            a.insert(a.end(), b.begin(), b.end());
            return a;
        }
        return values;
    }
    case FreqVariant::FrPP: {
        const std::vector<double> pbar = normalized_basis(spec, m, st);
        const RawVector ph = raw_fr_ph(m.grid);
        values.resize(pbar.size() * 2);
        for (size_t i = 0; i < pbar.size(); ++i) {
            const double phase = ph.available[i] ? ph.values[i] : 0.0;
            values[2 * i] = pbar[i] * std::cos(phase);
            values[2 * i + 1] = pbar[i] * std::sin(phase);
        }
        comps = 2;
        break;
    }
    }

    if (spec.granularity == Granularity::BwLevel)
        return fr_bw_level(values, spec.n_gnbs, spec.n_beams, spec.n_rbs, comps);
    return values;
}

std::vector<double> fr_pow(const channel::CsiGrid &grid, const NormStats &stats)
{
    FeatureSpec spec;
    spec.freq = FreqVariant::FrPow;
    spec.n_gnbs = grid.n_gnbs;
    spec.n_beams = grid.n_beams;
    spec.n_rbs = grid.n_rbs;
    channel::SampleMeasurement m;
    m.grid = grid;
    return extract_features(spec, m, stats);
}

std::vector<double> fr_ph(const channel::CsiGrid &grid)
{
    const RawVector r = raw_fr_ph(grid);
    std::vector<double> out(r.values.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = r.available[i] ? r.values[i] : 0.0;
    return out;
}

std::vector<double> fr_pp(const channel::CsiGrid &grid, const NormStats &stats)
{
    FeatureSpec spec;
    spec.freq = FreqVariant::FrPP;
    spec.n_gnbs = grid.n_gnbs;
    spec.n_beams = grid.n_beams;
    spec.n_rbs = grid.n_rbs;
    channel::SampleMeasurement m;
    m.grid = grid;
    return extract_features(spec, m, stats);
}

std::vector<double> td_features(const std::vector<std::vector<channel::TimePath>> &paths_per_gnb,
                                const FeatureSpec &spec, const NormStats &stats)
{
    channel::SampleMeasurement m;
    m.paths_per_gnb = paths_per_gnb;
    return extract_features(spec, m, stats);
}

// -------------------------------------------------------------- uncertainty

UncertaintyKind uncertainty_kind_from_name(const std::string &name)
{
    if (name == "fr")
        return UncertaintyKind::FrAwgn;
    if (name == "tof")
        return UncertaintyKind::TofRange;
    if (name == "rp")
        return UncertaintyKind::RpPower;
    if (name == "aoa")
        return UncertaintyKind::AoaQuantize;
    if (name == "all")
        return UncertaintyKind::All;
    throw ConfigError("unknown uncertainty kind: " + name);
}

double quantize_azimuth(double azimuth_rad, double step_rad)
{
    return wrap_pi(std::round(azimuth_rad / step_rad) * step_rad);
}

void inject_uncertainty(channel::SampleMeasurement &m, UncertaintyKind kind,
                        const UncertaintyConfig &cfg, std::mt19937_64 &rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    const bool all = kind == UncertaintyKind::All;

    if (all || kind == UncertaintyKind::FrAwgn) {
        double sum = 0.0;
        size_t n = 0;
        for (size_t i = 0; i < m.grid.values.size(); ++i)
            if (m.grid.mask[i]) {
                sum += std::norm(m.grid.values[i]);
                ++n;
            }
        if (n > 0 && sum > 0.0 && cfg.fr_rel_std > 0.0) {
            // Noise RMS magnitude = rel_std * RMS |H|, split evenly re/im.
            const double sigma = cfg.fr_rel_std * std::sqrt(sum / static_cast<double>(n));
            const double s = sigma / std::numbers::sqrt2;
            for (size_t i = 0; i < m.grid.values.size(); ++i)
                if (m.grid.mask[i])
                    m.grid.values[i] += std::complex<double>(s * gauss(rng), s * gauss(rng));
        }
    }

    const double quant_step = deg2rad(cfg.aoa_quant_deg);
    for (auto &list : m.paths_per_gnb)
        for (auto &p : list) {
            if ((all || kind == UncertaintyKind::TofRange) && cfg.tof_std_m > 0.0)
                p.delay_s += cfg.tof_std_m * gauss(rng) / kSpeedOfLight;
            if ((all || kind == UncertaintyKind::RpPower) && cfg.rp_std_db > 0.0)
                p.power_dbm += cfg.rp_std_db * gauss(rng);
            if ((all || kind == UncertaintyKind::AoaQuantize) && cfg.aoa_quant_deg > 0.0)
                p.aoa_azimuth = quantize_azimuth(p.aoa_azimuth, quant_step);
        }
}

void label_noise(std::vector<Vec2> &positions, double std_m, std::mt19937_64 &rng)
{
    if (std_m <= 0.0)
        return;
    std::normal_distribution<double> gauss(0.0, std_m);
    for (auto &p : positions) {
        p.x() += gauss(rng);
        p.y() += gauss(rng);
    }
}

} // namespace csiloc::features
