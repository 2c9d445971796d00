#include "fediron/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fediron/rng.hpp"

namespace fediron {
namespace {

// Generator shape. Chosen so that a linear model separates IID data well but
// per-client skew still matters; see the learnability test.
constexpr double kMeanSpread = 1.0;
constexpr double kCategorySpread = 1.5;
constexpr double kClientShift = 0.5;
constexpr double kVariance = 1.0;
constexpr std::size_t kCategoriesPerColumn = 4;
constexpr std::uint64_t kClassStream = 0x636c617373ULL;
constexpr std::uint64_t kClientStream = 0x636c69656e74ULL;

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

std::string format_double(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, end);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::size_t sample_category(const std::vector<double>& weights, Rng& rng) {
    double u = rng.uniform();
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (u < weights[k]) return k;
        u -= weights[k];
    }
    return weights.size() - 1;
}

FlowRecord draw_record(const SkewProfile& p, std::size_t client, std::size_t cls, const std::string& dst_ip,
                       Rng& rng) {
    FlowRecord r;
    r.dst_ip = dst_ip;
    r.label = p.labels.name(static_cast<int>(cls));
    const std::size_t nf = p.schema.n_features();
    r.features.reserve(nf);
    const double sd = std::sqrt(p.variance);
    for (std::size_t f = 0; f < nf; ++f) {
        if (p.schema.feature_kind(f) == ColumnKind::numeric) {
            const double offset = client < p.client_offsets.rows() ? p.client_offsets(client, f) : 0.0;
            r.features.emplace_back(p.class_means(cls, f) + offset + sd * rng.normal());
        } else {
            r.features.emplace_back(p.categories[f][sample_category(p.category_weights[cls][f], rng)]);
        }
    }
    return r;
}

}  // namespace

void validate(const SkewProfile& p) {
    const std::size_t nc = p.n_classes();
    const std::size_t nf = p.schema.n_features();
    if (p.counts.empty()) throw std::invalid_argument("profile: no clients");
    for (std::size_t i = 0; i < p.counts.size(); ++i) {
        if (p.counts[i].size() != nc)
            throw std::invalid_argument("profile: client " + std::to_string(i + 1) + " has " +
                                        std::to_string(p.counts[i].size()) + " class counts, expected " +
                                        std::to_string(nc));
        std::size_t sum = 0;
        for (auto c : p.counts[i]) sum += c;
        if (sum == 0) throw std::invalid_argument("profile: client " + std::to_string(i + 1) + " has no samples");
    }
    if (!p.residual.empty() && p.residual.size() != nc) throw std::invalid_argument("profile: residual width mismatch");
    if (p.class_means.rows() != nc || p.class_means.cols() != nf)
        throw std::invalid_argument("profile: class_means must be classes x features");
    if (!p.client_offsets.empty() && (p.client_offsets.rows() != p.counts.size() || p.client_offsets.cols() != nf))
        throw std::invalid_argument("profile: client_offsets must be clients x features");
    if (!(p.variance > 0.0)) throw std::invalid_argument("profile: variance must be > 0");
    if (p.categories.size() != nf || p.category_weights.size() != nc)
        throw std::invalid_argument("profile: categorical spec has the wrong shape");
    for (std::size_t f = 0; f < nf; ++f) {
        const bool categorical = p.schema.feature_kind(f) == ColumnKind::categorical;
        if (categorical == p.categories[f].empty())
            throw std::invalid_argument("profile: categories must be given exactly for categorical features");
        for (std::size_t c = 0; c < nc; ++c) {
            if (p.category_weights[c].size() != nf || p.category_weights[c][f].size() != p.categories[f].size())
                throw std::invalid_argument("profile: category weights have the wrong shape");
        }
    }
}

const CountMatrix& ton10_counts() {
    // Columns: scanning, ddos, xss, password, dos, normal, backdoor, injection, ransomware, mitm.
    static const CountMatrix counts = {
        {815, 3502650, 576, 26460, 192130, 16202, 0, 48052, 0, 0},
        {636963, 993069, 285436, 278833, 303583, 149315, 0, 93129, 0, 2},
        {1167320, 6906, 344136, 864611, 13108, 48046, 0, 91740, 0, 7},
        {568501, 465525, 280915, 95029, 399568, 79285, 0, 95323, 0, 3},
        {13382, 630127, 604691, 2883, 86721, 27304, 18, 12889, 0, 564},
        {1161124, 210, 0, 0, 0, 4508, 0, 0, 0, 0},
        {412493, 452559, 0, 4444, 116463, 22154, 0, 0, 0, 0},
        {680446, 0, 0, 0, 0, 22, 0, 0, 0, 12},
        {336770, 3642, 0, 37835, 181710, 21745, 133, 0, 21629, 1},
        {384, 0, 0, 0, 0, 0, 423122, 3, 1737, 0},
    };
    return counts;
}

const std::vector<std::size_t>& ton10_residual_counts() {
    static const std::vector<std::size_t> residual = [] {
        const std::vector<std::size_t> totals = {7140161, 6165008, 2108944, 1718568, 3375328,
                                                 796380,  508116,  452659,  72805,   1052};
        std::vector<std::size_t> out = totals;
        for (const auto& row : ton10_counts())
            for (std::size_t c = 0; c < row.size(); ++c) out[c] -= row[c];
        return out;
    }();
    return residual;
}

SkewProfile profile_ton10(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("profile_ton10: scale must be > 0");
    SkewProfile p;
    const std::size_t nc = p.labels.size();
    const std::size_t nf = p.schema.n_features();

    for (const auto& row : ton10_counts()) {
        std::vector<std::size_t> scaled;
        for (auto v : row) scaled.push_back(round_half_up(scale * static_cast<double>(v)));
        p.counts.push_back(std::move(scaled));
    }
    for (auto v : ton10_residual_counts()) p.residual.push_back(round_half_up(scale * static_cast<double>(v)));

    p.variance = kVariance;
    p.class_means = Matrix(nc, nf);
    p.categories.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        if (p.schema.feature_kind(f) != ColumnKind::categorical) continue;
        p.categories[f].push_back("-");
        for (std::size_t k = 1; k < kCategoriesPerColumn; ++k) p.categories[f].push_back("v" + std::to_string(k));
    }
    p.category_weights.assign(nc, std::vector<std::vector<double>>(nf));
    for (std::size_t c = 0; c < nc; ++c) {
        Rng rng(derive_seed({kClassStream, c}));
        for (std::size_t f = 0; f < nf; ++f) {
            if (p.schema.feature_kind(f) == ColumnKind::numeric) {
                p.class_means(c, f) = kMeanSpread * rng.normal();
                continue;
            }
            auto& w = p.category_weights[c][f];
            double sum = 0.0;
            for (std::size_t k = 0; k < p.categories[f].size(); ++k) {
                w.push_back(std::exp(kCategorySpread * rng.normal()));
                sum += w.back();
            }
            for (auto& x : w) x /= sum;
        }
    }
    p.client_offsets = Matrix(p.counts.size(), nf);
    for (std::size_t i = 0; i < p.counts.size(); ++i) {
        Rng rng(derive_seed({kClientStream, i}));
        for (std::size_t f = 0; f < nf; ++f)
            if (p.schema.feature_kind(f) == ColumnKind::numeric) p.client_offsets(i, f) = kClientShift * rng.normal();
    }
    return p;
}

std::vector<ClientPartition> generate(const SkewProfile& profile, std::uint64_t seed) {
    validate(profile);
    std::vector<ClientPartition> out;
    for (std::size_t i = 0; i < profile.n_clients(); ++i) {
        Rng rng(derive_seed({seed, i}));
        const std::string ip = "10.0.0." + std::to_string(i + 1);
        std::vector<FlowRecord> records;
        for (std::size_t c = 0; c < profile.n_classes(); ++c)
            for (std::size_t k = 0; k < profile.counts[i][c]; ++k)
                records.push_back(draw_record(profile, i, c, ip, rng));
        out.push_back(make_pool(static_cast<int>(i + 1), ip, std::move(records)));
    }
    return out;
}

RawDataset generate_residual(const SkewProfile& profile, std::uint64_t seed) {
    validate(profile);
    RawDataset out{profile.schema, {}};
    std::size_t total = 0, smallest = SIZE_MAX;
    for (auto c : profile.residual) total += c;
    for (const auto& row : profile.counts) {
        std::size_t s = 0;
        for (auto c : row) s += c;
        smallest = std::min(smallest, s);
    }
    if (total == 0) return out;
    // Round-robin over enough IPs that each stays below the smallest client.
    const std::size_t per_ip = std::max<std::size_t>(1, (smallest - 1) / 2);
    const std::size_t n_ips = std::min<std::size_t>(254, (total + per_ip - 1) / per_ip);

    Rng rng(derive_seed({seed, 0x7265736964ULL}));
    std::size_t k = 0;
    for (std::size_t c = 0; c < profile.n_classes(); ++c) {
        for (std::size_t n = 0; n < profile.residual[c]; ++n, ++k) {
            const std::string ip = "10.0.1." + std::to_string(k % n_ips + 1);
            out.records.push_back(draw_record(profile, SIZE_MAX, c, ip, rng));
        }
    }
    return out;
}

void write_flows_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                     const std::vector<FlowRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    const auto& cols = schema.columns();
    std::vector<long> feature_of(cols.size(), -1);
    for (std::size_t f = 0; f < schema.n_features(); ++f) feature_of[schema.feature_positions()[f]] = static_cast<long>(f);

    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << csv_escape(cols[i].name);
    out << '\n';
    std::size_t row = 0;
    for (const auto& r : records) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out << ',';
            if (feature_of[i] >= 0) {
                const auto& v = r.features.at(static_cast<std::size_t>(feature_of[i]));
                if (const auto* d = std::get_if<double>(&v))
                    out << format_double(*d);
                else if (const auto* s = std::get_if<std::string>(&v))
                    out << csv_escape(*s);
            } else if (cols[i].kind == ColumnKind::label) {
                out << csv_escape(r.label);
            } else if (cols[i].name == schema.partition_key()) {
                out << csv_escape(r.dst_ip);
            } else if (cols[i].name == "ts") {
                out << row;
            } else if (cols[i].name == "src_ip") {
                out << "192.168.0.1";
            } else if (cols[i].name == "label") {
                out << (r.label == "normal" ? 0 : 1);
            } else {
                out << 0;
            }
        }
        out << '\n';
        ++row;
    }
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace fediron
