#include "fediron/flow_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fediron/rng.hpp"

namespace fediron {
namespace {

/// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {
        if (in_.peek() == 0xEF) {
            char bom[3];
            in_.read(bom, 3);
            if (std::memcmp(bom, "\xEF\xBB\xBF", 3) != 0) throw DataError("csv: malformed byte order mark");
        }
    }

    bool next(std::vector<std::string>& fields) {
        fields.clear();
        if (in_.peek() == std::char_traits<char>::eof()) return false;
        ++line_;
        std::string field;
        bool quoted = false;
        bool field_was_quoted = false;
        char c;
        while (in_.get(c)) {
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get(c);
                        field.push_back('"');
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"' && field.empty() && !field_was_quoted) {
                quoted = true;
                field_was_quoted = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
            } else if (c == '\n') {
                break;
            } else if (c == '\r') {
                if (in_.peek() == '\n') in_.get(c);
                break;
            } else {
                field.push_back(c);
            }
        }
        if (quoted) throw DataError("csv: unterminated quoted field starting near line " + std::to_string(line_));
        fields.push_back(std::move(field));
        return true;
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

FeatureValue parse_numeric(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::monostate{};
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) return std::monostate{};
    return value;
}

bool is_missing(const FeatureValue& v) { return std::holds_alternative<std::monostate>(v); }

bool is_non_finite(const FeatureValue& v) {
    const auto* d = std::get_if<double>(&v);
    return d && !std::isfinite(*d);
}

std::string dedup_key(const FlowRecord& r) {
    std::string key;
    for (const auto& f : r.features) {
        if (const auto* d = std::get_if<double>(&f)) {
            key.push_back('n');
            key.append(reinterpret_cast<const char*>(d), sizeof(double));
        } else {
            const auto& s = std::get<std::string>(f);
            const auto len = static_cast<std::uint64_t>(s.size());
            key.push_back('c');
            key.append(reinterpret_cast<const char*>(&len), sizeof(len));
            key.append(s);
        }
    }
    key.push_back('l');
    key.append(r.label);
    return key;
}

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace

FeatureSchema::FeatureSchema(std::vector<Column> columns, std::string partition_key)
    : columns_(std::move(columns)), partition_key_(std::move(partition_key)) {
    std::size_t labels = 0;
    bool key_found = false;
    std::set<std::string> names;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const auto& col = columns_[i];
        if (!names.insert(col.name).second) throw DataError("schema: duplicate column '" + col.name + "'");
        switch (col.kind) {
            case ColumnKind::label:
                ++labels;
                label_pos_ = i;
                break;
            case ColumnKind::numeric:
            case ColumnKind::categorical:
                feature_pos_.push_back(i);
                break;
            case ColumnKind::drop:
                break;
        }
        if (col.name == partition_key_) {
            if (col.kind != ColumnKind::drop)
                throw DataError("schema: partition key '" + partition_key_ + "' must not be a feature or label");
            key_found = true;
        }
    }
    if (labels != 1) throw DataError("schema: expected exactly one label column, found " + std::to_string(labels));
    if (!key_found) throw DataError("schema: partition key column '" + partition_key_ + "' not present");
}

FeatureSchema ton_iot_schema() {
    using K = ColumnKind;
    return FeatureSchema({
        {"ts", K::drop},
        {"src_ip", K::drop},
        {"src_port", K::drop},
        {"dst_ip", K::drop},
        {"dst_port", K::drop},
        {"proto", K::categorical},
        {"service", K::categorical},
        {"duration", K::numeric},
        {"src_bytes", K::numeric},
        {"dst_bytes", K::numeric},
        {"conn_state", K::categorical},
        {"missed_bytes", K::numeric},
        {"src_pkts", K::numeric},
        {"src_ip_bytes", K::numeric},
        {"dst_pkts", K::numeric},
        {"dst_ip_bytes", K::numeric},
        {"dns_query", K::categorical},
        {"dns_qclass", K::numeric},
        {"dns_qtype", K::numeric},
        {"dns_rcode", K::numeric},
        {"dns_AA", K::categorical},
        {"dns_RD", K::categorical},
        {"dns_RA", K::categorical},
        {"dns_rejected", K::categorical},
        {"ssl_version", K::categorical},
        {"ssl_cipher", K::categorical},
        {"ssl_resumed", K::categorical},
        {"ssl_established", K::categorical},
        {"ssl_subject", K::categorical},
        {"ssl_issuer", K::categorical},
        {"http_trans_depth", K::categorical},
        {"http_method", K::categorical},
        {"http_uri", K::categorical},
        {"http_version", K::categorical},
        {"http_request_body_len", K::numeric},
        {"http_response_body_len", K::numeric},
        {"http_status_code", K::numeric},
        {"http_user_agent", K::categorical},
        {"http_orig_mime_types", K::categorical},
        {"http_resp_mime_types", K::categorical},
        {"weird_name", K::categorical},
        {"weird_addl", K::categorical},
        {"weird_notice", K::categorical},
        // Binary attack flag; it would leak the class.
        {"label", K::drop},
        {"type", K::label},
    });
}

LabelIndex::LabelIndex(std::vector<std::string> classes) : classes_(std::move(classes)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (!index_.emplace(classes_[i], static_cast<int>(i)).second)
            throw DataError("label index: duplicate class '" + classes_[i] + "'");
    }
}

std::optional<int> LabelIndex::find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int LabelIndex::at(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw DataError("unknown class label '" + name + "'");
}

LabelIndex ton_iot_labels() {
    return LabelIndex({"scanning", "ddos", "xss", "password", "dos", "normal", "backdoor", "injection",
                       "ransomware", "mitm"});
}

RawDataset parse_flows(std::istream& in, const FeatureSchema& schema) {
    CsvReader reader(in);
    std::vector<std::string> header;
    if (!reader.next(header)) throw DataError("csv: empty input, expected a header row");
    for (auto& h : header) h = std::string(trim(h));

    std::unordered_map<std::string, std::size_t> header_pos;
    for (std::size_t i = 0; i < header.size(); ++i) header_pos.emplace(header[i], i);
    for (const auto& col : schema.columns()) {
        if (!header_pos.contains(col.name))
            throw DataError("csv: header/schema mismatch, missing column '" + col.name + "'");
    }
    std::set<std::string> known;
    for (const auto& col : schema.columns()) known.insert(col.name);
    for (const auto& h : header) {
        if (!known.contains(h)) throw DataError("csv: header/schema mismatch, unexpected column '" + h + "'");
    }

    const auto& cols = schema.columns();
    std::vector<std::size_t> feature_src;
    for (auto p : schema.feature_positions()) feature_src.push_back(header_pos.at(cols[p].name));
    const std::size_t label_src = header_pos.at(schema.label_column());
    const std::size_t key_src = header_pos.at(schema.partition_key());

    RawDataset out{schema, {}};
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() > header.size())
            throw DataError("csv: line " + std::to_string(reader.line()) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(header.size()));
        fields.resize(header.size());  // short rows: the tail reads as missing

        FlowRecord rec;
        rec.dst_ip = std::string(trim(fields[key_src]));
        rec.label = std::string(trim(fields[label_src]));
        rec.features.reserve(feature_src.size());
        for (std::size_t f = 0; f < feature_src.size(); ++f) {
            const auto& cell = fields[feature_src[f]];
            if (schema.feature_kind(f) == ColumnKind::numeric) {
                rec.features.push_back(parse_numeric(cell));
            } else {
                auto text = trim(cell);
                if (text.empty())
                    rec.features.emplace_back(std::monostate{});
                else
                    rec.features.emplace_back(std::string(text));
            }
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

RawDataset load_flows(const std::filesystem::path& path, const FeatureSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open flow file '" + path.string() + "'");
    return parse_flows(in, schema);
}

RawDataset clean(RawDataset raw) {
    std::vector<FlowRecord> kept;
    kept.reserve(raw.records.size());
    std::unordered_set<std::string> seen;
    for (auto& r : raw.records) {
        if (r.dst_ip.empty() || r.label.empty()) continue;
        if (r.features.size() != raw.schema.n_features()) continue;
        if (std::any_of(r.features.begin(), r.features.end(),
                        [](const FeatureValue& v) { return is_missing(v) || is_non_finite(v); }))
            continue;
        if (!seen.insert(dedup_key(r)).second) continue;
        kept.push_back(std::move(r));
    }
    raw.records = std::move(kept);
    return raw;
}

PartitionResult partition_by_dst_ip(const RawDataset& data, std::size_t k) {
    if (k < 1) throw std::invalid_argument("partition_by_dst_ip: k must be >= 1");
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.records.size(); ++i) groups[data.records[i].dst_ip].push_back(i);
    if (groups.size() < k)
        throw DataError("partition_by_dst_ip: requested " + std::to_string(k) + " clients but only " +
                        std::to_string(groups.size()) + " distinct destination IPs are available");

    std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> order;
    order.reserve(groups.size());
    for (const auto& g : groups) order.push_back(&g);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) {
        if (a->second.size() != b->second.size()) return a->second.size() > b->second.size();
        return a->first < b->first;
    });

    PartitionResult out{{}, RawDataset{data.schema, {}}};
    std::vector<bool> taken(data.records.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
        ClientPartition part;
        part.client_id = static_cast<int>(c + 1);
        part.dst_ip = order[c]->first;
        part.records.reserve(order[c]->second.size());
        for (auto i : order[c]->second) {
            part.records.push_back(data.records[i]);
            taken[i] = true;
        }
        out.clients.push_back(std::move(part));
    }
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        if (!taken[i]) out.residual.records.push_back(data.records[i]);
    }
    return out;
}

ClientPartition make_pool(int client_id, std::string name, std::vector<FlowRecord> records) {
    ClientPartition p;
    p.client_id = client_id;
    p.dst_ip = std::move(name);
    p.records = std::move(records);
    return p;
}

std::size_t stratified_train_count(std::size_t n, double train_fraction) {
    if (n < 2) return n;
    return std::min(n, round_half_up(train_fraction * static_cast<double>(n)));
}

ClientPartition stratified_split(ClientPartition partition, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("stratified_split: train_fraction must lie in (0, 1)");
    if (partition.records.empty())
        throw DataError("stratified_split: client " + std::to_string(partition.client_id) + " has no records");

    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < partition.records.size(); ++i) by_class[partition.records[i].label].push_back(i);

    Rng rng(seed);
    partition.train.clear();
    partition.test.clear();
    for (auto& [label, idx] : by_class) {
        const std::size_t n_train = stratified_train_count(idx.size(), train_fraction);
        rng.shuffle(std::span(idx));
        partition.train.insert(partition.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        partition.test.insert(partition.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    std::sort(partition.train.begin(), partition.train.end());
    std::sort(partition.test.begin(), partition.test.end());
    return partition;
}

double FeatureCodec::encode(std::size_t feature, const FeatureValue& value) const {
    if (kinds[feature] == ColumnKind::numeric) {
        const auto* d = std::get_if<double>(&value);
        if (!d) throw DataError("codec: feature " + std::to_string(feature) + " expects a numeric value");
        return *d;
    }
    const auto* s = std::get_if<std::string>(&value);
    if (!s) throw DataError("codec: feature " + std::to_string(feature) + " expects a categorical value");
    const auto& map = categories[feature];
    const auto it = map.find(*s);
    return it == map.end() ? -1.0 : static_cast<double>(it->second);
}

double FeatureCodec::transform(std::size_t feature, const FeatureValue& value) const {
    return (encode(feature, value) - mean[feature]) / stddev[feature];
}

Matrix FeatureCodec::transform(const std::vector<FlowRecord>& records, const std::vector<std::size_t>& rows) const {
    Matrix out(rows.size(), kinds.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& rec = records[rows[r]];
        if (rec.features.size() != kinds.size())
            throw DataError("codec: record has " + std::to_string(rec.features.size()) + " features, expected " +
                            std::to_string(kinds.size()));
        auto dst = out.row(r);
        for (std::size_t f = 0; f < kinds.size(); ++f) dst[f] = transform(f, rec.features[f]);
    }
    return out;
}

FeatureCodec fit_codec(const ClientPartition& partition, const FeatureSchema& schema) {
    const std::size_t nf = schema.n_features();
    FeatureCodec codec;
    codec.kinds.resize(nf);
    codec.categories.resize(nf);
    codec.mean.assign(nf, 0.0);
    codec.stddev.assign(nf, 1.0);
    for (std::size_t f = 0; f < nf; ++f) codec.kinds[f] = schema.feature_kind(f);

    for (std::size_t f = 0; f < nf; ++f) {
        if (codec.kinds[f] != ColumnKind::categorical) continue;
        auto& map = codec.categories[f];
        for (auto i : partition.train) map.emplace(std::get<std::string>(partition.records[i].features.at(f)), 0);
        int code = 0;
        for (auto& [name, c] : map) c = code++;  // std::map iterates lexicographically
    }
    if (partition.train.empty()) return codec;

    const double n = static_cast<double>(partition.train.size());
    for (std::size_t f = 0; f < nf; ++f) {
        double lo = INFINITY, hi = -INFINITY, sum = 0.0;
        for (auto i : partition.train) {
            const double x = codec.encode(f, partition.records[i].features.at(f));
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            sum += x;
        }
        if (lo == hi) {
            codec.mean[f] = lo;
            codec.stddev[f] = 1.0;
            continue;
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (auto i : partition.train) {
            const double d = codec.encode(f, partition.records[i].features[f]) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);  // population
        codec.mean[f] = mean;
        codec.stddev[f] = sd > 0.0 ? sd : 1.0;
    }
    return codec;
}

PreparedClient fit_apply_codec(const ClientPartition& partition, const FeatureSchema& schema,
                               const LabelIndex& labels) {
    for (const auto& r : partition.records) {
        if (r.features.size() != schema.n_features())
            throw DataError("client " + std::to_string(partition.client_id) + ": record has " +
                            std::to_string(r.features.size()) + " features, schema expects " +
                            std::to_string(schema.n_features()));
    }
    PreparedClient out;
    out.codec = fit_codec(partition, schema);
    out.data.client_id = partition.client_id;
    out.data.dst_ip = partition.dst_ip;

    auto labels_of = [&](const std::vector<std::size_t>& rows) {
        std::vector<int> y;
        y.reserve(rows.size());
        for (auto i : rows) y.push_back(labels.at(partition.records[i].label));
        return y;
    };
    out.data.train = {out.codec.transform(partition.records, partition.train), labels_of(partition.train)};
    out.data.test = {out.codec.transform(partition.records, partition.test), labels_of(partition.test)};
    return out;
}

std::vector<std::size_t> class_counts(const std::vector<FlowRecord>& records, const LabelIndex& labels) {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& r : records) ++counts[static_cast<std::size_t>(labels.at(r.label))];
    return counts;
}

}  // namespace fediron
