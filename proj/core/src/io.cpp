#include "fediron/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fediron {
namespace {

using nlohmann::json;

class ByteWriter {
public:
    void raw(std::string_view s) { out_.append(s); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(std::span<const double> vs) {
        for (double v : vs) f64(v);
    }
    void i32s(std::span<const int> vs) {
        for (int v : vs) u32(static_cast<std::uint32_t>(v));
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::string_view raw(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        const double v = std::bit_cast<double>(u64());
        if (!std::isfinite(v)) throw FormatError(what_ + ": non-finite value in payload");
        return v;
    }
    void f64s(std::span<double> out) {
        need(out.size() * 8);
        for (auto& v : out) v = f64();
    }
    void i32s(std::span<int> out) {
        need(out.size() * 4);
        for (auto& v : out) v = static_cast<int>(u32());
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void finish() const {
        if (remaining() != 0) throw FormatError(what_ + ": " + std::to_string(remaining()) + " trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FormatError(what_ + ": truncated file");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

json parse_header(ByteReader& r, std::string_view magic, const std::string& what) {
    if (r.remaining() < magic.size() || r.raw(magic.size()) != magic)
        throw FormatError(what + ": bad magic (expected " + std::string(magic) + ")");
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw FormatError(what + ": header length exceeds file size");
    const auto text = r.raw(static_cast<std::size_t>(len));
    json header = json::parse(text.begin(), text.end(), nullptr, false);
    if (header.is_discarded() || !header.is_object()) throw FormatError(what + ": header is not a JSON object");
    if (header.value("header_bytes", len) != len) throw FormatError(what + ": header_bytes disagrees with the length prefix");
    return header;
}

template <class T>
T field(const json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) throw FormatError(what + ": header lacks '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(what + ": header field '" + std::string(key) + "' has the wrong type");
    }
}

std::size_t payload_doubles(const std::vector<LayerSpec>& specs) {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.out_dim * s.in_dim + s.out_dim;
    return n;
}

// The header records its own byte length, so iterate until the digit count settles.
std::string with_header(std::string_view magic, json header, std::string payload) {
    std::string text;
    std::size_t len = 0;
    for (;;) {
        header["header_bytes"] = len;
        text = header.dump();
        if (text.size() == len) break;
        len = text.size();
    }
    ByteWriter w;
    w.raw(magic);
    w.u64(text.size());
    w.raw(text);
    w.raw(payload);
    return w.take();
}

void write_labeled(ByteWriter& w, const LabeledData& d) {
    w.f64s(d.features.values());
    w.i32s(d.labels);
}

LabeledData read_labeled(ByteReader& r, std::size_t rows, std::size_t cols, std::size_t n_classes,
                         const std::string& what) {
    LabeledData d;
    d.features = Matrix(rows, cols);
    d.labels.resize(rows);
    r.f64s(d.features.values());
    r.i32s(d.labels);
    for (int y : d.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes) throw FormatError(what + ": label out of range");
    return d;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
    validate_specs(ckpt.model.specs);
    if (ckpt.model.layers.size() != ckpt.model.specs.size())
        throw std::invalid_argument("checkpoint: layer count does not match specs");
    json layers = json::array();
    for (const auto& s : ckpt.model.specs)
        layers.push_back({{"in", s.in_dim}, {"out", s.out_dim}, {"activation", to_string(s.activation)}});
    json header = {
        {"format", std::string(kCheckpointMagic)},
        {"dtype", "float64"},
        {"byte_order", "little"},
        {"layers", layers},
        {"classes", ckpt.classes},
        {"metadata", ckpt.metadata},
        {"payload_bytes", payload_doubles(ckpt.model.specs) * 8},
    };
    ByteWriter w;
    for (std::size_t k = 0; k < ckpt.model.layers.size(); ++k) {
        const auto& l = ckpt.model.layers[k];
        const auto& s = ckpt.model.specs[k];
        if (l.weights.rows() != s.out_dim || l.weights.cols() != s.in_dim || l.biases.size() != s.out_dim)
            throw std::invalid_argument("checkpoint: layer " + std::to_string(k) + " does not match its spec");
        w.f64s(l.weights.values());
        w.f64s(l.biases);
    }
    return with_header(kCheckpointMagic, header, w.take());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    const std::string what = "checkpoint";
    ByteReader r(bytes, what);
    const json header = parse_header(r, kCheckpointMagic, what);

    Checkpoint ckpt;
    const auto layers = field<json>(header, "layers", what);
    if (!layers.is_array() || layers.empty()) throw FormatError(what + ": 'layers' must be a non-empty array");
    for (const auto& l : layers) {
        LayerSpec s;
        s.in_dim = field<std::size_t>(l, "in", what);
        s.out_dim = field<std::size_t>(l, "out", what);
        try {
            s.activation = activation_from_string(field<std::string>(l, "activation", what));
        } catch (const std::invalid_argument& e) {
            throw FormatError(what + ": " + e.what());
        }
        ckpt.model.specs.push_back(s);
    }
    try {
        validate_specs(ckpt.model.specs);
    } catch (const std::invalid_argument& e) {
        throw FormatError(what + ": " + e.what());
    }
    ckpt.classes = field<std::vector<std::string>>(header, "classes", what);
    if (!ckpt.classes.empty() && ckpt.classes.size() != ckpt.model.output_dim())
        throw FormatError(what + ": " + std::to_string(ckpt.classes.size()) + " class names for " +
                          std::to_string(ckpt.model.output_dim()) + " outputs");
    ckpt.metadata = header.value("metadata", json::object());
    const auto expected = payload_doubles(ckpt.model.specs) * 8;
    if (field<std::size_t>(header, "payload_bytes", what) != expected)
        throw FormatError(what + ": payload_bytes does not match the layer dimensions");
    if (r.remaining() < expected) throw FormatError(what + ": payload shorter than the layer dimensions require");

    for (const auto& s : ckpt.model.specs) {
        Layer l{Matrix(s.out_dim, s.in_dim), Vector(s.out_dim)};
        r.f64s(l.weights.values());
        r.f64s(l.biases);
        ckpt.model.layers.push_back(std::move(l));
    }
    r.finish();
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

json codec_to_json(const FeatureCodec& codec, const FeatureSchema& schema) {
    json features = json::array();
    for (std::size_t f = 0; f < codec.kinds.size(); ++f) {
        json entry = {
            {"name", schema.feature_name(f)},
            {"kind", codec.kinds[f] == ColumnKind::categorical ? "categorical" : "numeric"},
            {"mean", codec.mean[f]},
            {"stddev", codec.stddev[f]},
        };
        if (codec.kinds[f] == ColumnKind::categorical) entry["categories"] = codec.categories[f];
        features.push_back(std::move(entry));
    }
    return {{"features", features}};
}

std::string encode_prepared(const PreparedFile& file) {
    const auto& d = file.data;
    const std::size_t nf = d.train.empty() ? d.test.features.cols() : d.train.features.cols();
    if (!d.test.empty() && d.test.features.cols() != nf) throw std::invalid_argument("prepared: train/test width mismatch");
    json header = {
        {"format", std::string(kDatasetMagic)},
        {"dtype", "float64"},
        {"label_dtype", "int32"},
        {"byte_order", "little"},
        {"client_id", d.client_id},
        {"dst_ip", d.dst_ip},
        {"n_features", nf},
        {"classes", file.classes},
        {"train_rows", d.train.size()},
        {"test_rows", d.test.size()},
        {"codec", file.codec},
    };
    ByteWriter w;
    write_labeled(w, d.train);
    write_labeled(w, d.test);
    return with_header(kDatasetMagic, header, w.take());
}

PreparedFile decode_prepared(std::string_view bytes) {
    const std::string what = "prepared dataset";
    ByteReader r(bytes, what);
    const json header = parse_header(r, kDatasetMagic, what);
    PreparedFile file;
    file.data.client_id = field<int>(header, "client_id", what);
    file.data.dst_ip = field<std::string>(header, "dst_ip", what);
    file.classes = field<std::vector<std::string>>(header, "classes", what);
    file.codec = header.value("codec", json::object());
    const auto nf = field<std::size_t>(header, "n_features", what);
    const auto n_train = field<std::size_t>(header, "train_rows", what);
    const auto n_test = field<std::size_t>(header, "test_rows", what);
    const std::size_t row_bytes = nf * 8 + 4;
    if (r.remaining() != (n_train + n_test) * row_bytes)
        throw FormatError(what + ": payload size does not match the header row counts");
    file.data.train = read_labeled(r, n_train, nf, file.classes.size(), what);
    file.data.test = read_labeled(r, n_test, nf, file.classes.size(), what);
    r.finish();
    return file;
}

void save_prepared(const std::filesystem::path& path, const PreparedFile& file) {
    write_file(path, encode_prepared(file));
}

PreparedFile load_prepared(const std::filesystem::path& path) {
    try {
        return decode_prepared(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

PreparedCorpus load_corpus(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw FormatError("no manifest.json in '" + dir.string() + "'; run 'fediron partition' or 'fediron synth' first");
    PreparedCorpus corpus;
    corpus.manifest = read_json(manifest_path);
    const std::string what = manifest_path.string();
    corpus.labels = LabelIndex(field<std::vector<std::string>>(corpus.manifest, "classes", what));
    for (const auto& c : field<json>(corpus.manifest, "clients", what)) {
        auto file = load_prepared(dir / field<std::string>(c, "file", what));
        if (file.classes != corpus.labels.classes()) throw FormatError(what + ": class list differs from manifest");
        corpus.clients.push_back(std::move(file.data));
    }
    if (corpus.clients.empty()) throw FormatError(what + ": manifest lists no clients");
    const auto& residual = corpus.manifest.value("residual", json::object());
    if (residual.contains("file") && residual["file"].is_string()) {
        auto file = load_prepared(dir / residual["file"].get<std::string>());
        corpus.residual = std::move(file.data);
    }
    return corpus;
}

json to_json(const MetricsReport& report, const LabelIndex& labels) {
    json classes = json::array();
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        const auto& m = report.classes[c];
        classes.push_back({
            {"class", c < labels.size() ? labels.name(static_cast<int>(c)) : std::to_string(c)},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"support", m.support},
        });
    }
    json confusion = json::array();
    const std::size_t n = report.confusion.n_classes();
    for (std::size_t t = 0; t < n; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < n; ++p) row.push_back(report.confusion(t, p));
        confusion.push_back(std::move(row));
    }
    return {
        {"accuracy", report.accuracy},
        {"weighted", {{"precision", report.weighted.precision}, {"recall", report.weighted.recall}, {"f1", report.weighted.f1}}},
        {"per_class", classes},
        {"confusion", confusion},
    };
}

json class_counts_json(const std::vector<std::size_t>& counts, const LabelIndex& labels) {
    json out = json::object();
    for (std::size_t c = 0; c < counts.size(); ++c) out[labels.name(static_cast<int>(c))] = counts[c];
    return out;
}

json aggregation_json(const AggregationConfig& config) {
    json j = {{"kind", aggregation_name(config)}};
    if (const auto* p = std::get_if<FedProx>(&config)) j["mu"] = p->mu;
    if (const auto* y = std::get_if<FedYogi>(&config)) {
        j["eta"] = y->eta;
        j["beta1"] = y->beta1;
        j["beta2"] = y->beta2;
        j["tau"] = y->tau;
    }
    return j;
}

AggregationConfig aggregation_from_json(const json& j) {
    const std::string kind = j.value("kind", "fedavg");
    AggregationConfig out;
    if (kind == "fedavg") {
        out = FedAvg{};
    } else if (kind == "fedprox") {
        FedProx p;
        p.mu = j.value("mu", p.mu);
        out = p;
    } else if (kind == "fedyogi") {
        FedYogi y;
        y.eta = j.value("eta", y.eta);
        y.beta1 = j.value("beta1", y.beta1);
        y.beta2 = j.value("beta2", y.beta2);
        y.tau = j.value("tau", y.tau);
        out = y;
    } else {
        throw std::invalid_argument("unknown aggregation '" + kind + "' (expected fedavg, fedprox or fedyogi)");
    }
    validate(out);
    return out;
}

json history_json(const std::vector<RoundReport>& history, const LabelIndex& labels, bool timestamps) {
    json rounds = json::array();
    for (const auto& r : history) {
        json clients = json::array();
        for (const auto& c : r.clients)
            clients.push_back({{"client_id", c.client_id}, {"n_samples", c.n_samples}, {"loss", c.loss}});
        json entry = {{"round", r.round}, {"clients", clients}};
        if (r.metrics) entry["metrics"] = to_json(*r.metrics, labels);
        if (timestamps) entry["wall_time_s"] = r.wall_time_s;
        rounds.push_back(std::move(entry));
    }
    return {{"format", "fediron-history/1"}, {"rounds", rounds}};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    const auto text = read_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("'" + path.string() + "' is not valid JSON");
    return j;
}

}  // namespace fediron
