#include "rdm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rdm/errors.hpp"
#include "rdm/rng.hpp"

namespace rdm {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const unsigned char* data, std::size_t n, std::uint64_t h = kFnvOffset) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= kFnvPrime;
    }
    return h;
}

// byte buffer with running checksum; all formats are little-endian
class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path) {}

    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        buf_.insert(buf_.end(), b, b + sizeof(T));
    }
    void put_bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void put_f32(double v) { put(static_cast<float>(v)); }

    void finish_with_checksum() {
        const std::uint64_t sum = fnv1a(buf_.data(), buf_.size());
        put(sum);
        std::ofstream os(path_, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot open for writing: " + path_.string());
        os.write(reinterpret_cast<const char*>(buf_.data()),
                 static_cast<std::streamsize>(buf_.size()));
        if (!os) throw DataError("write failed: " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(const std::filesystem::path& path, const char* what) : what_(what) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw DataError(std::string(what) + ": cannot open " + path.string());
        buf_.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }

    void expect_magic(const char magic[4]) {
        if (buf_.size() < 4 || std::memcmp(buf_.data(), magic, 4) != 0)
            throw DataError(std::string(what_) + ": bad magic (not a " +
                            std::string(magic, 4) + " file)");
        pos_ = 4;
    }

    template <class T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > payload_end())
            throw DataError(std::string(what_) + ": truncated file");
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void get_bytes(void* p, std::size_t n) {
        if (pos_ + n > payload_end()) throw DataError(std::string(what_) + ": truncated file");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    double get_f32() { return static_cast<double>(get<float>()); }

    // validates the trailing u64 checksum over everything before it
    void check_checksum() {
        if (buf_.size() < 12) throw DataError(std::string(what_) + ": truncated file");
        const std::size_t body = buf_.size() - 8;
        std::uint64_t stored;
        std::memcpy(&stored, buf_.data() + body, 8);
        if (fnv1a(buf_.data(), body) != stored)
            throw DataError(std::string(what_) + ": checksum mismatch (corrupt or truncated)");
        has_checksum_ = true;
    }
    void expect_consumed() {
        if (pos_ != payload_end())
            throw DataError(std::string(what_) + ": trailing bytes after payload");
    }
    std::size_t payload_end() const { return has_checksum_ ? buf_.size() - 8 : buf_.size(); }

private:
    const char* what_;
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
    bool has_checksum_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// REPZ
// ---------------------------------------------------------------------------

void RepresentationSet::validate() const {
    if (data.rows == 0 || data.cols == 0) throw DataError("representation set is empty");
    if (data.cols > 65535) throw DataError("representation dimension exceeds 65535");
    if (!labels.empty() && labels.size() != data.rows)
        throw DataError("label count does not match row count");
}

std::optional<std::uint32_t> known_encoder_dim(const std::string& dataset_id) {
    static const std::map<std::string, std::uint32_t> dims = {
        {"bit", 2048},  {"repvgg", 2560}, {"resnet50d", 2048}, {"swin", 1024},
        {"vit-b16", 768}, {"deit", 768},  {"mae", 768},        {"dino", 768},
        {"dinov2", 768},  {"pathology-ssl", 384},              {"uni", 1024},
    };
    auto it = dims.find(dataset_id);
    if (it == dims.end()) return std::nullopt;
    return it->second;
}

void write_reps(const RepresentationSet& set, const std::filesystem::path& path) {
    set.validate();
    Writer w(path);
    w.put_bytes("REPZ", 4);
    w.put<std::uint16_t>(1);  // version
    w.put<std::uint64_t>(set.data.rows);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(set.data.cols));
    std::uint32_t flags = 0;
    if (set.has_labels()) flags |= 1u;
    if (!set.dataset_id.empty()) flags |= 2u;
    w.put<std::uint32_t>(flags);
    if (!set.dataset_id.empty()) {
        if (set.dataset_id.size() > 65535) throw DataError("dataset_id too long");
        w.put<std::uint16_t>(static_cast<std::uint16_t>(set.dataset_id.size()));
        w.put_bytes(set.dataset_id.data(), set.dataset_id.size());
    }
    for (double v : set.data.v) w.put_f32(v);
    if (set.has_labels())
        for (auto l : set.labels) w.put<std::int32_t>(l);
    w.finish_with_checksum();
}

RepresentationSet read_reps(const std::filesystem::path& path) {
    Reader r(path, "reps");
    r.expect_magic("REPZ");
    r.check_checksum();
    const auto version = r.get<std::uint16_t>();
    if (version != 1) throw DataError("reps: unsupported version " + std::to_string(version));
    const auto n = r.get<std::uint64_t>();
    const auto d = r.get<std::uint32_t>();
    const auto flags = r.get<std::uint32_t>();
    if (d == 0 || d > 65535) throw DataError("reps: dimension out of range [1, 65535]");
    RepresentationSet set;
    if (flags & 2u) {
        const auto len = r.get<std::uint16_t>();
        set.dataset_id.resize(len);
        r.get_bytes(set.dataset_id.data(), len);
    }
    set.data = MatrixD(n, d);
    for (auto& v : set.data.v) v = r.get_f32();
    if (flags & 1u) {
        set.labels.resize(n);
        for (auto& l : set.labels) l = r.get<std::int32_t>();
    }
    r.expect_consumed();
    set.validate();
    return set;
}

// ---------------------------------------------------------------------------
// RDM1 checkpoint
// ---------------------------------------------------------------------------

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const ScoreModel& m = ckpt.model;
    if (m.params.size() != m.layout.total) throw DataError("checkpoint: model not finalized");
    if (ckpt.normalizer.dim() != m.config.input_dim)
        throw DataError("checkpoint: normalizer dimension mismatch");
    Writer w(path);
    w.put_bytes("RDM1", 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint32_t>(m.config.input_dim);
    w.put<std::uint32_t>(m.config.hidden_dim);
    w.put<std::uint32_t>(m.config.num_blocks);
    w.put<std::uint32_t>(m.config.time_embed_dim);
    w.put<std::uint32_t>(m.config.class_embed_dim);
    w.put<std::uint32_t>(m.config.num_classes);
    w.put<std::uint64_t>(m.time_embed_seed);
    w.put<std::uint64_t>(m.class_embed_seed);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.sde.kind));
    w.put<double>(m.sde.sigma_min);
    w.put<double>(m.sde.sigma_max);
    w.put<double>(m.sde.beta_min);
    w.put<double>(m.sde.beta_max);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.normalizer.dim()));
    for (double v : ckpt.normalizer.mean) w.put<double>(v);
    for (double v : ckpt.normalizer.scale) w.put<double>(v);
    for (double v : m.params) w.put_f32(v);
    w.finish_with_checksum();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    Reader r(path, "checkpoint");
    r.expect_magic("RDM1");
    r.check_checksum();
    const auto version = r.get<std::uint16_t>();
    if (version != 1)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint c;
    ScoreModel& m = c.model;
    m.config.input_dim = r.get<std::uint32_t>();
    m.config.hidden_dim = r.get<std::uint32_t>();
    m.config.num_blocks = r.get<std::uint32_t>();
    m.config.time_embed_dim = r.get<std::uint32_t>();
    m.config.class_embed_dim = r.get<std::uint32_t>();
    m.config.num_classes = r.get<std::uint32_t>();
    m.time_embed_seed = r.get<std::uint64_t>();
    m.class_embed_seed = r.get<std::uint64_t>();
    const auto kind = r.get<std::uint8_t>();
    if (kind > 2) throw DataError("checkpoint: bad sde kind");
    m.sde.kind = static_cast<SdeKind>(kind);
    m.sde.sigma_min = r.get<double>();
    m.sde.sigma_max = r.get<double>();
    m.sde.beta_min = r.get<double>();
    m.sde.beta_max = r.get<double>();
    const auto nd = r.get<std::uint32_t>();
    if (nd != m.config.input_dim) throw DataError("checkpoint: normalizer dimension mismatch");
    c.normalizer.mean.resize(nd);
    c.normalizer.scale.resize(nd);
    for (auto& v : c.normalizer.mean) v = r.get<double>();
    for (auto& v : c.normalizer.scale) v = r.get<double>();
    m.params.resize(m.config.param_count());
    for (auto& v : m.params) v = r.get_f32();
    r.expect_consumed();
    m.finalize();
    m.check_finite_params();
    return c;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path.string());
    std::vector<unsigned char> buf{std::istreambuf_iterator<char>(is),
                                   std::istreambuf_iterator<char>()};
    return fnv1a(buf.data(), buf.size());
}

// ---------------------------------------------------------------------------
// HEAD
// ---------------------------------------------------------------------------

void write_head(const ClassifierHead& head, const std::filesystem::path& path) {
    if (head.W.rows == 0 || head.b.size() != head.W.rows)
        throw DataError("head: inconsistent shapes");
    // no trailing checksum: this format mirrors externally produced weights
    std::vector<unsigned char> bytes{'H', 'E', 'A', 'D'};
    auto put32 = [&](std::uint32_t v) {
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        bytes.insert(bytes.end(), b, b + 4);
    };
    auto putf = [&](float v) {
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        bytes.insert(bytes.end(), b, b + 4);
    };
    put32(static_cast<std::uint32_t>(head.W.rows));
    put32(static_cast<std::uint32_t>(head.W.cols));
    for (double v : head.W.v) putf(static_cast<float>(v));
    for (double v : head.b) putf(static_cast<float>(v));
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("write failed: " + path.string());
}

ClassifierHead read_head(const std::filesystem::path& path) {
    Reader r(path, "head");
    r.expect_magic("HEAD");
    const auto k = r.get<std::uint32_t>();
    const auto d = r.get<std::uint32_t>();
    if (k == 0 || d == 0) throw DataError("head: empty dimensions");
    ClassifierHead h;
    h.W = MatrixD(k, d);
    for (auto& v : h.W.v) v = r.get_f32();
    h.b.resize(k);
    for (auto& v : h.b) v = r.get_f32();
    r.expect_consumed();
    return h;
}

// ---------------------------------------------------------------------------
// scores CSV
// ---------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_scores_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    os << "index,logp_nats,bpd,nfe,label\n";
    for (const auto& r : rows) {
        os << r.index << ',' << format_double(r.logp_nats) << ',';
        if (r.bpd) os << format_double(*r.bpd);
        os << ',';
        if (r.nfe) os << *r.nfe;
        os << ',';
        if (r.label) os << *r.label;
        os << '\n';
    }
    if (!os) throw DataError("write failed: " + path.string());
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open scores csv: " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw DataError("scores csv is empty: " + path.string());
    if (line.ends_with("\r")) line.pop_back();
    if (line != "index,logp_nats,bpd,nfe,label")
        throw DataError("scores csv has unexpected header: " + path.string());
    std::vector<ScoreRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.ends_with("\r")) line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        while (f.size() < 5) f.emplace_back();
        if (f.size() != 5)
            throw DataError("scores csv: bad field count at line " + std::to_string(lineno));
        try {
            ScoreRow r;
            r.index = std::stoull(f[0]);
            r.logp_nats = std::stod(f[1]);
            if (!f[2].empty()) r.bpd = std::stod(f[2]);
            if (!f[3].empty()) r.nfe = std::stol(f[3]);
            if (!f[4].empty()) r.label = static_cast<std::int32_t>(std::stol(f[4]));
            rows.push_back(r);
        } catch (const std::exception&) {
            throw DataError("scores csv: parse error at line " + std::to_string(lineno));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap ConfigMap::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    ConfigMap cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
        cfg.kv_[key] = val;
    }
    return cfg;
}

std::string ConfigMap::get_str(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    const std::string v = (it == kv_.end()) ? def : it->second;
    resolved_[key] = v;
    return v;
}

double ConfigMap::get_double(const std::string& key, double def) const {
    auto it = kv_.find(key);
    double v = def;
    if (it != kv_.end()) {
        try {
            std::size_t used = 0;
            v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' is not a number: " + it->second);
        }
    }
    resolved_[key] = format_double(v);
    return v;
}

std::int64_t ConfigMap::get_int(const std::string& key, std::int64_t def) const {
    auto it = kv_.find(key);
    std::int64_t v = def;
    if (it != kv_.end()) {
        try {
            std::size_t used = 0;
            v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' is not an integer: " + it->second);
        }
    }
    resolved_[key] = std::to_string(v);
    return v;
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t def) const {
    auto it = kv_.find(key);
    std::uint64_t v = def;
    if (it != kv_.end()) {
        try {
            std::size_t used = 0;
            v = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' is not an unsigned integer: " + it->second);
        }
    }
    resolved_[key] = std::to_string(v);
    return v;
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    bool v = def;
    if (it != kv_.end()) {
        const std::string& s = it->second;
        if (s == "true" || s == "1" || s == "yes") v = true;
        else if (s == "false" || s == "0" || s == "no") v = false;
        else throw ConfigError("config: '" + key + "' is not a boolean: " + s);
    }
    resolved_[key] = v ? "true" : "false";
    return v;
}

SdeSpec sde_from_config(const ConfigMap& cfg) {
    SdeSpec s;
    s.kind = sde_kind_from_name(cfg.get_str("sde.kind", "subvp"));
    s.sigma_min = cfg.get_double("sde.sigma_min", s.sigma_min);
    s.sigma_max = cfg.get_double("sde.sigma_max", s.sigma_max);
    s.beta_min = cfg.get_double("sde.beta_min", s.beta_min);
    s.beta_max = cfg.get_double("sde.beta_max", s.beta_max);
    s.validate();
    return s;
}

ScoreNetConfig net_from_config(const ConfigMap& cfg) {
    ScoreNetConfig n;
    n.input_dim = static_cast<std::uint32_t>(cfg.get_int("net.input_dim", 0));
    n.hidden_dim = static_cast<std::uint32_t>(cfg.get_int("net.hidden_dim", n.hidden_dim));
    n.num_blocks = static_cast<std::uint32_t>(cfg.get_int("net.num_blocks", n.num_blocks));
    n.time_embed_dim =
        static_cast<std::uint32_t>(cfg.get_int("net.time_embed_dim", n.time_embed_dim));
    n.class_embed_dim =
        static_cast<std::uint32_t>(cfg.get_int("net.class_embed_dim", n.class_embed_dim));
    n.num_classes = static_cast<std::uint32_t>(cfg.get_int("net.num_classes", 0));
    return n;
}

TrainConfig train_from_config(const ConfigMap& cfg) {
    TrainConfig t;
    t.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size", t.batch_size));
    t.lr = cfg.get_double("train.lr", t.lr);
    t.epochs = static_cast<std::size_t>(cfg.get_int("train.epochs", t.epochs));
    t.iterations = static_cast<std::size_t>(cfg.get_int("train.iterations", 0));
    t.grad_clip_norm = cfg.get_double("train.grad_clip_norm", t.grad_clip_norm);
    t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
    t.seed = cfg.get_u64("seed", 0);
    t.t_min = cfg.get_double("train.t_min", t.t_min);
    t.normalize_inputs = cfg.get_bool("train.normalize_inputs", true);
    t.threads = static_cast<int>(cfg.get_int("threads", 1));
    t.validate();
    return t;
}

OdeConfig ode_from_config(const ConfigMap& cfg, std::uint64_t root_seed) {
    OdeConfig o;
    o.atol = cfg.get_double("ode.atol", o.atol);
    o.rtol = cfg.get_double("ode.rtol", o.rtol);
    o.t_min = cfg.get_double("ode.t_min", o.t_min);
    o.t_max = cfg.get_double("ode.t_max", o.t_max);
    o.probe_count = static_cast<int>(cfg.get_int("ode.probe_count", o.probe_count));
    const std::string kind = cfg.get_str("ode.probe_kind", "rademacher");
    if (kind == "rademacher") o.probe_kind = ProbeKind::Rademacher;
    else if (kind == "gaussian") o.probe_kind = ProbeKind::Gaussian;
    else throw ConfigError("config: ode.probe_kind must be rademacher|gaussian");
    o.probe_seed = cfg.get_u64("ode.probe_seed", split_seed(root_seed, seed_stream::probes));
    o.max_steps = cfg.get_int("ode.max_steps", o.max_steps);
    o.validate();
    return o;
}

}  // namespace rdm
