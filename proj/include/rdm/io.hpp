#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdm/likelihood.hpp"
#include "rdm/linalg.hpp"
#include "rdm/normalizer.hpp"
#include "rdm/score_net.hpp"
#include "rdm/sde.hpp"
#include "rdm/trainer.hpp"

namespace rdm {

// N x D float32 representation vectors with optional int32 labels.
//
// REPZ file layout (little-endian):
//   magic 'REPZ' | version u16 | N u64 | D u32 | flags u32 (bit0 labels,
//   bit1 dataset_id) | payload | checksum u64 (fnv1a-64 of all prior bytes)
// payload: [u16 id length + id bytes when bit1] [N*D f32 row-major]
//          [N i32 labels when bit0]
struct RepresentationSet {
    MatrixD data;
    std::vector<std::int32_t> labels;
    std::string dataset_id;

    bool has_labels() const { return !labels.empty(); }
    void validate() const;
};

RepresentationSet read_reps(const std::filesystem::path& path);
void write_reps(const RepresentationSet& set, const std::filesystem::path& path);

// Known encoder dims; ingest warns when dataset_id matches a name here but the
// file dimension disagrees.
std::optional<std::uint32_t> known_encoder_dim(const std::string& dataset_id);

// Model checkpoint:
//   magic 'RDM1' | version u16 | ScoreNetConfig (6 x u32) | embed seeds (2 x
//   u64) | SdeSpec (kind u8 + 4 f64) | normalizer dim u32 + mean/scale f64 |
//   params f32 | checksum u64
// The checkpoint carries everything evaluation needs.
struct Checkpoint {
    ScoreModel model;
    Normalizer normalizer;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);
std::uint64_t file_checksum(const std::filesystem::path& path);  // fnv1a-64 of contents

// Classifier head: magic 'HEAD' | K u32 | D u32 | W row-major f32 | b f32
struct ClassifierHead {
    MatrixD W;              // K x D
    std::vector<double> b;  // K
};

ClassifierHead read_head(const std::filesystem::path& path);
void write_head(const ClassifierHead& head, const std::filesystem::path& path);

// Scores CSV, schema pinned: header `index,logp_nats,bpd,nfe,label`;
// bpd/nfe left empty for baseline scores, label empty when absent.
struct ScoreRow {
    std::size_t index = 0;
    double logp_nats = 0;
    std::optional<double> bpd;
    std::optional<long> nfe;
    std::optional<std::int32_t> label;
};

void write_scores_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

// Line-based `key = value` config with dotted keys; '#' starts a comment.
// Precedence: CLI overrides > file > defaults.
class ConfigMap {
public:
    static ConfigMap from_file(const std::filesystem::path& path);
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    std::int64_t get_int(const std::string& key, std::int64_t def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }
    // every key that was ever queried, with the value in effect: the resolved
    // config echoed into reports
    const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    std::map<std::string, std::string> kv_;
    mutable std::map<std::string, std::string> resolved_;
};

SdeSpec sde_from_config(const ConfigMap& cfg);
ScoreNetConfig net_from_config(const ConfigMap& cfg);
TrainConfig train_from_config(const ConfigMap& cfg);
OdeConfig ode_from_config(const ConfigMap& cfg, std::uint64_t root_seed);

// stable float formatting used by every CSV/JSON writer (%.17g)
std::string format_double(double v);

}  // namespace rdm
