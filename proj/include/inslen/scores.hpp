#pragma once

// The InsLen score family: Local Similarity (LSS), Calibration Confidence
// (Cafe), Calibrated Local Score (CLS), context consistency (S_con, CCS) and
// the weighted fusion of CLS and CCS.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inslen/lens.hpp"
#include "inslen/trace.hpp"

namespace inslen::scores {

enum class ConsistencyVariant { relative, cos, distance, direction };
enum class VisionScore { lss, internal_conf, svar };

std::string_view to_string(ConsistencyVariant v);
ConsistencyVariant parse_consistency_variant(std::string_view name);
std::string_view to_string(VisionScore v);
VisionScore parse_vision_score(std::string_view name);

/// Hyperparameters. Layer fields accept negative indices (see resolve_layer):
/// -2 is the penultimate layer, -1 the last.
struct ScoreConfig {
    double omega = 0.4;
    double alpha = 2.0;
    double tau = 10.0;
    int m = 4;
    int K = 32;
    int k_cafe = 1;  // 1 = max over instruction embeddings, >1 = mean of the top k_cafe
    int instr_layer = -2;
    int obj_layer = -2;
    int image_layer = -1;
    ConsistencyVariant consistency_variant = ConsistencyVariant::relative;
    VisionScore vision_score = VisionScore::lss;
    // SVAR layer range, 1-indexed decoder layers, inclusive.
    int svar_layer_lo = 5;
    int svar_layer_hi = 18;
    // Contextual Lens layers; default to obj_layer / image_layer.
    std::optional<int> cl_text_layer;
    std::optional<int> cl_image_layer;

    /// Throws ParameterError on out-of-range values.
    void check() const;

    friend bool operator==(const ScoreConfig&, const ScoreConfig&) = default;
};

struct ScoreSet {
    double s_lss = 0.0;
    double s_cafe = 0.0;
    double vision = 0.0;  // the vision score fused into s_cls (equals s_lss by default)
    double s_cls = 0.0;
    double s_con = 0.0;
    double mean_conf = 0.0;
    double s_ccs = 0.0;
    double s_inslen = 0.0;
};

/// Mean cosine similarity between h_o and each selected vector.
double local_similarity(std::span<const float> h_o, std::span<const std::span<const float>> selected);

/// Max (k_cafe = 1) or top-k_cafe mean of token_prob over instruction embeddings.
double cafe(const InstructionBlock& instruction, const Tensor& unembedding, std::int64_t token_id, double tau,
            int k_cafe = 1);

double calibrated_score(double cafe_value, double vision_value);

double consistency(std::span<const float> h_o, std::span<const double> z_bar, double alpha, ConsistencyVariant variant);

struct ContextConsistency {
    double s_ccs = 0.0;
    double s_con = 0.0;
    double mean_conf = 0.0;
};

/// Selects the top-m instruction embeddings for the token (m clamped by the
/// caller), averages them, and weights their consistency with h_o by their
/// mean confidence.
ContextConsistency context_consistency(std::span<const float> h_o, const InstructionBlock& instruction,
                                       const Tensor& unembedding, std::int64_t token_id, const ScoreConfig& cfg);

double inslen(double s_cls, double s_ccs, double omega);

struct ObjectScore {
    std::optional<ScoreSet> scores;
    std::string error;  // set when the object could not be scored
};

struct SampleScores {
    std::vector<ObjectScore> objects;  // one per object token, input order
    std::vector<std::string> warnings;
};

/// Scores every object token in a sample. Missing blocks at the configured
/// layers raise ConfigError; a degenerate object becomes an error entry while
/// the others are still scored. K and m are clamped to the available counts.
SampleScores score_sample(const SampleTrace& sample, const ModelCard& card, const Tensor& unembedding,
                          const ScoreConfig& cfg);

}  // namespace inslen::scores
