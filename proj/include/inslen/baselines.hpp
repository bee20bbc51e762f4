#pragma once

// Reference detectors: NLL, Entropy, Internal Confidence, SVAR and
// Contextual Lens, computed from the same traces as InsLen.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inslen/scores.hpp"
#include "inslen/trace.hpp"

namespace inslen::baselines {

/// A baseline value, or the reason it could not be computed.
struct Measurement {
    std::optional<double> value;
    std::string unavailable;

    bool available() const noexcept { return value.has_value(); }
    static Measurement of(double v) { return {v, {}}; }
    static Measurement missing(std::string why) { return {std::nullopt, std::move(why)}; }
};

struct BaselineSet {
    Measurement nll;
    Measurement entropy;
    Measurement internal_conf;
    Measurement svar;
    Measurement contextual_lens;
};

Measurement nll_score(const ObjectTokenRecord& record);
Measurement entropy_score(const ObjectTokenRecord& record);

// Per-token reductions of a decode step, as stored in traces.

/// log p for the emitted token's probability p in (0, 1].
double decode_log_prob(double p);

/// sum_v p_v log p_v over a decode distribution, with 0 log 0 = 0.
double decode_entropy_score(std::span<const double> distribution);

/// Attention mass one head puts on the image-token positions.
double image_attention_mass(std::span<const double> attention, std::span<const std::size_t> image_positions);

/// Max token probability (tau = 1) over every patch of every block.
Measurement internal_confidence(std::span<const ImageBlock> images, const Tensor& unembedding, std::int64_t token_id);

/// Head-averaged VAR summed over decoder layers [layer_lo, layer_hi] (1-indexed).
Measurement svar(const ObjectTokenRecord& record, int layer_lo = 5, int layer_hi = 18);

/// Max cosine similarity between h_o and the patches. Throws
/// DegenerateInputError on zero-norm operands.
double contextual_lens(std::span<const float> h_o, const ImageBlock& images);

std::vector<BaselineSet> baseline_sample(const SampleTrace& sample, const ModelCard& card, const Tensor& unembedding,
                                         const scores::ScoreConfig& cfg);

}  // namespace inslen::baselines
