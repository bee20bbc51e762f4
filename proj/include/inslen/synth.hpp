#pragma once

// Deterministic synthetic traces with a controllable grounding signal.
//
// Each object token o has a direction w_o (its unembedding row). Real objects
// get instr_signal * w_o added to a few instruction embeddings and
// image_signal * w_o added to a cluster of image patches. Hallucinated objects
// get distractor_noise * w_o added to image patches only, never to the
// instruction. Decode statistics and VAR tables are label-independent noise.

#include <cstddef>
#include <cstdint>
#include <string>

#include "inslen/trace.hpp"

namespace inslen::synth {

struct SynthConfig {
    std::size_t vocab_size = 64;
    std::size_t hidden_dim = 8;
    std::size_t num_layers = 20;
    std::size_t num_heads = 4;
    std::size_t n_samples = 50;
    std::size_t n_instruction_tokens = 32;  // M
    std::size_t n_image_patches = 64;       // N
    std::size_t objects_per_sample = 4;
    std::size_t instr_cluster = 4;  // instruction embeddings carrying a real object's direction
    std::size_t image_cluster = 8;  // patches carrying an object's direction
    double prevalence = 0.75;       // fraction of real objects
    double instr_signal = 3.0;
    double image_signal = 1.0;
    double distractor_noise = 1.0;
    double noise_scale = 1.0;   // isotropic noise norm per embedding (expected)
    double object_signal = 3.0;  // norm of w_o in h_o
    double object_noise = 0.1;   // noise norm on h_o around object_signal * w_o
    std::uint64_t seed = 42;
    DType dtype = DType::f32;

    /// Throws ParameterError when counts or ranges are invalid.
    void check() const;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Layers written by the generator: instruction and object embeddings at the
/// penultimate layer, image embeddings at the last layer, matching the
/// ScoreConfig defaults.
int instruction_layer(const SynthConfig& cfg);
int image_layer(const SynthConfig& cfg);

TraceContainer generate(const SynthConfig& cfg);

}  // namespace inslen::synth
