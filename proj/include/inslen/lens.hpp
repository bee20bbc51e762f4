#pragma once

// Logit Lens: reading hidden states as vocabulary distributions through the
// unembedding matrix, plus the confidence-ranked selections built on it.
//
// All arithmetic is done in double precision.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "inslen/trace.hpp"

namespace inslen::lens {

/// Logits W_u * z / tau, one per vocabulary row.
std::vector<double> logits(std::span<const float> embedding, const Tensor& unembedding, double tau);

/// softmax(W_u * z / tau), stabilized by max-logit subtraction.
std::vector<double> logit_lens(std::span<const float> embedding, const Tensor& unembedding, double tau);

/// logit_lens(...)[token_id], computed against the full denominator. The
/// result is bit-identical to indexing the full vector.
double token_prob(std::span<const float> embedding, const Tensor& unembedding, double tau, std::int64_t token_id);

/// Softmax normalizer of one embedding: the max logit and sum of
/// exp(logit - max). Token-independent, so it can be shared across tokens.
struct Normalizer {
    double max_logit = 0.0;
    double sum = 0.0;
};

Normalizer normalizer(std::span<const float> embedding, const Tensor& unembedding, double tau);

/// Same value as token_prob, given a normalizer computed for the same embedding and tau.
double token_prob(std::span<const float> embedding, const Tensor& unembedding, double tau, std::int64_t token_id,
                  const Normalizer& norm);

struct TokenProb {
    std::int64_t token_id = 0;
    double probability = 0.0;
};

/// Descending probability; ties by ascending token id.
using TokenInterpretation = std::vector<TokenProb>;

/// The k most probable tokens under logit_lens with tau = 1.
TokenInterpretation top_k_tokens(std::span<const float> embedding, const Tensor& unembedding, std::size_t k);

struct Selected {
    std::size_t index = 0;  // row in the source block
    double probability = 0.0;
    std::span<const float> embedding;
};

/// A block of embeddings with their softmax normalizers precomputed, so the
/// probability of any token under any row costs one dot product.
class ProjectedRows {
public:
    ProjectedRows(const Tensor& rows, const Tensor& unembedding, double tau);

    std::size_t size() const noexcept { return norms_.size(); }
    double tau() const noexcept { return tau_; }
    std::span<const float> row(std::size_t i) const { return rows_->row(i); }

    /// token_prob(row(i), W_u, tau, token_id), bit-identical.
    double prob(std::size_t i, std::int64_t token_id) const;

    /// The `count` rows with the highest probability for the token,
    /// descending, ties by ascending row index.
    std::vector<Selected> top(std::int64_t token_id, std::size_t count) const;

private:
    const Tensor* rows_;
    const Tensor* unembedding_;
    double tau_;
    std::vector<Normalizer> norms_;
};

/// Rows of `rows` ranked by token_prob(row, W_u, tau, token_id), descending,
/// ties by ascending row index. Returns the first `count`.
std::vector<Selected> select_top(const Tensor& rows, const Tensor& unembedding, std::int64_t token_id,
                                 std::size_t count, double tau);

/// Top-K image embeddings for a token (Logit Lens at tau = 1 by default).
std::vector<Selected> select_top_k_image_embeddings(const ImageBlock& images, const Tensor& unembedding,
                                                    std::int64_t token_id, std::size_t k, double tau = 1.0);

/// Top-m instruction embeddings for a token. Ranking and reported
/// probabilities both use `tau`, so m = 1 picks the same row as cafe().
std::vector<Selected> select_top_m_instruction_embeddings(const InstructionBlock& instruction,
                                                          const Tensor& unembedding, std::int64_t token_id,
                                                          std::size_t m, double tau);

}  // namespace inslen::lens
