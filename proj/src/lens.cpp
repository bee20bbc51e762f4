#include "inslen/lens.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "inslen/error.hpp"

namespace inslen::lens {

namespace {

void check_inputs(std::span<const float> z, const Tensor& w, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ParameterError("temperature must be a positive finite number, got " + std::to_string(tau));
    }
    if (z.size() != w.cols()) {
        throw InputError("embedding width " + std::to_string(z.size()) + " != unembedding width " +
                         std::to_string(w.cols()));
    }
    if (w.rows() == 0) throw InputError("empty unembedding matrix");
    for (float x : z) {
        if (!std::isfinite(x)) throw InputError("embedding has a non-finite entry");
    }
}

void check_token(std::int64_t token_id, const Tensor& w) {
    if (token_id < 0 || static_cast<std::uint64_t>(token_id) >= w.rows()) {
        throw IndexError("token_id " + std::to_string(token_id) + " outside vocabulary of " +
                         std::to_string(w.rows()));
    }
}

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

double logit(std::span<const float> z, const Tensor& w, double tau, std::size_t row) {
    return dot(w.row(row), z) / tau;
}

}  // namespace

std::vector<double> logits(std::span<const float> embedding, const Tensor& unembedding, double tau) {
    check_inputs(embedding, unembedding, tau);
    std::vector<double> out(unembedding.rows());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = logit(embedding, unembedding, tau, v);
    return out;
}

std::vector<double> logit_lens(std::span<const float> embedding, const Tensor& unembedding, double tau) {
    auto out = logits(embedding, unembedding, tau);
    const double mx = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (double& x : out) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : out) x /= sum;
    return out;
}

Normalizer normalizer(std::span<const float> embedding, const Tensor& unembedding, double tau) {
    const auto l = logits(embedding, unembedding, tau);
    Normalizer n;
    n.max_logit = *std::max_element(l.begin(), l.end());
    for (double x : l) n.sum += std::exp(x - n.max_logit);
    return n;
}

double token_prob(std::span<const float> embedding, const Tensor& unembedding, double tau, std::int64_t token_id,
                  const Normalizer& norm) {
    check_token(token_id, unembedding);
    const double l = logit(embedding, unembedding, tau, static_cast<std::size_t>(token_id));
    return std::exp(l - norm.max_logit) / norm.sum;
}

double token_prob(std::span<const float> embedding, const Tensor& unembedding, double tau, std::int64_t token_id) {
    check_token(token_id, unembedding);
    return token_prob(embedding, unembedding, tau, token_id, normalizer(embedding, unembedding, tau));
}

TokenInterpretation top_k_tokens(std::span<const float> embedding, const Tensor& unembedding, std::size_t k) {
    if (k < 1 || k > unembedding.rows()) {
        throw ParameterError("k must lie in [1, " + std::to_string(unembedding.rows()) + "], got " +
                             std::to_string(k));
    }
    const auto probs = logit_lens(embedding, unembedding, 1.0);
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });
    TokenInterpretation out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back({static_cast<std::int64_t>(order[i]), probs[order[i]]});
    return out;
}

ProjectedRows::ProjectedRows(const Tensor& rows, const Tensor& unembedding, double tau)
    : rows_(&rows), unembedding_(&unembedding), tau_(tau) {
    norms_.reserve(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) norms_.push_back(normalizer(rows.row(i), unembedding, tau));
}

double ProjectedRows::prob(std::size_t i, std::int64_t token_id) const {
    return token_prob(rows_->row(i), *unembedding_, tau_, token_id, norms_.at(i));
}

std::vector<Selected> ProjectedRows::top(std::int64_t token_id, std::size_t count) const {
    if (count < 1 || count > size()) {
        throw ParameterError("selection size must lie in [1, " + std::to_string(size()) + "], got " +
                             std::to_string(count));
    }
    check_token(token_id, *unembedding_);
    std::vector<Selected> all(size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = {i, prob(i, token_id), rows_->row(i)};
    std::stable_sort(all.begin(), all.end(),
                     [](const Selected& a, const Selected& b) { return a.probability > b.probability; });
    all.resize(count);
    return all;
}

std::vector<Selected> select_top(const Tensor& rows, const Tensor& unembedding, std::int64_t token_id,
                                 std::size_t count, double tau) {
    if (count < 1 || count > rows.rows()) {
        throw ParameterError("selection size must lie in [1, " + std::to_string(rows.rows()) + "], got " +
                             std::to_string(count));
    }
    check_token(token_id, unembedding);
    return ProjectedRows(rows, unembedding, tau).top(token_id, count);
}

std::vector<Selected> select_top_k_image_embeddings(const ImageBlock& images, const Tensor& unembedding,
                                                    std::int64_t token_id, std::size_t k, double tau) {
    return select_top(images.embeddings, unembedding, token_id, k, tau);
}

std::vector<Selected> select_top_m_instruction_embeddings(const InstructionBlock& instruction,
                                                          const Tensor& unembedding, std::int64_t token_id,
                                                          std::size_t m, double tau) {
    return select_top(instruction.embeddings, unembedding, token_id, m, tau);
}

}  // namespace inslen::lens
