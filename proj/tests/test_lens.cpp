#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "inslen/error.hpp"
#include "inslen/lens.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace inslen;

namespace {

Tensor small_vocab() { return Tensor(3, 2, {1, 0, 0, 1, 0, 0}); }

// V = 2 with W = {(1), (0)}: P(token 0 | z) = sigmoid(z / tau).
Tensor binary_vocab() { return Tensor(2, 1, {1, 0}); }

Tensor rows_with_probs(std::initializer_list<double> probs) {
    std::vector<float> z;
    for (double p : probs) z.push_back(static_cast<float>(std::log(p / (1 - p))));
    return Tensor(z.size(), 1, z);
}

std::vector<std::size_t> indices(const std::vector<lens::Selected>& sel) {
    std::vector<std::size_t> out;
    for (const auto& s : sel) out.push_back(s.index);
    return out;
}

}  // namespace

TEST_CASE("logit lens on a three-token vocabulary") {
    const auto W = small_vocab();
    const std::vector<float> z{2, 0};
    const auto p = lens::logit_lens(z, W, 1.0);
    const auto expect = oracle::softmax({2, 0}, W, 1);
    REQUIRE(p.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(static_cast<double>(expect[i])).epsilon(1e-14));
    CHECK(p[0] == doctest::Approx(0.7869).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.1065).epsilon(1e-3));
    CHECK(p[2] == doctest::Approx(0.1065).epsilon(1e-3));
    CHECK(lens::token_prob(z, W, 1.0, 0) == p[0]);
}

TEST_CASE("huge temperature flattens to uniform") {
    const auto p = lens::logit_lens(std::vector<float>{2, 0}, small_vocab(), 1e9);
    for (double x : p) CHECK(std::abs(x - 1.0 / 3) < 1e-6);
}

TEST_CASE("zero unembedding gives the uniform distribution") {
    const Tensor W(5, 3, std::vector<float>(15, 0.0f));
    const std::vector<float> z{1, -2, 3};
    for (double x : lens::logit_lens(z, W, 1.0)) CHECK(x == doctest::Approx(0.2));
    CHECK(lens::token_prob(z, W, 2.0, 4) == doctest::Approx(0.2));
}

TEST_CASE("lens argument errors") {
    const auto W = small_vocab();
    CHECK_THROWS_AS(lens::logit_lens(std::vector<float>{1, 0}, W, 0.0), ParameterError);
    CHECK_THROWS_AS(lens::logit_lens(std::vector<float>{1, 0}, W, -1.0), ParameterError);
    CHECK_THROWS_AS(lens::logit_lens(std::vector<float>{std::numeric_limits<float>::quiet_NaN(), 0}, W, 1.0),
                    InputError);
    CHECK_THROWS_AS(lens::logit_lens(std::vector<float>{1, 0, 0}, W, 1.0), InputError);
    CHECK_THROWS_AS(lens::token_prob(std::vector<float>{1, 0}, W, 1.0, 3), IndexError);
    CHECK_THROWS_AS(lens::token_prob(std::vector<float>{1, 0}, W, 1.0, -1), IndexError);
    CHECK_THROWS_AS(lens::top_k_tokens(std::vector<float>{1, 0}, W, 0), ParameterError);
    CHECK_THROWS_AS(lens::top_k_tokens(std::vector<float>{1, 0}, W, 4), ParameterError);
}

TEST_CASE("top-k tokens") {
    const auto W = small_vocab();
    const std::vector<float> z{2, 0};
    const auto top1 = lens::top_k_tokens(z, W, 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].token_id == 0);

    // tokens 1 and 2 tie only if their logits tie: z = (2, 0) gives both 0
    const auto all = lens::top_k_tokens(z, W, 3);
    CHECK(all[1].token_id == 1);
    CHECK(all[2].token_id == 2);
    CHECK(all[1].probability == all[2].probability);
}

TEST_CASE("image selection with known per-patch probabilities") {
    const ImageBlock images{20, rows_with_probs({0.1, 0.7, 0.2})};
    const auto W = binary_vocab();
    for (std::size_t i = 0; i < 3; ++i) {
        const double expect = std::array{0.1, 0.7, 0.2}[i];
        CHECK(lens::token_prob(images.embeddings.row(i), W, 1.0, 0) == doctest::Approx(expect).epsilon(1e-6));
    }
    const auto sel = lens::select_top_k_image_embeddings(images, W, 0, 2);
    CHECK(indices(sel) == std::vector<std::size_t>{1, 2});
    CHECK(indices(lens::select_top_k_image_embeddings(images, W, 0, 3)) == std::vector<std::size_t>{1, 2, 0});
    CHECK_THROWS_AS(lens::select_top_k_image_embeddings(images, W, 0, 4), ParameterError);
    CHECK_THROWS_AS(lens::select_top_k_image_embeddings(images, W, 0, 0), ParameterError);
}

TEST_CASE("instruction selection with known per-embedding probabilities") {
    InstructionBlock instr{19, {0, 0, 0, 0}, rows_with_probs({0.05, 0.6, 0.3, 0.05})};
    const auto W = binary_vocab();
    for (double tau : {1.0, 10.0}) {
        CHECK(indices(lens::select_top_m_instruction_embeddings(instr, W, 0, 2, tau)) ==
              std::vector<std::size_t>{1, 2});
        // equal rows 0 and 3 tie, lower index first
        CHECK(indices(lens::select_top_m_instruction_embeddings(instr, W, 0, 4, tau)) ==
              std::vector<std::size_t>{1, 2, 0, 3});
    }
    CHECK_THROWS_AS(lens::select_top_m_instruction_embeddings(instr, W, 0, 5, 1.0), ParameterError);

    // m = 1 is the row attaining the max probability at the same tau
    const auto one = lens::select_top_m_instruction_embeddings(instr, W, 0, 1, 10.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].index == 1);
    CHECK(one[0].probability == lens::token_prob(instr.embeddings.row(1), W, 10.0, 0));
}

TEST_CASE("property: probabilities form a distribution and survive logit shifts") {
    gen::Gen g(11);
    for (int trial = 0; trial < 300; ++trial) {
        const auto V = g.between(2, 64);
        const auto d = g.between(1, 8);
        // logit gaps stay well below the ~745 where exp underflows in double
        const auto W = g.tensor(V, d, g.uniform(0.1, 3.0));
        const auto z = g.floats(d, g.uniform(0.1, 5.0));
        const double tau = std::exp(g.uniform(-1, 3));
        const auto p = lens::logit_lens(z, W, tau);
        const double total = std::accumulate(p.begin(), p.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-6);
        for (double x : p) CHECK(x > 0.0);

        // shift every logit by c: add a constant column to W and a matching coordinate to z
        const double c = g.uniform(-50, 50);
        std::vector<float> w2;
        for (std::size_t v = 0; v < V; ++v) {
            for (std::size_t k = 0; k < d; ++k) w2.push_back(W.at(v, k));
            w2.push_back(1.0f);
        }
        auto z2 = z;
        z2.push_back(static_cast<float>(c * tau));
        const auto p2 = lens::logit_lens(z2, Tensor(V, d + 1, w2), tau);
        for (std::size_t v = 0; v < V; ++v) CHECK(std::abs(p[v] - p2[v]) < 1e-7);

        // single-token path matches the full vector bit for bit
        const auto tok = g.index(V);
        CHECK(lens::token_prob(z, W, tau, static_cast<std::int64_t>(tok)) == p[tok]);
    }
}

TEST_CASE("property: token ranking does not depend on temperature") {
    gen::Gen g(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto V = g.between(2, 64);
        const auto d = g.between(1, 8);
        const auto W = g.tensor(V, d);
        const auto z = g.floats(d);
        const double t1 = std::exp(g.uniform(-2, 2));
        const double t2 = std::exp(g.uniform(-2, 2));
        const auto a = lens::top_k_tokens(z, W, V);
        std::vector<std::size_t> by_t1(V), by_t2(V);
        const auto p1 = lens::logit_lens(z, W, t1);
        const auto p2 = lens::logit_lens(z, W, t2);
        std::iota(by_t1.begin(), by_t1.end(), 0);
        by_t2 = by_t1;
        std::stable_sort(by_t1.begin(), by_t1.end(), [&](auto x, auto y) { return p1[x] > p1[y]; });
        std::stable_sort(by_t2.begin(), by_t2.end(), [&](auto x, auto y) { return p2[x] > p2[y]; });
        CHECK(by_t1 == by_t2);

        // top_k(|V|) is a permutation of the vocabulary
        std::vector<std::int64_t> ids;
        for (const auto& t : a) ids.push_back(t.token_id);
        std::sort(ids.begin(), ids.end());
        for (std::size_t v = 0; v < V; ++v) CHECK(ids[v] == static_cast<std::int64_t>(v));
    }
}

TEST_CASE("property: selections match an exhaustive-sort oracle") {
    gen::Gen g(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto V = g.between(2, 64);
        const auto d = g.between(1, 8);
        const auto W = g.tensor(V, d);
        const auto n = g.between(1, 16);
        const ImageBlock images{1, g.tensor(n, d, 2.0)};
        const auto tok = static_cast<std::int64_t>(g.index(V));
        const double tau = g.coin() ? 1.0 : 10.0;

        std::vector<long double> probs;
        for (std::size_t i = 0; i < n; ++i) probs.push_back(oracle::prob(oracle::to_vec(images.embeddings.row(i)), W, tau, tok));
        const auto order = oracle::ranking(probs);
        const auto k = g.between(1, n);
        const auto sel = lens::select_top(images.embeddings, W, tok, k, tau);
        REQUIRE(sel.size() == k);
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(sel[i].index == order[i]);
            CHECK(std::abs(sel[i].probability - static_cast<double>(probs[order[i]])) < 1e-12);
        }

        // token interpretation against the oracle distribution
        const auto z = images.embeddings.row(0);
        const auto dist = oracle::softmax(oracle::to_vec(z), W, 1);
        const auto tokens = lens::top_k_tokens(z, W, V);
        const auto vorder = oracle::ranking(std::vector<long double>(dist.begin(), dist.end()));
        for (std::size_t v = 0; v < V; ++v) CHECK(tokens[v].token_id == static_cast<std::int64_t>(vorder[v]));
    }
}

TEST_CASE("projected rows agree with direct evaluation") {
    gen::Gen g(14);
    const auto W = g.tensor(40, 6);
    const auto rows = g.tensor(9, 6, 3.0);
    const lens::ProjectedRows proj(rows, W, 2.5);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        for (std::int64_t t = 0; t < 40; ++t) CHECK(proj.prob(i, t) == lens::token_prob(rows.row(i), W, 2.5, t));
    }
}
