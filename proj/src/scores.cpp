#include "inslen/scores.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inslen/baselines.hpp"
#include "inslen/error.hpp"

namespace inslen::scores {

std::string_view to_string(ConsistencyVariant v) {
    switch (v) {
        case ConsistencyVariant::relative: return "relative";
        case ConsistencyVariant::cos: return "cos";
        case ConsistencyVariant::distance: return "distance";
        case ConsistencyVariant::direction: return "direction";
    }
    return "relative";
}

ConsistencyVariant parse_consistency_variant(std::string_view name) {
    if (name == "relative") return ConsistencyVariant::relative;
    if (name == "cos") return ConsistencyVariant::cos;
    if (name == "distance") return ConsistencyVariant::distance;
    if (name == "direction") return ConsistencyVariant::direction;
    throw ConfigError("unknown consistency variant '" + std::string(name) + "'");
}

std::string_view to_string(VisionScore v) {
    switch (v) {
        case VisionScore::lss: return "lss";
        case VisionScore::internal_conf: return "internal_conf";
        case VisionScore::svar: return "svar";
    }
    return "lss";
}

VisionScore parse_vision_score(std::string_view name) {
    if (name == "lss") return VisionScore::lss;
    if (name == "internal_conf") return VisionScore::internal_conf;
    if (name == "svar") return VisionScore::svar;
    throw ConfigError("unknown vision score '" + std::string(name) + "'");
}

void ScoreConfig::check() const {
    if (!(omega >= 0.0 && omega <= 1.0)) throw ParameterError("omega must lie in [0, 1]");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("tau must be positive");
    if (!std::isfinite(alpha)) throw ParameterError("alpha must be finite");
    if (m < 1) throw ParameterError("m must be at least 1");
    if (K < 1) throw ParameterError("K must be at least 1");
    if (k_cafe < 1) throw ParameterError("k_cafe must be at least 1");
    if (svar_layer_lo < 1 || svar_layer_hi < svar_layer_lo) {
        throw ParameterError("SVAR layer range must satisfy 1 <= lo <= hi");
    }
}

namespace {

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(std::span<const float> a, std::span<const float> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine similarity with a zero-norm vector");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<double>(a[i]) * b[i];
    return d / (na * nb);
}

double cafe_from(const lens::ProjectedRows& instr, std::int64_t token_id, int k_cafe) {
    if (instr.size() == 0) throw InputError("empty instruction block");
    if (k_cafe < 1 || static_cast<std::size_t>(k_cafe) > instr.size()) {
        throw ParameterError("k_cafe must lie in [1, " + std::to_string(instr.size()) + "]");
    }
    if (k_cafe == 1) {
        double best = 0.0;
        for (std::size_t j = 0; j < instr.size(); ++j) best = std::max(best, instr.prob(j, token_id));
        return best;
    }
    const auto top = instr.top(token_id, static_cast<std::size_t>(k_cafe));
    double sum = 0.0;
    for (const auto& s : top) sum += s.probability;
    return sum / static_cast<double>(top.size());
}

ContextConsistency context_consistency_from(std::span<const float> h_o, const lens::ProjectedRows& instr,
                                            std::int64_t token_id, std::size_t m, double alpha,
                                            ConsistencyVariant variant) {
    if (instr.size() == 0) throw InputError("empty instruction block");
    const auto selected = instr.top(token_id, m);
    std::vector<double> z_bar(h_o.size(), 0.0);
    double conf = 0.0;
    for (const auto& s : selected) {
        if (s.embedding.size() != h_o.size()) throw InputError("instruction embedding width differs from h_o");
        for (std::size_t k = 0; k < z_bar.size(); ++k) z_bar[k] += s.embedding[k];
        conf += s.probability;
    }
    const auto n = static_cast<double>(selected.size());
    for (double& x : z_bar) x /= n;
    ContextConsistency out;
    out.mean_conf = conf / n;
    out.s_con = consistency(h_o, z_bar, alpha, variant);
    out.s_ccs = out.s_con * out.mean_conf;
    return out;
}

double local_similarity_of(std::span<const float> h_o, const std::vector<lens::Selected>& selected) {
    std::vector<std::span<const float>> rows;
    rows.reserve(selected.size());
    for (const auto& s : selected) rows.push_back(s.embedding);
    return local_similarity(h_o, rows);
}

}  // namespace

double local_similarity(std::span<const float> h_o, std::span<const std::span<const float>> selected) {
    if (selected.empty()) throw InputError("local similarity needs at least one image embedding");
    double sum = 0.0;
    for (const auto& v : selected) {
        if (v.size() != h_o.size()) throw InputError("image embedding width differs from h_o");
        sum += cosine(h_o, v);
    }
    return sum / static_cast<double>(selected.size());
}

double cafe(const InstructionBlock& instruction, const Tensor& unembedding, std::int64_t token_id, double tau,
            int k_cafe) {
    if (instruction.count() == 0) throw InputError("empty instruction block");
    return cafe_from(lens::ProjectedRows(instruction.embeddings, unembedding, tau), token_id, k_cafe);
}

double calibrated_score(double cafe_value, double vision_value) {
    if (!std::isfinite(cafe_value) || !std::isfinite(vision_value)) {
        throw InputError("calibrated score needs finite inputs");
    }
    return cafe_value * vision_value;
}

double consistency(std::span<const float> h_o, std::span<const double> z_bar, double alpha,
                   ConsistencyVariant variant) {
    if (h_o.size() != z_bar.size()) throw InputError("consistency operands differ in width");
    const double nh = norm(h_o);
    const double nz = norm(z_bar);
    auto dist = [&](double sh, double sz) {
        double s = 0.0;
        for (std::size_t k = 0; k < h_o.size(); ++k) {
            const double diff = h_o[k] / sh - z_bar[k] / sz;
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    switch (variant) {
        case ConsistencyVariant::relative:
            if (nh == 0.0) throw DegenerateInputError("relative consistency with zero-norm h_o");
            return alpha - dist(1.0, 1.0) / nh;
        case ConsistencyVariant::cos: {
            if (nh == 0.0 || nz == 0.0) throw DegenerateInputError("cosine consistency with a zero-norm operand");
            double d = 0.0;
            for (std::size_t k = 0; k < h_o.size(); ++k) d += h_o[k] * z_bar[k];
            return d / (nh * nz);
        }
        case ConsistencyVariant::distance:
            return alpha - dist(1.0, 1.0);
        case ConsistencyVariant::direction:
            if (nh == 0.0 || nz == 0.0) throw DegenerateInputError("direction consistency with a zero-norm operand");
            return alpha - dist(nh, nz);
    }
    throw ParameterError("unknown consistency variant");
}

ContextConsistency context_consistency(std::span<const float> h_o, const InstructionBlock& instruction,
                                       const Tensor& unembedding, std::int64_t token_id, const ScoreConfig& cfg) {
    if (instruction.count() == 0) throw InputError("empty instruction block");
    return context_consistency_from(h_o, lens::ProjectedRows(instruction.embeddings, unembedding, cfg.tau),
                                    token_id, static_cast<std::size_t>(cfg.m), cfg.alpha, cfg.consistency_variant);
}

double inslen(double s_cls, double s_ccs, double omega) {
    if (!(omega >= 0.0 && omega <= 1.0)) throw ParameterError("omega must lie in [0, 1]");
    return omega * s_cls + (1.0 - omega) * s_ccs;
}

SampleScores score_sample(const SampleTrace& sample, const ModelCard& card, const Tensor& unembedding,
                          const ScoreConfig& cfg) {
    cfg.check();
    const int instr_layer = resolve_layer(cfg.instr_layer, card.num_layers);
    const int obj_layer = resolve_layer(cfg.obj_layer, card.num_layers);
    const int image_layer = resolve_layer(cfg.image_layer, card.num_layers);

    SampleScores out;
    out.objects.resize(sample.objects.size());
    if (sample.objects.empty()) return out;

    if (sample.instruction.layer != instr_layer) {
        throw ConfigError("sample '" + sample.sample_id + "' has no instruction block at layer " +
                          std::to_string(instr_layer) + " (found layer " + std::to_string(sample.instruction.layer) +
                          ")");
    }
    if (sample.instruction.count() == 0) {
        throw ConfigError("sample '" + sample.sample_id + "' has an empty instruction block");
    }
    const ImageBlock* images = sample.image_at(image_layer);
    if (images == nullptr || images->count() == 0) {
        throw ConfigError("sample '" + sample.sample_id + "' has no image block at layer " +
                          std::to_string(image_layer));
    }

    std::size_t k = static_cast<std::size_t>(cfg.K);
    if (k > images->count()) {
        out.warnings.push_back("K=" + std::to_string(cfg.K) + " clamped to " +
                               std::to_string(images->count()) + " image embeddings");
        k = images->count();
    }
    std::size_t m = static_cast<std::size_t>(cfg.m);
    if (m > sample.instruction.count()) {
        out.warnings.push_back("m=" + std::to_string(cfg.m) + " clamped to " +
                               std::to_string(sample.instruction.count()) + " instruction embeddings");
        m = sample.instruction.count();
    }
    int k_cafe = cfg.k_cafe;
    if (static_cast<std::size_t>(k_cafe) > sample.instruction.count()) {
        out.warnings.push_back("k_cafe=" + std::to_string(cfg.k_cafe) +
                               " clamped to " + std::to_string(sample.instruction.count()));
        k_cafe = static_cast<int>(sample.instruction.count());
    }

    const lens::ProjectedRows image_rows(images->embeddings, unembedding, 1.0);
    const lens::ProjectedRows instr_rows(sample.instruction.embeddings, unembedding, cfg.tau);

    for (std::size_t i = 0; i < sample.objects.size(); ++i) {
        const auto& obj = sample.objects[i];
        auto& result = out.objects[i];
        try {
            const Tensor* h = obj.embedding_at(obj_layer);
            if (h == nullptr) {
                throw ConfigError("object '" + obj.surface + "' has no embedding at layer " +
                                  std::to_string(obj_layer));
            }
            const auto h_o = h->row(0);

            ScoreSet s;
            s.s_lss = local_similarity_of(h_o, image_rows.top(obj.token_id, k));
            s.s_cafe = cafe_from(instr_rows, obj.token_id, k_cafe);
            switch (cfg.vision_score) {
                case VisionScore::lss: s.vision = s.s_lss; break;
                case VisionScore::internal_conf: {
                    const auto ic = baselines::internal_confidence(sample.images, unembedding, obj.token_id);
                    if (!ic.available()) throw InputError("internal confidence unavailable: " + ic.unavailable);
                    s.vision = *ic.value;
                    break;
                }
                case VisionScore::svar: {
                    const auto sv = baselines::svar(obj, cfg.svar_layer_lo, cfg.svar_layer_hi);
                    if (!sv.available()) throw InputError("SVAR unavailable: " + sv.unavailable);
                    s.vision = *sv.value;
                    break;
                }
            }
            s.s_cls = calibrated_score(s.s_cafe, s.vision);
            const auto ccs = context_consistency_from(h_o, instr_rows, obj.token_id, m, cfg.alpha,
                                                      cfg.consistency_variant);
            s.s_con = ccs.s_con;
            s.mean_conf = ccs.mean_conf;
            s.s_ccs = ccs.s_ccs;
            s.s_inslen = inslen(s.s_cls, s.s_ccs, cfg.omega);
            result.scores = s;
        } catch (const Error& e) {
            result.error = e.what();
        }
    }
    return out;
}

}  // namespace inslen::scores
