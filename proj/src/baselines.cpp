#include "inslen/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inslen/error.hpp"
#include "inslen/lens.hpp"

namespace inslen::baselines {

double decode_log_prob(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw InputError("token probability must lie in (0, 1]");
    return std::log(p);
}

double decode_entropy_score(std::span<const double> distribution) {
    if (distribution.empty()) throw InputError("empty decode distribution");
    double sum = 0.0;
    for (double p : distribution) {
        if (!(p >= 0.0 && p <= 1.0)) throw InputError("decode probabilities must lie in [0, 1]");
        if (p > 0.0) sum += p * std::log(p);
    }
    return sum;
}

double image_attention_mass(std::span<const double> attention, std::span<const std::size_t> image_positions) {
    double mass = 0.0;
    for (auto pos : image_positions) {
        if (pos >= attention.size()) throw IndexError("image position outside the attention row");
        mass += attention[pos];
    }
    return mass;
}

Measurement nll_score(const ObjectTokenRecord& record) {
    if (!record.nll) return Measurement::missing("no nll recorded");
    return Measurement::of(*record.nll);
}

Measurement entropy_score(const ObjectTokenRecord& record) {
    if (!record.entropy_score) return Measurement::missing("no entropy recorded");
    return Measurement::of(*record.entropy_score);
}

Measurement internal_confidence(std::span<const ImageBlock> images, const Tensor& unembedding, std::int64_t token_id) {
    if (images.empty()) return Measurement::missing("no image blocks");
    double best = 0.0;
    bool any = false;
    for (const auto& block : images) {
        for (std::size_t i = 0; i < block.count(); ++i) {
            best = std::max(best, lens::token_prob(block.embeddings.row(i), unembedding, 1.0, token_id));
            any = true;
        }
    }
    if (!any) return Measurement::missing("image blocks are empty");
    return Measurement::of(best);
}

Measurement svar(const ObjectTokenRecord& record, int layer_lo, int layer_hi) {
    if (layer_lo < 1 || layer_hi < layer_lo) throw ParameterError("SVAR layer range must satisfy 1 <= lo <= hi");
    if (!record.var_table) return Measurement::missing("no var_table");
    const auto& t = *record.var_table;
    const auto have = static_cast<int>(t.rows());
    if (have < layer_hi) {
        const int first_gap = std::max(layer_lo, have + 1);
        return Measurement::missing("var_table lacks layers " + std::to_string(first_gap) + "-" +
                                    std::to_string(layer_hi));
    }
    if (t.cols() == 0) return Measurement::missing("var_table has no heads");
    double sum = 0.0;
    for (int layer = layer_lo; layer <= layer_hi; ++layer) {
        for (float v : t.row(static_cast<std::size_t>(layer - 1))) sum += v;
    }
    return Measurement::of(sum / static_cast<double>(t.cols()));
}

double contextual_lens(std::span<const float> h_o, const ImageBlock& images) {
    if (images.count() == 0) throw InputError("contextual lens needs at least one image patch");
    double hn = 0.0;
    for (float x : h_o) hn += static_cast<double>(x) * x;
    hn = std::sqrt(hn);
    if (hn == 0.0) throw DegenerateInputError("contextual lens with zero-norm object embedding");
    double best = -1.0;
    for (std::size_t i = 0; i < images.count(); ++i) {
        const auto v = images.embeddings.row(i);
        if (v.size() != h_o.size()) throw InputError("image embedding width differs from h_o");
        double d = 0.0;
        double vn = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            d += static_cast<double>(h_o[k]) * v[k];
            vn += static_cast<double>(v[k]) * v[k];
        }
        vn = std::sqrt(vn);
        if (vn == 0.0) throw DegenerateInputError("contextual lens with zero-norm image patch");
        best = std::max(best, d / (hn * vn));
    }
    return best;
}

std::vector<BaselineSet> baseline_sample(const SampleTrace& sample, const ModelCard& card, const Tensor& unembedding,
                                         const scores::ScoreConfig& cfg) {
    const int text_layer = resolve_layer(cfg.cl_text_layer.value_or(cfg.obj_layer), card.num_layers);
    const int image_layer = resolve_layer(cfg.cl_image_layer.value_or(cfg.image_layer), card.num_layers);
    const ImageBlock* cl_images = sample.image_at(image_layer);

    auto guarded = [](auto&& f) -> Measurement {
        try {
            return f();
        } catch (const Error& e) {
            return Measurement::missing(e.what());
        }
    };

    std::vector<lens::ProjectedRows> projected;
    projected.reserve(sample.images.size());
    for (const auto& block : sample.images) projected.emplace_back(block.embeddings, unembedding, 1.0);
    auto max_image_conf = [&](std::int64_t token_id) {
        if (projected.empty()) return Measurement::missing("no image blocks");
        double best = 0.0;
        bool any = false;
        for (const auto& rows : projected) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                best = std::max(best, rows.prob(i, token_id));
                any = true;
            }
        }
        if (!any) return Measurement::missing("image blocks are empty");
        return Measurement::of(best);
    };

    std::vector<BaselineSet> out;
    out.reserve(sample.objects.size());
    for (const auto& obj : sample.objects) {
        BaselineSet b;
        b.nll = nll_score(obj);
        b.entropy = entropy_score(obj);
        b.internal_conf = guarded([&] { return max_image_conf(obj.token_id); });
        b.svar = guarded([&] { return svar(obj, cfg.svar_layer_lo, cfg.svar_layer_hi); });
        b.contextual_lens = guarded([&] {
            const Tensor* h = obj.embedding_at(text_layer);
            if (h == nullptr) return Measurement::missing("no object embedding at layer " + std::to_string(text_layer));
            if (cl_images == nullptr) return Measurement::missing("no image block at layer " + std::to_string(image_layer));
            return Measurement::of(contextual_lens(h->row(0), *cl_images));
        });
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace inslen::baselines
