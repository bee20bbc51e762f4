#include "inslen/synth.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "half.hpp"
#include "inslen/error.hpp"
#include "inslen/rng.hpp"

namespace inslen::synth {

void SynthConfig::check() const {
    if (vocab_size < 2) throw ParameterError("vocab_size must be at least 2");
    if (hidden_dim < 1 || num_layers < 1 || num_heads < 1 || n_samples < 1 || n_instruction_tokens < 1 ||
        n_image_patches < 1 || objects_per_sample < 1 || instr_cluster < 1 || image_cluster < 1) {
        throw ParameterError("synthetic counts must be at least 1");
    }
    if (objects_per_sample > vocab_size) throw ParameterError("objects_per_sample exceeds vocab_size");
    if (instr_cluster > n_instruction_tokens) throw ParameterError("instr_cluster exceeds n_instruction_tokens");
    if (image_cluster > n_image_patches) throw ParameterError("image_cluster exceeds n_image_patches");
    if (!(prevalence > 0.0 && prevalence < 1.0)) throw ParameterError("prevalence must lie in (0, 1)");
    for (double v : {instr_signal, image_signal, distractor_noise, noise_scale, object_signal, object_noise}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("signal and noise scales must be finite and >= 0");
    }
}

int instruction_layer(const SynthConfig& cfg) { return resolve_layer(-2, cfg.num_layers); }
int image_layer(const SynthConfig& cfg) { return resolve_layer(-1, cfg.num_layers); }

namespace {

/// `count` distinct indices from [0, n), in draw order.
std::vector<std::size_t> choose(CounterRng& rng, std::size_t n, std::size_t count) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

std::vector<float> noise(CounterRng& rng, std::size_t n, double scale) {
    std::vector<float> out(n);
    for (auto& x : out) x = static_cast<float>(rng.normal() * scale);
    return out;
}

void add_direction(std::vector<float>& rows, std::size_t row, std::size_t d, const std::vector<float>& w,
                   std::size_t token, double strength) {
    for (std::size_t k = 0; k < d; ++k) {
        rows[row * d + k] = static_cast<float>(rows[row * d + k] + strength * w[token * d + k]);
    }
}

Tensor make(std::size_t rows, std::size_t cols, std::vector<float> data, DType dtype) {
    if (dtype == DType::f16) {
        for (auto& x : data) x = detail::half_to_float(detail::float_to_half(x));
    }
    return Tensor(rows, cols, std::move(data));
}

}  // namespace

TraceContainer generate(const SynthConfig& cfg) {
    cfg.check();
    const std::size_t V = cfg.vocab_size;
    const std::size_t d = cfg.hidden_dim;
    const double per_coord = 1.0 / std::sqrt(static_cast<double>(d));
    const CounterRng root(cfg.seed);

    TraceContainer c;
    c.card = {"synthetic", V, d, cfg.num_layers, cfg.dtype};

    std::vector<float> w(V * d);
    {
        auto rng = root.derive(~std::uint64_t{0});
        for (std::size_t v = 0; v < V; ++v) {
            double n2 = 0.0;
            std::vector<double> row(d);
            do {
                n2 = 0.0;
                for (auto& x : row) {
                    x = rng.normal();
                    n2 += x * x;
                }
            } while (n2 == 0.0);
            const double inv = 1.0 / std::sqrt(n2);
            for (std::size_t k = 0; k < d; ++k) w[v * d + k] = static_cast<float>(row[k] * inv);
        }
    }
    if (cfg.dtype == DType::f16) {
        for (auto& x : w) x = detail::half_to_float(detail::float_to_half(x));
    }
    c.unembedding = Tensor(V, d, w);

    const int instr_layer = instruction_layer(cfg);
    const int img_layer = image_layer(cfg);
    const std::size_t M = cfg.n_instruction_tokens;
    const std::size_t N = cfg.n_image_patches;

    c.samples.reserve(cfg.n_samples);
    for (std::size_t s = 0; s < cfg.n_samples; ++s) {
        auto rng = root.derive(s);
        SampleTrace sample;
        sample.sample_id = "s" + std::to_string(s);

        auto instr = noise(rng, M * d, cfg.noise_scale * per_coord);
        auto patches = noise(rng, N * d, cfg.noise_scale * per_coord);
        sample.instruction.layer = instr_layer;
        sample.instruction.token_ids.resize(M);
        for (auto& id : sample.instruction.token_ids) id = static_cast<std::int64_t>(rng.below(V));

        const auto tokens = choose(rng, V, cfg.objects_per_sample);
        std::vector<std::string> truth;
        std::string text = "The image shows";
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            const auto token = tokens[k];
            const bool real = rng.bernoulli(cfg.prevalence);
            if (real) {
                for (auto j : choose(rng, M, cfg.instr_cluster)) add_direction(instr, j, d, w, token, cfg.instr_signal);
                for (auto p : choose(rng, N, cfg.image_cluster)) add_direction(patches, p, d, w, token, cfg.image_signal);
            } else {
                for (auto p : choose(rng, N, cfg.image_cluster)) {
                    add_direction(patches, p, d, w, token, cfg.distractor_noise);
                }
            }

            ObjectTokenRecord o;
            o.token_id = static_cast<std::int64_t>(token);
            o.surface = "obj" + std::to_string(token);
            o.position = static_cast<std::int64_t>(5 + 4 * k);
            auto h = noise(rng, d, cfg.object_noise * per_coord);
            for (std::size_t i = 0; i < d; ++i) h[i] = static_cast<float>(h[i] + cfg.object_signal * w[token * d + i]);
            o.embeddings.push_back({instr_layer, make(1, d, std::move(h), cfg.dtype)});
            o.nll = std::log(rng.uniform_open_low());
            o.entropy_score = -rng.uniform() * std::log(static_cast<double>(V));
            std::vector<float> var(cfg.num_layers * cfg.num_heads);
            for (auto& x : var) x = static_cast<float>(rng.uniform());
            o.var_table = make(cfg.num_layers, cfg.num_heads, std::move(var), cfg.dtype);
            o.label = real ? Label::real : Label::hallucinated;
            if (real) truth.push_back(o.surface);
            text += (k == 0 ? " a " : ", a ") + o.surface;
            sample.objects.push_back(std::move(o));
        }
        sample.instruction.embeddings = make(M, d, std::move(instr), cfg.dtype);
        sample.images.push_back({img_layer, make(N, d, std::move(patches), cfg.dtype)});
        sample.ground_truth_objects = std::move(truth);
        sample.generated_text = text + ".";
        c.samples.push_back(std::move(sample));
    }
    return c;
}

}  // namespace inslen::synth
