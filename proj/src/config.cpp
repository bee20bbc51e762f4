#include "inslen/config.hpp"

#include <fstream>
#include <sstream>

#include "inslen/error.hpp"
#include "json.hpp"

namespace inslen {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

json parse_object(std::string_view text, const char* what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
    return j;
}

template <typename T>
T get(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

}  // namespace

void apply_score_config(scores::ScoreConfig& cfg, std::string_view text) {
    const auto j = parse_object(text, "score config");
    for (const auto& [key, v] : j.items()) {
        if (key == "omega") cfg.omega = get<double>(v, key);
        else if (key == "alpha") cfg.alpha = get<double>(v, key);
        else if (key == "tau") cfg.tau = get<double>(v, key);
        else if (key == "m") cfg.m = get<int>(v, key);
        else if (key == "K") cfg.K = get<int>(v, key);
        else if (key == "k_cafe") cfg.k_cafe = get<int>(v, key);
        else if (key == "instr_layer") cfg.instr_layer = get<int>(v, key);
        else if (key == "obj_layer") cfg.obj_layer = get<int>(v, key);
        else if (key == "image_layer") cfg.image_layer = get<int>(v, key);
        else if (key == "consistency_variant") cfg.consistency_variant = scores::parse_consistency_variant(get<std::string>(v, key));
        else if (key == "vision_score") cfg.vision_score = scores::parse_vision_score(get<std::string>(v, key));
        else if (key == "svar_layer_lo") cfg.svar_layer_lo = get<int>(v, key);
        else if (key == "svar_layer_hi") cfg.svar_layer_hi = get<int>(v, key);
        else if (key == "cl_text_layer") cfg.cl_text_layer = get<int>(v, key);
        else if (key == "cl_image_layer") cfg.cl_image_layer = get<int>(v, key);
        else throw ConfigError("unknown score config key '" + key + "'");
    }
}

void apply_synth_config(synth::SynthConfig& cfg, std::string_view text) {
    const auto j = parse_object(text, "synth config");
    for (const auto& [key, v] : j.items()) {
        if (key == "vocab_size") cfg.vocab_size = get<std::size_t>(v, key);
        else if (key == "hidden_dim") cfg.hidden_dim = get<std::size_t>(v, key);
        else if (key == "num_layers") cfg.num_layers = get<std::size_t>(v, key);
        else if (key == "num_heads") cfg.num_heads = get<std::size_t>(v, key);
        else if (key == "n_samples") cfg.n_samples = get<std::size_t>(v, key);
        else if (key == "n_instruction_tokens") cfg.n_instruction_tokens = get<std::size_t>(v, key);
        else if (key == "n_image_patches") cfg.n_image_patches = get<std::size_t>(v, key);
        else if (key == "objects_per_sample") cfg.objects_per_sample = get<std::size_t>(v, key);
        else if (key == "instr_cluster") cfg.instr_cluster = get<std::size_t>(v, key);
        else if (key == "image_cluster") cfg.image_cluster = get<std::size_t>(v, key);
        else if (key == "prevalence") cfg.prevalence = get<double>(v, key);
        else if (key == "instr_signal") cfg.instr_signal = get<double>(v, key);
        else if (key == "image_signal") cfg.image_signal = get<double>(v, key);
        else if (key == "distractor_noise") cfg.distractor_noise = get<double>(v, key);
        else if (key == "noise_scale") cfg.noise_scale = get<double>(v, key);
        else if (key == "object_signal") cfg.object_signal = get<double>(v, key);
        else if (key == "object_noise") cfg.object_noise = get<double>(v, key);
        else if (key == "seed") cfg.seed = get<std::uint64_t>(v, key);
        else if (key == "dtype") {
            try {
                cfg.dtype = parse_dtype(get<std::string>(v, key));
            } catch (const FormatError& e) {
                throw ConfigError(e.what());
            }
        } else throw ConfigError("unknown synth config key '" + key + "'");
    }
}

std::string to_json(const scores::ScoreConfig& cfg) {
    ojson j;
    j["omega"] = cfg.omega;
    j["alpha"] = cfg.alpha;
    j["tau"] = cfg.tau;
    j["m"] = cfg.m;
    j["K"] = cfg.K;
    j["k_cafe"] = cfg.k_cafe;
    j["instr_layer"] = cfg.instr_layer;
    j["obj_layer"] = cfg.obj_layer;
    j["image_layer"] = cfg.image_layer;
    j["consistency_variant"] = std::string(scores::to_string(cfg.consistency_variant));
    j["vision_score"] = std::string(scores::to_string(cfg.vision_score));
    j["svar_layer_lo"] = cfg.svar_layer_lo;
    j["svar_layer_hi"] = cfg.svar_layer_hi;
    if (cfg.cl_text_layer) j["cl_text_layer"] = *cfg.cl_text_layer;
    if (cfg.cl_image_layer) j["cl_image_layer"] = *cfg.cl_image_layer;
    return j.dump(2);
}

std::string to_json(const synth::SynthConfig& cfg) {
    ojson j;
    j["vocab_size"] = cfg.vocab_size;
    j["hidden_dim"] = cfg.hidden_dim;
    j["num_layers"] = cfg.num_layers;
    j["num_heads"] = cfg.num_heads;
    j["n_samples"] = cfg.n_samples;
    j["n_instruction_tokens"] = cfg.n_instruction_tokens;
    j["n_image_patches"] = cfg.n_image_patches;
    j["objects_per_sample"] = cfg.objects_per_sample;
    j["instr_cluster"] = cfg.instr_cluster;
    j["image_cluster"] = cfg.image_cluster;
    j["prevalence"] = cfg.prevalence;
    j["instr_signal"] = cfg.instr_signal;
    j["image_signal"] = cfg.image_signal;
    j["distractor_noise"] = cfg.distractor_noise;
    j["noise_scale"] = cfg.noise_scale;
    j["object_signal"] = cfg.object_signal;
    j["object_noise"] = cfg.object_noise;
    j["seed"] = cfg.seed;
    j["dtype"] = std::string(to_string(cfg.dtype));
    return j.dump(2);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace inslen
