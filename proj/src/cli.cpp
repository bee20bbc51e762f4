#include "inslen/cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "inslen/analysis.hpp"
#include "inslen/config.hpp"
#include "inslen/error.hpp"
#include "inslen/lens.hpp"
#include "inslen/pipeline.hpp"
#include "inslen/synth.hpp"
#include "inslen/trace.hpp"
#include "json.hpp"

namespace inslen::cli {

namespace {

using ojson = nlohmann::ordered_json;

/// Raised for errors in flags or config files, before any data is touched.
struct UsageFailure : Error {
    using Error::Error;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("inslen", sink);
    logger->set_pattern("[%l] %v");
    auto level = spdlog::level::info;
    if (const char* env = std::getenv("INSLEN_LOG")) level = spdlog::level::from_str(env);
    logger->set_level(level);
    return logger;
}

struct ScoreFlags {
    std::string config;
    std::optional<double> omega;
    std::optional<double> alpha;
    std::optional<double> tau;
    std::optional<int> m;
    std::optional<int> k;
    std::optional<int> k_cafe;
    std::optional<std::string> variant;
    std::optional<std::string> vision;
    std::optional<int> instr_layer;
    std::optional<int> obj_layer;
    std::optional<int> image_layer;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--config", config, "JSON file with score config overrides");
        cmd.add_option("--omega", omega, "fusion weight of the calibrated local score");
        cmd.add_option("--alpha", alpha, "consistency offset");
        cmd.add_option("--tau", tau, "Logit Lens temperature for instruction embeddings");
        cmd.add_option("--m", m, "number of selected instruction embeddings");
        cmd.add_option("--k", k, "number of selected image embeddings");
        cmd.add_option("--k-cafe", k_cafe, "top-k mean for Cafe (1 = max)");
        cmd.add_option("--variant", variant, "consistency variant")
            ->check(CLI::IsMember({"relative", "cos", "distance", "direction"}));
        cmd.add_option("--vision", vision, "vision score fused with Cafe")
            ->check(CLI::IsMember({"lss", "internal_conf", "svar"}));
        cmd.add_option("--instr-layer", instr_layer, "instruction layer (negative counts from the end)");
        cmd.add_option("--obj-layer", obj_layer, "object embedding layer");
        cmd.add_option("--image-layer", image_layer, "image embedding layer");
    }

    scores::ScoreConfig build() const {
        scores::ScoreConfig cfg;
        try {
            if (!config.empty()) apply_score_config(cfg, read_text_file(config));
            if (omega) cfg.omega = *omega;
            if (alpha) cfg.alpha = *alpha;
            if (tau) cfg.tau = *tau;
            if (m) cfg.m = *m;
            if (k) cfg.K = *k;
            if (k_cafe) cfg.k_cafe = *k_cafe;
            if (variant) cfg.consistency_variant = scores::parse_consistency_variant(*variant);
            if (vision) cfg.vision_score = scores::parse_vision_score(*vision);
            if (instr_layer) cfg.instr_layer = *instr_layer;
            if (obj_layer) cfg.obj_layer = *obj_layer;
            if (image_layer) cfg.image_layer = *image_layer;
            cfg.check();
        } catch (const Error& e) {
            throw UsageFailure(e.what());
        }
        return cfg;
    }
};

struct Output {
    std::string path;
    std::string format = "records";

    void add_to(CLI::App& cmd, bool with_format = true) {
        cmd.add_option("--out", path, "output path (default: standard output)");
        if (with_format) cmd.add_option("--format", format, "records or table")->check(CLI::IsMember({"records", "table"}));
    }

    bool table() const { return format == "table"; }

    void emit(const std::string& text, std::ostream& out) const {
        if (path.empty()) {
            out << text;
            out.flush();
            return;
        }
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << text;
        f.close();
        if (!f) throw Error("cannot write '" + path + "'");
    }
};

std::vector<ScoreRecord> load_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read score file '" + path + "'");
    return read_records(in);
}

ojson finite_or_text(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
}

eval::CalibrationObjective objective_of(const std::string& name, double fpr) {
    if (name == "fixed_fpr") return eval::CalibrationObjective::fixed_fpr(fpr);
    return eval::CalibrationObjective::youden();
}

std::string score_table(const std::vector<ScoreRecord>& records) {
    std::ostringstream os;
    os << "sample_id\tposition\tsurface\tlabel\ts_inslen\ts_cls\ts_ccs\ts_lss\ts_cafe\n";
    auto num = [](std::optional<double> v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", *v);
        return std::string(buf);
    };
    for (const auto& r : records) {
        const auto& s = r.scores;
        os << r.sample_id << '\t' << r.position << '\t' << r.surface << '\t' << to_string(r.label) << '\t'
           << num(s ? std::optional(s->s_inslen) : std::nullopt) << '\t'
           << num(s ? std::optional(s->s_cls) : std::nullopt) << '\t'
           << num(s ? std::optional(s->s_ccs) : std::nullopt) << '\t'
           << num(s ? std::optional(s->s_lss) : std::nullopt) << '\t'
           << num(s ? std::optional(s->s_cafe) : std::nullopt) << '\n';
    }
    return os.str();
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    auto log = make_logger(err);

    CLI::App app{"Object hallucination scoring from model-internal traces"};
    app.name("inslen");
    app.require_subcommand(1);

    std::string traces;
    unsigned jobs = 1;
    ScoreFlags score_flags;
    Output output;

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic trace container");
    std::string synth_config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_samples, vocab, dim, layers, objects, patches, instr_tokens;
    std::optional<double> prevalence, instr_signal, image_signal, distractor, noise;
    std::optional<std::string> dtype;
    synth_cmd->add_option("--out", output.path, "destination container directory")->required();
    synth_cmd->add_option("--config", synth_config, "JSON file with synth config overrides");
    synth_cmd->add_option("--seed", seed, "generator seed");
    synth_cmd->add_option("--samples", n_samples, "number of samples");
    synth_cmd->add_option("--vocab", vocab, "vocabulary size");
    synth_cmd->add_option("--dim", dim, "hidden dimension");
    synth_cmd->add_option("--layers", layers, "number of decoder layers");
    synth_cmd->add_option("--objects", objects, "object tokens per sample");
    synth_cmd->add_option("--patches", patches, "image patches per sample");
    synth_cmd->add_option("--instruction-tokens", instr_tokens, "instruction tokens per sample");
    synth_cmd->add_option("--prevalence", prevalence, "fraction of real objects");
    synth_cmd->add_option("--instr-signal", instr_signal, "planted instruction signal strength");
    synth_cmd->add_option("--image-signal", image_signal, "planted image signal strength");
    synth_cmd->add_option("--distractor", distractor, "distractor strength for hallucinated objects");
    synth_cmd->add_option("--noise", noise, "isotropic noise scale");
    synth_cmd->add_option("--dtype", dtype, "f32 or f16")->check(CLI::IsMember({"f32", "f16"}));

    // validate
    auto* validate_cmd = app.add_subcommand("validate", "check a container against the data-model invariants");
    validate_cmd->add_option("--traces", traces, "container directory")->required();
    output.add_to(*validate_cmd);

    // score
    auto* score_cmd = app.add_subcommand("score", "score every object token in a container");
    score_cmd->add_option("--traces", traces, "container directory")->required();
    score_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    score_flags.add_to(*score_cmd);
    output.add_to(*score_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "AUROC / AUPR per detector from score records");
    std::vector<std::string> score_files;
    std::vector<std::string> detectors;
    std::string validation_file;
    std::string objective = "youden_j";
    double max_fpr = 0.05;
    eval_cmd->add_option("--scores", score_files, "score record file(s); several files are aggregated")->required();
    eval_cmd->add_option("--detector", detectors, "detector(s) to evaluate (default: all)")
        ->check(CLI::IsMember(detector_names()));
    eval_cmd->add_option("--validation", validation_file, "score records used to calibrate thresholds");
    eval_cmd->add_option("--objective", objective, "threshold objective")->check(CLI::IsMember({"youden_j", "fixed_fpr"}));
    eval_cmd->add_option("--fpr", max_fpr, "target FPR for fixed_fpr")->check(CLI::Range(0.0, 1.0));
    output.add_to(*eval_cmd);

    // calibrate
    auto* calibrate_cmd = app.add_subcommand("calibrate", "fit a detection threshold on validation scores");
    std::string calib_detector = "inslen";
    calibrate_cmd->add_option("--scores", validation_file, "validation score records")->required();
    calibrate_cmd->add_option("--detector", calib_detector, "detector")->check(CLI::IsMember(detector_names()));
    calibrate_cmd->add_option("--objective", objective, "youden_j or fixed_fpr")
        ->check(CLI::IsMember({"youden_j", "fixed_fpr"}));
    calibrate_cmd->add_option("--fpr", max_fpr, "target FPR for fixed_fpr")->check(CLI::Range(0.0, 1.0));
    output.add_to(*calibrate_cmd);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a detector over a hyperparameter grid");
    std::vector<std::string> grid_specs;
    std::string sweep_detector = "inslen";
    sweep_cmd->add_option("--traces", traces, "container directory")->required();
    sweep_cmd->add_option("--grid", grid_specs, "name=v1,v2,... (repeatable)")->required();
    sweep_cmd->add_option("--detector", sweep_detector, "detector")->check(CLI::IsMember(detector_names()));
    sweep_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    score_flags.add_to(*sweep_cmd);
    output.add_to(*sweep_cmd);

    // inspect
    auto* inspect_cmd = app.add_subcommand("inspect", "read embeddings through the Logit Lens");
    std::string sample_id;
    std::string embedding;
    std::size_t top = 20;
    bool confidence = false;
    std::size_t bins = 20;
    inspect_cmd->add_option("--traces", traces, "container directory")->required();
    inspect_cmd->add_option("--sample", sample_id, "sample id");
    inspect_cmd->add_option("--embedding", embedding, "instruction:J | image:I | image@LAYER:I | object:K");
    inspect_cmd->add_option("--top", top, "number of tokens")->check(CLI::PositiveNumber);
    inspect_cmd->add_flag("--confidence", confidence, "image vs instruction confidence report");
    inspect_cmd->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);
    score_flags.add_to(*inspect_cmd);
    output.add_to(*inspect_cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        // --- synth -------------------------------------------------------
        if (*synth_cmd) {
            synth::SynthConfig cfg;
            try {
                if (!synth_config.empty()) apply_synth_config(cfg, read_text_file(synth_config));
                if (seed) cfg.seed = *seed;
                if (n_samples) cfg.n_samples = *n_samples;
                if (vocab) cfg.vocab_size = *vocab;
                if (dim) cfg.hidden_dim = *dim;
                if (layers) cfg.num_layers = *layers;
                if (objects) cfg.objects_per_sample = *objects;
                if (patches) cfg.n_image_patches = *patches;
                if (instr_tokens) cfg.n_instruction_tokens = *instr_tokens;
                if (prevalence) cfg.prevalence = *prevalence;
                if (instr_signal) cfg.instr_signal = *instr_signal;
                if (image_signal) cfg.image_signal = *image_signal;
                if (distractor) cfg.distractor_noise = *distractor;
                if (noise) cfg.noise_scale = *noise;
                if (dtype) cfg.dtype = parse_dtype(*dtype);
                cfg.check();
            } catch (const Error& e) {
                throw UsageFailure(e.what());
            }
            const auto c = synth::generate(cfg);
            write_container(c, output.path);
            std::size_t n_objects = 0;
            for (const auto& s : c.samples) n_objects += s.objects.size();
            log->info("wrote {} samples, {} object tokens to {}", c.samples.size(), n_objects, output.path);
            return kExitOk;
        }

        // --- validate ----------------------------------------------------
        if (*validate_cmd) {
            const auto c = open_container(traces);
            const auto report = validate(c);
            std::string text;
            if (output.table()) {
                for (const auto& v : report) text += v.sample_id + "\t" + v.field + "\t" + v.rule + "\n";
            } else {
                for (const auto& v : report) {
                    ojson j{{"sample_id", v.sample_id}, {"field", v.field}, {"rule", v.rule}};
                    text += j.dump() + "\n";
                }
            }
            output.emit(text, out);
            if (!report.empty()) {
                log->error("{} violation(s) in {}", report.size(), traces);
                return kExitData;
            }
            log->info("{} is valid ({} samples)", traces, c.samples.size());
            return kExitOk;
        }

        // --- score -------------------------------------------------------
        if (*score_cmd) {
            const auto cfg = score_flags.build();
            const auto c = open_container(traces);
            const auto result = score_container(c, cfg, jobs);
            for (const auto& w : result.warnings) log->warn("{}", w);
            std::size_t failed = 0;
            for (const auto& r : result.records) {
                if (!r.error.empty()) {
                    ++failed;
                    log->warn("{} @{} ({}): {}", r.sample_id, r.position, r.surface, r.error);
                }
            }
            std::string text;
            if (output.table()) {
                text = score_table(result.records);
            } else {
                std::ostringstream os;
                write_records(os, result.records);
                text = os.str();
            }
            output.emit(text, out);
            log->info("scored {} object tokens ({} failed)", result.records.size(), failed);
            return kExitOk;
        }

        // --- eval --------------------------------------------------------
        if (*eval_cmd) {
            const auto names = detectors.empty() ? detector_names() : detectors;
            std::optional<std::vector<ScoreRecord>> validation;
            if (!validation_file.empty()) validation = load_records(validation_file);
            const auto obj = objective_of(objective, max_fpr);
            std::vector<eval::EvalReport> reports;
            for (const auto& f : score_files) {
                reports.push_back(eval::evaluate(load_records(f), names, validation ? &*validation : nullptr, obj));
            }
            std::string text;
            if (reports.size() == 1) {
                text = output.table() ? eval::to_table(reports[0]) : eval::to_json_lines(reports[0]);
            } else {
                const auto rows = eval::aggregate(reports);
                if (output.table()) {
                    for (std::size_t i = 0; i < reports.size(); ++i) {
                        text += "# " + score_files[i] + "\n" + eval::to_table(reports[i]);
                    }
                    text += "# mean ± std over " + std::to_string(reports.size()) + " runs\n";
                    char line[160];
                    for (const auto& r : rows) {
                        std::snprintf(line, sizeof line, "%-16s AUROC %6.2f ± %5.2f  AUPR %6.2f ± %5.2f\n",
                                      r.detector.c_str(), 100 * r.auroc_mean, 100 * r.auroc_std, 100 * r.aupr_mean,
                                      100 * r.aupr_std);
                        text += line;
                    }
                } else {
                    for (std::size_t i = 0; i < reports.size(); ++i) {
                        std::istringstream lines(eval::to_json_lines(reports[i]));
                        std::string line;
                        while (std::getline(lines, line)) {
                            auto j = ojson::parse(line);
                            j["source"] = score_files[i];
                            text += j.dump() + "\n";
                        }
                    }
                    for (const auto& r : rows) {
                        ojson j{{"detector", r.detector}, {"runs", r.runs},           {"auroc_mean", r.auroc_mean},
                                {"auroc_std", r.auroc_std}, {"aupr_mean", r.aupr_mean}, {"aupr_std", r.aupr_std}};
                        text += j.dump() + "\n";
                    }
                }
            }
            output.emit(text, out);
            return kExitOk;
        }

        // --- calibrate ---------------------------------------------------
        if (*calibrate_cmd) {
            const auto records = load_records(validation_file);
            const auto scored = labeled_scores(records, calib_detector);
            const double mu = eval::calibrate_threshold(scored, objective_of(objective, max_fpr));
            std::string text;
            if (output.table()) {
                std::ostringstream os;
                os << calib_detector << '\t' << objective << '\t' << mu << '\n';
                text = os.str();
            } else {
                ojson j{{"detector", calib_detector}, {"objective", objective}, {"threshold", finite_or_text(mu)}};
                if (objective == "fixed_fpr") j["max_fpr"] = max_fpr;
                text = j.dump() + "\n";
            }
            output.emit(text, out);
            return kExitOk;
        }

        // --- sweep -------------------------------------------------------
        if (*sweep_cmd) {
            const auto cfg = score_flags.build();
            eval::Grid grid;
            for (const auto& spec : grid_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos || eq == 0) throw UsageFailure("grid spec '" + spec + "' is not name=v1,v2");
                std::vector<std::string> values;
                std::istringstream vs(spec.substr(eq + 1));
                std::string v;
                while (std::getline(vs, v, ',')) values.push_back(v);
                grid.emplace_back(spec.substr(0, eq), std::move(values));
            }
            for (const auto& [name, values] : grid) {
                try {
                    for (const auto& v : values) {
                        auto probe = cfg;
                        eval::apply_parameter(probe, name, v);
                    }
                } catch (const Error& e) {
                    throw UsageFailure(e.what());
                }
            }
            const auto c = open_container(traces);
            const auto rows = eval::sweep(c, cfg, grid, sweep_detector, jobs);
            output.emit(output.table() ? eval::to_table(rows) : eval::to_json_lines(rows), out);
            return kExitOk;
        }

        // --- inspect -----------------------------------------------------
        if (*inspect_cmd) {
            const auto cfg = score_flags.build();
            if (!confidence && (sample_id.empty() || embedding.empty())) {
                throw UsageFailure("inspect needs --sample and --embedding, or --confidence");
            }
            const auto c = open_container(traces);
            if (confidence) {
                const auto report = eval::confidence_report(c, cfg, bins);
                output.emit(output.table() ? eval::to_table(report) : eval::to_json_lines(report), out);
                return kExitOk;
            }
            const SampleTrace* sample = nullptr;
            for (const auto& s : c.samples) {
                if (s.sample_id == sample_id) sample = &s;
            }
            if (sample == nullptr) throw InputError("no sample '" + sample_id + "' in " + traces);

            const auto colon = embedding.rfind(':');
            if (colon == std::string::npos) throw UsageFailure("embedding spec '" + embedding + "' lacks ':'");
            std::string kind = embedding.substr(0, colon);
            std::size_t index = 0;
            try {
                index = std::stoul(embedding.substr(colon + 1));
            } catch (const std::exception&) {
                throw UsageFailure("bad index in embedding spec '" + embedding + "'");
            }
            std::optional<int> layer;
            if (const auto at = kind.find('@'); at != std::string::npos) {
                try {
                    layer = std::stoi(kind.substr(at + 1));
                } catch (const std::exception&) {
                    throw UsageFailure("bad layer in embedding spec '" + embedding + "'");
                }
                kind = kind.substr(0, at);
            }
            const auto L = c.card.num_layers;
            std::span<const float> z;
            if (kind == "instruction") {
                z = sample->instruction.embeddings.row(index);
            } else if (kind == "image") {
                const int l = resolve_layer(layer.value_or(cfg.image_layer), L);
                const auto* block = sample->image_at(l);
                if (block == nullptr) throw InputError("no image block at layer " + std::to_string(l));
                z = block->embeddings.row(index);
            } else if (kind == "object") {
                if (index >= sample->objects.size()) throw IndexError("object index out of range");
                const int l = resolve_layer(layer.value_or(cfg.obj_layer), L);
                const auto* e = sample->objects[index].embedding_at(l);
                if (e == nullptr) throw InputError("object has no embedding at layer " + std::to_string(l));
                z = e->row(0);
            } else {
                throw UsageFailure("unknown embedding kind '" + kind + "'");
            }
            const auto k = std::min<std::size_t>(top, c.card.vocab_size);
            const auto tokens = lens::top_k_tokens(z, c.unembedding, k);
            std::string text;
            for (std::size_t r = 0; r < tokens.size(); ++r) {
                if (output.table()) {
                    char line[96];
                    std::snprintf(line, sizeof line, "%4zu %10lld %.6e\n", r + 1,
                                  static_cast<long long>(tokens[r].token_id), tokens[r].probability);
                    text += line;
                } else {
                    ojson j{{"rank", r + 1}, {"token_id", tokens[r].token_id}, {"probability", tokens[r].probability}};
                    text += j.dump() + "\n";
                }
            }
            output.emit(text, out);
            return kExitOk;
        }
    } catch (const UsageFailure& e) {
        log->error("{}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        log->error("{}", e.what());
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace inslen::cli
