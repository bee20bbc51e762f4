#include "inslen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "inslen/error.hpp"
#include "json.hpp"

namespace inslen {

using ojson = nlohmann::ordered_json;

const std::vector<std::string>& detector_names() {
    static const std::vector<std::string> names = {"inslen", "cls", "ccs", "lss", "cafe", "nll",
                                                   "entropy", "internal_conf", "svar", "contextual_lens"};
    return names;
}

std::optional<double> detector_value(const ScoreRecord& r, std::string_view detector) {
    const auto& s = r.scores;
    if (detector == "inslen") return s ? std::optional(s->s_inslen) : std::nullopt;
    if (detector == "cls") return s ? std::optional(s->s_cls) : std::nullopt;
    if (detector == "ccs") return s ? std::optional(s->s_ccs) : std::nullopt;
    if (detector == "lss") return s ? std::optional(s->s_lss) : std::nullopt;
    if (detector == "cafe") return s ? std::optional(s->s_cafe) : std::nullopt;
    if (detector == "nll") return r.baselines.nll.value;
    if (detector == "entropy") return r.baselines.entropy.value;
    if (detector == "internal_conf") return r.baselines.internal_conf.value;
    if (detector == "svar") return r.baselines.svar.value;
    if (detector == "contextual_lens") return r.baselines.contextual_lens.value;
    throw ConfigError("unknown detector '" + std::string(detector) + "'");
}

std::vector<Label> resolve_labels(const SampleTrace& sample, const SynonymMap& synonyms) {
    std::vector<Label> out;
    out.reserve(sample.objects.size());
    for (const auto& o : sample.objects) {
        if (o.label != Label::unknown || !sample.ground_truth_objects) {
            out.push_back(o.label);
            continue;
        }
        const std::string surface[1] = {o.surface};
        const auto l = eval::label_objects(surface, *sample.ground_truth_objects, synonyms);
        out.push_back(l[0] == 1 ? Label::real : Label::hallucinated);
    }
    return out;
}

namespace {

struct SampleResult {
    std::vector<ScoreRecord> records;
    std::vector<std::string> warnings;
    std::exception_ptr error;
};

SampleResult score_one(const TraceContainer& c, const SampleTrace& sample, const scores::ScoreConfig& cfg,
                       const SynonymMap& synonyms) {
    SampleResult out;
    try {
        auto scored = scores::score_sample(sample, c.card, c.unembedding, cfg);
        auto base = baselines::baseline_sample(sample, c.card, c.unembedding, cfg);
        const auto labels = resolve_labels(sample, synonyms);
        out.warnings = std::move(scored.warnings);
        out.records.reserve(sample.objects.size());
        for (std::size_t i = 0; i < sample.objects.size(); ++i) {
            const auto& o = sample.objects[i];
            ScoreRecord r;
            r.sample_id = sample.sample_id;
            r.position = o.position;
            r.token_id = o.token_id;
            r.surface = o.surface;
            r.scores = scored.objects[i].scores;
            r.error = scored.objects[i].error;
            r.baselines = std::move(base[i]);
            r.label = labels[i];
            out.records.push_back(std::move(r));
        }
    } catch (...) {
        out.error = std::current_exception();
    }
    return out;
}

}  // namespace

ScoreRun score_container(const TraceContainer& container, const scores::ScoreConfig& cfg, unsigned jobs) {
    cfg.check();
    const SynonymMap empty;
    const SynonymMap& synonyms = container.synonyms ? *container.synonyms : empty;
    const std::size_t n = container.samples.size();
    std::vector<SampleResult> results(n);

    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) results[i] = score_one(container, container.samples[i], cfg, synonyms);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    results[i] = score_one(container, container.samples[i], cfg, synonyms);
                }
            });
        }
    }

    ScoreRun run;
    std::set<std::string> seen;
    for (auto& r : results) {
        if (r.error) std::rethrow_exception(r.error);
        for (auto& w : r.warnings) {
            if (seen.insert(w).second) run.warnings.push_back(std::move(w));
        }
        std::move(r.records.begin(), r.records.end(), std::back_inserter(run.records));
    }
    return run;
}

namespace {

ojson maybe(const baselines::Measurement& m) { return m.value ? ojson(*m.value) : ojson(nullptr); }

baselines::Measurement measurement(const ojson& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return baselines::Measurement::missing("not recorded");
    return baselines::Measurement::of(j[key].get<double>());
}

}  // namespace

std::string to_json_line(const ScoreRecord& r) {
    ojson j;
    j["sample_id"] = r.sample_id;
    j["position"] = r.position;
    j["token_id"] = r.token_id;
    j["surface"] = r.surface;
    if (r.scores) {
        const auto& s = *r.scores;
        j["s_lss"] = s.s_lss;
        j["s_cafe"] = s.s_cafe;
        j["s_cls"] = s.s_cls;
        j["s_con"] = s.s_con;
        j["mean_conf"] = s.mean_conf;
        j["s_ccs"] = s.s_ccs;
        j["s_inslen"] = s.s_inslen;
    } else {
        for (const char* k : {"s_lss", "s_cafe", "s_cls", "s_con", "mean_conf", "s_ccs", "s_inslen"}) j[k] = nullptr;
    }
    j["label"] = std::string(to_string(r.label));
    j["nll"] = maybe(r.baselines.nll);
    j["entropy"] = maybe(r.baselines.entropy);
    j["internal_conf"] = maybe(r.baselines.internal_conf);
    j["svar"] = maybe(r.baselines.svar);
    j["contextual_lens"] = maybe(r.baselines.contextual_lens);
    if (r.scores) j["vision"] = r.scores->vision;
    if (!r.error.empty()) j["error"] = r.error;
    return j.dump();
}

ScoreRecord record_from_json_line(std::string_view line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
        throw FormatError(std::string("score record is not valid JSON: ") + e.what());
    }
    try {
        ScoreRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.position = j.at("position").get<std::int64_t>();
        r.token_id = j.at("token_id").get<std::int64_t>();
        r.surface = j.at("surface").get<std::string>();
        r.label = parse_label(j.value("label", std::string("unknown")));
        if (j.contains("s_inslen") && !j["s_inslen"].is_null()) {
            scores::ScoreSet s;
            s.s_lss = j.at("s_lss").get<double>();
            s.s_cafe = j.at("s_cafe").get<double>();
            s.s_cls = j.at("s_cls").get<double>();
            s.s_con = j.at("s_con").get<double>();
            s.mean_conf = j.at("mean_conf").get<double>();
            s.s_ccs = j.at("s_ccs").get<double>();
            s.s_inslen = j.at("s_inslen").get<double>();
            s.vision = j.contains("vision") ? j["vision"].get<double>() : s.s_lss;
            r.scores = s;
        }
        r.baselines.nll = measurement(j, "nll");
        r.baselines.entropy = measurement(j, "entropy");
        r.baselines.internal_conf = measurement(j, "internal_conf");
        r.baselines.svar = measurement(j, "svar");
        r.baselines.contextual_lens = measurement(j, "contextual_lens");
        if (j.contains("error")) r.error = j["error"].get<std::string>();
        return r;
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("malformed score record: ") + e.what());
    }
}

void write_records(std::ostream& out, const std::vector<ScoreRecord>& records) {
    for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<ScoreRecord> read_records(std::istream& in) {
    std::vector<ScoreRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(record_from_json_line(line));
    }
    return out;
}

std::vector<eval::LabeledScore> labeled_scores(const std::vector<ScoreRecord>& records, std::string_view detector) {
    const auto& names = detector_names();
    if (std::find(names.begin(), names.end(), detector) == names.end()) {
        throw ConfigError("unknown detector '" + std::string(detector) + "'");
    }
    std::vector<eval::LabeledScore> out;
    for (const auto& r : records) {
        if (r.label == Label::unknown) continue;
        const auto v = detector_value(r, detector);
        if (!v) continue;
        out.push_back({r.sample_id, r.position, std::string(detector), *v, r.label == Label::real ? 1 : 0});
    }
    return out;
}

}  // namespace inslen
