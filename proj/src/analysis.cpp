#include "inslen/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "inslen/error.hpp"
#include "inslen/lens.hpp"
#include "json.hpp"

namespace inslen::eval {

using ojson = nlohmann::ordered_json;

namespace {

std::string fixed(std::optional<double> v, int digits = 4) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
    return buf;
}

std::string sci(std::optional<double> v) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return buf;
}

ojson opt(std::optional<double> v) { return v ? ojson(*v) : ojson(nullptr); }

std::pair<std::optional<double>, std::optional<double>> metrics_of(std::span<const LabeledScore> scored) {
    std::optional<double> roc;
    std::optional<double> pr;
    try {
        roc = auroc(scored);
    } catch (const UndefinedMetricError&) {
    }
    try {
        pr = aupr(scored);
    } catch (const UndefinedMetricError&) {
    }
    return {roc, pr};
}

}  // namespace

EvalReport evaluate(const std::vector<ScoreRecord>& records, std::span<const std::string> detectors,
                    const std::vector<ScoreRecord>* validation, CalibrationObjective objective) {
    EvalReport report;
    for (const auto& name : detectors) {
        const auto scored = labeled_scores(records, name);
        DetectorReport d;
        d.detector = name;
        for (const auto& s : scored) (s.label == 1 ? d.n_pos : d.n_neg) += 1;
        d.n_unavailable = static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
            return r.label != Label::unknown && !detector_value(r, name);
        }));
        std::tie(d.auroc, d.aupr) = metrics_of(scored);
        if (!scored.empty()) {
            std::vector<int> labels;
            labels.reserve(scored.size());
            for (const auto& s : scored) labels.push_back(s.label);
            d.hallucination_rate = hallucination_rate(labels);
        }
        if (validation != nullptr) {
            const auto val = labeled_scores(*validation, name);
            try {
                d.threshold = calibrate_threshold(val, objective);
            } catch (const UndefinedMetricError&) {
            }
        }
        report.detectors.push_back(std::move(d));
    }
    return report;
}

std::string to_table(const EvalReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %8s %8s %7s %7s %8s %12s\n", "detector", "AUROC", "AUPR", "n_real",
                  "n_hall", "HR", "threshold");
    os << line;
    for (const auto& d : report.detectors) {
        std::snprintf(line, sizeof line, "%-16s %8s %8s %7zu %7zu %8s %12s\n", d.detector.c_str(),
                      fixed(d.auroc ? std::optional(*d.auroc * 100.0) : std::nullopt, 2).c_str(),
                      fixed(d.aupr ? std::optional(*d.aupr * 100.0) : std::nullopt, 2).c_str(), d.n_pos, d.n_neg,
                      fixed(d.hallucination_rate).c_str(), sci(d.threshold).c_str());
        os << line;
    }
    return os.str();
}

std::string to_json_lines(const EvalReport& report) {
    std::string out;
    for (const auto& d : report.detectors) {
        ojson j;
        j["detector"] = d.detector;
        j["auroc"] = opt(d.auroc);
        j["aupr"] = opt(d.aupr);
        j["n_pos"] = d.n_pos;
        j["n_neg"] = d.n_neg;
        j["n_unavailable"] = d.n_unavailable;
        j["threshold"] = opt(d.threshold);
        j["hallucination_rate"] = opt(d.hallucination_rate);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<AggregateRow> aggregate(std::span<const EvalReport> reports) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> values;
    for (const auto& rep : reports) {
        for (const auto& d : rep.detectors) {
            if (!d.auroc || !d.aupr) continue;
            if (!values.count(d.detector)) order.push_back(d.detector);
            values[d.detector].first.push_back(*d.auroc);
            values[d.detector].second.push_back(*d.aupr);
        }
    }
    auto mean_std = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
    };
    std::vector<AggregateRow> out;
    for (const auto& name : order) {
        const auto& [roc, pr] = values[name];
        AggregateRow row;
        row.detector = name;
        row.runs = roc.size();
        std::tie(row.auroc_mean, row.auroc_std) = mean_std(roc);
        std::tie(row.aupr_mean, row.aupr_std) = mean_std(pr);
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------

ConfidenceReport confidence_report(const TraceContainer& container, const scores::ScoreConfig& cfg, std::size_t bins) {
    cfg.check();
    if (bins < 1) throw ParameterError("histogram needs at least one bin");
    const int instr_layer = resolve_layer(cfg.instr_layer, container.card.num_layers);
    const int image_layer = resolve_layer(cfg.image_layer, container.card.num_layers);
    const SynonymMap empty;
    const SynonymMap& synonyms = container.synonyms ? *container.synonyms : empty;

    std::vector<double> image_conf;
    std::vector<double> instr_conf;
    std::vector<int> labels;
    for (const auto& sample : container.samples) {
        const auto resolved = resolve_labels(sample, synonyms);
        if (std::all_of(resolved.begin(), resolved.end(), [](Label l) { return l == Label::unknown; })) continue;
        if (sample.instruction.layer != instr_layer) {
            throw ConfigError("sample '" + sample.sample_id + "' has no instruction block at layer " +
                              std::to_string(instr_layer));
        }
        const ImageBlock* images = sample.image_at(image_layer);
        if (images == nullptr) {
            throw ConfigError("sample '" + sample.sample_id + "' has no image block at layer " +
                              std::to_string(image_layer));
        }
        const lens::ProjectedRows image_rows(images->embeddings, container.unembedding, 1.0);
        const int k_cafe = std::min<int>(cfg.k_cafe, static_cast<int>(sample.instruction.count()));
        for (std::size_t i = 0; i < sample.objects.size(); ++i) {
            if (resolved[i] == Label::unknown) continue;
            const auto token = sample.objects[i].token_id;
            double best = 0.0;
            for (std::size_t p = 0; p < image_rows.size(); ++p) best = std::max(best, image_rows.prob(p, token));
            image_conf.push_back(best);
            instr_conf.push_back(scores::cafe(sample.instruction, container.unembedding, token, cfg.tau, k_cafe));
            labels.push_back(resolved[i] == Label::real ? 1 : 0);
        }
    }
    if (labels.empty()) throw UndefinedMetricError("confidence report needs labeled objects");

    auto channel = [&](const char* name, const std::vector<double>& conf) {
        ConfidenceChannel ch;
        ch.name = name;
        try {
            ch.auroc = auroc(conf, labels);
        } catch (const UndefinedMetricError&) {
        }
        std::vector<double> logs(conf.size());
        for (std::size_t i = 0; i < conf.size(); ++i) logs[i] = std::log(std::max(conf[i], 1e-300));
        const auto [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
        const double lo = *lo_it;
        const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
        auto& h = ch.log_confidence;
        h.edges.resize(bins + 1);
        for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
        h.real.assign(bins, 0);
        h.hallucinated.assign(bins, 0);
        for (std::size_t i = 0; i < logs.size(); ++i) {
            auto b = static_cast<std::size_t>((logs[i] - lo) / (hi - lo) * static_cast<double>(bins));
            b = std::min(b, bins - 1);
            (labels[i] == 1 ? h.real : h.hallucinated)[b] += 1;
        }
        return ch;
    };

    ConfidenceReport report;
    report.channels.push_back(channel("image", image_conf));
    report.channels.push_back(channel("instruction", instr_conf));
    return report;
}

std::string to_table(const ConfidenceReport& report) {
    std::ostringstream os;
    char line[256];
    for (const auto& ch : report.channels) {
        os << "# channel " << ch.name << "  AUROC " << fixed(ch.auroc) << "\n";
        std::snprintf(line, sizeof line, "%14s %14s %10s %14s\n", "log_conf_lo", "log_conf_hi", "real", "hallucinated");
        os << line;
        const auto& h = ch.log_confidence;
        for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
            std::snprintf(line, sizeof line, "%14.6g %14.6g %10zu %14zu\n", h.edges[b], h.edges[b + 1], h.real[b],
                          h.hallucinated[b]);
            os << line;
        }
    }
    return os.str();
}

std::string to_json_lines(const ConfidenceReport& report) {
    std::string out;
    for (const auto& ch : report.channels) {
        for (const char* cls : {"real", "hallucinated"}) {
            ojson j;
            j["channel"] = ch.name;
            j["class"] = cls;
            j["auroc"] = opt(ch.auroc);
            j["edges"] = ch.log_confidence.edges;
            j["counts"] = std::string(cls) == "real" ? ch.log_confidence.real : ch.log_confidence.hallucinated;
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double parse_double(const std::string& name, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) throw ConfigError("bad value '" + value + "' for " + name);
    return v;
}

int parse_int(const std::string& name, const std::string& value) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) throw ConfigError("bad value '" + value + "' for " + name);
    return v;
}

}  // namespace

void apply_parameter(scores::ScoreConfig& cfg, const std::string& name, const std::string& value) {
    if (name == "omega") {
        cfg.omega = parse_double(name, value);
    } else if (name == "tau") {
        cfg.tau = parse_double(name, value);
    } else if (name == "alpha") {
        cfg.alpha = parse_double(name, value);
    } else if (name == "m") {
        cfg.m = parse_int(name, value);
    } else if (name == "instr_layer") {
        cfg.instr_layer = parse_int(name, value);
    } else if (name == "k_cafe") {
        cfg.k_cafe = parse_int(name, value);
    } else if (name == "consistency_variant") {
        cfg.consistency_variant = scores::parse_consistency_variant(value);
    } else {
        throw ConfigError("unknown sweep parameter '" + name + "'");
    }
}

std::vector<SweepRow> sweep(const TraceContainer& container, const scores::ScoreConfig& base, const Grid& grid,
                            const std::string& detector, unsigned jobs) {
    Grid axes = grid;
    std::stable_sort(axes.begin(), axes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < axes.size(); ++i) {
        if (axes[i].first == axes[i - 1].first) throw ConfigError("sweep parameter '" + axes[i].first + "' repeated");
    }
    for (const auto& [name, values] : axes) {
        if (values.empty()) throw ConfigError("sweep parameter '" + name + "' has no values");
        for (const auto& v : values) {
            auto probe = base;
            apply_parameter(probe, name, v);
        }
    }
    {
        const auto& names = detector_names();
        if (std::find(names.begin(), names.end(), detector) == names.end()) {
            throw ConfigError("unknown detector '" + detector + "'");
        }
    }

    std::vector<SweepRow> rows;
    std::vector<std::size_t> digit(axes.size(), 0);
    while (true) {
        auto cfg = base;
        SweepRow row;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& value = axes[a].second[digit[a]];
            apply_parameter(cfg, axes[a].first, value);
            row.point.emplace_back(axes[a].first, value);
        }
        const auto run = score_container(container, cfg, jobs);
        const auto scored = labeled_scores(run.records, detector);
        std::tie(row.auroc, row.aupr) = metrics_of(scored);
        rows.push_back(std::move(row));

        // odometer increment, last axis fastest
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++digit[a] < axes[a].second.size()) break;
            digit[a] = 0;
            if (a == 0) return rows;
        }
        if (axes.empty()) return rows;
    }
}

std::string to_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    if (rows.empty()) return "";
    for (const auto& [name, value] : rows.front().point) os << name << '\t';
    os << "AUROC\tAUPR\n";
    for (const auto& r : rows) {
        for (const auto& [name, value] : r.point) os << value << '\t';
        os << fixed(r.auroc) << '\t' << fixed(r.aupr) << '\n';
    }
    return os.str();
}

std::string to_json_lines(const std::vector<SweepRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        ojson j;
        ojson point = ojson::object();
        for (const auto& [name, value] : r.point) point[name] = value;
        j["config"] = std::move(point);
        j["auroc"] = opt(r.auroc);
        j["aupr"] = opt(r.aupr);
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace inslen::eval
