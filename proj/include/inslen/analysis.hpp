#pragma once

// Evaluation reports over scored records: per-detector AUROC/AUPR, the
// image-vs-instruction confidence analysis, and hyperparameter sweeps.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inslen/metrics.hpp"
#include "inslen/pipeline.hpp"
#include "inslen/scores.hpp"
#include "inslen/trace.hpp"

namespace inslen::eval {

struct DetectorReport {
    std::string detector;
    std::optional<double> auroc;  // unset when a class is missing
    std::optional<double> aupr;
    std::size_t n_pos = 0;  // real
    std::size_t n_neg = 0;  // hallucinated
    std::size_t n_unavailable = 0;
    std::optional<double> threshold;
    std::optional<double> hallucination_rate;
};

struct EvalReport {
    std::vector<DetectorReport> detectors;
};

/// Evaluates each detector on the labeled records. When `validation` is
/// given, a threshold is calibrated on it per detector.
EvalReport evaluate(const std::vector<ScoreRecord>& records, std::span<const std::string> detectors,
                    const std::vector<ScoreRecord>* validation = nullptr, CalibrationObjective objective = {});

std::string to_table(const EvalReport& report);
std::string to_json_lines(const EvalReport& report);

/// Mean and population std of AUROC/AUPR across runs (e.g. seeds).
struct AggregateRow {
    std::string detector;
    std::size_t runs = 0;
    double auroc_mean = 0.0;
    double auroc_std = 0.0;
    double aupr_mean = 0.0;
    double aupr_std = 0.0;
};

std::vector<AggregateRow> aggregate(std::span<const EvalReport> reports);

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> real;
    std::vector<std::size_t> hallucinated;
};

struct ConfidenceChannel {
    std::string name;  // "image" or "instruction"
    std::optional<double> auroc;
    Histogram log_confidence;
};

struct ConfidenceReport {
    std::vector<ConfidenceChannel> channels;
};

/// Distribution of log token confidence for real vs hallucinated objects,
/// read from image embeddings (max over patches, tau = 1) and from
/// instruction embeddings (Cafe at cfg.tau).
ConfidenceReport confidence_report(const TraceContainer& container, const scores::ScoreConfig& cfg,
                                   std::size_t bins = 20);

std::string to_table(const ConfidenceReport& report);
std::string to_json_lines(const ConfidenceReport& report);

/// Parameter name -> values (as text), one axis per entry.
using Grid = std::vector<std::pair<std::string, std::vector<std::string>>>;

struct SweepRow {
    std::vector<std::pair<std::string, std::string>> point;
    std::optional<double> auroc;
    std::optional<double> aupr;
};

/// Applies one grid point's values to a config. Throws ConfigError on unknown
/// names or unparseable values.
void apply_parameter(scores::ScoreConfig& cfg, const std::string& name, const std::string& value);

/// One row per grid point. Axes are ordered by parameter name and iterated
/// lexicographically (first axis outermost, values in the given order).
std::vector<SweepRow> sweep(const TraceContainer& container, const scores::ScoreConfig& base, const Grid& grid,
                            const std::string& detector = "inslen", unsigned jobs = 1);

std::string to_table(const std::vector<SweepRow>& rows);
std::string to_json_lines(const std::vector<SweepRow>& rows);

}  // namespace inslen::eval
