#pragma once

// Labeling, ranking metrics, threshold calibration and the detection rule.
//
// Label convention: 1 = real object, 0 = hallucinated. Scores are oriented so
// that higher means "more likely real"; AUROC and AUPR treat real objects as
// the positive class.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inslen/trace.hpp"

namespace inslen::eval {

struct LabeledScore {
    std::string sample_id;
    std::int64_t position = 0;
    std::string detector;
    double score = 0.0;
    int label = 0;  // 1 = real, 0 = hallucinated
};

/// Case-folds and applies the synonym map.
std::string canonical(std::string_view surface, const SynonymMap& synonyms);

/// 1 if canonical(surface) is among the canonicalized ground-truth labels, else 0.
std::vector<int> label_objects(std::span<const std::string> surfaces, std::span<const std::string> ground_truth,
                               const SynonymMap& synonyms);

/// Mann-Whitney AUROC with half credit for ties. Throws UndefinedMetricError
/// unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);
double auroc(std::span<const LabeledScore> scored);

/// Average precision with tied scores entering the curve together. Throws
/// UndefinedMetricError without positives.
double aupr(std::span<const double> scores, std::span<const int> labels);
double aupr(std::span<const LabeledScore> scored);

enum class Objective { youden_j, fixed_fpr };

struct CalibrationObjective {
    Objective kind = Objective::youden_j;
    double max_fpr = 0.05;  // used by fixed_fpr

    static CalibrationObjective youden() { return {}; }
    static CalibrationObjective fixed_fpr(double q) { return {Objective::fixed_fpr, q}; }
};

/// Picks mu for the rule "hallucination iff score <= mu".
///
/// Candidates are -inf, +inf and the midpoints between adjacent distinct
/// scores. Hallucinated objects are the detection target: TPR is the share of
/// hallucinated objects with score <= mu, FPR the share of real ones.
/// youden_j maximizes TPR - FPR, ties to the smallest mu; fixed_fpr returns the
/// largest mu with FPR <= q.
double calibrate_threshold(std::span<const double> scores, std::span<const int> labels,
                           CalibrationObjective objective = {});
double calibrate_threshold(std::span<const LabeledScore> validation, CalibrationObjective objective = {});

enum class Decision { Hallucination, Truth };

std::string_view to_string(Decision d);

inline Decision detect(double score, double mu) { return score <= mu ? Decision::Hallucination : Decision::Truth; }

/// Share of hallucinated (label 0) entries. Throws UndefinedMetricError if empty.
double hallucination_rate(std::span<const int> labels);

}  // namespace inslen::eval
