#include "inslen/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "inslen/error.hpp"

namespace inslen::eval {

namespace {

void check_pair(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
    for (double s : scores) {
        if (!std::isfinite(s)) throw InputError("non-finite score");
    }
    for (int l : labels) {
        if (l != 0 && l != 1) throw InputError("labels must be 0 or 1");
    }
}

std::pair<std::vector<double>, std::vector<int>> unzip(std::span<const LabeledScore> scored) {
    std::vector<double> s;
    std::vector<int> l;
    s.reserve(scored.size());
    l.reserve(scored.size());
    for (const auto& x : scored) {
        s.push_back(x.score);
        l.push_back(x.label);
    }
    return {std::move(s), std::move(l)};
}

/// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

std::string canonical(std::string_view surface, const SynonymMap& synonyms) {
    std::string folded(surface);
    std::transform(folded.begin(), folded.end(), folded.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (auto it = synonyms.find(folded); it != synonyms.end()) return it->second;
    return folded;
}

std::vector<int> label_objects(std::span<const std::string> surfaces, std::span<const std::string> ground_truth,
                               const SynonymMap& synonyms) {
    std::set<std::string> truth;
    for (const auto& g : ground_truth) truth.insert(canonical(g, synonyms));
    std::vector<int> out;
    out.reserve(surfaces.size());
    for (const auto& s : surfaces) out.push_back(truth.count(canonical(s, synonyms)) ? 1 : 0);
    return out;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    check_pair(scores, labels);
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUROC needs both classes");

    // Ascending midranks; sum of positive ranks gives the U statistic.
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (labels[idx[t]] == 1) rank_sum += mid;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double auroc(std::span<const LabeledScore> scored) {
    const auto [s, l] = unzip(scored);
    return auroc(s, l);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
    check_pair(scores, labels);
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (n_pos == 0) throw UndefinedMetricError("AUPR needs at least one positive");

    const auto idx = descending(scores);
    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        std::size_t group_tp = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            group_tp += labels[idx[j]] == 1 ? 1 : 0;
            ++j;
        }
        tp += group_tp;
        seen = j;
        if (group_tp > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(seen);
            ap += precision * static_cast<double>(group_tp);
        }
        i = j;
    }
    return ap / static_cast<double>(n_pos);
}

double aupr(std::span<const LabeledScore> scored) {
    const auto [s, l] = unzip(scored);
    return aupr(s, l);
}

double calibrate_threshold(std::span<const double> scores, std::span<const int> labels,
                           CalibrationObjective objective) {
    check_pair(scores, labels);
    const auto n_real = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_hall = labels.size() - n_real;
    if (n_real == 0 || n_hall == 0) throw UndefinedMetricError("threshold calibration needs both classes");
    if (objective.kind == Objective::fixed_fpr && !(objective.max_fpr >= 0.0 && objective.max_fpr <= 1.0)) {
        throw ParameterError("target FPR must lie in [0, 1]");
    }

    // Ascending distinct scores with per-value class counts.
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    struct Level {
        double score;
        std::size_t hall;
        std::size_t real;
    };
    std::vector<Level> levels;
    for (std::size_t i : idx) {
        if (levels.empty() || levels.back().score != scores[i]) levels.push_back({scores[i], 0, 0});
        (labels[i] == 1 ? levels.back().real : levels.back().hall) += 1;
    }

    // Candidate c (0..levels.size()) flags levels [0, c) as hallucinated.
    auto candidate_mu = [&](std::size_t c) {
        if (c == 0) return -std::numeric_limits<double>::infinity();
        if (c == levels.size()) return std::numeric_limits<double>::infinity();
        return 0.5 * (levels[c - 1].score + levels[c].score);
    };

    std::size_t hall_below = 0;
    std::size_t real_below = 0;
    std::size_t best = 0;
    double best_j = -std::numeric_limits<double>::infinity();
    std::size_t best_fpr_ok = 0;
    for (std::size_t c = 0; c <= levels.size(); ++c) {
        if (c > 0) {
            hall_below += levels[c - 1].hall;
            real_below += levels[c - 1].real;
        }
        const double tpr = static_cast<double>(hall_below) / static_cast<double>(n_hall);
        const double fpr = static_cast<double>(real_below) / static_cast<double>(n_real);
        const double j = tpr - fpr;
        if (j > best_j) {
            best_j = j;
            best = c;
        }
        if (fpr <= objective.max_fpr) best_fpr_ok = c;
    }
    return candidate_mu(objective.kind == Objective::youden_j ? best : best_fpr_ok);
}

double calibrate_threshold(std::span<const LabeledScore> validation, CalibrationObjective objective) {
    const auto [s, l] = unzip(validation);
    return calibrate_threshold(s, l, objective);
}

std::string_view to_string(Decision d) { return d == Decision::Hallucination ? "Hallucination" : "Truth"; }

double hallucination_rate(std::span<const int> labels) {
    if (labels.empty()) throw UndefinedMetricError("hallucination rate of an empty set");
    const auto n_hall = std::count(labels.begin(), labels.end(), 0);
    return static_cast<double>(n_hall) / static_cast<double>(labels.size());
}

}  // namespace inslen::eval
