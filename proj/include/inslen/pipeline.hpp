#pragma once

// Whole-container scoring and the line-delimited score record format.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "inslen/baselines.hpp"
#include "inslen/metrics.hpp"
#include "inslen/scores.hpp"
#include "inslen/trace.hpp"

namespace inslen {

/// One scored object token: InsLen components plus baselines.
struct ScoreRecord {
    std::string sample_id;
    std::int64_t position = 0;
    std::int64_t token_id = 0;
    std::string surface;
    std::optional<scores::ScoreSet> scores;
    std::string error;
    baselines::BaselineSet baselines;
    Label label = Label::unknown;
};

/// Detector names accepted by detector_value, in report order.
const std::vector<std::string>& detector_names();

/// The named detector's score, or nullopt when unavailable for this record.
/// Throws ConfigError for unknown names.
std::optional<double> detector_value(const ScoreRecord& record, std::string_view detector);

/// Ground-truth label for each object: the stored label when known, otherwise
/// derived from the sample's ground-truth object list, otherwise unknown.
std::vector<Label> resolve_labels(const SampleTrace& sample, const SynonymMap& synonyms);

struct ScoreRun {
    std::vector<ScoreRecord> records;  // container order
    std::vector<std::string> warnings;
};

/// Scores every sample with up to `jobs` worker threads. Output order does not
/// depend on `jobs`.
ScoreRun score_container(const TraceContainer& container, const scores::ScoreConfig& cfg, unsigned jobs = 1);

std::string to_json_line(const ScoreRecord& record);
ScoreRecord record_from_json_line(std::string_view line);

void write_records(std::ostream& out, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_records(std::istream& in);

/// Labeled (label known) records with the detector available.
std::vector<eval::LabeledScore> labeled_scores(const std::vector<ScoreRecord>& records, std::string_view detector);

}  // namespace inslen
