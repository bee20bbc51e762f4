#pragma once

// Structured-text (JSON) configuration for scoring and synthesis. Keys mirror
// the struct field names; unknown keys are rejected.

#include <filesystem>
#include <string>
#include <string_view>

#include "inslen/scores.hpp"
#include "inslen/synth.hpp"

namespace inslen {

/// Overlays the keys present in `json_text` onto `cfg`.
void apply_score_config(scores::ScoreConfig& cfg, std::string_view json_text);
void apply_synth_config(synth::SynthConfig& cfg, std::string_view json_text);

std::string to_json(const scores::ScoreConfig& cfg);
std::string to_json(const synth::SynthConfig& cfg);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace inslen
