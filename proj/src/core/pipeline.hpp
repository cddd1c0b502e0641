#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace ikit::pipeline {

// File-level stage drivers. Each takes a resolved JSON config (paths plus
// knobs), performs one pipeline stage, and returns a summary document that
// embeds the config it ran with. Invalid configs raise ValidationError,
// environmental problems RuntimeFailure.

nlohmann::json filter_mmc4(const nlohmann::json & cfg);
nlohmann::json filter_pairs(const nlohmann::json & cfg);
nlohmann::json synth(const nlohmann::json & cfg);
nlohmann::json seq(const nlohmann::json & cfg);
nlohmann::json shard_pack(const nlohmann::json & cfg);
nlohmann::json shard_stats(const nlohmann::json & cfg);
nlohmann::json shard_sample(const nlohmann::json & cfg);
nlohmann::json plan(const nlohmann::json & cfg);
nlohmann::json rices(const nlohmann::json & cfg);
nlohmann::json eval(const nlohmann::json & cfg);
nlohmann::json report(const nlohmann::json & cfg);

// Dispatch by stage name (the CLI subcommand spelling).
nlohmann::json run_stage(const std::string & name, const nlohmann::json & cfg);

}  // namespace ikit::pipeline
