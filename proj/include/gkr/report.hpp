#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gkr/config.hpp"
#include "gkr/trainer.hpp"

namespace gkr {

nlohmann::json to_json(const Confusion& c);
nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const EpochStats& e);

/// Report documents. None of them carry timings, so equal runs give equal bytes.
nlohmann::json crossval_report(const CrossvalReport& report, const RunConfig& run);
nlohmann::json train_report(const TrainResult& result, const Metrics& train_metrics,
                            const RunConfig& run);
nlohmann::json eval_report(const Metrics& metrics, double threshold);
nlohmann::json ablation_report(const AblationTable& table, const RunConfig& run);

/// Two-space indented JSON with a trailing newline.
std::string dump(const nlohmann::json& doc);

/// Aligned accuracy table in percent. Columns are F-S, F-D, M-S, M-D, Mean
/// when any row has relation tags, otherwise Mean alone.
std::string render_table(const std::string& title,
                         const std::vector<std::pair<std::string, Metrics>>& rows);
std::string render_crossval(const CrossvalReport& report, const std::string& label);
std::string render_ablation(const AblationTable& table);

}  // namespace gkr
