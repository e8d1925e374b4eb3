#include "gkr/report.hpp"

#include <cstdio>

namespace gkr {

using nlohmann::json;

json to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}, {"pairs", c.total()},
          {"accuracy", c.accuracy()}};
}

json to_json(const Metrics& m) {
  json doc = {{"accuracy", m.accuracy()}, {"confusion", to_json(m.overall)}};
  json rel = json::array();
  for (Relation r : kTableRelations) {
    if (auto it = m.by_relation.find(r); it != m.by_relation.end()) {
      json entry = to_json(it->second);
      entry["relation"] = std::string(to_string(r));
      rel.push_back(std::move(entry));
    }
  }
  doc["by_relation"] = std::move(rel);
  return doc;
}

json to_json(const EpochStats& e) {
  return {{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}};
}

namespace {

json history_json(const std::vector<EpochStats>& h) {
  json out = json::array();
  for (const auto& e : h) out.push_back(to_json(e));
  return out;
}

json notes(const TrainConfig& c) {
  json out = json::array();
  out.push_back("prediction: probability >= " + json(c.threshold).dump() + " is kin");
  out.push_back("reporting: final epoch");
  switch (c.model.kind) {
    case ModelKind::Cosine:
      out.push_back("cosine: probability sigma(t*cos + b) with t, b fitted on the training folds");
      break;
    case ModelKind::LinearMetric:
      out.push_back("metric: decision rule sigma(alpha*(tau - d)) is an extension of the plain "
                    "learned distance");
      break;
    default:
      break;
  }
  return out;
}

json header(const char* kind, const RunConfig& run) {
  return {{"schema_version", kSchemaVersion}, {"report", kind}, {"config", to_json(run)},
          {"notes", notes(run.train)}};
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

}  // namespace

json crossval_report(const CrossvalReport& report, const RunConfig& run) {
  json doc = header("crossval", run);
  json folds = json::array();
  for (const auto& f : report.folds) {
    json fj = {{"fold", f.fold}, {"train_pairs", f.train_size}, {"test_pairs", f.test_size}};
    fj["test"] = to_json(f.test);
    fj["history"] = history_json(f.history);
    folds.push_back(std::move(fj));
  }
  doc["folds"] = std::move(folds);
  doc["mean_accuracy"] = report.mean_accuracy();
  doc["pooled"] = to_json(report.pooled);
  return doc;
}

json train_report(const TrainResult& result, const Metrics& train_metrics, const RunConfig& run) {
  json doc = header("train", run);
  doc["history"] = history_json(result.history);
  doc["train"] = to_json(train_metrics);
  return doc;
}

json eval_report(const Metrics& metrics, double threshold) {
  json doc = {{"schema_version", kSchemaVersion}, {"report", "eval"}, {"threshold", threshold}};
  doc["metrics"] = to_json(metrics);
  return doc;
}

json ablation_report(const AblationTable& table, const RunConfig& run) {
  json doc = header("ablate", run);
  doc["title"] = table.title;
  json rows = json::array();
  for (const auto& r : table.rows) {
    json rj = {{"label", r.label}, {"model", to_string(r.report.config.model.kind)}};
    if (r.report.config.model.kind == ModelKind::Gkr) {
      rj["central_init"] = r.report.config.model.gkr.central_init.label();
      rj["aggregator"] = to_string(r.report.config.model.gkr.aggregator);
    }
    rj["mean_accuracy"] = r.report.mean_accuracy();
    rj["pooled"] = to_json(r.report.pooled);
    json folds = json::array();
    for (const auto& f : r.report.folds) folds.push_back({{"fold", f.fold}, {"accuracy", f.test.accuracy()}});
    rj["folds"] = std::move(folds);
    rows.push_back(std::move(rj));
  }
  doc["rows"] = std::move(rows);
  return doc;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string render_table(const std::string& title,
                         const std::vector<std::pair<std::string, Metrics>>& rows) {
  bool relations = false;
  for (const auto& [label, m] : rows) relations = relations || m.has_relations();

  std::vector<std::string> head{"Method"};
  if (relations)
    for (Relation r : kTableRelations) head.emplace_back(to_string(r));
  head.emplace_back("Mean");

  std::vector<std::vector<std::string>> cells{head};
  for (const auto& [label, m] : rows) {
    std::vector<std::string> line{label};
    if (relations) {
      for (Relation r : kTableRelations) {
        auto it = m.by_relation.find(r);
        line.push_back(it == m.by_relation.end() ? "-" : pct(it->second.accuracy()));
      }
    }
    line.push_back(pct(m.accuracy()));
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());

  std::string out = title.empty() ? "" : title + "\n";
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      const std::string pad(width[i] - line[i].size(), ' ');
      out += i == 0 ? line[i] + pad : "  " + pad + line[i];
    }
    out += '\n';
  }
  return out;
}

std::string render_crossval(const CrossvalReport& report, const std::string& label) {
  std::string out = render_table("Verification accuracy (%), " +
                                     std::to_string(report.folds.size()) + "-fold cross-validation",
                                 {{label, report.pooled}});
  for (const auto& f : report.folds) {
    out += "fold " + std::to_string(f.fold) + ": " + pct(f.test.accuracy()) + " on " +
           std::to_string(f.test_size) + " pairs\n";
  }
  return out;
}

std::string render_ablation(const AblationTable& table) {
  std::vector<std::pair<std::string, Metrics>> rows;
  for (const auto& r : table.rows) rows.emplace_back(r.label, r.report.pooled);
  return render_table(table.title + ", accuracy (%)", rows);
}

}  // namespace gkr
