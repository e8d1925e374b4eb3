#include "gkr/checkpoint.hpp"

#include <fstream>

#include "gkr/config.hpp"
#include "gkr/errors.hpp"

namespace gkr {

using nlohmann::json;

json checkpoint_json(const KinshipModel& model, const TrainConfig& config) {
  json doc = {{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"kind", to_string(model.head().kind())},
              {"input_dim", model.input_dim()},
              {"config", to_json(config)}};
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  json tensors = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = *params[i];
    tensors.push_back({{"name", names[i]},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"data", std::vector<double>(m.values().begin(), m.values().end())}});
  }
  doc["tensors"] = std::move(tensors);
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
      throw ParseError("checkpoint: not a " + std::string(kCheckpointFormat) + " document");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("checkpoint: unsupported version " + doc.at("version").dump());
    }
    RunConfig run;
    run = apply_json(run, doc.at("config"));
    const auto input_dim = doc.at("input_dim").get<std::size_t>();
    if (to_string(run.train.model.kind) != doc.at("kind").get<std::string>()) {
      throw ParseError("checkpoint: kind tag disagrees with the stored config");
    }
    KinshipModel model = make_model(run.train.model, run.train.encoder, input_dim, run.train.seed);
    auto params = model.parameters();
    const auto names = model.parameter_names();
    const json& tensors = doc.at("tensors");
    if (tensors.size() != params.size()) {
      throw ParseError("checkpoint: " + std::to_string(tensors.size()) + " tensors, model has " +
                       std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& t = tensors[i];
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      if (name != names[i] || rows != params[i]->rows() || cols != params[i]->cols()) {
        throw ParseError("checkpoint: tensor " + std::to_string(i) + " is " + name + " " +
                         std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                         names[i] + " " + params[i]->shape_str());
      }
      *params[i] = Matrix(rows, cols, t.at("data").get<std::vector<double>>());
    }
    return {run.train, std::move(model)};
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const KinshipModel& model,
                     const TrainConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_json(model, config).dump() << '\n';
  if (!out) throw UsageError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace gkr
