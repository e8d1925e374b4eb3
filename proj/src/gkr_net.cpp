#include "gkr/gkr_net.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "gkr/errors.hpp"

namespace gkr {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gkr: return "gkr";
    case ModelKind::Cosine: return "cosine";
    case ModelKind::MlpFusion: return "mlp";
    case ModelKind::LinearMetric: return "metric";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "gkr") return ModelKind::Gkr;
  if (text == "cosine" || text == "cos") return ModelKind::Cosine;
  if (text == "mlp") return ModelKind::MlpFusion;
  if (text == "metric") return ModelKind::LinearMetric;
  throw UsageError("unknown model kind '" + std::string(text) + "' (expected gkr|cosine|mlp|metric)");
}

std::vector<Matrix*> PairModel::parameters() {
  std::vector<Matrix*> p;
  std::vector<std::string> n;
  collect(p, n);
  return p;
}

std::vector<std::string> PairModel::parameter_names() {
  std::vector<Matrix*> p;
  std::vector<std::string> n;
  collect(p, n);
  return n;
}

std::string_view to_string(PoolMode mode) { return mode == PoolMode::Max ? "max" : "mean"; }

PoolMode parse_pool_mode(std::string_view text) {
  if (text == "max") return PoolMode::Max;
  if (text == "mean") return PoolMode::Mean;
  throw UsageError("unknown aggregator '" + std::string(text) + "' (expected max|mean)");
}

std::string CentralInit::label() const {
  switch (kind) {
    case Kind::MeanPool: return "mean";
    case Kind::MaxPool: return "max";
    case Kind::Const: {
      char buf[32];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
      return std::string(buf, end);
    }
  }
  return "?";
}

CentralInit CentralInit::parse(const std::string& text) {
  if (text == "mean") return mean_pool();
  if (text == "max") return max_pool();
  std::string_view num = text;
  if (num.starts_with("const:")) num.remove_prefix(6);
  double c = 0.0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), c);
  if (ec != std::errc{} || ptr != num.data() + num.size() || !std::isfinite(c)) {
    throw UsageError("unknown central init '" + text + "' (expected mean|max|const:<c>|<c>)");
  }
  return constant(c);
}

std::size_t GkrConfig::readout_input_dim() const {
  return (dim + 1) * (layer_dims.empty() ? 0 : layer_dims.back());
}

std::vector<std::size_t> GkrConfig::resolved_readout_hidden() const {
  if (readout_hidden) return *readout_hidden;
  return {std::max<std::size_t>(16, readout_input_dim() / 4)};
}

void GkrConfig::validate() const {
  if (dim == 0) throw UsageError("gkr config: feature dimension D must be positive");
  if (layer_dims.empty()) throw UsageError("gkr config: need at least one layer (K >= 1)");
  for (std::size_t f : layer_dims)
    if (f == 0) throw UsageError("gkr config: layer widths F_k must be positive");
  if (readout_hidden)
    for (std::size_t h : *readout_hidden)
      if (h == 0) throw UsageError("gkr config: readout widths must be positive");
  if (central_init.kind == CentralInit::Kind::Const && !std::isfinite(central_init.value))
    throw UsageError("gkr config: central init constant must be finite");
}

void GkrParams::collect(std::vector<Matrix*>& params, std::vector<std::string>& names) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string p = "layer" + std::to_string(k + 1) + ".";
    auto add = [&](Matrix& m, const char* n) {
      if (m.empty()) return;
      params.push_back(&m);
      names.push_back(p + n);
    };
    add(layers[k].mess, "mess");
    add(layers[k].peri, "peri");
    add(layers[k].cen, "cen");
    add(layers[k].mess_bias, "mess_bias");
    add(layers[k].peri_bias, "peri_bias");
    add(layers[k].cen_bias, "cen_bias");
  }
  readout.collect("readout", params, names);
}

GkrParams init_params(const GkrConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  GkrParams p;
  p.seed = seed;
  for (std::size_t k = 1; k <= config.layers(); ++k) {
    const std::size_t in = config.node_dim(k - 1), out = config.node_dim(k);
    GkrLayerWeights w;
    w.mess = uniform_fan_in(in, out, rng);
    w.peri = uniform_fan_in(2 * out, out, rng);
    w.cen = uniform_fan_in(2 * out, out, rng);
    if (config.use_bias) {
      w.mess_bias = Matrix(1, out);
      w.peri_bias = Matrix(1, out);
      w.cen_bias = Matrix(1, out);
    }
    p.layers.push_back(std::move(w));
  }
  std::vector<std::size_t> widths{config.readout_input_dim()};
  for (std::size_t h : config.resolved_readout_hidden()) widths.push_back(h);
  widths.push_back(1);
  p.readout = Mlp(widths, config.use_bias, rng);
  return p;
}

GraphState build_graph(Tape& tape, Var fx, Var fy, const CentralInit& init) {
  const Matrix& x = tape.value(fx);
  const Matrix& y = tape.value(fy);
  if (x.rows() != 1 || !x.same_shape(y)) {
    throw ShapeError("build_graph: feature shapes " + x.shape_str() + " and " + y.shape_str() +
                     " differ or are not row vectors");
  }
  GraphState s;
  s.peripheral = tape.interleave(fx, fy);
  switch (init.kind) {
    case CentralInit::Kind::MeanPool:
      s.central = tape.pool_rows(s.peripheral, PoolMode::Mean);
      break;
    case CentralInit::Kind::MaxPool:
      s.central = tape.pool_rows(s.peripheral, PoolMode::Max);
      break;
    case CentralInit::Kind::Const:
      s.central = tape.constant(Matrix(1, kInputNodeDim, init.value));
      break;
  }
  return s;
}

namespace {

Var affine(Tape& tape, const Matrix& w, const Matrix& b, Var x) {
  Var y = tape.linear(w, x);
  return b.empty() ? y : tape.add_bias(y, b);
}

}  // namespace

GraphState gkr_layer(Tape& tape, const GraphState& state, const GkrLayerWeights& w,
                     PoolMode aggregator) {
  const std::size_t in = tape.value(state.central).cols();
  if (tape.value(state.peripheral).cols() != in || w.mess.rows() != in) {
    throw ShapeError("gkr_layer: node width " + std::to_string(in) + " vs W_mess " +
                     w.mess.shape_str());
  }
  const std::size_t out = w.mess.cols();
  if (w.peri.rows() != 2 * out || w.peri.cols() != out || w.cen.rows() != 2 * out ||
      w.cen.cols() != out) {
    throw ShapeError("gkr_layer: W_peri " + w.peri.shape_str() + " / W_cen " + w.cen.shape_str() +
                     " do not match F_k = " + std::to_string(out));
  }

  const Var m_peri = tape.relu(affine(tape, w.mess, w.mess_bias, state.peripheral));
  const Var m_cen = tape.relu(affine(tape, w.mess, w.mess_bias, state.central));

  GraphState next;
  next.layer = state.layer + 1;
  next.peripheral = tape.relu(affine(tape, w.peri, w.peri_bias, tape.concat(m_peri, m_cen)));
  const Var agg = tape.pool_rows(m_peri, aggregator);
  next.central = tape.relu(affine(tape, w.cen, w.cen_bias, tape.concat(m_cen, agg)));
  return next;
}

Var readout(Tape& tape, const GraphState& state, const Mlp& mlp) {
  const Var nodes[] = {state.central, tape.flatten(state.peripheral)};
  const Var joined = tape.concat(nodes);
  if (tape.value(joined).cols() != mlp.input_dim()) {
    throw ShapeError("readout: graph gives " + std::to_string(tape.value(joined).cols()) +
                     " features, MLP expects " + std::to_string(mlp.input_dim()));
  }
  return mlp.forward(tape, joined);
}

Var batch_loss(Tape& tape, std::span<const Var> logits, std::span<const int> labels) {
  if (logits.empty()) throw UsageError("batch_loss: empty batch");
  if (logits.size() != labels.size()) throw UsageError("batch_loss: logits/labels length differ");
  std::vector<Var> pos, neg;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) throw UsageError("batch_loss: labels must be 0 or 1");
    (y == 1 ? pos : neg).push_back(tape.bce_with_logit(logits[i], y));
  }
  auto class_mean = [&](const std::vector<Var>& terms) {
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
    return tape.scale(acc, 1.0 / static_cast<double>(terms.size()));
  };
  if (pos.empty()) return class_mean(neg);
  if (neg.empty()) return class_mean(pos);
  return tape.add(class_mean(pos), class_mean(neg));
}

Var batch_loss(Tape& tape, const PairModel& model, std::span<const LabeledFeatures> batch) {
  std::vector<Var> logits;
  std::vector<int> labels;
  for (const auto& s : batch) {
    logits.push_back(model.logit(tape, tape.constant_row(s.fx), tape.constant_row(s.fy)));
    labels.push_back(s.label);
  }
  return batch_loss(tape, logits, labels);
}

GkrNet::GkrNet(GkrConfig config, std::uint64_t seed)
    : config_(std::move(config)), params_(init_params(config_, seed)) {}

GkrNet::GkrNet(GkrConfig config, GkrParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  if (params_.layers.size() != config_.layers())
    throw ShapeError("gkr: " + std::to_string(params_.layers.size()) + " layers of weights for K = " +
                     std::to_string(config_.layers()));
  for (std::size_t k = 1; k <= config_.layers(); ++k) {
    const auto& w = params_.layers[k - 1];
    const std::size_t in = config_.node_dim(k - 1), out = config_.node_dim(k);
    if (w.mess.rows() != in || w.mess.cols() != out || w.peri.rows() != 2 * out ||
        w.peri.cols() != out || w.cen.rows() != 2 * out || w.cen.cols() != out) {
      throw ShapeError("gkr: layer " + std::to_string(k) + " weights do not match config");
    }
  }
  if (params_.readout.input_dim() != config_.readout_input_dim() ||
      params_.readout.output_dim() != 1) {
    throw ShapeError("gkr: readout MLP does not match config");
  }
}

GraphState GkrNet::propagate(Tape& tape, Var fx, Var fy) const {
  if (tape.value(fx).cols() != config_.dim) {
    throw ShapeError("gkr: features have dim " + std::to_string(tape.value(fx).cols()) +
                     ", model expects D = " + std::to_string(config_.dim));
  }
  GraphState s = build_graph(tape, fx, fy, config_.central_init);
  for (const auto& w : params_.layers) s = gkr_layer(tape, s, w, config_.aggregator);
  return s;
}

Var GkrNet::logit(Tape& tape, Var fx, Var fy) const {
  return readout(tape, propagate(tape, fx, fy), params_.readout);
}

double GkrNet::probability(std::span<const double> fx, std::span<const double> fy) const {
  Tape tape;
  return sigmoid(tape.scalar(logit(tape, tape.constant_row(fx), tape.constant_row(fy))));
}

void GkrNet::collect(std::vector<Matrix*>& params, std::vector<std::string>& names) {
  params_.collect(params, names);
}

std::unique_ptr<PairModel> GkrNet::clone() const { return std::make_unique<GkrNet>(*this); }

}  // namespace gkr
