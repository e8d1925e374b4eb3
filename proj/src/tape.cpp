#include "gkr/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "gkr/errors.hpp"

namespace gkr {

namespace {

// Sums in sorted order so any permutation of the inputs gives the same bits.
double order_free_mean(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::atomic<std::uint32_t> next_tape_id{1};

std::string shapes(const Matrix& a, const Matrix& b) {
  return a.shape_str() + " and " + b.shape_str();
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": shape mismatch " + shapes(a, b));
}

void accumulate(Matrix& into, const Matrix& from) {
  if (into.empty()) {
    into = from;
    return;
  }
  auto dst = into.values();
  auto src = from.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Matrix& adjoint(std::vector<Matrix>& adj, std::uint32_t i, const Matrix& like) {
  if (adj[i].empty()) adj[i] = Matrix(like.rows(), like.cols());
  return adj[i];
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logit(double z, int label) {
  // max(z,0) - z·y + log(1 + e^{-|z|})
  return std::max(z, 0.0) - z * static_cast<double>(label) + std::log1p(std::exp(-std::abs(z)));
}

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

void Tape::clear() {
  nodes_.clear();
  params_.clear();
  param_index_.clear();
  grads_.clear();
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1), id_};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_id != id_ || v.index >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
  return nodes_[v.index];
}

std::int32_t Tape::register_param(const Matrix& p) {
  auto [it, inserted] = param_index_.try_emplace(&p, static_cast<std::int32_t>(params_.size()));
  if (inserted) params_.push_back(&p);
  return it->second;
}

std::vector<std::uint32_t> Tape::activation_pattern() const {
  std::vector<std::uint32_t> out;
  for (const Node& nd : nodes_) {
    if (nd.op == Op::Relu) {
      for (double v : nodes_[nd.a].value.values()) out.push_back(v > 0.0 ? 1u : 0u);
    } else if ((nd.op == Op::Pool || nd.op == Op::PoolRows) && nd.pool == PoolMode::Max) {
      out.insert(out.end(), nd.winners.begin(), nd.winners.end());
    }
  }
  return out;
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeError("expected 1x1 value, got " + m.shape_str());
  return m[0];
}

Var Tape::constant(Matrix value) {
  Node n{.op = Op::Constant};
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant_row(std::span<const double> values) { return constant(Matrix::row(values)); }

Var Tape::param(const Matrix& p) {
  Node n{.op = Op::Param};
  n.param = register_param(p);
  n.value = p;
  return push(std::move(n));
}

Var Tape::linear(const Matrix& W, Var xv) {
  const Matrix& x = value(xv);
  if (x.cols() != W.rows()) {
    throw ShapeError("linear: weight " + W.shape_str() + " cannot take input " + x.shape_str());
  }
  const std::size_t n = x.rows(), p = W.rows(), q = W.cols();
  Matrix y(n, q);
  for (std::size_t r = 0; r < n; ++r) {
    double* out = &y(r, 0);
    for (std::size_t i = 0; i < p; ++i) {
      const double xi = x(r, i);
      if (xi == 0.0) continue;
      const double* w = W.row_span(i).data();
      for (std::size_t j = 0; j < q; ++j) out[j] += xi * w[j];
    }
  }
  Node nd{.op = Op::Linear, .a = xv.index};
  nd.param = register_param(W);
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::add_bias(Var xv, const Matrix& b) {
  const Matrix& x = value(xv);
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw ShapeError("add_bias: bias " + b.shape_str() + " for input " + x.shape_str());
  }
  Matrix y = x;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t j = 0; j < y.cols(); ++j) y(r, j) += b[j];
  Node nd{.op = Op::AddBias, .a = xv.index};
  nd.param = register_param(b);
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::relu(Var xv) {
  const Matrix& x = value(xv);
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = v > 0.0 ? v : 0.0;
  }
  Node nd{.op = Op::Relu, .a = xv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::concat(Var av, Var bv) {
  const Matrix& a = value(av);
  const Matrix& b = value(bv);
  const bool broadcast = b.rows() == 1 && a.rows() != 1;
  if (!broadcast && a.rows() != b.rows()) throw ShapeError("concat: row mismatch " + shapes(a, b));
  Matrix y(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto out = y.row_span(r);
    std::copy_n(a.row_span(r).begin(), a.cols(), out.begin());
    auto tail = b.row_span(broadcast ? 0 : r);
    std::copy(tail.begin(), tail.end(), out.begin() + a.cols());
  }
  Node nd{.op = Op::Concat, .a = av.index, .b = bv.index, .broadcast = broadcast};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat: empty list");
  std::size_t total = 0;
  Node nd{.op = Op::ConcatList};
  for (Var p : parts) {
    const Matrix& m = value(p);
    if (m.rows() != 1) throw ShapeError("concat: expected row vectors, got " + m.shape_str());
    total += m.cols();
    nd.inputs.push_back(p.index);
  }
  std::vector<double> out;
  out.reserve(total);
  for (Var p : parts) {
    auto v = value(p).values();
    out.insert(out.end(), v.begin(), v.end());
  }
  nd.value = Matrix(1, total, std::move(out));
  return push(std::move(nd));
}

Var Tape::flatten(Var xv) {
  const Matrix& x = value(xv);
  Node nd{.op = Op::Flatten, .a = xv.index};
  nd.value = Matrix(1, x.size(), std::vector<double>(x.values().begin(), x.values().end()));
  return push(std::move(nd));
}

Var Tape::pool(std::span<const Var> xs, PoolMode mode) {
  if (xs.empty()) throw UsageError("pool: empty input list");
  const Matrix& first = value(xs[0]);
  Node nd{.op = Op::Pool, .pool = mode};
  for (Var v : xs) {
    require_same_shape("pool", first, value(v));
    nd.inputs.push_back(v.index);
  }
  Matrix y = first;
  if (mode == PoolMode::Max) {
    nd.winners.assign(first.size(), 0);
    for (std::uint32_t k = 1; k < xs.size(); ++k) {
      const Matrix& m = value(xs[k]);
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (m[i] > y[i]) {
          y[i] = m[i];
          nd.winners[i] = k;
        }
      }
    }
  } else {
    std::vector<double> column(xs.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (std::size_t k = 0; k < xs.size(); ++k) column[k] = value(xs[k])[i];
      y[i] = order_free_mean(column);
    }
  }
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::pool_rows(Var xv, PoolMode mode) {
  const Matrix& x = value(xv);
  if (x.rows() == 0) throw UsageError("pool_rows: no rows");
  Node nd{.op = Op::PoolRows, .a = xv.index, .pool = mode};
  const std::size_t n = x.rows(), c = x.cols();
  Matrix y(1, c);
  std::copy_n(x.row_span(0).begin(), c, y.values().begin());
  if (mode == PoolMode::Max) {
    nd.winners.assign(c, 0);
    for (std::size_t r = 1; r < n; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        if (x(r, j) > y[j]) {
          y[j] = x(r, j);
          nd.winners[j] = static_cast<std::uint32_t>(r);
        }
      }
    }
  } else {
    std::vector<double> column(n);
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t r = 0; r < n; ++r) column[r] = x(r, j);
      y[j] = order_free_mean(column);
    }
  }
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::interleave(Var av, Var bv) {
  const Matrix& a = value(av);
  const Matrix& b = value(bv);
  if (a.rows() != 1 || !a.same_shape(b)) {
    throw ShapeError("interleave: expected two equal row vectors, got " + shapes(a, b));
  }
  Matrix y(a.cols(), 2);
  for (std::size_t d = 0; d < a.cols(); ++d) {
    y(d, 0) = a[d];
    y(d, 1) = b[d];
  }
  Node nd{.op = Op::Interleave, .a = av.index, .b = bv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::add(Var av, Var bv) {
  const Matrix& a = value(av);
  const Matrix& b = value(bv);
  require_same_shape("add", a, b);
  Matrix y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  Node nd{.op = Op::Add, .a = av.index, .b = bv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::sub(Var av, Var bv) {
  const Matrix& a = value(av);
  const Matrix& b = value(bv);
  require_same_shape("sub", a, b);
  Matrix y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b[i];
  Node nd{.op = Op::Sub, .a = av.index, .b = bv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::mul(Var av, Var bv) {
  const Matrix& a = value(av);
  const Matrix& b = value(bv);
  require_same_shape("mul", a, b);
  Matrix y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b[i];
  Node nd{.op = Op::Mul, .a = av.index, .b = bv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::div(Var av, Var bv) {
  const Matrix& a = value(av);
  const Matrix& b = value(bv);
  require_same_shape("div", a, b);
  Matrix y = a;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (b[i] == 0.0) throw DomainError("div: division by zero");
    y[i] /= b[i];
  }
  Node nd{.op = Op::Div, .a = av.index, .b = bv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::scale(Var xv, double s) {
  Matrix y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
  Node nd{.op = Op::Scale, .a = xv.index, .aux = s};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::sum(Var xv) {
  const Matrix& x = value(xv);
  double s = 0.0;
  for (double v : x.values()) s += v;
  Node nd{.op = Op::Sum, .a = xv.index};
  nd.value = Matrix(1, 1, s);
  return push(std::move(nd));
}

Var Tape::sqrt(Var xv) {
  Matrix y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) throw DomainError("sqrt: negative input");
    y[i] = std::sqrt(y[i]);
  }
  Node nd{.op = Op::Sqrt, .a = xv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::exp(Var xv) {
  Matrix y = value(xv);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(y[i]);
  Node nd{.op = Op::Exp, .a = xv.index};
  nd.value = std::move(y);
  return push(std::move(nd));
}

Var Tape::bce_with_logit(Var zv, int label) {
  if (label != 0 && label != 1) throw UsageError("bce_with_logit: label must be 0 or 1");
  const double z = scalar(zv);
  Node nd{.op = Op::Bce, .a = zv.index, .aux = static_cast<double>(label)};
  nd.value = Matrix(1, 1, gkr::bce_with_logit(z, label));
  return push(std::move(nd));
}

bool Tape::has_param(const Matrix& p) const { return param_index_.contains(&p); }

Matrix Tape::grad(const Matrix& p) const {
  auto it = param_index_.find(&p);
  if (it == param_index_.end() || grads_.empty()) return Matrix(p.rows(), p.cols());
  return grads_[static_cast<std::size_t>(it->second)];
}

void Tape::backward(Var loss) {
  const Node& top = node(loss);
  if (top.value.size() != 1) throw UsageError("backward: loss must be 1x1, got " + top.value.shape_str());

  grads_.clear();
  for (const Matrix* p : params_) grads_.emplace_back(p->rows(), p->cols());

  std::vector<Matrix> adj(nodes_.size());
  adj[loss.index] = Matrix(1, 1, 1.0);
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (adj[i].empty()) continue;
    backprop(i, adj);
    adj[i] = Matrix();
  }
}

void Tape::backprop(std::size_t i, std::vector<Matrix>& adj) {
  const Node& nd = nodes_[i];
  const Matrix& dy = adj[i];
  switch (nd.op) {
    case Op::Constant:
      break;
    case Op::Param:
      accumulate(grads_[static_cast<std::size_t>(nd.param)], dy);
      break;
    case Op::Linear: {
      const Matrix& x = nodes_[nd.a].value;
      const Matrix& W = *params_[static_cast<std::size_t>(nd.param)];
      Matrix& dW = grads_[static_cast<std::size_t>(nd.param)];
      Matrix& dx = adjoint(adj, nd.a, x);
      const std::size_t n = x.rows(), p = W.rows(), q = W.cols();
      for (std::size_t r = 0; r < n; ++r) {
        const double* g = dy.row_span(r).data();
        for (std::size_t k = 0; k < p; ++k) {
          const double* w = W.row_span(k).data();
          double* gw = &dW(k, 0);
          const double xk = x(r, k);
          double acc = 0.0;
          for (std::size_t j = 0; j < q; ++j) {
            acc += g[j] * w[j];
            gw[j] += xk * g[j];
          }
          dx(r, k) += acc;
        }
      }
      break;
    }
    case Op::AddBias: {
      Matrix& db = grads_[static_cast<std::size_t>(nd.param)];
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t j = 0; j < dy.cols(); ++j) db[j] += dy(r, j);
      accumulate(adjoint(adj, nd.a, dy), dy);
      break;
    }
    case Op::Relu: {
      const Matrix& x = nodes_[nd.a].value;
      Matrix& dx = adjoint(adj, nd.a, x);
      for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] > 0.0) dx[k] += dy[k];
      break;
    }
    case Op::Concat: {
      const Matrix& a = nodes_[nd.a].value;
      const Matrix& b = nodes_[nd.b].value;
      Matrix& da = adjoint(adj, nd.a, a);
      Matrix& db = adjoint(adj, nd.b, b);
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        for (std::size_t j = 0; j < a.cols(); ++j) da(r, j) += dy(r, j);
        const std::size_t br = nd.broadcast ? 0 : r;
        for (std::size_t j = 0; j < b.cols(); ++j) db(br, j) += dy(r, a.cols() + j);
      }
      break;
    }
    case Op::ConcatList: {
      std::size_t offset = 0;
      for (std::uint32_t in : nd.inputs) {
        const Matrix& part = nodes_[in].value;
        Matrix& d = adjoint(adj, in, part);
        for (std::size_t j = 0; j < part.size(); ++j) d[j] += dy[offset + j];
        offset += part.size();
      }
      break;
    }
    case Op::Flatten: {
      Matrix& dx = adjoint(adj, nd.a, nodes_[nd.a].value);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k];
      break;
    }
    case Op::Pool: {
      if (nd.pool == PoolMode::Max) {
        for (std::size_t k = 0; k < dy.size(); ++k) {
          const std::uint32_t src = nd.inputs[nd.winners[k]];
          adjoint(adj, src, nodes_[src].value)[k] += dy[k];
        }
      } else {
        const double inv = 1.0 / static_cast<double>(nd.inputs.size());
        for (std::uint32_t in : nd.inputs) {
          Matrix& d = adjoint(adj, in, nodes_[in].value);
          for (std::size_t k = 0; k < dy.size(); ++k) d[k] += dy[k] * inv;
        }
      }
      break;
    }
    case Op::PoolRows: {
      const Matrix& x = nodes_[nd.a].value;
      Matrix& dx = adjoint(adj, nd.a, x);
      if (nd.pool == PoolMode::Max) {
        for (std::size_t j = 0; j < x.cols(); ++j) dx(nd.winners[j], j) += dy[j];
      } else {
        const double inv = 1.0 / static_cast<double>(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t j = 0; j < x.cols(); ++j) dx(r, j) += dy[j] * inv;
      }
      break;
    }
    case Op::Interleave: {
      Matrix& da = adjoint(adj, nd.a, nodes_[nd.a].value);
      Matrix& db = adjoint(adj, nd.b, nodes_[nd.b].value);
      for (std::size_t d = 0; d < dy.rows(); ++d) {
        da[d] += dy(d, 0);
        db[d] += dy(d, 1);
      }
      break;
    }
    case Op::Add:
    case Op::Sub: {
      const double sign = nd.op == Op::Add ? 1.0 : -1.0;
      Matrix& da = adjoint(adj, nd.a, dy);
      for (std::size_t k = 0; k < dy.size(); ++k) da[k] += dy[k];
      Matrix& db = adjoint(adj, nd.b, dy);
      for (std::size_t k = 0; k < dy.size(); ++k) db[k] += sign * dy[k];
      break;
    }
    case Op::Mul: {
      const Matrix& a = nodes_[nd.a].value;
      const Matrix& b = nodes_[nd.b].value;
      Matrix& da = adjoint(adj, nd.a, a);
      for (std::size_t k = 0; k < dy.size(); ++k) da[k] += dy[k] * b[k];
      Matrix& db = adjoint(adj, nd.b, b);
      for (std::size_t k = 0; k < dy.size(); ++k) db[k] += dy[k] * a[k];
      break;
    }
    case Op::Div: {
      const Matrix& a = nodes_[nd.a].value;
      const Matrix& b = nodes_[nd.b].value;
      Matrix& da = adjoint(adj, nd.a, a);
      for (std::size_t k = 0; k < dy.size(); ++k) da[k] += dy[k] / b[k];
      Matrix& db = adjoint(adj, nd.b, b);
      for (std::size_t k = 0; k < dy.size(); ++k) db[k] -= dy[k] * a[k] / (b[k] * b[k]);
      break;
    }
    case Op::Scale: {
      Matrix& dx = adjoint(adj, nd.a, dy);
      for (std::size_t k = 0; k < dy.size(); ++k) dx[k] += nd.aux * dy[k];
      break;
    }
    case Op::Sum: {
      Matrix& dx = adjoint(adj, nd.a, nodes_[nd.a].value);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[0];
      break;
    }
    case Op::Sqrt: {
      // d√x at x = 0 is taken as 0 so collapsed metrics stay finite.
      Matrix& dx = adjoint(adj, nd.a, dy);
      for (std::size_t k = 0; k < dy.size(); ++k)
        if (nd.value[k] > 0.0) dx[k] += dy[k] / (2.0 * nd.value[k]);
      break;
    }
    case Op::Exp: {
      Matrix& dx = adjoint(adj, nd.a, dy);
      for (std::size_t k = 0; k < dy.size(); ++k) dx[k] += dy[k] * nd.value[k];
      break;
    }
    case Op::Bce: {
      const double z = nodes_[nd.a].value[0];
      adjoint(adj, nd.a, dy)[0] += dy[0] * (sigmoid(z) - nd.aux);
      break;
    }
  }
}

}  // namespace gkr
