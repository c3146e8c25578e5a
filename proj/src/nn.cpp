#include "lap/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "lap/errors.hpp"

namespace lap {

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= size_t(d);
  return Tensor(shape, std::vector<double>(n, 0.0));
}

Tensor Tensor::vec(std::vector<double> v) {
  int n = int(v.size());
  return Tensor({n}, std::move(v));
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw ShapeMismatch(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

// --- ParamStore ---------------------------------------------------------------

Param& ParamStore::create(const std::string& name, const std::vector<int>& shape) {
  if (params_.count(name)) throw Error("parameter '" + name + "' already exists");
  Param p;
  p.value = Tensor::zeros(shape);
  p.grad = Tensor::zeros(shape);
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

size_t ParamStore::n_params() const {
  size_t n = 0;
  for (const auto& [_, p] : params_) n += size_t(p.value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [_, p] : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
  grads_live = false;
}

// --- Graph ---------------------------------------------------------------------

Graph::Id Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Id(nodes_.size() - 1);
}

Tensor& Graph::grad_of(Id id) {
  Node& n = nodes_[size_t(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

Graph::Id Graph::constant(Tensor v) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  return push(std::move(n));
}

Graph::Id Graph::param(ParamStore& store, const std::string& name) {
  Node n;
  n.op = Op::ParamRef;
  n.param = &store.at(name);
  n.value = n.param->value;
  stores_.insert(&store);
  return push(std::move(n));
}

Graph::Id Graph::add(Id a, Id b) {
  require_same(value(a), value(b), "add");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < n.value.size(); ++i) n.value[i] += vb[i];
  return push(std::move(n));
}

Graph::Id Graph::sub(Id a, Id b) {
  require_same(value(a), value(b), "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < n.value.size(); ++i) n.value[i] -= vb[i];
  return push(std::move(n));
}

Graph::Id Graph::mul(Id a, Id b) {
  require_same(value(a), value(b), "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < n.value.size(); ++i) n.value[i] *= vb[i];
  return push(std::move(n));
}

Graph::Id Graph::absdiff(Id a, Id b) {
  require_same(value(a), value(b), "absdiff");
  Node n;
  n.op = Op::AbsDiff;
  n.a = a;
  n.b = b;
  n.value = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < n.value.size(); ++i) n.value[i] = std::abs(n.value[i] - vb[i]);
  return push(std::move(n));
}

Graph::Id Graph::concat(const std::vector<Id>& parts) {
  Node n;
  n.op = Op::Concat;
  n.list = parts;
  std::vector<double> out;
  for (Id p : parts) {
    const Tensor& v = value(p);
    out.insert(out.end(), v.data.begin(), v.data.end());
  }
  n.value = Tensor::vec(std::move(out));
  return push(std::move(n));
}

Graph::Id Graph::slice(Id v, int start, int len) {
  const Tensor& t = value(v);
  if (start < 0 || start + len > t.size())
    throw ShapeMismatch("slice [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") of " + t.shape_str());
  Node n;
  n.op = Op::Slice;
  n.a = v;
  n.i0 = start;
  n.i1 = len;
  n.value = Tensor::vec(std::vector<double>(t.data.begin() + start,
                                            t.data.begin() + start + len));
  return push(std::move(n));
}

Graph::Id Graph::matvec(Id W, Id x) {
  const Tensor& w = value(W);
  const Tensor& v = value(x);
  if (w.shape.size() != 2 || w.shape[1] != v.size())
    throw ShapeMismatch("matvec: " + w.shape_str() + " · " + v.shape_str());
  int rows = w.shape[0], cols = w.shape[1];
  Node n;
  n.op = Op::MatVec;
  n.a = W;
  n.b = x;
  n.value = Tensor::zeros({rows});
  for (int r = 0; r < rows; ++r) {
    double acc = 0;
    const double* wr = &w.data[size_t(r) * cols];
    for (int c = 0; c < cols; ++c) acc += wr[c] * v[c];
    n.value[r] = acc;
  }
  return push(std::move(n));
}

Graph::Id Graph::matvec_t(Id W, Id x) {
  const Tensor& w = value(W);
  const Tensor& v = value(x);
  if (w.shape.size() != 2 || w.shape[0] != v.size())
    throw ShapeMismatch("matvec_t: " + w.shape_str() + "ᵀ · " + v.shape_str());
  int rows = w.shape[0], cols = w.shape[1];
  Node n;
  n.op = Op::MatVecT;
  n.a = W;
  n.b = x;
  n.value = Tensor::zeros({cols});
  for (int r = 0; r < rows; ++r) {
    const double* wr = &w.data[size_t(r) * cols];
    double vr = v[r];
    for (int c = 0; c < cols; ++c) n.value[c] += wr[c] * vr;
  }
  return push(std::move(n));
}

Graph::Id Graph::affine(Id W, Id x, Id b) { return add(matvec(W, x), b); }

Graph::Id Graph::bilinear(Id a, Id W, Id b) {
  const Tensor& va = value(a);
  const Tensor& w = value(W);
  const Tensor& vb = value(b);
  if (w.shape.size() != 2 || w.shape[0] != va.size() || w.shape[1] != vb.size())
    throw ShapeMismatch("bilinear: " + va.shape_str() + "ᵀ·" + w.shape_str() + "·" +
                        vb.shape_str());
  int rows = w.shape[0], cols = w.shape[1];
  double acc = 0;
  for (int r = 0; r < rows; ++r) {
    const double* wr = &w.data[size_t(r) * cols];
    double rowdot = 0;
    for (int c = 0; c < cols; ++c) rowdot += wr[c] * vb[c];
    acc += va[r] * rowdot;
  }
  Node n;
  n.op = Op::Bilinear;
  n.a = a;
  n.b = b;
  n.i0 = W;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

namespace {
template <typename F>
Tensor map_tensor(const Tensor& t, F f) {
  Tensor out = t;
  for (double& x : out.data) x = f(x);
  return out;
}
}  // namespace

Graph::Id Graph::relu(Id v) {
  Node n;
  n.op = Op::Relu;
  n.a = v;
  n.value = map_tensor(value(v), [](double x) { return x > 0 ? x : 0.0; });
  return push(std::move(n));
}

Graph::Id Graph::sigmoid(Id v) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = v;
  n.value = map_tensor(value(v), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return push(std::move(n));
}

Graph::Id Graph::tanh_(Id v) {
  Node n;
  n.op = Op::Tanh;
  n.a = v;
  n.value = map_tensor(value(v), [](double x) { return std::tanh(x); });
  return push(std::move(n));
}

Graph::Id Graph::sqrt_(Id v) {
  Node n;
  n.op = Op::Sqrt;
  n.a = v;
  n.value = map_tensor(value(v), [](double x) { return std::sqrt(x); });
  return push(std::move(n));
}

Graph::Id Graph::softmax(Id v) {
  const Tensor& t = value(v);
  double mx = *std::max_element(t.data.begin(), t.data.end());
  double z = 0;
  Tensor out = t;
  for (double& x : out.data) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : out.data) x /= z;
  Node n;
  n.op = Op::Softmax;
  n.a = v;
  n.value = std::move(out);
  return push(std::move(n));
}

Graph::Id Graph::sum(Id v) {
  double acc = 0;
  for (double x : value(v).data) acc += x;
  Node n;
  n.op = Op::Sum;
  n.a = v;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Graph::Id Graph::max_reduce(Id v) {
  const Tensor& t = value(v);
  if (t.size() == 0) throw ShapeMismatch("max_reduce of empty tensor");
  int arg = 0;
  for (int i = 1; i < t.size(); ++i)
    if (t[i] > t[arg]) arg = i;  // strict: ties keep the lowest index
  Node n;
  n.op = Op::MaxReduce;
  n.a = v;
  n.i0 = arg;
  n.value = Tensor::scalar(t[arg]);
  return push(std::move(n));
}

Graph::Id Graph::scale(Id v, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = v;
  n.x0 = c;
  n.value = map_tensor(value(v), [c](double x) { return c * x; });
  return push(std::move(n));
}

Graph::Id Graph::log_(Id v) {
  Node n;
  n.op = Op::Log;
  n.a = v;
  n.value = map_tensor(value(v), [](double x) { return std::log(std::max(x, 1e-300)); });
  return push(std::move(n));
}

Graph::Id Graph::dot(Id a, Id b) {
  require_same(value(a), value(b), "dot");
  double acc = 0;
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
  Node n;
  n.op = Op::Dot;
  n.a = a;
  n.b = b;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Graph::Id Graph::pack(const std::vector<Id>& scalars) {
  Node n;
  n.op = Op::Pack;
  n.list = scalars;
  std::vector<double> out;
  out.reserve(scalars.size());
  for (Id s : scalars) {
    if (value(s).size() != 1) throw ShapeMismatch("pack expects scalars");
    out.push_back(value(s)[0]);
  }
  n.value = Tensor::vec(std::move(out));
  return push(std::move(n));
}

Graph::Id Graph::pick(Id v, int index) {
  const Tensor& t = value(v);
  if (index < 0 || index >= t.size())
    throw ShapeMismatch("pick " + std::to_string(index) + " from " + t.shape_str());
  Node n;
  n.op = Op::Pick;
  n.a = v;
  n.i0 = index;
  n.value = Tensor::scalar(t[index]);
  return push(std::move(n));
}

Graph::Id Graph::lincomb(const std::vector<Id>& cols, Id w) {
  const Tensor& wt = value(w);
  if (int(cols.size()) != wt.size())
    throw ShapeMismatch("lincomb: " + std::to_string(cols.size()) + " columns vs weights " +
                        wt.shape_str());
  if (cols.empty()) throw ShapeMismatch("lincomb of zero columns");
  Node n;
  n.op = Op::Lincomb;
  n.list = cols;
  n.a = w;
  n.value = Tensor::zeros(value(cols[0]).shape);
  for (size_t k = 0; k < cols.size(); ++k) {
    const Tensor& c = value(cols[k]);
    require_same(c, n.value, "lincomb");
    double wk = wt[int(k)];
    for (int i = 0; i < c.size(); ++i) n.value[i] += wk * c[i];
  }
  return push(std::move(n));
}

Graph::Id Graph::mean_cols(const std::vector<Id>& cols) {
  if (cols.empty()) throw ShapeMismatch("mean of zero columns");
  Id w = constant(Tensor({int(cols.size())},
                         std::vector<double>(cols.size(), 1.0 / double(cols.size()))));
  return lincomb(cols, w);
}

Graph::Id Graph::div_by_scalar(Id v, Id s) {
  if (value(s).size() != 1) throw ShapeMismatch("div_by_scalar needs scalar divisor");
  double d = value(s)[0];
  Node n;
  n.op = Op::DivScalar;
  n.a = v;
  n.b = s;
  n.value = map_tensor(value(v), [d](double x) { return x / d; });
  return push(std::move(n));
}

void Graph::backprop_node(Id id) {
  Node& n = nodes_[size_t(id)];
  if (n.grad.empty()) return;  // not on the loss path
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Constant:
      break;
    case Op::ParamRef:
      if (n.param->trainable) {
        for (int i = 0; i < g.size(); ++i) n.param->grad[i] += g[i];
      }
      break;
    case Op::Add: {
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      for (int i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case Op::Sub: {
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      for (int i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] -= g[i];
      }
      break;
    }
    case Op::Mul: {
      const Tensor& va = value(n.a);
      const Tensor& vb = value(n.b);
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      for (int i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * vb[i];
        gb[i] += g[i] * va[i];
      }
      break;
    }
    case Op::AbsDiff: {
      const Tensor& va = value(n.a);
      const Tensor& vb = value(n.b);
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      for (int i = 0; i < g.size(); ++i) {
        double s = va[i] > vb[i] ? 1.0 : (va[i] < vb[i] ? -1.0 : 0.0);
        ga[i] += g[i] * s;
        gb[i] -= g[i] * s;
      }
      break;
    }
    case Op::Concat: {
      int off = 0;
      for (int p : n.list) {
        Tensor& gp = grad_of(p);
        for (int i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
        off += gp.size();
      }
      break;
    }
    case Op::Slice: {
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < n.i1; ++i) ga[n.i0 + i] += g[i];
      break;
    }
    case Op::MatVec: {
      const Tensor& w = value(n.a);
      const Tensor& x = value(n.b);
      Tensor& gw = grad_of(n.a);
      Tensor& gx = grad_of(n.b);
      int rows = w.shape[0], cols = w.shape[1];
      for (int r = 0; r < rows; ++r) {
        double gr = g[r];
        if (gr == 0) continue;
        double* gwr = &gw.data[size_t(r) * cols];
        const double* wr = &w.data[size_t(r) * cols];
        for (int c = 0; c < cols; ++c) {
          gwr[c] += gr * x[c];
          gx[c] += gr * wr[c];
        }
      }
      break;
    }
    case Op::MatVecT: {
      const Tensor& w = value(n.a);
      const Tensor& x = value(n.b);
      Tensor& gw = grad_of(n.a);
      Tensor& gx = grad_of(n.b);
      int rows = w.shape[0], cols = w.shape[1];
      for (int r = 0; r < rows; ++r) {
        const double* wr = &w.data[size_t(r) * cols];
        double* gwr = &gw.data[size_t(r) * cols];
        double xr = x[r];
        double acc = 0;
        for (int c = 0; c < cols; ++c) {
          gwr[c] += g[c] * xr;
          acc += g[c] * wr[c];
        }
        gx[r] += acc;
      }
      break;
    }
    case Op::Bilinear: {
      const Tensor& va = value(n.a);
      const Tensor& vb = value(n.b);
      const Tensor& w = value(Id(n.i0));
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      Tensor& gw = grad_of(Id(n.i0));
      int rows = w.shape[0], cols = w.shape[1];
      double gs = g[0];
      for (int r = 0; r < rows; ++r) {
        const double* wr = &w.data[size_t(r) * cols];
        double* gwr = &gw.data[size_t(r) * cols];
        double rowdot = 0;
        for (int c = 0; c < cols; ++c) {
          rowdot += wr[c] * vb[c];
          gwr[c] += gs * va[r] * vb[c];
          gb[c] += gs * va[r] * wr[c];
        }
        ga[r] += gs * rowdot;
      }
      break;
    }
    case Op::Relu: {
      const Tensor& x = value(n.a);
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < g.size(); ++i) ga[i] += x[i] > 0 ? g[i] : 0.0;
      break;
    }
    case Op::Sigmoid: {
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < g.size(); ++i) {
        double y = n.value[i];
        ga[i] += g[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::Tanh: {
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < g.size(); ++i) {
        double y = n.value[i];
        ga[i] += g[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::Sqrt: {
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < g.size(); ++i)
        ga[i] += g[i] / (2.0 * std::max(n.value[i], 1e-12));
      break;
    }
    case Op::Softmax: {
      Tensor& ga = grad_of(n.a);
      double gy = 0;
      for (int i = 0; i < g.size(); ++i) gy += g[i] * n.value[i];
      for (int i = 0; i < g.size(); ++i) ga[i] += n.value[i] * (g[i] - gy);
      break;
    }
    case Op::Sum: {
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < ga.size(); ++i) ga[i] += g[0];
      break;
    }
    case Op::MaxReduce: {
      grad_of(n.a)[n.i0] += g[0];
      break;
    }
    case Op::Scale: {
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * n.x0;
      break;
    }
    case Op::Log: {
      const Tensor& x = value(n.a);
      Tensor& ga = grad_of(n.a);
      for (int i = 0; i < g.size(); ++i) ga[i] += g[i] / std::max(x[i], 1e-300);
      break;
    }
    case Op::Dot: {
      const Tensor& va = value(n.a);
      const Tensor& vb = value(n.b);
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      double gs = g[0];
      for (int i = 0; i < va.size(); ++i) {
        ga[i] += gs * vb[i];
        gb[i] += gs * va[i];
      }
      break;
    }
    case Op::Pack: {
      for (size_t k = 0; k < n.list.size(); ++k) grad_of(n.list[k])[0] += g[int(k)];
      break;
    }
    case Op::Pick: {
      grad_of(n.a)[n.i0] += g[0];
      break;
    }
    case Op::Lincomb: {
      const Tensor& w = value(n.a);
      Tensor& gw = grad_of(n.a);
      for (size_t k = 0; k < n.list.size(); ++k) {
        const Tensor& c = value(n.list[k]);
        Tensor& gc = grad_of(n.list[k]);
        double wk = w[int(k)];
        double acc = 0;
        for (int i = 0; i < g.size(); ++i) {
          gc[i] += g[i] * wk;
          acc += g[i] * c[i];
        }
        gw[int(k)] += acc;
      }
      break;
    }
    case Op::DivScalar: {
      const Tensor& x = value(n.a);
      double s = value(n.b)[0];
      Tensor& ga = grad_of(n.a);
      Tensor& gs = grad_of(n.b);
      double acc = 0;
      for (int i = 0; i < g.size(); ++i) {
        ga[i] += g[i] / s;
        acc += g[i] * x[i];
      }
      gs[0] -= acc / (s * s);
      break;
    }
  }
}

void Graph::backward(Id loss) {
  if (value(loss).size() != 1)
    throw ShapeMismatch("backward requires a scalar loss, got " + value(loss).shape_str());
  grad_of(loss)[0] = 1.0;
  for (Id id = loss; id >= 0; --id) backprop_node(id);
  for (ParamStore* s : stores_) s->grads_live = true;
}

// --- LSTM ----------------------------------------------------------------------

std::pair<Graph::Id, Graph::Id> lstm_step(Graph& g, const LstmRefs& p, Graph::Id x,
                                          Graph::Id h, Graph::Id c) {
  int hidden = g.value(c).size();
  Graph::Id z = g.add(g.add(g.matvec(p.w_x, x), g.matvec(p.w_h, h)), p.b);
  Graph::Id gi = g.sigmoid(g.slice(z, 0, hidden));
  Graph::Id gf = g.sigmoid(g.slice(z, hidden, hidden));
  Graph::Id gc = g.tanh_(g.slice(z, 2 * hidden, hidden));
  Graph::Id go = g.sigmoid(g.slice(z, 3 * hidden, hidden));
  Graph::Id c_next = g.add(g.mul(gf, c), g.mul(gi, gc));
  Graph::Id h_next = g.mul(go, g.tanh_(c_next));
  return {h_next, c_next};
}

// --- Adam ------------------------------------------------------------------------

void Adam::step(ParamStore& store, const AdamConfig& cfg) {
  if (!store.grads_live)
    throw MissingGradient("optimizer step without a backward pass");
  double sq = 0;
  for (const auto& [_, p] : store.all()) {
    if (!p.trainable) continue;
    for (double gv : p.grad.data) sq += gv * gv;
  }
  double norm = std::sqrt(sq);
  double scale = (cfg.clip_norm > 0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  ++t_;
  double bc1 = 1.0 - std::pow(cfg.beta1, double(t_));
  double bc2 = 1.0 - std::pow(cfg.beta2, double(t_));
  for (auto& [name, p] : store.all()) {
    if (!p.trainable) continue;
    State& st = state_[name];
    if (st.m.empty()) {
      st.m = Tensor::zeros(p.value.shape);
      st.v = Tensor::zeros(p.value.shape);
    }
    for (int i = 0; i < p.value.size(); ++i) {
      double gv = p.grad[i] * scale;
      st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * gv;
      st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * gv * gv;
      double mhat = st.m[i] / bc1;
      double vhat = st.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grads();
}

// --- Gradient check -----------------------------------------------------------------

GradCheckReport grad_check(const std::function<Graph::Id(Graph&, ParamStore&)>& loss_fn,
                           ParamStore& params, double tolerance, int coords_per_param,
                           uint64_t seed) {
  params.zero_grads();
  {
    Graph g;
    Graph::Id loss = loss_fn(g, params);
    g.backward(loss);
  }
  // keep analytic grads aside, then probe numerically
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, p] : params.all()) analytic[name] = p.grad;

  auto eval = [&]() {
    Graph g;
    return g.value(loss_fn(g, params))[0];
  };

  GradCheckReport rep;
  Rng rng(seed);
  const double h = 1e-5;
  for (auto& [name, p] : params.all()) {
    if (!p.trainable) continue;
    int n = p.value.size();
    std::vector<int> coords;
    if (n <= coords_per_param) {
      for (int i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::set<int> chosen;
      while (int(chosen.size()) < coords_per_param)
        chosen.insert(int(rng.uniform_index(size_t(n))));
      coords.assign(chosen.begin(), chosen.end());
    }
    for (int i : coords) {
      double orig = p.value[i];
      p.value[i] = orig + h;
      double up = eval();
      p.value[i] = orig - h;
      double down = eval();
      p.value[i] = orig;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[name][i];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = i;
      }
    }
  }
  rep.pass = rep.max_rel_err < tolerance;
  params.zero_grads();
  return rep;
}

// --- init helpers ----------------------------------------------------------------------

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& x : t.data) x = rng.uniform(lo, hi);
}

void fill_zero(Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); }

// --- checkpoint -------------------------------------------------------------------------

void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::map<std::string, std::string>& sidecar) {
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  uint64_t offset = 0;
  for (const auto& [name, p] : store.all()) {
    manifest.push_back({{"name", name},
                        {"shape", p.value.shape},
                        {"dtype", "f64"},
                        {"offset", offset},
                        {"count", p.value.size()},
                        {"trainable", p.trainable}});
    offset += uint64_t(p.value.size());
  }
  std::string mtext = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileUnreadable("cannot write " + path);
  const char magic[8] = {'L', 'A', 'P', 'C', 'K', 'P', 'T', '1'};
  out.write(magic, 8);
  uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(mtext.data(), std::streamsize(mlen));
  for (const auto& [_, p] : store.all())
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              std::streamsize(p.value.data.size() * sizeof(double)));
  nlohmann::ordered_json meta(sidecar);
  std::ofstream side(path + ".meta.json");
  side << meta.dump(2) << "\n";
}

void load_checkpoint(ParamStore& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileUnreadable("cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "LAPCKPT1", 8) != 0)
    throw FileUnreadable(path + " is not a checkpoint");
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), std::streamsize(mlen));
  auto manifest = nlohmann::json::parse(mtext);
  for (const auto& entry : manifest) {
    std::string name = entry.at("name");
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    Param& p = store.has(name) ? store.at(name) : store.create(name, shape);
    if (p.value.shape != shape)
      throw ShapeMismatch("checkpoint parameter " + name + " has shape mismatch");
    p.trainable = entry.value("trainable", true);
    in.read(reinterpret_cast<char*>(p.value.data.data()),
            std::streamsize(p.value.data.size() * sizeof(double)));
  }
}

std::map<std::string, std::string> load_checkpoint_sidecar(const std::string& path) {
  std::ifstream in(path + ".meta.json");
  if (!in) throw FileUnreadable("cannot read " + path + ".meta.json");
  nlohmann::json j;
  in >> j;
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value().get<std::string>();
  return out;
}

}  // namespace lap
