#ifndef LAP_NN_HPP
#define LAP_NN_HPP

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lap/rng.hpp"

namespace lap {

// Dense tensor of doubles. Everything in the toolkit is 64-bit; the desk
// scale never makes 32-bit worthwhile and gradient checks want the headroom.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(const std::vector<int>& shape);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vec(std::vector<double> v);

  int size() const { return int(data.size()); }
  bool empty() const { return data.empty(); }
  double& operator[](int i) { return data[size_t(i)]; }
  double operator[](int i) const { return data[size_t(i)]; }

  std::string shape_str() const;
};

struct Param {
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

class ParamStore {
 public:
  Param& create(const std::string& name, const std::vector<int>& shape);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  std::vector<std::string> names() const;
  size_t n_params() const;
  void zero_grads();

  // deterministic iteration (sorted by name)
  std::map<std::string, Param>& all() { return params_; }
  const std::map<std::string, Param>& all() const { return params_; }

  bool grads_live = false;  // set by Graph::backward, cleared by the optimizer

 private:
  std::map<std::string, Param> params_;
};

// Reverse-mode tape. One Graph per forward pass; ops evaluate eagerly and
// backward() walks the tape in reverse. Node handles are plain ints.
class Graph {
 public:
  using Id = int;

  Id constant(Tensor v);
  Id constant_vec(const std::vector<double>& v) { return constant(Tensor::vec(v)); }
  Id scalar(double v) { return constant(Tensor::scalar(v)); }
  Id param(ParamStore& store, const std::string& name);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);       // elementwise product
  Id absdiff(Id a, Id b);   // |a - b|, subgradient 0 at equal coordinates
  Id concat(const std::vector<Id>& parts);
  Id slice(Id v, int start, int len);
  Id matvec(Id W, Id x);              // [n,m] · [m] -> [n]
  Id matvec_t(Id W, Id x);            // Wᵀ·x: [n,m] , [n] -> [m]
  Id affine(Id W, Id x, Id b);        // W·x + b
  Id bilinear(Id a, Id W, Id b);      // scalar aᵀWb
  Id relu(Id v);
  Id sigmoid(Id v);
  Id tanh_(Id v);
  Id sqrt_(Id v);
  Id softmax(Id v);
  Id sum(Id v);                        // scalar Σ v_i
  Id max_reduce(Id v);                 // scalar max; gradient to first argmax
  Id scale(Id v, double c);
  Id neg(Id v) { return scale(v, -1.0); }
  Id log_(Id v);
  Id dot(Id a, Id b);                  // scalar
  Id pack(const std::vector<Id>& scalars);
  Id pick(Id v, int index);            // scalar v[index]
  Id lincomb(const std::vector<Id>& cols, Id w);  // Σ_k w_k · col_k
  Id mean_cols(const std::vector<Id>& cols);
  Id div_by_scalar(Id v, Id s);

  const Tensor& value(Id id) const { return nodes_[size_t(id)].value; }
  void backward(Id loss);
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Constant, ParamRef, Add, Sub, Mul, AbsDiff, Concat, Slice, MatVec, MatVecT,
    Bilinear, Relu, Sigmoid, Tanh, Sqrt, Softmax, Sum, MaxReduce, Scale, Log, Dot,
    Pack, Pick, Lincomb, DivScalar
  };
  struct Node {
    Tensor value;
    Tensor grad;
    Op op;
    int a = -1, b = -1;
    std::vector<int> list;
    int i0 = 0, i1 = 0;
    double x0 = 0;
    Param* param = nullptr;
  };

  Id push(Node n);
  Tensor& grad_of(Id id);
  void backprop_node(Id id);

  std::vector<Node> nodes_;
  std::set<ParamStore*> stores_;
};

// Standard LSTM cell built from tape primitives: gates in i,f,g,o order from
// stacked weights W_x [4H,D], W_h [4H,H], bias [4H].
struct LstmRefs {
  Graph::Id w_x, w_h, b;
};
std::pair<Graph::Id, Graph::Id> lstm_step(Graph& g, const LstmRefs& p, Graph::Id x,
                                          Graph::Id h, Graph::Id c);

// Adam with global-norm clipping. Zeroes gradients after each step.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;
};

class Adam {
 public:
  void step(ParamStore& store, const AdamConfig& cfg);

 private:
  struct State {
    Tensor m, v;
  };
  std::map<std::string, State> state_;
  long t_ = 0;
};

// Central finite-difference verification, sampled coordinates per parameter.
struct GradCheckReport {
  double max_rel_err = 0;
  std::string worst_param;
  int worst_index = -1;
  bool pass = false;
};

GradCheckReport grad_check(const std::function<Graph::Id(Graph&, ParamStore&)>& loss_fn,
                           ParamStore& params, double tolerance,
                           int coords_per_param = 64, uint64_t seed = 99);

// Initialization helpers.
void fill_uniform(Tensor& t, Rng& rng, double lo, double hi);
void fill_zero(Tensor& t);

// Checkpoint: binary manifest + raw little-endian doubles, with a JSON text
// sidecar at <path>.meta.json.
void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::map<std::string, std::string>& sidecar);
void load_checkpoint(ParamStore& store, const std::string& path);
std::map<std::string, std::string> load_checkpoint_sidecar(const std::string& path);

}  // namespace lap

#endif
