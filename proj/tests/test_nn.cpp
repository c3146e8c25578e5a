#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "lap/errors.hpp"
#include "lap/nn.hpp"

using namespace lap;

namespace {

ParamStore make_store(std::initializer_list<std::pair<std::string, std::vector<int>>> specs,
                      uint64_t seed = 5) {
  ParamStore store;
  Rng rng(seed);
  for (const auto& [name, shape] : specs) {
    Param& p = store.create(name, shape);
    fill_uniform(p.value, rng, -0.8, 0.8);
  }
  return store;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("basic forward values") {
  Graph g;
  CHECK(g.value(g.sigmoid(g.scalar(0.0)))[0] == doctest::Approx(0.5));
  CHECK(g.value(g.tanh_(g.scalar(0.0)))[0] == doctest::Approx(0.0));
  CHECK(g.value(g.relu(g.scalar(-2.0)))[0] == 0.0);

  // softmax over equal logits of length n -> each 1/n
  Graph::Id sm = g.softmax(g.constant_vec({1.7, 1.7, 1.7, 1.7}));
  for (int i = 0; i < 4; ++i) CHECK(g.value(sm)[i] == doctest::Approx(0.25));

  // softmax is a probability distribution
  Graph::Id sm2 = g.softmax(g.constant_vec({-3.0, 0.5, 11.0, 2.0}));
  double total = 0;
  for (int i = 0; i < 4; ++i) {
    CHECK(g.value(sm2)[i] >= 0.0);
    total += g.value(sm2)[i];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(g.value(g.absdiff(g.constant_vec({1, 4}), g.constant_vec({3, 1})))[0] == 2.0);
  CHECK(g.value(g.max_reduce(g.constant_vec({1, 7, 7, 2})))[0] == 7.0);
}

TEST_CASE("absdiff subgradient at equality is zero") {
  ParamStore store = make_store({{"p", {3}}});
  store.at("p").value = Tensor::vec({1.0, 2.0, 3.0});
  Graph g;
  Graph::Id p = g.param(store, "p");
  Graph::Id q = g.constant_vec({1.0, 5.0, 3.0});
  g.backward(g.sum(g.absdiff(p, q)));
  CHECK(store.at("p").grad[0] == 0.0);   // equal coordinate: subgradient 0
  CHECK(store.at("p").grad[1] == -1.0);
  CHECK(store.at("p").grad[2] == 0.0);
}

TEST_CASE("max_reduce ties route gradient to the lowest index") {
  ParamStore store = make_store({{"p", {3}}});
  store.at("p").value = Tensor::vec({2.0, 2.0, 1.0});
  Graph g;
  g.backward(g.max_reduce(g.param(store, "p")));
  CHECK(store.at("p").grad[0] == 1.0);
  CHECK(store.at("p").grad[1] == 0.0);
}

TEST_CASE("shape mismatches are reported") {
  Graph g;
  Graph::Id a = g.constant_vec({1, 2, 3});
  Graph::Id b = g.constant_vec({1, 2});
  CHECK_THROWS_AS(g.add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(g.matvec(a, b), ShapeMismatch);
  CHECK_THROWS_AS(g.backward(a), ShapeMismatch);  // loss must be scalar
}

TEST_CASE("forward passes do not mutate inputs") {
  Graph g;
  Graph::Id a = g.constant_vec({1, 2, 3});
  Tensor before = g.value(a);
  g.relu(a);
  g.softmax(a);
  g.mul(a, a);
  g.absdiff(a, g.constant_vec({0, 0, 0}));
  CHECK(g.value(a).data == before.data);
}

TEST_CASE("quadratic gradient check is near machine precision") {
  ParamStore store = make_store({{"p", {8}}});
  auto loss = [](Graph& g, ParamStore& s) {
    Graph::Id p = g.param(s, "p");
    return g.scale(g.dot(p, p), 0.5);
  };
  GradCheckReport rep = grad_check(loss, store, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("every primitive passes the finite-difference check") {
  ParamStore store = make_store({{"a", {6}}, {"b", {6}}, {"W", {6, 6}}, {"w3", {3}},
                                 {"s", {1}}});
  // keep the divisor away from zero
  store.at("s").value[0] = 1.7;

  auto loss = [](Graph& g, ParamStore& st) {
    Graph::Id a = g.param(st, "a");
    Graph::Id b = g.param(st, "b");
    Graph::Id W = g.param(st, "W");
    Graph::Id w3 = g.param(st, "w3");
    Graph::Id s = g.param(st, "s");

    Graph::Id parts = g.concat({g.mul(a, b), g.absdiff(a, b), g.relu(a)});
    Graph::Id mixed = g.add(g.matvec(W, a), g.matvec_t(W, b));
    Graph::Id acts = g.concat({g.sigmoid(mixed), g.tanh_(b)});
    Graph::Id sm = g.softmax(g.slice(parts, 0, 6));
    Graph::Id pooled =
        g.lincomb({g.slice(acts, 0, 3), g.slice(acts, 3, 3)}, g.softmax(g.slice(w3, 0, 2)));
    Graph::Id sq = g.sqrt_(g.add(g.mul(sm, sm), g.constant_vec({0.1, 0.1, 0.1, 0.1, 0.1, 0.1})));
    Graph::Id terms = g.pack({g.bilinear(a, W, b), g.dot(a, b), g.max_reduce(sq),
                              g.sum(g.div_by_scalar(pooled, s)), g.pick(parts, 4),
                              g.log_(g.add(g.dot(sm, sm), g.scalar(0.5)))});
    return g.sum(g.mul(terms, terms));
  };
  GradCheckReport rep = grad_check(loss, store, 1e-4, 64);
  INFO(rep.worst_param, "[", rep.worst_index, "] rel err ", rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("lstm_step: zero weights give zero outputs") {
  ParamStore store;
  store.create("l.W_x", {16, 3});
  store.create("l.W_h", {16, 4});
  store.create("l.b", {16});
  Graph g;
  LstmRefs refs{g.param(store, "l.W_x"), g.param(store, "l.W_h"), g.param(store, "l.b")};
  Graph::Id x = g.constant_vec({0.3, -2.0, 5.0});
  Graph::Id h = g.constant(Tensor::zeros({4}));
  Graph::Id c = g.constant(Tensor::zeros({4}));
  auto [h2, c2] = lstm_step(g, refs, x, h, c);
  for (int i = 0; i < 4; ++i) {
    CHECK(g.value(h2)[i] == 0.0);
    CHECK(g.value(c2)[i] == 0.0);
  }
}

TEST_CASE("lstm_step is deterministic and passes gradient check") {
  ParamStore store = make_store({{"l.W_x", {16, 3}}, {"l.W_h", {16, 4}}, {"l.b", {16}}}, 11);
  auto loss = [](Graph& g, ParamStore& st) {
    LstmRefs refs{g.param(st, "l.W_x"), g.param(st, "l.W_h"), g.param(st, "l.b")};
    Graph::Id x1 = g.constant_vec({0.5, -0.2, 0.9});
    Graph::Id x2 = g.constant_vec({-1.0, 0.1, 0.3});
    Graph::Id h = g.constant(Tensor::zeros({4}));
    Graph::Id c = g.constant(Tensor::zeros({4}));
    auto s1 = lstm_step(g, refs, x1, h, c);
    auto s2 = lstm_step(g, refs, x2, s1.first, s1.second);
    return g.sum(g.mul(s2.first, s2.first));
  };
  GradCheckReport rep = grad_check(loss, store, 1e-4, 128);
  INFO(rep.worst_param, " rel err ", rep.max_rel_err);
  CHECK(rep.pass);

  // same input and state twice -> identical outputs
  Graph g1, g2;
  auto run = [&](Graph& g) {
    LstmRefs refs{g.param(store, "l.W_x"), g.param(store, "l.W_h"), g.param(store, "l.b")};
    auto [h2, c2] = lstm_step(g, refs, g.constant_vec({1, 2, 3}),
                              g.constant(Tensor::zeros({4})), g.constant(Tensor::zeros({4})));
    (void)c2;
    return g.value(h2).data;
  };
  CHECK(run(g1) == run(g2));
}

TEST_CASE("adam descends and is deterministic") {
  // single step on f(p) = p^2 at p=1 decreases p
  ParamStore store;
  store.create("p", {1}).value[0] = 1.0;
  Adam opt;
  AdamConfig cfg;
  cfg.lr = 0.1;
  {
    Graph g;
    Graph::Id p = g.param(store, "p");
    g.backward(g.mul(p, p));
    opt.step(store, cfg);
  }
  CHECK(store.at("p").value[0] < 1.0);

  // zero gradients at fresh state leave parameters unchanged
  ParamStore store2;
  store2.create("p", {2}).value = Tensor::vec({0.5, -0.5});
  Adam opt2;
  {
    Graph g;
    Graph::Id p = g.param(store2, "p");
    g.backward(g.scale(g.sum(g.mul(p, g.constant_vec({0, 0}))), 1.0));
    opt2.step(store2, AdamConfig{});
  }
  CHECK(store2.at("p").value[0] == 0.5);
  CHECK(store2.at("p").value[1] == -0.5);

  // optimizer without any backward pass refuses to run
  ParamStore store3;
  store3.create("p", {1});
  Adam opt3;
  CHECK_THROWS_AS(opt3.step(store3, AdamConfig{}), MissingGradient);

  // two runs with the same seed and order are bit-identical
  auto run_twice = [](uint64_t seed) {
    ParamStore s = make_store({{"a", {4}}, {"b", {4, 4}}}, seed);
    Adam opt;
    AdamConfig cfg;
    cfg.lr = 0.01;
    for (int step = 0; step < 25; ++step) {
      Graph g;
      Graph::Id a = g.param(s, "a");
      Graph::Id B = g.param(s, "b");
      Graph::Id v = g.matvec(B, a);
      g.backward(g.dot(v, v));
      opt.step(s, cfg);
    }
    std::vector<double> out = s.at("a").value.data;
    auto& bd = s.at("b").value.data;
    out.insert(out.end(), bd.begin(), bd.end());
    return out;
  };
  CHECK(run_twice(3) == run_twice(3));
}

TEST_CASE("trainable flag stops gradient accumulation") {
  ParamStore store = make_store({{"frozen", {3}}, {"live", {3}}});
  store.at("frozen").trainable = false;
  Graph g;
  Graph::Id loss = g.dot(g.param(store, "frozen"), g.param(store, "live"));
  g.backward(loss);
  CHECK(store.at("frozen").grad.data == std::vector<double>{0, 0, 0});
  CHECK(store.at("live").grad.data != std::vector<double>{0, 0, 0});
}

TEST_CASE("checkpoint round trip") {
  ParamStore store = make_store({{"enc.W", {5, 3}}, {"emb.x", {4}}});
  store.at("emb.x").trainable = false;
  std::string path = "test_ckpt.bin";
  save_checkpoint(store, path, {{"kind", "unit-test"}, {"epochs", "3"}});

  ParamStore loaded;
  load_checkpoint(loaded, path);
  CHECK(loaded.at("enc.W").value.data == store.at("enc.W").value.data);
  CHECK(loaded.at("emb.x").value.data == store.at("emb.x").value.data);
  CHECK_FALSE(loaded.at("emb.x").trainable);
  auto meta = load_checkpoint_sidecar(path);
  CHECK(meta.at("kind") == "unit-test");
  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());
}

TEST_SUITE_END();
