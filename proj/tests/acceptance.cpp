// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. GINV_THREADS sets the worker count for the determinism
// rerun (default 1).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "ginv/ginvnet.hpp"
#include "ginv/tasks.hpp"
#include "ginv/trainer.hpp"
#include "support.hpp"

using ginv::Matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double budget_s;  // 0 means no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int env_threads() {
  const char* v = std::getenv("GINV_THREADS");
  const int t = v ? std::atoi(v) : 1;
  return t >= 1 ? t : 1;
}

// Training runs shared by criteria 6 to 9.
struct Runs {
  ginv::Dataset poly = ginv::gen_poly_dataset(ginv::PolyTarget::standard(), ginv::kPolySizes, 1);
  ginv::Dataset quad = ginv::gen_quad_dataset(ginv::kQuadSizes, 1);
  std::optional<ginv::TrainReport> poly_ginv, poly_gavg, poly_mlp, quad_ginv, quad_gavg;
  double poly_seconds = 0.0;
  double quad_seconds = 0.0;
};

ginv::TrainReport run(const ginv::TrainConfig& c, const ginv::Dataset& d, int threads = 1) {
  return ginv::train(c, d, threads).report;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome group_engine() {
  struct Case {
    const char* spec;
    std::size_t order;
  };
  const Case cases[] = {{"cyclic:5", 5},
                        {"dihedral:5", 10},
                        {"symmetric:4", 24},
                        {"alternating:4", 12},
                        {"product:symmetric:2,symmetric:3", 12}};
  Outcome o{true, ""};
  for (const auto& c : cases) {
    const auto g = ginv::named_group(c.spec);
    const std::string problem = g.verify();
    const bool ok = g.order() == c.order && problem.empty();
    o.pass = o.pass && ok;
    o.detail += fmt("%s=%zu%s ", c.spec, g.order(), ok ? "" : "!");
  }
  return o;
}

Outcome architectural_invariance() {
  ginv::Rng rng(20240101);
  double worst = 0.0;
  bool exact = true;
  for (const char* spec : testing::kAuditGroups) {
    const auto group = ginv::named_group(spec);
    const int n = group.degree();
    ginv::GInvConfig config = ginv::GInvConfig::polynomial();
    config.n_in = 2;
    const ginv::GInvNet net = ginv::GInvNet::init(group, spec, config, rng);
    std::vector<Matrix> xs;
    for (int t = 0; t < 100; ++t) xs.push_back(testing::random_matrix(rng, n, 2));
    worst = std::max(worst, ginv::max_invariance_deviation(net, xs));

    for (int t = 0; t < 10; ++t) {
      const ginv::Tensor base = ginv::forward_fin(net, xs[static_cast<std::size_t>(t)]);
      for (const auto& g : group.elements()) {
        const ginv::Tensor moved = ginv::forward_fin(net, ginv::act(g, xs[static_cast<std::size_t>(t)]));
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < net.n_mid; ++k) exact = exact && moved(i, j, k) == base(g(i), j, k);
      }
    }
  }
  return {worst <= 1e-9 && exact,
          fmt("max relative deviation %.2e (bound 1e-9), forward_fin equivariance %s", worst,
              exact ? "bit-exact" : "NOT bit-exact")};
}

Outcome oracle_equivalence() {
  ginv::Rng rng(77);
  double worst = 0.0;
  for (const char* spec : testing::kAuditGroups) {
    const auto group = ginv::named_group(spec);
    const int n = group.degree();
    ginv::PolyTarget target{group, spec, {}};
    if (std::string(spec) == "cyclic:5") {
      target = ginv::PolyTarget::standard();
    } else {
      for (int i = 0; i < n; ++i) target.exponents.push_back(static_cast<int>(rng.below(4)));
    }
    const ginv::GInvNet net = testing::monomial_net(group, target.exponents);
    for (int t = 0; t < 1000; ++t) {
      const Matrix x = testing::random_matrix(rng, n, 1, 0.0, 1.0);
      const double layer = ginv::sigma_pi(group, ginv::forward_fin(net, x))(0);
      const double oracle = ginv::target_polynomial(target, std::span(x.data(), static_cast<std::size_t>(n)));
      const double rel = oracle == 0.0 ? std::abs(layer) : std::abs(layer - oracle) / std::abs(oracle);
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-12, fmt("max relative error %.2e over 5x1000 inputs (bound 1e-12)", worst)};
}

Outcome gradient_correctness() {
  ginv::Rng rng(4242);
  double worst = 0.0;
  long checked = 0;
  for (int c = 0; c < 20; ++c) {
    const char* spec = testing::kAuditGroups[c % 5];
    const auto group = ginv::named_group(spec);
    ginv::GInvConfig config;
    config.n_in = 1 + static_cast<int>(rng.below(2));
    config.n_mid = 2 + static_cast<int>(rng.below(5));
    config.phi_hidden = {3 + static_cast<int>(rng.below(6))};
    config.fout_hidden = {3 + static_cast<int>(rng.below(6))};
    const ginv::Model model = ginv::GInvNet::init(group, spec, config, rng);
    const Matrix inputs = testing::random_matrix(rng, 2 * group.degree(), config.n_in);
    std::vector<Matrix> params;
    for (const Matrix* p : ginv::parameters(model)) params.push_back(*p);
    const Matrix weights = testing::random_matrix(rng, 2, 1, 0.5, 1.5);
    const double err = ginv::ad::grad_check(
        [&](ginv::ad::Tape& tape, std::span<const ginv::ad::Var> vars) {
          const ginv::ad::Var out = ginv::forward_batch(tape, model, inputs, vars);
          // Weighted sum of both outputs: smooth, with distinct weights per example.
          return ginv::ad::matmul(tape.leaf(weights.transpose()), out);
        },
        params);
    worst = std::max(worst, err);
    checked += ginv::param_count(model);
  }
  return {worst < 1e-4, fmt("max relative error %.2e over %ld parameters in 20 nets (bound 1e-4)", worst, checked)};
}

Outcome cost_model() {
  const long long gavg = ginv::count_mults_gavg(10, 2, 32, 14400);
  const long long ginv_ = ginv::count_mults_ginv(10, 2, 32, 14400);
  return {gavg == 9216000 && ginv_ == 4153600, fmt("gavg %lld (want 9216000), ginv %lld (want 4153600)", gavg, ginv_)};
}

Outcome polynomial_table(Runs& r) {
  const auto t0 = std::chrono::steady_clock::now();
  r.poly_ginv = run(ginv::TrainConfig::polynomial(ginv::ModelKind::GInv), r.poly);
  r.poly_gavg = run(ginv::TrainConfig::polynomial(ginv::ModelKind::GAvg), r.poly);
  r.poly_seconds = seconds_since(t0);
  const auto& a = *r.poly_ginv;
  const auto& b = *r.poly_gavg;
  const long w = a.param_count;
  const bool weights_ok = w >= 21600 && w <= 26400;
  const bool ok = a.succeeded() == 3 && weights_ok && a.test.mean <= 0.15 && a.test.mean < b.test.mean;
  return {ok, fmt("G-inv test MAE %.4g +- %.2g (%ld weights, bound 0.15) vs G-avg %.4g +- %.2g (%ld weights)",
                  a.test.mean, a.test.std, w, b.test.mean, b.test.std, b.param_count)};
}

Outcome quadrangle_table(Runs& r) {
  const auto t0 = std::chrono::steady_clock::now();
  r.quad_ginv = run(ginv::TrainConfig::quadrangle(ginv::ModelKind::GInv), r.quad);
  r.quad_gavg = run(ginv::TrainConfig::quadrangle(ginv::ModelKind::GAvg), r.quad);
  r.quad_seconds = seconds_since(t0);
  const auto& a = *r.quad_ginv;
  const auto& b = *r.quad_gavg;

  const double mean_area = r.quad.split_targets(ginv::Split::Train).mean();
  const Matrix test = r.quad.split_targets(ginv::Split::Test);
  const double constant_mae = (test.array() - mean_area).abs().mean();

  const long w = a.param_count;
  const bool weights_ok = w >= 1700 && w <= 1800;
  const bool ok = a.succeeded() == 3 && weights_ok && a.test.mean <= 0.016 && a.test.mean < constant_mae;
  return {ok, fmt("G-inv test MAE %.4g +- %.2g (%ld weights, bound 0.016), constant-mean predictor %.4g, "
                  "G-avg %.4g +- %.2g (%ld weights, %s, not gating)",
                  a.test.mean, a.test.std, w, constant_mae, b.test.mean, b.test.std, b.param_count,
                  a.test.mean < b.test.mean ? "G-inv better" : "G-avg better")};
}

Outcome generalization_gap(Runs& r) {
  if (!r.poly_ginv) return {false, "polynomial runs missing"};
  r.poly_mlp = run(ginv::TrainConfig::polynomial(ginv::ModelKind::Mlp), r.poly);
  const auto& a = *r.poly_ginv;
  const auto& m = *r.poly_mlp;
  const double gap_ginv = a.test.mean - a.train.mean;
  const double gap_mlp = m.test.mean - m.train.mean;
  return {gap_ginv < gap_mlp,
          fmt("G-inv gap %.4g (train %.4g, test %.4g); plain MLP gap %.4g (train %.4g, test %.4g, %ld weights)",
              gap_ginv, a.train.mean, a.test.mean, gap_mlp, m.train.mean, m.test.mean, m.param_count)};
}

Outcome determinism(Runs& r) {
  if (!r.poly_ginv || !r.quad_ginv) return {false, "earlier runs missing"};
  const int threads = env_threads();
  const bool same = run(ginv::TrainConfig::polynomial(ginv::ModelKind::GInv), r.poly, threads) == *r.poly_ginv &&
                    run(ginv::TrainConfig::polynomial(ginv::ModelKind::GAvg), r.poly, threads) == *r.poly_gavg &&
                    run(ginv::TrainConfig::quadrangle(ginv::ModelKind::GInv), r.quad, threads) == *r.quad_ginv &&
                    run(ginv::TrainConfig::quadrangle(ginv::ModelKind::GAvg), r.quad, threads) == *r.quad_gavg;
  return {same, fmt("4 reports rerun with %d worker(s): %s", threads, same ? "bit-identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  Runs runs;
  const std::vector<Criterion> criteria{
      {1, "group engine correctness", 1.0, group_engine},
      {2, "architectural invariance", 10.0, architectural_invariance},
      {3, "oracle equivalence", 0.0, oracle_equivalence},
      {4, "gradient correctness", 120.0, gradient_correctness},
      {5, "cost model", 0.0, cost_model},
      {6, "polynomial regression table", 0.0, [&] { return polynomial_table(runs); }},
      {7, "quadrangle area table", 0.0, [&] { return quadrangle_table(runs); }},
      {8, "generalization gap", 0.0, [&] { return generalization_gap(runs); }},
      {9, "determinism", 0.0, [&] { return determinism(runs); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double elapsed = seconds_since(t0);
    // The training criteria have a 15 minute bound per task.
    if (c.id == 6 || c.id == 7) {
      const double task_s = c.id == 6 ? runs.poly_seconds : runs.quad_seconds;
      if (task_s > 900.0) {
        o.pass = false;
        o.detail += fmt(" [over the 900 s budget: %.0f s]", task_s);
      }
    }
    if (c.budget_s > 0.0 && elapsed > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), elapsed);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
