#include <doctest.h>

#include <algorithm>
#include <limits>

#include "ginv/trainer.hpp"
#include "support.hpp"

using ginv::Matrix;
using ginv::TrainConfig;

namespace {

ginv::Dataset tiny_poly() {
  return ginv::gen_poly_dataset(ginv::PolyTarget::standard(), {16, 32, 64}, 5);
}

TrainConfig tiny_config(ginv::ModelKind kind = ginv::ModelKind::GInv) {
  TrainConfig c = TrainConfig::polynomial(kind);
  c.ginv.n_mid = 4;
  c.ginv.phi_hidden = {4};
  c.ginv.fout_hidden = {8};
  c.gavg.hidden = {8, 8};
  c.max_epochs = 60;
  c.eval_every = 5;
  c.patience = 4;
  c.learning_rate = 1e-2;
  c.seeds = {1, 2, 3};
  return c;
}

std::vector<Matrix> values(const ginv::Model& m) {
  std::vector<Matrix> out;
  for (const Matrix* p : ginv::parameters(m)) out.push_back(*p);
  return out;
}

}  // namespace

TEST_CASE("Adam from a zero state") {
  Matrix p = Matrix::Constant(1, 1, 0.5);
  std::vector<Matrix*> params{&p};
  ginv::AdamState state;
  const ginv::AdamOptions opts;

  const std::vector<Matrix> zero{Matrix::Zero(1, 1)};
  ginv::adam_step(params, zero, state, opts);
  CHECK(p(0, 0) == 0.5);
  CHECK(state.m[0](0, 0) == 0.0);
  CHECK(state.v[0](0, 0) == 0.0);

  Matrix q = Matrix::Zero(1, 1);
  std::vector<Matrix*> qs{&q};
  ginv::AdamState fresh;
  const std::vector<Matrix> one{Matrix::Ones(1, 1)};
  ginv::adam_step(qs, one, fresh, opts);
  CHECK(q(0, 0) == doctest::Approx(-opts.learning_rate / (1.0 + opts.epsilon)).epsilon(1e-15));

  // A zero gradient afterwards only decays the moments.
  const double m1 = fresh.m[0](0, 0);
  const double v1 = fresh.v[0](0, 0);
  ginv::adam_step(qs, zero, fresh, opts);
  CHECK(fresh.m[0](0, 0) == doctest::Approx(opts.beta1 * m1).epsilon(1e-15));
  CHECK(fresh.v[0](0, 0) == doctest::Approx(opts.beta2 * v1).epsilon(1e-15));
}

TEST_CASE("Adam step tends to lr under a constant gradient") {
  Matrix p = Matrix::Zero(1, 2);
  std::vector<Matrix*> params{&p};
  ginv::AdamState state;
  const ginv::AdamOptions opts;
  const std::vector<Matrix> g{(Matrix(1, 2) << 3.0, -0.02).finished()};
  Matrix before = p;
  for (int t = 0; t < 10000; ++t) {
    before = p;
    ginv::adam_step(params, g, state, opts);
  }
  const Matrix step = p - before;
  CHECK(std::abs(std::abs(step(0, 0)) - opts.learning_rate) <= 0.01 * opts.learning_rate);
  CHECK(std::abs(std::abs(step(0, 1)) - opts.learning_rate) <= 0.01 * opts.learning_rate);
  CHECK(step(0, 0) < 0.0);
  CHECK(step(0, 1) > 0.0);
  CHECK(state.step == 10000);
}

TEST_CASE("mean_std") {
  const double v[] = {1, 2, 3};
  CHECK(ginv::mean_std(v) == ginv::MeanStd{2.0, 1.0});
  const double one[] = {4};
  CHECK(ginv::mean_std(one) == ginv::MeanStd{4.0, 0.0});
}

TEST_CASE("evaluate") {
  const ginv::Dataset data = tiny_poly();
  const ginv::PolyTarget target = ginv::PolyTarget::standard();
  const ginv::Model exact = testing::monomial_net(target.group, target.exponents);
  CHECK(ginv::evaluate(exact, data, ginv::Split::Test) <= 1e-12);

  // Constant-zero predictor: MAE is the mean area.
  const ginv::Dataset quad = ginv::gen_quad_dataset(ginv::kQuadSizes, 3);
  auto zero = std::get<ginv::GInvNet>(ginv::make_model(TrainConfig::quadrangle(ginv::ModelKind::GInv), quad, 1));
  zero.fout = ginv::Mlp::zeros(zero.fout.spec);
  const Matrix areas = quad.split_targets(ginv::Split::Test);
  CHECK(ginv::evaluate(ginv::Model(zero), quad, ginv::Split::Test) == doctest::Approx(areas.mean()).epsilon(1e-14));

  // Reordering examples does not change the MAE.
  ginv::Rng rng(4);
  const ginv::Model model = ginv::make_model(tiny_config(), data, 9);
  const Matrix xs = data.split_inputs(ginv::Split::Test);
  const Matrix ys = data.split_targets(ginv::Split::Test);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ys.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::reverse(order.begin(), order.end());
  Matrix xr(xs.rows(), xs.cols()), yr(ys.rows(), ys.cols());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto k = order[r];
    xr.middleRows(static_cast<Eigen::Index>(r) * 5, 5) = xs.middleRows(k * 5, 5);
    yr.row(static_cast<Eigen::Index>(r)) = ys.row(k);
  }
  CHECK(ginv::evaluate(model, xr, yr) == doctest::Approx(ginv::evaluate(model, xs, ys)).epsilon(1e-14));
}

TEST_CASE("zero learning rate keeps the initial parameters") {
  const ginv::Dataset data = tiny_poly();
  TrainConfig c = tiny_config();
  c.learning_rate = 0.0;
  c.max_epochs = 20;
  std::optional<ginv::Model> best;
  const ginv::SeedResult r = ginv::train_seed(c, data, 4, &best);
  REQUIRE(best.has_value());
  const ginv::Model init = ginv::make_model(c, data, 4);
  CHECK(values(*best) == values(init));
  CHECK(r.train_mae == ginv::evaluate(init, data, ginv::Split::Train));
  CHECK(r.test_mae == ginv::evaluate(init, data, ginv::Split::Test));
}

TEST_CASE("zero epochs report the untrained model") {
  const ginv::Dataset data = tiny_poly();
  TrainConfig c = tiny_config(ginv::ModelKind::GAvg);
  c.max_epochs = 0;
  const ginv::TrainOutcome out = ginv::train(c, data);
  for (const auto& s : out.report.seeds) {
    const ginv::Model init = ginv::make_model(c, data, s.seed);
    CHECK(s.epochs_run == 0);
    CHECK(s.val_mae == ginv::evaluate(init, data, ginv::Split::Val));
    CHECK(s.test_mae == ginv::evaluate(init, data, ginv::Split::Test));
  }
}

TEST_CASE("training lowers the error and the report is deterministic") {
  const ginv::Dataset data = tiny_poly();
  const TrainConfig c = tiny_config();
  const ginv::TrainOutcome a = ginv::train(c, data);
  const ginv::TrainOutcome b = ginv::train(c, data);
  const ginv::TrainOutcome parallel = ginv::train(c, data, 3);
  CHECK(a.report == b.report);
  CHECK(a.report == parallel.report);
  CHECK(a.report.succeeded() == 3);
  CHECK(a.report.model == "ginv");
  CHECK(a.report.group == "cyclic:5");
  for (const auto& s : a.report.seeds) CHECK(s.val_mae < s.val_history.front().second);
  REQUIRE(a.best_model.has_value());
  CHECK(values(*a.best_model) == values(*parallel.best_model));
}

TEST_CASE("early stopping returns the best evaluated parameters") {
  const ginv::Dataset data = tiny_poly();
  TrainConfig c = tiny_config();
  c.max_epochs = 400;
  c.learning_rate = 5e-2;
  c.patience = 3;
  std::optional<ginv::Model> best;
  const ginv::SeedResult r = ginv::train_seed(c, data, 2, &best);
  REQUIRE(best.has_value());
  const auto min = std::min_element(r.val_history.begin(), r.val_history.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; });
  CHECK(min->first == r.best_epoch);
  CHECK(min->second == r.val_mae);
  CHECK(ginv::evaluate(*best, data, ginv::Split::Val) == r.val_mae);
  // Stopped because of patience, not the budget.
  CHECK(r.epochs_run < c.max_epochs);
  CHECK(r.val_history.back().first - r.best_epoch == c.patience * c.eval_every);

  // Replaying training up to the best epoch gives the same parameters.
  TrainConfig replay = c;
  replay.max_epochs = r.best_epoch;
  replay.patience = 1000;
  std::optional<ginv::Model> replayed;
  ginv::train_seed(replay, data, 2, &replayed);
  CHECK(values(*replayed) == values(*best));
}

TEST_CASE("observer sees every evaluation") {
  const ginv::Dataset data = tiny_poly();
  TrainConfig c = tiny_config();
  c.seeds = {7};
  std::vector<std::pair<int, double>> seen;
  const auto out = ginv::train(c, data, 1, [&](std::uint64_t seed, int epoch, double val) {
    CHECK(seed == 7);
    seen.emplace_back(epoch, val);
  });
  const auto& history = out.report.seeds[0].val_history;
  CHECK(std::vector(history.begin() + 1, history.end()) == seen);
}

TEST_CASE("divergence is reported, not thrown") {
  ginv::Dataset data = tiny_poly();
  data.targets(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c = tiny_config();
  c.seeds = {1, 2};
  const ginv::TrainOutcome out = ginv::train(c, data);
  CHECK(out.report.succeeded() == 0);
  for (const auto& s : out.report.seeds) {
    CHECK(s.diverged);
    CHECK(std::isnan(s.test_mae));
  }
  CHECK(!out.best_model.has_value());
}

TEST_CASE("config validation and mismatches") {
  const ginv::Dataset data = tiny_poly();
  TrainConfig c = tiny_config();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(ginv::train(c, data), ginv::Error);
  c = tiny_config();
  c.seeds.clear();
  CHECK_THROWS_AS(ginv::train(c, data), ginv::Error);
  c = tiny_config();
  c.group_spec = "cyclic:4";
  CHECK_THROWS_AS(ginv::train(c, data), ginv::Error);
  c = tiny_config();
  c.task = "quad";
  CHECK_THROWS_AS(ginv::train(c, data), ginv::Error);
  CHECK(ginv::parse_model_kind("mlp") == ginv::ModelKind::Mlp);
  CHECK_THROWS_AS(ginv::parse_model_kind("cnn"), ginv::Error);
}

TEST_CASE("mini-batches") {
  const ginv::Dataset quad = ginv::gen_quad_dataset({64, 32, 32}, 1);
  TrainConfig c = TrainConfig::quadrangle(ginv::ModelKind::GInv);
  c.max_epochs = 5;
  c.batch_size = 10;
  c.seeds = {3};
  const auto a = ginv::train(c, quad);
  const auto b = ginv::train(c, quad);
  CHECK(a.report == b.report);
  CHECK(a.report.seeds[0].epochs_run == 5);
}
