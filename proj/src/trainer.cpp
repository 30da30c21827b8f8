#include "ginv/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace ginv {

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamOptions& options) {
  if (params.size() != grads.size()) throw Error(Errc::ShapeMismatch, "adam_step: parameter/gradient count");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw Error(Errc::ShapeMismatch, "adam_step: state size");
  ++state.step;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& g = grads[k];
    if (g.rows() != params[k]->rows() || g.cols() != params[k]->cols()) {
      throw Error(Errc::ShapeMismatch, "adam_step: gradient shape");
    }
    state.m[k] = options.beta1 * state.m[k] + (1.0 - options.beta1) * g;
    state.v[k] = options.beta2 * state.v[k] + (1.0 - options.beta2) * g.cwiseProduct(g);
    params[k]->array() -= options.learning_rate * (state.m[k].array() / c1) /
                          ((state.v[k].array() / c2).sqrt() + options.epsilon);
  }
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "ginv") return ModelKind::GInv;
  if (name == "gavg") return ModelKind::GAvg;
  if (name == "mlp") return ModelKind::Mlp;
  throw Error(Errc::InvalidSpec, "unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::GInv: return "ginv";
    case ModelKind::GAvg: return "gavg";
    case ModelKind::Mlp: return "mlp";
  }
  return "";
}

TrainConfig TrainConfig::polynomial(ModelKind kind) {
  TrainConfig c;
  c.model = kind;
  c.task = "poly";
  c.batch_size = 0;
  c.max_epochs = 20000;
  c.patience = 1000;
  c.eval_every = 10;
  c.ginv = GInvConfig::polynomial();
  c.gavg = GAvgConfig::polynomial();
  return c;
}

TrainConfig TrainConfig::quadrangle(ModelKind kind) {
  TrainConfig c;
  c.model = kind;
  c.task = "quad";
  c.batch_size = 32;
  c.max_epochs = 5000;
  c.patience = 500;
  c.eval_every = 1;
  c.ginv = GInvConfig::quadrangle();
  c.gavg = GAvgConfig::quadrangle();
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::InvalidSpec, "learning rate must be finite and non-negative");
  }
  if (max_epochs < 0) throw Error(Errc::InvalidSpec, "max_epochs must be >= 0");
  if (batch_size < 0) throw Error(Errc::InvalidSpec, "batch_size must be >= 0");
  if (patience < 1 || eval_every < 1) throw Error(Errc::InvalidSpec, "patience and eval_every must be >= 1");
  if (seeds.empty()) throw Error(Errc::InvalidSpec, "at least one seed is required");
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) {
    r.mean = r.std = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

std::size_t TrainReport::succeeded() const {
  std::size_t ok = 0;
  for (const auto& s : seeds) ok += s.diverged ? 0 : 1;
  return ok;
}

Model make_model(const TrainConfig& config, const Dataset& data, std::uint64_t seed) {
  const std::string spec = config.group_spec.empty() ? data.group_spec : config.group_spec;
  PermGroup group = named_group(spec);
  if (group.degree() != data.n) {
    throw Error(Errc::ShapeMismatch, "group degree " + std::to_string(group.degree()) +
                                         " differs from dataset n = " + std::to_string(data.n));
  }
  Rng rng(seed, {0x696e6974u});
  switch (config.model) {
    case ModelKind::GInv: {
      GInvConfig c = config.ginv;
      c.n_in = data.n_in;
      c.n_out = static_cast<int>(data.targets.cols());
      return GInvNet::init(std::move(group), spec, c, rng);
    }
    case ModelKind::GAvg: {
      GAvgConfig c = config.gavg;
      c.n_in = data.n_in;
      c.n_out = static_cast<int>(data.targets.cols());
      return GAvgNet::init(std::move(group), spec, c, rng);
    }
    case ModelKind::Mlp: {
      GAvgConfig c = config.gavg;
      c.n_in = data.n_in;
      c.n_out = static_cast<int>(data.targets.cols());
      return PlainNet::init(std::move(group), spec, c, rng);
    }
  }
  throw Error(Errc::InvalidSpec, "unknown model kind");
}

double evaluate(const Model& model, const Matrix& inputs, const Matrix& targets) {
  const Matrix pred = predict(model, inputs);
  if (pred.rows() != targets.rows() || pred.cols() != targets.cols()) {
    throw Error(Errc::ShapeMismatch, "evaluate: prediction and target shapes differ");
  }
  return (pred - targets).cwiseAbs().sum() / static_cast<double>(targets.size());
}

double evaluate(const Model& model, const Dataset& data, Split split) {
  return evaluate(model, data.split_inputs(split), data.split_targets(split));
}

namespace {

std::vector<Matrix> snapshot(const Model& model) {
  std::vector<Matrix> out;
  for (const Matrix* p : parameters(model)) out.push_back(*p);
  return out;
}

void restore(Model& model, const std::vector<Matrix>& values) {
  auto refs = parameters(model);
  for (std::size_t k = 0; k < refs.size(); ++k) *refs[k] = values[k];
}

}  // namespace

SeedResult train_seed(const TrainConfig& config, const Dataset& data, std::uint64_t seed,
                      std::optional<Model>* best_model, const TrainObserver& observer) {
  config.validate();
  if (config.task != data.task) {
    throw Error(Errc::ShapeMismatch, "config task '" + config.task + "' vs dataset task '" + data.task + "'");
  }
  Model model = make_model(config, data, seed);
  SeedResult result;
  result.seed = seed;
  result.param_count = param_count(model);

  const int n = data.n;
  const Matrix train_x = data.split_inputs(Split::Train);
  const Matrix train_y = data.split_targets(Split::Train);
  const Matrix val_x = data.split_inputs(Split::Val);
  const Matrix val_y = data.split_targets(Split::Val);
  const Eigen::Index n_train = train_y.rows();
  const Eigen::Index batch = config.batch_size == 0 ? n_train : std::min<Eigen::Index>(config.batch_size, n_train);

  AdamOptions adam;
  adam.learning_rate = config.learning_rate;
  AdamState state;
  Rng shuffle_rng(seed, {0x73687566u});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double best_val = evaluate(model, val_x, val_y);
  std::vector<Matrix> best = snapshot(model);
  result.val_history.emplace_back(0, best_val);
  int since_best = 0;
  int epoch = 0;

  Matrix batch_x;
  Matrix batch_y;
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (batch < n_train) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
      }
    }
    for (Eigen::Index start = 0; start < n_train; start += batch) {
      const Eigen::Index len = std::min(batch, n_train - start);
      const Matrix* xs = &train_x;
      const Matrix* ys = &train_y;
      if (len < n_train) {
        batch_x.resize(len * n, data.n_in);
        batch_y.resize(len, train_y.cols());
        for (Eigen::Index r = 0; r < len; ++r) {
          const Eigen::Index k = order[static_cast<std::size_t>(start + r)];
          batch_x.middleRows(r * n, n) = train_x.middleRows(k * n, n);
          batch_y.row(r) = train_y.row(k);
        }
        xs = &batch_x;
        ys = &batch_y;
      }
      ad::Tape tape;
      const BoundForward fwd = forward_batch(tape, model, *xs);
      const ad::Var loss = ad::mae_loss(fwd.output, *ys);
      if (!std::isfinite(loss.value()(0, 0))) {
        result.diverged = true;
        break;
      }
      const ad::Gradients grads = tape.backward(loss);
      std::vector<Matrix> g;
      g.reserve(fwd.params.size());
      for (const ad::Var& p : fwd.params) g.push_back(grads[p]);
      const auto refs = parameters(model);
      adam_step(refs, g, state, adam);
    }
    if (result.diverged) break;
    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      const double val = evaluate(model, val_x, val_y);
      result.val_history.emplace_back(epoch, val);
      if (observer) observer(seed, epoch, val);
      if (!std::isfinite(val)) {
        result.diverged = true;
        break;
      }
      if (val < best_val) {
        best_val = val;
        best = snapshot(model);
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
  }
  result.epochs_run = std::min(epoch, config.max_epochs);

  if (result.diverged) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.train_mae = result.val_mae = result.test_mae = nan;
    return result;
  }
  restore(model, best);
  result.train_mae = evaluate(model, data, Split::Train);
  result.val_mae = evaluate(model, data, Split::Val);
  result.test_mae = evaluate(model, data, Split::Test);
  if (best_model != nullptr) *best_model = std::move(model);
  return result;
}

TrainOutcome train(const TrainConfig& config, const Dataset& data, int threads, const TrainObserver& observer) {
  config.validate();
  const std::size_t count = config.seeds.size();
  std::vector<SeedResult> results(count);
  std::vector<std::optional<Model>> models(count);
  std::vector<std::exception_ptr> errors(count);

  auto run = [&](std::size_t k) {
    try {
      results[k] = train_seed(config, data, config.seeds[k], &models[k], observer);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < count;) run(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  TrainOutcome out;
  TrainReport& report = out.report;
  report.model = std::string(to_string(config.model));
  report.group = config.group_spec.empty() ? data.group_spec : config.group_spec;
  report.task = data.task;
  report.seeds = std::move(results);
  report.param_count = report.seeds.front().param_count;

  std::vector<double> tr, va, te;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < count; ++k) {
    const SeedResult& s = report.seeds[k];
    if (s.diverged) continue;
    tr.push_back(s.train_mae);
    va.push_back(s.val_mae);
    te.push_back(s.test_mae);
    if (!best || s.val_mae < report.seeds[*best].val_mae) best = k;
  }
  report.train = mean_std(tr);
  report.val = mean_std(va);
  report.test = mean_std(te);
  if (best) out.best_model = std::move(models[*best]);
  return out;
}

}  // namespace ginv
