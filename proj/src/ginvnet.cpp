#include "ginv/ginvnet.hpp"

#include <algorithm>

namespace ginv {

namespace {

template <typename... F>
struct overloaded : F... {
  using F::operator()...;
};
template <typename... F>
overloaded(F...) -> overloaded<F...>;

void require_rows(const Matrix& inputs, int n, int n_in) {
  if (inputs.cols() != n_in || inputs.rows() == 0 || inputs.rows() % n != 0) {
    throw Error(Errc::ShapeMismatch, "input batch of shape (" + std::to_string(inputs.rows()) + "," +
                                         std::to_string(inputs.cols()) + ") does not fit n=" +
                                         std::to_string(n) + ", n_in=" + std::to_string(n_in));
  }
}

std::vector<ad::Var> bind(ad::Tape& tape, const std::vector<Matrix>& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p));
  return vars;
}

ad::Var forward_ginv(ad::Tape& tape, const GInvNet& net, const Matrix& inputs, std::span<const ad::Var> params) {
  const int n = net.degree();
  require_rows(inputs, n, net.n_in);
  const Eigen::Index batch = inputs.rows() / n;

  const ad::Var x = tape.leaf(inputs);
  std::vector<ad::Var> head_out;
  head_out.reserve(net.heads.size());
  std::size_t cursor = 0;
  for (const auto& head : net.heads) {
    std::visit(overloaded{
                   [&](const Mlp& mlp) {
                     head_out.push_back(mlp_forward(mlp.spec, params.subspan(cursor, mlp.params.size()), x));
                     cursor += mlp.params.size();
                   },
                   [&](const MonomialHead& mono) { head_out.push_back(ad::pow_int(x, mono.exponent)); },
               },
               head);
  }
  const ad::Var stacked = ad::concat_rows(head_out);
  const ad::Var invariant = sigma_pi(net.group, stacked, batch);
  return mlp_forward(net.fout.spec, params.subspan(cursor), invariant);
}

// Rows of the result are flatten(g(x_b)) for b major, g minor.
Matrix flatten_orbit(const PermGroup& group, const Matrix& inputs, int n_in) {
  const int n = group.degree();
  const Eigen::Index batch = inputs.rows() / n;
  const auto m = static_cast<Eigen::Index>(group.order());
  Matrix out(batch * m, static_cast<Eigen::Index>(n) * n_in);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index g = 0; g < m; ++g) {
      const Permutation& p = group[static_cast<std::size_t>(g)];
      for (int i = 0; i < n; ++i) {
        out.row(b * m + g).segment(static_cast<Eigen::Index>(i) * n_in, n_in) = inputs.row(b * n + p(i));
      }
    }
  }
  return out;
}

ad::Var forward_gavg_batch(ad::Tape& tape, const GAvgNet& net, const Matrix& inputs,
                           std::span<const ad::Var> params) {
  require_rows(inputs, net.degree(), net.n_in);
  const auto m = static_cast<Eigen::Index>(net.group.order());
  const ad::Var z = tape.leaf(flatten_orbit(net.group, inputs, net.n_in));
  const ad::Var per_element = mlp_forward(net.base.spec, params, z);
  return ad::scale(ad::sum_segments(per_element, m), 1.0 / static_cast<double>(m));
}

ad::Var forward_plain_batch(ad::Tape& tape, const PlainNet& net, const Matrix& inputs,
                            std::span<const ad::Var> params) {
  const int n = net.degree();
  require_rows(inputs, n, net.n_in);
  const Eigen::Index batch = inputs.rows() / n;
  // Row-major storage makes the flattening a reinterpretation.
  const Matrix flat = Eigen::Map<const Matrix>(inputs.data(), batch, static_cast<Eigen::Index>(n) * net.n_in);
  return mlp_forward(net.base.spec, params, tape.leaf(flat));
}

MlpSpec flat_spec(int n, const GAvgConfig& config) {
  return MlpSpec::uniform(n * config.n_in, config.hidden, config.n_out, config.activation);
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction

GInvConfig GInvConfig::polynomial() {
  GInvConfig c;
  c.n_in = 1;
  c.n_mid = 32;
  c.phi_hidden = {16, 32};
  c.fout_hidden = {128, 96};
  return c;
}

GInvConfig GInvConfig::quadrangle() {
  GInvConfig c;
  c.n_in = 2;
  c.n_mid = 8;
  c.phi_hidden = {16, 12};
  c.fout_hidden = {32};
  return c;
}

GAvgConfig GAvgConfig::polynomial() {
  GAvgConfig c;
  c.n_in = 1;
  c.hidden = {144, 112, 64};
  return c;
}

GAvgConfig GAvgConfig::quadrangle() {
  GAvgConfig c;
  c.n_in = 2;
  c.hidden = {40, 32};
  return c;
}

GInvNet GInvNet::init(PermGroup group, std::string group_spec, const GInvConfig& config, Rng& rng) {
  if (config.n_in < 1 || config.n_mid < 1 || config.n_out < 1) {
    throw Error(Errc::ShapeMismatch, "network widths must be >= 1");
  }
  GInvNet net;
  net.n_in = config.n_in;
  net.n_mid = config.n_mid;
  net.n_out = config.n_out;
  const auto phi = MlpSpec::uniform(config.n_in, config.phi_hidden, config.n_mid, config.activation);
  for (int j = 0; j < group.degree(); ++j) net.heads.emplace_back(Mlp::init(phi, rng));
  net.fout = Mlp::init(MlpSpec::uniform(config.n_mid, config.fout_hidden, config.n_out, config.activation), rng);
  net.group = std::move(group);
  net.group_spec = std::move(group_spec);
  return net;
}

GAvgNet GAvgNet::init(PermGroup group, std::string group_spec, const GAvgConfig& config, Rng& rng) {
  GAvgNet net;
  net.n_in = config.n_in;
  net.base = Mlp::init(flat_spec(group.degree(), config), rng);
  net.group = std::move(group);
  net.group_spec = std::move(group_spec);
  return net;
}

PlainNet PlainNet::init(PermGroup group, std::string group_spec, const GAvgConfig& config, Rng& rng) {
  PlainNet net;
  net.n_in = config.n_in;
  net.base = Mlp::init(flat_spec(group.degree(), config), rng);
  net.group = std::move(group);
  net.group_spec = std::move(group_spec);
  return net;
}

// ---------------------------------------------------------------------------
// Model accessors

std::string_view kind_name(const Model& model) {
  return std::visit(overloaded{[](const GInvNet&) { return std::string_view("ginv"); },
                               [](const GAvgNet&) { return std::string_view("gavg"); },
                               [](const PlainNet&) { return std::string_view("mlp"); }},
                    model);
}

const PermGroup& group_of(const Model& model) {
  return std::visit([](const auto& net) -> const PermGroup& { return net.group; }, model);
}

const std::string& group_spec_of(const Model& model) {
  return std::visit([](const auto& net) -> const std::string& { return net.group_spec; }, model);
}

int input_width(const Model& model) {
  return std::visit([](const auto& net) { return net.n_in; }, model);
}

int output_width(const Model& model) {
  return std::visit(overloaded{[](const GInvNet& net) { return net.n_out; },
                               [](const auto& net) { return net.base.spec.output; }},
                    model);
}

std::vector<Matrix*> parameters(Model& model) {
  std::vector<Matrix*> out;
  std::visit(overloaded{[&](GInvNet& net) {
                          for (auto& head : net.heads) {
                            if (auto* mlp = std::get_if<Mlp>(&head)) {
                              for (auto& p : mlp->params) out.push_back(&p);
                            }
                          }
                          for (auto& p : net.fout.params) out.push_back(&p);
                        },
                        [&](auto& net) {
                          for (auto& p : net.base.params) out.push_back(&p);
                        }},
             model);
  return out;
}

std::vector<const Matrix*> parameters(const Model& model) {
  auto mutable_refs = parameters(const_cast<Model&>(model));
  return {mutable_refs.begin(), mutable_refs.end()};
}

long param_count(const GInvNet& net) {
  long total = net.fout.spec.param_count();
  for (const auto& head : net.heads) {
    if (const auto* mlp = std::get_if<Mlp>(&head)) total += mlp->spec.param_count();
  }
  return total;
}

long param_count(const GAvgNet& net) { return net.base.spec.param_count(); }
long param_count(const PlainNet& net) { return net.base.spec.param_count(); }

long param_count(const Model& model) {
  return std::visit([](const auto& net) { return param_count(net); }, model);
}

ad::Var forward_batch(ad::Tape& tape, const Model& model, const Matrix& inputs, std::span<const ad::Var> params) {
  if (params.size() != parameters(model).size()) {
    throw Error(Errc::ShapeMismatch, "forward_batch: expected " + std::to_string(parameters(model).size()) +
                                         " parameter tensors, got " + std::to_string(params.size()));
  }
  return std::visit(overloaded{[&](const GInvNet& net) { return forward_ginv(tape, net, inputs, params); },
                               [&](const GAvgNet& net) { return forward_gavg_batch(tape, net, inputs, params); },
                               [&](const PlainNet& net) { return forward_plain_batch(tape, net, inputs, params); }},
                    model);
}

BoundForward forward_batch(ad::Tape& tape, const Model& model, const Matrix& inputs) {
  BoundForward result;
  for (const Matrix* p : parameters(model)) result.params.push_back(tape.leaf(*p));
  result.output = forward_batch(tape, model, inputs, result.params);
  return result;
}

Matrix predict(const Model& model, const Matrix& inputs) {
  const int n = group_of(model).degree();
  require_rows(inputs, n, input_width(model));
  const Eigen::Index batch = inputs.rows() / n;
  constexpr Eigen::Index kChunk = 512;
  Matrix out(batch, output_width(model));
  for (Eigen::Index start = 0; start < batch; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, batch - start);
    ad::Tape tape;
    const Matrix chunk = inputs.middleRows(start * n, len * n);
    out.middleRows(start, len) = forward_batch(tape, model, chunk).output.value();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-example operations

ad::Var sigma_pi(const PermGroup& group, ad::Var stacked, Eigen::Index batch) {
  const Eigen::Index n = group.degree();
  const auto m = static_cast<Eigen::Index>(group.order());
  if (stacked.rows() != n * batch * n) {
    throw Error(Errc::DegreeMismatch, "sigma_pi: " + std::to_string(stacked.rows()) +
                                          " stacked rows do not match degree " + std::to_string(n) +
                                          " and batch " + std::to_string(batch));
  }
  std::vector<Eigen::Index> index;
  index.reserve(static_cast<std::size_t>(batch * m * n));
  const Eigen::Index head_stride = batch * n;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (const Permutation& g : group.elements()) {
      for (Eigen::Index j = 0; j < n; ++j) index.push_back(j * head_stride + b * n + g(static_cast<int>(j)));
    }
  }
  const ad::Var products = ad::product_over_sequence(ad::gather_rows(stacked, index), n);
  return ad::sum_segments(products, m);
}

Eigen::VectorXd sigma_pi(const PermGroup& group, const Tensor& t) {
  const Eigen::Index n = group.degree();
  if (t.rank() != 3 || t.dim(0) != n || t.dim(1) != n) {
    throw Error(Errc::DegreeMismatch, "sigma_pi expects a tensor of shape (n, n, n_mid) with n = " +
                                          std::to_string(n));
  }
  const Eigen::Index width = t.dim(2);
  Matrix stacked(n * n, width);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < width; ++k) stacked(j * n + i, k) = t(i, j, k);
    }
  }
  ad::Tape tape;
  return sigma_pi(group, tape.leaf(std::move(stacked)), 1).value().row(0).transpose();
}

Tensor forward_fin(const GInvNet& net, const Matrix& x) {
  const int n = net.degree();
  if (x.rows() != n || x.cols() != net.n_in) {
    throw Error(Errc::ShapeMismatch, "forward_fin expects (" + std::to_string(n) + "," +
                                         std::to_string(net.n_in) + ")");
  }
  ad::Tape tape;
  const ad::Var xv = tape.leaf(x);
  Tensor out({n, n, net.n_mid});
  for (int j = 0; j < n; ++j) {
    const ad::Var h = std::visit(
        overloaded{[&](const Mlp& mlp) { return mlp_forward(mlp.spec, bind(tape, mlp.params), xv); },
                   [&](const MonomialHead& mono) { return ad::pow_int(xv, mono.exponent); }},
        net.heads[static_cast<std::size_t>(j)]);
    if (h.cols() != net.n_mid) throw Error(Errc::ShapeMismatch, "head output width differs from n_mid");
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < net.n_mid; ++k) out(i, j, k) = h.value()(i, k);
    }
  }
  return out;
}

Eigen::VectorXd forward(const Model& model, const Matrix& x) {
  const int n = group_of(model).degree();
  if (x.rows() != n || x.cols() != input_width(model)) {
    throw Error(Errc::ShapeMismatch, "single input must have shape (" + std::to_string(n) + "," +
                                         std::to_string(input_width(model)) + ")");
  }
  return predict(model, x).row(0).transpose();
}

Eigen::VectorXd forward(const GInvNet& net, const Matrix& x) { return forward(Model(net), x); }
Eigen::VectorXd forward_gavg(const GAvgNet& net, const Matrix& x) { return forward(Model(net), x); }

double relative_deviation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "relative_deviation: sizes differ");
  return ((a - b).array().abs() / (1.0 + b.array().abs())).maxCoeff();
}

double max_invariance_deviation(const Model& model, std::span<const Matrix> inputs) {
  const PermGroup& group = group_of(model);
  const int n = group.degree();
  const auto m = static_cast<Eigen::Index>(group.order());
  double worst = 0.0;
  for (const Matrix& x : inputs) {
    if (x.rows() != n || x.cols() != input_width(model)) {
      throw Error(Errc::ShapeMismatch, "audit input has the wrong shape");
    }
    // Example 0 of the batch is the identity, i.e. x itself.
    Matrix batch(m * n, x.cols());
    for (Eigen::Index g = 0; g < m; ++g) batch.middleRows(g * n, n) = act(group[static_cast<std::size_t>(g)], x);
    const Matrix out = predict(model, batch);
    const Eigen::VectorXd reference = out.row(0).transpose();
    for (Eigen::Index g = 1; g < m; ++g) {
      worst = std::max(worst, relative_deviation(out.row(g).transpose(), reference));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

long long count_mults_ginv(long long n, long long n_in, long long n_mid, long long m) {
  return n * n * n_in * n_mid + m * (n - 1) * n_mid;
}

long long count_mults_gavg(long long n, long long n_in, long long n_mid, long long m) {
  return m * n * n_in * n_mid;
}

long long memory_cells(long long n, long long n_mid) { return n * n * n_mid; }

}  // namespace ginv
