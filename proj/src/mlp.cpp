#include "ginv/mlp.hpp"

#include <cmath>
#include <string>

namespace ginv {

MlpSpec MlpSpec::uniform(int input, std::vector<int> hidden, int output, ad::Activation act) {
  MlpSpec s;
  s.input = input;
  s.hidden_activation.assign(hidden.size(), act);
  s.hidden = std::move(hidden);
  s.output = output;
  return s;
}

long MlpSpec::param_count() const {
  long total = 0;
  for (int l = 0; l < layers(); ++l) {
    total += static_cast<long>(fan_in(l)) * fan_out(l) + fan_out(l);
  }
  return total;
}

void MlpSpec::validate() const {
  if (input < 1 || output < 1) throw Error(Errc::ShapeMismatch, "MLP widths must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw Error(Errc::ShapeMismatch, "MLP hidden widths must be >= 1");
  }
  if (hidden_activation.size() != hidden.size()) {
    throw Error(Errc::ShapeMismatch, "MLP needs one activation per hidden layer");
  }
}

Mlp Mlp::init(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp m{spec, {}};
  for (int l = 0; l < spec.layers(); ++l) {
    const int in = spec.fan_in(l);
    const int out = spec.fan_out(l);
    const double limit = std::sqrt(6.0 / (in + out));
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
    m.params.push_back(std::move(w));
    m.params.push_back(Matrix::Zero(1, out));
  }
  return m;
}

Mlp Mlp::zeros(const MlpSpec& spec) {
  spec.validate();
  Mlp m{spec, {}};
  for (int l = 0; l < spec.layers(); ++l) {
    m.params.push_back(Matrix::Zero(spec.fan_in(l), spec.fan_out(l)));
    m.params.push_back(Matrix::Zero(1, spec.fan_out(l)));
  }
  return m;
}

ad::Var mlp_forward(const MlpSpec& spec, std::span<const ad::Var> params, ad::Var x) {
  if (params.size() != static_cast<std::size_t>(2 * spec.layers())) {
    throw Error(Errc::ShapeMismatch, "MLP expects " + std::to_string(2 * spec.layers()) +
                                         " parameter tensors, got " + std::to_string(params.size()));
  }
  if (x.cols() != spec.input) {
    throw Error(Errc::ShapeMismatch, "MLP input width " + std::to_string(x.cols()) + ", expected " +
                                         std::to_string(spec.input));
  }
  ad::Var h = x;
  for (int l = 0; l < spec.layers(); ++l) {
    h = ad::add_bias(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    const auto act = l + 1 < spec.layers() ? spec.hidden_activation[l] : spec.final_activation;
    if (act != ad::Activation::Identity) h = ad::activation(h, act);
  }
  return h;
}

}  // namespace ginv
