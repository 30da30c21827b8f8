#include "ginv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ginv::ad {

namespace {

template <typename Expr>
void accumulate(std::vector<Matrix>& grads, std::size_t id, const Expr& g) {
  if (grads[id].size() == 0) {
    grads[id] = g;
  } else {
    grads[id] += g;
  }
}

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + ")";
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw Error(Errc::ShapeMismatch, "operands recorded on different tapes");
  }
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw Error(Errc::UnknownActivation, "'" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::record(Matrix value, Backward backward) {
  if (checked_) {
    if (!value.allFinite()) throw Error(Errc::NonFiniteValue, "NaN or Inf recorded on tape");
    if (value.size() > 0 && value.cwiseAbs().maxCoeff() > 1e100) {
      throw Error(Errc::NonFiniteValue, "magnitude above 1e100 recorded on tape");
    }
  }
  nodes_.push_back(Node{std::move(value), std::move(backward)});
  return Var{this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw Error(Errc::ShapeMismatch, "loss belongs to another tape");
  const Matrix& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw Error(Errc::NonScalarLoss, "loss has shape " + shape_str(lv));
  }
  std::vector<Matrix> grads(nodes_.size());
  grads[loss.id] = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (grads[i].size() == 0 || !nodes_[i].backward) continue;
    nodes_[i].backward(*this, grads[i], grads);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (grads[i].size() == 0) grads[i] = Matrix::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  return Gradients(std::move(grads));
}

// ---------------------------------------------------------------------------
// Primitive ops

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw Error(Errc::ShapeMismatch, "matmul " + shape_str(a.value()) + " x " + shape_str(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape->record(std::move(out), [ia = a.id, ib = b.id](const Tape& t, const Matrix& g,
                                                               std::vector<Matrix>& grads) {
    accumulate(grads, ia, g * t.value(ib).transpose());
    accumulate(grads, ib, t.value(ia).transpose() * g);
  });
}

Var add_bias(Var a, Var bias) {
  require_same_tape(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw Error(Errc::ShapeMismatch,
                "add_bias " + shape_str(a.value()) + " + " + shape_str(bias.value()));
  }
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.tape->record(std::move(out), [ia = a.id, ib = bias.id](const Tape&, const Matrix& g,
                                                                  std::vector<Matrix>& grads) {
    accumulate(grads, ia, g);
    accumulate(grads, ib, g.colwise().sum());
  });
}

Var activation(Var a, Activation kind) {
  const Matrix& x = a.value();
  switch (kind) {
    case Activation::Identity:
      return a.tape->record(x, [ia = a.id](const Tape&, const Matrix& g, std::vector<Matrix>& grads) {
        accumulate(grads, ia, g);
      });
    case Activation::Tanh: {
      Matrix out = x.array().tanh().matrix();
      Tape* tape = a.tape;
      const std::size_t self = tape->size();
      return tape->record(std::move(out), [ia = a.id, self](const Tape& t, const Matrix& g,
                                                             std::vector<Matrix>& grads) {
        const auto y = t.value(self).array();
        accumulate(grads, ia, (g.array() * (1.0 - y.square())).matrix());
      });
    }
    case Activation::Relu: {
      Matrix out = x.cwiseMax(0.0);
      return a.tape->record(std::move(out), [ia = a.id](const Tape& t, const Matrix& g,
                                                         std::vector<Matrix>& grads) {
        const auto mask = (t.value(ia).array() > 0.0).cast<double>();
        accumulate(grads, ia, (g.array() * mask).matrix());
      });
    }
  }
  throw Error(Errc::UnknownActivation, "unhandled activation");
}

Var scale(Var a, double factor) {
  Matrix out = a.value() * factor;
  return a.tape->record(std::move(out), [ia = a.id, factor](const Tape&, const Matrix& g,
                                                            std::vector<Matrix>& grads) {
    accumulate(grads, ia, g * factor);
  });
}

Var pow_int(Var a, int exponent) {
  if (exponent < 0) throw Error(Errc::ShapeMismatch, "pow_int needs a non-negative exponent");
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([exponent](double v) {
    double r = 1.0;
    for (int k = 0; k < exponent; ++k) r *= v;
    return r;
  });
  return a.tape->record(std::move(out), [ia = a.id, exponent](const Tape& t, const Matrix& g,
                                                              std::vector<Matrix>& grads) {
    if (exponent == 0) return;
    const Matrix d = t.value(ia).unaryExpr([exponent](double v) {
      double r = static_cast<double>(exponent);
      for (int k = 1; k < exponent; ++k) r *= v;
      return r;
    });
    accumulate(grads, ia, g.cwiseProduct(d));
  });
}

Var sum_axis(Var a, int axis) {
  if (axis != 0 && axis != 1) throw Error(Errc::ShapeMismatch, "sum_axis: axis must be 0 or 1");
  Matrix out = axis == 0 ? Matrix(a.value().colwise().sum()) : Matrix(a.value().rowwise().sum());
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return a.tape->record(std::move(out), [ia = a.id, axis, r, c](const Tape&, const Matrix& g,
                                                                std::vector<Matrix>& grads) {
    if (axis == 0) {
      accumulate(grads, ia, g.replicate(r, 1));
    } else {
      accumulate(grads, ia, g.replicate(1, c));
    }
  });
}

Var sum_segments(Var a, Eigen::Index block) {
  const Matrix& x = a.value();
  if (block < 1 || x.rows() % block != 0) {
    throw Error(Errc::ShapeMismatch, "sum_segments: " + std::to_string(x.rows()) +
                                         " rows not divisible by block " + std::to_string(block));
  }
  const Eigen::Index segments = x.rows() / block;
  Matrix out = Matrix::Zero(segments, x.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    for (Eigen::Index r = 0; r < block; ++r) out.row(s) += x.row(s * block + r);
  }
  return a.tape->record(std::move(out), [ia = a.id, block](const Tape&, const Matrix& g,
                                                           std::vector<Matrix>& grads) {
    Matrix expanded(g.rows() * block, g.cols());
    for (Eigen::Index s = 0; s < g.rows(); ++s) {
      expanded.middleRows(s * block, block) = g.row(s).replicate(block, 1);
    }
    accumulate(grads, ia, expanded);
  });
}

Var gather_rows(Var a, std::span<const Eigen::Index> index) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= x.rows()) {
      throw Error(Errc::ShapeMismatch, "gather_rows: index " + std::to_string(index[r]) +
                                           " outside " + std::to_string(x.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(r)) = x.row(index[r]);
  }
  std::vector<Eigen::Index> idx(index.begin(), index.end());
  const Eigen::Index rows = x.rows();
  return a.tape->record(std::move(out), [ia = a.id, idx = std::move(idx), rows](
                                            const Tape&, const Matrix& g, std::vector<Matrix>& grads) {
    Matrix scattered = Matrix::Zero(rows, g.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) scattered.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    accumulate(grads, ia, scattered);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    require_same_tape(p, parts.front());
    if (p.cols() != cols) throw Error(Errc::ShapeMismatch, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> pieces;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    pieces.emplace_back(p.id, p.rows());
    offset += p.rows();
  }
  return parts.front().tape->record(std::move(out), [pieces = std::move(pieces)](
                                                        const Tape&, const Matrix& g,
                                                        std::vector<Matrix>& grads) {
    Eigen::Index off = 0;
    for (const auto& [id, r] : pieces) {
      accumulate(grads, id, g.middleRows(off, r));
      off += r;
    }
  });
}

Var mae_loss(Var pred, const Matrix& target) {
  const Matrix& p = pred.value();
  if (p.rows() != target.rows() || p.cols() != target.cols()) {
    throw Error(Errc::ShapeMismatch, "mae_loss " + shape_str(p) + " vs " + shape_str(target));
  }
  const double count = static_cast<double>(p.size());
  Matrix out(1, 1);
  out(0, 0) = (p - target).cwiseAbs().sum() / count;
  return pred.tape->record(std::move(out), [ip = pred.id, target, count](
                                               const Tape& t, const Matrix& g,
                                               std::vector<Matrix>& grads) {
    const Matrix sign = (t.value(ip) - target).unaryExpr([](double r) {
      return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    });
    accumulate(grads, ip, sign * (g(0, 0) / count));
  });
}

Var product_over_sequence(Var a, Eigen::Index block) {
  const Matrix& x = a.value();
  if (block == 0) block = x.rows();
  if (block < 1 || x.rows() % block != 0) {
    throw Error(Errc::ShapeMismatch, "product_over_sequence: " + std::to_string(x.rows()) +
                                         " rows not divisible by block " + std::to_string(block));
  }
  const Eigen::Index segments = x.rows() / block;
  Matrix out = Matrix::Ones(segments, x.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    for (Eigen::Index r = 0; r < block; ++r) {
      out.row(s).array() *= x.row(s * block + r).array();
    }
  }
  return a.tape->record(std::move(out), [ia = a.id, block](const Tape& t, const Matrix& g,
                                                           std::vector<Matrix>& grads) {
    const Matrix& in = t.value(ia);
    const Eigen::Index d = in.cols();
    Matrix dx(in.rows(), d);
    Eigen::ArrayXXd prefix(block, d);
    Eigen::ArrayXXd run(1, d);
    for (Eigen::Index s = 0; s < g.rows(); ++s) {
      const Eigen::Index base = s * block;
      run.setOnes();
      for (Eigen::Index r = 0; r < block; ++r) {
        prefix.row(r) = run;
        run *= in.row(base + r).array();
      }
      run = g.row(s).array();
      for (Eigen::Index r = block; r-- > 0;) {
        dx.row(base + r) = (prefix.row(r) * run).matrix();
        run *= in.row(base + r).array();
      }
    }
    accumulate(grads, ia, dx);
  });
}

// ---------------------------------------------------------------------------

double grad_check(const std::function<Var(Tape&, std::span<const Var>)>& fn, std::span<const Matrix> xs,
                  double step) {
  auto bind = [&](Tape& tape, const std::vector<Matrix>& values) {
    std::vector<Var> vars;
    for (const auto& v : values) vars.push_back(tape.leaf(v));
    return vars;
  };
  std::vector<Matrix> probe(xs.begin(), xs.end());
  std::vector<Matrix> analytic;
  {
    Tape tape;
    const auto vars = bind(tape, probe);
    const Gradients grads = tape.backward(fn(tape, vars));
    for (const Var& v : vars) analytic.push_back(grads[v]);
  }
  auto eval = [&] {
    Tape tape;
    return fn(tape, bind(tape, probe)).value()(0, 0);
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (Eigen::Index i = 0; i < probe[k].size(); ++i) {
      double& entry = probe[k].data()[i];
      const double orig = entry;
      entry = orig + step;
      const double up = eval();
      entry = orig - step;
      const double down = eval();
      entry = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k].data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(const std::function<Var(Tape&, Var)>& fn, const Matrix& x, double step) {
  const Matrix xs[] = {x};
  return grad_check([&](Tape& tape, std::span<const Var> vars) { return fn(tape, vars[0]); }, xs, step);
}

}  // namespace ginv::ad
