#include <doctest.h>

#include "ginv/ginvnet.hpp"
#include "ginv/tasks.hpp"
#include "support.hpp"

using ginv::GInvConfig;
using ginv::GInvNet;
using ginv::Matrix;
using ginv::PermGroup;
using ginv::Tensor;

namespace {

GInvConfig small_config(int n_in = 2) {
  GInvConfig c;
  c.n_in = n_in;
  c.n_mid = 4;
  c.phi_hidden = {5};
  c.fout_hidden = {6};
  return c;
}

GInvNet small_net(const char* spec, std::uint64_t seed, int n_in = 2) {
  ginv::Rng rng(seed);
  return GInvNet::init(ginv::named_group(spec), spec, small_config(n_in), rng);
}

}  // namespace

TEST_CASE("forward_fin with a single element") {
  const GInvNet net = small_net("cyclic:1", 1);
  const Matrix x = (Matrix(1, 2) << 0.3, -0.7).finished();
  const Tensor t = ginv::forward_fin(net, x);
  CHECK(t.shape() == Tensor::Shape{1, 1, 4});

  ginv::ad::Tape tape;
  const auto& head = std::get<ginv::Mlp>(net.heads[0]);
  std::vector<ginv::ad::Var> params;
  for (const auto& p : head.params) params.push_back(tape.leaf(p));
  const Matrix phi = ginv::mlp_forward(head.spec, params, tape.leaf(x)).value();
  for (int k = 0; k < 4; ++k) CHECK(t(0, 0, k) == phi(0, k));
}

TEST_CASE("forward_fin is equivariant bit for bit") {
  ginv::Rng rng(17);
  for (const char* spec : testing::kAuditGroups) {
    CAPTURE(spec);
    const GInvNet net = small_net(spec, 3);
    const int n = net.degree();
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix x = testing::random_matrix(rng, n, 2);
      const Tensor base = ginv::forward_fin(net, x);
      for (const auto& g : net.group.elements()) {
        const Tensor moved = ginv::forward_fin(net, ginv::act(g, x));
        bool exact = true;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < net.n_mid; ++k) exact = exact && moved(i, j, k) == base(g(i), j, k);
        CHECK(exact);
      }
    }
  }
}

TEST_CASE("forward_fin with monomial heads") {
  const auto net = testing::monomial_net(ginv::named_group("cyclic:3"), {1, 2, 3});
  const Matrix x = (Matrix(3, 1) << 2, 3, 5).finished();
  const Tensor t = ginv::forward_fin(net, x);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(t(i, j, 0) == std::pow(x(i, 0), j + 1));
}

TEST_CASE("sigma_pi small cases") {
  const PermGroup s2 = ginv::named_group("symmetric:2");
  Tensor t({2, 2, 1});
  const double a = 1.5, b = -2.0, c = 3.0, d = 0.25;
  t(0, 0, 0) = a;
  t(0, 1, 0) = b;
  t(1, 0, 0) = c;
  t(1, 1, 0) = d;
  CHECK(ginv::sigma_pi(s2, t)(0) == doctest::Approx(a * d + c * b).epsilon(1e-15));

  for (const char* spec : testing::kAuditGroups) {
    const PermGroup g = ginv::named_group(spec);
    const Tensor ones({g.degree(), g.degree(), 3}, 1.0);
    const Eigen::VectorXd out = ginv::sigma_pi(g, ones);
    CHECK(out == Eigen::VectorXd::Constant(3, static_cast<double>(g.order())));
  }
  CHECK_THROWS_AS(ginv::sigma_pi(s2, Tensor({3, 3, 1})), ginv::Error);
}

TEST_CASE("sigma_pi is invariant under row permutations by group elements") {
  ginv::Rng rng(99);
  for (const char* spec : testing::kAuditGroups) {
    CAPTURE(spec);
    const PermGroup g = ginv::named_group(spec);
    const int n = g.degree();
    Tensor t({n, n, 2});
    for (Eigen::Index i = 0; i < t.size(); ++i) t.values()[i] = rng.uniform(-1, 1);
    const Eigen::VectorXd base = ginv::sigma_pi(g, t);
    for (const auto& h : g.elements()) {
      Tensor moved({n, n, 2});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < 2; ++k) moved(i, j, k) = t(h(i), j, k);
      CHECK(ginv::relative_deviation(ginv::sigma_pi(g, moved), base) <= 1e-9);
    }
  }
}

TEST_CASE("batched sigma_pi matches the single-example version") {
  ginv::Rng rng(4);
  const PermGroup g = ginv::named_group("dihedral:5");
  const int n = 5, batch = 3, n_mid = 2;
  const Matrix stacked = testing::random_matrix(rng, n * batch * n, n_mid);
  ginv::ad::Tape tape;
  const Matrix out = ginv::sigma_pi(g, tape.leaf(stacked), batch).value();
  for (int b = 0; b < batch; ++b) {
    Tensor t({n, n, n_mid});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n_mid; ++k) t(i, j, k) = stacked(j * batch * n + b * n + i, k);
    const Eigen::VectorXd single = ginv::sigma_pi(g, t);
    for (int k = 0; k < n_mid; ++k) CHECK(out(b, k) == doctest::Approx(single(k)).epsilon(1e-14));
  }
}

TEST_CASE("G-inv network is invariant") {
  ginv::Rng rng(123);
  for (const char* spec : testing::kAuditGroups) {
    CAPTURE(spec);
    const ginv::Model model = small_net(spec, 7);
    std::vector<Matrix> xs;
    for (int t = 0; t < 100; ++t) xs.push_back(testing::random_matrix(rng, ginv::group_of(model).degree(), 2));
    CHECK(ginv::max_invariance_deviation(model, xs) <= 1e-9);
  }
}

TEST_CASE("quadrangle net sees cyclic shifts but not other orderings") {
  ginv::Rng rng(5);
  const GInvNet net = GInvNet::init(ginv::named_group("cyclic:4"), "cyclic:4", GInvConfig::quadrangle(), rng);
  Matrix abcd(4, 2);
  abcd << 0.1, 0.2, 0.9, 0.1, 0.8, 0.7, 0.2, 0.9;
  const Matrix cdab = ginv::act(ginv::Permutation({2, 3, 0, 1}), abcd);
  const Matrix acbd = ginv::act(ginv::Permutation({0, 2, 1, 3}), abcd);
  const auto y = ginv::forward(net, abcd);
  CHECK(ginv::relative_deviation(ginv::forward(net, cdab), y) <= 1e-12);
  CHECK(ginv::relative_deviation(ginv::forward(net, acbd), y) > 1e-6);
}

TEST_CASE("monomial network reproduces the target polynomial") {
  ginv::Rng rng(31);
  const ginv::PolyTarget target = ginv::PolyTarget::standard();
  const GInvNet net = testing::monomial_net(target.group, target.exponents);
  for (int t = 0; t < 100; ++t) {
    const Matrix x = testing::random_matrix(rng, 5, 1, 0.0, 1.0);
    const double expected = ginv::target_polynomial(target, std::span(x.data(), 5));
    CHECK(testing::rel_diff(ginv::forward(net, x)(0), expected) <= 1e-12);
  }
}

TEST_CASE("group averaging") {
  ginv::Rng rng(77);
  ginv::GAvgConfig config;
  config.n_in = 2;
  config.hidden = {6, 5};

  SUBCASE("invariant for every audit group") {
    for (const char* spec : testing::kAuditGroups) {
      CAPTURE(spec);
      const ginv::Model model = ginv::GAvgNet::init(ginv::named_group(spec), spec, config, rng);
      std::vector<Matrix> xs;
      for (int t = 0; t < 100; ++t) xs.push_back(testing::random_matrix(rng, ginv::group_of(model).degree(), 2));
      CHECK(ginv::max_invariance_deviation(model, xs) <= 1e-9);
    }
  }
  SUBCASE("trivial group gives the base network") {
    const auto trivial = ginv::named_group("gen:3:()");
    const auto gavg = ginv::GAvgNet::init(trivial, "gen:3:()", config, rng);
    ginv::PlainNet plain{gavg.group, gavg.group_spec, gavg.n_in, gavg.base};
    const Matrix x = testing::random_matrix(rng, 3, 2);
    CHECK(ginv::forward_gavg(gavg, x) == ginv::forward(ginv::Model(plain), x));
  }
  SUBCASE("constant base network") {
    auto gavg = ginv::GAvgNet::init(ginv::named_group("symmetric:3"), "symmetric:3", config, rng);
    gavg.base = ginv::Mlp::zeros(gavg.base.spec);
    gavg.base.params.back()(0, 0) = 0.7;
    CHECK(ginv::forward_gavg(gavg, testing::random_matrix(rng, 3, 2))(0) == doctest::Approx(0.7).epsilon(1e-15));
  }
}

TEST_CASE("plain MLP is not invariant") {
  ginv::Rng rng(8);
  ginv::GAvgConfig config;
  config.n_in = 1;
  config.hidden = {8};
  const ginv::Model model = ginv::PlainNet::init(ginv::named_group("cyclic:5"), "cyclic:5", config, rng);
  std::vector<Matrix> xs{testing::random_matrix(rng, 5, 1)};
  CHECK(ginv::max_invariance_deviation(model, xs) > 1e-6);
}

TEST_CASE("param_count") {
  CHECK(ginv::MlpSpec::uniform(2, {4}, 1, ginv::ad::Activation::Tanh).param_count() == 17);

  ginv::Rng rng(1);
  const auto poly = GInvNet::init(ginv::named_group("cyclic:5"), "cyclic:5", GInvConfig::polynomial(), rng);
  const long poly_count = ginv::param_count(poly);
  CHECK(poly_count >= 21600);
  CHECK(poly_count <= 26400);

  const auto quad = GInvNet::init(ginv::named_group("cyclic:4"), "cyclic:4", GInvConfig::quadrangle(), rng);
  const long quad_count = ginv::param_count(quad);
  CHECK(quad_count >= 1700);
  CHECK(quad_count <= 1800);

  long stored = 0;
  ginv::Model m = poly;
  for (const Matrix* p : ginv::parameters(m)) stored += p->size();
  CHECK(stored == poly_count);

  // Baselines get a matching budget.
  const auto gavg_poly = ginv::GAvgNet::init(ginv::named_group("cyclic:5"), "cyclic:5", ginv::GAvgConfig::polynomial(), rng);
  const auto gavg_quad = ginv::GAvgNet::init(ginv::named_group("cyclic:4"), "cyclic:4", ginv::GAvgConfig::quadrangle(), rng);
  CHECK(std::abs(ginv::param_count(gavg_poly) - poly_count) <= poly_count / 10);
  CHECK(std::abs(ginv::param_count(gavg_quad) - quad_count) <= quad_count / 10);
  CHECK(ginv::param_count(testing::monomial_net(ginv::named_group("cyclic:3"), {1, 1, 1})) == 2);
}

TEST_CASE("initialisation is deterministic") {
  const ginv::Model a = small_net("cyclic:5", 42);
  const ginv::Model b = small_net("cyclic:5", 42);
  const ginv::Model c = small_net("cyclic:5", 43);
  const auto pa = ginv::parameters(a);
  const auto pb = ginv::parameters(b);
  const auto pc = ginv::parameters(c);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    same = same && *pa[i] == *pb[i];
    differs = differs || *pa[i] != *pc[i];
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("predict matches single forward passes") {
  ginv::Rng rng(2);
  const ginv::Model model = small_net("alternating:4", 9);
  const Matrix batch = testing::random_matrix(rng, 4 * 600, 2);
  const Matrix out = ginv::predict(model, batch);
  REQUIRE(out.rows() == 600);
  for (int b : {0, 511, 512, 599}) {
    CHECK(out(b, 0) == doctest::Approx(ginv::forward(model, batch.middleRows(b * 4, 4))(0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(ginv::predict(model, testing::random_matrix(rng, 6, 2)), ginv::Error);
}

TEST_CASE("cost model") {
  CHECK(ginv::count_mults_gavg(10, 2, 32, 14400) == 9216000);
  CHECK(ginv::count_mults_ginv(10, 2, 32, 14400) == 4153600);
  CHECK(ginv::memory_cells(5, 32) == 800);
  CHECK(ginv::memory_cells(10, 32) == 3200);
  CHECK(ginv::count_mults_ginv(1, 2, 32, 1) == 64);
}
