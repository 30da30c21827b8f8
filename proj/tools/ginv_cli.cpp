// ginv: command-line front end for the invariant-network library.
//
// Exit codes: 0 success, 1 audit or verification failure, 2 usage or spec error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ginv/ginvnet.hpp"
#include "ginv/io.hpp"
#include "ginv/permgroup.hpp"
#include "ginv/tasks.hpp"
#include "ginv/trainer.hpp"

namespace {

constexpr int kFailure = 1;
constexpr int kUsage = 2;

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) {
      throw ginv::Error(ginv::Errc::InvalidSpec, std::string("bad ") + what + " list '" + text + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ginv::Error(ginv::Errc::InvalidSpec, std::string("empty ") + what + " list");
  return out;
}

int threads_from_env() {
  if (const char* env = std::getenv("GINV_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return 1;
}

// --------------------------------------------------------------------------

struct GroupArgs {
  std::string spec;
  bool list = false;
  bool verify = false;
  std::size_t cap = ginv::kDefaultOrderCap;
};

int run_group(const GroupArgs& a) {
  const ginv::PermGroup g = ginv::named_group(a.spec, a.cap);
  std::cout << "degree " << g.degree() << ", order " << g.order() << "\n";
  if (a.list) {
    for (const auto& p : g.elements()) std::cout << ginv::to_cycle_string(p) << "\n";
  }
  if (a.verify) {
    const std::string problem = g.verify();
    if (!problem.empty()) {
      std::cout << "verify: FAILED (" << problem << ")\n";
      return kFailure;
    }
    std::cout << "verify: ok\n";
  }
  return 0;
}

struct GenArgs {
  std::string task;
  std::string group;
  std::string exponents;
  std::string sizes;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_data(const GenArgs& a) {
  ginv::Dataset d;
  if (a.task == "poly") {
    ginv::PolyTarget target = ginv::PolyTarget::standard();
    if (!a.group.empty()) {
      target.group_spec = a.group;
      target.group = ginv::named_group(a.group);
    }
    if (!a.exponents.empty()) target.exponents = parse_list<int>(a.exponents, "exponent");
    for (int e : target.exponents) {
      if (e < 0) throw ginv::Error(ginv::Errc::InvalidSpec, "exponents must be non-negative");
    }
    if (static_cast<int>(target.exponents.size()) != target.group.degree()) {
      throw ginv::Error(ginv::Errc::InvalidSpec, "need one exponent per group point");
    }
    ginv::SplitSizes sizes = ginv::kPolySizes;
    if (!a.sizes.empty()) {
      const auto s = parse_list<long>(a.sizes, "size");
      if (s.size() != 3) throw ginv::Error(ginv::Errc::InvalidSpec, "--sizes needs train,val,test");
      sizes = {s[0], s[1], s[2]};
    }
    d = ginv::gen_poly_dataset(target, sizes, a.seed);
  } else {
    if (!a.group.empty() && a.group != "cyclic:4") {
      throw ginv::Error(ginv::Errc::InvalidSpec, "the quad task is defined for cyclic:4 only");
    }
    if (!a.exponents.empty()) throw ginv::Error(ginv::Errc::InvalidSpec, "--exponents applies to poly only");
    ginv::SplitSizes sizes = ginv::kQuadSizes;
    if (!a.sizes.empty()) {
      const auto s = parse_list<long>(a.sizes, "size");
      if (s.size() != 3) throw ginv::Error(ginv::Errc::InvalidSpec, "--sizes needs train,val,test");
      sizes = {s[0], s[1], s[2]};
    }
    d = ginv::gen_quad_dataset(sizes, a.seed);
  }
  ginv::io::write_file(a.out, ginv::io::dataset_to_json(d));
  std::cout << "wrote " << d.sizes.total() << " examples (" << d.sizes.train << "/" << d.sizes.val << "/"
            << d.sizes.test << ") to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string model = "ginv";
  std::string data;
  std::string config;
  std::string seeds;
  std::string out_report;
  std::string out_ckpt;
  bool verbose = false;
};

int run_train(const TrainArgs& a) {
  const ginv::Dataset data = ginv::io::dataset_from_json(ginv::io::read_file(a.data));
  ginv::TrainConfig config;
  const ginv::ModelKind kind = ginv::parse_model_kind(a.model);
  if (!a.config.empty()) {
    config = ginv::io::config_from_json(ginv::io::read_file(a.config));
    config.model = kind;
  } else if (data.task == "quad") {
    config = ginv::TrainConfig::quadrangle(kind);
  } else {
    config = ginv::TrainConfig::polynomial(kind);
  }
  if (!a.seeds.empty()) config.seeds = parse_list<std::uint64_t>(a.seeds, "seed");
  if (config.task != data.task) {
    throw ginv::Error(ginv::Errc::InvalidSpec, "config task '" + config.task + "' does not match data task '" +
                                                   data.task + "'");
  }

  std::mutex log_mutex;
  ginv::TrainObserver observer;
  if (a.verbose) {
    observer = [&](std::uint64_t seed, int epoch, double val) {
      std::lock_guard lock(log_mutex);
      std::cerr << "seed " << seed << " epoch " << epoch << " val_mae " << val << "\n";
    };
  }
  const ginv::TrainOutcome outcome = ginv::train(config, data, threads_from_env(), observer);
  const ginv::TrainReport& report = outcome.report;

  for (const auto& s : report.seeds) {
    if (s.diverged) std::cerr << "seed " << s.seed << " diverged\n";
  }
  std::cout << ginv::io::kCsvHeader << "\n" << ginv::io::report_csv_row(report) << "\n";
  if (!a.out_report.empty()) {
    ginv::io::write_file(a.out_report, ginv::io::report_to_json(report));
    std::filesystem::path csv = a.out_report;
    csv.replace_extension(".csv");
    ginv::io::write_file(csv, std::string(ginv::io::kCsvHeader) + "\n" + ginv::io::report_csv_row(report) + "\n");
  }
  if (!a.out_ckpt.empty() && outcome.best_model) {
    ginv::io::write_file(a.out_ckpt, ginv::io::checkpoint_to_json(*outcome.best_model));
  }
  return report.succeeded() > 0 ? 0 : kFailure;
}

struct AuditArgs {
  std::string ckpt;
  std::string data;
  int trials = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
};

int run_audit(const AuditArgs& a) {
  ginv::Model model;
  try {
    model = ginv::io::checkpoint_from_json(ginv::io::read_file(a.ckpt));
  } catch (const ginv::Error& e) {
    std::cerr << "corrupt checkpoint: " << e.what() << "\n";
    return kUsage;
  }
  const int n = ginv::group_of(model).degree();
  const int n_in = ginv::input_width(model);
  std::vector<ginv::Matrix> inputs;
  if (!a.data.empty()) {
    const ginv::Dataset d = ginv::io::dataset_from_json(ginv::io::read_file(a.data));
    if (d.n != n || d.n_in != n_in) throw ginv::Error(ginv::Errc::InvalidSpec, "dataset shape does not fit checkpoint");
    const Eigen::Index total = d.sizes.total();
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(a.trials, total); ++k) inputs.push_back(d.example(k));
  } else {
    ginv::Rng rng(a.seed, {0x61756469u});
    for (int t = 0; t < a.trials; ++t) {
      ginv::Matrix x(n, n_in);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
      inputs.push_back(std::move(x));
    }
  }
  const double worst = ginv::max_invariance_deviation(model, inputs);
  const bool ok = worst <= a.tolerance;
  std::printf("kind %s, group %s (order %zu), trials %zu, max relative deviation %.3e: %s\n",
              std::string(ginv::kind_name(model)).c_str(), ginv::group_spec_of(model).c_str(),
              ginv::group_of(model).order(), inputs.size(), worst, ok ? "PASS" : "FAIL");
  return ok ? 0 : kFailure;
}

struct CostArgs {
  long long n = 0;
  long long n_in = 0;
  long long n_mid = 0;
  long long m = 0;
};

int run_cost(const CostArgs& a) {
  if (a.n < 1 || a.n_in < 1 || a.n_mid < 1 || a.m < 1) {
    throw ginv::Error(ginv::Errc::InvalidSpec, "all cost arguments must be >= 1");
  }
  std::printf("%-22s %lld\n", "mults_ginv", ginv::count_mults_ginv(a.n, a.n_in, a.n_mid, a.m));
  std::printf("%-22s %lld\n", "mults_gavg", ginv::count_mults_gavg(a.n, a.n_in, a.n_mid, a.m));
  std::printf("%-22s %lld\n", "memory_cells", ginv::memory_cells(a.n, a.n_mid));
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "markdown";
};

int run_report(const ReportArgs& a) {
  if (a.inputs.empty()) throw ginv::Error(ginv::Errc::InvalidSpec, "no report files given");
  std::vector<ginv::TrainReport> reports;
  for (const auto& path : a.inputs) reports.push_back(ginv::io::report_from_json(ginv::io::read_file(path)));
  const auto fmt = a.format == "csv" ? ginv::io::TableFormat::Csv : ginv::io::TableFormat::Markdown;
  std::cout << ginv::io::merge_reports(reports, fmt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation-group invariant networks: groups, datasets, training, audits"};
  app.require_subcommand(1);

  GroupArgs group_args;
  auto* group = app.add_subcommand("group", "Inspect a permutation group");
  group->add_option("--spec", group_args.spec, "Group spec, e.g. cyclic:5 or product:symmetric:2,symmetric:3")
      ->required();
  group->add_flag("--list-elements", group_args.list, "Print every element in cycle notation");
  group->add_flag("--verify", group_args.verify, "Check closure, identity and inverses");
  group->add_option("--cap", group_args.cap, "Maximum group order");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Generate a task dataset");
  gen->add_option("--task", gen_args.task, "poly or quad")->required()->check(CLI::IsMember({"poly", "quad"}));
  gen->add_option("--group", gen_args.group, "Group spec (poly defaults to cyclic:5)");
  gen->add_option("--exponents", gen_args.exponents, "Comma-separated monomial exponents");
  gen->add_option("--sizes", gen_args.sizes, "train,val,test");
  gen->add_option("--seed", gen_args.seed, "Generator seed");
  gen->add_option("--out", gen_args.out, "Output JSON file")->required();

  TrainArgs train_args;
  auto* trn = app.add_subcommand("train", "Train a model on a dataset");
  trn->add_option("--model", train_args.model, "ginv, gavg or mlp")->check(CLI::IsMember({"ginv", "gavg", "mlp"}));
  trn->add_option("--data", train_args.data, "Dataset JSON")->required();
  trn->add_option("--config", train_args.config, "Train config JSON");
  trn->add_option("--seeds", train_args.seeds, "Comma-separated seeds");
  trn->add_option("--out-report", train_args.out_report, "Report JSON (a .csv is written alongside)");
  trn->add_option("--out-ckpt", train_args.out_ckpt, "Checkpoint of the best seed");
  trn->add_flag("--verbose", train_args.verbose, "Log every validation evaluation");

  AuditArgs audit_args;
  auto* aud = app.add_subcommand("audit", "Measure invariance of a checkpoint");
  aud->add_option("--ckpt", audit_args.ckpt, "Checkpoint JSON")->required();
  aud->add_option("--data", audit_args.data, "Take inputs from a dataset instead of sampling");
  aud->add_option("--trials", audit_args.trials, "Number of inputs")->check(CLI::PositiveNumber);
  aud->add_option("--seed", audit_args.seed, "Seed for sampled inputs");
  aud->add_option("--tolerance", audit_args.tolerance, "Maximum accepted relative deviation");

  CostArgs cost_args;
  auto* cost = app.add_subcommand("cost", "Multiplication and memory counts");
  cost->add_option("--n", cost_args.n)->required();
  cost->add_option("--n-in", cost_args.n_in)->required();
  cost->add_option("--n-mid", cost_args.n_mid)->required();
  cost->add_option("--group-order", cost_args.m)->required();

  ReportArgs report_args;
  auto* rep = app.add_subcommand("report", "Merge training reports into one table");
  rep->add_option("--in", report_args.inputs, "Report JSON files");
  rep->add_option("--format", report_args.format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*group) return run_group(group_args);
    if (*gen) return run_gen_data(gen_args);
    if (*trn) return run_train(train_args);
    if (*aud) return run_audit(audit_args);
    if (*cost) return run_cost(cost_args);
    if (*rep) return run_report(report_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
