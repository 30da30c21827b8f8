#include "ginv/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ginv::io {

using nlohmann::json;

namespace {

[[noreturn]] void schema(const std::string& why) { throw Error(Errc::SchemaMismatch, why); }

// Structural surprises inside nlohmann (wrong type, missing element) become
// SchemaMismatch like every other malformed-file error.
template <typename F>
auto guarded(F&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    schema(e.what());
  }
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    schema(std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) schema(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    schema(std::string("bad value for '") + key + "': " + e.what());
  }
}

double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string hex_double(double v) {
  char buf[64];
  const bool negative = std::signbit(v);
  char* p = buf;
  if (negative) *p++ = '-';
  *p++ = '0';
  *p++ = 'x';
  auto [end, ec] = std::to_chars(p, buf + sizeof buf, std::abs(v), std::chars_format::hex);
  if (ec != std::errc{}) throw Error(Errc::Io, "hex formatting failed");
  return std::string(buf, end);
}

double parse_hex_double(const std::string& text) {
  std::string_view s = text;
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) schema("bad hex float '" + text + "'");
  s.remove_prefix(2);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc{} || ptr != s.data() + s.size()) schema("bad hex float '" + text + "'");
  return negative ? -v : v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Dataset

std::string dataset_to_json(const Dataset& d) {
  std::string out = "{\n";
  out += "  \"task\": " + json(d.task).dump() + ",\n";
  out += "  \"group_spec\": " + json(d.group_spec).dump() + ",\n";
  if (!d.exponents.empty()) out += "  \"exponents\": " + json(d.exponents).dump() + ",\n";
  out += "  \"seed\": " + std::to_string(d.seed) + ",\n";
  out += "  \"n\": " + std::to_string(d.n) + ",\n";
  out += "  \"n_in\": " + std::to_string(d.n_in) + ",\n";
  out += "  \"splits\": {\n";
  const std::pair<const char*, Split> splits[] = {{"train", Split::Train}, {"val", Split::Val}, {"test", Split::Test}};
  for (std::size_t s = 0; s < 3; ++s) {
    const auto [name, split] = splits[s];
    out += std::string("    \"") + name + "\": {\n      \"inputs\": [";
    const Eigen::Index first = d.offset(split);
    const Eigen::Index count = d.count(split);
    for (Eigen::Index k = first; k < first + count; ++k) {
      out += k == first ? "\n        [" : ",\n        [";
      for (int i = 0; i < d.n; ++i) {
        out += i == 0 ? "[" : ", [";
        for (int c = 0; c < d.n_in; ++c) {
          if (c) out += ", ";
          out += g17(d.inputs(k * d.n + i, c));
        }
        out += "]";
      }
      out += "]";
    }
    out += "\n      ],\n      \"targets\": [";
    for (Eigen::Index k = first; k < first + count; ++k) {
      out += k == first ? "\n        [" : ",\n        [";
      for (Eigen::Index c = 0; c < d.targets.cols(); ++c) {
        if (c) out += ", ";
        out += g17(d.targets(k, c));
      }
      out += "]";
    }
    out += "\n      ]\n    }";
    out += s + 1 < 3 ? ",\n" : "\n";
  }
  out += "  }\n}\n";
  return out;
}

static Dataset dataset_from_json_impl(const std::string& text) {
  const json j = parse(text);
  Dataset d;
  d.task = get<std::string>(j, "task");
  d.group_spec = get<std::string>(j, "group_spec");
  if (j.contains("exponents")) d.exponents = get<std::vector<int>>(j, "exponents");
  d.seed = get<std::uint64_t>(j, "seed");
  d.n = get<int>(j, "n");
  d.n_in = get<int>(j, "n_in");
  if (d.n < 1 || d.n_in < 1) schema("n and n_in must be positive");
  const json& splits = j.at("splits");
  std::vector<std::vector<std::vector<double>>> inputs[3];
  std::vector<std::vector<double>> targets[3];
  const char* names[] = {"train", "val", "test"};
  Eigen::Index total = 0;
  Eigen::Index n_out = -1;
  for (int s = 0; s < 3; ++s) {
    if (!splits.contains(names[s])) schema(std::string("missing split '") + names[s] + "'");
    inputs[s] = get<std::vector<std::vector<std::vector<double>>>>(splits.at(names[s]), "inputs");
    targets[s] = get<std::vector<std::vector<double>>>(splits.at(names[s]), "targets");
    if (inputs[s].size() != targets[s].size()) schema(std::string(names[s]) + ": input/target counts differ");
    total += static_cast<Eigen::Index>(inputs[s].size());
    for (const auto& t : targets[s]) {
      if (n_out < 0) n_out = static_cast<Eigen::Index>(t.size());
      if (static_cast<Eigen::Index>(t.size()) != n_out || n_out < 1) schema("inconsistent target width");
    }
  }
  d.sizes = {static_cast<Eigen::Index>(inputs[0].size()), static_cast<Eigen::Index>(inputs[1].size()),
             static_cast<Eigen::Index>(inputs[2].size())};
  if (d.sizes.train < 1 || d.sizes.val < 1 || d.sizes.test < 1) schema("every split needs examples");
  d.inputs.resize(total * d.n, d.n_in);
  d.targets.resize(total, n_out);
  Eigen::Index k = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t e = 0; e < inputs[s].size(); ++e, ++k) {
      const auto& ex = inputs[s][e];
      if (static_cast<int>(ex.size()) != d.n) schema("example has wrong number of elements");
      for (int i = 0; i < d.n; ++i) {
        if (static_cast<int>(ex[i].size()) != d.n_in) schema("element has wrong width");
        for (int c = 0; c < d.n_in; ++c) d.inputs(k * d.n + i, c) = ex[i][c];
      }
      for (Eigen::Index c = 0; c < n_out; ++c) d.targets(k, c) = targets[s][e][c];
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

json spec_to_json(const MlpSpec& s) {
  json acts = json::array();
  for (auto a : s.hidden_activation) acts.push_back(std::string(ad::to_string(a)));
  return {{"input", s.input},
          {"hidden", s.hidden},
          {"output", s.output},
          {"hidden_activation", acts},
          {"final_activation", std::string(ad::to_string(s.final_activation))}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec s;
  s.input = get<int>(j, "input");
  s.hidden = get<std::vector<int>>(j, "hidden");
  s.output = get<int>(j, "output");
  for (const auto& a : get<std::vector<std::string>>(j, "hidden_activation")) {
    s.hidden_activation.push_back(ad::parse_activation(a));
  }
  s.final_activation = ad::parse_activation(get<std::string>(j, "final_activation"));
  try {
    s.validate();
  } catch (const Error& e) {
    schema(e.what());
  }
  return s;
}

void append_params(json& out, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t k = 0; k < mlp.params.size(); ++k) {
    const Matrix& p = mlp.params[k];
    json data = json::array();
    for (Eigen::Index i = 0; i < p.size(); ++i) data.push_back(hex_double(p.data()[i]));
    out.push_back({{"name", prefix + (k % 2 == 0 ? ".W" : ".b") + std::to_string(k / 2)},
                   {"shape", {p.rows(), p.cols()}},
                   {"data", std::move(data)}});
  }
}

void load_params(const json& params, std::size_t& cursor, const std::string& prefix, Mlp& mlp) {
  for (std::size_t k = 0; k < mlp.params.size(); ++k, ++cursor) {
    if (cursor >= params.size()) schema("too few parameter tensors");
    const json& p = params[cursor];
    const std::string want = prefix + (k % 2 == 0 ? ".W" : ".b") + std::to_string(k / 2);
    if (get<std::string>(p, "name") != want) schema("expected parameter '" + want + "'");
    const auto shape = get<std::vector<Eigen::Index>>(p, "shape");
    Matrix& m = mlp.params[k];
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols()) schema("shape mismatch for " + want);
    const auto data = get<std::vector<std::string>>(p, "data");
    if (static_cast<Eigen::Index>(data.size()) != m.size()) schema("value count mismatch for " + want);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = parse_hex_double(data[static_cast<std::size_t>(i)]);
  }
}

}  // namespace

std::string checkpoint_to_json(const Model& model) {
  json j;
  j["format"] = "ginv-checkpoint";
  j["version"] = 1;
  j["kind"] = std::string(kind_name(model));
  j["group_spec"] = group_spec_of(model);
  j["n_in"] = input_width(model);
  json params = json::array();
  if (const auto* net = std::get_if<GInvNet>(&model)) {
    j["n_mid"] = net->n_mid;
    j["n_out"] = net->n_out;
    json heads = json::array();
    for (std::size_t h = 0; h < net->heads.size(); ++h) {
      if (const auto* mlp = std::get_if<Mlp>(&net->heads[h])) {
        heads.push_back({{"type", "mlp"}, {"spec", spec_to_json(mlp->spec)}});
        append_params(params, "phi" + std::to_string(h), *mlp);
      } else {
        heads.push_back({{"type", "monomial"}, {"exponent", std::get<MonomialHead>(net->heads[h]).exponent}});
      }
    }
    j["heads"] = std::move(heads);
    j["fout"] = spec_to_json(net->fout.spec);
    append_params(params, "fout", net->fout);
  } else {
    const Mlp& base = std::visit(
        [](const auto& n) -> const Mlp& {
          if constexpr (std::is_same_v<std::decay_t<decltype(n)>, GInvNet>) {
            return n.fout;
          } else {
            return n.base;
          }
        },
        model);
    j["n_out"] = base.spec.output;
    j["base"] = spec_to_json(base.spec);
    append_params(params, "base", base);
  }
  j["params"] = std::move(params);
  return j.dump(1) + "\n";
}

static Model checkpoint_from_json_impl(const std::string& text) {
  const json j = parse(text);
  if (get<std::string>(j, "format") != "ginv-checkpoint") schema("not a checkpoint");
  const std::string kind = get<std::string>(j, "kind");
  const std::string spec = get<std::string>(j, "group_spec");
  PermGroup group = named_group(spec);
  const int n_in = get<int>(j, "n_in");
  const json& params = j.at("params");
  std::size_t cursor = 0;
  Model model;
  if (kind == "ginv") {
    GInvNet net;
    net.n_in = n_in;
    net.n_mid = get<int>(j, "n_mid");
    net.n_out = get<int>(j, "n_out");
    const json& heads = j.at("heads");
    if (static_cast<int>(heads.size()) != group.degree()) schema("head count differs from group degree");
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const auto type = get<std::string>(heads[h], "type");
      if (type == "mlp") {
        Mlp mlp = Mlp::zeros(spec_from_json(heads[h].at("spec")));
        if (mlp.spec.input != n_in || mlp.spec.output != net.n_mid) schema("head widths inconsistent");
        load_params(params, cursor, "phi" + std::to_string(h), mlp);
        net.heads.emplace_back(std::move(mlp));
      } else if (type == "monomial") {
        net.heads.emplace_back(MonomialHead{get<int>(heads[h], "exponent")});
      } else {
        schema("unknown head type '" + type + "'");
      }
    }
    net.fout = Mlp::zeros(spec_from_json(j.at("fout")));
    if (net.fout.spec.input != net.n_mid || net.fout.spec.output != net.n_out) schema("fout widths inconsistent");
    load_params(params, cursor, "fout", net.fout);
    net.group = std::move(group);
    net.group_spec = spec;
    model = std::move(net);
  } else if (kind == "gavg" || kind == "mlp") {
    Mlp base = Mlp::zeros(spec_from_json(j.at("base")));
    if (base.spec.input != group.degree() * n_in) schema("base input width must be n * n_in");
    load_params(params, cursor, "base", base);
    if (kind == "gavg") {
      model = GAvgNet{std::move(group), spec, n_in, std::move(base)};
    } else {
      model = PlainNet{std::move(group), spec, n_in, std::move(base)};
    }
  } else {
    schema("unknown model kind '" + kind + "'");
  }
  if (cursor != params.size()) schema("unexpected extra parameter tensors");
  return model;
}

// ---------------------------------------------------------------------------
// Reports

std::string report_to_json(const TrainReport& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds) {
    json history = json::array();
    for (const auto& [epoch, val] : s.val_history) history.push_back({epoch, nan_to_null(val)});
    seeds.push_back({{"seed", s.seed},
                     {"train_mae", nan_to_null(s.train_mae)},
                     {"val_mae", nan_to_null(s.val_mae)},
                     {"test_mae", nan_to_null(s.test_mae)},
                     {"epochs_run", s.epochs_run},
                     {"best_epoch", s.best_epoch},
                     {"param_count", s.param_count},
                     {"diverged", s.diverged},
                     {"val_history", std::move(history)}});
  }
  auto agg = [](const MeanStd& m) { return json{{"mean", nan_to_null(m.mean)}, {"std", nan_to_null(m.std)}}; };
  json j{{"model", r.model},       {"group", r.group},         {"task", r.task},
         {"param_count", r.param_count}, {"seeds", std::move(seeds)}, {"train", agg(r.train)},
         {"val", agg(r.val)},      {"test", agg(r.test)}};
  return j.dump(1) + "\n";
}

static TrainReport report_from_json_impl(const std::string& text) {
  const json j = parse(text);
  TrainReport r;
  r.model = get<std::string>(j, "model");
  r.group = get<std::string>(j, "group");
  r.task = get<std::string>(j, "task");
  r.param_count = get<long>(j, "param_count");
  if (!j.contains("seeds") || !j.at("seeds").is_array()) schema("missing seeds");
  for (const auto& s : j.at("seeds")) {
    SeedResult sr;
    sr.seed = get<std::uint64_t>(s, "seed");
    sr.train_mae = number_or_nan(s.at("train_mae"));
    sr.val_mae = number_or_nan(s.at("val_mae"));
    sr.test_mae = number_or_nan(s.at("test_mae"));
    sr.epochs_run = get<int>(s, "epochs_run");
    sr.best_epoch = get<int>(s, "best_epoch");
    sr.param_count = get<long>(s, "param_count");
    sr.diverged = get<bool>(s, "diverged");
    if (s.contains("val_history")) {
      for (const auto& h : s.at("val_history")) sr.val_history.emplace_back(h.at(0).get<int>(), number_or_nan(h.at(1)));
    }
    r.seeds.push_back(std::move(sr));
  }
  for (auto [key, field] : {std::pair{"train", &r.train}, std::pair{"val", &r.val}, std::pair{"test", &r.test}}) {
    if (!j.contains(key)) schema(std::string("missing '") + key + "'");
    field->mean = number_or_nan(j.at(key).at("mean"));
    field->std = number_or_nan(j.at(key).at("std"));
  }
  return r;
}

std::string report_csv_row(const TrainReport& r) {
  return r.model + "," + r.group + "," + std::to_string(r.succeeded()) + "," + g17(r.train.mean) + "," +
         g17(r.train.std) + "," + g17(r.val.mean) + "," + g17(r.val.std) + "," + g17(r.test.mean) + "," +
         g17(r.test.std) + "," + std::to_string(r.param_count);
}

std::string merge_reports(const std::vector<TrainReport>& reports, TableFormat format) {
  if (reports.empty()) throw Error(Errc::InvalidSpec, "no reports to merge");
  std::string out;
  if (format == TableFormat::Csv) {
    out = std::string(kCsvHeader) + "\n";
    for (const auto& r : reports) out += report_csv_row(r) + "\n";
    return out;
  }
  auto cell = [](const MeanStd& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g ± %.2g", m.mean, m.std);
    return std::string(buf);
  };
  auto network = [](const TrainReport& r) {
    std::string name = r.model == "ginv" ? "FC G-inv" : r.model == "gavg" ? "FC G-avg" : "MLP";
    return name + " (" + r.group + ")";
  };
  out = "| Network | Train | Validation | Test | #Weights |\n";
  out += "|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out += "| " + network(r) + " | " + cell(r.train) + " | " + cell(r.val) + " | " + cell(r.test) + " | " +
           std::to_string(r.param_count) + " |\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) schema(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) schema("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

static TrainConfig config_from_json_impl(const std::string& text) {
  const json j = parse(text);
  check_keys(j,
             {"model", "group_spec", "task", "learning_rate", "batch_size", "max_epochs", "patience", "eval_every",
              "seeds", "ginv", "gavg"},
             "config");
  const std::string task = j.contains("task") ? get<std::string>(j, "task") : "poly";
  const ModelKind kind = j.contains("model") ? parse_model_kind(get<std::string>(j, "model")) : ModelKind::GInv;
  TrainConfig c;
  if (task == "poly") {
    c = TrainConfig::polynomial(kind);
  } else if (task == "quad") {
    c = TrainConfig::quadrangle(kind);
  } else {
    schema("unknown task '" + task + "'");
  }
  if (j.contains("group_spec")) c.group_spec = get<std::string>(j, "group_spec");
  if (j.contains("learning_rate")) c.learning_rate = get<double>(j, "learning_rate");
  if (j.contains("batch_size")) c.batch_size = get<int>(j, "batch_size");
  if (j.contains("max_epochs")) c.max_epochs = get<int>(j, "max_epochs");
  if (j.contains("patience")) c.patience = get<int>(j, "patience");
  if (j.contains("eval_every")) c.eval_every = get<int>(j, "eval_every");
  if (j.contains("seeds")) c.seeds = get<std::vector<std::uint64_t>>(j, "seeds");
  if (j.contains("ginv")) {
    const json& g = j.at("ginv");
    check_keys(g, {"n_mid", "phi_hidden", "fout_hidden", "activation"}, "ginv");
    if (g.contains("n_mid")) c.ginv.n_mid = get<int>(g, "n_mid");
    if (g.contains("phi_hidden")) c.ginv.phi_hidden = get<std::vector<int>>(g, "phi_hidden");
    if (g.contains("fout_hidden")) c.ginv.fout_hidden = get<std::vector<int>>(g, "fout_hidden");
    if (g.contains("activation")) c.ginv.activation = ad::parse_activation(get<std::string>(g, "activation"));
  }
  if (j.contains("gavg")) {
    const json& g = j.at("gavg");
    check_keys(g, {"hidden", "activation"}, "gavg");
    if (g.contains("hidden")) c.gavg.hidden = get<std::vector<int>>(g, "hidden");
    if (g.contains("activation")) c.gavg.activation = ad::parse_activation(get<std::string>(g, "activation"));
  }
  c.validate();
  return c;
}

std::string config_to_json(const TrainConfig& c) {
  json j{{"model", std::string(to_string(c.model))},
         {"group_spec", c.group_spec},
         {"task", c.task},
         {"learning_rate", c.learning_rate},
         {"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},
         {"patience", c.patience},
         {"eval_every", c.eval_every},
         {"seeds", c.seeds},
         {"ginv",
          {{"n_mid", c.ginv.n_mid},
           {"phi_hidden", c.ginv.phi_hidden},
           {"fout_hidden", c.ginv.fout_hidden},
           {"activation", std::string(ad::to_string(c.ginv.activation))}}},
         {"gavg", {{"hidden", c.gavg.hidden}, {"activation", std::string(ad::to_string(c.gavg.activation))}}}};
  return j.dump(2) + "\n";
}

Dataset dataset_from_json(const std::string& text) {
  return guarded([&] { return dataset_from_json_impl(text); });
}

Model checkpoint_from_json(const std::string& text) {
  return guarded([&] { return checkpoint_from_json_impl(text); });
}

TrainReport report_from_json(const std::string& text) {
  return guarded([&] { return report_from_json_impl(text); });
}

TrainConfig config_from_json(const std::string& text) {
  return guarded([&] { return config_from_json_impl(text); });
}

}  // namespace ginv::io
