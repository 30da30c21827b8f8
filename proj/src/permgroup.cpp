#include "ginv/permgroup.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <numeric>
#include <set>

namespace ginv {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedCycle: return "MalformedCycle";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::RepeatedIndex: return "RepeatedIndex";
    case Errc::DegreeMismatch: return "DegreeMismatch";
    case Errc::OrderCapExceeded: return "OrderCapExceeded";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnknownActivation: return "UnknownActivation";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::Diverged: return "Diverged";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Permutation

Permutation::Permutation(std::vector<int> mapping) : mapping_(std::move(mapping)) {
  if (mapping_.empty()) throw Error(Errc::InvalidSpec, "permutation of degree 0");
  std::vector<char> seen(mapping_.size(), 0);
  for (int v : mapping_) {
    if (v < 0 || static_cast<std::size_t>(v) >= mapping_.size() || seen[v]) {
      throw Error(Errc::InvalidSpec, "mapping is not a bijection");
    }
    seen[v] = 1;
  }
}

Permutation Permutation::identity(int degree) {
  std::vector<int> m(static_cast<std::size_t>(degree));
  std::iota(m.begin(), m.end(), 0);
  return Permutation(std::move(m));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < mapping_.size(); ++i) {
    if (mapping_[i] != static_cast<int>(i)) return false;
  }
  return true;
}

Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.degree() != q.degree()) {
    throw Error(Errc::DegreeMismatch, "compose: degrees " + std::to_string(p.degree()) +
                                          " and " + std::to_string(q.degree()));
  }
  std::vector<int> m(q.mapping().size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = p(q(static_cast<int>(i)));
  return Permutation(std::move(m));
}

Permutation inverse(const Permutation& p) {
  std::vector<int> m(p.mapping().size());
  for (int i = 0; i < p.degree(); ++i) m[static_cast<std::size_t>(p(i))] = i;
  return Permutation(std::move(m));
}

Permutation parse_cycles(std::string_view text, int degree) {
  if (degree < 1) throw Error(Errc::InvalidSpec, "degree must be >= 1");
  const std::string original(text);
  auto malformed = [&](const std::string& why) {
    return Error(Errc::MalformedCycle, "'" + original + "': " + why);
  };
  auto skip_ws = [&] {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
      text.remove_prefix(1);
    }
  };

  std::vector<int> mapping(static_cast<std::size_t>(degree));
  std::iota(mapping.begin(), mapping.end(), 0);
  std::vector<char> used(static_cast<std::size_t>(degree), 0);

  skip_ws();
  if (text.empty()) throw malformed("empty");
  bool any_cycle = false;
  while (true) {
    skip_ws();
    if (text.empty()) break;
    if (text.front() != '(') throw malformed("expected '('");
    text.remove_prefix(1);
    skip_ws();
    std::vector<int> cycle;
    if (!text.empty() && text.front() == ')') {
      // "()" is only valid as the whole permutation.
      text.remove_prefix(1);
      skip_ws();
      if (any_cycle || !text.empty()) throw malformed("empty cycle");
      return Permutation(std::move(mapping));
    }
    while (true) {
      skip_ws();
      int value = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec == std::errc::result_out_of_range) {
        throw Error(Errc::IndexOutOfRange, "'" + original + "': index overflows");
      }
      if (ec != std::errc{}) throw malformed("expected integer");
      text.remove_prefix(static_cast<std::size_t>(ptr - text.data()));
      if (value < 1 || value > degree) {
        throw Error(Errc::IndexOutOfRange, "'" + original + "': index " + std::to_string(value) +
                                               " outside 1.." + std::to_string(degree));
      }
      if (used[static_cast<std::size_t>(value - 1)]) {
        throw Error(Errc::RepeatedIndex,
                    "'" + original + "': index " + std::to_string(value) + " repeated");
      }
      used[static_cast<std::size_t>(value - 1)] = 1;
      cycle.push_back(value - 1);

      const std::size_t before = text.size();
      skip_ws();
      const bool had_ws = text.size() != before;
      if (text.empty()) throw malformed("unterminated cycle");
      if (text.front() == ')') {
        text.remove_prefix(1);
        break;
      }
      if (text.front() == ',') {
        text.remove_prefix(1);
      } else if (!had_ws) {
        throw malformed("unexpected character '" + std::string(1, text.front()) + "'");
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      mapping[static_cast<std::size_t>(cycle[k])] = cycle[(k + 1) % cycle.size()];
    }
    any_cycle = true;
  }
  return Permutation(std::move(mapping));
}

std::string to_cycle_string(const Permutation& p) {
  std::string out;
  std::vector<char> done(p.mapping().size(), 0);
  for (int start = 0; start < p.degree(); ++start) {
    if (done[start] || p(start) == start) continue;
    out += '(';
    int i = start;
    bool first = true;
    do {
      if (!first) out += ' ';
      out += std::to_string(i + 1);
      done[i] = 1;
      first = false;
      i = p(i);
    } while (i != start);
    out += ')';
  }
  return out.empty() ? "()" : out;
}

// ---------------------------------------------------------------------------
// PermGroup

PermGroup::PermGroup(int degree, std::vector<Permutation> elements)
    : degree_(degree), elements_(std::move(elements)), sorted_(elements_) {
  std::sort(sorted_.begin(), sorted_.end());
}

bool PermGroup::contains(const Permutation& p) const {
  return std::binary_search(sorted_.begin(), sorted_.end(), p);
}

std::string PermGroup::verify() const {
  if (elements_.empty()) return "empty group";
  if (!elements_.front().is_identity()) return "element 0 is not the identity";
  for (const auto& p : elements_) {
    if (p.degree() != degree_) return "element degree differs from group degree";
  }
  if (std::adjacent_find(sorted_.begin(), sorted_.end()) != sorted_.end()) {
    return "duplicate elements";
  }
  for (const auto& p : elements_) {
    if (!contains(inverse(p))) return "missing inverse of " + to_cycle_string(p);
    for (const auto& q : elements_) {
      if (!contains(compose(p, q))) {
        return "not closed: " + to_cycle_string(p) + " * " + to_cycle_string(q);
      }
    }
  }
  return {};
}

PermGroup closure(const std::vector<Permutation>& generators, std::size_t cap) {
  if (generators.empty()) throw Error(Errc::InvalidSpec, "closure: no generators");
  const int degree = generators.front().degree();
  for (const auto& g : generators) {
    if (g.degree() != degree) throw Error(Errc::DegreeMismatch, "closure: generator degrees differ");
  }

  std::vector<Permutation> elements{Permutation::identity(degree)};
  std::set<Permutation> seen{elements.front()};
  for (std::size_t head = 0; head < elements.size(); ++head) {
    for (const auto& g : generators) {
      Permutation next = compose(g, elements[head]);
      if (seen.insert(next).second) {
        if (elements.size() >= cap) {
          throw Error(Errc::OrderCapExceeded,
                      "closure exceeds cap of " + std::to_string(cap) + " elements");
        }
        elements.push_back(std::move(next));
      }
    }
  }
  return PermGroup(degree, std::move(elements));
}

// ---------------------------------------------------------------------------
// Group specifications

namespace {

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Cyclic: return "cyclic";
    case Family::Dihedral: return "dihedral";
    case Family::Symmetric: return "symmetric";
    case Family::Alternating: return "alternating";
  }
  return "";
}

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : text_(text), original_(text) {}

  GroupSpec parse_all() {
    GroupSpec spec = parse();
    if (!text_.empty()) fail("trailing characters '" + std::string(text_) + "'");
    return spec;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(Errc::InvalidSpec, "'" + std::string(original_) + "': " + why);
  }

  bool consume(std::string_view token) {
    if (text_.substr(0, token.size()) != token) return false;
    text_.remove_prefix(token.size());
    return true;
  }

  int integer() {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text_.data(), text_.data() + text_.size(), value);
    if (ec != std::errc{}) fail("expected integer");
    text_.remove_prefix(static_cast<std::size_t>(ptr - text_.data()));
    return value;
  }

  GroupSpec parse() {
    for (Family f : {Family::Cyclic, Family::Dihedral, Family::Symmetric, Family::Alternating}) {
      if (consume(std::string(family_name(f)) + ":")) {
        const int k = integer();
        if (k < 1) fail("family parameter must be >= 1");
        return GroupSpec{NamedFamily{f, k}};
      }
    }
    if (consume("product:")) {
      auto left = std::make_shared<const GroupSpec>(parse());
      if (!consume(",")) fail("expected ',' between product factors");
      auto right = std::make_shared<const GroupSpec>(parse());
      return GroupSpec{ProductSpec{std::move(left), std::move(right)}};
    }
    if (consume("gen:")) {
      GeneratorSpec gen;
      gen.degree = integer();
      if (gen.degree < 1) fail("degree must be >= 1");
      if (!consume(":")) fail("expected ':' after degree");
      while (true) {
        // A permutation is a run of parenthesised cycles.
        std::size_t len = 0;
        while (len < text_.size() && text_[len] == '(') {
          const auto close = text_.find(')', len);
          if (close == std::string_view::npos) fail("unterminated cycle");
          len = close + 1;
        }
        if (len == 0) fail("expected '(' in generator list");
        gen.cycles.emplace_back(text_.substr(0, len));
        text_.remove_prefix(len);
        if (!consume(";")) break;
      }
      return GroupSpec{std::move(gen)};
    }
    fail("unknown group family");
  }

  std::string_view text_;
  std::string_view original_;
};

Permutation cycle_of_length(int k, int degree, int offset = 0) {
  std::vector<int> m(static_cast<std::size_t>(degree));
  std::iota(m.begin(), m.end(), 0);
  for (int i = 0; i < k; ++i) m[offset + i] = offset + (i + 1) % k;
  return Permutation(std::move(m));
}

std::vector<Permutation> family_generators(Family family, int k) {
  std::vector<Permutation> gens{Permutation::identity(k)};
  switch (family) {
    case Family::Cyclic:
      gens.push_back(cycle_of_length(k, k));
      break;
    case Family::Dihedral: {
      if (k < 3) throw Error(Errc::InvalidSpec, "dihedral:K needs K >= 3");
      gens.push_back(cycle_of_length(k, k));
      std::vector<int> reflection(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) reflection[i] = k - 1 - i;
      gens.emplace_back(std::move(reflection));
      break;
    }
    case Family::Symmetric:
      if (k >= 2) {
        std::vector<int> swap(static_cast<std::size_t>(k));
        std::iota(swap.begin(), swap.end(), 0);
        std::swap(swap[0], swap[1]);
        gens.emplace_back(std::move(swap));
        gens.push_back(cycle_of_length(k, k));
      }
      break;
    case Family::Alternating:
      for (int i = 3; i <= k; ++i) {
        gens.push_back(parse_cycles("(1 2 " + std::to_string(i) + ")", k));
      }
      break;
  }
  return gens;
}

std::vector<Permutation> spec_generators(const GroupSpec& spec);

std::vector<Permutation> product_generators(const ProductSpec& prod) {
  const auto left = spec_generators(*prod.left);
  const auto right = spec_generators(*prod.right);
  const int k1 = left.front().degree();
  const int k2 = right.front().degree();
  std::vector<Permutation> gens;
  for (const auto& g : left) {
    std::vector<int> m(static_cast<std::size_t>(k1 + k2));
    std::iota(m.begin(), m.end(), 0);
    std::copy(g.mapping().begin(), g.mapping().end(), m.begin());
    gens.emplace_back(std::move(m));
  }
  for (const auto& g : right) {
    std::vector<int> m(static_cast<std::size_t>(k1 + k2));
    std::iota(m.begin(), m.end(), 0);
    for (int i = 0; i < k2; ++i) m[k1 + i] = k1 + g(i);
    gens.emplace_back(std::move(m));
  }
  return gens;
}

// Generator lists always start with the identity so that the degree is
// recoverable and trivial groups need no special case.
std::vector<Permutation> spec_generators(const GroupSpec& spec) {
  return std::visit(
      [](const auto& form) -> std::vector<Permutation> {
        using T = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<T, NamedFamily>) {
          return family_generators(form.family, form.k);
        } else if constexpr (std::is_same_v<T, ProductSpec>) {
          return product_generators(form);
        } else {
          std::vector<Permutation> gens{Permutation::identity(form.degree)};
          for (const auto& c : form.cycles) gens.push_back(parse_cycles(c, form.degree));
          return gens;
        }
      },
      spec.form);
}

}  // namespace

GroupSpec parse_group_spec(std::string_view text) { return SpecParser(text).parse_all(); }

std::string to_string(const GroupSpec& spec) {
  return std::visit(
      [](const auto& form) -> std::string {
        using T = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<T, NamedFamily>) {
          return std::string(family_name(form.family)) + ":" + std::to_string(form.k);
        } else if constexpr (std::is_same_v<T, ProductSpec>) {
          return "product:" + to_string(*form.left) + "," + to_string(*form.right);
        } else {
          std::string out = "gen:" + std::to_string(form.degree) + ":";
          for (std::size_t i = 0; i < form.cycles.size(); ++i) {
            if (i) out += ';';
            out += form.cycles[i];
          }
          return out;
        }
      },
      spec.form);
}

PermGroup named_group(const GroupSpec& spec, std::size_t cap) {
  return closure(spec_generators(spec), cap);
}

PermGroup named_group(std::string_view spec_text, std::size_t cap) {
  return named_group(parse_group_spec(spec_text), cap);
}

}  // namespace ginv
