#include "qmip/sat.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <random>
#include <sstream>

#include <json.hpp>

#include "qmip/error.hpp"

namespace qmip::sat {

namespace {

void check_clause(const Clause& c, std::size_t num_vars, std::size_t index) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (c[i].var >= num_vars) {
      throw InvalidArgument("clause " + std::to_string(index) + ": variable " +
                            std::to_string(c[i].var + 1) + " out of range 1.." +
                            std::to_string(num_vars));
    }
    for (std::size_t j = i + 1; j < 3; ++j) {
      if (c[i].var == c[j].var) {
        throw InvalidArgument("clause " + std::to_string(index) + ": repeated variable " +
                              std::to_string(c[i].var + 1));
      }
    }
  }
}

Literal literal_from_signed(long long v) {
  return Literal{static_cast<std::size_t>((v < 0 ? -v : v) - 1), v < 0};
}

long long signed_from_literal(const Literal& l) {
  const auto v = static_cast<long long>(l.var) + 1;
  return l.negated ? -v : v;
}

}  // namespace

Formula::Formula(std::size_t num_vars, std::vector<Clause> clauses, bool require_regular)
    : num_vars_(num_vars), clauses_(std::move(clauses)), regular_mode_(require_regular) {
  if (clauses_.empty()) throw InvalidArgument("formula needs at least one clause");
  if (num_vars_ < 3) throw InvalidArgument("formula needs at least three variables");
  occurrences_.assign(num_vars_, 0);
  for (std::size_t c = 0; c < clauses_.size(); ++c) {
    check_clause(clauses_[c], num_vars_, c);
    for (const auto& lit : clauses_[c]) ++occurrences_[lit.var];
  }
  if (regular_mode_) {
    const auto report = validate_regularity(*this);
    if (!report.regular) {
      throw InvalidArgument("regular mode: " + std::to_string(report.offending.size()) +
                            " variable(s) do not occur exactly 5 times");
    }
  }
}

int Formula::position_in(std::size_t c, std::size_t var) const {
  const auto& cl = clauses_.at(c);
  for (int i = 0; i < 3; ++i) {
    if (cl[static_cast<std::size_t>(i)].var == var) return i;
  }
  return -1;
}

bool Formula::satisfied_by(std::size_t c, Triple t) const {
  const auto& cl = clauses_.at(c);
  for (std::size_t i = 0; i < 3; ++i) {
    if (triple_bit(t, i) != cl[i].negated) return true;
  }
  return false;
}

Assignment Assignment::from_string(std::string_view bits) {
  std::vector<bool> out;
  out.reserve(bits.size());
  for (char ch : bits) {
    if (ch != '0' && ch != '1') throw InvalidArgument("assignment string must contain only 0/1");
    out.push_back(ch == '1');
  }
  return Assignment(std::move(out));
}

std::string Assignment::str() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

Triple Assignment::triple(const Formula& f, std::size_t c) const {
  const auto& cl = f.clause(c);
  Triple t = 0;
  for (std::size_t i = 0; i < 3; ++i) t = static_cast<Triple>((t << 1) | (bits_.at(cl[i].var) ? 1 : 0));
  return t;
}

std::size_t Assignment::violated_count(const Formula& f) const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < f.num_clauses(); ++c) n += satisfies(f, c) ? 0 : 1;
  return n;
}

void check_compatible(const Formula& f, const Assignment& t) {
  if (t.size() != f.num_vars()) {
    throw InvalidArgument("assignment has " + std::to_string(t.size()) + " bits, formula has " +
                          std::to_string(f.num_vars()) + " variables");
  }
}

// ---- DIMACS ---------------------------------------------------------------

Formula parse_dimacs(std::string_view text) {
  std::size_t declared_vars = 0;
  std::size_t declared_clauses = 0;
  bool have_header = false;
  std::size_t max_var = 0;
  std::vector<Clause> clauses;
  std::vector<long long> pending;
  std::size_t pending_line = 0;
  std::size_t pending_col = 0;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto line = text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;

    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    if (line[first] == 'c') continue;
    if (line[first] == '%') break;
    if (line[first] == 'p') {
      std::istringstream is{std::string(line.substr(first + 1))};
      std::string fmt;
      long long nv = -1;
      long long nc = -1;
      if (!(is >> fmt >> nv >> nc) || fmt != "cnf" || nv < 0 || nc < 0) {
        throw ParseError("malformed problem line", line_no, first + 1);
      }
      if (have_header) throw ParseError("duplicate problem line", line_no, first + 1);
      have_header = true;
      declared_vars = static_cast<std::size_t>(nv);
      declared_clauses = static_cast<std::size_t>(nc);
      continue;
    }

    std::size_t pos = first;
    while (pos < line.size()) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos >= line.size()) break;
      std::size_t tok_end = pos;
      while (tok_end < line.size() && !std::isspace(static_cast<unsigned char>(line[tok_end]))) ++tok_end;
      long long value = 0;
      const auto tok = line.substr(pos, tok_end - pos);
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("expected integer literal, got '" + std::string(tok) + "'", line_no, pos + 1);
      }
      if (value == 0) {
        if (pending.size() != 3) {
          throw ParseError("clause has " + std::to_string(pending.size()) + " literals, expected 3",
                           pending_line ? pending_line : line_no, pending_line ? pending_col : pos + 1);
        }
        Clause cl{literal_from_signed(pending[0]), literal_from_signed(pending[1]),
                  literal_from_signed(pending[2])};
        for (std::size_t i = 0; i < 3; ++i) {
          for (std::size_t j = i + 1; j < 3; ++j) {
            if (cl[i].var == cl[j].var) {
              throw ParseError("repeated variable " + std::to_string(cl[i].var + 1) + " in clause",
                               pending_line, pending_col);
            }
          }
          if (have_header && cl[i].var >= declared_vars) {
            throw ParseError("variable " + std::to_string(cl[i].var + 1) + " out of range 1.." +
                                 std::to_string(declared_vars),
                             pending_line, pending_col);
          }
          max_var = std::max(max_var, cl[i].var + 1);
        }
        clauses.push_back(cl);
        pending.clear();
        pending_line = 0;
      } else {
        if (pending.empty()) {
          pending_line = line_no;
          pending_col = pos + 1;
        }
        pending.push_back(value);
      }
      pos = tok_end;
    }
  }
  if (!pending.empty()) throw ParseError("unterminated clause (missing 0)", pending_line, pending_col);
  if (have_header && clauses.size() != declared_clauses) {
    throw ParseError("problem line declares " + std::to_string(declared_clauses) + " clauses, found " +
                         std::to_string(clauses.size()),
                     1, 1);
  }
  return Formula(have_header ? declared_vars : max_var, std::move(clauses));
}

std::string to_dimacs(const Formula& f) {
  std::ostringstream os;
  os << "p cnf " << f.num_vars() << ' ' << f.num_clauses() << '\n';
  for (const auto& cl : f.clauses()) {
    for (const auto& lit : cl) os << signed_from_literal(lit) << ' ';
    os << "0\n";
  }
  return os.str();
}

// ---- JSON -----------------------------------------------------------------

namespace {

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

Formula parse_json_formula(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(e.what(), line, col);
  }
  const nlohmann::json* list = &j;
  std::size_t num_vars = 0;
  bool have_vars = false;
  if (j.is_object()) {
    if (!j.contains("clauses")) throw ParseError("missing \"clauses\"", 1, 1);
    list = &j.at("clauses");
    if (j.contains("num_vars")) {
      if (!j.at("num_vars").is_number_unsigned()) throw ParseError("\"num_vars\" must be a non-negative integer", 1, 1);
      num_vars = j.at("num_vars").get<std::size_t>();
      have_vars = true;
    }
  }
  if (!list->is_array()) throw ParseError("clause list must be an array", 1, 1);
  std::vector<Clause> clauses;
  std::size_t max_var = 0;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& jc = (*list)[i];
    if (!jc.is_array() || jc.size() != 3) {
      throw ParseError("clause " + std::to_string(i) + " must have exactly 3 literals", 1, 1);
    }
    Clause cl;
    for (std::size_t k = 0; k < 3; ++k) {
      if (!jc[k].is_number_integer() || jc[k].get<long long>() == 0) {
        throw ParseError("clause " + std::to_string(i) + ": literal must be a non-zero integer", 1, 1);
      }
      cl[k] = literal_from_signed(jc[k].get<long long>());
      max_var = std::max(max_var, cl[k].var + 1);
    }
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a + 1; b < 3; ++b) {
        if (cl[a].var == cl[b].var) {
          throw ParseError("clause " + std::to_string(i) + ": repeated variable " + std::to_string(cl[a].var + 1), 1, 1);
        }
      }
      if (have_vars && cl[a].var >= num_vars) {
        throw ParseError("clause " + std::to_string(i) + ": variable " + std::to_string(cl[a].var + 1) + " out of range", 1, 1);
      }
    }
    clauses.push_back(cl);
  }
  return Formula(have_vars ? num_vars : max_var, std::move(clauses));
}

std::string to_json_string(const Formula& f) {
  nlohmann::json j;
  j["num_vars"] = f.num_vars();
  auto& arr = j["clauses"] = nlohmann::json::array();
  for (const auto& cl : f.clauses()) {
    arr.push_back({signed_from_literal(cl[0]), signed_from_literal(cl[1]), signed_from_literal(cl[2])});
  }
  return j.dump();
}

Formula parse_formula(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && (text[first] == '[' || text[first] == '{')) {
    return parse_json_formula(text);
  }
  return parse_dimacs(text);
}

// ---- analysis -------------------------------------------------------------

RegularityReport validate_regularity(const Formula& f) {
  RegularityReport r;
  r.counts = f.occurrences();
  for (std::size_t v = 0; v < r.counts.size(); ++v) {
    if (r.counts[v] != 5) r.offending.push_back(v);
  }
  r.regular = r.offending.empty();
  return r;
}

namespace {

std::uint64_t min_violations(const Formula& f, std::uint64_t* argmin) {
  const std::size_t n = f.num_vars();
  if (n > kMaxGapVars) {
    throw InstanceTooLarge("brute-force gap limited to " + std::to_string(kMaxGapVars) + " variables, got " +
                           std::to_string(n));
  }
  // Each clause is violated by exactly one pattern on its three variables.
  std::vector<std::uint64_t> mask(f.num_clauses());
  std::vector<std::uint64_t> bad(f.num_clauses());
  for (std::size_t c = 0; c < f.num_clauses(); ++c) {
    for (const auto& lit : f.clause(c)) {
      mask[c] |= std::uint64_t{1} << lit.var;
      if (lit.negated) bad[c] |= std::uint64_t{1} << lit.var;
    }
  }
  std::uint64_t best = f.num_clauses() + 1;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t a = 0; a < total && best > 0; ++a) {
    std::uint64_t viol = 0;
    for (std::size_t c = 0; c < mask.size(); ++c) viol += ((a & mask[c]) == bad[c]) ? 1 : 0;
    if (viol < best) {
      best = viol;
      *argmin = a;
    }
  }
  return best;
}

}  // namespace

Rational unsat_gap(const Formula& f) {
  std::uint64_t arg = 0;
  const auto v = min_violations(f, &arg);
  return Rational(static_cast<std::int64_t>(v), static_cast<std::int64_t>(f.num_clauses()));
}

Assignment best_assignment(const Formula& f) {
  std::uint64_t arg = 0;
  min_violations(f, &arg);
  std::vector<bool> bits(f.num_vars());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = ((arg >> i) & 1U) != 0;
  return Assignment(std::move(bits));
}

// ---- generators -----------------------------------------------------------

namespace {

bool distinct_triples(const std::vector<std::size_t>& slots) {
  for (std::size_t c = 0; c + 2 < slots.size(); c += 3) {
    if (slots[c] == slots[c + 1] || slots[c] == slots[c + 2] || slots[c + 1] == slots[c + 2]) return false;
  }
  return true;
}

// Flip one literal's sign if the planted assignment falsifies the clause.
void plant(Clause& cl, const Assignment& t, std::mt19937_64& rng) {
  bool sat = false;
  for (const auto& lit : cl) sat = sat || (t[lit.var] != lit.negated);
  if (!sat) {
    const auto i = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    cl[i].negated = !cl[i].negated;
  }
}

}  // namespace

std::pair<Formula, Assignment> generate_planted(std::uint64_t seed, std::size_t num_vars,
                                                std::size_t num_clauses, bool regular) {
  if (num_vars < 3 || num_clauses < 1) throw InvalidArgument("need N >= 3 and M >= 1");
  if (regular && 3 * num_clauses != 5 * num_vars) {
    throw InvalidArgument("regular instances need 3M = 5N (got N=" + std::to_string(num_vars) +
                          ", M=" + std::to_string(num_clauses) + ")");
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> bits(num_vars);
  for (std::size_t i = 0; i < num_vars; ++i) bits[i] = std::bernoulli_distribution(0.5)(rng);
  Assignment planted(std::move(bits));

  std::vector<Clause> clauses(num_clauses);
  if (regular) {
    std::vector<std::size_t> slots;
    for (std::size_t v = 0; v < num_vars; ++v) slots.insert(slots.end(), 5, v);
    // Shuffle, then repair clashing slots by swaps with random partners.
    std::shuffle(slots.begin(), slots.end(), rng);
    std::uniform_int_distribution<std::size_t> pick(0, slots.size() - 1);
    for (int guard = 0; !distinct_triples(slots); ++guard) {
      if (guard > 100000) throw InvalidArgument("could not build a regular instance");
      for (std::size_t c = 0; c < num_clauses; ++c) {
        auto* s = &slots[3 * c];
        if (s[0] == s[1] || s[0] == s[2] || s[1] == s[2]) {
          const std::size_t clash = (s[0] == s[1] || s[0] == s[2]) ? 3 * c : 3 * c + 1;
          std::swap(slots[clash], slots[pick(rng)]);
        }
      }
    }
    for (std::size_t c = 0; c < num_clauses; ++c) {
      for (std::size_t i = 0; i < 3; ++i) clauses[c][i].var = slots[3 * c + i];
    }
  } else {
    std::vector<std::size_t> vars(num_vars);
    for (std::size_t c = 0; c < num_clauses; ++c) {
      for (std::size_t v = 0; v < num_vars; ++v) vars[v] = v;
      for (std::size_t i = 0; i < 3; ++i) {
        const auto j = std::uniform_int_distribution<std::size_t>(i, num_vars - 1)(rng);
        std::swap(vars[i], vars[j]);
        clauses[c][i].var = vars[i];
      }
    }
  }
  for (auto& cl : clauses) {
    for (auto& lit : cl) lit.negated = std::bernoulli_distribution(0.5)(rng);
    plant(cl, planted, rng);
  }
  return {Formula(num_vars, std::move(clauses), regular), std::move(planted)};
}

Formula generate_random(std::uint64_t seed, std::size_t num_vars, std::size_t num_clauses) {
  if (num_vars < 3 || num_clauses < 1) throw InvalidArgument("need N >= 3 and M >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Clause> clauses(num_clauses);
  std::vector<std::size_t> vars(num_vars);
  for (auto& cl : clauses) {
    for (std::size_t v = 0; v < num_vars; ++v) vars[v] = v;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto j = std::uniform_int_distribution<std::size_t>(i, num_vars - 1)(rng);
      std::swap(vars[i], vars[j]);
      cl[i] = Literal{vars[i], std::bernoulli_distribution(0.5)(rng)};
    }
  }
  return Formula(num_vars, std::move(clauses));
}

Formula all_sign_patterns(std::size_t copies) {
  std::vector<Clause> clauses;
  for (std::size_t rep = 0; rep < copies; ++rep) {
    for (unsigned mask = 0; mask < 8; ++mask) {
      clauses.push_back(Clause{Literal{0, (mask & 4U) != 0}, Literal{1, (mask & 2U) != 0}, Literal{2, (mask & 1U) != 0}});
    }
  }
  return Formula(3, std::move(clauses));
}

}  // namespace qmip::sat
