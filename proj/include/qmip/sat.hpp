#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qmip/rational.hpp"

namespace qmip::sat {

/// A signed reference to a variable (0-based).
struct Literal {
  std::size_t var = 0;
  bool negated = false;

  friend bool operator==(const Literal&, const Literal&) = default;
};

/// Three literals over distinct variables. The stored order is the input order
/// and fixes the bit layout of a clause's answer triple.
using Clause = std::array<Literal, 3>;

/// Three answer bits for a clause packed as an integer in [0, 8): bit for the
/// first variable is the most significant.
using Triple = std::uint8_t;

constexpr bool triple_bit(Triple t, std::size_t position) { return ((t >> (2 - position)) & 1U) != 0; }

/// A 3-CNF formula with N variables and M clauses.
class Formula {
 public:
  Formula(std::size_t num_vars, std::vector<Clause> clauses, bool require_regular = false);

  std::size_t num_vars() const noexcept { return num_vars_; }
  std::size_t num_clauses() const noexcept { return clauses_.size(); }
  const std::vector<Clause>& clauses() const noexcept { return clauses_; }
  const Clause& clause(std::size_t c) const { return clauses_.at(c); }
  bool regular_mode() const noexcept { return regular_mode_; }

  /// Position of `var` inside clause `c`, or -1 if the variable does not occur.
  int position_in(std::size_t c, std::size_t var) const;
  bool contains(std::size_t c, std::size_t var) const { return position_in(c, var) >= 0; }

  /// Number of clauses each variable occurs in.
  const std::vector<std::size_t>& occurrences() const noexcept { return occurrences_; }

  /// True iff the answer triple satisfies clause `c`.
  bool satisfied_by(std::size_t c, Triple t) const;

  friend bool operator==(const Formula& a, const Formula& b) {
    return a.num_vars_ == b.num_vars_ && a.clauses_ == b.clauses_;
  }

 private:
  std::size_t num_vars_;
  std::vector<Clause> clauses_;
  std::vector<std::size_t> occurrences_;
  bool regular_mode_;
};

/// Truth assignment, bits[i] = T(v_i).
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::vector<bool> bits) : bits_(std::move(bits)) {}
  /// Parses a string of '0'/'1' characters.
  static Assignment from_string(std::string_view bits);

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_.at(i); }
  void set(std::size_t i, bool value) { bits_.at(i) = value; }
  const std::vector<bool>& bits() const noexcept { return bits_; }
  std::string str() const;

  /// T(y) for clause y, in clause-internal variable order.
  Triple triple(const Formula& f, std::size_t c) const;
  bool satisfies(const Formula& f, std::size_t c) const { return f.satisfied_by(c, triple(f, c)); }
  std::size_t violated_count(const Formula& f) const;

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<bool> bits_;
};

void check_compatible(const Formula& f, const Assignment& t);

// ---- parsing / serialization ----------------------------------------------

Formula parse_dimacs(std::string_view text);
/// Accepts {"num_vars": N, "clauses": [[..],..]} or a bare clause list.
Formula parse_json_formula(std::string_view text);
/// Dispatches on the first non-blank character ('[' or '{' means JSON).
Formula parse_formula(std::string_view text);

std::string to_dimacs(const Formula& f);
std::string to_json_string(const Formula& f);

// ---- analysis -------------------------------------------------------------

struct RegularityReport {
  std::vector<std::size_t> counts;
  std::vector<std::size_t> offending;  // variables whose count differs from 5
  bool regular = false;
};

RegularityReport validate_regularity(const Formula& f);

inline constexpr std::size_t kMaxGapVars = 24;

/// Minimum fraction of violated clauses over all 2^N assignments.
Rational unsat_gap(const Formula& f);

/// An assignment attaining unsat_gap (lexicographically first by index).
Assignment best_assignment(const Formula& f);

// ---- generators -----------------------------------------------------------

/// Random formula with a planted satisfying assignment. In regular mode every
/// variable occurs in exactly five clauses (requires 3M = 5N).
std::pair<Formula, Assignment> generate_planted(std::uint64_t seed, std::size_t num_vars,
                                                std::size_t num_clauses, bool regular);

/// Uniformly random 3-CNF (distinct variables per clause, random signs).
Formula generate_random(std::uint64_t seed, std::size_t num_vars, std::size_t num_clauses);

/// The eight sign patterns over three variables: minimal unsatisfiable 3-CNF.
Formula all_sign_patterns(std::size_t copies = 1);

}  // namespace qmip::sat
