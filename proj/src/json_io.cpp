#include <cmath>
#include <cstdio>
#include <sstream>

#include "qmip/error.hpp"
#include "qmip/harness.hpp"

namespace qmip::harness {

namespace {

void write_number(std::ostream& os, double v) {
  if (!std::isfinite(v)) {
    os << "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);  // folds -0 into 0
  os << buf;
}

void write(std::ostream& os, const Json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map keeps keys sorted
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(it.key()).dump() << ": ";
        write(os, it.value(), depth + 1);
      }
      os << "\n" << close << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write(os, j[i], depth + 1);
      }
      os << "\n" << close << "]";
      return;
    }
    case Json::value_t::number_float: write_number(os, j.get<double>()); return;
    default: os << j.dump(); return;
  }
}

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidArgument(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::size_t as_index(const Json& j, const char* what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw InvalidArgument(std::string(what) + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

sat::Assignment assignment_from(const sat::Formula& f, const Json& j) {
  if (!j.is_string()) throw InvalidArgument("assignments are strings of 0/1 characters");
  auto t = sat::Assignment::from_string(j.get<std::string>());
  sat::check_compatible(f, t);
  return t;
}

quantum::Operator side_operator(const Json& j, const protocol::SideLayout& layout, const char* who) {
  auto m = matrix_from_json(j);
  const auto dim = static_cast<Eigen::Index>(layout.operator_dim());
  if (m.rows() != dim || m.cols() != dim) {
    throw DimensionMismatch(std::string(who) + " operator must be " + std::to_string(dim) + "x" +
                            std::to_string(dim));
  }
  return quantum::Operator(std::move(m), layout.operator_dims());
}

Json node_to_json(const adversary::LoccNode& n) {
  Json ops = Json::array();
  for (const auto& m : n.operators) ops.push_back(matrix_to_json(m));
  Json next = Json::array();
  for (const auto& c : n.next) next.push_back(node_to_json(c));
  return {{"party", n.party == adversary::Party::alice ? "alice" : "bob"}, {"operators", ops}, {"next", next}};
}

adversary::LoccNode node_from_json(const Json& j, int depth) {
  if (depth > 64) throw InvalidArgument("LOCC script nested too deeply");
  adversary::LoccNode n;
  const auto party = require(j, "party").get<std::string>();
  if (party == "alice") {
    n.party = adversary::Party::alice;
  } else if (party == "bob") {
    n.party = adversary::Party::bob;
  } else {
    throw InvalidArgument("party must be \"alice\" or \"bob\", got \"" + party + "\"");
  }
  for (const auto& m : require(j, "operators")) n.operators.push_back(matrix_from_json(m));
  if (j.contains("next")) {
    for (const auto& c : j.at("next")) n.next.push_back(node_from_json(c, depth + 1));
  }
  return n;
}

}  // namespace

std::string dump_canonical(const Json& j) {
  std::ostringstream os;
  write(os, j, 0);
  os << "\n";
  return os.str();
}

Json matrix_to_json(const quantum::Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

quantum::Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidArgument("matrix must be a non-empty array of rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  quantum::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InvalidArgument("matrix rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& e = j[r][c];
      double re = 0.0;
      double im = 0.0;
      if (e.is_number()) {
        re = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        re = e[0].get<double>();
        im = e[1].get<double>();
      } else {
        throw InvalidArgument("matrix entries must be numbers or [re, im] pairs");
      }
      if (!std::isfinite(re) || !std::isfinite(im)) throw InvalidArgument("matrix entries must be finite");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {re, im};
    }
  }
  return m;
}

Json family_to_json(const quantum::MeasurementFamily& fam) {
  Json outs = Json::array();
  for (const auto& o : fam.outcomes) {
    outs.push_back({{"A", matrix_to_json(o.alice.matrix())}, {"B", matrix_to_json(o.bob.matrix())}});
  }
  return {{"d", fam.private_dim}, {"outcomes", outs}};
}

quantum::MeasurementFamily family_from_json(const sat::Formula& f, const Json& j) {
  quantum::MeasurementFamily fam;
  fam.private_dim = as_index(require(j, "d"), "d");
  if (fam.private_dim == 0) throw InvalidArgument("d must be at least 1");
  const auto layout = protocol::RegisterLayout::of(f, fam.private_dim);
  const auto& outs = require(j, "outcomes");
  if (!outs.is_array() || outs.empty()) throw InvalidArgument("a family needs at least one outcome");
  for (const auto& o : outs) {
    fam.outcomes.push_back({side_operator(require(o, "A"), layout.alice, "Alice"),
                            side_operator(require(o, "B"), layout.bob, "Bob")});
  }
  return fam;
}

Json locc_to_json(const adversary::LoccScript& s) {
  return {{"private_dim", s.private_dim}, {"root", node_to_json(s.root)}};
}

adversary::LoccScript locc_from_json(const sat::Formula& f, const Json& j) {
  (void)f;  // sizes are checked when the script is compiled against f
  adversary::LoccScript s;
  s.private_dim = as_index(require(j, "private_dim"), "private_dim");
  s.root = node_from_json(require(j, "root"), 0);
  return s;
}

Json round2_to_json(const adversary::Round2Rule& rule) {
  using K = adversary::Round2Rule::Kind;
  switch (rule.kind) {
    case K::best_response: return {{"kind", "best_response"}};
    case K::assignment: return {{"kind", "assignment"}, {"assignment", rule.assignments.at(0).str()}};
    case K::per_outcome: {
      Json a = Json::array();
      for (const auto& t : rule.assignments) a.push_back(t.str());
      return {{"kind", "per_outcome"}, {"assignments", a}};
    }
  }
  return {};
}

adversary::Round2Rule round2_from_json(const sat::Formula& f, const Json& j) {
  const auto kind = require(j, "kind").get<std::string>();
  if (kind == "best_response") return adversary::Round2Rule::best();
  if (kind == "assignment") return adversary::Round2Rule::fixed(assignment_from(f, require(j, "assignment")));
  if (kind == "per_outcome") {
    adversary::Round2Rule rule{adversary::Round2Rule::Kind::per_outcome, {}};
    for (const auto& t : require(j, "assignments")) rule.assignments.push_back(assignment_from(f, t));
    return rule;
  }
  throw InvalidArgument("unknown round-2 rule \"" + kind + "\"");
}

adversary::StrategySpec strategy_spec_from_json(const sat::Formula& f, const Json& j,
                                                const sat::Assignment& fallback) {
  using K = adversary::StrategySpec::Kind;
  adversary::StrategySpec spec;
  const auto kind = require(j, "kind").get<std::string>();
  const std::map<std::string, K> kinds{{"honest", K::honest}, {"measure_resend", K::measure_resend},
                                       {"skewed", K::skewed},  {"dephase", K::dephase},
                                       {"locc", K::locc},      {"custom", K::custom}};
  const auto it = kinds.find(kind);
  if (it == kinds.end()) throw InvalidArgument("unknown strategy kind \"" + kind + "\"");
  spec.kind = it->second;
  spec.assignment = j.contains("assignment") ? assignment_from(f, j.at("assignment")) : fallback;
  if (j.contains("p")) spec.p = j.at("p").get<double>();
  if (j.contains("y1")) spec.y1 = as_index(j.at("y1"), "y1");
  if (j.contains("y2")) spec.y2 = as_index(j.at("y2"), "y2");
  if (spec.kind == K::locc) spec.script = locc_from_json(f, require(j, "script"));
  if (spec.kind == K::custom) spec.family = family_from_json(f, require(j, "family"));
  spec.round2 = j.contains("round2") ? round2_from_json(f, j.at("round2")) : adversary::Round2Rule::best();
  return spec;
}

Json transcript_to_json(const protocol::Transcript& t) {
  return {{"query", {t.query.y, t.query.y_tilde, t.query.x, t.query.x_tilde}},
          {"outcome", t.outcome},
          {"claim", t.round2.str()},
          {"checks",
           {{"clause", t.checks.clause_satisfied},
            {"consistency", t.checks.consistency},
            {"swap_alice", t.checks.swap_alice_pass},
            {"swap_bob", t.checks.swap_bob_pass}}},
          {"accept", t.accept}};
}

std::string transcripts_jsonl(const std::vector<protocol::Transcript>& ts) {
  std::string out;
  for (const auto& t : ts) {
    out += transcript_to_json(t).dump();
    out += '\n';
  }
  return out;
}

}  // namespace qmip::harness
