#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qmip/adversary.hpp"
#include "qmip/protocol.hpp"
#include "qmip/quantum.hpp"
#include "qmip/sat.hpp"

namespace qmip::harness {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSchema = "qmip-report/1";

// ---- serialization (json_io.cpp) -------------------------------------------

/// Canonical text: sorted keys, two-space indent, floats as %.12g, and
/// non-finite floats as null. Identical values always give identical bytes.
std::string dump_canonical(const Json& j);

Json matrix_to_json(const quantum::Matrix& m);
/// Rows of [re, im] pairs (a bare number is a real entry).
quantum::Matrix matrix_from_json(const Json& j);

/// {"d": private_dim, "outcomes": [{"A": matrix, "B": matrix}, ...]}
Json family_to_json(const quantum::MeasurementFamily& fam);
quantum::MeasurementFamily family_from_json(const sat::Formula& f, const Json& j);

/// {"private_dim": d, "root": node}, node = {"party": "alice"|"bob",
/// "operators": [matrix, ...], "next": [node, ...]}
Json locc_to_json(const adversary::LoccScript& s);
adversary::LoccScript locc_from_json(const sat::Formula& f, const Json& j);

Json round2_to_json(const adversary::Round2Rule& rule);
adversary::Round2Rule round2_from_json(const sat::Formula& f, const Json& j);

/// Strategy files: {"kind": ..., "assignment": "0101", "p", "y1", "y2",
/// "script", "family", "round2"}. Missing assignments fall back to `fallback`.
adversary::StrategySpec strategy_spec_from_json(const sat::Formula& f, const Json& j,
                                                const sat::Assignment& fallback);

Json transcript_to_json(const protocol::Transcript& t);
/// One compact JSON object per line, in trial order.
std::string transcripts_jsonl(const std::vector<protocol::Transcript>& ts);

// ---- experiments -----------------------------------------------------------

enum class Command { run, diagnose, classical, gap, validate };
enum class Mode { exact, sampled };

std::string command_name(Command c);
Command parse_command(std::string_view name);
std::string mode_name(Mode m);
Mode parse_mode(std::string_view name);

struct ExperimentConfig {
  Command command = Command::run;
  /// Path to a DIMACS / JSON file, "planted:N:M[:regular][:seed]",
  /// "random:N:M[:seed]" or "patterns[:copies]".
  std::string formula;
  /// honest | measure_resend | dephase | skewed:p=..,y1=..,y2=.. | path to a JSON strategy file.
  std::string strategy = "honest";
  Mode mode = Mode::exact;
  std::size_t trials = 0;
  std::optional<std::uint64_t> seed;
  std::size_t private_dim = protocol::kDefaultPrivateDim;
  std::map<std::string, double> thresholds;  // overrides by name
  std::optional<double> gamma;               // diagnose / classical; defaults to the formula's gap
  std::string out;                           // report path ("" = stdout)
  std::string transcripts;                   // JSONL path (sampled run only)
  std::string posterior_csv;                 // CSV path (diagnose only)
  unsigned threads = 0;                      // 0 = automatic; never changes the output
};

/// Throws InvalidArgument for a config that cannot run.
void validate_config(const ExperimentConfig& c);

/// Reads a config file whose keys mirror the CLI flags.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& c);

/// Parses "name=value" into the override map.
void apply_override(ExperimentConfig& c, std::string_view assignment);

struct LoadedFormula {
  sat::Formula formula;
  std::optional<sat::Assignment> planted;  // known satisfying assignment, if generated
  std::string description;
};

LoadedFormula load_formula(std::string_view source);

/// Assignment used by honest-style strategies: the planted one if known,
/// otherwise the best assignment by enumeration.
sat::Assignment reference_assignment(const LoadedFormula& lf);

adversary::CompiledStrategy load_strategy(const LoadedFormula& lf, std::string_view spec, std::size_t private_dim);

struct Report {
  Json body;
  std::vector<protocol::Transcript> transcripts;  // sampled run only
  std::string posterior_csv;                      // diagnose only
  std::string text() const { return dump_canonical(body); }
};

/// Deterministic in (config, seed); exact mode never touches an RNG and the
/// report then carries no seed.
Report run_experiment(const ExperimentConfig& c);

/// Runs the experiment and writes every requested output file.
Report run_and_write(const ExperimentConfig& c);

}  // namespace qmip::harness
