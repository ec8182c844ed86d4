#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "glmselect/risk_lab.hpp"

namespace glmselect::cli {

using nlohmann::json;

enum class Command { select, greedy, eigen, penalty_table, packing, risk_sim, rate_curve };

std::string to_string(Command c);
Command command_from_string(const std::string& name);

inline constexpr int kSchemaVersion = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct RunConfig {
    Command command = Command::select;
    // Resolved document: defaults filled in, paths absolute. Embedded in
    // every report; thread count is deliberately not part of it.
    json doc;
    std::optional<std::filesystem::path> out;
    std::string format = "json";
    int threads = 1;
};

// Reads and resolves a config file. `format` overrides the document's own
// "format" entry. Throws InputError.
RunConfig load_config(Command command, const std::filesystem::path& path,
                      std::optional<std::filesystem::path> out = std::nullopt,
                      std::optional<std::string> format = std::nullopt, int threads = 1);

// Same, for an in-memory document whose relative paths resolve against base_dir.
RunConfig resolve_config(Command command, json doc, const std::filesystem::path& base_dir,
                         std::optional<std::filesystem::path> out = std::nullopt,
                         std::optional<std::string> format = std::nullopt, int threads = 1);

// Pieces of the document, exposed for reuse and tests.
FamilySpec parse_family(const json& j);
ModelFamily parse_structure(const json& j, int p);
PenaltyRule parse_penalty(const json& j, const NaturalFamily& fam, const PenaltyContext& ctx);
std::vector<double> parse_weights(const json& j, const PenaltyContext& ctx);

// What a command produces. `primary` goes to --out (or stdout); `sidecar`,
// when present, is the JSON companion of a CSV primary.
struct Output {
    std::string primary;
    std::optional<std::string> sidecar;
};

Output run_select(const RunConfig& cfg);
Output run_risk_sim(const RunConfig& cfg);
Output run_diagnostics(const RunConfig& cfg);

// Runs the command, writes its outputs only on success and maps errors to
// exit codes (0 ok, 2 configuration/input, 3 numerical).
int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Where the JSON companion of a CSV report goes: same stem, ".json".
std::filesystem::path sidecar_path(const std::filesystem::path& out);

// Threads from --threads, else GLMSELECT_THREADS, else the hardware count.
int resolve_threads(std::optional<int> flag);

}  // namespace glmselect::cli
