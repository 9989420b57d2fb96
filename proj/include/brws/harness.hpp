#ifndef BRWS_HARNESS_HPP
#define BRWS_HARNESS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "brws/laws.hpp"
#include "brws/profile.hpp"

namespace brws {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Schema-validated experiment description. Unknown keys anywhere in the
/// document are rejected; the resolved config (with defaults filled in) is
/// what gets hashed and embedded in every result record.
struct ExperimentConfig {
    nlohmann::json resolved;  // canonical, defaults applied
    std::string kind;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::size_t workers = 1;

    static ExperimentConfig parse(const nlohmann::json& doc);
    static ExperimentConfig parse_file(const std::string& path);
    std::string config_hash() const;  // FNV-1a over the canonical dump
};

const std::vector<std::string>& experiment_kinds();

/// Law/profile construction from config blocks (shared with tests).
ReproductionLaw law_from_config(const nlohmann::json& spec);
Profile profile_from_config(const nlohmann::json& spec);

struct RunOutputs {
    std::filesystem::path records_path;  // JSON-lines, one record per unit
    std::filesystem::path summary_path;  // CSV
    std::vector<std::string> summary_lines;  // what was printed
};

/// Dispatch an experiment: writes JSON-lines records plus a summary CSV and
/// prints target constants next to measured trends where the experiment has
/// one. Records embed config hash, seed, payload, and meta (wall time,
/// version); payloads are bit-stable for a fixed (config, seed) when
/// workers == 1.
RunOutputs run_experiment(const ExperimentConfig& config);

/// Tidy long-format CSV (x, y, series, ci_lo, ci_hi) from a records file,
/// including reference-constant series. Mixed-config record files are
/// rejected; malformed lines are reported with their line number.
std::string emit_plot_data(const std::string& records_path);

}  // namespace brws

#endif
