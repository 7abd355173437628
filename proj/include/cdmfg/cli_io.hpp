#pragma once

#include "cdmfg/control_model.hpp"
#include "cdmfg/fp_solver.hpp"
#include "cdmfg/grid.hpp"
#include "cdmfg/hjb_solver.hpp"
#include "cdmfg/mfg_fixed_point.hpp"
#include "cdmfg/sde_verifier.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdmfg {

struct McPlan {
    McConfig mc;
    double dpp_fraction = 0.125;   // h = T * dpp_fraction
    Controls suboptimal{{0.5, 0.0}, 1.0};
    std::vector<double> modulus_h{0.001, 0.002, 0.004, 0.008, 0.016};
    double modulus_dt = 1e-5;
    Controls modulus_controls{{0.0, 0.0}, 1.0};
};

struct OutputOptions {
    std::filesystem::path directory = "out";
    bool write_fields = true;
};

struct RunConfig {
    ModelSpec model;
    GridSpec grid;
    HjbOptions hjb;
    FixedPointOptions fixed_point;
    McPlan mc;
    OutputOptions output;
    // "key = value" for every default that was filled in.
    std::vector<std::string> defaults_used;
};

// JSON document; unknown keys, type errors and invariant violations throw
// ConfigError naming the key. A CFL-violating grid throws CflError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a over the bit patterns of the values.
std::uint64_t field_checksum(const TimeField& field);

// One CSV per level (node coordinates, value at %.17g) plus manifest.txt with the
// grid, the kind and the checksum. Non-finite values throw NumericalError.
void write_field(const TimeField& field, const std::filesystem::path& directory,
                 const std::string& kind = "value");
void write_field(const DensityPath& density, const std::filesystem::path& directory);

// Reads back a directory written by write_field; checksum mismatch throws ContractError,
// a missing or malformed directory throws ConfigError.
TimeField read_field(const std::filesystem::path& directory);
std::string read_field_kind(const std::filesystem::path& directory);

struct RunOptions {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> from;  // prior solve directory
    bool quiet = false;
    bool inject_negative_density = false;       // test hook for solve-fp
};

// solve-hjb | solve-mfg | solve-fp | verify-sde | diagnose | wasserstein.
// Returns 0 on success, 1 on a contract failure, 2 on a configuration error.
int run_subcommand(const std::string& name, const RunConfig& config, const RunOptions& options,
                   std::ostream& log);

// load_config + run_subcommand with the same exit-code mapping.
int run_from_file(const std::string& name, const std::filesystem::path& config_path,
                  const RunOptions& options, std::ostream& log);

}  // namespace cdmfg
