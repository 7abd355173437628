#pragma once

#include <stdexcept>
#include <string>

namespace cdmfg {

// Invalid input or configuration (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Grid too coarse in time for the explicit schemes.
class CflError : public ConfigError {
public:
    CflError(const std::string& what, int minimal_nt)
        : ConfigError(what), minimal_nt_(minimal_nt) {}
    int minimal_nt() const noexcept { return minimal_nt_; }

private:
    int minimal_nt_;
};

// A numerical contract was broken while running (maps to CLI exit code 1).
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite value produced during a march.
class NumericalError : public ContractError {
public:
    NumericalError(const std::string& what, int level, int node)
        : ContractError(what), level_(level), node_(node) {}
    int level() const noexcept { return level_; }
    int node() const noexcept { return node_; }

private:
    int level_;
    int node_;
};

}  // namespace cdmfg
