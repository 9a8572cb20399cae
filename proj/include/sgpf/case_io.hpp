#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sgpf/powerflow.hpp"

namespace sgpf {

struct CaseWarning {
    int line = 0;
    std::string message;
};

/// Raw tables of a MATPOWER-style case. Column layout follows MATPOWER:
/// bus 13 columns, gen columns 1-10, branch columns 1-13.
struct CaseFile {
    std::string name;
    std::string version = "2";
    double base_mva = 100.0;
    std::vector<std::vector<double>> bus_rows;
    std::vector<std::vector<double>> gen_rows;
    std::vector<std::vector<double>> branch_rows;
    std::vector<CaseWarning> warnings;
};

/// Syntax error; what() starts with "line N:".
class CaseParseError : public std::runtime_error {
  public:
    CaseParseError(int line, const std::string& message);
    [[nodiscard]] int line() const noexcept { return line_; }

  private:
    int line_;
};

/// Well-formed text whose tables are inconsistent (duplicate ids, dangling
/// references, slack count).
class CaseValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Parses the subset grammar: a `function mpc = name` header, `%` comments,
/// scalar `mpc.version` / `mpc.baseMVA`, and `mpc.<table> = [ ... ];` blocks.
/// Unknown fields are skipped and recorded in `warnings`.
[[nodiscard]] CaseFile parse_matpower(std::string_view text);

/// Throws CaseValidationError.
void validate_case(const CaseFile& c);

/// Canonical text with 9 significant digits.
[[nodiscard]] std::string serialize(const CaseFile& c);

/// Per-unit network. Out-of-service branches and generators are dropped.
[[nodiscard]] PowerNetwork to_network(const CaseFile& c);

enum class BundledCase { NewEngland39, Demo3Bus };

[[nodiscard]] CaseFile bundled_case(BundledCase which);

/// Raised when a case file cannot be read.
class CaseIoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// "bundled:case39", "bundled:demo3" or a file path.
[[nodiscard]] CaseFile load_case(const std::string& spec);

}  // namespace sgpf
