#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace swlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitIo = 4;

const char* version_string() noexcept;

// Shortest round-trip decimal form, independent of the C and C++ locales.
std::string format_number(double value);

// Rows of a frozen-schema table. CSV output starts with a "# schema=<name>"
// comment line followed by the header; JSONL output starts with a header record.
class Table {
 public:
  using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

  Table(std::string schema, std::vector<std::string> columns);

  void add_row(std::vector<Cell> row);
  const std::string& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return rows_.size(); }

  std::string to_csv() const;
  std::string to_jsonl() const;

 private:
  std::string schema_;
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

// Writes `contents` to a temporary file next to `path`, then renames it over
// `path`. Throws io_error.
void write_atomic(const std::string& path, std::string_view contents);

// CLI entry point: subcommands analyze, percolation-check, simulate, couple,
// tvprofile, mixfit, oracle, tails, concentration, witness. Returns the exit
// status (0 ok, 1 failed check, 2 usage, 3 validation, 4 I/O).
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// The vector overload takes the arguments after the program name.
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swlab
