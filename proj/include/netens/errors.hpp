#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace netens {

// Exit codes used by the CLI; library throws typed errors carrying them.
enum class errc : int {
  ok = 0,
  config = 2,          // bad model config / flags
  data = 3,            // ensemble file fails validation
  nonidentifiable = 4, // rank-deficient information at the requested model
  boundary = 5,        // MLE does not exist (observed stat on hull boundary)
  nonconvergence = 6,  // optimizer hit max iterations
  unsupported = 7,     // statistic/term outside the supported families
  singular_design = 8, // collinear design in a residual regression
  io = 9,              // file missing / unreadable / unwritable
  structural = 10,     // invalid node pair or other API misuse
};

class error : public std::runtime_error {
public:
  error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

private:
  errc code_;
};

struct config_error : error {
  explicit config_error(const std::string& m) : error(errc::config, m) {}
};
struct data_error : error {
  explicit data_error(const std::string& m) : error(errc::data, m) {}
};
struct nonidentifiable_error : error {
  explicit nonidentifiable_error(const std::string& m) : error(errc::nonidentifiable, m) {}
};
// Carries the offending coordinate names so callers can report which
// direction ran off to infinity.
struct boundary_error : error {
  boundary_error(const std::string& m, std::vector<std::string> coords)
      : error(errc::boundary, m), coordinates(std::move(coords)) {}
  std::vector<std::string> coordinates;
};
// Nonconvergence keeps the last iterate so a caller can inspect or restart.
struct convergence_error : error {
  convergence_error(const std::string& m, std::vector<double> iterate, int iters)
      : error(errc::nonconvergence, m), last_iterate(std::move(iterate)), iterations(iters) {}
  std::vector<double> last_iterate;
  int iterations = 0;
};
struct unsupported_statistic_error : error {
  explicit unsupported_statistic_error(const std::string& m) : error(errc::unsupported, m) {}
};
struct singular_design_error : error {
  explicit singular_design_error(const std::string& m) : error(errc::singular_design, m) {}
};
struct io_error : error {
  explicit io_error(const std::string& m) : error(errc::io, m) {}
};
struct structural_error : error {
  explicit structural_error(const std::string& m) : error(errc::structural, m) {}
};

} // namespace netens
