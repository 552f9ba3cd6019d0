#ifndef BRANCHSIM_ERRORS_HPP
#define BRANCHSIM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace branchsim {

/// Population cap hit during a simulation.  Carries the surviving state so a
/// caller can report how far the run got before blowing the budget.
class ExplosionError : public std::runtime_error {
 public:
  ExplosionError(std::string what, std::vector<double> partial_atoms,
                 double time_reached)
      : std::runtime_error(std::move(what)),
        partial_atoms_(std::move(partial_atoms)),
        time_reached_(time_reached) {}

  const std::vector<double>& partial_atoms() const { return partial_atoms_; }
  double time_reached() const { return time_reached_; }

 private:
  std::vector<double> partial_atoms_;
  double time_reached_;
};

/// Root-finding / quadrature / Monte-Carlo precision failures.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config parse or validation failure; `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(key) {}
  explicit ConfigError(const std::string& message)
      : std::runtime_error(message) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace branchsim

#endif  // BRANCHSIM_ERRORS_HPP
