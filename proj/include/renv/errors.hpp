#pragma once

#include <stdexcept>
#include <string>

namespace renv {

// Evaluation left the represented window of the environment.  Callers may
// enlarge the window (up to the configured cap) and retry.
struct OutOfWindow : std::runtime_error {
    explicit OutOfWindow(const std::string& what) : std::runtime_error(what) {}
};

// Quadratic coefficient a <= 0: the space transform has no inverse.
struct NonConfining : std::runtime_error {
    explicit NonConfining(const std::string& what) : std::runtime_error(what) {}
};

// Zero path: no piecewise-linear approximation exists (H_gamma = 0).
struct DegenerateEnvironment : std::runtime_error {
    explicit DegenerateEnvironment(const std::string& what) : std::runtime_error(what) {}
};

// Inverse lookup could not bracket the target even after auto-extension.
struct BracketExhausted : std::runtime_error {
    explicit BracketExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Log time change requires sample times >= 1.
struct BadTimeOrigin : std::runtime_error {
    explicit BadTimeOrigin(const std::string& what) : std::runtime_error(what) {}
};

// Row infima over the candidate set sum to zero.
struct NotACouplingSet : std::runtime_error {
    explicit NotACouplingSet(const std::string& what) : std::runtime_error(what) {}
};

// Residual kernel row went negative beyond tolerance; shrink the set and retry.
struct NegativeResidual : std::runtime_error {
    explicit NegativeResidual(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureNotConverged : std::runtime_error {
    explicit QuadratureNotConverged(const std::string& what) : std::runtime_error(what) {}
};

// Rate fits need strictly positive distances.
struct NonPositiveDistance : std::runtime_error {
    explicit NonPositiveDistance(const std::string& what) : std::runtime_error(what) {}
};

// Exp-moment estimate dominated by a handful of extreme replicas; run rejected.
struct TailDominated : std::runtime_error {
    explicit TailDominated(const std::string& what) : std::runtime_error(what) {}
};

// Fraction of escaped replicas exceeded the configured cap.
struct EscapeCapExceeded : std::runtime_error {
    explicit EscapeCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace renv
