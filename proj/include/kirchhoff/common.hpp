#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace kirchhoff {

using Field = Eigen::VectorXd;

/// Physical coefficients of u_tt - (a|grad u|^2 + b) Lap u = lambda u + |u|^{p-1} u.
struct Params {
    double a = 1.0;
    double b = 1.0;
    double lambda = 0.0;
    double p = 3.0;
};

// Error taxonomy mirrors the CLI exit codes: config/hypothesis -> 1, numerical -> 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class HypothesisError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A value that may be undefined in the current regime, with the reason when absent.
template <class T>
struct Maybe {
    std::optional<T> value;
    std::string reason;

    static Maybe of(T v) { return Maybe{std::move(v), {}}; }
    static Maybe none(std::string why) { return Maybe{std::nullopt, std::move(why)}; }

    [[nodiscard]] bool has() const { return value.has_value(); }
    [[nodiscard]] const T& operator*() const { return *value; }
    [[nodiscard]] T or_else(T fallback) const { return value.value_or(std::move(fallback)); }
};

inline void validate_params(const Params& prm) {
    if (!(prm.a > 0.0)) throw ConfigError("params.a must be > 0");
    if (!(prm.b > 0.0)) throw ConfigError("params.b must be > 0");
    if (!(prm.p > 1.0)) throw ConfigError("params.p must be > 1");
    if (!std::isfinite(prm.lambda)) throw ConfigError("params.lambda must be finite");
}

/// |s|^q with fast paths for the small integer exponents the lab uses most.
inline double pow_abs(double s, double q) {
    const double x = std::fabs(s);
    if (q == 2.0) return x * x;
    if (q == 3.0) return x * x * x;
    if (q == 4.0) { const double y = x * x; return y * y; }
    if (q == 5.0) { const double y = x * x; return y * y * x; }
    if (q == 6.0) { const double y = x * x * x; return y * y; }
    return std::pow(x, q);
}

inline bool is_cubic(double p) { return p == 3.0; }

}  // namespace kirchhoff
