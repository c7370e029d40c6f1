#pragma once

// Built-in benchmark plants.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "wmcusum/plant.hpp"

namespace wmcusum {

struct BenchmarkSystem {
  std::string name;
  SystemModel model;
  double arl_h = 1000.0;
  int default_watermark_lag = 1;
  // Equal-power watermark scales Σ_e = α I used by default sweeps.
  std::vector<double> default_alphas;
};

namespace detail {

inline Matrix rows(Eigen::Index r, Eigen::Index c, std::initializer_list<double> values) {
  Matrix m(r, c);
  auto it = values.begin();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

inline Matrix diag(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v.asDiagonal();
}

}  // namespace detail

/// Second-order, open-loop unstable, two inputs and one output.
inline BenchmarkSystem system_a() {
  using detail::diag;
  using detail::rows;
  BenchmarkSystem b;
  b.name = "system-a";
  b.model.A = rows(2, 2, {0.75, 0.2, 0.2, 1.0});
  b.model.B = rows(2, 2, {0.9, 0.5, 0.1, 1.2});
  b.model.C = rows(1, 2, {1.0, -1.0});
  b.model.Q = diag({1.0, 1.0});
  b.model.R = diag({1.0});
  b.model.W = diag({1.0, 2.0});
  b.model.U = diag({0.4, 0.7});
  b.arl_h = 1000.0;
  b.default_watermark_lag = 1;
  b.default_alphas = {0.25, 0.5, 1.0, 2.0, 3.0, 5.0};
  return b;
}

/// Linearized quadruple tank with amplified level sensors: fourth order,
/// open-loop stable, two inputs and two outputs.
inline BenchmarkSystem system_b() {
  using detail::diag;
  using detail::rows;
  BenchmarkSystem b;
  b.name = "system-b";
  b.model.A = rows(4, 4, {0.9683, 0, 0.0819, 0,  //
                          0, 0.9780, 0, 0.06377,  //
                          0, 0, 0.9167, 0,        //
                          0, 0, 0, 0.9355});
  b.model.B = rows(4, 2, {0.1638, 0.004, 0.002, 0.1242, 0, 0.0917, 0.0604, 0});
  b.model.C = rows(2, 4, {5, 0, 0, 0, 0, 5, 0, 0});
  b.model.Q = diag({0.25, 0.25, 0.25, 0.25});
  b.model.R = diag({0.5, 0.5});
  b.model.W = diag({5, 5, 1, 1});
  b.model.U = diag({2, 2});
  b.arl_h = 1000.0;
  b.default_watermark_lag = 1;
  b.default_alphas = {0.1, 0.29, 0.5, 1.0, 2.0, 5.0};
  return b;
}

/// System A with an input map that makes C B (almost) vanish: relative
/// degree two up to a 0.002 residual in C B.
inline BenchmarkSystem system_c() {
  using detail::rows;
  BenchmarkSystem b = system_a();
  b.name = "system-c";
  b.model.B = rows(2, 2, {0.9, 0.5, 1.3, 0.72});
  b.model.C = rows(1, 2, {1.3, -0.9});
  b.arl_h = 100.0;
  b.default_watermark_lag = 2;
  b.default_alphas = {50.0, 100.0, 200.0, 400.0, 800.0};
  return b;
}

inline constexpr std::array<std::string_view, 3> kBenchmarkNames = {"system-a", "system-b",
                                                                    "system-c"};

inline bool is_benchmark_name(std::string_view name) {
  for (auto n : kBenchmarkNames)
    if (n == name) return true;
  return false;
}

inline BenchmarkSystem benchmark(std::string_view name) {
  if (name == "system-a") return system_a();
  if (name == "system-b") return system_b();
  if (name == "system-c") return system_c();
  throw Error(ErrorCode::InvalidArgument, "unknown benchmark '" + std::string(name) + "'");
}

}  // namespace wmcusum
