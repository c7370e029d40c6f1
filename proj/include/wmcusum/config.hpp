#pragma once

// System-definition files, the watermark flag grammar, and the sweep CSV.
//
// System files are flat keyed sections:
//
//   # comment
//   [system]
//   n = 2
//   m = 1
//   p = 2
//   A = 0.75, 0.2, 0.2, 1.0     (row-major)
//   ...                          (B, C, Q, R, W, U likewise)
//   [campaign]                   (optional)
//   arl_h = 1000
//   watermark_lag = 1
//
// Shapes: A, Q, W are n×n; B is n×p; C is m×n; R is m×m; U is p×p.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wmcusum/experiments.hpp"
#include "wmcusum/plant.hpp"

namespace wmcusum {

/// Optional `[campaign]` overrides; unset fields keep their defaults.
struct CampaignSettings {
  std::optional<double> arl_h;
  std::optional<int> watermark_lag;
  std::optional<int> trials;
  std::optional<int> arl_trials;
  std::optional<std::int64_t> nu;
  std::optional<std::int64_t> k0;
  std::optional<std::int64_t> monitor_lead;
  std::optional<std::int64_t> horizon_cap;
  std::optional<std::uint64_t> seed;
  std::vector<double> alphas;
  std::vector<double> budgets;

  void apply(CampaignConfig& c) const {
    if (trials) c.trials = *trials;
    if (arl_trials) c.arl_trials = *arl_trials;
    if (nu) c.nu = *nu;
    if (k0) c.k0 = *k0;
    if (monitor_lead) c.monitor_lead = *monitor_lead;
    if (horizon_cap) c.horizon_cap = *horizon_cap;
    if (seed) c.seed = *seed;
    if (!alphas.empty() || !budgets.empty()) c.grid.clear();
    for (double a : alphas) c.grid.push_back(GridPoint::equal_power(a));
    for (double j : budgets) c.grid.push_back(GridPoint::optimized(j));
  }
};

struct ConfigFile {
  SystemModel model;
  CampaignSettings campaign;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  if (t.empty()) throw Error(ErrorCode::ParseError, context + ": empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    throw Error(ErrorCode::ParseError, context + ": '" + t + "' is not a number");
  return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& context) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_double(tok, context));
  if (!text.empty() && text.back() == ',')
    throw Error(ErrorCode::ParseError, context + ": trailing comma");
  return out;
}

inline std::int64_t parse_integer(const std::string& text, const std::string& context) {
  const double v = parse_double(text, context);
  if (v != std::floor(v) || std::abs(v) > 9.0e15)
    throw Error(ErrorCode::ParseError, context + ": '" + trim(text) + "' is not an integer");
  return static_cast<std::int64_t>(v);
}

struct Entry {
  std::string value;
  int line = 0;
};

}  // namespace detail

inline ConfigFile parse_config(std::istream& in, const std::string& source = "<config>") {
  std::map<std::string, std::map<std::string, detail::Entry>> sections;
  std::string section;
  std::string raw;
  int line = 0;
  auto where = [&](int l) { return source + ":" + std::to_string(l); };
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3)
        throw Error(ErrorCode::ParseError, where(line) + ": malformed section header");
      section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
      if (section != "system" && section != "campaign")
        throw Error(ErrorCode::ParseError, where(line) + ": unknown section [" + section + "]");
      if (sections.count(section))
        throw Error(ErrorCode::ParseError, where(line) + ": duplicate section [" + section + "]");
      sections[section];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError, where(line) + ": expected 'key = value'");
    if (section.empty())
      throw Error(ErrorCode::ParseError, where(line) + ": key outside of a section");
    const std::string key = detail::trim(std::string_view(text).substr(0, eq));
    const std::string value = detail::trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::ParseError, where(line) + ": empty key");
    auto& sec = sections[section];
    if (sec.count(key))
      throw Error(ErrorCode::ParseError, where(line) + ": duplicate key '" + key + "'");
    sec[key] = {value, line};
  }
  if (!sections.count("system"))
    throw Error(ErrorCode::MissingKey, source + ": missing section [system]");

  const auto& sys = sections.at("system");
  auto entry = [&](const std::string& key) -> const detail::Entry& {
    const auto it = sys.find(key);
    if (it == sys.end()) throw Error(ErrorCode::MissingKey, "missing key '" + key + "'");
    return it->second;
  };
  auto dim = [&](const std::string& key) {
    const auto& e = entry(key);
    const auto v = detail::parse_integer(e.value, where(e.line) + " key '" + key + "'");
    if (v < 1)
      throw Error(ErrorCode::ParseError, where(e.line) + " key '" + key + "': must be >= 1");
    return static_cast<Eigen::Index>(v);
  };
  for (const auto& [key, e] : sys) {
    static const std::vector<std::string> known = {"n", "m", "p", "A", "B", "C",
                                                   "Q", "R", "W", "U"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorCode::ParseError, where(e.line) + ": unknown key '" + key + "'");
  }
  const Eigen::Index n = dim("n"), m = dim("m"), p = dim("p");
  auto matrix = [&](const std::string& key, Eigen::Index rows, Eigen::Index cols) {
    const auto& e = entry(key);
    const auto values = detail::parse_list(e.value, where(e.line) + " key '" + key + "'");
    if (static_cast<Eigen::Index>(values.size()) != rows * cols)
      throw Error(ErrorCode::DimensionMismatch,
                  where(e.line) + " key '" + key + "': expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " = " + std::to_string(rows * cols) +
                      " values, got " + std::to_string(values.size()));
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = values[i * cols + j];
    return M;
  };

  ConfigFile cfg;
  cfg.model.A = matrix("A", n, n);
  cfg.model.B = matrix("B", n, p);
  cfg.model.C = matrix("C", m, n);
  cfg.model.Q = matrix("Q", n, n);
  cfg.model.R = matrix("R", m, m);
  cfg.model.W = matrix("W", n, n);
  cfg.model.U = matrix("U", p, p);
  cfg.model.validate();

  if (sections.count("campaign")) {
    auto& c = cfg.campaign;
    for (const auto& [key, e] : sections.at("campaign")) {
      const std::string ctx = where(e.line) + " key '" + key + "'";
      if (key == "arl_h") c.arl_h = detail::parse_double(e.value, ctx);
      else if (key == "watermark_lag") c.watermark_lag = static_cast<int>(detail::parse_integer(e.value, ctx));
      else if (key == "trials") c.trials = static_cast<int>(detail::parse_integer(e.value, ctx));
      else if (key == "arl_trials") c.arl_trials = static_cast<int>(detail::parse_integer(e.value, ctx));
      else if (key == "nu") c.nu = detail::parse_integer(e.value, ctx);
      else if (key == "k0") c.k0 = detail::parse_integer(e.value, ctx);
      else if (key == "monitor_lead") c.monitor_lead = detail::parse_integer(e.value, ctx);
      else if (key == "horizon_cap") c.horizon_cap = detail::parse_integer(e.value, ctx);
      else if (key == "seed") {
        const auto s = detail::parse_integer(e.value, ctx);
        if (s < 0) throw Error(ErrorCode::ParseError, ctx + ": seed must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
      } else if (key == "alphas") c.alphas = detail::parse_list(e.value, ctx);
      else if (key == "budgets") c.budgets = detail::parse_list(e.value, ctx);
      else throw Error(ErrorCode::ParseError, where(e.line) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_config(in, path);
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_config(std::ostream& out, const SystemModel& sys) {
  out << "[system]\n";
  out << "n = " << sys.n() << "\nm = " << sys.m() << "\np = " << sys.p() << "\n";
  auto row_major = [&](const char* key, const Matrix& M) {
    out << key << " =";
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        out << (i + j == 0 ? " " : ", ") << format_double(M(i, j));
    out << "\n";
  };
  row_major("A", sys.A);
  row_major("B", sys.B);
  row_major("C", sys.C);
  row_major("Q", sys.Q);
  row_major("R", sys.R);
  row_major("W", sys.W);
  row_major("U", sys.U);
}

/// `diag:v1,...,vp` | `rank1:u1,...,up,lambda` | `opt:J`.
inline GridPoint parse_sigma_e(const std::string& text, Eigen::Index p) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorCode::ParseError,
                "watermark '" + text + "': expected diag:..., rank1:... or opt:J");
  const std::string kind = detail::trim(std::string_view(text).substr(0, colon));
  const std::string ctx = "watermark '" + text + "'";
  const auto values = detail::parse_list(text.substr(colon + 1), ctx);
  GridPoint gp;
  gp.values = values;
  if (kind == "diag") {
    gp.kind = GridPoint::Kind::Diagonal;
    if (static_cast<Eigen::Index>(values.size()) != p)
      throw Error(ErrorCode::DimensionMismatch,
                  ctx + ": diag needs p = " + std::to_string(p) + " values");
    for (double v : values)
      if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, ctx + ": variances must be >= 0");
  } else if (kind == "rank1") {
    gp.kind = GridPoint::Kind::RankOne;
    if (static_cast<Eigen::Index>(values.size()) != p + 1)
      throw Error(ErrorCode::DimensionMismatch,
                  ctx + ": rank1 needs p + 1 = " + std::to_string(p + 1) + " values");
  } else if (kind == "opt") {
    gp.kind = GridPoint::Kind::Optimized;
    if (values.size() != 1)
      throw Error(ErrorCode::ParseError, ctx + ": opt takes a single budget J");
    if (!(values[0] > 0.0))
      throw Error(ErrorCode::InvalidArgument, ctx + ": budget must be positive");
  } else {
    throw Error(ErrorCode::ParseError, ctx + ": unknown kind '" + kind + "'");
  }
  return gp;
}

inline constexpr std::string_view kSweepCsvHeader =
    "delta_lqg,sigma_e_kind,sigma_e_params,kld_nats,sadd_theory,add_empirical,add_ci,"
    "false_alarm_trials,trials,seed";

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << kSweepCsvHeader << "\n";
  for (const SweepRow& row : r.rows) {
    std::string params;
    for (std::size_t i = 0; i < row.sigma_e_params.size(); ++i)
      params += (i ? ";" : "") + format_double(row.sigma_e_params[i]);
    out << format_double(row.delta_lqg) << ',' << row.sigma_e_kind << ',' << params << ','
        << format_double(row.kld_nats) << ',' << format_double(row.sadd_theory) << ','
        << format_double(row.add_empirical) << ',' << format_double(row.add_ci) << ','
        << row.false_alarm_trials << ',' << row.trials << ',' << row.seed << "\n";
  }
}

inline SweepResult read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kSweepCsvHeader)
    throw Error(ErrorCode::ParseError, "sweep CSV: unexpected header");
  SweepResult r;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::string ctx = "sweep CSV line " + std::to_string(lineno);
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(detail::trim(tok));
    if (f.size() != 10) throw Error(ErrorCode::ParseError, ctx + ": expected 10 fields");
    SweepRow row;
    row.delta_lqg = detail::parse_double(f[0], ctx);
    row.sigma_e_kind = f[1];
    std::stringstream ps(f[2]);
    while (std::getline(ps, tok, ';')) row.sigma_e_params.push_back(detail::parse_double(tok, ctx));
    row.kld_nats = detail::parse_double(f[3], ctx);
    row.sadd_theory = detail::parse_double(f[4], ctx);
    row.add_empirical = detail::parse_double(f[5], ctx);
    row.add_ci = detail::parse_double(f[6], ctx);
    row.false_alarm_trials = static_cast<int>(detail::parse_integer(f[7], ctx));
    row.trials = static_cast<int>(detail::parse_integer(f[8], ctx));
    errno = 0;
    char* end = nullptr;
    row.seed = std::strtoull(f[9].c_str(), &end, 10);
    if (f[9].empty() || end != f[9].c_str() + f[9].size() || errno == ERANGE)
      throw Error(ErrorCode::ParseError, ctx + ": bad seed '" + f[9] + "'");
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace wmcusum
