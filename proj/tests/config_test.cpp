#include "wmcusum/config.hpp"

#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "wmcusum/benchmarks.hpp"

namespace wmcusum {
namespace {

constexpr const char* kSystemA = R"(# test plant
[system]
n = 2
m = 1
p = 2
A = 0.75, 0.2, 0.2, 1.0
B = 0.9, 0.5, 0.1, 1.2
C = 1.0, -1.0
Q = 1, 0, 0, 1
R = 1
W = 1, 0, 0, 2
U = 0.4, 0, 0, 0.7
)";

ConfigFile parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.sys");
}

std::string replace_line(std::string text, const std::string& key, const std::string& line) {
  const auto pos = text.find("\n" + key + " =");
  const auto end = text.find('\n', pos + 1);
  return text.replace(pos + 1, end - pos - 1, line);
}

Error parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an error";
  return Error(ErrorCode::InvalidArgument, "none");
}

GTEST_TEST(ParseConfig, ShippedFilesMatchBenchmarks) {
  for (auto name : kBenchmarkNames) {
    const std::string path = std::string(WMCUSUM_CONFIG_DIR) + "/" + std::string(name) + ".sys";
    const ConfigFile f = parse_config_file(path);
    const BenchmarkSystem b = benchmark(name);
    EXPECT_EQ(f.model.A, b.model.A) << name;
    EXPECT_EQ(f.model.B, b.model.B) << name;
    EXPECT_EQ(f.model.C, b.model.C) << name;
    EXPECT_EQ(f.model.Q, b.model.Q) << name;
    EXPECT_EQ(f.model.R, b.model.R) << name;
    EXPECT_EQ(f.model.W, b.model.W) << name;
    EXPECT_EQ(f.model.U, b.model.U) << name;
    ASSERT_TRUE(f.campaign.arl_h.has_value());
    EXPECT_EQ(*f.campaign.arl_h, b.arl_h);
    EXPECT_EQ(*f.campaign.watermark_lag, b.default_watermark_lag);
    EXPECT_EQ(f.campaign.alphas, b.default_alphas);
  }
}

GTEST_TEST(ParseConfig, InlineSystemA) {
  const ConfigFile f = parse(kSystemA);
  EXPECT_EQ(f.model.A, system_a().model.A);
  EXPECT_FALSE(f.campaign.arl_h.has_value());
}

GTEST_TEST(ParseConfig, WrongSizeNamesKey) {
  const Error e = parse_error(replace_line(kSystemA, "R", "R = 1, 0, 0, 1"));
  EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  EXPECT_NE(std::string(e.what()).find("'R'"), std::string::npos) << e.what();
}

GTEST_TEST(ParseConfig, MissingKeyNamesKey) {
  const Error e = parse_error(replace_line(kSystemA, "U", ""));
  EXPECT_EQ(e.code(), ErrorCode::MissingKey);
  EXPECT_NE(std::string(e.what()).find("'U'"), std::string::npos) << e.what();
}

GTEST_TEST(ParseConfig, SyntaxErrorsCarryLineNumbers) {
  const Error bad_number = parse_error(replace_line(kSystemA, "C", "C = 1.0, minus one"));
  EXPECT_EQ(bad_number.code(), ErrorCode::ParseError);
  EXPECT_NE(std::string(bad_number.what()).find("test.sys:8"), std::string::npos)
      << bad_number.what();
  EXPECT_EQ(parse_error(replace_line(kSystemA, "C", "C 1.0, -1.0")).code(),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error(std::string(kSystemA) + "A = 1, 2, 3, 4\n").code(),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error(std::string(kSystemA) + "[extra]\n").code(), ErrorCode::ParseError);
  EXPECT_EQ(parse_error("n = 2\n").code(), ErrorCode::ParseError);
  EXPECT_EQ(parse_error("# nothing\n").code(), ErrorCode::MissingKey);
}

GTEST_TEST(ParseConfig, ModelIsValidated) {
  const Error e = parse_error(replace_line(kSystemA, "U", "U = 0.4, 0.1, 0.1, 0.7"));
  EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
}

GTEST_TEST(ParseConfig, CampaignSection) {
  const ConfigFile f = parse(std::string(kSystemA) +
                             "[campaign]\narl_h = 100\ntrials = 40\nnu = 300\nk0 = 150\n"
                             "seed = 9\nbudgets = 1, 2\n");
  CampaignConfig c;
  f.campaign.apply(c);
  EXPECT_EQ(c.trials, 40);
  EXPECT_EQ(c.nu, 300);
  EXPECT_EQ(c.k0, 150);
  EXPECT_EQ(c.seed, 9u);
  ASSERT_EQ(c.grid.size(), 2u);
  EXPECT_EQ(c.grid[1].kind, GridPoint::Kind::Optimized);
  EXPECT_EQ(parse_error(std::string(kSystemA) + "[campaign]\nfoo = 1\n").code(),
            ErrorCode::ParseError);
}

GTEST_TEST(WriteConfig, RoundTrips) {
  std::ostringstream out;
  write_config(out, system_b().model);
  const ConfigFile f = parse(out.str());
  EXPECT_EQ(f.model.A, system_b().model.A);
  EXPECT_EQ(f.model.B, system_b().model.B);
  EXPECT_EQ(f.model.U, system_b().model.U);
}

GTEST_TEST(ParseSigmaE, Grammar) {
  const GridPoint d = parse_sigma_e("diag:0.29,0.29", 2);
  EXPECT_EQ(d.kind, GridPoint::Kind::Diagonal);
  EXPECT_EQ(d.values, (std::vector<double>{0.29, 0.29}));
  const GridPoint r = parse_sigma_e("rank1:1,0,2.5", 2);
  EXPECT_EQ(r.kind, GridPoint::Kind::RankOne);
  const GridPoint o = parse_sigma_e("opt:3", 2);
  EXPECT_EQ(o.kind, GridPoint::Kind::Optimized);
  EXPECT_EQ(o.values, std::vector<double>{3.0});

  auto code = [](const std::string& text) {
    try {
      parse_sigma_e(text, 2);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;  // sentinel: no error
  };
  EXPECT_EQ(code("diag:1"), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code("rank1:1,0"), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code("opt:1,2"), ErrorCode::ParseError);
  EXPECT_EQ(code("opt:0"), ErrorCode::InvalidArgument);
  EXPECT_EQ(code("full:1,2"), ErrorCode::ParseError);
  EXPECT_EQ(code("0.29"), ErrorCode::ParseError);
  EXPECT_EQ(code("diag:1,"), ErrorCode::ParseError);
  EXPECT_EQ(code("diag:-1,1"), ErrorCode::InvalidArgument);
}

GTEST_TEST(SweepCsv, RoundTripsRandomRows) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> value(-1e3, 1e3);
  std::uniform_int_distribution<int> count(0, 1000);
  for (int trial = 0; trial < 50; ++trial) {
    SweepResult r;
    const int rows = 1 + trial % 7;
    for (int i = 0; i < rows; ++i) {
      SweepRow row;
      row.delta_lqg = std::abs(value(rng)) * std::pow(10.0, trial % 5 - 2);
      row.sigma_e_kind = i % 2 ? "rank1" : "diag";
      for (int j = 0; j < 2 + i % 2; ++j) row.sigma_e_params.push_back(value(rng) / 7.0);
      row.kld_nats = value(rng) / 3.0;
      row.sadd_theory = i == 0 ? std::numeric_limits<double>::infinity() : value(rng);
      row.add_empirical = value(rng) * 1e-7;
      row.add_ci = std::abs(value(rng)) / 11.0;
      row.false_alarm_trials = count(rng);
      row.trials = count(rng);
      row.seed = rng();
      r.rows.push_back(row);
    }
    std::stringstream io;
    write_sweep_csv(io, r);
    const SweepResult back = read_sweep_csv(io);
    ASSERT_EQ(back.rows.size(), r.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) EXPECT_EQ(back.rows[i], r.rows[i]);
  }
}

GTEST_TEST(SweepCsv, NanSurvivesRoundTrip) {
  SweepResult r;
  SweepRow row;
  row.sigma_e_kind = "diag";
  row.sigma_e_params = {0.0, 0.0};
  row.sadd_theory = std::numeric_limits<double>::infinity();
  row.add_empirical = std::numeric_limits<double>::quiet_NaN();
  r.rows.push_back(row);
  std::stringstream io;
  write_sweep_csv(io, r);
  const SweepResult back = read_sweep_csv(io);
  EXPECT_TRUE(std::isnan(back.rows[0].add_empirical));
  EXPECT_TRUE(std::isinf(back.rows[0].sadd_theory));
}

GTEST_TEST(SweepCsv, RejectsWrongHeader) {
  std::istringstream in("a,b,c\n");
  EXPECT_THROW(read_sweep_csv(in), Error);
}

}  // namespace
}  // namespace wmcusum
