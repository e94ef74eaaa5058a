#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "lodelast/experiment.hpp"

using namespace lodelast;

namespace {

ConvergenceReport synthetic_report(int levels) {
  ConvergenceReport r;
  for (int i = 0; i < levels; ++i) {
    LevelResult l;
    l.n = 2 << i;
    l.H = std::sqrt(2.0) / l.n;
    l.k = i / 2 + 1;
    l.err_gfem = 0.7 * l.H + 1e-3 / 3.0;
    l.err_fem = std::sqrt(l.H) / 7.0;
    r.levels.push_back(l);
  }
  r.slope_gfem = 1.0 / 3.0;
  r.slope_fem = std::acos(-1.0);
  return r;
}

std::string csv_of(const ConvergenceReport& r) {
  std::ostringstream os;
  write_csv(os, r);
  return os.str();
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

}  // namespace

TEST(Csv, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(csv_of(ConvergenceReport{}), "H,k,err_gfem,err_fem,slope_gfem,slope_fem\n");
}

TEST(Csv, RowCountAndExactRoundTrip) {
  const auto r = synthetic_report(5);
  std::istringstream is(csv_of(r));
  const auto rows = read_csv(is);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].H, r.levels[i].H);
    EXPECT_EQ(rows[i].k, r.levels[i].k);
    EXPECT_EQ(rows[i].err_gfem, r.levels[i].err_gfem);
    EXPECT_EQ(rows[i].err_fem, r.levels[i].err_fem);
    EXPECT_EQ(rows[i].slope_gfem, r.slope_gfem);
    EXPECT_EQ(rows[i].slope_fem, r.slope_fem);
  }
}

TEST(Csv, ReadRejectsBadInput) {
  std::istringstream header("H,k\n");
  EXPECT_THROW(read_csv(header), std::runtime_error);
  std::istringstream shortrow("H,k,err_gfem,err_fem,slope_gfem,slope_fem\n1,2,3\n");
  EXPECT_THROW(read_csv(shortrow), std::runtime_error);
}

TEST(Csv, EmitFailsOnUnwritablePath) {
  EXPECT_THROW(emit_csv(synthetic_report(1), "/nonexistent-dir/x.csv"), std::runtime_error);
}

TEST(Svg, HasBothSeriesAndReferenceLine) {
  std::ostringstream os;
  write_svg(os, synthetic_report(4));
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NE(s.find("stroke=\"blue\" points="), std::string::npos);
  EXPECT_NE(s.find("stroke=\"red\" points="), std::string::npos);
  EXPECT_NE(s.find("stroke-dasharray"), std::string::npos);
  std::ostringstream empty;
  write_svg(empty, ConvergenceReport{});
  EXPECT_NE(empty.str().find("</svg>"), std::string::npos);
}

TEST(Slope, LeastSquaresOnPowerLaw) {
  EXPECT_NEAR(loglog_slope({0.5, 0.25, 0.125, 0.0625}, {0.75, 0.1875, 0.046875, 0.01171875}), 2.0, 1e-14);
  EXPECT_NEAR(loglog_slope({1, 2, 4}, {1, 1, 1}), 0.0, 1e-15);
  EXPECT_TRUE(std::isnan(loglog_slope({1.0}, {1.0})));
  EXPECT_TRUE(std::isnan(loglog_slope({1.0, 2.0}, {1.0})));
}

TEST(Config, DefaultsAndSchedule) {
  const auto c = ExperimentConfig::defaults_for(ExperimentCase::constant);
  EXPECT_EQ(c.fine_level, 64);
  EXPECT_EQ(c.coarse_levels, (std::vector<int>{2, 4, 8, 16, 32}));
  std::vector<int> ks;
  for (std::size_t l = 0; l < c.coarse_levels.size(); ++l) ks.push_back(c.k_for(l));
  EXPECT_EQ(ks, (std::vector<int>{1, 1, 2, 2, 3}));
  const auto lock = ExperimentConfig::defaults_for(ExperimentCase::locking);
  EXPECT_EQ(lock.fine_level, 128);
  EXPECT_EQ(lock.k_for(5), 4);
}

TEST(Config, ParseKeyValueText) {
  const auto c = parse("# comment\ncase = multiscale\nfine=32\ncoarse = 4, 8\nk=1,2\nseed=7\nout=/tmp/x\nplots=yes\n\n");
  EXPECT_EQ(c.kind, ExperimentCase::multiscale);
  EXPECT_EQ(c.fine_level, 32);
  EXPECT_EQ(c.coarse_levels, (std::vector<int>{4, 8}));
  EXPECT_EQ(c.k, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.out_dir, "/tmp/x");
  EXPECT_TRUE(c.plots);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParseErrors) {
  EXPECT_THROW(parse("fine=8\n"), std::invalid_argument);
  EXPECT_THROW(parse("case=elastic\n"), std::invalid_argument);
  EXPECT_THROW(parse("case=constant\ncolour=red\n"), std::invalid_argument);
  EXPECT_THROW(parse("case=constant\njust words\n"), std::invalid_argument);
  EXPECT_THROW(parse("case=constant\ncoarse=2,x\n"), std::invalid_argument);
  EXPECT_THROW(parse_int_list("3a"), std::invalid_argument);
}

TEST(Config, ValidationErrors) {
  auto c = ExperimentConfig::defaults_for(ExperimentCase::constant);
  c.coarse_levels = {2, 5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.coarse_levels = {2, 4};
  c.k = {1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.k = {1, -1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.k.clear();
  c.coarse_levels.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  auto m = ExperimentConfig::defaults_for(ExperimentCase::multiscale);
  m.fine_level = 16;
  m.coarse_levels = {4};
  EXPECT_THROW(m.validate(), std::invalid_argument);
  EXPECT_THROW(run_experiment(m), std::invalid_argument);
}

TEST(Run, SmallConstantStudy) {
  auto c = ExperimentConfig::defaults_for(ExperimentCase::constant);
  c.fine_level = 16;
  c.coarse_levels = {2, 4, 8};
  int messages = 0;
  const auto r = run_experiment(c, [&](const std::string&) { ++messages; });
  EXPECT_EQ(messages, 4);
  ASSERT_EQ(r.levels.size(), 3u);
  for (const auto& l : r.levels) {
    EXPECT_GE(l.err_gfem, 0.0);
    EXPECT_GT(l.err_fem, 0.0);
    EXPECT_LE(l.err_fem, 1.0);
  }
  EXPECT_LT(r.levels.back().err_gfem, r.levels.front().err_gfem);
  EXPECT_FALSE(r.reference_error.has_value());
  EXPECT_TRUE(std::isfinite(r.slope_gfem));
}

TEST(Run, DeterministicCsvBytes) {
  auto c = ExperimentConfig::defaults_for(ExperimentCase::multiscale);
  c.fine_level = 32;
  c.coarse_levels = {4, 8};
  EXPECT_EQ(csv_of(run_experiment(c)), csv_of(run_experiment(c)));
  auto other = c;
  other.seed = c.seed + 1;
  EXPECT_NE(csv_of(run_experiment(c)), csv_of(run_experiment(other)));
}

TEST(Run, DecayTailsMonotoneEndingInSingleZero) {
  auto c = ExperimentConfig::defaults_for(ExperimentCase::decay);
  c.coarse_levels = {4};
  const auto r = run_experiment(c);
  ASSERT_GE(r.decay_tails.size(), 2u);
  EXPECT_EQ(r.decay_tails.back(), 0.0);
  EXPECT_GT(r.decay_tails[r.decay_tails.size() - 2], 0.0);
  for (std::size_t k = 1; k < r.decay_tails.size(); ++k) EXPECT_LE(r.decay_tails[k], r.decay_tails[k - 1]);
  std::ostringstream os;
  write_decay_csv(os, r);
  EXPECT_EQ(os.str().rfind("k,tail\n0,", 0), 0u);
}

TEST(Run, CentralElementIsNearCentre) {
  const Mesh m = build_uniform_mesh(8);
  const Point b = m.barycenter(central_element(m));
  EXPECT_LT(std::hypot(b[0] - 0.5, b[1] - 0.5), 0.125);
}
