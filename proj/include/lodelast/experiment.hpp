#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fem.hpp"
#include "lod.hpp"
#include "mesh.hpp"
#include "problems.hpp"

namespace lodelast {

enum class ExperimentCase { constant, multiscale, locking, decay };

inline std::string to_string(ExperimentCase c) {
  switch (c) {
    case ExperimentCase::constant: return "constant";
    case ExperimentCase::multiscale: return "multiscale";
    case ExperimentCase::locking: return "locking";
    case ExperimentCase::decay: return "decay";
  }
  return "?";
}

inline ExperimentCase parse_case(const std::string& s) {
  if (s == "constant") return ExperimentCase::constant;
  if (s == "multiscale") return ExperimentCase::multiscale;
  if (s == "locking") return ExperimentCase::locking;
  if (s == "decay") return ExperimentCase::decay;
  throw std::invalid_argument("unknown case '" + s + "'");
}

struct ExperimentConfig {
  ExperimentCase kind = ExperimentCase::constant;
  int fine_level = 64;
  std::vector<int> coarse_levels{2, 4, 8, 16, 32};
  std::vector<int> k;  // empty: localization_schedule(H)
  std::uint64_t seed = default_seed;
  std::string out_dir = ".";
  bool plots = false;

  // Problem parameters of the studies.
  int checkerboard_n = 32;
  double checkerboard_lo = 0.1;
  double checkerboard_hi = 10.0;
  double locking_lambda = 1e3;

  static ExperimentConfig defaults_for(ExperimentCase c) {
    ExperimentConfig cfg;
    cfg.kind = c;
    if (c == ExperimentCase::locking) {
      cfg.fine_level = 128;
      cfg.coarse_levels = {2, 4, 8, 16, 32, 64};
    } else if (c == ExperimentCase::decay) {
      cfg.fine_level = 32;
      cfg.coarse_levels = {8};
    }
    return cfg;
  }

  void validate() const {
    if (fine_level < 1) throw std::invalid_argument("fine level must be positive");
    if (coarse_levels.empty()) throw std::invalid_argument("at least one coarse level is required");
    for (int n : coarse_levels)
      if (n < 1 || fine_level % n != 0)
        throw std::invalid_argument("coarse level " + std::to_string(n) + " does not divide fine level " +
                                    std::to_string(fine_level));
    if (!k.empty() && k.size() != coarse_levels.size())
      throw std::invalid_argument("k list length must match the number of coarse levels");
    for (int kk : k)
      if (kk < 0) throw std::invalid_argument("k must be nonnegative");
    if ((kind == ExperimentCase::multiscale || kind == ExperimentCase::decay) && fine_level % checkerboard_n != 0)
      throw std::invalid_argument("fine level must resolve the " + std::to_string(checkerboard_n) +
                                  "x" + std::to_string(checkerboard_n) + " coefficient grid");
  }

  int k_for(std::size_t level) const {
    if (!k.empty()) return k[level];
    return localization_schedule(std::sqrt(2.0) / coarse_levels[level]);
  }
};

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const int v = std::stoi(item, &pos);
    if (pos != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// Key-value config text: `key = value` per line, `#` starts a comment.
/// Keys: case, fine, coarse, k, seed, out, plots.
inline ExperimentConfig parse_config(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!kv.count("case")) throw std::invalid_argument("config needs a 'case' key");
  ExperimentConfig cfg = ExperimentConfig::defaults_for(parse_case(kv.at("case")));
  for (const auto& [key, value] : kv) {
    if (key == "case") continue;
    else if (key == "fine") cfg.fine_level = std::stoi(value);
    else if (key == "coarse") cfg.coarse_levels = parse_int_list(value);
    else if (key == "k") cfg.k = parse_int_list(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "plots") cfg.plots = (value == "1" || value == "true" || value == "yes");
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return cfg;
}

struct LevelResult {
  int n = 0;
  double H = 0.0;
  int k = 0;
  double err_gfem = 0.0;
  double err_fem = 0.0;
  double seconds = 0.0;
};

struct ConvergenceReport {
  ExperimentCase kind = ExperimentCase::constant;
  int fine_level = 0;
  std::vector<LevelResult> levels;
  double slope_gfem = std::numeric_limits<double>::quiet_NaN();
  double slope_fem = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> reference_error;  // locking: ||grad(I_h u - u_h)|| / ||grad I_h u||
  std::vector<double> decay_tails;        // decay: e_k for k = 0, 1, ...
  int decay_element = -1;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline CoefficientField experiment_coefficient(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentCase::constant: return constant_coefficients(1.0, 1.0);
    case ExperimentCase::locking: return constant_coefficients(1.0, cfg.locking_lambda);
    default: return random_checkerboard(cfg.checkerboard_n, cfg.checkerboard_lo, cfg.checkerboard_hi, cfg.seed);
  }
}

/// Interior coarse element nearest the domain centre, used by the decay study.
inline int central_element(const Mesh& coarse) {
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (int t = 0; t < static_cast<int>(coarse.num_triangles()); ++t) {
    const Point b = coarse.barycenter(t);
    const double d = std::hypot(b[0] - 0.5, b[1] - 0.5);
    if (d < best_d - 1e-12) {
      best_d = d;
      best = t;
    }
  }
  return best;
}

using ProgressSink = std::function<void(const std::string&)>;

inline ConvergenceReport run_experiment(const ExperimentConfig& cfg, const ProgressSink& progress = {}) {
  cfg.validate();
  auto log = [&](const std::string& s) {
    if (progress) progress(s);
  };
  ConvergenceReport report;
  report.kind = cfg.kind;
  report.fine_level = cfg.fine_level;

  const CoefficientField coeff = experiment_coefficient(cfg);

  if (cfg.kind == ExperimentCase::decay) {
    const Mesh coarse = build_uniform_mesh(cfg.coarse_levels.front());
    const MultiscaleContext ctx(coarse, refine_to(coarse, cfg.fine_level), coeff);
    const int T = central_element(coarse);
    const int z = coarse.triangle(T)[0];
    const int a = ctx.coarse_dofs().free_index[dof(z, 0)];
    if (a < 0) throw std::runtime_error("decay study needs an element with a free vertex");
    const Vector v = ctx.interpolation().prolong(Vector::Unit(static_cast<Eigen::Index>(ctx.coarse_dofs().num_free()), a));
    report.decay_element = T;
    report.decay_tails = measure_corrector_decay(ctx, T, v, ctx.saturation_k());
    while (report.decay_tails.size() > 1 && report.decay_tails[report.decay_tails.size() - 2] == 0.0)
      report.decay_tails.pop_back();
    return report;
  }

  ProblemSpec problem{coeff};
  std::optional<BrennerBenchmark> brenner;
  if (cfg.kind == ExperimentCase::locking) {
    brenner.emplace(cfg.locking_lambda);
    problem = brenner->problem();
  } else {
    problem.body_force = Vec2{1.0, 1.0};
  }

  const Mesh fine_plain = build_uniform_mesh(cfg.fine_level);
  log("reference solve on n_h = " + std::to_string(cfg.fine_level));
  const Vector u_h = solve_fem(problem, fine_plain);
  const double ref_norm = h1_seminorm(fine_plain, u_h);
  if (brenner) {
    const Vector Iu = brenner->nodal_interpolant(fine_plain);
    report.reference_error = h1_seminorm(fine_plain, Iu - u_h) / h1_seminorm(fine_plain, Iu);
  }

  std::vector<double> Hs, eg, ef;
  for (std::size_t l = 0; l < cfg.coarse_levels.size(); ++l) {
    const auto start = std::chrono::steady_clock::now();
    LevelResult r;
    r.n = cfg.coarse_levels[l];
    r.H = std::sqrt(2.0) / r.n;
    r.k = cfg.k_for(l);
    try {
      const Mesh coarse = build_uniform_mesh(r.n);
      const MultiscaleContext ctx(coarse, refine_to(coarse, cfg.fine_level), coeff);
      const GfemResult gfem = solve_gfem(problem, ctx, build_corrector_set(ctx, r.k));
      const Vector u_H = solve_coarse_fem(problem, ctx);
      r.err_gfem = h1_seminorm(ctx.fine(), u_h - gfem.solution) / ref_norm;
      r.err_fem = h1_seminorm(ctx.fine(), u_h - u_H) / ref_norm;
    } catch (const std::exception& e) {
      throw std::runtime_error("coarse level n = " + std::to_string(r.n) + ": " + e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream msg;
    msg << "n = " << r.n << ", k = " << r.k << ": err_gfem = " << r.err_gfem << ", err_fem = " << r.err_fem
        << " (" << std::fixed << std::setprecision(2) << r.seconds << " s)";
    log(msg.str());
    Hs.push_back(r.H);
    eg.push_back(r.err_gfem);
    ef.push_back(r.err_fem);
    report.levels.push_back(r);
  }
  report.slope_gfem = loglog_slope(Hs, eg);
  report.slope_fem = loglog_slope(Hs, ef);
  return report;
}

inline void write_csv(std::ostream& os, const ConvergenceReport& report) {
  os << "H,k,err_gfem,err_fem,slope_gfem,slope_fem\n";
  os << std::setprecision(17);
  for (const auto& l : report.levels)
    os << l.H << ',' << l.k << ',' << l.err_gfem << ',' << l.err_fem << ',' << report.slope_gfem << ','
       << report.slope_fem << '\n';
}

inline void write_decay_csv(std::ostream& os, const ConvergenceReport& report) {
  os << "k,tail\n" << std::setprecision(17);
  for (std::size_t k = 0; k < report.decay_tails.size(); ++k) os << k << ',' << report.decay_tails[k] << '\n';
}

inline void emit_csv(const ConvergenceReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (report.kind == ExperimentCase::decay)
    write_decay_csv(os, report);
  else
    write_csv(os, report);
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
}

struct CsvRow {
  double H;
  int k;
  double err_gfem, err_fem, slope_gfem, slope_fem;
};

inline std::vector<CsvRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "H,k,err_gfem,err_fem,slope_gfem,slope_fem")
    throw std::runtime_error("unexpected CSV header");
  std::vector<CsvRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& s : f)
      if (!std::getline(ss, s, ',')) throw std::runtime_error("short CSV row");
    rows.push_back({std::stod(f[0]), std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return rows;
}

/// Log-log SVG of both error series with a dashed slope-1 reference line.
inline void write_svg(std::ostream& os, const ConvergenceReport& report) {
  const double W = 480, Hpx = 360, ml = 60, mr = 20, mt = 20, mb = 50;
  std::vector<double> xs, ys;
  for (const auto& l : report.levels) {
    xs.push_back(l.H);
    ys.push_back(l.err_gfem);
    ys.push_back(l.err_fem);
  }
  double x0 = 1e-2, x1 = 1.0, y0 = 1e-3, y1 = 1.0;
  if (!xs.empty()) {
    x0 = std::pow(10, std::floor(std::log10(*std::min_element(xs.begin(), xs.end()))));
    x1 = std::pow(10, std::ceil(std::log10(*std::max_element(xs.begin(), xs.end()))));
    double ymin = std::numeric_limits<double>::max(), ymax = 0;
    for (double y : ys)
      if (y > 0) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    if (ymax > 0) {
      y0 = std::pow(10, std::floor(std::log10(std::min(ymin, x0))));
      y1 = std::pow(10, std::ceil(std::log10(std::max(ymax, x1))));
    }
  }
  auto px = [&](double x) { return ml + (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0)) * (W - ml - mr); };
  auto py = [&](double y) { return Hpx - mb - (std::log10(y) - std::log10(y0)) / (std::log10(y1) - std::log10(y0)) * (Hpx - mt - mb); };

  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hpx << "\">\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << Hpx - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = x0; d <= x1 * 1.0001; d *= 10)
    os << "<text x=\"" << px(d) << "\" y=\"" << Hpx - mb + 18 << "\" font-size=\"11\" text-anchor=\"middle\">1e"
       << static_cast<int>(std::round(std::log10(d))) << "</text>\n";
  for (double d = y0; d <= y1 * 1.0001; d *= 10)
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(d) + 4 << "\" font-size=\"11\" text-anchor=\"end\">1e"
       << static_cast<int>(std::round(std::log10(d))) << "</text>\n";
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << Hpx - 12 << "\" font-size=\"12\" text-anchor=\"middle\">H</text>\n";

  auto polyline = [&](auto value, const char* color, const char* dash) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\"" << dash << " points=\"";
    for (const auto& l : report.levels) os << px(l.H) << ',' << py(value(l)) << ' ';
    os << "\"/>\n";
  };
  if (!report.levels.empty()) {
    polyline([](const LevelResult& l) { return l.H; }, "black", " stroke-dasharray=\"5,4\"");
    polyline([](const LevelResult& l) { return l.err_gfem; }, "blue", "");
    polyline([](const LevelResult& l) { return l.err_fem; }, "red", "");
    for (const auto& l : report.levels) {
      os << "<circle cx=\"" << px(l.H) << "\" cy=\"" << py(l.err_gfem) << "\" r=\"4\" fill=\"none\" stroke=\"blue\"/>\n";
      os << "<text x=\"" << px(l.H) << "\" y=\"" << py(l.err_fem) + 4
         << "\" font-size=\"14\" fill=\"red\" text-anchor=\"middle\">*</text>\n";
    }
  }
  os << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16 << "\" font-size=\"12\" fill=\"blue\">GFEM</text>\n";
  os << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 32 << "\" font-size=\"12\" fill=\"red\">P1-FEM</text>\n";
  os << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 48 << "\" font-size=\"12\">--- H</text>\n";
  os << "</svg>\n";
}

inline void emit_plot(const ConvergenceReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_svg(os, report);
}

}  // namespace lodelast
