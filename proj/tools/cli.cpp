#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "iqp/iqp.hpp"
#include "iqp/text.hpp"

namespace iqp::cli {

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

namespace fs = std::filesystem;

// Bad values found after parsing; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<double, double> parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("expected two numbers \"a,b\"");
  std::size_t used_a = 0, used_b = 0;
  const std::string a = text.substr(0, comma);
  const std::string b = text.substr(comma + 1);
  const double x = std::stod(a, &used_a);
  const double y = std::stod(b, &used_b);
  if (used_a != a.size() || used_b != b.size()) {
    throw std::invalid_argument("trailing characters in \"" + text + "\"");
  }
  return {x, y};
}

const CLI::Validator number_pair(
    [](std::string& s) -> std::string {
      try {
        parse_pair(s);
        return {};
      } catch (const std::exception&) {
        return "expected \"re,im\" (two comma-separated numbers), got \"" + s + "\"";
      }
    },
    "RE,IM");

std::string quote_value(const std::string& s) { return '"' + s + '"'; }

template <typename T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_real(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return quote_value(v);
  } else {
    return std::to_string(v);
  }
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

// Options, preset resolution and the resolved-config record of one subcommand.
class Command {
 public:
  Command(std::string name, std::string description)
      : name_(std::move(name)), app_(std::move(description), "iqp " + name_) {
    app_.set_config("--config", "", "Read options from a key = value file");
    app_.allow_config_extras(CLI::config_extras_mode::error);
    app_.add_option("--seed", seed_, "Random seed")->capture_default_str();
    app_.add_option("--threads", threads_, "Worker threads, 0 = all cores")
        ->envname("IQP_THREADS")
        ->capture_default_str();
    app_.add_option("--out", out_, "Output directory (default <command>-<timestamp>)");
    app_.add_option("--preset", preset_, "Budget preset")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
    record_.emplace_back([this] { return "seed = " + to_text(seed_); });
    record_.emplace_back([this] { return "preset = " + to_text(preset_); });
  }
  virtual ~Command() = default;

  CLI::App& app() { return app_; }
  const std::string& name() const { return name_; }

  // Plain option whose value goes into the config record.
  template <typename T>
  CLI::Option* option(const std::string& flag, T& var, const std::string& help) {
    auto* opt = app_.add_option("--" + flag, var, help)->capture_default_str();
    record_.emplace_back([flag, &var] { return flag + " = " + to_text(var); });
    return opt;
  }

  CLI::Option* flag(const std::string& flag, bool& var, const std::string& help) {
    auto* opt = app_.add_flag("--" + flag, var, help);
    record_.emplace_back([flag, &var] { return flag + " = " + to_text(var); });
    return opt;
  }

  // Optional string option, recorded only when set.
  CLI::Option* optional_text(const std::string& flag, std::string& var, const std::string& help) {
    auto* opt = app_.add_option("--" + flag, var, help);
    record_.emplace_back([flag, &var] { return var.empty() ? std::string{} : flag + " = " + quote_value(var); });
    return opt;
  }

  // Budget option whose default comes from the preset.
  template <typename T>
  CLI::Option* budget(const std::string& flag, T& var, T desk, T paper, const std::string& help) {
    auto* opt = app_.add_option("--" + flag, var,
                                help + " [desk " + to_text(desk) + ", paper " + to_text(paper) + "]");
    resolvers_.emplace_back([opt, &var, desk, paper](bool is_paper) {
      if (opt->count() == 0) var = is_paper ? paper : desk;
    });
    record_.emplace_back([flag, &var] { return flag + " = " + to_text(var); });
    return opt;
  }

  int execute(std::ostream& out, std::ostream& err) {
    for (auto& r : resolvers_) r(preset_ == "paper");
    std::string config_text;
    for (auto& r : record_) {
      const std::string line = r();
      if (!line.empty()) config_text += line + "\n";
    }
    err << "[iqp " << name_ << "] resolved config:\n" << config_text;
    out_dir_ = out_.empty() ? fs::path(name_ + "-" + timestamp()) : fs::path(out_);
    fs::create_directories(out_dir_);
    write_text("config.ini", [&](std::ostream& o) { o << config_text; });
    err << "[iqp " << name_ << "] writing to " << out_dir_.string() << "\n";
    body(out, err);
    return exit_code_;
  }

 protected:
  virtual void body(std::ostream& out, std::ostream& err) = 0;

  void write_text(const std::string& file, const std::function<void(std::ostream&)>& fn) {
    write_file(file, std::ios::out, fn);
  }
  void write_binary(const std::string& file, const std::function<void(std::ostream&)>& fn) {
    write_file(file, std::ios::binary, fn);
  }

  SeededSampler sampler(std::uint64_t stream) const { return SeededSampler{seed_, stream}; }
  unsigned threads() const { return threads_; }
  const fs::path& out_dir() const { return out_dir_; }
  void set_exit_code(int code) { exit_code_ = code; }

 private:
  void write_file(const std::string& file, std::ios::openmode mode,
                  const std::function<void(std::ostream&)>& fn) {
    const fs::path path = out_dir_ / file;
    std::ofstream o(path, mode | std::ios::trunc);
    if (!o) throw IoError("cannot open " + path.string() + " for writing");
    fn(o);
    if (!o) throw IoError("write failed for " + path.string());
  }

  std::string name_;
  CLI::App app_;
  std::uint64_t seed_ = 1;
  unsigned threads_ = 0;
  std::string out_;
  std::string preset_ = "desk";
  fs::path out_dir_;
  int exit_code_ = 0;
  std::vector<std::function<void(bool)>> resolvers_;
  std::vector<std::function<std::string()>> record_;
};

// Base for commands that take a protocol parameter.
class ParameterCommand : public Command {
 public:
  ParameterCommand(std::string name, std::string description)
      : Command(std::move(name), std::move(description)) {
    option("p", p_text_, "Protocol parameter as re,im")->check(number_pair);
  }

 protected:
  ProtocolParameter p() const {
    const auto [re, im] = parse_pair(p_text_);
    return ProtocolParameter{re, im};
  }

 private:
  std::string p_text_ = "0,1";
};

// Grid dimensions shared by the density and coverage commands.
struct GridOptions {
  std::uint32_t n_phi = 100;
  std::uint32_t n_c = 100;

  void add(Command& c) {
    c.budget<std::uint32_t>("n-phi", n_phi, 100, 500, "Grid cells in azimuth");
    c.budget<std::uint32_t>("n-c", n_c, 100, 500, "Grid cells in cos(theta)");
  }
  EqualAreaGrid grid() const { return EqualAreaGrid{n_phi, n_c}; }
};

SpherePoint parse_point(const std::string& text) {
  if (text == "inf") return point_from_z(infinity);
  const auto [re, im] = parse_pair(text);
  return point_from_z(cplx{re, im});
}

// ---------------------------------------------------------------------------

class OrbitCommand : public ParameterCommand {
 public:
  OrbitCommand() : ParameterCommand("orbit", "Iterate one state and write its trajectory") {
    option("steps", steps_, "Iterations");
    optional_text("z0", z0_, "Start point as re,im or inf (default random)");
    option("purity", purity_, "Initial purity; below 1 the mixed-state map is used")
        ->check(CLI::Range(0.5, 1.0));
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const ProtocolParameter par = p();
    SeededSampler s = sampler(0);
    BlochState r = z0_.empty() ? sample_uniform_direction(s) : bloch_from_point(parse_point(z0_));
    r = scaled(r, radius_for_purity(purity_));
    const bool pure = purity_ == 1.0;
    const ProtocolStep step{par};
    SpherePoint z = pure ? point_from_bloch(r) : SpherePoint{};
    write_text("orbit.csv", [&](std::ostream& o) {
      o << "step,u,v,w,purity\n";
      for (std::uint64_t k = 0; k <= steps_; ++k) {
        if (pure) r = bloch_from_point(z);
        o << k << ',' << format_real(r.u) << ',' << format_real(r.v) << ',' << format_real(r.w)
          << ',' << format_real(purity(r)) << '\n';
        if (k == steps_) break;
        if (pure) {
          z = apply_map(par, z);
        } else {
          r = step(r);
        }
      }
    });
    out << "final state: u = " << format_real(r.u) << ", v = " << format_real(r.v)
        << ", w = " << format_real(r.w) << ", purity = " << format_real(purity(r)) << "\n";
  }

 private:
  std::uint64_t steps_ = 100;
  std::string z0_;
  double purity_ = 1.0;
};

class LyapunovCommand : public ParameterCommand {
 public:
  LyapunovCommand() : ParameterCommand("lyapunov", "Estimate the Lyapunov exponent of f_p") {
    budget<std::uint64_t>("steps", options_.n_steps, 1'000'000, 10'000'000, "Averaged iterations");
    option("burn-in", options_.burn_in, "Discarded iterations");
    option("starts", starts_, "Number of random starting points");
    optional_text("z0", z0_, "Start point as re,im or inf (default random)");
    flag("strict", options_.strict, "Fail instead of clamping on critical-point hits");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const ProtocolParameter par = p();
    std::vector<LyapunovEstimate> results(starts_);
    for (std::uint32_t i = 0; i < starts_; ++i) {
      SeededSampler s = sampler(0).substream(i);
      const SpherePoint z0 =
          z0_.empty() ? point_from_bloch(sample_uniform_direction(s)) : parse_point(z0_);
      try {
        results[i] = lyapunov(par, z0, options_);
      } catch (const CriticalOrbitHit& e) {
        throw CriticalOrbitHit("start " + std::to_string(i) + ": " + e.what());
      }
    }
    write_text("lyapunov.csv", [&](std::ostream& o) {
      o << "value,stderr,n_steps\n";
      for (const auto& e : results) {
        o << format_real(e.value) << ',' << format_real(e.standard_error) << ',' << e.n_steps
          << '\n';
      }
    });
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& e = results[i];
      out << "lambda = " << format_real(e.value) << "  stderr = " << format_real(e.standard_error)
          << "  steps = " << e.n_steps;
      if (e.clamped_terms > 0) out << "  clamped = " << e.clamped_terms;
      if (results.size() > 1) out << "  (start " << i << ")";
      out << "\n";
    }
  }

 private:
  LyapunovOptions options_;
  std::uint32_t starts_ = 1;
  std::string z0_;
};

class CyclesCommand : public ParameterCommand {
 public:
  CyclesCommand() : ParameterCommand("cycles", "Search the critical orbits for attracting cycles") {
    budget<std::uint32_t>("max-period", config_.max_period, 100, 500, "Longest period searched");
    budget<std::uint64_t>("burn-in", config_.burn_in, 100'000, 10'000'000, "Discarded iterations");
    option("window", config_.window, "Verification window, 0 = 3 * max-period");
    option("tol", config_.tol, "Chordal recurrence tolerance");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const ProtocolParameter par = p();
    const auto critical = critical_points(par);
    const char* names[] = {"0", "inf"};
    std::array<CycleReport, 2> reports;
    for (std::size_t i = 0; i < 2; ++i) {
      reports[i] = detect_attracting_cycle(par, critical[i], config_);
    }
    write_text("cycles.csv", [&](std::ostream& o) {
      o << "critical_point,found,period,multiplier,u,v,w\n";
      for (std::size_t i = 0; i < 2; ++i) {
        const auto& r = reports[i];
        const BlochState b = bloch_from_point(r.representative);
        o << names[i] << ',' << (r.found ? 1 : 0) << ',' << r.period << ','
          << format_real(r.multiplier_modulus) << ',' << format_real(b.u) << ','
          << format_real(b.v) << ',' << format_real(b.w) << '\n';
      }
    });
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& r = reports[i];
      out << "critical point z = " << names[i] << ": ";
      if (r.found) {
        out << "period-" << r.period << " attracting cycle, |multiplier| = "
            << format_real(r.multiplier_modulus);
        if (r.multiplier_modulus == 0.0) out << " (super-attracting)";
      } else {
        out << "no attracting cycle up to period " << config_.max_period;
      }
      out << "\n";
    }
  }

 private:
  CycleSearchConfig config_;
};

void report_histogram(std::ostream& out, const Histogram& h) {
  out << "visited cells: " << h.visited_cells() << " / " << h.grid().cell_count() << "\n"
      << "max cell mass: " << format_real(h.max_probability()) << " (uniform "
      << format_real(1.0 / static_cast<double>(h.grid().cell_count())) << ")\n"
      << "TV distance to uniform: " << format_real(distance_to_uniform(h)) << "\n";
}

class DensityTimeCommand : public ParameterCommand {
 public:
  DensityTimeCommand()
      : ParameterCommand("density-time", "Visit histogram of long single orbits") {
    grid_.add(*this);
    budget<std::uint32_t>("orbits", config_.n_orbits, 10, 100, "Number of orbits");
    budget<std::uint64_t>("orbit-len", config_.orbit_len, 1'000'000, 10'000'000,
                          "Recorded iterations per orbit");
    option("burn-in", config_.burn_in, "Discarded iterations per orbit");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const Histogram h = time_average_density(p(), config_, grid_.grid(), sampler(0), threads());
    write_binary("density.blh1", [&](std::ostream& o) { h.write_blh1(o); });
    write_text("density.csv", [&](std::ostream& o) { h.write_csv(o); });
    report_histogram(out, h);
  }

 private:
  GridOptions grid_;
  TimeDensityConfig config_;
};

class DensityEnsembleCommand : public ParameterCommand {
 public:
  DensityEnsembleCommand()
      : ParameterCommand("density-ensemble", "Histogram of evolved patch ensembles") {
    grid_.add(*this);
    option("patches", config_.n_patches, "Number of random patches");
    budget<std::uint64_t>("samples-per-patch", config_.samples_per_patch, 40'000, 100'000,
                          "Pure states per patch");
    option("steps", config_.n_steps, "Iterations applied to every sample");
    option("dphi", config_.dphi, "Patch width in azimuth");
    option("dc", config_.dc, "Patch height in cos(theta)");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const Histogram h =
        ensemble_average_density(p(), config_, grid_.grid(), sampler(0), threads());
    write_binary("density.blh1", [&](std::ostream& o) { h.write_blh1(o); });
    write_text("density.csv", [&](std::ostream& o) { h.write_csv(o); });
    report_histogram(out, h);
  }

 private:
  GridOptions grid_;
  EnsembleDensityConfig config_;
};

Histogram load_histogram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Histogram::read_blh1(in);
  } catch (const CorruptFile& e) {
    throw CorruptFile(path + ": " + e.what());
  }
}

class CompareDensitiesCommand : public Command {
 public:
  CompareDensitiesCommand()
      : Command("compare-densities", "Total-variation distance between two BLH1 histograms") {
    option("a", a_, "First histogram (BLH1)")->required();
    option("b", b_, "Second histogram (BLH1)")->required();
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const Histogram ha = load_histogram(a_);
    const Histogram hb = load_histogram(b_);
    const double d = histogram_distance(ha, hb);
    const double ua = distance_to_uniform(ha);
    const double ub = distance_to_uniform(hb);
    write_text("compare.csv", [&](std::ostream& o) {
      o << "tv_distance,tv_a_uniform,tv_b_uniform\n"
        << format_real(d) << ',' << format_real(ua) << ',' << format_real(ub) << '\n';
    });
    out << "TV distance: " << format_real(d) << "\n"
        << "TV distance to uniform: a " << format_real(ua) << ", b " << format_real(ub) << "\n";
  }

 private:
  std::string a_;
  std::string b_;
};

class CoverageCommand : public ParameterCommand {
 public:
  CoverageCommand() : ParameterCommand("coverage", "Steps until a patch ensemble covers the grid") {
    grid_.add(*this);
    option("purity", purity_, "Initial purity P0")->check(CLI::Range(0.5, 1.0));
    budget<std::uint64_t>("samples", config_.n_samples, 1'000'000, 10'000'000, "Ensemble size");
    option("max-steps", config_.max_steps, "Step budget");
    optional_text("patch", patch_text_, "Patch lower corner as phi0,c0 (default random)");
    option("dphi", dphi_, "Patch width in azimuth");
    option("dc", dc_, "Patch height in cos(theta)");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    Patch patch;
    if (patch_text_.empty()) {
      SeededSampler s = sampler(1);
      patch = random_patch(s, dphi_, dc_);
    } else {
      const auto [phi0, c0] = parse_pair(patch_text_);
      patch = Patch{.phi0 = phi0, .c0 = c0, .dphi = dphi_, .dc = dc_};
      try {
        patch.validate();
      } catch (const DomainError& e) {
        throw UsageError(e.what());
      }
    }
    const CoverageReport r =
        coverage_time(p(), patch, purity_, config_, grid_.grid(), sampler(0), threads());
    write_text("coverage.csv", [&](std::ostream& o) { write_coverage_csv(o, r); });
    out << "patch: phi0 = " << format_real(patch.phi0) << ", c0 = " << format_real(patch.c0) << "\n";
    if (r.n_crit) {
      out << "n_crit = " << *r.n_crit << "  mean purity = " << format_real(r.mean_purity_at_ncrit)
          << "\n";
    } else {
      const double last = r.covered_fraction.empty() ? 0.0 : r.covered_fraction.back();
      out << "not covered after " << r.steps_run() << " steps (covered fraction "
          << format_real(last) << ")\n";
    }
  }

 private:
  GridOptions grid_;
  double purity_ = 1.0;
  CoverageConfig config_;
  std::string patch_text_;
  double dphi_ = Patch::default_dphi;
  double dc_ = Patch::default_dc;
};

class PurityStatsCommand : public ParameterCommand {
 public:
  PurityStatsCommand() : ParameterCommand("purity-stats", "Purity statistics of a mixed ensemble") {
    option("purity", purity_, "Initial purity P0")->check(CLI::Range(0.5, 1.0));
    budget<std::uint64_t>("samples", config_.n_samples, 100'000, 1'000'000, "Ensemble size");
    option("steps", config_.n_steps, "Iterations");
    option("threshold", config_.threshold, "Purity threshold");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const PurityStats s = purity_stats(p(), purity_, config_, sampler(0), threads());
    write_text("purity_stats.csv", [&](std::ostream& o) { write_purity_stats_csv(o, s); });
    if (!s.mean_purity.empty()) {
      const std::size_t last = s.mean_purity.size() - 1;
      out << "step 1: fraction with increased purity = "
          << format_real(s.fraction_step_increase.front()) << "\n"
          << "step " << last + 1 << ": fraction above initial = "
          << format_real(s.fraction_above_initial[last])
          << ", mean purity = " << format_real(s.mean_purity[last])
          << ", max purity = " << format_real(s.max_purity[last]) << "\n";
    }
  }

 private:
  double purity_ = 0.95;
  PurityStatsConfig config_;
};

class PurificationCommand : public ParameterCommand {
 public:
  PurificationCommand()
      : ParameterCommand("purification", "Fraction of mixed states that purify") {
    budget<std::uint64_t>("samples", config_.n_samples, 10'000, 100'000, "Ball samples");
    option("max-steps", config_.max_steps, "Step budget per sample");
    option("eps-pure", config_.eps_pure, "Tolerance on 1 - P");
    option("eps-mixed", config_.eps_mixed, "Tolerance on P - 1/2");
    option("confirm-steps", config_.confirm_steps, "Steps 1 - P must stay below eps-pure");
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const PurificationResult r = purification_fraction(p(), config_, sampler(0), threads());
    write_text("purification.csv", [&](std::ostream& o) {
      o << "fraction,purified,mixed,unresolved,n_samples\n"
        << format_real(r.fraction) << ',' << r.purified << ',' << r.mixed << ',' << r.unresolved
        << ',' << r.n_samples << '\n';
    });
    out << "purification fraction = " << format_real(r.fraction) << " (" << r.purified << " of "
        << r.n_samples << "; unresolved " << r.unresolved << ")\n";
  }

 private:
  PurificationConfig config_;
};

// Classifier budgets shared by classify and sweep.
struct ClassifierOptions {
  ClassifierConfig config;
  std::uint32_t n_phi = 100;
  std::uint32_t n_c = 100;

  void add(Command& c) {
    const ClassifierConfig d = ClassifierConfig::desk();
    const ClassifierConfig p = ClassifierConfig::paper();
    c.budget("max-period", config.cycles.max_period, d.cycles.max_period, p.cycles.max_period,
             "Longest cycle period searched");
    c.budget("cycle-burn-in", config.cycles.burn_in, d.cycles.burn_in, p.cycles.burn_in,
             "Critical-orbit burn-in");
    c.budget("n-phi", n_phi, d.grid.n_phi(), p.grid.n_phi(), "Grid cells in azimuth");
    c.budget("n-c", n_c, d.grid.n_c(), p.grid.n_c(), "Grid cells in cos(theta)");
    c.budget("coverage-samples", config.coverage.n_samples, d.coverage.n_samples,
             p.coverage.n_samples, "Ensemble size for the spreading test");
    c.budget("coverage-steps", config.coverage.max_steps, d.coverage.max_steps,
             p.coverage.max_steps, "Step budget for the spreading test");
    c.budget("orbits", config.density.n_orbits, d.density.n_orbits, p.density.n_orbits,
             "Orbits for the density test");
    c.budget("orbit-len", config.density.orbit_len, d.density.orbit_len, p.density.orbit_len,
             "Orbit length for the density test");
    c.budget("lyapunov-starts", config.lyapunov_starts, d.lyapunov_starts, p.lyapunov_starts,
             "Starting points for the Lyapunov test");
    c.budget("lyapunov-steps", config.lyapunov.n_steps, d.lyapunov.n_steps, p.lyapunov.n_steps,
             "Iterations per Lyapunov estimate");
    c.option("lambda-min", config.lambda_min, "Smallest accepted exponent");
    c.option("spread-max", config.spread_max, "Largest accepted relative spread");
  }

  ClassifierConfig resolved() const {
    ClassifierConfig c = config;
    c.grid = EqualAreaGrid{n_phi, n_c};
    return c;
  }
};

class ClassifyCommand : public ParameterCommand {
 public:
  ClassifyCommand() : ParameterCommand("classify", "Run the four ergodicity tests") {
    options_.add(*this);
  }

 protected:
  void body(std::ostream& out, std::ostream&) override {
    const ClassifierConfig config = options_.resolved();
    const ClassificationReport r = classify_ergodic(p(), config, sampler(0), threads());
    const ErgodicityFlags& f = r.flags;
    double lo = 0.0, hi = 0.0;
    if (!r.lyapunov.empty()) {
      lo = hi = r.lyapunov.front().value;
      for (const auto& e : r.lyapunov) {
        lo = std::min(lo, e.value);
        hi = std::max(hi, e.value);
      }
    }
    write_text("classify.csv", [&](std::ostream& o) {
      o << "criterion,passed,detail\n"
        << "no_attracting_cycles," << f.no_attracting_cycles << ','
        << (r.cycles[0].found ? r.cycles[0].period : 0) << ' '
        << (r.cycles[1].found ? r.cycles[1].period : 0) << '\n'
        << "ensemble_spreads," << f.ensemble_spreads << ','
        << (r.coverage.n_crit ? std::to_string(*r.coverage.n_crit) : std::string{}) << '\n'
        << "orbit_dense," << f.orbit_dense << ',' << r.visited_cells << '\n'
        << "lyapunov_positive," << f.lyapunov_positive << ',' << format_real(lo) << ' '
        << format_real(hi) << '\n'
        << "ergodic_like," << f.ergodic_like() << ",\n";
    });
    auto yes = [](bool b) { return b ? "true" : "false"; };
    out << "no_attracting_cycles: " << yes(f.no_attracting_cycles);
    for (std::size_t i = 0; i < 2; ++i) {
      if (r.cycles[i].found) {
        out << " (period-" << r.cycles[i].period << " cycle from z = " << (i == 0 ? "0" : "inf")
            << ")";
      }
    }
    out << "\nensemble_spreads: " << yes(f.ensemble_spreads);
    if (r.coverage.n_crit) out << " (n_crit = " << *r.coverage.n_crit << ")";
    out << "\norbit_dense: " << yes(f.orbit_dense) << " (" << r.visited_cells << " / "
        << config.grid.cell_count() << " cells)\n"
        << "lyapunov_positive: " << yes(f.lyapunov_positive) << " (min " << format_real(lo)
        << ", max " << format_real(hi) << ")\n"
        << (f.ergodic_like() ? "ergodic-like" : "not ergodic-like") << "\n";
  }

 private:
  ClassifierOptions options_;
};

class SweepCommand : public Command {
 public:
  SweepCommand() : Command("sweep", "Run a diagnostic over a grid in the complex p-plane") {
    option("task", task_, "classify, lyapunov or purification")
        ->check(CLI::IsMember({"classify", "lyapunov", "purification"}));
    option("re", re_, "Real range as min,max")->check(number_pair);
    option("im", im_, "Imaginary range as min,max")->check(number_pair);
    option("n-re", n_re_, "Cells along the real axis");
    option("n-im", n_im_, "Cells along the imaginary axis");
    optional_text("checkpoint", checkpoint_, "Checkpoint file (default <out>/sweep.bsw1)");
    flag("resume", resume_, "Continue from an existing checkpoint");
    classifier_.add(*this);
    budget<std::uint64_t>("steps", config_.lyapunov.n_steps, 1'000'000, 10'000'000,
                          "Lyapunov iterations per cell");
    budget<std::uint64_t>("samples", config_.purification.n_samples, 10'000, 100'000,
                          "Purification samples per cell");
    option("max-steps", config_.purification.max_steps, "Purification step budget");
  }

 protected:
  void body(std::ostream& out, std::ostream& err) override {
    const auto [re_min, re_max] = parse_pair(re_);
    const auto [im_min, im_max] = parse_pair(im_);
    const ParameterGrid grid = [&] {
      try {
        return ParameterGrid{re_min, re_max, im_min, im_max, n_re_, n_im_};
      } catch (const DomainError& e) {
        throw UsageError(e.what());
      }
    }();
    config_.task = task_kind_from_string(task_);
    config_.classify = classifier_.resolved();
    config_.threads = threads();
    const fs::path checkpoint = checkpoint_.empty() ? out_dir() / "sweep.bsw1" : fs::path(checkpoint_);
    config_.checkpoint = checkpoint;
    config_.cancel = &interrupt_flag();
    config_.progress = [&err](std::size_t done, std::size_t total) {
      err << "[iqp sweep] " << done << " / " << total << " cells\n";
    };
    std::optional<SweepResult> previous;
    if (resume_ && fs::exists(checkpoint)) {
      previous = load_checkpoint(checkpoint);
      err << "[iqp sweep] resuming: " << previous->count(CellStatus::done) << " cells done\n";
    }
    const SweepResult r = run_sweep(grid, config_, seed(), std::move(previous));
    write_text("sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, r); });
    out << "cells: " << r.count(CellStatus::done) << " done, " << r.count(CellStatus::failed)
        << " failed, " << r.count(CellStatus::pending) << " pending\n";
    if (!r.complete()) {
      out << "interrupted; rerun with --resume to finish\n";
      set_exit_code(1);
      return;
    }
    if (r.task == TaskKind::classify && r.count(CellStatus::failed) == 0) {
      std::size_t ergodic = 0;
      for (const auto& c : r.cells) ergodic += c.flags.ergodic_like();
      out << "ergodic-like cells: " << ergodic << "\n"
          << "partial-agreement rate: " << format_real(agreement_rate(r)) << "\n";
    } else if (r.task != TaskKind::classify) {
      std::size_t best = 0;
      bool any = false;
      for (std::size_t i = 0; i < r.cells.size(); ++i) {
        if (r.cells[i].status != CellStatus::done) continue;
        if (!any || r.cells[i].value > r.cells[best].value) best = i;
        any = true;
      }
      if (any) {
        const ProtocolParameter pb = grid.parameter(best);
        out << "maximum " << format_real(r.cells[best].value) << " at p = "
            << format_real(pb.value().real()) << "," << format_real(pb.value().imag()) << "\n";
      }
    }
  }

 private:
  std::uint64_t seed() const { return sampler(0).seed(); }

  std::string task_ = "classify";
  std::string re_ = "0,1.2";
  std::string im_ = "0,2";
  std::uint32_t n_re_ = 5;
  std::uint32_t n_im_ = 5;
  std::string checkpoint_;
  bool resume_ = false;
  ClassifierOptions classifier_;
  SweepConfig config_;
};

using Factory = std::function<std::unique_ptr<Command>()>;

const std::vector<std::pair<std::string, Factory>>& commands() {
  static const std::vector<std::pair<std::string, Factory>> list = {
      {"orbit", [] { return std::make_unique<OrbitCommand>(); }},
      {"lyapunov", [] { return std::make_unique<LyapunovCommand>(); }},
      {"cycles", [] { return std::make_unique<CyclesCommand>(); }},
      {"density-time", [] { return std::make_unique<DensityTimeCommand>(); }},
      {"density-ensemble", [] { return std::make_unique<DensityEnsembleCommand>(); }},
      {"compare-densities", [] { return std::make_unique<CompareDensitiesCommand>(); }},
      {"coverage", [] { return std::make_unique<CoverageCommand>(); }},
      {"purity-stats", [] { return std::make_unique<PurityStatsCommand>(); }},
      {"purification", [] { return std::make_unique<PurificationCommand>(); }},
      {"classify", [] { return std::make_unique<ClassifyCommand>(); }},
      {"sweep", [] { return std::make_unique<SweepCommand>(); }},
  };
  return list;
}

void usage(std::ostream& o) {
  o << "usage: iqp <command> [options]\n\ncommands:\n";
  for (const auto& [name, make] : commands()) {
    o << "  " << std::left << std::setw(19) << name << make()->app().get_description() << "\n";
  }
  o << "\nRun 'iqp <command> --help' for the options of a command.\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    usage(err);
    return 2;
  }
  if (args[0] == "-h" || args[0] == "--help") {
    usage(out);
    return 0;
  }
  std::unique_ptr<Command> command;
  for (const auto& [name, make] : commands()) {
    if (name == args[0]) command = make();
  }
  if (!command) {
    err << "unknown command \"" << args[0] << "\"\n";
    usage(err);
    return 2;
  }
  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    command->app().parse(rest);
  } catch (const CLI::ParseError& e) {
    return command->app().exit(e, out, err) == 0 ? 0 : 2;
  }
  try {
    return command->execute(out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace iqp::cli
