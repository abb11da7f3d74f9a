#pragma once

// Parameter-plane sweeps with per-row checkpointing and resume.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "sampling.hpp"
#include "text.hpp"

namespace iqp {

// Rectangular grid in the complex p-plane with inclusive endpoints. Cells are
// numbered im-major: id = k * n_re + j.
class ParameterGrid {
 public:
  ParameterGrid(double re_min, double re_max, double im_min, double im_max, std::uint32_t n_re,
                std::uint32_t n_im)
      : re_min_(re_min), re_max_(re_max), im_min_(im_min), im_max_(im_max), n_re_(n_re),
        n_im_(n_im) {
    if (!std::isfinite(re_min) || !std::isfinite(re_max) || !std::isfinite(im_min) ||
        !std::isfinite(im_max)) {
      throw DomainError("parameter grid bounds must be finite");
    }
    if (re_min > re_max || im_min > im_max) throw DomainError("parameter grid bounds out of order");
    if (n_re < 1 || n_im < 1) throw DomainError("parameter grid needs at least one cell per axis");
  }

  [[nodiscard]] double re_min() const { return re_min_; }
  [[nodiscard]] double re_max() const { return re_max_; }
  [[nodiscard]] double im_min() const { return im_min_; }
  [[nodiscard]] double im_max() const { return im_max_; }
  [[nodiscard]] std::uint32_t n_re() const { return n_re_; }
  [[nodiscard]] std::uint32_t n_im() const { return n_im_; }
  [[nodiscard]] std::size_t cell_count() const {
    return static_cast<std::size_t>(n_re_) * n_im_;
  }

  [[nodiscard]] double re_at(std::uint32_t j) const {
    return n_re_ == 1 ? re_min_ : std::lerp(re_min_, re_max_, static_cast<double>(j) / (n_re_ - 1));
  }
  [[nodiscard]] double im_at(std::uint32_t k) const {
    return n_im_ == 1 ? im_min_ : std::lerp(im_min_, im_max_, static_cast<double>(k) / (n_im_ - 1));
  }
  [[nodiscard]] ProtocolParameter parameter(std::size_t cell) const {
    return ProtocolParameter{re_at(static_cast<std::uint32_t>(cell % n_re_)),
                             im_at(static_cast<std::uint32_t>(cell / n_re_))};
  }

  friend bool operator==(const ParameterGrid&, const ParameterGrid&) = default;

 private:
  double re_min_, re_max_, im_min_, im_max_;
  std::uint32_t n_re_, n_im_;
};

enum class TaskKind : std::uint8_t { classify = 0, lyapunov = 1, purification = 2 };
enum class CellStatus : std::uint8_t { pending = 0, done = 1, failed = 2 };

inline const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::classify: return "classify";
    case TaskKind::lyapunov: return "lyapunov";
    case TaskKind::purification: return "purification";
  }
  return "?";
}

inline const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::pending: return "pending";
    case CellStatus::done: return "done";
    case CellStatus::failed: return "failed";
  }
  return "?";
}

inline TaskKind task_kind_from_string(const std::string& name) {
  if (name == "classify") return TaskKind::classify;
  if (name == "lyapunov") return TaskKind::lyapunov;
  if (name == "purification") return TaskKind::purification;
  throw DomainError("unknown sweep task \"" + name + "\"");
}

// Payload is meaningful only when status == done: `flags` for classify,
// `value` (exponent or purified fraction) otherwise.
struct SweepCell {
  CellStatus status = CellStatus::pending;
  ErgodicityFlags flags;
  double value = 0.0;

  friend bool operator==(const SweepCell&, const SweepCell&) = default;
};

struct SweepResult {
  ParameterGrid grid;
  TaskKind task;
  std::vector<SweepCell> cells;

  SweepResult(const ParameterGrid& g, TaskKind t) : grid(g), task(t), cells(g.cell_count()) {}

  [[nodiscard]] std::size_t count(CellStatus s) const {
    return static_cast<std::size_t>(std::count_if(
        cells.begin(), cells.end(), [s](const SweepCell& c) { return c.status == s; }));
  }
  [[nodiscard]] bool complete() const { return count(CellStatus::pending) == 0; }

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

struct SweepConfig {
  TaskKind task = TaskKind::classify;
  ClassifierConfig classify;
  LyapunovOptions lyapunov;
  PurificationConfig purification;
  unsigned threads = 0;
  // Written after every completed row and on cancellation when set.
  std::optional<std::filesystem::path> checkpoint;
  // Polled between rows; the sweep stops cleanly once it reads true.
  const std::atomic<bool>* cancel = nullptr;
  // Called after each committed row with (cells done or failed, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

// ---------------------------------------------------------------------------
// Checkpoint files

inline constexpr std::uint32_t checkpoint_version = 1;

inline void write_checkpoint(std::ostream& out, const SweepResult& r) {
  using namespace binary;
  write_magic(out, "BSW1");
  write_uint<std::uint32_t>(out, checkpoint_version);
  write_f64(out, r.grid.re_min());
  write_f64(out, r.grid.re_max());
  write_f64(out, r.grid.im_min());
  write_f64(out, r.grid.im_max());
  write_uint<std::uint32_t>(out, r.grid.n_re());
  write_uint<std::uint32_t>(out, r.grid.n_im());
  write_uint<std::uint8_t>(out, static_cast<std::uint8_t>(r.task));
  for (const auto& c : r.cells) {
    write_uint<std::uint8_t>(out, static_cast<std::uint8_t>(c.status));
    if (c.status != CellStatus::done) continue;
    if (r.task == TaskKind::classify) {
      write_uint<std::uint8_t>(out, c.flags.bits());
    } else {
      write_f64(out, c.value);
    }
  }
}

inline SweepResult read_checkpoint(std::istream& in) {
  using namespace binary;
  expect_magic(in, "BSW1");
  const auto version = read_uint<std::uint32_t>(in, "version");
  if (version != checkpoint_version) {
    throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(checkpoint_version));
  }
  const double re_min = read_f64(in, "re_min");
  const double re_max = read_f64(in, "re_max");
  const double im_min = read_f64(in, "im_min");
  const double im_max = read_f64(in, "im_max");
  const auto n_re = read_uint<std::uint32_t>(in, "n_re");
  const auto n_im = read_uint<std::uint32_t>(in, "n_im");
  std::optional<ParameterGrid> grid;
  try {
    grid.emplace(re_min, re_max, im_min, im_max, n_re, n_im);
  } catch (const DomainError& e) {
    throw CorruptFile(std::string("invalid grid header: ") + e.what());
  }
  const auto task = read_uint<std::uint8_t>(in, "task kind");
  if (task > 2) throw CorruptFile("invalid task kind " + std::to_string(task));
  SweepResult r{*grid, static_cast<TaskKind>(task)};
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const std::string where = "cell " + std::to_string(i);
    const auto status = read_uint<std::uint8_t>(in, where + " status");
    if (status > 2) {
      throw CorruptFile(where + ": invalid status " + std::to_string(status));
    }
    SweepCell& c = r.cells[i];
    c.status = static_cast<CellStatus>(status);
    if (c.status != CellStatus::done) continue;
    if (r.task == TaskKind::classify) {
      const auto bits = read_uint<std::uint8_t>(in, where + " flags");
      if (bits > 0x0F) throw CorruptFile(where + ": invalid flag bits " + std::to_string(bits));
      c.flags = ErgodicityFlags::from_bits(bits);
    } else {
      c.value = read_f64(in, where + " value");
    }
  }
  expect_eof(in);
  return r;
}

inline void save_checkpoint(const SweepResult& r, const std::filesystem::path& path) {
  // Write-then-rename so an interrupted save never clobbers the previous file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, r);
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

inline SweepResult load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const CorruptFile& e) {
    if (dynamic_cast<const VersionMismatch*>(&e) != nullptr) {
      throw VersionMismatch(path.string() + ": " + e.what());
    }
    throw CorruptFile(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Running

// Evaluates one cell. `attempt` selects the sampler stream so a retry sees
// fresh randomness.
inline SweepCell evaluate_cell(const ProtocolParameter& p, const SweepConfig& config,
                               std::uint64_t seed, std::size_t cell, std::uint64_t attempt,
                               unsigned threads) {
  const SeededSampler sampler{mix_seed(seed, cell), attempt};
  SweepCell out;
  switch (config.task) {
    case TaskKind::classify:
      out.flags = classify_ergodic(p, config.classify, sampler, threads).flags;
      break;
    case TaskKind::lyapunov: {
      SeededSampler s = sampler;
      const SpherePoint z0 = point_from_bloch(sample_uniform_direction(s));
      out.value = lyapunov(p, z0, config.lyapunov).value;
      break;
    }
    case TaskKind::purification:
      out.value = purification_fraction(p, config.purification, sampler, threads).fraction;
      break;
  }
  out.status = CellStatus::done;
  return out;
}

// Runs `config.task` over every pending cell of the grid. With `resume`, done
// and failed cells are kept as they are. Rows are processed in order, cells of
// a row in parallel; a failing cell is retried once on a shifted stream and
// then marked failed.
inline SweepResult run_sweep(const ParameterGrid& grid, const SweepConfig& config,
                             std::uint64_t seed, std::optional<SweepResult> resume = {}) {
  SweepResult result = resume ? std::move(*resume) : SweepResult{grid, config.task};
  if (!(result.grid == grid)) throw GridMismatch("checkpoint grid differs from the requested grid");
  if (result.task != config.task) {
    throw TaskMismatch(std::string("checkpoint holds a ") + to_string(result.task) +
                       " sweep, requested " + to_string(config.task));
  }
  const unsigned threads = config.threads == 0 ? default_thread_count() : config.threads;
  auto cancelled = [&] { return config.cancel != nullptr && config.cancel->load(); };
  auto commit = [&] {
    if (config.checkpoint) save_checkpoint(result, *config.checkpoint);
  };

  for (std::uint32_t k = 0; k < grid.n_im(); ++k) {
    if (cancelled()) break;
    std::vector<std::size_t> pending;
    for (std::uint32_t j = 0; j < grid.n_re(); ++j) {
      const std::size_t id = static_cast<std::size_t>(k) * grid.n_re() + j;
      if (result.cells[id].status == CellStatus::pending) pending.push_back(id);
    }
    if (pending.empty()) continue;
    // Leftover workers go to the cells themselves; results do not depend on it.
    const unsigned inner = std::max<unsigned>(1, threads / static_cast<unsigned>(pending.size()));
    parallel_for(pending.size(), threads, [&](std::size_t t) {
      const std::size_t id = pending[t];
      const ProtocolParameter p = grid.parameter(id);
      for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
        try {
          result.cells[id] = evaluate_cell(p, config, seed, id, attempt, inner);
          return;
        } catch (const Error&) {
        }
      }
      result.cells[id] = SweepCell{CellStatus::failed, {}, 0.0};
    });
    commit();
    if (config.progress) {
      config.progress(result.cells.size() - result.count(CellStatus::pending), result.cells.size());
    }
  }
  if (cancelled()) commit();
  return result;
}

// Fraction of cells whose four flags are neither all true nor all false.
inline double agreement_rate(const SweepResult& r) {
  if (r.task != TaskKind::classify) {
    throw TaskMismatch(std::string("agreement rate needs a classify sweep, got ") +
                       to_string(r.task));
  }
  std::size_t partial = 0;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    if (r.cells[i].status != CellStatus::done) {
      throw DomainError("cell " + std::to_string(i) + " is not done");
    }
    const auto bits = r.cells[i].flags.bits();
    partial += bits != 0 && bits != 0x0F;
  }
  return static_cast<double>(partial) / static_cast<double>(r.cells.size());
}

// One row per cell; payload columns are empty unless the cell is done.
inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  switch (r.task) {
    case TaskKind::classify:
      out << "re,im,status,no_attracting_cycles,ensemble_spreads,orbit_dense,lyapunov_positive,"
             "ergodic_like\n";
      break;
    case TaskKind::lyapunov: out << "re,im,status,lyapunov\n"; break;
    case TaskKind::purification: out << "re,im,status,purification_fraction\n"; break;
  }
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto j = static_cast<std::uint32_t>(i % r.grid.n_re());
    const auto k = static_cast<std::uint32_t>(i / r.grid.n_re());
    const SweepCell& c = r.cells[i];
    out << format_real(r.grid.re_at(j)) << ',' << format_real(r.grid.im_at(k)) << ','
        << to_string(c.status);
    const bool done = c.status == CellStatus::done;
    if (r.task == TaskKind::classify) {
      const ErgodicityFlags& f = c.flags;
      for (bool b : {f.no_attracting_cycles, f.ensemble_spreads, f.orbit_dense,
                     f.lyapunov_positive, f.ergodic_like()}) {
        out << ',';
        if (done) out << (b ? 1 : 0);
      }
    } else {
      out << ',';
      if (done) out << format_real(c.value);
    }
    out << '\n';
  }
}

}  // namespace iqp
