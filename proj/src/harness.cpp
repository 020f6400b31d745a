#include "swlab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string_view>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "swlab/analysis.hpp"
#include "swlab/coupling.hpp"
#include "swlab/dynamics.hpp"
#include "swlab/errors.hpp"
#include "swlab/estimation.hpp"
#include "swlab/exact.hpp"
#include "swlab/parallel.hpp"
#include "swlab/percolation.hpp"

#ifndef SWLAB_VERSION
#define SWLAB_VERSION "0.0.0"
#endif

namespace swlab {

using json = nlohmann::ordered_json;

const char* version_string() noexcept { return SWLAB_VERSION; }

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Table::Table(std::string schema, std::vector<std::string> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) throw std::logic_error("Table: row width mismatch");
  rows_.push_back(std::move(row));
}

namespace {

std::string cell_text(const Table::Cell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else return v;
      },
      cell);
}

json cell_json(const Table::Cell& cell) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else return v;
      },
      cell);
}

}  // namespace

std::string Table::to_csv() const {
  std::string out = "# schema=" + schema_ + "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += cell_text(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string Table::to_jsonl() const {
  std::string out = json{{"schema", schema_}, {"columns", columns_}}.dump() + "\n";
  for (const auto& row : rows_) {
    json rec = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) rec[columns_[i]] = cell_json(row[i]);
    out += rec.dump() + "\n";
  }
  return out;
}

void write_atomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open " + tmp + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    f.flush();
    if (!f) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw io_error("write to " + tmp + " failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw io_error("cannot rename " + tmp + " to " + path);
  }
}

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string format;  // empty: the subcommand's default (csv, or jsonl for simulate)
  int jobs = 0;
};

struct RunLog {
  json config = json::object();
  json streams = json::array();
  json notes = json::array();
  std::int64_t censored = 0;
};

// Everything a subcommand handler needs besides its own parameters.
struct Context {
  std::string command;
  Common common;
  std::ostream& out;
  std::ostream& err;
  std::string started;
  RunLog log;
};

void add_common(CLI::App* sub, Common& c, bool tabular) {
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--out", c.out, "Output path (default: standard output)");
  sub->add_option("--jobs", c.jobs, "Worker threads (default: $SWLAB_JOBS, else all cores)");
  if (tabular) {
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}));
  }
}

void note_stream(Context& ctx, const std::string& label, std::uint64_t seed, std::int64_t replicas) {
  ctx.log.streams.push_back(
      {{"label", label}, {"seed", seed}, {"replica_ids", json::array({0, std::max<std::int64_t>(0, replicas - 1)})}});
}

void emit(Context& ctx, const std::string& data) {
  json manifest = {
      {"schema", "swlab.manifest.v1"},
      {"command", ctx.command},
      {"version", version_string()},
      {"config", ctx.log.config},
      {"started_utc", ctx.started},
      {"finished_utc", utc_now()},
      {"stream_derivation", "xoshiro256** state from derive_stream(seed, replica): 4 Feistel rounds "
                            "of splitmix64 over the 128-bit key, then 16 discarded draws"},
      {"streams", ctx.log.streams},
      {"censored", ctx.log.censored},
      {"notes", ctx.log.notes},
  };
  const std::string text = manifest.dump(2) + "\n";
  if (ctx.common.out.empty() || ctx.common.out == "-") {
    ctx.out << data;
    ctx.out.flush();
    ctx.err << text;
  } else {
    write_atomic(ctx.common.out, data);
    write_atomic(ctx.common.out + ".manifest.json", text);
  }
}

void emit_table(Context& ctx, const Table& table) {
  if (ctx.common.format.empty()) ctx.common.format = "csv";
  emit(ctx, ctx.common.format == "jsonl" ? table.to_jsonl() : table.to_csv());
}

void echo_common(Context& ctx) {
  if (ctx.common.format.empty()) ctx.common.format = "csv";
  ctx.log.config["seed"] = ctx.common.seed;
  ctx.log.config["out"] = ctx.common.out;
  ctx.log.config["format"] = ctx.common.format;
  ctx.log.config["jobs"] = resolve_jobs(ctx.common.jobs);
}

void require_ordered_regime(const ModelParams& params) {
  if (!(params.beta() > params.q())) {
    throw precondition_error("beta must exceed q (got q = " + std::to_string(params.q()) +
                             ", beta = " + format_number(params.beta()) + ")");
  }
}

void require_positive(std::int64_t v, const char* name) {
  if (v < 1) throw precondition_error(std::string(name) + " must be >= 1");
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  int q = 2;
  double beta = 0.0;
};

int run_analyze(Context& ctx, const AnalyzeArgs& a) {
  const ModelParams params(a.q, a.beta);
  require_ordered_regime(params);
  ctx.log.config = {{"q", a.q}, {"beta", a.beta}, {"out", ctx.common.out}};
  const DriftProfile d = drift_profile(params);
  const json j = {{"q", d.q},
                  {"beta", d.beta},
                  {"a", d.a},
                  {"theta_at_a", d.theta_at_a},
                  {"f_prime_at_a", d.f_prime_at_a},
                  {"cutoff_c", d.cutoff_c},
                  {"m", d.m}};
  emit(ctx, j.dump() + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- percolation-check

struct PercolationArgs {
  double lambda = 1.5;
  std::vector<std::int64_t> n{10000, 40000, 160000};
  std::int64_t replicas = 1000;
};

int run_percolation(Context& ctx, const PercolationArgs& a) {
  require_positive(a.replicas, "replicas");
  for (const auto n : a.n) require_positive(n, "n");
  echo_common(ctx);
  ctx.log.config["lambda"] = a.lambda;
  ctx.log.config["n"] = a.n;
  ctx.log.config["replicas"] = a.replicas;
  const auto stats = susceptibility_experiment(a.lambda, a.n, a.replicas, ctx.common.seed,
                                               resolve_jobs(ctx.common.jobs));
  const double theta = solve_theta(a.lambda);
  Table table("swlab.percolation.v1", {"lambda", "n", "replicas", "mean_R", "var_R", "isolated_mean",
                                       "l1_mean", "theta_n", "giant_within_6sqrtn"});
  for (std::size_t i = 0; i < stats.n_values.size(); ++i) {
    const std::int64_t n = stats.n_values[i];
    const auto nd = static_cast<double>(n);
    note_stream(ctx, "n=" + std::to_string(n), derive_seed(ctx.common.seed, static_cast<std::uint64_t>(n)),
                a.replicas);
    table.add_row({a.lambda, n, a.replicas, stats.mean_R[i], stats.var_R[i], stats.isolated_mean[i],
                   stats.l1_mean[i], theta * nd, stats.giant_within[i]});
  }
  emit_table(ctx, table);
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int q = 2;
  double beta = 0.0;
  std::int64_t n = 1000;
  std::int64_t steps = 10;
  std::int64_t replicas = 1;
  std::string start = "mono";
};

// --start: "mono", "uniform" or "counts:v1,...,vq".
SpinCounts simulate_start(const SimulateArgs& a, Stream& rng) {
  if (a.start == "mono") return SpinCounts::monochromatic(a.q, a.n);
  if (a.start == "uniform") return SpinCounts::uniform_random(a.q, a.n, rng);
  std::vector<std::int64_t> counts;
  std::string_view rest(a.start);
  rest.remove_prefix(std::string_view("counts:").size());
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    std::int64_t v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || end != item.data() + item.size()) {
      throw precondition_error("--start: malformed count '" + std::string(item) + "'");
    }
    counts.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  SpinCounts start(std::move(counts));
  if (start.q() != a.q || start.n() != a.n) {
    throw precondition_error("--start: counts must have q entries summing to n");
  }
  return start;
}

bool valid_start(const std::string& s) {
  return s == "mono" || s == "uniform" || s.rfind("counts:", 0) == 0;
}

int run_simulate(Context& ctx, const SimulateArgs& a) {
  const ModelParams params(a.q, a.beta, a.n);
  require_positive(a.replicas, "replicas");
  if (a.steps < 0) throw precondition_error("steps must be >= 0");
  if (ctx.common.format.empty()) ctx.common.format = "jsonl";
  {
    Stream probe = derive_stream(ctx.common.seed, 0);
    simulate_start(a, probe);  // validates the start before any work
  }
  echo_common(ctx);
  ctx.log.config.update({{"q", a.q}, {"beta", a.beta}, {"n", a.n}, {"steps", a.steps},
                         {"replicas", a.replicas}, {"start", a.start}});
  note_stream(ctx, "replicas", ctx.common.seed, a.replicas);
  const auto paths = run_replicas(a.replicas, resolve_jobs(ctx.common.jobs), [&](std::int64_t r) {
    Stream rng = derive_stream(ctx.common.seed, static_cast<std::uint64_t>(r));
    return run_trajectory(simulate_start(a, rng), a.steps, params, rng);
  });
  if (ctx.common.format == "jsonl") {
    // counts stay one array field per record.
    std::string text = json{{"schema", "swlab.simulate.v1"}, {"columns", {"replica", "t", "counts"}}}.dump() + "\n";
    for (std::int64_t r = 0; r < a.replicas; ++r) {
      const auto& path = paths[static_cast<std::size_t>(r)];
      for (std::size_t t = 0; t < path.size(); ++t) {
        text += json{{"replica", r}, {"t", t}, {"counts", path[t].counts()}}.dump() + "\n";
      }
    }
    emit(ctx, text);
    return kExitOk;
  }
  std::vector<std::string> columns{"replica", "t"};
  for (int j = 0; j < a.q; ++j) columns.push_back("count_" + std::to_string(j));
  Table table("swlab.simulate.v1", columns);
  for (std::int64_t r = 0; r < a.replicas; ++r) {
    const auto& path = paths[static_cast<std::size_t>(r)];
    for (std::size_t t = 0; t < path.size(); ++t) {
      std::vector<Table::Cell> row{r, static_cast<std::int64_t>(t)};
      for (const auto c : path[t].counts()) row.emplace_back(c);
      table.add_row(std::move(row));
    }
  }
  emit_table(ctx, table);
  return kExitOk;
}

// ---------------------------------------------------------------- couple

struct CoupleArgs {
  int q = 2;
  double beta = 0.0;
  std::int64_t n = 10000;
  std::int64_t replicas = 1000;
  PhaseThresholds thresholds;
};

int run_couple(Context& ctx, const CoupleArgs& a) {
  const ModelParams params(a.q, a.beta, a.n);
  require_ordered_regime(params);
  require_positive(a.replicas, "replicas");
  a.thresholds.validate();
  echo_common(ctx);
  const PhaseThresholds& th = a.thresholds;
  ctx.log.config.update({{"q", a.q}, {"beta", a.beta}, {"n", a.n}, {"replicas", a.replicas},
                         {"eps", th.eps_ball}, {"chat", th.sqrtn_C}, {"coalesce_C", th.coalesce_C},
                         {"boost", th.boost_rounds}, {"radius", th.proximity_r},
                         {"burnin_budget", th.burnin_budget}, {"contract_budget", th.contract_budget}});
  ctx.log.notes.push_back("Y0 is approximately stationary: uniform start followed by ceil(10 c log n) steps");
  ctx.log.notes.push_back("X0 is the monochromatic configuration");
  note_stream(ctx, "replicas", ctx.common.seed, a.replicas);
  const auto records = run_replicas(a.replicas, resolve_jobs(ctx.common.jobs), [&](std::int64_t r) {
    Stream rng = derive_stream(ctx.common.seed, static_cast<std::uint64_t>(r));
    return run_multiphase(params, th, rng).record;
  });
  Table table("swlab.couple.v1", {"replica", "t1_burnin", "t2_contract", "coalesce_hit_t", "attempts",
                                  "coupled_at", "censored"});
  auto opt = [](const std::optional<std::int64_t>& v) -> Table::Cell {
    if (v) return *v;
    return std::monostate{};
  };
  for (std::int64_t r = 0; r < a.replicas; ++r) {
    const MultiphaseRecord& rec = records[static_cast<std::size_t>(r)];
    if (rec.censored) ++ctx.log.censored;
    table.add_row({r, rec.t1_burnin, rec.t2_contract, opt(rec.coalesce_hit_t), rec.attempts,
                   opt(rec.coupled_at), std::int64_t{rec.censored ? 1 : 0}});
  }
  emit_table(ctx, table);
  return kExitOk;
}

// ---------------------------------------------------------------- tvprofile / mixfit

struct ProfileArgs {
  int q = 2;
  double beta = 0.0;
  std::vector<std::int64_t> n{1000};
  std::int64_t t_max = -1;  // default: ceil(3 c log n) per n
  std::int64_t replicas = 1000;
  double bin_width = 0.5;
  std::string reference = "auto";
  std::int64_t reference_replicas = 0;
  std::int64_t bootstrap = 1000;
  std::string profiles_out;
};

std::int64_t default_t_max(const ModelParams& params) {
  require_ordered_regime(params);
  return static_cast<std::int64_t>(
      std::ceil(3.0 * cutoff_constant(params) * std::log(static_cast<double>(params.n()))));
}

std::vector<CutoffProfile> build_profiles(Context& ctx, const ProfileArgs& a) {
  if (a.n.empty()) throw precondition_error("at least one --n is required");
  std::vector<ModelParams> grid;
  for (const auto n : a.n) {
    grid.emplace_back(a.q, a.beta, n);
    if (a.t_max < 0) default_t_max(grid.back());
  }
  if (a.replicas < 1000) throw precondition_error("replicas must be >= 1000");
  if (!(a.bin_width > 0)) throw precondition_error("bin-width must be > 0");
  echo_common(ctx);
  ctx.log.config.update({{"q", a.q}, {"beta", a.beta}, {"n", a.n}, {"t_max", a.t_max},
                         {"replicas", a.replicas}, {"bin_width", a.bin_width},
                         {"reference", a.reference}, {"reference_replicas", a.reference_replicas}});
  ctx.log.notes.push_back("d(t) is estimated from the monochromatic start only, not a supremum over starts");
  TvProfileOptions opt;
  opt.replicas = a.replicas;
  opt.bin_width = a.bin_width;
  opt.reference_replicas = a.reference_replicas;
  opt.reference = a.reference == "exact"     ? ReferenceChoice::Exact
                  : a.reference == "longrun" ? ReferenceChoice::LongRun
                                             : ReferenceChoice::Auto;
  opt.jobs = resolve_jobs(ctx.common.jobs);
  std::vector<CutoffProfile> profiles;
  for (const auto& params : grid) {
    opt.t_max = a.t_max < 0 ? default_t_max(params) : a.t_max;
    const std::uint64_t seed = derive_seed(ctx.common.seed, static_cast<std::uint64_t>(params.n()));
    note_stream(ctx, "n=" + std::to_string(params.n()) + " samples", derive_seed(seed, 0), a.replicas);
    profiles.push_back(estimate_tv_profile(params, opt, seed));
    if (profiles.back().reference_kind == ReferenceKind::LongRun) {
      note_stream(ctx, "n=" + std::to_string(params.n()) + " reference", derive_seed(seed, 1),
                  a.reference_replicas > 0 ? a.reference_replicas : a.replicas);
      ctx.log.notes.push_back("n=" + std::to_string(params.n()) +
                              ": reference law from independent long runs (approximate)");
    }
  }
  return profiles;
}

Table profile_table(const std::vector<CutoffProfile>& profiles) {
  Table table("swlab.tvprofile.v1",
              {"q", "beta", "n", "t", "tv_hat", "replicas", "bin_width", "reference_kind"});
  for (const auto& p : profiles) {
    for (std::size_t i = 0; i < p.t_grid.size(); ++i) {
      table.add_row({std::int64_t{p.params.q()}, p.params.beta(), p.params.n(), p.t_grid[i],
                     p.tv_hat[i], p.replicas, p.bin_width, std::string(reference_name(p.reference_kind))});
    }
  }
  return table;
}

int run_tvprofile(Context& ctx, const ProfileArgs& a) {
  emit_table(ctx, profile_table(build_profiles(ctx, a)));
  return kExitOk;
}

int run_mixfit(Context& ctx, const ProfileArgs& a) {
  if (a.bootstrap < 0) throw precondition_error("bootstrap must be >= 0");
  if (a.n.size() < 3) throw precondition_error("mixfit needs at least three values of n");
  const auto profiles = build_profiles(ctx, a);
  ctx.log.config["bootstrap"] = a.bootstrap;
  ctx.log.config["profiles_out"] = a.profiles_out;
  const std::uint64_t boot_seed = derive_seed(ctx.common.seed, 0xb007);
  note_stream(ctx, "bootstrap", boot_seed, a.bootstrap);
  const MixingFit fit = fit_mixing_time(profiles, a.bootstrap, boot_seed);
  Table table("swlab.mixfit.v1", {"q", "beta", "n", "tmix_quarter", "slope", "slope_lo", "slope_hi"});
  for (std::size_t i = 0; i < fit.n_grid.size(); ++i) {
    table.add_row({std::int64_t{a.q}, a.beta, fit.n_grid[i], fit.tmix_quarter[i], fit.slope,
                   fit.slope_ci.first, fit.slope_ci.second});
  }
  json windows = json::array();
  for (std::size_t i = 0; i < fit.n_grid.size(); ++i) {
    windows.push_back({{"n", fit.n_grid[i]}, {"tau_three_quarter", fit.tau_three_quarter[i]},
                       {"window", fit.window[i]}});
  }
  ctx.log.config["windows"] = windows;
  if (!a.profiles_out.empty()) {
    const Table pt = profile_table(profiles);
    write_atomic(a.profiles_out, ctx.common.format == "jsonl" ? pt.to_jsonl() : pt.to_csv());
  }
  emit_table(ctx, table);
  return kExitOk;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  int n = 4;
  int q = 2;
  double beta = 0.0;
  std::string check = "all";
  double tol = 1e-10;
};

int run_oracle(Context& ctx, const OracleArgs& a) {
  const ModelParams params(a.q, a.beta, a.n);
  ctx.log.config = {{"n", a.n}, {"q", a.q}, {"beta", a.beta}, {"check", a.check}, {"tol", a.tol},
                    {"out", ctx.common.out}};
  const ExactChain chain = build_exact_chain(a.n, a.q, params.beta());
  const OracleReport r = check_exact_chain(chain);
  bool pass = true;
  if (a.check == "rows" || a.check == "all") pass = pass && r.max_row_error <= a.tol;
  if (a.check == "stationarity" || a.check == "all") pass = pass && r.stationarity_l1 <= a.tol;
  if (a.check == "reversibility" || a.check == "all") pass = pass && r.detailed_balance <= a.tol;
  const json j = {{"n", a.n},
                  {"q", a.q},
                  {"beta", a.beta},
                  {"states", chain.states},
                  {"check", a.check},
                  {"max_row_error", r.max_row_error},
                  {"stationarity_l1", r.stationarity_l1},
                  {"detailed_balance", r.detailed_balance},
                  {"tolerance", a.tol},
                  {"pass", pass}};
  emit(ctx, j.dump() + "\n");
  return pass ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- tails / concentration / witness

struct TailArgs {
  int q = 2;
  double beta = 0.0;
  std::int64_t n = 100000;
  std::int64_t replicas = 10000;
};

int run_tails(Context& ctx, const TailArgs& a) {
  const ModelParams params(a.q, a.beta, a.n);
  require_positive(a.replicas, "replicas");
  echo_common(ctx);
  ctx.log.config.update({{"q", a.q}, {"beta", a.beta}, {"n", a.n}, {"replicas", a.replicas}});
  note_stream(ctx, "replicas", ctx.common.seed, a.replicas);
  const auto tail = step_fluctuation_tail(params, a.replicas, ctx.common.seed, std::nullopt,
                                          resolve_jobs(ctx.common.jobs));
  Table table("swlab.tails.v1", {"q", "beta", "n", "r", "tail", "replicas"});
  for (std::size_t i = 0; i < tail.thresholds.size(); ++i) {
    table.add_row({std::int64_t{a.q}, a.beta, a.n, tail.thresholds[i], tail.tail[i], a.replicas});
  }
  emit_table(ctx, table);
  return kExitOk;
}

struct ConcentrationArgs {
  int q = 3;
  double beta = 0.0;
  std::int64_t n = 100000;
  std::int64_t replicas = 400;
  double A = 6.0;
  std::int64_t steps = -1;
};

int run_concentration(Context& ctx, const ConcentrationArgs& a) {
  const ModelParams params(a.q, a.beta, a.n);
  require_ordered_regime(params);
  require_positive(a.replicas, "replicas");
  echo_common(ctx);
  ctx.log.config.update({{"q", a.q}, {"beta", a.beta}, {"n", a.n}, {"replicas", a.replicas},
                         {"A", a.A}, {"steps", a.steps}});
  note_stream(ctx, "replicas", ctx.common.seed, a.replicas);
  const auto rep = stationary_concentration_check(
      params, a.replicas, a.A, ctx.common.seed,
      a.steps >= 0 ? std::optional<std::int64_t>(a.steps) : std::nullopt, resolve_jobs(ctx.common.jobs));
  Table table("swlab.concentration.v1", {"q", "beta", "n", "A", "steps", "replicas", "frequency"});
  table.add_row({std::int64_t{a.q}, a.beta, a.n, a.A, rep.steps, a.replicas, rep.frequency});
  emit_table(ctx, table);
  return kExitOk;
}

struct WitnessArgs {
  int q = 2;
  double beta = 0.0;
  std::int64_t n = 100000;
  std::int64_t replicas = 1000;
  std::vector<double> gamma{-10.0, 20.0};
  double A = 6.0;
};

int run_witness(Context& ctx, const WitnessArgs& a) {
  const ModelParams params(a.q, a.beta, a.n);
  require_ordered_regime(params);
  require_positive(a.replicas, "replicas");
  echo_common(ctx);
  ctx.log.config.update({{"q", a.q}, {"beta", a.beta}, {"n", a.n}, {"replicas", a.replicas},
                         {"gamma", a.gamma}, {"A", a.A}});
  Table table("swlab.witness.v1", {"q", "beta", "n", "gamma", "T", "A", "replicas", "frequency"});
  for (std::size_t i = 0; i < a.gamma.size(); ++i) {
    const std::uint64_t seed = derive_seed(ctx.common.seed, i);
    note_stream(ctx, "gamma=" + format_number(a.gamma[i]), seed, a.replicas);
    const auto rep = lower_bound_witness(params, a.gamma[i], a.A, a.replicas, seed,
                                         resolve_jobs(ctx.common.jobs));
    table.add_row({std::int64_t{a.q}, a.beta, a.n, a.gamma[i], rep.T, a.A, a.replicas, rep.frequency});
  }
  emit_table(ctx, table);
  return kExitOk;
}

// ---------------------------------------------------------------- wiring

struct Cli {
  CLI::App app{"Swendsen-Wang dynamics of the mean-field Potts model"};
  std::string config_path;
  Common common;
  std::vector<std::pair<CLI::App*, std::function<int(Context&)>>> handlers;

  AnalyzeArgs analyze;
  PercolationArgs percolation;
  SimulateArgs simulate;
  CoupleArgs couple;
  ProfileArgs tvprofile;
  ProfileArgs mixfit;
  OracleArgs oracle;
  TailArgs tails;
  ConcentrationArgs concentration;
  WitnessArgs witness;
};

void add_model(CLI::App* sub, int& q, double& beta) {
  sub->add_option("--q", q, "Number of spins")->required();
  sub->add_option("--beta", beta, "Inverse temperature (interaction beta/n)")->required();
}

CLI::App* add_sub(Cli& cli, const char* name, const char* help, bool tabular,
                  std::function<int(Context&)> fn) {
  CLI::App* sub = cli.app.add_subcommand(name, help);
  sub->add_option("--config", cli.config_path, "JSON file of flag values (flags given on the command line win)");
  add_common(sub, cli.common, tabular);
  cli.handlers.emplace_back(sub, std::move(fn));
  return sub;
}

void add_profile_options(CLI::App* sub, ProfileArgs& a) {
  add_model(sub, a.q, a.beta);
  sub->add_option("--n", a.n, "Graph sizes")->expected(1, -1);
  sub->add_option("--t-max", a.t_max, "Last time step (default ceil(3 c log n))");
  sub->add_option("--replicas", a.replicas, "Chains per n (>= 1000)");
  sub->add_option("--bin-width", a.bin_width, "Bin width in units of sqrt(n)");
  sub->add_option("--reference", a.reference, "Stationary reference")
      ->check(CLI::IsMember({"auto", "exact", "longrun"}));
  sub->add_option("--reference-replicas", a.reference_replicas, "Long-run reference chains (0: replicas)");
}

void build(Cli& cli) {
  cli.app.require_subcommand(1, 1);
  cli.app.set_version_flag("--version", std::string(version_string()));
  {
    auto& a = cli.analyze;
    CLI::App* s = add_sub(cli, "analyze", "Closed-form drift quantities at the fixed point", false,
                          [&cli](Context& c) { return run_analyze(c, cli.analyze); });
    add_model(s, a.q, a.beta);
  }
  {
    auto& a = cli.percolation;
    CLI::App* s = add_sub(cli, "percolation-check", "Random-graph component statistics", true,
                          [&cli](Context& c) { return run_percolation(c, cli.percolation); });
    s->add_option("--lambda", a.lambda, "Mean degree of G(n, lambda/n)");
    s->add_option("--n", a.n, "Graph sizes")->expected(1, -1);
    s->add_option("--replicas", a.replicas, "Graphs per n");
  }
  {
    auto& a = cli.simulate;
    CLI::App* s = add_sub(cli, "simulate", "Trajectories of the spin counts", true,
                          [&cli](Context& c) { return run_simulate(c, cli.simulate); });
    add_model(s, a.q, a.beta);
    s->add_option("--n", a.n, "Number of vertices");
    s->add_option("--steps", a.steps, "Steps per trajectory");
    s->add_option("--replicas", a.replicas, "Independent trajectories");
    s->add_option("--start", a.start, "Initial state: mono, uniform or counts:v1,...,vq")
        ->check(CLI::Validator(
            [](std::string& v) { return valid_start(v) ? std::string() : "expected mono, uniform or counts:..."; },
            "START"));
  }
  {
    auto& a = cli.couple;
    CLI::App* s = add_sub(cli, "couple", "Multi-phase coupling times", true,
                          [&cli](Context& c) { return run_couple(c, cli.couple); });
    add_model(s, a.q, a.beta);
    s->add_option("--n", a.n, "Number of vertices");
    s->add_option("--replicas", a.replicas, "Coupled pairs");
    s->add_option("--eps", a.thresholds.eps_ball, "Burn-in ball radius");
    s->add_option("--chat,-C", a.thresholds.sqrtn_C, "Proximity constant ending the contraction phase");
    s->add_option("--coalesce-C", a.thresholds.coalesce_C, "Coalescence target in units of 1/sqrt(n)");
    s->add_option("--boost", a.thresholds.boost_rounds, "Coupling rounds");
    s->add_option("--radius", a.thresholds.proximity_r, "Proximity radius checked before each attempt");
    s->add_option("--burnin-budget", a.thresholds.burnin_budget, "Step budget of the burn-in phase");
    s->add_option("--contract-budget", a.thresholds.contract_budget, "Step budget of the contraction phase");
  }
  {
    CLI::App* s = add_sub(cli, "tvprofile", "TV distance to stationarity from the monochromatic start", true,
                          [&cli](Context& c) { return run_tvprofile(c, cli.tvprofile); });
    add_profile_options(s, cli.tvprofile);
  }
  {
    auto& a = cli.mixfit;
    a.n = {1000, 10000, 100000};
    CLI::App* s = add_sub(cli, "mixfit", "Mixing time against log n", true,
                          [&cli](Context& c) { return run_mixfit(c, cli.mixfit); });
    add_profile_options(s, a);
    s->add_option("--bootstrap", a.bootstrap, "Bootstrap resamples for the slope interval");
    s->add_option("--profiles-out", a.profiles_out, "Also write the underlying profiles here");
  }
  {
    auto& a = cli.oracle;
    CLI::App* s = add_sub(cli, "oracle", "Exact transition matrix checks on tiny instances", false,
                          [&cli](Context& c) { return run_oracle(c, cli.oracle); });
    s->add_option("--n", a.n, "Number of vertices (<= 6)");
    add_model(s, a.q, a.beta);
    s->add_option("--check", a.check, "Which property to check")
        ->check(CLI::IsMember({"rows", "stationarity", "reversibility", "all"}));
    s->add_option("--tol", a.tol, "Tolerance");
  }
  {
    auto& a = cli.tails;
    CLI::App* s = add_sub(cli, "tails", "One-step fluctuation tails around the drift", true,
                          [&cli](Context& c) { return run_tails(c, cli.tails); });
    add_model(s, a.q, a.beta);
    s->add_option("--n", a.n, "Number of vertices");
    s->add_option("--replicas", a.replicas, "Independent steps");
  }
  {
    auto& a = cli.concentration;
    CLI::App* s = add_sub(cli, "concentration", "Stationary concentration around m", true,
                          [&cli](Context& c) { return run_concentration(c, cli.concentration); });
    add_model(s, a.q, a.beta);
    s->add_option("--n", a.n, "Number of vertices");
    s->add_option("--replicas", a.replicas, "Independent chains");
    s->add_option("--A", a.A, "Radius in units of 1/sqrt(n)");
    s->add_option("--steps", a.steps, "Steps per chain (default ceil(10 c log n) + 1000)");
  }
  {
    auto& a = cli.witness;
    CLI::App* s = add_sub(cli, "witness", "Distance from m after c log n + gamma steps", true,
                          [&cli](Context& c) { return run_witness(c, cli.witness); });
    add_model(s, a.q, a.beta);
    s->add_option("--n", a.n, "Number of vertices");
    s->add_option("--replicas", a.replicas, "Independent chains");
    s->add_option("--gamma", a.gamma, "Offsets from c log n")->expected(1, -1);
    s->add_option("--A", a.A, "Radius in units of 1/sqrt(n)");
  }
}

std::string token_for(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
  if (value.is_number_unsigned()) return std::to_string(value.get<std::uint64_t>());
  if (value.is_number_float()) return format_number(value.get<double>());
  throw precondition_error("config values must be scalars or arrays of scalars");
}

// Appends "--key value..." for every config key whose option was not given on
// the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args, CLI::App* sub,
                                      const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot read config file " + path);
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::parse_error& e) {
    throw CLI::ValidationError("--config", std::string("malformed JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : cfg.items()) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw CLI::ExtrasError({"--" + key});
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a.size() > 1 && a[0] == '-' && opt->check_name(a.substr(0, a.find('=')));
    });
    if (given) continue;
    merged.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) merged.push_back(token_for(v));
    } else {
      merged.push_back(token_for(value));
    }
  }
  return merged;
}

// Value of --config, read before parsing so that required flags may come from
// the file.
std::optional<std::string> config_path_in(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto cli = std::make_unique<Cli>();
  build(*cli);
  std::vector<std::string> effective = args;
  if (const auto path = config_path_in(args); path && !args.empty()) {
    CLI::App* sub = cli->app.get_subcommand_no_throw(args.front());
    if (sub != nullptr) {
      try {
        effective = merge_config(args, sub, *path);
      } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitUsage;
      }
      cli = std::make_unique<Cli>();
      build(*cli);
    }
  }
  std::vector<std::string> reversed(effective.rbegin(), effective.rend());
  try {
    cli->app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return cli->app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  for (auto& [sub, fn] : cli->handlers) {
    if (!sub->parsed()) continue;
    Context ctx{sub->get_name(), cli->common, out, err, utc_now(), {}};
    return fn(ctx);
  }
  return kExitUsage;
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const io_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {  // includes precondition_error
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::length_error& e) {  // size guards
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const profile_too_short_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_and_dispatch(args, out, err);
}

}  // namespace swlab
