#include <CLI11.hpp>
#include <json.hpp>

#include <chainspectra/asymptotics.hpp>
#include <chainspectra/extensions.hpp>
#include <chainspectra/nonlinear.hpp>

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace cs = chainspectra;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

// ---------------------------------------------------------------- output

using Cell = std::variant<long long, double, std::string, bool>;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::string to_csv(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else return std::to_string(v);
      },
      c);
}

json to_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return std::isfinite(v) ? json(v) : json(nullptr);
        else return json(v);
      },
      c);
}

/// CSV rows are flushed as they arrive; JSON is written on close.
class Table {
 public:
  Table(const std::filesystem::path& dir, const std::string& name, std::vector<std::string> columns, bool as_json)
      : columns_(std::move(columns)), json_(as_json) {
    path_ = dir / (name + (json_ ? ".json" : ".csv"));
    out_.open(path_, std::ios::binary);
    if (!out_) throw std::runtime_error("cannot write " + path_.string());
    if (!json_) {
      for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
      out_ << '\n';
    }
  }
  ~Table() { close(); }

  void row(const std::vector<Cell>& cells) {
    if (json_) {
      json r = json::object();
      for (std::size_t i = 0; i < columns_.size(); ++i) r[columns_[i]] = to_json(cells[i]);
      rows_.push_back(std::move(r));
      return;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << to_csv(cells[i]);
    out_ << '\n';
    out_.flush();
  }

  void close() {
    if (!out_.is_open()) return;
    if (json_) {
      json doc = {{"columns", columns_}, {"rows", rows_}};
      out_ << doc.dump(1) << '\n';
    }
    out_.close();
  }

 private:
  std::vector<std::string> columns_;
  bool json_;
  std::filesystem::path path_;
  std::ofstream out_;
  json rows_ = json::array();
};

void write_json(const std::filesystem::path& dir, const std::string& name, const json& doc) {
  std::ofstream out(dir / (name + ".json"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + name + ".json");
  out << doc.dump(1) << '\n';
}

// ---------------------------------------------------------------- worker pool

int thread_count() {
  int n = int(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* e = std::getenv("CHAINSPECTRA_THREADS")) {
    const int cap = std::atoi(e);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Runs compute(i) on a pool and calls emit(i, result) in index order as results become available.
template <class R>
int ordered_sweep(int count, const std::function<R(int)>& compute, const std::function<void(int, const R&)>& emit) {
  std::vector<std::optional<R>> slots(count);
  std::vector<std::string> errors(count);
  std::vector<char> done(count, 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      std::optional<R> r;
      std::string err;
      try {
        r = compute(i);
      } catch (const std::exception& e) {
        err = e.what();
      }
      std::lock_guard<std::mutex> lk(mu);
      slots[i] = std::move(r);
      errors[i] = std::move(err);
      done[i] = 1;
      cv.notify_all();
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::min(thread_count(), std::max(1, count));
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  int failures = 0;
  for (int i = 0; i < count; ++i) {
    std::unique_lock<std::mutex> lk(mu);
    cv.wait(lk, [&] { return done[i] != 0; });
    auto r = std::move(slots[i]);
    const std::string err = errors[i];
    lk.unlock();
    if (r) emit(i, *r);
    else {
      ++failures;
      std::cerr << "point " << i << ": " << err << '\n';
    }
  }
  for (auto& t : pool) t.join();
  return failures;
}

// ---------------------------------------------------------------- options

struct Axis {
  std::vector<double> spec;

  std::vector<double> values(double fallback) const {
    if (spec.empty()) return {fallback};
    if (spec.size() != 3 || spec[2] < 1 || spec[2] != std::floor(spec[2]))
      throw cs::Error(cs::ErrorCode::InvalidConfig, "range needs start stop count with count >= 1");
    const int n = int(spec[2]);
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * i / (n - 1);
    return v;
  }
};

struct Common {
  std::string out = ".";
  std::string format = "csv";
  bool json() const { return format == "json"; }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sub->add_option("--config", "Flat JSON file with option values; flags override");
}

void add_chain(CLI::App* sub, cs::ChainConfig& c) {
  sub->add_option("--n", c.n, "Number of cells")->capture_default_str();
  sub->add_option("--k1", c.k1, "Intra-cell stiffness")->capture_default_str();
  sub->add_option("--k2", c.k2, "Inter-cell stiffness")->capture_default_str();
  sub->add_option("--k31", c.k31, "Left wall stiffness")->capture_default_str();
  sub->add_option("--k32", c.k32, "Right wall stiffness")->capture_default_str();
}

std::filesystem::path out_dir(const Common& c) {
  std::filesystem::path p(c.out);
  std::filesystem::create_directories(p);
  return p;
}

cs::BandTag parse_band(const std::string& s) { return s == "acoustic" ? cs::BandTag::Acoustic : cs::BandTag::Optical; }
cs::BandSide parse_side(const std::string& s) { return s == "upper" ? cs::BandSide::Upper : cs::BandSide::Lower; }

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// ---------------------------------------------------------------- commands

int cmd_spectrum(const cs::ChainConfig& cfg, const Common& com) {
  cfg.validate();
  const auto dir = out_dir(com);
  const auto cls = cs::classify_spectrum(cfg);
  const auto& sp = cls.spectrum;
  const auto p = cfg.bulk();
  Table t(dir, "spectrum",
          {"index", "omega2", "omega", "in_band", "band", "a_re", "a_im", "sigma", "theta", "eta", "xi", "label"},
          com.json());
  for (int j = 0; j < sp.size(); ++j) {
    const auto& m = cls.modes[j];
    const double w2 = sp.omega2(j);
    t.row({(long long)j, w2, std::sqrt(std::max(0.0, w2)), cs::in_band(p, w2), std::string(cs::to_string(cs::band_of(p, w2))),
           m.te.a.real(), m.te.a.imag(), (long long)m.te.sigma, m.theta, m.eta, m.xi, std::string(cs::to_string(m.label))});
  }
  Table modes(dir, "modes", {"index", "site", "value"}, com.json());
  for (int j = 0; j < sp.size(); ++j) {
    const Eigen::VectorXd u = sp.mode(j);
    for (int s = 0; s < u.size(); ++s) modes.row({(long long)j, (long long)(s + 1), u[s]});
  }
  return kExitOk;
}

struct PhaseRow {
  double k2, k31, k32;
  int semi, finite;
  std::string regime;
};

int cmd_phase(double k1, int n, const Axis& k2a, const Axis& k31a, const Axis& k32a, double k2, double k31, double k32,
              const Common& com) {
  const auto v2 = k2a.values(k2), v31 = k31a.values(k31), v32 = k32a.values(k32);
  const auto dir = out_dir(com);
  Table t(dir, "phase", {"k2", "k31", "k32", "count_semi", "count_finite", "regime"}, com.json());
  const int total = int(v2.size() * v31.size() * v32.size());
  const int fails = ordered_sweep<PhaseRow>(
      total,
      [&](int i) {
        const int i32 = i % int(v32.size()), i31 = (i / int(v32.size())) % int(v31.size()),
                  i2 = i / int(v32.size() * v31.size());
        const cs::ChainConfig c{n, k1, v2[i2], v31[i31], v32[i32]};
        c.validate();
        PhaseRow r{c.k2, c.k31, c.k32, cs::count_edge_states_semi(k1, c.k2, c.k31),
                   cs::classify_spectrum(c).out_of_band_count, cs::to_string(cs::classify_regime(c).tag)};
        return r;
      },
      [&](int, const PhaseRow& r) {
        t.row({r.k2, r.k31, r.k32, (long long)r.semi, (long long)r.finite, r.regime});
      });
  return fails ? kExitSolver : kExitOk;
}

struct SweepPoint {
  std::vector<std::vector<Cell>> rows;
};

int cmd_sweep_k32(const cs::ChainConfig& base, const Axis& k32a, const Common& com) {
  base.validate();
  const auto v = k32a.values(base.k32);
  const auto dir = out_dir(com);
  Table t(dir, "sweep_k32", {"k32", "source", "index", "omega2", "band", "label"}, com.json());
  const int fails = ordered_sweep<SweepPoint>(
      int(v.size()),
      [&](int i) {
        auto c = base;
        c.k32 = v[i];
        c.validate();
        SweepPoint pt;
        const auto cls = cs::classify_spectrum(c);
        const auto p = c.bulk();
        for (int j = 0; j < cls.spectrum.size(); ++j) {
          const double w2 = cls.spectrum.omega2(j);
          pt.rows.push_back({c.k32, std::string("exact"), (long long)j, w2, std::string(cs::to_string(cs::band_of(p, w2))),
                             std::string(cs::to_string(cls.modes[j].label))});
        }
        const auto est = cs::predict_edge_states(c);
        for (int j = 0; j < est.count(); ++j) {
          const auto& s = est.states[j];
          pt.rows.push_back({c.k32, std::string(s.ambiguous ? "predicted_ambiguous" : "predicted"), (long long)j, s.omega2,
                             std::string(cs::to_string(cs::band_of(p, s.omega2))), std::string(cs::to_string(s.label))});
        }
        return pt;
      },
      [&](int, const SweepPoint& pt) {
        for (const auto& r : pt.rows) t.row(r);
      });
  return fails ? kExitSolver : kExitOk;
}

int cmd_band_edge(double k1, double k2, double k31, const Axis& na, int n, int a, int sigma,
                  const std::vector<double>& bracket, const Common& com) {
  const auto nv = na.values(n);
  const auto dir = out_dir(com);
  Table t(dir, "band_edge",
          {"n", "a", "sigma", "omega2", "c1", "c2", "k32_exact", "k32_asymptotic", "tier", "k32_bisect"}, com.json());
  if (!bracket.empty() && bracket.size() != 2) throw cs::Error(cs::ErrorCode::InvalidConfig, "--bisect needs lo hi");
  const int fails = ordered_sweep<std::vector<Cell>>(
      int(nv.size()),
      [&](int i) {
        const int ni = int(std::lround(nv[i]));
        cs::ChainConfig probe{ni, k1, k2, k31, k2};
        probe.validate();
        const auto m = cs::band_edge_match(k1, k2, k31, ni, a, sigma);
        double bis = nan();
        if (bracket.size() == 2) bis = cs::bisect_crossing_k32(probe, m.omega2, bracket[0], bracket[1]);
        return std::vector<Cell>{(long long)ni, (long long)a, (long long)sigma, m.omega2, m.c1, m.c2, m.k32_exact,
                                 m.k32_asymptotic, std::string(cs::to_string(m.tier)), bis};
      },
      [&](int, const std::vector<Cell>& r) { t.row(r); });
  return fails ? kExitSolver : kExitOk;
}

int cmd_inband(const cs::ChainConfig& cfg, const std::string& band, const std::string& side, int kmax, const Common& com) {
  cfg.validate();
  const auto b = parse_band(band);
  const auto s = parse_side(side);
  std::optional<cs::InBandEstimate> est;
  try {
    est = cs::inband_pattern(cfg, b, s, kmax);
  } catch (const cs::Error& e) {
    if (e.code() != cs::ErrorCode::PatternUndetermined) throw;
    std::cerr << "pattern undetermined; predicted columns left empty\n";
  }
  const auto cls = cs::classify_spectrum(cfg);
  const auto pat = est ? est->pattern : cs::Pattern::Integer;
  const double gamma = est && std::isfinite(est->gamma) ? est->gamma : 0.0;
  const auto ex = cs::inband_exact(cls, b, s, kmax, pat, gamma);
  const auto dir = out_dir(com);
  Table t(dir, "inband",
          {"k", "mode_index", "pattern", "omega2_exact", "omega2_predicted", "delta_theta_exact", "delta_theta_predicted",
           "tilde_theta_exact", "tilde_theta_predicted", "delta_alpha_exact", "delta_alpha_predicted",
           "delta_beta_exact", "delta_beta_predicted"},
          com.json());
  auto at = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : nan(); };
  for (std::size_t k = 0; k < ex.mode_indices.size(); ++k) {
    t.row({(long long)(k + 1), (long long)ex.mode_indices[k], std::string(est ? cs::to_string(pat) : "undetermined"),
           at(ex.omega2, k), est ? at(est->omega2, k) : nan(), at(ex.delta_theta, k), est ? at(est->delta_theta, k) : nan(),
           at(ex.tilde_theta, k), est ? at(est->tilde_theta, k) : nan(), at(ex.delta_alpha, k),
           est ? at(est->delta_alpha, k) : nan(), at(ex.delta_beta, k), est ? at(est->delta_beta, k) : nan()});
  }
  return kExitOk;
}

int cmd_continue(const cs::NonlinearConfig& cfg, int seed, double amp_min, double amp_max, const Common& com) {
  cfg.validate();
  const auto sp = cs::full_spectrum(cfg.chain);
  if (seed < 0) seed = cs::lowest_optical_mode(sp);
  const auto br = cs::continue_branch(cfg, seed, amp_min, amp_max);
  const auto dir = out_dir(com);
  {
    Table t(dir, "branch", {"arclength", "omega", "omega2", "E", "IPR", "residual"}, com.json());
    for (const auto& p : br.points) t.row({p.arclength, p.omega, p.omega * p.omega, p.energy, p.ipr, p.residual});
    Table prof(dir, "branch_profiles", {"point", "site", "value"}, com.json());
    for (std::size_t i = 0; i < br.points.size(); ++i)
      for (int s = 0; s < br.points[i].coeffs.rows(); ++s)
        prof.row({(long long)i, (long long)(s + 1), br.points[i].coeffs(s, 0)});
  }
  json meta = {{"seed_mode", br.seed_mode}, {"seed_omega", br.seed_omega}, {"points", br.points.size()}};
  if (br.exit_event) {
    meta["exit_event"] = {{"point_index", br.exit_event->point_index},
                          {"arclength", br.exit_event->arclength},
                          {"omega2", br.exit_event->omega2},
                          {"edge", br.exit_event->edge}};
  }
  meta["termination"] = br.termination ? json(cs::to_string(*br.termination)) : json(nullptr);
  write_json(dir, "branch_meta", meta);
  if (br.termination) {
    std::cerr << "branch truncated: " << cs::to_string(*br.termination) << '\n';
    return kExitSolver;
  }
  return kExitOk;
}

json interval_json(const cs::Interval& i) { return json::array({i.lo, i.hi}); }

int cmd_two_layer(const cs::TwoLayerConfig& cfg, const Common& com) {
  cfg.validate();
  const auto s = cs::two_layer_spectrum(cfg);
  const auto dir = out_dir(com);
  {
    Table t(dir, "two_layer_spectrum", {"index", "omega2", "pair", "label", "log10_end_ratio"}, com.json());
    for (int j = 0; j < s.omega2.size(); ++j) {
      const auto& m = s.info[j];
      t.row({(long long)j, m.omega2, std::string(cs::to_string(m.pair)), std::string(cs::to_string(m.label)),
             m.log10_end_ratio});
    }
    Table modes(dir, "two_layer_modes", {"index", "layer", "column", "value"}, com.json());
    for (int j = 0; j < s.omega2.size(); ++j)
      for (int col = 0; col < 2 * cfg.n; ++col)
        for (int l = 0; l < 2; ++l)
          modes.row({(long long)j, (long long)(l + 1), (long long)(col + 1), s.modes(cs::two_layer_dof(l, col), j)});
  }
  write_json(dir, "two_layer_bands",
             {{"pair1", {interval_json(s.bands.pair1[0]), interval_json(s.bands.pair1[1])}},
              {"pair2", {interval_json(s.bands.pair2[0]), interval_json(s.bands.pair2[1])}}});
  return kExitOk;
}

int cmd_lattice2d(const cs::Lattice2DConfig& cfg, const std::vector<double>& window, const std::vector<int>& dump,
                  bool dump_edge, const Common& com) {
  if (!window.empty() && window.size() != 2) throw cs::Error(cs::ErrorCode::InvalidConfig, "--window needs lo hi");
  std::optional<cs::Interval> w;
  if (window.size() == 2) w = cs::Interval{window[0], window[1]};
  const auto s = cs::lattice2d_spectrum(cfg, w);
  const auto dir = out_dir(com);
  {
    Table t(dir, "lattice2d_spectrum", {"index", "omega2", "boundary_fraction", "edge", "in_band", "residual"}, com.json());
    for (int j = 0; j < s.omega2.size(); ++j) {
      const auto& m = s.info[j];
      t.row({(long long)j, m.omega2, m.boundary_fraction, m.edge, m.in_band, m.residual});
    }
    std::set<int> which(dump.begin(), dump.end());
    if (dump_edge)
      for (int j = 0; j < s.omega2.size(); ++j)
        if (s.info[j].edge) which.insert(j);
    Table modes(dir, "lattice2d_modes", {"index", "row", "col", "value"}, com.json());
    for (int j : which) {
      if (j < 0 || j >= s.omega2.size()) throw cs::Error(cs::ErrorCode::InvalidConfig, "mode index out of range");
      for (int r = 0; r < cfg.N; ++r)
        for (int c = 0; c < cfg.N; ++c) modes.row({(long long)j, (long long)(r + 1), (long long)(c + 1), s.modes(cfg.index(r, c), j)});
    }
  }
  json bands = json::array();
  for (const auto& b : s.bands.bands) bands.push_back(interval_json(b));
  write_json(dir, "lattice2d_bands", {{"bands", bands}, {"windowed", s.windowed}});
  return kExitOk;
}

// ---------------------------------------------------------------- config merge

std::string json_token(const json& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

/// Inserts `--key value` pairs from a flat JSON file for keys not given on the command line.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  if (args.size() < 2) return args;
  std::string file;
  std::set<std::string> given;
  for (std::size_t i = 2; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(key);
    if (key == "config") file = eq == std::string::npos ? (i + 1 < args.size() ? args[i + 1] : "") : a.substr(eq + 1);
  }
  if (file.empty()) return args;
  std::ifstream in(file);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + file);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  if (!doc.is_object()) throw CLI::ValidationError("--config", "config must be a flat JSON object");
  std::vector<std::string> extra;
  for (const auto& [key, val] : doc.items()) {
    if (given.count(key)) continue;
    if (val.is_boolean()) {
      if (val.get<bool>()) extra.push_back("--" + key);
      continue;
    }
    extra.push_back("--" + key);
    if (val.is_array())
      for (const auto& x : val) extra.push_back(json_token(x));
    else if (val.is_object())
      throw CLI::ValidationError("--config", "nested value for " + key);
    else
      extra.push_back(json_token(val));
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral analysis of finite diatomic spring-mass chains"};
  app.require_subcommand(1);
  Common com;

  cs::ChainConfig chain{50, 1.0, 2.3, 1.3, 3.5};
  auto* spectrum = app.add_subcommand("spectrum", "Eigenfrequencies, transfer data and labels");
  add_chain(spectrum, chain);
  add_common(spectrum, com);

  Axis k2a, k31a, k32a;
  auto* phase = app.add_subcommand("phase_diagram", "Edge-state counts over (k2, k31, k32)");
  add_chain(phase, chain);
  phase->add_option("--k2-range", k2a.spec, "start stop count")->expected(3);
  phase->add_option("--k31-range", k31a.spec, "start stop count")->expected(3);
  phase->add_option("--k32-range", k32a.spec, "start stop count")->expected(3);
  add_common(phase, com);

  auto* sweep = app.add_subcommand("sweep_k32", "Exact and predicted spectra over the right wall stiffness");
  add_chain(sweep, chain);
  sweep->add_option("--k32-range", k32a.spec, "start stop count")->expected(3);
  add_common(sweep, com);

  Axis na;
  int edge_a = 1, edge_sigma = 1;
  std::vector<double> bracket;
  auto* bedge = app.add_subcommand("band_edge", "Right stiffness putting a band edge in the spectrum");
  add_chain(bedge, chain);
  bedge->add_option("--n-range", na.spec, "start stop count")->expected(3);
  bedge->add_option("--a", edge_a, "+1 or -1")->check(CLI::IsMember({-1, 1}))->capture_default_str();
  bedge->add_option("--sigma", edge_sigma, "+1 or -1")->check(CLI::IsMember({-1, 1}))->capture_default_str();
  bedge->add_option("--bisect", bracket, "k32 bracket lo hi for the Sturm bisection")->expected(2);
  add_common(bedge, com);

  std::string band = "optical", side = "lower";
  int kmax = 5;
  auto* inband = app.add_subcommand("inband", "Near-edge in-band patterns, exact and predicted");
  add_chain(inband, chain);
  inband->add_option("--band", band)->check(CLI::IsMember({"optical", "acoustic"}))->capture_default_str();
  inband->add_option("--side", side)->check(CLI::IsMember({"lower", "upper"}))->capture_default_str();
  inband->add_option("--kmax", kmax)->capture_default_str();
  add_common(inband, com);

  cs::NonlinearConfig nl;
  int seed = -1;
  double amp_min = 1e-4, amp_max = 1.5;
  auto* cont = app.add_subcommand("continue", "Nonlinear continuation of a linear mode");
  add_chain(cont, chain);
  cont->add_option("--b", nl.b, "Cubic coefficient")->capture_default_str();
  cont->add_option("--harmonics", nl.harmonics, "Highest odd harmonic")->capture_default_str();
  cont->add_option("--step", nl.step)->capture_default_str();
  cont->add_option("--max-step", nl.max_step)->capture_default_str();
  cont->add_option("--min-step", nl.min_step)->capture_default_str();
  cont->add_option("--max-points", nl.max_points)->capture_default_str();
  cont->add_option("--newton-tol", nl.newton_tol)->capture_default_str();
  cont->add_option("--delta-res", nl.delta_res)->capture_default_str();
  cont->add_option("--seed", seed, "Mode index (ascending omega^2); default lowest optical");
  cont->add_option("--amp-min", amp_min)->capture_default_str();
  cont->add_option("--amp-max", amp_max, "Stop when the fundamental profile norm reaches this")->capture_default_str();
  add_common(cont, com);

  cs::TwoLayerConfig tl;
  auto* two = app.add_subcommand("two_layer", "Two-layer chain spectrum and band pairs");
  two->add_option("--n", tl.n)->capture_default_str();
  two->add_option("--k1", tl.k1)->capture_default_str();
  two->add_option("--k2", tl.k2)->capture_default_str();
  two->add_option("--k5", tl.k5)->capture_default_str();
  two->add_option("--k6", tl.k6)->capture_default_str();
  two->add_option("--k31", tl.k31)->capture_default_str();
  two->add_option("--k32", tl.k32)->capture_default_str();
  two->add_option("--k41", tl.k41)->capture_default_str();
  two->add_option("--k42", tl.k42)->capture_default_str();
  add_common(two, com);

  cs::Lattice2DConfig lat;
  std::vector<double> window;
  std::vector<int> dump;
  bool dump_edge = false;
  auto* l2 = app.add_subcommand("lattice2d", "2D diatomic lattice with wall springs");
  l2->add_option("--N", lat.N, "Lattice side (even)")->capture_default_str();
  l2->add_option("--k1", lat.k1)->capture_default_str();
  l2->add_option("--k2", lat.k2)->capture_default_str();
  l2->add_option("--k3", lat.k3, "Left wall")->capture_default_str();
  l2->add_option("--k4", lat.k4, "Right wall")->capture_default_str();
  l2->add_option("--k5", lat.k5, "Top wall")->capture_default_str();
  l2->add_option("--k6", lat.k6, "Bottom wall")->capture_default_str();
  l2->add_option("--window", window, "omega^2 window lo hi")->expected(2);
  l2->add_option("--dump-modes", dump, "Mode indices to write");
  l2->add_flag("--dump-edge", dump_edge, "Write every edge-classified mode");
  add_common(l2, com);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(std::move(args));
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (spectrum->parsed()) return cmd_spectrum(chain, com);
    if (phase->parsed()) return cmd_phase(chain.k1, chain.n, k2a, k31a, k32a, chain.k2, chain.k31, chain.k32, com);
    if (sweep->parsed()) return cmd_sweep_k32(chain, k32a, com);
    if (bedge->parsed()) return cmd_band_edge(chain.k1, chain.k2, chain.k31, na, chain.n, edge_a, edge_sigma, bracket, com);
    if (inband->parsed()) return cmd_inband(chain, band, side, kmax, com);
    if (cont->parsed()) {
      nl.chain = chain;
      return cmd_continue(nl, seed, amp_min, amp_max, com);
    }
    if (two->parsed()) return cmd_two_layer(tl, com);
    if (l2->parsed()) return cmd_lattice2d(lat, window, dump, dump_edge, com);
  } catch (const cs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == cs::ErrorCode::InvalidConfig ? kExitUsage : kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}
