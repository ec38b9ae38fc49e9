#include <bit>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "illumseg/cli.hpp"
#include "illumseg/errors.hpp"
#include "illumseg/image.hpp"
#include "illumseg/linear_ops.hpp"
#include "illumseg/oracle.hpp"
#include "illumseg/random.hpp"

namespace illumseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("unreadable file: " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + file.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fingerprint(const ScalarField& field) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(field.height());
  mix(field.width());
  for (double v : field.values()) mix(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::vector<double> parse_number_list(const std::string& text) {
  if (!text.empty() && text.back() == ',') throw InvalidArgument("trailing comma in '" + text + "'");
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::logic_error&) {
      throw InvalidArgument("not a number: '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size()) throw InvalidArgument("not a number: '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw InvalidArgument("empty list");
  return values;
}

int report_error(std::ostream& err, int code, const std::string& what) {
  err << "error: " << what << '\n';
  return code;
}

// --- decompose ------------------------------------------------------------

struct DecomposeArgs {
  std::string input;
  std::string out_dir = "out";
  std::string reg = "tf";
  std::string preset;
  std::string presets_file;
  std::string config_file;
  std::string dual_ball = "exact";
  std::string csv;
  double alpha = 0, beta = 0, gamma = 0, mu = 0, tau = 0, sigma = 0, tol = 0, log_floor = 0;
  int max_iter = 0;
};

void write_iteration_csv(const fs::path& file, const pd::SolverResult& result) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << "iter,residual,energy\n";
  std::size_t e = 0;
  out << std::setprecision(12);
  for (std::size_t k = 0; k < result.residual_history.size(); ++k) {
    const int iter = static_cast<int>(k) + 1;
    out << iter << ',' << result.residual_history[k] << ',';
    if (e < result.energy_history.size() && result.energy_history[e].iteration == iter) {
      out << result.energy_history[e].energy;
      ++e;
    }
    out << '\n';
  }
}

int cmd_decompose(const DecomposeArgs& a, const CLI::App& sub, std::ostream& out) {
  pd::SolverConfig config;
  config.regularizer = pd::regularizer_from_string(a.reg);
  if (config.regularizer == pd::Regularizer::TV) config = pd::SolverConfig::tv(0, 0, 0);

  if (!a.preset.empty()) {
    const Preset p =
        load_preset(a.presets_file.empty() ? default_presets_file() : fs::path(a.presets_file), a.preset);
    config.alpha = p.alpha;
    config.beta = p.beta;
    config.gamma = p.gamma;
  }
  if (!a.config_file.empty()) apply_config_json(read_json(a.config_file), config);
  auto given = [&sub](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--alpha")) config.alpha = a.alpha;
  if (given("--beta")) config.beta = a.beta;
  if (given("--gamma")) config.gamma = a.gamma;
  if (given("--mu")) config.mu = a.mu;
  if (given("--tau")) config.tau = a.tau;
  if (given("--sigma")) config.sigma = a.sigma;
  if (given("--tol")) config.tol = a.tol;
  if (given("--log-floor")) config.log_floor = a.log_floor;
  if (given("--max-iter")) config.max_iter = a.max_iter;
  if (a.dual_ball == "literal") {
    config.dual_ball = pd::DualBall::Literal;
  } else if (a.dual_ball != "exact") {
    throw InvalidArgument("--dual-ball must be exact or literal");
  }
  if (!(config.alpha > 0 && config.beta > 0 && config.gamma > 0)) {
    throw InvalidArgument("alpha, beta and gamma are required (flags, --config or --preset)");
  }
  config.validate();

  const RasterImage image = load_image(a.input);
  const ScalarField s = to_log_domain(image, config.log_floor);
  const fs::path dir = a.out_dir;
  ensure_directory(dir);

  const pd::StepAudit audit = pd::audit_step_sizes(config, s.shape());
  out << "step-size audit: " << audit.describe() << '\n';

  const pd::SolverResult result = pd::run(s, config);

  save_raw_field(result.r, dir / "r.f32");
  save_raw_field(result.l, dir / "l.f32");
  save_raw_field(result.R, dir / "R.f32");
  save_raw_field(result.L, dir / "L.f32");
  save_image(rescale_unit(result.R), dir / "R.png");
  save_image(rescale_unit(result.L), dir / "L.png");
  save_image(image, dir / "source.png");
  write_iteration_csv(a.csv.empty() ? dir / "iterations.csv" : fs::path(a.csv), result);

  json tail = json::array();
  const std::size_t n = result.residual_history.size();
  for (std::size_t k = n > 10 ? n - 10 : 0; k < n; ++k) tail.push_back(result.residual_history[k]);
  json summary = {
      {"input", fs::absolute(a.input).string()},
      {"width", s.width()},
      {"height", s.height()},
      {"config", config_to_json(config)},
      {"iterations", result.iterations_run},
      {"converged", result.converged},
      {"final_energy", result.energy_history.empty() ? 0.0 : result.energy_history.back().energy},
      {"residual_tail", tail},
      {"audit", {{"product", audit.product}, {"norm_bound", audit.norm_bound}, {"estimated", audit.estimated},
                 {"passes", audit.passes}}},
  };
  write_json(dir / "decompose.json", summary);

  out << "iterations: " << result.iterations_run << ", final residual: "
      << (n ? result.residual_history.back() : 0.0) << '\n';
  out << "wrote " << dir.string() << '\n';
  return kSuccess;
}

// --- segment --------------------------------------------------------------

struct SegmentArgs {
  std::string bundle;
  std::string thresholds;
  std::string thresholds_file;
  std::string preset;
  std::string presets_file;
  std::string out_dir;
  int phases = 0;
  bool overlay = false;
  bool masks = false;
};

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  const int sources = (!a.thresholds.empty()) + (!a.thresholds_file.empty()) + (!a.preset.empty()) + (a.phases > 0);
  if (sources > 1) throw InvalidArgument("give only one of --thresholds, --thresholds-file, --preset, --phases");

  seg::Thresholds thresholds = seg::Thresholds::uniform(2);
  if (!a.thresholds.empty()) {
    thresholds = parse_thresholds(a.thresholds);
  } else if (!a.thresholds_file.empty()) {
    thresholds = read_thresholds_file(a.thresholds_file);
  } else if (!a.preset.empty()) {
    const Preset p =
        load_preset(a.presets_file.empty() ? default_presets_file() : fs::path(a.presets_file), a.preset);
    thresholds = seg::Thresholds::from_interior(p.thresholds);
  } else if (a.phases > 0) {
    thresholds = seg::Thresholds::uniform(a.phases);
  }

  const fs::path bundle = a.bundle;
  const ScalarField reflectance = load_bundle_reflectance(bundle);
  const seg::LabelMap map = seg::threshold_phases(reflectance, thresholds);

  const fs::path dir = a.out_dir.empty() ? bundle : fs::path(a.out_dir);
  ensure_directory(dir);
  save_image(seg::label_gray_levels(map), dir / "labels.png");
  json palette = json::array();
  for (const auto& c : seg::overlay_palette()) palette.push_back({c[0], c[1], c[2]});
  write_json(dir / "labels.json", {{"K", map.phases()}, {"thresholds", thresholds.rho()}, {"palette", palette}});

  if (a.masks) {
    for (int k = 1; k <= map.phases(); ++k) save_image(seg::phase_mask(map, k), dir / ("phase_" + std::to_string(k) + ".png"));
  }
  if (a.overlay) {
    fs::path source = bundle / "source.png";
    if (fs::exists(bundle / "manifest.json")) {
      source = bundle / read_json(bundle / "manifest.json").value("source", std::string("source.png"));
    }
    save_rgb_png(seg::render_overlay(map, load_image(source)), dir / "overlay.png");
  }

  std::vector<std::size_t> counts(static_cast<std::size_t>(map.phases()), 0);
  for (int l : map.labels) ++counts[static_cast<std::size_t>(l - 1)];
  out << map.phases() << " phases:";
  for (std::size_t k = 0; k < counts.size(); ++k) out << " [" << k + 1 << "] " << counts[k];
  out << "\nwrote " << (dir / "labels.png").string() << '\n';
  return kSuccess;
}

// --- validate -------------------------------------------------------------

struct ValidateArgs {
  std::string sizes = "8,16,32";
  std::uint64_t seed = 1;
  int draws = 200;
  bool inject_fault = false;
};

class Report {
 public:
  explicit Report(std::ostream& out) : out_(out) {}
  void check(bool ok, const std::string& name, double value) {
    out_ << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << std::setprecision(3) << value << '\n';
    if (!ok) failures_.push_back(name);
  }
  [[nodiscard]] const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::ostream& out_;
  std::vector<std::string> failures_;
};

ScalarField random_field(Shape shape, Rng& rng) {
  ScalarField f(shape);
  for (double& v : f.values()) v = rng.normal();
  return f;
}

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const FilterBank bank = a.inject_fault ? FilterBank::with_flipped_tap() : FilterBank::piecewise_linear();
  if (a.inject_fault) out << "fault injection: leading tap of h2 negated\n";
  Report report(out);
  Rng rng(a.seed);
  constexpr int kTrials = 5;

  for (double size_value : parse_number_list(a.sizes)) {
    if (!(size_value >= 4 && size_value == std::floor(size_value))) {
      throw InvalidArgument("--sizes entries must be integers >= 4");
    }
    const auto n = static_cast<std::size_t>(size_value);
    const Shape shape{n, n};
    const std::string tag = " (" + std::to_string(n) + "x" + std::to_string(n) + ")";

    double grad_mismatch = 0.0, frame_mismatch = 0.0, recon = 0.0;
    for (int t = 0; t < kTrials; ++t) {
      grad_mismatch = std::max(grad_mismatch, adjoint_mismatch(gradient_map(shape), rng.next()));
      const ScalarField u = random_field(shape, rng);
      FrameletCoeffs p(shape);
      for (auto& sb : p.subbands) sb = random_field(shape, rng);
      const double lhs = dot(framelet_analyze(u, bank), p);
      const double rhs = dot(u, framelet_synthesize(p, bank));
      double pn = 0.0;
      for (const auto& sb : p.subbands) pn += dot(sb, sb);
      const FrameletCoeffs wu = framelet_analyze(u, bank);
      double wn = 0.0;
      for (const auto& sb : wu.subbands) wn += dot(sb, sb);
      frame_mismatch = std::max(frame_mismatch, std::abs(lhs - rhs) / std::sqrt(wn * pn));
      recon = std::max(recon, norm_inf(framelet_synthesize(wu, bank) - u) / norm_inf(u));
    }
    report.check(grad_mismatch <= 1e-12, "gradient adjointness" + tag, grad_mismatch);
    report.check(frame_mismatch <= 1e-12, "framelet adjointness" + tag, frame_mismatch);
    report.check(recon <= 1e-12, "perfect reconstruction" + tag, recon);

    bool idempotent = true, feasible = true, nonexpansive = true;
    for (int t = 0; t < kTrials; ++t) {
      ScalarField radius(shape);
      for (double& v : radius.values()) v = rng.uniform(0.1, 2.0);
      FrameletCoeffs p(shape), q(shape);
      for (std::size_t k = 0; k < kSubbandCount; ++k) {
        p[k] = 2.0 * random_field(shape, rng);
        q[k] = 2.0 * random_field(shape, rng);
      }
      const FrameletCoeffs pp = pd::project_dual_ball(p, radius);
      const FrameletCoeffs qq = pd::project_dual_ball(q, radius);
      const FrameletCoeffs ppp = pd::project_dual_ball(pp, radius);
      for (std::size_t k = 0; k < kSubbandCount; ++k) idempotent = idempotent && ppp[k] == pp[k];
      const ScalarField norms = pd::dual_norm(pp);
      for (std::size_t j = 0; j < norms.size(); ++j) feasible = feasible && norms[j] <= radius[j] + 1e-12;
      double before = 0.0, after = 0.0;
      for (std::size_t k = 0; k < kSubbandCount; ++k) {
        before += dot(p[k] - q[k], p[k] - q[k]);
        after += dot(pp[k] - qq[k], pp[k] - qq[k]);
      }
      nonexpansive = nonexpansive && std::sqrt(after) <= std::sqrt(before) + 1e-12;
    }
    report.check(idempotent && feasible && nonexpansive, "dual-ball projection" + tag,
                 static_cast<double>(idempotent + feasible + nonexpansive));

    const double grad_norm = operator_norm_estimate(gradient_map(shape), 100, a.seed);
    report.check(grad_norm <= std::sqrt(8.0) + 1e-9, "||grad|| <= sqrt(8)" + tag, grad_norm);
    const double k_norm = operator_norm_estimate(tight_frame_stack_map(shape), 100, a.seed);
    report.check(k_norm <= 3.0 + 1e-9, "||K|| <= 3" + tag, k_norm);
  }

  double worst_gap = 0.0;
  bool active_exact = true;
  for (int d = 0; d < a.draws; ++d) {
    const double ca = rng.uniform(-2, 2), cb = rng.uniform(-2, 2), cc = rng.uniform(-2, 2);
    const double s = rng.uniform(-5.5, 0), rn = rng.uniform(0, 3), ln = rng.uniform(-5, 1);
    const double gamma = rng.uniform(0.1, 10), mu = rng.uniform(1e-5, 0.5), sigma = rng.uniform(0.05, 1);
    const auto px = pd::solve_pixel_primal(ca, cb, cc, s, rn, ln, gamma, mu, sigma);
    const auto ref = oracle::pixel_qp_oracle(ca, cb, cc, s, rn, ln, gamma, mu, sigma);
    const double mine = oracle::pixel_objective(px.r, px.l, ca, cb, cc, s, rn, ln, gamma, mu, sigma);
    worst_gap = std::max(worst_gap, mine - ref.value);
    if (ref.r == 0.0 && px.r != 0.0) active_exact = false;
  }
  report.check(worst_gap <= 1e-6 && active_exact, "pixel update vs grid oracle (" + std::to_string(a.draws) + " draws)",
               worst_gap);

  if (report.failures().empty()) {
    out << "all checks passed\n";
    return kSuccess;
  }
  out << report.failures().size() << " check(s) failed:\n";
  for (const auto& f : report.failures()) out << "  " << f << '\n';
  return kNumericFailure;
}

// --- export-bundle --------------------------------------------------------

struct ExportArgs {
  std::string from;
  std::string out_dir;
};

int cmd_export_bundle(const ExportArgs& a, std::ostream& out) {
  const fs::path from = a.from;
  for (const char* required : {"R.f32", "R.json", "L.f32", "L.json", "source.png", "decompose.json"}) {
    if (!fs::exists(from / required)) throw IoError("missing decompose output: " + (from / required).string());
  }
  const json summary = read_json(from / "decompose.json");
  const ScalarField reflectance = rescale_unit(load_raw_field(from / "R.f32"));
  const ScalarField illumination = load_raw_field(from / "L.f32");

  const fs::path dir = a.out_dir;
  ensure_directory(dir);
  save_raw_field(reflectance, dir / "reflectance.f32");
  save_raw_field(illumination, dir / "illumination.f32");
  save_image(reflectance, dir / "reflectance.png");
  save_image(rescale_unit(illumination), dir / "illumination.png");
  if (fs::absolute(from / "source.png") != fs::absolute(dir / "source.png")) {
    fs::copy_file(from / "source.png", dir / "source.png", fs::copy_options::overwrite_existing);
  }

  auto field_entry = [](const char* file) {
    return json{{"file", file}, {"dtype", "f32le"}, {"order", "col"}};
  };
  json manifest = {
      {"format", kBundleFormat},
      {"version", kBundleVersion},
      {"id", fingerprint(reflectance)},
      {"created", utc_timestamp()},
      {"width", reflectance.width()},
      {"height", reflectance.height()},
      {"fields", {{"reflectance", field_entry("reflectance.f32")}, {"illumination", field_entry("illumination.f32")}}},
      {"source", "source.png"},
      {"previews", {{"reflectance", "reflectance.png"}, {"illumination", "illumination.png"}}},
      {"meta",
       {{"config", summary.value("config", json::object())},
        {"iterations", summary.value("iterations", 0)},
        {"residual_tail", summary.value("residual_tail", json::array())}}},
  };
  write_json(dir / "manifest.json", manifest);
  out << "bundle " << manifest["id"].get<std::string>() << " written to " << dir.string() << '\n';
  return kSuccess;
}

}  // namespace

fs::path default_presets_file() {
  if (const char* env = std::getenv("ILLUMSEG_PRESETS")) return env;
  return ILLUMSEG_PRESETS_FILE;
}

Preset load_preset(const fs::path& file, const std::string& name) {
  const json table = read_json(file);
  if (!table.contains(name)) throw InvalidArgument("unknown preset '" + name + "' in " + file.string());
  const json& row = table.at(name);
  try {
    return Preset{name, row.at("alpha").get<double>(), row.at("beta").get<double>(), row.at("gamma").get<double>(),
                  row.at("thresholds").get<std::vector<double>>()};
  } catch (const json::exception& e) {
    throw IoError("malformed preset '" + name + "': " + e.what());
  }
}

void apply_config_json(const json& j, pd::SolverConfig& config) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha") config.alpha = value.get<double>();
      else if (key == "beta") config.beta = value.get<double>();
      else if (key == "gamma") config.gamma = value.get<double>();
      else if (key == "mu") config.mu = value.get<double>();
      else if (key == "tau") config.tau = value.get<double>();
      else if (key == "sigma") config.sigma = value.get<double>();
      else if (key == "tol") config.tol = value.get<double>();
      else if (key == "log_floor") config.log_floor = value.get<double>();
      else if (key == "max_iter") config.max_iter = value.get<int>();
      else if (key == "energy_every") config.energy_every = value.get<int>();
      else if (key == "regularizer") config.regularizer = pd::regularizer_from_string(value.get<std::string>());
      else if (key == "dual_ball") {
        const auto v = value.get<std::string>();
        if (v != "exact" && v != "literal") throw InvalidArgument("dual_ball must be exact or literal");
        config.dual_ball = v == "exact" ? pd::DualBall::Exact : pd::DualBall::Literal;
      } else {
        throw InvalidArgument("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config value has the wrong type: ") + e.what());
  }
}

json config_to_json(const pd::SolverConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"gamma", c.gamma},
          {"mu", c.mu},
          {"tau", c.tau},
          {"sigma", c.sigma},
          {"regularizer", pd::to_string(c.regularizer)},
          {"max_iter", c.max_iter},
          {"tol", c.tol},
          {"log_floor", c.log_floor},
          {"dual_ball", c.dual_ball == pd::DualBall::Exact ? "exact" : "literal"},
          {"energy_every", c.energy_every}};
}

seg::Thresholds parse_thresholds(const std::string& text) {
  return seg::Thresholds::from_interior(parse_number_list(text));
}

seg::Thresholds read_thresholds_file(const fs::path& file) {
  const json j = read_json(file);
  try {
    const auto interior = j.at("thresholds").get<std::vector<double>>();
    const seg::Thresholds t = seg::Thresholds::from_interior(interior);
    if (j.contains("K") && j.at("K").get<int>() != t.phases()) {
      throw InvalidArgument("thresholds file: K does not match the number of thresholds");
    }
    return t;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("thresholds file: ") + e.what());
  }
}

ScalarField load_bundle_reflectance(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) {
    const json manifest = read_json(dir / "manifest.json");
    if (manifest.value("format", "") != kBundleFormat || manifest.value("version", 0) != kBundleVersion) {
      throw IoError("unsupported bundle version in " + (dir / "manifest.json").string());
    }
    try {
      return load_raw_field(dir / manifest.at("fields").at("reflectance").at("file").get<std::string>());
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed manifest: ") + e.what());
    }
  }
  if (fs::exists(dir / "R.f32")) return rescale_unit(load_raw_field(dir / "R.f32"));
  throw IoError("no bundle or decompose output in " + dir.string());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage segmentation of images with intensity inhomogeneity"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* decompose = app.add_subcommand("decompose", "Split an image into illumination and reflection");
  decompose->add_option("--in", dec.input, "Input image (PNG or PGM)")->required();
  decompose->add_option("--out", dec.out_dir, "Output directory");
  decompose->add_option("--reg", dec.reg, "Regularizer: tf (tight frame) or tv");
  decompose->add_option("--preset", dec.preset, "Named row of the parameter table");
  decompose->add_option("--presets-file", dec.presets_file, "Preset table (JSON)");
  decompose->add_option("--config", dec.config_file, "Solver config (JSON, keys as SolverConfig fields)");
  decompose->add_option("--alpha", dec.alpha);
  decompose->add_option("--beta", dec.beta);
  decompose->add_option("--gamma", dec.gamma);
  decompose->add_option("--mu", dec.mu);
  decompose->add_option("--tau", dec.tau, "Dual step");
  decompose->add_option("--sigma", dec.sigma, "Primal step");
  decompose->add_option("--max-iter", dec.max_iter);
  decompose->add_option("--tol", dec.tol, "Relative-change tolerance (tv)");
  decompose->add_option("--log-floor", dec.log_floor);
  decompose->add_option("--dual-ball", dec.dual_ball, "exact or literal");
  decompose->add_option("--log", dec.csv, "Iteration CSV path (default <out>/iterations.csv)");

  SegmentArgs sega;
  auto* segment = app.add_subcommand("segment", "Threshold a decomposed reflection into phases");
  segment->add_option("--bundle", sega.bundle, "Decompose output or exported bundle directory")->required();
  segment->add_option("--thresholds", sega.thresholds, "Interior thresholds, e.g. 0.55,0.75");
  segment->add_option("--thresholds-file", sega.thresholds_file, "Thresholds JSON exported by the explorer");
  segment->add_option("--preset", sega.preset, "Take thresholds from a preset row");
  segment->add_option("--presets-file", sega.presets_file);
  segment->add_option("--phases", sega.phases, "Equally spaced thresholds for K phases");
  segment->add_option("--out", sega.out_dir, "Output directory (default: the bundle)");
  segment->add_flag("--overlay", sega.overlay, "Also write overlay.png");
  segment->add_flag("--masks", sega.masks, "Also write one mask per phase");

  ValidateArgs val;
  auto* validate = app.add_subcommand("validate", "Run the operator and solver invariant checks");
  validate->add_option("--sizes", val.sizes, "Comma-separated grid sizes");
  validate->add_option("--seed", val.seed);
  validate->add_option("--draws", val.draws, "Random pixel-update draws");
  validate->add_flag("--inject-fault", val.inject_fault, "Negate one filter tap (checks the checker)")
      ->group("");

  ExportArgs exp;
  auto* export_bundle = app.add_subcommand("export-bundle", "Package decompose outputs for the threshold explorer");
  export_bundle->add_option("--from", exp.from, "Decompose output directory")->required();
  export_bundle->add_option("--out", exp.out_dir, "Bundle directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*decompose) return cmd_decompose(dec, *decompose, out);
    if (*segment) return cmd_segment(sega, out);
    if (*validate) return cmd_validate(val, out);
    if (*export_bundle) return cmd_export_bundle(exp, out);
  } catch (const InvalidArgument& e) {
    return report_error(err, kUsage, e.what());
  } catch (const IoError& e) {
    return report_error(err, kIoFailure, e.what());
  } catch (const NumericError& e) {
    return report_error(err, kNumericFailure, e.what());
  } catch (const fs::filesystem_error& e) {
    return report_error(err, kIoFailure, e.what());
  }
  return kUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args, out, err);
}

}  // namespace illumseg::cli
