// fdi: command-line driver for ingestion, quantification, sweeps and
// new-user detection.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdi/fdi.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code_for(fdi::Errc code) {
  switch (code) {
    case fdi::Errc::kIoError:
    case fdi::Errc::kInfeasibleSeparation:
    case fdi::Errc::kEmptyOverlap:
      return kExitRuntime;
    default:
      return kExitUsage;
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fdi::fail(fdi::Errc::kIoError, "cannot read '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run record written next to each primary output. Timestamps live only
// here, so primary outputs stay byte-identical across reruns.
class Manifest {
 public:
  explicit Manifest(std::string command) {
    j_["command"] = std::move(command);
    j_["tool_version"] = FDI_VERSION;
    j_["started_at"] = utc_now();
    j_["config"] = json::object();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }

  json& config() { return j_["config"]; }

  void input(const fs::path& path) {
    if (fs::is_directory(path)) {
      for (const auto& f : fdi::ingest::snap_files_in(path)) input(f);
      return;
    }
    j_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }

  void output(const fs::path& path) { j_["outputs"].push_back(path.string()); }

  void set(const std::string& key, json value) { j_[key] = std::move(value); }

  void save(const fs::path& path) {
    j_["finished_at"] = utc_now();
    fdi::write_atomically(path, [&](std::ostream& out) { out << j_.dump(2) << '\n'; });
  }

 private:
  json j_;
};

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
  fs::path p = base;
  p += suffix;
  return p;
}

// Options shared by the model-driven commands.
struct ModelFlags {
  std::string combiner = "product";
  std::string weights;  // "", "idf", or a TSV file "feature<TAB>weight"
  double norm = 2.0;

  void add(CLI::App* app) {
    app->add_option("--combiner", combiner, "How feature value and model weight combine")
        ->check(CLI::IsMember({"product", "raw", "logproduct"}));
    app->add_option("--weights", weights, "Model weights: 'idf' or a feature<TAB>weight file");
    app->add_option("--norm", norm, "Exponent of the l_p distance (>= 1)");
  }

  // Fixed weights resolved against a feature space; `idf` stays a flag.
  fdi::distance::DistanceConfig resolve(const fdi::Dataset& space_of, bool* idf) const {
    fdi::distance::DistanceConfig cfg;
    cfg.transform.combiner = fdi::parse_combiner(combiner);
    cfg.norm_p = norm;
    cfg.validate();
    *idf = weights == "idf";
    if (!weights.empty() && !*idf) {
      auto w = std::make_shared<std::vector<double>>(space_of.dimension(), 0.0);
      const auto parsed = fdi::ingest::parse_tsv(weights, true);
      for (const auto& e : parsed.edges) {
        const auto idx = space_of.space().find(e.user);
        if (!idx) fdi::fail(fdi::Errc::kInvalidArgument, "weight for unknown feature '" + e.user + "'");
        (*w)[*idx] = fdi::ingest::detail::parse_double(e.feature).value_or(-1.0);
      }
      fdi::validate_weights(*w);
      cfg.transform.weights = std::move(w);
    }
    return cfg;
  }

  void record(json& j) const {
    j["combiner"] = combiner;
    j["weights"] = weights;
    j["norm"] = norm;
  }
};

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
  std::string format = "tsv";
  std::vector<std::string> inputs;
  std::string out;
  std::string role = "training";
  bool strict = false;
  bool no_domain = false;
  bool no_path = false;
};

int cmd_ingest(const IngestArgs& a) {
  Manifest manifest("ingest");
  std::vector<fdi::Edge> edges;
  std::size_t malformed = 0, skipped = 0;
  if (a.format == "tsv") {
    for (const auto& in : a.inputs) {
      auto r = fdi::ingest::parse_tsv(in, a.strict);
      for (const auto& m : r.malformed) std::cerr << in << ":" << m.line << ": " << m.reason << '\n';
      malformed += r.malformed.size();
      edges.insert(edges.end(), r.edges.begin(), r.edges.end());
    }
  } else if (a.format == "snap") {
    std::vector<fs::path> files;
    for (const auto& in : a.inputs) {
      if (fs::is_directory(in)) {
        for (auto& f : fdi::ingest::snap_files_in(in)) files.push_back(std::move(f));
      } else {
        files.emplace_back(in);
      }
    }
    edges = fdi::ingest::parse_snap_ego(files);
  } else {
    std::vector<fdi::ingest::HttpRecord> records;
    for (const auto& in : a.inputs) {
      std::vector<fdi::ingest::MalformedLine> bad;
      auto r = fdi::ingest::parse_http_log(in, a.strict, &bad);
      for (const auto& m : bad) std::cerr << in << ":" << m.line << ": " << m.reason << '\n';
      malformed += bad.size();
      records.insert(records.end(), r.begin(), r.end());
    }
    fdi::ingest::HttpOptions opt;
    opt.domain = !a.no_domain;
    opt.path = !a.no_path;
    auto features = fdi::ingest::extract_http_features(records, opt);
    skipped = features.skipped;
    if (skipped > 0) std::cerr << "warning: skipped " << skipped << " record(s) with unparseable URLs\n";
    edges = std::move(features.edges);
  }
  const fdi::Role role = a.role == "target" ? fdi::Role::kTarget : fdi::Role::kTraining;
  const fdi::Dataset d = fdi::build_dataset(edges, role);
  fdi::archive::save(a.out, d);

  for (const auto& in : a.inputs) manifest.input(in);
  manifest.output(a.out);
  manifest.config() = {{"format", a.format}, {"role", a.role}, {"strict", a.strict},
                       {"domain", !a.no_domain}, {"path", !a.no_path}};
  manifest.set("summary", {{"users", d.size()},
                           {"features", d.dimension()},
                           {"relationships", d.relationship_count()},
                           {"malformed_lines", malformed},
                           {"skipped_records", skipped}});
  manifest.save(with_suffix(a.out, ".manifest.json"));
  std::cout << "users " << d.size() << "\nfeatures " << d.dimension() << "\nrelationships "
            << d.relationship_count() << '\n';
  return kExitOk;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  fdi::ingest::SynthSpec spec;
  long long gamma = -1;
  std::string out;
};

int cmd_synth(SynthArgs a, std::uint64_t seed) {
  a.spec.seed = seed;
  if (a.gamma >= 0) a.spec.gamma_separation = static_cast<std::size_t>(a.gamma);
  const fdi::Dataset d = fdi::ingest::synth_generate(a.spec);
  fdi::archive::save(a.out, d);
  Manifest manifest("synth");
  manifest.config() = {{"users", a.spec.n_users},
                       {"features", a.spec.n_features},
                       {"p_feature", a.spec.p_feature},
                       {"gamma_separation", a.gamma},
                       {"max_attempts", a.spec.max_attempts},
                       {"seed", seed}};
  manifest.output(a.out);
  manifest.save(with_suffix(a.out, ".manifest.json"));
  return kExitOk;
}

// ---- stats -----------------------------------------------------------------

int cmd_stats(const std::string& dataset, const std::string& out) {
  const fdi::Dataset d = fdi::archive::read(dataset);
  auto write = [&](std::ostream& os) {
    os << "histogram,degree,count\n";
    for (const auto& [deg, count] : fdi::user_degree_histogram(d)) os << "user," << deg << ',' << count << '\n';
    for (const auto& [deg, count] : fdi::feature_degree_histogram(d)) {
      os << "feature," << deg << ',' << count << '\n';
    }
  };
  if (out.empty()) {
    write(std::cout);
  } else {
    fdi::write_atomically(out, write);
  }
  std::cerr << "users " << d.size() << " features " << d.dimension() << " relationships "
            << d.relationship_count() << '\n';
  return kExitOk;
}

// ---- quantify --------------------------------------------------------------

struct QuantifyArgs {
  std::string dataset;
  std::string model = "binary";
  double p = 0.9;
  std::size_t k = 1;
  double delta = 0.5;
  double xi = 0.5;
  double slack = 1.0;
  std::size_t trials = 30;
  std::size_t jobs = 1;
  std::string out;
  ModelFlags flags;
};

// Target replica for the binary model: every one of the N coordinates keeps
// its value with probability p and flips otherwise.
fdi::Dataset perturb_binary(const fdi::Dataset& u, double p, std::uint64_t seed) {
  fdi::Rng rng(seed);
  std::vector<fdi::SparseProfile> out;
  out.reserve(u.size());
  for (const auto& x : u.profiles()) {
    std::vector<fdi::Entry> entries;
    for (std::uint32_t f = 0; f < u.dimension(); ++f) {
      const bool has = x.weight(f) != 0.0;
      const bool keep = fdi::bernoulli(rng, p);
      if (has == keep) entries.push_back({f, 1.0});
    }
    out.emplace_back(x.user(), std::move(entries));
  }
  return fdi::Dataset(u.space_ptr(), std::move(out), fdi::Role::kTarget);
}

int cmd_quantify(const QuantifyArgs& a, std::uint64_t seed) {
  const fdi::Dataset raw = fdi::archive::read(a.dataset);
  const auto kind = fdi::harness::parse_model(a.model);
  const std::uint64_t u_seed = fdi::derive_seed(seed, {0});
  const std::uint64_t v_seed = fdi::derive_seed(seed, {1});
  fdi::QuantReport report;
  json extra = json::object();

  if (kind == fdi::ModelKind::kBinary) {
    const fdi::binary::BinaryParams params(a.p, static_cast<double>(raw.dimension()), a.k, a.delta);
    const fdi::Dataset u = fdi::binary_view(raw);
    const fdi::Dataset v = perturb_binary(u, a.p, v_seed);
    report = fdi::binary::delta_k_condition(u, v, params);
  } else {
    bool idf = false;
    fdi::distance::DistanceConfig cfg = a.flags.resolve(raw, &idf);
    const fdi::Dataset u = fdi::sample_replica(raw, a.p, u_seed, fdi::Role::kTraining);
    const fdi::Dataset v = fdi::sample_replica(raw, a.p, v_seed, fdi::Role::kTarget);
    if (idf) cfg.transform.weights = fdi::inverse_feature_frequency(u);
    if (kind == fdi::ModelKind::kDistance) {
      const auto view = fdi::overlap(u, v);
      const auto stats = fdi::distance::estimate_target_stats(raw, view.users, a.p, a.trials,
                                                              fdi::derive_seed(seed, {2}), cfg, a.jobs);
      report = fdi::distance::delta_k_condition(u, v, a.k, a.delta, stats, static_cast<double>(raw.dimension()));
    } else {
      fdi::distribution::CosineCheckOptions opt;
      opt.xi = a.xi;
      opt.slack = a.slack;
      report = fdi::distribution::delta_k_condition(u, v, a.k, a.delta, cfg.transform, opt);
    }
  }

  const fs::path out = a.out.empty() ? fs::path("quantify") : fs::path(a.out);
  const fs::path csv = with_suffix(out, ".csv");
  const fs::path summary = with_suffix(out, ".json");
  fdi::write_atomically(csv, [&](std::ostream& os) { fdi::write_quant_csv(os, report); });
  const json verdict = fdi::quant_summary_json(report);
  fdi::write_atomically(summary, [&](std::ostream& os) { os << verdict.dump(2) << '\n'; });

  Manifest manifest("quantify");
  manifest.input(a.dataset);
  manifest.output(csv);
  manifest.output(summary);
  json& c = manifest.config();
  c = {{"model", a.model}, {"p", a.p},         {"k", a.k},           {"delta", a.delta},
       {"xi", a.xi},       {"slack", a.slack}, {"trials", a.trials}, {"seed", seed}};
  a.flags.record(c);
  manifest.set("seeds", {{"training", u_seed}, {"target", v_seed}, {"stats", fdi::derive_seed(seed, {2})}});
  manifest.save(with_suffix(out, ".manifest.json"));
  std::cout << verdict.dump(2) << '\n';
  return kExitOk;
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string dataset;
  std::string model = "distance";
  std::vector<double> p_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> k_grid{10};
  std::size_t reps = 10;
  std::size_t jobs = 1;
  std::string out;
  ModelFlags flags;
};

int cmd_sweep(const SweepArgs& a, std::uint64_t seed) {
  const fdi::Dataset raw = fdi::archive::read(a.dataset);
  fdi::harness::SweepConfig cfg;
  cfg.p_grid = a.p_grid;
  cfg.k_grid = a.k_grid;
  cfg.reps = a.reps;
  cfg.seed = seed;
  cfg.jobs = a.jobs;
  cfg.model.kind = fdi::harness::parse_model(a.model);
  cfg.model.distance = a.flags.resolve(raw, &cfg.model.idf);
  const auto result = fdi::harness::sweep(raw, cfg);
  for (const auto& c : result.cells) {
    if (!c.error.empty()) std::cerr << "warning: cell p=" << c.p << " K=" << c.k_spec << ": " << c.error << '\n';
    if (c.error.empty() && c.reps_used < cfg.reps) {
      std::cerr << "warning: cell p=" << c.p << " K=" << c.k << ": " << (cfg.reps - c.reps_used)
                << " rep(s) with empty overlap excluded\n";
    }
  }

  const fs::path out = a.out.empty() ? fs::path("sweep") : fs::path(a.out);
  const fs::path csv = with_suffix(out, ".csv");
  fdi::write_atomically(csv, [&](std::ostream& os) { fdi::harness::write_sweep_csv(os, result); });
  Manifest manifest("sweep");
  manifest.input(a.dataset);
  manifest.output(csv);
  manifest.config() = fdi::harness::sweep_json(cfg, result);
  a.flags.record(manifest.config());
  manifest.save(with_suffix(out, ".manifest.json"));
  fdi::harness::write_sweep_csv(std::cout, result);
  return kExitOk;
}

// ---- detect ----------------------------------------------------------------

struct DetectArgs {
  std::string training;
  std::string target;
  std::string mode = "distance";
  double xi = 0.5;
  double p = 0.9;  // at 1.0 the matched-pair mean is 0 and the D_min clause fires for everyone
  std::size_t trials = 30;
  std::size_t jobs = 1;
  std::string out;
  ModelFlags flags;
};

int cmd_detect(const DetectArgs& a, std::uint64_t seed) {
  const fdi::Dataset u = fdi::archive::read(a.training);
  const fdi::Dataset v = fdi::archive::read(a.target);
  if (u.size() == 0) fdi::fail(fdi::Errc::kEmptyTraining, "training dataset has no users");
  if (!fdi::same_space(u, v)) fdi::fail(fdi::Errc::kSpaceMismatch, "datasets use different feature spaces");
  bool idf = false;
  fdi::distance::DistanceConfig cfg = a.flags.resolve(u, &idf);
  if (idf) cfg.transform.weights = fdi::inverse_feature_frequency(u);
  const auto mode = fdi::new_user::parse_mode(a.mode);
  const auto th = fdi::new_user::estimate_thresholds(u, a.p, a.trials, seed, mode, cfg, a.xi);
  const auto rows = fdi::new_user::detect_all(v, u, th, cfg, a.jobs);

  const fs::path out = a.out.empty() ? fs::path("detect") : fs::path(a.out);
  const fs::path csv = with_suffix(out, ".csv");
  fdi::write_atomically(csv, [&](std::ostream& os) { fdi::new_user::write_detection_csv(os, rows, mode); });
  Manifest manifest("detect");
  manifest.input(a.training);
  manifest.input(a.target);
  manifest.output(csv);
  json& c = manifest.config();
  c = {{"mode", a.mode}, {"xi", a.xi}, {"p", a.p}, {"trials", a.trials}, {"seed", seed}};
  a.flags.record(c);
  manifest.set("thresholds", {{"mu_star_d", th.mu_star_d},
                              {"mu_star_s", th.mu_star_s},
                              {"zeta", th.zeta},
                              {"samples", th.samples}});
  manifest.save(with_suffix(out, ".manifest.json"));
  std::size_t flagged = 0;
  for (const auto& r : rows) flagged += r.is_new ? 1 : 0;
  std::cout << "flagged " << flagged << " of " << rows.size() << " target user(s)\n";
  return kExitOk;
}

// Config files are flat key=value lists; keys are routed to the subcommand
// being run so they can mirror its flag names.
class SubcommandConfig : public CLI::ConfigTOML {
 public:
  explicit SubcommandConfig(std::string sub) : sub_(std::move(sub)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    if (sub_.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty()) item.parents.push_back(sub_);
    }
    return items;
  }

 private:
  std::string sub_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-based data inferability toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(FDI_VERSION));
  std::uint64_t seed = 0;

  app.set_config("--config", "", "Flat key=value file; flags given on the command line win");
  app.fallthrough();
  auto with_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Base seed for all randomness")->envname("SEED");
  };

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse raw input into a dataset archive");
  with_common(ingest_cmd);
  ingest_cmd->add_option("--format", ingest.format)->check(CLI::IsMember({"tsv", "snap", "http"}));
  ingest_cmd->add_option("--out", ingest.out, "Archive to write")->required();
  ingest_cmd->add_option("--role", ingest.role)->check(CLI::IsMember({"training", "target"}));
  ingest_cmd->add_flag("--strict", ingest.strict, "Fail on the first malformed line");
  ingest_cmd->add_flag("--no-domain", ingest.no_domain, "http: omit domain features");
  ingest_cmd->add_flag("--no-path", ingest.no_path, "http: omit path-token features");
  ingest_cmd->add_option("inputs", ingest.inputs, "Input files (snap: files or directories)")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic binary dataset");
  with_common(synth_cmd);
  synth_cmd->add_option("--users", synth.spec.n_users)->required();
  synth_cmd->add_option("--features", synth.spec.n_features)->required();
  synth_cmd->add_option("--p-feature", synth.spec.p_feature);
  synth_cmd->add_option("--gamma", synth.gamma, "Minimum pairwise XOR distance");
  synth_cmd->add_option("--max-attempts", synth.spec.max_attempts);
  synth_cmd->add_option("--out", synth.out)->required();

  std::string stats_dataset, stats_out;
  auto* stats_cmd = app.add_subcommand("stats", "User and feature degree histograms");
  with_common(stats_cmd);
  stats_cmd->add_option("dataset", stats_dataset)->required();
  stats_cmd->add_option("--out", stats_out, "CSV file (default: stdout)");

  QuantifyArgs quantify;
  auto* quantify_cmd = app.add_subcommand("quantify", "Check the (delta, K) inferability condition");
  with_common(quantify_cmd);
  quantify_cmd->add_option("dataset", quantify.dataset)->required();
  quantify_cmd->add_option("--model", quantify.model)->check(CLI::IsMember({"binary", "distance", "distribution"}));
  quantify_cmd->add_option("--p", quantify.p, "Preservation / sampling probability");
  quantify_cmd->add_option("--k", quantify.k);
  quantify_cmd->add_option("--delta", quantify.delta);
  quantify_cmd->add_option("--xi", quantify.xi);
  quantify_cmd->add_option("--slack", quantify.slack, "distribution: factor on the per-term bounds");
  quantify_cmd->add_option("--trials", quantify.trials, "distance: sampled draws per pair");
  quantify_cmd->add_option("--jobs", quantify.jobs);
  quantify_cmd->add_option("--out", quantify.out, "Output prefix");
  quantify.flags.add(quantify_cmd);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Empirical delta over a (p, K) grid");
  with_common(sweep_cmd);
  sweep_cmd->add_option("dataset", sweep.dataset)->required();
  sweep_cmd->add_option("--model", sweep.model)->check(CLI::IsMember({"binary", "distance", "distribution"}));
  sweep_cmd->add_option("--p", sweep.p_grid, "Sampling probabilities")->delimiter(',');
  sweep_cmd->add_option("--k", sweep.k_grid, "K values; below 1 means a fraction of n")->delimiter(',');
  sweep_cmd->add_option("--reps", sweep.reps);
  sweep_cmd->add_option("--jobs", sweep.jobs);
  sweep_cmd->add_option("--out", sweep.out, "Output prefix");
  sweep.flags.add(sweep_cmd);

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "Flag target users with no training counterpart");
  with_common(detect_cmd);
  detect_cmd->add_option("training", detect.training)->required();
  detect_cmd->add_option("target", detect.target)->required();
  detect_cmd->add_option("--mode", detect.mode)->check(CLI::IsMember({"distance", "distribution"}));
  detect_cmd->add_option("--xi", detect.xi);
  detect_cmd->add_option("--p", detect.p, "Sampling rate used to estimate the thresholds");
  detect_cmd->add_option("--trials", detect.trials);
  detect_cmd->add_option("--jobs", detect.jobs);
  detect_cmd->add_option("--out", detect.out, "Output prefix");
  detect.flags.add(detect_cmd);

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (app.get_subcommand_no_throw(arg) != nullptr) {
      app.config_formatter(std::make_shared<SubcommandConfig>(arg));
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*synth_cmd) return cmd_synth(synth, seed);
    if (*stats_cmd) return cmd_stats(stats_dataset, stats_out);
    if (*quantify_cmd) return cmd_quantify(quantify, seed);
    if (*sweep_cmd) return cmd_sweep(sweep, seed);
    if (*detect_cmd) return cmd_detect(detect, seed);
  } catch (const fdi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
