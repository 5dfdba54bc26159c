#include "fusion_mammo/cli/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <map>
#include <set>

#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/pipeline/run_config.hpp"
#include "fusion_mammo/pipeline/workflow.hpp"

namespace fusion_mammo::cli {
namespace {

using pipeline::RunConfig;
using pipeline::Workspace;

constexpr const char* kWorkdirEnv = "FUSION_MAMMO_WORKDIR";
constexpr const char* kWorkdirConfig = "run.conf";

// Desk-scale defaults recorded by `synth` so the follow-up stages run in
// minutes rather than hours.
constexpr const char* kSynthProfile = "reduced";
constexpr std::size_t kSynthEpochs = 8;

}  // namespace

const std::vector<SubcommandSpec>& subcommands() {
  static const std::vector<SubcommandSpec> list = {
      {"ingest", "build the dataset manifest from case description CSVs"},
      {"synth", "generate a synthetic two-class dataset"},
      {"train-cnn", "train the convolutional feature network on the train split"},
      {"extract", "extract deep, hog and/or lbp descriptors for every image"},
      {"fuse", "concatenate deep, hog and lbp vectors into fused vectors"},
      {"train-clf", "train a classifier (knn, rf or xgb) on the train split"},
      {"evaluate", "evaluate the trained classifier on the test split"},
      {"report", "render the evaluation report as json, text or svg"},
      {"run", "execute every stage for a configuration"},
  };
  return list;
}

const std::vector<FlagSpec>& flag_registry() {
  static const std::vector<FlagSpec> list = {
      {"", "--workdir", FlagKind::value, "", "work directory holding all artifacts (default $FUSION_MAMMO_WORKDIR, else .)"},
      {"", "--config", FlagKind::value, "", "run configuration file of section.key = value lines"},
      {"", "--set", FlagKind::multi, "", "override one configuration key, e.g. --set xgb.rounds=50 (applied last)"},
      {"", "--threads", FlagKind::value, "", "worker threads for extraction and training (default: all cores)"},
      {"", "--quiet", FlagKind::flag, "", "suppress progress messages"},

      {"ingest", "--csv", FlagKind::multi, "dataset.csv", "case description CSV file (repeatable)"},
      {"ingest", "--image-root", FlagKind::value, "dataset.image_root", "directory the CSV image paths are relative to"},
      {"ingest", "--split-policy", FlagKind::value, "dataset.split_policy", "patient_grouped or stratified"},
      {"ingest", "--test-fraction", FlagKind::value, "dataset.test_fraction", "held-out fraction for seeded splits"},
      {"ingest", "--subset", FlagKind::value, "dataset.subset", "keep a seeded label-stratified subset of this size"},
      {"ingest", "--no-published-split", FlagKind::flag, "dataset.published_split", "ignore split information in the CSVs"},
      {"ingest", "--seed", FlagKind::value, "run.seed", "split seed"},

      {"synth", "--n", FlagKind::value, "dataset.synthetic_n", "number of images (even, at least 20; default 400)"},
      {"synth", "--seed", FlagKind::value, "dataset.synthetic_seed", "generator seed"},

      {"train-cnn", "--profile", FlagKind::value, "cnn.profile", "canonical or reduced"},
      {"train-cnn", "--epochs", FlagKind::value, "cnn.epochs", "training epochs"},
      {"train-cnn", "--batch-size", FlagKind::value, "cnn.batch_size", "mini-batch size"},
      {"train-cnn", "--learning-rate", FlagKind::value, "cnn.learning_rate", "Adam learning rate"},
      {"train-cnn", "--seed", FlagKind::value, "run.seed", "initialisation and shuffling seed"},

      {"extract", "descriptors", FlagKind::positional_multi, "", "any of deep, hog, lbp"},
      {"extract", "--all", FlagKind::flag, "", "deep, hog and lbp, then fuse; trains the network first if none exists"},

      {"train-clf", "classifier", FlagKind::positional, "classifier.kind", "knn, rf or xgb"},
      {"train-clf", "--features", FlagKind::value, "features.set", "deep or fused (default fused)"},
      {"train-clf", "--seed", FlagKind::value, "run.seed", "classifier seed"},

      {"report", "--format", FlagKind::value, "", "json, text or svg (default text)"},

      {"run", "--seed", FlagKind::value, "run.seed", "master seed"},
  };
  return list;
}

std::vector<FlagSpec> flags_for(std::string_view subcommand) {
  std::vector<FlagSpec> out;
  for (const auto& f : flag_registry()) {
    if (f.subcommand.empty() || f.subcommand == subcommand) out.push_back(f);
  }
  return out;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return kExitUsage;
    case ErrorKind::state: return kExitState;
    case ErrorKind::numeric: return kExitNumeric;
    case ErrorKind::dimension:
    case ErrorKind::format:
    case ErrorKind::data:
    case ErrorKind::ingestion:
    case ErrorKind::construction: return kExitData;
  }
  return kExitData;
}

namespace {

struct Parsed {
  // values[flag name] for the selected subcommand
  std::map<std::string, std::vector<std::string>> values;
  std::set<std::string> flags;
};

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

RunConfig resolve_config(const Workspace& ws, const std::string& sub, const Parsed& p) {
  RunConfig cfg;
  if (std::filesystem::exists(ws.root / kWorkdirConfig)) cfg = pipeline::load_run_config(ws.root / kWorkdirConfig);
  if (auto it = p.values.find("--config"); it != p.values.end()) {
    cfg = pipeline::load_run_config(it->second.front());
  }
  for (const auto& f : flags_for(sub)) {
    if (f.config_key.empty()) continue;
    const std::string name(f.name);
    if (f.kind == FlagKind::flag) {
      // The only boolean flag with a key negates it.
      if (p.flags.contains(name)) pipeline::apply_setting(cfg, f.config_key, "false");
      continue;
    }
    if (auto it = p.values.find(name); it != p.values.end() && !it->second.empty()) {
      pipeline::apply_setting(cfg, f.config_key, join(it->second, ","));
    }
  }
  if (auto it = p.values.find("--set"); it != p.values.end()) {
    for (const auto& kv : it->second) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got \"" + kv + "\"");
      pipeline::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  return cfg;
}

int dispatch(const std::string& sub, const Parsed& p, std::ostream& out) {
  Workspace ws;
  if (auto it = p.values.find("--workdir"); it != p.values.end()) {
    ws.root = it->second.front();
  } else if (const char* env = std::getenv(kWorkdirEnv); env != nullptr && *env != '\0') {
    ws.root = env;
  } else {
    ws.root = ".";
  }
  if (auto it = p.values.find("--threads"); it != p.values.end()) {
    ::setenv("FUSION_MAMMO_THREADS", it->second.front().c_str(), 1);
  }
  const bool quiet = p.flags.contains("--quiet");
  const pipeline::Logger log = [&](std::string_view msg) {
    if (!quiet) out << msg << "\n";
  };
  const RunConfig cfg = resolve_config(ws, sub, p);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  if (sub == "ingest") {
    std::filesystem::create_directories(ws.root);
    pipeline::stage_ingest(ws, cfg, log);
  } else if (sub == "synth") {
    const std::size_t n = cfg.synthetic_n > 0 ? cfg.synthetic_n : 400;
    std::filesystem::create_directories(ws.root);
    pipeline::stage_synth(ws, n, cfg.synthetic_seed, log);
    if (!std::filesystem::exists(ws.root / kWorkdirConfig)) {
      RunConfig desk = cfg;
      desk.synthetic_n = n;
      desk.seed = cfg.synthetic_seed;
      desk.profile = kSynthProfile;
      desk.epochs = kSynthEpochs;
      io::write_text_file(ws.root / kWorkdirConfig, pipeline::to_text(desk));
      log("wrote desk-scale defaults to " + (ws.root / kWorkdirConfig).string());
    }
  } else if (sub == "train-cnn") {
    pipeline::stage_train_cnn(ws, cfg, log);
  } else if (sub == "extract") {
    std::set<FeatureTag> tags;
    const bool all = p.flags.contains("--all");
    if (auto it = p.values.find("descriptors"); it != p.values.end()) {
      for (const auto& d : it->second) {
        const FeatureTag t = parse_feature_tag(d);
        if (t == FeatureTag::fused) throw ArgumentError("extract: use `fuse` to build fused vectors");
        tags.insert(t);
      }
    }
    if (all) tags = {FeatureTag::deep, FeatureTag::hog, FeatureTag::lbp};
    if (tags.empty()) throw ArgumentError("extract: name deep, hog and/or lbp, or pass --all");
    if (all && !std::filesystem::exists(ws.network())) {
      log("no trained network yet; running train-cnn first");
      pipeline::stage_train_cnn(ws, cfg, log);
    }
    pipeline::stage_extract(ws, tags, log);
    if (all) pipeline::stage_fuse(ws, log);
  } else if (sub == "fuse") {
    pipeline::stage_fuse(ws, log);
  } else if (sub == "train-clf") {
    pipeline::stage_train_clf(ws, cfg, log);
  } else if (sub == "evaluate") {
    const auto report = pipeline::stage_evaluate(ws, log);
    if (!quiet) out << "\n" << pipeline::report_to_text(report);
  } else if (sub == "report") {
    std::string format = "text";
    if (auto it = p.values.find("--format"); it != p.values.end()) format = it->second.front();
    out << pipeline::stage_report(ws, pipeline::parse_report_format(format));
  } else if (sub == "run") {
    if (!p.values.contains("--config")) throw ArgumentError("run: --config is required");
    std::filesystem::create_directories(ws.root);
    const auto report = pipeline::run_pipeline(ws, cfg, log);
    if (!quiet) out << "\n" << pipeline::report_to_text(report);
  }
  if (!quiet) out << sub << " finished in " << elapsed() << " s\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mammogram classification from fused deep and handcrafted features", "fusion-mammo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  Parsed parsed;
  std::map<std::string, CLI::App*> apps;
  for (const auto& sc : subcommands()) {
    const std::string name(sc.name);
    CLI::App* sub = app.add_subcommand(name, std::string(sc.help));
    apps[name] = sub;
    for (const auto& f : flags_for(name)) {
      const std::string flag(f.name);
      const std::string help(f.help);
      switch (f.kind) {
        case FlagKind::flag:
          sub->add_flag_callback(flag, [&parsed, flag] { parsed.flags.insert(flag); }, help);
          break;
        case FlagKind::value:
          sub->add_option_function<std::string>(
              flag, [&parsed, flag](const std::string& v) { parsed.values[flag] = {v}; }, help);
          break;
        case FlagKind::multi:
        case FlagKind::positional_multi:
          sub->add_option_function<std::vector<std::string>>(
                 flag,
                 [&parsed, flag](const std::vector<std::string>& v) {
                   auto& slot = parsed.values[flag];
                   slot.insert(slot.end(), v.begin(), v.end());
                 },
                 help)
              ->expected(f.kind == FlagKind::multi ? 1 : -1);
          break;
        case FlagKind::positional:
          sub->add_option_function<std::string>(
                 flag, [&parsed, flag](const std::string& v) { parsed.values[flag] = {v}; }, help)
              ->required();
          break;
      }
    }
  }

  std::vector<std::string> argv_storage;
  argv_storage.emplace_back("fusion-mammo");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string chosen;
  for (const auto& [name, sub] : apps) {
    if (sub->parsed()) chosen = name;
  }
  try {
    return dispatch(chosen, parsed, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace fusion_mammo::cli
