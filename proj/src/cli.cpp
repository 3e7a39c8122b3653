#include "feffect/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "feffect/corpus.hpp"
#include "feffect/estimators.hpp"
#include "feffect/evalx.hpp"
#include "feffect/feag.hpp"
#include "feffect/models.hpp"
#include "feffect/sweep.hpp"
#include "feffect/util.hpp"
#include "json.hpp"

namespace feffect::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kTool = "feffect";

std::vector<std::string> reversed(std::vector<std::string> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

// Runs a configured CLI11 app over the remaining args; returns an exit code
// or -1 when parsing succeeded and the command body should run.
int parse_args(CLI::App& app, std::vector<std::string> args) {
  try {
    app.parse(reversed(std::move(args)));
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << kTool << ": " << e.what() << "\n\n" << app.help();
    return 2;
  }
  return -1;
}

std::vector<std::int64_t> parse_seed_list(const std::string& text) {
  std::vector<std::int64_t> seeds;
  for (const auto& part : split_string(text, ',')) {
    if (part.empty()) continue;
    seeds.push_back(std::stoll(part));
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> vals;
  for (const auto& part : split_string(text, ',')) {
    if (part.empty()) continue;
    vals.push_back(std::stod(part));
  }
  if (vals.empty()) throw ConfigError("numeric list is empty");
  return vals;
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path.string() + "' for writing");
  out << content;
}

void write_run_config(const fs::path& path, const std::string& command, const ordered_json& opts) {
  ordered_json j;
  j["command"] = command;
  j["options"] = opts;
  write_text_file(path, j.dump(2) + "\n");
}

// Loads an emitted run_config.json into an options json before flag parsing,
// so command-line flags override recorded values.
ordered_json load_run_config(const std::string& path, const std::string& command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file parse error: " + std::string(e.what()));
  }
  if (!j.contains("command") || j.at("command").get<std::string>() != command) {
    throw ConfigError("config file was emitted by a different subcommand");
  }
  return j.at("options");
}

std::string find_config_flag(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Shared training/estimation knobs.

struct TrainFlags {
  double lr = 0.05;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lambda_rr = 1.0;
  double weight_decay = 1e-4;
  double eps_clip = 0.01;
  std::string mode = "linear";
  std::size_t hidden = 64;
  bool select_best = false;
  std::uint32_t dim = 65536;
  std::uint64_t hash_seed = 0;

  void bind(CLI::App& app) {
    app.add_option("--lr", lr, "learning rate (linearly decaying)");
    app.add_option("--epochs", epochs, "training epochs");
    app.add_option("--batch-size", batch_size, "mini-batch size");
    app.add_option("--lambda-rr", lambda_rr, "Riesz loss weight in two-head training");
    app.add_option("--weight-decay", weight_decay, "decoupled weight decay");
    app.add_option("--eps-clip", eps_clip, "propensity clip");
    app.add_option("--model-mode", mode, "model mode: linear|mlp")
        ->check(CLI::IsMember({"linear", "mlp"}));
    app.add_option("--hidden", hidden, "hidden width (mlp mode)");
    app.add_flag("--select-best", select_best, "pick the best epoch by heldout BCE");
    app.add_option("--dim", dim, "hashed feature dimension (power of two)");
    app.add_option("--hash-seed", hash_seed, "feature hashing seed");
  }

  TrainConfig train_config(std::int64_t seed) const {
    TrainConfig cfg;
    cfg.lr = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.lambda_rr = lambda_rr;
    cfg.weight_decay = weight_decay;
    cfg.eps_clip = eps_clip;
    cfg.mode = mode_from_name(mode);
    cfg.hidden = hidden;
    cfg.select_best = select_best;
    cfg.seed = seed;
    return cfg;
  }

  FeaturizerConfig featurizer_config() const {
    FeaturizerConfig f;
    f.dim = dim;
    f.hash_seed = hash_seed;
    return f;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["lr"] = lr;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lambda_rr"] = lambda_rr;
    j["weight_decay"] = weight_decay;
    j["eps_clip"] = eps_clip;
    j["mode"] = mode;
    j["hidden"] = hidden;
    j["select_best"] = select_best;
    j["dim"] = dim;
    j["hash_seed"] = hash_seed;
    return j;
  }

  void from_json(const ordered_json& j) {
    lr = j.value("lr", lr);
    epochs = j.value("epochs", epochs);
    batch_size = j.value("batch_size", batch_size);
    lambda_rr = j.value("lambda_rr", lambda_rr);
    weight_decay = j.value("weight_decay", weight_decay);
    eps_clip = j.value("eps_clip", eps_clip);
    mode = j.value("mode", mode);
    hidden = j.value("hidden", hidden);
    select_best = j.value("select_best", select_best);
    dim = j.value("dim", dim);
    hash_seed = j.value("hash_seed", hash_seed);
  }
};

struct EstimateFlags {
  TrainFlags train;
  double heldout_frac = 0.5;
  int kfold = 0;
  bool self_normalize = false;

  void bind(CLI::App& app) {
    train.bind(app);
    app.add_option("--heldout-frac", heldout_frac, "fit fraction of the estimation split");
    app.add_option("--kfold", kfold, "cross-fitting folds (0 = single split)");
    app.add_flag("--self-normalize", self_normalize, "self-normalize propensity weights");
  }

  EstimateOptions options(std::int64_t seed) const {
    EstimateOptions o;
    o.train = train.train_config(seed);
    o.featurizer = train.featurizer_config();
    o.heldout_frac = heldout_frac;
    o.kfold = kfold;
    o.self_normalize = self_normalize;
    return o;
  }

  ordered_json to_json() const {
    ordered_json j = train.to_json();
    j["heldout_frac"] = heldout_frac;
    j["kfold"] = kfold;
    j["self_normalize"] = self_normalize;
    return j;
  }

  void from_json(const ordered_json& j) {
    train.from_json(j);
    heldout_frac = j.value("heldout_frac", heldout_frac);
    kfold = j.value("kfold", kfold);
    self_normalize = j.value("self_normalize", self_normalize);
  }
};

// ---------------------------------------------------------------------------
// gen ss / gen subsampled

struct GenSsFlags {
  std::size_t n = 5000;
  double tau = 0.5;
  double eps = 0.05;
  double signal_strength = 0.9;
  double base_label_acc = 0.78;
  std::size_t tokens_per_doc = 12;
  std::string treated_token = "treated";
  std::string untreated_token = "untreated";
  std::string effect_token;
  double effect_delta = 0.0;
  double effect_rate = 0.5;
  std::int64_t seed = 0;
  std::string out = "corpus.jsonl";

  void bind(CLI::App& app) {
    app.add_option("--n", n, "number of documents");
    app.add_option("--tau", tau, "true feature effect");
    app.add_option("--eps", eps, "overlap: P(T != W)");
    app.add_option("--signal-strength", signal_strength, "P(covariate token matches W pool)");
    app.add_option("--base-label-acc", base_label_acc, "P(base label == W)");
    app.add_option("--tokens-per-doc", tokens_per_doc, "covariate tokens per document");
    app.add_option("--treated-token", treated_token, "prefix token for T=1");
    app.add_option("--untreated-token", untreated_token, "prefix token for T=0");
    app.add_option("--effect-token", effect_token, "optional direct-effect hook token");
    app.add_option("--effect-delta", effect_delta, "hook token's additive effect on P(Y=1)");
    app.add_option("--effect-rate", effect_rate, "hook token insertion probability");
    app.add_option("--seed", seed, "generation seed");
    app.add_option("--out", out, "output corpus path (JSONL)");
  }

  GenConfigSS config() const {
    GenConfigSS cfg;
    cfg.n = n;
    cfg.tau = tau;
    cfg.eps = eps;
    cfg.signal_strength = signal_strength;
    cfg.base_label_acc = base_label_acc;
    cfg.tokens_per_doc = tokens_per_doc;
    cfg.vocab.treated_token = treated_token;
    cfg.vocab.untreated_token = untreated_token;
    if (!effect_token.empty()) {
      cfg.effect_token = EffectTokenConfig{effect_token, effect_delta, effect_rate};
    }
    return cfg;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["n"] = n;
    j["tau"] = tau;
    j["eps"] = eps;
    j["signal_strength"] = signal_strength;
    j["base_label_acc"] = base_label_acc;
    j["tokens_per_doc"] = tokens_per_doc;
    j["treated_token"] = treated_token;
    j["untreated_token"] = untreated_token;
    j["effect_token"] = effect_token;
    j["effect_delta"] = effect_delta;
    j["effect_rate"] = effect_rate;
    j["seed"] = seed;
    j["out"] = out;
    return j;
  }

  void from_json(const ordered_json& j) {
    n = j.value("n", n);
    tau = j.value("tau", tau);
    eps = j.value("eps", eps);
    signal_strength = j.value("signal_strength", signal_strength);
    base_label_acc = j.value("base_label_acc", base_label_acc);
    tokens_per_doc = j.value("tokens_per_doc", tokens_per_doc);
    treated_token = j.value("treated_token", treated_token);
    untreated_token = j.value("untreated_token", untreated_token);
    effect_token = j.value("effect_token", effect_token);
    effect_delta = j.value("effect_delta", effect_delta);
    effect_rate = j.value("effect_rate", effect_rate);
    seed = j.value("seed", seed);
    out = j.value("out", out);
  }
};

int cmd_gen_ss(std::vector<std::string> args) {
  GenSsFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "gen ss"));
  CLI::App app{"generate a semi-synthetic corpus with known feature effect", "feffect gen ss"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const Corpus corpus = generate_ss(flags.config(), flags.seed);
  write_jsonl(corpus, flags.out);
  write_run_config(flags.out + ".run_config.json", "gen ss", flags.to_json());
  std::cout << "wrote " << corpus.size() << " docs to " << flags.out << '\n';
  return 0;
}

struct GenSubFlags {
  std::size_t n_raw = 50000;
  std::string trigger = "kill";
  double keep_t1_w0 = 0.05;
  double keep_t0 = 0.10;
  double p_trigger_w1 = 0.6;
  double p_trigger_w0 = 0.1;
  double signal_strength = 0.9;
  double base_label_acc = 0.78;
  std::size_t tokens_per_doc = 12;
  std::int64_t seed = 0;
  std::string out = "corpus.jsonl";

  void bind(CLI::App& app) {
    app.add_option("--n-raw", n_raw, "raw documents before subsampling");
    app.add_option("--trigger", trigger, "treatment trigger token");
    app.add_option("--keep-t1-w0", keep_t1_w0, "retention prob for (T=1, W=0)");
    app.add_option("--keep-t0", keep_t0, "retention prob for T=0");
    app.add_option("--p-trigger-w1", p_trigger_w1, "trigger insertion prob when W=1");
    app.add_option("--p-trigger-w0", p_trigger_w0, "trigger insertion prob when W=0");
    app.add_option("--signal-strength", signal_strength, "P(covariate token matches W pool)");
    app.add_option("--base-label-acc", base_label_acc, "P(label == W)");
    app.add_option("--tokens-per-doc", tokens_per_doc, "covariate tokens per document");
    app.add_option("--seed", seed, "generation seed");
    app.add_option("--out", out, "output corpus path (JSONL)");
  }

  GenConfigSub config() const {
    GenConfigSub cfg;
    cfg.n_raw = n_raw;
    cfg.trigger_token = trigger;
    cfg.keep_t1_w0 = keep_t1_w0;
    cfg.keep_t0 = keep_t0;
    cfg.p_trigger_w1 = p_trigger_w1;
    cfg.p_trigger_w0 = p_trigger_w0;
    cfg.signal_strength = signal_strength;
    cfg.base_label_acc = base_label_acc;
    cfg.tokens_per_doc = tokens_per_doc;
    return cfg;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["n_raw"] = n_raw;
    j["trigger"] = trigger;
    j["keep_t1_w0"] = keep_t1_w0;
    j["keep_t0"] = keep_t0;
    j["p_trigger_w1"] = p_trigger_w1;
    j["p_trigger_w0"] = p_trigger_w0;
    j["signal_strength"] = signal_strength;
    j["base_label_acc"] = base_label_acc;
    j["tokens_per_doc"] = tokens_per_doc;
    j["seed"] = seed;
    j["out"] = out;
    return j;
  }

  void from_json(const ordered_json& j) {
    n_raw = j.value("n_raw", n_raw);
    trigger = j.value("trigger", trigger);
    keep_t1_w0 = j.value("keep_t1_w0", keep_t1_w0);
    keep_t0 = j.value("keep_t0", keep_t0);
    p_trigger_w1 = j.value("p_trigger_w1", p_trigger_w1);
    p_trigger_w0 = j.value("p_trigger_w0", p_trigger_w0);
    signal_strength = j.value("signal_strength", signal_strength);
    base_label_acc = j.value("base_label_acc", base_label_acc);
    tokens_per_doc = j.value("tokens_per_doc", tokens_per_doc);
    seed = j.value("seed", seed);
    out = j.value("out", out);
  }
};

int cmd_gen_subsampled(std::vector<std::string> args) {
  GenSubFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "gen subsampled"));
  CLI::App app{"generate a subsampled-correlation corpus", "feffect gen subsampled"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const Corpus corpus = generate_subsampled(flags.config(), flags.seed);
  write_jsonl(corpus, flags.out);
  write_run_config(flags.out + ".run_config.json", "gen subsampled", flags.to_json());
  std::cout << "wrote " << corpus.size() << " docs to " << flags.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateCmdFlags {
  std::string corpus;
  std::string feature = "prefix:treated,untreated";
  std::string seeds = "0,11,44";
  EstimateFlags est;
  int threads = 1;
  std::string out_dir = ".";

  void bind(CLI::App& app) {
    app.add_option("--corpus", corpus, "input corpus (JSONL)")->required();
    app.add_option("--feature", feature, "feature spec: prefix:<t>,<u> or presence:<token>");
    app.add_option("--seeds", seeds, "comma-separated estimation seeds");
    est.bind(app);
    app.add_option("--threads", threads, "parallelism across seeds");
    app.add_option("--out-dir", out_dir, "output directory");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["corpus"] = corpus;
    j["feature"] = feature;
    j["seeds"] = seeds;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["estimation"] = est.to_json();
    return j;
  }

  void from_json(const ordered_json& j) {
    corpus = j.value("corpus", corpus);
    feature = j.value("feature", feature);
    seeds = j.value("seeds", seeds);
    threads = j.value("threads", threads);
    out_dir = j.value("out_dir", out_dir);
    if (j.contains("estimation")) est.from_json(j.at("estimation"));
  }
};

int cmd_estimate(std::vector<std::string> args) {
  EstimateCmdFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "estimate"));
  CLI::App app{"estimate a feature's effect with direct, propensity-DR and Riesz-DR estimators",
               "feffect estimate"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (!config.empty()) {
    app.get_option("--corpus")->required(false);
  }
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const Corpus corpus = read_jsonl(flags.corpus);
  const FeatureSpec spec = FeatureSpec::parse(0, flags.feature);
  const auto seeds = parse_seed_list(flags.seeds);
  const EffectEstimateSet set =
      estimate_feature_effect(corpus, spec, flags.est.options(seeds.front()), seeds, flags.threads);

  const std::string csv = effect_estimates_csv({set});
  fs::create_directories(flags.out_dir);
  write_text_file(fs::path(flags.out_dir) / "effects.csv", csv);
  write_run_config(fs::path(flags.out_dir) / "run_config.json", "estimate", flags.to_json());

  std::cout << "method          estimate     std_error   mae_x100\n";
  for (const auto* e : {&set.direct, &set.dr_propensity, &set.dr_riesz}) {
    std::string name = method_name(e->method);
    name.resize(15, ' ');
    std::cout << name << ' ' << fmt_fixed(e->value, 6) << "    " << fmt_fixed(e->std_error(), 6);
    if (e->mae_vs_truth.has_value()) std::cout << "    " << fmt_fixed(*e->mae_vs_truth * 100.0, 4);
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainCmdFlags {
  std::string mode = "erm";  // erm | feag | reg | remove-token | subsample
  std::string corpus;
  std::string feature = "prefix:treated,untreated";
  std::string tau_source = "estimate";  // estimate | manual:<value>
  std::string tau_estimator = "dr_riesz";
  std::string est_seeds;  // defaults to --seed
  double lambda = 0.1;
  TrainFlags train;
  EstimateFlags phase1;
  std::int64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";

  void bind(CLI::App& app) {
    app.add_option("--mode", mode, "training mode")
        ->check(CLI::IsMember({"erm", "feag", "reg", "remove-token", "subsample"}));
    app.add_option("--corpus", corpus, "training corpus (JSONL)")->required();
    app.add_option("--feature", feature, "feature spec: prefix:<t>,<u> or presence:<token>");
    app.add_option("--tau-source", tau_source, "feag/reg target effect: estimate or manual:<value>");
    app.add_option("--tau-estimator", tau_estimator, "estimator used by --tau-source estimate")
        ->check(CLI::IsMember({"direct", "dr_propensity", "dr_riesz"}));
    app.add_option("--est-seeds", est_seeds, "phase-1 estimation seeds (default: --seed)");
    app.add_option("--lambda", lambda, "augmentation / regularization weight");
    train.bind(app);
    app.add_option("--seed", seed, "training seed");
    app.add_option("--threads", threads, "parallelism across phase-1 seeds");
    app.add_option("--out-dir", out_dir, "output directory");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["mode"] = mode;
    j["corpus"] = corpus;
    j["feature"] = feature;
    j["tau_source"] = tau_source;
    j["tau_estimator"] = tau_estimator;
    j["est_seeds"] = est_seeds;
    j["lambda"] = lambda;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["training"] = train.to_json();
    return j;
  }

  void from_json(const ordered_json& j) {
    mode = j.value("mode", mode);
    corpus = j.value("corpus", corpus);
    feature = j.value("feature", feature);
    tau_source = j.value("tau_source", tau_source);
    tau_estimator = j.value("tau_estimator", tau_estimator);
    est_seeds = j.value("est_seeds", est_seeds);
    lambda = j.value("lambda", lambda);
    seed = j.value("seed", seed);
    threads = j.value("threads", threads);
    out_dir = j.value("out_dir", out_dir);
    if (j.contains("training")) train.from_json(j.at("training"));
  }
};

double resolve_tau(const TrainCmdFlags& flags, const Corpus& corpus, const FeatureSpec& spec) {
  if (flags.tau_source.rfind("manual:", 0) == 0) {
    return std::stod(flags.tau_source.substr(7));
  }
  if (flags.tau_source != "estimate") {
    throw ConfigError("--tau-source must be 'estimate' or 'manual:<value>'");
  }
  EstimateFlags est;
  est.train = flags.train;
  const auto seeds = flags.est_seeds.empty() ? std::vector<std::int64_t>{flags.seed}
                                             : parse_seed_list(flags.est_seeds);
  const EffectEstimateSet set =
      estimate_feature_effect(corpus, spec, est.options(seeds.front()), seeds, flags.threads);
  if (flags.tau_estimator == "direct") return set.direct.value;
  if (flags.tau_estimator == "dr_propensity") return set.dr_propensity.value;
  return set.dr_riesz.value;
}

int cmd_train(std::vector<std::string> args) {
  TrainCmdFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "train"));
  CLI::App app{"train a classifier: erm, feag, reg, remove-token or subsample", "feffect train"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (!config.empty()) {
    app.get_option("--corpus")->required(false);
  }
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const Corpus corpus = read_jsonl(flags.corpus);
  const TrainConfig cfg = flags.train.train_config(flags.seed);
  const FeaturizerConfig fcfg = flags.train.featurizer_config();
  fs::create_directories(flags.out_dir);

  Classifier clf;
  if (flags.mode == "erm") {
    clf = train_classifier(corpus, cfg, fcfg);
  } else if (flags.mode == "subsample") {
    const Corpus sub = subsample_baseline(corpus, flags.seed);
    clf = train_classifier(sub, cfg, fcfg);
  } else {
    const FeatureSpec spec = FeatureSpec::parse(0, flags.feature);
    if (flags.mode == "remove-token") {
      clf = remove_token_baseline(corpus, spec, cfg, fcfg);
    } else {
      const double tau = resolve_tau(flags, corpus, spec);
      std::cout << "target effect tau = " << fmt_fixed(tau, 6) << '\n';
      if (flags.mode == "feag") {
        const CounterfactualCorpus aug = build_augmented(corpus, {spec}, {tau}, flags.seed);
        write_jsonl(aug, (fs::path(flags.out_dir) / "augmented.jsonl").string());
        clf = train_feag(corpus, aug, flags.lambda, cfg, fcfg);
      } else {  // reg
        clf = train_regularized(corpus, {spec}, {tau}, flags.lambda, cfg, fcfg);
      }
      clf.model.spec = spec;
    }
  }
  if (!clf.model.spec.has_value() && !flags.feature.empty()) {
    clf.model.spec = FeatureSpec::parse(0, flags.feature);
  }

  const std::string model_path = (fs::path(flags.out_dir) / "model.json").string();
  save_classifier(clf, model_path);
  write_run_config(fs::path(flags.out_dir) / "run_config.json", "train", flags.to_json());
  std::cout << "wrote " << model_path << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCmdFlags {
  std::string model;
  std::string corpus;
  std::string feature;  // optional; defaults to the spec stored in the model
  std::string out_dir = ".";

  void bind(CLI::App& app) {
    app.add_option("--model", model, "model file from 'train'")->required();
    app.add_option("--corpus", corpus, "evaluation corpus (JSONL)")->required();
    app.add_option("--feature", feature, "feature spec override");
    app.add_option("--out-dir", out_dir, "output directory");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["model"] = model;
    j["corpus"] = corpus;
    j["feature"] = feature;
    j["out_dir"] = out_dir;
    return j;
  }

  void from_json(const ordered_json& j) {
    model = j.value("model", model);
    corpus = j.value("corpus", corpus);
    feature = j.value("feature", feature);
    out_dir = j.value("out_dir", out_dir);
  }
};

int cmd_eval(std::vector<std::string> args) {
  EvalCmdFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "eval"));
  CLI::App app{"group-wise accuracy and learned effect of a trained classifier", "feffect eval"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (!config.empty()) {
    app.get_option("--model")->required(false);
    app.get_option("--corpus")->required(false);
  }
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const Classifier clf = load_classifier(flags.model);
  const Corpus corpus = read_jsonl(flags.corpus);
  FeatureSpec spec = [&]() {
    if (!flags.feature.empty()) return FeatureSpec::parse(0, flags.feature);
    if (clf.model.spec.has_value()) return *clf.model.spec;
    throw ConfigError("model carries no feature spec; pass --feature");
  }();

  const GroupMetrics gm = group_metrics(clf, corpus, spec);
  fs::create_directories(flags.out_dir);
  write_text_file(fs::path(flags.out_dir) / "metrics.json", group_metrics_json(gm));
  write_text_file(fs::path(flags.out_dir) / "metrics.csv", group_metrics_csv(gm));
  write_run_config(fs::path(flags.out_dir) / "run_config.json", "eval", flags.to_json());
  std::cout << group_metrics_table(gm);
  return 0;
}

// ---------------------------------------------------------------------------
// bias-scan

struct BiasScanCmdFlags {
  std::string corpus;
  std::string tokens;
  std::string seeds = "0,11,44";
  std::size_t min_count = 50;
  EstimateFlags est;
  int threads = 1;
  std::string out_dir = ".";

  void bind(CLI::App& app) {
    app.add_option("--corpus", corpus, "input corpus (JSONL)")->required();
    app.add_option("--tokens", tokens, "comma-separated tokens to scan")->required();
    app.add_option("--seeds", seeds, "estimation seeds");
    app.add_option("--min-count", min_count, "minimum occurrences for a token to be scanned");
    est.bind(app);
    app.add_option("--threads", threads, "parallelism across tokens");
    app.add_option("--out-dir", out_dir, "output directory");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["corpus"] = corpus;
    j["tokens"] = tokens;
    j["seeds"] = seeds;
    j["min_count"] = min_count;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["estimation"] = est.to_json();
    return j;
  }

  void from_json(const ordered_json& j) {
    corpus = j.value("corpus", corpus);
    tokens = j.value("tokens", tokens);
    seeds = j.value("seeds", seeds);
    min_count = j.value("min_count", min_count);
    threads = j.value("threads", threads);
    out_dir = j.value("out_dir", out_dir);
    if (j.contains("estimation")) est.from_json(j.at("estimation"));
  }
};

int cmd_bias_scan(std::vector<std::string> args) {
  BiasScanCmdFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "bias-scan"));
  CLI::App app{"estimate per-token effects and compare against P(Y|T) to flag annotator bias",
               "feffect bias-scan"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (!config.empty()) {
    app.get_option("--corpus")->required(false);
    app.get_option("--tokens")->required(false);
  }
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const Corpus corpus = read_jsonl(flags.corpus);
  std::vector<std::string> tokens;
  for (auto& tok : split_string(flags.tokens, ',')) {
    if (!tok.empty()) tokens.push_back(tok);
  }
  BiasScanOptions opts;
  opts.min_count = flags.min_count;
  opts.threads = flags.threads;
  const auto seeds = parse_seed_list(flags.seeds);
  opts.est = flags.est.options(seeds.front());
  const BiasReport report = bias_scan(corpus, tokens, opts, seeds);

  fs::create_directories(flags.out_dir);
  write_text_file(fs::path(flags.out_dir) / "bias_report.csv", bias_report_csv(report));
  write_text_file(fs::path(flags.out_dir) / "bias_report.json", bias_report_json(report));
  write_run_config(fs::path(flags.out_dir) / "run_config.json", "bias-scan", flags.to_json());
  std::cout << bias_report_table(report);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCmdFlags {
  std::string taus = "0.1,0.3,0.5";
  std::string epss = "0.01,0.05,0.10";
  std::string seeds = "0,11,44";
  std::size_t n = 5000;
  double signal_strength = 0.9;
  double base_label_acc = 0.78;
  std::size_t tokens_per_doc = 12;
  EstimateFlags est;
  int threads = 1;
  std::string out_dir = ".";

  void bind(CLI::App& app) {
    app.add_option("--taus", taus, "comma-separated true effects");
    app.add_option("--eps", epss, "comma-separated overlap values");
    app.add_option("--seeds", seeds, "comma-separated seeds (corpus + estimation)");
    app.add_option("--n", n, "documents per generated corpus");
    app.add_option("--signal-strength", signal_strength, "P(covariate token matches W pool)");
    app.add_option("--base-label-acc", base_label_acc, "P(base label == W)");
    app.add_option("--tokens-per-doc", tokens_per_doc, "covariate tokens per document");
    est.bind(app);
    app.add_option("--threads", threads, "parallelism across sweep units");
    app.add_option("--out-dir", out_dir, "output directory");
  }

  SweepConfig config() const {
    SweepConfig cfg;
    cfg.taus = parse_double_list(taus);
    cfg.epss = parse_double_list(epss);
    cfg.seeds = parse_seed_list(seeds);
    cfg.base.n = n;
    cfg.base.signal_strength = signal_strength;
    cfg.base.base_label_acc = base_label_acc;
    cfg.base.tokens_per_doc = tokens_per_doc;
    cfg.est = est.options(cfg.seeds.front());
    cfg.threads = threads;
    return cfg;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["taus"] = taus;
    j["eps"] = epss;
    j["seeds"] = seeds;
    j["n"] = n;
    j["signal_strength"] = signal_strength;
    j["base_label_acc"] = base_label_acc;
    j["tokens_per_doc"] = tokens_per_doc;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["estimation"] = est.to_json();
    return j;
  }

  void from_json(const ordered_json& j) {
    taus = j.value("taus", taus);
    epss = j.value("eps", epss);
    seeds = j.value("seeds", seeds);
    n = j.value("n", n);
    signal_strength = j.value("signal_strength", signal_strength);
    base_label_acc = j.value("base_label_acc", base_label_acc);
    tokens_per_doc = j.value("tokens_per_doc", tokens_per_doc);
    threads = j.value("threads", threads);
    out_dir = j.value("out_dir", out_dir);
    if (j.contains("estimation")) est.from_json(j.at("estimation"));
  }
};

int cmd_sweep(std::vector<std::string> args) {
  SweepCmdFlags flags;
  const std::string config = find_config_flag(args);
  if (!config.empty()) flags.from_json(load_run_config(config, "sweep"));
  CLI::App app{"MAE grid over tau x overlap x seeds for all three estimators", "feffect sweep"};
  std::string config_path;
  app.add_option("--config", config_path, "load options from an emitted run_config.json");
  flags.bind(app);
  if (const int code = parse_args(app, std::move(args)); code >= 0) return code;

  const SweepConfig cfg = flags.config();
  const auto cells = run_sweep(cfg);
  fs::create_directories(flags.out_dir);
  write_text_file(fs::path(flags.out_dir) / "sweep_mae.csv", sweep_mae_csv(cfg, cells));
  write_text_file(fs::path(flags.out_dir) / "sweep_cells.csv", sweep_cells_csv(cfg, cells));
  write_run_config(fs::path(flags.out_dir) / "run_config.json", "sweep", flags.to_json());
  std::cout << sweep_table(cfg, cells);
  return 0;
}

// ---------------------------------------------------------------------------

void print_usage(std::ostream& out) {
  out << "usage: " << kTool << " <command> [flags]\n"
      << "\ncommands:\n"
      << "  gen ss          generate a semi-synthetic corpus with known effect\n"
      << "  gen subsampled  generate a subsampled-correlation corpus\n"
      << "  estimate        estimate a feature's effect (direct, propensity-DR, Riesz-DR)\n"
      << "  train           train a classifier (erm|feag|reg|remove-token|subsample)\n"
      << "  eval            group accuracies and learned effect of a trained model\n"
      << "  bias-scan       per-token effect estimates vs naive P(Y|T)\n"
      << "  sweep           MAE grid over tau x overlap x seeds\n"
      << "\nrun '" << kTool << " <command> --help' for flags\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& argv) {
  try {
    if (argv.empty() || argv[0] == "-h" || argv[0] == "--help" || argv[0] == "help") {
      print_usage(std::cout);
      return argv.empty() ? 2 : 0;
    }
    const std::string& cmd = argv[0];
    std::vector<std::string> rest(argv.begin() + 1, argv.end());
    if (cmd == "gen") {
      if (rest.empty()) {
        std::cerr << kTool << ": 'gen' needs a generator: ss | subsampled\n";
        return 2;
      }
      const std::string sub = rest[0];
      rest.erase(rest.begin());
      if (sub == "ss") return cmd_gen_ss(std::move(rest));
      if (sub == "subsampled") return cmd_gen_subsampled(std::move(rest));
      std::cerr << kTool << ": unknown generator '" << sub << "' (expected ss | subsampled)\n";
      return 2;
    }
    if (cmd == "estimate") return cmd_estimate(std::move(rest));
    if (cmd == "train") return cmd_train(std::move(rest));
    if (cmd == "eval") return cmd_eval(std::move(rest));
    if (cmd == "bias-scan") return cmd_bias_scan(std::move(rest));
    if (cmd == "sweep") return cmd_sweep(std::move(rest));
    std::cerr << kTool << ": unknown command '" << cmd << "'\n";
    print_usage(std::cerr);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << kTool << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << kTool << ": " << e.what() << '\n';
    return 1;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace feffect::cli
