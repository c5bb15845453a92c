#include "nssm_unc/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "nssm_unc/artifacts.hpp"
#include "nssm_unc/laplace.hpp"
#include "nssm_unc/uq.hpp"

namespace nssm {

namespace {

// Reference results of the source experiment, printed next to measured rows.
struct ReferenceRow {
  const char* signal;
  double fit, coverage, surprise;
};
constexpr ReferenceRow kReferenceTable[4] = {
    {"signal1", 98.1, 99.2, 0.33},
    {"signal2", 97.7, 98.6, 0.43},
    {"signal3", 93.9, 96.1, 2.10},
    {"signal4", 87.8, 80.6, 4.03},
};

std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  std::string s = std::to_string(seed) + ":" + tag;
  return fnv1a_hash(s);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(const std::string& origin, int line,
                               const std::string& msg) {
  throw PipelineError("config_error",
                      origin + ":" + std::to_string(line) + ": " + msg);
}

void parse_band(const std::string& v, SignalSpec& sig, const std::string& origin,
                int line) {
  std::istringstream ss(v);
  if (!(ss >> sig.band_lo >> sig.band_hi))
    config_error(origin, line, "expected two numbers 'lo hi' for band, got '" + v + "'");
}

bool parse_bool(const std::string& v, const std::string& origin, int line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  config_error(origin, line, "expected boolean, got '" + v + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (fs <= 0.0) throw PipelineError("config_error", "fs must be positive");
  if (n_train < 2 || n_test < 2)
    throw PipelineError("config_error", "n_train and n_test must be >= 2");
  if (sigma_e < 0.0) throw PipelineError("config_error", "sigma_e must be >= 0");
  auto check_band = [&](const SignalSpec& s, const std::string& name) {
    if (!(s.band_lo >= 0.0 && s.band_lo < s.band_hi && s.band_hi <= fs / 2.0))
      throw PipelineError("config_error",
                          name + ": need 0 <= band_lo < band_hi <= fs/2");
    if (s.target_std <= 0.0)
      throw PipelineError("config_error", name + ": std must be > 0");
  };
  check_band(train_signal, "train signal");
  for (int i = 0; i < 4; ++i)
    check_band(test_signals[i], "test signal " + std::to_string(i + 1));
  if (n_x < 1 || n_hidden < 1)
    throw PipelineError("config_error", "n_x and n_hidden must be >= 1");
  try {
    train.validate();
  } catch (const std::exception& e) {
    throw PipelineError("config_error", e.what());
  }
  if (interval_multiplier <= 0.0)
    throw PipelineError("config_error", "interval_multiplier must be > 0");
  if (transient_exclusion < 0 || transient_exclusion >= n_test - 1)
    throw PipelineError("config_error", "transient_exclusion out of range");
  if (out_dir.empty()) throw PipelineError("config_error", "out_dir must be set");
}

void ExperimentConfig::apply_fast_profile() {
  n_train = 2000;
  n_test = 2000;
  train.subseq_len = 128;
  train.washout = 32;
  train.batch_size = 64;
  train.epochs_adam = 8;
  train.epochs_refine = 2;
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "fs=" << fs << ";n_train=" << n_train << ";n_test=" << n_test
     << ";sigma_e=" << sigma_e << ";nonlinearity=" << to_string(nonlinearity);
  auto sig = [&](const SignalSpec& s) {
    ss << "(" << s.band_lo << "," << s.band_hi << "," << s.target_std << ")";
  };
  ss << ";train_signal=";
  sig(train_signal);
  for (int i = 0; i < 4; ++i) {
    ss << ";test" << i + 1 << "=";
    sig(test_signals[i]);
  }
  ss << ";n_x=" << n_x << ";n_hidden=" << n_hidden
     << ";batch_size=" << train.batch_size << ";subseq_len=" << train.subseq_len
     << ";epochs_adam=" << train.epochs_adam
     << ";epochs_refine=" << train.epochs_refine << ";lr=" << train.lr
     << ";washout=" << train.washout << ";tau=" << train.tau
     << ";beta=" << train.beta << ";estimate_beta=" << train.estimate_beta
     << ";refine_plain_gd=" << train.refine_plain_gd
     << ";lbfgs_memory=" << train.lbfgs_memory
     << ";lbfgs_iters_per_epoch=" << train.lbfgs_iters_per_epoch
     << ";interval_multiplier=" << interval_multiplier
     << ";transient_exclusion=" << transient_exclusion << ";seed=" << seed;
  return ss.str();
}

std::string ExperimentConfig::hash() const { return hash_hex(fnv1a_hash(serialize())); }

ExperimentConfig config_parse(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  bool beta_set = false;

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(origin, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    try {
      if (section == "data") {
        if (key == "fs") cfg.fs = std::stod(val);
        else if (key == "n_train") cfg.n_train = std::stoll(val);
        else if (key == "n_test") cfg.n_test = std::stoll(val);
        else if (key == "sigma_e") cfg.sigma_e = std::stod(val);
        else if (key == "nonlinearity") cfg.nonlinearity = elu_variant_from_string(val);
        else if (key == "train_band") parse_band(val, cfg.train_signal, origin, lineno);
        else if (key == "train_std") cfg.train_signal.target_std = std::stod(val);
        else if (key == "test1_band") parse_band(val, cfg.test_signals[0], origin, lineno);
        else if (key == "test2_band") parse_band(val, cfg.test_signals[1], origin, lineno);
        else if (key == "test3_band") parse_band(val, cfg.test_signals[2], origin, lineno);
        else if (key == "test4_band") parse_band(val, cfg.test_signals[3], origin, lineno);
        else if (key == "test1_std") cfg.test_signals[0].target_std = std::stod(val);
        else if (key == "test2_std") cfg.test_signals[1].target_std = std::stod(val);
        else if (key == "test3_std") cfg.test_signals[2].target_std = std::stod(val);
        else if (key == "test4_std") cfg.test_signals[3].target_std = std::stod(val);
        else config_error(origin, lineno, "unknown key '" + key + "' in [data]");
      } else if (section == "model") {
        if (key == "n_x") cfg.n_x = std::stoi(val);
        else if (key == "n_hidden") cfg.n_hidden = std::stoi(val);
        else config_error(origin, lineno, "unknown key '" + key + "' in [model]");
      } else if (section == "train") {
        if (key == "batch_size") cfg.train.batch_size = std::stoi(val);
        else if (key == "subseq_len") cfg.train.subseq_len = std::stoi(val);
        else if (key == "epochs_adam") cfg.train.epochs_adam = std::stoi(val);
        else if (key == "epochs_refine") cfg.train.epochs_refine = std::stoi(val);
        else if (key == "lr") cfg.train.lr = std::stod(val);
        else if (key == "washout") cfg.train.washout = std::stoi(val);
        else if (key == "tau") cfg.train.tau = std::stod(val);
        else if (key == "beta") { cfg.train.beta = std::stod(val); beta_set = true; }
        else if (key == "estimate_beta")
          cfg.train.estimate_beta = parse_bool(val, origin, lineno);
        else if (key == "refine_plain_gd")
          cfg.train.refine_plain_gd = parse_bool(val, origin, lineno);
        else if (key == "lbfgs_memory") cfg.train.lbfgs_memory = std::stoi(val);
        else if (key == "lbfgs_iters_per_epoch")
          cfg.train.lbfgs_iters_per_epoch = std::stoi(val);
        else config_error(origin, lineno, "unknown key '" + key + "' in [train]");
      } else if (section == "eval") {
        if (key == "interval_multiplier") cfg.interval_multiplier = std::stod(val);
        else if (key == "transient_exclusion") cfg.transient_exclusion = std::stoll(val);
        else config_error(origin, lineno, "unknown key '" + key + "' in [eval]");
      } else if (section == "paths") {
        if (key == "out_dir") cfg.out_dir = val;
        else config_error(origin, lineno, "unknown key '" + key + "' in [paths]");
      } else if (section == "seed") {
        if (key == "seed") cfg.seed = std::stoull(val);
        else config_error(origin, lineno, "unknown key '" + key + "' in [seed]");
      } else {
        config_error(origin, lineno, "unknown section '" + section + "'");
      }
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception&) {
      config_error(origin, lineno, "invalid value '" + val + "' for key '" + key + "'");
    }
  }

  if (!beta_set && cfg.sigma_e > 0.0) cfg.train.beta = 1.0 / (cfg.sigma_e * cfg.sigma_e);
  return cfg;
}

ExperimentConfig config_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("missing_config", "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_parse(ss.str(), path);
}

namespace {

void require_file(const std::string& path, const std::string& stage_hint) {
  if (!std::filesystem::exists(path))
    throw PipelineError("missing_artifact",
                        path + " not found; run `" + stage_hint + "` first");
}

Dataset generate_signal(const ExperimentConfig& cfg, const SignalSpec& sig,
                        Eigen::Index n, const std::string& tag) {
  MultisineConfig ms;
  ms.n_samples = n;
  ms.fs = cfg.fs;
  ms.band_lo = sig.band_lo;
  ms.band_hi = sig.band_hi;
  ms.target_std = sig.target_std;
  ms.seed = derive_seed(cfg.seed, tag + "/input");
  const Eigen::VectorXd u = multisine(ms);
  Dataset ds = wh_simulate(u, cfg.sigma_e, derive_seed(cfg.seed, tag + "/noise"),
                           cfg.nonlinearity, cfg.fs);
  ds.meta.band_lo = sig.band_lo;
  ds.meta.band_hi = sig.band_hi;
  ds.meta.target_std = sig.target_std;
  ds.meta.seed = cfg.seed;
  return ds;
}

NeuralSSModel model_from_config(const ExperimentConfig& cfg) {
  return NeuralSSModel::make(cfg.n_x, 1, cfg.n_hidden, true, 1);
}

}  // namespace

void run_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec)
    throw PipelineError("io_error", "cannot create " + cfg.out_dir + ": " + ec.message());

  try {
    dataset_save(generate_signal(cfg, cfg.train_signal, cfg.n_train, "train"),
                 cfg.train_csv());
    for (int i = 0; i < 4; ++i)
      dataset_save(generate_signal(cfg, cfg.test_signals[i], cfg.n_test,
                                   "test" + std::to_string(i + 1)),
                   cfg.test_csv(i));
    LtiFilter g1 = wh_g1(), g2 = wh_g2();
    frequency_response_save_csv(frequency_response(g1, 512, cfg.fs),
                                cfg.out_dir + "/bode_g1.csv");
    frequency_response_save_csv(frequency_response(g2, 512, cfg.fs),
                                cfg.out_dir + "/bode_g2.csv");
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError("io_error", e.what());
  }
}

void run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  require_file(cfg.train_csv(), "generate");

  const Dataset ds = dataset_load(cfg.train_csv());
  NeuralSSModel model = model_from_config(cfg);
  model.theta = init_params(model, derive_seed(cfg.seed, "init"));

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "shuffle");
  const TrainReport report = train_map(ds, model, tc);

  ModelArtifact art;
  art.model = model;
  art.model.theta = report.theta_map;
  art.train_config = tc;
  art.seed = cfg.seed;
  art.config_hash = cfg.hash();
  art.dataset_hash = hash_hex(hash_file(cfg.train_csv()));
  art.beta_used = report.beta_used;
  model_save(art, cfg.model_path());
  nll_trace_save_csv(report.nll_trace, cfg.out_dir + "/nll_trace.csv");
}

void run_laplace(const ExperimentConfig& cfg) {
  cfg.validate();
  require_file(cfg.train_csv(), "generate");
  require_file(cfg.model_path(), "train");

  const ModelArtifact art = model_load(cfg.model_path());
  const std::string data_hash = hash_hex(hash_file(cfg.train_csv()));
  if (art.config_hash != cfg.hash())
    throw PipelineError("stale_artifact",
                        cfg.model_path() + " was trained under a different config "
                        "(hash " + art.config_hash + ", expected " + cfg.hash() + ")");
  if (art.dataset_hash != data_hash)
    throw PipelineError("stale_artifact",
                        cfg.train_csv() + " changed since the model was trained");

  const Dataset ds = dataset_load(cfg.train_csv());
  LaplacePosterior post =
      gn_precision(art.model, ds, art.train_config.tau, art.beta_used,
                   art.train_config.washout);

  PosteriorArtifact pa;
  pa.posterior = std::move(post);
  pa.config_hash = cfg.hash();
  pa.dataset_hash = data_hash;
  pa.model_hash = hash_hex(hash_file(cfg.model_path()));
  posterior_save(pa, cfg.posterior_path());
}

std::vector<EvalReport> run_evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  require_file(cfg.model_path(), "train");
  require_file(cfg.posterior_path(), "laplace");
  for (int i = 0; i < 4; ++i) require_file(cfg.test_csv(i), "generate");

  const ModelArtifact mart = model_load(cfg.model_path());
  const PosteriorArtifact part = posterior_load(cfg.posterior_path());
  if (mart.config_hash != cfg.hash() || part.config_hash != cfg.hash())
    throw PipelineError("stale_artifact",
                        "model/posterior built under a different config");
  if (part.model_hash != hash_hex(hash_file(cfg.model_path())))
    throw PipelineError("stale_artifact",
                        cfg.model_path() + " changed since the posterior was built");

  // The four test signals share the immutable model/posterior; run them
  // concurrently.
  auto evaluate_one = [&](int i) {
    const Dataset ds = dataset_load(cfg.test_csv(i));
    const Eigen::MatrixXd u = ds.u;
    const UncertainPrediction pred = predict_with_uncertainty(
        mart.model, part.posterior, u, cfg.interval_multiplier);
    prediction_save_csv(pred, ds.u, &ds.y, cfg.prediction_csv(i));

    const Eigen::Index m = cfg.transient_exclusion;
    const Eigen::Index n = ds.y.size() - m;
    EvalReport r;
    r.signal_id = "signal" + std::to_string(i + 1);
    r.fit = fit_index(ds.y.tail(n), pred.y_mean.tail(n));
    r.coverage = coverage(ds.y.tail(n), pred.lo.tail(n), pred.hi.tail(n));
    r.surprise = pred.surprise;
    r.rmse = rmse(ds.y.tail(n), pred.y_mean.tail(n));
    r.n_steps = n;
    return r;
  };

  std::array<std::future<EvalReport>, 4> futures;
  for (int i = 0; i < 4; ++i)
    futures[i] = std::async(std::launch::async, evaluate_one, i);
  std::vector<EvalReport> rows;
  for (int i = 0; i < 4; ++i) rows.push_back(futures[i].get());

  report_save_csv(rows, cfg.report_path());
  return rows;
}

std::string run_report(const ExperimentConfig& cfg) {
  require_file(cfg.report_path(), "evaluate");
  const std::vector<EvalReport> rows = report_load_csv(cfg.report_path());

  std::ostringstream out;
  out << "signal    fit_%    coverage_%  surprise_%  |  reference: fit_%  coverage_%  "
         "surprise_%\n";
  char buf[256];
  for (const auto& r : rows) {
    const ReferenceRow* ref = nullptr;
    for (const auto& c : kReferenceTable)
      if (r.signal_id == c.signal) ref = &c;
    if (ref) {
      std::snprintf(buf, sizeof(buf),
                    "%-9s %7.2f  %9.2f  %9.3f   |  %14.1f  %9.1f  %9.2f\n",
                    r.signal_id.c_str(), r.fit, r.coverage, r.surprise, ref->fit,
                    ref->coverage, ref->surprise);
    } else {
      std::snprintf(buf, sizeof(buf), "%-9s %7.2f  %9.2f  %9.3f   |  %14s\n",
                    r.signal_id.c_str(), r.fit, r.coverage, r.surprise, "n/a");
    }
    out << buf;
  }
  return out.str();
}

}  // namespace nssm
