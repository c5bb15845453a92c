#include "nssm_unc/artifacts.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nssm {

std::uint64_t fnv1a_hash(const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a_hash(const std::string& s) { return fnv1a_hash(s.data(), s.size()); }

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hash(ss.str());
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr char kB64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    std::uint32_t v = p[i] << 16;
    if (i + 1 < size) v |= p[i + 1] << 8;
    if (i + 2 < size) v |= p[i + 2];
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += (i + 1 < size) ? kB64Chars[(v >> 6) & 63] : '=';
    out += (i + 2 < size) ? kB64Chars[v & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& s) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  std::uint32_t buf = 0;
  int bits = 0;
  for (char c : s) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = value(c);
    if (v < 0) throw std::invalid_argument("base64_decode: invalid character");
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
    }
  }
  return out;
}

namespace {

std::string encode_doubles(const double* data, Eigen::Index n) {
  return base64_encode(data, static_cast<std::size_t>(n) * sizeof(double));
}

Eigen::VectorXd decode_doubles(const std::string& b64, Eigen::Index expected) {
  const std::vector<std::uint8_t> bytes = base64_decode(b64);
  if (bytes.size() != static_cast<std::size_t>(expected) * sizeof(double))
    throw std::runtime_error("artifact decode: unexpected payload size");
  Eigen::VectorXd v(expected);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {
      {"batch_size", c.batch_size},
      {"subseq_len", c.subseq_len},
      {"epochs_adam", c.epochs_adam},
      {"epochs_refine", c.epochs_refine},
      {"lr", c.lr},
      {"washout", c.washout},
      {"tau", c.tau},
      {"beta", c.beta},
      {"seed", c.seed},
      {"estimate_beta", c.estimate_beta},
      {"refine_plain_gd", c.refine_plain_gd},
      {"lbfgs_memory", c.lbfgs_memory},
      {"lbfgs_iters_per_epoch", c.lbfgs_iters_per_epoch},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.subseq_len = j.at("subseq_len").get<int>();
  c.epochs_adam = j.at("epochs_adam").get<int>();
  c.epochs_refine = j.at("epochs_refine").get<int>();
  c.lr = j.at("lr").get<double>();
  c.washout = j.at("washout").get<int>();
  c.tau = j.at("tau").get<double>();
  c.beta = j.at("beta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.estimate_beta = j.at("estimate_beta").get<bool>();
  c.refine_plain_gd = j.at("refine_plain_gd").get<bool>();
  c.lbfgs_memory = j.at("lbfgs_memory").get<int>();
  c.lbfgs_iters_per_epoch = j.at("lbfgs_iters_per_epoch").get<int>();
  return c;
}

}  // namespace

void model_save(const ModelArtifact& art, const std::string& path) {
  art.model.validate();
  nlohmann::json j = {
      {"format", "nssm-unc model v1"},
      {"n_x", art.model.n_x},
      {"n_u", art.model.n_u},
      {"n_y", art.model.n_y},
      {"n_hidden", art.model.f_spec.n_hidden},
      {"has_linear_bypass", art.model.f_spec.has_linear_bypass},
      {"n_theta", art.model.param_count()},
      {"train_config", train_config_to_json(art.train_config)},
      {"seed", art.seed},
      {"config_hash", art.config_hash},
      {"dataset_hash", art.dataset_hash},
      {"beta_used", art.beta_used},
      {"theta_b64", encode_doubles(art.model.theta.data(), art.model.theta.size())},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

ModelArtifact model_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model artifact: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("model artifact parse error in " + path + ": " + e.what());
  }
  if (j.at("format").get<std::string>() != "nssm-unc model v1")
    throw std::runtime_error("model artifact: unknown format in " + path);

  ModelArtifact art;
  art.model = NeuralSSModel::make(j.at("n_x").get<int>(), j.at("n_u").get<int>(),
                                  j.at("n_hidden").get<int>(),
                                  j.at("has_linear_bypass").get<bool>(),
                                  j.at("n_y").get<int>());
  const Eigen::Index n_theta = j.at("n_theta").get<Eigen::Index>();
  if (n_theta != art.model.param_count())
    throw std::runtime_error("model artifact: parameter count mismatch in " + path);
  art.model.theta = decode_doubles(j.at("theta_b64").get<std::string>(), n_theta);
  art.train_config = train_config_from_json(j.at("train_config"));
  art.seed = j.at("seed").get<std::uint64_t>();
  art.config_hash = j.at("config_hash").get<std::string>();
  art.dataset_hash = j.at("dataset_hash").get<std::string>();
  art.beta_used = j.at("beta_used").get<double>();
  return art;
}

void posterior_save(const PosteriorArtifact& art, const std::string& path) {
  const Eigen::Index n = art.posterior.dim();
  // Lower triangle packed row-wise.
  Eigen::VectorXd packed(n * (n + 1) / 2);
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c <= r; ++c) packed(idx++) = art.posterior.chol_lower(r, c);

  nlohmann::json j = {
      {"format", "nssm-unc posterior v1"},
      {"tau", art.posterior.tau},
      {"beta", art.posterior.beta},
      {"n_theta", n},
      {"config_hash", art.config_hash},
      {"dataset_hash", art.dataset_hash},
      {"model_hash", art.model_hash},
      {"theta_map_b64",
       encode_doubles(art.posterior.theta_map.data(), art.posterior.theta_map.size())},
      {"chol_lower_b64", encode_doubles(packed.data(), packed.size())},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

PosteriorArtifact posterior_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open posterior artifact: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("posterior artifact parse error in " + path + ": " +
                             e.what());
  }
  if (j.at("format").get<std::string>() != "nssm-unc posterior v1")
    throw std::runtime_error("posterior artifact: unknown format in " + path);

  PosteriorArtifact art;
  const Eigen::Index n = j.at("n_theta").get<Eigen::Index>();
  art.posterior.tau = j.at("tau").get<double>();
  art.posterior.beta = j.at("beta").get<double>();
  art.posterior.theta_map = decode_doubles(j.at("theta_map_b64").get<std::string>(), n);
  const Eigen::VectorXd packed =
      decode_doubles(j.at("chol_lower_b64").get<std::string>(), n * (n + 1) / 2);
  art.posterior.chol_lower = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c <= r; ++c) art.posterior.chol_lower(r, c) = packed(idx++);
  art.config_hash = j.at("config_hash").get<std::string>();
  art.dataset_hash = j.at("dataset_hash").get<std::string>();
  art.model_hash = j.at("model_hash").get<std::string>();
  return art;
}

void nll_trace_save_csv(const std::vector<double>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,nll\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, trace[i]);
    out << buf;
  }
}

}  // namespace nssm
