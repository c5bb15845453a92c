#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "nssm_unc/artifacts.hpp"
#include "test_helpers.hpp"

using namespace nssm;
using namespace nssm::testing;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("fnv1a: pinned reference values and avalanche on one-byte change") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(fnv1a_hash(std::string("")) == 0xcbf29ce484222325ull);
  CHECK(fnv1a_hash(std::string("a")) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a_hash(std::string("foobar")) == 0x85944171f73967e8ull);
  CHECK(fnv1a_hash(std::string("abc")) != fnv1a_hash(std::string("abd")));
}

TEST_CASE("hash_hex formats 16 lowercase hex digits") {
  CHECK(hash_hex(0x0123456789abcdefull) == "0123456789abcdef");
  CHECK(hash_hex(0) == "0000000000000000");
}

TEST_CASE("hash_file equals hashing the bytes, and tracks content changes") {
  const std::string path = tmp_path("nssm_unc_hash_test.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "some bytes\n";
  }
  CHECK(hash_file(path) == fnv1a_hash(std::string("some bytes\n")));
  {
    std::ofstream out(path, std::ios::binary);
    out << "other bytes\n";
  }
  CHECK(hash_file(path) == fnv1a_hash(std::string("other bytes\n")));
  std::remove(path.c_str());
  CHECK_THROWS((void)hash_file(path));
}

TEST_CASE("base64 round-trips arbitrary byte strings at every length mod 3") {
  std::mt19937_64 rng(1);
  for (std::size_t len = 0; len <= 64; ++len) {
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    const std::string enc = base64_encode(bytes.data(), bytes.size());
    CHECK(enc.size() % 4 == 0);
    CHECK(base64_decode(enc) == bytes);
  }
  CHECK(base64_encode(nullptr, 0) == "");
  CHECK_THROWS((void)base64_decode("@@@@"));
}

TEST_CASE("base64 preserves doubles bit-for-bit") {
  std::mt19937_64 rng(2);
  const Eigen::VectorXd v = random_vector(37, rng);
  const std::string enc =
      base64_encode(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  const std::vector<std::uint8_t> bytes = base64_decode(enc);
  REQUIRE(bytes.size() == static_cast<std::size_t>(v.size()) * sizeof(double));
  Eigen::VectorXd back(v.size());
  std::memcpy(back.data(), bytes.data(), bytes.size());
  CHECK(back == v);
}

TEST_CASE("model artifact round-trip is lossless") {
  std::mt19937_64 rng(3);
  ModelArtifact art;
  art.model = random_model(3, 1, 4, rng);
  art.train_config.batch_size = 17;
  art.train_config.epochs_adam = 5;
  art.train_config.tau = 0.125;
  art.train_config.beta = 12345.0;
  art.seed = 987654321;
  art.config_hash = "00aabbccddeeff11";
  art.dataset_hash = "123456789abcdef0";
  art.beta_used = 23456.5;

  const std::string path = tmp_path("nssm_unc_model_test.json");
  model_save(art, path);
  const ModelArtifact back = model_load(path);
  std::remove(path.c_str());

  CHECK(back.model.theta == art.model.theta);
  CHECK(back.model.n_x == art.model.n_x);
  CHECK(back.model.n_u == art.model.n_u);
  CHECK(back.model.param_count() == art.model.param_count());
  CHECK(back.train_config.batch_size == 17);
  CHECK(back.train_config.epochs_adam == 5);
  CHECK(back.train_config.tau == 0.125);
  CHECK(back.train_config.beta == 12345.0);
  CHECK(back.seed == art.seed);
  CHECK(back.config_hash == art.config_hash);
  CHECK(back.dataset_hash == art.dataset_hash);
  CHECK(back.beta_used == art.beta_used);
}

TEST_CASE("posterior artifact round-trip preserves the factor bitwise") {
  std::mt19937_64 rng(4);
  const Eigen::Index n = 9;
  const Eigen::MatrixXd grads = random_matrix(25, n, rng);
  PosteriorArtifact art;
  art.posterior = gn_precision_from_grads(random_vector(n, rng), grads, 0.5, 2.0);
  art.config_hash = "1111111111111111";
  art.dataset_hash = "2222222222222222";
  art.model_hash = "3333333333333333";

  const std::string path = tmp_path("nssm_unc_posterior_test.json");
  posterior_save(art, path);
  const PosteriorArtifact back = posterior_load(path);
  std::remove(path.c_str());

  CHECK(back.posterior.theta_map == art.posterior.theta_map);
  CHECK(back.posterior.tau == art.posterior.tau);
  CHECK(back.posterior.beta == art.posterior.beta);
  CHECK(back.posterior.chol_lower == art.posterior.chol_lower);
  CHECK(back.config_hash == art.config_hash);
  CHECK(back.model_hash == art.model_hash);

  // Loaded posterior is usable directly.
  const Eigen::VectorXd g = random_vector(n, rng);
  CHECK(back.posterior.quadform(g) == art.posterior.quadform(g));
}

TEST_CASE("loading garbage or a wrong-kind artifact fails loudly") {
  const std::string path = tmp_path("nssm_unc_garbage_test.json");
  {
    std::ofstream out(path);
    out << "{\"kind\": \"something else\"}";
  }
  CHECK_THROWS((void)model_load(path));
  CHECK_THROWS((void)posterior_load(path));
  std::remove(path.c_str());
  CHECK_THROWS((void)model_load(path));  // missing file
}

TEST_CASE("nll trace CSV has one row per epoch") {
  const std::string path = tmp_path("nssm_unc_trace_test.csv");
  nll_trace_save_csv({3.5, 2.25, 1.125}, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,nll");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  in.close();
  std::remove(path.c_str());
}
