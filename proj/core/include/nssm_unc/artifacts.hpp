#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nssm_unc/laplace.hpp"
#include "nssm_unc/nssm.hpp"
#include "nssm_unc/trainer.hpp"

namespace nssm {

// Stable content hashes used for artifact provenance.
std::uint64_t fnv1a_hash(const void* data, std::size_t size);
std::uint64_t fnv1a_hash(const std::string& s);
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

std::string base64_encode(const void* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& s);

/// Trained-model artifact: JSON header (specs, train config echo, seed,
/// provenance hashes) plus the flat parameter vector as base64 doubles.
struct ModelArtifact {
  NeuralSSModel model;
  TrainConfig train_config;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_hash;
  double beta_used = 0.0;
};

void model_save(const ModelArtifact& art, const std::string& path);
ModelArtifact model_load(const std::string& path);

/// Posterior artifact: JSON header (tau, beta, n_theta, provenance hashes)
/// plus theta_MAP and the packed lower-triangular factor as base64 doubles.
struct PosteriorArtifact {
  LaplacePosterior posterior;
  std::string config_hash;
  std::string dataset_hash;
  std::string model_hash;
};

void posterior_save(const PosteriorArtifact& art, const std::string& path);
PosteriorArtifact posterior_load(const std::string& path);

void nll_trace_save_csv(const std::vector<double>& trace, const std::string& path);

}  // namespace nssm
