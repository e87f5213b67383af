#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genesnn/network.hpp"
#include "genesnn/tensor.hpp"

namespace genesnn {

/// Labeled samples normalized to [0,1] with disjoint stratified splits.
struct Dataset {
  Tensor samples;  // (N, C, H, W)
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<int> train_idx, val_idx, test_idx;

  int size() const { return samples.dim(0); }
};

/// Gaussian clusters with unit within-class std. Class means are
/// separation-scaled basis vectors when n_classes <= dim, otherwise seeded
/// random directions of length `separation`. Features are min-max normalized
/// to [0,1]; split is stratified 80/10/10.
Dataset make_blobs(int n_classes, int n_per_class, int dim, double separation,
                   std::uint64_t seed);

/// Raw IDX payload (big-endian dims, ubyte/int32 payloads supported).
Tensor load_idx_tensor(const std::string& path);

/// Writes a (N, 1, H, W) or (N, C, 1, 1) tensor of [0,1] values as a ubyte
/// IDX file (values scaled by 255).
void write_idx_images(const std::string& path, const Tensor& samples);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

/// MNIST-style pair of IDX files; pixels scaled to [0,1], stratified split.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         std::uint64_t split_seed);

struct CsvSchema {
  std::string label_column = "label";
  bool normalize = true;  // per-feature min-max to [0,1]
};

/// Headered CSV with one label column and numeric features.
Dataset load_csv(const std::string& path, const CsvSchema& schema, std::uint64_t split_seed);

enum class EncodingMode { Constant, Poisson };

/// Turns a batch of real samples into T-step network input. Constant mode
/// injects the sample as current every step; Poisson emits Bernoulli(pixel)
/// spikes and requires values in [0,1].
EncodedBatch encode_spikes(const Tensor& samples, int time_steps, EncodingMode mode,
                           std::uint64_t seed);

/// Adds per-sample Gaussian noise scaled so ||noise||_2 = relative_l2 * ||x||_2.
Tensor add_gaussian_noise(const Tensor& samples, double relative_l2, std::uint64_t seed);

/// Gathers dataset rows indices[lo, hi) into a batch tensor + labels.
Tensor gather_samples(const Dataset& data, const std::vector<int>& indices, std::size_t lo,
                      std::size_t hi);
std::vector<int> gather_labels(const Dataset& data, const std::vector<int>& indices,
                               std::size_t lo, std::size_t hi);

}  // namespace genesnn
