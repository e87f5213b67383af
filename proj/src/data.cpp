#include "genesnn/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

namespace {

// Fisher-Yates with our own engine so shuffles are reproducible everywhere.
void shuffle_indices(std::vector<int>& idx, RandomEngine& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
}

// Stratified 80/10/10: per class, floor(n/10) to val and test, rest to train.
void stratified_split(Dataset& d, std::uint64_t seed) {
  RandomEngine rng(mix_seed(seed, 0x5154));
  std::vector<std::vector<int>> per_class(d.num_classes);
  for (int i = 0; i < d.size(); ++i) per_class[d.labels[i]].push_back(i);
  for (auto& idx : per_class) {
    shuffle_indices(idx, rng);
    const std::size_t n = idx.size();
    const std::size_t n_val = n / 10, n_test = n / 10;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_val) {
        d.val_idx.push_back(idx[i]);
      } else if (i < n_val + n_test) {
        d.test_idx.push_back(idx[i]);
      } else {
        d.train_idx.push_back(idx[i]);
      }
    }
  }
  shuffle_indices(d.train_idx, rng);
  shuffle_indices(d.val_idx, rng);
  shuffle_indices(d.test_idx, rng);
}

void minmax_normalize(Tensor& samples) {
  const int n = samples.dim(0);
  const std::size_t features = samples.size() / static_cast<std::size_t>(n);
  for (std::size_t f = 0; f < features; ++f) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < n; ++i) {
      const double v = samples[static_cast<std::size_t>(i) * features + f];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (int i = 0; i < n; ++i) {
      double& v = samples[static_cast<std::size_t>(i) * features + f];
      v = range > 0 ? (v - lo) / range : 0.0;
    }
  }
}

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t& offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw ParseError(path + ": truncated at byte offset " + std::to_string(offset));
  }
  offset += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset make_blobs(int n_classes, int n_per_class, int dim, double separation,
                   std::uint64_t seed) {
  if (n_classes < 1 || n_per_class < 1 || dim < 1) {
    throw std::invalid_argument("make_blobs: arguments must be >= 1");
  }
  const int n = n_classes * n_per_class;
  Dataset d;
  d.num_classes = n_classes;
  d.samples = Tensor(n, dim, 1, 1);
  d.labels.resize(n);

  // Class means: orthogonal placements are guaranteed separated; fall back to
  // random directions once classes outnumber dimensions.
  std::vector<std::vector<double>> means(n_classes, std::vector<double>(dim, 0.0));
  RandomEngine mean_rng(mix_seed(seed, 0x3141));
  for (int c = 0; c < n_classes; ++c) {
    if (n_classes <= dim) {
      means[c][c] = separation;
    } else {
      double norm2 = 0.0;
      for (int f = 0; f < dim; ++f) {
        means[c][f] = mean_rng.normal();
        norm2 += means[c][f] * means[c][f];
      }
      const double scale = separation / std::max(std::sqrt(norm2), 1e-12);
      for (int f = 0; f < dim; ++f) means[c][f] *= scale;
    }
  }

  RandomEngine rng(mix_seed(seed, 0x2718));
  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      d.labels[row] = c;
      for (int f = 0; f < dim; ++f) {
        d.samples(row, f, 0, 0) = means[c][f] + rng.normal();
      }
    }
  }
  minmax_normalize(d.samples);
  stratified_split(d, seed);
  return d;
}

Tensor load_idx_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  std::size_t offset = 0;
  const std::uint32_t magic = read_be32(in, path, offset);
  if ((magic & 0xFFFF0000u) != 0) {
    throw ParseError(path + ": bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%08x", magic);
      return std::string(buf);
    }() + " at byte offset 0");
  }
  const std::uint32_t dtype = (magic >> 8) & 0xFF;
  const std::uint32_t ndims = magic & 0xFF;
  if (ndims < 1 || ndims > 4) {
    throw ParseError(path + ": unsupported dimension count " + std::to_string(ndims) +
                     " at byte offset 3");
  }
  std::array<int, 4> dims{1, 1, 1, 1};
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    const std::uint32_t v = read_be32(in, path, offset);
    if (v == 0 || v > (1u << 30)) {
      throw ParseError(path + ": bad dimension " + std::to_string(v) + " at byte offset " +
                       std::to_string(offset - 4));
    }
    dims[i] = static_cast<int>(v);
    total *= v;
  }
  Tensor t(dims[0], dims[1], dims[2], dims[3]);
  if (dtype == 0x08) {  // unsigned byte
    std::vector<unsigned char> raw(total);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
    if (static_cast<std::size_t>(in.gcount()) != total) {
      throw ParseError(path + ": truncated payload at byte offset " +
                       std::to_string(offset + static_cast<std::size_t>(in.gcount())));
    }
    for (std::size_t i = 0; i < total; ++i) t[i] = static_cast<double>(raw[i]);
  } else if (dtype == 0x0C) {  // int32
    for (std::size_t i = 0; i < total; ++i) {
      t[i] = static_cast<double>(static_cast<std::int32_t>(read_be32(in, path, offset)));
    }
  } else {
    throw ParseError(path + ": unsupported dtype 0x" + std::to_string(dtype) +
                     " at byte offset 2");
  }
  return t;
}

void write_idx_images(const std::string& path, const Tensor& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  write_be32(out, 0x00000803u);
  write_be32(out, static_cast<std::uint32_t>(samples.dim(0)));
  write_be32(out, static_cast<std::uint32_t>(samples.dim(1) * samples.dim(2)));
  write_be32(out, static_cast<std::uint32_t>(samples.dim(3)));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = std::clamp(samples[i], 0.0, 1.0);
    const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  write_be32(out, 0x00000801u);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         std::uint64_t split_seed) {
  Tensor images = load_idx_tensor(images_path);
  Tensor labels = load_idx_tensor(labels_path);
  const int n = images.dim(0);
  if (labels.dim(0) != n || static_cast<int>(labels.size()) != n) {
    throw ParseError(labels_path + ": label count " + std::to_string(labels.size()) +
                     " does not match " + std::to_string(n) + " samples");
  }
  Dataset d;
  // IDX images come as (N, H, W); present them as single-channel maps.
  d.samples = Tensor(n, 1, images.dim(1), images.dim(2));
  for (std::size_t i = 0; i < images.size(); ++i) d.samples[i] = images[i] / 255.0;
  d.labels.resize(n);
  int max_label = 0;
  for (int i = 0; i < n; ++i) {
    d.labels[i] = static_cast<int>(labels[static_cast<std::size_t>(i)]);
    if (d.labels[i] < 0) throw ParseError(labels_path + ": negative label at row " + std::to_string(i));
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = max_label + 1;
  stratified_split(d, split_seed);
  return d;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema, std::uint64_t split_seed) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file at line 1");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == schema.label_column) label_col = static_cast<int>(i);
  }
  if (label_col < 0) {
    throw ParseError(path + ": no column named '" + schema.label_column + "' at line 1");
  }
  const int dim = static_cast<int>(header.size()) - 1;
  if (dim < 1) throw ParseError(path + ": no feature columns at line 1");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    int label = -1, col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        const double v = std::stod(cell);
        if (col == label_col) {
          label = static_cast<int>(v);
        } else {
          row.push_back(v);
        }
      } catch (const std::exception&) {
        throw ParseError(path + ": bad numeric value '" + cell + "' at line " +
                         std::to_string(line_no));
      }
      ++col;
    }
    if (col != static_cast<int>(header.size())) {
      throw ParseError(path + ": ragged row (" + std::to_string(col) + " of " +
                       std::to_string(header.size()) + " columns) at line " +
                       std::to_string(line_no));
    }
    if (label < 0) throw ParseError(path + ": negative label at line " + std::to_string(line_no));
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw ParseError(path + ": no data rows at line " + std::to_string(line_no));

  Dataset d;
  const int n = static_cast<int>(rows.size());
  d.samples = Tensor(n, dim, 1, 1);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < dim; ++f) d.samples(i, f, 0, 0) = rows[i][f];
  }
  d.labels = std::move(labels);
  d.num_classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  if (schema.normalize) minmax_normalize(d.samples);
  stratified_split(d, split_seed);
  return d;
}

EncodedBatch encode_spikes(const Tensor& samples, int time_steps, EncodingMode mode,
                           std::uint64_t seed) {
  if (time_steps < 1) throw std::invalid_argument("encode_spikes: T must be >= 1");
  EncodedBatch batch;
  batch.steps.reserve(time_steps);
  if (mode == EncodingMode::Constant) {
    batch.binary = false;
    for (int t = 0; t < time_steps; ++t) batch.steps.push_back(samples);
    return batch;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] < 0.0 || samples[i] > 1.0) {
      throw std::domain_error("encode_spikes: Poisson mode needs values in [0,1], got " +
                              std::to_string(samples[i]));
    }
  }
  batch.binary = true;
  RandomEngine rng(seed);
  for (int t = 0; t < time_steps; ++t) {
    Tensor step = Tensor::zeros_like(samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      step[i] = rng.uniform() < samples[i] ? 1.0 : 0.0;
    }
    batch.steps.push_back(std::move(step));
  }
  return batch;
}

Tensor add_gaussian_noise(const Tensor& samples, double relative_l2, std::uint64_t seed) {
  if (relative_l2 < 0.0) throw std::invalid_argument("add_gaussian_noise: relative_l2 >= 0");
  Tensor out = samples;
  if (relative_l2 == 0.0) return out;
  const int n = samples.dim(0);
  const std::size_t features = samples.size() / static_cast<std::size_t>(n);
  RandomEngine rng(seed);
  std::vector<double> noise(features);
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * features;
    double x_norm2 = 0.0, noise_norm2 = 0.0;
    for (std::size_t f = 0; f < features; ++f) {
      noise[f] = rng.normal();
      noise_norm2 += noise[f] * noise[f];
      x_norm2 += samples[base + f] * samples[base + f];
    }
    const double target = relative_l2 * std::sqrt(x_norm2);
    const double scale = noise_norm2 > 0 ? target / std::sqrt(noise_norm2) : 0.0;
    for (std::size_t f = 0; f < features; ++f) out[base + f] += scale * noise[f];
  }
  return out;
}

Tensor gather_samples(const Dataset& data, const std::vector<int>& indices, std::size_t lo,
                      std::size_t hi) {
  const std::size_t features = data.samples.size() / static_cast<std::size_t>(data.size());
  Tensor batch(static_cast<int>(hi - lo), data.samples.dim(1), data.samples.dim(2),
               data.samples.dim(3));
  for (std::size_t i = lo; i < hi; ++i) {
    const std::size_t src = static_cast<std::size_t>(indices[i]) * features;
    const std::size_t dst = (i - lo) * features;
    for (std::size_t f = 0; f < features; ++f) batch[dst + f] = data.samples[src + f];
  }
  return batch;
}

std::vector<int> gather_labels(const Dataset& data, const std::vector<int>& indices,
                               std::size_t lo, std::size_t hi) {
  std::vector<int> out;
  out.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) out.push_back(data.labels[indices[i]]);
  return out;
}

}  // namespace genesnn
