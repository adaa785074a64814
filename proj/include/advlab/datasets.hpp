#pragma once

#include <string>
#include <vector>

#include "advlab/common.hpp"
#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

struct Dataset {
    std::string name;
    Tensor<float> x;  // [N,C,H,W] images or [N,D] vectors, values in [0,1]
    std::vector<int> y;
    int classes = 0;

    int64_t size() const { return x.v.empty() ? 0 : x.dim(0); }
    uint64_t fingerprint() const;
};

// IDX containers (big-endian headers, uint8 payload).
struct IdxImages {
    int n = 0, rows = 0, cols = 0;
    std::vector<uint8_t> pixels;  // n*rows*cols
};

void write_idx_images(const std::string& path, const std::vector<uint8_t>& pixels,
                      int n, int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels);
IdxImages read_idx_images(const std::string& path);
std::vector<uint8_t> read_idx_labels(const std::string& path);

// Image/label IDX pair -> dataset with pixels scaled to [0,1].
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       std::string name = "mnist");

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + 3x1024 planes.
Dataset load_cifar10_batches(const std::vector<std::string>& paths,
                             std::string name = "cifar10");
void write_cifar10_batch(const std::string& path, const std::vector<uint8_t>& labels,
                         const std::vector<uint8_t>& pixels);

// Procedural ten-class digit images (seven-segment glyphs with jitter and
// noise), rendered as uint8 so a round trip through IDX files is exact.
void render_digits(int n, uint64_t seed, std::vector<uint8_t>& pixels,
                   std::vector<uint8_t>& labels);
Dataset synthetic_digits(int n, uint64_t seed);
void write_digits_idx(const std::string& images_path, const std::string& labels_path,
                      int n, uint64_t seed);

struct GaussianSpec {
    double mu0x = 0.35, mu0y = 0.35;
    double mu1x = 0.65, mu1y = 0.65;
    double sigma = 0.06;
};

Dataset synthetic_gaussian(int n, uint64_t seed, const GaussianSpec& spec = {});

struct SplitSizes {
    int train = 0, val = 0, test = 0;
};

struct DataSplit {
    Dataset train, val, test;
};

Dataset subset(const Dataset& d, const std::vector<int64_t>& idx, std::string name);

// Deterministic shuffle, then disjoint train/val/test prefixes.
DataSplit split_dataset(const Dataset& d, SplitSizes sizes, uint64_t seed);

// Random crop with zero padding (and optional mirror) per example. Draw
// order per example: dy, dx, then the flip coin when hflip is on.
// Non-image batches pass through unchanged.
Tensor<float> augment_batch(const Tensor<float>& x, Rng& rng, int pad = 4,
                            bool hflip = false);

}  // namespace advlab
