#include "advlab/datasets.hpp"

#include <algorithm>
#include <cstring>

#include "advlab/fsio.hpp"

namespace advlab {

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;
constexpr int64_t kCifarRecord = 3073;

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

uint32_t get_u32_be(const std::string& b, size_t off) {
    return (uint32_t(uint8_t(b[off])) << 24) | (uint32_t(uint8_t(b[off + 1])) << 16) |
           (uint32_t(uint8_t(b[off + 2])) << 8) | uint32_t(uint8_t(b[off + 3]));
}

std::string hex32(uint32_t v) { return hex64(v).substr(8); }

void check_len(const std::string& path, size_t have, size_t want) {
    ADVLAB_CHECK(have >= want, path, " is truncated at byte ", have, ": want ", want,
                 " bytes");
    ADVLAB_CHECK(have == want, path, " has ", have - want,
                 " trailing bytes starting at byte ", want);
}

}  // namespace

uint64_t Dataset::fingerprint() const {
    uint64_t h = fnv1a64(x.v.data(), x.v.size() * sizeof(float));
    for (int label : y) {
        uint32_t v = uint32_t(label);
        h = fnv1a64(&v, sizeof(v), h);
    }
    uint32_t k = uint32_t(classes);
    return fnv1a64(&k, sizeof(k), h);
}

void write_idx_images(const std::string& path, const std::vector<uint8_t>& pixels,
                      int n, int rows, int cols) {
    ADVLAB_CHECK(n >= 0 && rows > 0 && cols > 0, "bad idx image dims ", n, "x", rows,
                 "x", cols);
    ADVLAB_CHECK(pixels.size() == size_t(n) * size_t(rows) * size_t(cols),
                 "idx image payload has ", pixels.size(), " bytes, dims say ",
                 size_t(n) * size_t(rows) * size_t(cols));
    std::vector<uint8_t> out;
    out.reserve(16 + pixels.size());
    put_u32_be(out, kIdxImagesMagic);
    put_u32_be(out, uint32_t(n));
    put_u32_be(out, uint32_t(rows));
    put_u32_be(out, uint32_t(cols));
    out.insert(out.end(), pixels.begin(), pixels.end());
    atomic_write_file(path, out.data(), out.size());
}

void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
    std::vector<uint8_t> out;
    out.reserve(8 + labels.size());
    put_u32_be(out, kIdxLabelsMagic);
    put_u32_be(out, uint32_t(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    atomic_write_file(path, out.data(), out.size());
}

IdxImages read_idx_images(const std::string& path) {
    std::string b = read_file_bytes(path);
    ADVLAB_CHECK(b.size() >= 16, path, " is truncated at byte ", b.size(),
                 ": want at least the 16-byte idx image header");
    const uint32_t magic = get_u32_be(b, 0);
    ADVLAB_CHECK(magic == kIdxImagesMagic, path, ": magic mismatch at byte 0 (got 0x",
                 hex32(magic), ", want 0x", hex32(kIdxImagesMagic), ")");
    IdxImages img;
    img.n = int(get_u32_be(b, 4));
    img.rows = int(get_u32_be(b, 8));
    img.cols = int(get_u32_be(b, 12));
    check_len(path, b.size(),
              16 + size_t(img.n) * size_t(img.rows) * size_t(img.cols));
    img.pixels.assign(b.begin() + 16, b.end());
    return img;
}

std::vector<uint8_t> read_idx_labels(const std::string& path) {
    std::string b = read_file_bytes(path);
    ADVLAB_CHECK(b.size() >= 8, path, " is truncated at byte ", b.size(),
                 ": want at least the 8-byte idx label header");
    const uint32_t magic = get_u32_be(b, 0);
    ADVLAB_CHECK(magic == kIdxLabelsMagic, path, ": magic mismatch at byte 0 (got 0x",
                 hex32(magic), ", want 0x", hex32(kIdxLabelsMagic), ")");
    const uint32_t n = get_u32_be(b, 4);
    check_len(path, b.size(), 8 + size_t(n));
    return std::vector<uint8_t>(b.begin() + 8, b.end());
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       std::string name) {
    IdxImages img = read_idx_images(images_path);
    std::vector<uint8_t> labels = read_idx_labels(labels_path);
    ADVLAB_CHECK(size_t(img.n) == labels.size(), images_path, " holds ", img.n,
                 " images but ", labels_path, " holds ", labels.size(), " labels");
    Dataset d;
    d.name = std::move(name);
    d.classes = 10;
    d.x = Tensor<float>({img.n, 1, img.rows, img.cols});
    for (size_t i = 0; i < img.pixels.size(); ++i)
        d.x[int64_t(i)] = float(img.pixels[i]) / 255.0f;
    d.y.resize(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        ADVLAB_CHECK(labels[i] < 10, labels_path, ": label ", int(labels[i]),
                     " at index ", i, " is outside [0,9]");
        d.y[i] = int(labels[i]);
    }
    return d;
}

Dataset load_cifar10_batches(const std::vector<std::string>& paths, std::string name) {
    ADVLAB_CHECK(!paths.empty(), "no cifar batch files given");
    Dataset d;
    d.name = std::move(name);
    d.classes = 10;
    std::vector<float> px;
    for (const auto& path : paths) {
        std::string b = read_file_bytes(path);
        ADVLAB_CHECK(!b.empty() && int64_t(b.size()) % kCifarRecord == 0, path,
                     " has ", b.size(), " bytes, not a multiple of ", kCifarRecord,
                     "; first partial record at byte ",
                     (int64_t(b.size()) / kCifarRecord) * kCifarRecord);
        const int64_t n = int64_t(b.size()) / kCifarRecord;
        for (int64_t i = 0; i < n; ++i) {
            const uint8_t* rec =
                reinterpret_cast<const uint8_t*>(b.data()) + i * kCifarRecord;
            ADVLAB_CHECK(rec[0] < 10, path, ": label ", int(rec[0]), " in record ", i,
                         " is outside [0,9]");
            d.y.push_back(int(rec[0]));
            for (int64_t j = 1; j < kCifarRecord; ++j)
                px.push_back(float(rec[j]) / 255.0f);
        }
    }
    const int n = int(d.y.size());
    d.x = Tensor<float>({n, 3, 32, 32});
    std::copy(px.begin(), px.end(), d.x.data());
    return d;
}

void write_cifar10_batch(const std::string& path, const std::vector<uint8_t>& labels,
                         const std::vector<uint8_t>& pixels) {
    ADVLAB_CHECK(pixels.size() == labels.size() * 3072, "cifar batch wants ",
                 labels.size() * 3072, " pixel bytes, got ", pixels.size());
    std::vector<uint8_t> out;
    out.reserve(labels.size() * size_t(kCifarRecord));
    for (size_t i = 0; i < labels.size(); ++i) {
        out.push_back(labels[i]);
        out.insert(out.end(), pixels.begin() + int64_t(i) * 3072,
                   pixels.begin() + int64_t(i + 1) * 3072);
    }
    atomic_write_file(path, out.data(), out.size());
}

namespace {

// Seven-segment layout: bit 0..6 = A (top), B (upper right), C (lower
// right), D (bottom), E (lower left), F (upper left), G (middle).
constexpr uint8_t kSegments[10] = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
};

void fill_rect(uint8_t* img, int r0, int r1, int c0, int c1, int value) {
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (r >= 0 && r < 28 && c >= 0 && c < 28) {
                int v = img[r * 28 + c] + value;
                img[r * 28 + c] = uint8_t(std::min(v, 255));
            }
}

}  // namespace

void render_digits(int n, uint64_t seed, std::vector<uint8_t>& pixels,
                   std::vector<uint8_t>& labels) {
    ADVLAB_CHECK(n >= 0, "cannot render ", n, " digits");
    pixels.assign(size_t(n) * 784, 0);
    labels.resize(size_t(n));
    Rng rng = Rng::stream(seed, 0x646967);
    for (int i = 0; i < n; ++i) {
        const int digit = i % 10;
        labels[size_t(i)] = uint8_t(digit);
        uint8_t* img = pixels.data() + size_t(i) * 784;

        const int dx = rng.uniform_int(5) - 2;
        const int dy = rng.uniform_int(3) - 1;
        const int t = 1 + rng.uniform_int(2);  // stroke half-width
        const int xl = 9 + dx, xr = 18 + dx;
        const int yt = 5 + dy, ym = 14 + dy, yb = 23 + dy;
        const uint8_t segs = kSegments[digit];
        auto ink = [&] { return 200 + rng.uniform_int(56); };
        if (segs & 1) fill_rect(img, yt - t + 1, yt + t - 1, xl, xr, ink());
        if (segs & 2) fill_rect(img, yt, ym, xr - t + 1, xr + t - 1, ink());
        if (segs & 4) fill_rect(img, ym, yb, xr - t + 1, xr + t - 1, ink());
        if (segs & 8) fill_rect(img, yb - t + 1, yb + t - 1, xl, xr, ink());
        if (segs & 16) fill_rect(img, ym, yb, xl - t + 1, xl + t - 1, ink());
        if (segs & 32) fill_rect(img, yt, ym, xl - t + 1, xl + t - 1, ink());
        if (segs & 64) fill_rect(img, ym - t + 1, ym + t - 1, xl, xr, ink());

        for (int p = 0; p < 784; ++p) {
            const double v = double(img[p]) + 6.0 * rng.normal();
            img[p] = uint8_t(std::min(std::max(v, 0.0), 255.0));
        }
    }
}

Dataset synthetic_digits(int n, uint64_t seed) {
    std::vector<uint8_t> pixels, labels;
    render_digits(n, seed, pixels, labels);
    Dataset d;
    d.name = "digits";
    d.classes = 10;
    d.x = Tensor<float>({n, 1, 28, 28});
    for (size_t i = 0; i < pixels.size(); ++i)
        d.x[int64_t(i)] = float(pixels[i]) / 255.0f;
    d.y.assign(labels.begin(), labels.end());
    return d;
}

void write_digits_idx(const std::string& images_path, const std::string& labels_path,
                      int n, uint64_t seed) {
    std::vector<uint8_t> pixels, labels;
    render_digits(n, seed, pixels, labels);
    write_idx_images(images_path, pixels, n, 28, 28);
    write_idx_labels(labels_path, labels);
}

Dataset synthetic_gaussian(int n, uint64_t seed, const GaussianSpec& spec) {
    ADVLAB_CHECK(spec.sigma > 0, "gaussian sigma must be positive, got ", spec.sigma);
    Dataset d;
    d.name = "gauss2d";
    d.classes = 2;
    d.x = Tensor<float>({n, 2});
    d.y.resize(size_t(n));
    Rng rng = Rng::stream(seed, 0x676175);
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        const double mx = cls == 0 ? spec.mu0x : spec.mu1x;
        const double my = cls == 0 ? spec.mu0y : spec.mu1y;
        double vx = mx + spec.sigma * rng.normal();
        double vy = my + spec.sigma * rng.normal();
        d.x[int64_t(i) * 2] = float(std::min(std::max(vx, 0.0), 1.0));
        d.x[int64_t(i) * 2 + 1] = float(std::min(std::max(vy, 0.0), 1.0));
        d.y[size_t(i)] = cls;
    }
    return d;
}

Dataset subset(const Dataset& d, const std::vector<int64_t>& idx, std::string name) {
    const int64_t stride = d.size() > 0 ? numel(d.x.shape) / d.size() : 0;
    Shape s = d.x.shape;
    s[0] = int(idx.size());
    Dataset out;
    out.name = std::move(name);
    out.classes = d.classes;
    out.x = Tensor<float>(s);
    out.y.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        ADVLAB_CHECK(idx[i] >= 0 && idx[i] < d.size(), "subset index ", idx[i],
                     " out of range for ", d.size(), " examples");
        std::copy(d.x.data() + idx[i] * stride, d.x.data() + (idx[i] + 1) * stride,
                  out.x.data() + int64_t(i) * stride);
        out.y[i] = d.y[size_t(idx[i])];
    }
    return out;
}

DataSplit split_dataset(const Dataset& d, SplitSizes sizes, uint64_t seed) {
    ADVLAB_CHECK(sizes.train >= 0 && sizes.val >= 0 && sizes.test >= 0,
                 "split sizes must be non-negative");
    const int64_t want = int64_t(sizes.train) + sizes.val + sizes.test;
    ADVLAB_CHECK(want <= d.size(), "split wants ", want, " examples, dataset has ",
                 d.size());
    std::vector<int64_t> order(size_t(d.size()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = int64_t(i);
    Rng rng = Rng::stream(seed, 0x73706c);
    for (int64_t i = d.size() - 1; i > 0; --i)
        std::swap(order[size_t(i)], order[size_t(rng.uniform_int(int(i + 1)))]);

    auto take = [&](int64_t off, int count, const char* tag) {
        std::vector<int64_t> idx(order.begin() + off, order.begin() + off + count);
        return subset(d, idx, d.name + "-" + tag);
    };
    DataSplit s;
    s.train = take(0, sizes.train, "train");
    s.val = take(sizes.train, sizes.val, "val");
    s.test = take(int64_t(sizes.train) + sizes.val, sizes.test, "test");
    return s;
}

Tensor<float> augment_batch(const Tensor<float>& x, Rng& rng, int pad, bool hflip) {
    ADVLAB_CHECK(pad >= 0, "pad must be non-negative, got ", pad);
    if (x.shape.size() != 4) return x;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<float> out = Tensor<float>::zeros(x.shape);
    for (int i = 0; i < n; ++i) {
        const int dy = pad > 0 ? rng.uniform_int(2 * pad + 1) : 0;
        const int dx = pad > 0 ? rng.uniform_int(2 * pad + 1) : 0;
        const bool flip = hflip && rng.uniform() < 0.5;
        for (int ch = 0; ch < c; ++ch) {
            const float* src = x.data() + ((int64_t(i) * c + ch) * h) * w;
            float* dst = out.data() + ((int64_t(i) * c + ch) * h) * w;
            for (int r = 0; r < h; ++r) {
                const int sr = r + dy - pad;
                if (sr < 0 || sr >= h) continue;
                for (int cc = 0; cc < w; ++cc) {
                    const int sc = cc + dx - pad;
                    if (sc < 0 || sc >= w) continue;
                    dst[r * w + (flip ? w - 1 - cc : cc)] = src[sr * w + sc];
                }
            }
        }
    }
    return out;
}

}  // namespace advlab
