#include "advlab/distill.hpp"

#include <cstring>
#include <sstream>

#include "advlab/fsio.hpp"
#include "advlab/prob.hpp"
#include "nlohmann/json.hpp"

namespace advlab {

// One JSON header line, then the rows as raw little-endian f32. The header
// carries enough provenance to reject labels from a different teacher or a
// different dataset without touching the payload.
void save_soft_labels(const std::string& path, const SoftLabelSet& s) {
    ADVLAB_CHECK(s.probs.shape.size() == 2, "soft labels must be [n, k], got shape ",
                 shape_str(s.probs.shape));
    const int64_t n = s.probs.dim(0);
    const int64_t k = s.probs.dim(1);
    ADVLAB_CHECK(n > 0 && k > 0, "refusing to save an empty label set");
    nlohmann::json header = {{"kind", "soft-labels"},
                             {"n", n},
                             {"k", k},
                             {"tau", s.tau},
                             {"teacher_hash", hex64(s.teacher_hash)},
                             {"dataset_fingerprint", hex64(s.dataset_fingerprint)},
                             {"mode", to_string(s.mode)}};
    std::string out = header.dump();
    out.push_back('\n');
    const size_t payload = size_t(n * k) * sizeof(float);
    const size_t base = out.size();
    out.resize(base + payload);
    std::memcpy(out.data() + base, s.probs.data(), payload);
    atomic_write_file(path, out);
}

SoftLabelSet load_soft_labels(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    const size_t nl = bytes.find('\n');
    ADVLAB_CHECK(nl != std::string::npos, path, ": missing header terminator");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const std::exception& e) {
        fail(path, ": bad header: ", e.what());
    }
    ADVLAB_CHECK(header.value("kind", "") == std::string("soft-labels"), path,
                 ": not a soft label file (kind '", header.value("kind", ""), "')");
    const int64_t n = header.at("n").get<int64_t>();
    const int64_t k = header.at("k").get<int64_t>();
    ADVLAB_CHECK(n > 0 && k > 0, path, ": header claims ", n, " rows of ", k,
                 " classes");

    SoftLabelSet s;
    s.tau = header.at("tau").get<double>();
    ADVLAB_CHECK(s.tau > 0, path, ": temperature must be positive, got ", s.tau);
    s.teacher_hash = parse_hex64(header.at("teacher_hash").get<std::string>());
    s.dataset_fingerprint =
        parse_hex64(header.at("dataset_fingerprint").get<std::string>());
    s.mode = parse_label_mode(header.at("mode").get<std::string>());

    const size_t want = size_t(n * k) * sizeof(float);
    const size_t have = bytes.size() - nl - 1;
    ADVLAB_CHECK(have >= want, path, ": truncated payload, want ", want,
                 " bytes after the header, got ", have);
    ADVLAB_CHECK(have <= want, path, ": trailing bytes starting at byte ",
                 nl + 1 + want);

    s.probs = Tensor<float>({int(n), int(k)});
    std::memcpy(s.probs.data(), bytes.data() + nl + 1, want);

    std::vector<float> row(static_cast<size_t>(k));
    for (int64_t i = 0; i < n; ++i) {
        std::copy(s.probs.data() + i * k, s.probs.data() + (i + 1) * k, row.begin());
        try {
            ProbVector<float>::from_raw(row);
        } catch (const Error& e) {
            fail(path, ": row ", i, " is not a distribution: ", e.what());
        }
    }
    return s;
}

void write_label_spectrum_csv(const std::string& path,
                              const std::vector<SpectrumCurve>& curves) {
    std::ostringstream out;
    out << "tau,rank,mean_prob\n";
    for (const SpectrumCurve& c : curves)
        for (size_t r = 0; r < c.mean_sorted.size(); ++r)
            out << fmt_double(c.tau) << ',' << (r + 1) << ','
                << fmt_double(c.mean_sorted[r]) << '\n';
    atomic_write_file(path, out.str());
}

}  // namespace advlab
