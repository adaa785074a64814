#pragma once

#include <string>

#include "advlab/nn.hpp"

namespace advlab {

template <class S>
constexpr const char* precision_tag() {
    if constexpr (sizeof(S) == 4)
        return "f32";
    else
        return "f64";
}

// Serialize a model (parameters, running stats, architecture) plus an
// optional JSON metadata object. Values round-trip bit-exactly; the stored
// blob hash is verified on load and mismatches are refused.
template <class S>
void save_model(const std::string& path, const Model<S>& m,
                const std::string& meta_json = "{}");

template <class S>
Model<S> load_model(const std::string& path);

// The manifest JSON text of any ALB1 file (models and soft-label sets).
std::string read_manifest_json(const std::string& path);

extern template void save_model<float>(const std::string&, const Model<float>&,
                                       const std::string&);
extern template void save_model<double>(const std::string&, const Model<double>&,
                                        const std::string&);
extern template Model<float> load_model<float>(const std::string&);
extern template Model<double> load_model<double>(const std::string&);

}  // namespace advlab
