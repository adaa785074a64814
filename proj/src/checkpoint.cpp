#include "advlab/checkpoint.hpp"

#include <cstring>
#include <map>

#include <json.hpp>

#include "advlab/fsio.hpp"

namespace advlab {

using nlohmann::json;

namespace {

template <class S>
void append_tensor(json& tensors, std::string& blob, const std::string& name,
                   const Tensor<S>& t, const char* role) {
    json e;
    e["name"] = name;
    e["shape"] = t.shape;
    e["role"] = role;
    e["offset"] = blob.size();
    tensors.push_back(std::move(e));
    blob.append(reinterpret_cast<const char*>(t.data()), t.v.size() * sizeof(S));
}

template <class S>
void fill_tensor(Tensor<S>& dst, const std::string& blob, size_t offset,
                 const std::string& name) {
    const size_t bytes = dst.v.size() * sizeof(S);
    ADVLAB_CHECK(offset + bytes <= blob.size(), "tensor '", name,
                 "' runs past the end of the blob");
    std::memcpy(dst.data(), blob.data() + offset, bytes);
}

}  // namespace

template <class S>
void save_model(const std::string& path, const Model<S>& m, const std::string& meta_json) {
    json man;
    man["kind"] = "model";
    man["arch"] = m.arch;
    man["precision"] = precision_tag<S>();
    man["bn_eps"] = double(m.bn_eps);
    man["bn_momentum"] = double(m.bn_momentum);
    man["meta"] = meta_json.empty() ? json::object() : json::parse(meta_json);
    man["tensors"] = json::array();

    std::string blob;
    for (size_t i = 0; i < m.params.size(); ++i)
        append_tensor(man["tensors"], blob, m.param_names[i], m.params[i], "param");
    for (size_t i = 0; i < m.stats.size(); ++i)
        append_tensor(man["tensors"], blob, m.stat_names[i], m.stats[i], "stat");
    man["blob_hash"] = hex64(fnv1a64(blob.data(), blob.size()));

    write_container(path, man.dump(), blob);
}

template <class S>
Model<S> load_model(const std::string& path) {
    Container c = read_container(path);
    json man = json::parse(c.manifest_json);
    ADVLAB_CHECK(man.value("kind", "") == "model", path, " is not a model checkpoint");
    const std::string prec = man.value("precision", "");
    ADVLAB_CHECK(prec == precision_tag<S>(), path, " stores ", prec,
                 " values, requested ", precision_tag<S>());
    const std::string want = hex64(fnv1a64(c.blob.data(), c.blob.size()));
    const std::string stored = man.value("blob_hash", "");
    ADVLAB_CHECK(want == stored, path, " blob hash mismatch: manifest says ", stored,
                 ", content hashes to ", want, " (corrupt or tampered file)");

    Model<S> m = model_from_arch<S>(man.at("arch").get<std::string>());
    m.bn_eps = S(man.value("bn_eps", 1e-5));
    m.bn_momentum = S(man.value("bn_momentum", 0.9));

    std::map<std::string, std::pair<bool, size_t>> slots;  // name -> (is_param, index)
    for (size_t i = 0; i < m.param_names.size(); ++i) slots[m.param_names[i]] = {true, i};
    for (size_t i = 0; i < m.stat_names.size(); ++i) slots[m.stat_names[i]] = {false, i};

    size_t filled = 0;
    for (const auto& e : man.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        auto it = slots.find(name);
        ADVLAB_CHECK(it != slots.end(), path, " carries tensor '", name,
                     "' that arch ", m.arch, " does not have");
        Tensor<S>& dst = it->second.first ? m.params[it->second.second]
                                          : m.stats[it->second.second];
        const Shape sh = e.at("shape").get<Shape>();
        ADVLAB_CHECK(sh == dst.shape, "tensor '", name, "' stored as ", shape_str(sh),
                     ", arch wants ", shape_str(dst.shape));
        fill_tensor(dst, c.blob, e.at("offset").get<size_t>(), name);
        ++filled;
    }
    ADVLAB_CHECK(filled == slots.size(), path, " fills ", filled, " of ", slots.size(),
                 " tensors of arch ", m.arch);
    return m;
}

std::string read_manifest_json(const std::string& path) {
    return read_container(path).manifest_json;
}

template void save_model<float>(const std::string&, const Model<float>&,
                                const std::string&);
template void save_model<double>(const std::string&, const Model<double>&,
                                 const std::string&);
template Model<float> load_model<float>(const std::string&);
template Model<double> load_model<double>(const std::string&);

}  // namespace advlab
