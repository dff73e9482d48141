#include "hsdop/params.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "hsdop/errors.hpp"
#include "hsdop/io.hpp"

namespace hsdop {

Eigen::Index ParameterStore::add(const std::string& name, const Mat& init) {
    if (name.empty()) throw InvalidParameter("parameter name must not be empty");
    if (index_.count(name))
        throw InvalidParameter("duplicate parameter name: " + name);
    TensorSpec spec;
    spec.name = name;
    spec.rows = init.rows();
    spec.cols = init.cols();
    spec.offset = data_.size();
    data_.conservativeResize(spec.offset + spec.size());
    Eigen::Map<Mat>(data_.data() + spec.offset, spec.rows, spec.cols) = init;
    index_[name] = specs_.size();
    specs_.push_back(spec);
    return spec.offset;
}

bool ParameterStore::has(const std::string& name) const {
    return index_.count(name) > 0;
}

const TensorSpec& ParameterStore::spec(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw InvalidParameter("unknown parameter: " + name);
    return specs_[it->second];
}

Eigen::Map<const Mat> ParameterStore::get(const std::string& name) const {
    const TensorSpec& s = spec(name);
    return {data_.data() + s.offset, s.rows, s.cols};
}

void ParameterStore::set(const std::string& name, const Mat& value) {
    const TensorSpec& s = spec(name);
    if (value.rows() != s.rows || value.cols() != s.cols)
        throw DimensionMismatch("parameter " + name + ": shape mismatch");
    Eigen::Map<Mat>(data_.data() + s.offset, s.rows, s.cols) = value;
}

namespace {

std::uint64_t fnv1a_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace

void save_checkpoint(const std::string& prefix, const ParameterStore& store,
                     const std::string& meta_json) {
    const std::string bin_path = prefix + ".bin";
    const std::string json_path = prefix + ".json";

    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError("cannot write " + bin_path);
    const auto bytes = static_cast<std::size_t>(store.size()) * sizeof(double);
    bin.write(reinterpret_cast<const char*>(store.flat().data()),
              static_cast<std::streamsize>(bytes));
    if (!bin) throw IoError("short write to " + bin_path);
    bin.close();

    nlohmann::json j;
    j["format_version"] = 1;
    j["dtype"] = "float64_le";
    j["blob_hash"] = hash_string(fnv1a_bytes(store.flat().data(), bytes));
    j["total_size"] = store.size();
    j["tensors"] = nlohmann::json::array();
    for (const auto& s : store.manifest())
        j["tensors"].push_back({{"name", s.name},
                                {"rows", s.rows},
                                {"cols", s.cols},
                                {"offset", s.offset}});
    j["meta"] = nlohmann::json::parse(meta_json);

    std::ofstream meta(json_path);
    if (!meta) throw IoError("cannot write " + json_path);
    meta << j.dump(2) << "\n";
}

ParameterStore load_checkpoint(const std::string& prefix,
                               std::string* meta_json) {
    const std::string bin_path = prefix + ".bin";
    const std::string json_path = prefix + ".json";

    std::ifstream meta(json_path);
    if (!meta) throw IoError("cannot read " + json_path);
    nlohmann::json j;
    try {
        meta >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(json_path + ": " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"] != 1)
        throw ParseError(json_path + ": unsupported checkpoint format");

    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError("cannot read " + bin_path);
    const auto total = j.at("total_size").get<Eigen::Index>();
    Vec data(total);
    const auto bytes = static_cast<std::size_t>(total) * sizeof(double);
    bin.read(reinterpret_cast<char*>(data.data()),
             static_cast<std::streamsize>(bytes));
    if (bin.gcount() != static_cast<std::streamsize>(bytes))
        throw IoError(bin_path + ": truncated blob");

    const std::string want = j.at("blob_hash").get<std::string>();
    const std::string got = hash_string(fnv1a_bytes(data.data(), bytes));
    if (want != got)
        throw HashMismatch(bin_path + ": blob hash " + got +
                           " does not match manifest " + want);

    ParameterStore store;
    for (const auto& t : j.at("tensors")) {
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        const auto offset = t.at("offset").get<Eigen::Index>();
        if (offset < 0 || offset + rows * cols > total)
            throw ParseError(json_path + ": tensor outside blob bounds");
        Eigen::Map<const Mat> view(data.data() + offset, rows, cols);
        store.add(t.at("name").get<std::string>(), view);
    }
    if (store.size() != total)
        throw ParseError(json_path + ": manifest does not cover the blob");

    if (meta_json) *meta_json = j.value("meta", nlohmann::json::object()).dump();
    return store;
}

} // namespace hsdop
