#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hsdop/complex.hpp"

namespace hsdop {

/// Shape and placement of one named tensor inside a flat parameter vector.
struct TensorSpec {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;

    Eigen::Index size() const { return rows * cols; }
};

/// Named dense tensors packed column-major into one flat vector, so an
/// optimizer can treat the whole model as a single array while layers read
/// their blocks through shaped views.
class ParameterStore {
public:
    /// Appends a tensor initialized from init; returns its offset.
    Eigen::Index add(const std::string& name, const Mat& init);

    bool has(const std::string& name) const;
    const TensorSpec& spec(const std::string& name) const;
    Eigen::Map<const Mat> get(const std::string& name) const;
    void set(const std::string& name, const Mat& value);

    const std::vector<TensorSpec>& manifest() const { return specs_; }
    Vec& flat() { return data_; }
    const Vec& flat() const { return data_; }
    Eigen::Index size() const { return data_.size(); }

private:
    Vec data_;
    std::vector<TensorSpec> specs_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Writes <prefix>.json (manifest, blob hash, caller metadata) plus
/// <prefix>.bin (raw little-endian float64 blob, column-major per tensor).
void save_checkpoint(const std::string& prefix, const ParameterStore& store,
                     const std::string& meta_json = "{}");

/// Loads a checkpoint pair; verifies the blob hash (HashMismatch on
/// corruption). meta_json, when non-null, receives the stored metadata.
ParameterStore load_checkpoint(const std::string& prefix,
                               std::string* meta_json = nullptr);

} // namespace hsdop
