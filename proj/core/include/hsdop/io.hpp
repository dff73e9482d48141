#pragma once

#include <string>

#include "hsdop/complex.hpp"

namespace hsdop {

/// Load a triangle mesh in OFF format. Parse errors carry line numbers.
OrientedSimplicialComplex load_off(const std::string& path);

/// Write a 2-complex (or the triangle part of one) as OFF.
void write_off(const OrientedSimplicialComplex& c, const std::string& path);

/// Load a tet mesh from TetGen-style .node/.ele files. Node indices may be
/// 0- or 1-based; the base is detected from the smallest index used.
OrientedSimplicialComplex load_node_ele(const std::string& node_path,
                                        const std::string& ele_path);

/// Cochain JSON: {"degree": k, "complex_hash": "...", "values": [...]}.
/// Loading validates the hash against the supplied complex and throws
/// HashMismatch on disagreement.
Cochain load_cochain(const std::string& path,
                     const OrientedSimplicialComplex& c);
void write_cochain(const Cochain& w, const OrientedSimplicialComplex& c,
                   const std::string& path);

std::string hash_string(std::uint64_t h);

} // namespace hsdop
