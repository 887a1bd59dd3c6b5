#pragma once

#include <string>

#include "mfoc/grid.hpp"

namespace mfoc {

/// Binary field snapshot: little-endian header (magic "MFOC", version u32,
/// d u32, n u32, count u64) followed by count doubles in row-major node order.
void write_field_binary(const std::string& path, const ScalarField& f);
ScalarField read_field_binary(const std::string& path);

/// CSV alternative: one row per node, d index columns then the value.
void write_field_csv(const std::string& path, const ScalarField& f);

}  // namespace mfoc
