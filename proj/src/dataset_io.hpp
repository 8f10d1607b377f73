#pragma once

#include <string>

#include "tabular.hpp"

namespace mcq {

/// Binary dataset container. Layout (little endian):
///   magic "MCQD" | u32 version | u64 count | u32 state_dim | u32 action_dim
///   | u8 discrete | u8[3] pad | u32 behavior kind | u64 generator seed
///   | f32 s[count*state_dim] | f32 a[count*action_dim] | f32 r[count]
///   | f32 s_next[count*state_dim] | u8 d[count]
constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

}  // namespace mcq
