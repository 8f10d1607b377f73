#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace mcq {

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;  // stored as f32 on disk

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

/// Named-tensor container. Layout (little endian):
///   magic "MCQC" | u32 version | u32 n_entries
///   | entries: u16 name_len, name bytes, u8 rank, u64 dims[rank], u64 offset
///   | u64 payload element count | f32 payload
/// Offsets are element offsets into the payload; they must be in bounds and
/// non-overlapping, and names must be unique.
constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

/// Lookup helper; throws if absent.
const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                               const std::string& name);

struct QTable;  // dp.hpp

/// Value tables serialize under the name "qtable/values".
void write_qtable(const std::string& path, const QTable& q);
QTable read_qtable(const std::string& path);

}  // namespace mcq
