#include "checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "dp.hpp"

namespace mcq {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'Q', 'C'};

template <typename T>
void write_raw(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) fail(ErrorKind::truncated, "unexpected end of checkpoint file");
    return value;
}

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& tensors) {
    std::set<std::string> names;
    for (const auto& t : tensors) {
        if (!names.insert(t.name).second)
            fail(ErrorKind::duplicate_name, "tensor '" + t.name + "'");
        if (t.data.size() != t.element_count())
            fail(ErrorKind::dimension_mismatch,
                 "tensor '" + t.name + "' data does not match its shape");
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::io_error, "cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_raw<std::uint32_t>(os, kCheckpointVersion);
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));

    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        write_raw<std::uint16_t>(os, static_cast<std::uint16_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) write_raw<std::uint64_t>(os, d);
        write_raw<std::uint64_t>(os, offset);
        offset += t.element_count();
    }
    write_raw<std::uint64_t>(os, offset);
    for (const auto& t : tensors) {
        std::vector<float> payload(t.data.size());
        for (std::size_t i = 0; i < t.data.size(); ++i)
            payload[i] = static_cast<float>(t.data[i]);
        os.write(reinterpret_cast<const char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size() * sizeof(float)));
    }
    if (!os) fail(ErrorKind::io_error, "short write to '" + path + "'");
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::io_error, "cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        fail(ErrorKind::bad_magic, "'" + path + "' is not a checkpoint file");
    const auto version = read_raw<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        fail(ErrorKind::version_mismatch,
             "checkpoint version " + std::to_string(version) + " unsupported");

    const auto n_entries = read_raw<std::uint32_t>(is);
    std::vector<NamedTensor> tensors(n_entries);
    std::vector<std::uint64_t> offsets(n_entries);
    std::set<std::string> names;
    for (std::size_t i = 0; i < n_entries; ++i) {
        const auto name_len = read_raw<std::uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) fail(ErrorKind::truncated, "checkpoint manifest");
        if (!names.insert(name).second)
            fail(ErrorKind::duplicate_name, "tensor '" + name + "'");
        const auto rank = read_raw<std::uint8_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = read_raw<std::uint64_t>(is);
        offsets[i] = read_raw<std::uint64_t>(is);
        tensors[i].name = std::move(name);
        tensors[i].shape = std::move(shape);
    }
    const auto payload_len = read_raw<std::uint64_t>(is);

    // Offsets must tile the payload without overlap.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (std::size_t i = 0; i < n_entries; ++i) {
        const std::uint64_t len = tensors[i].element_count();
        if (offsets[i] + len > payload_len)
            fail(ErrorKind::truncated, "tensor '" + tensors[i].name +
                                            "' extends past the payload");
        spans.emplace_back(offsets[i], offsets[i] + len);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
        if (spans[i].first < spans[i - 1].second)
            fail(ErrorKind::dimension_mismatch, "overlapping tensor offsets");

    std::vector<float> payload(payload_len);
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload_len * sizeof(float)));
    if (!is) fail(ErrorKind::truncated, "checkpoint payload");

    for (std::size_t i = 0; i < n_entries; ++i) {
        const std::uint64_t len = tensors[i].element_count();
        tensors[i].data.resize(len);
        for (std::uint64_t j = 0; j < len; ++j)
            tensors[i].data[j] = static_cast<double>(payload[offsets[i] + j]);
    }
    return tensors;
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                               const std::string& name) {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    fail(ErrorKind::config_error, "checkpoint is missing tensor '" + name + "'");
}

void write_qtable(const std::string& path, const QTable& q) {
    write_checkpoint(path,
                     {{"qtable/values", {q.n_states, q.n_actions}, q.values}});
}

QTable read_qtable(const std::string& path) {
    const auto tensors = read_checkpoint(path);
    const NamedTensor& t = find_tensor(tensors, "qtable/values");
    if (t.shape.size() != 2)
        fail(ErrorKind::shape_mismatch, "qtable/values must be rank 2");
    QTable q(t.shape[0], t.shape[1]);
    q.values = t.data;
    return q;
}

}  // namespace mcq
