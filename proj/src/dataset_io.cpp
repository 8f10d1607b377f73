#include "dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace mcq {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'Q', 'D'};

template <typename T>
void write_raw(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) fail(ErrorKind::truncated, "unexpected end of dataset file");
    return value;
}

void write_f32_column(std::ostream& os, const std::vector<float>& col) {
    os.write(reinterpret_cast<const char*>(col.data()),
             static_cast<std::streamsize>(col.size() * sizeof(float)));
}

std::vector<float> read_f32_column(std::istream& is, std::size_t count) {
    std::vector<float> col(count);
    is.read(reinterpret_cast<char*>(col.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!is) fail(ErrorKind::truncated, "dataset payload shorter than header count");
    return col;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::io_error, "cannot open '" + path + "' for writing");

    os.write(kMagic, 4);
    write_raw<std::uint32_t>(os, kDatasetVersion);
    write_raw<std::uint64_t>(os, data.transitions.size());
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(data.state_dim));
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(data.action_dim));
    write_raw<std::uint8_t>(os, data.discrete ? 1 : 0);
    const std::uint8_t pad[3] = {0, 0, 0};
    os.write(reinterpret_cast<const char*>(pad), 3);
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(data.behavior));
    write_raw<std::uint64_t>(os, data.seed);

    const std::size_t n = data.transitions.size();
    std::vector<float> col;
    col.reserve(n * data.state_dim);
    for (const auto& tr : data.transitions)
        for (double v : tr.s) col.push_back(static_cast<float>(v));
    write_f32_column(os, col);
    col.clear();
    for (const auto& tr : data.transitions)
        for (double v : tr.a) col.push_back(static_cast<float>(v));
    write_f32_column(os, col);
    col.clear();
    for (const auto& tr : data.transitions) col.push_back(static_cast<float>(tr.r));
    write_f32_column(os, col);
    col.clear();
    for (const auto& tr : data.transitions)
        for (double v : tr.s_next) col.push_back(static_cast<float>(v));
    write_f32_column(os, col);
    std::vector<std::uint8_t> dcol;
    dcol.reserve(n);
    for (const auto& tr : data.transitions) dcol.push_back(tr.d);
    os.write(reinterpret_cast<const char*>(dcol.data()),
             static_cast<std::streamsize>(dcol.size()));
    if (!os) fail(ErrorKind::io_error, "short write to '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::io_error, "cannot open '" + path + "'");

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        fail(ErrorKind::bad_magic, "'" + path + "' is not a dataset file");
    const auto version = read_raw<std::uint32_t>(is);
    if (version != kDatasetVersion)
        fail(ErrorKind::version_mismatch,
             "dataset version " + std::to_string(version) + " unsupported");

    Dataset data;
    const auto count = read_raw<std::uint64_t>(is);
    data.state_dim = read_raw<std::uint32_t>(is);
    data.action_dim = read_raw<std::uint32_t>(is);
    data.discrete = read_raw<std::uint8_t>(is) != 0;
    std::uint8_t pad[3];
    is.read(reinterpret_cast<char*>(pad), 3);
    data.behavior = static_cast<BehaviorKind>(read_raw<std::uint32_t>(is));
    data.seed = read_raw<std::uint64_t>(is);
    if (data.state_dim == 0 || data.action_dim == 0)
        fail(ErrorKind::dimension_mismatch, "dataset header dims");

    const auto s = read_f32_column(is, count * data.state_dim);
    const auto a = read_f32_column(is, count * data.action_dim);
    const auto r = read_f32_column(is, count);
    const auto s_next = read_f32_column(is, count * data.state_dim);
    std::vector<std::uint8_t> d(count);
    is.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(count));
    if (!is) fail(ErrorKind::truncated, "dataset payload shorter than header count");

    data.transitions.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& tr = data.transitions[i];
        tr.s.assign(s.begin() + i * data.state_dim,
                    s.begin() + (i + 1) * data.state_dim);
        tr.a.assign(a.begin() + i * data.action_dim,
                    a.begin() + (i + 1) * data.action_dim);
        tr.r = r[i];
        tr.s_next.assign(s_next.begin() + i * data.state_dim,
                         s_next.begin() + (i + 1) * data.state_dim);
        tr.d = d[i];
    }
    return data;
}

}  // namespace mcq
