#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "errors.hpp"

namespace mcq {

/// INI-style configuration: [section] headers, key = value lines, '#' or ';'
/// comments. Values are strings; typed getters parse on demand. Sections and
/// keys are kept sorted so dump() is a canonical form usable in manifests.
class Config {
  public:
    static Config parse_string(const std::string& text);
    static Config parse_file(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    std::string require(const std::string& section, const std::string& key) const;

    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key,
                  bool fallback) const;
    std::vector<double> get_doubles(const std::string& section,
                                    const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& section,
                                       const std::string& key,
                                       const std::vector<std::size_t>& fallback) const;

    void set(const std::string& section, const std::string& key,
             const std::string& value);
    /// Applies an override of the form "section.key=value".
    void set_dotted(const std::string& assignment);

    /// Canonical text form (sorted sections and keys).
    std::string dump() const;

    const std::map<std::string, std::map<std::string, std::string>>& sections()
        const {
        return sections_;
    }

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace mcq
