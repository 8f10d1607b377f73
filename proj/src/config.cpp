#include "config.hpp"

#include <fstream>
#include <sstream>

namespace mcq {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section = "global";
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                fail(ErrorKind::config_error,
                     "unterminated section header on line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                fail(ErrorKind::config_error,
                     "empty section name on line " + std::to_string(line_no));
            cfg.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::config_error,
                 "expected key = value on line " + std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            fail(ErrorKind::config_error,
                 "empty key on line " + std::to_string(line_no));
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return false;
    return sit->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return fallback;
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return fallback;
    return kit->second;
}

std::string Config::require(const std::string& section, const std::string& key) const {
    if (!has(section, key))
        fail(ErrorKind::config_error,
             "missing required key " + section + "." + key);
    return get(section, key, "");
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
        std::size_t pos = 0;
        const double parsed = std::stod(v, &pos);
        if (pos != v.size())
            fail(ErrorKind::config_error, "trailing characters in " + section + "." + key);
        return parsed;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail(ErrorKind::config_error,
             "cannot parse " + section + "." + key + " = '" + v + "' as a number");
    }
}

std::int64_t Config::get_int(const std::string& section, const std::string& key,
                             std::int64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
        std::size_t pos = 0;
        const std::int64_t parsed = std::stoll(v, &pos);
        if (pos != v.size())
            fail(ErrorKind::config_error, "trailing characters in " + section + "." + key);
        return parsed;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail(ErrorKind::config_error,
             "cannot parse " + section + "." + key + " = '" + v + "' as an integer");
    }
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorKind::config_error,
         "cannot parse " + section + "." + key + " = '" + v + "' as a boolean");
}

std::vector<double> Config::get_doubles(const std::string& section,
                                        const std::string& key) const {
    std::vector<double> out;
    if (!has(section, key)) return out;
    std::istringstream in(get(section, key, ""));
    std::string tok;
    while (in >> tok) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            fail(ErrorKind::config_error,
                 "cannot parse element '" + tok + "' of " + section + "." + key);
        }
    }
    return out;
}

std::vector<std::size_t> Config::get_sizes(
    const std::string& section, const std::string& key,
    const std::vector<std::size_t>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::size_t> out;
    for (double v : get_doubles(section, key)) {
        if (v < 0.0)
            fail(ErrorKind::config_error, section + "." + key + " must be nonnegative");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
    sections_[section][key] = value;
}

void Config::set_dotted(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        fail(ErrorKind::config_error,
             "override must look like section.key=value: '" + assignment + "'");
    const std::string path = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
        fail(ErrorKind::config_error,
             "override must look like section.key=value: '" + assignment + "'");
    set(path.substr(0, dot), path.substr(dot + 1), value);
}

std::string Config::dump() const {
    std::ostringstream os;
    for (const auto& [section, entries] : sections_) {
        os << "[" << section << "]\n";
        for (const auto& [key, value] : entries) os << key << " = " << value << "\n";
    }
    return os.str();
}

}  // namespace mcq
