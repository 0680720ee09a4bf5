#include "xseg/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "xseg/version.hpp"

namespace xseg {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::define(const std::string& key, const std::string& default_value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = default_value;
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

std::string RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

int RunConfig::integer(const std::string& key) const {
    const std::string v = str(key);
    try {
        size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

double RunConfig::real(const std::string& key) const {
    const std::string v = str(key);
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

bool RunConfig::boolean(const std::string& key) const {
    const std::string v = str(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

uint64_t RunConfig::u64(const std::string& key) const {
    const std::string v = str(key);
    try {
        size_t pos = 0;
        unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an unsigned integer");
    }
}

std::vector<std::string> RunConfig::echo() const {
    std::vector<std::string> out;
    for (const std::string& k : order_) out.push_back(k + "=" + values_.at(k));
    return out;
}

uint64_t RunConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& line : echo()) {
        for (char c : line) h = (h ^ uint8_t(c)) * 0x100000001b3ULL;
        h = (h ^ uint8_t('\n')) * 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> RunConfig::header_lines(const std::string& tool) const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "# xseg %s %s config_hash=%016llx", kVersion, tool.c_str(),
                  (unsigned long long)hash());
    std::vector<std::string> out{buf};
    for (const std::string& line : echo()) out.push_back("# " + line);
    return out;
}

}  // namespace xseg
