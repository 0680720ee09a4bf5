#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xseg/errors.hpp"

namespace xseg {

// Plain key=value settings ('#' comments, one pair per line). Keys must be
// registered up front; unknown keys in a file or override are errors so typos
// never pass silently. Every run echoes the fully-resolved values.
class RunConfig {
public:
    void define(const std::string& key, const std::string& default_value);

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // flag override

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string str(const std::string& key) const;
    int integer(const std::string& key) const;
    double real(const std::string& key) const;
    bool boolean(const std::string& key) const;  // 0/1/true/false
    uint64_t u64(const std::string& key) const;

    // "key=value" lines in registration order.
    std::vector<std::string> echo() const;
    // FNV-1a over the canonical echo; ties every report to its exact settings.
    uint64_t hash() const;
    // standard comment header: version + config hash + echoed values
    std::vector<std::string> header_lines(const std::string& tool) const;

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

}  // namespace xseg
