#pragma once

#include <map>
#include <string>
#include <vector>

#include "imfield/common.hpp"

namespace imfield {

struct ConfigEntry {
    std::string key;
    std::string def;
    std::string doc;
};

// Flat key=value configuration with a closed key registry. Values come from
// (in order of precedence) CLI --key=value overrides, a config file, and the
// built-in defaults; unknown keys are rejected at the point they appear.
class Config {
public:
    Config();

    static const std::vector<ConfigEntry>& registry();

    // `# comments`, blank lines, and `key = value` lines. Unknown keys and
    // malformed lines report the offending line number.
    void load_file(const std::string& path);
    void load_text(const std::string& text, const std::string& origin);

    // `where` names the source in error messages ("flag --foo", "file:3").
    void set(const std::string& key, const std::string& value, const std::string& where);

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    // One "key=value" line per registry entry, current values. The eval
    // report embeds this so runs are self-describing.
    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace imfield
