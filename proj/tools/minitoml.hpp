#pragma once

// Small TOML-subset reader for experiment configs: [section] headers, flat
// key = value pairs (string, integer, float, boolean), # comments. Keys are
// addressed as "section.key". Anything outside this subset is rejected.

#include "seq2cause/core.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace minitoml {

struct Value {
    enum class Kind { Int, Float, Str, Bool };
    Kind kind = Kind::Int;
    int64_t i = 0;
    double f = 0.0;
    std::string s;
    bool b = false;
};

class Table {
public:
    static Table parse(const std::string& text) {
        Table t;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip_comment(line, lineno);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw s2c::config_error("config line " + std::to_string(lineno) +
                                            ": unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                if (!valid_name(section))
                    throw s2c::config_error("config line " + std::to_string(lineno) +
                                            ": bad section name '" + section + "'");
                continue;
            }
            size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw s2c::config_error("config line " + std::to_string(lineno) +
                                        ": expected key = value");
            std::string key = trim(s.substr(0, eq));
            std::string val = trim(s.substr(eq + 1));
            if (!valid_name(key))
                throw s2c::config_error("config line " + std::to_string(lineno) +
                                        ": bad key '" + key + "'");
            std::string full = section.empty() ? key : section + "." + key;
            if (t.values_.count(full))
                throw s2c::config_error("config line " + std::to_string(lineno) +
                                        ": duplicate key '" + full + "'");
            t.values_[full] = parse_value(val, lineno);
        }
        return t;
    }

    static Table parse_file(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw s2c::config_error("cannot open config file " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    int64_t get_int(const std::string& key) const {
        const Value& v = require(key);
        if (v.kind != Value::Kind::Int)
            throw s2c::config_error("config key " + key + " must be an integer");
        return v.i;
    }
    int64_t get_int(const std::string& key, int64_t fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    double get_double(const std::string& key) const {
        const Value& v = require(key);
        if (v.kind == Value::Kind::Int) return double(v.i);
        if (v.kind != Value::Kind::Float)
            throw s2c::config_error("config key " + key + " must be a number");
        return v.f;
    }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::string get_string(const std::string& key) const {
        const Value& v = require(key);
        if (v.kind != Value::Kind::Str)
            throw s2c::config_error("config key " + key + " must be a string");
        return v.s;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    bool get_bool(const std::string& key) const {
        const Value& v = require(key);
        if (v.kind != Value::Kind::Bool)
            throw s2c::config_error("config key " + key + " must be a boolean");
        return v.b;
    }
    bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? get_bool(key) : fallback;
    }

private:
    const Value& require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw s2c::config_error("config key " + key + " is missing");
        return it->second;
    }

    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static bool valid_name(const std::string& s) {
        if (s.empty()) return false;
        for (char c : s)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
                return false;
        return true;
    }

    // drop a # comment that is not inside a quoted string
    static std::string strip_comment(const std::string& line, int lineno) {
        bool in_str = false;
        for (size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (in_str && c == '\\') {
                ++i;
                continue;
            }
            if (c == '"') in_str = !in_str;
            if (!in_str && c == '#') return line.substr(0, i);
        }
        if (in_str)
            throw s2c::config_error("config line " + std::to_string(lineno) +
                                    ": unterminated string");
        return line;
    }

    static Value parse_value(const std::string& raw, int lineno) {
        Value v;
        if (raw.empty())
            throw s2c::config_error("config line " + std::to_string(lineno) + ": empty value");
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"')
                throw s2c::config_error("config line " + std::to_string(lineno) +
                                        ": unterminated string");
            v.kind = Value::Kind::Str;
            for (size_t i = 1; i + 1 < raw.size(); ++i) {
                if (raw[i] == '\\' && i + 2 < raw.size()) {
                    ++i;
                    v.s.push_back(raw[i]);
                } else {
                    v.s.push_back(raw[i]);
                }
            }
            return v;
        }
        if (raw == "true" || raw == "false") {
            v.kind = Value::Kind::Bool;
            v.b = raw == "true";
            return v;
        }
        // integer, then float; the whole token must parse
        {
            size_t pos = 0;
            bool ok = true;
            try {
                v.i = std::stoll(raw, &pos);
            } catch (...) {
                ok = false;
            }
            if (ok && pos == raw.size()) {
                v.kind = Value::Kind::Int;
                return v;
            }
        }
        {
            size_t pos = 0;
            bool ok = true;
            try {
                v.f = std::stod(raw, &pos);
            } catch (...) {
                ok = false;
            }
            if (ok && pos == raw.size()) {
                v.kind = Value::Kind::Float;
                return v;
            }
        }
        throw s2c::config_error("config line " + std::to_string(lineno) + ": bad value '" + raw +
                                "'");
    }

    std::map<std::string, Value> values_;
};

}  // namespace minitoml
