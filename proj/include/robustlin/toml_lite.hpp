#pragma once

// Reader for the subset of TOML used by robustlin config files:
// [table] and [a.b] headers, bare/quoted keys, basic and literal strings,
// integers, floats (incl. inf/nan), booleans, and (nested, multi-line) arrays.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace robustlin::toml {

struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
    enum class Type { string, integer, floating, boolean, array, table };
    Type type = Type::table;
    std::string str;      // string payload, or the literal text of a number
    bool boolean = false;
    double number = 0.0;
    std::shared_ptr<Array> arr;
    std::shared_ptr<Table> tab;

    bool is_string() const { return type == Type::string; }
    bool is_number() const { return type == Type::integer || type == Type::floating; }
    bool is_integer() const { return type == Type::integer; }
    bool is_bool() const { return type == Type::boolean; }
    bool is_array() const { return type == Type::array; }
    bool is_table() const { return type == Type::table; }

    double as_double() const {
        if (!is_number()) throw parse_error("toml: expected a number");
        return number;
    }
    std::int64_t as_int() const {
        if (!is_integer()) throw parse_error("toml: expected an integer");
        return std::stoll(str);
    }
    std::uint64_t as_uint64() const {
        if (!is_integer() || (!str.empty() && str[0] == '-')) throw parse_error("toml: expected a non-negative integer");
        return std::stoull(str, nullptr, 0);
    }
    const std::string& as_string() const {
        if (!is_string()) throw parse_error("toml: expected a string");
        return str;
    }
    bool as_bool() const {
        if (!is_bool()) throw parse_error("toml: expected a boolean");
        return boolean;
    }
    const Array& as_array() const {
        if (!is_array()) throw parse_error("toml: expected an array");
        return *arr;
    }
    const Table& as_table() const {
        if (!is_table()) throw parse_error("toml: expected a table");
        return *tab;
    }

    const Value* find(const std::string& key) const {
        if (!is_table()) return nullptr;
        auto it = tab->find(key);
        return it == tab->end() ? nullptr : &it->second;
    }

    std::vector<double> as_doubles() const {
        std::vector<double> out;
        for (const auto& v : as_array()) out.push_back(v.as_double());
        return out;
    }

    static Value make_table() {
        Value v;
        v.type = Type::table;
        v.tab = std::make_shared<Table>();
        return v;
    }
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string text) : s_(std::move(text)) {}

    Value parse() {
        Value root = Value::make_table();
        Table* current = root.tab.get();
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                ++i_;
                if (!eof() && peek() == '[') fail("arrays of tables are not supported");
                skip_inline_ws();
                std::vector<std::string> path = parse_key_path();
                skip_inline_ws();
                expect(']');
                current = open_table(root, path);
                end_of_line();
                continue;
            }
            std::vector<std::string> path = parse_key_path();
            skip_inline_ws();
            expect('=');
            skip_inline_ws();
            Value v = parse_value();
            Table* target = current;
            for (size_t k = 0; k + 1 < path.size(); ++k) target = descend(*target, path[k]);
            if (target->count(path.back())) fail("duplicate key '" + path.back() + "'");
            (*target)[path.back()] = std::move(v);
            end_of_line();
        }
        return root;
    }

private:
    std::string s_;
    size_t i_ = 0;
    int line_ = 1;

    bool eof() const { return i_ >= s_.size(); }
    char peek() const { return s_[i_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw parse_error("toml line " + std::to_string(line_) + ": " + msg);
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++i_;
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
    }

    void skip_comment() {
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') ++i_;
    }

    void skip_ws_comments_newlines() {
        while (!eof()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') {
                ++i_;
            } else if (c == '\n') {
                ++i_;
                ++line_;
            } else if (c == '#') {
                skip_comment();
            } else {
                break;
            }
        }
    }

    void end_of_line() {
        skip_inline_ws();
        skip_comment();
        if (eof()) return;
        if (peek() == '\r') ++i_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected trailing characters");
        ++i_;
        ++line_;
    }

    Table* descend(Table& t, const std::string& key) {
        auto it = t.find(key);
        if (it == t.end()) it = t.emplace(key, Value::make_table()).first;
        if (!it->second.is_table()) fail("key '" + key + "' is not a table");
        return it->second.tab.get();
    }

    Table* open_table(Value& root, const std::vector<std::string>& path) {
        Table* t = root.tab.get();
        for (const auto& k : path) t = descend(*t, k);
        return t;
    }

    std::string parse_key() {
        if (eof()) fail("expected a key");
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
            key += s_[i_++];
        if (key.empty()) fail("expected a key");
        return key;
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path{parse_key()};
        while (true) {
            skip_inline_ws();
            if (eof() || peek() != '.') break;
            ++i_;
            skip_inline_ws();
            path.push_back(parse_key());
        }
        return path;
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = s_[i_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("bad escape");
            char e = s_[i_++];
            switch (e) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(std::string("unsupported escape \\") + e);
            }
        }
        return out;
    }

    std::string parse_literal_string() {
        expect('\'');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = s_[i_++];
            if (c == '\'') break;
            out += c;
        }
        return out;
    }

    Value parse_value() {
        if (eof()) fail("expected a value");
        char c = peek();
        Value v;
        if (c == '"' || c == '\'') {
            v.type = Value::Type::string;
            v.str = c == '"' ? parse_basic_string() : parse_literal_string();
            return v;
        }
        if (c == '[') return parse_array();
        if (c == '{') fail("inline tables are not supported");
        std::string tok;
        while (!eof()) {
            char d = peek();
            if (std::isalnum(static_cast<unsigned char>(d)) || d == '+' || d == '-' || d == '.' || d == '_')
                tok += s_[i_++];
            else
                break;
        }
        if (tok == "true" || tok == "false") {
            v.type = Value::Type::boolean;
            v.boolean = tok == "true";
            return v;
        }
        return parse_number(tok);
    }

    Value parse_number(std::string tok) {
        if (tok.empty()) fail("expected a value");
        std::string clean;
        for (char ch : tok)
            if (ch != '_') clean += ch;
        Value v;
        std::string body = clean;
        bool neg = false;
        if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
            neg = body[0] == '-';
            body = body.substr(1);
        }
        if (body == "inf" || body == "nan") {
            v.type = Value::Type::floating;
            v.number = body == "inf" ? (neg ? -HUGE_VAL : HUGE_VAL) : std::nan("");
            v.str = clean;
            return v;
        }
        bool is_float = clean.find_first_of(".eE") != std::string::npos &&
                        clean.rfind("0x", 0) != 0;
        size_t used = 0;
        try {
            v.number = std::stod(clean, &used);
        } catch (const std::exception&) {
            fail("invalid number '" + tok + "'");
        }
        if (used != clean.size()) fail("invalid number '" + tok + "'");
        v.type = is_float ? Value::Type::floating : Value::Type::integer;
        v.str = clean[0] == '+' ? clean.substr(1) : clean;
        return v;
    }

    Value parse_array() {
        expect('[');
        Value v;
        v.type = Value::Type::array;
        v.arr = std::make_shared<Array>();
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                ++i_;
                break;
            }
            v.arr->push_back(parse_value());
            skip_ws_comments_newlines();
            if (eof()) fail("unterminated array");
            if (peek() == ',') {
                ++i_;
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
        return v;
    }
};

}  // namespace detail

inline Value parse(const std::string& text) { return detail::Parser(text).parse(); }

}  // namespace robustlin::toml
