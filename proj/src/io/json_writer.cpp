#include "io/json_writer.hpp"

#include <cmath>
#include <cstdio>

namespace otstab {

std::string json_number(double x)
{
    if (!std::isfinite(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string json_string(const std::string& s)
{
    std::string out = "\"";
    for (char ch : s) {
        switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(ch) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                out += buf;
            } else {
                out += ch;
            }
        }
    }
    return out + "\"";
}

JsonObject& JsonObject::add(const std::string& key, double v)
{
    items_.push_back({key, json_number(v), nullptr});
    return *this;
}
JsonObject& JsonObject::add(const std::string& key, long long v)
{
    items_.push_back({key, std::to_string(v), nullptr});
    return *this;
}
JsonObject& JsonObject::add(const std::string& key, unsigned long long v)
{
    items_.push_back({key, std::to_string(v), nullptr});
    return *this;
}
JsonObject& JsonObject::add(const std::string& key, bool v)
{
    items_.push_back({key, v ? "true" : "false", nullptr});
    return *this;
}
JsonObject& JsonObject::add(const std::string& key, const std::string& v)
{
    items_.push_back({key, json_string(v), nullptr});
    return *this;
}
JsonObject& JsonObject::add(const std::string& key, std::span<const double> v)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + json_number(v[i]);
    items_.push_back({key, s + "]", nullptr});
    return *this;
}
JsonObject& JsonObject::add(const std::string& key, const JsonObject& v)
{
    items_.push_back({key, {}, std::make_shared<JsonObject>(v)});
    return *this;
}
JsonObject& JsonObject::add_raw(const std::string& key, const std::string& json)
{
    items_.push_back({key, json, nullptr});
    return *this;
}

std::string JsonObject::dump(int indent) const
{
    const std::string pad(2 * static_cast<std::size_t>(indent + 1), ' '), close(2 * static_cast<std::size_t>(indent), ' ');
    std::string s = "{\n";
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& it = items_[i];
        s += pad + json_string(it.key) + ": " + (it.child ? it.child->dump(indent + 1) : it.scalar) +
             (i + 1 < items_.size() ? ",\n" : "\n");
    }
    s += close + "}";
    if (indent == 0) s += "\n";
    return s;
}

}  // namespace otstab
