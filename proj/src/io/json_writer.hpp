#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace otstab {

/// Insertion-ordered JSON object with %.17g numbers (null for non-finite).
class JsonObject {
public:
    JsonObject& add(const std::string& key, double v);
    JsonObject& add(const std::string& key, long long v);
    JsonObject& add(const std::string& key, unsigned long long v);
    JsonObject& add(const std::string& key, int v) { return add(key, static_cast<long long>(v)); }
    JsonObject& add(const std::string& key, std::size_t v) { return add(key, static_cast<unsigned long long>(v)); }
    JsonObject& add(const std::string& key, bool v);
    JsonObject& add(const std::string& key, const std::string& v);
    JsonObject& add(const std::string& key, const char* v) { return add(key, std::string(v)); }
    JsonObject& add(const std::string& key, std::span<const double> v);
    JsonObject& add(const std::string& key, const JsonObject& v);
    JsonObject& add_raw(const std::string& key, const std::string& json);

    /// Multi-line with two-space indent, trailing newline at top level.
    std::string dump(int indent = 0) const;

private:
    struct Item {
        std::string key;
        std::string scalar;                 // serialized value
        std::shared_ptr<JsonObject> child;  // nested object instead
    };
    std::vector<Item> items_;
};

std::string json_number(double x);
std::string json_string(const std::string& s);

}  // namespace otstab
