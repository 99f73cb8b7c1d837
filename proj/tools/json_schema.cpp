#include "json_schema.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace slogan::cli {

namespace {

using Json = nlohmann::json;

const std::set<std::string> kKnown{"$schema", "$id", "$defs", "$ref", "title", "description", "type", "enum",
                                   "properties", "required", "additionalProperties", "items", "minItems",
                                   "maxItems", "minLength", "minimum", "maximum", "exclusiveMinimum",
                                   "exclusiveMaximum"};

std::string escape_token(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

bool has_type(const Json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
    if (t == "number") return v.is_number();
    if (t == "null") return v.is_null();
    throw std::invalid_argument("schema: unknown type '" + t + "'");
}

std::string num(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
}

class Validator {
public:
    explicit Validator(const Json& root) : root_(root) {}

    void run(const Json& schema, const Json& v, const std::string& ptr) {
        for (auto it = schema.begin(); it != schema.end(); ++it)
            if (!kKnown.count(it.key())) throw std::invalid_argument("schema: unsupported keyword '" + it.key() + "'");

        if (schema.contains("$ref")) {
            const std::string ref = schema["$ref"].get<std::string>();
            if (ref.rfind("#/", 0) != 0) throw std::invalid_argument("schema: only local references are supported");
            run(root_.at(Json::json_pointer(ref.substr(1))), v, ptr);
            return;
        }
        if (schema.contains("type")) {
            const std::string t = schema["type"].get<std::string>();
            if (!has_type(v, t)) {
                issue(ptr, "expected " + t + ", got " + std::string(v.type_name()));
                return;
            }
        }
        if (schema.contains("enum")) {
            bool found = false;
            for (const auto& e : schema["enum"]) found = found || e == v;
            if (!found) issue(ptr, "value " + v.dump() + " is not one of " + schema["enum"].dump());
        }
        if (v.is_number()) numeric(schema, v.get<double>(), ptr);
        if (v.is_string() && schema.contains("minLength") &&
            v.get<std::string>().size() < schema["minLength"].get<std::size_t>())
            issue(ptr, "string shorter than " + schema["minLength"].dump());
        if (v.is_array()) array(schema, v, ptr);
        if (v.is_object()) object(schema, v, ptr);
    }

    std::vector<SchemaIssue> issues;

private:
    void issue(const std::string& ptr, std::string msg) { issues.push_back({ptr, std::move(msg)}); }

    void numeric(const Json& s, double x, const std::string& ptr) {
        if (s.contains("minimum") && x < s["minimum"].get<double>()) issue(ptr, "must be >= " + num(s["minimum"].get<double>()));
        if (s.contains("maximum") && x > s["maximum"].get<double>()) issue(ptr, "must be <= " + num(s["maximum"].get<double>()));
        if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
            issue(ptr, "must be > " + num(s["exclusiveMinimum"].get<double>()));
        if (s.contains("exclusiveMaximum") && x >= s["exclusiveMaximum"].get<double>())
            issue(ptr, "must be < " + num(s["exclusiveMaximum"].get<double>()));
    }

    void array(const Json& s, const Json& v, const std::string& ptr) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
            issue(ptr, "needs at least " + s["minItems"].dump() + " items");
        if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
            issue(ptr, "allows at most " + s["maxItems"].dump() + " items");
        if (s.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i) run(s["items"], v[i], ptr + "/" + std::to_string(i));
    }

    void object(const Json& s, const Json& v, const std::string& ptr) {
        if (s.contains("required"))
            for (const auto& r : s["required"]) {
                const std::string key = r.get<std::string>();
                if (!v.contains(key)) issue(ptr + "/" + escape_token(key), "required field is missing");
            }
        const Json empty = Json::object();
        const Json& props = s.contains("properties") ? s["properties"] : empty;
        const bool closed = s.contains("additionalProperties") && !s["additionalProperties"].get<bool>();
        for (auto it = v.begin(); it != v.end(); ++it) {
            const std::string p = ptr + "/" + escape_token(it.key());
            if (props.contains(it.key())) run(props[it.key()], it.value(), p);
            else if (closed) issue(p, "unknown key");
        }
    }

    const Json& root_;
};

}  // namespace

std::vector<SchemaIssue> validate_schema(const Json& schema, const Json& instance) {
    Validator v(schema);
    v.run(schema, instance, "");
    return std::move(v.issues);
}

}  // namespace slogan::cli
