#include "memcore/json_io.hpp"

#include "memcore/error.hpp"

namespace memcore::jsonio {

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError("harness", where + " must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError("harness", "unknown key '" + item.key() + "' in " + where);
        }
    }
}

json quantizer_to_json(const layer::Quantizer& q) {
    if (!q) {
        return nullptr;
    }
    return {{"bits", q->bits}, {"lo", q->lo}, {"hi", q->hi}};
}

layer::Quantizer quantizer_from_json(const json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    layer::QuantizerSpec q;
    if (j.contains("fixed")) {
        require_keys(j, {"fixed"}, "quantizer");
        q = layer::QuantizerSpec::signed_fixed(j.at("fixed").at(0).get<unsigned>(),
                                               j.at("fixed").at(1).get<int>());
    } else {
        require_keys(j, {"bits", "lo", "hi"}, "quantizer");
        q.bits = j.at("bits").get<unsigned>();
        q.lo = j.at("lo").get<double>();
        q.hi = j.at("hi").get<double>();
    }
    q.validate();
    return q;
}

json device_to_json(const device::DeviceParams& p) {
    return {{"vp", p.vp},           {"vn", p.vn},           {"ap", p.ap}, {"an", p.an},
            {"xp", p.xp},           {"xn", p.xn},           {"alpha_p", p.alpha_p},
            {"alpha_n", p.alpha_n}, {"a1", p.a1},           {"a2", p.a2}, {"b", p.b},
            {"x0", p.x0},           {"x_floor", p.x_floor}};
}

device::DeviceParams device_from_json(const json& j, device::DeviceParams p) {
    require_keys(j,
                 {"vp", "vn", "ap", "an", "xp", "xn", "alpha_p", "alpha_n", "a1", "a2", "b", "x0",
                  "x_floor"},
                 "device");
    const auto read = [&j](const char* key, double& dst) {
        if (j.contains(key)) {
            dst = j.at(key).get<double>();
        }
    };
    read("vp", p.vp);
    read("vn", p.vn);
    read("ap", p.ap);
    read("an", p.an);
    read("xp", p.xp);
    read("xn", p.xn);
    read("alpha_p", p.alpha_p);
    read("alpha_n", p.alpha_n);
    read("a1", p.a1);
    read("a2", p.a2);
    read("b", p.b);
    read("x0", p.x0);
    read("x_floor", p.x_floor);
    p.validate();
    return p;
}

}  // namespace memcore::jsonio
