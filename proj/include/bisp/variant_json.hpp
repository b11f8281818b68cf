#pragma once

#include "bisp/model.hpp"

#include <json.hpp>

namespace bisp {

inline void to_json(nlohmann::json& j, const VariantSpec& v) {
    j = nlohmann::json{{"strategy", to_string(v.strategy)},
                       {"skip_frames", v.skip_frames},
                       {"varca", v.varca},
                       {"consa", v.consa}};
}

// Accepts either a bare name ("BiSP", "model3") or an object with optional
// toggles; toggles in the object override the named preset.
inline void from_json(const nlohmann::json& j, VariantSpec& v) {
    if (j.is_string()) {
        v = VariantSpec::parse(j.get<std::string>());
        return;
    }
    v = VariantSpec::parse(j.value("strategy", std::string("BiSP")));
    if (j.contains("name")) v = VariantSpec::parse(j.at("name").get<std::string>());
    v.skip_frames = j.value("skip_frames", v.skip_frames);
    v.varca = j.value("varca", v.varca);
    v.consa = j.value("consa", v.consa);
}

} // namespace bisp
