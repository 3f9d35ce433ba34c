#include "deid/detection.hpp"

#include <stdexcept>

namespace deid {

detection detection_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("detection must be an object");
    detection d;
    d.text = j.at("text").get<std::string>();
    const auto& box = j.at("box");
    if (!box.is_array() || box.size() != 4) throw std::invalid_argument("detection box needs 4 points");
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& p = box[i];
        if (!p.is_array() || p.size() != 2) throw std::invalid_argument("box point must be [x, y]");
        d.box[i] = {p[0].get<double>(), p[1].get<double>()};
    }
    if (const auto it = j.find("confidence"); it != j.end() && !it->is_null()) d.confidence = it->get<double>();
    return d;
}

nlohmann::json to_json(const detection& d) {
    nlohmann::json box = nlohmann::json::array();
    for (const auto& p : d.box) box.push_back({p.x, p.y});
    nlohmann::json j{{"text", d.text}, {"box", box}};
    if (d.confidence) j["confidence"] = *d.confidence;
    return j;
}

std::vector<detection> detections_from_json(const nlohmann::json& list) {
    if (!list.is_array()) throw std::invalid_argument("detections must be a JSON array");
    std::vector<detection> out;
    for (const auto& j : list) out.push_back(detection_from_json(j));
    return out;
}

}  // namespace deid
