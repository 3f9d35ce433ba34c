#pragma once

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace deid {

struct point {
    double x = 0;
    double y = 0;
    friend bool operator==(const point&, const point&) = default;
};

/// One OCR text hit: recognized text plus the model's quadrilateral.
struct detection {
    std::string text;
    std::array<point, 4> box{};
    std::optional<double> confidence;
    friend bool operator==(const detection&, const detection&) = default;
};

/// {"text": str, "box": [[x,y] x4], "confidence": float}
[[nodiscard]] detection detection_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const detection& d);
[[nodiscard]] std::vector<detection> detections_from_json(const nlohmann::json& list);

}  // namespace deid
