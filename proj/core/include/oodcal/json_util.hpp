#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace oodcal {

// Assigns j[key] to field when present; absent keys keep their defaults.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
}

}  // namespace oodcal
