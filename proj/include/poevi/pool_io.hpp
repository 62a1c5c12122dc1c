#pragma once

#include <string>

#include "poevi/expert.hpp"

namespace poevi {

// Expert-pool file: {"dim": D, "experts": [{"mu": [...], "lambda": [[...]]}],
// "alpha": [...]}, lambda row-major as a full matrix.
PoEDensity load_pool(const std::string& path);
void save_pool(const PoEDensity& poe, const std::string& path);

std::string pool_to_json(const PoEDensity& poe);
PoEDensity pool_from_json(const std::string& text);

}  // namespace poevi
