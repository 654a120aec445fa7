#pragma once

#include "gift/errors.hpp"
#include "gift/tensor.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace gift {

// Named-tensor directory store (meta.json + raw little-endian f64 blobs).
// Used for toy-backend weight caching; same layout as the latent format.
void saveNamedTensors(const std::filesystem::path& dir,
                      const std::vector<std::pair<std::string, Tensord>>& tensors,
                      const std::string& kind, const std::string& descriptor);

// Returns tensors in stored order; checks `kind` and, when non-empty,
// `descriptor` against the file.
std::vector<std::pair<std::string, Tensord>> loadNamedTensors(
    const std::filesystem::path& dir, const std::string& kind,
    const std::string& descriptor = "");

}  // namespace gift
