#pragma once

#include "gift/errors.hpp"
#include "gift/tensor.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace gift {

enum class LatentSpace { W, WPlus, F };

std::string toString(LatentSpace s);
LatentSpace latentSpaceFromString(const std::string& s);

// A latent point of the generator: named components in declaration order,
// bound to the generator that produced it via an opaque fingerprint.
struct LatentCode {
  LatentSpace space = LatentSpace::W;
  std::vector<std::pair<std::string, Tensord>> components;
  std::string generatorFingerprint;

  const Tensord& component(const std::string& name) const {
    for (const auto& [n, t] : components)
      if (n == name) return t;
    throw std::out_of_range("latent component not found: " + name);
  }
  Tensord& component(const std::string& name) {
    for (auto& [n, t] : components)
      if (n == name) return t;
    throw std::out_of_range("latent component not found: " + name);
  }
  bool hasComponent(const std::string& name) const {
    for (const auto& [n, t] : components)
      if (n == name) return true;
    return false;
  }
  std::int64_t numel() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : components) n += t.numel();
    return n;
  }
};

bool bitEqual(const LatentCode& a, const LatentCode& b);

// Directory format: meta.json plus one raw little-endian binary per component.
void serializeLatent(const LatentCode& code, const std::filesystem::path& dir);

// expectedFingerprint empty means "accept whatever the file declares".
LatentCode deserializeLatent(const std::filesystem::path& dir,
                             const std::string& expectedFingerprint = "");

}  // namespace gift
