#include "gift/latent.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace gift {

namespace fs = std::filesystem;
using nlohmann::json;

std::string toString(LatentSpace s) {
  switch (s) {
    case LatentSpace::W: return "w";
    case LatentSpace::WPlus: return "wplus";
    case LatentSpace::F: return "f";
  }
  throw std::logic_error("unreachable latent space");
}

LatentSpace latentSpaceFromString(const std::string& s) {
  if (s == "w") return LatentSpace::W;
  if (s == "wplus" || s == "w+") return LatentSpace::WPlus;
  if (s == "f") return LatentSpace::F;
  throw ValidationError("unknown latent space: " + s);
}

bool bitEqual(const LatentCode& a, const LatentCode& b) {
  if (a.space != b.space || a.generatorFingerprint != b.generatorFingerprint) return false;
  if (a.components.size() != b.components.size()) return false;
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    if (a.components[i].first != b.components[i].first) return false;
    const Tensord& x = a.components[i].second;
    const Tensord& y = b.components[i].second;
    if (x.shape() != y.shape()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * x.numel()) != 0) return false;
  }
  return true;
}

void serializeLatent(const LatentCode& code, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  meta["space"] = toString(code.space);
  meta["generator_fingerprint"] = code.generatorFingerprint;
  meta["dtype"] = "f64";
  meta["byte_order"] = "little";
  meta["toolkit_version"] = "0.1";
  json comps = json::array();
  for (const auto& [name, t] : code.components) {
    json c;
    c["name"] = name;
    c["shape"] = t.shape();
    comps.push_back(c);
    std::ofstream out(dir / (name + ".bin"), std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write latent component file: " + name);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.numel()));
    if (!out) throw FormatError("write failed for latent component: " + name);
  }
  meta["components"] = comps;
  std::ofstream mf(dir / "meta.json", std::ios::trunc);
  if (!mf) throw FormatError("cannot write meta.json in " + dir.string());
  mf << meta.dump(2) << "\n";
}

LatentCode deserializeLatent(const fs::path& dir, const std::string& expectedFingerprint) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw FormatError("missing meta.json in " + dir.string());
  json meta;
  try {
    mf >> meta;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid meta.json: ") + e.what());
  }
  LatentCode code;
  try {
    code.space = latentSpaceFromString(meta.at("space").get<std::string>());
    code.generatorFingerprint = meta.at("generator_fingerprint").get<std::string>();
    if (meta.at("dtype").get<std::string>() != "f64")
      throw FormatError("unsupported latent dtype: " + meta.at("dtype").get<std::string>());
    if (meta.at("byte_order").get<std::string>() != "little")
      throw FormatError("unsupported byte order");
    for (const auto& c : meta.at("components")) {
      std::string name = c.at("name").get<std::string>();
      std::vector<int> shape = c.at("shape").get<std::vector<int>>();
      Tensord t(shape);
      std::ifstream in(dir / (name + ".bin"), std::ios::binary);
      if (!in) throw FormatError("missing latent component file: " + name);
      in.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.numel()));
      if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * t.numel()))
        throw FormatError("truncated latent component file: " + name);
      if (!t.allFinite()) throw FormatError("non-finite values in component: " + name);
      code.components.emplace_back(std::move(name), std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed meta.json: ") + e.what());
  }
  if (!expectedFingerprint.empty() && code.generatorFingerprint != expectedFingerprint)
    throw IncompatibilityError("latent was produced by generator '" +
                               code.generatorFingerprint + "', expected '" +
                               expectedFingerprint + "'");
  return code;
}

}  // namespace gift
