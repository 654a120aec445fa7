#include "gift/weights.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace gift {

namespace fs = std::filesystem;
using nlohmann::json;

void saveNamedTensors(const fs::path& dir,
                      const std::vector<std::pair<std::string, Tensord>>& tensors,
                      const std::string& kind, const std::string& descriptor) {
  fs::create_directories(dir);
  json meta;
  meta["kind"] = kind;
  meta["descriptor"] = descriptor;
  meta["dtype"] = "f64";
  meta["byte_order"] = "little";
  json entries = json::array();
  for (const auto& [name, t] : tensors) {
    json e;
    e["name"] = name;
    e["shape"] = t.shape();
    entries.push_back(e);
    std::ofstream out(dir / (name + ".bin"), std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write tensor file: " + name);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.numel()));
  }
  meta["tensors"] = entries;
  std::ofstream mf(dir / "meta.json", std::ios::trunc);
  if (!mf) throw FormatError("cannot write meta.json in " + dir.string());
  mf << meta.dump(2) << "\n";
}

std::vector<std::pair<std::string, Tensord>> loadNamedTensors(const fs::path& dir,
                                                              const std::string& kind,
                                                              const std::string& descriptor) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw FormatError("missing meta.json in " + dir.string());
  json meta;
  try {
    mf >> meta;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid meta.json: ") + e.what());
  }
  if (meta.value("kind", "") != kind)
    throw IncompatibilityError("tensor store kind '" + meta.value("kind", "") +
                               "', expected '" + kind + "'");
  if (!descriptor.empty() && meta.value("descriptor", "") != descriptor)
    throw IncompatibilityError("tensor store descriptor mismatch in " + dir.string());
  std::vector<std::pair<std::string, Tensord>> tensors;
  for (const auto& e : meta.at("tensors")) {
    std::string name = e.at("name").get<std::string>();
    Tensord t(e.at("shape").get<std::vector<int>>());
    std::ifstream in(dir / (name + ".bin"), std::ios::binary);
    if (!in) throw FormatError("missing tensor file: " + name);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.numel()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * t.numel()))
      throw FormatError("truncated tensor file: " + name);
    tensors.emplace_back(std::move(name), std::move(t));
  }
  return tensors;
}

}  // namespace gift
