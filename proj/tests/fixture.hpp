#pragma once

#include "gift/fr.hpp"
#include "gift/generator.hpp"
#include "gift/perceptual.hpp"
#include "gift/segmentation.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <vector>

namespace gift::testfx {

inline std::filesystem::path cacheDir() {
  if (const char* env = std::getenv("GIFT_FIXTURE_CACHE")) return env;
  return "fixture-cache";
}

// Shared toy backends; FR training results are disk-cached so the cost is
// paid once across all test binaries.
struct Fixture {
  std::shared_ptr<ToyGenerator> gen = std::make_shared<ToyGenerator>();
  std::shared_ptr<ToyPerceptualModel> perceptual = std::make_shared<ToyPerceptualModel>();
  std::shared_ptr<ToySegmentationModel> seg = std::make_shared<ToySegmentationModel>();

  // Four independently seeded FR backends (alternating width variants).
  std::vector<std::shared_ptr<const FrModel>> fr;

  Fixture() {
    ToyIdentityDataset dataset;
    bool haveDataset = false;
    for (int i = 0; i < 4; ++i) {
      std::uint64_t seed = static_cast<std::uint64_t>(i + 1);
      int width = i % 2;
      std::ostringstream key;
      key << "toyfr_" << gen->fingerprint() << "_s" << seed << "_w" << (width == 0 ? 16 : 24);
      if (!std::filesystem::exists(cacheDir() / key.str() / "meta.json") && !haveDataset) {
        dataset = buildToyIdentityDataset(*gen);
        haveDataset = true;
      }
      fr.push_back(fitToyFrCached(*gen, dataset, seed, width, cacheDir()));
    }
  }

  static const Fixture& get() {
    static Fixture fx;
    return fx;
  }
};

// A face on the generator manifold: render of a seeded latent.
inline FaceImage renderLatent(const Generator& gen, LatentSpace space, std::uint64_t seed) {
  return gen.synthesize(initLatent(gen, space, seed));
}

}  // namespace gift::testfx
