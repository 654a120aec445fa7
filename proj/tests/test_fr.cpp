#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture.hpp"
#include "gift/fr.hpp"

#include <filesystem>

using namespace gift;

TEST_CASE("cosine similarity and verify rule") {
  Embedding a{Tensord::fromData({2}, {1.0, 0.0})};
  Embedding b{Tensord::fromData({2}, {0.0, 1.0})};
  Embedding c{Tensord::fromData({2}, {1.0, 0.0})};
  CHECK(cosineSimilarity(a, b) == doctest::Approx(0.0));
  CHECK(cosineSimilarity(a, c) == doctest::Approx(1.0));
  CHECK(cosineDistance(a, b) == doctest::Approx(1.0));
  CHECK(verify(a, c, 0.99));
  CHECK(!verify(a, b, 0.5));
  // Boundary: cos == tau counts as a match.
  CHECK(verify(a, b, 0.0));

  Embedding wrongDim{Tensord::fromData({3}, {1.0, 0.0, 0.0})};
  CHECK_THROWS_AS(cosineSimilarity(a, wrongDim), ValidationError);
  Embedding notUnit{Tensord::fromData({2}, {2.0, 0.0})};
  CHECK_THROWS(assertUnitNorm(notUnit));
}

TEST_CASE("threshold registry") {
  ThresholdRegistry reg = ThresholdRegistry::builtinDefaults();
  CHECK(reg.tau("irse50", 0.01) == doctest::Approx(0.241));
  CHECK(reg.tau("ir152", 0.01) == doctest::Approx(0.167));
  CHECK(reg.tau("facenet", 0.01) == doctest::Approx(0.409));
  CHECK(reg.tau("mobileface", 0.01) == doctest::Approx(0.302));
  CHECK_THROWS_AS(reg.tau("irse50", 0.001), ValidationError);
  CHECK_THROWS_AS(reg.tau("unknown", 0.01), ValidationError);
}

TEST_CASE("trained toy FR separates identities") {
  const auto& fx = testfx::Fixture::get();
  const auto& model = *fx.fr[0];

  // Embeddings are unit-norm and deterministic.
  FaceImage img = testfx::renderLatent(*fx.gen, LatentSpace::W, 1);
  Embedding e1 = model.embed(img);
  Embedding e2 = model.embed(img);
  assertUnitNorm(e1);
  CHECK(e1.values.raw() == e2.values.raw());

  // Same-identity jittered renders sit closer than different identities.
  ToyIdentityDataset ds = buildToyIdentityDataset(*fx.gen, 6, 4);
  double same = 0, diff = 0;
  int nSame = 0, nDiff = 0;
  std::vector<Embedding> embs;
  for (const auto& im : ds.images) embs.push_back(model.embed(im));
  for (std::size_t i = 0; i < embs.size(); ++i)
    for (std::size_t j = i + 1; j < embs.size(); ++j) {
      double s = cosineSimilarity(embs[i], embs[j]);
      if (ds.labels[i] == ds.labels[j]) {
        same += s;
        ++nSame;
      } else {
        diff += s;
        ++nDiff;
      }
    }
  CHECK(same / nSame > diff / nDiff + 0.1);
}

TEST_CASE("query counting and cache round-trip") {
  const auto& fx = testfx::Fixture::get();
  const auto& model = *fx.fr[1];
  model.resetQueries();
  FaceImage img = testfx::renderLatent(*fx.gen, LatentSpace::W, 2);
  model.embed(img);
  model.embed(img);
  CHECK(model.queries() == 2);
  model.resetQueries();
  CHECK(model.queries() == 0);

  // Cached reload gives bit-identical embeddings.
  std::ostringstream key;
  key << "toyfr_" << fx.gen->fingerprint() << "_s2_w24";
  auto reloaded = ToyFrModel::load(testfx::cacheDir() / key.str());
  CHECK(reloaded->id() == model.id());
  CHECK(reloaded->embed(img).values.raw() == model.embed(img).values.raw());
}

TEST_CASE("the four fixture backends are distinct") {
  const auto& fx = testfx::Fixture::get();
  FaceImage img = testfx::renderLatent(*fx.gen, LatentSpace::W, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      CHECK(fx.fr[i]->id() != fx.fr[j]->id());
      if (fx.fr[i]->embedDim() == fx.fr[j]->embedDim())
        CHECK(fx.fr[i]->embed(img).values.raw() != fx.fr[j]->embed(img).values.raw());
    }
}

TEST_CASE("ensemble validation") {
  Ensemble empty;
  CHECK_THROWS_AS(empty.validate(), ValidationError);
  const auto& fx = testfx::Fixture::get();
  Ensemble ok{{fx.fr[0], fx.fr[1], fx.fr[2]}};
  CHECK_NOTHROW(ok.validate());
}
