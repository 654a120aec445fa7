#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture.hpp"
#include "gift/gals.hpp"

using namespace gift;

namespace {
OptimConfig searchConfig(int t1, int t2, LatentSpace space, SearchMode mode) {
  OptimConfig cfg;
  cfg.t1Steps = t1;
  cfg.t2Steps = t2;
  cfg.space = space;
  cfg.searchMode = mode;
  return cfg;
}
}  // namespace

TEST_CASE("diversify p=0 is bit-identity") {
  const auto& fx = testfx::Fixture::get();
  FaceImage img = testfx::renderLatent(*fx.gen, LatentSpace::W, 50);
  DiversifyParams params;
  params.prob = 0.0;
  Rng rng(1);
  FaceImage out = diversify(img, params, rng);
  CHECK(out.pixels.raw() == img.pixels.raw());
}

TEST_CASE("diversify p=1 noise statistics") {
  FaceImage img{Tensord({64, 64, 3}, 0.5)};
  DiversifyParams params;
  params.prob = 1.0;
  params.resizeLo = params.resizeHi = 1.0;  // isolate the noise term
  params.noiseSigma = 0.05;
  Rng rng(123);
  FaceImage out = diversify(img, params, rng);
  Eigen::VectorXd diff = out.pixels.asVector() - img.pixels.asVector();
  double mean = diff.mean();
  double sd = std::sqrt((diff.array() - mean).square().sum() / (diff.size() - 1));
  CHECK(std::abs(sd - 0.05) < 0.005);
  CHECK(std::abs(mean) < 0.005);
}

TEST_CASE("diversify consumes one Bernoulli draw regardless of outcome") {
  FaceImage img{Tensord({16, 16, 3}, 0.5)};
  DiversifyParams off;
  off.prob = 0.0;
  Rng a(9), b(9);
  diversify(img, off, a);
  b.uniform();  // the single Bernoulli draw
  CHECK(a.uniform() == b.uniform());
}

TEST_CASE("adversarial loss equals mean cosine distance at p=0") {
  const auto& fx = testfx::Fixture::get();
  LatentCode code = initLatent(*fx.gen, LatentSpace::F, 51);
  FaceImage protectedImg = fx.gen->synthesize(code);
  FaceImage target = testfx::renderLatent(*fx.gen, LatentSpace::W, 52);
  DiversifyParams p0;
  p0.prob = 0.0;

  Ensemble one{{fx.fr[0]}};
  Rng rng(2);
  double l1 = adversarialLoss(*fx.gen, code, target, one, p0, rng);
  double expect1 = cosineDistance(fx.fr[0]->embed(protectedImg), fx.fr[0]->embed(target));
  CHECK(l1 == doctest::Approx(expect1).epsilon(1e-9));

  Ensemble two{{fx.fr[0], fx.fr[1]}};
  Rng rng2(2);
  double l2 = adversarialLoss(*fx.gen, code, target, two, p0, rng2);
  double expect2 =
      0.5 * (expect1 + cosineDistance(fx.fr[1]->embed(protectedImg), fx.fr[1]->embed(target)));
  CHECK(l2 == doctest::Approx(expect2).epsilon(1e-9));
}

TEST_CASE("cross entropy margin sanity (KLR bound)") {
  // Correct class ahead by margin 10 across C=6 -> CE below 5e-4.
  Tensord logits({2, 2, 6});
  std::vector<int> labels = {3, 3, 3, 3};
  for (int i = 0; i < 4; ++i) logits[i * 6 + 3] = 10.0;
  ad::Tape<double> t;
  auto loss = ad::softmaxCrossEntropy(t.constant(logits), labels);
  CHECK(t.value(loss)[0] <= 5e-4);
}

TEST_CASE("klr loss is zero-ish for the source's own labels and larger for shuffled") {
  const auto& fx = testfx::Fixture::get();
  LatentCode code = initLatent(*fx.gen, LatentSpace::F, 53);
  FaceImage img = fx.gen->synthesize(code);
  SemanticMap own = segmentLabels(*fx.seg, img);
  double lOwn = klrLoss(*fx.gen, code, own, *fx.seg);

  SemanticMap wrong = own;
  for (auto& l : wrong.labels) l = (l + 1) % own.classCount;
  double lWrong = klrLoss(*fx.gen, code, wrong, *fx.seg);
  CHECK(lOwn < lWrong);

  SemanticMap badShape = own;
  badShape.labels.pop_back();
  badShape.width -= 1;
  CHECK_THROWS_AS(klrLoss(*fx.gen, code, badShape, *fx.seg), ValidationError);
}

TEST_CASE("total loss is the weighted sum, verbatim defaults") {
  const auto& fx = testfx::Fixture::get();
  OptimConfig cfg;  // defaults: lambda_adv 1, lambda_sem 0.01
  CHECK(cfg.lambdaAdv == 1.0);
  CHECK(cfg.lambdaSem == 0.01);

  LatentCode code = initLatent(*fx.gen, LatentSpace::F, 54);
  FaceImage target = testfx::renderLatent(*fx.gen, LatentSpace::W, 55);
  SemanticMap labels = segmentLabels(*fx.seg, fx.gen->synthesize(code));
  Ensemble ens{{fx.fr[0], fx.fr[1]}};
  cfg.diversifyProb = 0.0;
  Rng rng(3);
  LossBreakdown lb = totalLoss(*fx.gen, code, target, labels, ens, *fx.seg, cfg, {}, rng);
  CHECK(std::abs(lb.total - (cfg.lambdaAdv * lb.adv + cfg.lambdaSem * lb.sem)) <=
        1e-12 * std::abs(lb.total));
}

TEST_CASE("protect with t2=0 equals the inversion reconstruction bit-exactly") {
  const auto& fx = testfx::Fixture::get();
  FaceImage source = testfx::renderLatent(*fx.gen, LatentSpace::W, 56);
  FaceImage target = testfx::renderLatent(*fx.gen, LatentSpace::W, 57);
  Ensemble ens{{fx.fr[0]}};

  OptimConfig cfg = searchConfig(20, 0, LatentSpace::F, SearchMode::GALS);
  InversionResult inv = invert(*fx.gen, *fx.perceptual, source, cfg);
  ProtectResult pr = protect(*fx.gen, *fx.perceptual, ens, *fx.seg, source, target, cfg);
  CHECK(pr.protectedImage.pixels.raw() == inv.recon.pixels.raw());
  CHECK(bitEqual(pr.code, inv.code));
  CHECK(pr.trace.empty());
}

TEST_CASE("protect is deterministic and freezes masked components") {
  const auto& fx = testfx::Fixture::get();
  FaceImage source = testfx::renderLatent(*fx.gen, LatentSpace::W, 58);
  FaceImage target = testfx::renderLatent(*fx.gen, LatentSpace::W, 59);
  Ensemble ens{{fx.fr[0], fx.fr[1]}};
  LatentCode warm = fx.gen->encode(source, LatentSpace::WPlus);

  OptimConfig cfg = searchConfig(0, 5, LatentSpace::WPlus, SearchMode::LALS);
  cfg.seed = 77;
  ProtectResult a =
      protect(*fx.gen, *fx.perceptual, ens, *fx.seg, source, target, cfg, {}, warm);
  ProtectResult b =
      protect(*fx.gen, *fx.perceptual, ens, *fx.seg, source, target, cfg, {}, warm);
  CHECK(a.protectedImage.pixels.raw() == b.protectedImage.pixels.raw());
  CHECK(bitEqual(a.code, b.code));
  REQUIRE(a.trace.size() == 5);
  CHECK(a.perSurrogateCos.size() == 2);

  // LALS on WPlus: styles 1..4 frozen bit-exactly, 5..8 updated.
  for (int i = 1; i <= 4; ++i) {
    std::string n = "style_" + std::to_string(i);
    CHECK(a.code.component(n).raw() == warm.component(n).raw());
  }
  bool anyMoved = false;
  for (int i = 5; i <= 8; ++i)
    if (a.code.component("style_" + std::to_string(i)).raw() !=
        warm.component("style_" + std::to_string(i)).raw())
      anyMoved = true;
  CHECK(anyMoved);
}

TEST_CASE("LALS in W space is rejected") {
  const auto& fx = testfx::Fixture::get();
  FaceImage source = testfx::renderLatent(*fx.gen, LatentSpace::W, 60);
  FaceImage target = testfx::renderLatent(*fx.gen, LatentSpace::W, 61);
  Ensemble ens{{fx.fr[0]}};
  OptimConfig cfg = searchConfig(0, 1, LatentSpace::W, SearchMode::LALS);
  CHECK_THROWS_AS(protect(*fx.gen, *fx.perceptual, ens, *fx.seg, source, target, cfg),
                  ValidationError);
}

TEST_CASE("search drives surrogate similarity toward the target") {
  const auto& fx = testfx::Fixture::get();
  FaceImage source = testfx::renderLatent(*fx.gen, LatentSpace::W, 62);
  FaceImage target = testfx::renderLatent(*fx.gen, LatentSpace::W, 63);
  Ensemble ens{{fx.fr[0], fx.fr[1], fx.fr[2]}};

  OptimConfig cfg = searchConfig(40, 25, LatentSpace::F, SearchMode::GALS);
  cfg.diversifyProb = 0.0;
  cfg.seed = 5;
  ProtectResult pr = protect(*fx.gen, *fx.perceptual, ens, *fx.seg, source, target, cfg);

  double meanClean = 0, meanProt = 0;
  for (const auto& m : ens.models) {
    meanClean += cosineSimilarity(m->embed(source), m->embed(target));
  }
  for (double c : pr.perSurrogateCos) meanProt += c;
  meanClean /= 3;
  meanProt /= 3;
  CHECK(meanProt > meanClean);
  // The adversarial loss should have dropped over the search.
  CHECK(pr.trace.back().adv < pr.trace.front().adv);
}
