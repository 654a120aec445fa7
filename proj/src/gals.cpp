#include "gift/gals.hpp"

#include "gift/adam.hpp"

#include <cmath>

namespace gift {

namespace {

ad::Var<double> buildAdversarialLoss(ad::Tape<double>& tape, ad::Var<double> image, const Ensemble& ensemble,
                                     const std::vector<Embedding>& targetEmbeddings,
                                     const DiversifyParams& params, Rng& rng) {
  // One shared transform draw: Eq.-style single application of T before the
  // ensemble mean.
  ad::Var<double> tImg = diversifyOnTape(tape, image, params, rng);
  ad::Var<double> sum;
  for (std::size_t n = 0; n < ensemble.models.size(); ++n) {
    ad::Var<double> e = ensemble.models[n]->embedOnTape(tape, tImg);
    ad::Var<double> tgt = tape.constant(targetEmbeddings[n].values);
    ad::Var<double> one = tape.constant(Tensord::scalar(1.0));
    ad::Var<double> d = ad::sub(one, ad::dot(e, tgt));
    sum = n == 0 ? d : ad::add(sum, d);
  }
  return ad::scale(sum, 1.0 / static_cast<double>(ensemble.models.size()));
}

ad::Var<double> buildKlrLoss(ad::Tape<double>& tape, ad::Var<double> image,
                             const SemanticMap& sourceLabels, const SegmentationModel& seg) {
  const Tensord& v = tape.value(image);
  if (v.dim(0) != sourceLabels.height || v.dim(1) != sourceLabels.width)
    throw ValidationError("source label map does not match image dimensions");
  ad::Var<double> logits = seg.logitsOnTape(tape, image);
  return ad::softmaxCrossEntropy(logits, sourceLabels.labels);
}

std::vector<ad::Var<double>> registerComponents(ad::Tape<double>& tape, const LatentCode& code,
                                                const ComponentMask* mask) {
  std::vector<ad::Var<double>> comps;
  for (const auto& [name, t] : code.components) {
    bool opt = mask == nullptr || mask->isOptimizable(name);
    comps.push_back(opt ? tape.param(t) : tape.constant(t));
  }
  return comps;
}

std::vector<Embedding> embedTarget(const Ensemble& ensemble, const FaceImage& target) {
  std::vector<Embedding> embs;
  embs.reserve(ensemble.models.size());
  for (const auto& m : ensemble.models) {
    Embedding e = m->embed(target);
    assertUnitNorm(e);
    embs.push_back(std::move(e));
  }
  return embs;
}

}  // namespace

ad::Var<double> diversifyOnTape(ad::Tape<double>& tape, ad::Var<double> image,
                                const DiversifyParams& params, Rng& rng) {
  params.validate();
  bool apply = rng.uniform() < params.prob;  // one Bernoulli draw per call
  if (!apply) return image;
  const Tensord& v = tape.value(image);
  int h = v.dim(0), w = v.dim(1);
  double u = rng.uniform(params.resizeLo, params.resizeHi);
  int rh = std::max(1, static_cast<int>(std::lround(u * h)));
  int rw = std::max(1, static_cast<int>(std::lround(u * w)));
  ad::Var<double> x = image;
  if (rh != h || rw != w) {
    x = ad::bilinearResize(x, rh, rw);
    x = ad::bilinearResize(x, h, w);
  }
  if (params.noiseSigma > 0) {
    Tensord noise(v.shape());
    for (std::int64_t i = 0; i < noise.numel(); ++i)
      noise[i] = params.noiseSigma * rng.gaussian();
    x = ad::add(x, tape.constant(noise));
    x = ad::clamp01(x);
  }
  return x;
}

FaceImage diversify(const FaceImage& image, const DiversifyParams& params, Rng& rng) {
  validateImage(image);
  ad::Tape<double> tape;
  ad::Var<double> img = tape.constant(image.pixels);
  ad::Var<double> out = diversifyOnTape(tape, img, params, rng);
  return FaceImage{tape.value(out)};
}

double adversarialLoss(const Generator& gen, const LatentCode& code, const FaceImage& target,
                       const Ensemble& ensemble, const DiversifyParams& params, Rng& rng) {
  gen.validateCode(code);
  validateImage(target);
  ensemble.validate();
  std::vector<Embedding> targetEmbs = embedTarget(ensemble, target);
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> comps = registerComponents(tape, code, nullptr);
  ad::Var<double> img = gen.synthesizeOnTape(tape, code.space, comps);
  ad::Var<double> loss = buildAdversarialLoss(tape, img, ensemble, targetEmbs, params, rng);
  return tape.value(loss)[0];
}

double klrLoss(const Generator& gen, const LatentCode& code, const SemanticMap& sourceLabels,
               const SegmentationModel& seg) {
  gen.validateCode(code);
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> comps = registerComponents(tape, code, nullptr);
  ad::Var<double> img = gen.synthesizeOnTape(tape, code.space, comps);
  ad::Var<double> loss = buildKlrLoss(tape, img, sourceLabels, seg);
  return tape.value(loss)[0];
}

LossBreakdown totalLoss(const Generator& gen, const LatentCode& code, const FaceImage& target,
                        const SemanticMap& sourceLabels, const Ensemble& ensemble,
                        const SegmentationModel& seg, const OptimConfig& config,
                        const DiversifyParams& params, Rng& rng) {
  config.validate();
  gen.validateCode(code);
  ensemble.validate();
  std::vector<Embedding> targetEmbs = embedTarget(ensemble, target);
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> comps = registerComponents(tape, code, nullptr);
  ad::Var<double> img = gen.synthesizeOnTape(tape, code.space, comps);
  ad::Var<double> adv = buildAdversarialLoss(tape, img, ensemble, targetEmbs, params, rng);
  ad::Var<double> sem = buildKlrLoss(tape, img, sourceLabels, seg);
  ad::Var<double> total =
      ad::add(ad::scale(adv, config.lambdaAdv), ad::scale(sem, config.lambdaSem));
  return {tape.value(adv)[0], tape.value(sem)[0], tape.value(total)[0]};
}

ProtectResult protect(const Generator& gen, const PerceptualModel& perceptual,
                      const Ensemble& ensemble, const SegmentationModel& seg,
                      const FaceImage& source, const FaceImage& target,
                      const OptimConfig& config, const DiversifyParams& paramsIn,
                      const std::optional<LatentCode>& inversionWarm) {
  config.validate();
  ensemble.validate();
  validateImage(source);
  validateImage(target);
  if (config.searchMode == SearchMode::LALS && config.space == LatentSpace::W)
    throw ValidationError("LALS is undefined for space W: no layer-wise decomposition");

  DiversifyParams params = paramsIn;
  params.prob = config.diversifyProb;
  params.validate();

  LatentCode code;
  if (inversionWarm.has_value()) {
    gen.validateCode(*inversionWarm);
    if (inversionWarm->space != config.space)
      throw IncompatibilityError("warm latent is in a different latent space");
    code = *inversionWarm;
  } else {
    code = invert(gen, perceptual, source, config).code;
  }

  std::vector<Embedding> targetEmbs = embedTarget(ensemble, target);
  SemanticMap sourceLabels = segmentLabels(seg, source);
  ComponentMask mask = componentMask(gen, code, config.searchMode);

  Rng rng(config.seed);
  AdamOptimizer adam({.lr = config.t2Lr});

  ProtectResult result;
  result.trace.reserve(static_cast<std::size_t>(config.t2Steps));

  for (int step = 0; step < config.t2Steps; ++step) {
    ad::Tape<double> tape;
    std::vector<ad::Var<double>> comps = registerComponents(tape, code, &mask);
    ad::Var<double> img = gen.synthesizeOnTape(tape, config.space, comps);
    ad::Var<double> adv = buildAdversarialLoss(tape, img, ensemble, targetEmbs, params, rng);
    ad::Var<double> sem = buildKlrLoss(tape, img, sourceLabels, seg);
    ad::Var<double> total =
        ad::add(ad::scale(adv, config.lambdaAdv), ad::scale(sem, config.lambdaSem));
    double totalV = tape.value(total)[0];
    if (!std::isfinite(totalV)) throw DivergenceError("adversarial search diverged", step);
    result.trace.push_back({step, tape.value(adv)[0], tape.value(sem)[0], totalV});
    tape.backward(total);
    std::vector<Tensord*> optParams;
    std::vector<Tensord> grads;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      if (!mask.isOptimizable(code.components[i].first)) continue;
      optParams.push_back(&code.components[i].second);
      grads.push_back(tape.grad(comps[i]).empty()
                          ? Tensord::zeros(code.components[i].second.shape())
                          : tape.grad(comps[i]));
    }
    adam.step(optParams, grads);
  }

  result.protectedImage = gen.synthesize(code);
  result.perSurrogateCos.reserve(ensemble.models.size());
  for (std::size_t n = 0; n < ensemble.models.size(); ++n) {
    Embedding e = ensemble.models[n]->embed(result.protectedImage);
    result.perSurrogateCos.push_back(cosineSimilarity(e, targetEmbs[n]));
  }
  result.code = std::move(code);
  return result;
}

}  // namespace gift
