#include "gift/inversion.hpp"

#include "gift/adam.hpp"

namespace gift {

namespace {

struct RecLossVars {
  ad::Var<double> mse, per, total;
};

RecLossVars buildReconstructionLoss(ad::Tape<double>& tape, const Generator& gen,
                                    const PerceptualModel& perceptual, LatentSpace space,
                                    const std::vector<ad::Var<double>>& comps,
                                    const FaceImage& source, double alpha,
                                    const Tensord& sourceFeatures) {
  ad::Var<double> img = gen.synthesizeOnTape(tape, space, comps);
  ad::Var<double> src = tape.constant(source.pixels);
  ad::Var<double> mse = ad::mean(ad::square(ad::sub(img, src)));
  ad::Var<double> feat = perceptual.featuresOnTape(tape, img);
  ad::Var<double> srcFeat = tape.constant(sourceFeatures);
  ad::Var<double> per = ad::mean(ad::square(ad::sub(feat, srcFeat)));
  ad::Var<double> total = ad::add(mse, ad::scale(per, alpha));
  return {mse, per, total};
}

}  // namespace

double reconstructionLoss(const Generator& gen, const PerceptualModel& perceptual,
                          const LatentCode& code, const FaceImage& source, double alpha) {
  gen.validateCode(code);
  validateImage(source);
  if (alpha < 0) throw ValidationError("alpha must be >= 0");
  if (source.height() != gen.outputHeight() || source.width() != gen.outputWidth())
    throw ValidationError("source image does not match generator resolution");
  Tensord srcFeat = perceptual.features(source);
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> comps;
  for (const auto& [name, t] : code.components) comps.push_back(tape.constant(t));
  RecLossVars loss =
      buildReconstructionLoss(tape, gen, perceptual, code.space, comps, source, alpha, srcFeat);
  return tape.value(loss.total)[0];
}

InversionResult invert(const Generator& gen, const PerceptualModel& perceptual,
                       const FaceImage& source, const OptimConfig& config,
                       const std::optional<LatentCode>& warmStart) {
  config.validate();
  validateImage(source);
  if (source.height() != gen.outputHeight() || source.width() != gen.outputWidth())
    throw ValidationError("source image does not match generator resolution");

  LatentCode code;
  if (warmStart.has_value()) {
    gen.validateCode(*warmStart);
    if (warmStart->space != config.space)
      throw IncompatibilityError("warm start is in a different latent space");
    code = *warmStart;
  } else if (const auto* toy = dynamic_cast<const ToyGenerator*>(&gen)) {
    code = toy->encode(source, config.space);
  } else {
    code = initLatent(gen, config.space, config.seed);
  }

  Tensord srcFeat = perceptual.features(source);
  InversionResult result;
  result.trace.reserve(static_cast<std::size_t>(config.t1Steps));
  AdamOptimizer adam({.lr = config.t1Lr});

  // Inversion always optimizes the full layout, whatever the search mode.
  for (int step = 0; step < config.t1Steps; ++step) {
    ad::Tape<double> tape;
    std::vector<ad::Var<double>> comps;
    for (const auto& [name, t] : code.components) comps.push_back(tape.param(t));
    RecLossVars loss =
        buildReconstructionLoss(tape, gen, perceptual, config.space, comps, source,
                                config.alpha, srcFeat);
    double total = tape.value(loss.total)[0];
    if (!std::isfinite(total)) throw DivergenceError("inversion loss diverged", step);
    result.trace.push_back({step, tape.value(loss.mse)[0], tape.value(loss.per)[0], total});
    tape.backward(loss.total);
    std::vector<Tensord*> params;
    std::vector<Tensord> grads;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      params.push_back(&code.components[i].second);
      grads.push_back(tape.grad(comps[i]).empty() ? Tensord::zeros(code.components[i].second.shape())
                                                  : tape.grad(comps[i]));
    }
    adam.step(params, grads);
  }

  result.recon = gen.synthesize(code);
  result.code = std::move(code);
  return result;
}

}  // namespace gift
