#include "gift/generator.hpp"

#include "gift/adam.hpp"
#include "gift/rng.hpp"

#include <sstream>

namespace gift {

std::string toString(SearchMode m) { return m == SearchMode::GALS ? "gals" : "lals"; }

SearchMode searchModeFromString(const std::string& s) {
  if (s == "gals") return SearchMode::GALS;
  if (s == "lals") return SearchMode::LALS;
  throw ValidationError("unknown search mode: " + s);
}

FaceImage Generator::synthesize(const LatentCode& code) const {
  validateCode(code);
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> comps;
  comps.reserve(code.components.size());
  for (const auto& [name, t] : code.components) comps.push_back(tape.constant(t));
  ad::Var<double> out = synthesizeOnTape(tape, code.space, comps);
  return FaceImage{tape.value(out)};
}

void Generator::validateCode(const LatentCode& code) const {
  if (code.generatorFingerprint != fingerprint())
    throw IncompatibilityError("latent fingerprint '" + code.generatorFingerprint +
                               "' does not match generator '" + fingerprint() + "'");
  std::vector<LayoutEntry> lay = layout(code.space);
  if (lay.size() != code.components.size())
    throw IncompatibilityError("latent has " + std::to_string(code.components.size()) +
                               " components, layout declares " + std::to_string(lay.size()));
  for (std::size_t i = 0; i < lay.size(); ++i) {
    if (lay[i].name != code.components[i].first)
      throw IncompatibilityError("latent component '" + code.components[i].first +
                                 "' where layout expects '" + lay[i].name + "'");
    if (lay[i].shape != code.components[i].second.shape())
      throw IncompatibilityError("latent component '" + lay[i].name + "' has shape " +
                                 code.components[i].second.shapeString());
    if (!code.components[i].second.allFinite())
      throw ValidationError("latent component '" + lay[i].name + "' has non-finite values");
  }
}

LatentCode initLatent(const Generator& gen, LatentSpace space, std::uint64_t seed) {
  Rng rng(seed);
  LatentCode code;
  code.space = space;
  code.generatorFingerprint = gen.fingerprint();
  for (const LayoutEntry& e : gen.layout(space)) {
    Tensord t(e.shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.gaussian();
    code.components.emplace_back(e.name, std::move(t));
  }
  return code;
}

ComponentMask componentMask(const Generator& gen, const LatentCode& code, SearchMode mode) {
  gen.validateCode(code);
  ComponentMask mask;
  if (mode == SearchMode::GALS) {
    for (const auto& [name, t] : code.components) mask.optimizable.emplace_back(name, true);
    return mask;
  }
  if (code.space == LatentSpace::W)
    throw ValidationError("LALS is undefined for space W: no layer-wise decomposition");
  int boundary = (gen.layerCount() + 1) / 2;  // ceil(L/2)
  for (const auto& [name, t] : code.components) {
    bool opt = false;
    if (name.rfind("style_", 0) == 0) {
      int layer = std::stoi(name.substr(6));
      opt = layer > boundary;
    }
    mask.optimizable.emplace_back(name, opt);
  }
  if (mask.optimizableCount() == 0)
    throw ValidationError("LALS mask has no optimizable component");
  return mask;
}

// ---- ToyGenerator ----

ToyGenerator::ToyGenerator(std::uint64_t seed, int splitLayer) : splitLayer_(splitLayer) {
  if (splitLayer_ < 1 || splitLayer_ >= kLayers)
    throw ValidationError("split layer must lie in [1, L)");
  channels_ = {64, 64, 64, 32, 16, 16, 16, 16, 16};
  Rng rng(seed);
  auto fill = [&rng](Tensord& t, double sigma) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = sigma * rng.gaussian();
  };
  constant_ = Tensord({4, 4, channels_[0]});
  fill(constant_, 1.0);
  for (int i = 0; i < kLayers; ++i) {
    Stage st;
    int cin = channels_[static_cast<std::size_t>(i)];
    int cout = channels_[static_cast<std::size_t>(i) + 1];
    st.upsample = i < 4;
    st.convW = Tensord({3, 3, cin, cout});
    fill(st.convW, 1.0 / std::sqrt(9.0 * cin));
    st.convB = Tensord({cout});
    fill(st.convB, 0.05);
    st.styleScale = Tensord({cout, kStyleDim});
    fill(st.styleScale, 0.3 / std::sqrt(static_cast<double>(kStyleDim)));
    st.styleBias = Tensord({cout, kStyleDim});
    fill(st.styleBias, 0.3 / std::sqrt(static_cast<double>(kStyleDim)));
    stages_.push_back(std::move(st));
  }
  int cLast = channels_.back();
  finalW_ = Tensord({1, 1, cLast, 3});
  fill(finalW_, 1.5 / std::sqrt(static_cast<double>(cLast)));
  finalB_ = Tensord({3});
  fill(finalB_, 0.1);

  std::ostringstream fp;
  fp << "toy-gen-v1-seed" << seed << "-L" << kLayers << "-d" << kStyleDim << "-k"
     << splitLayer_ << "-out" << kOutput;
  fingerprint_ = fp.str();
}

std::vector<LayoutEntry> ToyGenerator::layout(LatentSpace space) const {
  std::vector<LayoutEntry> lay;
  switch (space) {
    case LatentSpace::W:
      lay.push_back({"style", {kStyleDim}});
      break;
    case LatentSpace::WPlus:
      for (int i = 1; i <= kLayers; ++i)
        lay.push_back({"style_" + std::to_string(i), {kStyleDim}});
      break;
    case LatentSpace::F: {
      // Activation after stage k is at the output resolution once k >= 4.
      int res = 4 << std::min(splitLayer_, 4);
      lay.push_back({"feature", {res, res, channels_[static_cast<std::size_t>(splitLayer_)]}});
      for (int i = splitLayer_ + 1; i <= kLayers; ++i)
        lay.push_back({"style_" + std::to_string(i), {kStyleDim}});
      break;
    }
  }
  return lay;
}

ad::Var<double> ToyGenerator::stageStyleParams(ad::Tape<double>& tape, int stage,
                                               ad::Var<double> style, bool scalePart) const {
  const Stage& st = stages_[static_cast<std::size_t>(stage)];
  int cout = st.convB.dim(0);
  if (scalePart) {
    // scale = 1 + A * style
    ad::Var<double> w = tape.constant(st.styleScale);
    ad::Var<double> ones = tape.constant(Tensord::full({cout}, 1.0));
    return ad::linear(style, w, ones);
  }
  ad::Var<double> w = tape.constant(st.styleBias);
  ad::Var<double> zeros = tape.constant(Tensord::zeros({cout}));
  return ad::linear(style, w, zeros);
}

ad::Var<double> ToyGenerator::runStages(ad::Tape<double>& tape, ad::Var<double> x, int first,
                                        const std::vector<ad::Var<double>>& styles) const {
  for (int i = first; i < kLayers; ++i) {
    const Stage& st = stages_[static_cast<std::size_t>(i)];
    if (st.upsample) x = ad::upsample2x(x);
    ad::Var<double> convW = tape.constant(st.convW);
    ad::Var<double> convB = tape.constant(st.convB);
    x = ad::conv2d(x, convW, convB, 1, 1);
    ad::Var<double> s = stageStyleParams(tape, i, styles[static_cast<std::size_t>(i)], true);
    ad::Var<double> b = stageStyleParams(tape, i, styles[static_cast<std::size_t>(i)], false);
    x = ad::channelAffine(x, s, b);
    x = ad::tanhOp(x);
  }
  ad::Var<double> fw = tape.constant(finalW_);
  ad::Var<double> fb = tape.constant(finalB_);
  x = ad::conv2d(x, fw, fb, 1, 0);
  return ad::sigmoid(x);
}

ad::Var<double> ToyGenerator::synthesizeOnTape(ad::Tape<double>& tape, LatentSpace space,
                                               const std::vector<ad::Var<double>>& comps) const {
  std::vector<LayoutEntry> lay = layout(space);
  if (comps.size() != lay.size())
    throw IncompatibilityError("synthesize: expected " + std::to_string(lay.size()) +
                               " components, got " + std::to_string(comps.size()));
  for (std::size_t i = 0; i < lay.size(); ++i)
    if (tape.value(comps[i]).shape() != lay[i].shape)
      throw IncompatibilityError("synthesize: component '" + lay[i].name + "' has shape " +
                                 tape.value(comps[i]).shapeString());

  std::vector<ad::Var<double>> styles(kLayers);
  int first = 0;
  ad::Var<double> x;
  switch (space) {
    case LatentSpace::W:
      for (int i = 0; i < kLayers; ++i) styles[static_cast<std::size_t>(i)] = comps[0];
      x = tape.constant(constant_);
      break;
    case LatentSpace::WPlus:
      for (int i = 0; i < kLayers; ++i) styles[static_cast<std::size_t>(i)] = comps[static_cast<std::size_t>(i)];
      x = tape.constant(constant_);
      break;
    case LatentSpace::F:
      x = comps[0];
      first = splitLayer_;
      for (int i = splitLayer_; i < kLayers; ++i)
        styles[static_cast<std::size_t>(i)] = comps[static_cast<std::size_t>(i - splitLayer_ + 1)];
      break;
  }
  return runStages(tape, x, first, styles);
}

LatentCode ToyGenerator::encode(const FaceImage& image, LatentSpace space) const {
  validateImage(image);
  if (image.height() != kOutput || image.width() != kOutput)
    throw ValidationError("encode expects a " + std::to_string(kOutput) + "x" +
                          std::to_string(kOutput) + " image");
  LatentCode code = initLatent(*this, space, 0);  // fixed internal seed: deterministic
  const int steps = 200;
  AdamOptimizer adam({.lr = 0.05});
  for (int s = 0; s < steps; ++s) {
    ad::Tape<double> tape;
    std::vector<ad::Var<double>> comps;
    for (const auto& [name, t] : code.components) comps.push_back(tape.param(t));
    ad::Var<double> img = synthesizeOnTape(tape, space, comps);
    ad::Var<double> src = tape.constant(image.pixels);
    ad::Var<double> loss = ad::mean(ad::square(ad::sub(img, src)));
    tape.backward(loss);
    std::vector<Tensord*> params;
    std::vector<Tensord> grads;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      params.push_back(&code.components[i].second);
      grads.push_back(tape.grad(comps[i]));
    }
    adam.step(params, grads);
  }
  return code;
}

}  // namespace gift
