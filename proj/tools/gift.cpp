#include "gift/apiclient.hpp"
#include "gift/experiment.hpp"
#include "gift/inversion.hpp"
#include "gift/png_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

gift::ExperimentConfig loadConfig(const std::string& path, bool force) {
  gift::ExperimentConfig cfg = gift::ExperimentConfig::fromFile(path);
  if (force) cfg.force = true;
  return cfg;
}

int emitRun(const gift::RunResult& run) {
  std::cout << run.report.dump(2) << "\n";
  std::cerr << "report: " << run.reportPath.string() << "\n";
  if (run.failureCount > 0) {
    std::cerr << run.failureCount << " image(s) failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

void writeInversionTrace(const std::filesystem::path& path,
                         const std::vector<gift::InversionTracePoint>& trace) {
  std::ofstream out(path, std::ios::trunc);
  out << "step,mse,perceptual,total\n";
  char buf[160];
  for (const auto& p : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", p.step, p.mse, p.perceptual,
                  p.total);
    out << buf;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gift: facial privacy protection via global adversarial latent search"};
  app.require_subcommand(1);

  // invert
  auto* invertCmd = app.add_subcommand("invert", "Invert a source image into the latent space");
  std::string invSource, invSpace = "f", invOut, invConfig;
  int invSteps = -1;
  invertCmd->add_option("--source", invSource, "Source PNG")->required();
  invertCmd->add_option("--space", invSpace, "Latent space: w|wplus|f");
  invertCmd->add_option("--out", invOut, "Output latent directory")->required();
  invertCmd->add_option("--config", invConfig, "Experiment config for backend/optim blocks");
  invertCmd->add_option("--steps", invSteps, "Override t1 step count");

  // protect
  auto* protectCmd = app.add_subcommand("protect", "Protect one source image");
  std::string prSource, prTarget, prConfig, prOutDir;
  protectCmd->add_option("--source", prSource, "Source PNG")->required();
  protectCmd->add_option("--target", prTarget, "Target PNG")->required();
  protectCmd->add_option("--config", prConfig, "Experiment config")->required();
  protectCmd->add_option("--out-dir", prOutDir, "Output directory")->required();

  // run / report / eval-*
  std::string cfgPath;
  bool force = false;
  auto* runCmd = app.add_subcommand("run", "Full pipeline over the dataset manifest");
  runCmd->add_option("--config", cfgPath, "Experiment config")->required();
  runCmd->add_flag("--force", force, "Redo work even if artifacts exist");
  auto* reportCmd = app.add_subcommand("report", "Re-aggregate report.json from artifacts");
  reportCmd->add_option("--config", cfgPath, "Experiment config")->required();
  auto* evalVerifyCmd = app.add_subcommand("eval-verify", "Verification PSR from artifacts");
  evalVerifyCmd->add_option("--config", cfgPath, "Experiment config")->required();
  auto* evalIdentifyCmd =
      app.add_subcommand("eval-identify", "Identification Rank-N PSR from artifacts");
  evalIdentifyCmd->add_option("--config", cfgPath, "Experiment config")->required();
  auto* evalQualityCmd =
      app.add_subcommand("eval-quality", "PSNR/SSIM/FID from artifacts");
  evalQualityCmd->add_option("--config", cfgPath, "Experiment config")->required();

  // api-probe
  auto* probeCmd = app.add_subcommand("api-probe", "Compare two images via a provider API");
  std::string apHost = "127.0.0.1", apPath = "/compare", apProvider = "mock";
  std::string apImageA, apImageB;
  int apPort = 8080;
  probeCmd->add_option("--host", apHost, "Provider host");
  probeCmd->add_option("--port", apPort, "Provider port");
  probeCmd->add_option("--path", apPath, "Compare endpoint path");
  probeCmd->add_option("--provider", apProvider, "Provider name");
  probeCmd->add_option("--image-a", apImageA, "First PNG")->required();
  probeCmd->add_option("--image-b", apImageB, "Second PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (invertCmd->parsed()) {
      gift::ExperimentConfig cfg;
      if (!invConfig.empty()) {
        cfg = loadConfig(invConfig, false);
      } else {
        cfg.surrogates.push_back({{"type", "toy"}, {"seed", 1}});
      }
      cfg.optim.space = gift::latentSpaceFromString(invSpace);
      if (invSteps >= 0) cfg.optim.t1Steps = invSteps;
      gift::BackendSet backends = gift::buildBackends(cfg);
      gift::FaceImage source = gift::loadPng(invSource);
      gift::InversionResult result =
          gift::invert(*backends.generator, *backends.perceptual, source, cfg.optim);
      std::filesystem::create_directories(invOut);
      gift::serializeLatent(result.code, invOut);
      gift::savePng(result.recon, std::filesystem::path(invOut) / "recon.png");
      writeInversionTrace(std::filesystem::path(invOut) / "trace.csv", result.trace);
      std::cout << "final L_rec: " << (result.trace.empty() ? 0.0 : result.trace.back().total)
                << "\n";
      return kExitOk;
    }

    if (protectCmd->parsed()) {
      gift::ExperimentConfig cfg = loadConfig(prConfig, false);
      gift::BackendSet backends = gift::buildBackends(cfg);
      gift::FaceImage source = gift::loadPng(prSource);
      gift::FaceImage target = gift::loadPng(prTarget);
      gift::ProtectResult result =
          gift::protect(*backends.generator, *backends.perceptual, backends.surrogates,
                        *backends.segmentation, source, target, cfg.optim, cfg.diversify);
      std::filesystem::path dir(prOutDir);
      std::filesystem::create_directories(dir);
      gift::savePng(result.protectedImage, dir / "protected.png");
      gift::serializeLatent(result.code, dir / "latent");
      gift::writeTraceCsv(dir / "trace.csv", result.trace);
      for (std::size_t i = 0; i < result.perSurrogateCos.size(); ++i)
        std::cout << "surrogate " << i << " cos(protected, target): "
                  << result.perSurrogateCos[i] << "\n";
      return kExitOk;
    }

    if (runCmd->parsed()) return emitRun(gift::runExperiment(loadConfig(cfgPath, force)));

    if (reportCmd->parsed() || evalVerifyCmd->parsed() || evalIdentifyCmd->parsed() ||
        evalQualityCmd->parsed()) {
      gift::ExperimentConfig cfg = loadConfig(cfgPath, false);
      if (evalVerifyCmd->parsed()) {
        cfg.evalVerification = true;
        cfg.evalIdentification = false;
        cfg.evalQuality = false;
      } else if (evalIdentifyCmd->parsed()) {
        cfg.evalVerification = false;
        cfg.evalIdentification = true;
        cfg.evalQuality = false;
      } else if (evalQualityCmd->parsed()) {
        cfg.evalVerification = false;
        cfg.evalIdentification = false;
        cfg.evalQuality = true;
      }
      return emitRun(gift::aggregateReport(cfg));
    }

    if (probeCmd->parsed()) {
      gift::ProviderConfig pc;
      pc.provider = apProvider;
      pc.host = apHost;
      pc.port = apPort;
      pc.comparePath = apPath;
      gift::CompareResult r =
          gift::compare(pc, gift::loadPng(apImageA), gift::loadPng(apImageB));
      std::cout << "confidence: " << r.confidence << "\n";
      std::cout << "attempts: " << r.attempts << "\n";
      return kExitOk;
    }
  } catch (const gift::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const gift::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const gift::IncompatibilityError& e) {
    std::cerr << "incompatibility: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
