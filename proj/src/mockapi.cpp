#include "gift/mockapi.hpp"

#include "gift/apiclient.hpp"
#include "gift/png_io.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

namespace gift {

using nlohmann::json;

struct MockApiServer::Impl {
  std::string mode = "pixel_cosine";
  double fixedConfidence = 50.0;
  std::optional<double> identicalConfidence;
  int failFirst = 0;
  bool requireAuth = false;

  std::atomic<int> requestCount{0};
  httplib::Server server;
  std::thread serverThread;
  int boundPort = 0;

  void handleCompare(const httplib::Request& req, httplib::Response& res) {
    int n = ++requestCount;
    if (n <= failFirst) {
      res.status = 429;
      res.set_content("{\"error\":\"rate limited\"}", "application/json");
      return;
    }
    if (requireAuth && !req.has_header("Authorization")) {
      res.status = 401;
      res.set_content("{\"error\":\"missing credentials\"}", "application/json");
      return;
    }
    try {
      json body = json::parse(req.body);
      std::string ba = body.at("image_a").get<std::string>();
      std::string bb = body.at("image_b").get<std::string>();
      double confidence;
      if (identicalConfidence.has_value() && ba == bb) {
        confidence = *identicalConfidence;
      } else if (mode == "fixed") {
        confidence = fixedConfidence;
      } else {
        std::vector<unsigned char> pa = base64Decode(ba);
        std::vector<unsigned char> pb = base64Decode(bb);
        FaceImage a = decodePng(pa.data(), pa.size());
        FaceImage b = decodePng(pb.data(), pb.size());
        Tensord ea = MockApiServer::pixelEmbedding(a);
        Tensord eb = MockApiServer::pixelEmbedding(b);
        double s = ea.asVector().dot(eb.asVector());
        confidence = std::clamp(100.0 * (s + 1.0) / 2.0, 0.0, 100.0);
      }
      json out;
      out["confidence"] = confidence;
      res.status = 200;
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      json out;
      out["error"] = e.what();
      res.set_content(out.dump(), "application/json");
    }
  }
};

MockApiServer::MockApiServer(const std::string& fixtureJson)
    : impl_(std::make_unique<Impl>()) {
  json j = fixtureJson.empty() ? json::object() : json::parse(fixtureJson);
  impl_->mode = j.value("mode", "pixel_cosine");
  impl_->fixedConfidence = j.value("fixed_confidence", 50.0);
  if (j.contains("identical_confidence"))
    impl_->identicalConfidence = j["identical_confidence"].get<double>();
  impl_->failFirst = j.value("fail_first", 0);
  impl_->requireAuth = j.value("require_auth", false);
  impl_->server.Post("/compare", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->handleCompare(req, res);
  });
}

MockApiServer::MockApiServer(MockApiServer&&) noexcept = default;

MockApiServer::~MockApiServer() {
  if (impl_) stop();
}

MockApiServer MockApiServer::fromFixtureFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open fixture file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return MockApiServer(text);
}

int MockApiServer::start() {
  impl_->boundPort = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->boundPort <= 0) throw TransportError("mock server failed to bind");
  impl_->serverThread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->boundPort;
}

void MockApiServer::startOn(int port) {
  impl_->boundPort = port;
  if (!impl_->server.listen("0.0.0.0", port))
    throw TransportError("mock server failed to listen on port " + std::to_string(port));
}

void MockApiServer::stop() {
  impl_->server.stop();
  if (impl_->serverThread.joinable()) impl_->serverThread.join();
}

int MockApiServer::port() const { return impl_->boundPort; }

Tensord MockApiServer::pixelEmbedding(const FaceImage& img) {
  const int grid = 8;
  Tensord e({grid * grid});
  int h = img.height(), w = img.width();
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      int y0 = gy * h / grid, y1 = (gy + 1) * h / grid;
      int x0 = gx * w / grid, x1 = (gx + 1) * w / grid;
      double sum = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          sum += (img.pixels.at(y, x, 0) + img.pixels.at(y, x, 1) + img.pixels.at(y, x, 2)) / 3.0;
      e[gy * grid + gx] = sum / ((y1 - y0) * (x1 - x0));
    }
  }
  double n = e.asVector().norm();
  if (n > 0) e.asVector() /= n;
  return e;
}

}  // namespace gift
