#pragma once

#include "gift/image.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace gift {

// Fixture-driven face-compare server speaking the same wire contract as the
// real providers: POST /compare {"image_a": b64-png, "image_b": b64-png} ->
// {"confidence": number}. Responses are a pure function of request bytes and
// the fixture rules.
//
// Fixture JSON fields (all optional):
//   mode: "pixel_cosine" (default) | "fixed"
//   fixed_confidence: number        (mode "fixed")
//   identical_confidence: number    (identical payload bytes short-circuit)
//   fail_first: int                 (respond 429 to the first k requests)
//   require_auth: bool              (demand an Authorization header)
//
// pixel_cosine embeds each image as an 8x8 mean-pooled grayscale vector,
// L2-normalized, and maps cosine similarity s to confidence 100*(s+1)/2.
class MockApiServer {
 public:
  explicit MockApiServer(const std::string& fixtureJson);
  ~MockApiServer();

  static MockApiServer fromFixtureFile(const std::filesystem::path& path);

  // Starts on an OS-assigned free port; returns the port.
  int start();
  void startOn(int port);  // blocking; used by the CLI
  void stop();
  int port() const;

  MockApiServer(MockApiServer&&) noexcept;
  MockApiServer& operator=(MockApiServer&&) = delete;

  // Fixture embedding, exposed so tests can construct exact-similarity pairs.
  static Tensord pixelEmbedding(const FaceImage& img);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gift
