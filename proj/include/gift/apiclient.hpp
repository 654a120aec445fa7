#pragma once

#include "gift/errors.hpp"
#include "gift/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gift {

class CredentialError : public std::runtime_error {
 public:
  explicit CredentialError(const std::string& msg) : std::runtime_error(msg) {}
};

class ProviderContractError : public std::runtime_error {
 public:
  explicit ProviderContractError(const std::string& msg) : std::runtime_error(msg) {}
};

class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ProviderConfig {
  std::string provider = "mock";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string comparePath = "/compare";
  int maxAttempts = 3;
  int backoffBaseMs = 1000;  // exponential: base, 2*base, 4*base, ...
  int maxInFlight = 4;
};

struct CompareResult {
  std::string provider;
  double confidence = 0;  // [0, 100]
  std::string rawPayload;
  double latencyMs = 0;
  int attempts = 0;
};

// One logical comparison; retries with exponential backoff on transport
// errors and rate-limit responses.
CompareResult compare(const ProviderConfig& config, const FaceImage& a, const FaceImage& b);

struct BatchConfidence {
  double mean = 0;  // over successful pairs only
  std::vector<std::optional<CompareResult>> results;  // nullopt = failed pair
  int failureCount = 0;
};

BatchConfidence batchConfidence(const ProviderConfig& config,
                                const std::vector<std::pair<FaceImage, FaceImage>>& pairs);

std::string base64Encode(const unsigned char* data, std::size_t size);
std::vector<unsigned char> base64Decode(const std::string& text);

}  // namespace gift
