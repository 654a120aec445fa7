#include "gift/apiclient.hpp"

#include "gift/png_io.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <thread>

namespace gift {

using nlohmann::json;

namespace {
const char* kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64Encode(const unsigned char* data, std::size_t size) {
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    unsigned v = static_cast<unsigned>(data[i]) << 16;
    if (i + 1 < size) v |= static_cast<unsigned>(data[i + 1]) << 8;
    if (i + 2 < size) v |= data[i + 2];
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(i + 1 < size ? kB64[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < size ? kB64[v & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64Decode(const std::string& text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<unsigned char> out;
  int acc = 0, bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int v = val(c);
    if (v < 0) throw FormatError("invalid base64 character");
    acc = (acc << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

CompareResult compare(const ProviderConfig& config, const FaceImage& a, const FaceImage& b) {
  std::vector<unsigned char> pa = encodePng(a);
  std::vector<unsigned char> pb = encodePng(b);
  json body;
  body["image_a"] = base64Encode(pa.data(), pa.size());
  body["image_b"] = base64Encode(pb.data(), pb.size());
  std::string payload = body.dump();

  auto start = std::chrono::steady_clock::now();
  std::string lastError;
  for (int attempt = 1; attempt <= config.maxAttempts; ++attempt) {
    if (attempt > 1) {
      int delay = config.backoffBaseMs << (attempt - 2);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Client client(config.host, config.port);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    auto res = client.Post(config.comparePath, payload, "application/json");
    if (!res) {
      lastError = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw CredentialError("provider rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500) {
      lastError = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProviderContractError("unexpected HTTP status " + std::to_string(res->status));
    double conf;
    try {
      json j = json::parse(res->body);
      conf = j.at("confidence").get<double>();
    } catch (const json::exception& e) {
      throw ProviderContractError(std::string("malformed provider response: ") + e.what());
    }
    if (!(conf >= 0.0 && conf <= 100.0))
      throw ProviderContractError("confidence out of [0,100]: " + std::to_string(conf));
    CompareResult r;
    r.provider = config.provider;
    r.confidence = conf;
    r.rawPayload = res->body;
    r.attempts = attempt;
    r.latencyMs = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    return r;
  }
  throw TransportError("compare failed after " + std::to_string(config.maxAttempts) +
                       " attempts: " + lastError);
}

BatchConfidence batchConfidence(const ProviderConfig& config,
                                const std::vector<std::pair<FaceImage, FaceImage>>& pairs) {
  if (pairs.empty()) throw ValidationError("batch over an empty pair list");
  BatchConfidence batch;
  batch.results.resize(pairs.size());

  int workers = std::max(1, std::min<int>(config.maxInFlight, static_cast<int>(pairs.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= pairs.size()) return;
        try {
          batch.results[i] = compare(config, pairs[i].first, pairs[i].second);
        } catch (const std::exception&) {
          batch.results[i] = std::nullopt;
        }
      }
    });
  }
  for (auto& t : threads) t.join();

  double sum = 0;
  int ok = 0;
  for (const auto& r : batch.results) {
    if (r.has_value()) {
      sum += r->confidence;
      ++ok;
    } else {
      ++batch.failureCount;
    }
  }
  if (ok == 0) throw TransportError("every pair in the batch failed");
  batch.mean = sum / ok;
  return batch;
}

}  // namespace gift
