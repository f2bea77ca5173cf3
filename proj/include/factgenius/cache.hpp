#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

#include <openssl/evp.h>

#include <json.hpp>

#include "factgenius/llm_gateway.hpp"

namespace factgenius {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::InvalidArgument, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

/// SHA-256 over (model, temperature, messages). Retries of the same prompt
/// get distinct keys so a replay reproduces the whole attempt sequence.
inline std::string cache_key(const LlmConfig& cfg, const ChatMessages& messages, int attempt = 1) {
  nlohmann::json material = {{"model", cfg.model_name}, {"temperature", cfg.temperature},
                             {"messages", wire::messages_to_json(messages)}};
  if (attempt > 1) material["attempt"] = attempt;
  return sha256_hex(material.dump());
}

/// Write-once, read-many response store in front of another backend. Entries
/// that fail their integrity check count as misses and are rewritten.
class CachingBackend : public CompletionBackend {
 public:
  CachingBackend(std::filesystem::path dir, std::shared_ptr<CompletionBackend> inner)
      : dir_(std::move(dir)), inner_(std::move(inner)) {
    std::filesystem::create_directories(dir_);
  }

  std::string complete(const CompletionRequest& request) override {
    const auto key = cache_key(request.config, request.messages, request.attempt);
    const auto path = entry_path(key);
    if (auto hit = read_entry(path, key)) {
      ++hits_;
      return *hit;
    }
    ++misses_;
    auto text = inner_->complete(request);
    write_entry(path, key, text);
    return text;
  }

  std::filesystem::path entry_path(const std::string& key) const { return dir_ / (key + ".json"); }

  std::size_t hits() const noexcept { return hits_; }
  std::size_t misses() const noexcept { return misses_; }
  std::size_t corrupt() const noexcept { return corrupt_; }

 private:
  std::optional<std::string> read_entry(const std::filesystem::path& path, const std::string& key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    auto j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_object() && j.value("key", "") == key && j.contains("text") && j["text"].is_string() &&
        j.value("sha256", "") == sha256_hex(j["text"].get_ref<const std::string&>())) {
      return j["text"].get<std::string>();
    }
    ++corrupt_;
    return std::nullopt;
  }

  void write_entry(const std::filesystem::path& path, const std::string& key, const std::string& text) {
    nlohmann::json j = {{"key", key}, {"text", text}, {"sha256", sha256_hex(text)}};
    std::ostringstream tmp_name;
    tmp_name << key << ".tmp." << std::this_thread::get_id() << "." << ++tmp_counter_;
    const auto tmp = dir_ / tmp_name.str();
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::Io, "cannot write cache entry " + tmp.string());
      out << j.dump();
    }
    std::filesystem::rename(tmp, path);
  }

  std::filesystem::path dir_;
  std::shared_ptr<CompletionBackend> inner_;
  std::atomic<std::size_t> hits_{0}, misses_{0}, corrupt_{0}, tmp_counter_{0};
};

}  // namespace factgenius
