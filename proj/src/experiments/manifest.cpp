#include "cdiff/experiments/manifest.hpp"

#include "cdiff/binary_io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace cdiff::exp {

std::string blob_hash(std::span<const std::uint8_t> bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || !EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) || !EVP_DigestUpdate(ctx, header.data(), header.size()) ||
      !EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) || !EVP_DigestFinal_ex(ctx, digest, &length)) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char c = digest[i];
    std::snprintf(buf, sizeof buf, "%02x", c);
    hex += buf;
  }
  return hex;
}

std::string blob_hash(const std::string& text) {
  return blob_hash(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string file_hash(const std::string& path) { return blob_hash(io::read_file(path)); }

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["unhashed"] = unhashed;
  return j;
}

void emit(Manifest& m, const std::string& dir, const std::string& name, std::span<const std::uint8_t> bytes) {
  io::write_file_atomic((std::filesystem::path(dir) / name).string(), bytes);
  m.outputs[name] = blob_hash(bytes);
}

void emit(Manifest& m, const std::string& dir, const std::string& name, const std::string& text) {
  emit(m, dir, name, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void emit_unhashed(Manifest& m, const std::string& dir, const std::string& name, const std::string& text) {
  io::write_text_atomic((std::filesystem::path(dir) / name).string(), text);
  m.unhashed.push_back(name);
}

void write_manifest(const Manifest& m, const std::string& path) { io::write_text_atomic(path, m.to_json().dump(2) + "\n"); }

}  // namespace cdiff::exp
