#pragma once

#include "json.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cdiff::exp {

// Git blob hash: sha1("blob <size>\0" + content), lowercase hex.
std::string blob_hash(std::span<const std::uint8_t> bytes);
std::string blob_hash(const std::string& text);
std::string file_hash(const std::string& path);

struct Manifest {
  std::string command;
  nlohmann::json config;
  std::map<std::string, std::string> inputs;   // path -> hash
  std::map<std::string, std::string> outputs;  // file name -> hash
  std::vector<std::string> unhashed;           // timing files excluded from reproducibility

  nlohmann::json to_json() const;
};

// Writes bytes atomically under dir and records the hash.
void emit(Manifest& m, const std::string& dir, const std::string& name, std::span<const std::uint8_t> bytes);
void emit(Manifest& m, const std::string& dir, const std::string& name, const std::string& text);
void emit_unhashed(Manifest& m, const std::string& dir, const std::string& name, const std::string& text);
void write_manifest(const Manifest& m, const std::string& path);

}  // namespace cdiff::exp
