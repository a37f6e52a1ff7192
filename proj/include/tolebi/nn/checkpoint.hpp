// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "tolebi/core/binary_io.hpp"
#include "tolebi/core/errors.hpp"

namespace tolebi::nn {

inline constexpr std::uint64_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'T', 'O', 'L', 'E', 'B', 'I', 'C', 'K'};

/// On-disk layout: magic, format version, JSON header, named parameter
/// arrays, then an opaque state blob (optimizer moments, RNG streams, ...).
struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::map<std::string, Eigen::VectorXd> arrays;
  std::string state;

  const Eigen::VectorXd& array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw IoError("checkpoint has no array '" + name + "'");
    return it->second;
  }

  std::string encode() const {
    BinaryWriter w;
    w.put_u64(kCheckpointVersion);
    w.put_string(header.dump());
    w.put_u64(arrays.size());
    for (const auto& [name, v] : arrays) {
      w.put_string(name);
      w.put_vector(v);
    }
    w.put_string(state);
    return std::string(kCheckpointMagic, 8) + w.bytes();
  }

  static Checkpoint decode(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 8, std::string(kCheckpointMagic, 8)) != 0)
      throw IoError("not a checkpoint file (bad magic)");
    BinaryReader r(bytes.substr(8));
    const std::uint64_t version = r.get_u64();
    if (version != kCheckpointVersion) throw VersionMismatch(kCheckpointVersion, version);
    Checkpoint c;
    try {
      c.header = nlohmann::json::parse(r.get_string());
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const std::uint64_t n = r.get_u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string name = r.get_string();
      c.arrays[name] = r.get_vector();
    }
    c.state = r.get_string();
    if (!r.done()) throw IoError("trailing bytes after checkpoint");
    return c;
  }

  /// Written to a sibling temp file and renamed into place.
  void save(const std::filesystem::path& path) const {
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw IoError("cannot write checkpoint: " + tmp);
      const std::string bytes = encode();
      os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!os) throw IoError("short write on checkpoint: " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return decode(ss.str());
  }
};

}  // namespace tolebi::nn
