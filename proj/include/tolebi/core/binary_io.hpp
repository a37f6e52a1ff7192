// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tolebi/core/errors.hpp"

namespace tolebi {

/// Little helper for bit-exact state blobs (native endianness).
class BinaryWriter {
 public:
  void put_u64(std::uint64_t v) { raw(&v, sizeof v); }
  void put_i64(std::int64_t v) { raw(&v, sizeof v); }
  void put_f64(double v) { raw(&v, sizeof v); }
  void put_bool(bool v) { put_u64(v ? 1 : 0); }
  void put_string(const std::string& s) {
    put_u64(s.size());
    raw(s.data(), s.size());
  }
  void put_vector(const Eigen::VectorXd& v) {
    put_u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  void put_matrix(const Eigen::MatrixXd& m) {
    put_u64(static_cast<std::uint64_t>(m.rows()));
    put_u64(static_cast<std::uint64_t>(m.cols()));
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }

  const std::string& bytes() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}

  std::uint64_t get_u64() { return get<std::uint64_t>(); }
  std::int64_t get_i64() { return get<std::int64_t>(); }
  double get_f64() { return get<double>(); }
  bool get_bool() { return get_u64() != 0; }
  std::string get_string() {
    auto n = get_u64();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::VectorXd get_vector() {
    auto n = static_cast<Eigen::Index>(get_u64());
    Eigen::VectorXd v(n);
    read_into(v.data(), sizeof(double) * static_cast<std::size_t>(n));
    return v;
  }
  Eigen::MatrixXd get_matrix() {
    auto r = static_cast<Eigen::Index>(get_u64());
    auto c = static_cast<Eigen::Index>(get_u64());
    Eigen::MatrixXd m(r, c);
    read_into(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  template <typename T>
  T get() {
    T v;
    read_into(&v, sizeof v);
    return v;
  }
  void read_into(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IoError("truncated binary blob");
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace tolebi
