#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "cslearn/error.hpp"

// Little-endian binary snapshot primitives shared by the model and criteria
// files. Numbers are written in native byte order; the format is only defined
// for little-endian hosts.
static_assert(std::endian::native == std::endian::little,
              "snapshot format requires a little-endian host");

namespace cslearn::snapshot {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error("snapshot truncated");
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error("snapshot truncated");
  return v;
}

inline double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error("snapshot truncated");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  std::uint64_t n = read_u64(in);
  if (n > (1u << 20)) throw Error("snapshot string too long");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("snapshot truncated");
  return s;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) write_f64(out, m(r, c));
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
  std::uint64_t rows = read_u64(in);
  std::uint64_t cols = read_u64(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw Error("snapshot matrix too large");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = read_f64(in);
  }
  return m;
}

inline void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  write_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v(i));
}

inline Eigen::VectorXd read_vector(std::istream& in) {
  std::uint64_t n = read_u64(in);
  if (n > (1u << 24)) throw Error("snapshot vector too large");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = read_f64(in);
  return v;
}

// Magic + version header. Readers reject foreign magic and future versions.
inline void write_header(std::ostream& out, std::uint32_t magic, std::uint32_t version) {
  write_u32(out, magic);
  write_u32(out, version);
}

inline void expect_header(std::istream& in, std::uint32_t magic, std::uint32_t version,
                          const char* what) {
  if (read_u32(in) != magic) throw Error(std::string("not a ") + what + " snapshot");
  std::uint32_t v = read_u32(in);
  if (v != version) {
    throw Error(std::string(what) + " snapshot version " + std::to_string(v) + " unsupported");
  }
}

}  // namespace cslearn::snapshot
