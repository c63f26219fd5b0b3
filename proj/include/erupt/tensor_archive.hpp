// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "erupt/array.hpp"
#include "erupt/errors.hpp"

namespace erupt {

// Directory of named tensors: one raw little-endian file per tensor plus a
// plain-text index ("<name> <dtype> <dim0> <dim1> ..." per line). Names are
// restricted to [A-Za-z0-9._-] so they double as file names.

template <class T>
struct DtypeName;
template <>
struct DtypeName<float> {
  static constexpr const char* value = "f32";
};
template <>
struct DtypeName<double> {
  static constexpr const char* value = "f64";
};

inline void validate_tensor_name(const std::string& name) {
  if (name.empty()) throw ValueError("tensor archive: empty tensor name");
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' &&
        c != '_' && c != '-')
      throw ValueError("tensor archive: name '" + name +
                       "' contains unsupported character '" +
                       std::string(1, c) + "'");
}

template <class T>
void save_tensor_archive(
    const std::string& dir,
    const std::vector<std::pair<std::string, Array<T>>>& tensors) {
  namespace fs = std::filesystem;
  static_assert(std::endian::native == std::endian::little,
                "archive files are little-endian");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create archive directory " + dir);
  std::ofstream index(dir + "/index.txt");
  if (!index) throw IoError("cannot write " + dir + "/index.txt");
  for (const auto& [name, a] : tensors) {
    validate_tensor_name(name);
    index << name << ' ' << DtypeName<T>::value;
    for (int d : a.shape()) index << ' ' << d;
    index << '\n';
    const std::string path = dir + "/" + name + ".bin";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(a.data()),
            std::streamsize(sizeof(T)) * a.size());
    if (!f) throw IoError("short write to " + path);
  }
}

template <class T>
std::vector<std::pair<std::string, Array<T>>> load_tensor_archive(
    const std::string& dir) {
  std::ifstream index(dir + "/index.txt");
  if (!index) throw IoError("cannot read " + dir + "/index.txt");
  std::vector<std::pair<std::string, Array<T>>> out;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string name, dtype;
    if (!(is >> name >> dtype))
      throw IoError("malformed index line in " + dir + ": '" + line + "'");
    if (dtype != DtypeName<T>::value)
      throw IoError("dtype mismatch for " + name + " in " + dir + ": index "
                    "says " + dtype + ", expected " + DtypeName<T>::value);
    Shape shape;
    int d;
    while (is >> d) shape.push_back(d);
    if (shape.empty()) throw IoError("missing shape for " + name + " in " + dir);
    Array<T> a(shape);
    const std::string path = dir + "/" + name + ".bin";
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    f.read(reinterpret_cast<char*>(a.data()),
           std::streamsize(sizeof(T)) * a.size());
    if (f.gcount() != std::streamsize(sizeof(T)) * a.size())
      throw IoError("short read from " + path);
    out.emplace_back(name, std::move(a));
  }
  return out;
}

}  // namespace erupt
