// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "nwcad/error.hpp"

namespace nwcad::detail {

using Json = nlohmann::json;

/// Fetches `key` from `obj` as T; any absence or type mismatch becomes a
/// kData error naming `where` and the key.
template <typename T>
T field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::kData, where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::kData, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, where + ": field '" + key + "' has the wrong type");
  }
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kData, where + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out << content;
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

}  // namespace nwcad::detail
