// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/checkpoint.h"

#include <cstring>

#include "renuance/common.h"

namespace renuance {

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      std::span<const ad::Parameter* const> params) {
  std::string payload;
  header["sections"] = nlohmann::json::array();
  for (const ad::Parameter* p : params) {
    header["sections"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    payload += matrix_bytes(p->value);
  }
  header["sha256"] = sha256_hex(payload);
  write_file(path, header.dump() + "\n" + payload);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ValidationError("checkpoint has no header: " + path.string());
  CheckpointData out;
  try {
    out.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint header is not JSON: " + path.string());
  }
  const std::string_view payload(bytes.data() + nl + 1, bytes.size() - nl - 1);
  if (sha256_hex(payload) != out.header.value("sha256", "")) {
    throw ValidationError("checkpoint checksum mismatch: " + path.string());
  }
  std::size_t off = 0;
  for (const auto& s : out.header.at("sections")) {
    Matrix m(s.at("rows").get<Eigen::Index>(), s.at("cols").get<Eigen::Index>());
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    if (off + n > payload.size()) throw ValidationError("truncated checkpoint: " + path.string());
    std::memcpy(m.data(), payload.data() + off, n);
    off += n;
    out.sections.emplace(s.at("name").get<std::string>(), std::move(m));
  }
  if (off != payload.size()) throw ValidationError("trailing bytes in checkpoint: " + path.string());
  return out;
}

void assign_sections(const CheckpointData& data, std::span<ad::Parameter* const> params) {
  for (ad::Parameter* p : params) {
    auto it = data.sections.find(p->name);
    if (it == data.sections.end()) throw ValidationError("checkpoint is missing section " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw ValidationError("checkpoint section " + p->name + " has the wrong shape");
    }
    p->value = it->second;
    p->zero_grad();
  }
}

}  // namespace renuance
