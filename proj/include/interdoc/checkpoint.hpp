#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <variant>

#include "interdoc/binary.hpp"
#include "interdoc/encoder.hpp"
#include "interdoc/rerank.hpp"

namespace interdoc {

// IDCK layout (little endian):
//   "IDCK" u32 version u32 role(1 = retriever, 2 = reranker)
//   retriever: u32 d_emb u32 F, W_Q then W_S as f32, bucket-major
//   reranker:  u32 F, w (3F f32), b (f32)
//   u64 seed u64 step

enum class CheckpointRole : std::uint32_t { retriever = 1, reranker = 2 };

struct Checkpoint {
  std::variant<EncoderParams, RerankerParams> params;
  std::uint64_t step = 0;

  CheckpointRole role() const {
    return std::holds_alternative<EncoderParams>(params) ? CheckpointRole::retriever : CheckpointRole::reranker;
  }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, path.string(), "cannot open for writing");
  out.write("IDCK", 4);
  binary::put<std::uint32_t>(out, kCheckpointVersion);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.role()));
  std::uint64_t seed = 0;
  if (const auto* e = std::get_if<EncoderParams>(&ck.params)) {
    e->check();
    binary::put<std::uint32_t>(out, e->d_emb);
    binary::put<std::uint32_t>(out, e->features);
    for (float v : e->w_query) binary::put_f32(out, v);
    for (float v : e->w_section) binary::put_f32(out, v);
    seed = e->seed;
  } else {
    const auto& r = std::get<RerankerParams>(ck.params);
    r.check();
    binary::put<std::uint32_t>(out, r.features);
    for (float v : r.w) binary::put_f32(out, v);
    binary::put_f32(out, r.b);
    seed = r.seed;
  }
  binary::put<std::uint64_t>(out, seed);
  binary::put<std::uint64_t>(out, ck.step);
  if (!out) throw Error(ErrorKind::Io, path.string(), "write failed");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string(), "cannot open for reading");
  binary::expect_magic(in, "IDCK");
  const auto version = binary::get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw Error(ErrorKind::VersionMismatch, std::to_string(version));
  const auto role = binary::get<std::uint32_t>(in, "role");
  Checkpoint ck;
  if (role == static_cast<std::uint32_t>(CheckpointRole::retriever)) {
    EncoderParams e;
    e.d_emb = binary::get<std::uint32_t>(in, "d_emb");
    e.features = binary::get<std::uint32_t>(in, "F");
    const std::size_t n = static_cast<std::size_t>(e.d_emb) * e.features;
    // Header sizes are checked against the file before allocating.
    if (2 * n * sizeof(float) > std::filesystem::file_size(path)) throw Error(ErrorKind::Truncated, "weights");
    e.w_query.resize(n);
    e.w_section.resize(n);
    for (auto& v : e.w_query) v = binary::get_f32(in, "W_Q");
    for (auto& v : e.w_section) v = binary::get_f32(in, "W_S");
    e.seed = binary::get<std::uint64_t>(in, "seed");
    ck.params = std::move(e);
  } else if (role == static_cast<std::uint32_t>(CheckpointRole::reranker)) {
    RerankerParams r;
    r.features = binary::get<std::uint32_t>(in, "F");
    if (3 * static_cast<std::size_t>(r.features) * sizeof(float) > std::filesystem::file_size(path)) {
      throw Error(ErrorKind::Truncated, "weights");
    }
    r.w.resize(3 * static_cast<std::size_t>(r.features));
    for (auto& v : r.w) v = binary::get_f32(in, "w");
    r.b = binary::get_f32(in, "b");
    r.seed = binary::get<std::uint64_t>(in, "seed");
    ck.params = std::move(r);
  } else {
    throw Error(ErrorKind::SchemaError, "role=" + std::to_string(role), "unknown checkpoint role");
  }
  ck.step = binary::get<std::uint64_t>(in, "step");
  return ck;
}

}  // namespace interdoc
