#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "xlalign/autodiff/graph.hpp"

namespace xlalign::ad {

inline constexpr int kCheckpointFormatVersion = 1;

template <class T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else return "f64";
}

namespace detail {
template <class T>
void to_little_endian(T* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n; ++i) {
      auto* b = reinterpret_cast<unsigned char*>(data + i);
      std::reverse(b, b + sizeof(T));
    }
  } else {
    (void)data;
    (void)n;
  }
}
}  // namespace detail

/// Writes `<dir>/manifest.json` and `<dir>/tensors.bin`. The blob holds every
/// tensor, little-endian, concatenated in sorted-name order.
template <class T>
void save_tensors(const std::filesystem::path& dir, const ParameterStore<T>& store) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  std::ofstream blob(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw ValidationError("cannot write " + (dir / "tensors.bin").string());
  std::size_t offset = 0;
  for (const auto& [name, p] : store.all()) {
    std::vector<T> buf(p.value.values().begin(), p.value.values().end());
    detail::to_little_endian(buf.data(), buf.size());
    const std::size_t nbytes = buf.size() * sizeof(T);
    blob.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(nbytes));
    tensors[name] = {{"shape", p.value.shape()}, {"dtype", dtype_name<T>()}, {"offset", offset}, {"nbytes", nbytes}};
    offset += nbytes;
  }
  manifest["tensors"] = tensors;
  std::ofstream(dir / "manifest.json", std::ios::trunc) << manifest.dump(2) << '\n';
}

template <class T>
ParameterStore<T> load_tensors(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ValidationError("missing checkpoint manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(mf);
  if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion)
    throw ValidationError("unsupported checkpoint format_version");
  std::ifstream blob(dir / "tensors.bin", std::ios::binary);
  if (!blob) throw ValidationError("missing tensors.bin in " + dir.string());
  std::string bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
  ParameterStore<T> store;
  for (const auto& [name, meta] : manifest.at("tensors").items()) {
    if (meta.at("dtype").template get<std::string>() != dtype_name<T>())
      throw ValidationError("checkpoint dtype mismatch for '" + name + "'");
    const Shape shape = meta.at("shape").template get<Shape>();
    const auto offset = meta.at("offset").template get<std::size_t>();
    const auto nbytes = meta.at("nbytes").template get<std::size_t>();
    if (nbytes != shape_size(shape) * sizeof(T) || offset + nbytes > bytes.size())
      throw ValidationError("corrupt checkpoint entry '" + name + "'");
    std::vector<T> vals(shape_size(shape));
    std::memcpy(vals.data(), bytes.data() + offset, nbytes);
    detail::to_little_endian(vals.data(), vals.size());
    store.add(name, Tensor<T>(shape, std::move(vals)));
  }
  return store;
}

}  // namespace xlalign::ad
