#include "trinity/checkpoint.hpp"

#include <limits>

#include "trinity/error.hpp"
#include "trinity/io_util.hpp"

namespace trinity {

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::vector<uint8_t> out;
  out.insert(out.end(), {'T', 'R', 'I', 'N'});
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > std::numeric_limits<uint16_t>::max()) {
      throw ValueError("checkpoint: tensor name too long: " + name.substr(0, 32) + "...");
    }
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const Shape& shape = tensor.shape();
    if (shape.size() > 255) throw ValueError("checkpoint: rank > 255 for " + name);
    out.push_back(static_cast<uint8_t>(shape.size()));
    for (size_t d : shape) put_u32(out, static_cast<uint32_t>(d));
    for (double v : tensor.values()) put_f64(out, v);
  }
  write_file_atomic(path, out);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  ByteReader r(bytes, path);
  if (r.str(4, "magic") != "TRIN") {
    throw ParseError(path + ": bad magic, expected \"TRIN\"");
  }
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = r.u32("tensor count");
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.reserve(count);
  for (uint32_t t = 0; t < count; ++t) {
    const uint16_t name_len = r.u16("name length");
    std::string name = r.str(name_len, "name");
    const uint8_t rank = r.u8("rank");
    Shape shape(rank);
    size_t total = 1;
    for (uint8_t i = 0; i < rank; ++i) {
      shape[i] = r.u32("dim");
      total *= shape[i];
    }
    std::vector<double> values(total);
    for (size_t i = 0; i < total; ++i) values[i] = r.f64("values");
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) {
    throw ParseError(path + ": " + std::to_string(r.remaining()) + " trailing bytes at offset " +
                     std::to_string(r.offset()));
  }
  return tensors;
}

}  // namespace trinity
