#include "ptl/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "byte_io.hpp"
#include "ptl/error.hpp"

namespace ptl {

namespace {

using detail::get_le;
using detail::put_f64;
using detail::put_le;
using detail::put_u32;

constexpr std::string_view kMagic = "PTCK";

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t le(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    const auto v = get_le(bytes_, pos_, width);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint: truncated while reading ") + what + " at byte " +
                        std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  validate_params(checkpoint.params.tensors, checkpoint.params.config);
  KeyValues header;
  checkpoint.params.config.write_to(header);
  header.set("meta.epoch", std::to_string(checkpoint.meta.epoch));
  header.set("meta.seed", std::to_string(checkpoint.meta.seed));
  header.set("meta.source", checkpoint.meta.source_tag);
  header.set("meta.classes", join(checkpoint.class_names, ","));
  const std::string text = header.to_text();

  std::string out(kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_u32(out, static_cast<std::uint32_t>(checkpoint.params.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.params.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto extent : tensor.shape()) put_le(out, extent, 8);
    for (double v : tensor.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("checkpoint: bad magic (expected \"PTCK\")");
  }
  Reader in(bytes.substr(kMagic.size()));
  const auto version = in.le(4, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = in.le(4, "header length");
  const KeyValues header = KeyValues::parse(in.take(header_len, "config header"));

  Checkpoint ck;
  ck.params.config = ModelConfig::read_from(header);
  ck.meta.epoch = header.get_u64("meta.epoch", 0);
  ck.meta.seed = header.get_u64("meta.seed", 0);
  ck.meta.source_tag = header.get_string("meta.source", "");
  ck.class_names = header.get_list("meta.classes", {});

  const auto count = in.le(4, "tensor count");
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto name_len = in.le(4, "tensor name length");
    std::string name(in.take(name_len, "tensor name"));
    const auto rank = in.le(4, "tensor rank");
    if (rank > 8) throw FormatError("checkpoint: tensor '" + name + "' has implausible rank");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(in.le(8, "tensor extent"));
    const std::size_t numel = shape_numel(shape);
    if (numel > in.remaining() / 8) {
      throw FormatError("checkpoint: truncated data for tensor '" + name + "'");
    }
    std::vector<double> values(numel);
    for (auto& v : values) v = std::bit_cast<double>(in.le(8, "tensor data"));
    ck.params.tensors.add(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }
  if (in.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(in.remaining()) + " trailing bytes");
  }
  validate_params(ck.params.tensors, ck.params.config);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ModelParams restore_params(const Checkpoint& checkpoint, std::size_t num_classes,
                           bool allow_head_reinit, std::uint64_t seed) {
  const std::size_t have = checkpoint.params.config.num_classes;
  if (have == num_classes) return checkpoint.params.clone();
  if (!allow_head_reinit) {
    throw ShapeError("checkpoint has " + std::to_string(have) + " classes, target has " +
                     std::to_string(num_classes));
  }
  return reinit_head(checkpoint.params, num_classes, seed);
}

}  // namespace ptl
