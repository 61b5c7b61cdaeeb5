#include "sten/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "sten/errors.hpp"
#include "sten/run_config.hpp"

namespace sten {

namespace {

constexpr char kMagic[] = "STENCKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

void put_u64(std::ostream& os, std::uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_u16(std::ostream& os, std::uint16_t x) {
  char b[2] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff)};
  os.write(b, 2);
}

void put_u8(std::ostream& os, std::uint8_t x) { os.put(static_cast<char>(x)); }

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("truncated checkpoint");
  std::uint64_t x = 0;
  for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
  return x;
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw CheckpointError("truncated checkpoint");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint8_t get_u8(std::istream& is) {
  int c = is.get();
  if (c < 0) throw CheckpointError("truncated checkpoint");
  return static_cast<std::uint8_t>(c);
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  if (name.size() > 0xffff) throw CheckpointError("tensor name too long: " + name);
  put_u16(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u8(os, 0);  // dtype f64
  put_u8(os, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape) put_u64(os, d);
  for (double x : t.v) put_u64(os, std::bit_cast<std::uint64_t>(x));
}

}  // namespace

void save_checkpoint(const std::string& path, const StENModel& model) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp);
    os.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    os << model_config_text(model.config()) << "---\n";
    const ParameterStore& ps = model.params();
    const auto& bn = model.bn_states();
    put_u64(os, ps.size() + 2 * bn.size());
    for (std::size_t i = 0; i < ps.size(); ++i) put_tensor(os, ps[i].name, ps[i].value);
    for (std::size_t i = 0; i < bn.size(); ++i) {
      const std::string tag = "tower.bn" + std::to_string(i);
      put_tensor(os, tag + ".running_mean", bn[i].running_mean);
      put_tensor(os, tag + ".running_var", bn[i].running_var);
    }
    if (!os) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot move " + tmp + " to " + path);
  }
}

StENModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);

  char magic[kMagicLen];
  if (!is.read(magic, static_cast<std::streamsize>(kMagicLen)) ||
      std::string(magic, kMagicLen) != kMagic) {
    throw CheckpointError("not a checkpoint: " + path);
  }

  std::string cfg_text, line;
  bool saw_sep = false;
  while (std::getline(is, line)) {
    if (line == "---") {
      saw_sep = true;
      break;
    }
    cfg_text += line;
    cfg_text += '\n';
  }
  if (!saw_sep) throw CheckpointError("truncated checkpoint");
  ModelConfig config;
  try {
    config = parse_model_config_text(cfg_text);
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid embedded config: ") + e.what());
  }

  StENModel model(config, 0);
  std::vector<bool> filled(model.params().size(), false);
  std::vector<bool> bn_filled(2 * model.bn_states().size(), false);

  std::uint64_t count = get_u64(is);
  std::uint64_t expected = model.params().size() + 2 * model.bn_states().size();
  if (count != expected) {
    throw CheckpointError("tensor count " + std::to_string(count) + ", expected " +
                          std::to_string(expected));
  }
  for (std::uint64_t t = 0; t < count; ++t) {
    std::uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw CheckpointError("truncated checkpoint");
    if (get_u8(is) != 0) throw CheckpointError("unknown dtype for " + name);
    std::uint8_t ndim = get_u8(is);
    Shape shape(ndim);
    for (std::uint8_t d = 0; d < ndim; ++d) shape[d] = get_u64(is);

    Tensor* dst = nullptr;
    // Running statistics are stored next to, but not inside, the parameters.
    const std::string bn_prefix = "tower.bn";
    if (name.size() > bn_prefix.size() && name.compare(0, bn_prefix.size(), bn_prefix) == 0 &&
        name.find(".running_", bn_prefix.size()) != std::string::npos) {
      std::size_t idx = static_cast<std::size_t>(name[bn_prefix.size()] - '0');
      bool is_mean = name.find(".running_mean") != std::string::npos;
      if (idx >= model.bn_states().size()) throw CheckpointError("unknown tensor: " + name);
      dst = is_mean ? &model.bn_states()[idx].running_mean : &model.bn_states()[idx].running_var;
      std::size_t slot = 2 * idx + (is_mean ? 0 : 1);
      if (bn_filled[slot]) throw CheckpointError("duplicate tensor: " + name);
      bn_filled[slot] = true;
    } else {
      if (!model.params().has(name)) throw CheckpointError("unknown tensor: " + name);
      Parameter& p = model.params().at(name);
      std::size_t idx = 0;
      while (&model.params()[idx] != &p) ++idx;
      if (filled[idx]) throw CheckpointError("duplicate tensor: " + name);
      filled[idx] = true;
      dst = &p.value;
    }
    if (dst->shape != shape) {
      throw CheckpointError("shape mismatch for " + name + ": file " + shape_str(shape) +
                            ", model " + shape_str(dst->shape));
    }
    for (double& x : dst->v) x = std::bit_cast<double>(get_u64(is));
  }
  for (bool f : filled) {
    if (!f) throw CheckpointError("missing parameter tensor");
  }
  for (bool f : bn_filled) {
    if (!f) throw CheckpointError("missing batch-norm statistics");
  }
  if (is.get() != std::ifstream::traits_type::eof()) {
    throw CheckpointError("trailing bytes after tensors");
  }
  return model;
}

}  // namespace sten
