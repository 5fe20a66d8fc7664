#include "anclab/training/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <set>
#include <sstream>

#include "anclab/error.hpp"

namespace anclab::training {
namespace {

constexpr char kMagic[4] = {'A', 'N', 'C', 'L'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.append(s); }
  void name(const std::string& s) {
    if (s.size() > 0xFFFF) throw Error("tensor name too long: " + s.substr(0, 32));
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string name() { return std::string(bytes(u16())); }
  std::vector<float> floats(std::size_t n) {
    need(n * 4);
    std::vector<float> out(n);
    for (float& v : out) v = f32();
    return out;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw Error("truncated checkpoint: need " + std::to_string(n) + " bytes at offset " +
                  std::to_string(pos_) + ", file has " + std::to_string(data_.size()));
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

const TensorRecord* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (nn::numel(t.shape) != t.values.size()) throw Error("tensor '" + t.name + "' shape/value mismatch");
    w.name(t.name);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values) w.f32(v);
  }
  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    w.u64(ckpt.optimizer->step);
    w.u32(static_cast<std::uint32_t>(ckpt.optimizer->entries.size()));
    for (const auto& e : ckpt.optimizer->entries) {
      if (e.m.size() != e.v.size()) throw Error("optimizer moments for '" + e.name + "' differ in size");
      w.name(e.name);
      w.u32(static_cast<std::uint32_t>(e.m.size()));
      for (float v : e.m) w.f32(v);
      for (float v : e.v) w.f32(v);
    }
  }
  const std::string meta = ckpt.metadata.dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw Error("incompatible checkpoint: bad magic");
  }
  Reader r(bytes);
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error("incompatible checkpoint: version " + std::to_string(version) + ", expected " +
                std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    t.name = r.name();
    const std::uint8_t rank = r.u8();
    for (std::uint8_t d = 0; d < rank; ++d) t.shape.push_back(r.u32());
    t.values = r.floats(nn::numel(t.shape));
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.u8() != 0) {
    OptimizerBlock block;
    block.step = r.u64();
    const std::uint32_t entries = r.u32();
    for (std::uint32_t i = 0; i < entries; ++i) {
      OptimizerRecord e;
      e.name = r.name();
      const std::uint32_t n = r.u32();
      e.m = r.floats(n);
      e.v = r.floats(n);
      block.entries.push_back(std::move(e));
    }
    ckpt.optimizer = std::move(block);
  }
  const std::uint32_t json_len = r.u32();
  const std::string_view meta = r.bytes(json_len);
  if (!r.done()) throw Error("incompatible checkpoint: trailing bytes");
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("incompatible checkpoint: bad metadata: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string data = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

template <typename T>
std::vector<TensorRecord> export_tensors(const nn::ParamList<T>& params) {
  std::vector<TensorRecord> out;
  for (const auto& p : params) {
    const auto v = p.tensor.values();
    TensorRecord rec{p.name, p.tensor.shape(), std::vector<float>(v.size())};
    for (std::size_t i = 0; i < v.size(); ++i) rec.values[i] = static_cast<float>(v[i]);
    out.push_back(std::move(rec));
  }
  return out;
}

template <typename T>
void import_tensors(const std::vector<TensorRecord>& records, const nn::ParamList<T>& params) {
  std::vector<std::string> missing, unexpected, misshaped;
  std::set<std::string> wanted;
  for (const auto& p : params) wanted.insert(p.name);
  std::vector<const TensorRecord*> matched(params.size(), nullptr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (const auto& r : records) {
      if (r.name == params[i].name) matched[i] = &r;
    }
    if (matched[i] == nullptr) {
      missing.push_back(params[i].name);
    } else if (matched[i]->shape != params[i].tensor.shape()) {
      misshaped.push_back(params[i].name + " " + nn::to_string(matched[i]->shape) + " vs " +
                          nn::to_string(params[i].tensor.shape()));
    }
  }
  for (const auto& r : records) {
    if (!wanted.count(r.name)) unexpected.push_back(r.name);
  }
  if (!missing.empty() || !unexpected.empty() || !misshaped.empty()) {
    std::string msg = "checkpoint does not match the model:";
    if (!missing.empty()) msg += " missing [" + join(missing) + "]";
    if (!unexpected.empty()) msg += " unexpected [" + join(unexpected) + "]";
    if (!misshaped.empty()) msg += " shape [" + join(misshaped) + "]";
    throw Error(msg);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Tensor<T> t = params[i].tensor;
    auto dst = t.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(matched[i]->values[k]);
  }
}

template <typename T>
OptimizerBlock export_optimizer(const nn::Adam<T>& adam) {
  OptimizerBlock block;
  block.step = adam.step_count();
  for (std::size_t i = 0; i < adam.names().size(); ++i) {
    const auto& m = adam.first_moments()[i];
    const auto& v = adam.second_moments()[i];
    block.entries.push_back({adam.names()[i], std::vector<float>(m.begin(), m.end()),
                             std::vector<float>(v.begin(), v.end())});
  }
  return block;
}

template <typename T>
void import_optimizer(const OptimizerBlock& block, nn::Adam<T>& adam) {
  const auto& names = adam.names();
  if (block.entries.size() != names.size()) throw Error("incompatible checkpoint: optimizer size");
  std::vector<std::vector<T>> m, v;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& e = block.entries[i];
    if (e.name != names[i] || e.m.size() != adam.parameters()[i].size()) {
      throw Error("incompatible checkpoint: optimizer entry " + e.name);
    }
    m.emplace_back(e.m.begin(), e.m.end());
    v.emplace_back(e.v.begin(), e.v.end());
  }
  adam.restore(block.step, std::move(m), std::move(v));
}

template std::vector<TensorRecord> export_tensors(const nn::ParamList<float>&);
template std::vector<TensorRecord> export_tensors(const nn::ParamList<double>&);
template void import_tensors(const std::vector<TensorRecord>&, const nn::ParamList<float>&);
template void import_tensors(const std::vector<TensorRecord>&, const nn::ParamList<double>&);
template OptimizerBlock export_optimizer(const nn::Adam<float>&);
template OptimizerBlock export_optimizer(const nn::Adam<double>&);
template void import_optimizer(const OptimizerBlock&, nn::Adam<float>&);
template void import_optimizer(const OptimizerBlock&, nn::Adam<double>&);

}  // namespace anclab::training
