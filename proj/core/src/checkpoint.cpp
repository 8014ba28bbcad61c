#include "edgeorch/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <sstream>

#include "edgeorch/errors.hpp"
#include "edgeorch/scenario_io.hpp"

namespace edgeorch {

namespace {

constexpr char kMagic[] = "SILGPO1";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(char((value >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(std::uint8_t(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string header_text(const nn::ArchConfig& a, const Hyperparams& h) {
  std::ostringstream os;
  os << "arch.deploy_features=" << a.deploy_features << "\n"
     << "arch.route_features=" << a.route_features << "\n"
     << "arch.invoke_features=" << a.invoke_features << "\n"
     << "arch.hidden=" << a.hidden << "\n"
     << "arch.heads=" << a.heads << "\n"
     << "arch.head_dim=" << a.head_dim << "\n"
     << "arch.gat_layers=" << a.gat_layers << "\n"
     << "arch.trunk=" << a.trunk << "\n"
     << "arch.leaky_slope=" << fmt(a.leaky_slope) << "\n"
     << "hp.lr_actor=" << fmt(h.lr_actor) << "\n"
     << "hp.lr_critic=" << fmt(h.lr_critic) << "\n"
     << "hp.gamma=" << fmt(h.gamma) << "\n"
     << "hp.gae_lambda=" << fmt(h.gae_lambda) << "\n"
     << "hp.clip_eps=" << fmt(h.clip_eps) << "\n"
     << "hp.entropy_coef=" << fmt(h.entropy_coef) << "\n"
     << "hp.sil_coef=" << fmt(h.sil_coef) << "\n"
     << "hp.high_return_ratio=" << fmt(h.high_return_ratio) << "\n"
     << "hp.batch_size=" << h.batch_size << "\n"
     << "hp.mini_batch_size=" << h.mini_batch_size << "\n"
     << "hp.k_epochs=" << h.k_epochs << "\n"
     << "hp.determining_sample_freq=" << h.determining_sample_freq << "\n"
     << "hp.hr_capacity=" << h.hr_capacity << "\n"
     << "hp.max_grad_norm=" << fmt(h.max_grad_norm) << "\n"
     << "hp.normalize_advantages=" << (h.normalize_advantages ? 1 : 0) << "\n";
  return os.str();
}

void parse_header(const std::string& text, nn::ArchConfig& a, Hyperparams& h) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto raw = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw CheckpointError("header lacks '" + key + "'");
    return it->second;
  };
  auto real = [&](const std::string& key) {
    const auto& s = raw(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw CheckpointError("header value '" + key + "' is not a number");
    return v;
  };
  auto count = [&](const std::string& key) {
    const auto& s = raw(key);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw CheckpointError("header value '" + key + "' is not a count");
    return std::size_t(v);
  };
  a.deploy_features = count("arch.deploy_features");
  a.route_features = count("arch.route_features");
  a.invoke_features = count("arch.invoke_features");
  a.hidden = count("arch.hidden");
  a.heads = count("arch.heads");
  a.head_dim = count("arch.head_dim");
  a.gat_layers = count("arch.gat_layers");
  a.trunk = count("arch.trunk");
  a.leaky_slope = real("arch.leaky_slope");
  h.lr_actor = real("hp.lr_actor");
  h.lr_critic = real("hp.lr_critic");
  h.gamma = real("hp.gamma");
  h.gae_lambda = real("hp.gae_lambda");
  h.clip_eps = real("hp.clip_eps");
  h.entropy_coef = real("hp.entropy_coef");
  h.sil_coef = real("hp.sil_coef");
  h.high_return_ratio = real("hp.high_return_ratio");
  h.batch_size = count("hp.batch_size");
  h.mini_batch_size = count("hp.mini_batch_size");
  h.k_epochs = count("hp.k_epochs");
  h.determining_sample_freq = count("hp.determining_sample_freq");
  h.hr_capacity = count("hp.hr_capacity");
  h.max_grad_norm = real("hp.max_grad_norm");
  h.normalize_advantages = count("hp.normalize_advantages") != 0;
}

}  // namespace

Checkpoint make_checkpoint(const nn::ArchConfig& arch, const Hyperparams& hp,
                           const std::vector<const nn::ParamStore*>& stores) {
  Checkpoint c{arch, hp, {}};
  for (const auto* store : stores) {
    for (std::size_t i = 0; i < store->tensors(); ++i) {
      const auto& p = store->at(i);
      NamedArray a;
      a.name = p.name;
      a.shape = {std::uint64_t(p.value.rows()), std::uint64_t(p.value.cols())};
      a.data.assign(p.value.data(), p.value.data() + p.value.size());
      c.arrays.push_back(std::move(a));
    }
  }
  return c;
}

std::string encode_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, kMagicSize);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const auto header = header_text(c.arch, c.hp);
  put_le<std::uint32_t>(out, std::uint32_t(header.size()));
  out += header;
  put_le<std::uint32_t>(out, std::uint32_t(c.arrays.size()));
  for (const auto& a : c.arrays) {
    std::uint64_t elements = 1;
    for (auto d : a.shape) elements *= d;
    if (elements != a.data.size()) throw CheckpointError("array '" + a.name + "' does not match its shape");
    put_le<std::uint32_t>(out, std::uint32_t(a.name.size()));
    out += a.name;
    put_le<std::uint32_t>(out, std::uint32_t(a.shape.size()));
    for (auto d : a.shape) put_le<std::uint64_t>(out, d);
    for (double v : a.data) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.text(kMagicSize) != std::string(kMagic, kMagicSize)) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = in.le<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  parse_header(in.text(in.le<std::uint32_t>()), c.arch, c.hp);
  const auto count = in.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = in.text(in.le<std::uint32_t>());
    const auto rank = in.le<std::uint32_t>();
    if (rank > 8) throw CheckpointError("array '" + a.name + "' has implausible rank");
    std::uint64_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.shape.push_back(in.le<std::uint64_t>());
      elements *= a.shape.back();
    }
    if (elements > bytes.size() / sizeof(double)) throw CheckpointError("checkpoint is truncated");
    a.data.resize(elements);
    for (auto& v : a.data) v = in.f64();
    c.arrays.push_back(std::move(a));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last array");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes);
}

void apply_checkpoint(const Checkpoint& c, const nn::ArchConfig& arch, const std::vector<nn::ParamStore*>& stores) {
  if (!(c.arch == arch)) throw CheckpointError("checkpoint architecture differs from the network");
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : c.arrays) by_name[a.name] = &a;
  std::vector<std::pair<nn::Parameter*, const NamedArray*>> plan;
  std::size_t total = 0;
  for (auto* store : stores) {
    for (std::size_t i = 0; i < store->tensors(); ++i) {
      auto& p = store->at(i);
      auto it = by_name.find(p.name);
      if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter '" + p.name + "'");
      const auto& shape = it->second->shape;
      if (shape.size() != 2 || shape[0] != std::uint64_t(p.value.rows()) || shape[1] != std::uint64_t(p.value.cols()))
        throw CheckpointError("shape mismatch for parameter '" + p.name + "'");
      plan.emplace_back(&p, it->second);
      ++total;
    }
  }
  if (total != c.arrays.size()) throw CheckpointError("checkpoint holds arrays the network does not have");
  for (auto& [p, a] : plan) std::memcpy(p->value.data(), a->data.data(), a->data.size() * sizeof(double));
}

void save_trainer(SilGpoTrainer& trainer, const std::filesystem::path& path) {
  save_checkpoint(make_checkpoint(trainer.arch(), trainer.hyperparams(),
                                  {&trainer.actor().params(), &trainer.critic().params()}),
                  path);
}

void restore_trainer(SilGpoTrainer& trainer, const Checkpoint& ckpt) {
  apply_checkpoint(ckpt, trainer.arch(), {&trainer.actor().params(), &trainer.critic().params()});
  trainer.old_actor().params().assign(trainer.actor().params());
}

}  // namespace edgeorch
