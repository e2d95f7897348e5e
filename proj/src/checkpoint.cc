// Copyright 2026 The genleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cstring>

#include "genleak/io.h"
#include "genleak/training.h"

GENLEAK_NAMESPACE_BEGIN

using internal::str_cat;

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[4] = {'G', 'L', 'C', 'K'};
constexpr std::uint8_t kDtype = sizeof(Real) == 4 ? 0 : 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n, const char* what) {
    need(n, what);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(str_cat(path_, ": truncated checkpoint while reading ", what,
                                " at byte ", pos_));
    }
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(std::uint8_t dtype) { return dtype == 0 ? 4 : 8; }

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint8_t>(out, kDtype);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
  out.append(reinterpret_cast<const char*>(t.data().data()), t.numel() * sizeof(Real));
}

const char* const kRoles[] = {"generator", "discriminator", "encoder"};

void collect_network(const Network& n, const std::string& role,
                     std::vector<std::pair<std::string, Tensor>>& out,
                     ConfigDocument& doc) {
  write_network(n.spec, doc.section(role));
  ConfigSection& opt = doc.section(role + ".optimizer");
  opt.set("kind", ConfigValue(std::string(optimizer_kind_name(n.opt.settings.kind))));
  opt.set("learning_rate", ConfigValue(n.opt.settings.learning_rate));
  opt.set("beta1", ConfigValue(n.opt.settings.beta1));
  opt.set("beta2", ConfigValue(n.opt.settings.beta2));
  opt.set("eps", ConfigValue(n.opt.settings.eps));
  opt.set("t", ConfigValue(static_cast<std::int64_t>(n.opt.t)));
  opt.set("moments", ConfigValue(static_cast<std::int64_t>(n.opt.m.size())));
  for (const auto& e : n.params.entries()) out.emplace_back(role + "/" + e.name, e.tensor);
  auto flat = [](const std::vector<Real>& v) { return Tensor(Shape{v.size()}, v); };
  for (std::size_t i = 0; i < n.opt.m.size(); ++i) {
    out.emplace_back(str_cat(role, "/opt.m.", i), flat(n.opt.m[i]));
    out.emplace_back(str_cat(role, "/opt.v.", i), flat(n.opt.v[i]));
  }
}

}  // namespace

namespace {

void write_container(const ConfigDocument& doc,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     std::uint32_t version, const std::string& path) {
  std::string header = doc.to_text();
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, version);
  put<std::uint64_t>(out, header.size());
  out += header;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) put_tensor(out, name, t);
  atomic_write_file(path, out);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ConfigDocument doc;
  ConfigSection& c = doc.section("checkpoint");
  c.set("family", ConfigValue(std::string(family_name(ckpt.model.family))));
  c.set("step", ConfigValue(static_cast<std::int64_t>(ckpt.step)));
  c.set("epoch", ConfigValue(static_cast<std::int64_t>(ckpt.epoch)));
  c.set("rng_state", ConfigValue(ckpt.rng_state));
  c.set("metrics_path", ConfigValue(ckpt.metrics_path));
  c.set("began_k", ConfigValue(ckpt.model.began.k));
  c.set("began_gamma", ConfigValue(ckpt.model.began.gamma));
  c.set("began_lambda_k", ConfigValue(ckpt.model.began.lambda_k));
  write_train_config(ckpt.config, doc.section("train"));

  std::vector<std::pair<std::string, Tensor>> tensors;
  collect_network(ckpt.model.generator, "generator", tensors, doc);
  collect_network(ckpt.model.discriminator, "discriminator", tensors, doc);
  if (ckpt.model.encoder) collect_network(*ckpt.model.encoder, "encoder", tensors, doc);

  write_container(doc, tensors, ckpt.format_version, path);
}

void save_generator(const Network& generator, const std::string& path) {
  ConfigDocument doc;
  std::vector<std::pair<std::string, Tensor>> tensors;
  collect_network(generator, "generator", tensors, doc);
  write_container(doc, tensors, kCheckpointVersion, path);
}

CheckpointReader::CheckpointReader(const std::string& path) : bytes_(read_file(path)) {
  Cursor cur(bytes_, path);
  std::string magic = cur.get_string(4, "magic");
  if (magic != std::string(kMagic, 4)) throw FormatError(str_cat(path, ": not a checkpoint file"));
  version_ = cur.get<std::uint32_t>("version");
  if (version_ != kCheckpointVersion) {
    throw FormatError(str_cat(path, ": unsupported checkpoint version ", version_,
                              " (expected ", kCheckpointVersion, ")"));
  }
  auto header_len = cur.get<std::uint64_t>("header length");
  header_ = parse_config(cur.get_string(header_len, "header"));
  auto count = cur.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = cur.get<std::uint32_t>("tensor name length");
    std::string name = cur.get_string(name_len, "tensor name");
    Slot slot;
    slot.dtype = cur.get<std::uint8_t>("dtype");
    if (slot.dtype > 1) throw FormatError(str_cat(path, ": tensor '", name, "' has unknown dtype"));
    auto rank = cur.get<std::uint32_t>("rank");
    for (std::uint32_t r = 0; r < rank; ++r) {
      slot.shape.push_back(static_cast<std::size_t>(cur.get<std::uint64_t>("dims")));
    }
    slot.offset = cur.pos();
    cur.skip(shape_numel(slot.shape) * dtype_size(slot.dtype), "tensor data");
    if (!slots_.emplace(name, slot).second) {
      throw FormatError(str_cat(path, ": duplicate tensor '", name, "'"));
    }
    order_.push_back(name);
  }
  if (!cur.done()) throw FormatError(str_cat(path, ": trailing bytes after last tensor"));
}

std::vector<std::string> CheckpointReader::tensor_names() const { return order_; }

bool CheckpointReader::has_tensor(const std::string& name) const {
  return slots_.count(name) > 0;
}

Tensor CheckpointReader::read_tensor(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw FormatError(str_cat("checkpoint has no tensor '", name, "'"));
  log_.push_back(name);
  const Slot& s = it->second;
  Tensor t(s.shape);
  const char* p = bytes_.data() + s.offset;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (s.dtype == 0) {
      float v;
      std::memcpy(&v, p + 4 * i, 4);
      t[i] = static_cast<Real>(v);
    } else {
      double v;
      std::memcpy(&v, p + 8 * i, 8);
      t[i] = static_cast<Real>(v);
    }
  }
  return t;
}

bool CheckpointReader::has_network(const std::string& role) const {
  return header_.has_section(role);
}

Network CheckpointReader::read_network(const std::string& role) {
  const ConfigSection* s = header_.find_section(role);
  if (!s) throw FormatError(str_cat("checkpoint has no network '", role, "'"));
  Network n;
  n.spec = genleak::read_network(*s);
  Rng scratch(0);
  n.params = build_network(n.spec, scratch);
  for (auto& e : n.params.entries()) {
    Tensor t = read_tensor(role + "/" + e.name);
    if (t.shape() != e.tensor.shape()) {
      throw FormatError(str_cat("checkpoint tensor '", role, "/", e.name, "' has shape ",
                                shape_str(t.shape()), ", expected ", shape_str(e.tensor.shape())));
    }
    e.tensor = std::move(t);
  }
  if (const ConfigSection* o = header_.find_section(role + ".optimizer")) {
    OptimizerSettings st;
    st.kind = parse_optimizer_kind(o->get_string("kind", "adam"));
    st.learning_rate = o->get_double("learning_rate", st.learning_rate);
    st.beta1 = o->get_double("beta1", st.beta1);
    st.beta2 = o->get_double("beta2", st.beta2);
    st.eps = o->get_double("eps", st.eps);
    n.opt = OptimizerState(st);
    n.opt.t = static_cast<std::uint64_t>(o->get_int("t", 0));
    auto moments = static_cast<std::size_t>(o->get_int("moments", 0));
    for (std::size_t i = 0; i < moments; ++i) {
      n.opt.m.push_back(read_tensor(str_cat(role, "/opt.m.", i)).storage());
      n.opt.v.push_back(read_tensor(str_cat(role, "/opt.v.", i)).storage());
    }
  }
  return n;
}

Checkpoint load_checkpoint(const std::string& path) {
  CheckpointReader r(path);
  const ConfigSection* c = r.header().find_section("checkpoint");
  const ConfigSection* t = r.header().find_section("train");
  if (!c || !t) throw FormatError(str_cat(path, ": checkpoint header is incomplete"));
  Checkpoint ck;
  ck.format_version = r.version();
  ck.model.family = parse_family(c->get_string("family", "gan"));
  ck.step = static_cast<std::uint64_t>(c->get_int("step", 0));
  ck.epoch = static_cast<std::uint64_t>(c->get_int("epoch", 0));
  ck.rng_state = c->get_string("rng_state", "");
  ck.metrics_path = c->get_string("metrics_path", "");
  ck.model.began.k = c->get_double("began_k", 0);
  ck.model.began.gamma = c->get_double("began_gamma", 0.5);
  ck.model.began.lambda_k = c->get_double("began_lambda_k", 0.001);
  ck.config = read_train_config(*t);
  ck.model.generator = r.read_network(kRoles[0]);
  ck.model.discriminator = r.read_network(kRoles[1]);
  if (r.has_network(kRoles[2])) ck.model.encoder = r.read_network(kRoles[2]);
  return ck;
}

Network load_generator(const std::string& path) {
  CheckpointReader r(path);
  return r.read_network("generator");
}

GENLEAK_NAMESPACE_END
