#include "ercmc/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ercmc/io_util.hpp"

namespace ercmc {
namespace {

constexpr char kMagic[4] = {'E', 'R', 'C', 'K'};

}  // namespace

RunConfig Checkpoint::run_config() const {
  RunConfig cfg;
  for (const auto& [k, v] : config) cfg.set(k, v);
  cfg.model.num_classes = vocabulary.size();
  return cfg;
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kMagic, 4);
  le::put<std::uint32_t>(out, kCheckpointFormatVersion);
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    le::put_string(out, t.name);
    le::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t extent : t.shape) le::put<std::uint64_t>(out, extent);
    for (float v : t.values) le::put_f32(out, v);
  }
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.vocabulary.size()));
  for (const auto& label : checkpoint.vocabulary.labels()) le::put_string(out, label);
  std::string block;
  for (const auto& [k, v] : checkpoint.config) block += k + "=" + v + "\n";
  le::put_string(out, block);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_atomically(path, [&](std::ostream& out) { write_checkpoint(out, checkpoint); }, true);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw FormatError("not an ERCK checkpoint (bad magic)");
  }
  const auto version = le::get<std::uint32_t>(in, "version");
  if (version != kCheckpointFormatVersion) {
    throw FormatError("unsupported ERCK version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto count = le::get<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = le::get_string(in, "tensor name", 1 << 16);
    const auto rank = le::get<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + t.name + "' has invalid rank");
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(le::get<std::uint64_t>(in, "dim"));
    const std::size_t n = numel(t.shape);
    if (n > (std::size_t{1} << 34)) throw FormatError("tensor '" + t.name + "' is implausibly large");
    t.values.resize(n);
    for (auto& v : t.values) v = le::get_f32(in, "tensor data");
    ck.tensors.push_back(std::move(t));
  }
  const auto labels = le::get<std::uint32_t>(in, "vocabulary size");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < labels; ++i) names.push_back(le::get_string(in, "label", 1 << 16));
  ck.vocabulary = LabelVocabulary(std::move(names));
  std::istringstream block(le::get_string(in, "config block"));
  std::string line;
  while (std::getline(block, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint config line lacks '='");
    ck.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

template <typename T>
Checkpoint make_checkpoint(const ContextModel<T>& model, const LabelVocabulary& vocabulary,
                           const RunConfig& config) {
  Checkpoint ck;
  for (const auto& p : model.parameters()) {
    StoredTensor t{p.name, p.value.shape(), {}};
    t.values.reserve(p.value.size());
    for (T v : p.value.data()) t.values.push_back(static_cast<float>(v));
    ck.tensors.push_back(std::move(t));
  }
  ck.vocabulary = vocabulary;
  RunConfig echoed = config;
  echoed.model = model.config();
  ck.config = echoed.entries();
  return ck;
}

template <typename T>
ContextModel<T> restore_model(const Checkpoint& checkpoint) {
  auto cfg = checkpoint.run_config();
  ContextModel<T> model(cfg.model, 0);
  std::unordered_map<std::string, const StoredTensor*> by_name;
  for (const auto& t : checkpoint.tensors) by_name.emplace(t.name, &t);
  if (by_name.size() != model.parameters().size()) {
    throw ConsistencyError("checkpoint holds " + std::to_string(by_name.size()) +
                           " tensors, configuration expects " +
                           std::to_string(model.parameters().size()));
  }
  for (auto& p : model.parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConsistencyError("checkpoint lacks tensor '" + p.name + "'");
    if (it->second->shape != p.value.shape()) {
      throw ConsistencyError("tensor '" + p.name + "' has shape " +
                             shape_string(it->second->shape) + ", expected " +
                             shape_string(p.value.shape()));
    }
    auto dst = p.value.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->values[i]);
  }
  return model;
}

template <typename T>
void round_to_checkpoint_precision(ContextModel<T>& model) {
  for (auto& p : model.parameters()) {
    for (T& v : p.value.mutable_data()) v = static_cast<T>(static_cast<float>(v));
  }
}

template Checkpoint make_checkpoint(const ContextModel<float>&, const LabelVocabulary&, const RunConfig&);
template Checkpoint make_checkpoint(const ContextModel<double>&, const LabelVocabulary&, const RunConfig&);
template ContextModel<float> restore_model(const Checkpoint&);
template ContextModel<double> restore_model(const Checkpoint&);
template void round_to_checkpoint_precision(ContextModel<float>&);
template void round_to_checkpoint_precision(ContextModel<double>&);

}  // namespace ercmc
