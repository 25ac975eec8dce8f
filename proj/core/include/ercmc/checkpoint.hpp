#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ercmc/context_model.hpp"
#include "ercmc/corpus.hpp"
#include "ercmc/run_config.hpp"

namespace ercmc {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
  friend bool operator==(const StoredTensor&, const StoredTensor&) = default;
};

// In-memory image of an ERCK file.
struct Checkpoint {
  std::vector<StoredTensor> tensors;
  LabelVocabulary vocabulary;
  std::vector<std::pair<std::string, std::string>> config;  // key=value block

  RunConfig run_config() const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
Checkpoint make_checkpoint(const ContextModel<T>& model, const LabelVocabulary& vocabulary,
                           const RunConfig& config);

// Rebuilds the model described by the checkpoint's configuration and
// vocabulary and loads every tensor by name (shapes must match exactly).
template <typename T>
ContextModel<T> restore_model(const Checkpoint& checkpoint);

// Rounds every parameter to the f32 values a checkpoint stores. Evaluation
// before saving then matches evaluation after loading.
template <typename T>
void round_to_checkpoint_precision(ContextModel<T>& model);

}  // namespace ercmc
