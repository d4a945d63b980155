#pragma once
#include <qpt/trainer.h>

#include <string>

namespace qpt {

inline constexpr char kCheckpointMagic[8] = {'Q', 'P', 'T', 'C', 'K', 'P', 'T', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CheckpointHeader {
    ModelConfig model;
    uint64_t config_digest{0};
    int64_t step{0};
    uint64_t draw{0};
    int64_t skipped{0};
};

/// Little-endian binary image: magic, version, model config, train-config
/// digest, counters, then named tensors (params, adam.m.*, adam.v.*).
template <typename T>
std::string serialize_checkpoint(const ModelConfig &model, uint64_t digest,
                                 const TrainState<T> &state);

/// Parses a checkpoint image. A model config differing from `expected`
/// raises CheckpointError naming the first mismatched field.
template <typename T>
TrainState<T> deserialize_checkpoint(std::string_view bytes, const ModelConfig &expected,
                                     CheckpointHeader *header = nullptr);

CheckpointHeader read_checkpoint_header(std::string_view bytes);

template <typename T>
void save_checkpoint(const std::string &path, const ModelConfig &model, uint64_t digest,
                     const TrainState<T> &state);

std::string read_file_bytes(const std::string &path);

} // namespace qpt
