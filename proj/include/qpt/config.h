#pragma once
#include <qpt/conformer.h>
#include <qpt/energy.h>
#include <qpt/model.h>
#include <qpt/optim.h>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qpt {

enum class LossMode { implicit, supervised };

struct TrainConfig {
    ModelConfig model;
    EnergyConfig energy;
    double eri_threshold{kDefaultEriThreshold};
    double lr_max{3e-4};
    double lr_min{1e-5};
    int64_t warmup_steps{100};
    int64_t total_steps{5000};
    std::vector<std::pair<int64_t, int>> iter_schedule{{0, 1}, {3000, 2}};
    AdamConfig adam;
    int batch_size{1};
    ConformerSpec data;
    uint64_t seed{0};
    int reuse_window{1};
    int64_t checkpoint_every{1000};
    int64_t bound_check_every{100};
    LossMode loss{LossMode::implicit};

    /// Iteration count in force at `step`.
    int n_iter_at(int64_t step) const;
    void validate() const;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Parses "section.key = value" lines; '#' starts a comment. Unknown keys,
/// repeated keys and malformed values raise ConfigError with the line number.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::string &path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const TrainConfig &cfg);

/// FNV-1a hash of the canonical text form.
uint64_t config_digest(const TrainConfig &cfg);

/// Resolves a data.template value: a builtin molecule name or an XYZ path.
Molecule resolve_template(const std::string &name, std::optional<int> charge = std::nullopt);

} // namespace qpt
