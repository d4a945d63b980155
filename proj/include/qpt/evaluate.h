#pragma once
#include <qpt/config.h>
#include <qpt/example.h>
#include <qpt/scf.h>

#include <functional>
#include <limits>
#include <string>

namespace qpt {

inline constexpr double kLogFloor = -12.0;

/// A prepared evaluation molecule with its converged reference.
struct EvalItem {
    Example ex;
    ScfResult oracle;
};

/// Builds examples and runs the oracle on each conformer. Non-converged or
/// degenerate molecules are dropped with a warning on stderr.
std::vector<EvalItem> prepare_eval_set(const std::vector<Conformer> &confs, double c_x = 1.0,
                                       double eri_threshold = kDefaultEriThreshold, int n_workers = 0);

/// Per-molecule absolute errors in reporting units.
struct EvalRecord {
    int molecule_id{0};
    double e_err_mev{0.0};
    double h_err_uha{0.0};   // mean over matrix entries
    double eps_err_uha{0.0}; // mean over orbital energies
    double e_minus_estar{0.0}; // signed, Hartree
    double idempotency{0.0};   // max-abs of rho S rho - 2 rho
};

struct Metrics {
    double mae_e{0.0};   // meV
    double mae_h{0.0};   // micro-Hartree
    double mae_eps{0.0}; // micro-Hartree
    std::vector<EvalRecord> records;
};

/// Error record from a prediction (E, H, eps) against a reference
/// (E*, H*, eps*). Identical inputs give exactly zero errors.
EvalRecord compare(int molecule_id, double e, const Mat &H, const Vec &eps, double e_star,
                   const Mat &H_star, const Vec &eps_star);

/// Averages records into Metrics.
Metrics aggregate(std::vector<EvalRecord> records);

using Predictor = std::function<Mat(const Example &)>;

/// Runs predict + implicit_energy (always with final purification) on each
/// item and reports errors against the oracle.
Metrics evaluate(const std::vector<EvalItem> &items, const Predictor &predict, EnergyConfig energy);

/// Per-molecule rows followed by a "mean" row.
std::string eval_csv(const Metrics &m);

struct ScanPoint {
    double c1{0.0}, c2{0.0};
    double log10_abs_de_ev{std::numeric_limits<double>::quiet_NaN()};
    bool in_train{false};
};

/// resolution x resolution grid over the union of train and eval ranges of a
/// two-coordinate angle_grid spec (or resolution points of a bond scan).
/// Points whose geometry or oracle fails carry NaN.
std::vector<ScanPoint> scan_grid(const ConformerSpec &spec, const Predictor &predict,
                                 EnergyConfig energy, int resolution, double c_x = 1.0,
                                 double eri_threshold = kDefaultEriThreshold);

std::string scan_csv(const std::vector<ScanPoint> &points);

} // namespace qpt
