#include <qpt/checkpoint.h>
#include <qpt/evaluate.h>
#include <qpt/trainer.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fmt/core.h>
#include <fstream>
#include <random>
#include <variant>

using namespace qpt;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoConvergence = 2;

struct LoadedModel {
    ModelConfig cfg;
    std::variant<ParamSet<float>, ParamSet<double>> params;

    Predictor predictor() const {
        return std::visit(
            [this](const auto &p) -> Predictor {
                return [this, &p](const Example &ex) { return predict_hamiltonian(cfg, p, ex); };
            },
            params);
    }
    void zero_head() {
        std::visit([](auto &p) { zero_final_head(p); }, params);
    }
};

LoadedModel load_model(const std::string &path, const std::optional<ModelConfig> &expected) {
    const auto bytes = read_file_bytes(path);
    const auto header = read_checkpoint_header(bytes);
    const ModelConfig want = expected.value_or(header.model);
    LoadedModel m{want, ParamSet<float>{}};
    if (want.precision == Precision::f32)
        m.params = deserialize_checkpoint<float>(bytes, want).params;
    else
        m.params = deserialize_checkpoint<double>(bytes, want).params;
    return m;
}

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    f << text;
}

struct MoleculeArgs {
    std::string xyz;
    int charge{0};
    std::string basis{"sto-3g"};
};

void add_molecule_args(CLI::App *cmd, MoleculeArgs &a) {
    cmd->add_option("xyz", a.xyz, "XYZ file (Angstrom)")->required();
    cmd->add_option("--charge", a.charge, "Molecular charge");
    cmd->add_option("--basis", a.basis, "Basis set name")->capture_default_str();
}

struct Loaded {
    Molecule mol;
    AOBasis basis;
    IntegralSet ints;
};

Loaded load_molecule(const MoleculeArgs &a, double threshold = kDefaultEriThreshold) {
    Loaded l;
    l.mol = read_xyz_file(a.xyz, a.charge);
    l.basis = build_basis(l.mol, a.basis);
    l.ints = compute_integrals(l.basis, l.mol, threshold);
    return l;
}

std::string format_vec(const Vec &v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += fmt::format("{}{:.10f}", i ? " " : "", v(i));
    return s;
}

int cmd_scf(const MoleculeArgs &a, double tol, int max_iter) {
    const auto l = load_molecule(a);
    ScfOptions opts;
    opts.tol_e = tol;
    opts.max_iter = max_iter;
    const auto r = scf_converge(l.ints, l.mol.n_occ(), opts);
    fmt::print("e_total {:.12f}\n", r.e_total);
    fmt::print("n_iterations {}\n", r.n_iterations);
    fmt::print("converged {}\n", r.converged ? "yes" : "no");
    fmt::print("eps {}\n", format_vec(r.eps_star));
    return r.converged ? kExitOk : kExitNoConvergence;
}

int cmd_energy(const MoleculeArgs &a, const EnergyConfig &ec, const std::string &guess,
               const std::string &ckpt) {
    const auto l = load_molecule(a);
    Mat H;
    if (!ckpt.empty()) {
        const auto model = load_model(ckpt, std::nullopt);
        const Molecule mol = canonicalize(l.mol);
        const auto ex = make_example({mol, {0.0, 0.0}}, ec.c_x);
        if (ex.degenerate) throw DegenerateGapError(0.0, ex.n_occ);
        H = model.predictor()(ex);
        const auto r = implicit_energy(ex.ints, H, ex.n_occ, ec);
        fmt::print("e_total {:.12f}\n", r.e_total);
        fmt::print("eps {}\n", format_vec(r.eps));
        return kExitOk;
    }
    if (guess == "core") H = l.ints.H_core;
    else if (guess == "init") H = initial_guess(l.ints, l.mol.n_occ(), ec.c_x).H_init;
    else throw CLI::ValidationError("--guess", "expected core or init");
    const auto r = implicit_energy(l.ints, H, l.mol.n_occ(), ec);
    fmt::print("e_total {:.12f}\n", r.e_total);
    fmt::print("eps {}\n", format_vec(r.eps));
    return kExitOk;
}

int cmd_gradcheck(const MoleculeArgs &a, EnergyConfig ec, int trials, double step, double noise,
                  uint64_t seed, std::optional<double> threshold) {
    const auto l = load_molecule(a);
    const int n = l.ints.n_ao(), n_occ = l.mol.n_occ();
    const double limit = threshold.value_or(ec.n_iter == 1 ? 1e-5 : 1e-4);
    const Mat base = initial_guess(l.ints, n_occ, ec.c_x).H_init;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Mat H = base;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) H(i, j) = H(j, i) = base(i, j) + noise * normal(rng);
        const auto g = implicit_energy_grad(l.ints, H, n_occ, ec);
        Mat fd(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                Mat Hp = H, Hm = H;
                Hp(i, j) += step;
                Hm(i, j) -= step;
                if (i != j) {
                    Hp(j, i) += step;
                    Hm(j, i) -= step;
                }
                const double d = (implicit_energy(l.ints, Hp, n_occ, ec).e_total -
                                  implicit_energy(l.ints, Hm, n_occ, ec).e_total) /
                                 (2.0 * step);
                fd(i, j) = fd(j, i) = i == j ? d : 0.5 * d;
            }
        const double err = (fd - g.dE_dH).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff();
        worst = std::max(worst, err);
        fmt::print("trial {:>3}  rel_err {:.3e}\n", t, err);
    }
    fmt::print("max_rel_err {:.3e} (threshold {:.0e})\n", worst, limit);
    return worst < limit ? kExitOk : kExitError;
}

int cmd_train(const std::string &config_path, const std::string &resume, const std::string &out,
              bool quiet) {
    const auto cfg = load_config(config_path);
    auto run = [&]<typename T>() {
        RunOptions<T> opts;
        opts.out_dir = out;
        opts.quiet = quiet;
        std::optional<TrainState<T>> state;
        if (!resume.empty()) {
            CheckpointHeader h;
            state = deserialize_checkpoint<T>(read_file_bytes(resume), cfg.model, &h);
            if (h.config_digest != config_digest(cfg))
                throw CheckpointError("checkpoint was written with a different training config");
        }
        const auto res = run_training<T>(cfg, opts, std::move(state));
        const double last = res.log.empty() ? std::nan("") : res.log.back().loss_hartree;
        fmt::print("trained to step {} (skipped {}), last loss {:.10f} Ha, output in {}\n", res.state.step,
                   res.state.skipped, last, out);
    };
    if (cfg.model.precision == Precision::f32) run.template operator()<float>();
    else run.template operator()<double>();
    return kExitOk;
}

std::vector<Conformer> xyz_dir_conformers(const std::string &dir, int charge) {
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(dir))
        if (e.path().extension() == ".xyz") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Conformer> out;
    for (const auto &f : files) out.push_back({canonicalize(read_xyz_file(f.string(), charge)), {0.0, 0.0}});
    return out;
}

int cmd_eval(const std::string &ckpt, const std::string &config_path, const std::string &xyz_dir, int charge,
             const std::string &out, int n_iter, bool zero_head) {
    std::optional<TrainConfig> cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!cfg && xyz_dir.empty()) throw CLI::ValidationError("eval", "give --config or --xyz-dir");
    auto model = load_model(ckpt, cfg ? std::optional(cfg->model) : std::nullopt);
    if (zero_head) model.zero_head();

    const auto confs = xyz_dir.empty() ? eval_conformers(cfg->data) : xyz_dir_conformers(xyz_dir, charge);
    if (confs.empty()) {
        fmt::print(stderr, "error: empty evaluation set\n");
        return kExitError;
    }
    EnergyConfig ec = cfg ? cfg->energy : EnergyConfig{};
    ec.n_iter = n_iter;
    const double thr = cfg ? cfg->eri_threshold : kDefaultEriThreshold;
    const auto items = prepare_eval_set(confs, ec.c_x, thr, producer_threads());
    if (items.empty()) {
        fmt::print(stderr, "error: no evaluation molecule converged\n");
        return kExitError;
    }
    const auto m = evaluate(items, model.predictor(), ec);
    if (!out.empty()) write_text(out, eval_csv(m));
    fmt::print("molecules {}\n", m.records.size());
    fmt::print("e_mae_mev {:.6f}\nh_mae_uha {:.6f}\neps_mae_uha {:.6f}\n", m.mae_e, m.mae_h, m.mae_eps);
    return kExitOk;
}

int cmd_scan(const std::string &ckpt, const std::string &config_path, int resolution, const std::string &out,
             int n_iter) {
    const auto cfg = load_config(config_path);
    const auto model = load_model(ckpt, cfg.model);
    EnergyConfig ec = cfg.energy;
    ec.n_iter = n_iter;
    const auto pts = scan_grid(cfg.data, model.predictor(), ec, resolution, ec.c_x, cfg.eri_threshold);
    const auto text = scan_csv(pts);
    if (out.empty()) fmt::print("{}", text);
    else write_text(out, text);
    double in_sum = 0, out_sum = 0;
    int in_n = 0, out_n = 0;
    for (const auto &p : pts) {
        if (std::isnan(p.log10_abs_de_ev)) continue;
        (p.in_train ? in_sum : out_sum) += p.log10_abs_de_ev;
        ++(p.in_train ? in_n : out_n);
    }
    fmt::print(stderr, "points {}  mean log10|dE| train {:.3f}  outside {:.3f}\n", pts.size(),
               in_n ? in_sum / in_n : std::nan(""), out_n ? out_sum / out_n : std::nan(""));
    return kExitOk;
}

int cmd_dump_integrals(const MoleculeArgs &a, double threshold, const std::string &out) {
    const auto l = load_molecule(a, threshold);
    const fs::path dir(out);
    write_text(dir / "S.csv", matrix_csv(l.ints.S));
    write_text(dir / "T.csv", matrix_csv(l.ints.T));
    write_text(dir / "V.csv", matrix_csv(l.ints.Vn));
    write_text(dir / "H_core.csv", matrix_csv(l.ints.H_core));
    write_text(dir / "eri.txt", eri_text(l.ints.eri));
    fmt::print("n_ao {}\nn_eri {}\ne_nuc {:.12f}\n", l.ints.n_ao(), l.ints.eri.size(), l.ints.e_nuc);
    return kExitOk;
}

int cmd_dump_basis(const MoleculeArgs &a) {
    const auto mol = read_xyz_file(a.xyz, a.charge);
    fmt::print("{}", dump_basis(build_basis(mol, a.basis)));
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Implicit-energy Hamiltonian transformer toolkit"};
    app.require_subcommand(1);

    MoleculeArgs mol;
    double tol = 1e-10;
    int max_iter = 200;
    auto *scf = app.add_subcommand("scf", "Converged SCF energy of a molecule");
    add_molecule_args(scf, mol);
    scf->add_option("--tol", tol, "Energy convergence tolerance")->capture_default_str();
    scf->add_option("--max-iter", max_iter, "Iteration limit")->capture_default_str();

    EnergyConfig ec;
    bool no_purify = false;
    std::string guess = "init", ckpt;
    auto *energy = app.add_subcommand("energy", "Energy functional E(X; H) for a guess or model Hamiltonian");
    add_molecule_args(energy, mol);
    energy->add_option("--n-iter", ec.n_iter, "Iterations inside the energy")->capture_default_str();
    energy->add_option("--alpha", ec.alpha, "Density mixing weight")->capture_default_str();
    energy->add_flag("--no-purify", no_purify, "Skip the final unmixed iteration");
    energy->add_option("--guess", guess, "Hamiltonian: core or init")->capture_default_str();
    energy->add_option("--ckpt", ckpt, "Use the Hamiltonian predicted by this checkpoint");

    int trials = 20;
    double step = 1e-5, noise = 0.05;
    uint64_t seed = 0;
    std::optional<double> threshold;
    auto *grad = app.add_subcommand("gradcheck", "Finite-difference check of dE/dH");
    add_molecule_args(grad, mol);
    grad->add_option("--n-iter", ec.n_iter, "Iterations inside the energy")->capture_default_str();
    grad->add_option("--alpha", ec.alpha, "Density mixing weight")->capture_default_str();
    grad->add_option("--trials", trials, "Random Hamiltonians")->capture_default_str();
    grad->add_option("--step", step, "Central-difference step")->capture_default_str();
    grad->add_option("--noise", noise, "Std. dev. of the random perturbation")->capture_default_str();
    grad->add_option("--seed", seed, "RNG seed")->capture_default_str();
    grad->add_option("--threshold", threshold, "Pass threshold (default 1e-5, or 1e-4 for n_iter > 1)");

    std::string config, resume, out;
    bool quiet = false;
    auto *train = app.add_subcommand("train", "Train with the implicit energy loss");
    train->add_option("config", config, "Config file")->required();
    train->add_option("--resume", resume, "Checkpoint to resume from");
    train->add_option("--out", out, "Output directory")->required();
    train->add_flag("--quiet", quiet, "Suppress progress lines");

    std::string xyz_dir;
    int eval_n_iter = 1, eval_charge = 0;
    bool zero_head = false;
    auto *eval = app.add_subcommand("eval", "Energy, Hamiltonian and orbital-energy MAEs against the SCF oracle");
    eval->add_option("ckpt", ckpt, "Checkpoint")->required();
    eval->add_option("--config", config, "Config whose data section defines the eval set");
    eval->add_option("--xyz-dir", xyz_dir, "Directory of .xyz files to evaluate instead");
    eval->add_option("--charge", eval_charge, "Charge for --xyz-dir molecules");
    eval->add_option("--out", out, "CSV path for per-molecule errors");
    eval->add_option("--n-iter", eval_n_iter, "Iterations inside the energy")->capture_default_str();
    eval->add_flag("--zero-head", zero_head, "Zero the output head (H = H_init baseline)");

    int resolution = 10;
    auto *scan = app.add_subcommand("scan", "Log energy error over a conformer grid");
    scan->add_option("ckpt", ckpt, "Checkpoint")->required();
    scan->add_option("--config", config, "Config with a bond_scan or angle_grid data section")->required();
    scan->add_option("--resolution", resolution, "Points per coordinate")->capture_default_str();
    scan->add_option("--out", out, "CSV path (stdout if omitted)");
    scan->add_option("--n-iter", eval_n_iter, "Iterations inside the energy")->capture_default_str();

    double eri_threshold = kDefaultEriThreshold;
    auto *dump_ints = app.add_subcommand("dump-integrals", "Write S, T, V, H_core as CSV and the ERI list");
    add_molecule_args(dump_ints, mol);
    dump_ints->add_option("--threshold", eri_threshold, "ERI screening threshold")->capture_default_str();
    dump_ints->add_option("--out", out, "Output directory")->required();

    auto *dump_basis_cmd = app.add_subcommand("dump-basis", "Print the shells of the basis");
    add_molecule_args(dump_basis_cmd, mol);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitError;
    }

    try {
        ec.final_purify = !no_purify;
        if (*scf) return cmd_scf(mol, tol, max_iter);
        if (*energy) return cmd_energy(mol, ec, guess, ckpt);
        if (*grad) return cmd_gradcheck(mol, ec, trials, step, noise, seed, threshold);
        if (*train) return cmd_train(config, resume, out, quiet);
        if (*eval) return cmd_eval(ckpt, config, xyz_dir, eval_charge, out, eval_n_iter, zero_head);
        if (*scan) return cmd_scan(ckpt, config, resolution, out, eval_n_iter);
        if (*dump_ints) return cmd_dump_integrals(mol, eri_threshold, out);
        if (*dump_basis_cmd) return cmd_dump_basis(mol);
    } catch (const std::exception &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitError;
    }
    return kExitError;
}
