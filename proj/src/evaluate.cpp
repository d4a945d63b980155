#include <qpt/evaluate.h>

#include <atomic>
#include <cmath>
#include <fmt/core.h>
#include <optional>
#include <thread>

namespace qpt {

namespace {

template <typename F> void parallel_for(int n, int n_workers, F &&body) {
    if (n_workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(n_workers, n); ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) body(i);
        });
    for (auto &t : pool) t.join();
}

} // namespace

std::vector<EvalItem> prepare_eval_set(const std::vector<Conformer> &confs, double c_x,
                                       double eri_threshold, int n_workers) {
    const int n = static_cast<int>(confs.size());
    std::vector<std::optional<EvalItem>> slots(n);
    std::vector<std::string> warnings(n);
    parallel_for(n, n_workers, [&](int i) {
        EvalItem item{make_example(confs[i], c_x, eri_threshold), {}};
        item.ex.id = static_cast<uint64_t>(i);
        if (item.ex.degenerate) {
            warnings[i] = fmt::format("eval molecule {}: {}", i, item.ex.error);
            return;
        }
        try {
            item.oracle = scf_converge(item.ex.ints, item.ex.n_occ, ScfOptions{.c_x = c_x});
        } catch (const std::exception &e) {
            warnings[i] = fmt::format("eval molecule {}: oracle failed: {}", i, e.what());
            return;
        }
        if (!item.oracle.converged) {
            warnings[i] = fmt::format("eval molecule {}: oracle did not converge", i);
            return;
        }
        slots[i] = std::move(item);
    });
    std::vector<EvalItem> out;
    for (int i = 0; i < n; ++i) {
        if (!warnings[i].empty()) fmt::print(stderr, "warning: {}, excluded\n", warnings[i]);
        if (slots[i]) out.push_back(std::move(*slots[i]));
    }
    return out;
}

EvalRecord compare(int molecule_id, double e, const Mat &H, const Vec &eps, double e_star,
                   const Mat &H_star, const Vec &eps_star) {
    if (H.rows() != H_star.rows() || H.cols() != H_star.cols() || eps.size() != eps_star.size())
        throw std::invalid_argument("compare: prediction and reference shapes differ");
    EvalRecord r;
    r.molecule_id = molecule_id;
    r.e_minus_estar = e - e_star;
    r.e_err_mev = std::abs(e - e_star) * kHartreeToEv * 1e3;
    r.h_err_uha = (H - H_star).cwiseAbs().mean() * 1e6;
    r.eps_err_uha = eps.size() ? (eps - eps_star).cwiseAbs().mean() * 1e6 : 0.0;
    return r;
}

Metrics aggregate(std::vector<EvalRecord> records) {
    Metrics m;
    for (const auto &r : records) {
        m.mae_e += r.e_err_mev;
        m.mae_h += r.h_err_uha;
        m.mae_eps += r.eps_err_uha;
    }
    if (!records.empty()) {
        const double n = static_cast<double>(records.size());
        m.mae_e /= n;
        m.mae_h /= n;
        m.mae_eps /= n;
    }
    m.records = std::move(records);
    return m;
}

Metrics evaluate(const std::vector<EvalItem> &items, const Predictor &predict, EnergyConfig energy) {
    energy.final_purify = true;
    std::vector<EvalRecord> records;
    records.reserve(items.size());
    for (const auto &item : items) {
        const auto &ex = item.ex;
        const Mat H = predict(ex);
        const auto res = implicit_energy(ex.ints, H, ex.n_occ, energy);
        auto rec = compare(static_cast<int>(ex.id), res.e_total, res.fock, res.eps, item.oracle.e_total,
                           item.oracle.H_star, item.oracle.eps_star);
        rec.idempotency = (res.rho * ex.ints.S * res.rho - 2.0 * res.rho).cwiseAbs().maxCoeff();
        records.push_back(rec);
    }
    return aggregate(std::move(records));
}

std::string eval_csv(const Metrics &m) {
    std::string out = "molecule_id,e_mae_mev,h_mae_uha,eps_mae_uha\n";
    for (const auto &r : m.records)
        out += fmt::format("{},{:.9g},{:.9g},{:.9g}\n", r.molecule_id, r.e_err_mev, r.h_err_uha, r.eps_err_uha);
    out += fmt::format("mean,{:.9g},{:.9g},{:.9g}\n", m.mae_e, m.mae_h, m.mae_eps);
    return out;
}

std::vector<ScanPoint> scan_grid(const ConformerSpec &spec, const Predictor &predict,
                                 EnergyConfig energy, int resolution, double c_x, double eri_threshold) {
    if (resolution < 1) throw std::invalid_argument("scan_grid: resolution must be >= 1");
    if (spec.mode == ConformerMode::jitter)
        throw std::invalid_argument("scan_grid: needs a bond_scan or angle_grid spec");
    energy.final_purify = true;

    auto axis = [&](const Range &train, const Range &eval) {
        const double lo = std::min(train.lo, eval.lo), hi = std::max(train.hi, eval.hi);
        std::vector<double> v(resolution);
        for (int i = 0; i < resolution; ++i)
            v[i] = resolution == 1 ? lo : lo + (hi - lo) * i / (resolution - 1);
        return v;
    };
    const bool two_d = spec.mode == ConformerMode::angle_grid;
    const auto xs = two_d ? axis(spec.angle1.train, spec.angle1.eval) : axis(spec.bond_range, spec.bond_eval_range);
    const auto ys = two_d ? axis(spec.angle2.train, spec.angle2.eval) : std::vector<double>{0.0};

    std::vector<ScanPoint> out;
    for (double x : xs)
        for (double y : ys) {
            ScanPoint p;
            p.c1 = x;
            p.c2 = y;
            p.in_train = two_d ? spec.angle1.train.contains(x) && spec.angle2.train.contains(y)
                               : spec.bond_range.contains(x);
            try {
                const Molecule raw = place_coordinates(spec, x, y);
                if (raw.min_distance() <= kMinAtomDistance)
                    throw InputError(fmt::format("atoms closer than {} Bohr", kMinAtomDistance));
                const Example ex = make_example({canonicalize(raw), {x, y}}, c_x, eri_threshold);
                if (ex.degenerate) throw DegenerateGapError(0.0, ex.n_occ);
                const auto oracle = scf_converge(ex.ints, ex.n_occ, ScfOptions{.c_x = c_x});
                if (!oracle.converged) throw std::runtime_error("oracle did not converge");
                const auto res = implicit_energy(ex.ints, predict(ex), ex.n_occ, energy);
                const double de = std::abs(res.e_total - oracle.e_total) * kHartreeToEv;
                p.log10_abs_de_ev = de > 0.0 ? std::max(kLogFloor, std::log10(de)) : kLogFloor;
            } catch (const std::exception &e) {
                fmt::print(stderr, "warning: scan point ({}, {}): {}\n", x, y, e.what());
            }
            out.push_back(p);
        }
    return out;
}

std::string scan_csv(const std::vector<ScanPoint> &points) {
    std::string out = "c1,c2,log10_abs_de_ev,in_train\n";
    for (const auto &p : points)
        out += fmt::format("{:.9g},{:.9g},{},{}\n", p.c1, p.c2,
                           std::isnan(p.log10_abs_de_ev) ? std::string("nan") : fmt::format("{:.6f}", p.log10_abs_de_ev),
                           p.in_train ? 1 : 0);
    return out;
}

} // namespace qpt
