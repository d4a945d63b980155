#include <qpt/config.h>

#include <charconv>
#include <fmt/core.h>
#include <fmt/ranges.h>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

namespace qpt {

int TrainConfig::n_iter_at(int64_t step) const {
    int n = energy.n_iter;
    for (const auto &[s, k] : iter_schedule)
        if (step >= s) n = k;
    return n;
}

void TrainConfig::validate() const {
    model.validate();
    energy.validate();
    if (batch_size != 1) throw ConfigError(fmt::format("train.batch_size must be 1, got {}", batch_size));
    if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
    if (warmup_steps < 0 || warmup_steps >= total_steps)
        throw ConfigError("train.warmup_steps must satisfy 0 <= warmup < total_steps");
    if (!(lr_max > 0.0) || !(lr_min >= 0.0) || lr_min > lr_max)
        throw ConfigError("train: need lr_max > 0 and 0 <= lr_min <= lr_max");
    if (reuse_window < 1 || reuse_window > 8)
        throw ConfigError(fmt::format("train.reuse_window must lie in [1, 8], got {}", reuse_window));
    if (checkpoint_every < 0 || bound_check_every < 0)
        throw ConfigError("train: checkpoint_every and bound_check_every must be >= 0");
    for (size_t i = 0; i < iter_schedule.size(); ++i) {
        if (iter_schedule[i].second < 1) throw ConfigError("train.iter_schedule: n_iter must be >= 1");
        if (i > 0 && iter_schedule[i].first <= iter_schedule[i - 1].first)
            throw ConfigError("train.iter_schedule: steps must be strictly ascending");
    }
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ConfigError("train: Adam betas must lie in [0, 1)");
    if (!(eri_threshold >= 0.0)) throw ConfigError("energy.eri_threshold must be >= 0");
    try {
        data.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
}

Molecule resolve_template(const std::string &name, std::optional<int> charge) {
    Molecule m;
    try {
        m = builtin_molecule(name);
    } catch (const InputError &) {
        return read_xyz_file(name, charge.value_or(0));
    }
    return charge ? Molecule(m.atoms(), *charge) : m;
}

namespace {

template <typename N> N parse_number(std::string_view s) {
    N value{};
    const auto *end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("bad number '{}'", s));
    return value;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(trim(s.substr(pos, next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

bool parse_bool(std::string_view s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(fmt::format("bad boolean '{}'", s));
}

std::vector<int> parse_ints(std::string_view s) {
    std::vector<int> out;
    if (s.empty()) return out;
    for (auto part : split(s, ',')) out.push_back(parse_number<int>(part));
    return out;
}

Range parse_range(std::string_view s) {
    const auto parts = split(s, ',');
    if (parts.size() != 2) throw ConfigError(fmt::format("range needs 'lo,hi', got '{}'", s));
    Range r{parse_number<double>(parts[0]), parse_number<double>(parts[1])};
    if (r.lo > r.hi) throw ConfigError(fmt::format("range '{}' has lo > hi", s));
    return r;
}

std::vector<std::pair<int64_t, int>> parse_schedule(std::string_view s) {
    std::vector<std::pair<int64_t, int>> out;
    for (auto part : split(s, ',')) {
        const auto kv = split(part, ':');
        if (kv.size() != 2) throw ConfigError(fmt::format("schedule entry '{}' is not step:n_iter", part));
        out.emplace_back(parse_number<int64_t>(kv[0]), parse_number<int>(kv[1]));
    }
    return out;
}

std::string fmt_double(double v) { return fmt::format("{}", v); }
std::string fmt_range(const Range &r) { return fmt::format("{},{}", r.lo, r.hi); }
std::string fmt_ints(const std::vector<int> &v) { return fmt::format("{}", fmt::join(v, ",")); }

struct Key {
    const char *name;
    std::function<void(TrainConfig &, std::string_view)> set;
    std::function<std::string(const TrainConfig &)> get;
};

// `charge` is applied when the template is resolved, after all lines are read
struct Pending {
    std::optional<int> charge;
};

std::vector<Key> key_table(Pending &pending) {
    std::vector<Key> k;
    auto add = [&](const char *name, auto set, auto get) { k.push_back({name, set, get}); };

    add("model.d_model", [](TrainConfig &c, std::string_view v) { c.model.d_model = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.d_model); });
    add("model.n_layers", [](TrainConfig &c, std::string_view v) { c.model.n_layers = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.n_layers); });
    add("model.n_heads", [](TrainConfig &c, std::string_view v) { c.model.n_heads = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.n_heads); });
    add("model.n_biased_heads",
        [](TrainConfig &c, std::string_view v) { c.model.n_biased_heads = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.n_biased_heads); });
    add("model.vocab_size",
        [](TrainConfig &c, std::string_view v) { c.model.vocab_size = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.vocab_size); });
    add("model.max_seq_len",
        [](TrainConfig &c, std::string_view v) { c.model.max_seq_len = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.max_seq_len); });
    add("model.precision",
        [](TrainConfig &c, std::string_view v) {
            try {
                c.model.precision = parse_precision(v);
            } catch (const std::invalid_argument &e) {
                throw ConfigError(e.what());
            }
        },
        [](const TrainConfig &c) { return to_string(c.model.precision); });
    add("model.seed", [](TrainConfig &c, std::string_view v) { c.model.seed = parse_number<uint64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.model.seed); });

    add("energy.n_iter", [](TrainConfig &c, std::string_view v) { c.energy.n_iter = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.energy.n_iter); });
    add("energy.alpha", [](TrainConfig &c, std::string_view v) { c.energy.alpha = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.energy.alpha); });
    add("energy.c_x", [](TrainConfig &c, std::string_view v) { c.energy.c_x = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.energy.c_x); });
    add("energy.final_purify",
        [](TrainConfig &c, std::string_view v) { c.energy.final_purify = parse_bool(v); },
        [](const TrainConfig &c) { return std::string(c.energy.final_purify ? "true" : "false"); });
    add("energy.gap_tol", [](TrainConfig &c, std::string_view v) { c.energy.gap_tol = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.energy.gap_tol); });
    add("energy.eri_threshold",
        [](TrainConfig &c, std::string_view v) { c.eri_threshold = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.eri_threshold); });

    add("train.lr_max", [](TrainConfig &c, std::string_view v) { c.lr_max = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.lr_max); });
    add("train.lr_min", [](TrainConfig &c, std::string_view v) { c.lr_min = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.lr_min); });
    add("train.warmup_steps",
        [](TrainConfig &c, std::string_view v) { c.warmup_steps = parse_number<int64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.warmup_steps); });
    add("train.total_steps",
        [](TrainConfig &c, std::string_view v) { c.total_steps = parse_number<int64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.total_steps); });
    add("train.iter_schedule",
        [](TrainConfig &c, std::string_view v) { c.iter_schedule = parse_schedule(v); },
        [](const TrainConfig &c) {
            std::string s;
            for (const auto &[step, n] : c.iter_schedule)
                s += fmt::format("{}{}:{}", s.empty() ? "" : ",", step, n);
            return s;
        });
    add("train.beta1", [](TrainConfig &c, std::string_view v) { c.adam.beta1 = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.adam.beta1); });
    add("train.beta2", [](TrainConfig &c, std::string_view v) { c.adam.beta2 = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.adam.beta2); });
    add("train.adam_eps", [](TrainConfig &c, std::string_view v) { c.adam.eps = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.adam.eps); });
    add("train.weight_decay",
        [](TrainConfig &c, std::string_view v) { c.adam.weight_decay = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.adam.weight_decay); });
    add("train.batch_size", [](TrainConfig &c, std::string_view v) { c.batch_size = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.batch_size); });
    add("train.seed", [](TrainConfig &c, std::string_view v) { c.seed = parse_number<uint64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.seed); });
    add("train.reuse_window",
        [](TrainConfig &c, std::string_view v) { c.reuse_window = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.reuse_window); });
    add("train.checkpoint_every",
        [](TrainConfig &c, std::string_view v) { c.checkpoint_every = parse_number<int64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.checkpoint_every); });
    add("train.bound_check_every",
        [](TrainConfig &c, std::string_view v) { c.bound_check_every = parse_number<int64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.bound_check_every); });
    add("train.loss",
        [](TrainConfig &c, std::string_view v) {
            if (v == "implicit") c.loss = LossMode::implicit;
            else if (v == "supervised") c.loss = LossMode::supervised;
            else throw ConfigError(fmt::format("train.loss must be implicit or supervised, got '{}'", v));
        },
        [](const TrainConfig &c) {
            return std::string(c.loss == LossMode::implicit ? "implicit" : "supervised");
        });

    add("data.template", [](TrainConfig &c, std::string_view v) { c.data.template_name = std::string(v); },
        [](const TrainConfig &c) { return c.data.template_name; });
    add("data.charge", [&pending](TrainConfig &, std::string_view v) { pending.charge = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.data.templ.charge()); });
    add("data.mode",
        [](TrainConfig &c, std::string_view v) {
            try {
                c.data.mode = parse_conformer_mode(v);
            } catch (const std::invalid_argument &e) {
                throw ConfigError(e.what());
            }
        },
        [](const TrainConfig &c) { return to_string(c.data.mode); });
    add("data.sigma", [](TrainConfig &c, std::string_view v) { c.data.sigma = parse_number<double>(v); },
        [](const TrainConfig &c) { return fmt_double(c.data.sigma); });
    add("data.bond_atoms",
        [](TrainConfig &c, std::string_view v) {
            const auto ids = parse_ints(v);
            if (ids.size() != 2) throw ConfigError("data.bond_atoms needs two atom indices");
            c.data.bond_atoms = {ids[0], ids[1]};
        },
        [](const TrainConfig &c) { return fmt::format("{},{}", c.data.bond_atoms[0], c.data.bond_atoms[1]); });
    add("data.bond_range", [](TrainConfig &c, std::string_view v) { c.data.bond_range = parse_range(v); },
        [](const TrainConfig &c) { return fmt_range(c.data.bond_range); });
    add("data.bond_eval_range",
        [](TrainConfig &c, std::string_view v) { c.data.bond_eval_range = parse_range(v); },
        [](const TrainConfig &c) { return fmt_range(c.data.bond_eval_range); });
    for (int a = 1; a <= 2; ++a) {
        auto coord = [a](TrainConfig &c) -> AngleCoordinate & { return a == 1 ? c.data.angle1 : c.data.angle2; };
        auto ccoord = [a](const TrainConfig &c) -> const AngleCoordinate & {
            return a == 1 ? c.data.angle1 : c.data.angle2;
        };
        static const char *names[2][4] = {
            {"data.angle1_axis", "data.angle1_atoms", "data.angle1_range", "data.angle1_eval_range"},
            {"data.angle2_axis", "data.angle2_atoms", "data.angle2_range", "data.angle2_eval_range"}};
        add(names[a - 1][0], [coord](TrainConfig &c, std::string_view v) { coord(c).axis = parse_ints(v); },
            [ccoord](const TrainConfig &c) { return fmt_ints(ccoord(c).axis); });
        add(names[a - 1][1], [coord](TrainConfig &c, std::string_view v) { coord(c).moving = parse_ints(v); },
            [ccoord](const TrainConfig &c) { return fmt_ints(ccoord(c).moving); });
        add(names[a - 1][2], [coord](TrainConfig &c, std::string_view v) { coord(c).train = parse_range(v); },
            [ccoord](const TrainConfig &c) { return fmt_range(ccoord(c).train); });
        add(names[a - 1][3], [coord](TrainConfig &c, std::string_view v) { coord(c).eval = parse_range(v); },
            [ccoord](const TrainConfig &c) { return fmt_range(ccoord(c).eval); });
    }
    add("data.eval_count", [](TrainConfig &c, std::string_view v) { c.data.eval_count = parse_number<int>(v); },
        [](const TrainConfig &c) { return std::to_string(c.data.eval_count); });
    add("data.eval_seed",
        [](TrainConfig &c, std::string_view v) { c.data.eval_seed = parse_number<uint64_t>(v); },
        [](const TrainConfig &c) { return std::to_string(c.data.eval_seed); });
    return k;
}

} // namespace

TrainConfig parse_config(std::string_view text) {
    TrainConfig cfg;
    Pending pending;
    const auto keys = key_table(pending);
    std::set<std::string, std::less<>> seen;

    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("line {}: expected 'section.key = value'", line_no));
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const Key &k) { return key == k.name; });
        if (it == keys.end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
        if (!seen.insert(std::string(key)).second)
            throw ConfigError(fmt::format("line {}: key '{}' given twice", line_no, key));
        try {
            it->set(cfg, value);
        } catch (const ConfigError &e) {
            throw ConfigError(fmt::format("line {}: {}: {}", line_no, key, e.what()));
        }
    }

    try {
        cfg.data.templ = resolve_template(cfg.data.template_name, pending.charge);
    } catch (const std::exception &e) {
        throw ConfigError(fmt::format("data.template '{}': {}", cfg.data.template_name, e.what()));
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(fmt::format("cannot read config file '{}'", path));
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const TrainConfig &cfg) {
    Pending unused;
    std::string out;
    for (const auto &k : key_table(unused)) out += fmt::format("{} = {}\n", k.name, k.get(cfg));
    return out;
}

uint64_t config_digest(const TrainConfig &cfg) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : to_text(cfg)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace qpt
