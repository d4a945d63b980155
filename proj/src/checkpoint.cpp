#include <qpt/checkpoint.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fmt/core.h>
#include <fstream>
#include <sstream>

namespace qpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
  public:
    template <typename V> void put(V v) {
        char buf[sizeof(V)];
        std::memcpy(buf, &v, sizeof(V));
        m_out.append(buf, sizeof(V));
    }
    void put_bytes(const void *p, size_t n) { m_out.append(static_cast<const char *>(p), n); }
    void put_string(const std::string &s) {
        put<uint32_t>(static_cast<uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    std::string take() { return std::move(m_out); }

  private:
    std::string m_out;
};

class Reader {
  public:
    explicit Reader(std::string_view bytes) : m_in(bytes) {}
    template <typename V> V get() {
        V v;
        std::memcpy(&v, take(sizeof(V)), sizeof(V));
        return v;
    }
    std::string get_string() {
        const auto n = get<uint32_t>();
        return std::string(take(n), n);
    }
    const char *take(size_t n) {
        if (m_pos + n > m_in.size())
            throw CheckpointError(fmt::format("checkpoint truncated at byte {}", m_pos));
        const char *p = m_in.data() + m_pos;
        m_pos += n;
        return p;
    }
    bool done() const { return m_pos == m_in.size(); }

  private:
    std::string_view m_in;
    size_t m_pos{0};
};

template <typename T> constexpr uint8_t dtype_code() { return std::is_same_v<T, float> ? 0 : 1; }

void write_model(Writer &w, const ModelConfig &m) {
    w.put<int32_t>(m.d_model);
    w.put<int32_t>(m.n_layers);
    w.put<int32_t>(m.n_heads);
    w.put<int32_t>(m.n_biased_heads);
    w.put<int32_t>(m.vocab_size);
    w.put<int32_t>(m.max_seq_len);
    w.put<uint8_t>(static_cast<uint8_t>(m.precision));
    w.put<uint64_t>(m.seed);
}

ModelConfig read_model(Reader &r) {
    ModelConfig m;
    m.d_model = r.get<int32_t>();
    m.n_layers = r.get<int32_t>();
    m.n_heads = r.get<int32_t>();
    m.n_biased_heads = r.get<int32_t>();
    m.vocab_size = r.get<int32_t>();
    m.max_seq_len = r.get<int32_t>();
    const auto p = r.get<uint8_t>();
    if (p > 1) throw CheckpointError(fmt::format("unknown precision code {}", p));
    m.precision = static_cast<Precision>(p);
    m.seed = r.get<uint64_t>();
    return m;
}

CheckpointHeader read_header(Reader &r) {
    if (std::memcmp(r.take(sizeof(kCheckpointMagic)), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw CheckpointError("not a checkpoint (bad magic)");
    const auto version = r.get<uint32_t>();
    if (version != kCheckpointVersion)
        throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));
    CheckpointHeader h;
    h.model = read_model(r);
    h.config_digest = r.get<uint64_t>();
    h.step = r.get<int64_t>();
    h.draw = r.get<uint64_t>();
    h.skipped = r.get<int64_t>();
    return h;
}

void check_model(const ModelConfig &got, const ModelConfig &want) {
    auto check = [](const char *field, auto g, auto w) {
        if (g != w)
            throw CheckpointError(fmt::format("model config mismatch in {}: checkpoint has {}, expected {}",
                                              field, g, w));
    };
    check("d_model", got.d_model, want.d_model);
    check("n_layers", got.n_layers, want.n_layers);
    check("n_heads", got.n_heads, want.n_heads);
    check("n_biased_heads", got.n_biased_heads, want.n_biased_heads);
    check("vocab_size", got.vocab_size, want.vocab_size);
    check("max_seq_len", got.max_seq_len, want.max_seq_len);
    check("precision", to_string(got.precision), to_string(want.precision));
    check("seed", got.seed, want.seed);
}

} // namespace

template <typename T>
std::string serialize_checkpoint(const ModelConfig &model, uint64_t digest,
                                 const TrainState<T> &state) {
    Writer w;
    w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.put<uint32_t>(kCheckpointVersion);
    write_model(w, model);
    w.put<uint64_t>(digest);
    w.put<int64_t>(state.step);
    w.put<uint64_t>(state.draw);
    w.put<int64_t>(state.skipped);

    const auto n = state.params.tensors.size();
    w.put<uint32_t>(static_cast<uint32_t>(3 * n));
    auto put_set = [&](const ParamSet<T> &set, const std::string &prefix) {
        for (const auto &t : set.tensors) {
            w.put_string(prefix + t.name);
            w.put<uint32_t>(2);
            w.put<uint64_t>(static_cast<uint64_t>(t.rows));
            w.put<uint64_t>(static_cast<uint64_t>(t.cols));
            w.put<uint8_t>(dtype_code<T>());
            w.put_bytes(t.data.data(), t.data.size() * sizeof(T));
        }
    };
    put_set(state.params, "");
    put_set(state.m, "adam.m.");
    put_set(state.v, "adam.v.");
    return w.take();
}

CheckpointHeader read_checkpoint_header(std::string_view bytes) {
    Reader r(bytes);
    return read_header(r);
}

template <typename T>
TrainState<T> deserialize_checkpoint(std::string_view bytes, const ModelConfig &expected,
                                     CheckpointHeader *header) {
    Reader r(bytes);
    const auto h = read_header(r);
    check_model(h.model, expected);
    if (dtype_code<T>() != static_cast<uint8_t>(h.model.precision))
        throw CheckpointError("checkpoint precision does not match the requested tensor type");

    TrainState<T> s;
    s.params = init_params<T>(expected);
    s.m = s.params.zeros_like();
    s.v = s.params.zeros_like();
    s.step = h.step;
    s.draw = h.draw;
    s.skipped = h.skipped;

    const auto count = r.get<uint32_t>();
    if (count != 3 * s.params.tensors.size())
        throw CheckpointError(fmt::format("checkpoint holds {} tensors, expected {}", count,
                                          3 * s.params.tensors.size()));
    auto get_set = [&](ParamSet<T> &set, const std::string &prefix) {
        for (auto &t : set.tensors) {
            const auto name = r.get_string();
            if (name != prefix + t.name)
                throw CheckpointError(fmt::format("expected tensor '{}', found '{}'", prefix + t.name, name));
            if (r.get<uint32_t>() != 2) throw CheckpointError(fmt::format("tensor '{}' is not 2-D", name));
            const auto rows = r.get<uint64_t>(), cols = r.get<uint64_t>();
            if (rows != uint64_t(t.rows) || cols != uint64_t(t.cols))
                throw CheckpointError(fmt::format("tensor '{}' has shape {}x{}, expected {}x{}", name, rows,
                                                  cols, t.rows, t.cols));
            if (r.get<uint8_t>() != dtype_code<T>())
                throw CheckpointError(fmt::format("tensor '{}' has the wrong dtype", name));
            std::memcpy(t.data.data(), r.take(t.data.size() * sizeof(T)), t.data.size() * sizeof(T));
        }
    };
    get_set(s.params, "");
    get_set(s.m, "adam.m.");
    get_set(s.v, "adam.v.");
    if (!r.done()) throw CheckpointError("trailing bytes after the last tensor");
    if (header) *header = h;
    return s;
}

template <typename T>
void save_checkpoint(const std::string &path, const ModelConfig &model, uint64_t digest,
                     const TrainState<T> &state) {
    const auto bytes = serialize_checkpoint(model, digest, state);
    const auto tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError(fmt::format("cannot write '{}'", tmp));
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw CheckpointError(fmt::format("write to '{}' failed", tmp));
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file_bytes(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(fmt::format("cannot read '{}'", path));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

#define QPT_INSTANTIATE(T)                                                                        \
    template std::string serialize_checkpoint<T>(const ModelConfig &, uint64_t,                   \
                                                 const TrainState<T> &);                          \
    template TrainState<T> deserialize_checkpoint<T>(std::string_view, const ModelConfig &,       \
                                                     CheckpointHeader *);                         \
    template void save_checkpoint<T>(const std::string &, const ModelConfig &, uint64_t,          \
                                     const TrainState<T> &);

QPT_INSTANTIATE(float)
QPT_INSTANTIATE(double)

} // namespace qpt
