#include "fmcwim/dictionary_cache.hpp"

#include "fmcwim/errors.hpp"
#include "fmcwim/hashing.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>

namespace fmcwim {

namespace {

constexpr char kMagic[8] = {'F', 'M', 'C', 'W', 'D', 'I', 'C', 'T'};
constexpr std::uint32_t kVersion = 2;
constexpr std::size_t kKeyLength = 64;

static_assert(std::endian::native == std::endian::little, "cache files are stored little-endian");

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }
    void put_u64(std::size_t v) { put<std::uint64_t>(v); }
    template <typename T>
    void put_vec(const std::vector<T>& v) {
        put_u64(v.size());
        out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    }
    template <typename T>
    void put_span(std::span<const T> v) {
        put_u64(v.size());
        out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T get() {
        T value{};
        if (!in_.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IoError("dictionary cache is truncated");
        return value;
    }
    std::size_t get_u64() { return static_cast<std::size_t>(get<std::uint64_t>()); }
    template <typename T>
    std::vector<T> get_vec(std::size_t limit) {
        const std::size_t n = get_u64();
        if (n > limit) throw IoError("dictionary cache has an implausible array length");
        std::vector<T> v(n);
        if (!in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))))
            throw IoError("dictionary cache is truncated");
        return v;
    }

private:
    std::istream& in_;
};

constexpr std::size_t kMaxArray = std::size_t{1} << 34;

} // namespace

// Friend of DictionaryGrid: the only place that (de)serializes its internals.
class DictionaryCacheAccess {
public:
    static void write(Writer& w, const DictionaryGrid& g) {
        w.put<double>(g.receiver_.sample_rate());
        w.put_u64(g.receiver_.num_samples());
        w.put<double>(g.waveform_.carrier_freq());
        w.put<double>(g.waveform_.bandwidth());
        w.put<double>(g.waveform_.chirp_duration());
        w.put<double>(g.k_min_);
        w.put_u64(g.slope_hypotheses_);
        w.put_u64(g.time_hypotheses_);
        w.put<double>(g.slope_range_.first);
        w.put<double>(g.slope_range_.second);
        w.put<double>(g.time_range_.first);
        w.put<double>(g.time_range_.second);
        w.put<std::uint8_t>(g.rectangular_ ? 1 : 0);
        w.put_u64(g.regions_);
        w.put_vec(g.slope_values_);
        w.put_vec(g.time_values_);
        w.put_vec(g.slope_cells_);
        w.put<double>(g.time_cell_);
        w.put<std::uint8_t>(g.filter_ ? 1 : 0);
        if (g.filter_) {
            w.put_vec(g.filter_->taps);
            w.put<double>(g.filter_->cutoff);
            w.put<double>(g.filter_->transition_width);
            w.put_vec(std::vector<char>(g.filter_->design.begin(), g.filter_->design.end()));
        }
        w.put_u64(g.atoms_.size());
        for (const auto& a : g.atoms_) {
            w.put<double>(a.time_shift);
            w.put<double>(a.slope);
            w.put<double>(a.duration);
            w.put<double>(a.start_freq);
        }
        const auto& b = g.bank_;
        w.put_span(b.offsets());
        w.put_span(b.lengths());
        w.put_span(b.in_phase_data());
        w.put_span(b.quadrature_data());
        w.put_span(b.norms());
        w.put_span(b.quadrature_norms());
    }

    static DictionaryGrid read(Reader& r) {
        DictionaryGrid g;
        const double fs = r.get<double>();
        const std::size_t n = r.get_u64();
        const double fc = r.get<double>();
        const double bw = r.get<double>();
        const double t = r.get<double>();
        try {
            g.receiver_ = ReceiverConfig(fs, n);
            g.waveform_ = WaveformParams(fc, bw, t);
        } catch (const Error& e) {
            throw IoError(std::string("dictionary cache header is invalid: ") + e.what());
        }
        g.k_min_ = r.get<double>();
        g.slope_hypotheses_ = r.get_u64();
        g.time_hypotheses_ = r.get_u64();
        g.slope_range_.first = r.get<double>();
        g.slope_range_.second = r.get<double>();
        g.time_range_.first = r.get<double>();
        g.time_range_.second = r.get<double>();
        g.rectangular_ = r.get<std::uint8_t>() != 0;
        g.regions_ = r.get_u64();
        g.slope_values_ = r.get_vec<double>(kMaxArray);
        g.time_values_ = r.get_vec<double>(kMaxArray);
        g.slope_cells_ = r.get_vec<double>(kMaxArray);
        g.time_cell_ = r.get<double>();
        if (r.get<std::uint8_t>() != 0) {
            FilterCoeffs f;
            f.taps = r.get_vec<double>(kMaxArray);
            f.cutoff = r.get<double>();
            f.transition_width = r.get<double>();
            const auto design = r.get_vec<char>(4096);
            f.design.assign(design.begin(), design.end());
            g.filter_ = std::move(f);
        }
        const std::size_t count = r.get_u64();
        if (count > kMaxArray) throw IoError("dictionary cache has an implausible atom count");
        g.atoms_.resize(count);
        for (auto& a : g.atoms_) {
            a.time_shift = r.get<double>();
            a.slope = r.get<double>();
            a.duration = r.get<double>();
            a.start_freq = r.get<double>();
        }
        auto offsets = r.get_vec<std::size_t>(kMaxArray);
        auto lengths = r.get_vec<std::size_t>(kMaxArray);
        auto in_phase = r.get_vec<double>(kMaxArray);
        auto quadrature = r.get_vec<double>(kMaxArray);
        auto norms = r.get_vec<double>(kMaxArray);
        auto qnorms = r.get_vec<double>(kMaxArray);
        if (offsets.size() != count) throw IoError("dictionary cache atom tables disagree");
        for (std::size_t i = 0; i < count; ++i)
            if (offsets[i] + lengths.at(i) > n) throw IoError("dictionary cache atom exceeds the window");
        try {
            g.bank_ = AtomBank::from_packed(std::move(offsets), std::move(lengths), std::move(in_phase),
                                            std::move(quadrature), std::move(norms), std::move(qnorms));
        } catch (const InvalidParameter& e) {
            throw IoError(std::string("dictionary cache is inconsistent: ") + e.what());
        }
        return g;
    }
};

std::string dictionary_cache_key(const GridSpec& spec, const ReceiverConfig& receiver,
                                 const WaveformParams& waveform, const std::optional<FilterCoeffs>& filter) {
    std::ostringstream bytes;
    Writer w(bytes);
    bytes.write(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kVersion);
    w.put<double>(receiver.sample_rate());
    w.put_u64(receiver.num_samples());
    w.put<double>(waveform.carrier_freq());
    w.put<double>(waveform.bandwidth());
    w.put<double>(waveform.chirp_duration());
    w.put<double>(spec.slope_range.first);
    w.put<double>(spec.slope_range.second);
    w.put<double>(spec.time_range.first);
    w.put<double>(spec.time_range.second);
    w.put_u64(spec.slope_hypotheses);
    w.put_u64(spec.time_hypotheses);
    w.put<double>(spec.k_min.value_or(default_k_min(receiver, waveform)));
    w.put<std::uint8_t>(filter ? 1 : 0);
    if (filter) w.put_vec(filter->taps);
    return sha256_hex(bytes.str());
}

void write_dictionary(std::ostream& out, const DictionaryGrid& grid, const std::string& key) {
    if (key.size() != kKeyLength) throw InvalidParameter("cache key must be a 64-character SHA-256 hex string");
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kVersion);
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    DictionaryCacheAccess::write(w, grid);
    if (!out) throw IoError("dictionary cache write failed");
}

std::optional<DictionaryGrid> read_dictionary(std::istream& in, const std::string& expected_key) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw IoError("not a dictionary cache file");
    Reader r(in);
    if (r.get<std::uint32_t>() != kVersion) return std::nullopt;
    std::string key(kKeyLength, '\0');
    if (!in.read(key.data(), static_cast<std::streamsize>(kKeyLength))) throw IoError("dictionary cache is truncated");
    if (key != expected_key) return std::nullopt;
    return DictionaryCacheAccess::read(r);
}

void save_dictionary(const std::filesystem::path& path, const DictionaryGrid& grid, const std::string& key) {
    // Write-then-rename so concurrent readers never see a partial file.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        write_dictionary(out, grid, key);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move dictionary cache into place: " + ec.message());
}

std::optional<DictionaryGrid> load_dictionary(const std::filesystem::path& path, const std::string& expected_key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        return read_dictionary(in, expected_key);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::filesystem::path dictionary_cache_path(const std::filesystem::path& dir, const std::string& key) {
    return dir / (key + ".dict");
}

CachedGrid cached_grid(const GridSpec& spec, const ReceiverConfig& receiver, const WaveformParams& waveform,
                       const std::optional<FilterCoeffs>& filter, const std::filesystem::path& cache_dir) {
    CachedGrid out;
    out.key = dictionary_cache_key(spec, receiver, waveform, filter);
    const auto path = dictionary_cache_path(cache_dir, out.key);
    if (auto grid = load_dictionary(path, out.key)) {
        out.grid = std::move(*grid);
        out.hit = true;
        return out;
    }
    out.grid = build_grid(spec, receiver, waveform);
    if (filter) out.grid = filter_dictionary(out.grid, *filter);
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    if (ec) throw IoError("cannot create cache directory '" + cache_dir.string() + "': " + ec.message());
    save_dictionary(path, out.grid, out.key);
    return out;
}

} // namespace fmcwim
