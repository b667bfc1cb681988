#include "pdfnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

namespace pdfnet {

// Archive layout (all integers little-endian):
//   magic "PDFNETCK" | u32 version | u64 manifest_len | manifest JSON bytes
//   u32 param_count, then per parameter:
//   u32 name_len | name | u8 dtype (1 = f32) | u8 rank | u32 dims[rank]
//   u64 payload_bytes | row-major f32 payload
static constexpr char kMagic[8] = {'P', 'D', 'F', 'N', 'E', 'T', 'C', 'K'};
static constexpr std::uint32_t kVersion = 1;
static constexpr std::uint8_t kDtypeF32 = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    template <typename U>
    U get_le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void get_raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;

    void need(std::size_t n) {
        if (data_.size() - pos_ < n) {
            throw std::runtime_error("checkpoint '" + path_ + "' is truncated");
        }
    }
};

std::array<int, 5> array5_from_json(const nlohmann::json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 5) {
        throw std::runtime_error(std::string("config field '") + key + "' must have 5 entries");
    }
    std::array<int, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = a[i].get<int>();
    return out;
}

}  // namespace

nlohmann::json config_to_json(const NetworkConfig& cfg) {
    return {{"input_h", cfg.input_h},
            {"input_w", cfg.input_w},
            {"backbone_widths", cfg.backbone_widths},
            {"backbone_depths", cfg.backbone_depths},
            {"dense_widths", cfg.dense_widths},
            {"compress_widths", cfg.compress_widths},
            {"fusion_width", cfg.fusion_width},
            {"variant", variant_name(cfg.variant)}};
}

NetworkConfig config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.input_h = j.at("input_h").get<int>();
    cfg.input_w = j.at("input_w").get<int>();
    cfg.backbone_widths = array5_from_json(j, "backbone_widths");
    cfg.backbone_depths = array5_from_json(j, "backbone_depths");
    cfg.dense_widths = array5_from_json(j, "dense_widths");
    cfg.compress_widths = array5_from_json(j, "compress_widths");
    cfg.fusion_width = j.at("fusion_width").get<int>();
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    cfg.validate();
    return cfg;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json manifest = {{"format_version", kVersion},
                               {"config", config_to_json(ckpt.config)},
                               {"step", ckpt.step},
                               {"seed", ckpt.seed}};
    const std::string manifest_bytes = manifest.dump();

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, manifest_bytes.size());
    out += manifest_bytes;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, value] : ckpt.params) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(kDtypeF32));
        out.push_back(static_cast<char>(value.rank()));
        for (int d = 0; d < value.rank(); ++d) {
            put_le<std::uint32_t>(out, static_cast<std::uint32_t>(value.dim(d)));
        }
        put_le<std::uint64_t>(out, value.size() * sizeof(float));
        out.append(reinterpret_cast<const char*>(value.data()), value.size() * sizeof(float));
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

void save_checkpoint(const Model<float>& model, std::int64_t step, std::uint64_t seed,
                     const std::string& path) {
    Checkpoint ckpt;
    ckpt.config = model.config();
    ckpt.step = step;
    ckpt.seed = seed;
    for (const auto& p : model.params()) ckpt.params.emplace_back(p.name, p.value);
    save_checkpoint(ckpt, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(data), path);

    if (r.get_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw std::runtime_error("'" + path + "' is not a checkpoint archive");
    }
    const auto version = r.get_le<std::uint32_t>();
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto manifest_len = r.get_le<std::uint64_t>();
    const nlohmann::json manifest = nlohmann::json::parse(r.get_bytes(manifest_len));
    if (manifest.at("format_version").get<std::uint32_t>() != kVersion) {
        throw std::runtime_error("checkpoint manifest version mismatch in '" + path + "'");
    }

    Checkpoint ckpt;
    ckpt.config = config_from_json(manifest.at("config"));
    ckpt.step = manifest.at("step").get<std::int64_t>();
    ckpt.seed = manifest.at("seed").get<std::uint64_t>();

    const auto count = r.get_le<std::uint32_t>();
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get_le<std::uint32_t>();
        const std::string name = r.get_bytes(name_len);
        if (!seen.insert(name).second) {
            throw std::runtime_error("duplicate parameter '" + name + "' in '" + path + "'");
        }
        const auto dtype = r.get_le<std::uint8_t>();
        if (dtype != kDtypeF32) {
            throw std::runtime_error("parameter '" + name + "' has unsupported dtype " +
                                     std::to_string(dtype));
        }
        const auto rank = r.get_le<std::uint8_t>();
        if (rank != 1 && rank != 4) {
            throw std::runtime_error("parameter '" + name + "' has unsupported rank " +
                                     std::to_string(rank));
        }
        std::array<int, 4> dims{1, 1, 1, 1};
        for (int d = 0; d < rank; ++d) {
            const auto v = r.get_le<std::uint32_t>();
            if (v == 0 || v > (1u << 24)) {
                throw std::runtime_error("parameter '" + name + "' has invalid dimension");
            }
            dims[static_cast<std::size_t>(d)] = static_cast<int>(v);
        }
        Tensor<float> value = rank == 1 ? Tensor<float>(dims[0])
                                        : Tensor<float>(dims[0], dims[1], dims[2], dims[3]);
        const auto payload = r.get_le<std::uint64_t>();
        if (payload != value.size() * sizeof(float)) {
            throw std::runtime_error("parameter '" + name + "' payload size mismatch");
        }
        r.get_raw(value.data(), payload);
        ckpt.params.emplace_back(name, std::move(value));
    }
    if (!r.exhausted()) throw std::runtime_error("trailing bytes in checkpoint '" + path + "'");
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, Model<float>& model) {
    if (!(ckpt.config == model.config())) {
        throw std::runtime_error("checkpoint config does not match the model (checkpoint variant " +
                                 std::string(variant_name(ckpt.config.variant)) + ", model " +
                                 variant_name(model.config().variant) + ")");
    }
    std::set<std::string> loaded;
    for (const auto& [name, value] : ckpt.params) {
        if (!model.params().contains(name)) {
            throw std::runtime_error("checkpoint parameter '" + name + "' is not in the model");
        }
        auto& p = model.params().at(name);
        if (!p.value.same_shape(value)) {
            throw std::runtime_error("checkpoint parameter '" + name + "' has shape " +
                                     value.shape_str() + ", expected " + p.value.shape_str());
        }
        p.value = value;
        loaded.insert(name);
    }
    for (const auto& p : model.params()) {
        if (!loaded.count(p.name)) {
            throw std::runtime_error("checkpoint is missing parameter '" + p.name + "'");
        }
    }
}

}  // namespace pdfnet
