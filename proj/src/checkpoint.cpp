#include "ean/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace ean {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint truncated");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw std::runtime_error("checkpoint string length implausible");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("checkpoint truncated");
    return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

std::string read_header(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a checkpoint file (bad magic)");
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    return get_string(in);
}

}  // namespace

void save_checkpoint(const Supernet& net, const std::string& config_digest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, 8);
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, config_digest);
    put<std::uint64_t>(out, net.steps_trained);
    const auto params = net.parameters();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() * 2));
    for (const Parameter* p : params) {
        put_tensor(out, p->name, p->value);
        put_tensor(out, p->name + ".momentum", p->momentum);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::string read_checkpoint_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_header(in);
}

Supernet load_checkpoint(const BackboneConfig& config, const std::string& expected_digest,
                         const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    const std::string digest = read_header(in);
    if (digest != expected_digest) {
        throw std::runtime_error("checkpoint digest " + digest + " does not match config digest " + expected_digest);
    }
    Supernet net(config, 0);
    net.steps_trained = get<std::uint64_t>(in);
    const auto count = get<std::uint32_t>(in);
    std::map<std::string, Tensor> blobs;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in);
        const auto rank = get<std::uint32_t>(in);
        if (rank > 8) throw std::runtime_error("checkpoint blob rank implausible");
        Shape shape(rank);
        for (auto& d : shape) d = get<std::uint64_t>(in);
        std::vector<double> data(shape_volume(shape));
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint truncated in blob " + name);
        blobs.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    for (Parameter* p : net.parameters()) {
        for (auto [key, target] : {std::pair{p->name, &p->value}, std::pair{p->name + ".momentum", &p->momentum}}) {
            auto it = blobs.find(key);
            if (it == blobs.end()) throw std::runtime_error("checkpoint is missing blob " + key);
            if (it->second.shape() != target->shape()) {
                throw std::runtime_error("checkpoint blob " + key + " has shape " + shape_string(it->second.shape()) +
                                         ", expected " + shape_string(target->shape()));
            }
            *target = std::move(it->second);
        }
    }
    return net;
}

}  // namespace ean
