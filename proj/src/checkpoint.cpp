#include "tristage/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tristage {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'I', 'S', 'T', 'C', 'K', 'P'};

uint32_t dtype_code(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return 0;
        case torch::kFloat64: return 1;
        case torch::kInt64: return 2;
        case torch::kUInt8: return 3;
        default: throw DataError("unsupported tensor dtype in archive");
    }
}

torch::ScalarType code_dtype(uint32_t c) {
    switch (c) {
        case 0: return torch::kFloat32;
        case 1: return torch::kFloat64;
        case 2: return torch::kInt64;
        case 3: return torch::kUInt8;
        default: throw DataError("archive entry has unknown dtype code " + std::to_string(c));
    }
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("archive truncated");
    return v;
}

}  // namespace

void save_archive(const std::string& path, const ArchiveEntries& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    write_pod<uint32_t>(os, kCheckpointSchema);
    write_pod<uint32_t>(os, 0);
    write_pod<uint64_t>(os, entries.size());
    for (const auto& [name, tensor] : entries) {
        Tensor t = tensor.detach().cpu().contiguous();
        write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint32_t>(os, dtype_code(t.scalar_type()));
        write_pod<uint32_t>(os, static_cast<uint32_t>(t.dim()));
        for (int64_t d = 0; d < t.dim(); ++d) write_pod<int64_t>(os, t.size(d));
        uint64_t nbytes = static_cast<uint64_t>(t.numel()) * t.element_size();
        write_pod<uint64_t>(os, nbytes);
        os.write(reinterpret_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    }
    if (!os) throw DataError("failed writing archive '" + path + "'");
}

std::map<std::string, Tensor> load_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open archive '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("'" + path + "' is not a parameter archive (bad magic)");
    uint32_t schema = read_pod<uint32_t>(is);
    if (schema != kCheckpointSchema)
        throw DataError("archive schema " + std::to_string(schema) + " unsupported (expected " +
                        std::to_string(kCheckpointSchema) + ")");
    read_pod<uint32_t>(is);  // reserved
    uint64_t count = read_pod<uint64_t>(is);
    std::map<std::string, Tensor> out;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        torch::ScalarType dtype = code_dtype(read_pod<uint32_t>(is));
        uint32_t ndim = read_pod<uint32_t>(is);
        std::vector<int64_t> dims(ndim);
        for (auto& d : dims) d = read_pod<int64_t>(is);
        uint64_t nbytes = read_pod<uint64_t>(is);
        Tensor t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
        if (static_cast<uint64_t>(t.numel()) * t.element_size() != nbytes)
            throw DataError("archive entry '" + name + "' has inconsistent byte count");
        is.read(reinterpret_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
        if (!is) throw DataError("archive truncated in entry '" + name + "'");
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

void save_model(const std::string& path, torch::nn::Module& module, const ArchiveEntries& extra) {
    ArchiveEntries entries;
    for (const auto& p : module.named_parameters()) entries.emplace_back(p.key(), p.value());
    for (const auto& b : module.named_buffers()) entries.emplace_back(b.key(), b.value());
    entries.insert(entries.end(), extra.begin(), extra.end());
    save_archive(path, entries);
}

std::map<std::string, Tensor> load_model(const std::string& path, torch::nn::Module& module,
                                         bool strict) {
    auto archive = load_archive(path);
    torch::NoGradGuard guard;
    auto assign = [&](const std::string& key, Tensor dst) {
        auto it = archive.find(key);
        if (it == archive.end()) {
            if (strict) throw DataError("archive is missing model tensor '" + key + "'");
            return;
        }
        if (it->second.sizes() != dst.sizes())
            throw DataError("archive tensor '" + key + "' has shape " +
                            c10::str(it->second.sizes()) + ", model expects " + c10::str(dst.sizes()));
        dst.copy_(it->second.to(dst.scalar_type()));
        archive.erase(it);
    };
    for (const auto& p : module.named_parameters()) assign(p.key(), p.value());
    for (const auto& b : module.named_buffers()) assign(b.key(), b.value());
    if (strict) {
        for (const auto& [k, v] : archive) {
            if (k.rfind("opt.", 0) == 0 || k.rfind("rng.", 0) == 0 || k.rfind("meta.", 0) == 0)
                continue;
            throw DataError("archive has unexpected tensor '" + k + "'");
        }
    }
    return archive;  // leftover trainer-state entries
}

void load_reference_backbone(torch::nn::Module& model, const std::string& path, bool share_leaves) {
    auto archive = load_archive(path);
    torch::NoGradGuard guard;

    auto translate = [](const std::string& key) -> std::string {
        // torchvision bottleneck downsample is a Sequential: 0=conv, 1=norm
        std::string k = key;
        auto pos = k.find("downsample.0");
        if (pos != std::string::npos) k.replace(pos, 12, "downsample_conv");
        pos = k.find("downsample.1");
        if (pos != std::string::npos) k.replace(pos, 12, "downsample_norm");
        return k;
    };

    auto try_assign = [&](const std::string& model_key, Tensor dst) {
        std::string src;
        if (model_key.rfind("stem.", 0) == 0)
            src = model_key.substr(5);  // conv1/bn1/layer1 names match directly
        else if (model_key.rfind("leaf1.", 0) == 0)
            src = model_key.substr(6);
        else if (model_key.rfind("leaf2.", 0) == 0 && share_leaves)
            src = model_key.substr(6);
        else
            return;
        for (const auto& [k, v] : archive) {
            if (translate(k) == src) {
                if (v.sizes() != dst.sizes())
                    throw DataError("reference tensor '" + k + "' shape " + c10::str(v.sizes()) +
                                    " does not fit model tensor '" + model_key + "' " +
                                    c10::str(dst.sizes()) +
                                    "; reference weights require the full-width profile");
                dst.copy_(v.to(dst.scalar_type()));
                return;
            }
        }
        if (src.find("num_batches_tracked") == std::string::npos)
            throw DataError("reference archive lacks tensor for '" + model_key + "'");
    };

    for (const auto& p : model.named_parameters()) try_assign(p.key(), p.value());
    for (const auto& b : model.named_buffers()) try_assign(b.key(), b.value());
}

}  // namespace tristage
