#include "bisp/checkpoint.hpp"

#include "bisp/errors.hpp"
#include "bisp/variant_json.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>

namespace bisp {

using nlohmann::json;

namespace {

std::string dtype_name(torch::ScalarType t) {
    switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    default: throw Error("checkpoint: unsupported tensor dtype");
    }
}

torch::ScalarType dtype_from(const std::string& s) {
    if (s == "float32") return torch::kFloat32;
    if (s == "float64") return torch::kFloat64;
    if (s == "int64") return torch::kInt64;
    throw DataError("checkpoint: unknown dtype " + s);
}

std::map<std::string, torch::Tensor> named_state(torch::nn::Module& module) {
    std::map<std::string, torch::Tensor> state;
    for (const auto& p : module.named_parameters()) state[p.key()] = p.value();
    for (const auto& b : module.named_buffers()) state[b.key()] = b.value();
    return state;
}

} // namespace

void save_checkpoint(BiSPModel& model, int64_t step, const std::filesystem::path& file) {
    auto state = named_state(*model);
    json header;
    header["variant"] = model->variant();
    header["resolution"] = model->resolution();
    header["step"] = step;
    header["tensors"] = json::array();
    std::vector<torch::Tensor> payload;
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : state) {
        auto t = tensor.detach().contiguous().cpu();
        const std::uint64_t nbytes = t.numel() * t.element_size();
        header["tensors"].push_back({{"name", name},
                                     {"dtype", dtype_name(t.scalar_type())},
                                     {"shape", t.sizes().vec()},
                                     {"offset", offset},
                                     {"nbytes", nbytes}});
        offset += nbytes;
        payload.push_back(t);
    }
    const std::string text = header.dump();

    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + file.string());
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t header_len = text.size();
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : payload) {
        out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    if (!out) throw Error("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + file.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw DataError(file.string() + " is not a checkpoint (bad magic)");
    }
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (!in || version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("truncated checkpoint header");

    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const auto payload_start = in.tellg();

    Checkpoint ck;
    ck.model = build_variant(header.at("variant").get<VariantSpec>(), header.at("resolution").get<int64_t>());
    ck.step = header.at("step").get<int64_t>();
    auto state = named_state(*ck.model);

    std::map<std::string, json> table;
    for (const auto& entry : header.at("tensors")) table[entry.at("name").get<std::string>()] = entry;

    torch::NoGradGuard guard;
    for (auto& [name, tensor] : state) {
        auto it = table.find(name);
        if (it == table.end()) throw DataError("checkpoint is missing tensor " + name);
        const auto& entry = it->second;
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        if (shape != tensor.sizes().vec() || dtype_from(entry.at("dtype")) != tensor.scalar_type()) {
            throw DataError("checkpoint tensor " + name + " has an unexpected shape or dtype");
        }
        const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
        auto buffer = torch::empty(shape, torch::TensorOptions().dtype(tensor.scalar_type()));
        if (static_cast<std::uint64_t>(buffer.numel() * buffer.element_size()) != nbytes) {
            throw DataError("checkpoint tensor " + name + " has an inconsistent byte count");
        }
        in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        in.read(static_cast<char*>(buffer.data_ptr()), static_cast<std::streamsize>(nbytes));
        if (!in) throw DataError("truncated checkpoint payload for " + name);
        tensor.copy_(buffer);
    }
    return ck;
}

} // namespace bisp
