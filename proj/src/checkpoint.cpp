#include "wbc/checkpoint.hpp"

#include <bit>
#include <cstddef>
#include <stdexcept>

#include "wbc/errors.hpp"
#include "wbc/fsio.hpp"

namespace wbc::checkpoint {
namespace {

// ---- little-endian primitives ------------------------------------------

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_i32(std::vector<std::uint8_t>& out, std::int32_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Cursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) {
            throw CheckpointError("truncated checkpoint: wanted " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(pos) + ", file has " +
                                  std::to_string(bytes.size()));
        }
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
};

nn::LayerSpec read_spec(Cursor& c) {
    const std::uint8_t kind = c.u8();
    if (kind > static_cast<std::uint8_t>(nn::LayerKind::Softmax)) {
        throw CheckpointError("unknown layer kind " + std::to_string(int(kind)));
    }
    nn::LayerSpec s;
    s.kind = static_cast<nn::LayerKind>(kind);
    s.filters = c.i32();
    s.kernel = c.i32();
    s.stride = c.i32();
    s.padding = c.i32();
    s.window = c.i32();
    s.pool_stride = c.i32();
    s.units = c.i32();
    s.rate = c.f64();
    return s;
}

void write_spec(std::vector<std::uint8_t>& out, const nn::LayerSpec& s) {
    put_u8(out, static_cast<std::uint8_t>(s.kind));
    put_i32(out, s.filters);
    put_i32(out, s.kernel);
    put_i32(out, s.stride);
    put_i32(out, s.padding);
    put_i32(out, s.window);
    put_i32(out, s.pool_stride);
    put_i32(out, s.units);
    put_f64(out, s.rate);
}

}  // namespace

std::vector<std::uint8_t> encode(ensemble::EnsembleModel& model) {
    if (model.configs.size() != std::size_t(ensemble::kMemberCount) ||
        model.graphs.size() != std::size_t(ensemble::kMemberCount)) {
        throw std::invalid_argument("encode: model must hold exactly " +
                                    std::to_string(ensemble::kMemberCount) +
                                    " member configs and graphs");
    }

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put_u32(out, kFormatVersion);
    put_u64(out, model.training_seed);
    put_u8(out, static_cast<std::uint8_t>(model.combiner));
    put_u8(out, static_cast<std::uint8_t>(ensemble::kMemberCount));
    for (double w : model.weights) put_f64(out, w);
    for (double m : model.stats.mean) put_f64(out, m);
    for (double s : model.stats.stddev) put_f64(out, s);

    const auto& shape = model.configs[0].input_shape;
    put_i32(out, shape[1]);
    put_i32(out, shape[2]);
    put_i32(out, model.configs[0].num_classes);

    for (int mi = 0; mi < ensemble::kMemberCount; ++mi) {
        const ensemble::MemberConfig& cfg = model.configs[std::size_t(mi)];
        put_u8(out, static_cast<std::uint8_t>(cfg.id));
        put_u32(out, static_cast<std::uint32_t>(cfg.layers.size()));
        for (const nn::LayerSpec& s : cfg.layers) write_spec(out, s);

        std::vector<nn::Tensor<float>*> params = model.graphs[std::size_t(mi)].parameters();
        put_u32(out, static_cast<std::uint32_t>(params.size()));
        for (const nn::Tensor<float>* p : params) {
            put_u32(out, static_cast<std::uint32_t>(p->shape.size()));
            for (int d : p->shape) put_i32(out, d);
            put_u64(out, static_cast<std::uint64_t>(p->values.size()));
            for (float v : p->values) put_f32(out, v);
        }
    }
    return out;
}

ensemble::EnsembleModel decode(const std::vector<std::uint8_t>& bytes) {
    Cursor c{bytes};

    c.need(4);
    for (std::size_t i = 0; i < kMagic.size(); ++i) {
        if (bytes[i] != kMagic[i]) throw CheckpointError("not a wbclab checkpoint (bad magic)");
    }
    c.pos = 4;
    const std::uint32_t version = c.u32();
    if (version != kFormatVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (this build reads version " + std::to_string(kFormatVersion) + ")");
    }

    ensemble::EnsembleModel model;
    model.training_seed = c.u64();

    const std::uint8_t combiner = c.u8();
    if (combiner > static_cast<std::uint8_t>(ensemble::Combiner::MaxConfidence)) {
        throw CheckpointError("unknown combiner code " + std::to_string(int(combiner)));
    }
    model.combiner = static_cast<ensemble::Combiner>(combiner);

    const int members = c.u8();
    if (members != ensemble::kMemberCount) {
        throw CheckpointError("checkpoint holds " + std::to_string(members) +
                              " members, expected " + std::to_string(ensemble::kMemberCount));
    }
    for (double& w : model.weights) w = c.f64();
    for (double& m : model.stats.mean) m = c.f64();
    for (double& s : model.stats.stddev) s = c.f64();

    const int height = c.i32();
    const int width = c.i32();
    const int num_classes = c.i32();
    if (height < 1 || width < 1 || num_classes < 2) {
        throw CheckpointError("implausible geometry " + std::to_string(height) + "x" +
                              std::to_string(width) + " with " + std::to_string(num_classes) +
                              " classes");
    }

    for (int mi = 0; mi < members; ++mi) {
        ensemble::MemberConfig cfg;
        cfg.id = static_cast<char>(c.u8());
        cfg.input_shape = {3, height, width};
        cfg.num_classes = num_classes;
        const std::uint32_t spec_count = c.u32();
        cfg.layers.reserve(spec_count);
        for (std::uint32_t si = 0; si < spec_count; ++si) cfg.layers.push_back(read_spec(c));

        // Rebuild the graph from the specs (the geometry checks re-run here),
        // then overwrite its freshly initialized parameters with the stored
        // values so the restored graph predicts bit-identically.
        nn::ComputeGraph<float> graph = ensemble::build_member(cfg, /*init_seed=*/0);
        std::vector<nn::Tensor<float>*> params = graph.parameters();

        const std::uint32_t tensor_count = c.u32();
        if (tensor_count != params.size()) {
            throw CheckpointError("member " + std::string(1, cfg.id) + ": checkpoint has " +
                                  std::to_string(tensor_count) + " parameter tensors, graph needs " +
                                  std::to_string(params.size()));
        }
        for (std::uint32_t ti = 0; ti < tensor_count; ++ti) {
            const std::uint32_t ndim = c.u32();
            if (ndim == 0 || ndim > 8) {
                throw CheckpointError("tensor " + std::to_string(ti) + ": implausible rank " +
                                      std::to_string(ndim));
            }
            std::vector<int> dims(ndim);
            std::size_t expect = 1;
            for (std::uint32_t di = 0; di < ndim; ++di) {
                dims[di] = c.i32();
                if (dims[di] < 1) throw CheckpointError("tensor dimension must be positive");
                expect *= std::size_t(dims[di]);
            }
            const std::uint64_t count = c.u64();
            if (count != expect) {
                throw CheckpointError("tensor " + std::to_string(ti) + ": value count " +
                                      std::to_string(count) + " does not match its shape");
            }
            nn::Tensor<float>* dst = params[ti];
            if (dst->shape != dims) {
                throw CheckpointError("member " + std::string(1, cfg.id) + " tensor " +
                                      std::to_string(ti) + ": stored shape " +
                                      nn::Tensor<float>::shape_string(dims) + " != graph shape " +
                                      nn::Tensor<float>::shape_string(dst->shape));
            }
            for (std::uint64_t vi = 0; vi < count; ++vi) dst->values[vi] = c.f32();
        }

        model.configs.push_back(std::move(cfg));
        model.graphs.push_back(std::move(graph));
    }

    if (c.pos != bytes.size()) {
        throw CheckpointError("checkpoint has " + std::to_string(bytes.size() - c.pos) +
                              " trailing bytes");
    }
    return model;
}

void save(const std::string& path, ensemble::EnsembleModel& model) {
    const std::vector<std::uint8_t> bytes = encode(model);
    io::write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

ensemble::EnsembleModel load(const std::string& path) {
    const std::string text = io::read_file(path);
    return decode(std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace wbc::checkpoint
