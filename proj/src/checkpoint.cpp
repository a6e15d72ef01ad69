#include <cstring>
#include <filesystem>
#include <fstream>

#include "dho/checkpoint.hpp"

namespace fs = std::filesystem;

namespace dho {

namespace {

constexpr char kMagic[4] = {'D', 'H', 'O', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

void put_u64(std::string& out, uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

void put_f64(std::string& out, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

void put_f32s(std::string& out, const std::vector<double>& values) {
    for (double v : values) {
        const float f = float(v);
        char b[4];
        std::memcpy(b, &f, 4);
        out.append(b, 4);
    }
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw DataError("truncated checkpoint");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    void f32s(std::vector<double>& out, size_t count) {
        need(4 * count);
        out.resize(count);
        for (size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, buf.data() + pos + 4 * i, 4);
            out[i] = f;
        }
        pos += 4 * count;
    }
};

void put_mlp(std::string& out, const Mlp& mlp) {
    put_u32(out, uint32_t(mlp.layer_sizes().size()));
    for (int s : mlp.layer_sizes()) put_u32(out, uint32_t(s));
    for (int l = 0; l < mlp.layer_count(); ++l) {
        put_f32s(out, mlp.weights(l));
        put_f32s(out, mlp.biases(l));
    }
}

Mlp read_mlp(Reader& r) {
    const uint32_t n_sizes = r.u32();
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) s = int(r.u32());
    Mlp mlp(sizes);
    for (int l = 0; l < mlp.layer_count(); ++l) {
        std::vector<double> w, b;
        r.f32s(w, mlp.weights(l).size());
        r.f32s(b, mlp.biases(l).size());
        mlp.weights(l) = w;
        mlp.biases(l) = b;
    }
    return mlp;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const GaussianCloud& c = ckpt.cloud;
    const size_t n = c.size();
    const int fd = c.feature_dim();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, uint32_t(fd));
    put_u64(out, n);
    put_u32(out, c.round());
    out.push_back(c.has_anchors() ? 1 : 0);

    for (size_t i = 0; i < n; ++i) {
        std::vector<double> rec;
        rec.reserve(14 + fd + 1);
        for (int k = 0; k < 3; ++k) rec.push_back(c.position[3 * i + k]);
        for (int k = 0; k < 3; ++k) rec.push_back(c.log_scale[3 * i + k]);
        for (int k = 0; k < 4; ++k) rec.push_back(c.rotation[4 * i + k]);
        rec.push_back(c.opacity_logit[i]);
        for (int k = 0; k < 3; ++k) rec.push_back(c.color[3 * i + k]);
        for (int k = 0; k < fd; ++k) rec.push_back(c.feature[i * fd + k]);
        rec.push_back(double(c.generation[i]));
        put_f32s(out, rec);
    }
    if (c.has_anchors()) {
        put_f32s(out, c.anchor_position);
        put_f32s(out, c.anchor_log_scale);
        put_f32s(out, c.anchor_rotation);
        put_f32s(out, c.anchor_opacity_logit);
        put_f32s(out, c.anchor_color);
        put_f32s(out, c.anchor_feature);
    }

    // Length-prefixed deformation block.
    std::string field;
    field.push_back(ckpt.has_field ? 1 : 0);
    if (ckpt.has_field) {
        const auto& cfg = ckpt.field.config();
        put_u32(field, uint32_t(cfg.nx));
        put_u32(field, uint32_t(cfg.ny));
        put_u32(field, uint32_t(cfg.nz));
        put_u32(field, uint32_t(cfg.nt));
        put_u32(field, uint32_t(cfg.channels));
        put_u32(field, uint32_t(cfg.hidden));
        put_f64(field, cfg.bbox_lo.x);
        put_f64(field, cfg.bbox_lo.y);
        put_f64(field, cfg.bbox_lo.z);
        put_f64(field, cfg.bbox_hi.x);
        put_f64(field, cfg.bbox_hi.y);
        put_f64(field, cfg.bbox_hi.z);
        put_f32s(field, ckpt.field.grid());
        put_mlp(field, ckpt.field.mlp());
    }
    put_u64(out, field.size());
    out += field;

    // Length-prefixed codec block.
    std::string codec;
    codec.push_back(ckpt.has_codec ? 1 : 0);
    if (ckpt.has_codec) {
        const auto& cfg = ckpt.codec.config();
        put_u32(codec, uint32_t(cfg.input_dim));
        put_u32(codec, uint32_t(cfg.latent_dim));
        put_u32(codec, uint32_t(cfg.hidden));
        put_mlp(codec, ckpt.codec.encoder());
        put_mlp(codec, ckpt.codec.decoder());
    }
    put_u64(out, codec.size());
    out += codec;

    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open for writing: " + tmp.string());
        f.write(out.data(), std::streamsize(out.size()));
        if (!f) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf};

    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw DataError("bad checkpoint magic");
    r.pos = 4;
    if (r.u32() != kVersion) throw DataError("unsupported checkpoint version");
    const int fd = int(r.u32());
    const uint64_t n = r.u64();
    const uint32_t round = r.u32();
    r.need(1);
    const bool has_anchors = buf[r.pos++] != 0;

    Checkpoint ckpt;
    ckpt.cloud = GaussianCloud(fd);
    GaussianCloud& c = ckpt.cloud;
    const size_t rec_len = 14 + size_t(fd) + 1;
    for (uint64_t i = 0; i < n; ++i) {
        std::vector<double> rec;
        r.f32s(rec, rec_len);
        Gaussian g;
        g.position = {rec[0], rec[1], rec[2]};
        g.log_scale = {rec[3], rec[4], rec[5]};
        g.rotation = {rec[6], rec[7], rec[8], rec[9]};
        g.opacity_logit = rec[10];
        g.color = {rec[11], rec[12], rec[13]};
        g.feature.assign(rec.begin() + 14, rec.begin() + 14 + fd);
        g.generation = uint32_t(rec[14 + fd]);
        c.push(g);
    }
    c.set_round(round);
    if (has_anchors) {
        r.f32s(c.anchor_position, 3 * n);
        r.f32s(c.anchor_log_scale, 3 * n);
        r.f32s(c.anchor_rotation, 4 * n);
        r.f32s(c.anchor_opacity_logit, n);
        r.f32s(c.anchor_color, 3 * n);
        r.f32s(c.anchor_feature, size_t(fd) * n);
        // record_anchors() flips the validity flag but overwrites the loaded
        // snapshots, so stash and restore them around it.
        std::vector<double> ap = c.anchor_position, al = c.anchor_log_scale,
                            ar = c.anchor_rotation, ao = c.anchor_opacity_logit,
                            ac = c.anchor_color, af = c.anchor_feature;
        c.record_anchors();
        c.anchor_position = ap;
        c.anchor_log_scale = al;
        c.anchor_rotation = ar;
        c.anchor_opacity_logit = ao;
        c.anchor_color = ac;
        c.anchor_feature = af;
    }

    {
        const uint64_t len = r.u64();
        const size_t block_end = r.pos + len;
        r.need(len);
        if (len > 0) {
            const bool present = buf[r.pos++] != 0;
            if (present) {
                DeformConfig cfg;
                cfg.nx = int(r.u32());
                cfg.ny = int(r.u32());
                cfg.nz = int(r.u32());
                cfg.nt = int(r.u32());
                cfg.channels = int(r.u32());
                cfg.hidden = int(r.u32());
                cfg.bbox_lo = {r.f64(), r.f64(), r.f64()};
                cfg.bbox_hi = {r.f64(), r.f64(), r.f64()};
                ckpt.field = DeformationField(cfg);
                std::vector<double> grid;
                r.f32s(grid, ckpt.field.grid_size());
                ckpt.field.grid() = grid;
                ckpt.field.mlp() = read_mlp(r);
                ckpt.has_field = true;
            }
        }
        r.pos = block_end;
    }
    {
        const uint64_t len = r.u64();
        const size_t block_end = r.pos + len;
        r.need(len);
        if (len > 0) {
            const bool present = buf[r.pos++] != 0;
            if (present) {
                CodecConfig cfg;
                cfg.input_dim = int(r.u32());
                cfg.latent_dim = int(r.u32());
                cfg.hidden = int(r.u32());
                ckpt.codec = FeatureCodec(cfg);
                ckpt.codec.encoder() = read_mlp(r);
                ckpt.codec.decoder() = read_mlp(r);
                ckpt.has_codec = true;
            }
        }
        r.pos = block_end;
    }
    return ckpt;
}

}  // namespace dho
