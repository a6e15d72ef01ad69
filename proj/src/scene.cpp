#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "dho/rng.hpp"
#include "dho/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dho {

Vec3d SceneObject::center_at(double t) const {
    switch (trajectory) {
        case Trajectory::Static: return center;
        case Trajectory::Linear: return center + velocity * t;
        case Trajectory::Circular: {
            const double a = 2.0 * std::numbers::pi * t;
            return center + Vec3d{orbit_radius * std::cos(a), orbit_radius * std::sin(a), 0.0};
        }
    }
    return center;
}

void SceneSpec::validate() const {
    if (image_size < 16) throw SpecValidation("image_size must be >= 16");
    if (train_views < 1 || heldout_views < 0) throw SpecValidation("bad view counts");
    if (timestamps < 1) throw SpecValidation("timestamps must be >= 1");
    if (focal <= 0) throw SpecValidation("focal must be positive");
    if (objects.size() > 3) throw SpecValidation("at most 3 foreground objects");
    for (const auto& o : objects) {
        if (o.name.empty()) throw SpecValidation("object name empty");
        if (o.half_extent.x <= 0) throw SpecValidation("object extent must be positive");
    }
}

std::vector<uint16_t> Codebook::find(const std::string& name) const {
    std::vector<uint16_t> out;
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) out.push_back(uint16_t(i));
    return out;
}

namespace {

uint64_t hash2(int64_t x, int64_t y, uint64_t seed) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    h ^= uint64_t(x) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 31)) * 0x94d049bb133111ebull;
    h ^= uint64_t(y) * 0xd6e8feb86659fd93ull;
    h = h ^ (h >> 29);
    return h * 0x2545f4914f6cdd1dull;
}

double hash_unit(uint64_t h) { return double(h >> 11) * 0x1.0p-53; }

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    int object = -1;  // -1 = backdrop
    Vec3d point;
};

bool intersect_sphere(const Vec3d& o, const Vec3d& d, const Vec3d& c, double r, double& t) {
    const Vec3d oc = o - c;
    const double b = oc.dot(d);
    const double disc = b * b - (oc.dot(oc) - r * r);
    if (disc < 0) return false;
    const double s = std::sqrt(disc);
    double tt = -b - s;
    if (tt < 1e-6) tt = -b + s;
    if (tt < 1e-6) return false;
    t = tt;
    return true;
}

bool intersect_box(const Vec3d& o, const Vec3d& d, const Vec3d& c, const Vec3d& h, double& t) {
    double t0 = 1e-6, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double lo = c[a] - h[a], hi = c[a] + h[a];
        const double da = d[a];
        if (std::abs(da) < 1e-12) {
            if (o[a] < lo || o[a] > hi) return false;
            continue;
        }
        double ta = (lo - o[a]) / da, tb = (hi - o[a]) / da;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    t = t0;
    return true;
}

struct TraceResult {
    Vec3d color;
    int object = -1;  // -1 = backdrop
    int part = 0;     // 0 = top, 1 = bottom
    int subpart = 0;  // 0 = right, 1 = left (within the part)
};

Vec3d part_color(const SceneObject& obj, int part, int subpart) {
    Vec3d c = obj.base_color;
    if (part == 1) c = Vec3d{c.y, c.z, c.x};  // rotated hue for the lower part
    if (subpart == 1) c = c * 0.62;
    return c;
}

TraceResult trace(const SceneSpec& spec, const std::vector<Vec3d>& centers, const Vec3d& origin,
                  const Vec3d& dir, uint64_t tex_seed) {
    Hit best;
    // Backdrop plane z = backdrop_z, facing the cameras.
    if (dir.z < -1e-9) {
        const double t = (spec.backdrop_z - origin.z) / dir.z;
        if (t > 1e-6) {
            best.t = t;
            best.object = -1;
            best.point = origin + dir * t;
        }
    }
    for (size_t i = 0; i < spec.objects.size() && i < centers.size(); ++i) {
        const auto& obj = spec.objects[i];
        double t;
        const bool hit = obj.kind == PrimitiveKind::Sphere
                             ? intersect_sphere(origin, dir, centers[i], obj.half_extent.x, t)
                             : intersect_box(origin, dir, centers[i], obj.half_extent, t);
        if (hit && t < best.t) {
            best.t = t;
            best.object = int(i);
            best.point = origin + dir * t;
        }
    }

    TraceResult out;
    if (best.object < 0) {
        if (!std::isfinite(best.t)) {
            out.color = {0, 0, 0};
            return out;
        }
        Vec3d c{0.72, 0.70, 0.66};
        if (!spec.flat_background) {
            const double cell = 0.4;
            const int64_t cx = int64_t(std::floor(best.point.x / cell));
            const int64_t cy = int64_t(std::floor(best.point.y / cell));
            const double sign = ((cx + cy) & 1) ? 1.0 : -1.0;
            c += Vec3d{1, 1, 1} * (sign * spec.checker_contrast);
            if (spec.noise_amplitude > 0) {
                // Dark clutter dots on a fine grid.
                const double ncell = 0.1;
                const int64_t nx = int64_t(std::floor(best.point.x / ncell));
                const int64_t ny = int64_t(std::floor(best.point.y / ncell));
                const uint64_t h = hash2(nx, ny, tex_seed);
                if (hash_unit(h) < 0.4) {
                    const double jx = 0.2 + 0.6 * hash_unit(hash2(nx, ny, tex_seed ^ 0xabcd));
                    const double jy = 0.2 + 0.6 * hash_unit(hash2(nx, ny, tex_seed ^ 0x1234));
                    const double dx = best.point.x - (double(nx) + jx) * ncell;
                    const double dy = best.point.y - (double(ny) + jy) * ncell;
                    if (dx * dx + dy * dy < 0.034 * 0.034)
                        c = c * (1.0 - 0.85 * spec.noise_amplitude);
                }
            }
        }
        out.color = c;
        return out;
    }

    const auto& obj = spec.objects[best.object];
    const Vec3d local = best.point - centers[best.object];
    out.object = best.object;
    out.part = local.y >= 0 ? 0 : 1;
    out.subpart = local.x >= 0 ? 0 : 1;
    out.color = part_color(obj, out.part, out.subpart);
    return out;
}

Codebook make_codebook(const SceneSpec& spec, uint64_t seed) {
    Codebook book;
    book.dim = spec.feature_dim_hi;
    book.entries.push_back({"object", -1});
    book.entries.push_back({"things", -1});
    book.entries.push_back({"stuff", -1});
    book.entries.push_back({"texture", -1});
    book.entries.push_back({"background", -1});
    for (const auto& obj : spec.objects) {
        book.entries.push_back({obj.name, int(Scale::Whole)});
        book.entries.push_back({obj.name + "/top", int(Scale::Part)});
        book.entries.push_back({obj.name + "/bottom", int(Scale::Part)});
        book.entries.push_back({obj.name + "/top/right", int(Scale::Sub)});
        book.entries.push_back({obj.name + "/top/left", int(Scale::Sub)});
        book.entries.push_back({obj.name + "/bottom/right", int(Scale::Sub)});
        book.entries.push_back({obj.name + "/bottom/left", int(Scale::Sub)});
    }
    // Independent concepts (canonicals, background, per-object whole) get
    // mutually orthonormal rows; part and subpart rows are unit-norm
    // perturbations of their parent so the class hierarchy nests in embedding
    // space the way it nests in the image.
    const size_t n_objects = spec.objects.size();
    const size_t n_base = size_t(Codebook::kCanonicalCount) + 1 + n_objects;
    const size_t n_extra = n_objects * 6;  // 2 part + 4 subpart directions each
    if (int(n_base + n_extra) > book.dim)
        throw SpecValidation("codebook needs feature_dim_hi >= number of directions");

    Rng rng(seed ^ 0xc0deb00cull);
    std::vector<std::vector<double>> basis(n_base + n_extra, std::vector<double>(book.dim));
    for (auto& row : basis)
        for (auto& v : row) v = rng.normal();
    for (size_t i = 0; i < basis.size(); ++i) {
        auto& r = basis[i];
        for (size_t j = 0; j < i; ++j) {
            double dot = 0;
            for (int k = 0; k < book.dim; ++k) dot += r[k] * basis[j][k];
            for (int k = 0; k < book.dim; ++k) r[k] -= dot * basis[j][k];
        }
        double norm = 0;
        for (double v : r) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw SpecValidation("degenerate codebook direction");
        for (auto& v : r) v /= norm;
    }

    book.rows.assign(book.entries.size(), std::vector<double>(book.dim));
    for (size_t i = 0; i < n_base; ++i) book.rows[i] = basis[i];

    const auto normalize = [&](std::vector<double>& r) {
        double norm = 0;
        for (double v : r) norm += v * v;
        norm = std::sqrt(norm);
        for (auto& v : r) v /= norm;
    };
    for (size_t o = 0; o < n_objects; ++o) {
        const size_t whole = size_t(Codebook::kBackgroundRow) + 1 + o * 7;
        const std::vector<double>& w = book.rows[whole];
        const std::vector<double>* part_dir[2] = {&basis[n_base + o * 6],
                                                  &basis[n_base + o * 6 + 1]};
        for (int p = 0; p < 2; ++p) {
            std::vector<double>& part = book.rows[whole + 1 + size_t(p)];
            for (int k = 0; k < book.dim; ++k) part[k] = w[k] + 0.5 * (*part_dir[p])[k];
            normalize(part);
            for (int s = 0; s < 2; ++s) {
                const std::vector<double>& sub_dir = basis[n_base + o * 6 + 2 + size_t(p) * 2 + s];
                std::vector<double>& sub = book.rows[whole + 3 + size_t(p) * 2 + s];
                for (int k = 0; k < book.dim; ++k)
                    sub[k] = w[k] + 0.5 * (*part_dir[p])[k] + 0.35 * sub_dir[k];
                normalize(sub);
            }
        }
    }
    return book;
}

// Class row for an object at a scale; rows are laid out per object after the
// canonical + background block.
uint16_t class_row(int object, int part, int subpart, Scale scale) {
    const int base = Codebook::kBackgroundRow + 1 + object * 7;
    switch (scale) {
        case Scale::Whole: return uint16_t(base);
        case Scale::Part: return uint16_t(base + 1 + part);
        case Scale::Sub: return uint16_t(base + 3 + part * 2 + subpart);
    }
    return Codebook::kBackgroundRow;
}

void surface_samples(const SceneSpec& spec, SceneDataset& ds, uint64_t seed) {
    // Surface samples over backdrop + objects (across the trajectory) with
    // their flat-shaded colors; these seed the Gaussian cloud.
    Rng rng(seed ^ 0x5eed5ull);
    const int K = spec.init_points;
    ds.init_positions.reserve(3 * size_t(K));
    ds.init_colors.reserve(3 * size_t(K));

    const double extent = 2.2;
    const int n_back = spec.objects.empty() ? K : K / 2;
    for (int i = 0; i < n_back; ++i) {
        const Vec3d p{rng.uniform(-extent, extent), rng.uniform(-extent, extent), spec.backdrop_z};
        const Vec3d o = p + Vec3d{0, 0, 2.0};
        const TraceResult tr = trace(spec, {}, o, {0, 0, -1}, seed);
        ds.init_positions.insert(ds.init_positions.end(), {p.x, p.y, p.z});
        ds.init_colors.insert(ds.init_colors.end(), {tr.color.x, tr.color.y, tr.color.z});
    }
    const int n_obj = K - n_back;
    for (int i = 0; i < n_obj && !spec.objects.empty(); ++i) {
        const size_t oi = rng.uniform_index(spec.objects.size());
        const auto& obj = spec.objects[oi];
        const double t = spec.timestamps == 1 ? 0.0 : rng.uniform();
        const Vec3d c = obj.center_at(t);
        Vec3d p;
        if (obj.kind == PrimitiveKind::Sphere) {
            Vec3d dir{rng.normal(), rng.normal(), rng.normal()};
            dir = dir.normalized();
            p = c + dir * obj.half_extent.x;
        } else {
            const int face = int(rng.uniform_index(6));
            Vec3d local{rng.uniform(-1, 1) * obj.half_extent.x,
                        rng.uniform(-1, 1) * obj.half_extent.y,
                        rng.uniform(-1, 1) * obj.half_extent.z};
            const int axis = face / 2;
            local[axis] = (face % 2 ? 1.0 : -1.0) * obj.half_extent[axis];
            p = c + local;
        }
        const Vec3d local = p - c;
        const Vec3d color = part_color(obj, local.y >= 0 ? 0 : 1, local.x >= 0 ? 0 : 1);
        ds.init_positions.insert(ds.init_positions.end(), {p.x, p.y, p.z});
        ds.init_colors.insert(ds.init_colors.end(), {color.x, color.y, color.z});
    }
}

}  // namespace

SceneSpec bundled_scene(const std::string& name) {
    SceneSpec spec;
    spec.name = name;
    SceneObject box;
    box.kind = PrimitiveKind::Box;
    box.name = "box";
    box.center = {-0.8, 0.05, -0.1};
    box.half_extent = {0.55, 0.55, 0.35};
    box.trajectory = Trajectory::Linear;
    box.velocity = {1.6, 0, 0};
    box.base_color = {0.82, 0.20, 0.16};

    if (name == "static-textured") {
        SceneObject sphere;
        sphere.kind = PrimitiveKind::Sphere;
        sphere.name = "sphere";
        sphere.center = {0.0, 0.1, -0.2};
        sphere.half_extent = {0.5, 0.5, 0.5};
        sphere.trajectory = Trajectory::Static;
        sphere.base_color = {0.20, 0.35, 0.80};
        spec.timestamps = 1;
        spec.checker_contrast = 0.05;
        spec.objects = {sphere};
    } else if (name == "dynamic-clean") {
        spec.objects = {box};
    } else if (name == "dynamic-noisy") {
        spec.noise_amplitude = 0.5;
        spec.objects = {box};
    } else if (name == "dynamic-multiscale") {
        box.half_extent = {0.7, 0.7, 0.4};
        box.center = {-0.5, 0.05, -0.1};
        box.velocity = {1.0, 0, 0};
        spec.objects = {box};
    } else {
        throw SpecValidation("unknown bundled scene: " + name);
    }
    return spec;
}

SceneDataset generate_scene(const SceneSpec& spec, uint64_t seed) {
    spec.validate();
    SceneDataset ds;
    ds.spec = spec;
    ds.codebook = make_codebook(spec, seed);

    const int V = spec.train_views + spec.heldout_views;
    const int T = spec.timestamps;
    const int S = spec.image_size;

    // Held-out views spread evenly across the arc.
    std::vector<uint8_t> heldout(V, 0);
    for (int k = 0; k < spec.heldout_views; ++k) {
        const int idx = (2 * k + 1) * V / (2 * spec.heldout_views);
        heldout[std::min(idx, V - 1)] = 1;
    }

    const double arc = spec.arc_degrees * std::numbers::pi / 180.0;
    ds.frames.reserve(size_t(V) * T);
    for (int v = 0; v < V; ++v) {
        const double az = V == 1 ? 0.0 : -arc / 2 + arc * double(v) / double(V - 1);
        const Vec3d eye{spec.camera_radius * std::sin(az), spec.camera_height,
                        spec.camera_radius * std::cos(az)};
        for (int ti = 0; ti < T; ++ti) {
            const double t = T == 1 ? 0.0 : double(ti) / double(T - 1);
            Frame frame;
            frame.camera = make_lookat_camera(eye, {0, 0, -0.2}, spec.focal, S, S, t);
            frame.view = v;
            frame.time_index = ti;
            frame.timestamp = t;

            std::vector<Vec3d> centers;
            for (const auto& o : spec.objects) centers.push_back(o.center_at(t));

            frame.image = ImageD(S, S, 3);
            frame.mask = MaskImage(S, S, 1, 0);
            for (auto& cm : frame.classes) cm = ClassImage(S, S, 1, Codebook::kBackgroundRow);

            const Vec3d origin = frame.camera.world_to_cam.transposed_mul(
                Vec3d{0, 0, 0} - frame.camera.translation);
            const auto ray_dir = [&](double px, double py) {
                const Vec3d d{(px - frame.camera.cx) / frame.camera.fx,
                              (py - frame.camera.cy) / frame.camera.fy, 1.0};
                return frame.camera.world_to_cam.transposed_mul(d).normalized();
            };

            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x) {
                    Vec3d acc{};
                    for (int sy = 0; sy < 2; ++sy)
                        for (int sx = 0; sx < 2; ++sx) {
                            const TraceResult tr =
                                trace(spec, centers, origin,
                                      ray_dir(x + 0.25 + 0.5 * sx, y + 0.25 + 0.5 * sy), seed);
                            acc += tr.color;
                        }
                    frame.image.at(y, x, 0) = std::clamp(acc.x * 0.25, 0.0, 1.0);
                    frame.image.at(y, x, 1) = std::clamp(acc.y * 0.25, 0.0, 1.0);
                    frame.image.at(y, x, 2) = std::clamp(acc.z * 0.25, 0.0, 1.0);

                    const TraceResult center_tr =
                        trace(spec, centers, origin, ray_dir(x + 0.5, y + 0.5), seed);
                    if (center_tr.object >= 0) {
                        frame.mask.at(y, x) = 1;
                        for (int s = 0; s < 3; ++s)
                            frame.classes[s].at(y, x) = class_row(
                                center_tr.object, center_tr.part, center_tr.subpart, Scale(s));
                    }
                }
            const uint32_t index = uint32_t(ds.frames.size());
            (heldout[v] ? ds.heldout_split : ds.train_split).push_back(index);
            ds.frames.push_back(std::move(frame));
        }
    }

    surface_samples(spec, ds, seed);

    // Scene bounds: backdrop extent, swept objects, and a margin.
    ds.bbox_lo = {-2.4, -2.4, spec.backdrop_z - 0.2};
    ds.bbox_hi = {2.4, 2.4, 1.4};
    return ds;
}

namespace {

json camera_to_json(const Camera& c) {
    json j;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    j["timestamp"] = c.timestamp;
    std::vector<double> r;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(c.world_to_cam.m[i][k]);
    j["world_to_cam"] = r;
    j["translation"] = {c.translation.x, c.translation.y, c.translation.z};
    return j;
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    c.width = j.at("width");
    c.height = j.at("height");
    c.timestamp = j.at("timestamp");
    const auto r = j.at("world_to_cam").get<std::vector<double>>();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) c.world_to_cam.m[i][k] = r[size_t(3 * i + k)];
    const auto t = j.at("translation").get<std::vector<double>>();
    c.translation = {t[0], t[1], t[2]};
    return c;
}

std::string frame_name(size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu.png", i);
    return buf;
}

}  // namespace

void save_scene(const SceneDataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "frames");
    fs::create_directories(fs::path(dir) / "masks");
    for (int s = 0; s < 3; ++s)
        fs::create_directories(fs::path(dir) / "classes" / scale_dir(Scale(s)));

    json manifest;
    manifest["name"] = ds.spec.name;
    manifest["image_size"] = ds.spec.image_size;
    manifest["timestamps"] = ds.spec.timestamps;
    manifest["train_views"] = ds.spec.train_views;
    manifest["heldout_views"] = ds.spec.heldout_views;
    manifest["flat_background"] = ds.spec.flat_background;
    manifest["noise_amplitude"] = ds.spec.noise_amplitude;
    manifest["bbox_lo"] = {ds.bbox_lo.x, ds.bbox_lo.y, ds.bbox_lo.z};
    manifest["bbox_hi"] = {ds.bbox_hi.x, ds.bbox_hi.y, ds.bbox_hi.z};
    manifest["train_split"] = ds.train_split;
    manifest["heldout_split"] = ds.heldout_split;
    manifest["init_point_count"] = ds.init_positions.size() / 3;

    json frames = json::array();
    for (size_t i = 0; i < ds.frames.size(); ++i) {
        const Frame& f = ds.frames[i];
        json jf;
        jf["file"] = frame_name(i);
        jf["view"] = f.view;
        jf["time_index"] = f.time_index;
        jf["timestamp"] = f.timestamp;
        jf["camera"] = camera_to_json(f.camera);
        frames.push_back(jf);

        write_png_rgb8((fs::path(dir) / "frames" / frame_name(i)).string(), f.image);
        ImageD m(f.mask.height, f.mask.width, 1);
        for (size_t k = 0; k < m.data.size(); ++k) m.data[k] = f.mask.data[k] ? 1.0 : 0.0;
        write_png_gray8((fs::path(dir) / "masks" / frame_name(i)).string(), m);
        for (int s = 0; s < 3; ++s)
            write_png_gray16(
                (fs::path(dir) / "classes" / scale_dir(Scale(s)) / frame_name(i)).string(),
                f.classes[s]);
    }
    manifest["frames"] = frames;

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw DataError("cannot write manifest in " + dir);
    mf << manifest.dump(1) << "\n";

    {
        std::ofstream out(fs::path(dir) / "codebook.bin", std::ios::binary);
        for (const auto& row : ds.codebook.rows) {
            std::vector<float> f32(row.begin(), row.end());
            out.write(reinterpret_cast<const char*>(f32.data()),
                      std::streamsize(f32.size() * sizeof(float)));
        }
        json jc;
        jc["dim"] = ds.codebook.dim;
        jc["count"] = ds.codebook.rows.size();
        json entries = json::array();
        for (const auto& e : ds.codebook.entries)
            entries.push_back({{"name", e.name}, {"scale", e.scale}});
        jc["entries"] = entries;
        std::ofstream side(fs::path(dir) / "codebook.json");
        side << jc.dump(1) << "\n";
    }

    {
        std::ofstream out(fs::path(dir) / "init_points.bin", std::ios::binary);
        const size_t k = ds.init_positions.size() / 3;
        for (size_t i = 0; i < k; ++i) {
            const float rec[6] = {
                float(ds.init_positions[3 * i]),  float(ds.init_positions[3 * i + 1]),
                float(ds.init_positions[3 * i + 2]), float(ds.init_colors[3 * i]),
                float(ds.init_colors[3 * i + 1]), float(ds.init_colors[3 * i + 2])};
            out.write(reinterpret_cast<const char*>(rec), sizeof rec);
        }
    }
}

SceneDataset load_scene(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw DataError("cannot open scene manifest in " + dir);
    json manifest = json::parse(mf);

    SceneDataset ds;
    ds.spec.name = manifest.at("name");
    ds.spec.image_size = manifest.at("image_size");
    ds.spec.timestamps = manifest.at("timestamps");
    ds.spec.train_views = manifest.at("train_views");
    ds.spec.heldout_views = manifest.at("heldout_views");
    ds.spec.flat_background = manifest.at("flat_background");
    ds.spec.noise_amplitude = manifest.at("noise_amplitude");
    const auto lo = manifest.at("bbox_lo").get<std::vector<double>>();
    const auto hi = manifest.at("bbox_hi").get<std::vector<double>>();
    ds.bbox_lo = {lo[0], lo[1], lo[2]};
    ds.bbox_hi = {hi[0], hi[1], hi[2]};
    ds.train_split = manifest.at("train_split").get<std::vector<uint32_t>>();
    ds.heldout_split = manifest.at("heldout_split").get<std::vector<uint32_t>>();

    for (const auto& jf : manifest.at("frames")) {
        Frame f;
        const std::string file = jf.at("file");
        f.view = jf.at("view");
        f.time_index = jf.at("time_index");
        f.timestamp = jf.at("timestamp");
        f.camera = camera_from_json(jf.at("camera"));
        f.image = read_png_rgb8((fs::path(dir) / "frames" / file).string());
        const ImageD m = read_png_gray8((fs::path(dir) / "masks" / file).string());
        f.mask = MaskImage(m.height, m.width, 1);
        for (size_t k = 0; k < m.data.size(); ++k) f.mask.data[k] = m.data[k] > 0.5 ? 1 : 0;
        for (int s = 0; s < 3; ++s)
            f.classes[s] =
                read_png_gray16((fs::path(dir) / "classes" / scale_dir(Scale(s)) / file).string());
        ds.frames.push_back(std::move(f));
    }

    {
        std::ifstream side(fs::path(dir) / "codebook.json");
        if (!side) throw DataError("cannot open codebook.json in " + dir);
        json jc = json::parse(side);
        ds.codebook.dim = jc.at("dim");
        const size_t count = jc.at("count");
        for (const auto& je : jc.at("entries"))
            ds.codebook.entries.push_back({je.at("name"), je.at("scale")});
        std::ifstream in(fs::path(dir) / "codebook.bin", std::ios::binary);
        if (!in) throw DataError("cannot open codebook.bin in " + dir);
        ds.codebook.rows.assign(count, std::vector<double>(ds.codebook.dim));
        std::vector<float> buf(ds.codebook.dim);
        for (auto& row : ds.codebook.rows) {
            in.read(reinterpret_cast<char*>(buf.data()),
                    std::streamsize(buf.size() * sizeof(float)));
            if (size_t(in.gcount()) != buf.size() * sizeof(float))
                throw DataError("truncated codebook.bin");
            std::copy(buf.begin(), buf.end(), row.begin());
        }
    }

    {
        const size_t k = manifest.at("init_point_count");
        std::ifstream in(fs::path(dir) / "init_points.bin", std::ios::binary);
        if (in) {
            ds.init_positions.resize(3 * k);
            ds.init_colors.resize(3 * k);
            for (size_t i = 0; i < k; ++i) {
                float rec[6];
                in.read(reinterpret_cast<char*>(rec), sizeof rec);
                if (size_t(in.gcount()) != sizeof rec) throw DataError("truncated init_points.bin");
                ds.init_positions[3 * i] = rec[0];
                ds.init_positions[3 * i + 1] = rec[1];
                ds.init_positions[3 * i + 2] = rec[2];
                ds.init_colors[3 * i] = rec[3];
                ds.init_colors[3 * i + 1] = rec[4];
                ds.init_colors[3 * i + 2] = rec[5];
            }
        }
    }
    return ds;
}

}  // namespace dho
