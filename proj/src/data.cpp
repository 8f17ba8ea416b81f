#include "madpot/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "madpot/errors.hpp"

#include "json.hpp"

namespace madpot {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Separable box blur with edge-clamped window.
void box_blur(Matrix& img, int radius, int passes) {
    const int side = img.rows;
    const double inv = 1.0 / (2 * radius + 1);
    Matrix tmp(side, side);
    for (int pass = 0; pass < passes; ++pass) {
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += img(y, std::clamp(x + k, 0, side - 1));
                tmp(y, x) = acc * inv;
            }
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += tmp(std::clamp(y + k, 0, side - 1), x);
                img(y, x) = acc * inv;
            }
    }
}

}  // namespace

Matrix synth_normal_image(const SyntheticSpec& spec, SplitMix64& rng) {
    const int side = spec.image_side;
    Matrix img(side, side);
    for (double& v : img.data) v = 0.5 + rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
    box_blur(img, spec.blur_radius, spec.blur_passes);
    for (double& v : img.data) v = clamp01(v);
    return img;
}

BlobResult synth_abnormal_image(const SyntheticSpec& spec, SplitMix64& rng) {
    const int side = spec.image_side;
    BlobResult out;
    out.image = synth_normal_image(spec, rng);
    out.mask = Matrix(side, side, 0.0);
    const int count = rng.uniform_int(spec.blob_count_min, spec.blob_count_max);
    for (int b = 0; b < count; ++b) {
        const int cx = rng.uniform_int(0, side - 1);
        const int cy = rng.uniform_int(0, side - 1);
        const double rx = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
        const double ry = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
        const double intensity = rng.uniform(spec.blob_intensity_min, spec.blob_intensity_max);
        const int x0 = std::max(0, cx - static_cast<int>(rx) - 1);
        const int x1 = std::min(side - 1, cx + static_cast<int>(rx) + 1);
        const int y0 = std::max(0, cy - static_cast<int>(ry) - 1);
        const int y1 = std::min(side - 1, cy + static_cast<int>(ry) + 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x - cx) / rx;
                const double dy = (y - cy) / ry;
                if (dx * dx + dy * dy <= 1.0) {
                    out.image(y, x) = clamp01(out.image(y, x) + intensity);
                    out.mask(y, x) = 1.0;
                }
            }
    }
    return out;
}

Manifest generate_dataset(const SyntheticSpec& spec, int n_normal, int n_abnormal,
                          std::uint64_t seed, const std::filesystem::path& out_dir,
                          bool with_masks) {
    if (n_normal < 0 || n_abnormal < 0)
        throw InvalidInputError("generate_dataset: counts must be nonnegative");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) throw IoError("generate_dataset: cannot create " + (out_dir / "images").string());
    if (with_masks) {
        fs::create_directories(out_dir / "masks", ec);
        if (ec) throw IoError("generate_dataset: cannot create " + (out_dir / "masks").string());
    }

    SplitMix64 rng(seed);
    Manifest manifest;
    char name[32];
    int index = 0;
    auto emit = [&](const Matrix& image, const Matrix* mask, int label) {
        std::snprintf(name, sizeof(name), "images/%04d.pgm", index);
        ManifestRecord rec;
        rec.image_path = name;
        rec.label = label;
        write_pgm(out_dir / rec.image_path, image);
        if (with_masks && mask) {
            std::snprintf(name, sizeof(name), "masks/%04d.pgm", index);
            rec.mask_path = name;
            write_pgm(out_dir / *rec.mask_path, *mask);
        }
        manifest.records.push_back(std::move(rec));
        ++index;
    };

    for (int i = 0; i < n_normal; ++i) {
        const Matrix img = synth_normal_image(spec, rng);
        const Matrix zero(spec.image_side, spec.image_side, 0.0);
        emit(img, &zero, 1);
    }
    for (int i = 0; i < n_abnormal; ++i) {
        const BlobResult br = synth_abnormal_image(spec, rng);
        emit(br.image, &br.mask, 0);
    }
    write_manifest(out_dir / "manifest.jsonl", manifest);
    return manifest;
}

Matrix read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t at = 0;
    auto skip_space = [&] {
        while (at < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[at]))) {
                ++at;
            } else if (bytes[at] == '#') {
                while (at < bytes.size() && bytes[at] != '\n') ++at;
            } else {
                break;
            }
        }
    };
    auto token = [&]() -> std::string {
        skip_space();
        const std::size_t start = at;
        while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
        if (start == at)
            throw ParseError("read_pgm: truncated header at byte offset " + std::to_string(start) +
                             " in " + path.string());
        return bytes.substr(start, at - start);
    };

    const std::string magic = token();
    if (magic == "P2")
        throw ParseError("read_pgm: ASCII PGM (P2) is not supported: " + path.string());
    if (magic != "P5") throw ParseError("read_pgm: bad magic '" + magic + "' in " + path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw ParseError("read_pgm: malformed header near byte offset " + std::to_string(at) +
                         " in " + path.string());
    }
    if (w < 1 || h < 1) throw ParseError("read_pgm: bad dimensions in " + path.string());
    if (maxval != 255) throw ParseError("read_pgm: only maxval 255 is supported: " + path.string());
    if (at >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[at])))
        throw ParseError("read_pgm: missing header terminator in " + path.string());
    ++at;  // single whitespace after maxval

    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - at < need)
        throw ParseError("read_pgm: truncated payload at byte offset " + std::to_string(at) +
                         " (need " + std::to_string(need) + " bytes) in " + path.string());
    Matrix img(h, w);
    for (std::size_t i = 0; i < need; ++i)
        img.data[i] = static_cast<unsigned char>(bytes[at + i]) / 255.0;
    return img;
}

void write_pgm(const std::filesystem::path& path, const Matrix& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path.string());
    out << "P5\n" << image.cols << " " << image.rows << "\n255\n";
    std::string payload(image.size(), '\0');
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image.data[i], 0.0, 1.0);
        payload[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write_pgm: write failed for " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_manifest: cannot open " + path.string());
    Manifest manifest;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("read_manifest: line " + std::to_string(line_no) + ": " + e.what());
        }
        ManifestRecord rec;
        if (!j.contains("image") || !j["image"].is_string())
            throw ParseError("read_manifest: line " + std::to_string(line_no) +
                             ": missing string key 'image'");
        rec.image_path = j["image"].get<std::string>();
        if (j.contains("mask")) {
            if (!j["mask"].is_string())
                throw ParseError("read_manifest: line " + std::to_string(line_no) +
                                 ": 'mask' must be a string");
            rec.mask_path = j["mask"].get<std::string>();
        }
        if (!j.contains("label") || !j["label"].is_number_integer())
            throw ParseError("read_manifest: line " + std::to_string(line_no) +
                             ": missing integer key 'label'");
        rec.label = j["label"].get<int>();
        if (rec.label != 0 && rec.label != 1)
            throw ParseError("read_manifest: line " + std::to_string(line_no) +
                             ": label must be 0 or 1");
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_manifest: cannot open " + path.string());
    for (const ManifestRecord& rec : manifest.records) {
        nlohmann::ordered_json j;
        j["image"] = rec.image_path;
        if (rec.mask_path) j["mask"] = *rec.mask_path;
        j["label"] = rec.label;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write_manifest: write failed for " + path.string());
}

std::vector<Sample> load_samples(const std::filesystem::path& manifest_path) {
    const Manifest manifest = read_manifest(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    std::vector<Sample> samples;
    samples.reserve(manifest.records.size());
    for (const ManifestRecord& rec : manifest.records) {
        Sample s;
        s.image = read_pgm(base / rec.image_path);
        s.label = rec.label;
        if (rec.mask_path) {
            Matrix m = read_pgm(base / *rec.mask_path);
            for (double& v : m.data) v = v > 0.5 ? 1.0 : 0.0;
            s.mask = std::move(m);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace madpot
