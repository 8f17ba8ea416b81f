#include "madpot/model.hpp"

#include <cmath>

#include "madpot/errors.hpp"
#include "madpot/numkit.hpp"
#include "madpot/rng.hpp"

namespace madpot {

void ModelConfig::validate() const {
    if (image_side < 1 || patch_side < 1 || image_side % patch_side != 0)
        throw InvalidInputError("ModelConfig: image_side must be a positive multiple of patch_side");
    if (feat_dim < 1 || token_dim < 1) throw InvalidInputError("ModelConfig: feature dims must be >= 1");
    if (num_prompts < 1) throw InvalidInputError("ModelConfig: num_prompts must be >= 1");
    if (context_len < 1) throw InvalidInputError("ModelConfig: context_len must be >= 1");
    if (gamma < 0.0 || gamma > 1.0) throw InvalidInputError("ModelConfig: gamma must lie in [0, 1]");
}

const char* to_string(VisionMode m) {
    switch (m) {
        case VisionMode::none: return "none";
        case VisionMode::adapter: return "adapter";
        case VisionMode::projector: return "projector";
        case VisionMode::both: return "both";
    }
    return "both";
}

VisionMode vision_from_string(const std::string& s) {
    if (s == "none") return VisionMode::none;
    if (s == "adapter") return VisionMode::adapter;
    if (s == "projector") return VisionMode::projector;
    if (s == "both") return VisionMode::both;
    throw InvalidInputError("unknown vision mode: " + s);
}

namespace {

Matrix draw_matrix(SplitMix64& rng, int rows, int cols, double fan_in) {
    Matrix m(rows, cols);
    const double scale = 1.0 / std::sqrt(fan_in);
    for (double& v : m.data) v = rng.uniform(-1.0, 1.0) * scale;
    return m;
}

}  // namespace

FrozenEncoder make_encoder(const ModelConfig& cfg) {
    cfg.validate();
    SplitMix64 rng(cfg.encoder_seed);
    FrozenEncoder enc;
    const int pp = cfg.patch_side * cfg.patch_side;
    enc.w1 = draw_matrix(rng, pp, cfg.feat_dim, pp);
    enc.w2 = draw_matrix(rng, cfg.feat_dim, cfg.feat_dim, cfg.feat_dim);
    double total = 0.0;
    for (double& w : enc.mix) {
        w = rng.next_double();
        total += w;
    }
    for (double& w : enc.mix) w /= total;
    enc.w_txt = draw_matrix(rng, cfg.token_dim, cfg.feat_dim, cfg.token_dim);
    return enc;
}

AdapterOut adapter_apply(const Matrix& f, const LevelParams& params, double gamma, bool residual) {
    Matrix shared = matmul(f, params.w_shared);
    for (double& v : shared.data) v = v > 0.0 ? v : 0.0;
    AdapterOut out;
    out.o_det = matmul(shared, params.w_det);
    for (double& v : out.o_det.data) v = v > 0.0 ? v : 0.0;
    out.o_seg = matmul(shared, params.w_seg);
    for (double& v : out.o_seg.data) v = v > 0.0 ? v : 0.0;
    if (residual) out.f_res = add_scaled(shared, f, gamma, 1.0 - gamma);
    return out;
}

Matrix patchify(const Matrix& image, const ModelConfig& cfg) {
    if (image.rows != cfg.image_side || image.cols != cfg.image_side)
        throw ShapeError("patchify: image does not match config size");
    const int gs = cfg.grid_side();
    const int ps = cfg.patch_side;
    Matrix patches(gs * gs, ps * ps);
    for (int pr = 0; pr < gs; ++pr)
        for (int pc = 0; pc < gs; ++pc) {
            double* dst = patches.row(pr * gs + pc);
            for (int y = 0; y < ps; ++y)
                for (int x = 0; x < ps; ++x) dst[y * ps + x] = image(pr * ps + y, pc * ps + x);
        }
    return patches;
}

Matrix encode_level1(const Matrix& patches, const FrozenEncoder& enc) {
    Matrix f = matmul(patches, enc.w1);
    for (double& v : f.data) v = std::tanh(v);
    return f;
}

Matrix encode_level2(const Matrix& f_res, const FrozenEncoder& enc, int grid_side) {
    if (f_res.rows != grid_side * grid_side) throw ShapeError("encode_level2: rows != grid^2");
    Matrix mixed(f_res.rows, f_res.cols, 0.0);
    auto clamp_i = [grid_side](int v) { return v < 0 ? 0 : (v >= grid_side ? grid_side - 1 : v); };
    for (int r = 0; r < grid_side; ++r)
        for (int c = 0; c < grid_side; ++c) {
            double* dst = mixed.row(r * grid_side + c);
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const double w = enc.mix[static_cast<std::size_t>((dr + 1) * 3 + (dc + 1))];
                    const double* src = f_res.row(clamp_i(r + dr) * grid_side + clamp_i(c + dc));
                    for (int k = 0; k < f_res.cols; ++k) dst[k] += w * src[k];
                }
        }
    Matrix f = matmul(mixed, enc.w2);
    for (double& v : f.data) v = std::tanh(v);
    return f;
}

PromptSet encode_prompts(const PromptTokens& tokens, const FrozenEncoder& enc, int num_prompts,
                         int context_len) {
    const int token_dim = enc.w_txt.rows;
    if (tokens.v.rows != num_prompts * context_len || tokens.v.cols != token_dim)
        throw ShapeError("encode_prompts: token matrix shape mismatch");
    if (static_cast<int>(tokens.cls.size()) != num_prompts)
        throw ShapeError("encode_prompts: class token count mismatch");

    PromptSet set;
    set.p = Matrix(num_prompts, enc.w_txt.cols);
    for (int k = 0; k < num_prompts; ++k) {
        Matrix mean(1, token_dim, 0.0);
        for (int l = 0; l < context_len; ++l) {
            const double* row = tokens.v.row(k * context_len + l);
            for (int c = 0; c < token_dim; ++c) mean(0, c) += row[c];
        }
        for (int c = 0; c < token_dim; ++c)
            mean(0, c) = (mean(0, c) + tokens.cls[static_cast<std::size_t>(k)](0, c)) /
                         static_cast<double>(context_len + 1);
        Matrix z = matmul(mean, enc.w_txt);
        for (double& v : z.data) v = std::tanh(v);
        z = l2_normalize_rows(z);
        for (int c = 0; c < z.cols; ++c) set.p(k, c) = z(0, c);
    }
    set.fused = Matrix(1, set.p.cols, 0.0);
    for (int k = 0; k < num_prompts; ++k)
        for (int c = 0; c < set.p.cols; ++c) set.fused(0, c) += set.p(k, c);
    for (double& v : set.fused.data) v /= static_cast<double>(num_prompts);
    return set;
}

const std::vector<std::string>& normal_class_names() {
    static const std::vector<std::string> names = {"flawless", "healthy", "normal", "unblemished"};
    return names;
}

const std::vector<std::string>& abnormal_class_names() {
    static const std::vector<std::string> names = {"pathological", "anomalous", "diseased",
                                                   "with anomalies"};
    return names;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

Matrix class_token(const std::string& name, int token_dim) {
    SplitMix64 rng(fnv1a64(name));
    Matrix t(1, token_dim);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

std::vector<Matrix> class_tokens(const std::vector<std::string>& names, int num_prompts,
                                 int token_dim) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(num_prompts));
    for (int k = 0; k < num_prompts; ++k)
        out.push_back(class_token(names[static_cast<std::size_t>(k) % names.size()], token_dim));
    return out;
}

}  // namespace madpot
